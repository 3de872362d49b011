//! The book chapters from `book/src`, mounted as rustdoc so their code
//! blocks compile and run under `cargo test --doc`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/circuit-model.md")]
pub mod circuit_model {}

#[doc = include_str!("../../../book/src/normal-modes.md")]
pub mod normal_modes_chapter {}

#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}

#[doc = include_str!("../../../book/src/spectra.md")]
pub mod spectra {}

#[doc = include_str!("../../../book/src/perturbation.md")]
pub mod perturbation_chapter {}

#[doc = include_str!("../../../book/src/scattering.md")]
pub mod scattering_chapter {}

#[doc = include_str!("../../../book/src/fitting.md")]
pub mod fitting {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
