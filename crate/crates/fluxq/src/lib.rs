//! Quantization of an inductively-coupled fluxonium-resonator circuit in the
//! dressed normal-mode basis.
//!
//! The crate takes the five lumped elements and Josephson energy of the
//! reduced two-mode circuit, decouples the linearized circuit into dressed
//! normal modes, assembles the truncated Hamiltonian with exact
//! Laguerre-polynomial cosine matrix elements, and derives energy spectra,
//! dispersive shifts, inherited Kerr anharmonicities, second-order
//! perturbative corrections, state-dependent two-port scattering parameters,
//! and least-squares parameter fits to spectroscopy data.
//!
//! Start with [`params::CircuitParams`] and [`hamiltonian::spectrum_at`]:
//!
//! ```
//! use fluxq::params::{CircuitParams, FluxPoint};
//! use fluxq::hamiltonian::{spectrum_at, TruncationScheme};
//!
//! let params = CircuitParams::new(20.3, 15.6, 5.3, 386.0, 6.20, 4.5)?;
//! let spec = spectrum_at(&params, FluxPoint::from_phi0(0.5), TruncationScheme::default())?;
//! let chi_mhz = spec.dispersive_shift()? * 1e3;
//! assert!(chi_mhz > 50.0 && chi_mhz < 70.0);
//! # Ok::<(), fluxq::Error>(())
//! ```
//!
//! The `book/` directory holds a chapter-by-chapter guide; its code blocks
//! are compiled and run as doc-tests through the [`guide`] module.

pub mod error;
pub mod fit;
pub mod guide;
pub mod hamiltonian;
pub mod normal_modes;
pub mod oscillator_ops;
pub mod params;
pub mod perturbation;
pub mod scattering;

pub use error::{Error, ErrorKind, Result};
