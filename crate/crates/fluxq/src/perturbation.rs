//! Second-order perturbative treatment of the readout-qubit coupling.
//!
//! The cosine is expanded to second order in the small mixing coefficient
//! lambda3. With the decoupled qubit eigenbasis {|mu>, eps_mu}, the energy
//! correction to |n mu> is
//!
//! ```text
//! d eps_{n mu} = E_J (lambda3 phi_R^ZPF)^2 (n + 1/2) <mu| cos(phi_Q - phi_ext) |mu>
//!   + E_J^2 (lambda3 phi_R^ZPF)^2 sum_{mu' != mu}
//!       [(2n+1)(eps_mu - eps_mu') + f_R] / [(eps_mu - eps_mu')^2 - f_R^2]
//!       |<mu'| sin(phi_Q - phi_ext) |mu>|^2
//! ```
//!
//! in GHz, with lambda4 absorbed into the qubit phase. Denominators crossing
//! zero mark the flux points where this expansion diverges; they are flagged
//! but the value is still returned, so the divergence can be plotted.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingBlocks, TruncationScheme};
use crate::normal_modes::NormalModeBasis;
use crate::params::FluxPoint;

/// One perturbed level: eps_{n mu} plus its correction, GHz.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedLevel {
    pub n: usize,
    pub mu: usize,
    /// Decoupled energy f_R n + eps_mu.
    pub eps: f64,
    /// Second-order correction.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct PerturbedSpectrum {
    pub levels: Vec<PerturbedLevel>,
    /// Qubit-block truncation used for the eigenbasis and the mu' sum.
    pub m0: usize,
    /// (mu, mu') pairs whose denominator fell below the divergence threshold.
    pub divergent_pairs: Vec<(usize, usize)>,
    /// Magnitude of the last mu' term relative to the total second-order sum
    /// for the worst level; large values mean the truncated sum has not
    /// converged.
    pub last_term_ratio: f64,
}

impl PerturbedSpectrum {
    pub fn level(&self, n: usize, mu: usize) -> Result<&PerturbedLevel> {
        self.levels
            .iter()
            .find(|l| l.n == n && l.mu == mu)
            .ok_or(Error::LevelOutOfRange { n, mu })
    }

    /// Corrected energy eps + delta.
    pub fn energy(&self, n: usize, mu: usize) -> Result<f64> {
        self.level(n, mu).map(|l| l.eps + l.delta)
    }

    pub fn is_divergent(&self) -> bool {
        !self.divergent_pairs.is_empty()
    }
}

/// Denominator threshold below which the expansion is flagged divergent
/// (1 MHz^2 in GHz^2).
const DIVERGENCE_THRESHOLD: f64 = 1e-6;

/// Perturbed energies for n = 0..=n0 and mu = 0..=m0.
pub fn perturbative_spectrum(
    basis: &NormalModeBasis,
    e_j: f64,
    flux: FluxPoint,
    n0: usize,
    m0: usize,
) -> Result<PerturbedSpectrum> {
    let trunc = TruncationScheme::new(1, m0)?;
    let blocks = CouplingBlocks::new(basis, trunc);
    let dec = blocks.decoupled(e_j, flux)?;
    let eps = &dec.eps;
    let vecs = &dec.qubit_vecs;

    // cos/sin of (lambda4 phi_Q - phi_ext) rotated into the qubit eigenbasis
    let dim = m0 + 1;
    let (sin_f, cos_f) = flux.radians().sin_cos();
    let cos_q = crate::oscillator_ops::cos_matrix(basis.lambda4 * basis.phi_zpf_q, dim);
    let sin_q = crate::oscillator_ops::sin_matrix(basis.lambda4 * basis.phi_zpf_q, dim);
    let cos_shift: DMatrix<f64> = &cos_q * cos_f + &sin_q * sin_f;
    let sin_shift: DMatrix<f64> = &sin_q * cos_f - &cos_q * sin_f;
    let cos_eig = vecs.transpose() * cos_shift * vecs;
    let sin_eig = vecs.transpose() * sin_shift * vecs;

    let coupling = e_j * (basis.lambda3 * basis.phi_zpf_r).powi(2);
    let f_r = basis.f_r;

    let mut divergent = Vec::new();
    let mut last_ratio = 0.0_f64;
    let mut levels = Vec::with_capacity((n0 + 1) * dim);
    for mu in 0..dim {
        // denominator scan once per mu
        for mu_p in 0..dim {
            if mu_p == mu {
                continue;
            }
            let gap = eps[mu] - eps[mu_p];
            if (gap * gap - f_r * f_r).abs() < DIVERGENCE_THRESHOLD
                && !divergent.contains(&(mu_p, mu))
            {
                divergent.push((mu, mu_p));
            }
        }
        for n in 0..=n0 {
            let first = coupling * (n as f64 + 0.5) * cos_eig[(mu, mu)];
            let mut second = 0.0;
            let mut last_term = 0.0;
            for mu_p in 0..dim {
                if mu_p == mu {
                    continue;
                }
                let gap = eps[mu] - eps[mu_p];
                let elem = sin_eig[(mu_p, mu)];
                let term = ((2 * n + 1) as f64 * gap + f_r) / (gap * gap - f_r * f_r)
                    * elem
                    * elem;
                second += term;
                last_term = term;
            }
            second *= e_j * coupling;
            last_term *= e_j * coupling;
            if second.abs() > 0.0 {
                last_ratio = last_ratio.max((last_term / second).abs());
            }
            levels.push(PerturbedLevel {
                n,
                mu,
                eps: f_r * n as f64 + eps[mu],
                delta: first + second,
            });
        }
    }
    Ok(PerturbedSpectrum { levels, m0, divergent_pairs: divergent, last_term_ratio: last_ratio })
}

/// Dispersive shift from the perturbed levels, GHz.
pub fn perturbative_chi(spectrum: &PerturbedSpectrum) -> Result<f64> {
    let e = |n, mu| spectrum.energy(n, mu);
    Ok((e(1, 1)? - e(0, 1)?) - (e(1, 0)? - e(0, 0)?))
}
