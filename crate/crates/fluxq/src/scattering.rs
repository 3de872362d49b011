//! Two-port impedance and scattering response of the fluxonium-resonator
//! system prepared in a chosen eigenstate.
//!
//! The Kubo spectral expansion gives, in working units (transition energies
//! and probe frequency in GHz, phase matrix elements dimensionless),
//!
//! ```text
//! Z_ij(f) = 2 i R_Q sum_{s'} f (E_s' - E_s) / ((E_s' - E_s)^2 - f^2)
//!           <s|phi_i|s'> <s'|phi_j|s>
//! ```
//!
//! which reduces to the textbook i w L / (1 - w^2 L C) for a bare LC mode.
//! Z is purely imaginary (lossless); dissipation enters only through the
//! finite port impedances Z_i = Q_i sqrt(L_i / C_i). Internal loss would add
//! a real part to Z; see [`impedance_with_loss`] for the extension point.
//!
//! The scattering matrix is the Cayley transform of the port-normalized
//! impedance W = Z0^{-1/2} Z Z0^{-1/2}:
//!
//! ```text
//! S = (W - I)(W + I)^{-1}
//! ```
//!
//! For purely imaginary Z this S is unitary and symmetric; it agrees with
//! (Z Z0^{-1} + I)^{-1}(Z Z0^{-1} - I) entrywise on the diagonal and for
//! equal port impedances.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{mu_symbol, LabeledSpectrum};
use crate::normal_modes::NormalModeBasis;
use crate::oscillator_ops::phase_matrix;
use crate::params::PhysicalConstants;

/// Port coupling: quality factors and the derived characteristic impedances.
#[derive(Debug, Clone, Copy)]
pub struct PortConfig {
    pub q_r: f64,
    pub q_q: f64,
    /// Port impedances Z_i = Q_i sqrt(L_i / C_i), Ohm.
    pub z_r: f64,
    pub z_q: f64,
}

impl PortConfig {
    /// The operating point Q_R = 1.5e3, Q_Q = 7.5e5.
    pub const DEFAULT_Q_R: f64 = 1.5e3;
    pub const DEFAULT_Q_Q: f64 = 7.5e5;

    pub fn new(q_r: f64, q_q: f64, basis: &NormalModeBasis) -> Result<Self> {
        if !(q_r > 0.0) || !(q_q > 0.0) {
            return Err(Error::BadQualityFactor { qr: q_r, qq: q_q });
        }
        Ok(PortConfig { q_r, q_q, z_r: q_r * basis.z_r, z_q: q_q * basis.z_q })
    }
}

/// State preparation: a pure eigenstate or a population mixture.
#[derive(Debug, Clone)]
pub enum Preparation {
    Pure { n: usize, mu: usize },
    /// Population-weighted mixture; weights must be non-negative and sum to 1.
    Mixed(Vec<((usize, usize), f64)>),
}

impl Preparation {
    fn validate(&self) -> Result<()> {
        if let Preparation::Mixed(pops) = self {
            let sum: f64 = pops.iter().map(|(_, w)| *w).sum();
            if pops.iter().any(|(_, w)| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::BadPopulations { sum });
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            Preparation::Pure { n, mu } => format!("{n}{}", mu_symbol(*mu)),
            Preparation::Mixed(_) => "mixed".into(),
        }
    }
}

pub type ComplexMatrix2 = [[Complex64; 2]; 2];

/// Spectral data for scattering: eigenenergies plus both normal-mode phase
/// operators rotated into the energy eigenbasis.
pub struct ScatteringModel {
    energies: Vec<f64>,
    /// <s|phi_R|s'> and <s|phi_Q|s'>, dimensionless reduced phases.
    phi_r: nalgebra::DMatrix<f64>,
    phi_q: nalgebra::DMatrix<f64>,
    ports: PortConfig,
    index_of: std::collections::HashMap<(usize, usize), usize>,
}

impl ScatteringModel {
    pub fn new(spec: &LabeledSpectrum, basis: &NormalModeBasis, ports: PortConfig) -> Self {
        let trunc = spec.truncation();
        let nr = trunc.readout_dim();
        let nq = trunc.qubit_dim();
        let p_r = phase_matrix(basis.phi_zpf_r, nr);
        let p_q = phase_matrix(basis.phi_zpf_q, nq);
        let eye_r = nalgebra::DMatrix::<f64>::identity(nr, nr);
        let eye_q = nalgebra::DMatrix::<f64>::identity(nq, nq);
        let phi_r = spec.eigvecs.transpose() * p_r.kronecker(&eye_q) * &spec.eigvecs;
        let phi_q = spec.eigvecs.transpose() * eye_r.kronecker(&p_q) * &spec.eigvecs;
        let mut index_of = std::collections::HashMap::new();
        for (i, level) in spec.levels.iter().enumerate() {
            index_of.insert((level.n, level.mu), i);
        }
        ScatteringModel {
            energies: spec.levels.iter().map(|l| l.energy).collect(),
            phi_r,
            phi_q,
            ports,
            index_of,
        }
    }

    pub fn ports(&self) -> PortConfig {
        self.ports
    }

    fn state_index(&self, n: usize, mu: usize) -> Result<usize> {
        self.index_of.get(&(n, mu)).copied().ok_or(Error::LevelOutOfRange { n, mu })
    }

    /// Smallest distance between the probe and any transition from `s`.
    fn pole_distance(&self, s: usize, freq: f64) -> (f64, usize) {
        let mut best = (f64::INFINITY, s);
        for (sp, &e) in self.energies.iter().enumerate() {
            let gap = (e - self.energies[s]).abs();
            let d = (gap - freq).abs();
            if d < best.0 {
                best = (d, sp);
            }
        }
        best
    }

    fn impedance_pure(&self, s: usize, freq: f64) -> Result<ComplexMatrix2> {
        let (dist, sp) = self.pole_distance(s, freq);
        if dist < 1e-9 {
            return Err(Error::ResonantProbe {
                freq,
                from: format!("level {s}"),
                to: format!("level {sp}"),
            });
        }
        let rq = PhysicalConstants::codata().impedance_quantum;
        let mut zrr = 0.0;
        let mut zrq = 0.0;
        let mut zqq = 0.0;
        for sp in 0..self.energies.len() {
            let gap = self.energies[sp] - self.energies[s];
            let weight = freq * gap / (gap * gap - freq * freq);
            let mr = self.phi_r[(s, sp)];
            let mq = self.phi_q[(s, sp)];
            zrr += weight * mr * mr;
            zrq += weight * mr * mq;
            zqq += weight * mq * mq;
        }
        let scale = 2.0 * rq;
        let im = |v: f64| Complex64::new(0.0, scale * v);
        Ok([[im(zrr), im(zrq)], [im(zrq), im(zqq)]])
    }

    /// Impedance matrix for a prepared state at one probe frequency, Ohm.
    pub fn impedance(&self, prep: &Preparation, freq: f64) -> Result<ComplexMatrix2> {
        prep.validate()?;
        match prep {
            Preparation::Pure { n, mu } => self.impedance_pure(self.state_index(*n, *mu)?, freq),
            Preparation::Mixed(pops) => {
                let mut z = [[Complex64::ZERO; 2]; 2];
                for ((n, mu), w) in pops {
                    let zs = self.impedance_pure(self.state_index(*n, *mu)?, freq)?;
                    for (zr, zsr) in z.iter_mut().zip(zs.iter()) {
                        for (a, b) in zr.iter_mut().zip(zsr.iter()) {
                            *a += w * b;
                        }
                    }
                }
                Ok(z)
            }
        }
    }

    /// S-matrix for a prepared state at one probe frequency.
    pub fn s_matrix(&self, prep: &Preparation, freq: f64) -> Result<ComplexMatrix2> {
        scattering_matrix(self.impedance(prep, freq)?, &self.ports)
    }

    /// S(f) over a grid; grid points landing on a pole are nudged by 1e-6 GHz.
    pub fn sweep(&self, preps: &[Preparation], grid: &[f64]) -> Result<Vec<ScatteringResult>> {
        preps
            .iter()
            .map(|prep| {
                let rows: Result<Vec<(f64, ComplexMatrix2)>> = grid
                    .par_iter()
                    .map(|&f0| {
                        let mut f = f0;
                        if let Preparation::Pure { n, mu } = prep {
                            let s = self.state_index(*n, *mu)?;
                            if self.pole_distance(s, f).0 < 1e-9 {
                                f += 1e-6;
                            }
                        }
                        Ok((f, self.s_matrix(prep, f)?))
                    })
                    .collect();
                let rows = rows?;
                Ok(ScatteringResult {
                    probe_freqs: rows.iter().map(|r| r.0).collect(),
                    s_matrices: rows.into_iter().map(|r| r.1).collect(),
                    prepared: prep.clone(),
                })
            })
            .collect()
    }
}

/// Converts an impedance matrix to the two-port scattering matrix by an
/// exact 2x2 solve (Cayley transform of the port-normalized impedance).
pub fn scattering_matrix(z: ComplexMatrix2, ports: &PortConfig) -> Result<ComplexMatrix2> {
    let sr = ports.z_r.sqrt();
    let sq = ports.z_q.sqrt();
    let scale = [[sr * sr, sr * sq], [sq * sr, sq * sq]];
    // W = Z0^{-1/2} Z Z0^{-1/2}
    let w = |i: usize, j: usize| z[i][j] / scale[i][j];
    let one = Complex64::ONE;
    // (W + I) S^T-free solve: S = (W - I)(W + I)^{-1}, computed directly
    let a = [[w(0, 0) + one, w(0, 1)], [w(1, 0), w(1, 1) + one]];
    let b = [[w(0, 0) - one, w(0, 1)], [w(1, 0), w(1, 1) - one]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.norm() < 1e-30 {
        return Err(Error::SingularScattering { det: det.norm() });
    }
    let inv = [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ];
    let mut s = [[Complex64::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = b[i][0] * inv[0][j] + b[i][1] * inv[1][j];
        }
    }
    Ok(s)
}

/// Extension point for internal loss: adds a real (dissipative) part to a
/// lossless impedance matrix before conversion to S. Not used by the core
/// model, which keeps Z purely imaginary.
pub fn impedance_with_loss(z: ComplexMatrix2, series_resistance_ohm: [f64; 2]) -> ComplexMatrix2 {
    let mut out = z;
    out[0][0] += Complex64::new(series_resistance_ohm[0], 0.0);
    out[1][1] += Complex64::new(series_resistance_ohm[1], 0.0);
    out
}

/// 2x2 complex S-matrices over a probe-frequency grid for one preparation.
pub struct ScatteringResult {
    pub probe_freqs: Vec<f64>,
    pub s_matrices: Vec<ComplexMatrix2>,
    pub prepared: Preparation,
}

impl ScatteringResult {
    /// Unwrapped phase of one S entry across the grid, radians.
    pub fn unwrapped_phase(&self, i: usize, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.s_matrices.len());
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for s in &self.s_matrices {
            let raw = s[i][j].arg();
            if let Some(p) = prev {
                let mut d = raw + offset - p;
                while d > std::f64::consts::PI {
                    offset -= std::f64::consts::TAU;
                    d -= std::f64::consts::TAU;
                }
                while d < -std::f64::consts::PI {
                    offset += std::f64::consts::TAU;
                    d += std::f64::consts::TAU;
                }
            }
            let v = raw + offset;
            prev = Some(v);
            out.push(v);
        }
        out
    }

    /// Probe frequency of the steepest phase change of S[i][j]: the center of
    /// a phase roll.
    pub fn roll_center(&self, i: usize, j: usize) -> Option<f64> {
        let phase = self.unwrapped_phase(i, j);
        if phase.len() < 3 {
            return None;
        }
        let mut best = (0.0, 0);
        for k in 1..phase.len() {
            let slope = ((phase[k] - phase[k - 1])
                / (self.probe_freqs[k] - self.probe_freqs[k - 1]))
                .abs();
            if slope > best.0 {
                best = (slope, k);
            }
        }
        Some(0.5 * (self.probe_freqs[best.1] + self.probe_freqs[best.1 - 1]))
    }
}
