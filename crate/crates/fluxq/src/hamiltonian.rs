//! Truncated Hamiltonian of the coupled circuit, its decoupled companion,
//! diagonalization, and quantum-number labeling.
//!
//! The Hamiltonian in the dressed product Fock basis is
//!
//! ```text
//! H = diag(f_R n + f_Q m)
//!   - E_J [ cos(phi_ext) (C_R x C_Q + S_R x S_Q)
//!         + sin(phi_ext) (C_R x S_Q - S_R x C_Q) ]
//! ```
//!
//! in GHz, with the cosine/sine matrices built at arguments
//! `lambda3 phi_R^ZPF` and `lambda4 phi_Q^ZPF`. Flux enters only through the
//! two scalar prefactors, so the four Kronecker blocks are built once per
//! parameter set and reused across a flux sweep.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::normal_modes::{solve_normal_modes, NormalModeBasis};
use crate::oscillator_ops::{cos_matrix, phase_matrix, sin_matrix, OperatorMatrix};
use crate::params::{
    inductive_energy_ghz, mode_frequency_ghz, mode_impedance_ohm, phase_zpf, CircuitParams,
    FluxPoint,
};

/// Fock cutoffs (inclusive): readout levels 0..=n0, qubit levels 0..=m0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationScheme {
    n0: usize,
    m0: usize,
}

impl TruncationScheme {
    pub fn new(n0: usize, m0: usize) -> Result<Self> {
        if n0 < 1 || m0 < 1 {
            return Err(Error::BadTruncation { n0, m0 });
        }
        Ok(TruncationScheme { n0, m0 })
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn m0(&self) -> usize {
        self.m0
    }

    pub fn readout_dim(&self) -> usize {
        self.n0 + 1
    }

    pub fn qubit_dim(&self) -> usize {
        self.m0 + 1
    }

    /// Total truncated Hilbert-space dimension (n0+1)(m0+1).
    pub fn dim(&self) -> usize {
        self.readout_dim() * self.qubit_dim()
    }
}

impl Default for TruncationScheme {
    /// The operating point n0 = 5, m0 = 20.
    fn default() -> Self {
        TruncationScheme { n0: 5, m0: 20 }
    }
}

/// Display symbol for a qubit quantum number: g, e, f, h, then q4, q5, ...
pub fn mu_symbol(mu: usize) -> String {
    match mu {
        0 => "g".into(),
        1 => "e".into(),
        2 => "f".into(),
        3 => "h".into(),
        _ => format!("q{mu}"),
    }
}

/// Parses a state token like `0g`, `1e`, or `2q4` into (n, mu).
pub fn parse_state_token(token: &str) -> Result<(usize, usize)> {
    let bad = || Error::BadStateToken(token.to_string());
    let split = token.find(|c: char| c.is_ascii_alphabetic()).ok_or_else(bad)?;
    let (digits, sym) = token.split_at(split);
    let n: usize = digits.parse().map_err(|_| bad())?;
    let mu = match sym {
        "g" => 0,
        "e" => 1,
        "f" => 2,
        "h" => 3,
        _ => sym.strip_prefix('q').and_then(|d| d.parse().ok()).ok_or_else(bad)?,
    };
    Ok((n, mu))
}

/// Flux-independent pieces of the Hamiltonian for one parameter set.
pub struct CouplingBlocks {
    diag: DVector<f64>,
    k_cc: DMatrix<f64>,
    k_ss: DMatrix<f64>,
    k_cs: DMatrix<f64>,
    k_sc: DMatrix<f64>,
    cos_q: OperatorMatrix,
    sin_q: OperatorMatrix,
    f_r: f64,
    f_q: f64,
    trunc: TruncationScheme,
}

impl CouplingBlocks {
    pub fn new(basis: &NormalModeBasis, trunc: TruncationScheme) -> Self {
        let nr = trunc.readout_dim();
        let nq = trunc.qubit_dim();
        let cos_r = cos_matrix(basis.lambda3 * basis.phi_zpf_r, nr);
        let sin_r = sin_matrix(basis.lambda3 * basis.phi_zpf_r, nr);
        let cos_q = cos_matrix(basis.lambda4 * basis.phi_zpf_q, nq);
        let sin_q = sin_matrix(basis.lambda4 * basis.phi_zpf_q, nq);
        Self::from_matrices(basis, trunc, &cos_r, &sin_r, cos_q, sin_q)
            .expect("matrices built at the truncation dims")
    }

    /// Assembles from caller-supplied operator matrices, checking that their
    /// dimensions match the truncation.
    pub fn from_matrices(
        basis: &NormalModeBasis,
        trunc: TruncationScheme,
        cos_r: &OperatorMatrix,
        sin_r: &OperatorMatrix,
        cos_q: OperatorMatrix,
        sin_q: OperatorMatrix,
    ) -> Result<Self> {
        let nr = trunc.readout_dim();
        let nq = trunc.qubit_dim();
        for (m, expected) in [(cos_r, nr), (sin_r, nr), (&cos_q, nq), (&sin_q, nq)] {
            if m.nrows() != expected || m.ncols() != expected {
                return Err(Error::DimensionMismatch { expected, got: m.nrows() });
            }
        }
        let mut diag = DVector::zeros(trunc.dim());
        for n in 0..nr {
            for m in 0..nq {
                diag[n * nq + m] = basis.f_r * n as f64 + basis.f_q * m as f64;
            }
        }
        Ok(CouplingBlocks {
            diag,
            k_cc: cos_r.kronecker(&cos_q),
            k_ss: sin_r.kronecker(&sin_q),
            k_cs: cos_r.kronecker(&sin_q),
            k_sc: sin_r.kronecker(&cos_q),
            cos_q,
            sin_q,
            f_r: basis.f_r,
            f_q: basis.f_q,
            trunc,
        })
    }

    pub fn truncation(&self) -> TruncationScheme {
        self.trunc
    }

    /// The full coupled Hamiltonian at one flux point, GHz.
    pub fn assemble(&self, e_j: f64, flux: FluxPoint) -> DMatrix<f64> {
        let (sin_f, cos_f) = flux.radians().sin_cos();
        let mut h = &self.k_cc + &self.k_ss;
        h *= cos_f;
        let mut odd = &self.k_cs - &self.k_sc;
        odd *= sin_f;
        h += odd;
        h *= -e_j;
        for i in 0..self.diag.len() {
            h[(i, i)] += self.diag[i];
        }
        h
    }

    /// The decoupled Hamiltonian H0 (readout cosine replaced by identity,
    /// readout sine by zero): block diagonal in the readout number.
    pub fn assemble_decoupled(&self, e_j: f64, flux: FluxPoint) -> DMatrix<f64> {
        let hq = self.qubit_block(e_j, flux);
        let nq = self.trunc.qubit_dim();
        let mut h = DMatrix::zeros(self.trunc.dim(), self.trunc.dim());
        for n in 0..self.trunc.readout_dim() {
            let base = n * nq;
            for i in 0..nq {
                for j in 0..nq {
                    h[(base + i, base + j)] = hq[(i, j)];
                }
                h[(base + i, base + i)] += self.f_r * n as f64;
            }
        }
        h
    }

    /// Single-mode qubit Hamiltonian f_Q m - E_J (cos(phi) C_Q + sin(phi) S_Q).
    fn qubit_block(&self, e_j: f64, flux: FluxPoint) -> DMatrix<f64> {
        let (sin_f, cos_f) = flux.radians().sin_cos();
        let mut hq = &self.cos_q * cos_f + &self.sin_q * sin_f;
        hq *= -e_j;
        for m in 0..self.trunc.qubit_dim() {
            hq[(m, m)] += self.f_q * m as f64;
        }
        hq
    }

    /// Labeled spectrum at one flux point.
    pub fn spectrum(&self, e_j: f64, flux: FluxPoint) -> Result<LabeledSpectrum> {
        let h = self.assemble(e_j, flux);
        let (evals, evecs) = diagonalize(&h)?;
        let dec = self.decoupled(e_j, flux)?;
        assign_labels(&evals, evecs, &dec, flux)
    }

    /// Decoupled eigensystem (diagonalizes only the qubit block).
    pub fn decoupled(&self, e_j: f64, flux: FluxPoint) -> Result<DecoupledSpectrum> {
        let hq = self.qubit_block(e_j, flux);
        let (eps, vecs) = diagonalize(&hq)?;
        Ok(DecoupledSpectrum {
            eps: eps.iter().copied().collect(),
            qubit_vecs: vecs,
            f_r: self.f_r,
            trunc: self.trunc,
        })
    }
}

/// Builds the coupled Hamiltonian matrix for one flux point.
pub fn build_hamiltonian(
    basis: &NormalModeBasis,
    e_j: f64,
    flux: FluxPoint,
    trunc: TruncationScheme,
) -> DMatrix<f64> {
    CouplingBlocks::new(basis, trunc).assemble(e_j, flux)
}

/// Builds the decoupled Hamiltonian H0 for one flux point.
pub fn build_decoupled(
    basis: &NormalModeBasis,
    e_j: f64,
    flux: FluxPoint,
    trunc: TruncationScheme,
) -> DMatrix<f64> {
    CouplingBlocks::new(basis, trunc).assemble_decoupled(e_j, flux)
}

/// Dense real-symmetric eigendecomposition with ascending eigenvalues.
///
/// Eigenvectors are returned as columns, orthonormal, with the
/// largest-magnitude component of each column made positive so repeated runs
/// emit identical output. The residual `||H v - E v|| <= 1e-9 ||H||` is
/// verified per pair.
pub fn diagonalize(h: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = h.nrows();
    assert_eq!(dim, h.ncols(), "matrix must be square");
    let eig = nalgebra::SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
        .ok_or(Error::NonConvergence { dim })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut evals = DVector::zeros(dim);
    let mut evecs = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        evals[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        let flip = pivot.map_or(1.0, |(_, &v)| if v < 0.0 { -1.0 } else { 1.0 });
        evecs.column_mut(dst).copy_from(&(col * flip));
    }

    let scale = evals[0].abs().max(evals[dim - 1].abs()).max(f64::MIN_POSITIVE);
    let tol = 1e-9 * scale;
    let residual = h * &evecs - &evecs * DMatrix::from_diagonal(&evals);
    let worst = residual.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::ResidualTooLarge { dim, residual: worst, tol });
    }
    debug_assert!({
        let gram = evecs.transpose() * &evecs - DMatrix::identity(dim, dim);
        gram.iter().all(|v| v.abs() < 1e-10)
    });
    Ok((evals, evecs))
}

/// Decoupled spectrum: qubit eigenvalues plus the separable readout ladder,
/// eps_{n mu} = f_R n + eps_mu, with built-in quantum numbers.
pub struct DecoupledSpectrum {
    /// Qubit-block eigenvalues, ascending.
    pub eps: Vec<f64>,
    /// Qubit-block eigenvectors (columns, Fock-basis coefficients).
    pub qubit_vecs: DMatrix<f64>,
    f_r: f64,
    trunc: TruncationScheme,
}

impl DecoupledSpectrum {
    /// The grid of (eps_{n mu}, n, mu), sorted by energy with ties broken
    /// toward smaller n.
    pub fn grid(&self) -> Vec<(f64, usize, usize)> {
        let mut grid = Vec::with_capacity(self.trunc.dim());
        for n in 0..self.trunc.readout_dim() {
            for (mu, &eps) in self.eps.iter().enumerate() {
                grid.push((self.f_r * n as f64 + eps, n, mu));
            }
        }
        grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        grid
    }

    pub fn truncation(&self) -> TruncationScheme {
        self.trunc
    }

    pub fn readout_frequency(&self) -> f64 {
        self.f_r
    }
}

/// One labeled energy level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    /// Energy in GHz (zero-point offsets of the two modes excluded).
    pub energy: f64,
    /// Readout quantum number.
    pub n: usize,
    /// Qubit quantum number (0 = g, 1 = e, ...).
    pub mu: usize,
}

/// Eigenvalues with assigned quantum numbers at one flux point.
pub struct LabeledSpectrum {
    pub flux: FluxPoint,
    /// Levels sorted ascending in energy; (n, mu) unique.
    pub levels: Vec<Level>,
    /// Eigenvector coefficients in the dressed product basis; column i
    /// belongs to `levels[i]`.
    pub eigvecs: DMatrix<f64>,
    trunc: TruncationScheme,
    index: HashMap<(usize, usize), usize>,
}

/// Matches coupled eigenvalues to decoupled labels by minimum total |E - eps|.
///
/// Both lists are sorted, so the monotone pairing is the optimal bipartite
/// assignment for this 1-D convex cost; it reduces to nearest-level matching
/// when the coupling is weak and swaps labels abruptly at anticrossings.
pub fn assign_labels(
    evals: &DVector<f64>,
    eigvecs: DMatrix<f64>,
    decoupled: &DecoupledSpectrum,
    flux: FluxPoint,
) -> Result<LabeledSpectrum> {
    let grid = decoupled.grid();
    assert_eq!(
        grid.len(),
        evals.len(),
        "coupled and decoupled spectra must share a truncation"
    );
    let mut levels = Vec::with_capacity(grid.len());
    let mut index = HashMap::with_capacity(grid.len());
    for (i, (&energy, &(_, n, mu))) in evals.iter().zip(grid.iter()).enumerate() {
        levels.push(Level { energy, n, mu });
        index.insert((n, mu), i);
    }
    Ok(LabeledSpectrum { flux, levels, eigvecs, trunc: decoupled.trunc, index })
}

impl LabeledSpectrum {
    pub fn truncation(&self) -> TruncationScheme {
        self.trunc
    }

    /// Energy of the level labeled (n, mu), GHz.
    pub fn energy(&self, n: usize, mu: usize) -> Result<f64> {
        self.index
            .get(&(n, mu))
            .map(|&i| self.levels[i].energy)
            .ok_or(Error::LevelOutOfRange { n, mu })
    }

    /// Ground-state energy E_{0g}.
    pub fn ground_energy(&self) -> f64 {
        self.levels[0].energy
    }

    /// Levels with energies shifted so E_{0g} = 0 (the plotting convention).
    pub fn levels_relative(&self) -> Vec<Level> {
        let e0 = self
            .energy(0, 0)
            .expect("ground label always inside the truncated window");
        self.levels
            .iter()
            .map(|l| Level { energy: l.energy - e0, ..*l })
            .collect()
    }

    /// Transition frequency (n, mu) -> (n', mu') in GHz.
    pub fn transition(&self, from: (usize, usize), to: (usize, usize)) -> Result<f64> {
        Ok(self.energy(to.0, to.1)? - self.energy(from.0, from.1)?)
    }

    /// Readout 0 -> 1 transition with the qubit in its ground state.
    pub fn f_01(&self) -> Result<f64> {
        self.transition((0, 0), (1, 0))
    }

    /// Qubit g -> e transition.
    pub fn f_ge(&self) -> Result<f64> {
        self.transition((0, 0), (0, 1))
    }

    /// Dispersive shift chi = (E_1e - E_0e) - (E_1g - E_0g), GHz.
    pub fn dispersive_shift(&self) -> Result<f64> {
        Ok(self.transition((0, 1), (1, 1))? - self.transition((0, 0), (1, 0))?)
    }

    /// Inherited readout anharmonicity for qubit state mu:
    /// (E_2mu - E_1mu) - (E_1mu - E_0mu), GHz. Needs n0 >= 2.
    pub fn kerr(&self, mu: usize) -> Result<f64> {
        if self.trunc.n0 < 2 {
            return Err(Error::KerrNeedsPhotons { n0: self.trunc.n0 });
        }
        Ok(self.transition((1, mu), (2, mu))? - self.transition((0, mu), (1, mu))?)
    }

    /// Sorted position of the level labeled (n, mu).
    pub fn position_of(&self, n: usize, mu: usize) -> Option<usize> {
        self.index.get(&(n, mu)).copied()
    }
}

/// Labeled spectrum of a circuit at one flux point.
pub fn spectrum_at(
    params: &CircuitParams,
    flux: FluxPoint,
    trunc: TruncationScheme,
) -> Result<LabeledSpectrum> {
    let basis = solve_normal_modes(params)?;
    CouplingBlocks::new(&basis, trunc).spectrum(params.e_j, flux)
}

/// Labeled spectra over a flux grid; the Kronecker blocks are built once and
/// the points run in parallel.
pub fn sweep(
    params: &CircuitParams,
    grid: &[FluxPoint],
    trunc: TruncationScheme,
) -> Result<Vec<LabeledSpectrum>> {
    let basis = solve_normal_modes(params)?;
    let blocks = CouplingBlocks::new(&basis, trunc);
    grid.par_iter().map(|&flux| blocks.spectrum(params.e_j, flux)).collect()
}

/// Zero-point energy (f_R + f_Q)/2 dropped by the dressed-basis Hamiltonian;
/// add it back when comparing absolute energies across bases.
pub fn dressed_zero_point(basis: &NormalModeBasis) -> f64 {
    0.5 * (basis.f_r + basis.f_q)
}

/// Bare-mode frequencies (f_r, f_q) of the uncoupled circuit in GHz, with the
/// readout inductance L_r + L_s.
pub fn bare_mode_frequencies(params: &CircuitParams) -> (f64, f64) {
    let lt = params.l_r + params.l_s;
    (
        mode_frequency_ghz(lt, params.c_r),
        mode_frequency_ghz(params.l_q, params.c_q),
    )
}

/// Zero-point energy dropped by the bare-basis oracle.
pub fn bare_zero_point(params: &CircuitParams) -> f64 {
    let (f_r, f_q) = bare_mode_frequencies(params);
    0.5 * (f_r + f_q)
}

/// Independent correctness oracle: diagonalizes the circuit directly in the
/// bare oscillator basis, with the mutual-inductance bilinear coupling kept
/// explicit and the cosine acting on the bare qubit phase alone.
///
/// Returns ascending eigenvalues in GHz (same zero-point convention as the
/// dressed path: harmonic offsets dropped).
pub fn bare_basis_oracle(
    params: &CircuitParams,
    flux: FluxPoint,
    trunc: TruncationScheme,
) -> Result<Vec<f64>> {
    params.validate()?;
    let lt = params.l_r + params.l_s;
    let (f_r, f_q) = bare_mode_frequencies(params);
    let zpf_r = phase_zpf(mode_impedance_ohm(lt, params.c_r));
    let zpf_q = phase_zpf(mode_impedance_ohm(params.l_q, params.c_q));
    // bilinear coupling -kappa (a + a^dag)(b + b^dag), GHz
    let kappa = params.l_s / (params.l_q * lt) * inductive_energy_ghz(1.0) * zpf_r * zpf_q;

    let nr = trunc.readout_dim();
    let nq = trunc.qubit_dim();
    let ladder_r = phase_matrix(1.0, nr);
    let ladder_q = phase_matrix(1.0, nq);
    let cos_q = cos_matrix(zpf_q, nq);
    let sin_q = sin_matrix(zpf_q, nq);

    let (sin_f, cos_f) = flux.radians().sin_cos();
    let mut h = ladder_r.kronecker(&ladder_q) * (-kappa);
    let qubit_cos = &cos_q * cos_f + &sin_q * sin_f;
    let eye_r = DMatrix::<f64>::identity(nr, nr);
    h += eye_r.kronecker(&qubit_cos) * (-params.e_j);
    for n in 0..nr {
        for m in 0..nq {
            h[(n * nq + m, n * nq + m)] += f_r * n as f64 + f_q * m as f64;
        }
    }
    let (evals, _) = diagonalize(&h)?;
    Ok(evals.iter().copied().collect())
}

/// One rung of a truncation-convergence study.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub trunc: TruncationScheme,
    pub dim: usize,
    /// Max |Delta E| over the tracked levels against the previous rung; None
    /// on the first rung.
    pub max_delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub tracked_levels: usize,
    pub tol: f64,
    /// Last rung's shift fell below `tol`.
    pub converged: bool,
}

/// Tracks the lowest `tracked` eigenvalues across a ladder of truncations.
pub fn convergence_report(
    params: &CircuitParams,
    flux: FluxPoint,
    ladder: &[TruncationScheme],
    tracked: usize,
    tol: f64,
) -> Result<ConvergenceReport> {
    let basis = solve_normal_modes(params)?;
    let mut rows = Vec::with_capacity(ladder.len());
    let mut previous: Option<Vec<f64>> = None;
    for &trunc in ladder {
        let h = CouplingBlocks::new(&basis, trunc).assemble(params.e_j, flux);
        let (evals, _) = diagonalize(&h)?;
        let kept: Vec<f64> = evals.iter().copied().take(tracked).collect();
        let max_delta = previous.as_ref().map(|prev| {
            prev.iter()
                .zip(&kept)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        rows.push(ConvergenceRow { trunc, dim: trunc.dim(), max_delta });
        previous = Some(kept);
    }
    let converged = rows
        .last()
        .and_then(|r| r.max_delta)
        .map(|d| d < tol)
        .unwrap_or(false);
    Ok(ConvergenceReport { rows, tracked_levels: tracked, tol, converged })
}
