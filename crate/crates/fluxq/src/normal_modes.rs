//! Normal modes of the linearized (E_J -> 0) two-mode circuit.
//!
//! Diagonalizes the generalized eigenproblem U v = w^2 C v in closed form,
//! where C = diag(C_r, C_q) and U is the Hessian of the inductive potential.
//! The resulting dressed modes carry the entire linear coupling, leaving only
//! the junction cosine to couple them.

use std::fmt;

use crate::error::{Error, Result};
use crate::params::{
    mode_frequency_ghz, mode_impedance_ohm, phase_zpf, CircuitParams, PhysicalConstants,
};

/// Dressed-mode basis: mixing coefficients and per-mode oscillator data.
///
/// Columns (lambda1, lambda3) and (lambda2, lambda4) are the Euclidean-unit
/// eigenvectors for the readout-like and qubit-like modes, with positive
/// diagonal entries. Phi_r = lambda1 Phi_R + lambda2 Phi_Q and
/// Phi_q = lambda3 Phi_R + lambda4 Phi_Q.
#[derive(Debug, Clone, Copy)]
pub struct NormalModeBasis {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Dressed capacitances, fF.
    pub c_r: f64,
    pub c_q: f64,
    /// Dressed inductances, nH.
    pub l_r: f64,
    pub l_q: f64,
    /// Mode frequencies, GHz.
    pub f_r: f64,
    pub f_q: f64,
    /// Characteristic impedances sqrt(L/C), Ohm.
    pub z_r: f64,
    pub z_q: f64,
    /// Zero-point phase fluctuations sqrt(Z / 2 R_Q).
    pub phi_zpf_r: f64,
    pub phi_zpf_q: f64,
}

impl NormalModeBasis {
    /// Angular frequency of the readout mode, rad/s.
    pub fn omega_r(&self) -> f64 {
        self.f_r * 1e9 * std::f64::consts::TAU
    }

    /// Angular frequency of the qubit mode, rad/s.
    pub fn omega_q(&self) -> f64 {
        self.f_q * 1e9 * std::f64::consts::TAU
    }
}

/// Potential Hessian of the reduced Lagrangian in (Phi_r, Phi_q), units 1/nH.
fn potential_matrix(p: &CircuitParams) -> [[f64; 2]; 2] {
    let lt = p.l_r + p.l_s;
    let off = -p.l_s / (p.l_q * lt);
    [[1.0 / lt, off], [off, 1.0 / p.l_q]]
}

/// Solves the 2x2 generalized eigenproblem in closed form.
///
/// Reduced to standard form M = C^{-1/2} U C^{-1/2} and diagonalized by a
/// single Jacobi rotation; exact up to f64 rounding, no iteration.
pub fn solve_normal_modes(p: &CircuitParams) -> Result<NormalModeBasis> {
    p.validate()?;
    let u = potential_matrix(p);
    let (ic_r, ic_q) = (1.0 / p.c_r.sqrt(), 1.0 / p.c_q.sqrt());
    let m11 = u[0][0] * ic_r * ic_r;
    let m22 = u[1][1] * ic_q * ic_q;
    let m12 = u[0][1] * ic_r * ic_q;

    let trace = m11 + m22;
    let diff = m11 - m22;
    let disc = diff.hypot(2.0 * m12);
    let w2_hi = 0.5 * (trace + disc);
    let w2_lo = 0.5 * (trace - disc);
    if !(w2_lo > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let rel_gap = (w2_hi - w2_lo) / w2_hi;
    // degenerate frequencies leave the eigenvectors undetermined
    if rel_gap < 2e-9 {
        return Err(Error::ModesUnresolvable { rel: rel_gap });
    }

    // (cos t, sin t) is the standard-form eigenvector of the larger eigenvalue
    let theta = 0.5 * (2.0 * m12).atan2(diff);
    let (s, c) = theta.sin_cos();
    let candidates = [(w2_hi, [c * ic_r, s * ic_q]), (w2_lo, [-s * ic_r, c * ic_q])];

    let normalize = |v: [f64; 2]| {
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    };
    let v0 = normalize(candidates[0].1);
    let v1 = normalize(candidates[1].1);

    // mode R is the eigenvector dominated by the readout coordinate
    let ((w2r, mut vr), (w2q, mut vq)) = if v0[0].abs() >= v1[0].abs() {
        ((candidates[0].0, v0), (candidates[1].0, v1))
    } else {
        ((candidates[1].0, v1), (candidates[0].0, v0))
    };
    if vr[0] < 0.0 {
        vr = [-vr[0], -vr[1]];
    }
    if vq[1] < 0.0 {
        vq = [-vq[0], -vq[1]];
    }

    let (lambda1, lambda3) = (vr[0], vr[1]);
    let (lambda2, lambda4) = (vq[0], vq[1]);

    // Dressed elements recomputed from the lambdas; by construction
    // 1/L_i = v^T U v and C_i = v^T C v, so w_i = 1/sqrt(L_i C_i).
    let lt = p.l_r + p.l_s;
    let c_r = lambda1 * lambda1 * p.c_r + lambda3 * lambda3 * p.c_q;
    let c_q = lambda2 * lambda2 * p.c_r + lambda4 * lambda4 * p.c_q;
    let l_r = 1.0
        / (lambda1 * lambda1 / lt + lambda3 * lambda3 / p.l_q
            - 2.0 * lambda1 * lambda3 * p.l_s / (p.l_q * lt));
    let l_q = 1.0
        / (lambda2 * lambda2 / lt + lambda4 * lambda4 / p.l_q
            - 2.0 * lambda2 * lambda4 * p.l_s / (p.l_q * lt));

    let f_r = mode_frequency_ghz(l_r, c_r);
    let f_q = mode_frequency_ghz(l_q, c_q);
    debug_assert!((f_r - 1e3 * w2r.sqrt() / std::f64::consts::TAU).abs() < 1e-9 * f_r);
    debug_assert!((f_q - 1e3 * w2q.sqrt() / std::f64::consts::TAU).abs() < 1e-9 * f_q);

    let z_r = mode_impedance_ohm(l_r, c_r);
    let z_q = mode_impedance_ohm(l_q, c_q);

    Ok(NormalModeBasis {
        lambda1,
        lambda2,
        lambda3,
        lambda4,
        c_r,
        c_q,
        l_r,
        l_q,
        f_r,
        f_q,
        z_r,
        z_q,
        phi_zpf_r: phase_zpf(z_r),
        phi_zpf_q: phase_zpf(z_q),
    })
}

/// Diagnostics on whether the dressed-basis truncation strategy applies.
///
/// Reports the turns ratio L_s/(L_r+L_s) against the hybridization
/// |lambda3|/lambda4 under both readings of the published inequality (the
/// printed direction evaluates false for the paper's own devices, the
/// surrounding prose suggests the reverse; both are reported, neither is
/// enforced), and each mode impedance against R_Q for the cosine-truncation
/// condition. Diagnostics only; nothing fails.
#[derive(Debug, Clone)]
pub struct ApplicabilityReport {
    pub turns_ratio: f64,
    pub hybridization: f64,
    /// turns_ratio < hybridization, as printed.
    pub printed_inequality_holds: bool,
    /// hybridization < turns_ratio, the prose reading.
    pub reversed_inequality_holds: bool,
    pub z_r: f64,
    pub z_q: f64,
    pub impedance_quantum: f64,
    /// Z_i << R_Q: a Taylor-truncated cosine would be valid for this mode.
    pub cosine_truncation_ok_r: bool,
    pub cosine_truncation_ok_q: bool,
    pub regime_warning: Option<String>,
}

pub fn check_applicability(p: &CircuitParams, basis: &NormalModeBasis) -> ApplicabilityReport {
    let turns_ratio = p.l_s / (p.l_r + p.l_s);
    let hybridization = basis.lambda3.abs() / basis.lambda4;
    let rq = PhysicalConstants::codata().impedance_quantum;
    ApplicabilityReport {
        turns_ratio,
        hybridization,
        printed_inequality_holds: turns_ratio < hybridization,
        reversed_inequality_holds: hybridization < turns_ratio,
        z_r: basis.z_r,
        z_q: basis.z_q,
        impedance_quantum: rq,
        cosine_truncation_ok_r: basis.z_r < rq,
        cosine_truncation_ok_q: basis.z_q < rq,
        regime_warning: p.regime_warning(),
    }
}

impl fmt::Display for ApplicabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "turns_ratio        = {:.9}  (L_s / (L_r + L_s))", self.turns_ratio)?;
        writeln!(f, "hybridization      = {:.9}  (|lambda3| / lambda4)", self.hybridization)?;
        writeln!(
            f,
            "printed reading    turns_ratio < hybridization : {}",
            self.printed_inequality_holds
        )?;
        writeln!(
            f,
            "reversed reading   hybridization < turns_ratio : {}",
            self.reversed_inequality_holds
        )?;
        writeln!(f, "Z_R = {:.3} Ohm, Z_Q = {:.3} Ohm, R_Q = {:.3} Ohm", self.z_r, self.z_q, self.impedance_quantum)?;
        if !self.cosine_truncation_ok_r {
            writeln!(f, "cosine truncation invalid for mode R (Z_R >= R_Q)")?;
        }
        if !self.cosine_truncation_ok_q {
            writeln!(f, "cosine truncation invalid for mode Q (Z_Q >= R_Q)")?;
        }
        if let Some(w) = &self.regime_warning {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn device_a() -> CircuitParams {
        CircuitParams::new(20.3, 15.6, 5.3, 386.0, 6.20, 4.5).unwrap()
    }

    pub(crate) fn device_b() -> CircuitParams {
        CircuitParams::new(20.1, 19.7, 5.9, 430.0, 9.08, 2.9).unwrap()
    }

    // Expected values below were evaluated with an independent closed-form
    // script (cross-checked against a generalized eigensolver to 1e-12)
    // before this module was written.

    #[test]
    fn device_a_mixing_coefficients() {
        let b = solve_normal_modes(&device_a()).unwrap();
        assert_relative_eq!(1.0 - b.lambda1, 1.549410038e-3, max_relative = 1e-6);
        assert_relative_eq!(b.lambda2, 1.454913501e-2, max_relative = 1e-6);
        assert_relative_eq!(b.lambda3, -5.564547964e-2, max_relative = 1e-6);
        assert_relative_eq!(1.0 - b.lambda4, 1.058442663e-4, max_relative = 1e-6);
    }

    #[test]
    fn device_a_dressed_modes() {
        let b = solve_normal_modes(&device_a()).unwrap();
        assert_relative_eq!(b.f_r, 7.881613314, max_relative = 1e-9);
        assert_relative_eq!(b.f_q, 3.513015031, max_relative = 1e-9);
        assert_relative_eq!(b.c_r, 20.253553709, max_relative = 1e-9);
        assert_relative_eq!(b.c_q, 5.303175160, max_relative = 1e-9);
        assert_relative_eq!(b.l_r, 20.133013265, max_relative = 1e-9);
        assert_relative_eq!(b.l_q, 387.029684209, max_relative = 1e-9);
        assert_relative_eq!(b.z_r, 997.019774, max_relative = 1e-8);
        assert_relative_eq!(b.z_q, 8542.876970, max_relative = 1e-8);
        assert_relative_eq!(b.phi_zpf_r, 0.696689391, max_relative = 1e-8);
        assert_relative_eq!(b.phi_zpf_q, 2.039338824, max_relative = 1e-8);
    }

    #[test]
    fn device_b_mixing_coefficients() {
        let b = solve_normal_modes(&device_b()).unwrap();
        assert_relative_eq!(1.0 - b.lambda1, 3.912311631e-4, max_relative = 1e-6);
        assert_relative_eq!(b.lambda2, 8.212974718e-3, max_relative = 1e-6);
        assert_relative_eq!(b.lambda3, -2.796979200e-2, max_relative = 1e-6);
        assert_relative_eq!(1.0 - b.lambda4, 3.372704562e-5, max_relative = 1e-6);
        assert_relative_eq!(b.f_r, 7.468078198, max_relative = 1e-9);
        assert_relative_eq!(b.f_q, 3.158136690, max_relative = 1e-9);
    }

    #[test]
    fn decoupled_circuit_has_identity_mixing() {
        let p = CircuitParams::new(20.3, 15.6, 5.3, 386.0, 6.20, 0.0).unwrap();
        let b = solve_normal_modes(&p).unwrap();
        assert_eq!(b.lambda1, 1.0);
        assert_eq!(b.lambda4, 1.0);
        assert_eq!(b.lambda2, 0.0);
        assert_eq!(b.lambda3, 0.0);
        assert_relative_eq!(b.f_r, mode_frequency_ghz(15.6, 20.3), max_relative = 1e-12);
        assert_relative_eq!(b.f_q, mode_frequency_ghz(386.0, 5.3), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_modes_are_rejected() {
        // symmetric circuit with no coupling and matched frequencies
        let p = CircuitParams::new(20.0, 10.0, 20.0, 10.0, 1.0, 0.0).unwrap();
        assert!(matches!(solve_normal_modes(&p), Err(Error::ModesUnresolvable { .. })));
    }

    #[test]
    fn recomputing_dressed_elements_from_lambdas_is_consistent() {
        for p in [device_a(), device_b()] {
            let b = solve_normal_modes(&p).unwrap();
            let lt = p.l_r + p.l_s;
            let c_r = b.lambda1.powi(2) * p.c_r + b.lambda3.powi(2) * p.c_q;
            let inv_l_r = b.lambda1.powi(2) / lt + b.lambda3.powi(2) / p.l_q
                - 2.0 * b.lambda1 * b.lambda3 * p.l_s / (p.l_q * lt);
            assert_relative_eq!(c_r, b.c_r, max_relative = 1e-12);
            assert_relative_eq!(1.0 / inv_l_r, b.l_r, max_relative = 1e-12);
            assert_relative_eq!(b.f_r, mode_frequency_ghz(b.l_r, b.c_r), max_relative = 1e-12);
            assert_relative_eq!(b.f_q, mode_frequency_ghz(b.l_q, b.c_q), max_relative = 1e-12);
            // unit norm, positive diagonal
            assert_relative_eq!(b.lambda1.hypot(b.lambda3), 1.0, max_relative = 1e-14);
            assert_relative_eq!(b.lambda2.hypot(b.lambda4), 1.0, max_relative = 1e-14);
            assert!(b.lambda1 > 0.0 && b.lambda4 > 0.0);
        }
    }

    #[test]
    fn lambda3_scales_linearly_in_shared_inductance() {
        let mut ratios = Vec::new();
        for ls in [4.5, 2.25, 1.125] {
            let p = CircuitParams::new(20.3, 15.6, 5.3, 386.0, 6.20, ls).unwrap();
            let b = solve_normal_modes(&p).unwrap();
            ratios.push(b.lambda3 / ls);
        }
        for r in &ratios[1..] {
            assert_relative_eq!(*r, ratios[0], max_relative = 0.05);
        }
    }

    #[test]
    fn applicability_report_for_device_a() {
        let p = device_a();
        let b = solve_normal_modes(&p).unwrap();
        let rep = check_applicability(&p, &b);
        assert_relative_eq!(rep.turns_ratio, 0.223880597, max_relative = 1e-8);
        assert_relative_eq!(rep.hybridization, 0.055651370, max_relative = 1e-8);
        assert!(!rep.printed_inequality_holds);
        assert!(rep.reversed_inequality_holds);
        // readout is a low-impedance mode, the qubit is not
        assert!(rep.cosine_truncation_ok_r);
        assert!(!rep.cosine_truncation_ok_q);
        let text = rep.to_string();
        assert!(text.contains("cosine truncation invalid for mode Q"));
    }

    #[test]
    fn applicability_of_decoupled_circuit_is_trivial() {
        let p = CircuitParams::new(20.3, 15.6, 5.3, 386.0, 6.20, 0.0).unwrap();
        let b = solve_normal_modes(&p).unwrap();
        let rep = check_applicability(&p, &b);
        assert_eq!(rep.turns_ratio, 0.0);
        assert_eq!(rep.hybridization, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn modes_decouple_the_capacitance_metric(
            c_r in 1.0..100.0f64, l_r in 1.0..100.0f64,
            c_q in 1.0..100.0f64, l_q in 200.0..2000.0f64, l_s in 0.0..20.0f64,
        ) {
            let p = CircuitParams::new(c_r, l_r, c_q, l_q, 1.0, l_s).unwrap();
            if let Ok(b) = solve_normal_modes(&p) {
                // C-orthogonality of the generalized eigenvectors
                let cross = b.lambda1 * b.lambda2 * p.c_r + b.lambda3 * b.lambda4 * p.c_q;
                prop_assert!(cross.abs() <= 1e-10 * p.c_r.max(p.c_q));
                // 2x2 eigenvalue bracketing: dressed frequencies enclose the
                // diagonal (bare) frequencies of the standard-form matrix
                let fr_bare = mode_frequency_ghz(l_r + l_s, c_r);
                let fq_bare = mode_frequency_ghz(l_q, c_q);
                let lo = fr_bare.min(fq_bare);
                let hi = fr_bare.max(fq_bare);
                prop_assert!(b.f_r.min(b.f_q) <= lo * (1.0 + 1e-12));
                prop_assert!(b.f_r.max(b.f_q) >= hi * (1.0 - 1e-12));
            }
        }
    }
}
