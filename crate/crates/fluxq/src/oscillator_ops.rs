//! Closed-form single-mode operator matrices in the Fock basis.
//!
//! Cosine and sine of `x * phi_hat` (with `phi_hat = a + a^dag` scaled to a
//! zero-point spread) have analytic matrix elements in terms of associated
//! Laguerre polynomials. Entries are real; the cosine connects even `k + l`,
//! the sine odd `k + l`.

use nalgebra::DMatrix;

/// A dense real operator matrix; entry (k, l) is `<k|O|l>`.
pub type OperatorMatrix = DMatrix<f64>;

/// Associated Laguerre polynomial L_k^a(x) by the three-term recurrence
/// (k+1) L_{k+1}^a = (2k + 1 + a - x) L_k^a - (k + a) L_{k-1}^a.
pub fn laguerre(k: usize, a: u32, x: f64) -> f64 {
    let a = f64::from(a);
    let mut prev = 1.0; // L_0
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x; // L_1
    for j in 1..k {
        let j = j as f64;
        let next = ((2.0 * j + 1.0 + a - x) * cur - (j + a) * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Shared builder for the cosine/sine matrices.
///
/// The prefactor sqrt(k!/l!) x^(l-k) is accumulated as the running product
/// prod_{j=k+1..l} (x / sqrt(j)) so no factorial overflows, and the damping
/// e^{-x^2/2} is applied once per entry.
fn trig_matrix(x: f64, dim: usize, want_even: bool) -> OperatorMatrix {
    assert!(dim >= 1, "operator matrix needs dim >= 1");
    let x2 = x * x;
    let damp = (-x2 / 2.0).exp();
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        let mut prefactor = 1.0;
        for l in k..dim {
            if l > k {
                prefactor *= x / (l as f64).sqrt();
            }
            let even = (k + l) % 2 == 0;
            if even != want_even {
                continue;
            }
            let half = if want_even { (l - k) / 2 } else { (l - k + 1) / 2 };
            let sign = if half % 2 == 0 { 1.0 } else { -1.0 };
            let value = sign * prefactor * damp * laguerre(k, (l - k) as u32, x2);
            m[(k, l)] = value;
            m[(l, k)] = value;
        }
    }
    m
}

/// Matrix of cos(x phi_hat) with x = lambda_i * phi_i^ZPF; vanishes for odd k+l.
pub fn cos_matrix(lambda_phi_zpf: f64, dim: usize) -> OperatorMatrix {
    trig_matrix(lambda_phi_zpf, dim, true)
}

/// Matrix of sin(x phi_hat); vanishes for even k+l.
pub fn sin_matrix(lambda_phi_zpf: f64, dim: usize) -> OperatorMatrix {
    trig_matrix(lambda_phi_zpf, dim, false)
}

/// Tridiagonal matrix of phi_hat = phi_zpf (a + a^dag).
pub fn phase_matrix(phi_zpf: f64, dim: usize) -> OperatorMatrix {
    assert!(dim >= 1, "operator matrix needs dim >= 1");
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim.saturating_sub(1) {
        let v = phi_zpf * ((k + 1) as f64).sqrt();
        m[(k, k + 1)] = v;
        m[(k + 1, k)] = v;
    }
    m
}

/// Real factor of the conjugate charge n_hat = i M with
/// M = (a^dag - a) / (2 phi_zpf); satisfies [phase, M] = I away from the
/// truncation boundary.
pub fn charge_matrix(phi_zpf: f64, dim: usize) -> OperatorMatrix {
    assert!(dim >= 1, "operator matrix needs dim >= 1");
    let n_zpf = 1.0 / (2.0 * phi_zpf);
    let mut m = DMatrix::zeros(dim, dim);
    for k in 0..dim.saturating_sub(1) {
        let v = n_zpf * ((k + 1) as f64).sqrt();
        m[(k + 1, k)] = v;
        m[(k, k + 1)] = -v;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Complex, DMatrix};
    use proptest::prelude::*;

    /// Series oracle: L_k^a(x) = sum_j (-1)^j C(k+a, k-j) x^j / j!
    fn laguerre_series(k: usize, a: u32, x: f64) -> f64 {
        let binom = |n: u64, r: u64| -> f64 {
            let mut v = 1.0;
            for i in 0..r {
                v *= (n - i) as f64 / (r - i) as f64;
            }
            v
        };
        let mut sum = 0.0;
        let mut fact = 1.0;
        for j in 0..=k {
            if j > 0 {
                fact *= j as f64;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom((k + a as usize) as u64, (k - j) as u64) * x.powi(j as i32) / fact;
        }
        sum
    }

    #[test]
    fn laguerre_base_cases() {
        for a in [0, 1, 5] {
            for x in [0.0, 0.5, 4.0] {
                assert_eq!(laguerre(0, a, x), 1.0);
            }
        }
        // L_1^1(2) = 1 + 1 - 2 = 0
        assert_eq!(laguerre(1, 1, 2.0), 0.0);
    }

    #[test]
    fn laguerre_matches_series_oracle() {
        assert_relative_eq!(laguerre(3, 2, 0.5), laguerre_series(3, 2, 0.5), max_relative = 1e-13);
        // the independently summed value
        assert_relative_eq!(laguerre(3, 2, 0.5), 5.604166666667, max_relative = 1e-11);
        for k in [0, 1, 2, 5, 9] {
            for a in [0, 1, 3, 7] {
                for x in [0.0, 0.1, 1.0, 4.2] {
                    assert_relative_eq!(
                        laguerre(k, a, x),
                        laguerre_series(k, a, x),
                        max_relative = 1e-10,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn zero_argument_gives_identity_and_zero() {
        let c = cos_matrix(0.0, 8);
        let s = sin_matrix(0.0, 8);
        assert_eq!(c, DMatrix::identity(8, 8));
        assert_eq!(s, DMatrix::zeros(8, 8));
    }

    #[test]
    fn ground_state_cosine_element_is_gaussian() {
        let x = 0.7_f64;
        let c = cos_matrix(x, 4);
        assert_relative_eq!(c[(0, 0)], (-x * x / 2.0).exp(), max_relative = 1e-14);
    }

    #[test]
    fn truncated_unitarity_where_it_holds() {
        // C + iS approximates <k|e^{-i x phi}|l>; rows far from the truncation
        // boundary are unitary. Verified against direct exponentiation below.
        let x = 2.04;
        for (dim, inner, tol) in [(60, 15, 1e-6), (80, 30, 1e-6), (120, 30, 1e-6)] {
            let c = cos_matrix(x, dim);
            let s = sin_matrix(x, dim);
            let u = c.map(|v| Complex::new(v, 0.0)) + s.map(|v| Complex::new(0.0, v));
            let dev = &u * u.adjoint() - DMatrix::<Complex<f64>>::identity(dim, dim);
            let max = dev
                .view((0, 0), (inner, inner))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(max < tol, "dim {dim} inner {inner}: {max:.3e}");
        }
    }

    #[test]
    fn matches_direct_exponentiation_of_the_phase_operator() {
        // independent route: diagonalize x (a + a^dag) at dim 120 and apply
        // cos/sin to its spectrum; compare the interior 30x30 block
        let x = 2.04;
        let dim = 120;
        let phase = phase_matrix(1.0, dim) * x;
        let eig = nalgebra::SymmetricEigen::new(phase.clone());
        let cos_big = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::cos))
            * eig.eigenvectors.transpose();
        let sin_big = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sin))
            * eig.eigenvectors.transpose();
        let c = cos_matrix(x, dim);
        let s = sin_matrix(x, dim);
        let mut worst_c = 0.0_f64;
        let mut worst_s = 0.0_f64;
        for k in 0..30 {
            for l in 0..30 {
                worst_c = worst_c.max((c[(k, l)] - cos_big[(k, l)]).abs());
                // the published sine convention is the parity-flipped one
                worst_s = worst_s.max((s[(k, l)] + sin_big[(k, l)]).abs());
            }
        }
        assert!(worst_c < 1e-10, "cos deviates by {worst_c:.3e}");
        assert!(worst_s < 1e-10, "sin deviates by {worst_s:.3e}");
    }

    #[test]
    fn small_argument_taylor_expansion() {
        // cos(x phi) = I - x^2 phi^2 / 2 + O(x^4) entrywise at x = 0.01
        let x = 0.01;
        let dim = 6;
        let c = cos_matrix(x, dim);
        let phi = phase_matrix(1.0, dim);
        let phi2 = &phi * &phi;
        for (k, l) in [(0, 0), (0, 2), (1, 1)] {
            let taylor = if k == l { 1.0 } else { 0.0 } - x * x / 2.0 * phi2[(k, l)];
            // the O(x^4) remainder is ~1e-9 here, far below the 1e-6 bound
            assert_relative_eq!(c[(k, l)], taylor, epsilon = 1e-6);
        }
    }

    #[test]
    fn phase_matrix_ladder_elements() {
        let p = phase_matrix(1.0, 2);
        assert_eq!(p[(0, 1)], 1.0);
        assert_eq!(p[(1, 0)], 1.0);
        assert_eq!(p[(0, 0)], 0.0);
        let p = phase_matrix(0.7, 3);
        assert_relative_eq!(p[(1, 2)], 0.7 * 2.0_f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn canonical_commutator_on_the_interior() {
        // [phi, M] = I with n_hat = i M; boundary row/column excluded
        let dim = 40;
        let zpf = 0.83;
        let p = phase_matrix(zpf, dim);
        let q = charge_matrix(zpf, dim);
        let comm = &p * &q - &q * &p;
        for k in 0..dim - 1 {
            for l in 0..dim - 1 {
                let expect = if k == l { 1.0 } else { 0.0 };
                assert_relative_eq!(comm[(k, l)], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn entries_stay_finite_at_large_dim_and_argument() {
        for x in [2.0, 5.0] {
            let c = cos_matrix(x, 200);
            let s = sin_matrix(x, 200);
            assert!(c.iter().chain(s.iter()).all(|v| v.is_finite()));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn parity_selection_rules(x in prop::sample::select(vec![0.1, 0.7, 2.04]), dim in 1usize..40) {
            let c = cos_matrix(x, dim);
            let s = sin_matrix(x, dim);
            for k in 0..dim {
                for l in 0..dim {
                    if (k + l) % 2 == 1 {
                        prop_assert_eq!(c[(k, l)], 0.0);
                    } else {
                        prop_assert_eq!(s[(k, l)], 0.0);
                    }
                }
            }
            // symmetric fill
            prop_assert_eq!(c.transpose(), c);
            prop_assert_eq!(s.transpose(), s);
        }
    }
}
