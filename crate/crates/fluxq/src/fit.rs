//! Least-squares recovery of circuit parameters from spectroscopy data.
//!
//! The objective is the sigma-weighted sum of squares over rows of
//! (flux, observable, value), with the model evaluated through exact
//! diagonalization. chi rows are capped at 5 sigma so the chi singularity
//! near an anticrossing cannot dominate the fit. Minimization uses a
//! derivative-free simplex: the labeled-spectrum objective has kinks where
//! labels swap, which derail gradient methods.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingBlocks, TruncationScheme};
use crate::normal_modes::solve_normal_modes;
use crate::params::{CircuitParams, FluxPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    /// Qubit g -> e transition.
    FGe,
    /// Readout 0 -> 1 transition.
    F01,
    /// Dispersive shift.
    Chi,
}

impl Observable {
    pub const ALL: [Observable; 3] = [Observable::FGe, Observable::F01, Observable::Chi];
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Observable::FGe => "f_ge",
            Observable::F01 => "f_01",
            Observable::Chi => "chi",
        })
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f_ge" => Ok(Observable::FGe),
            "f_01" => Ok(Observable::F01),
            "chi" => Ok(Observable::Chi),
            other => Err(Error::UnknownObservable(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DataRow {
    pub flux_over_phi0: f64,
    pub observable: Observable,
    /// Measured value, GHz.
    pub value: f64,
    /// Measurement uncertainty, GHz; strictly positive.
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct SpectroscopyDataset {
    rows: Vec<DataRow>,
}

impl SpectroscopyDataset {
    pub fn from_rows(mut rows: Vec<DataRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.sigma > 0.0) {
                return Err(Error::BadSigma { sigma: r.sigma, line: i + 1 });
            }
            if !r.flux_over_phi0.is_finite() || !r.value.is_finite() {
                return Err(Error::Csv { line: i + 1, msg: "non-finite field".into() });
            }
        }
        rows.sort_by(|a, b| a.flux_over_phi0.total_cmp(&b.flux_over_phi0));
        Ok(SpectroscopyDataset { rows })
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    /// Parses CSV with header `flux,observable,value_GHz,sigma_GHz`; `#`
    /// lines are comments.
    pub fn ingest_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            if !header_seen {
                header_seen = true;
                let expect = "flux,observable,value_GHz,sigma_GHz";
                if content.replace(' ', "") != expect {
                    return Err(Error::Csv {
                        line,
                        msg: format!("expected header `{expect}`, got `{content}`"),
                    });
                }
                continue;
            }
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::Csv { line, msg: format!("expected 4 fields, got {}", fields.len()) });
            }
            let num = |s: &str, what: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Csv { line, msg: format!("non-numeric {what} `{s}`") })
            };
            let flux = num(fields[0], "flux")?;
            let observable = Observable::from_str(fields[1])?;
            let value = num(fields[2], "value")?;
            let sigma = num(fields[3], "sigma")?;
            if !(sigma > 0.0) {
                return Err(Error::BadSigma { sigma, line });
            }
            rows.push(DataRow { flux_over_phi0: flux, observable, value, sigma });
        }
        SpectroscopyDataset::from_rows(rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("flux,observable,value_GHz,sigma_GHz\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:?},{},{:?},{:?}\n",
                r.flux_over_phi0, r.observable, r.value, r.sigma
            ));
        }
        out
    }
}

pub const PARAM_NAMES: [&str; 6] = ["C_r", "L_r", "C_q", "L_q", "E_J", "L_s"];

/// Which parameters stay frozen during the fit, in `PARAM_NAMES` order.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedMask(pub [bool; 6]);

impl FixedMask {
    pub fn fix(mut self, name: &str) -> Result<Self> {
        let idx = PARAM_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        self.0[idx] = true;
        Ok(self)
    }

    pub fn all_fixed(&self) -> bool {
        self.0.iter().all(|b| *b)
    }
}

fn params_to_array(p: &CircuitParams) -> [f64; 6] {
    [p.c_r, p.l_r, p.c_q, p.l_q, p.e_j, p.l_s]
}

fn params_from_array(v: &[f64; 6]) -> CircuitParams {
    CircuitParams { c_r: v[0], l_r: v[1], c_q: v[2], l_q: v[3], e_j: v[4], l_s: v[5] }
}

/// Model value for every dataset row: spectra are computed once per unique
/// flux point, in parallel, and the Kronecker blocks are shared.
pub fn evaluate_model(
    params: &CircuitParams,
    data: &SpectroscopyDataset,
    trunc: TruncationScheme,
) -> Result<Vec<f64>> {
    let basis = solve_normal_modes(params)?;
    let blocks = CouplingBlocks::new(&basis, trunc);
    let mut unique: Vec<f64> = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    for r in data.rows() {
        index.entry(r.flux_over_phi0.to_bits()).or_insert_with(|| {
            unique.push(r.flux_over_phi0);
            unique.len() - 1
        });
    }
    let per_flux: Result<Vec<[f64; 3]>> = unique
        .par_iter()
        .map(|&flux| {
            let spec = blocks.spectrum(params.e_j, FluxPoint::from_phi0(flux))?;
            Ok([spec.f_ge()?, spec.f_01()?, spec.dispersive_shift()?])
        })
        .collect();
    let per_flux = per_flux?;
    Ok(data
        .rows()
        .iter()
        .map(|r| {
            let vals = per_flux[index[&r.flux_over_phi0.to_bits()]];
            match r.observable {
                Observable::FGe => vals[0],
                Observable::F01 => vals[1],
                Observable::Chi => vals[2],
            }
        })
        .collect())
}

/// Residual cap (in sigmas) applied to chi rows.
const CHI_RESIDUAL_CAP: f64 = 5.0;

/// Weighted sum of squares; chi rows are capped at `CHI_RESIDUAL_CAP` sigma.
pub fn weighted_objective(
    params: &CircuitParams,
    data: &SpectroscopyDataset,
    trunc: TruncationScheme,
) -> Result<f64> {
    let model = evaluate_model(params, data, trunc)?;
    Ok(data
        .rows()
        .iter()
        .zip(&model)
        .map(|(r, m)| {
            let resid = ((m - r.value) / r.sigma).abs();
            let resid = if r.observable == Observable::Chi {
                resid.min(CHI_RESIDUAL_CAP)
            } else {
                resid
            };
            resid * resid
        })
        .sum())
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: CircuitParams,
    /// Weighted sum of squares at the optimum.
    pub residual: f64,
    /// RMS of (model - value) in GHz, per observable present in the data.
    pub per_observable_rms: Vec<(Observable, f64)>,
    pub iterations: usize,
    /// False when the optimizer stalled (relative improvement < 1e-10 over
    /// 50 iterations) before the simplex collapsed.
    pub converged: bool,
    pub fixed: [bool; 6],
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "converged          = {}", self.converged)?;
        writeln!(f, "iterations         = {}", self.iterations)?;
        writeln!(f, "weighted_residual  = {:.6e}", self.residual)?;
        for (obs, rms) in &self.per_observable_rms {
            writeln!(f, "rms[{obs}]        = {rms:.6e} GHz")?;
        }
        let vals = params_to_array(&self.params);
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            let tag = if self.fixed[i] { " (fixed)" } else { "" };
            writeln!(f, "{name} = {}{tag}", vals[i])?;
        }
        Ok(())
    }
}

/// Simplex coefficients: reflection, expansion, contraction, shrink.
const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

const STALL_WINDOW: usize = 50;
const STALL_REL: f64 = 1e-10;
const SPREAD_REL: f64 = 1e-10;
/// Absolute floor for the convergence tests; the objective is a chi-square,
/// so anything at this scale is an exact fit.
const SPREAD_ABS: f64 = 1e-12;

/// Fits the free parameters to the dataset from `initial`, holding masked
/// parameters fixed. Free parameters are bounded to [0.2x, 5x] their initial
/// values.
pub fn fit_params(
    data: &SpectroscopyDataset,
    initial: &CircuitParams,
    fixed: FixedMask,
    trunc: TruncationScheme,
) -> Result<FitResult> {
    initial.validate()?;
    let base = params_to_array(initial);
    let free: Vec<usize> = (0..6).filter(|&i| !fixed.0[i]).collect();

    let objective = |x: &[f64]| -> f64 {
        let mut v = base;
        for (slot, &i) in x.iter().zip(&free) {
            v[i] = *slot;
        }
        let p = params_from_array(&v);
        if p.validate().is_err() {
            return f64::INFINITY;
        }
        weighted_objective(&p, data, trunc).unwrap_or(f64::INFINITY)
    };

    if fixed.all_fixed() {
        let residual = weighted_objective(initial, data, trunc)?;
        return Ok(finish(*initial, residual, 0, true, fixed, data, trunc));
    }

    let lo: Vec<f64> = free.iter().map(|&i| 0.2 * base[i]).collect();
    let hi: Vec<f64> = free.iter().map(|&i| 5.0 * base[i]).collect();
    let clamp = |x: &mut Vec<f64>| {
        for (v, (l, h)) in x.iter_mut().zip(lo.iter().zip(&hi)) {
            *v = v.clamp(*l, *h);
        }
    };

    let n = free.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let x0: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    simplex.push(x0.clone());
    for k in 0..n {
        let mut x = x0.clone();
        x[k] *= 1.05;
        clamp(&mut x);
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| objective(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut history: Vec<f64> = Vec::new();
    while iterations < 2000 {
        iterations += 1;
        // order ascending
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = values[worst] - values[best];
        if values[best] <= SPREAD_ABS || spread <= SPREAD_ABS.max(SPREAD_REL * values[best].abs()) {
            converged = true;
            break;
        }
        history.push(values[best]);
        if history.len() > STALL_WINDOW {
            let then = history[history.len() - 1 - STALL_WINDOW];
            let improvement = (then - values[best]).abs();
            if improvement <= STALL_REL * (then.abs() + 1e-12) {
                break; // stalled: return best-so-far, converged = false
            }
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| {
                order[..n].iter().map(|&i| simplex[i][d]).sum::<f64>() / n as f64
            })
            .collect();
        let blend = |a: f64, from: &[f64], to: &[f64]| -> Vec<f64> {
            let mut x: Vec<f64> =
                from.iter().zip(to).map(|(c, w)| c + a * (c - w)).collect();
            clamp(&mut x);
            x
        };

        let reflected = blend(ALPHA, &centroid, &simplex[worst]);
        let f_reflected = objective(&reflected);
        if f_reflected < values[best] {
            let expanded = blend(GAMMA, &centroid, &simplex[worst]);
            let f_expanded = objective(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = if f_reflected < values[worst] {
                blend(RHO, &centroid, &simplex[worst]) // outside
            } else {
                let mut x: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c - RHO * (c - w))
                    .collect();
                clamp(&mut x);
                x
            };
            let f_contracted = objective(&contracted);
            if f_contracted < values[worst].min(f_reflected) {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                // shrink toward the best vertex
                let anchor = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    let mut x: Vec<f64> = anchor
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, v)| b + SIGMA * (v - b))
                        .collect();
                    clamp(&mut x);
                    values[i] = objective(&x);
                    simplex[i] = x;
                }
            }
        }
    }

    let best_idx = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty simplex");
    let mut v = base;
    for (slot, &i) in simplex[best_idx].iter().zip(&free) {
        v[i] = *slot;
    }
    let params = params_from_array(&v);
    Ok(finish(params, values[best_idx], iterations, converged, fixed, data, trunc))
}

fn finish(
    params: CircuitParams,
    residual: f64,
    iterations: usize,
    converged: bool,
    fixed: FixedMask,
    data: &SpectroscopyDataset,
    trunc: TruncationScheme,
) -> FitResult {
    let model = evaluate_model(&params, data, trunc).unwrap_or_default();
    let mut per_observable_rms = Vec::new();
    for obs in Observable::ALL {
        let diffs: Vec<f64> = data
            .rows()
            .iter()
            .zip(&model)
            .filter(|(r, _)| r.observable == obs)
            .map(|(r, m)| (m - r.value) * (m - r.value))
            .collect();
        if !diffs.is_empty() {
            let rms = (diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt();
            per_observable_rms.push((obs, rms));
        }
    }
    FitResult { params, residual, per_observable_rms, iterations, converged, fixed: fixed.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn device_a() -> CircuitParams {
        CircuitParams::new(20.3, 15.6, 5.3, 386.0, 6.20, 4.5).unwrap()
    }

    fn small_trunc() -> TruncationScheme {
        TruncationScheme::new(3, 12).unwrap()
    }

    fn synthetic_noiseless(fluxes: &[f64], trunc: TruncationScheme) -> SpectroscopyDataset {
        let params = device_a();
        let mut rows = Vec::new();
        for &fx in fluxes {
            let spec =
                crate::hamiltonian::spectrum_at(&params, FluxPoint::from_phi0(fx), trunc).unwrap();
            rows.push(DataRow {
                flux_over_phi0: fx,
                observable: Observable::FGe,
                value: spec.f_ge().unwrap(),
                sigma: 1e-3,
            });
            rows.push(DataRow {
                flux_over_phi0: fx,
                observable: Observable::F01,
                value: spec.f_01().unwrap(),
                sigma: 1e-3,
            });
            rows.push(DataRow {
                flux_over_phi0: fx,
                observable: Observable::Chi,
                value: spec.dispersive_shift().unwrap(),
                sigma: 1e-4,
            });
        }
        SpectroscopyDataset::from_rows(rows).unwrap()
    }

    #[test]
    fn csv_ingest_happy_path_and_errors() {
        let one = "flux,observable,value_GHz,sigma_GHz\n0.5,f_ge,1.246,0.001\n";
        let ds = SpectroscopyDataset::ingest_csv(one).unwrap();
        assert_eq!(ds.rows().len(), 1);
        assert_eq!(ds.rows()[0].observable, Observable::FGe);

        let zero_sigma = "flux,observable,value_GHz,sigma_GHz\n0.5,f_ge,1.246,0\n";
        assert!(matches!(
            SpectroscopyDataset::ingest_csv(zero_sigma),
            Err(Error::BadSigma { .. })
        ));
        let bad_obs = "flux,observable,value_GHz,sigma_GHz\n0.5,fge,1.246,0.001\n";
        assert!(matches!(
            SpectroscopyDataset::ingest_csv(bad_obs),
            Err(Error::UnknownObservable(..))
        ));
        let bad_num = "flux,observable,value_GHz,sigma_GHz\n0.5,chi,abc,0.001\n";
        assert!(matches!(SpectroscopyDataset::ingest_csv(bad_num), Err(Error::Csv { .. })));
        assert!(matches!(SpectroscopyDataset::ingest_csv(""), Err(Error::EmptyDataset)));
    }

    #[test]
    fn csv_round_trip_and_comment_headers() {
        let ds = synthetic_noiseless(&[0.1, 0.4], small_trunc());
        let text = format!("# generated\n{}", ds.to_csv());
        let back = SpectroscopyDataset::ingest_csv(&text).unwrap();
        assert_eq!(back.rows().len(), ds.rows().len());
        for (a, b) in back.rows().iter().zip(ds.rows()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn objective_is_invariant_under_row_reordering() {
        let ds = synthetic_noiseless(&[0.1, 0.3, 0.45], small_trunc());
        let mut rows = ds.rows().to_vec();
        rows.reverse();
        rows.swap(1, 5);
        let shuffled = SpectroscopyDataset::from_rows(rows).unwrap();
        let p = CircuitParams::new(20.0, 15.0, 5.0, 380.0, 6.0, 4.0).unwrap();
        let a = weighted_objective(&p, &ds, small_trunc()).unwrap();
        let b = weighted_objective(&p, &shuffled, small_trunc()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn all_fixed_is_a_pure_forward_evaluation() {
        let ds = synthetic_noiseless(&[0.2, 0.5], small_trunc());
        let mask = FixedMask([true; 6]);
        let init = CircuitParams::new(20.0, 15.0, 5.0, 380.0, 6.0, 4.0).unwrap();
        let fit = fit_params(&ds, &init, mask, small_trunc()).unwrap();
        assert_eq!(fit.iterations, 0);
        assert!(fit.converged);
        assert_eq!(fit.params, init);
        let direct = weighted_objective(&init, &ds, small_trunc()).unwrap();
        assert_relative_eq!(fit.residual, direct, max_relative = 1e-12);
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let ds = synthetic_noiseless(&[0.1, 0.25, 0.4, 0.5], small_trunc());
        let truth = device_a();
        let fit = fit_params(&ds, &truth, FixedMask::default(), small_trunc()).unwrap();
        assert!(fit.converged);
        assert!(fit.residual < 1e-12, "residual {}", fit.residual);
        let got = [fit.params.c_r, fit.params.l_r, fit.params.c_q, fit.params.l_q, fit.params.e_j, fit.params.l_s];
        let want = [20.3, 15.6, 5.3, 386.0, 6.20, 4.5];
        for (g, w) in got.iter().zip(want) {
            assert_relative_eq!(*g, w, max_relative = 1e-6);
        }
    }

    #[test]
    fn fixed_fields_are_bit_identical_in_the_output() {
        let ds = synthetic_noiseless(&[0.15, 0.35, 0.5], small_trunc());
        let init = CircuitParams::new(20.3, 16.0, 5.2, 390.0, 6.1, 4.4).unwrap();
        let mask = FixedMask::default().fix("C_r").unwrap();
        let fit = fit_params(&ds, &init, mask, small_trunc()).unwrap();
        assert_eq!(fit.params.c_r.to_bits(), init.c_r.to_bits());
        assert!(fit.fixed[0] && !fit.fixed[1]);
    }

    #[test]
    fn unknown_fix_name_is_rejected() {
        assert!(matches!(
            FixedMask::default().fix("R_x"),
            Err(Error::UnknownParameter(..))
        ));
    }
}
