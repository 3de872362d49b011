//! Physical constants, circuit parameters, and flux handling.
//!
//! Working units throughout the crate: capacitance in fF, inductance in nH,
//! energies and frequencies in GHz (E/h), impedance in Ohm, phase
//! dimensionless. With L in nH and C in fF, `1e3 / (2 pi sqrt(L C))` is a
//! frequency in GHz and `1e3 sqrt(L / C)` an impedance in Ohm.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::{Error, Result};

/// Planck constant, J s (CODATA, exact).
pub const PLANCK: f64 = 6.62607015e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;
/// Elementary charge, C (CODATA, exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Fundamental constants used by the quantization, derived from the pinned
/// CODATA literals above so they are mutually consistent to f64 precision.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants {
    /// Reduced flux quantum Phi_0 / 2 pi = hbar / 2e, Wb.
    pub reduced_flux_quantum: f64,
    /// Impedance quantum R_Q = hbar / (2e)^2 (about 1027.1 Ohm).
    pub impedance_quantum: f64,
    /// Planck constant, J s; converts energies to frequencies.
    pub planck: f64,
}

impl PhysicalConstants {
    pub fn codata() -> Self {
        let two_e = 2.0 * ELEMENTARY_CHARGE;
        PhysicalConstants {
            reduced_flux_quantum: HBAR / two_e,
            impedance_quantum: HBAR / (two_e * two_e),
            planck: PLANCK,
        }
    }
}

/// Inductive energy scale phi0^2 / (h L) in GHz for L in nH.
///
/// The 1e9 factors from nH -> H and Hz -> GHz cancel, so the coefficient is
/// just phi0^2 / h (about 163.46 GHz nH).
pub fn inductive_energy_ghz(l_nh: f64) -> f64 {
    let c = PhysicalConstants::codata();
    c.reduced_flux_quantum * c.reduced_flux_quantum / c.planck / l_nh
}

/// Harmonic mode frequency 1 / (2 pi sqrt(L C)) in GHz for L in nH, C in fF.
pub fn mode_frequency_ghz(l_nh: f64, c_ff: f64) -> f64 {
    1e3 / (TAU * (l_nh * c_ff).sqrt())
}

/// Characteristic impedance sqrt(L / C) in Ohm for L in nH, C in fF.
pub fn mode_impedance_ohm(l_nh: f64, c_ff: f64) -> f64 {
    1e3 * (l_nh / c_ff).sqrt()
}

/// Zero-point phase spread sqrt(Z / 2 R_Q) of a mode with impedance `z_ohm`.
pub fn phase_zpf(z_ohm: f64) -> f64 {
    (z_ohm / (2.0 * PhysicalConstants::codata().impedance_quantum)).sqrt()
}

/// The five lumped elements plus the Josephson energy of the reduced circuit.
///
/// `e_j = 0` (linear circuit) and `l_s = 0` (decoupled modes) are valid
/// limits; the four remaining elements must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Readout (antenna) capacitance, fF.
    pub c_r: f64,
    /// Unshared readout inductance, nH.
    pub l_r: f64,
    /// Small-junction capacitance, fF.
    pub c_q: f64,
    /// Unshared qubit superinductance, nH.
    pub l_q: f64,
    /// Josephson energy E_J / h, GHz.
    pub e_j: f64,
    /// Shared (coupling) inductance, nH.
    pub l_s: f64,
}

const KEYS: [(&str, &str); 6] = [
    ("C_r", "fF"),
    ("L_r", "nH"),
    ("C_q", "fF"),
    ("L_q", "nH"),
    ("E_J", "GHz"),
    ("L_s", "nH"),
];

impl CircuitParams {
    pub fn new(c_r: f64, l_r: f64, c_q: f64, l_q: f64, e_j: f64, l_s: f64) -> Result<Self> {
        let p = CircuitParams { c_r, l_r, c_q, l_q, e_j, l_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, value, strict) in [
            ("C_r", self.c_r, true),
            ("L_r", self.l_r, true),
            ("C_q", self.c_q, true),
            ("L_q", self.l_q, true),
            ("E_J", self.e_j, false),
            ("L_s", self.l_s, false),
        ] {
            if !value.is_finite() || value < 0.0 || (strict && value == 0.0) {
                return Err(Error::NonPositive { key, value });
            }
        }
        Ok(())
    }

    /// Warns when the circuit leaves the L_q >> L_r ~ L_s regime the reduced
    /// Lagrangian assumes.
    pub fn regime_warning(&self) -> Option<String> {
        let total = self.l_r + self.l_s;
        (self.l_q < 5.0 * total).then(|| {
            format!(
                "L_q = {} nH is less than 5 (L_r + L_s) = {} nH; the reduced two-mode model assumes L_q >> L_r ~ L_s",
                self.l_q,
                5.0 * total
            )
        })
    }

    /// Parses the flat `key = value unit` config grammar (see repo docs).
    pub fn parse(text: &str) -> Result<Self> {
        let mut seen: [Option<f64>; 6] = [None; 6];
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, rest) = content.split_once('=').ok_or_else(|| Error::MalformedLine {
                line,
                text: content.to_string(),
            })?;
            let key = key.trim();
            let idx = KEYS
                .iter()
                .position(|(k, _)| *k == key)
                .ok_or_else(|| Error::UnknownKey(key.to_string(), line))?;
            if seen[idx].is_some() {
                return Err(Error::DuplicateKey(key.to_string(), line));
            }
            let mut parts = rest.split_whitespace();
            let number = parts.next().ok_or_else(|| Error::MalformedLine {
                line,
                text: content.to_string(),
            })?;
            let unit = parts.next().unwrap_or("");
            if unit != KEYS[idx].1 || parts.next().is_some() {
                return Err(Error::WrongUnit {
                    key: key.to_string(),
                    expected: KEYS[idx].1,
                    got: unit.to_string(),
                });
            }
            let value: f64 = number.parse().map_err(|_| Error::MalformedNumber {
                key: key.to_string(),
                value: number.to_string(),
                line,
            })?;
            seen[idx] = Some(value);
        }
        let mut vals = [0.0; 6];
        for (i, v) in seen.iter().enumerate() {
            vals[i] = v.ok_or(Error::MissingKey(KEYS[i].0))?;
        }
        CircuitParams::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5])
    }

    /// Emits config text that `parse` maps back to identical field values.
    pub fn to_config_text(&self) -> String {
        let vals = [self.c_r, self.l_r, self.c_q, self.l_q, self.e_j, self.l_s];
        let mut out = String::new();
        for ((key, unit), v) in KEYS.iter().zip(vals) {
            // `{:?}` prints the shortest digits that round-trip an f64
            out.push_str(&format!("{key} = {v:?} {unit}\n"));
        }
        out
    }
}

impl fmt::Display for CircuitParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "C_r={} fF, L_r={} nH, C_q={} fF, L_q={} nH, E_J={} GHz, L_s={} nH",
            self.c_r, self.l_r, self.c_q, self.l_q, self.e_j, self.l_s
        )
    }
}

/// External flux threading the qubit loop, stored in units of Phi_0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPoint {
    phi0_units: f64,
}

impl FluxPoint {
    /// From Phi_ext / Phi_0.
    pub fn from_phi0(phi0_units: f64) -> Self {
        FluxPoint { phi0_units }
    }

    /// From the reduced flux phi_ext = 2 pi Phi_ext / Phi_0, radians.
    pub fn from_radians(phi_ext: f64) -> Self {
        FluxPoint { phi0_units: phi_ext / TAU }
    }

    pub fn in_phi0(&self) -> f64 {
        self.phi0_units
    }

    pub fn radians(&self) -> f64 {
        self.phi0_units * TAU
    }
}
