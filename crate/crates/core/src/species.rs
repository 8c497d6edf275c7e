//! Atomic constants and the versioned key-value constants file they load from.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RB87_CONSTANTS: &str = include_str!("../data/rb87.constants");

/// Constants describing the ground-state Zeeman structure of an alkali atom.
///
/// Energies are in joules, angular frequencies in rad/s. `gamma_0`, `q_0` and
/// `c_0` are stored as positive magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicSpecies {
    pub name: String,
    pub nuclear_spin: f64,
    pub g_j: f64,
    pub g_i: f64,
    /// Ground-state hyperfine splitting (J).
    pub e_hfs: f64,
    /// Bohr magneton (J/T).
    pub mu_b: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Zero-field gyromagnetic ratio (rad s^-1 T^-1).
    pub gamma_0: f64,
    /// Zero-field quadratic Zeeman coefficient (rad s^-1 T^-2).
    pub q_0: f64,
    /// Cubic Larmor coefficient (rad s^-1 T^-3).
    pub c_0: f64,
}

impl AtomicSpecies {
    /// The bundled 87Rb table.
    pub fn rb87() -> Self {
        Self::from_constants_str(RB87_CONSTANTS).expect("bundled constants file is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_constants_str(&text)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_constants_str(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("constants line {}: expected `key = value`", lineno + 1))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |key: &str| -> Result<f64> {
            let v = map
                .get(key)
                .ok_or_else(|| Error::Format(format!("constants file missing `{key}`")))?;
            v.parse::<f64>()
                .map_err(|_| Error::Format(format!("constants `{key}` is not a number: {v}")))
        };
        let version = num("format_version")?;
        if version != 1.0 {
            return Err(Error::Format(format!("unsupported constants version {version}")));
        }
        let h = num("planck_j_s")?;
        let species = AtomicSpecies {
            name: map.get("species").cloned().unwrap_or_else(|| "unnamed".into()),
            nuclear_spin: num("nuclear_spin")?,
            g_j: num("g_j")?,
            g_i: num("g_i")?,
            e_hfs: h * num("hyperfine_splitting_hz")?,
            mu_b: num("bohr_magneton_j_per_t")?,
            hbar: h / TAU,
            gamma_0: TAU * num("gamma_0_hz_per_t")?,
            q_0: TAU * num("q_0_hz_per_t2")?,
            c_0: TAU * num("c_0_hz_per_t3")?,
        };
        species.validate()?;
        Ok(species)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_hfs > 0.0) || !(self.mu_b > 0.0) || !(self.hbar > 0.0) {
            return Err(Error::Domain("E_hfs, mu_B and hbar must be positive".into()));
        }
        if !(self.nuclear_spin > 0.0) {
            return Err(Error::Domain("nuclear spin must be positive".into()));
        }
        let derived = self.derived_gamma_0();
        if !agrees_to_sig_figs(derived, self.gamma_0, 6) {
            return Err(Error::Domain(format!(
                "stored gamma_0 {:.6e} disagrees with g-factor value {:.6e}",
                self.gamma_0 / TAU,
                derived / TAU
            )));
        }
        Ok(())
    }

    /// Hyperfine splitting as an angular frequency (rad/s).
    pub fn omega_hfs(&self) -> f64 {
        self.e_hfs / self.hbar
    }

    /// `4/(2I+1)`, the coefficient of `m x` under the Breit-Rabi square root.
    pub(crate) fn m_coefficient(&self) -> f64 {
        4.0 / (2.0 * self.nuclear_spin + 1.0)
    }

    /// Dimensionless field per tesla, `x / B`.
    pub(crate) fn x_per_tesla(&self) -> f64 {
        (self.g_j - self.g_i) * self.mu_b / self.e_hfs
    }

    /// Linear Larmor coefficient from the g-factors, `|5 g_I - g_J| mu_B / 4 hbar`
    /// generalised to arbitrary I.
    pub fn derived_gamma_0(&self) -> f64 {
        // d/dB of (E_{1,-1} - E_{1,+1}) / 2 hbar at B = 0.
        let a = self.m_coefficient();
        (0.5 * a * (self.g_j - self.g_i) * self.mu_b - 2.0 * self.g_i * self.mu_b).abs()
            / (2.0 * self.hbar)
    }
}

fn agrees_to_sig_figs(a: f64, b: f64, figs: i32) -> bool {
    let scale = 10f64.powi(figs - 1 - b.abs().log10().floor() as i32);
    (a * scale).round() == (b * scale).round()
}
