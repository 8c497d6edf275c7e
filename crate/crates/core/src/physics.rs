//! Breit-Rabi Zeeman structure of the F=1 ground manifold, microwave ac Zeeman
//! dressing, and field <-> Larmor frequency conversion.
//!
//! Level differences are evaluated in rationalised form (differences of square
//! roots rewritten as quotients) so the Larmor and quadratic shifts keep full
//! relative precision down to zero field, where the absolute level energies
//! are nine orders of magnitude larger than their splitting.
//!
//! Sign convention: the physical gyromagnetic ratio of F=1 is negative. The
//! Larmor frequency returned here is the magnitude `(E_{1,-1} - E_{1,+1}) / 2 hbar`,
//! positive for B > 0. Field estimation only needs |B|.
//!
//! Dressing convention: the microwave shift `q_mw,m` is the shift of the
//! |1,m> <-> |2,m> transition; the F=1 partner level moves by `-hbar q_mw,m`.
//! With this reading a positive detuning lowers the total quadratic shift by
//! `Omega^2 / 4 Delta`, which is what allows it to be nulled.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::species::AtomicSpecies;

/// Fields at or above this are outside the weak/intermediate-field regime we model.
pub const FIELD_GUARD_T: f64 = 0.1;

/// Minimum |denominator| of a microwave shift before it counts as resonant.
pub const RESONANCE_GUARD: f64 = TAU * 100.0;

/// Default `invert_field` tolerance (rad/s).
pub const DEFAULT_INVERT_TOL: f64 = TAU * 1e-4;

/// Residual quadratic shift accepted by [`null_quadratic`] (rad/s).
pub const NULL_RESIDUAL: f64 = TAU * 0.1;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicrowaveDressing {
    /// Rabi frequency (rad/s).
    pub rabi: f64,
    /// Detuning from the clock transition (rad/s).
    pub detuning: f64,
    pub enabled: bool,
}

impl Default for MicrowaveDressing {
    fn default() -> Self {
        Self::none()
    }
}

impl MicrowaveDressing {
    pub fn none() -> Self {
        Self { rabi: 0.0, detuning: 0.0, enabled: false }
    }

    pub fn new(rabi: f64, detuning: f64) -> Result<Self> {
        let d = Self { rabi, detuning, enabled: true };
        d.validate()?;
        Ok(d)
    }

    /// Approximate operating point: 2pi x 6 kHz Rabi, 2pi x 150 kHz detuning.
    pub fn approximate_lab() -> Self {
        Self { rabi: TAU * 6.0e3, detuning: TAU * 150.0e3, enabled: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.rabi >= 0.0) || !self.rabi.is_finite() {
            return Err(Error::Domain(format!("Rabi frequency must be >= 0, got {}", self.rabi)));
        }
        if !(self.detuning.abs() > 0.0) || !self.detuning.is_finite() {
            return Err(Error::Domain("microwave detuning must be nonzero".into()));
        }
        Ok(())
    }

    fn active(&self) -> bool {
        self.enabled && self.rabi != 0.0
    }
}

/// Ground hyperfine manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Manifold {
    Lower,
    Upper,
}

impl Manifold {
    pub fn from_f(f: u8) -> Result<Self> {
        match f {
            1 => Ok(Manifold::Lower),
            2 => Ok(Manifold::Upper),
            _ => Err(Error::Domain(format!("F must be 1 or 2, got {f}"))),
        }
    }

    fn sign(self) -> f64 {
        match self {
            Manifold::Lower => -1.0,
            Manifold::Upper => 1.0,
        }
    }
}

fn check_field(b: f64) -> Result<()> {
    if !(0.0..FIELD_GUARD_T).contains(&b) {
        return Err(Error::Range(format!("field {b} T outside [0, {FIELD_GUARD_T}) T")));
    }
    Ok(())
}

fn check_m(m: i8) -> Result<()> {
    if !(-1..=1).contains(&m) {
        return Err(Error::Domain(format!("m must be -1, 0 or +1, got {m}")));
    }
    Ok(())
}

/// The three Breit-Rabi square roots `sqrt(1 + a m x + x^2)` for m = -1, 0, +1.
#[derive(Debug, Clone, Copy)]
struct Roots {
    x: f64,
    a: f64,
    minus: f64,
    zero: f64,
    plus: f64,
}

impl Roots {
    fn new(species: &AtomicSpecies, b: f64) -> Self {
        let x = species.x_per_tesla() * b;
        let a = species.m_coefficient();
        let x2 = x * x;
        Self {
            x,
            a,
            minus: (1.0 - a * x + x2).sqrt(),
            zero: (1.0 + x2).sqrt(),
            plus: (1.0 + a * x + x2).sqrt(),
        }
    }

    /// `s_m - s_0` without cancellation.
    fn offset(&self, m: i8) -> f64 {
        match m {
            1 => self.a * self.x / (self.plus + self.zero),
            -1 => -self.a * self.x / (self.minus + self.zero),
            _ => 0.0,
        }
    }

    /// `s_+ - s_-`.
    fn spread(&self) -> f64 {
        2.0 * self.a * self.x / (self.plus + self.minus)
    }

    /// `s_+ + s_- - 2 s_0`.
    fn curvature(&self) -> f64 {
        let ax = self.a * self.x;
        -2.0 * ax * ax
            / ((self.plus + self.minus) * (self.plus + self.zero) * (self.minus + self.zero))
    }
}

/// Breit-Rabi energy of |F, m> in joules.
pub fn breit_rabi_energy(species: &AtomicSpecies, f: u8, m: i8, b: f64) -> Result<f64> {
    let manifold = Manifold::from_f(f)?;
    check_m(m)?;
    check_field(b)?;
    let r = Roots::new(species, b);
    let s = match m {
        -1 => r.minus,
        0 => r.zero,
        _ => r.plus,
    };
    let e = species.e_hfs;
    Ok(-e / (2.0 * (2.0 * species.nuclear_spin + 1.0))
        + species.g_i * species.mu_b * f64::from(m) * b
        + manifold.sign() * 0.5 * e * s)
}

/// `(E_{F,m} - E_{F,0}) / hbar` in rad/s.
fn level_gap(species: &AtomicSpecies, r: &Roots, manifold: Manifold, m: i8, b: f64) -> f64 {
    species.g_i * species.mu_b * f64::from(m) * b / species.hbar
        + manifold.sign() * 0.5 * species.omega_hfs() * r.offset(m)
}

fn bare_larmor(species: &AtomicSpecies, r: &Roots, b: f64) -> f64 {
    (0.5 * species.omega_hfs() * r.spread() - 2.0 * species.g_i * species.mu_b * b / species.hbar)
        / 2.0
}

fn bare_quadratic(species: &AtomicSpecies, r: &Roots) -> f64 {
    -0.25 * species.omega_hfs() * r.curvature()
}

fn shift_from_roots(
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
    r: &Roots,
    b: f64,
    m: i8,
) -> Result<f64> {
    if !dressing.active() {
        return Ok(0.0);
    }
    let denom = if m == 0 {
        dressing.detuning
    } else {
        dressing.detuning - level_gap(species, r, Manifold::Upper, m, b)
            + level_gap(species, r, Manifold::Lower, m, b)
    };
    if denom.abs() < RESONANCE_GUARD {
        return Err(Error::Resonance(format!(
            "m={m} microwave denominator {:.3} Hz at B={b:.6e} T",
            denom / TAU
        )));
    }
    Ok(-dressing.rabi * dressing.rabi / (4.0 * denom))
}

/// ac Zeeman shift `q_mw,m` (rad/s) of the |1,m> <-> |2,m> transition.
pub fn mw_ac_zeeman_shift(
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
    b: f64,
    m: i8,
) -> Result<f64> {
    check_m(m)?;
    check_field(b)?;
    dressing.validate()?;
    shift_from_roots(species, dressing, &Roots::new(species, b), b, m)
}

/// Shifts for m = -1, 0, +1.
fn shifts(
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
    r: &Roots,
    b: f64,
) -> Result<[f64; 3]> {
    Ok([
        shift_from_roots(species, dressing, r, b, -1)?,
        shift_from_roots(species, dressing, r, b, 0)?,
        shift_from_roots(species, dressing, r, b, 1)?,
    ])
}

/// Larmor angular frequency (rad/s) at field `b`, dressed if enabled.
pub fn larmor_frequency(species: &AtomicSpecies, b: f64, dressing: &MicrowaveDressing) -> Result<f64> {
    check_field(b)?;
    dressing.validate()?;
    let r = Roots::new(species, b);
    let bare = bare_larmor(species, &r, b);
    if !dressing.active() {
        return Ok(bare);
    }
    let [qm, _, qp] = shifts(species, dressing, &r, b)?;
    Ok(bare + 0.5 * (qp - qm))
}

/// Quadratic Zeeman shift (rad/s), `(E'_{1,+1} + E'_{1,-1} - 2 E'_{1,0}) / 2 hbar`.
pub fn quadratic_shift(species: &AtomicSpecies, b: f64, dressing: &MicrowaveDressing) -> Result<f64> {
    check_field(b)?;
    dressing.validate()?;
    let r = Roots::new(species, b);
    let bare = bare_quadratic(species, &r);
    if !dressing.active() {
        return Ok(bare);
    }
    let [qm, q0, qp] = shifts(species, dressing, &r, b)?;
    Ok(bare + q0 - 0.5 * (qp + qm))
}

/// Zero-field limit of the running gyromagnetic ratio, including the linear
/// part of the dressing asymmetry.
pub fn zero_field_gamma(species: &AtomicSpecies, dressing: &MicrowaveDressing) -> f64 {
    let bare = species.derived_gamma_0();
    if !dressing.active() {
        return bare;
    }
    // d/dB of (q_+ - q_-)/2 at B = 0, with D_m = Delta - omega_hfs a m x / 2 + O(x^2).
    let dx = species.x_per_tesla();
    let slope = dressing.rabi * dressing.rabi / (4.0 * dressing.detuning * dressing.detuning)
        * (-species.omega_hfs() * species.m_coefficient() * dx / 2.0);
    bare + slope
}

/// `gamma(B) = omega(B) / B` (rad s^-1 T^-1).
pub fn running_gamma(species: &AtomicSpecies, b: f64, dressing: &MicrowaveDressing) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("running gamma needs B > 0, got {b}")));
    }
    if b < 1e-12 {
        check_field(b)?;
        dressing.validate()?;
        return Ok(zero_field_gamma(species, dressing));
    }
    Ok(larmor_frequency(species, b, dressing)? / b)
}

/// Field whose Larmor frequency is `omega` to within `tol` (rad/s), by bisection.
pub fn invert_field(
    species: &AtomicSpecies,
    omega: f64,
    dressing: &MicrowaveDressing,
    tol: f64,
) -> Result<f64> {
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::Range(format!("cannot invert Larmor frequency {omega}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("inversion tolerance must be positive".into()));
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let f = |b: f64| larmor_frequency(species, b, dressing).map(|w| w - omega);
    let guess = omega / species.gamma_0;
    if guess >= FIELD_GUARD_T {
        return Err(Error::Range(format!("omega {omega} rad/s beyond field guard")));
    }

    let mut lo = guess * (1.0 - 1e-3);
    let mut hi = (guess * (1.0 + 1e-3)).min(FIELD_GUARD_T * (1.0 - 1e-12));
    let mut f_lo = f(lo)?;
    let mut expansions = 0;
    while f_lo > 0.0 {
        lo *= 0.5;
        f_lo = if lo < 1e-300 { -omega } else { f(lo)? };
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Range("could not bracket omega from below".into()));
        }
    }
    let mut f_hi = f(hi)?;
    while f_hi < 0.0 {
        if hi >= FIELD_GUARD_T * (1.0 - 1e-9) {
            return Err(Error::Range(format!("omega {omega} rad/s beyond field guard")));
        }
        hi = (hi * 2.0).min(FIELD_GUARD_T * (1.0 - 1e-12));
        f_hi = f(hi)?;
    }

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (b, err) = if f_lo.abs() <= f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    if err.abs() < tol {
        Ok(b)
    } else {
        Err(Error::Numeric(format!(
            "field inversion stalled with residual {:.3e} Hz",
            err / TAU
        )))
    }
}

/// Which dressing parameter [`null_quadratic`] solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeParameter {
    Rabi,
    Detuning,
}

/// Adjusts one dressing parameter so the total quadratic shift at `b` vanishes.
pub fn null_quadratic(
    species: &AtomicSpecies,
    b: f64,
    template: &MicrowaveDressing,
    free: FreeParameter,
) -> Result<MicrowaveDressing> {
    check_field(b)?;
    let with = |p: f64| -> MicrowaveDressing {
        match free {
            FreeParameter::Rabi => MicrowaveDressing { rabi: p, detuning: template.detuning, enabled: true },
            FreeParameter::Detuning => MicrowaveDressing { rabi: template.rabi, detuning: p, enabled: true },
        }
    };
    let q = |p: f64| quadratic_shift(species, b, &with(p));

    match free {
        FreeParameter::Rabi => {
            if template.detuning == 0.0 {
                return Err(Error::Domain("detuning must be nonzero to null by Rabi frequency".into()));
            }
            let q0 = q(0.0)?;
            if q0.abs() < NULL_RESIDUAL * 1e-3 {
                return Ok(with(0.0));
            }
            let mut lo = 0.0;
            let mut hi = TAU * 1.0;
            while q(hi)?.signum() == q0.signum() {
                lo = hi;
                hi *= 2.0;
                if hi > TAU * 1e8 {
                    return Err(Error::Infeasible(
                        "no Rabi frequency changes the sign of the quadratic shift".into(),
                    ));
                }
            }
            bisect_null(&q, lo, hi).map(with)
        }
        FreeParameter::Detuning => {
            let sign = if template.detuning < 0.0 { -1.0 } else { 1.0 };
            // Log-spaced scan in |Delta| from 100 Hz to 10 GHz; sign changes not
            // straddling a resonance are candidate roots.
            let grid: Vec<f64> =
                (0..=480).map(|k| sign * TAU * 10f64.powf(2.0 + k as f64 / 60.0)).collect();
            let values: Vec<Option<f64>> = grid.iter().map(|&d| q(d).ok()).collect();
            let mut candidates = Vec::new();
            for k in 0..grid.len() - 1 {
                if let (Some(a), Some(c)) = (values[k], values[k + 1]) {
                    if a.signum() != c.signum() {
                        candidates.push((grid[k], grid[k + 1]));
                    }
                }
            }
            candidates.sort_by(|x, y| {
                let dx = (x.0.abs().ln() - template.detuning.abs().ln()).abs();
                let dy = (y.0.abs().ln() - template.detuning.abs().ln()).abs();
                dx.total_cmp(&dy)
            });
            for (a, c) in candidates {
                if let Ok(p) = bisect_null(&q, a, c) {
                    return Ok(with(p));
                }
            }
            Err(Error::Infeasible("no detuning nulls the quadratic shift".into()))
        }
    }
}

fn bisect_null(q: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut q_lo = q(lo)?;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let q_mid = q(mid)?;
        if q_mid.abs() < NULL_RESIDUAL * 1e-3 {
            return Ok(mid);
        }
        if q_mid.signum() == q_lo.signum() {
            lo = mid;
            q_lo = q_mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    let q_mid = q(mid)?;
    if q_mid.abs() < NULL_RESIDUAL {
        Ok(mid)
    } else {
        Err(Error::Numeric(format!("nulling did not converge: residual {:.3e} Hz", q_mid / TAU)))
    }
}
