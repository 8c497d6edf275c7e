//! Frequency-estimate variance against the Cramér-Rao bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_of, simulate_shot, Scenario};
use crate::dsp::{Bandpass, FilterSpec};
use crate::error::{Error, Result};
use crate::estimation::{crlb_frequency_variance, db_to_linear, fit_dc_phase, threshold_snr_db};
use crate::physics;
use crate::reconstruct::reconstruct;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbTrial {
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub omega_est: f64,
    pub sigma_omega: f64,
    pub b_est: f64,
    /// Unwrapper flags in the fitted phase.
    pub discontinuities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbPoint {
    /// Full-bandwidth SNR; `None` for the noiseless control.
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub mean_omega: f64,
    pub variance: f64,
    pub crlb: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbReport {
    pub seed: u64,
    pub fs_hz: f64,
    pub fit_samples: usize,
    pub enbw_hz: f64,
    /// Full-bandwidth SNR at which the band reaches the in-band threshold (dB).
    pub band_threshold_db: f64,
    /// Interpolated SNR where the ratio falls through 2 (dB).
    pub empirical_threshold_db: Option<f64>,
    pub omega_true: f64,
    pub points: Vec<CrlbPoint>,
    pub trials: Vec<CrlbTrial>,
}

impl CrlbReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("snr_db,trial,seed,omega_est,sigma_omega,b_est,discontinuities\n");
        for t in &self.trials {
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                t.snr_db, t.trial, t.seed, t.omega_est, t.sigma_omega, t.b_est, t.discontinuities
            );
        }
        s
    }
}

fn filter_of(scenario: &Scenario, center: f64) -> Result<Bandpass> {
    let spec = FilterSpec { prototype_order: scenario.filter.prototype_order, ..FilterSpec::centered(center, scenario.filter.band_hz) };
    Bandpass::design(&spec, scenario.record.fs_hz)
}

fn carrier(scenario: &Scenario) -> Result<f64> {
    if scenario.filter.center_hz > 0.0 {
        return Ok(scenario.filter.center_hz);
    }
    let w = physics::larmor_frequency(&scenario.species()?, scenario.field.b0_t, &scenario.dressing())?;
    Ok(w / std::f64::consts::TAU)
}

/// Full-bandwidth SNR threshold of the scenario's passband (dB).
pub fn band_threshold_db(scenario: &Scenario) -> Result<f64> {
    let bp = filter_of(scenario, carrier(scenario)?)?;
    Ok(threshold_snr_db(bp.equivalent_noise_bandwidth(), scenario.record.fs_hz))
}

/// Edge guard covering at least the filter's impulse length.
fn guard(scenario: &Scenario, bp: &Bandpass) -> usize {
    scenario.filter.edge_guard_samples.max(bp.effective_length())
}

/// One trial at `snr_db` (`None` for noiseless), returning the fitted slope.
pub fn crlb_trial(scenario: &Scenario, snr_db: Option<f64>, index: usize) -> Result<CrlbTrial> {
    let species = scenario.species()?;
    let center = carrier(scenario)?;
    let bp = filter_of(scenario, center)?;
    let g = guard(scenario, &bp);
    let n = scenario.sweep.fit_samples;
    let fs = scenario.record.fs_hz;
    let mut sc = scenario.clone();
    match snr_db {
        Some(db) => sc.record.initial_snr_db = db,
        None => sc.record.initial_snr_db = f64::INFINITY,
    }
    let seed = seed_of(scenario, index);
    let shot = simulate_shot(&sc, &species, seed, (n + 2 * g) as f64 / fs, None)?;
    let mut opts = scenario.reconstruction(scenario.filter.band_hz, Some(center));
    opts.edge_guard = g;
    opts.weighted = false;
    let rec = reconstruct(&shot.record, &opts)?;
    let est = fit_dc_phase(&rec.phase, None, &species, &scenario.dressing())?;
    Ok(CrlbTrial {
        snr_db: snr_db.unwrap_or(f64::INFINITY),
        trial: index,
        seed,
        omega_est: est.omega_est,
        sigma_omega: est.sigma_omega,
        b_est: est.b_est,
        discontinuities: rec.phase.discontinuities.len(),
    })
}

/// Ensemble variance of the fitted Larmor frequency over the bound, per SNR.
///
/// The field must be static and noise free; the bound is the large-N form
/// for the samples entering the fit. A noiseless control point, compared
/// with the bound at the highest SNR of the grid, is appended.
pub fn run_crlb_sweep(scenario: &Scenario, snr_grid_db: &[f64]) -> Result<CrlbReport> {
    if !scenario.field.harmonics.is_empty() || scenario.field.noise_asd_t_rthz != 0.0 {
        return Err(Error::Config("the bound sweep needs a static, noise-free field".into()));
    }
    if snr_grid_db.is_empty() {
        return Err(Error::Config("empty SNR grid".into()));
    }
    let fs = scenario.record.fs_hz;
    let n = scenario.sweep.fit_samples;
    let center = carrier(scenario)?;
    let bp = filter_of(scenario, center)?;
    let enbw = bp.equivalent_noise_bandwidth();
    let omega_true = physics::larmor_frequency(&scenario.species()?, scenario.field.b0_t, &scenario.dressing())?;

    let mut grid: Vec<Option<f64>> = snr_grid_db.iter().map(|&x| Some(x)).collect();
    grid.push(None);
    let jobs: Vec<(Option<f64>, usize)> =
        grid.iter().flat_map(|&s| (0..scenario.trials).map(move |i| (s, i))).collect();
    let trials: Vec<CrlbTrial> =
        jobs.par_iter().map(|&(s, i)| crlb_trial(scenario, s, i)).collect::<Result<_>>()?;

    let best = snr_grid_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let points: Vec<CrlbPoint> = grid
        .iter()
        .map(|&s| {
            let key = s.unwrap_or(f64::INFINITY);
            let omegas: Vec<f64> = trials.iter().filter(|t| t.snr_db == key).map(|t| t.omega_est).collect();
            let m = omegas.len() as f64;
            let mean = omegas.iter().sum::<f64>() / m;
            let variance = omegas.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            let crlb = crlb_frequency_variance(db_to_linear(s.unwrap_or(best)), n, fs, true)?;
            Ok(CrlbPoint { snr_db: s, trials: omegas.len(), mean_omega: mean, variance, crlb, ratio: variance / crlb })
        })
        .collect::<Result<_>>()?;

    Ok(CrlbReport {
        seed: scenario.seed,
        fs_hz: fs,
        fit_samples: n,
        enbw_hz: enbw,
        band_threshold_db: threshold_snr_db(enbw, fs),
        empirical_threshold_db: empirical_threshold(&points),
        omega_true,
        points,
        trials,
    })
}

/// Highest SNR at which the ratio, scanned downward, first exceeds 2,
/// interpolated linearly in dB against log ratio.
fn empirical_threshold(points: &[CrlbPoint]) -> Option<f64> {
    let mut pts: Vec<(f64, f64)> = points.iter().filter_map(|p| p.snr_db.map(|s| (s, p.ratio))).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    for w in pts.windows(2) {
        let ((s_hi, r_hi), (s_lo, r_lo)) = (w[0], w[1]);
        if r_hi <= 2.0 && r_lo > 2.0 {
            let (a, b) = (r_hi.ln(), r_lo.ln());
            return Some(s_hi + (2f64.ln() - a) / (b - a) * (s_lo - s_hi));
        }
    }
    None
}
