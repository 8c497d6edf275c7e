//! Recovery of injected line harmonics from simulated shots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_of, simulate_shot, Scenario, Summary};
use crate::error::{Error, Result};
use crate::estimation::{fit_harmonics, FittedHarmonic};
use crate::reconstruct::reconstruct;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTrial {
    pub trial: usize,
    pub seed: u64,
    pub fitted: Vec<FittedHarmonic>,
}

/// Per-harmonic ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicStats {
    pub frequency_hz: f64,
    pub injected_rms_t: f64,
    pub fitted_rms_t: Summary,
    /// Mean of the per-trial reported uncertainties (T).
    pub mean_uncertainty_t: f64,
    /// Largest |fitted - injected| / uncertainty over the ensemble.
    pub max_abs_z: f64,
    /// Trials within three reported uncertainties.
    pub within_three_sigma: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicRecoveryReport {
    pub seed: u64,
    pub fs_hz: f64,
    pub duration_s: f64,
    pub band_hz: f64,
    pub harmonics: Vec<HarmonicStats>,
    pub trials: Vec<HarmonicTrial>,
}

impl HarmonicRecoveryReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,seed,frequency_hz,rms_t,rms_uncertainty_t,phase_rad,phase_uncertainty_rad\n");
        for t in &self.trials {
            for f in &t.fitted {
                s += &format!(
                    "{},{},{},{},{},{},{}\n",
                    t.trial,
                    t.seed,
                    f.component.frequency_hz,
                    f.component.rms_t,
                    f.rms_uncertainty_t,
                    f.component.phase_rad,
                    f.phase_uncertainty_rad
                );
            }
        }
        s
    }
}

/// Simulates, reconstructs with the scenario's band and fits harmonics.
pub fn harmonic_trial(scenario: &Scenario, index: usize) -> Result<HarmonicTrial> {
    let species = scenario.species()?;
    let seed = seed_of(scenario, index);
    let shot = simulate_shot(scenario, &species, seed, scenario.record.duration_s, None)?;
    let rec = reconstruct(&shot.record, &scenario.reconstruction(scenario.filter.band_hz, None))?;
    let fit = fit_harmonics(
        &rec.phase,
        scenario.field.line_frequency_hz,
        scenario.compensation.n_harmonics,
        &species,
        &scenario.dressing(),
    )?;
    Ok(HarmonicTrial { trial: index, seed, fitted: fit.components })
}

pub fn run_harmonic_recovery(scenario: &Scenario) -> Result<HarmonicRecoveryReport> {
    if scenario.field.harmonics.is_empty() {
        return Err(Error::Config("harmonic recovery needs injected harmonics".into()));
    }
    let trials: Vec<HarmonicTrial> =
        (0..scenario.trials).into_par_iter().map(|i| harmonic_trial(scenario, i)).collect::<Result<_>>()?;
    let n_fit = scenario.compensation.n_harmonics;
    let harmonics = (0..n_fit)
        .map(|j| {
            let f = trials[0].fitted[j].component.frequency_hz;
            let injected = scenario
                .field
                .harmonics
                .iter()
                .find(|h| (h.frequency_hz - f).abs() < 1e-6 * f)
                .map_or(0.0, |h| h.rms_t);
            let amps: Vec<f64> = trials.iter().map(|t| t.fitted[j].component.rms_t).collect();
            let zs: Vec<f64> = trials
                .iter()
                .map(|t| (t.fitted[j].component.rms_t - injected) / t.fitted[j].rms_uncertainty_t)
                .collect();
            HarmonicStats {
                frequency_hz: f,
                injected_rms_t: injected,
                fitted_rms_t: Summary::of(&amps),
                mean_uncertainty_t: trials.iter().map(|t| t.fitted[j].rms_uncertainty_t).sum::<f64>()
                    / trials.len() as f64,
                max_abs_z: zs.iter().fold(0.0, |m, z| m.max(z.abs())),
                within_three_sigma: zs.iter().filter(|z| z.abs() <= 3.0).count(),
            }
        })
        .collect();
    Ok(HarmonicRecoveryReport {
        seed: scenario.seed,
        fs_hz: scenario.record.fs_hz,
        duration_s: scenario.record.duration_s,
        band_hz: scenario.filter.band_hz,
        harmonics,
        trials,
    })
}
