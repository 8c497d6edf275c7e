//! Scenario-driven Monte Carlo experiments.
//!
//! Every trial draws all of its randomness from `trial_seed(base, index)`,
//! so any row of a report can be replayed alone and the ensemble does not
//! depend on how trials were scheduled.

mod crlb;
mod ffc;
mod fringe;
mod harmonics;
mod scenario;
mod single_shot;

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crlb::{band_threshold_db, crlb_trial, run_crlb_sweep, CrlbPoint, CrlbReport, CrlbTrial};
pub use ffc::{ffc_trial, field_spectrum_from_phase, run_ffc_cycle, FfcTrial, FfcReport, HarmonicSuppression};
pub use fringe::{fringe_trial, run_fringe_hop_mc, scenario_critical_time, FringePoint, FringeReport};
pub use harmonics::{harmonic_trial, run_harmonic_recovery, HarmonicStats, HarmonicRecoveryReport, HarmonicTrial};
pub use scenario::{
    CompensationConfig, DressingConfig, EstimatorConfig, ExperimentKind, FieldConfig, FilterConfig,
    HarmonicConfig, RecordSettings, Scenario, SweepConfig,
};
pub use single_shot::{run_single_shot, ShotOutcome, run_single_shot_pipeline, KneeDiagnostic, ShotTrial, SingleShotReport};

use crate::error::Result;
use crate::fieldmodel::{sample_field_trace, FieldModel, FieldTrace};
use crate::rng::{stream, trial_seed, Purpose};
use crate::signalsim::{integrate_larmor_phase, synthesize_polarimeter_record, PhaseSeries, PolarimeterRecord, RecordConfig};
use crate::species::AtomicSpecies;

/// Mean, sample variance and quantiles of one column of trial results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { n, mean: f64::NAN, variance: f64::NAN, q05: f64::NAN, median: f64::NAN, q95: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| sorted[((p * (n - 1) as f64).round() as usize).min(n - 1)];
        Summary { n, mean, variance, q05: q(0.05), median: q(0.5), q95: q(0.95) }
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// One simulated shot: the field, the phase it imprints, and the record.
#[derive(Debug, Clone)]
pub struct Shot {
    pub seed: u64,
    pub field: FieldTrace,
    pub truth: PhaseSeries,
    pub record: PolarimeterRecord,
}

/// Simulates a shot of `duration_s` for `trial`, adding `extra` (for example a
/// compensation field) to the sampled environment.
pub fn simulate_shot(
    scenario: &Scenario,
    species: &AtomicSpecies,
    seed: u64,
    duration_s: f64,
    extra: Option<&FieldTrace>,
) -> Result<Shot> {
    let r = &scenario.record;
    let model: FieldModel = scenario.field.model(seed);
    let mut field = sample_field_trace(&model, r.fs_hz, duration_s)?;
    if let Some(e) = extra {
        field = field.superpose(e)?;
    }
    let truth = integrate_larmor_phase(&field, species, &scenario.dressing())?;
    let phi_0 = stream(seed, 0, Purpose::ReferencePhase).random::<f64>() * TAU;
    let cfg = RecordConfig {
        sigma_v: r.sigma_v(),
        phi_0_rad: phi_0,
        bit_depth: r.bit_depth(),
        full_scale_v: r.full_scale(),
        detector_only_s: r.detector_only_s,
        probe_on_s: r.probe_on_s,
        detector_noise_fraction: r.detector_noise_fraction,
        seed,
    };
    let record = synthesize_polarimeter_record(&truth, &r.decay(), &cfg)?;
    Ok(Shot { seed, field, truth, record })
}

/// Seed of trial `index` under the scenario's base seed.
pub fn seed_of(scenario: &Scenario, index: usize) -> u64 {
    trial_seed(scenario.seed, index as u64)
}

/// Wilson score interval for a binomial proportion at `z` standard errors.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Any experiment's report, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentReport {
    SingleShot(SingleShotReport),
    CrlbSweep(CrlbReport),
    FringeHop(FringeReport),
    Ffc(FfcReport),
    Harmonics(HarmonicRecoveryReport),
}

impl ExperimentReport {
    /// One row per trial (or per grid point where trials are not kept).
    pub fn to_csv(&self) -> String {
        match self {
            ExperimentReport::SingleShot(r) => r.to_csv(),
            ExperimentReport::CrlbSweep(r) => r.to_csv(),
            ExperimentReport::FringeHop(r) => r.to_csv(),
            ExperimentReport::Ffc(r) => r.to_csv(),
            ExperimentReport::Harmonics(r) => r.to_csv(),
        }
    }
}

/// Runs the experiment the scenario names.
pub fn run(scenario: &Scenario) -> Result<ExperimentReport> {
    scenario.validate()?;
    Ok(match scenario.kind {
        ExperimentKind::SingleShot => ExperimentReport::SingleShot(run_single_shot_pipeline(scenario)?),
        ExperimentKind::CrlbSweep => ExperimentReport::CrlbSweep(run_crlb_sweep(scenario, &scenario.sweep.snr_grid_db)?),
        ExperimentKind::FringeHop => ExperimentReport::FringeHop(run_fringe_hop_mc(scenario, &scenario.sweep.tau_grid_s)?),
        ExperimentKind::Ffc => ExperimentReport::Ffc(run_ffc_cycle(scenario)?),
        ExperimentKind::Harmonics => ExperimentReport::Harmonics(run_harmonic_recovery(scenario)?),
    })
}
