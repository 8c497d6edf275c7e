//! Ramsey fringe-hop statistics under white field noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{seed_of, wilson_interval, Scenario};
use crate::error::{Error, Result};
use crate::estimation::{critical_time, ramsey_phase_spread, ramsey_project};
use crate::fieldmodel::sample_field_trace;
use crate::physics;
use crate::signalsim::integrate_larmor_phase;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub tau_s: f64,
    pub tau_over_critical: f64,
    pub trials: usize,
    pub hops: usize,
    pub hop_fraction: f64,
    /// 95 % Wilson interval.
    pub hop_ci: (f64, f64),
    /// Two-sided Gaussian tail beyond pi/2.
    pub predicted_hop_fraction: f64,
    pub mean_phi_rad: f64,
    pub sigma_phi_rad: f64,
    pub predicted_sigma_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeReport {
    pub seed: u64,
    pub fs_hz: f64,
    /// Critical time at two standard deviations (s).
    pub critical_time_s: f64,
    pub points: Vec<FringePoint>,
}

impl FringeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "tau_s,tau_over_critical,trials,hops,hop_fraction,hop_ci_lo,hop_ci_hi,predicted_hop_fraction,mean_phi_rad,sigma_phi_rad,predicted_sigma_rad\n",
        );
        for p in &self.points {
            s += &format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                p.tau_s,
                p.tau_over_critical,
                p.trials,
                p.hops,
                p.hop_fraction,
                p.hop_ci.0,
                p.hop_ci.1,
                p.predicted_hop_fraction,
                p.mean_phi_rad,
                p.sigma_phi_rad,
                p.predicted_sigma_rad
            );
        }
        s
    }
}

fn gamma_at_b0(scenario: &Scenario) -> Result<f64> {
    let species = scenario.species()?;
    physics::running_gamma(&species, scenario.field.b0_t, &scenario.dressing())
}

/// Critical time at two standard deviations for the scenario's field noise.
pub fn scenario_critical_time(scenario: &Scenario) -> Result<f64> {
    let s_bb = scenario.field.noise_asd_t_rthz.powi(2);
    critical_time(2.0, s_bb, gamma_at_b0(scenario)?)
}

/// Accumulated phase minus the nominal `omega(B0) tau` at each grid time,
/// for one trial.
pub fn fringe_trial(scenario: &Scenario, index: usize, taus: &[f64]) -> Result<Vec<f64>> {
    let species = scenario.species()?;
    let dressing = scenario.dressing();
    let fs = scenario.sweep.ramsey_fs_hz;
    let t_max = taus.iter().cloned().fold(0.0, f64::max);
    let mut model = scenario.field.model(seed_of(scenario, index));
    model.harmonics.clear();
    let trace = sample_field_trace(&model, fs, t_max + 1.0 / fs)?;
    let phase = integrate_larmor_phase(&trace, &species, &dressing)?;
    let omega0 = physics::larmor_frequency(&species, model.b0_t, &dressing)?;
    Ok(taus
        .iter()
        .map(|&tau| {
            let k = (tau * fs).round() as usize;
            phase.values[k] - omega0 * k as f64 / fs
        })
        .collect())
}

/// Hop fraction and phase spread versus Ramsey time. An empty grid selects
/// (0.1, 0.25, 0.5, 1, 2) critical times.
pub fn run_fringe_hop_mc(scenario: &Scenario, tau_grid_s: &[f64]) -> Result<FringeReport> {
    let s_bb = scenario.field.noise_asd_t_rthz.powi(2);
    if !(s_bb > 0.0) {
        return Err(Error::Config("fringe-hop runs need field.noise_asd_t_rthz > 0".into()));
    }
    let gamma = gamma_at_b0(scenario)?;
    let t_c = critical_time(2.0, s_bb, gamma)?;
    let taus: Vec<f64> = if tau_grid_s.is_empty() {
        [0.1, 0.25, 0.5, 1.0, 2.0].iter().map(|x| x * t_c).collect()
    } else {
        tau_grid_s.to_vec()
    };
    let fs = scenario.sweep.ramsey_fs_hz;
    if taus.iter().any(|&t| !(t * fs >= 1.0)) {
        return Err(Error::Config("every Ramsey time must span at least one sample".into()));
    }
    let rows: Vec<Vec<f64>> = (0..scenario.trials)
        .into_par_iter()
        .map(|i| fringe_trial(scenario, i, &taus))
        .collect::<Result<_>>()?;

    let unit = Normal::standard();
    let points = taus
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let phis: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let n = phis.len();
            let hops = phis.iter().filter(|&&p| ramsey_project(p).hop).count();
            let mean = phis.iter().sum::<f64>() / n as f64;
            let var = phis.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
            let sigma_pred = ramsey_phase_spread(s_bb, tau, gamma);
            FringePoint {
                tau_s: tau,
                tau_over_critical: tau / t_c,
                trials: n,
                hops,
                hop_fraction: hops as f64 / n as f64,
                hop_ci: wilson_interval(hops, n, 1.96),
                predicted_hop_fraction: 2.0 * unit.cdf(-std::f64::consts::FRAC_PI_2 / sigma_pred),
                mean_phi_rad: mean,
                sigma_phi_rad: var.sqrt(),
                predicted_sigma_rad: sigma_pred,
            }
        })
        .collect();
    Ok(FringeReport { seed: scenario.seed, fs_hz: fs, critical_time_s: t_c, points })
}
