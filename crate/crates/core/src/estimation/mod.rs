//! Estimators and sensitivity calculus: dc regression, harmonic fits,
//! fringe-hop statistics, passband and phase-noise budgets, and bounds.

pub mod formulas;
pub mod harmonics;
mod linalg;
pub mod regression;
pub mod sensitivity;

pub use formulas::{
    ac_sensitivity, corner_frequency, db_to_linear, linear_to_db, critical_time, crlb_frequency_variance, dc_sensitivity_from_residuals,
    dc_sensitivity_from_snr, passband_budget, phase_noise_psd_model, ramsey_phase_spread, ramsey_project,
    rms_noise_amplitude, threshold_snr_db, PassbandBudget, RamseyReadout,
};
pub use harmonics::{fit_harmonics, FittedHarmonic, HarmonicFit};
pub use regression::{fit_dc_phase, DcEstimate};
pub use sensitivity::{budget_from_residuals, fit_field_coefficient, fit_phase_noise_spectrum, SensitivityBudget};
