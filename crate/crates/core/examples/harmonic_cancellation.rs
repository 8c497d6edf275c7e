//! Calibrates line harmonics from one shot and cancels them on the next.

use fidtwin::experiments::{ffc_trial, Scenario};

fn main() -> fidtwin::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "scenarios/ffc_ideal.toml".into());
    let scenario = Scenario::load(path.as_ref())?;
    let t = ffc_trial(&scenario, 0)?;
    for c in &t.calibration.components {
        println!("calibrated {:>5.0} Hz: {:.3} nT rms, phase {:+.3} rad", c.component.frequency_hz, c.component.rms_t * 1e9, c.component.phase_rad);
    }
    println!("noise amplitude before {:.2} nT, after {:.3} nT", t.before_t * 1e9, t.after_t * 1e9);
    println!("suppression {:.1} dB", t.suppression_db);
    for h in &t.harmonics {
        println!("  {:>5.0} Hz: {:.1} dB", h.frequency_hz, h.suppression_db);
    }
    Ok(())
}
