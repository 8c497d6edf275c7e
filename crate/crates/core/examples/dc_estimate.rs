//! One shot of the dc pipeline at the laboratory preset: weighted phase fit,
//! sensitivity budget and comparison with the noiseless truth.

use fidtwin::experiments::{run_single_shot, Scenario};

fn main() -> fidtwin::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "scenarios/single_shot.toml".into());
    let scenario = Scenario::load(path.as_ref())?;
    let out = run_single_shot(&scenario, 0)?;
    let e = &out.estimate;
    println!("B_est  {:.9} uT", e.b_est * 1e6);
    println!("B_true {:.9} uT", out.row.b_true * 1e6);
    println!("dB_dc {:.0} fT, detector-limited {:.0} fT", e.delta_b_dc * 1e15, e.delta_b_detector.unwrap_or(f64::NAN) * 1e15);
    println!("z = {:.2}, weighted mean SNR {:.1} dB", out.row.z, out.row.weighted_mean_snr_db);
    if let Some(b) = &e.budget {
        println!(
            "budget: shot {:.3e} rad^2, field {:.3e} rad^2, corner {:.0} Hz",
            b.delta_phi_shot_sq, b.delta_phi_field_sq, b.corner_frequency_hz
        );
    }
    Ok(())
}
