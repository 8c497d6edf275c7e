//! Larmor frequency, quadratic shift and running gyromagnetic ratio over a
//! field range, then the Rabi frequency that nulls the quadratic shift.

use std::f64::consts::TAU;

use fidtwin::physics::{self, FreeParameter, MicrowaveDressing};
use fidtwin::species::AtomicSpecies;

fn main() -> fidtwin::Result<()> {
    let rb = AtomicSpecies::rb87();
    let bare = MicrowaveDressing::none();
    println!("{:>10} {:>14} {:>12} {:>14}", "B (uT)", "Larmor (Hz)", "q (Hz)", "gamma/2pi (Hz/T)");
    for b_ut in [1.0, 10.0, 50.0, 86.0121261, 200.0] {
        let b = b_ut * 1e-6;
        let w = physics::larmor_frequency(&rb, b, &bare)?;
        let q = physics::quadratic_shift(&rb, b, &bare)?;
        let g = physics::running_gamma(&rb, b, &bare)?;
        println!("{b_ut:>10.4} {:>14.3} {:>12.4} {:>14.6e}", w / TAU, q / TAU, g / TAU);
    }

    let b = 86.0121261e-6;
    let dressed = physics::null_quadratic(&rb, b, &MicrowaveDressing::approximate_lab(), FreeParameter::Rabi)?;
    let q = physics::quadratic_shift(&rb, b, &dressed)?;
    println!(
        "nulling at 86 uT: Rabi 2pi x {:.1} Hz, detuning 2pi x {:.1} kHz, residual {:.2e} Hz",
        dressed.rabi / TAU,
        dressed.detuning / TAU / 1e3,
        q / TAU
    );
    Ok(())
}
