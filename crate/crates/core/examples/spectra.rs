//! Spectrogram of a record whose field carries a 50 Hz line: the carrier
//! ridge wobbles at the line frequency.

use fidtwin::dsp::spectrogram;
use fidtwin::fieldmodel::{sample_field_trace, FieldModel, HarmonicComponent};
use fidtwin::physics::MicrowaveDressing;
use fidtwin::signalsim::{integrate_larmor_phase, synthesize_polarimeter_record, DecayModel, RecordConfig};
use fidtwin::species::AtomicSpecies;

fn main() -> fidtwin::Result<()> {
    let fs = 5e5;
    let model = FieldModel {
        harmonics: vec![HarmonicComponent::new(50.0, 40e-9, 0.0)],
        ..FieldModel::static_field(8.6e-6)
    };
    let field = sample_field_trace(&model, fs, 0.1)?;
    let phase = integrate_larmor_phase(&field, &AtomicSpecies::rb87(), &MicrowaveDressing::none())?;
    let record = synthesize_polarimeter_record(&phase, &DecayModel::default(), &RecordConfig::default())?;
    let sg = spectrogram(record.fid(), fs, 2e-3, 1e-3, Some((55e3, 66e3)))?;
    let ridge = sg.ridge();
    let (lo, hi) = ridge.iter().fold((f64::MAX, f64::MIN), |(a, b), &f| (a.min(f), b.max(f)));
    println!("{} frames, ridge {:.0} to {:.0} Hz", ridge.len(), lo, hi);
    for (t, f) in sg.times.iter().zip(&ridge).step_by(10) {
        println!("t = {:>5.1} ms  f = {:.0} Hz", t * 1e3, f);
    }
    Ok(())
}
