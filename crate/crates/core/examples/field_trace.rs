//! Samples the laboratory field model and checks its spectrum: line
//! harmonics on top of the white floor.

use fidtwin::dsp::power_spectrum;
use fidtwin::fieldmodel::{quadrature_noise_amplitude, sample_field_trace, FieldModel};

fn main() -> fidtwin::Result<()> {
    let model = FieldModel { seed: 3, ..FieldModel::laboratory() };
    let fs = 2e4;
    let trace = sample_field_trace(&model, fs, 5.0)?;
    println!("{} samples, mean {:.6} uT", trace.len(), trace.mean() * 1e6);

    let deviation: Vec<f64> = trace.samples.iter().map(|b| b - model.b0_t).collect();
    let psd = power_spectrum(&deviation, fs, 1.0)?;
    for h in &model.harmonics {
        let line = psd.band_power(h.frequency_hz - 3.0, h.frequency_hz + 3.0).sqrt();
        println!("{:>5.0} Hz line: {:.2} nT rms (injected {:.2})", h.frequency_hz, line * 1e9, h.rms_t * 1e9);
    }
    let floor = psd.band_mean(1000.0, 5000.0).sqrt();
    println!("white floor {:.0} pT/rtHz (model {:.0})", floor * 1e12, model.noise_asd_t_rthz * 1e12);
    println!("quadrature noise below 300 Hz: {:.2} nT", quadrature_noise_amplitude(&model, 300.0) * 1e9);
    Ok(())
}
