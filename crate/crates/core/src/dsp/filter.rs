//! Butterworth bandpass design (bilinear, pre-warped) and zero-phase application.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandpass specification. With `zero_phase` the prototype runs forward then
/// backward, so the applied magnitude response is the prototype's squared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub prototype_order: usize,
    pub low_edge_hz: f64,
    pub high_edge_hz: f64,
    pub zero_phase: bool,
}

impl FilterSpec {
    pub fn new(low_edge_hz: f64, high_edge_hz: f64) -> Self {
        Self { prototype_order: 6, low_edge_hz, high_edge_hz, zero_phase: true }
    }

    /// Band of total width `width_hz` centred on `center_hz`.
    pub fn centered(center_hz: f64, width_hz: f64) -> Self {
        Self::new(center_hz - width_hz / 2.0, center_hz + width_hz / 2.0)
    }

    pub fn width_hz(&self) -> f64 {
        self.high_edge_hz - self.low_edge_hz
    }

    pub fn center_hz(&self) -> f64 {
        0.5 * (self.low_edge_hz + self.high_edge_hz)
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.prototype_order == 0 || self.prototype_order > 20 {
            return Err(Error::FilterDesign(format!(
                "prototype order {} outside 1..=20",
                self.prototype_order
            )));
        }
        if !(self.low_edge_hz > 0.0 && self.low_edge_hz < self.high_edge_hz && self.high_edge_hz < fs / 2.0) {
            return Err(Error::Domain(format!(
                "band edges must satisfy 0 < {} < {} < fs/2 = {}",
                self.low_edge_hz,
                self.high_edge_hz,
                fs / 2.0
            )));
        }
        Ok(())
    }

    /// Equivalent noise bandwidth (Hz) of the applied response.
    pub fn equivalent_noise_bandwidth(&self, fs: f64) -> Result<f64> {
        Ok(Bandpass::design(self, fs)?.equivalent_noise_bandwidth())
    }
}

/// Second-order section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }

    fn run(&self, x: &mut [f64]) {
        // transposed direct form II
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b[0] * *v + s1;
            s1 = self.b[1] * *v - self.a[0] * y + s2;
            s2 = self.b[2] * *v - self.a[1] * y;
            *v = y;
        }
    }

    fn pole_radius(&self) -> f64 {
        // product of the two roots of z^2 + a1 z + a2 is a2; complex pair share a radius
        let disc = self.a[0] * self.a[0] - 4.0 * self.a[1];
        if disc < 0.0 {
            self.a[1].sqrt()
        } else {
            let r = disc.sqrt();
            ((-self.a[0] + r) / 2.0).abs().max(((-self.a[0] - r) / 2.0).abs())
        }
    }
}

/// Discretised Butterworth bandpass as a cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    pub spec: FilterSpec,
    pub fs: f64,
    pub sections: Vec<Biquad>,
}

impl Bandpass {
    pub fn design(spec: &FilterSpec, fs: f64) -> Result<Self> {
        spec.validate(fs)?;
        let n = spec.prototype_order;
        let k = 2.0 * fs;
        let w1 = k * (PI * spec.low_edge_hz / fs).tan();
        let w2 = k * (PI * spec.high_edge_hz / fs).tan();
        let bw = w2 - w1;
        let w0sq = w1 * w2;

        let mut analog_poles = Vec::new();
        for i in 0..n {
            let theta = PI * (2 * i + n + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            if p.im < -1e-12 {
                continue; // its conjugate already produced this pair
            }
            // s^2 - p B s + w0^2 = 0
            let disc = (p * p * bw * bw - 4.0 * w0sq).sqrt();
            let s_a = (p * bw + disc) / 2.0;
            let s_b = (p * bw - disc) / 2.0;
            if p.im.abs() <= 1e-12 {
                // real prototype pole: s_a and s_b are already a conjugate pair
                analog_poles.push(if s_a.im >= 0.0 { s_a } else { s_b });
            } else {
                analog_poles.push(s_a);
                analog_poles.push(s_b);
            }
        }

        let center = 2.0 * (w0sq.sqrt() / k).atan(); // rad/sample
        let z_inv_c = Complex64::from_polar(1.0, -center);
        let mut sections = Vec::with_capacity(n);
        for s in analog_poles {
            let z = (k + s) / (k - s);
            let a1 = -2.0 * z.re;
            let a2 = z.norm_sqr();
            let mut sec = Biquad { b: [1.0, 0.0, -1.0], a: [a1, a2] };
            let g = sec.response(z_inv_c).norm();
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::FilterDesign("degenerate section gain".into()));
            }
            for b in &mut sec.b {
                *b /= g;
            }
            if !(sec.pole_radius() < 1.0) {
                return Err(Error::FilterDesign(format!(
                    "discretised pole outside unit circle (radius {})",
                    sec.pole_radius()
                )));
            }
            sections.push(sec);
        }
        Ok(Self { spec: *spec, fs, sections })
    }

    /// Complex response of one pass at frequency `f` (Hz).
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / self.fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Power gain of the applied filter (squared twice when zero-phase).
    pub fn power_gain(&self, f: f64) -> f64 {
        let g = self.response(f).norm_sqr();
        if self.spec.zero_phase {
            g * g
        } else {
            g
        }
    }

    pub fn equivalent_noise_bandwidth(&self) -> f64 {
        let bw = self.spec.width_hz();
        let lo = (self.spec.low_edge_hz - 6.0 * bw).max(0.0);
        let hi = (self.spec.high_edge_hz + 6.0 * bw).min(self.fs / 2.0);
        let steps = 20_000;
        let df = (hi - lo) / steps as f64;
        let integral: f64 = (0..=steps)
            .map(|i| {
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                w * self.power_gain(lo + i as f64 * df)
            })
            .sum::<f64>()
            * df;
        integral / self.power_gain(self.spec.center_hz()).max(peak_gain(self))
    }

    /// Samples for the slowest pole to decay by 10^-6.
    pub fn effective_length(&self) -> usize {
        let r = self.sections.iter().map(Biquad::pole_radius).fold(0.0, f64::max);
        (6.0 * std::f64::consts::LN_10 / -r.ln()).ceil() as usize
    }

    pub fn apply_causal(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let len_eff = self.effective_length();
        if x.len() <= 10 * len_eff {
            return Err(Error::Edge(format!(
                "{} samples but the filter needs more than {} (10x its impulse length)",
                x.len(),
                10 * len_eff
            )));
        }
        if !self.spec.zero_phase {
            let mut y = x.to_vec();
            self.apply_causal(&mut y);
            return Ok(y);
        }
        let pad = (3 * len_eff).min(x.len() - 1);
        let n = x.len();
        let mut buf = Vec::with_capacity(n + 2 * pad);
        buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        buf.extend_from_slice(x);
        buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        self.apply_causal(&mut buf);
        buf.reverse();
        self.apply_causal(&mut buf);
        buf.reverse();
        Ok(buf[pad..pad + n].to_vec())
    }
}

fn peak_gain(bp: &Bandpass) -> f64 {
    let lo = bp.spec.low_edge_hz;
    let bw = bp.spec.width_hz();
    (0..=200)
        .map(|i| bp.power_gain(lo + bw * i as f64 / 200.0))
        .fold(0.0, f64::max)
}

/// Zero-phase Butterworth bandpass of `samples` at rate `fs`.
pub fn bandpass_zero_phase(samples: &[f64], fs: f64, spec: &FilterSpec) -> Result<Vec<f64>> {
    Bandpass::design(spec, fs)?.apply(samples)
}
