//! Analytic signal by frequency-domain one-siding, and phase unwrapping.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::signalsim::PhaseSeries;

/// `V + i H[V]` on the sample grid of the source record.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRecord {
    pub samples: Vec<Complex64>,
    pub fs: f64,
    /// Time of the first sample (s).
    pub t0: f64,
}

impl AnalyticRecord {
    pub fn envelope(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }

    pub fn wrapped_phase(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.arg()).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Forward FFT, zero negative frequencies, double positive ones, keep dc and
/// Nyquist, inverse FFT. The real part is then replaced by the input so the
/// round trip is exact rather than exact-to-rounding.
pub fn analytic_signal(samples: &[f64], fs: f64, t0: f64) -> AnalyticRecord {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if n >= 2 {
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        let half = n / 2;
        let last_positive = if n.is_multiple_of(2) { half - 1 } else { half };
        for z in &mut buf[1..=last_positive] {
            *z *= 2.0;
        }
        for z in &mut buf[last_positive + 1 + usize::from(n.is_multiple_of(2))..] {
            *z = Complex64::new(0.0, 0.0);
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        for (z, &v) in buf.iter_mut().zip(samples) {
            *z = Complex64::new(v, z.im * scale);
        }
    }
    AnalyticRecord { samples: buf, fs, t0 }
}

/// Cumulative unwrap. Sample-to-sample jumps are folded into (-pi, pi]; an
/// increment differing from the median increment by more than pi/2 is recorded
/// as a discontinuity but left uncorrected.
pub fn unwrap_phase(analytic: &AnalyticRecord) -> PhaseSeries {
    let wrapped = analytic.wrapped_phase();
    let (values, discontinuities) = unwrap_values(&wrapped);
    PhaseSeries {
        values,
        fs: analytic.fs,
        t0: analytic.t0,
        weights: None,
        discontinuities,
        enbw_hz: None,
    }
}

pub(crate) fn unwrap_values(wrapped: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut increments = Vec::with_capacity(wrapped.len().saturating_sub(1));
    let Some(&first) = wrapped.first() else {
        return (out, Vec::new());
    };
    out.push(first);
    let mut acc = first;
    for w in wrapped.windows(2) {
        let mut d = w[1] - w[0];
        if d > PI || d <= -PI {
            d -= TAU * ((d + PI) / TAU).floor();
            if d <= -PI {
                d += TAU;
            }
        }
        acc += d;
        out.push(acc);
        increments.push(d);
    }
    let discontinuities = if increments.is_empty() {
        Vec::new()
    } else {
        let typical = median(&increments);
        increments
            .iter()
            .enumerate()
            .filter(|(_, d)| (*d - typical).abs() > PI / 2.0)
            .map(|(i, _)| i + 1)
            .collect()
    };
    (out, discontinuities)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}
