//! Welch power spectral density, spectrogram, and Carson's-rule bandwidth.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldmodel::HarmonicComponent;

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub frequencies: Vec<f64>,
    /// unit^2 / Hz
    pub psd: Vec<f64>,
    /// Bin spacing (Hz).
    pub resolution_hz: f64,
    pub window: String,
    pub segments: usize,
}

impl SpectrumEstimate {
    /// Rectangle-rule power between `f_lo` and `f_hi` inclusive.
    pub fn band_power(&self, f_lo: f64, f_hi: f64) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .map(|(_, p)| p * self.resolution_hz)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution_hz
    }

    /// Mean PSD over bins in `[f_lo, f_hi]`.
    pub fn band_mean(&self, f_lo: f64, f_hi: f64) -> f64 {
        let (s, n) = self
            .frequencies
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,psd\n");
        for (f, p) in self.frequencies.iter().zip(&self.psd) {
            out.push_str(&format!("{f},{p:e}\n"));
        }
        out
    }
}

fn hann(n: usize) -> Vec<f64> {
    // periodic form, so 50 % and 75 % overlaps sum to a constant
    (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect()
}

/// Hann-windowed, 50 %-overlap Welch periodogram with bin spacing `resolution_hz`.
pub fn power_spectrum(samples: &[f64], fs: f64, resolution_hz: f64) -> Result<SpectrumEstimate> {
    if !(fs > 0.0) || samples.len() < 2 {
        return Err(Error::Domain("spectrum needs fs > 0 and at least two samples".into()));
    }
    let duration = samples.len() as f64 / fs;
    if !(resolution_hz > 0.0) || resolution_hz < 1.0 / duration * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "resolution {resolution_hz} Hz finer than 1/duration = {} Hz",
            1.0 / duration
        )));
    }
    let seg = ((fs / resolution_hz).round() as usize).clamp(2, samples.len());
    let hop = (seg / 2).max(1);
    let window = hann(seg);
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= samples.len() {
        let chunk = &samples[start..start + seg];
        let mean = chunk.iter().sum::<f64>() / seg as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let df = fs / seg as f64;
    let psd = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (seg.is_multiple_of(2) && k == seg / 2) { 1.0 } else { 2.0 };
            one_sided * a / (count as f64 * fs * w2)
        })
        .collect();
    Ok(SpectrumEstimate {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        psd,
        resolution_hz: df,
        window: format!("hann, {seg} samples, 50% overlap"),
        segments: count,
    })
}

/// Sequence of windowed periodograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Window centre times (s).
    pub times: Vec<f64>,
    pub frequencies: Vec<f64>,
    /// `power[i][k]`: one-sided PSD of window `i` at `frequencies[k]`.
    pub power: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// Frequency of the strongest bin in each window.
    pub fn ridge(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|row| {
                let k = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k)
                    .unwrap_or(0);
                self.frequencies.get(k).copied().unwrap_or(0.0)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,frequency_hz,psd\n");
        for (t, row) in self.times.iter().zip(&self.power) {
            for (f, p) in self.frequencies.iter().zip(row) {
                out.push_str(&format!("{t},{f},{p:e}\n"));
            }
        }
        out
    }
}

/// Hann-windowed short-time spectra. `band` restricts the stored bins.
pub fn spectrogram(
    samples: &[f64],
    fs: f64,
    window_len_s: f64,
    hop_s: f64,
    band: Option<(f64, f64)>,
) -> Result<Spectrogram> {
    let seg = (window_len_s * fs).round() as usize;
    let hop = (hop_s * fs).round() as usize;
    if seg < 64 {
        return Err(Error::Domain(format!("window of {seg} samples is shorter than 64")));
    }
    if hop == 0 || hop > seg {
        return Err(Error::Domain("hop must be positive and no longer than the window".into()));
    }
    if seg > samples.len() {
        return Err(Error::Domain("window longer than the record".into()));
    }
    let window = hann(seg);
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let df = fs / seg as f64;
    let (k_lo, k_hi) = match band {
        Some((lo, hi)) => (((lo / df).floor().max(0.0)) as usize, ((hi / df).ceil() as usize).min(seg / 2)),
        None => (0, seg / 2),
    };
    let starts: Vec<usize> = (0..=(samples.len() - seg) / hop).map(|i| i * hop).collect();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let power = starts
        .par_iter()
        .map(|&s| {
            let mut buf: Vec<Complex64> = samples[s..s + seg]
                .iter()
                .zip(&window)
                .map(|(x, w)| Complex64::new(x * w, 0.0))
                .collect();
            fft.process(&mut buf);
            buf[k_lo..=k_hi].iter().map(|z| 2.0 * z.norm_sqr() / (fs * w2)).collect()
        })
        .collect();
    Ok(Spectrogram {
        times: starts.iter().map(|&s| (s as f64 + seg as f64 / 2.0) / fs).collect(),
        frequencies: (k_lo..=k_hi).map(|k| k as f64 * df).collect(),
        power,
    })
}

/// Carson's rule `2 (sum of peak deviations + f_max)` for a Larmor carrier
/// modulated by field harmonics. `gamma` in rad s^-1 T^-1; `f_max_hz` is a
/// floor on the highest modulation frequency.
pub fn carson_bandwidth(harmonics: &[HarmonicComponent], gamma: f64, f_max_hz: f64) -> f64 {
    let deviation: f64 = harmonics.iter().map(|h| gamma.abs() * h.peak_t() / TAU).sum();
    let f_max = harmonics.iter().map(|h| h.frequency_hz).fold(f_max_hz, f64::max);
    2.0 * (deviation + f_max)
}
