//! Zero-phase IIR filtering, Welch spectra and the discrete analytic signal.
//!
//! Filters are Butterworth cascades of second-order sections obtained by the
//! bilinear transform with frequency prewarping. Zero-phase filtering runs the
//! cascade forward and backward over a mirror-reflected extension of the
//! input, with each section started from its steady state for the mean of the
//! leading pad.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Order of every Butterworth prototype used in the signal chain.
pub const BUTTERWORTH_ORDER: usize = 4;

/// One transposed direct-form II biquad, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn lowpass(cutoff_hz: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [
                (1.0 - cos) / 2.0 / a0,
                (1.0 - cos) / a0,
                (1.0 - cos) / 2.0 / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(cutoff_hz: f64, fs: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [
                (1.0 + cos) / 2.0 / a0,
                -(1.0 + cos) / a0,
                (1.0 + cos) / 2.0 / a0,
            ],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Complex response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// Quality factors of the biquads realising an even-order Butterworth filter.
fn butterworth_qs(order: usize) -> Vec<f64> {
    (0..order / 2)
        .map(|k| {
            let theta = PI * (2 * k + 1) as f64 / (2 * order) as f64;
            1.0 / (2.0 * theta.cos())
        })
        .collect()
}

/// A cascade of biquads sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    sample_rate_hz: f64,
}

impl SosFilter {
    pub fn butterworth_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Self {
        Self {
            sections: butterworth_qs(order)
                .into_iter()
                .map(|q| Biquad::lowpass(cutoff_hz, fs, q))
                .collect(),
            sample_rate_hz: fs,
        }
    }

    pub fn butterworth_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Self {
        Self {
            sections: butterworth_qs(order)
                .into_iter()
                .map(|q| Biquad::highpass(cutoff_hz, fs, q))
                .collect(),
            sample_rate_hz: fs,
        }
    }

    /// Band-pass from the analog Butterworth prototype by the low-pass to
    /// band-pass transformation, then the bilinear transform with both edges
    /// prewarped. `order` is the prototype order, so the cascade has `order`
    /// sections. Gain is normalised to 1 at the geometric band centre.
    pub fn butterworth_bandpass(order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Self {
        let high_hz = high_hz.min(0.98 * fs / 2.0);
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (w1, w2) = (warp(low_hz), warp(high_hz));
        let bw = w2 - w1;
        let w0_sq = w1 * w2;
        let two_fs = 2.0 * fs;

        let mut sections = Vec::with_capacity(order);
        // upper-half-plane prototype poles; conjugates give the other half
        for k in 0..order / 2 {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                let z = (two_fs + s) / (two_fs - s);
                sections.push(Biquad {
                    b: [1.0, 0.0, -1.0],
                    a: [-2.0 * z.re, z.norm_sqr()],
                });
            }
        }
        let mut filter = Self {
            sections,
            sample_rate_hz: fs,
        };
        let centre_hz = fs / PI * (w0_sq.sqrt() / two_fs).atan();
        let gain = filter.magnitude(centre_hz);
        for v in filter.sections[0].b.iter_mut() {
            *v /= gain;
        }
        filter
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Order of the cascade (two poles per section).
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Magnitude of a single forward pass at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.response(freq_hz, self.sample_rate_hz))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    /// Magnitude of the forward-backward (zero-phase) application.
    pub fn zero_phase_magnitude(&self, freq_hz: f64) -> f64 {
        self.magnitude(freq_hz).powi(2)
    }

    /// Filters `input` starting every section from the steady state it
    /// would reach under a constant input equal to `level`.
    fn run(&self, input: &[f64], level: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(input);
        let mut level = level;
        for section in &self.sections {
            let y_ss = section.dc_gain() * level;
            let mut z1 = y_ss - section.b[0] * level;
            let mut z2 = section.b[2] * level - section.a[1] * y_ss;
            for v in out.iter_mut() {
                let x = *v;
                let y = section.b[0] * x + z1;
                z1 = section.b[1] * x - section.a[0] * y + z2;
                z2 = section.b[2] * x - section.a[1] * y;
                *v = y;
            }
            level = y_ss;
        }
    }

    /// Mean of the leading `pad + 1` samples: the level each section is
    /// settled to before filtering, so the start does not inherit the value of
    /// a single (possibly oscillating) edge sample.
    fn start_level(v: &[f64], pad: usize) -> f64 {
        v[..=pad].iter().sum::<f64>() / (pad + 1) as f64
    }

    /// Forward-backward filtering with `pad` samples mirrored (edge sample
    /// excluded) at both ends; `pad` is clamped to `len - 1`.
    pub fn filtfilt(&self, series: &[f64], pad: usize) -> Result<Vec<f64>> {
        let min = 3 * self.order();
        if series.len() < min {
            return Err(Error::SeriesTooShort {
                len: series.len(),
                min,
            });
        }
        let n = series.len();
        let pad = pad.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| series[i]));
        ext.extend_from_slice(series);
        ext.extend((1..=pad).map(|i| series[n - 1 - i]));

        let mut forward = Vec::with_capacity(ext.len());
        self.run(&ext, Self::start_level(&ext, pad), &mut forward);
        forward.reverse();
        let mut backward = Vec::with_capacity(ext.len());
        self.run(&forward, Self::start_level(&forward, pad), &mut backward);
        backward.reverse();
        Ok(backward[pad..pad + n].to_vec())
    }
}

/// One-sided Welch power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
}

/// Welch estimate with a periodic Hann window, `segment` samples per block,
/// 50% overlap and per-segment linear detrending. Series shorter than one
/// segment are analysed as a single block.
pub fn welch(series: &[f64], fs: f64, segment: usize) -> Spectrum {
    let seg = segment.min(series.len()).max(2);
    let step = (seg / 2).max(1);
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut power = vec![0.0; bins];
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg];
    while start + seg <= series.len() {
        let block = detrend_linear(&series[start..start + seg]);
        for (slot, (x, w)) in buf.iter_mut().zip(block.iter().zip(&window)) {
            *slot = Complex64::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
        count += 1;
        start += step;
    }
    if count > 0 {
        for p in &mut power {
            *p /= count as f64;
        }
    }
    Spectrum {
        freqs_hz: (0..bins).map(|k| k as f64 * fs / seg as f64).collect(),
        power,
    }
}

fn detrend_linear(block: &[f64]) -> Vec<f64> {
    let n = block.len() as f64;
    let mean_t = (n - 1.0) / 2.0;
    let mean_x = block.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, x) in block.iter().enumerate() {
        let dt = i as f64 - mean_t;
        sxy += dt * (x - mean_x);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    block
        .iter()
        .enumerate()
        .map(|(i, x)| x - mean_x - slope * (i as f64 - mean_t))
        .collect()
}

/// Discrete analytic signal: the spectrum's positive frequencies are
/// doubled, negative frequencies zeroed, DC and Nyquist kept.
pub fn analytic_signal(series: &[f64]) -> Vec<Complex64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = series.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    for (k, c) in buf.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= gain;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Removes 2π jumps so consecutive samples differ by less than π.
pub fn unwrap_phase(wrapped: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &p in wrapped {
        if let Some(q) = prev {
            let mut d = p - q;
            while d > PI {
                offset -= 2.0 * PI;
                d -= 2.0 * PI;
            }
            while d < -PI {
                offset += 2.0 * PI;
                d += 2.0 * PI;
            }
        }
        out.push(p + offset);
        prev = Some(p);
    }
    out
}

/// Centered first difference divided by `dt`, one-sided at both ends.
pub fn derivative(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (series[1] - series[0]) / dt
                } else if i == n - 1 {
                    (series[n - 1] - series[n - 2]) / dt
                } else {
                    (series[i + 1] - series[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}
