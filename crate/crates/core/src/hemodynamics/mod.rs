//! From raw optical intensity to blood-volume change and heart rate.
//!
//! Per channel: `blood_volume = lowpass(log_transform(x))` and
//! `heart_rate = lowpass(60 * dφ/dt / 2π)` where φ is the unwrapped phase of
//! the analytic pulse wave, itself the log signal band-passed around its
//! spectral peak f_p.

mod trial;

use serde::{Deserialize, Serialize};

use crate::dsp::{self, SosFilter, BUTTERWORTH_ORDER};
use crate::error::{Error, Result};
use crate::Channel;

pub use trial::{load_bundle, load_trial_csv, parse_trial_csv, write_trial_csv, Trial};

pub const SAMPLE_RATE_HZ: f64 = 10.0;
pub const TRIAL_SECONDS: u32 = 36;
pub const TRIAL_SAMPLES: usize = 360;
/// First sample of the answering period (12 s).
pub const ANSWER_START: usize = 120;
/// First sample of the final rest period (24 s).
pub const ANSWER_END: usize = 240;

pub const LOWPASS_CUTOFF_HZ: f64 = 0.1;
pub const PULSE_SEARCH_MIN_HZ: f64 = 0.5;
pub const PULSE_HALF_BAND_HZ: f64 = 0.3;
/// Reflective padding applied before zero-phase filtering.
pub const EDGE_PAD_SECONDS: f64 = 3.0;
pub const WELCH_SEGMENT: usize = 128;
/// In-band spectral peak must exceed this multiple of the in-band median.
pub const NO_PULSE_RATIO: f64 = 3.0;
pub const MIN_ANALYTIC_LEN: usize = 32;

fn edge_pad() -> usize {
    (EDGE_PAD_SECONDS * SAMPLE_RATE_HZ).round() as usize
}

/// Blood-volume change and instantaneous heart rate for both probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HemoSeries {
    pub blood_volume: [Vec<f64>; 2],
    pub heart_rate: [Vec<f64>; 2],
    pub pulse_peak_hz: [f64; 2],
    pub sample_rate_hz: f64,
}

impl HemoSeries {
    pub fn blood_volume(&self, channel: Channel) -> &[f64] {
        &self.blood_volume[channel.index()]
    }

    pub fn heart_rate(&self, channel: Channel) -> &[f64] {
        &self.heart_rate[channel.index()]
    }

    pub fn len(&self) -> usize {
        self.blood_volume[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Instantaneous amplitude and continuous phase of a real series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSeries {
    pub instantaneous_amplitude: Vec<f64>,
    pub unwrapped_phase: Vec<f64>,
}

/// `-ln(x[i] / x[0])`, so that increased absorption reads as positive.
pub fn log_transform_series(intensity: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, v)) = intensity
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        return Err(Error::DataIntegrity(format!(
            "sample {i} has non-positive intensity {v}"
        )));
    }
    let Some(&first) = intensity.first() else {
        return Ok(Vec::new());
    };
    Ok(intensity.iter().map(|v| -(v / first).ln()).collect())
}

pub fn log_transform(trial: &Trial) -> Result<[Vec<f64>; 2]> {
    let left = log_transform_series(trial.channel(Channel::Left))
        .map_err(|e| e.on_channel(Channel::Left))?;
    let right = log_transform_series(trial.channel(Channel::Right))
        .map_err(|e| e.on_channel(Channel::Right))?;
    Ok([left, right])
}

/// Zero-phase 0.1 Hz low-pass.
pub fn lowpass_0p1(series: &[f64]) -> Result<Vec<f64>> {
    SosFilter::butterworth_lowpass(BUTTERWORTH_ORDER, LOWPASS_CUTOFF_HZ, SAMPLE_RATE_HZ)
        .filtfilt(series, edge_pad())
}

/// Peak of the Welch spectrum in (0.5 Hz, Nyquist].
///
/// Only local maxima count, so leakage from a strong component just below
/// 0.5 Hz is not mistaken for a pulse, and the winner must stand above
/// [`NO_PULSE_RATIO`] times the median in-band power. Ties go to the lower
/// frequency.
pub fn find_pulse_peak(series: &[f64]) -> Result<f64> {
    if series.len() < 2 * MIN_ANALYTIC_LEN {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: 2 * MIN_ANALYTIC_LEN,
        });
    }
    let spectrum = dsp::welch(series, SAMPLE_RATE_HZ, WELCH_SEGMENT);
    let in_band: Vec<usize> = (0..spectrum.freqs_hz.len())
        .filter(|&k| spectrum.freqs_hz[k] > PULSE_SEARCH_MIN_HZ)
        .collect();
    let p = &spectrum.power;
    let mut band_power: Vec<f64> = in_band.iter().map(|&k| p[k]).collect();
    band_power.sort_by(f64::total_cmp);
    let median = match band_power.len() {
        0 => return Err(Error::NoPulse),
        n if n % 2 == 1 => band_power[n / 2],
        n => 0.5 * (band_power[n / 2 - 1] + band_power[n / 2]),
    };
    let last = p.len() - 1;
    let mut best: Option<usize> = None;
    for &k in &in_band {
        let left_ok = p[k] > p[k - 1];
        let right_ok = k == last || p[k] >= p[k + 1];
        if left_ok && right_ok && best.is_none_or(|b| p[k] > p[b]) {
            best = Some(k);
        }
    }
    match best {
        Some(k) if p[k] > 0.0 && p[k] > NO_PULSE_RATIO * median => Ok(spectrum.freqs_hz[k]),
        _ => Err(Error::NoPulse),
    }
}

/// Zero-phase band-pass over `[f_p - 0.3, f_p + 0.3]` Hz.
pub fn bandpass_pulse(series: &[f64], f_p: f64) -> Result<Vec<f64>> {
    let low = f_p - PULSE_HALF_BAND_HZ;
    if !(low > 0.0) {
        return Err(Error::InvalidPulseBand(f_p));
    }
    SosFilter::butterworth_bandpass(
        BUTTERWORTH_ORDER,
        low,
        f_p + PULSE_HALF_BAND_HZ,
        SAMPLE_RATE_HZ,
    )
    .filtfilt(series, edge_pad())
}

pub fn analytic(series: &[f64]) -> Result<AnalyticSeries> {
    if series.len() < MIN_ANALYTIC_LEN {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: MIN_ANALYTIC_LEN,
        });
    }
    let z = dsp::analytic_signal(series);
    let wrapped: Vec<f64> = z.iter().map(|c| c.arg()).collect();
    Ok(AnalyticSeries {
        instantaneous_amplitude: z.iter().map(|c| c.norm()).collect(),
        unwrapped_phase: dsp::unwrap_phase(&wrapped),
    })
}

/// Instantaneous rate in beats/minute before smoothing.
pub fn instantaneous_rate(pulse_phase: &[f64]) -> Vec<f64> {
    dsp::derivative(pulse_phase, 1.0 / SAMPLE_RATE_HZ)
        .into_iter()
        .map(|w| w / (2.0 * std::f64::consts::PI) * 60.0)
        .collect()
}

/// Smoothed heart rate (beats/minute) from an unwrapped pulse phase.
pub fn heart_rate(pulse_phase: &[f64]) -> Result<Vec<f64>> {
    lowpass_0p1(&instantaneous_rate(pulse_phase))
}

fn derive_channel(log: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let blood_volume = lowpass_0p1(log)?;
    let f_p = find_pulse_peak(log)?;
    let pulse = bandpass_pulse(log, f_p)?;
    let hr = heart_rate(&analytic(&pulse)?.unwrapped_phase)?;
    Ok((blood_volume, hr, f_p))
}

/// Full per-channel pipeline.
pub fn derive(trial: &Trial) -> Result<HemoSeries> {
    let logs = log_transform(trial)?;
    let mut bv: [Vec<f64>; 2] = Default::default();
    let mut hr: [Vec<f64>; 2] = Default::default();
    let mut peaks = [0.0; 2];
    for channel in Channel::ALL {
        let i = channel.index();
        let (b, h, f) = derive_channel(&logs[i]).map_err(|e| e.on_channel(channel))?;
        bv[i] = b;
        hr[i] = h;
        peaks[i] = f;
    }
    Ok(HemoSeries {
        blood_volume: bv,
        heart_rate: hr,
        pulse_peak_hz: peaks,
        sample_rate_hz: SAMPLE_RATE_HZ,
    })
}
