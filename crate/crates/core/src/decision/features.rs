use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::hemodynamics::{self, HemoSeries, SAMPLE_RATE_HZ, TRIAL_SECONDS};
use crate::{Channel, Error, Result};

/// Earliest window start: the end of the first resting period.
pub const WINDOW_START_MIN_S: u32 = 12;
pub const WINDOW_MIN_WIDTH_S: u32 = 15;
/// Blood volume trails heart rate by this much, so its window moves later.
pub const BV_LAG_S: u32 = 3;

/// Integer-second analysis window `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowSpec {
    pub start_s: u32,
    pub end_s: u32,
}

impl WindowSpec {
    pub fn new(start_s: u32, end_s: u32) -> Result<Self> {
        let reason = if start_s < WINDOW_START_MIN_S {
            Some("starts before 12 s")
        } else if end_s > TRIAL_SECONDS {
            Some("ends after 36 s")
        } else if end_s < start_s + WINDOW_MIN_WIDTH_S {
            Some("narrower than 15 s")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidWindow {
                start_s,
                end_s,
                reason,
            }),
            None => Ok(WindowSpec { start_s, end_s }),
        }
    }

    /// Every valid window of a 36 s trial, ordered by start then end.
    pub fn all() -> Vec<WindowSpec> {
        let mut out = Vec::new();
        for start in WINDOW_START_MIN_S..=TRIAL_SECONDS - WINDOW_MIN_WIDTH_S {
            for end in start + WINDOW_MIN_WIDTH_S..=TRIAL_SECONDS {
                out.push(WindowSpec {
                    start_s: start,
                    end_s: end,
                });
            }
        }
        out
    }

    pub fn width_s(&self) -> u32 {
        self.end_s - self.start_s
    }

    /// Sample index range at `fs`.
    pub fn samples(&self, fs: f64) -> Range<usize> {
        (self.start_s as f64 * fs).round() as usize..(self.end_s as f64 * fs).round() as usize
    }

    /// The window read from the blood-volume series: shifted later by the
    /// lag and clipped to the trial.
    pub fn blood_volume_window(&self) -> Result<WindowSpec> {
        let start_s = (self.start_s + BV_LAG_S).min(TRIAL_SECONDS);
        let end_s = (self.end_s + BV_LAG_S).min(TRIAL_SECONDS);
        if end_s < start_s + WINDOW_MIN_WIDTH_S {
            return Err(Error::BvWindowInfeasible { start_s, end_s });
        }
        Ok(WindowSpec { start_s, end_s })
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{} s", self.start_s, self.end_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    HeartRate,
    BloodVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    OscillationNumber,
    MaxAmplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSetId {
    /// Oscillation numbers of heart rate and blood volume.
    Set1,
    /// Oscillation number and maximum amplitude of blood volume.
    Set2,
    /// Oscillation number and maximum amplitude of heart rate.
    Set3,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 3] = [FeatureSetId::Set1, FeatureSetId::Set2, FeatureSetId::Set3];

    pub fn id(self) -> u8 {
        match self {
            FeatureSetId::Set1 => 1,
            FeatureSetId::Set2 => 2,
            FeatureSetId::Set3 => 3,
        }
    }

    pub fn components(self) -> [(Source, Statistic); 2] {
        use Source::*;
        use Statistic::*;
        match self {
            FeatureSetId::Set1 => [(HeartRate, OscillationNumber), (BloodVolume, OscillationNumber)],
            FeatureSetId::Set2 => [(BloodVolume, OscillationNumber), (BloodVolume, MaxAmplitude)],
            FeatureSetId::Set3 => [(HeartRate, OscillationNumber), (HeartRate, MaxAmplitude)],
        }
    }

    pub fn reads_blood_volume(self) -> bool {
        self.components().iter().any(|(s, _)| *s == Source::BloodVolume)
    }

    /// Whether the second component is an amplitude that needs rescaling.
    pub fn has_amplitude(self) -> bool {
        self.components()[1].1 == Statistic::MaxAmplitude
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "set {}", self.id())
    }
}

impl std::str::FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '_'], "").as_str() {
            "set1" | "1" => Ok(FeatureSetId::Set1),
            "set2" | "2" => Ok(FeatureSetId::Set2),
            "set3" | "3" => Ok(FeatureSetId::Set3),
            other => Err(Error::Parse(format!("not a feature set: {other:?}"))),
        }
    }
}

/// Mean-removed segment of `series` covered by `window`.
fn segment(series: &[f64], window: WindowSpec, fs: f64) -> Result<Vec<f64>> {
    let range = window.samples(fs);
    if range.end > series.len() {
        return Err(Error::InvalidWindow {
            start_s: window.start_s,
            end_s: window.end_s,
            reason: "extends past the end of the series",
        });
    }
    let seg = &series[range];
    if seg.len() < hemodynamics::MIN_ANALYTIC_LEN {
        return Err(Error::SeriesTooShort {
            len: seg.len(),
            min: hemodynamics::MIN_ANALYTIC_LEN,
        });
    }
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    let centred: Vec<f64> = seg.iter().map(|v| v - mean).collect();
    // A constant segment leaves only rounding residue; its phase is noise.
    let peak = centred.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak <= 1e-12 * mean.abs().max(1.0) {
        return Ok(vec![0.0; centred.len()]);
    }
    Ok(centred)
}

fn oscillation_number_at(series: &[f64], window: WindowSpec, fs: f64) -> Result<f64> {
    let seg = segment(series, window, fs)?;
    if seg.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let phase = hemodynamics::analytic(&seg)?.unwrapped_phase;
    // Increment from a least-squares line through the phase; the raw
    // endpoints carry the segment's edge distortion.
    let n = phase.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let p_mean = phase.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, p) in phase.iter().enumerate() {
        let dt = i as f64 - t_mean;
        num += dt * (p - p_mean);
        den += dt * dt;
    }
    Ok(num / den * n / (2.0 * std::f64::consts::PI))
}

fn max_amplitude_at(series: &[f64], window: WindowSpec, fs: f64) -> Result<f64> {
    let seg = segment(series, window, fs)?;
    let amp = hemodynamics::analytic(&seg)?.instantaneous_amplitude;
    Ok(amp.into_iter().fold(0.0, f64::max))
}

/// Cycles completed over the window: phase increment / 2π of the window's
/// analytic signal (window mean removed first), the increment taken from the
/// fitted phase slope times the window length.
pub fn oscillation_number(series: &[f64], window: WindowSpec) -> Result<f64> {
    oscillation_number_at(series, window, SAMPLE_RATE_HZ)
}

/// Largest instantaneous amplitude of the window's analytic signal.
pub fn max_amplitude(series: &[f64], window: WindowSpec) -> Result<f64> {
    max_amplitude_at(series, window, SAMPLE_RATE_HZ)
}

/// Both statistics before amplitude rescaling.
pub fn extract_raw(
    hemo: &HemoSeries,
    feature_set: FeatureSetId,
    window: WindowSpec,
    channel: Channel,
) -> Result<[f64; 2]> {
    let bv_window = if feature_set.reads_blood_volume() {
        Some(window.blood_volume_window()?)
    } else {
        None
    };
    let fs = hemo.sample_rate_hz;
    let mut out = [0.0; 2];
    for (slot, (source, stat)) in out.iter_mut().zip(feature_set.components()) {
        let (series, w) = match source {
            Source::HeartRate => (hemo.heart_rate(channel), window),
            Source::BloodVolume => (hemo.blood_volume(channel), bv_window.expect("checked above")),
        };
        *slot = match stat {
            Statistic::OscillationNumber => oscillation_number_at(series, w, fs)?,
            Statistic::MaxAmplitude => max_amplitude_at(series, w, fs)?,
        };
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::DataIntegrity(format!(
            "non-finite feature {out:?} for {feature_set} at {window}"
        )));
    }
    Ok(out)
}

/// Factor mapping amplitudes onto the oscillation-number scale:
/// max |oscillation| / max |amplitude| over the training points.
pub fn amplitude_scale(feature_set: FeatureSetId, raw: &[[f64; 2]]) -> f64 {
    if !feature_set.has_amplitude() {
        return 1.0;
    }
    let max_osc = raw.iter().fold(0.0_f64, |m, x| m.max(x[0].abs()));
    let max_amp = raw.iter().fold(0.0_f64, |m, x| m.max(x[1].abs()));
    if max_amp > 0.0 && max_osc > 0.0 {
        max_osc / max_amp
    } else {
        1.0
    }
}

pub fn rescale_amplitude(value: f64, scale: f64) -> f64 {
    value * scale
}

/// Point fed to the SVM, amplitude already rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub x: [f64; 2],
    pub feature_set: FeatureSetId,
    pub window: WindowSpec,
    pub channel: Channel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_id: Option<String>,
}

pub fn extract(
    hemo: &HemoSeries,
    feature_set: FeatureSetId,
    window: WindowSpec,
    channel: Channel,
    scale: f64,
) -> Result<FeatureVector> {
    let raw = extract_raw(hemo, feature_set, window, channel)?;
    Ok(FeatureVector {
        x: [raw[0], rescale_amplitude(raw[1], scale)],
        feature_set,
        window,
        channel,
        trial_id: None,
    })
}
