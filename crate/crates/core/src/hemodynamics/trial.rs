use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SAMPLE_RATE_HZ, TRIAL_SAMPLES};
use crate::error::{Error, Result};
use crate::{Answer, Channel};

/// One 36 s, two-channel recording: 12 s rest, 12 s answering, 12 s rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrial")]
pub struct Trial {
    pub trial_id: String,
    pub channels: [Vec<f64>; 2],
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_label: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Deserialize)]
struct RawTrial {
    trial_id: String,
    channels: [Vec<f64>; 2],
    #[serde(default = "default_rate")]
    sample_rate_hz: f64,
    #[serde(default)]
    task_label: Option<Answer>,
    #[serde(default)]
    timestamp: Option<String>,
}

fn default_rate() -> f64 {
    SAMPLE_RATE_HZ
}

impl TryFrom<RawTrial> for Trial {
    type Error = Error;

    fn try_from(raw: RawTrial) -> Result<Self> {
        let mut trial = Trial::new(raw.trial_id, raw.channels[0].clone(), raw.channels[1].clone())?;
        if raw.sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::DataIntegrity(format!(
                "sample rate must be {SAMPLE_RATE_HZ} Hz, got {}",
                raw.sample_rate_hz
            )));
        }
        trial.task_label = raw.task_label;
        trial.timestamp = raw.timestamp;
        Ok(trial)
    }
}

impl Trial {
    /// Validates length and positivity of both channels.
    pub fn new(trial_id: impl Into<String>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        for (channel, samples) in [(Channel::Left, &left), (Channel::Right, &right)] {
            if samples.len() != TRIAL_SAMPLES {
                return Err(Error::DataIntegrity(format!(
                    "{channel} channel has {} samples, expected {TRIAL_SAMPLES}",
                    samples.len()
                )));
            }
            if let Some(i) = samples.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::DataIntegrity(format!(
                    "{channel} channel sample {i} is not a positive intensity"
                )));
            }
        }
        Ok(Self {
            trial_id: trial_id.into(),
            channels: [left, right],
            sample_rate_hz: SAMPLE_RATE_HZ,
            task_label: None,
            timestamp: None,
        })
    }

    pub fn with_label(mut self, label: Answer) -> Self {
        self.task_label = Some(label);
        self
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        &self.channels[channel.index()]
    }
}

/// Reads the `t,left,right` CSV layout.
pub fn parse_trial_csv(trial_id: &str, reader: impl Read) -> Result<Trial> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "left", "right"] {
        return Err(Error::Parse(format!(
            "expected header t,left,right, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut left = Vec::with_capacity(TRIAL_SAMPLES);
    let mut right = Vec::with_capacity(TRIAL_SAMPLES);
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |j: usize| -> Result<f64> {
            record
                .get(j)
                .ok_or_else(|| Error::Parse(format!("row {i} is missing column {j}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {i}: {e}")))
        };
        let t = field(0)?;
        let expected = i as f64 / SAMPLE_RATE_HZ;
        if (t - expected).abs() > 1e-6 {
            return Err(Error::DataIntegrity(format!(
                "row {i} has t = {t}, expected {expected:.1}"
            )));
        }
        left.push(field(1)?);
        right.push(field(2)?);
    }
    Trial::new(trial_id, left, right)
}

pub fn load_trial_csv(path: &Path) -> Result<Trial> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trial")
        .to_string();
    parse_trial_csv(&id, std::fs::File::open(path)?)
}

/// Writes intensities with round-trip precision.
pub fn write_trial_csv(trial: &Trial, mut out: impl Write) -> Result<()> {
    writeln!(out, "t,left,right")?;
    for (i, (l, r)) in trial.channels[0].iter().zip(&trial.channels[1]).enumerate() {
        writeln!(out, "{:.1},{l:?},{r:?}", i as f64 / SAMPLE_RATE_HZ)?;
    }
    Ok(())
}

/// Loads a directory of trial CSVs described by `manifest.json`, a JSON
/// object mapping trial id (file stem) to `"yes"` or `"no"`. Trials come back
/// in manifest key order.
pub fn load_bundle(dir: &Path) -> Result<Vec<Trial>> {
    let manifest: BTreeMap<String, Answer> =
        serde_json::from_reader(std::fs::File::open(dir.join("manifest.json"))?)?;
    manifest
        .into_iter()
        .map(|(id, label)| {
            let path = dir.join(format!("{id}.csv"));
            let trial = parse_trial_csv(&id, std::fs::File::open(&path)?)?;
            Ok(trial.with_label(label))
        })
        .collect()
}
