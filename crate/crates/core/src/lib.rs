//! Word communication for patients who can only answer yes or no.
//!
//! The crate covers the whole chain: turning a two-channel near-infrared
//! recording into blood-volume and heart-rate series ([`hemodynamics`]),
//! deciding yes/no with a Gaussian-kernel SVM ([`decision`]), spelling a word
//! skeleton through dichotomic questions ([`codec`]), looking up candidate
//! words ([`lexicon`]), confirming a candidate with a posterior measure
//! ([`confirmation`]) and driving the caregiver workflow as a replayable
//! state machine ([`session`]). [`simulator`] stands in for the hardware and
//! the patient.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod codec;
pub mod confirmation;
pub mod decision;
pub mod dsp;
pub mod error;
pub mod hemodynamics;
pub mod lexicon;
pub mod session;
pub mod simulator;

pub use error::{Error, Result};

/// A decoded or intended binary answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn flipped(self) -> Self {
        match self {
            Answer::Yes => Answer::No,
            Answer::No => Answer::Yes,
        }
    }

    /// SVM label: yes = +1, no = -1.
    pub fn label(self) -> f64 {
        match self {
            Answer::Yes => 1.0,
            Answer::No => -1.0,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Answer::Yes => 'Y',
            Answer::No => 'N',
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
        })
    }
}

impl std::str::FromStr for Answer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "y" => Ok(Answer::Yes),
            "no" | "n" => Ok(Answer::No),
            other => Err(Error::Parse(format!("not an answer: {other:?}"))),
        }
    }
}

/// Forehead probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Left,
    Right,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Left, Channel::Right];

    pub fn index(self) -> usize {
        match self {
            Channel::Left => 0,
            Channel::Right => 1,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Left => "left",
            Channel::Right => "right",
        })
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Channel::Left),
            "right" => Ok(Channel::Right),
            other => Err(Error::Parse(format!("not a channel: {other:?}"))),
        }
    }
}
