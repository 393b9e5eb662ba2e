//! Synthetic patient: two-channel optical trials and a scripted answerer.
//!
//! A trial is `baseline * exp(-(drift + pulse + bv + noise))` per channel.
//! The pulse frequency follows the heart rate; on a yes trial the heart rate
//! rises by `hr_boost` along one cycle of a 0.05 Hz raised cosine starting at
//! the answering period, and blood volume follows the same shape
//! `bv_lag_s` later. `noise_sigma` sets white measurement noise and the size
//! of spontaneous slow heart-rate and blood-volume fluctuations.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::{Scheme, Symbol};
use crate::confirmation::{confidence, QuestionForm, Verdict};
use crate::decision::{calibrate, pairs_from_trials, CalibrationPair, DecisionModel};
use crate::hemodynamics::{Trial, ANSWER_START, SAMPLE_RATE_HZ, TRIAL_SAMPLES};
use crate::lexicon::{Lexicon, Skeleton};
use crate::session::{Phase, Prompt, Resolution, Session, SessionHeader};
use crate::{Answer, Error, Result};

pub const RESPONSE_FREQ_HZ: f64 = 0.05;
/// Spontaneous heart-rate fluctuation, bpm (std) per unit of `noise_sigma`.
pub const HR_WANDER_PER_SIGMA: f64 = 400.0;
/// Spontaneous blood-volume fluctuation (std) per unit of `noise_sigma`.
pub const BV_WANDER_PER_SIGMA: f64 = 1.5;
const WANDER_COMPONENTS: usize = 4;
const WANDER_BAND_HZ: (f64, f64) = (0.02, 0.1);
const DRIFT_SLOPE_STD: f64 = 2e-4;
const PULSE_HARMONIC: f64 = 0.25;
const BASELINE_INTENSITY: f64 = 1000.0;
/// Right-probe response relative to the left.
const RIGHT_GAIN: f64 = 0.9;
const CALIBRATION_STREAM: u64 = 0;
const SESSION_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub intended_word: String,
    /// Probability that the patient performs the task matching the truth.
    pub accuracy: f64,
    pub hr_base: f64,
    pub hr_boost: f64,
    pub pulse_amp: f64,
    pub bv_response_amp: f64,
    pub bv_lag_s: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

impl PatientProfile {
    /// Low noise; calibration separates cleanly.
    pub fn easy(word: &str, seed: u64) -> Self {
        PatientProfile {
            intended_word: word.to_string(),
            accuracy: 1.0,
            hr_base: 70.0,
            hr_boost: 10.0,
            pulse_amp: 0.02,
            bv_response_amp: 0.03,
            bv_lag_s: 3.0,
            noise_sigma: 0.001,
            rng_seed: seed,
        }
    }

    /// Spontaneous fluctuations comparable to the task response.
    pub fn hard(word: &str, seed: u64) -> Self {
        PatientProfile {
            noise_sigma: 0.005,
            ..Self::easy(word, seed)
        }
    }

    pub fn preset(name: &str, word: &str, seed: u64) -> Result<Self> {
        match name {
            "easy" => Ok(Self::easy(word, seed)),
            "hard" => Ok(Self::hard(word, seed)),
            other => Err(Error::Parse(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DataIntegrity(format!("patient profile: {m}")));
        if !(0.0..=1.0).contains(&self.accuracy) {
            return bad("accuracy must lie in [0, 1]");
        }
        if !(self.hr_base > 30.0) {
            return bad("hr_base must exceed 30 bpm");
        }
        if !(self.bv_lag_s >= 0.0) {
            return bad("bv_lag_s must be non-negative");
        }
        if !(self.noise_sigma >= 0.0) || !(self.pulse_amp > 0.0) {
            return bad("noise_sigma must be non-negative and pulse_amp positive");
        }
        Ok(())
    }
}

/// One cycle of a raised cosine at [`RESPONSE_FREQ_HZ`], zero outside.
pub fn response_envelope(tau_s: f64) -> f64 {
    let period = 1.0 / RESPONSE_FREQ_HZ;
    if !(0.0..=period).contains(&tau_s) {
        return 0.0;
    }
    0.5 * (1.0 - (2.0 * PI * RESPONSE_FREQ_HZ * tau_s).cos())
}

fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(index));
    rng
}

/// Sum of random slow sinusoids with total standard deviation `std`.
fn wander(rng: &mut ChaCha8Rng, std: f64, times: &[f64]) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; times.len()];
    }
    let amp = std * (2.0 / WANDER_COMPONENTS as f64).sqrt();
    let comps: Vec<(f64, f64)> = (0..WANDER_COMPONENTS)
        .map(|_| {
            (
                rng.random_range(WANDER_BAND_HZ.0..WANDER_BAND_HZ.1),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    times
        .iter()
        .map(|t| comps.iter().map(|(f, ph)| amp * (2.0 * PI * f * t + ph).sin()).sum())
        .collect()
}

/// Heart rate in bpm along the trial.
pub fn heart_rate_profile(profile: &PatientProfile, intended: Answer, wander_bpm: &[f64]) -> Vec<f64> {
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let onset = ANSWER_START as f64 * dt;
    wander_bpm
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let boost = match intended {
                Answer::Yes => profile.hr_boost * response_envelope(k as f64 * dt - onset),
                Answer::No => 0.0,
            };
            profile.hr_base + boost + w
        })
        .collect()
}

/// Pulse absorbance whose instantaneous frequency follows `hr_bpm`.
pub fn pulse_from_heart_rate(hr_bpm: &[f64], amp: f64, phase0: f64, harmonic_phase: f64) -> Vec<f64> {
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let mut phase = phase0;
    hr_bpm
        .iter()
        .map(|hr| {
            let p = phase;
            phase += 2.0 * PI * hr / 60.0 * dt;
            amp * (p.sin() + PULSE_HARMONIC * (2.0 * p + harmonic_phase).sin())
        })
        .collect()
}

/// A generated trial with the quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrial {
    pub trial: Trial,
    /// Absorbance per channel, `-ln(intensity / baseline)`.
    pub absorbance: [Vec<f64>; 2],
    pub heart_rate: Vec<f64>,
}

/// Deterministic in `(profile, intended, index)`.
pub fn generate_trial(profile: &PatientProfile, intended: Answer, index: u64) -> Trial {
    simulate_trial(profile, intended, index).trial
}

pub fn simulate_trial(profile: &PatientProfile, intended: Answer, index: u64) -> SimulatedTrial {
    simulate_trial_on(profile, intended, SESSION_STREAM, index)
}

fn simulate_trial_on(profile: &PatientProfile, intended: Answer, stream: u64, index: u64) -> SimulatedTrial {
    let mut rng = stream_rng(profile.rng_seed, stream, index);
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let times: Vec<f64> = (0..TRIAL_SAMPLES).map(|k| k as f64 * dt).collect();
    let onset = ANSWER_START as f64 * dt;
    let yes = intended == Answer::Yes;

    let hr_wander = wander(&mut rng, profile.noise_sigma * HR_WANDER_PER_SIGMA, &times);
    let heart_rate = heart_rate_profile(profile, intended, &hr_wander);
    let phase0 = rng.random_range(0.0..2.0 * PI);
    let harmonic_phase = rng.random_range(0.0..2.0 * PI);
    let pulse = pulse_from_heart_rate(&heart_rate, profile.pulse_amp, phase0, harmonic_phase);

    let noise = Normal::new(0.0, profile.noise_sigma).expect("finite sigma");
    let drift = Normal::new(0.0, DRIFT_SLOPE_STD).expect("finite sigma");
    let mut absorbance: [Vec<f64>; 2] = Default::default();
    let mut intensity: [Vec<f64>; 2] = Default::default();
    for (c, gain) in [1.0, RIGHT_GAIN].into_iter().enumerate() {
        let bv_wander = wander(&mut rng, profile.noise_sigma * BV_WANDER_PER_SIGMA, &times);
        let slope = drift.sample(&mut rng);
        let baseline = BASELINE_INTENSITY * rng.random_range(0.8..1.2);
        absorbance[c] = times
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let bv = if yes {
                    gain * profile.bv_response_amp * response_envelope(t - onset - profile.bv_lag_s)
                } else {
                    0.0
                };
                slope * t + pulse[k] + bv + bv_wander[k] + noise.sample(&mut rng)
            })
            .collect();
        intensity[c] = absorbance[c].iter().map(|a| baseline * (-a).exp()).collect();
    }
    let [left, right] = intensity;
    let trial = Trial::new(format!("sim-{}-{index}", profile.rng_seed), left, right)
        .expect("generated trial is valid")
        .with_label(intended);
    SimulatedTrial {
        trial,
        absorbance,
        heart_rate,
    }
}

/// A scripted patient with its own answer and trial streams.
#[derive(Debug, Clone)]
pub struct Patient {
    pub profile: PatientProfile,
    answers: ChaCha8Rng,
    next_trial: u64,
}

impl Patient {
    pub fn new(profile: PatientProfile) -> Result<Self> {
        profile.validate()?;
        let answers = stream_rng(profile.rng_seed, u64::MAX - 1, 0);
        Ok(Patient {
            profile,
            answers,
            next_trial: 1,
        })
    }

    /// The truth with probability `accuracy`, flipped otherwise.
    pub fn scripted_answer(&mut self, truth: Answer) -> Answer {
        if self.answers.random::<f64>() < self.profile.accuracy {
            truth
        } else {
            truth.flipped()
        }
    }

    pub fn trial(&mut self, intended: Answer) -> Trial {
        let t = generate_trial(&self.profile, intended, self.next_trial);
        self.next_trial += 1;
        t
    }

    /// Decides how to answer `truth` and produces the matching trial.
    pub fn respond(&mut self, truth: Answer) -> Trial {
        let intended = self.scripted_answer(truth);
        self.trial(intended)
    }
}

/// Four yes/no pairs performed as instructed.
pub fn run_calibration(profile: &PatientProfile) -> Vec<(Trial, Trial)> {
    (0..4u64)
        .map(|k| {
            let mut yes = calibration_trial(profile, Answer::Yes, 2 * k);
            let mut no = calibration_trial(profile, Answer::No, 2 * k + 1);
            yes.trial_id = format!("cal-{k}-yes");
            no.trial_id = format!("cal-{k}-no");
            (yes, no)
        })
        .collect()
}

fn calibration_trial(profile: &PatientProfile, intended: Answer, k: u64) -> Trial {
    simulate_trial_on(profile, intended, CALIBRATION_STREAM, k).trial
}

pub fn calibration_pairs(trials: &[(Trial, Trial)]) -> Result<Vec<CalibrationPair>> {
    let flat: Vec<Trial> = trials.iter().flat_map(|(y, n)| [y.clone(), n.clone()]).collect();
    pairs_from_trials(&flat)
}

/// Calibrates on simulated trials and returns the active model.
pub fn calibrate_patient(profile: &PatientProfile) -> Result<DecisionModel> {
    let pairs = calibration_pairs(&run_calibration(profile))?;
    Ok(calibrate(&pairs)?.model().clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoplayConfig {
    /// Days before giving up.
    pub max_sessions: usize,
    /// Candidates rejected before the caregiver restarts acquisition.
    pub restart_after_failures: usize,
    /// Extra confirmation pairs granted in the discretion band.
    pub max_extensions: usize,
}

impl Default for AutoplayConfig {
    fn default() -> Self {
        AutoplayConfig {
            max_sessions: 5,
            restart_after_failures: 2,
            max_extensions: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AutoplayOutcome {
    pub accepted: Option<String>,
    pub sessions_used: usize,
    pub questions: u32,
    pub session: Session,
}

impl AutoplayOutcome {
    pub fn accepted_true_word(&self, word: &str) -> bool {
        self.accepted.as_deref() == Some(word)
    }
}

fn truth_for_symbol(target: &Skeleton, position: usize, subset: &[Symbol]) -> Answer {
    if subset.contains(&target.0[position - 1]) {
        Answer::Yes
    } else {
        Answer::No
    }
}

/// Plays whole days with a rule-based caregiver until the word is accepted
/// or `max_sessions` days have passed. The caregiver asks the best-ranked
/// candidate not yet rejected, substitutes toward the largest neighbour when
/// nothing matches, restarts after repeated failures, accepts only on an
/// accept verdict and rejects once acceptance is out of reach.
pub fn autoplay(
    profile: &PatientProfile,
    scheme: &Scheme,
    lexicon: Arc<Lexicon>,
    model: DecisionModel,
    config: &AutoplayConfig,
) -> Result<AutoplayOutcome> {
    let mut patient = Patient::new(profile.clone())?;
    let target = lexicon.skeletonize(&profile.intended_word)?;
    let header = SessionHeader::new(&format!("sim-{}", profile.rng_seed), &scheme.name, lexicon.name());
    let mut session = Session::start(header, scheme.clone(), lexicon, Some(model))?;
    let policy = session.header().policy;

    let mut day = 1;
    let mut questions = 0;
    let mut rejected: Vec<String> = Vec::new();
    let mut failures = 0;
    let mut substituted = false;
    let mut extensions = 0;
    let mut pending: Option<String> = None;

    loop {
        if session.state().phase.is_terminal() {
            break;
        }
        let step: Result<()> = match session.state().phase.clone() {
            Phase::AcquiringSymbol { .. } => match session.prompt() {
                Some(Prompt::Symbol { position, subset, .. }) => {
                    let trial = patient.respond(truth_for_symbol(&target, position, &subset));
                    session.submit_trial(&trial).map(|_| questions += 1)
                }
                _ => Err(Error::Protocol("no symbol question".into())),
            },
            Phase::Querying => session.consult().map(|_| ()),
            Phase::SubstitutionBrowsing => {
                let best = session.state().neighbors.first().cloned();
                match best {
                    Some(n) if !substituted => {
                        substituted = true;
                        session.substitute(n.position, n.symbol.as_str())
                    }
                    _ => {
                        substituted = false;
                        session.restart()
                    }
                }
            }
            Phase::PresentingCandidate => {
                let next = pending.take().or_else(|| {
                    session
                        .state()
                        .candidates
                        .iter()
                        .find(|c| !rejected.contains(c))
                        .cloned()
                });
                match next {
                    Some(word) if failures < config.restart_after_failures => {
                        extensions = 0;
                        session.ask_candidate(&word, None)
                    }
                    _ => {
                        failures = 0;
                        substituted = false;
                        session.restart()
                    }
                }
            }
            Phase::Confirming { ledger } => {
                let word = ledger.word.clone();
                if ledger.is_complete() {
                    match ledger.verdict(&policy) {
                        Verdict::Accept => session.resolve(Resolution::Accept, None),
                        Verdict::CaregiverDiscretion { weak: false } if extensions < config.max_extensions => {
                            extensions += 1;
                            session.resolve(Resolution::Continue, None)
                        }
                        _ => {
                            rejected.push(word);
                            failures += 1;
                            session.resolve(Resolution::Reject, None)
                        }
                    }
                } else {
                    let (s, f) = ledger.counts();
                    let remaining = (ledger.planned_rounds - ledger.rounds.len()) as u64;
                    let floor = if extensions < config.max_extensions {
                        policy.discretion_floor
                    } else {
                        policy.accept_threshold
                    };
                    if confidence(s + remaining, f) < floor {
                        rejected.push(word);
                        failures += 1;
                        session.resolve(Resolution::Reject, Some("acceptance out of reach"))
                    } else {
                        let is_word = word == profile.intended_word;
                        let truth = match ledger.next_form() {
                            QuestionForm::Affirmative => is_word,
                            QuestionForm::Negative => !is_word,
                        };
                        let trial = patient.respond(if truth { Answer::Yes } else { Answer::No });
                        session.submit_trial(&trial).map(|_| questions += 1)
                    }
                }
            }
            Phase::Accepted { .. } | Phase::Abandoned { .. } => break,
        };
        match step {
            Ok(()) => {}
            Err(Error::SessionLimit(_)) => {
                if day >= config.max_sessions {
                    break;
                }
                if let Phase::Confirming { ledger } = &session.state().phase {
                    pending = Some(ledger.word.clone());
                }
                day += 1;
                session.new_day(None)?;
            }
            Err(e) => return Err(e),
        }
    }
    let accepted = match &session.state().phase {
        Phase::Accepted { word } => Some(word.clone()),
        _ => None,
    };
    Ok(AutoplayOutcome {
        accepted,
        sessions_used: day,
        questions,
        session,
    })
}
