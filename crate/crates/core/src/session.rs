//! The caregiver workflow as an event-sourced state machine.
//!
//! Every operation on a [`Session`] validates against the current phase,
//! emits one or more [`SessionEvent`]s and folds them into the
//! [`SessionState`]. Folding the same events from scratch ([`replay`]) gives
//! the same state, which is how session logs are resumed and how the golden
//! narratives are checked.
//!
//! A log covers one word arc. Each day is its own session with a fresh
//! question budget and clock, started by a [`EventKind::NewDay`] event.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codec::{path_string, Scheme, Step, Symbol, POSITIONS};
use crate::confirmation::{ConfirmationLedger, Effective, Policy, QuestionForm, Verdict, DEFAULT_PLANNED_ROUNDS};
use crate::decision::DecisionModel;
use crate::hemodynamics::{derive, Trial};
use crate::lexicon::{Lexicon, LexiconEntry, Skeleton};
use crate::{Answer, Channel, Error, Result};

pub const QUESTION_BUDGET: u32 = 16;
pub const SESSION_LIMIT_S: u32 = 1800;
/// Simulated time charged per answered question: one 36 s trial plus
/// reading the question and reporting the answer.
pub const SECONDS_PER_QUESTION: u32 = 60;

/// Everything fixed for the life of a log; written as its first line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub subject: String,
    pub scheme: String,
    pub lexicon: String,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub active_channel: Option<Channel>,
    #[serde(default)]
    pub date: Option<String>,
    pub question_budget: u32,
    pub time_limit_s: u32,
    pub seconds_per_question: u32,
    pub confirmation_rounds: usize,
    pub policy: Policy,
}

impl SessionHeader {
    pub fn new(subject: &str, scheme: &str, lexicon: &str) -> Self {
        SessionHeader {
            subject: subject.to_string(),
            scheme: scheme.to_string(),
            lexicon: lexicon.to_string(),
            model_id: None,
            active_channel: None,
            date: None,
            question_budget: QUESTION_BUDGET,
            time_limit_s: SESSION_LIMIT_S,
            seconds_per_question: SECONDS_PER_QUESTION,
            confirmation_rounds: DEFAULT_PLANNED_ROUNDS,
            policy: Policy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Accept,
    Reject,
    Continue,
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accept" => Ok(Resolution::Accept),
            "reject" => Ok(Resolution::Reject),
            "continue" => Ok(Resolution::Continue),
            other => Err(Error::Parse(format!("not a resolution: {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSummary {
    pub skeleton: Skeleton,
    pub position: usize,
    pub symbol: Symbol,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    NewDay {
        #[serde(default)]
        date: Option<String>,
    },
    TrialRun {
        trial_id: String,
        channel: Channel,
        feature: [f64; 2],
        decision_value: f64,
    },
    AnswerDecoded {
        answer: Answer,
        #[serde(default)]
        low_trust: bool,
    },
    SymbolSpoiled {
        position: usize,
    },
    SymbolDecoded {
        position: usize,
        path: String,
        symbol: Symbol,
        #[serde(default)]
        low_trust: bool,
    },
    QueryIssued {
        skeleton: Skeleton,
        candidates: Vec<String>,
        #[serde(default)]
        neighbors: Vec<NeighborSummary>,
    },
    CandidateAsked {
        word: String,
        planned_rounds: usize,
        in_candidates: bool,
    },
    ConfirmRound {
        word: String,
        form: QuestionForm,
        raw: Answer,
        effective: Effective,
        affirm: u64,
        deny: u64,
        confidence: f64,
        verdict: Verdict,
    },
    Resolve {
        decision: Resolution,
        word: String,
        #[serde(default)]
        note: Option<String>,
    },
    Substitute {
        position: usize,
        symbol: Symbol,
        from: Skeleton,
        to: Skeleton,
    },
    Restart,
    Accept {
        word: String,
        affirm: u64,
        deny: u64,
        confidence: f64,
        verdict: Verdict,
        #[serde(default)]
        note: Option<String>,
    },
    Abandon {
        reason: String,
    },
    CaregiverNote {
        text: String,
    },
    LimitReached {
        reason: String,
    },
}

/// One log line after the header. `day` and `elapsed_s` are simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub day: u32,
    pub elapsed_s: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    AcquiringSymbol { position: usize, partial: Vec<Answer> },
    Querying,
    PresentingCandidate,
    Confirming { ledger: ConfirmationLedger },
    SubstitutionBrowsing,
    Accepted { word: String },
    Abandoned { reason: String },
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::AcquiringSymbol { .. } => "acquiring_symbol",
            Phase::Querying => "querying",
            Phase::PresentingCandidate => "presenting_candidate",
            Phase::Confirming { .. } => "confirming",
            Phase::SubstitutionBrowsing => "substitution_browsing",
            Phase::Accepted { .. } => "accepted",
            Phase::Abandoned { .. } => "abandoned",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Accepted { .. } | Phase::Abandoned { .. })
    }

    fn acquiring() -> Self {
        Phase::AcquiringSymbol {
            position: 1,
            partial: Vec::new(),
        }
    }
}

/// Snapshot of a session; a pure function of the header and the events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    pub skeleton: Vec<Symbol>,
    /// Results of the last dictionary query, in rank order.
    pub candidates: Vec<String>,
    pub neighbors: Vec<NeighborSummary>,
    pub rejected: Vec<String>,
    pub low_trust: bool,
    pub question_budget_used: u32,
    pub elapsed_s: u32,
    pub day: u32,
    pub scheme: String,
    pub active_channel: Option<Channel>,
    pub model_id: Option<String>,
    pub history: Vec<SessionEvent>,
}

fn phase_error(op: &'static str, phase: &Phase) -> Error {
    Error::Phase {
        op,
        phase: phase.name().to_string(),
    }
}

impl SessionState {
    pub fn new(header: &SessionHeader) -> Self {
        SessionState {
            phase: Phase::acquiring(),
            skeleton: Vec::new(),
            candidates: Vec::new(),
            neighbors: Vec::new(),
            rejected: Vec::new(),
            low_trust: false,
            question_budget_used: 0,
            elapsed_s: 0,
            day: 1,
            scheme: header.scheme.clone(),
            active_channel: header.active_channel,
            model_id: header.model_id.clone(),
            history: Vec::new(),
        }
    }

    pub fn current_skeleton(&self) -> Option<Skeleton> {
        let arr: [Symbol; POSITIONS] = self.skeleton.clone().try_into().ok()?;
        Some(Skeleton(arr))
    }

    /// Reason a further question would break the session limits, if any.
    pub fn limit_reason(&self, header: &SessionHeader) -> Option<String> {
        if self.question_budget_used >= header.question_budget {
            Some(format!("question budget of {} used", header.question_budget))
        } else if self.elapsed_s + header.seconds_per_question > header.time_limit_s {
            Some(format!("time limit of {} s reached", header.time_limit_s))
        } else {
            None
        }
    }

    /// Folds one event. On error the state is left unchanged.
    pub fn apply(&mut self, header: &SessionHeader, event: SessionEvent) -> Result<()> {
        let mut next = self.clone();
        next.apply_in_place(header, &event)?;
        next.history.push(event);
        *self = next;
        Ok(())
    }

    fn apply_in_place(&mut self, header: &SessionHeader, event: &SessionEvent) -> Result<()> {
        if self.phase.is_terminal() && !matches!(event.kind, EventKind::CaregiverNote { .. }) {
            return Err(phase_error("event", &self.phase));
        }
        match &event.kind {
            EventKind::NewDay { .. } => {
                self.day += 1;
                self.question_budget_used = 0;
                self.elapsed_s = 0;
                self.low_trust = false;
                match &self.phase {
                    Phase::AcquiringSymbol { position, .. } => {
                        self.phase = Phase::AcquiringSymbol {
                            position: *position,
                            partial: Vec::new(),
                        }
                    }
                    Phase::Confirming { .. } => self.phase = Phase::PresentingCandidate,
                    _ => {}
                }
            }
            EventKind::TrialRun { .. } => {
                if !matches!(self.phase, Phase::AcquiringSymbol { .. } | Phase::Confirming { .. }) {
                    return Err(phase_error("submit_trial", &self.phase));
                }
            }
            EventKind::AnswerDecoded { answer, .. } => {
                if let Some(reason) = self.limit_reason(header) {
                    return Err(Error::SessionLimit(reason));
                }
                match &mut self.phase {
                    Phase::AcquiringSymbol { partial, .. } => partial.push(*answer),
                    Phase::Confirming { .. } => {}
                    other => return Err(phase_error("submit_answer", other)),
                }
                self.question_budget_used += 1;
                self.elapsed_s += header.seconds_per_question;
            }
            EventKind::SymbolSpoiled { position } => match &self.phase {
                Phase::AcquiringSymbol { position: p, .. } if p == position => self.low_trust = true,
                other => return Err(phase_error("flag_spoiled", other)),
            },
            EventKind::SymbolDecoded {
                position, path, symbol, ..
            } => {
                let Phase::AcquiringSymbol { position: p, partial } = &self.phase else {
                    return Err(phase_error("decode_symbol", &self.phase));
                };
                if p != position || path_string(partial) != *path {
                    return Err(Error::Protocol(format!(
                        "symbol event for position {position} path {path} does not match the answers so far"
                    )));
                }
                self.skeleton.push(symbol.clone());
                self.low_trust = false;
                self.phase = if *position >= POSITIONS {
                    Phase::Querying
                } else {
                    Phase::AcquiringSymbol {
                        position: position + 1,
                        partial: Vec::new(),
                    }
                };
            }
            EventKind::QueryIssued {
                skeleton,
                candidates,
                neighbors,
            } => {
                if self.phase != Phase::Querying {
                    return Err(phase_error("consult", &self.phase));
                }
                if self.current_skeleton().as_ref() != Some(skeleton) {
                    return Err(Error::Protocol(format!("query for {skeleton} does not match the skeleton")));
                }
                self.candidates = candidates.clone();
                self.neighbors = neighbors.clone();
                self.rejected.clear();
                self.phase = if candidates.is_empty() {
                    Phase::SubstitutionBrowsing
                } else {
                    Phase::PresentingCandidate
                };
            }
            EventKind::CandidateAsked { word, planned_rounds, .. } => {
                if self.phase != Phase::PresentingCandidate {
                    return Err(phase_error("ask_candidate", &self.phase));
                }
                if word.trim().is_empty() || *planned_rounds == 0 {
                    return Err(Error::Protocol("candidate needs a word and at least one round".into()));
                }
                self.phase = Phase::Confirming {
                    ledger: ConfirmationLedger::with_rounds(word.clone(), *planned_rounds),
                };
            }
            EventKind::ConfirmRound { word, form, raw, .. } => {
                let Phase::Confirming { ledger } = &mut self.phase else {
                    return Err(phase_error("confirm_round", &self.phase));
                };
                if ledger.word != *word {
                    return Err(Error::Protocol(format!("round for {word:?} while confirming {:?}", ledger.word)));
                }
                ledger.record(*form, *raw)?;
            }
            EventKind::Resolve { decision, .. } => {
                let Phase::Confirming { ledger } = &mut self.phase else {
                    return Err(phase_error("resolve", &self.phase));
                };
                match decision {
                    Resolution::Reject => {
                        self.rejected.push(ledger.word.clone());
                        self.phase = Phase::PresentingCandidate;
                    }
                    Resolution::Continue => {
                        if !ledger.is_complete() {
                            return Err(Error::Protocol("ledger still has planned rounds".into()));
                        }
                        ledger.extend_pair();
                    }
                    Resolution::Accept => {
                        return Err(Error::Protocol("acceptance is recorded as an accept event".into()));
                    }
                }
            }
            EventKind::Accept { word, .. } => {
                let Phase::Confirming { ledger } = &self.phase else {
                    return Err(phase_error("resolve", &self.phase));
                };
                let verdict = ledger.verdict(&header.policy);
                if !ledger.is_complete() || !verdict.allows_accept() || ledger.word != *word {
                    return Err(Error::AcceptRefused(format!(
                        "{:?} after {} of {} rounds has verdict {verdict}",
                        ledger.word,
                        ledger.rounds.len(),
                        ledger.planned_rounds
                    )));
                }
                self.phase = Phase::Accepted { word: word.clone() };
            }
            EventKind::Substitute { position, symbol, from, to } => {
                if !matches!(self.phase, Phase::SubstitutionBrowsing | Phase::PresentingCandidate) {
                    return Err(phase_error("substitute", &self.phase));
                }
                if self.current_skeleton().as_ref() != Some(from)
                    || !(1..=POSITIONS).contains(position)
                    || to.0[position - 1] != *symbol
                {
                    return Err(Error::Protocol(format!("substitution {from} -> {to} is inconsistent")));
                }
                self.skeleton = to.0.to_vec();
                self.phase = Phase::Querying;
            }
            EventKind::Restart => {
                if matches!(self.phase, Phase::Confirming { .. }) {
                    return Err(phase_error("restart", &self.phase));
                }
                self.skeleton.clear();
                self.candidates.clear();
                self.neighbors.clear();
                self.rejected.clear();
                self.low_trust = false;
                self.phase = Phase::acquiring();
            }
            EventKind::Abandon { reason } => {
                self.phase = Phase::Abandoned { reason: reason.clone() };
            }
            EventKind::CaregiverNote { .. } | EventKind::LimitReached { .. } => {}
        }
        Ok(())
    }
}

/// Folds a header and events into a state.
pub fn replay(header: &SessionHeader, events: &[SessionEvent]) -> Result<SessionState> {
    let mut state = SessionState::new(header);
    for e in events {
        state.apply(header, e.clone())?;
    }
    Ok(state)
}

/// Outcome of one answered question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub answer: Answer,
    pub low_trust: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirm: Option<Effective>,
}

/// What the patient is being asked right now.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Prompt {
    Symbol {
        position: usize,
        text: String,
        subset: Vec<Symbol>,
    },
    Confirm {
        word: String,
        form: QuestionForm,
        text: String,
    },
}

/// A live session bound to its scheme, lexicon and model.
#[derive(Debug, Clone)]
pub struct Session {
    header: SessionHeader,
    state: SessionState,
    scheme: Scheme,
    lexicon: Arc<Lexicon>,
    model: Option<DecisionModel>,
}

impl Session {
    /// Starts at the first symbol. Fails without a calibrated model.
    pub fn start(
        mut header: SessionHeader,
        scheme: Scheme,
        lexicon: Arc<Lexicon>,
        model: Option<DecisionModel>,
    ) -> Result<Self> {
        let model = model.ok_or(Error::MissingModel)?;
        header.model_id = Some(model.id());
        header.active_channel = Some(model.channel);
        let mut s = Self::without_model(header, scheme, lexicon)?;
        s.model = Some(model);
        Ok(s)
    }

    /// A session driven by directly entered answers, as when replaying
    /// narratives or when answers come from outside the classifier.
    pub fn without_model(header: SessionHeader, scheme: Scheme, lexicon: Arc<Lexicon>) -> Result<Self> {
        if header.scheme != scheme.name {
            return Err(Error::Protocol(format!(
                "header names scheme {:?} but {:?} was given",
                header.scheme, scheme.name
            )));
        }
        let state = SessionState::new(&header);
        Ok(Session {
            header,
            state,
            scheme,
            lexicon,
            model: None,
        })
    }

    /// Rebuilds a live session from a log.
    pub fn resume(
        header: SessionHeader,
        events: &[SessionEvent],
        scheme: Scheme,
        lexicon: Arc<Lexicon>,
        model: Option<DecisionModel>,
    ) -> Result<Self> {
        let mut s = Self::without_model(header, scheme, lexicon)?;
        s.state = replay(&s.header, events)?;
        s.model = model;
        Ok(s)
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.state.history
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn model(&self) -> Option<&DecisionModel> {
        self.model.as_ref()
    }

    fn emit(&mut self, kind: EventKind) -> Result<()> {
        let event = SessionEvent {
            seq: self.state.history.len() as u64 + 1,
            day: self.state.day,
            elapsed_s: self.state.elapsed_s,
            kind,
        };
        self.state.apply(&self.header, event)
    }

    /// Emits several events atomically.
    fn emit_all(&mut self, kinds: Vec<EventKind>) -> Result<()> {
        let saved = self.state.clone();
        for k in kinds {
            if let Err(e) = self.emit(k) {
                self.state = saved;
                return Err(e);
            }
        }
        Ok(())
    }

    pub fn prompt(&self) -> Option<Prompt> {
        match &self.state.phase {
            Phase::AcquiringSymbol { position, partial } => {
                let q = self.scheme.next_question(*position, partial).ok()?;
                Some(Prompt::Symbol {
                    position: *position,
                    text: q.text,
                    subset: q.subset,
                })
            }
            Phase::Confirming { ledger } if !ledger.is_complete() => Some(Prompt::Confirm {
                word: ledger.word.clone(),
                form: ledger.next_form(),
                text: ledger.next_question(),
            }),
            _ => None,
        }
    }

    /// Errors unless the session is waiting for an answer.
    pub fn check_answerable(&self) -> Result<()> {
        match &self.state.phase {
            Phase::AcquiringSymbol { .. } => {}
            Phase::Confirming { ledger } if !ledger.is_complete() => {}
            other => return Err(phase_error("submit_answer", other)),
        }
        if let Some(reason) = self.state.limit_reason(&self.header) {
            return Err(Error::SessionLimit(reason));
        }
        Ok(())
    }

    /// Classifies a trial with the session model and routes the answer.
    pub fn submit_trial(&mut self, trial: &Trial) -> Result<AnswerOutcome> {
        self.check_answerable()?;
        let model = self.model.as_ref().ok_or(Error::MissingModel)?;
        let c = model.classify(&derive(trial)?)?;
        let run = EventKind::TrialRun {
            trial_id: trial.trial_id.clone(),
            channel: model.channel,
            feature: c.feature.x,
            decision_value: c.decision_value,
        };
        let mut out = self.route(c.answer, Some(run))?;
        out.decision_value = Some(c.decision_value);
        Ok(out)
    }

    /// Routes an answer decided outside the classifier.
    pub fn submit_answer(&mut self, answer: Answer) -> Result<AnswerOutcome> {
        self.check_answerable()?;
        self.route(answer, None)
    }

    fn route(&mut self, answer: Answer, run: Option<EventKind>) -> Result<AnswerOutcome> {
        let low_trust = self.state.low_trust;
        let mut kinds: Vec<EventKind> = run.into_iter().collect();
        kinds.push(EventKind::AnswerDecoded { answer, low_trust });
        let mut out = AnswerOutcome {
            answer,
            low_trust,
            decision_value: None,
            symbol: None,
            confirm: None,
        };
        match &self.state.phase {
            Phase::AcquiringSymbol { position, partial } => {
                let mut path = partial.clone();
                path.push(answer);
                if let Step::Symbol(symbol) = self.scheme.step(*position, &path)? {
                    out.symbol = Some(symbol.clone());
                    kinds.push(EventKind::SymbolDecoded {
                        position: *position,
                        path: path_string(&path),
                        symbol,
                        low_trust,
                    });
                }
            }
            Phase::Confirming { ledger } => {
                let mut next = ledger.clone();
                let form = next.next_form();
                let effective = next.record(form, answer)?;
                let (affirm, deny) = next.counts();
                out.confirm = Some(effective);
                kinds.push(EventKind::ConfirmRound {
                    word: next.word.clone(),
                    form,
                    raw: answer,
                    effective,
                    affirm,
                    deny,
                    confidence: next.confidence(),
                    verdict: next.verdict(&self.header.policy),
                });
            }
            other => return Err(phase_error("submit_answer", other)),
        }
        if self.state.question_budget_used + 1 >= self.header.question_budget {
            kinds.push(EventKind::LimitReached {
                reason: format!("question budget of {} used", self.header.question_budget),
            });
        }
        self.emit_all(kinds)?;
        Ok(out)
    }

    /// Marks the current symbol as spoiled: its remaining answers are flagged.
    pub fn flag_spoiled(&mut self) -> Result<()> {
        let Phase::AcquiringSymbol { position, .. } = self.state.phase else {
            return Err(phase_error("flag_spoiled", &self.state.phase));
        };
        self.emit(EventKind::SymbolSpoiled { position })
    }

    /// Looks the skeleton up; offers substitutions when nothing matches.
    pub fn consult(&mut self) -> Result<Vec<LexiconEntry>> {
        if self.state.phase != Phase::Querying {
            return Err(phase_error("consult", &self.state.phase));
        }
        let skeleton = self
            .state
            .current_skeleton()
            .ok_or_else(|| Error::Protocol("skeleton is incomplete".into()))?;
        let entries: Vec<LexiconEntry> = self.lexicon.query(&skeleton).into_iter().cloned().collect();
        let neighbors = if entries.is_empty() {
            self.lexicon
                .neighbors(&skeleton)
                .into_iter()
                .map(|n| NeighborSummary {
                    skeleton: n.skeleton,
                    position: n.position,
                    symbol: n.symbol,
                    count: n.entries.len(),
                })
                .collect()
        } else {
            Vec::new()
        };
        self.emit(EventKind::QueryIssued {
            skeleton,
            candidates: entries.iter().map(|e| e.reading.clone()).collect(),
            neighbors,
        })?;
        Ok(entries)
    }

    /// Candidate entries from the last query.
    pub fn candidate_entries(&self) -> Vec<LexiconEntry> {
        self.state
            .candidates
            .iter()
            .filter_map(|r| self.lexicon.get(r).cloned())
            .collect()
    }

    /// Opens a ledger for `word`. The caregiver may name a word outside the
    /// candidate list.
    pub fn ask_candidate(&mut self, word: &str, rounds: Option<usize>) -> Result<()> {
        self.emit(EventKind::CandidateAsked {
            word: word.to_string(),
            planned_rounds: rounds.unwrap_or(self.header.confirmation_rounds),
            in_candidates: self.state.candidates.iter().any(|c| c == word),
        })
    }

    pub fn resolve(&mut self, decision: Resolution, note: Option<&str>) -> Result<()> {
        let Phase::Confirming { ledger } = &self.state.phase else {
            return Err(phase_error("resolve", &self.state.phase));
        };
        let note = note.map(str::to_string);
        let word = ledger.word.clone();
        match decision {
            Resolution::Accept => {
                let (affirm, deny) = ledger.counts();
                self.emit(EventKind::Accept {
                    word,
                    affirm,
                    deny,
                    confidence: ledger.confidence(),
                    verdict: ledger.verdict(&self.header.policy),
                    note,
                })
            }
            _ => self.emit(EventKind::Resolve { decision, word, note }),
        }
    }

    /// Replaces one symbol (1-based position) and returns to querying.
    pub fn substitute(&mut self, position: usize, symbol: &str) -> Result<()> {
        if !matches!(self.state.phase, Phase::SubstitutionBrowsing | Phase::PresentingCandidate) {
            return Err(phase_error("substitute", &self.state.phase));
        }
        let from = self
            .state
            .current_skeleton()
            .ok_or_else(|| Error::Protocol("skeleton is incomplete".into()))?;
        if !(1..=POSITIONS).contains(&position) {
            return Err(Error::Protocol(format!("no position {position}")));
        }
        let symbol = self.scheme.symbol(symbol)?;
        if !self.scheme.symbols_at(position)?.contains(&symbol) {
            return Err(Error::UnknownSymbol(format!("{symbol} at position {position}")));
        }
        if from.0[position - 1] == symbol {
            return Err(Error::Protocol(format!("{symbol} is already at position {position}")));
        }
        let to = Skeleton::new(&self.scheme, from.with(position, symbol.clone()).0)?;
        self.emit(EventKind::Substitute {
            position,
            symbol,
            from,
            to,
        })
    }

    pub fn restart(&mut self) -> Result<()> {
        self.emit(EventKind::Restart)
    }

    pub fn abandon(&mut self, reason: &str) -> Result<()> {
        self.emit(EventKind::Abandon {
            reason: reason.to_string(),
        })
    }

    pub fn note(&mut self, text: &str) -> Result<()> {
        self.emit(EventKind::CaregiverNote { text: text.to_string() })
    }

    /// Starts the next day's session: budget and clock reset, an open ledger
    /// is closed.
    pub fn new_day(&mut self, date: Option<&str>) -> Result<()> {
        self.emit(EventKind::NewDay {
            date: date.map(str::to_string),
        })
    }

    pub fn write_log(&self, out: impl Write) -> Result<()> {
        write_log(&self.header, self.events(), out)
    }
}

/// Header line followed by one event per line.
pub fn write_log(header: &SessionHeader, events: &[SessionEvent], mut out: impl Write) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log(input: impl BufRead) -> Result<(SessionHeader, Vec<SessionEvent>)> {
    let mut header = None;
    let mut events = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Parse(format!("log line {}: {e}", n + 1));
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(parse_err)?);
        } else {
            events.push(serde_json::from_str(&line).map_err(parse_err)?);
        }
    }
    let header = header.ok_or_else(|| Error::Parse("empty session log".into()))?;
    Ok((header, events))
}

#[cfg(test)]
mod tests;
