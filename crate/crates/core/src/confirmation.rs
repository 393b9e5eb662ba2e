//! Posterior confirmation measure and the accept/discretion policy.
//!
//! With a uniform prior on the affirmative rate θ and `s` affirmations out of
//! `s + f` rounds, the posterior is Beta(s+1, f+1) and
//! `P(θ > 1/2) = P(Bin(s+f+1, 1/2) <= s)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Answer, Error, Result};

pub const DEFAULT_PLANNED_ROUNDS: usize = 8;
/// Largest `n` for which binomial sums fit in `u128`.
const EXACT_LIMIT: u64 = 126;

/// `P(θ > 1/2)` under the Beta(s+1, f+1) posterior.
pub fn confidence(affirm: u64, deny: u64) -> f64 {
    let n = affirm + deny + 1;
    // Summing the smaller side keeps c(s, f) + c(f, s) == 1 exactly.
    if affirm <= deny {
        lower_tail(affirm, n)
    } else {
        1.0 - lower_tail(deny, n)
    }
}

/// `P(Bin(n, 1/2) <= upto)`.
fn lower_tail(upto: u64, n: u64) -> f64 {
    if n <= EXACT_LIMIT {
        let mut term: u128 = 1;
        let mut sum: u128 = 1;
        for k in 1..=upto as u128 {
            term = term * (n as u128 - k + 1) / k;
            sum += term;
        }
        return sum as f64 / 2f64.powi(n as i32);
    }
    let mut ln_term = -(n as f64) * std::f64::consts::LN_2;
    let mut terms = vec![ln_term];
    for k in 1..=upto {
        ln_term += ((n - k + 1) as f64).ln() - (k as f64).ln();
        terms.push(ln_term);
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m.exp() * terms.iter().map(|t| (t - m).exp()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionForm {
    Affirmative,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effective {
    Affirm,
    Deny,
}

impl Effective {
    pub fn of(form: QuestionForm, raw: Answer) -> Self {
        match (form, raw) {
            (QuestionForm::Affirmative, Answer::Yes) | (QuestionForm::Negative, Answer::No) => {
                Effective::Affirm
            }
            _ => Effective::Deny,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub form: QuestionForm,
    pub raw: Answer,
    pub effective: Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub accept_threshold: f64,
    pub discretion_floor: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            accept_threshold: 0.91,
            discretion_floor: 0.746,
        }
    }
}

/// Where a confidence value falls under a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Accept,
    Discretion,
    WeakDiscretion,
    Reject,
}

impl Policy {
    pub fn band(&self, c: f64) -> Band {
        if c >= self.accept_threshold {
            Band::Accept
        } else if c >= self.discretion_floor {
            Band::Discretion
        } else if c >= 0.5 {
            Band::WeakDiscretion
        } else {
            Band::Reject
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    /// The caregiver decides. `weak` marks confidence below the discretion floor.
    CaregiverDiscretion { weak: bool },
    Reject,
    /// More rounds planned; `settled` is set when every completion lands in one band.
    Continue { settled: Option<Band> },
}

impl Verdict {
    pub fn from_band(band: Band) -> Self {
        match band {
            Band::Accept => Verdict::Accept,
            Band::Discretion => Verdict::CaregiverDiscretion { weak: false },
            Band::WeakDiscretion => Verdict::CaregiverDiscretion { weak: true },
            Band::Reject => Verdict::Reject,
        }
    }

    /// Whether the caregiver may accept the word at this point.
    pub fn allows_accept(&self) -> bool {
        matches!(self, Verdict::Accept | Verdict::CaregiverDiscretion { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::CaregiverDiscretion { weak: false } => f.write_str("caregiver discretion"),
            Verdict::CaregiverDiscretion { weak: true } => f.write_str("caregiver discretion (weak)"),
            Verdict::Reject => f.write_str("reject"),
            Verdict::Continue { .. } => f.write_str("continue"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmationLedger {
    pub word: String,
    pub rounds: Vec<Round>,
    pub planned_rounds: usize,
}

impl ConfirmationLedger {
    pub fn new(word: impl Into<String>) -> Self {
        Self::with_rounds(word, DEFAULT_PLANNED_ROUNDS)
    }

    pub fn with_rounds(word: impl Into<String>, planned_rounds: usize) -> Self {
        ConfirmationLedger {
            word: word.into(),
            rounds: Vec::new(),
            planned_rounds,
        }
    }

    /// Even rounds are affirmative, odd rounds negative.
    pub fn next_form(&self) -> QuestionForm {
        if self.rounds.len() % 2 == 0 {
            QuestionForm::Affirmative
        } else {
            QuestionForm::Negative
        }
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() >= self.planned_rounds
    }

    pub fn record(&mut self, form: QuestionForm, raw: Answer) -> Result<Effective> {
        if self.is_complete() {
            return Err(Error::Protocol(format!(
                "all {} confirmation rounds for {:?} are already recorded",
                self.planned_rounds, self.word
            )));
        }
        if form != self.next_form() {
            return Err(Error::Protocol(format!(
                "round {} expects the {:?} form",
                self.rounds.len() + 1,
                self.next_form()
            )));
        }
        let effective = Effective::of(form, raw);
        self.rounds.push(Round { form, raw, effective });
        Ok(effective)
    }

    /// Records a raw answer to the question of the next slot.
    pub fn record_answer(&mut self, raw: Answer) -> Result<Effective> {
        self.record(self.next_form(), raw)
    }

    /// Adds one more affirmative/negative pair to a finished ledger.
    pub fn extend_pair(&mut self) {
        self.planned_rounds = self.rounds.len() + 2 - self.rounds.len() % 2;
    }

    pub fn counts(&self) -> (u64, u64) {
        let s = self.rounds.iter().filter(|r| r.effective == Effective::Affirm).count() as u64;
        (s, self.rounds.len() as u64 - s)
    }

    pub fn confidence(&self) -> f64 {
        let (s, f) = self.counts();
        confidence(s, f)
    }

    pub fn verdict(&self, policy: &Policy) -> Verdict {
        let (s, f) = self.counts();
        if self.is_complete() {
            return Verdict::from_band(policy.band(confidence(s, f)));
        }
        let remaining = (self.planned_rounds - self.rounds.len()) as u64;
        let first = policy.band(confidence(s, f + remaining));
        let settled = (1..=remaining)
            .all(|a| policy.band(confidence(s + a, f + remaining - a)) == first)
            .then_some(first);
        Verdict::Continue { settled }
    }

    /// Text for the caregiver to read out for the next round.
    pub fn next_question(&self) -> String {
        match self.next_form() {
            QuestionForm::Affirmative => format!("Is your word \"{}\"?", self.word),
            QuestionForm::Negative => format!("Is your word something other than \"{}\"?", self.word),
        }
    }

    pub fn summary(&self, policy: &Policy) -> LedgerSummary {
        let (affirm, deny) = self.counts();
        LedgerSummary {
            word: self.word.clone(),
            rounds: self.rounds.clone(),
            planned_rounds: self.planned_rounds,
            affirm,
            deny,
            confidence: self.confidence(),
            verdict: self.verdict(policy),
        }
    }
}

/// Serialized view of a ledger with its derived values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub word: String,
    pub rounds: Vec<Round>,
    pub planned_rounds: usize,
    pub affirm: u64,
    pub deny: u64,
    pub confidence: f64,
    pub verdict: Verdict,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite Simpson integration of the Beta(s+1, f+1) density over (1/2, 1].
    fn beta_tail_oracle(s: u64, f: u64) -> f64 {
        let density = |x: f64| x.powi(s as i32) * (1.0 - x).powi(f as i32);
        let simpson = |a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut acc = density(a) + density(b);
            for i in 1..n {
                acc += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        let n = 20_000;
        simpson(0.5, 1.0, n) / simpson(0.0, 1.0, 2 * n)
    }

    #[test]
    fn reported_values() {
        assert_eq!(confidence(7, 1), 0.98046875);
        assert_eq!(confidence(6, 2), 0.91015625);
        assert_eq!(confidence(5, 3), 0.74609375);
        assert_eq!(confidence(3, 1), 0.8125);
        assert_eq!(confidence(0, 0), 0.5);
    }

    #[test]
    fn matches_integration_oracle() {
        for s in 0..=12u64 {
            for f in 0..=12 - s {
                let got = confidence(s, f);
                let want = beta_tail_oracle(s, f);
                assert!((got - want).abs() < 1e-9, "({s},{f}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn log_space_branch_is_continuous_with_exact_branch() {
        // n = 126 exact vs the log-space formula evaluated at the same point.
        let exact = 1.0 - confidence(70, 55);
        let n = 126u64;
        let mut ln_term = -(n as f64) * std::f64::consts::LN_2;
        let mut sum = ln_term.exp();
        for k in 1..=55u64 {
            ln_term += ((n - k + 1) as f64).ln() - (k as f64).ln();
            sum += ln_term.exp();
        }
        assert!((exact - sum).abs() < 1e-12);
        let big = confidence(300, 200);
        assert!(big > 0.9999 && big < 1.0);
        assert!((confidence(200, 300) + big - 1.0).abs() < 1e-12);
    }

    #[test]
    fn effective_answers() {
        assert_eq!(Effective::of(QuestionForm::Negative, Answer::No), Effective::Affirm);
        assert_eq!(Effective::of(QuestionForm::Affirmative, Answer::Yes), Effective::Affirm);
        assert_eq!(Effective::of(QuestionForm::Affirmative, Answer::No), Effective::Deny);
        assert_eq!(Effective::of(QuestionForm::Negative, Answer::Yes), Effective::Deny);
    }

    #[test]
    fn forms_must_alternate() {
        let mut l = ConfirmationLedger::new("medaka");
        assert!(matches!(l.record(QuestionForm::Negative, Answer::No), Err(Error::Protocol(_))));
        l.record(QuestionForm::Affirmative, Answer::Yes).unwrap();
        assert!(matches!(l.record(QuestionForm::Affirmative, Answer::Yes), Err(Error::Protocol(_))));
        l.record(QuestionForm::Negative, Answer::No).unwrap();
        assert_eq!(l.counts(), (2, 0));
    }

    fn ledger(word: &str, planned: usize, effective: &[bool]) -> ConfirmationLedger {
        let mut l = ConfirmationLedger::with_rounds(word, planned);
        for &affirm in effective {
            let raw = match (l.next_form(), affirm) {
                (QuestionForm::Affirmative, true) | (QuestionForm::Negative, false) => Answer::Yes,
                _ => Answer::No,
            };
            l.record_answer(raw).unwrap();
        }
        l
    }

    #[test]
    fn verdicts_for_reported_sessions() {
        let p = Policy::default();
        let six = ledger("medaka", 8, &[true, true, false, true, true, false, true, true]);
        assert_eq!(six.verdict(&p), Verdict::Accept);
        let five = ledger("rekishi", 8, &[true, false, true, true, false, true, false, true]);
        assert_eq!(five.verdict(&p), Verdict::CaregiverDiscretion { weak: false });
        let short = ledger("fuanntei", 4, &[true, true, false, true]);
        assert_eq!(short.verdict(&p), Verdict::CaregiverDiscretion { weak: false });
        let even = ledger("arigatai", 4, &[true, false, false, true]);
        assert_eq!(even.verdict(&p), Verdict::CaregiverDiscretion { weak: true });
        let low = ledger("x", 4, &[false, false, true, false]);
        assert_eq!(low.verdict(&p), Verdict::Reject);
    }

    #[test]
    fn full_ledger_rejects_more_rounds() {
        let mut l = ledger("hato", 2, &[true, true]);
        assert!(matches!(l.record_answer(Answer::Yes), Err(Error::Protocol(_))));
        l.extend_pair();
        assert_eq!(l.planned_rounds, 4);
        assert_eq!(l.next_form(), QuestionForm::Affirmative);
        l.record_answer(Answer::Yes).unwrap();
    }

    #[test]
    fn continue_hint_only_when_settled() {
        let p = Policy::default();
        let early = ledger("w", 8, &[true]);
        assert_eq!(early.verdict(&p), Verdict::Continue { settled: None });
        // 7 affirm of 7: even a final deny leaves 0.98.
        let sure = ledger("w", 8, &[true; 7]);
        assert_eq!(sure.verdict(&p), Verdict::Continue { settled: Some(Band::Accept) });
        let hopeless = ledger("w", 8, &[false; 6]);
        assert_eq!(hopeless.verdict(&p), Verdict::Continue { settled: Some(Band::Reject) });
    }

    #[test]
    fn questions_alternate() {
        let mut l = ConfirmationLedger::new("neko");
        assert_eq!(l.next_question(), "Is your word \"neko\"?");
        l.record_answer(Answer::Yes).unwrap();
        assert!(l.next_question().contains("other than"));
    }

    #[test]
    fn summary_serializes() {
        let l = ledger("medaka", 8, &[true, true, false, true, true, false, true, true]);
        let json = serde_json::to_value(l.summary(&Policy::default())).unwrap();
        assert_eq!(json["confidence"], 0.91015625);
        assert_eq!(json["verdict"]["verdict"], "accept");
        assert_eq!(json["affirm"], 6);
    }

    proptest! {
        #[test]
        fn complement_symmetry(s in 0u64..60, f in 0u64..60) {
            prop_assert_eq!(confidence(s, f) + confidence(f, s), 1.0);
        }

        #[test]
        fn monotone_in_counts(s in 0u64..40, f in 0u64..40) {
            prop_assert!(confidence(s + 1, f) > confidence(s, f));
            prop_assert!(confidence(s, f + 1) < confidence(s, f));
        }

        #[test]
        fn never_accepts_below_threshold(bits in prop::collection::vec(any::<bool>(), 0..=8), planned in 1usize..=8) {
            let bits = &bits[..bits.len().min(planned)];
            let l = ledger("w", planned, bits);
            let v = l.verdict(&Policy::default());
            if v == Verdict::Accept {
                prop_assert!(l.confidence() >= 0.91);
            }
        }
    }
}
