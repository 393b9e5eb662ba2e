use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::confirmation::Band;
use crate::lexicon::LexiconEntry;

fn lexicon() -> Arc<Lexicon> {
    let ja = Scheme::japanese();
    let words = [
        ("medaka", 10),
        ("fumann", 20),
        ("fuann", 15),
        ("hikouki", 30),
        ("jidousha", 31),
        ("kinou", 5),
        ("neko", 3),
        ("rekishi", 40),
    ];
    let entries = words
        .iter()
        .map(|(w, r)| LexiconEntry::new(w, w, None, Some(*r)))
        .collect();
    Arc::new(Lexicon::build("test", &ja, entries))
}

fn session() -> Session {
    Session::without_model(SessionHeader::new("t", "japanese-vowel", "test"), Scheme::japanese(), lexicon()).unwrap()
}

fn answers(s: &mut Session, path: &str) {
    for c in path.chars() {
        s.submit_answer(c.to_string().parse().unwrap()).unwrap();
    }
}

fn to_candidates(s: &mut Session, path: &str) {
    answers(s, path);
    s.consult().unwrap();
}

fn rounds(s: &mut Session, raw: &str) {
    answers(s, raw);
}

#[test]
fn start_requires_model() {
    let err = Session::start(
        SessionHeader::new("t", "japanese-vowel", "test"),
        Scheme::japanese(),
        lexicon(),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::MissingModel));
}

#[test]
fn header_scheme_must_match() {
    let h = SessionHeader::new("t", "english-6col", "test");
    assert!(Session::without_model(h, Scheme::japanese(), lexicon()).is_err());
}

#[test]
fn first_symbol_advances() {
    let mut s = session();
    let out = s.submit_answer(Answer::No).unwrap();
    assert_eq!(out.symbol, None);
    let out = s.submit_answer(Answer::Yes).unwrap();
    assert_eq!(out.symbol.unwrap().as_str(), "E");
    assert_eq!(
        s.state().phase,
        Phase::AcquiringSymbol {
            position: 2,
            partial: vec![]
        }
    );
    assert_eq!(s.state().question_budget_used, 2);
    assert_eq!(s.state().elapsed_s, 2 * SECONDS_PER_QUESTION);
}

#[test]
fn three_symbols_then_query() {
    let mut s = session();
    answers(&mut s, "NYYYYY");
    assert_eq!(s.state().phase, Phase::Querying);
    assert_eq!(s.state().current_skeleton().unwrap().to_string(), "E,A,A");
    let got = s.consult().unwrap();
    assert_eq!(got[0].reading, "medaka");
    assert_eq!(s.state().phase, Phase::PresentingCandidate);
    assert_eq!(s.candidate_entries()[0].reading, "medaka");
}

#[test]
fn prompts_follow_the_tree() {
    let mut s = session();
    match s.prompt().unwrap() {
        Prompt::Symbol { position, subset, .. } => {
            assert_eq!(position, 1);
            assert_eq!(subset.iter().map(|x| x.as_str()).collect::<Vec<_>>(), ["A", "I", "U"]);
        }
        other => panic!("{other:?}"),
    }
    to_candidates(&mut s, "NYYYYY");
    assert!(s.prompt().is_none());
    s.ask_candidate("medaka", None).unwrap();
    match s.prompt().unwrap() {
        Prompt::Confirm { form, text, .. } => {
            assert_eq!(form, QuestionForm::Affirmative);
            assert!(text.contains("medaka"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_query_offers_substitution() {
    let mut s = session();
    // O,O,END
    to_candidates(&mut s, "NNNNYNNN");
    assert_eq!(s.state().phase, Phase::SubstitutionBrowsing);
    assert!(s.state().candidates.is_empty());
    assert!(s.state().neighbors.iter().any(|n| n.skeleton.to_string() == "E,O,END"));
    s.substitute(1, "E").unwrap();
    assert_eq!(s.state().phase, Phase::Querying);
    assert_eq!(s.consult().unwrap()[0].reading, "neko");
}

#[test]
fn uann_candidates() {
    let mut s = session();
    to_candidates(&mut s, "YNNYYNYN");
    let readings: Vec<String> = s.state().candidates.clone();
    assert_eq!(readings, ["fuann", "fumann"]);
}

#[test]
fn substitute_keeps_history() {
    let mut s = session();
    // O,O,U
    to_candidates(&mut s, "NNNNYYNN");
    s.substitute(1, "I").unwrap();
    let got: Vec<String> = s.consult().unwrap().into_iter().map(|e| e.reading).collect();
    assert_eq!(got, ["kinou", "hikouki", "jidousha"]);
    let from = s.events().iter().find_map(|e| match &e.kind {
        EventKind::Substitute { from, to, .. } => Some((from.to_string(), to.to_string())),
        _ => None,
    });
    assert_eq!(from, Some(("O,O,U".into(), "I,O,U".into())));
    assert!(s.substitute(1, "I").is_err());
    assert!(s.substitute(4, "A").is_err());
}

#[test]
fn accept_after_six_of_eight() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    s.ask_candidate("medaka", None).unwrap();
    // Affirmative slots answer yes, negative slots answer no, except rounds 5 and 8.
    rounds(&mut s, "YNYNNNYY");
    let Phase::Confirming { ledger } = &s.state().phase else {
        panic!()
    };
    assert_eq!(ledger.counts(), (6, 2));
    assert_eq!(ledger.verdict(&Policy::default()), Verdict::Accept);
    assert!(s.submit_answer(Answer::Yes).is_err());
    s.resolve(Resolution::Accept, None).unwrap();
    assert_eq!(s.state().phase, Phase::Accepted { word: "medaka".into() });
    assert!(matches!(s.submit_answer(Answer::Yes), Err(Error::Phase { .. })));
    assert!(s.restart().is_err());
}

#[test]
fn accept_refused_in_reject_band() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    s.ask_candidate("medaka", Some(4)).unwrap();
    rounds(&mut s, "NYNY");
    let before = s.state().clone();
    let err = s.resolve(Resolution::Accept, None).unwrap_err();
    assert!(matches!(err, Error::AcceptRefused(_)));
    assert_eq!(s.state(), &before);
    s.resolve(Resolution::Reject, None).unwrap();
    assert_eq!(s.state().phase, Phase::PresentingCandidate);
    assert_eq!(s.state().rejected, ["medaka"]);
}

#[test]
fn incomplete_ledger_cannot_be_accepted() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    s.ask_candidate("medaka", None).unwrap();
    rounds(&mut s, "YNYNYN");
    assert!(matches!(s.resolve(Resolution::Accept, None), Err(Error::AcceptRefused(_))));
    assert!(s.resolve(Resolution::Continue, None).is_err());
}

#[test]
fn discretion_can_continue_then_accept() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    s.ask_candidate("medaka", Some(4)).unwrap();
    // 2 of 4: weak discretion.
    rounds(&mut s, "YYYY");
    let Phase::Confirming { ledger } = &s.state().phase else {
        panic!()
    };
    assert_eq!(ledger.verdict(&Policy::default()), Verdict::CaregiverDiscretion { weak: true });
    s.resolve(Resolution::Continue, Some("ask again")).unwrap();
    rounds(&mut s, "YN");
    let Phase::Confirming { ledger } = &s.state().phase else {
        panic!()
    };
    assert_eq!((ledger.counts(), ledger.planned_rounds), ((4, 2), 6));
    assert_eq!(Policy::default().band(ledger.confidence()), Band::Discretion);
    s.resolve(Resolution::Accept, Some("caregiver decided")).unwrap();
    assert!(matches!(s.state().phase, Phase::Accepted { .. }));
}

#[test]
fn budget_refuses_seventeenth_question() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    s.ask_candidate("medaka", Some(20)).unwrap();
    rounds(&mut s, "YNYNYNYNYN");
    assert_eq!(s.state().question_budget_used, 16);
    assert!(s
        .events()
        .iter()
        .any(|e| matches!(e.kind, EventKind::LimitReached { .. })));
    let before = s.state().clone();
    assert!(matches!(s.submit_answer(Answer::Yes), Err(Error::SessionLimit(_))));
    assert_eq!(s.state(), &before);
    s.new_day(None).unwrap();
    assert_eq!(s.state().question_budget_used, 0);
    assert_eq!(s.state().phase, Phase::PresentingCandidate);
}

#[test]
fn time_limit_applies() {
    let mut h = SessionHeader::new("t", "japanese-vowel", "test");
    h.time_limit_s = 150;
    let mut s = Session::without_model(h, Scheme::japanese(), lexicon()).unwrap();
    answers(&mut s, "NY");
    assert!(matches!(s.submit_answer(Answer::Yes), Err(Error::SessionLimit(_))));
    assert_eq!(s.state().elapsed_s, 120);
}

#[test]
fn new_day_drops_partial_answers() {
    let mut s = session();
    answers(&mut s, "NYY");
    s.new_day(Some("d2")).unwrap();
    assert_eq!(
        s.state().phase,
        Phase::AcquiringSymbol {
            position: 2,
            partial: vec![]
        }
    );
    assert_eq!(s.state().day, 2);
    assert_eq!(s.state().skeleton.len(), 1);
}

#[test]
fn spoiled_symbol_marks_answers() {
    let mut s = session();
    s.submit_answer(Answer::Yes).unwrap();
    s.flag_spoiled().unwrap();
    let out = s.submit_answer(Answer::No).unwrap();
    assert!(out.low_trust);
    let out = s.submit_answer(Answer::No).unwrap();
    assert!(out.low_trust);
    assert_eq!(out.symbol.unwrap().as_str(), "U");
    assert!(s.events().iter().any(|e| matches!(
        e.kind,
        EventKind::SymbolDecoded { low_trust: true, .. }
    )));
    assert!(!s.submit_answer(Answer::Yes).unwrap().low_trust);
}

#[test]
fn restart_clears_skeleton_keeps_history() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    let n = s.events().len();
    s.restart().unwrap();
    assert_eq!(s.state().phase, Phase::acquiring());
    assert!(s.state().skeleton.is_empty());
    assert_eq!(s.events().len(), n + 1);
}

#[test]
fn phase_errors_are_conflicts() {
    let mut s = session();
    let e = s.consult().unwrap_err();
    assert!(e.is_conflict(), "{e}");
    let e = s.ask_candidate("x", None).unwrap_err();
    assert!(e.is_conflict());
    let e = s.resolve(Resolution::Accept, None).unwrap_err();
    assert!(e.is_conflict());
}

#[test]
fn log_round_trip_and_replay() {
    let mut s = session();
    to_candidates(&mut s, "NYYYYY");
    s.ask_candidate("medaka", None).unwrap();
    rounds(&mut s, "YNYNNNYY");
    s.resolve(Resolution::Accept, Some("ok")).unwrap();
    let mut buf = Vec::new();
    s.write_log(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), s.events().len() + 1);
    let (h, events) = read_log(&buf[..]).unwrap();
    assert_eq!(&h, s.header());
    assert_eq!(events, s.events());
    assert_eq!(&replay(&h, &events).unwrap(), s.state());
    let resumed = Session::resume(h, &events, Scheme::japanese(), lexicon(), None).unwrap();
    assert_eq!(resumed.state(), s.state());
}

#[test]
fn replay_rejects_inconsistent_events() {
    let h = SessionHeader::new("t", "japanese-vowel", "test");
    let bad = SessionEvent {
        seq: 1,
        day: 1,
        elapsed_s: 0,
        kind: EventKind::SymbolDecoded {
            position: 1,
            path: "NY".into(),
            symbol: Symbol::from("E"),
            low_trust: false,
        },
    };
    assert!(replay(&h, &[bad]).is_err());
    assert!(read_log(&b""[..]).is_err());
}

#[derive(Debug, Clone)]
enum Op {
    Answer(bool),
    Consult,
    Ask(usize),
    Resolve(u8),
    Substitute(usize, usize),
    Restart,
    NewDay,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => any::<bool>().prop_map(Op::Answer),
        1 => Just(Op::Consult),
        1 => (0usize..8).prop_map(Op::Ask),
        1 => (0u8..3).prop_map(Op::Resolve),
        1 => (1usize..4, 0usize..7).prop_map(|(p, s)| Op::Substitute(p, s)),
        1 => Just(Op::Restart),
        1 => Just(Op::NewDay),
    ]
}

proptest! {
    #[test]
    fn live_equals_replay(ops in prop::collection::vec(op(), 0..80)) {
        let mut s = session();
        let symbols = ["A", "I", "U", "E", "O", "NN", "END"];
        let mut last_day = 1;
        let mut last_used = 0;
        for o in ops {
            let before = s.state().clone();
            let r = match o {
                Op::Answer(y) => s.submit_answer(if y { Answer::Yes } else { Answer::No }).map(|_| ()),
                Op::Consult => s.consult().map(|_| ()),
                Op::Ask(i) => {
                    let w = s.state().candidates.get(i).cloned().unwrap_or_else(|| "neko".into());
                    s.ask_candidate(&w, Some(4))
                }
                Op::Resolve(k) => s.resolve(
                    [Resolution::Accept, Resolution::Reject, Resolution::Continue][k as usize],
                    None,
                ),
                Op::Substitute(p, k) => s.substitute(p, symbols[k]),
                Op::Restart => s.restart(),
                Op::NewDay => s.new_day(None),
            };
            if r.is_err() {
                prop_assert_eq!(s.state(), &before);
            }
            let st = s.state();
            prop_assert!(st.question_budget_used <= QUESTION_BUDGET);
            prop_assert!(st.elapsed_s <= SESSION_LIMIT_S);
            if st.day == last_day {
                prop_assert!(st.question_budget_used >= last_used);
            }
            last_day = st.day;
            last_used = st.question_budget_used;
            if let Phase::Accepted { .. } = st.phase {
                let accepted = st.history.iter().any(|e| matches!(e.kind, EventKind::Accept { .. }));
                prop_assert!(accepted);
            }
        }
        let replayed = replay(s.header(), s.events()).unwrap();
        prop_assert_eq!(&replayed, s.state());
    }
}
