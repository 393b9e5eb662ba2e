//! Golden session logs for the five subjects.
//!
//! Set `WORDCOMM_BLESS=1` to rewrite the fixtures from the builders.

mod common;

use std::fs;
use std::io::BufReader;

use common::narratives::{fixture_dir, japanese_lexicon, NARRATIVES};
use wordcomm_core::codec::Scheme;
use wordcomm_core::confirmation::Verdict;
use wordcomm_core::session::{read_log, replay, EventKind, Phase, Session};

fn expected_verdict(counts: (u64, u64)) -> Verdict {
    match counts {
        (6, 2) | (7, 1) => Verdict::Accept,
        _ => Verdict::CaregiverDiscretion { weak: false },
    }
}

#[test]
fn builders_match_golden_logs() {
    let lex = japanese_lexicon();
    let bless = std::env::var_os("WORDCOMM_BLESS").is_some();
    for n in &NARRATIVES {
        let session = (n.build)(&lex);
        let mut bytes = Vec::new();
        session.write_log(&mut bytes).unwrap();
        let path = fixture_dir().join(n.file);
        if bless {
            fs::create_dir_all(fixture_dir()).unwrap();
            fs::write(&path, &bytes).unwrap();
        }
        let golden = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(golden == bytes, "subject {} drifted from {}", n.subject, n.file);
    }
}

#[test]
fn golden_logs_replay_to_accepted_words() {
    for n in &NARRATIVES {
        let file = fs::File::open(fixture_dir().join(n.file)).unwrap();
        let (header, events) = read_log(BufReader::new(file)).unwrap();
        let state = replay(&header, &events).unwrap();
        assert_eq!(state.phase, Phase::Accepted { word: n.word.to_string() }, "subject {}", n.subject);
        let accept = events
            .iter()
            .rev()
            .find_map(|e| match &e.kind {
                EventKind::Accept { word, affirm, deny, confidence, verdict, .. } => {
                    Some((word.clone(), (*affirm, *deny), *confidence, *verdict))
                }
                _ => None,
            })
            .expect("accept event");
        assert_eq!(accept.0, n.word);
        assert_eq!(accept.1, n.final_counts, "subject {}", n.subject);
        assert_eq!(accept.3, expected_verdict(n.final_counts), "subject {}", n.subject);
        assert!(state.question_budget_used <= header.question_budget);
    }
}

#[test]
fn golden_logs_resume_into_live_sessions() {
    let lex = japanese_lexicon();
    for n in &NARRATIVES {
        let file = fs::File::open(fixture_dir().join(n.file)).unwrap();
        let (header, events) = read_log(BufReader::new(file)).unwrap();
        let live = Session::resume(header, &events, Scheme::japanese(), lex.clone(), None).unwrap();
        assert_eq!(live.state(), (n.build)(&lex).state());
    }
}

#[test]
fn narratives_span_several_days() {
    let lex = japanese_lexicon();
    let days: Vec<u32> = NARRATIVES.iter().map(|n| (n.build)(&lex).state().day).collect();
    assert_eq!(days, vec![5, 3, 4, 3, 4]);
}
