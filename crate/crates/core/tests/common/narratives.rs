//! The five subjects' word arcs, driven through the orchestrator with
//! directly entered answers. The golden logs under `data/fixtures` are the
//! output of these builders.

use std::sync::Arc;

use wordcomm_core::codec::Scheme;
use wordcomm_core::confirmation::QuestionForm;
use wordcomm_core::lexicon::Lexicon;
use wordcomm_core::session::{Phase, Resolution, Session, SessionHeader};
use wordcomm_core::Answer;

pub struct Narrative {
    pub subject: &'static str,
    pub file: &'static str,
    pub word: &'static str,
    pub final_counts: (u64, u64),
    pub build: fn(&Arc<Lexicon>) -> Session,
}

pub const NARRATIVES: [Narrative; 5] = [
    Narrative {
        subject: "A",
        file: "subject-a.jsonl",
        word: "medaka",
        final_counts: (6, 2),
        build: subject_a,
    },
    Narrative {
        subject: "B",
        file: "subject-b.jsonl",
        word: "fuanntei",
        final_counts: (3, 1),
        build: subject_b,
    },
    Narrative {
        subject: "C",
        file: "subject-c.jsonl",
        word: "rekishi",
        final_counts: (5, 3),
        build: subject_c,
    },
    Narrative {
        subject: "D",
        file: "subject-d.jsonl",
        word: "hikouki",
        final_counts: (7, 1),
        build: subject_d,
    },
    Narrative {
        subject: "E",
        file: "subject-e.jsonl",
        word: "arigatai",
        final_counts: (5, 3),
        build: subject_e,
    },
];

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures")
}

pub fn japanese_lexicon() -> Arc<Lexicon> {
    Arc::new(Lexicon::bundled("japanese").expect("bundled lexicon"))
}

fn open(subject: &str, date: &str, lexicon: &Arc<Lexicon>) -> Session {
    let mut header = SessionHeader::new(subject, "japanese-vowel", "japanese");
    header.date = Some(date.to_string());
    Session::without_model(header, Scheme::japanese(), lexicon.clone()).expect("session")
}

/// Answers the questions for three symbols.
fn say(s: &mut Session, symbols: [&str; 3]) {
    for (i, sym) in symbols.iter().enumerate() {
        let symbol = s.scheme().symbol(sym).expect("symbol");
        let path = s.scheme().encode(i + 1, &symbol).expect("path");
        for a in path {
            s.submit_answer(a).expect("answer");
        }
    }
}

/// Runs a ledger; `affirm[k]` is the patient's intention in round k.
fn confirm(s: &mut Session, word: &str, affirm: &[bool]) {
    s.ask_candidate(word, Some(affirm.len())).expect("ask");
    for &yes in affirm {
        let form = match &s.state().phase {
            Phase::Confirming { ledger } => ledger.next_form(),
            other => panic!("not confirming: {other:?}"),
        };
        let raw = match (form, yes) {
            (QuestionForm::Affirmative, true) | (QuestionForm::Negative, false) => Answer::Yes,
            _ => Answer::No,
        };
        s.submit_answer(raw).expect("round");
    }
}

const T: bool = true;
const F: bool = false;

pub fn subject_a(lex: &Arc<Lexicon>) -> Session {
    let mut s = open("A", "day-1", lex);
    s.note("theme: favorite animal").unwrap();
    say(&mut s, ["O", "O", "END"]);
    s.consult().unwrap();
    s.note("no appropriate candidate words").unwrap();

    s.new_day(Some("day-2")).unwrap();
    s.note("hato, neko, hito and other chosen among one-vowel variants; group (hato or neko) affirmed 3 of 4")
        .unwrap();
    s.substitute(1, "E").unwrap();
    s.consult().unwrap();
    confirm(&mut s, "neko", &[F, F, T, F]);
    s.resolve(Resolution::Reject, Some("answered no for both groups afterwards")).unwrap();

    s.new_day(Some("day-3")).unwrap();
    s.restart().unwrap();
    say(&mut s, ["E", "A", "A"]);
    s.consult().unwrap();
    confirm(&mut s, "medaka", &[T, F, T, F]);
    s.note("could not decide").unwrap();

    s.new_day(Some("day-4")).unwrap();
    s.restart().unwrap();
    say(&mut s, ["E", "A", "E"]);
    s.consult().unwrap();
    s.note("E,A,E differs by one vowel from E,A,A; asked if E,A,A was right: yes").unwrap();
    s.substitute(3, "A").unwrap();
    s.consult().unwrap();
    confirm(&mut s, "medaka", &[T, T]);
    s.note("probably right").unwrap();

    s.new_day(Some("day-5")).unwrap();
    confirm(&mut s, "medaka", &[T, T, T, T, F, T, T, F]);
    s.resolve(Resolution::Accept, Some("wife agreed")).unwrap();
    s
}

pub fn subject_b(lex: &Arc<Lexicon>) -> Session {
    let mut s = open("B", "day-1", lex);
    s.note("question: how do you like the word communication system?").unwrap();
    say(&mut s, ["U", "A", "NN"]);
    s.consult().unwrap();
    confirm(&mut s, "fumann", &[F]);
    s.resolve(Resolution::Reject, None).unwrap();
    confirm(&mut s, "fuann", &[T]);

    s.new_day(Some("day-2")).unwrap();
    s.note("skeleton confirmed 3 of 4; fuanntei added as more suitable than fuann").unwrap();
    confirm(&mut s, "fuanntei", &[T, T]);

    s.new_day(Some("day-3")).unwrap();
    confirm(&mut s, "fuanntei", &[T, T, F, T]);
    s.resolve(Resolution::Accept, Some("aunt accepted")).unwrap();
    s
}

pub fn subject_c(lex: &Arc<Lexicon>) -> Session {
    let mut s = open("C", "day-1", lex);
    s.note("question: favorite genre for reading").unwrap();
    say(&mut s, ["I", "E", "NN"]);
    s.consult().unwrap();
    confirm(&mut s, "shizenn", &[F]);
    s.resolve(Resolution::Reject, None).unwrap();

    s.new_day(Some("day-2")).unwrap();
    s.restart().unwrap();
    say(&mut s, ["O", "A", "END"]);
    s.consult().unwrap();
    s.note("rohma looked up for O,A,END").unwrap();
    confirm(&mut s, "rohma", &[F, F]);
    s.resolve(Resolution::Reject, None).unwrap();

    s.new_day(Some("day-3")).unwrap();
    confirm(&mut s, "rohma", &[F, F, T, F, F, T, F, F]);
    s.resolve(Resolution::Reject, None).unwrap();
    s.restart().unwrap();
    say(&mut s, ["E", "I", "A"]);
    s.consult().unwrap();
    confirm(&mut s, "eiga", &[F]);
    s.resolve(Resolution::Reject, None).unwrap();

    s.new_day(Some("day-4")).unwrap();
    s.substitute(3, "I").unwrap();
    s.consult().unwrap();
    confirm(&mut s, "rekishi", &[T, T, F, T, F, T, F, T]);
    s.resolve(Resolution::Accept, Some("mother accepted")).unwrap();
    s
}

pub fn subject_d(lex: &Arc<Lexicon>) -> Session {
    let mut s = open("D", "day-1", lex);
    s.note("question: transportation to return to the hometown").unwrap();
    say(&mut s, ["I", "I", "I"]);
    s.consult().unwrap();
    s.note("no appropriate words").unwrap();

    s.new_day(Some("day-2")).unwrap();
    s.restart().unwrap();
    say(&mut s, ["O", "O", "U"]);
    s.consult().unwrap();
    s.substitute(1, "I").unwrap();
    s.consult().unwrap();
    s.note("hikouki and jidousha found").unwrap();

    s.new_day(Some("day-3")).unwrap();
    confirm(&mut s, "hikouki", &[T, T, T, T, T, F, T, T]);
    s.resolve(Resolution::Accept, Some("son satisfied")).unwrap();
    s
}

pub fn subject_e(lex: &Arc<Lexicon>) -> Session {
    let mut s = open("E", "day-1", lex);
    s.note("question: how do you like the word communication system?").unwrap();
    say(&mut s, ["U", "A", "I"]);
    s.consult().unwrap();
    s.note("no appropriate words").unwrap();

    s.new_day(Some("day-2")).unwrap();
    s.note("U,A,I checked: no 3 of 4").unwrap();
    s.restart().unwrap();
    say(&mut s, ["O", "U", "END"]);
    s.consult().unwrap();
    s.note("no appropriate words").unwrap();

    s.new_day(Some("day-3")).unwrap();
    s.restart().unwrap();
    say(&mut s, ["A", "I", "A"]);
    s.consult().unwrap();
    confirm(&mut s, "arigatai", &[T, F, T, F]);

    s.new_day(Some("day-4")).unwrap();
    confirm(&mut s, "arigatai", &[T, T, F, T, F, T, F, T]);
    s.resolve(Resolution::Accept, Some("family glad")).unwrap();
    s
}
