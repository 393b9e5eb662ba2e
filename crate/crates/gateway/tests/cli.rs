use std::fs;
use std::path::Path;

use clap::Parser;
use wordcomm_core::codec::Scheme;
use wordcomm_core::session::read_log;
use wordcomm_gateway::cli::{run, Cli};

fn wordcomm(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("wordcomm").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(cli.command, &mut out).map_err(|e| e.to_string())?;
    Ok(String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn confidence_prints_value_and_band() {
    assert_eq!(wordcomm(&["confidence", "7", "1"]).unwrap(), "0.98046875\taccept\n");
    assert_eq!(wordcomm(&["confidence", "1", "1"]).unwrap(), "0.5\tweak_discretion\n");
    assert!(wordcomm(&["confidence", "x", "1"]).is_err());
}

#[test]
fn lexicon_query_and_neighbors() {
    let out = wordcomm(&["lexicon", "query", "E,A,A"]).unwrap();
    assert!(out.lines().any(|l| l.split('\t').nth(1) == Some("medaka")), "{out}");
    let out = wordcomm(&["lexicon", "neighbors", "E A E"]).unwrap();
    assert!(out.lines().any(|l| l.starts_with("E,A,A\t")), "{out}");
    let json: serde_json::Value = serde_json::from_str(&wordcomm(&["lexicon", "query", "--json", "E,I,A"]).unwrap()).unwrap();
    assert!(json.as_array().unwrap().iter().any(|e| e["reading"] == "geisha"));
    assert!(wordcomm(&["lexicon", "query", "E,Q"]).is_err());
}

#[test]
fn custom_lexicon_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("mini.tsv");
    fs::write(&tsv, "# mini\n猫\tneko\tcat\t2\n目高\tmedaka\tkillifish\t1\n").unwrap();
    let out = wordcomm(&["lexicon", "query", "--file", p(&tsv), "E,O,END"]).unwrap();
    assert_eq!(out, "猫\tneko\tcat\t2\n");
}

#[test]
fn simulate_calibrate_classify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let report = dir.path().join("report.json");
    let msg = wordcomm(&["calibrate", "--simulate", "--seed", "5", "-o", p(&model), "--report", p(&report)]).unwrap();
    assert!(msg.starts_with("model m"), "{msg}");
    assert!(fs::read_to_string(&report).unwrap().contains("selections"));

    let mut trials = Vec::new();
    for (answer, index) in [("yes", "200"), ("no", "201")] {
        let path = dir.path().join(format!("{answer}.csv"));
        wordcomm(&["simulate", "trial", "--answer", answer, "--seed", "5", "--index", index, "-o", p(&path)]).unwrap();
        trials.push(path);
    }
    let out = wordcomm(&["classify", "--model", p(&model), p(&trials[0]), p(&trials[1])]).unwrap();
    let answers: Vec<String> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["answer"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(answers, ["yes", "no"]);
}

#[test]
fn calibrate_requires_exactly_one_source() {
    assert!(wordcomm(&["calibrate"]).is_err());
    assert!(wordcomm(&["calibrate", "some-dir", "--simulate"]).is_err());
}

#[test]
fn session_run_script_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let scheme = Scheme::japanese();
    let mut script = String::from("note theme: animals\n");
    for (i, sym) in ["E", "A", "A"].iter().enumerate() {
        for a in scheme.encode(i + 1, &scheme.symbol(sym).unwrap()).unwrap() {
            script.push_str(&format!("answer {}\n", serde_json::to_value(a).unwrap().as_str().unwrap()));
        }
    }
    script.push_str("query\nask medaka 4\n");
    // Alternating forms: affirmative asks expect yes, negative asks expect no.
    script.push_str("answer yes\nanswer no\nanswer yes\nanswer no\n");
    script.push_str("resolve accept carer agreed # trailing comment\n");
    let script_path = dir.path().join("script.txt");
    fs::write(&script_path, script).unwrap();
    let log = dir.path().join("log.jsonl");
    let out = wordcomm(&["session", "run", "--script", p(&script_path), "--subject", "t", "-o", p(&log)]).unwrap();
    assert_eq!(out.trim(), "accepted");
    let (header, events) = read_log(std::io::BufReader::new(fs::File::open(&log).unwrap())).unwrap();
    assert_eq!(header.subject, "t");
    assert!(!events.is_empty());

    let state: serde_json::Value = serde_json::from_str(&wordcomm(&["session", "replay", p(&log)]).unwrap()).unwrap();
    assert_eq!(state["phase"]["phase"], "accepted");
}

#[test]
fn session_script_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let script_path = dir.path().join("bad.txt");
    fs::write(&script_path, "answer yes\nresolve accept\n").unwrap();
    let err = wordcomm(&["session", "run", "--script", p(&script_path)]).unwrap_err();
    assert!(err.starts_with("line 2:"), "{err}");
    fs::write(&script_path, "dance\n").unwrap();
    let err = wordcomm(&["session", "run", "--script", p(&script_path)]).unwrap_err();
    assert!(err.contains("unknown operation"), "{err}");
}

#[test]
fn simulate_session_writes_a_replayable_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("s.jsonl");
    let args = ["simulate", "session", "--word", "medaka", "--accuracy", "1.0", "--seed", "3", "-o", p(&log)];
    let out = wordcomm(&args).unwrap();
    assert!(out.starts_with("accepted medaka"), "{out}");
    let first = fs::read(&log).unwrap();
    wordcomm(&args).unwrap();
    assert_eq!(fs::read(&log).unwrap(), first, "same seed, same log");
    let state: serde_json::Value = serde_json::from_str(&wordcomm(&["session", "replay", p(&log)]).unwrap()).unwrap();
    assert_eq!(state["phase"]["phase"], "accepted");
}

#[test]
fn calibrate_from_bundle_directory() {
    use wordcomm_core::hemodynamics::write_trial_csv;
    use wordcomm_core::simulator::{run_calibration, PatientProfile};

    let dir = tempfile::tempdir().unwrap();
    let mut manifest = serde_json::Map::new();
    for (yes, no) in run_calibration(&PatientProfile::easy("", 8)) {
        for (t, label) in [(yes, "yes"), (no, "no")] {
            let mut f = fs::File::create(dir.path().join(format!("{}.csv", t.trial_id))).unwrap();
            write_trial_csv(&t, &mut f).unwrap();
            manifest.insert(t.trial_id.clone(), label.into());
        }
    }
    fs::write(dir.path().join("manifest.json"), serde_json::to_vec(&manifest).unwrap()).unwrap();
    let model: serde_json::Value = serde_json::from_str(&wordcomm(&["calibrate", p(dir.path())]).unwrap()).unwrap();
    assert!(model["svm"].is_object(), "{model}");

    manifest.remove("cal-0-yes");
    fs::write(dir.path().join("manifest.json"), serde_json::to_vec(&manifest).unwrap()).unwrap();
    assert!(wordcomm(&["calibrate", p(dir.path())]).unwrap_err().contains("4 yes"));
}
