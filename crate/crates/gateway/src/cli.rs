//! Command-line front end. Every command except `serve` runs offline and
//! writes its result to the given writer.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use wordcomm_core::codec::Scheme;
use wordcomm_core::confirmation::{confidence, Policy};
use wordcomm_core::decision::{calibrate, pairs_from_trials, DecisionModel};
use wordcomm_core::hemodynamics::{derive, load_bundle, load_trial_csv, write_trial_csv};
use wordcomm_core::lexicon::{Lexicon, Skeleton};
use wordcomm_core::session::{read_log, replay, Resolution, Session, SessionHeader};
use wordcomm_core::simulator::{
    autoplay, calibrate_patient, calibration_pairs, generate_trial, run_calibration, AutoplayConfig,
    PatientProfile,
};
use wordcomm_core::Answer;

use crate::store::DATA_DIR_ENV;

pub type CliResult<T = ()> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Parser)]
#[command(name = "wordcomm", version, about = "Yes/no word communication sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Select a model from a bundle of 8 labelled trials.
    Calibrate(CalibrateArgs),
    /// Classify trial CSVs with a saved model.
    Classify(ClassifyArgs),
    #[command(subcommand)]
    Session(SessionCommand),
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Posterior probability that the answer is yes.
    Confidence { affirm: u64, deny: u64 },
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Where models and session logs are kept.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Directory of trial CSVs with a manifest.json of labels.
    pub bundle: Option<PathBuf>,
    /// Calibrate a simulated patient instead.
    #[arg(long, conflicts_with = "bundle")]
    pub simulate: bool,
    #[arg(long, default_value = "easy")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the model JSON here.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Write the full selection report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(required = true)]
    pub trials: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SessionCommand {
    /// Drive a session from a script of caregiver operations.
    Run(SessionRunArgs),
    /// Replay a session log and print the final state.
    Replay { log: PathBuf },
}

#[derive(Debug, Args)]
pub struct SessionRunArgs {
    /// One operation per line: trial PATH | answer yes|no | spoiled | query |
    /// ask WORD [ROUNDS] | resolve accept|reject|continue [NOTE] |
    /// substitute POS SYMBOL | restart | new-day [DATE] | note TEXT | abandon REASON
    #[arg(long)]
    pub script: PathBuf,
    /// Without a model, answers are entered directly.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "japanese-vowel")]
    pub scheme: String,
    #[arg(long, default_value = "cli")]
    pub subject: String,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LexiconCommand {
    /// Candidates for a skeleton, in rank order.
    Query(LexiconArgs),
    /// Skeletons one substitution away that have candidates.
    Neighbors(LexiconArgs),
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    /// Comma- or space-separated, e.g. E,I,A.
    pub skeleton: String,
    #[arg(long, default_value = "japanese-vowel")]
    pub scheme: String,
    /// A lexicon TSV to use instead of the bundled one.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Write one simulated trial as CSV.
    Trial(SimTrialArgs),
    /// Calibrate a simulated patient and autoplay a whole word arc.
    Session(SimSessionArgs),
}

#[derive(Debug, Args)]
pub struct SimTrialArgs {
    #[arg(long)]
    pub answer: Answer,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub index: u64,
    #[arg(long, default_value = "easy")]
    pub preset: String,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimSessionArgs {
    #[arg(long)]
    pub word: String,
    #[arg(long)]
    pub accuracy: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "easy")]
    pub preset: String,
    #[arg(long, default_value = "japanese-vowel")]
    pub scheme: String,
    #[arg(long, default_value_t = 5)]
    pub max_sessions: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn write_or_print(path: Option<&Path>, bytes: &[u8], out: &mut dyn Write) -> CliResult {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn load_model(path: &Path) -> CliResult<DecisionModel> {
    Ok(DecisionModel::from_json(&fs::read_to_string(path)?)?)
}

fn lexicon(scheme: &Scheme, file: Option<&Path>) -> CliResult<Lexicon> {
    Ok(match file {
        Some(p) => Lexicon::load(&p.display().to_string(), scheme, p)?,
        None => Lexicon::bundled_for(scheme)?,
    })
}

/// Runs any command other than `serve`.
pub fn run(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Serve(_) => Err("serve runs in the async entry point".into()),
        Command::Calibrate(a) => calibrate_cmd(a, out),
        Command::Classify(a) => {
            let model = load_model(&a.model)?;
            for path in &a.trials {
                let trial = load_trial_csv(path)?;
                let c = model.classify(&derive(&trial)?)?;
                let line = serde_json::json!({
                    "trial_id": trial.trial_id,
                    "answer": c.answer,
                    "decision_value": c.decision_value,
                    "feature": c.feature,
                });
                writeln!(out, "{line}")?;
            }
            Ok(())
        }
        Command::Session(SessionCommand::Run(a)) => session_run(a, out),
        Command::Session(SessionCommand::Replay { log }) => {
            let (header, events) = read_log(BufReader::new(fs::File::open(log)?))?;
            let state = replay(&header, &events)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&state)?)?;
            Ok(())
        }
        Command::Lexicon(cmd) => lexicon_cmd(cmd, out),
        Command::Confidence { affirm, deny } => {
            let c = confidence(affirm, deny);
            let band = Policy::default().band(c);
            writeln!(out, "{c}\t{}", serde_json::to_value(band)?.as_str().unwrap_or_default())?;
            Ok(())
        }
        Command::Simulate(SimulateCommand::Trial(a)) => {
            let profile = PatientProfile::preset(&a.preset, "", a.seed)?;
            let trial = generate_trial(&profile, a.answer, a.index);
            let mut bytes = Vec::new();
            write_trial_csv(&trial, &mut bytes)?;
            write_or_print(a.output.as_deref(), &bytes, out)
        }
        Command::Simulate(SimulateCommand::Session(a)) => simulate_session(a, out),
    }
}

fn calibrate_cmd(a: CalibrateArgs, out: &mut dyn Write) -> CliResult {
    let pairs = match (&a.bundle, a.simulate) {
        (Some(dir), false) => pairs_from_trials(&load_bundle(dir)?)?,
        (None, true) => {
            let profile = PatientProfile::preset(&a.preset, "", a.seed)?;
            calibration_pairs(&run_calibration(&profile))?
        }
        _ => return Err("give a bundle directory or --simulate".into()),
    };
    let cal = calibrate(&pairs)?;
    let model = cal.model();
    if let Some(p) = &a.report {
        fs::write(p, serde_json::to_vec_pretty(&cal)?)?;
    }
    let active = cal.active();
    match &a.output {
        Some(p) => {
            fs::write(p, model.to_json()?)?;
            writeln!(
                out,
                "model {} channel {} {} {} performance {:.3}",
                model.id(),
                active.channel,
                active.feature_set,
                active.window,
                active.performance
            )?;
        }
        None => writeln!(out, "{}", model.to_json()?)?,
    }
    Ok(())
}

fn lexicon_cmd(cmd: LexiconCommand, out: &mut dyn Write) -> CliResult {
    let (args, neighbors) = match cmd {
        LexiconCommand::Query(a) => (a, false),
        LexiconCommand::Neighbors(a) => (a, true),
    };
    let scheme = Scheme::bundled(&args.scheme)?;
    let lex = lexicon(&scheme, args.file.as_deref())?;
    let sk = Skeleton::parse(&scheme, &args.skeleton)?;
    if neighbors {
        let ns = lex.neighbors(&sk);
        if args.json {
            writeln!(out, "{}", serde_json::to_string_pretty(&ns)?)?;
        }
        for n in ns.iter().filter(|_| !args.json) {
            let words: Vec<&str> = n.entries.iter().map(|e| e.surface.as_str()).collect();
            writeln!(out, "{}\t{}\t{}", n.skeleton, n.entries.len(), words.join(" "))?;
        }
    } else {
        let hits = lex.query(&sk);
        if args.json {
            writeln!(out, "{}", serde_json::to_string_pretty(&hits)?)?;
        }
        for e in hits.iter().filter(|_| !args.json) {
            let rank = e.frequency_rank.map(|r| r.to_string()).unwrap_or_default();
            writeln!(out, "{}\t{}\t{}\t{}", e.surface, e.reading, e.gloss.as_deref().unwrap_or(""), rank)?;
        }
    }
    Ok(())
}

/// Applies one script line to the session.
pub fn apply_op(session: &mut Session, line: &str, base: &Path) -> CliResult {
    let mut parts = line.split_whitespace();
    let Some(op) = parts.next() else { return Ok(()) };
    let rest: Vec<&str> = parts.collect();
    let tail = rest.join(" ");
    let arg = |i: usize| rest.get(i).copied().ok_or_else(|| format!("{op}: missing argument"));
    match op {
        "trial" => {
            let trial = load_trial_csv(&base.join(arg(0)?))?;
            session.submit_trial(&trial)?;
        }
        "answer" => {
            session.submit_answer(arg(0)?.parse()?)?;
        }
        "spoiled" => session.flag_spoiled()?,
        "query" => {
            session.consult()?;
        }
        "ask" => {
            let rounds = rest.get(1).map(|r| r.parse::<usize>()).transpose()?;
            session.ask_candidate(arg(0)?, rounds)?;
        }
        "resolve" => {
            let decision: Resolution = arg(0)?.parse()?;
            let note = rest[1..].join(" ");
            session.resolve(decision, (!note.is_empty()).then_some(note.as_str()))?;
        }
        "substitute" => session.substitute(arg(0)?.parse()?, arg(1)?)?,
        "restart" => session.restart()?,
        "new-day" => session.new_day(rest.first().copied())?,
        "note" => session.note(&tail)?,
        "abandon" => session.abandon(&tail)?,
        other => return Err(format!("unknown operation {other:?}").into()),
    }
    Ok(())
}

fn session_run(a: SessionRunArgs, out: &mut dyn Write) -> CliResult {
    let scheme = Scheme::bundled(&a.scheme)?;
    let lex = Arc::new(Lexicon::bundled_for(&scheme)?);
    let header = SessionHeader::new(&a.subject, &scheme.name, lex.name());
    let mut session = match &a.model {
        Some(p) => Session::start(header, scheme, lex, Some(load_model(p)?))?,
        None => Session::without_model(header, scheme, lex)?,
    };
    let script = fs::read_to_string(&a.script)?;
    let base = a.script.parent().unwrap_or(Path::new("."));
    for (n, raw) in script.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        apply_op(&mut session, line, base).map_err(|e| format!("line {}: {e}", n + 1))?;
    }
    let mut bytes = Vec::new();
    session.write_log(&mut bytes)?;
    match &a.output {
        Some(p) => {
            fs::write(p, &bytes)?;
            writeln!(out, "{}", session.state().phase.name())?;
        }
        None => out.write_all(&bytes)?,
    }
    Ok(())
}

fn simulate_session(a: SimSessionArgs, out: &mut dyn Write) -> CliResult {
    let mut profile = PatientProfile::preset(&a.preset, &a.word, a.seed)?;
    if let Some(acc) = a.accuracy {
        profile.accuracy = acc;
    }
    profile.validate()?;
    let scheme = Scheme::bundled(&a.scheme)?;
    let lex = Arc::new(Lexicon::bundled_for(&scheme)?);
    let model = calibrate_patient(&profile)?;
    let config = AutoplayConfig {
        max_sessions: a.max_sessions,
        ..AutoplayConfig::default()
    };
    let outcome = autoplay(&profile, &scheme, lex, model, &config)?;
    let mut bytes = Vec::new();
    outcome.session.write_log(&mut bytes)?;
    match &a.output {
        Some(p) => {
            fs::write(p, &bytes)?;
            writeln!(
                out,
                "{} after {} day(s), {} questions",
                outcome.accepted.as_deref().map_or("not accepted".to_string(), |w| format!("accepted {w}")),
                outcome.sessions_used,
                outcome.questions
            )?;
        }
        None => out.write_all(&bytes)?,
    }
    Ok(())
}
