//! Process-wide registry of live sessions and calibrated models.
//!
//! Commands on one session run one at a time behind its mutex; reads serve
//! the last published snapshot without waiting for that mutex.

use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use wordcomm_core::codec::Scheme;
use wordcomm_core::confirmation::LedgerSummary;
use wordcomm_core::decision::DecisionModel;
use wordcomm_core::lexicon::{Lexicon, LexiconEntry};
use wordcomm_core::session::{read_log, Phase, Prompt, Session, SessionHeader, SessionState};
use wordcomm_core::simulator::{calibrate_patient, Patient, PatientProfile};

use crate::error::ApiError;

pub const DATA_DIR_ENV: &str = "WORDCOMM_DATA_DIR";

/// Artifacts a session is bound to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Links {
    pub model_id: Option<String>,
    pub scheme: String,
    pub lexicon: String,
    pub log: Option<String>,
}

/// Everything a client needs to render a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub header: SessionHeader,
    pub state: SessionState,
    pub prompt: Option<Prompt>,
    /// Text for the caregiver to read out next, if a question is pending.
    pub question: Option<String>,
    pub candidates: Vec<LexiconEntry>,
    pub ledger: Option<LedgerSummary>,
    pub simulated: bool,
    pub links: Links,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub word: String,
    #[serde(default)]
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SimulateConfig {
    pub fn profile(&self) -> Result<PatientProfile, ApiError> {
        let preset = self.preset.as_deref().unwrap_or("easy");
        let mut p = PatientProfile::preset(preset, &self.word, self.seed.unwrap_or(0))?;
        if let Some(a) = self.accuracy {
            p.accuracy = a;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub scheme: Option<String>,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub model_id: Option<String>,
    /// Attach a simulated patient; calibrates one when no model is given.
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    /// Run without a model; answers are entered directly.
    #[serde(default)]
    pub direct_answers: bool,
}

pub struct LiveSession {
    pub session: Session,
    pub patient: Option<Patient>,
}

struct SessionSlot {
    live: Mutex<LiveSession>,
    snapshot: RwLock<Arc<SessionView>>,
}

pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
    models: RwLock<HashMap<String, DecisionModel>>,
    lexicons: RwLock<HashMap<String, Arc<Lexicon>>>,
    data_dir: Option<PathBuf>,
    next_id: AtomicU64,
}

fn view(id: &str, live: &LiveSession, log: Option<&Path>) -> SessionView {
    let s = &live.session;
    let prompt = s.prompt();
    let ledger = match &s.state().phase {
        Phase::Confirming { ledger } => Some(ledger.summary(&s.header().policy)),
        _ => None,
    };
    SessionView {
        session_id: id.to_string(),
        header: s.header().clone(),
        state: s.state().clone(),
        question: prompt.as_ref().map(|p| match p {
            Prompt::Symbol { text, .. } | Prompt::Confirm { text, .. } => text.clone(),
        }),
        prompt,
        candidates: s.candidate_entries(),
        ledger,
        simulated: live.patient.is_some(),
        links: Links {
            model_id: s.header().model_id.clone(),
            scheme: s.header().scheme.clone(),
            lexicon: s.header().lexicon.clone(),
            log: log.map(|p| p.display().to_string()),
        },
    }
}

/// Writes `text` to `path` through a temporary file and a rename.
fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

impl AppState {
    /// In-memory only.
    pub fn new() -> Self {
        AppState {
            sessions: RwLock::new(HashMap::new()),
            models: RwLock::new(HashMap::new()),
            lexicons: RwLock::new(HashMap::new()),
            data_dir: None,
            next_id: AtomicU64::new(1),
        }
    }

    /// Persists models and session logs under `dir` and resumes what is
    /// already there. Simulated patients are not restored.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ApiError> {
        let dir = dir.into();
        let io = |e: std::io::Error| ApiError::from(wordcomm_core::Error::Io(e));
        fs::create_dir_all(dir.join("models")).map_err(io)?;
        fs::create_dir_all(dir.join("sessions")).map_err(io)?;
        let state = AppState {
            data_dir: Some(dir.clone()),
            ..AppState::new()
        };
        for entry in fs::read_dir(dir.join("models")).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let text = fs::read_to_string(&path).map_err(io)?;
                state.register_model(DecisionModel::from_json(&text)?);
            }
        }
        let mut max_id = 0;
        let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("sessions"))
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let file = fs::File::open(&path).map_err(io)?;
            let (header, events) = read_log(BufReader::new(file))?;
            let scheme = Scheme::bundled(&header.scheme)?;
            let lexicon = state.lexicon_for(&scheme)?;
            let model = header.model_id.as_ref().and_then(|m| state.model(m));
            let session = Session::resume(header, &events, scheme, lexicon, model)?;
            if let Some(n) = id.strip_prefix("s-").and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            state.insert(id, LiveSession { session, patient: None });
        }
        state.next_id.store(max_id + 1, Ordering::SeqCst);
        Ok(state)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn lexicon_for(&self, scheme: &Scheme) -> Result<Arc<Lexicon>, ApiError> {
        if let Some(l) = self.lexicons.read().expect("lexicon lock").get(&scheme.name) {
            return Ok(l.clone());
        }
        let lex = Arc::new(Lexicon::bundled_for(scheme)?);
        self.lexicons
            .write()
            .expect("lexicon lock")
            .insert(scheme.name.clone(), lex.clone());
        Ok(lex)
    }

    /// Stores a model under its content id and returns the id.
    pub fn register_model(&self, model: DecisionModel) -> String {
        let id = model.id();
        if let Some(dir) = &self.data_dir {
            let path = dir.join("models").join(format!("{id}.json"));
            if let Ok(json) = model.to_json() {
                if let Err(e) = write_atomically(&path, json.as_bytes()) {
                    tracing::warn!("could not persist model {id}: {e}");
                }
            }
        }
        self.models.write().expect("model lock").insert(id.clone(), model);
        id
    }

    pub fn model(&self, id: &str) -> Option<DecisionModel> {
        self.models.read().expect("model lock").get(id).cloned()
    }

    fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join("sessions").join(format!("{id}.jsonl")))
    }

    fn persist(&self, id: &str, live: &LiveSession) -> Result<(), ApiError> {
        if let Some(path) = self.log_path(id) {
            let mut bytes = Vec::new();
            live.session.write_log(&mut bytes)?;
            write_atomically(&path, &bytes).map_err(wordcomm_core::Error::Io)?;
        }
        Ok(())
    }

    fn insert(&self, id: String, live: LiveSession) -> Arc<SessionView> {
        let snapshot = Arc::new(view(&id, &live, self.log_path(&id).as_deref()));
        let slot = SessionSlot {
            live: Mutex::new(live),
            snapshot: RwLock::new(snapshot.clone()),
        };
        self.sessions.write().expect("session lock").insert(id, Arc::new(slot));
        snapshot
    }

    pub fn create_session(&self, config: SessionConfig) -> Result<Arc<SessionView>, ApiError> {
        let scheme = Scheme::bundled(config.scheme.as_deref().unwrap_or("japanese-vowel"))?;
        let lexicon = self.lexicon_for(&scheme)?;
        let profile = config.simulate.as_ref().map(|s| s.profile()).transpose()?;
        let model = match (&config.model_id, &profile) {
            (Some(id), _) => Some(self.model(id).ok_or_else(|| ApiError::not_found("model", id))?),
            (None, Some(p)) if !config.direct_answers => {
                let m = calibrate_patient(p)?;
                self.register_model(m.clone());
                Some(m)
            }
            _ => None,
        };
        let id = format!("s-{:04}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let mut header = SessionHeader::new(
            config.subject.as_deref().unwrap_or(&id),
            &scheme.name,
            lexicon.name(),
        );
        header.date = config.date.clone();
        let session = match (model, config.direct_answers) {
            (Some(m), false) => Session::start(header, scheme, lexicon, Some(m))?,
            (_, true) => Session::without_model(header, scheme, lexicon)?,
            (None, false) => return Err(wordcomm_core::Error::MissingModel.into()),
        };
        let live = LiveSession {
            session,
            patient: profile.map(Patient::new).transpose()?,
        };
        self.persist(&id, &live)?;
        Ok(self.insert(id, live))
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .expect("session lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn snapshot(&self, id: &str) -> Result<Arc<SessionView>, ApiError> {
        Ok(self.slot(id)?.snapshot.read().expect("snapshot lock").clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("session lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Runs `f` with exclusive access to the session. On success the log is
    /// persisted and a new snapshot published; on error nothing changes.
    pub async fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut LiveSession) -> Result<T, ApiError>,
    ) -> Result<(T, Arc<SessionView>), ApiError> {
        let slot = self.slot(id)?;
        let mut live = slot.live.lock().await;
        let out = f(&mut live)?;
        self.persist(id, &live)?;
        let snapshot = Arc::new(view(id, &live, self.log_path(id).as_deref()));
        *slot.snapshot.write().expect("snapshot lock") = snapshot.clone();
        Ok((out, snapshot))
    }

    /// The session log as JSON lines.
    pub async fn log(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        let slot = self.slot(id)?;
        let live = slot.live.lock().await;
        let mut bytes = Vec::new();
        live.session.write_log(&mut bytes)?;
        Ok(bytes)
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new()
    }
}
