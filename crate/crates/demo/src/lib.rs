//! wasm-bindgen exports for the static demo page in `www/`.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;
use wordcomm_core::codec::Scheme;
use wordcomm_core::confirmation::{confidence, Policy};
use wordcomm_core::decision::DecisionModel;
use wordcomm_core::hemodynamics::derive;
use wordcomm_core::lexicon::{Lexicon, Skeleton};
use wordcomm_core::simulator::{calibrate_patient, generate_trial, PatientProfile};
use wordcomm_core::Answer;

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())) {
        Ok(s) => s,
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Confidence and band for a confirmation ledger.
#[wasm_bindgen]
pub fn score(affirm: u32, deny: u32) -> String {
    let c = confidence(affirm as u64, deny as u64);
    let band = Policy::default().band(c);
    json!({ "affirm": affirm, "deny": deny, "confidence": c, "band": band }).to_string()
}

/// Candidates and one-substitution neighbours for a skeleton such as "E,A,A".
#[wasm_bindgen]
pub fn lookup(scheme: &str, skeleton: &str) -> String {
    to_json((|| {
        let scheme = Scheme::bundled(scheme).map_err(|e| e.to_string())?;
        let lex = Lexicon::bundled_for(&scheme).map_err(|e| e.to_string())?;
        let sk = Skeleton::parse(&scheme, skeleton).map_err(|e| e.to_string())?;
        let candidates: Vec<_> = lex.query(&sk).into_iter().cloned().collect();
        let neighbors: Vec<_> = lex
            .neighbors(&sk)
            .into_iter()
            .map(|n| {
                json!({
                    "skeleton": n.skeleton,
                    "count": n.entries.len(),
                    "top": n.entries.first().map(|e| e.reading.clone()),
                })
            })
            .collect();
        Ok(json!({ "skeleton": sk, "candidates": candidates, "neighbors": neighbors }))
    })())
}

#[derive(Serialize)]
struct TrialView {
    index: u64,
    intended: Answer,
    decoded: Answer,
    decision_value: f64,
    feature: [f64; 2],
    channel: String,
    window: String,
    sample_rate_hz: f64,
    heart_rate: Vec<f64>,
    blood_volume: Vec<f64>,
}

/// A simulated patient with a decision model fitted to its calibration.
#[wasm_bindgen]
pub struct SimPatient {
    profile: PatientProfile,
    model: DecisionModel,
    next_index: u64,
}

#[wasm_bindgen]
impl SimPatient {
    /// `preset` is "easy" or "hard". Calibration runs here.
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, seed: u32) -> Result<SimPatient, String> {
        let profile = PatientProfile::preset(preset, "", seed as u64).map_err(|e| e.to_string())?;
        let model = calibrate_patient(&profile).map_err(|e| e.to_string())?;
        Ok(SimPatient {
            profile,
            model,
            next_index: 100,
        })
    }

    /// Human-readable model summary.
    pub fn model(&self) -> String {
        json!({
            "id": self.model.id(),
            "channel": self.model.channel,
            "feature_set": self.model.feature_set,
            "window": self.model.window.to_string(),
        })
        .to_string()
    }

    /// Runs one trial with the patient performing `answer` ("yes" or "no")
    /// and decodes it.
    pub fn trial(&mut self, answer: &str) -> String {
        to_json((|| {
            let intended: Answer = answer.parse().map_err(|e: wordcomm_core::Error| e.to_string())?;
            let index = self.next_index;
            self.next_index += 1;
            let trial = generate_trial(&self.profile, intended, index);
            let hemo = derive(&trial).map_err(|e| e.to_string())?;
            let c = self.model.classify(&hemo).map_err(|e| e.to_string())?;
            let ch = self.model.channel;
            Ok(TrialView {
                index,
                intended,
                decoded: c.answer,
                decision_value: c.decision_value,
                feature: c.feature.x,
                channel: ch.to_string(),
                window: self.model.window.to_string(),
                sample_rate_hz: hemo.sample_rate_hz,
                heart_rate: hemo.heart_rate(ch).to_vec(),
                blood_volume: hemo.blood_volume(ch).to_vec(),
            })
        })())
    }
}
