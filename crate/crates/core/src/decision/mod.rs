//! Yes/no classification from windowed heart-rate and blood-volume statistics.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::hemodynamics::{derive, HemoSeries, Trial};
use crate::{Answer, Channel, Error, Result};

mod features;
mod svm;

pub use features::{
    amplitude_scale, extract, extract_raw, max_amplitude, oscillation_number, rescale_amplitude,
    FeatureSetId, FeatureVector, Source, Statistic, WindowSpec, BV_LAG_S, WINDOW_MIN_WIDTH_S,
    WINDOW_START_MIN_S,
};
pub use svm::{gaussian_kernel, solve_dual, DualSolution, SvmModel, COST, KERNEL_VARIANCE, KKT_TOLERANCE};

pub const CALIBRATION_PAIRS: usize = 4;
const TIE_EPS: f64 = 1e-12;

/// One yes trial and one no trial recorded back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub yes: HemoSeries,
    pub no: HemoSeries,
}

/// A frozen classifier: SVM plus everything needed to featurize a new trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    pub svm: SvmModel,
    pub feature_set: FeatureSetId,
    pub window: WindowSpec,
    pub channel: Channel,
    pub amplitude_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub answer: Answer,
    pub decision_value: f64,
    pub feature: FeatureVector,
}

impl DecisionModel {
    /// Trains on labelled series; the amplitude scale is fitted here and frozen.
    pub fn fit(
        series: &[(&HemoSeries, Answer)],
        feature_set: FeatureSetId,
        window: WindowSpec,
        channel: Channel,
    ) -> Result<Self> {
        let raw = series
            .iter()
            .map(|(h, _)| extract_raw(h, feature_set, window, channel))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<Answer> = series.iter().map(|(_, a)| *a).collect();
        Self::fit_raw(&raw, &labels, feature_set, window, channel)
    }

    fn fit_raw(
        raw: &[[f64; 2]],
        labels: &[Answer],
        feature_set: FeatureSetId,
        window: WindowSpec,
        channel: Channel,
    ) -> Result<Self> {
        let scale = amplitude_scale(feature_set, raw);
        let points: Vec<[f64; 2]> = raw.iter().map(|x| [x[0], x[1] * scale]).collect();
        Ok(DecisionModel {
            svm: SvmModel::train(&points, labels)?,
            feature_set,
            window,
            channel,
            amplitude_scale: scale,
        })
    }

    pub fn classify_raw(&self, raw: [f64; 2]) -> (Answer, f64) {
        self.svm.classify(&[raw[0], rescale_amplitude(raw[1], self.amplitude_scale)])
    }

    pub fn classify(&self, hemo: &HemoSeries) -> Result<Classification> {
        let feature = extract(hemo, self.feature_set, self.window, self.channel, self.amplitude_scale)?;
        let (answer, decision_value) = self.svm.classify(&feature.x);
        Ok(Classification {
            answer,
            decision_value,
            feature,
        })
    }

    /// Stable short identifier derived from the serialized model.
    pub fn id(&self) -> String {
        let json = serde_json::to_vec(self).expect("model serializes");
        // FNV-1a, 64 bit.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("m{h:016x}")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub test_pair: usize,
    pub train_pairs: Vec<usize>,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// One row of the selection table. Infeasible candidates (BV window clipped
/// below 15 s) carry no scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub feature_set: FeatureSetId,
    pub window: WindowSpec,
    pub feasible: bool,
    pub folds: Vec<FoldReport>,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub performance: Option<f64>,
    pub geometric_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub channel: Channel,
    pub feature_set: FeatureSetId,
    pub window: WindowSpec,
    pub performance: f64,
    pub table: Vec<CandidateReport>,
    pub model: DecisionModel,
}

/// Every (feature set, window) pair considered by [`select_model`].
pub fn candidates() -> Vec<(FeatureSetId, WindowSpec)> {
    let mut out = Vec::new();
    for fs in FeatureSetId::ALL {
        for w in WindowSpec::all() {
            out.push((fs, w));
        }
    }
    out
}

fn evaluate(
    pairs: &[CalibrationPair],
    feature_set: FeatureSetId,
    window: WindowSpec,
    channel: Channel,
) -> Result<(CandidateReport, DecisionModel)> {
    let mut raw = Vec::with_capacity(pairs.len());
    for p in pairs {
        raw.push([
            extract_raw(&p.yes, feature_set, window, channel)?,
            extract_raw(&p.no, feature_set, window, channel)?,
        ]);
    }
    let mut folds = Vec::with_capacity(pairs.len());
    for test in 0..pairs.len() {
        let train_pairs: Vec<usize> = (0..pairs.len()).filter(|k| *k != test).collect();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for &k in &train_pairs {
            pts.extend_from_slice(&raw[k]);
            labels.extend([Answer::Yes, Answer::No]);
        }
        let model = DecisionModel::fit_raw(&pts, &labels, feature_set, window, channel)?;
        let train_correct = pts
            .iter()
            .zip(&labels)
            .filter(|(x, l)| model.classify_raw(**x).0 == **l)
            .count();
        let test_correct = [Answer::Yes, Answer::No]
            .iter()
            .zip(&raw[test])
            .filter(|(l, x)| model.classify_raw(**x).0 == **l)
            .count();
        folds.push(FoldReport {
            test_pair: test,
            train_pairs,
            train_acc: train_correct as f64 / pts.len() as f64,
            test_acc: test_correct as f64 / 2.0,
        });
    }
    let k = folds.len() as f64;
    let train_acc = folds.iter().map(|f| f.train_acc).sum::<f64>() / k;
    let test_acc = folds.iter().map(|f| f.test_acc).sum::<f64>() / k;

    let all: Vec<[f64; 2]> = raw.iter().flatten().copied().collect();
    let labels: Vec<Answer> = (0..pairs.len()).flat_map(|_| [Answer::Yes, Answer::No]).collect();
    let model = DecisionModel::fit_raw(&all, &labels, feature_set, window, channel)?;
    Ok((
        CandidateReport {
            feature_set,
            window,
            feasible: true,
            folds,
            train_acc: Some(train_acc),
            test_acc: Some(test_acc),
            performance: Some((train_acc + test_acc) / 2.0),
            geometric_margin: Some(model.svm.geometric_margin),
            error: None,
        },
        model,
    ))
}

fn preference(a: &CandidateReport, b: &CandidateReport) -> Ordering {
    let (pa, pb) = (a.performance.unwrap_or(-1.0), b.performance.unwrap_or(-1.0));
    if (pa - pb).abs() > TIE_EPS {
        return pb.partial_cmp(&pa).unwrap_or(Ordering::Equal);
    }
    let (ma, mb) = (a.geometric_margin.unwrap_or(0.0), b.geometric_margin.unwrap_or(0.0));
    if (ma - mb).abs() > TIE_EPS * ma.abs().max(mb.abs()).max(1.0) {
        return mb.partial_cmp(&ma).unwrap_or(Ordering::Equal);
    }
    a.window
        .start_s
        .cmp(&b.window.start_s)
        .then(a.window.width_s().cmp(&b.window.width_s()))
        .then(a.feature_set.cmp(&b.feature_set))
}

/// Leave-one-pair-out search over all 165 candidates on one channel.
pub fn select_model(pairs: &[CalibrationPair], channel: Channel) -> Result<ModelSelection> {
    if pairs.len() != CALIBRATION_PAIRS {
        return Err(Error::Protocol(format!(
            "model selection needs exactly {CALIBRATION_PAIRS} yes/no pairs, got {}",
            pairs.len()
        )));
    }
    let mut table = Vec::new();
    let mut best: Option<(usize, DecisionModel)> = None;
    for (feature_set, window) in candidates() {
        let infeasible = feature_set.reads_blood_volume() && window.blood_volume_window().is_err();
        if infeasible {
            table.push(CandidateReport {
                feature_set,
                window,
                feasible: false,
                folds: Vec::new(),
                train_acc: None,
                test_acc: None,
                performance: None,
                geometric_margin: None,
                error: window.blood_volume_window().err().map(|e| e.to_string()),
            });
            continue;
        }
        match evaluate(pairs, feature_set, window, channel) {
            Ok((report, model)) => {
                let better = match &best {
                    None => true,
                    Some((i, _)) => preference(&report, &table[*i]) == Ordering::Less,
                };
                if better {
                    best = Some((table.len(), model));
                }
                table.push(report);
            }
            Err(e) => table.push(CandidateReport {
                feature_set,
                window,
                feasible: false,
                folds: Vec::new(),
                train_acc: None,
                test_acc: None,
                performance: None,
                geometric_margin: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let (idx, model) = best.ok_or(Error::NoFeasibleCandidate)?;
    let chosen = &table[idx];
    Ok(ModelSelection {
        channel,
        feature_set: chosen.feature_set,
        window: chosen.window,
        performance: chosen.performance.unwrap_or(0.0),
        model,
        table,
    })
}

/// Selection on both probes; the active channel is the one with the higher
/// selected performance (left on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub active_channel: Channel,
    pub selections: Vec<ModelSelection>,
}

impl Calibration {
    pub fn active(&self) -> &ModelSelection {
        self.selections
            .iter()
            .find(|s| s.channel == self.active_channel)
            .expect("active channel has a selection")
    }

    pub fn model(&self) -> &DecisionModel {
        &self.active().model
    }
}

/// Pairs eight labelled trials: the k-th yes with the k-th no, in order.
pub fn pairs_from_trials(trials: &[Trial]) -> Result<Vec<CalibrationPair>> {
    let mut yes = Vec::new();
    let mut no = Vec::new();
    for t in trials {
        match t.task_label {
            Some(Answer::Yes) => yes.push(t),
            Some(Answer::No) => no.push(t),
            None => return Err(Error::Protocol(format!("trial {} has no label", t.trial_id))),
        }
    }
    if yes.len() != CALIBRATION_PAIRS || no.len() != CALIBRATION_PAIRS {
        return Err(Error::Protocol(format!(
            "calibration needs {CALIBRATION_PAIRS} yes and {CALIBRATION_PAIRS} no trials, got {} and {}",
            yes.len(),
            no.len()
        )));
    }
    yes.into_iter()
        .zip(no)
        .map(|(y, n)| {
            Ok(CalibrationPair {
                yes: derive(y)?,
                no: derive(n)?,
            })
        })
        .collect()
}

pub fn calibrate(pairs: &[CalibrationPair]) -> Result<Calibration> {
    let mut selections = Vec::new();
    for channel in Channel::ALL {
        selections.push(select_model(pairs, channel)?);
    }
    let active_channel = if selections[1].performance > selections[0].performance + TIE_EPS {
        Channel::Right
    } else {
        Channel::Left
    };
    Ok(Calibration {
        active_channel,
        selections,
    })
}
