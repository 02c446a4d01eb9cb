//! Evaluation of every pipeline stage.
//!
//! The reward model used downstream is replaced by [`ProxyModel`], a
//! logistic regression over the difference of the two responses' feature
//! vectors. It is NOT a reward model: it exists to run the
//! train-on-baseline-plus-weak loop end to end and to compare settings
//! directionally.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Preference;
use crate::error::{Error, Result};
use crate::features::{FeatureVector, NumericFeature, PairFeatures};
use crate::labelmodel::{filter_by_confidence, top_n_by_confidence, WeakPrediction};
use crate::lfs::LabelMatrix;
use crate::par::{self, Execution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfStats {
    pub name: String,
    pub coverage: f64,
    /// `None` when the LF never votes.
    pub accuracy: Option<f64>,
    pub n_cast: usize,
    pub n_correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfReport {
    pub n_samples: usize,
    pub lfs: Vec<LfStats>,
}

impl LfReport {
    pub fn to_table(&self) -> String {
        let width = self.lfs.iter().map(|s| s.name.len()).max().unwrap_or(0).max("Labeling function".len());
        let mut out = format!("{:<width$}  {:>9}  {:>9}\n", "Labeling function", "Coverage", "Accuracy");
        for s in &self.lfs {
            let acc = s.accuracy.map_or("-".to_string(), |a| format!("{:.2}%", 100.0 * a));
            let _ = writeln!(out, "{:<width$}  {:>8.2}%  {:>9}", s.name, 100.0 * s.coverage, acc);
        }
        out
    }
}

/// Coverage and empirical accuracy of every LF against gold labels given
/// in row order.
pub fn lf_report(matrix: &LabelMatrix, gold: &[Option<Preference>]) -> Result<LfReport> {
    if gold.len() != matrix.n_rows() {
        return Err(Error::Shape(format!("{} gold labels for {} rows", gold.len(), matrix.n_rows())));
    }
    let gold: Vec<Preference> = gold
        .iter()
        .zip(&matrix.ids)
        .map(|(g, id)| g.ok_or_else(|| Error::MissingGold(id.clone())))
        .collect::<Result<_>>()?;
    let n = matrix.n_rows();
    let lfs = matrix
        .lf_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut n_cast = 0;
            let mut n_correct = 0;
            for (vote, g) in matrix.column(j).zip(&gold) {
                if let Some(p) = vote.preference() {
                    n_cast += 1;
                    n_correct += usize::from(p == *g);
                }
            }
            LfStats {
                name: name.clone(),
                coverage: if n == 0 { 0.0 } else { n_cast as f64 / n as f64 },
                accuracy: (n_cast > 0).then(|| n_correct as f64 / n_cast as f64),
                n_cast,
                n_correct,
            }
        })
        .collect();
    Ok(LfReport { n_samples: n, lfs })
}

/// Fraction of predictions whose weak label matches gold.
pub fn label_model_accuracy(preds: &[WeakPrediction], gold: &HashMap<&str, Preference>) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::NothingToScore);
    }
    let mut correct = 0usize;
    for p in preds {
        let g = gold
            .get(p.sample_id.as_str())
            .ok_or_else(|| Error::MissingGold(p.sample_id.clone()))?;
        correct += usize::from(p.weak_label == *g);
    }
    Ok(correct as f64 / preds.len() as f64)
}

/// Names of the difference features, in vector order.
pub fn diff_feature_names(keyword_lists: &[String]) -> Vec<String> {
    NumericFeature::ALL
        .iter()
        .map(|f| f.name().to_string())
        .chain(keyword_lists.iter().map(|k| format!("keywords:{k}")))
        .collect()
}

/// `features(B) - features(A)`; undefined values contribute 0.
pub fn pair_diff(a: &FeatureVector, b: &FeatureVector) -> Vec<f64> {
    let mut diff: Vec<f64> = NumericFeature::ALL
        .iter()
        .map(|&f| match (a.get(f), b.get(f)) {
            (Some(x), Some(y)) => y - x,
            _ => 0.0,
        })
        .collect();
    diff.extend(a.keyword_hits.iter().map(|(k, &ha)| {
        let hb = b.keyword_hits.get(k).copied().unwrap_or(0);
        hb as f64 - ha as f64
    }));
    diff
}

/// One training or evaluation pair for the proxy classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub diff: Vec<f64>,
    pub label: Preference,
}

impl Example {
    pub fn from_pair(pair: &PairFeatures, label: Preference) -> Self {
        Example {
            diff: pair_diff(&pair.a, &pair.b),
            label,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyHyper {
    pub epochs: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl Default for ProxyHyper {
    fn default() -> Self {
        ProxyHyper {
            epochs: 200,
            step_size: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-dimension divisors applied before the weights.
    pub scales: Vec<f64>,
    pub hyper: ProxyHyper,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ProxyModel {
    pub fn prob_b(&self, diff: &[f64]) -> f64 {
        let z = self.bias
            + diff
                .iter()
                .zip(&self.weights)
                .zip(&self.scales)
                .map(|((x, w), s)| w * x / s)
                .sum::<f64>();
        sigmoid(z)
    }

    pub fn predict(&self, diff: &[f64]) -> Preference {
        if self.prob_b(diff) > 0.5 {
            Preference::B
        } else {
            Preference::A
        }
    }
}

/// Full-batch gradient descent on the mean logistic loss, from zero
/// weights, over inputs divided by their root mean square.
pub fn train_proxy(train: &[Example], hyper: &ProxyHyper) -> Result<ProxyModel> {
    if train.len() < 2 {
        return Err(Error::InvalidArgument(format!("proxy training needs >= 2 samples, got {}", train.len())));
    }
    let has = |p: Preference| train.iter().any(|e| e.label == p);
    if !has(Preference::A) || !has(Preference::B) {
        return Err(Error::OneClass);
    }
    let dim = train[0].diff.len();
    if train.iter().any(|e| e.diff.len() != dim) {
        return Err(Error::Shape("training examples differ in dimension".into()));
    }
    let n = train.len() as f64;
    let scales: Vec<f64> = (0..dim)
        .map(|k| {
            let rms = (train.iter().map(|e| e.diff[k] * e.diff[k]).sum::<f64>() / n).sqrt();
            if rms > 0.0 {
                rms
            } else {
                1.0
            }
        })
        .collect();

    let mut model = ProxyModel {
        weights: vec![0.0; dim],
        bias: 0.0,
        scales,
        hyper: *hyper,
    };
    for _ in 0..hyper.epochs {
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for e in train {
            let target = if e.label == Preference::B { 1.0 } else { 0.0 };
            let err = model.prob_b(&e.diff) - target;
            for k in 0..dim {
                grad_w[k] += err * e.diff[k] / model.scales[k];
            }
            grad_b += err;
        }
        for k in 0..dim {
            model.weights[k] -= hyper.step_size * grad_w[k] / n;
        }
        model.bias -= hyper.step_size * grad_b / n;
    }
    Ok(model)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// Mean of the per-class F1 of A and B.
    #[default]
    Macro,
    /// F1 of class B as positive.
    BinaryB,
}

fn class_f1(predicted: &[Preference], gold: &[Preference], class: Preference) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (p, g) in predicted.iter().zip(gold) {
        match (*p == class, *g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        log::debug!("class {class:?} absent from predictions and gold, F1 taken as 1");
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

pub fn f1_score(predicted: &[Preference], gold: &[Preference], mode: F1Mode) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::NothingToScore);
    }
    if predicted.len() != gold.len() {
        return Err(Error::Shape("prediction and gold lengths differ".into()));
    }
    Ok(match mode {
        F1Mode::Macro => 0.5 * (class_f1(predicted, gold, Preference::A) + class_f1(predicted, gold, Preference::B)),
        F1Mode::BinaryB => class_f1(predicted, gold, Preference::B),
    })
}

pub fn evaluate_f1(model: &ProxyModel, eval: &[Example], mode: F1Mode) -> Result<f64> {
    let predicted: Vec<Preference> = eval.iter().map(|e| model.predict(&e.diff)).collect();
    let gold: Vec<Preference> = eval.iter().map(|e| e.label).collect();
    f1_score(&predicted, &gold, mode)
}

/// How weak predictions are selected for one grid row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Baseline only.
    Baseline,
    /// Confidence at least the threshold.
    Threshold(f64),
    /// The N most confident.
    TopN(usize),
    /// Every decided weak prediction.
    All,
}

impl Selection {
    pub fn label(&self) -> String {
        match self {
            Selection::Baseline => "-".into(),
            Selection::Threshold(t) => format!("{t}"),
            Selection::TopN(n) => format!("** (top {n})"),
            Selection::All => "none".into(),
        }
    }

    pub fn apply(&self, preds: &[WeakPrediction]) -> Result<Vec<WeakPrediction>> {
        match *self {
            Selection::Baseline => Ok(Vec::new()),
            Selection::Threshold(t) => filter_by_confidence(preds, t),
            Selection::TopN(n) => Ok(top_n_by_confidence(preds, n)),
            Selection::All => Ok(preds.to_vec()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n_baseline: usize,
    pub n_weak: usize,
    pub selection: Selection,
    pub f1: f64,
    pub seed: u64,
}

/// A weak prediction together with the features of its sample.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakExample {
    pub prediction: WeakPrediction,
    pub diff: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GridSettings {
    pub proxy: ProxyHyper,
    pub f1: F1Mode,
    pub exec: Execution,
}

/// Row 0 trains on the baseline alone; each further row adds the weak
/// predictions picked by one selection, with their hard weak labels.
pub fn experiment_grid(
    baseline: &[Example],
    weak: &[WeakExample],
    selections: &[Selection],
    eval: &[Example],
    settings: &GridSettings,
) -> Result<Vec<ExperimentRow>> {
    let mut all = vec![Selection::Baseline];
    all.extend(selections.iter().copied().filter(|s| *s != Selection::Baseline));
    let preds: Vec<WeakPrediction> = weak.iter().map(|w| w.prediction.clone()).collect();
    let by_id: HashMap<&str, &WeakExample> = weak.iter().map(|w| (w.prediction.sample_id.as_str(), w)).collect();

    par::try_map(&all, settings.exec, |selection| {
        let picked = selection.apply(&preds)?;
        let mut train = baseline.to_vec();
        train.extend(picked.iter().map(|p| Example {
            diff: by_id[p.sample_id.as_str()].diff.clone(),
            label: p.weak_label,
        }));
        let model = train_proxy(&train, &settings.proxy)?;
        Ok(ExperimentRow {
            n_baseline: baseline.len(),
            n_weak: picked.len(),
            selection: *selection,
            f1: evaluate_f1(&model, eval, settings.f1)?,
            seed: settings.proxy.seed,
        })
    })
}

pub fn grid_table(rows: &[ExperimentRow]) -> String {
    let headers = ["Originally Labelled (Train)", "Weakly Labelled", "Confidence Threshold", "F1"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.n_baseline.to_string(),
                r.n_weak.to_string(),
                r.selection.label(),
                format!("{:.4}", r.f1),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..4)
        .map(|k| cells.iter().map(|c| c[k].len()).chain([headers[k].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |cols: [&str; 4]| {
        format!(
            "{:<w0$} | {:>w1$} | {:>w2$} | {:>w3$}\n",
            cols[0],
            cols[1],
            cols[2],
            cols[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        )
    };
    out.push_str(&line(headers));
    out.push_str(&format!(
        "{}-|-{}-|-{}-|-{}\n",
        "-".repeat(widths[0]),
        "-".repeat(widths[1]),
        "-".repeat(widths[2]),
        "-".repeat(widths[3])
    ));
    for c in &cells {
        out.push_str(&line([&c[0], &c[1], &c[2], &c[3]]));
    }
    out
}
