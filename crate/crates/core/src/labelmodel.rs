//! Generative label model over LF votes.
//!
//! Every labeling function `j` has an accuracy `a_j = P(vote correct | vote
//! cast)` and votes independently given the true preference `y`. Abstention
//! is assumed independent of `y`, so it drops out of the posterior:
//!
//! ```text
//! P(y | row) ∝ P(y) · Π_{j cast} (a_j if vote_j = y else 1 - a_j)
//! ```
//!
//! Fitting maximizes the marginal log-likelihood of the LF votes (no gold
//! labels) minus `l2 · ‖θ‖²`, where `θ` are the accuracy logits (and the
//! class-prior logit when it is learned), with full-batch Adam.

use serde::{Deserialize, Serialize};

use crate::corpus::Preference;
use crate::error::{Error, Result};
use crate::lfs::{LabelMatrix, Vote};
use crate::par::{self, Execution};

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Accuracy every LF starts from.
pub const INIT_ACCURACY: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelModelHyper {
    pub epochs: usize,
    pub l2: f64,
    pub step_size: f64,
    pub seed: u64,
    /// Learn the class prior instead of fixing it at 0.5.
    pub learn_prior: bool,
}

impl Default for LabelModelHyper {
    fn default() -> Self {
        LabelModelHyper {
            epochs: 100,
            l2: 0.5,
            step_size: 0.01,
            seed: 0,
            learn_prior: false,
        }
    }
}

impl LabelModelHyper {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("label model epochs must be >= 1".into()));
        }
        if !(self.l2 >= 0.0) || !self.l2.is_finite() {
            return Err(Error::InvalidArgument("label model l2 must be >= 0".into()));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidArgument("label model step_size must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelModelParams {
    pub format_version: u32,
    pub lf_names: Vec<String>,
    /// `P(y = B)`.
    pub class_prior: f64,
    /// Accuracy logits, one per LF.
    pub logits: Vec<f64>,
    pub trained_epochs: usize,
    pub final_objective: f64,
    pub hyper: LabelModelHyper,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-odds of `B` over `A` contributed by the votes of one row:
/// each cast vote adds `±logit(a_j)`.
fn vote_log_odds(row: &[Vote], logits: &[f64]) -> f64 {
    row.iter()
        .zip(logits)
        .map(|(vote, theta)| match vote {
            Vote::PreferB => *theta,
            Vote::PreferA => -*theta,
            Vote::Abstain => 0.0,
        })
        .sum()
}

impl LabelModelParams {
    /// The model before any fitting.
    pub fn initial(lf_names: Vec<String>, hyper: LabelModelHyper) -> Self {
        let logits = vec![logit(INIT_ACCURACY); lf_names.len()];
        LabelModelParams {
            format_version: PARAMS_FORMAT_VERSION,
            lf_names,
            class_prior: 0.5,
            logits,
            trained_epochs: 0,
            final_objective: f64::NAN,
            hyper,
        }
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.logits.iter().map(|&t| sigmoid(t)).collect()
    }

    /// Posterior `P(y = B | row)`; the class prior when every LF abstains.
    pub fn predict_proba(&self, row: &[Vote]) -> Result<f64> {
        if row.len() != self.logits.len() {
            return Err(Error::Shape(format!(
                "row has {} votes, model has {} labeling functions",
                row.len(),
                self.logits.len()
            )));
        }
        Ok(sigmoid(logit(self.class_prior) + vote_log_odds(row, &self.logits)))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: Self = serde_json::from_str(&text)?;
        if params.format_version != PARAMS_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported params format version {}",
                params.format_version
            )));
        }
        if params.logits.len() != params.lf_names.len() || !(params.class_prior > 0.0 && params.class_prior < 1.0) {
            return Err(Error::InvalidArgument(format!("{}: inconsistent label model parameters", path.display())));
        }
        Ok(params)
    }
}

/// Penalized marginal log-likelihood and its gradient with respect to the
/// accuracy logits followed by the prior logit. Rows are summed in order.
fn objective_and_gradient(rows: &[Vec<Vote>], logits: &[f64], prior_logit: f64, l2: f64, learn_prior: bool) -> (f64, Vec<f64>) {
    let m = logits.len();
    let mut grad = vec![0.0; m + 1];
    let mut objective = 0.0;
    let log_prior_b = -softplus(-prior_logit);
    let log_prior_a = -softplus(prior_logit);
    let prior_b = sigmoid(prior_logit);
    let accuracies: Vec<f64> = logits.iter().map(|&t| sigmoid(t)).collect();
    let log_acc: Vec<f64> = logits.iter().map(|&t| -softplus(-t)).collect();
    let log_err: Vec<f64> = logits.iter().map(|&t| -softplus(t)).collect();

    for row in rows {
        let (mut ll_a, mut ll_b) = (log_prior_a, log_prior_b);
        for (j, vote) in row.iter().enumerate() {
            match vote {
                Vote::PreferA => {
                    ll_a += log_acc[j];
                    ll_b += log_err[j];
                }
                Vote::PreferB => {
                    ll_a += log_err[j];
                    ll_b += log_acc[j];
                }
                Vote::Abstain => {}
            }
        }
        let hi = ll_a.max(ll_b);
        objective += hi + ((ll_a - hi).exp() + (ll_b - hi).exp()).ln();
        let q_b = sigmoid(ll_b - ll_a);
        for (j, vote) in row.iter().enumerate() {
            // d/dθ_j log Σ_y ... = q(vote) - a_j
            let q_vote = match vote {
                Vote::PreferA => 1.0 - q_b,
                Vote::PreferB => q_b,
                Vote::Abstain => continue,
            };
            grad[j] += q_vote - accuracies[j];
        }
        grad[m] += q_b - prior_b;
    }

    for j in 0..m {
        objective -= l2 * logits[j] * logits[j];
        grad[j] -= 2.0 * l2 * logits[j];
    }
    if learn_prior {
        objective -= l2 * prior_logit * prior_logit;
        grad[m] -= 2.0 * l2 * prior_logit;
    } else {
        grad[m] = 0.0;
    }
    (objective, grad)
}

/// Fits the model on a label matrix without gold labels.
pub fn fit(matrix: &LabelMatrix, hyper: &LabelModelHyper) -> Result<LabelModelParams> {
    hyper.validate()?;
    if matrix.n_rows() == 0 || matrix.n_lfs() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if !matrix.rows.iter().flatten().any(|v| v.is_cast()) {
        return Err(Error::NoSignal);
    }

    let m = matrix.n_lfs();
    let mut params = LabelModelParams::initial(matrix.lf_names.clone(), *hyper);
    // θ = accuracy logits followed by the prior logit
    let mut theta = params.logits.clone();
    theta.push(0.0);
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut first = vec![0.0; m + 1];
    let mut second = vec![0.0; m + 1];

    for epoch in 1..=hyper.epochs {
        let (_, grad) = objective_and_gradient(&matrix.rows, &theta[..m], theta[m], hyper.l2, hyper.learn_prior);
        let t = epoch as i32;
        for k in 0..=m {
            // ascent: minimize the negated objective
            let g = -grad[k];
            first[k] = beta1 * first[k] + (1.0 - beta1) * g;
            second[k] = beta2 * second[k] + (1.0 - beta2) * g * g;
            let m_hat = first[k] / (1.0 - beta1.powi(t));
            let v_hat = second[k] / (1.0 - beta2.powi(t));
            theta[k] -= hyper.step_size * m_hat / (v_hat.sqrt() + eps);
        }
    }

    let (objective, _) = objective_and_gradient(&matrix.rows, &theta[..m], theta[m], hyper.l2, hyper.learn_prior);
    params.class_prior = sigmoid(theta[m]);
    theta.truncate(m);
    params.logits = theta;
    params.trained_epochs = hyper.epochs;
    params.final_objective = objective;
    Ok(params)
}

/// Smoothed share of `B` votes: `(#B + 0.5) / (#cast + 1)`; 0.5 when all abstain.
pub fn majority_vote(row: &[Vote]) -> f64 {
    const SMOOTHING: f64 = 0.5;
    let votes_b = row.iter().filter(|v| **v == Vote::PreferB).count() as f64;
    let cast = row.iter().filter(|v| v.is_cast()).count() as f64;
    (votes_b + SMOOTHING) / (cast + 2.0 * SMOOTHING)
}

/// `P` when `P >= 0.5`, otherwise `1 - P`.
pub fn confidence(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    Ok(if p >= 0.5 { p } else { 1.0 - p })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakPrediction {
    pub sample_id: String,
    pub prob_b: f64,
    pub weak_label: Preference,
    pub confidence: f64,
}

impl WeakPrediction {
    /// `None` for the undecided `P = 0.5`.
    pub fn from_probability(sample_id: String, prob_b: f64) -> Result<Option<Self>> {
        let confidence = confidence(prob_b)?;
        if prob_b == 0.5 {
            return Ok(None);
        }
        Ok(Some(WeakPrediction {
            sample_id,
            prob_b,
            weak_label: if prob_b > 0.5 { Preference::B } else { Preference::A },
            confidence,
        }))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeakLabeling {
    pub predictions: Vec<WeakPrediction>,
    /// Ids whose posterior is exactly 0.5.
    pub undecided: Vec<String>,
}

pub fn weak_label_rows(params: &LabelModelParams, matrix: &LabelMatrix, exec: Execution) -> Result<WeakLabeling> {
    let indices: Vec<usize> = (0..matrix.n_rows()).collect();
    let probs = par::try_map(&indices, exec, |&i| params.predict_proba(&matrix.rows[i]))?;
    let mut out = WeakLabeling::default();
    for (id, p) in matrix.ids.iter().zip(probs) {
        match WeakPrediction::from_probability(id.clone(), p)? {
            Some(pred) => out.predictions.push(pred),
            None => out.undecided.push(id.clone()),
        }
    }
    if !out.undecided.is_empty() {
        log::info!("{} samples undecided at P = 0.5, excluded", out.undecided.len());
    }
    Ok(out)
}

/// Weak labels for `samples`, whose rows in `matrix` must be in the same order.
pub fn weak_label_dataset(
    params: &LabelModelParams,
    samples: &[crate::corpus::Sample],
    matrix: &LabelMatrix,
) -> Result<WeakLabeling> {
    if samples.len() != matrix.n_rows() || samples.iter().zip(&matrix.ids).any(|(s, id)| &s.id != id) {
        return Err(Error::Shape("samples and label matrix rows are not aligned".into()));
    }
    weak_label_rows(params, matrix, Execution::default())
}

pub fn filter_by_confidence(preds: &[WeakPrediction], threshold: f64) -> Result<Vec<WeakPrediction>> {
    if !(0.5..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("confidence threshold {threshold} outside [0.5, 1]")));
    }
    Ok(preds.iter().filter(|p| p.confidence >= threshold).cloned().collect())
}

/// The `n` most confident predictions, returned in input order. Ties go to
/// the earlier prediction.
pub fn top_n_by_confidence(preds: &[WeakPrediction], n: usize) -> Vec<WeakPrediction> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| preds[j].confidence.total_cmp(&preds[i].confidence));
    let mut keep: Vec<usize> = order.into_iter().take(n).collect();
    keep.sort_unstable();
    keep.into_iter().map(|i| preds[i].clone()).collect()
}

/// Pearson correlation between LF columns with votes encoded as A = -1,
/// B = +1, abstain = 0. `None` where a column is constant.
pub fn lf_correlations(matrix: &LabelMatrix) -> Vec<Vec<Option<f64>>> {
    let m = matrix.n_lfs();
    let n = matrix.n_rows() as f64;
    let encode = |v: Vote| match v {
        Vote::PreferA => -1.0,
        Vote::PreferB => 1.0,
        Vote::Abstain => 0.0,
    };
    let columns: Vec<Vec<f64>> = (0..m).map(|j| matrix.column(j).map(encode).collect()).collect();
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            (mean, var)
        })
        .collect();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let ((mi, vi), (mj, vj)) = (stats[i], stats[j]);
                    if vi == 0.0 || vj == 0.0 {
                        return None;
                    }
                    let cov = columns[i].iter().zip(&columns[j]).map(|(x, y)| (x - mi) * (y - mj)).sum::<f64>() / n;
                    Some(cov / (vi * vj).sqrt())
                })
                .collect()
        })
        .collect()
}
