//! The whole pipeline in memory: split, label the baseline with the LFs,
//! fit the label model on it, weakly label the rest and run the grid.

use std::collections::HashMap;

use crate::corpus::{split_dataset, Sample, SplitResult};
use crate::error::{Error, Result};
use crate::evalharness::{self, Example, ExperimentRow, GridSettings, Selection, WeakExample};
use crate::features::{FeatureExtractor, PairFeatures};
use crate::labelmodel::{self, LabelModelHyper, LabelModelParams, WeakLabeling, WeakPrediction};
use crate::lfs::{LabelMatrix, LabelingFunctions};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineSettings {
    pub seed: u64,
    pub eval_frac: f64,
    pub baseline_frac: f64,
    pub label_model: LabelModelHyper,
    pub selections: Vec<Selection>,
    pub grid: GridSettings,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            seed: 0,
            eval_frac: 0.1,
            baseline_frac: 0.01,
            label_model: LabelModelHyper::default(),
            selections: vec![Selection::TopN(500), Selection::TopN(1000), Selection::TopN(2000), Selection::All],
            grid: GridSettings::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub split: SplitResult,
    pub baseline_matrix: LabelMatrix,
    pub params: LabelModelParams,
    pub labeling: WeakLabeling,
    /// Weak-label accuracy against the hidden gold, when all of it is known.
    pub weak_accuracy: Option<f64>,
    pub rows: Vec<ExperimentRow>,
}

fn ids(samples: &[Sample]) -> Vec<String> {
    samples.iter().map(|s| s.id.clone()).collect()
}

/// Proxy examples from gold-labeled samples and their features.
pub fn gold_examples(samples: &[Sample], pairs: &[PairFeatures]) -> Result<Vec<Example>> {
    samples
        .iter()
        .zip(pairs)
        .map(|(s, p)| {
            let label = s.gold_label.ok_or_else(|| Error::MissingGold(s.id.clone()))?;
            Ok(Example::from_pair(p, label))
        })
        .collect()
}

/// Joins weak predictions with the features of the samples they label.
pub fn weak_examples(preds: &[WeakPrediction], samples: &[Sample], pairs: &[PairFeatures]) -> Result<Vec<WeakExample>> {
    let index: HashMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    preds
        .iter()
        .map(|p| {
            let i = *index
                .get(p.sample_id.as_str())
                .ok_or_else(|| Error::Shape(format!("weak prediction for unknown sample {}", p.sample_id)))?;
            Ok(WeakExample {
                prediction: p.clone(),
                diff: evalharness::pair_diff(&pairs[i].a, &pairs[i].b),
            })
        })
        .collect()
}

pub fn run(
    samples: &[Sample],
    extractor: &FeatureExtractor,
    lfs: &LabelingFunctions,
    settings: &PipelineSettings,
) -> Result<PipelineRun> {
    let exec = settings.grid.exec;
    let split = split_dataset(samples, settings.seed, settings.eval_frac, settings.baseline_frac)?;

    let baseline_pairs = extractor.extract_pairs(&split.baseline_set, exec);
    let baseline_matrix = lfs.label_features(ids(&split.baseline_set), &baseline_pairs, exec);
    let params = labelmodel::fit(&baseline_matrix, &settings.label_model)?;

    let weak_pairs = extractor.extract_pairs(&split.weak_set, exec);
    let weak_matrix = lfs.label_features(ids(&split.weak_set), &weak_pairs, exec);
    let labeling = labelmodel::weak_label_rows(&params, &weak_matrix, exec)?;
    let weak_accuracy = if split.hidden_gold.len() == split.weak_set.len() && !labeling.predictions.is_empty() {
        Some(evalharness::label_model_accuracy(&labeling.predictions, &split.hidden_gold.lookup())?)
    } else {
        None
    };

    let eval_pairs = extractor.extract_pairs(&split.eval_set, exec);
    let baseline = gold_examples(&split.baseline_set, &baseline_pairs)?;
    let eval = gold_examples(&split.eval_set, &eval_pairs)?;
    let weak = weak_examples(&labeling.predictions, &split.weak_set, &weak_pairs)?;
    let rows = evalharness::experiment_grid(&baseline, &weak, &settings.selections, &eval, &settings.grid)?;

    Ok(PipelineRun {
        split,
        baseline_matrix,
        params,
        labeling,
        weak_accuracy,
        rows,
    })
}
