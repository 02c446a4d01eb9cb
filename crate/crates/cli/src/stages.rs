use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::Serialize;
use weakpref::corpus::{load_any, load_dataset, load_weak_dataset, save_dataset, split_dataset, HiddenGold};
use weakpref::evalharness::{
    experiment_grid, grid_table, label_model_accuracy, lf_report, ExperimentRow, GridSettings, LfReport, Selection,
};
use weakpref::features::NumericFeature;
use weakpref::labelmodel::{self, lf_correlations, weak_label_dataset, LabelModelParams, WeakPrediction};
use weakpref::pipeline::{gold_examples, weak_examples};
use weakpref::stats::{
    feature_preference_report, keyword_occurrence_report, regex_frequency_analysis, FeatureTest, KeywordOccurrence,
    RegexSelection, TestVariant,
};
use weakpref::{Execution, LabelMatrix, Preference, Sample, WeaklyLabeledSample};

use crate::config::{Resolved, Seeds};

pub const PROXY_NOTICE: &str =
    "F1 of a logistic-regression proxy on feature differences; NOT a reward model, compare rows directionally only.";

/// Output file locations.
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
    fn eval(&self) -> PathBuf {
        self.file("eval.jsonl")
    }
    fn baseline(&self) -> PathBuf {
        self.file("baseline.jsonl")
    }
    fn weak(&self) -> PathBuf {
        self.file("weak.jsonl")
    }
    fn hidden_gold(&self) -> PathBuf {
        self.file("hidden_gold.jsonl")
    }
    fn params(&self) -> PathBuf {
        self.file("params.json")
    }
    fn weak_labeled(&self) -> PathBuf {
        self.file("weak_labeled.jsonl")
    }
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<Sample>> {
    Ok(load_dataset(path)?)
}

/// Left-aligned first column, right-aligned others.
pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..headers.len())
        .map(|k| rows.iter().map(|r| r[k].len()).chain([headers[k].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, c) in cells.iter().enumerate() {
            if k == 0 {
                let _ = write!(s, "{:<w$}", c, w = widths[k]);
            } else {
                let _ = write!(s, "  {:>w$}", c, w = widths[k]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn p_cell(p: f64) -> String {
    if p < 0.01 {
        "< 0.01".into()
    } else {
        format!("{p:.2}")
    }
}

fn matrix_for(r: &Resolved, samples: &[Sample]) -> LabelMatrix {
    r.lfs.apply_all_with(samples, &r.extractor, Execution::default())
}

#[derive(Serialize)]
struct SplitReport {
    input: String,
    seed: u64,
    split_seed: u64,
    eval_frac: f64,
    baseline_frac: f64,
    n_total: usize,
    n_eval: usize,
    n_baseline: usize,
    n_weak: usize,
}

pub fn split(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let input = r.input.as_ref().ok_or_else(|| anyhow!("no input dataset configured"))?;
    let samples = load_any(input, r.seeds.orient)?;
    let split = split_dataset(&samples, r.seeds.split, r.config.split.eval_frac, r.config.split.baseline_frac)?;
    save_dataset(&split.eval_set, layout.eval())?;
    save_dataset(&split.baseline_set, layout.baseline())?;
    save_dataset(&split.weak_set, layout.weak())?;
    split.hidden_gold.save(layout.hidden_gold())?;
    write_json(
        &layout.file("split.json"),
        &SplitReport {
            input: input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            seed: r.seeds.root,
            split_seed: r.seeds.split,
            eval_frac: r.config.split.eval_frac,
            baseline_frac: r.config.split.baseline_frac,
            n_total: samples.len(),
            n_eval: split.eval_set.len(),
            n_baseline: split.baseline_set.len(),
            n_weak: split.weak_set.len(),
        },
    )?;
    log::info!(
        "split {} samples: eval {}, baseline {}, weak {}",
        samples.len(),
        split.eval_set.len(),
        split.baseline_set.len(),
        split.weak_set.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeReport {
    n_samples: usize,
    test: TestVariant,
    features: Vec<FeatureTest>,
    keywords: Vec<KeywordOccurrence>,
    regex: Option<RegexSelection>,
}

fn feature_label(f: NumericFeature) -> &'static str {
    match f {
        NumericFeature::LengthTokens => "Text length (tokens)",
        NumericFeature::LengthChars => "Text length (chars)",
        NumericFeature::ReadingEase => "Reading ease",
        NumericFeature::LexicalDiversity => "Lexical diversity",
        NumericFeature::NumCount => "Amount of numbers",
        NumericFeature::Sentiment => "Sentiment polarity",
        NumericFeature::RegexPosHits => "Positive patterns",
        NumericFeature::RegexNegHits => "Negative patterns",
    }
}

/// Chosen against rejected responses of the baseline set.
pub fn analyze(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let baseline = read_samples(&layout.baseline())?;
    let a = &r.config.analysis;
    let features = feature_preference_report(&baseline, &r.extractor, &NumericFeature::ANALYZED, a.test, Execution::default())?;
    let keywords = keyword_occurrence_report(&baseline, &r.extractor.keywords)?;
    let regex = if r.regex_candidates.is_empty() {
        None
    } else {
        Some(regex_frequency_analysis(&baseline, &r.regex_candidates, a.min_count, a.min_ratio)?)
    };

    let rows: Vec<Vec<String>> = features
        .iter()
        .map(|t| {
            vec![
                feature_label(t.feature).to_string(),
                format!("{:.3}", t.result.mean_chosen),
                format!("{:.3}", t.result.mean_rejected),
                format!("{:.2}", t.result.stat),
                p_cell(t.result.p_value),
            ]
        })
        .collect();
    let mut text = text_table(&["Feature", "Mean chosen", "Mean rejected", "stat", "p-value"], &rows);
    if !keywords.is_empty() {
        text.push('\n');
        let rows: Vec<Vec<String>> = keywords
            .iter()
            .map(|k| vec![k.list.clone(), k.chosen.to_string(), k.rejected.to_string()])
            .collect();
        text.push_str(&text_table(&["Keyword list", "Chosen", "Rejected"], &rows));
    }
    if let Some(sel) = &regex {
        text.push('\n');
        let rows: Vec<Vec<String>> = sel
            .per_pattern
            .iter()
            .map(|p| {
                let side = if sel.positive.contains(&p.pattern) {
                    "positive"
                } else if sel.negative.contains(&p.pattern) {
                    "negative"
                } else {
                    "-"
                };
                vec![p.pattern.clone(), p.count_chosen.to_string(), p.count_rejected.to_string(), side.to_string()]
            })
            .collect();
        text.push_str(&text_table(&["Pattern", "Chosen", "Rejected", "Selected"], &rows));
        let list = |v: &[String]| v.iter().map(|p| format!("{p}\n")).collect::<String>();
        write_text(&layout.file("regex_positive.txt"), &list(&sel.positive))?;
        write_text(&layout.file("regex_negative.txt"), &list(&sel.negative))?;
    }
    write_text(&layout.file("analyze.txt"), &text)?;
    write_json(
        &layout.file("analyze.json"),
        &AnalyzeReport {
            n_samples: baseline.len(),
            test: a.test,
            features,
            keywords,
            regex,
        },
    )
}

fn baseline_lf_report(r: &Resolved, layout: &Layout) -> anyhow::Result<(Vec<Sample>, LabelMatrix, LfReport)> {
    let baseline = read_samples(&layout.baseline())?;
    let matrix = matrix_for(r, &baseline);
    let gold: Vec<Option<Preference>> = baseline.iter().map(|s| s.gold_label).collect();
    let report = lf_report(&matrix, &gold)?;
    Ok((baseline, matrix, report))
}

pub fn lf_stats(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let (_, _, report) = baseline_lf_report(r, layout)?;
    write_text(&layout.file("lf_report.txt"), &report.to_table())?;
    write_json(&layout.file("lf_report.json"), &report)
}

#[derive(Serialize)]
struct FitReport {
    n_rows: usize,
    lf_names: Vec<String>,
    accuracies: Vec<f64>,
    class_prior: f64,
    final_objective: f64,
    /// Pearson correlations between LF vote columns; `null` for constant columns.
    lf_correlations: Vec<Vec<Option<f64>>>,
}

pub fn fit(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let baseline = read_samples(&layout.baseline())?;
    let matrix = matrix_for(r, &baseline);
    let params = labelmodel::fit(&matrix, &r.hyper)?;
    params.save(layout.params())?;
    write_json(
        &layout.file("fit_report.json"),
        &FitReport {
            n_rows: matrix.n_rows(),
            lf_names: params.lf_names.clone(),
            accuracies: params.accuracies(),
            class_prior: params.class_prior,
            final_objective: params.final_objective,
            lf_correlations: lf_correlations(&matrix),
        },
    )
}

fn load_params(r: &Resolved, layout: &Layout) -> anyhow::Result<LabelModelParams> {
    let params = LabelModelParams::load(layout.params())?;
    if params.lf_names != r.lfs.names() {
        anyhow::bail!("{} was fitted with different labeling functions", layout.params().display());
    }
    Ok(params)
}

#[derive(Serialize)]
struct LabelReport {
    n_rows: usize,
    n_labeled: usize,
    n_undecided: usize,
    n_prefer_a: usize,
    n_prefer_b: usize,
    undecided_ids: Vec<String>,
}

pub fn label(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let params = load_params(r, layout)?;
    let weak = read_samples(&layout.weak())?;
    let matrix = matrix_for(r, &weak);
    let labeling = weak_label_dataset(&params, &weak, &matrix)?;
    let by_id: HashMap<&str, &Sample> = weak.iter().map(|s| (s.id.as_str(), s)).collect();
    let labeled: Vec<WeaklyLabeledSample> = labeling
        .predictions
        .iter()
        .map(|p| WeaklyLabeledSample {
            sample: by_id[p.sample_id.as_str()].clone(),
            weak_label: p.weak_label,
            prob_b: p.prob_b,
            confidence: p.confidence,
        })
        .collect();
    save_dataset(&labeled, layout.weak_labeled())?;
    let n_b = labeling.predictions.iter().filter(|p| p.weak_label == Preference::B).count();
    write_json(
        &layout.file("label_report.json"),
        &LabelReport {
            n_rows: weak.len(),
            n_labeled: labeling.predictions.len(),
            n_undecided: labeling.undecided.len(),
            n_prefer_a: labeling.predictions.len() - n_b,
            n_prefer_b: n_b,
            undecided_ids: labeling.undecided,
        },
    )
}

fn read_weak_labeled(layout: &Layout) -> anyhow::Result<(Vec<WeaklyLabeledSample>, Vec<WeakPrediction>)> {
    let path = layout.weak_labeled();
    let labeled = load_weak_dataset(&path)?;
    let preds = labeled
        .iter()
        .map(|w| WeakPrediction {
            sample_id: w.sample.id.clone(),
            prob_b: w.prob_b,
            weak_label: w.weak_label,
            confidence: w.confidence,
        })
        .collect();
    Ok((labeled, preds))
}

fn selection_file(s: &Selection) -> String {
    match s {
        Selection::Baseline => "baseline_only.jsonl".into(),
        Selection::Threshold(t) => format!("min_conf_{t}.jsonl"),
        Selection::TopN(n) => format!("top_{n}.jsonl"),
        Selection::All => "all.jsonl".into(),
    }
}

#[derive(Serialize)]
struct FilterEntry {
    selection: Selection,
    file: String,
    kept: usize,
}

pub fn filter(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let (labeled, preds) = read_weak_labeled(layout)?;
    let dir = layout.file("filtered");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut entries = Vec::new();
    for selection in r.config.filter.selections() {
        let kept: std::collections::HashSet<String> = selection.apply(&preds)?.into_iter().map(|p| p.sample_id).collect();
        let subset: Vec<WeaklyLabeledSample> = labeled.iter().filter(|w| kept.contains(&w.sample.id)).cloned().collect();
        let file = format!("filtered/{}", selection_file(&selection));
        save_dataset(&subset, layout.file(&file))?;
        entries.push(FilterEntry {
            selection,
            file,
            kept: subset.len(),
        });
    }
    write_json(&layout.file("filter_report.json"), &entries)
}

#[derive(Serialize)]
struct GridReport {
    notice: &'static str,
    seeds: Seeds,
    f1: weakpref::evalharness::F1Mode,
    rows: Vec<ExperimentRow>,
}

pub fn grid(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let exec = Execution::default();
    let baseline = read_samples(&layout.baseline())?;
    let eval = read_samples(&layout.eval())?;
    let (labeled, preds) = read_weak_labeled(layout)?;
    let weak_samples: Vec<Sample> = labeled.into_iter().map(|w| w.sample).collect();
    let baseline = gold_examples(&baseline, &r.extractor.extract_pairs(&baseline, exec))?;
    let eval = gold_examples(&eval, &r.extractor.extract_pairs(&eval, exec))?;
    let weak = weak_examples(&preds, &weak_samples, &r.extractor.extract_pairs(&weak_samples, exec))?;
    let settings = GridSettings {
        proxy: r.proxy,
        f1: r.config.proxy.f1,
        exec,
    };
    let rows = experiment_grid(&baseline, &weak, &r.config.filter.selections(), &eval, &settings)?;
    write_text(&layout.file("grid.txt"), &format!("{}\n\n{PROXY_NOTICE}\n", grid_table(&rows).trim_end()))?;
    write_json(
        &layout.file("grid.json"),
        &GridReport {
            notice: PROXY_NOTICE,
            seeds: r.seeds,
            f1: settings.f1,
            rows,
        },
    )
}

#[derive(Serialize)]
struct SelectionAccuracy {
    selection: Selection,
    kept: usize,
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct EvaluateReport {
    lf_report: LfReport,
    train_accuracy: Option<f64>,
    weak_accuracy: Option<f64>,
    n_weak_labeled: usize,
    selections: Vec<SelectionAccuracy>,
}

/// Label-model accuracy on the baseline and, through the hidden gold, on
/// the weak set.
pub fn evaluate(r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
    let params = load_params(r, layout)?;
    let (baseline, matrix, report) = baseline_lf_report(r, layout)?;
    let train = weak_label_dataset(&params, &baseline, &matrix)?;
    let gold: HashMap<&str, Preference> = baseline.iter().filter_map(|s| Some((s.id.as_str(), s.gold_label?))).collect();
    let train_accuracy = (!train.predictions.is_empty())
        .then(|| label_model_accuracy(&train.predictions, &gold))
        .transpose()?;

    let (_, preds) = read_weak_labeled(layout)?;
    let hidden = if layout.hidden_gold().exists() {
        HiddenGold::load(layout.hidden_gold())?
    } else {
        HiddenGold::default()
    };
    let hidden_lookup = hidden.lookup();
    let score = |p: &[WeakPrediction]| -> anyhow::Result<Option<f64>> {
        if p.is_empty() || hidden.is_empty() {
            return Ok(None);
        }
        Ok(Some(label_model_accuracy(p, &hidden_lookup)?))
    };
    let weak_accuracy = score(&preds)?;
    let mut selections = Vec::new();
    for selection in r.config.filter.selections() {
        let kept = selection.apply(&preds)?;
        selections.push(SelectionAccuracy {
            selection,
            kept: kept.len(),
            accuracy: score(&kept)?,
        });
    }

    let pct = |a: Option<f64>| a.map_or("-".to_string(), |a| format!("{:.2}%", 100.0 * a));
    let mut text = text_table(
        &["", "Accuracy on train set", "Accuracy on weak set"],
        &[vec!["Label model".into(), pct(train_accuracy), pct(weak_accuracy)]],
    );
    text.push('\n');
    let rows: Vec<Vec<String>> = selections
        .iter()
        .map(|s| vec![s.selection.label(), s.kept.to_string(), pct(s.accuracy)])
        .collect();
    text.push_str(&text_table(&["Confidence Threshold", "Weakly Labelled", "Accuracy"], &rows));
    write_text(&layout.file("evaluate.txt"), &text)?;
    write_json(
        &layout.file("evaluate.json"),
        &EvaluateReport {
            lf_report: report,
            train_accuracy,
            weak_accuracy,
            n_weak_labeled: preds.len(),
            selections,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Split,
    Analyze,
    LfStats,
    Fit,
    Label,
    Filter,
    Grid,
    Evaluate,
}

impl Stage {
    pub const PIPELINE: [Stage; 8] = [
        Stage::Split,
        Stage::Analyze,
        Stage::LfStats,
        Stage::Fit,
        Stage::Label,
        Stage::Filter,
        Stage::Grid,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Analyze => "analyze",
            Stage::LfStats => "lf-stats",
            Stage::Fit => "fit",
            Stage::Label => "label",
            Stage::Filter => "filter",
            Stage::Grid => "grid",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn run(self, r: &Resolved, layout: &Layout) -> anyhow::Result<()> {
        std::fs::create_dir_all(&layout.out).with_context(|| format!("creating {}", layout.out.display()))?;
        let start = Instant::now();
        let result = match self {
            Stage::Split => split(r, layout),
            Stage::Analyze => analyze(r, layout),
            Stage::LfStats => lf_stats(r, layout),
            Stage::Fit => fit(r, layout),
            Stage::Label => label(r, layout),
            Stage::Filter => filter(r, layout),
            Stage::Grid => grid(r, layout),
            Stage::Evaluate => evaluate(r, layout),
        };
        log::info!("stage {} took {:.3}s", self.name(), start.elapsed().as_secs_f64());
        result.with_context(|| format!("stage {}", self.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = text_table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "a    bb\n---  --\nxyz   1\n");
    }
}
