use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use weakpref::evalharness::{F1Mode, ProxyHyper, Selection};
use weakpref::lfs::default_specs;
use weakpref::stats::TestVariant;
use weakpref::{FeatureConfig, FeatureExtractor, LabelModelHyper, LabelingFunctions, LfSpec};

pub const INPUT_ENV: &str = "WEAKPREF_INPUT";
pub const OUT_DIR_ENV: &str = "WEAKPREF_OUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub eval_frac: f64,
    pub baseline_frac: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            eval_frac: 0.1,
            baseline_frac: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub thresholds: Vec<f64>,
    pub top_n: Vec<usize>,
    /// Also add a row with every decided weak label.
    pub include_all: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            thresholds: vec![0.9, 0.8, 0.7, 0.6],
            top_n: Vec::new(),
            include_all: true,
        }
    }
}

impl FilterConfig {
    pub fn selections(&self) -> Vec<Selection> {
        let mut out: Vec<Selection> = self.top_n.iter().map(|&n| Selection::TopN(n)).collect();
        out.extend(self.thresholds.iter().map(|&t| Selection::Threshold(t)));
        if self.include_all {
            out.push(Selection::All);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyConfig {
    pub epochs: Option<usize>,
    pub step_size: Option<f64>,
    pub f1: F1Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// One candidate regex per line.
    pub regex_candidates: Option<PathBuf>,
    pub min_count: usize,
    pub min_ratio: f64,
    pub test: TestVariant,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            regex_candidates: None,
            min_count: 20,
            min_ratio: 0.1,
            test: TestVariant::Welch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelModelConfig {
    pub epochs: usize,
    pub l2: f64,
    pub step_size: f64,
    pub learn_prior: bool,
}

impl Default for LabelModelConfig {
    fn default() -> Self {
        let h = LabelModelHyper::default();
        LabelModelConfig {
            epochs: h.epochs,
            l2: h.l2,
            step_size: h.step_size,
            learn_prior: h.learn_prior,
        }
    }
}

/// The config file. Every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub features: FeatureConfig,
    /// Labeling functions; the numeric defaults when empty.
    pub lf: Vec<LfSpec>,
    pub label_model: LabelModelConfig,
    pub filter: FilterConfig,
    pub proxy: ProxyConfig,
    pub analysis: AnalysisConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Per-stage seeds, all derived from the top-level seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Seeds {
    pub root: u64,
    pub split: u64,
    pub orient: u64,
    pub label_model: u64,
    pub proxy: u64,
}

impl Seeds {
    pub fn new(root: u64) -> Self {
        use weakpref::rng::derive_seed;
        Seeds {
            root,
            split: derive_seed(root, "split"),
            orient: derive_seed(root, "orient"),
            label_model: derive_seed(root, "label_model"),
            proxy: derive_seed(root, "proxy"),
        }
    }
}

/// A validated config with every referenced file loaded.
#[derive(Debug)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub seeds: Seeds,
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub extractor: FeatureExtractor,
    pub lfs: LabelingFunctions,
    pub hyper: LabelModelHyper,
    pub proxy: ProxyHyper,
    pub regex_candidates: Vec<String>,
}

/// Values given on the command line; `None` leaves the config value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub eval_frac: Option<f64>,
    pub baseline_frac: Option<f64>,
    pub thresholds: Vec<f64>,
    pub top_n: Vec<usize>,
}

fn resolve_path(base: &Path, path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        path
    } else {
        base.join(path)
    }
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Applies overrides (flags, then environment for paths, then the file)
/// and checks every value a stage could trip over.
pub fn resolve(config: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Resolved> {
    let (mut config, base) = match config {
        Some(path) => (
            PipelineConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (PipelineConfig::default(), PathBuf::new()),
    };
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(f) = overrides.eval_frac {
        config.split.eval_frac = f;
    }
    if let Some(f) = overrides.baseline_frac {
        config.split.baseline_frac = f;
    }
    if !overrides.thresholds.is_empty() || !overrides.top_n.is_empty() {
        config.filter.thresholds = overrides.thresholds.clone();
        config.filter.top_n = overrides.top_n.clone();
    }

    let input = overrides
        .input
        .clone()
        .or_else(|| env_path(INPUT_ENV))
        .or_else(|| config.data.input.clone().map(|p| resolve_path(&base, p)));
    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| env_path(OUT_DIR_ENV))
        .or_else(|| config.data.out_dir.clone().map(|p| resolve_path(&base, p)))
        .unwrap_or_else(|| PathBuf::from("weakpref-out"));

    let split = &config.split;
    if !(0.0..1.0).contains(&split.eval_frac) {
        bail!("split.eval_frac {} not in [0, 1)", split.eval_frac);
    }
    if !(split.baseline_frac > 0.0 && split.baseline_frac < 1.0) {
        bail!("split.baseline_frac {} not in (0, 1)", split.baseline_frac);
    }
    if split.eval_frac + split.baseline_frac >= 1.0 {
        bail!("split.eval_frac + split.baseline_frac must be < 1");
    }
    for &t in &config.filter.thresholds {
        if !(0.5..=1.0).contains(&t) {
            bail!("filter threshold {t} not in [0.5, 1]");
        }
    }
    if config.filter.top_n.contains(&0) {
        bail!("filter top_n entries must be >= 1");
    }
    let analysis = &config.analysis;
    if !(analysis.min_ratio >= 0.0) {
        bail!("analysis.min_ratio must be >= 0");
    }

    let seeds = Seeds::new(config.seed);
    let lm = &config.label_model;
    let hyper = LabelModelHyper {
        epochs: lm.epochs,
        l2: lm.l2,
        step_size: lm.step_size,
        seed: seeds.label_model,
        learn_prior: lm.learn_prior,
    };
    hyper.validate()?;
    let defaults = ProxyHyper::default();
    let proxy = ProxyHyper {
        epochs: config.proxy.epochs.unwrap_or(defaults.epochs),
        step_size: config.proxy.step_size.unwrap_or(defaults.step_size),
        seed: seeds.proxy,
    };
    if proxy.epochs == 0 || !(proxy.step_size > 0.0) {
        bail!("proxy epochs and step_size must be positive");
    }

    let extractor = config.features.build(&base).context("features")?;
    let specs = if config.lf.is_empty() { default_specs() } else { config.lf.clone() };
    let lfs = LabelingFunctions::build(&specs, &extractor).context("labeling functions")?;
    if lfs.is_empty() {
        bail!("no enabled labeling functions");
    }
    let regex_candidates = match &analysis.regex_candidates {
        Some(path) => {
            let path = resolve_path(&base, path.clone());
            let patterns = weakpref::features::read_list_file(&path)?;
            weakpref::features::compile_patterns(&patterns)?;
            patterns
        }
        None => Vec::new(),
    };

    Ok(Resolved {
        config,
        seeds,
        input,
        out_dir,
        extractor,
        lfs,
        hyper,
        proxy,
        regex_candidates,
    })
}
