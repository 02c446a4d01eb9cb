//! Pairwise labeling functions.
//!
//! Each labeling function (LF) looks at the two responses of a sample and
//! votes for one of them or abstains. Numeric LFs compare one feature under
//! configurable cutoffs; the regex LF compares positive minus negative
//! pattern hits; keyword LFs prefer the response with fewer listed words.

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::features::{count_keywords, count_matches, FeatureExtractor, FeatureVector, NumericFeature, PairFeatures};
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vote {
    PreferA,
    PreferB,
    Abstain,
}

impl Vote {
    pub fn mirror(self) -> Self {
        match self {
            Vote::PreferA => Vote::PreferB,
            Vote::PreferB => Vote::PreferA,
            Vote::Abstain => Vote::Abstain,
        }
    }

    pub fn is_cast(self) -> bool {
        self != Vote::Abstain
    }

    pub fn preference(self) -> Option<crate::corpus::Preference> {
        use crate::corpus::Preference;
        match self {
            Vote::PreferA => Some(Preference::A),
            Vote::PreferB => Some(Preference::B),
            Vote::Abstain => None,
        }
    }

    /// Vote for the side with the larger score; abstain on ties.
    pub fn prefer_higher(score_a: f64, score_b: f64) -> Self {
        if score_a > score_b {
            Vote::PreferA
        } else if score_b > score_a {
            Vote::PreferB
        } else {
            Vote::Abstain
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    PreferHigher,
    PreferLower,
}

fn default_true() -> bool {
    true
}

/// One labeling function as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LfSpec {
    Numeric {
        name: String,
        /// A feature name, or `length` for the configured length unit.
        feature: String,
        #[serde(default)]
        direction: Direction,
        #[serde(default)]
        min_diff: f64,
        /// Inclusive `[lo, hi]`; abstain when either side falls outside.
        #[serde(default)]
        range: Option<(f64, f64)>,
        #[serde(default = "default_true")]
        enabled: bool,
    },
    Regex {
        name: String,
        #[serde(default = "default_true")]
        enabled: bool,
    },
    Keywords {
        name: String,
        list: String,
        #[serde(default = "default_true")]
        enabled: bool,
    },
}

impl LfSpec {
    pub fn name(&self) -> &str {
        match self {
            LfSpec::Numeric { name, .. } | LfSpec::Regex { name, .. } | LfSpec::Keywords { name, .. } => name,
        }
    }

    pub fn enabled(&self) -> bool {
        match self {
            LfSpec::Numeric { enabled, .. } | LfSpec::Regex { enabled, .. } | LfSpec::Keywords { enabled, .. } => *enabled,
        }
    }

    pub fn numeric(name: &str, feature: &str, direction: Direction) -> Self {
        LfSpec::Numeric {
            name: name.to_string(),
            feature: feature.to_string(),
            direction,
            min_diff: 0.0,
            range: None,
            enabled: true,
        }
    }
}

/// The default LF set for a fresh dataset: every numeric heuristic with
/// no cutoffs, directed as longer, harder to read, less lexically diverse,
/// more numbers and more positive responses are preferred.
pub fn default_specs() -> Vec<LfSpec> {
    vec![
        LfSpec::numeric("length", "length", Direction::PreferHigher),
        LfSpec::numeric("reading_ease", "reading_ease", Direction::PreferLower),
        LfSpec::numeric("lexical_diversity", "lexical_diversity", Direction::PreferLower),
        LfSpec::numeric("numbers", "num_count", Direction::PreferHigher),
        LfSpec::numeric("sentiment", "sentiment", Direction::PreferHigher),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericLf {
    pub feature: NumericFeature,
    pub direction: Direction,
    pub min_diff: f64,
    pub range: Option<(f64, f64)>,
}

impl NumericLf {
    pub fn vote(&self, fa: Option<f64>, fb: Option<f64>) -> Vote {
        let (Some(fa), Some(fb)) = (fa, fb) else {
            return Vote::Abstain;
        };
        if let Some((lo, hi)) = self.range {
            if !(lo..=hi).contains(&fa) || !(lo..=hi).contains(&fb) {
                return Vote::Abstain;
            }
        }
        let diff = (fa - fb).abs();
        if diff == 0.0 || diff < self.min_diff {
            return Vote::Abstain;
        }
        match self.direction {
            Direction::PreferHigher => Vote::prefer_higher(fa, fb),
            Direction::PreferLower => Vote::prefer_higher(fb, fa),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LfKind {
    Numeric(NumericLf),
    Regex,
    Keywords { list: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelingFunction {
    pub name: String,
    pub kind: LfKind,
}

impl LabelingFunction {
    pub fn vote(&self, a: &FeatureVector, b: &FeatureVector) -> Vote {
        match &self.kind {
            LfKind::Numeric(lf) => lf.vote(a.get(lf.feature), b.get(lf.feature)),
            LfKind::Regex => {
                let score = |v: &FeatureVector| v.regex_pos_hits as f64 - v.regex_neg_hits as f64;
                Vote::prefer_higher(score(a), score(b))
            }
            LfKind::Keywords { list } => {
                let hits = |v: &FeatureVector| v.keyword_hits.get(list).copied().unwrap_or(0) as f64;
                Vote::prefer_higher(hits(b), hits(a))
            }
        }
    }
}

/// The enabled labeling functions, in config order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabelingFunctions {
    pub lfs: Vec<LabelingFunction>,
}

impl LabelingFunctions {
    /// Validates specs against the extractor: feature names must exist,
    /// keyword lists must be loaded, cutoffs must be sane.
    pub fn build(specs: &[LfSpec], extractor: &FeatureExtractor) -> Result<Self> {
        let mut lfs = Vec::new();
        let mut names = std::collections::HashSet::new();
        for spec in specs {
            if !names.insert(spec.name().to_string()) {
                return Err(Error::InvalidArgument(format!("duplicate labeling function {:?}", spec.name())));
            }
            if !spec.enabled() {
                continue;
            }
            let kind = match spec {
                LfSpec::Numeric {
                    feature,
                    direction,
                    min_diff,
                    range,
                    ..
                } => {
                    if !(*min_diff >= 0.0) {
                        return Err(Error::InvalidArgument(format!("{}: min_diff must be >= 0", spec.name())));
                    }
                    if let Some((lo, hi)) = range {
                        if !(lo <= hi) {
                            return Err(Error::InvalidArgument(format!("{}: range lo > hi", spec.name())));
                        }
                    }
                    LfKind::Numeric(NumericLf {
                        feature: NumericFeature::resolve(feature, extractor.length_unit)?,
                        direction: *direction,
                        min_diff: *min_diff,
                        range: *range,
                    })
                }
                LfSpec::Regex { .. } => {
                    if extractor.positive.is_empty() && extractor.negative.is_empty() {
                        return Err(Error::InvalidArgument(format!(
                            "{}: regex labeling function needs regex_positive or regex_negative",
                            spec.name()
                        )));
                    }
                    LfKind::Regex
                }
                LfSpec::Keywords { list, .. } => {
                    if !extractor.keywords.contains_key(list) {
                        return Err(Error::UnknownKeywordList(list.clone()));
                    }
                    LfKind::Keywords { list: list.clone() }
                }
            };
            lfs.push(LabelingFunction {
                name: spec.name().to_string(),
                kind,
            });
        }
        Ok(LabelingFunctions { lfs })
    }

    pub fn names(&self) -> Vec<String> {
        self.lfs.iter().map(|lf| lf.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.lfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lfs.is_empty()
    }

    pub fn vote_pair(&self, pair: &PairFeatures) -> Vec<Vote> {
        self.lfs.iter().map(|lf| lf.vote(&pair.a, &pair.b)).collect()
    }

    pub fn label_features(&self, ids: Vec<String>, pairs: &[PairFeatures], exec: Execution) -> LabelMatrix {
        let rows = par::map(pairs, exec, |p| self.vote_pair(p));
        LabelMatrix {
            ids,
            lf_names: self.names(),
            rows,
        }
    }

    pub fn apply_all_with(&self, samples: &[Sample], extractor: &FeatureExtractor, exec: Execution) -> LabelMatrix {
        let rows = par::map(samples, exec, |s| self.vote_pair(&extractor.extract_pair(s)));
        LabelMatrix {
            ids: samples.iter().map(|s| s.id.clone()).collect(),
            lf_names: self.names(),
            rows,
        }
    }
}

/// Votes of every enabled LF on every sample.
pub fn apply_all(samples: &[Sample], extractor: &FeatureExtractor, lfs: &LabelingFunctions) -> LabelMatrix {
    lfs.apply_all_with(samples, extractor, Execution::default())
}

/// Votes with the first enabled numeric LF on `feature_name`.
pub fn lf_numeric(feature_name: &str, fa: Option<f64>, fb: Option<f64>, lfs: &LabelingFunctions) -> Result<Vote> {
    let wanted: NumericFeature = feature_name.parse()?;
    lfs.lfs
        .iter()
        .find_map(|lf| match &lf.kind {
            LfKind::Numeric(n) if n.feature == wanted => Some(n.vote(fa, fb)),
            _ => None,
        })
        .ok_or_else(|| Error::UnknownFeature(feature_name.to_string()))
}

pub fn lf_regex(text_a: &str, text_b: &str, extractor: &FeatureExtractor) -> Vote {
    let score = |t: &str| count_matches(&extractor.positive, t) as f64 - count_matches(&extractor.negative, t) as f64;
    Vote::prefer_higher(score(text_a), score(text_b))
}

pub fn lf_keywords(text_a: &str, text_b: &str, list_name: &str, extractor: &FeatureExtractor) -> Result<Vote> {
    let list = extractor
        .keywords
        .get(list_name)
        .ok_or_else(|| Error::UnknownKeywordList(list_name.to_string()))?;
    Ok(Vote::prefer_higher(
        count_keywords(list, text_b) as f64,
        count_keywords(list, text_a) as f64,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    pub ids: Vec<String>,
    pub lf_names: Vec<String>,
    pub rows: Vec<Vec<Vote>>,
}

impl LabelMatrix {
    pub fn new(ids: Vec<String>, lf_names: Vec<String>, rows: Vec<Vec<Vote>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Shape(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != lf_names.len()) {
            return Err(Error::Shape(format!(
                "row {i} has {} votes, expected {}",
                row.len(),
                lf_names.len()
            )));
        }
        Ok(LabelMatrix { ids, lf_names, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_lfs(&self) -> usize {
        self.lf_names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Vote> + '_ {
        self.rows.iter().map(move |r| r[j])
    }
}
