//! Chosen-versus-rejected data analysis: independent t-tests over response
//! features, regex frequency selection and keyword occurrence counts.

use std::collections::{BTreeMap, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::features::{compile_patterns, count_keywords, FeatureExtractor, NumericFeature};
use crate::par::{self, Execution};

// Lanczos approximation, g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 100_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return h;
        }
    }
    log::warn!("incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})");
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Student t cumulative distribution function.
pub fn t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * regularized_incomplete_beta(dof / (dof + t * t), 0.5 * dof, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(dof / (dof + t * t), 0.5 * dof, 0.5).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestVariant {
    /// Unequal variances, Welch-Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n1 + n2 - 2` degrees of freedom.
    Student,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub stat: f64,
    pub p_value: f64,
    pub dof: f64,
    pub mean_chosen: f64,
    pub mean_rejected: f64,
    pub n_chosen: usize,
    pub n_rejected: usize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn t_test(xs: &[f64], ys: &[f64], variant: TestVariant) -> Result<TTestResult> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "t-test needs at least 2 points per sample, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (se2, dof) = match variant {
        TestVariant::Welch => {
            let (qx, qy) = (vx / nx, vy / ny);
            let se2 = qx + qy;
            let denom = qx * qx / (nx - 1.0) + qy * qy / (ny - 1.0);
            let dof = if denom > 0.0 { se2 * se2 / denom } else { nx + ny - 2.0 };
            (se2, dof)
        }
        TestVariant::Student => {
            let dof = nx + ny - 2.0;
            let pooled = ((nx - 1.0) * vx + (ny - 1.0) * vy) / dof;
            (pooled * (1.0 / nx + 1.0 / ny), dof)
        }
    };
    let diff = mx - my;
    let (stat, p_value) = if se2 > 0.0 {
        let stat = diff / se2.sqrt();
        (stat, t_two_sided_p(stat, dof))
    } else if diff == 0.0 {
        (0.0, 1.0)
    } else {
        (diff.signum() * f64::INFINITY, 0.0)
    };
    Ok(TTestResult {
        stat,
        p_value,
        dof,
        mean_chosen: mx,
        mean_rejected: my,
        n_chosen: xs.len(),
        n_rejected: ys.len(),
    })
}

pub fn welch_t_test(xs: &[f64], ys: &[f64]) -> Result<TTestResult> {
    t_test(xs, ys, TestVariant::Welch)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTest {
    pub feature: NumericFeature,
    pub result: TTestResult,
}

fn labeled_pairs(samples: &[Sample]) -> Result<Vec<(&str, &str)>> {
    samples
        .iter()
        .map(|s| s.chosen_rejected().ok_or_else(|| Error::MissingGold(s.id.clone())))
        .collect()
}

/// One t-test per feature, chosen-side values against rejected-side values.
/// Undefined values (empty responses) are left out of their side.
pub fn feature_preference_report(
    samples: &[Sample],
    extractor: &FeatureExtractor,
    features: &[NumericFeature],
    variant: TestVariant,
    exec: Execution,
) -> Result<Vec<FeatureTest>> {
    let pairs = labeled_pairs(samples)?;
    let vectors = par::map(&pairs, exec, |(c, r)| (extractor.extract(c), extractor.extract(r)));
    par::try_map(features, exec, |&feature| {
        let chosen: Vec<f64> = vectors.iter().filter_map(|(c, _)| c.get(feature)).collect();
        let rejected: Vec<f64> = vectors.iter().filter_map(|(_, r)| r.get(feature)).collect();
        Ok(FeatureTest {
            feature,
            result: t_test(&chosen, &rejected, variant)?,
        })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternCount {
    pub pattern: String,
    pub count_chosen: usize,
    pub count_rejected: usize,
    /// `count_chosen / count_rejected`; absent when nothing was rejected.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegexSelection {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub per_pattern: Vec<PatternCount>,
    pub min_count: usize,
    pub min_ratio: f64,
}

/// Selection rule: a pattern is positive when it occurs at least
/// `(1 + min_ratio)` times as often in chosen as in rejected responses and
/// at least `min_count` times overall; negative symmetrically.
pub fn select_pattern(count_chosen: usize, count_rejected: usize, min_count: usize, min_ratio: f64) -> Option<bool> {
    if count_chosen + count_rejected < min_count {
        return None;
    }
    let (c, r) = (count_chosen as f64, count_rejected as f64);
    if c >= (1.0 + min_ratio) * r && c > r {
        Some(true)
    } else if r >= (1.0 + min_ratio) * c && r > c {
        Some(false)
    } else {
        None
    }
}

pub fn regex_frequency_analysis(
    samples: &[Sample],
    candidates: &[String],
    min_count: usize,
    min_ratio: f64,
) -> Result<RegexSelection> {
    let pairs = labeled_pairs(samples)?;
    let compiled: Vec<Regex> = compile_patterns(candidates)?;
    let mut selection = RegexSelection {
        min_count,
        min_ratio,
        ..RegexSelection::default()
    };
    for (pattern, regex) in candidates.iter().zip(&compiled) {
        let count_chosen: usize = pairs.iter().map(|(c, _)| regex.find_iter(c).count()).sum();
        let count_rejected: usize = pairs.iter().map(|(_, r)| regex.find_iter(r).count()).sum();
        match select_pattern(count_chosen, count_rejected, min_count, min_ratio) {
            Some(true) => selection.positive.push(pattern.clone()),
            Some(false) => selection.negative.push(pattern.clone()),
            None => {}
        }
        selection.per_pattern.push(PatternCount {
            pattern: pattern.clone(),
            count_chosen,
            count_rejected,
            ratio: (count_rejected > 0).then(|| count_chosen as f64 / count_rejected as f64),
        });
    }
    Ok(selection)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordOccurrence {
    pub list: String,
    pub chosen: usize,
    pub rejected: usize,
}

/// Occurrences (not documents) of each list's words per side.
pub fn keyword_occurrence_report(
    samples: &[Sample],
    lists: &BTreeMap<String, HashSet<String>>,
) -> Result<Vec<KeywordOccurrence>> {
    let pairs = labeled_pairs(samples)?;
    Ok(lists
        .iter()
        .map(|(name, words)| KeywordOccurrence {
            list: name.clone(),
            chosen: pairs.iter().map(|(c, _)| count_keywords(words, c)).sum(),
            rejected: pairs.iter().map(|(_, r)| count_keywords(words, r)).sum(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Preference;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identical_samples() {
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.stat, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_samples() {
        let r = welch_t_test(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((r.stat, r.p_value), (0.0, 1.0));
        let r = welch_t_test(&[3.0, 3.0], &[2.0, 2.0]).unwrap();
        assert_eq!((r.stat, r.p_value), (f64::INFINITY, 0.0));
    }

    #[test]
    fn too_few_points() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn worked_example_against_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_abs_diff_eq!(r.stat, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.dof, 8.0, epsilon = 1e-12);
        let dist = StudentsT::new(0.0, 1.0, 8.0).unwrap();
        assert_abs_diff_eq!(r.p_value, 2.0 * dist.cdf(-1.0), epsilon = 1e-10);
    }

    #[test]
    fn t_cdf_against_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for dof in [1.0, 2.5, 8.0, 30.0, 1000.0] {
            let dist = StudentsT::new(0.0, 1.0, dof).unwrap();
            for t in [-12.0, -3.0, -1.0, -0.1, 0.0, 0.4, 2.0, 7.5] {
                let ours = t_cdf(t, dof);
                let theirs = dist.cdf(t);
                assert!((ours - theirs).abs() <= 1e-8 * theirs.max(1e-300) + 1e-14, "t={t} dof={dof}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn large_dof_approaches_normal() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        for t in [-3.0, -1.5, -0.5, 0.5, 1.0, 2.5] {
            assert!((t_cdf(t, 1e6) - normal.cdf(t)).abs() < 1e-4);
        }
    }

    #[test]
    fn student_variant() {
        let r = t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0], TestVariant::Student).unwrap();
        assert_abs_diff_eq!(r.stat, -1.0, epsilon = 1e-12);
        assert_eq!(r.dof, 8.0);
    }

    #[test]
    fn selection_rule() {
        assert_eq!(select_pattern(120, 100, 20, 0.10), Some(true));
        assert_eq!(select_pattern(105, 100, 20, 0.10), None);
        assert_eq!(select_pattern(6, 2, 20, 0.10), None);
        assert_eq!(select_pattern(100, 120, 20, 0.10), Some(false));
        assert_eq!(select_pattern(0, 0, 0, 0.10), None);
    }

    fn labeled(chosen: &str, rejected: &str) -> Sample {
        Sample {
            id: chosen.to_string(),
            prompt: String::new(),
            response_a: chosen.to_string(),
            response_b: rejected.to_string(),
            gold_label: Some(Preference::A),
        }
    }

    #[test]
    fn keyword_counts_occurrences() {
        let samples = vec![labeled("badword and badword", "fine")];
        let lists: BTreeMap<_, _> = [
            ("offensive".to_string(), ["badword".to_string()].into_iter().collect()),
            ("empty".to_string(), HashSet::new()),
        ]
        .into();
        let report = keyword_occurrence_report(&samples, &lists).unwrap();
        assert_eq!(report[1], KeywordOccurrence { list: "offensive".into(), chosen: 2, rejected: 0 });
        assert_eq!(report[0], KeywordOccurrence { list: "empty".into(), chosen: 0, rejected: 0 });
    }

    #[test]
    fn unlabeled_rejected() {
        let mut s = labeled("x", "y");
        s.gold_label = None;
        assert!(matches!(regex_frequency_analysis(&[s], &[], 20, 0.1), Err(Error::MissingGold(_))));
    }

    #[test]
    fn invalid_pattern_named() {
        let err = regex_frequency_analysis(&[labeled("x", "y")], &["(".to_string()], 1, 0.1).unwrap_err();
        assert!(err.to_string().contains("\"(\""), "{err}");
    }

    #[test]
    fn strictly_longer_chosen_has_positive_stat() {
        let samples: Vec<Sample> = (0..20)
            .map(|i| labeled(&"word ".repeat(10 + i % 5), &"word ".repeat(3 + i % 3)))
            .collect();
        let report = feature_preference_report(
            &samples,
            &FeatureExtractor::default(),
            &NumericFeature::ANALYZED[..5],
            TestVariant::Welch,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(report.len(), 5);
        assert!(report[0].result.stat > 0.0);
    }

    proptest! {
        #[test]
        fn swap_negates_stat(xs in prop::collection::vec(-100.0f64..100.0, 2..20), ys in prop::collection::vec(-100.0f64..100.0, 2..20)) {
            let ab = welch_t_test(&xs, &ys).unwrap();
            let ba = welch_t_test(&ys, &xs).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
            prop_assert_eq!(ab.stat, -ba.stat);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        }

        #[test]
        fn selection_monotone(c in 0usize..500, r in 0usize..500, count in 0usize..100, ratio in 0.0f64..1.0, bump_count in 0usize..50, bump_ratio in 0.0f64..0.5) {
            if select_pattern(c, r, count + bump_count, ratio + bump_ratio).is_some() {
                prop_assert_eq!(select_pattern(c, r, count + bump_count, ratio + bump_ratio), select_pattern(c, r, count, ratio));
            }
        }
    }
}
