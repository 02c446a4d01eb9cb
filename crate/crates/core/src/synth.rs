//! Seeded synthetic data: label matrices drawn from the generative label
//! model, and preference corpora whose gold preference is a noisy weighted
//! sum of the response heuristics.

use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{Preference, Sample};
use crate::features::{FeatureExtractor, NumericFeature};
use crate::lfs::{LabelMatrix, Vote};
use crate::rng::{self, Rng};

/// Draws `n` rows: `y ~ Bernoulli(prior_b)`, then each LF abstains with
/// probability `abstain` and otherwise votes `y` with probability `a_j`.
pub fn label_matrix(n: usize, accuracies: &[f64], prior_b: f64, abstain: f64, seed: u64) -> (LabelMatrix, Vec<Preference>) {
    let mut rng = rng::seeded(seed);
    let mut rows = Vec::with_capacity(n);
    let mut gold = Vec::with_capacity(n);
    for _ in 0..n {
        let y = if rng::unit_f64(&mut rng) < prior_b { Preference::B } else { Preference::A };
        let row = accuracies
            .iter()
            .map(|&a| {
                if rng::unit_f64(&mut rng) < abstain {
                    return Vote::Abstain;
                }
                let label = if rng::unit_f64(&mut rng) < a { y } else { y.flip() };
                match label {
                    Preference::A => Vote::PreferA,
                    Preference::B => Vote::PreferB,
                }
            })
            .collect();
        rows.push(row);
        gold.push(y);
    }
    let matrix = LabelMatrix {
        ids: (0..n).map(|i| i.to_string()).collect(),
        lf_names: (0..accuracies.len()).map(|j| format!("lf{j}")).collect(),
        rows,
    };
    (matrix, gold)
}

const SHORT_WORDS: &[&str] = &[
    "the", "a", "it", "is", "to", "and", "of", "in", "we", "you", "can", "will", "this", "that", "with", "for", "on",
    "be", "as", "at", "by", "or", "from", "one", "all", "has", "which", "when", "your", "them", "time", "way", "make",
    "use", "work", "step", "plan", "part", "point", "fact", "list", "thing",
];

const LONG_WORDS: &[&str] = &[
    "information", "particularly", "consideration", "alternatively", "significantly", "organization",
    "responsibility", "understanding", "approximately", "comprehensive", "recommendation", "environmental",
    "individual", "opportunity", "necessary", "development", "situation", "especially", "additional",
    "community", "experience", "available", "potential", "difficulty", "generally", "ultimately",
];

const POSITIVE_WORDS: &[&str] = &["good", "great", "helpful", "useful", "excellent", "nice", "happy", "clear", "safe", "glad"];
const NEGATIVE_WORDS: &[&str] = &["bad", "terrible", "wrong", "poor", "awful", "sad", "problem", "difficult", "useless", "harm"];

fn pick<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    words[rng::below(rng, words.len() as u64) as usize]
}

fn range(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng::unit_f64(rng)
}

/// A random response with its own style: length, vocabulary difficulty,
/// repetitiveness, number density and sentiment lean all vary.
pub fn response_text(rng: &mut Rng) -> String {
    let sentences = 1 + rng::below(rng, 6) as usize;
    let p_long = range(rng, 0.02, 0.45);
    let p_repeat = range(rng, 0.0, 0.5);
    let p_number = range(rng, 0.0, 0.12);
    let p_sentiment = range(rng, 0.0, 0.12);
    let lean = range(rng, -1.0, 1.0);

    let mut used: Vec<String> = Vec::new();
    let mut out = String::new();
    for s in 0..sentences {
        let words = 3 + rng::below(rng, 16) as usize;
        for w in 0..words {
            let u = rng::unit_f64(rng);
            let word = if !used.is_empty() && u < p_repeat {
                used[rng::below(rng, used.len() as u64) as usize].clone()
            } else if u < p_repeat + p_number {
                (1 + rng::below(rng, 999)).to_string()
            } else if u < p_repeat + p_number + p_sentiment {
                let positive = rng::unit_f64(rng) < 0.5 * (1.0 + lean);
                pick(rng, if positive { POSITIVE_WORDS } else { NEGATIVE_WORDS }).to_string()
            } else if rng::unit_f64(rng) < p_long {
                pick(rng, LONG_WORDS).to_string()
            } else {
                pick(rng, SHORT_WORDS).to_string()
            };
            if w > 0 || s > 0 {
                out.push(' ');
            }
            out.push_str(&word);
            used.push(word);
        }
        out.push('.');
    }
    out
}

/// Settings for [`preference_corpus`].
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub n: usize,
    /// `(feature, weight)`; weights apply to `features(B) - features(A)`
    /// divided by that difference's standard deviation over the corpus.
    pub weights: Vec<(NumericFeature, f64)>,
    /// Standard deviation of the Gaussian noise added to the score.
    pub noise: f64,
    pub seed: u64,
}

impl CorpusSpec {
    /// Preferences leaning toward longer, harder to read, more repetitive,
    /// number-rich and more positive responses. The noise is twice the
    /// score's per-feature scale, so many labels go against the heuristics.
    pub fn standard(n: usize, seed: u64) -> Self {
        CorpusSpec {
            n,
            weights: vec![
                (NumericFeature::LengthTokens, 1.0),
                (NumericFeature::ReadingEase, -0.6),
                (NumericFeature::LexicalDiversity, -0.5),
                (NumericFeature::NumCount, 0.7),
                (NumericFeature::Sentiment, 0.8),
            ],
            noise: 2.0,
            seed,
        }
    }
}

/// A labeled corpus of `spec.n` response pairs.
pub fn preference_corpus(spec: &CorpusSpec, extractor: &FeatureExtractor) -> Vec<Sample> {
    let mut rng = rng::seeded(spec.seed);
    let mut samples = Vec::with_capacity(spec.n);
    let mut diffs = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let a = response_text(&mut rng);
        let b = response_text(&mut rng);
        let (fa, fb) = (extractor.extract(&a), extractor.extract(&b));
        diffs.push(
            spec.weights
                .iter()
                .map(|(f, _)| fb.get(*f).unwrap_or(0.0) - fa.get(*f).unwrap_or(0.0))
                .collect::<Vec<f64>>(),
        );
        samples.push(Sample {
            id: format!("syn{i:05}"),
            prompt: format!("Prompt {i}"),
            response_a: a,
            response_b: b,
            gold_label: None,
        });
    }

    let n = spec.n.max(1) as f64;
    let sds: Vec<f64> = (0..spec.weights.len())
        .map(|k| {
            let mean = diffs.iter().map(|d| d[k]).sum::<f64>() / n;
            let sd = (diffs.iter().map(|d| (d[k] - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let mut noise_rng = rng::seeded(rng::derive_seed(spec.seed, "synth-noise"));
    for (sample, diff) in samples.iter_mut().zip(&diffs) {
        let signal: f64 = spec.weights.iter().zip(diff).zip(&sds).map(|(((_, w), d), sd)| w * d / sd).sum();
        let noise: f64 = StandardNormal.sample(&mut noise_rng);
        sample.gold_label = Some(if signal + spec.noise * noise > 0.0 { Preference::B } else { Preference::A });
    }
    samples
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_balanced() {
        let ex = FeatureExtractor::default();
        let spec = CorpusSpec::standard(400, 1);
        let a = preference_corpus(&spec, &ex);
        assert_eq!(a, preference_corpus(&spec, &ex));
        let n_b = a.iter().filter(|s| s.gold_label == Some(Preference::B)).count();
        assert!((140..260).contains(&n_b), "{n_b}");
    }

    #[test]
    fn matrix_matches_requested_accuracy() {
        let (m, gold) = label_matrix(20_000, &[0.8], 0.5, 0.1, 3);
        let cast: Vec<(Vote, Preference)> = m.column(0).zip(gold).filter(|(v, _)| v.is_cast()).collect();
        let acc = cast.iter().filter(|(v, g)| v.preference() == Some(*g)).count() as f64 / cast.len() as f64;
        assert!((acc - 0.8).abs() < 0.02, "{acc}");
        assert!((cast.len() as f64 / 20_000.0 - 0.9).abs() < 0.02);
    }
}
