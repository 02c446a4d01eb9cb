//! Lexicon and rule based polarity scoring.
//!
//! The score of a text is the sum `S` of per-token valences after four
//! rules, normalized as `S / sqrt(S^2 + alpha)`:
//!
//! * a negator among the three preceding tokens scales the valence by `-0.74`;
//! * a booster directly before the token adds its increment toward the
//!   token's sign (negative increments dampen);
//! * an ALL-CAPS sentiment token is scaled by `1.25`;
//! * each trailing `!` (at most three) adds `0.292` toward the sign of `S`.
//!
//! This is a reduced rule set: no idioms, no contrastive-conjunction
//! reweighting.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::tokenize;

const DEMO_LEXICON: &str = include_str!("../data/demo_lexicon.tsv");

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lexicon {
    pub entries: HashMap<String, f64>,
    pub boosters: HashMap<String, f64>,
    pub negators: HashSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentimentRules {
    pub negation_scalar: f64,
    pub negation_window: usize,
    pub caps_scalar: f64,
    pub exclamation_increment: f64,
    pub exclamation_max: usize,
    pub alpha: f64,
}

impl Default for SentimentRules {
    fn default() -> Self {
        SentimentRules {
            negation_scalar: -0.74,
            negation_window: 3,
            caps_scalar: 1.25,
            exclamation_increment: 0.292,
            exclamation_max: 3,
            alpha: 15.0,
        }
    }
}

#[derive(Clone, Copy)]
enum Section {
    Entries,
    Boosters,
    Negators,
}

impl Lexicon {
    /// The small lexicon shipped with the crate.
    pub fn demo() -> Self {
        Self::parse(DEMO_LEXICON, Path::new("<demo lexicon>")).expect("bundled lexicon parses")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        let mut section = Section::Entries;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                msg,
            };
            match line {
                "[entries]" | "[lexicon]" => {
                    section = Section::Entries;
                    continue;
                }
                "[boosters]" => {
                    section = Section::Boosters;
                    continue;
                }
                "[negators]" => {
                    section = Section::Negators;
                    continue;
                }
                _ if line.starts_with('[') => return Err(parse_err(format!("unknown section {line}"))),
                _ => {}
            }
            if let Section::Negators = section {
                lexicon.negators.insert(line.to_lowercase());
                continue;
            }
            let mut parts = line.split('\t');
            let token = parts.next().unwrap_or_default().trim().to_lowercase();
            let value = parts
                .next()
                .ok_or_else(|| parse_err(format!("expected token<TAB>value, got {line:?}")))?
                .trim();
            let value: f64 = value
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(format!("unparsable value {value:?}")))?;
            let table = match section {
                Section::Entries => &mut lexicon.entries,
                _ => &mut lexicon.boosters,
            };
            if table.insert(token.clone(), value).is_some() {
                log::warn!("{}:{}: duplicate token {token:?}, last value wins", origin.display(), idx + 1);
            }
        }
        if lexicon.entries.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        Ok(lexicon)
    }
}

fn is_all_caps(token: &str) -> bool {
    let mut letters = 0;
    for c in token.chars().filter(|c| c.is_alphabetic()) {
        if !c.is_uppercase() {
            return false;
        }
        letters += 1;
    }
    letters >= 2
}

/// The unnormalized valence sum `S`.
pub fn valence_sum(text: &str, lexicon: &Lexicon, rules: &SentimentRules) -> f64 {
    let tokens = tokenize(text);
    let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    let mut sum = 0.0;
    for (i, token) in tokens.iter().enumerate() {
        let Some(&base) = lexicon.entries.get(&lowered[i]) else {
            continue;
        };
        let mut valence = base;
        if is_all_caps(token) {
            valence *= rules.caps_scalar;
        }
        if i > 0 {
            if let Some(&increment) = lexicon.boosters.get(&lowered[i - 1]) {
                valence += increment * valence.signum();
            }
        }
        let window = &lowered[i.saturating_sub(rules.negation_window)..i];
        if window.iter().any(|t| lexicon.negators.contains(t)) {
            valence *= rules.negation_scalar;
        }
        sum += valence;
    }

    let exclamations = text.trim_end().chars().rev().take_while(|&c| c == '!').count();
    if sum != 0.0 {
        sum += sum.signum() * exclamations.min(rules.exclamation_max) as f64 * rules.exclamation_increment;
    }
    sum
}

pub fn normalize(sum: f64, alpha: f64) -> f64 {
    sum / (sum * sum + alpha).sqrt()
}

/// Compound polarity in (-1, 1). Zero when no lexicon token occurs.
pub fn polarity(text: &str, lexicon: &Lexicon, rules: &SentimentRules) -> f64 {
    normalize(valence_sum(text, lexicon, rules), rules.alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lex(entries: &[(&str, f64)]) -> Lexicon {
        let mut lexicon = Lexicon::demo();
        lexicon.entries = entries.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        lexicon
    }

    #[test]
    fn single_token() {
        let lexicon = lex(&[("good", 1.9)]);
        // 1.9 / sqrt(1.9^2 + 15)
        assert_abs_diff_eq!(polarity("good", &lexicon, &SentimentRules::default()), 0.440_434, epsilon = 1e-5);
    }

    #[test]
    fn negated() {
        let lexicon = lex(&[("good", 1.9)]);
        // s = -0.74 * 1.9 = -1.406; s / sqrt(s^2 + 15)
        assert_abs_diff_eq!(polarity("not good", &lexicon, &SentimentRules::default()), -0.341_237, epsilon = 1e-5);
    }

    #[test]
    fn empty_is_neutral() {
        assert_eq!(polarity("", &Lexicon::demo(), &SentimentRules::default()), 0.0);
        assert_eq!(polarity("the table", &Lexicon::demo(), &SentimentRules::default()), 0.0);
    }

    #[test]
    fn booster_caps_and_exclamation() {
        let lexicon = lex(&[("good", 1.9), ("bad", -2.5)]);
        let rules = SentimentRules::default();
        assert_abs_diff_eq!(valence_sum("very good", &lexicon, &rules), 1.9 + 0.293, epsilon = 1e-12);
        assert_abs_diff_eq!(valence_sum("very bad", &lexicon, &rules), -2.5 - 0.293, epsilon = 1e-12);
        assert_abs_diff_eq!(valence_sum("slightly good", &lexicon, &rules), 1.9 - 0.293, epsilon = 1e-12);
        assert_abs_diff_eq!(valence_sum("GOOD", &lexicon, &rules), 1.9 * 1.25, epsilon = 1e-12);
        assert_abs_diff_eq!(valence_sum("good!!!!!", &lexicon, &rules), 1.9 + 3.0 * 0.292, epsilon = 1e-12);
        assert_abs_diff_eq!(valence_sum("bad!", &lexicon, &rules), -2.5 - 0.292, epsilon = 1e-12);
        assert_abs_diff_eq!(valence_sum("not a very good", &lexicon, &rules), -0.74 * (1.9 + 0.293), epsilon = 1e-12);
        // negator outside the three-token window
        assert_abs_diff_eq!(valence_sum("not a b c good", &lexicon, &rules), 1.9, epsilon = 1e-12);
    }

    #[test]
    fn lexicon_parsing() {
        let lexicon = Lexicon::parse("good\t1.9\n", Path::new("x")).unwrap();
        assert_eq!(lexicon.entries["good"], 1.9);
        let err = Lexicon::parse("ok\t1\ngood\tX\n", Path::new("x")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(Lexicon::parse("", Path::new("x")), Err(Error::EmptyLexicon)));
        let dup = Lexicon::parse("good\t1\ngood\t2\n", Path::new("x")).unwrap();
        assert_eq!(dup.entries["good"], 2.0);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec![
            "good", "bad", "not", "very", "slightly", "GREAT", "awful", "the", "cat", "never", "HATE", "sat",
        ])
        .prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn bounded_and_sign_consistent(words in prop::collection::vec(word(), 0..30), bangs in 0usize..5) {
            let text = format!("{}{}", words.join(" "), "!".repeat(bangs));
            let rules = SentimentRules::default();
            let lexicon = Lexicon::demo();
            let s = valence_sum(&text, &lexicon, &rules);
            let p = polarity(&text, &lexicon, &rules);
            prop_assert!(p > -1.0 && p < 1.0);
            prop_assert_eq!(p.signum() == s.signum() || s == 0.0, true);
        }

        #[test]
        fn antisymmetric_under_valence_negation(words in prop::collection::vec(word(), 0..30)) {
            let text = words.join(" ");
            let rules = SentimentRules::default();
            let lexicon = Lexicon::demo();
            let mut negated = lexicon.clone();
            negated.entries.values_mut().for_each(|v| *v = -*v);
            prop_assert!((polarity(&text, &lexicon, &rules) + polarity(&text, &negated, &rules)).abs() < 1e-12);
        }

        #[test]
        fn appending_positive_token_never_decreases(words in prop::collection::vec(word(), 0..30)) {
            let text = words.join(" ");
            let rules = SentimentRules::default();
            let lexicon = Lexicon::demo();
            // "wonderful" is preceded by "cat": neither booster nor negator
            let extended = format!("{text} cat cat cat wonderful");
            let base = format!("{text} cat cat cat");
            prop_assert!(polarity(&extended, &lexicon, &rules) >= polarity(&base, &lexicon, &rules));
        }
    }
}
