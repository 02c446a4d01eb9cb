//! Per-response text heuristics.
//!
//! English-only rules. Tokens are whitespace-separated words with edge
//! punctuation stripped; sentences end after a run of `.`, `!` or `?`
//! followed by whitespace (so "e.g. x" counts as two sentences).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::sentiment::{self, Lexicon, SentimentRules};

/// Highest reachable reading-ease score: one word, one sentence, one syllable.
pub const FLESCH_CEILING: f64 = 121.22;

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2026}' | '\u{2013}' | '\u{2014}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
        )
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_edge_punct))
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, next)) = chars.peek() {
            if matches!(next, '.' | '!' | '?') {
                end = j + next.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        let at_boundary = chars.peek().is_none_or(|&(_, next)| next.is_whitespace());
        if at_boundary {
            sentences.push(&text[start..end]);
            start = end;
        }
    }
    sentences.push(&text[start..]);
    sentences.into_iter().map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel groups with a silent trailing `e` (kept after consonant + `le`).
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let mut groups = 0;
    let mut in_group = false;
    for &c in &letters {
        let vowel = is_vowel(c);
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }
    let n = letters.len();
    if groups > 1 && letters.last() == Some(&'e') {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        let vowel_before = is_vowel(letters[n - 2]);
        if !consonant_le && !vowel_before {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Raw counts behind the reading-ease score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TextCounts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

/// Sentences without any word token are not counted, so `sentences <= words`.
pub fn text_counts(text: &str) -> TextCounts {
    let mut counts = TextCounts {
        words: 0,
        sentences: 0,
        syllables: 0,
    };
    for sentence in split_sentences(text) {
        let tokens = tokenize(sentence);
        if tokens.is_empty() {
            continue;
        }
        counts.sentences += 1;
        counts.words += tokens.len();
        counts.syllables += tokens.iter().map(|t| count_syllables(t)).sum::<usize>();
    }
    counts
}

pub fn flesch_from_counts(counts: TextCounts) -> Option<f64> {
    if counts.words == 0 {
        return None;
    }
    let words = counts.words as f64;
    let per_sentence = words / counts.sentences as f64;
    let per_word = counts.syllables as f64 / words;
    // 206.835 - 1.015 - 84.6 is not exactly 121.22 in floating point
    Some(FLESCH_CEILING - 1.015 * (per_sentence - 1.0) - 84.6 * (per_word - 1.0))
}

/// `None` when the text has no tokens.
pub fn flesch_reading_ease(text: &str) -> Option<f64> {
    flesch_from_counts(text_counts(text))
}

/// Unique lowercased tokens over all tokens; `None` when empty.
pub fn type_token_ratio(text: &str) -> Option<f64> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return None;
    }
    let unique: HashSet<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    Some(unique.len() as f64 / tokens.len() as f64)
}

fn number_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"[0-9]+(?:,[0-9]{3})*(?:\.[0-9]+)?").expect("valid"))
}

/// Digit runs, allowing thousands separators and one decimal part.
pub fn count_numbers(text: &str) -> usize {
    number_pattern().find_iter(text).count()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthUnit {
    #[default]
    Tokens,
    Chars,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericFeature {
    LengthTokens,
    LengthChars,
    ReadingEase,
    LexicalDiversity,
    NumCount,
    Sentiment,
    RegexPosHits,
    RegexNegHits,
}

impl NumericFeature {
    pub const ALL: [NumericFeature; 8] = [
        NumericFeature::LengthTokens,
        NumericFeature::LengthChars,
        NumericFeature::ReadingEase,
        NumericFeature::LexicalDiversity,
        NumericFeature::NumCount,
        NumericFeature::Sentiment,
        NumericFeature::RegexPosHits,
        NumericFeature::RegexNegHits,
    ];

    /// The features compared between chosen and rejected responses.
    pub const ANALYZED: [NumericFeature; 6] = [
        NumericFeature::LengthTokens,
        NumericFeature::LengthChars,
        NumericFeature::ReadingEase,
        NumericFeature::LexicalDiversity,
        NumericFeature::NumCount,
        NumericFeature::Sentiment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NumericFeature::LengthTokens => "length_tokens",
            NumericFeature::LengthChars => "length_chars",
            NumericFeature::ReadingEase => "reading_ease",
            NumericFeature::LexicalDiversity => "lexical_diversity",
            NumericFeature::NumCount => "num_count",
            NumericFeature::Sentiment => "sentiment",
            NumericFeature::RegexPosHits => "regex_pos_hits",
            NumericFeature::RegexNegHits => "regex_neg_hits",
        }
    }

    /// Like `from_str`, but resolves the `length` alias with `unit`.
    pub fn resolve(name: &str, unit: LengthUnit) -> Result<Self> {
        match name {
            "length" => Ok(match unit {
                LengthUnit::Tokens => NumericFeature::LengthTokens,
                LengthUnit::Chars => NumericFeature::LengthChars,
            }),
            other => other.parse(),
        }
    }
}

impl fmt::Display for NumericFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NumericFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NumericFeature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub length_tokens: usize,
    pub length_chars: usize,
    /// `None` for texts without tokens.
    pub reading_ease: Option<f64>,
    /// `None` for texts without tokens.
    pub lexical_diversity: Option<f64>,
    pub num_count: usize,
    pub sentiment: f64,
    pub regex_pos_hits: usize,
    pub regex_neg_hits: usize,
    pub keyword_hits: BTreeMap<String, usize>,
}

impl FeatureVector {
    pub fn get(&self, feature: NumericFeature) -> Option<f64> {
        match feature {
            NumericFeature::LengthTokens => Some(self.length_tokens as f64),
            NumericFeature::LengthChars => Some(self.length_chars as f64),
            NumericFeature::ReadingEase => self.reading_ease,
            NumericFeature::LexicalDiversity => self.lexical_diversity,
            NumericFeature::NumCount => Some(self.num_count as f64),
            NumericFeature::Sentiment => Some(self.sentiment),
            NumericFeature::RegexPosHits => Some(self.regex_pos_hits as f64),
            NumericFeature::RegexNegHits => Some(self.regex_neg_hits as f64),
        }
    }

    /// Look up a numeric field by name (`length` is not accepted here).
    pub fn numeric(&self, name: &str) -> Result<Option<f64>> {
        Ok(self.get(name.parse()?))
    }
}

/// Feature settings as written in a config file. Relative paths resolve
/// against the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub length_unit: LengthUnit,
    /// TSV lexicon; the bundled demo lexicon when absent.
    pub lexicon: Option<PathBuf>,
    pub regex_positive: Option<PathBuf>,
    pub regex_negative: Option<PathBuf>,
    /// Keyword list name to file.
    pub keywords: BTreeMap<String, PathBuf>,
    pub sentiment: SentimentRules,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Lines of a list file, without blanks and `#` comments.
pub fn read_list_file(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn compile_patterns(patterns: &[String]) -> Result<Vec<Regex>> {
    patterns
        .iter()
        .map(|p| {
            Regex::new(p).map_err(|e| Error::Pattern {
                pattern: p.clone(),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Non-overlapping matches of every pattern, summed.
pub fn count_matches(patterns: &[Regex], text: &str) -> usize {
    patterns.iter().map(|p| p.find_iter(text).count()).sum()
}

/// Whole-token, lowercased occurrences of any listed keyword.
pub fn count_keywords(keywords: &HashSet<String>, text: &str) -> usize {
    tokenize(text)
        .into_iter()
        .filter(|t| keywords.contains(&t.to_lowercase()))
        .count()
}

/// A lowercased keyword set loaded from a one-token-per-line file.
pub fn load_keyword_list(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    Ok(read_list_file(path)?.into_iter().map(|k| k.to_lowercase()).collect())
}

/// Compiled feature settings, ready to score text.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    pub length_unit: LengthUnit,
    pub lexicon: Lexicon,
    pub rules: SentimentRules,
    pub positive: Vec<Regex>,
    pub negative: Vec<Regex>,
    pub keywords: BTreeMap<String, HashSet<String>>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor {
            length_unit: LengthUnit::Tokens,
            lexicon: Lexicon::demo(),
            rules: SentimentRules::default(),
            positive: Vec::new(),
            negative: Vec::new(),
            keywords: BTreeMap::new(),
        }
    }
}

impl FeatureConfig {
    /// Loads and validates every referenced file.
    pub fn build(&self, base_dir: &Path) -> Result<FeatureExtractor> {
        let lexicon = match &self.lexicon {
            Some(path) => Lexicon::load(resolve(base_dir, path))?,
            None => Lexicon::demo(),
        };
        let patterns = |path: &Option<PathBuf>| -> Result<Vec<Regex>> {
            match path {
                Some(p) => compile_patterns(&read_list_file(resolve(base_dir, p))?),
                None => Ok(Vec::new()),
            }
        };
        let keywords = self
            .keywords
            .iter()
            .map(|(name, path)| Ok((name.clone(), load_keyword_list(resolve(base_dir, path))?)))
            .collect::<Result<_>>()?;
        if !(self.sentiment.alpha > 0.0) {
            return Err(Error::InvalidArgument("sentiment alpha must be positive".into()));
        }
        Ok(FeatureExtractor {
            length_unit: self.length_unit,
            lexicon,
            rules: self.sentiment,
            positive: patterns(&self.regex_positive)?,
            negative: patterns(&self.regex_negative)?,
            keywords,
        })
    }
}

/// Features of both responses of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFeatures {
    pub a: FeatureVector,
    pub b: FeatureVector,
}

impl FeatureExtractor {
    pub fn extract(&self, text: &str) -> FeatureVector {
        let tokens = tokenize(text);
        FeatureVector {
            length_tokens: tokens.len(),
            length_chars: text.chars().count(),
            reading_ease: flesch_reading_ease(text),
            lexical_diversity: type_token_ratio(text),
            num_count: count_numbers(text),
            sentiment: sentiment::polarity(text, &self.lexicon, &self.rules),
            regex_pos_hits: count_matches(&self.positive, text),
            regex_neg_hits: count_matches(&self.negative, text),
            keyword_hits: self
                .keywords
                .iter()
                .map(|(name, set)| (name.clone(), count_keywords(set, text)))
                .collect(),
        }
    }

    pub fn extract_pair(&self, sample: &Sample) -> PairFeatures {
        PairFeatures {
            a: self.extract(&sample.response_a),
            b: self.extract(&sample.response_b),
        }
    }

    pub fn extract_pairs(&self, samples: &[Sample], exec: Execution) -> Vec<PairFeatures> {
        par::map(samples, exec, |s| self.extract_pair(s))
    }
}

/// [`FeatureExtractor::extract`] as a free function.
pub fn extract_features(text: &str, extractor: &FeatureExtractor) -> FeatureVector {
    extractor.extract(text)
}
