//! Preference samples, JSONL I/O and seeded splitting.
//!
//! On disk a sample is one JSON object per line:
//!
//! ```text
//! {"id":"s1","prompt":"...","response_a":"...","response_b":"...","label":0}
//! ```
//!
//! `label` 0 prefers `response_a`, 1 prefers `response_b`. Weakly labeled
//! files additionally carry `weak_label`, `prob_b` and `confidence`.
//! Source files in chosen/rejected form (`{"prompt","chosen","rejected"}`)
//! are imported with [`import_chosen_rejected`], which places the chosen
//! response in slot A or B by a seeded coin flip.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preference {
    A,
    B,
}

impl Preference {
    pub fn index(self) -> u8 {
        match self {
            Preference::A => 0,
            Preference::B => 1,
        }
    }

    pub fn from_index(value: i64) -> Option<Self> {
        match value {
            0 => Some(Preference::A),
            1 => Some(Preference::B),
            _ => None,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Preference::A => Preference::B,
            Preference::B => Preference::A,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub prompt: String,
    pub response_a: String,
    pub response_b: String,
    pub gold_label: Option<Preference>,
}

impl Sample {
    /// The (chosen, rejected) responses, if the sample is labeled.
    pub fn chosen_rejected(&self) -> Option<(&str, &str)> {
        self.gold_label.map(|label| match label {
            Preference::A => (self.response_a.as_str(), self.response_b.as_str()),
            Preference::B => (self.response_b.as_str(), self.response_a.as_str()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeaklyLabeledSample {
    pub sample: Sample,
    pub weak_label: Preference,
    pub prob_b: f64,
    pub confidence: f64,
}

/// Wire form of one JSONL line. Field order here is the on-disk order.
#[derive(Debug, Default, Serialize, Deserialize)]
struct Record {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    prompt: String,
    response_a: String,
    response_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weak_label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prob_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ChosenRejectedRecord {
    #[serde(default)]
    id: Option<String>,
    prompt: String,
    chosen: String,
    rejected: String,
}

/// Anything that can be written as a dataset line.
pub trait ToRecord {
    #[doc(hidden)]
    fn write_json(&self, out: &mut dyn Write) -> serde_json::Result<()>;
}

fn sample_record(sample: &Sample) -> Record {
    Record {
        id: Some(sample.id.clone()),
        prompt: sample.prompt.clone(),
        response_a: sample.response_a.clone(),
        response_b: sample.response_b.clone(),
        label: sample.gold_label.map(|p| i64::from(p.index())),
        ..Record::default()
    }
}

impl ToRecord for Sample {
    fn write_json(&self, out: &mut dyn Write) -> serde_json::Result<()> {
        serde_json::to_writer(out, &sample_record(self))
    }
}

impl ToRecord for WeaklyLabeledSample {
    fn write_json(&self, out: &mut dyn Write) -> serde_json::Result<()> {
        let mut record = sample_record(&self.sample);
        record.weak_label = Some(i64::from(self.weak_label.index()));
        record.prob_b = Some(self.prob_b);
        record.confidence = Some(self.confidence);
        serde_json::to_writer(out, &record)
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(idx, line)| (idx, line.map_err(|e| Error::io(path, e)))))
}

fn parse_label(path: &Path, line: usize, value: Option<i64>, field: &str) -> Result<Option<Preference>> {
    match value {
        None => Ok(None),
        Some(v) => Preference::from_index(v).map(Some).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("unknown {field} value {v}"),
        }),
    }
}

fn parse_record(path: &Path, idx: usize, text: &str, seen: &mut HashSet<String>) -> Result<(Sample, Record)> {
    let line = idx + 1;
    let mut record: Record = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: e.to_string(),
    })?;
    let id = match record.id.take() {
        Some(id) if id.is_empty() => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: "empty id".into(),
            })
        }
        Some(id) => id,
        None => idx.to_string(),
    };
    if !seen.insert(id.clone()) {
        return Err(Error::DuplicateId(id));
    }
    let gold_label = parse_label(path, line, record.label, "label")?;
    let sample = Sample {
        id,
        prompt: std::mem::take(&mut record.prompt),
        response_a: std::mem::take(&mut record.response_a),
        response_b: std::mem::take(&mut record.response_b),
        gold_label,
    };
    Ok((sample, record))
}

/// Loads a dataset in A/B form. Blank lines are skipped; ids default to the
/// zero-based line index.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for (idx, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(parse_record(path, idx, &line, &mut seen)?.0);
    }
    Ok(samples)
}

/// Loads label-model output written by [`save_dataset`].
pub fn load_weak_dataset(path: impl AsRef<Path>) -> Result<Vec<WeaklyLabeledSample>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (sample, record) = parse_record(path, idx, &line, &mut seen)?;
        let missing = |field: &str| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: format!("missing {field}"),
        };
        let weak_label = parse_label(path, idx + 1, record.weak_label, "weak_label")?.ok_or_else(|| missing("weak_label"))?;
        let prob_b = record.prob_b.ok_or_else(|| missing("prob_b"))?;
        let confidence = record.confidence.ok_or_else(|| missing("confidence"))?;
        out.push(WeaklyLabeledSample {
            sample,
            weak_label,
            prob_b,
            confidence,
        });
    }
    Ok(out)
}

/// Imports chosen/rejected pairs, orienting each one into A/B with a coin
/// flip drawn from `seed`. The gold label records where "chosen" landed.
pub fn import_chosen_rejected(path: impl AsRef<Path>, seed: u64) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let mut rng = rng::seeded(seed);
    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for (idx, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ChosenRejectedRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let id = record.id.unwrap_or_else(|| idx.to_string());
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let (response_a, response_b, label) = if rng::coin(&mut rng) {
            (record.rejected, record.chosen, Preference::B)
        } else {
            (record.chosen, record.rejected, Preference::A)
        };
        samples.push(Sample {
            id,
            prompt: record.prompt,
            response_a,
            response_b,
            gold_label: Some(label),
        });
    }
    Ok(samples)
}

/// Loads either layout, detected from the first non-blank line.
pub fn load_any(path: impl AsRef<Path>, orient_seed: u64) -> Result<Vec<Sample>> {
    let path = path.as_ref();
    let mut chosen_form = false;
    for (_, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(serde_json::Value::Object(map)) = serde_json::from_str::<serde_json::Value>(&line) {
            chosen_form = map.contains_key("chosen") && !map.contains_key("response_a");
        }
        break;
    }
    if chosen_form {
        import_chosen_rejected(path, orient_seed)
    } else {
        load_dataset(path)
    }
}

pub fn save_dataset<T: ToRecord>(items: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        item.write_json(&mut out)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Gold labels of the weak split, in weak-set order. Only evaluation code
/// reads these.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HiddenGold(pub Vec<(String, Preference)>);

#[derive(Serialize, Deserialize)]
struct GoldRecord {
    id: String,
    label: i64,
}

impl HiddenGold {
    pub fn lookup(&self) -> std::collections::HashMap<&str, Preference> {
        self.0.iter().map(|(id, p)| (id.as_str(), *p)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (id, label) in &self.0 {
            serde_json::to_writer(
                &mut out,
                &GoldRecord {
                    id: id.clone(),
                    label: i64::from(label.index()),
                },
            )?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut entries = Vec::new();
        for (idx, line) in open_lines(path)? {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: GoldRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: e.to_string(),
            })?;
            let label = parse_label(path, idx + 1, Some(record.label), "label")?.expect("label present");
            entries.push((record.id, label));
        }
        Ok(HiddenGold(entries))
    }
}

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub eval_set: Vec<Sample>,
    pub baseline_set: Vec<Sample>,
    /// Gold labels removed.
    pub weak_set: Vec<Sample>,
    pub hidden_gold: HiddenGold,
    pub seed: u64,
    pub fractions: (f64, f64),
}

/// Sizes of the eval and baseline splits for `n` samples.
pub fn split_sizes(n: usize, eval_frac: f64, baseline_frac: f64) -> (usize, usize) {
    let eval = (eval_frac * n as f64).round() as usize;
    let baseline = (baseline_frac * n as f64).round() as usize;
    let eval = eval.min(n);
    (eval, baseline.min(n - eval))
}

/// Shuffles with the seeded generator from [`crate::rng`], then carves
/// `eval_frac · N` samples for evaluation, `baseline_frac · N` for the
/// labeled baseline (both fractions of the total), and leaves the rest as
/// the weak split with gold moved into [`HiddenGold`].
pub fn split_dataset(samples: &[Sample], seed: u64, eval_frac: f64, baseline_frac: f64) -> Result<SplitResult> {
    if !(0.0..1.0).contains(&eval_frac) {
        return Err(Error::InvalidArgument(format!("eval_frac {eval_frac} not in [0, 1)")));
    }
    if !(baseline_frac > 0.0 && baseline_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("baseline_frac {baseline_frac} not in (0, 1)")));
    }
    if eval_frac + baseline_frac >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "eval_frac + baseline_frac = {} must be < 1",
            eval_frac + baseline_frac
        )));
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    rng::shuffle(&mut order, &mut rng::seeded(seed));

    let (n_eval, n_baseline) = split_sizes(samples.len(), eval_frac, baseline_frac);
    let pick = |range: &[usize]| range.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let eval_set = pick(&order[..n_eval]);
    let baseline_set = pick(&order[n_eval..n_eval + n_baseline]);
    let mut weak_set = pick(&order[n_eval + n_baseline..]);

    let mut hidden = Vec::new();
    for sample in &mut weak_set {
        if let Some(label) = sample.gold_label.take() {
            hidden.push((sample.id.clone(), label));
        }
    }

    Ok(SplitResult {
        eval_set,
        baseline_set,
        weak_set,
        hidden_gold: HiddenGold(hidden),
        seed,
        fractions: (eval_frac, baseline_frac),
    })
}
