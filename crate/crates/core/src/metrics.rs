//! Ranking and rating metrics: HR@k, NDCG@k (one relevant item per sample)
//! and AUC-ROC, plus the prediction/truth file formats they read.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::artifact;
use crate::error::{Error, Result};
use crate::sample_gen::Task;
use crate::split::IdMap;

/// Cut-offs reported for retrieval and ranking.
pub const HR_CUTOFFS: [usize; 3] = [1, 5, 10];
pub const NDCG_CUTOFFS: [usize; 2] = [5, 10];

/// Ground truth for one held-out sample: a target display ID (retrieval,
/// ranking) or a binary label (rating).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

impl TruthRecord {
    pub fn target(id: &str, target: impl Into<String>) -> Self {
        Self {
            sample_id: id.to_string(),
            target: Some(target.into()),
            label: None,
        }
    }

    pub fn label(id: &str, liked: bool) -> Self {
        Self {
            sample_id: id.to_string(),
            target: None,
            label: Some(u8::from(liked)),
        }
    }
}

/// One line of a prediction file: a best-first list of display IDs, or a
/// like-probability score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl PredictionRecord {
    pub fn ranked(id: impl Into<String>, items: Vec<String>) -> Self {
        Self {
            sample_id: id.into(),
            items: Some(items),
            score: None,
        }
    }

    pub fn scored(id: impl Into<String>, score: f64) -> Self {
        Self {
            sample_id: id.into(),
            items: None,
            score: Some(score),
        }
    }
}

fn id_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bI\d+\b").expect("static regex"))
}

/// Extract one display ID per generated line (the first `I<digits>` token
/// that the map knows), dropping duplicates. Returns the list and the number
/// of lines with no usable ID.
pub fn parse_model_output<S: AsRef<str>>(lines: &[S], id_map: &IdMap) -> (Vec<String>, usize) {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut unparseable = 0;
    for line in lines {
        let hit = id_pattern()
            .find_iter(line.as_ref())
            .map(|m| m.as_str())
            .find(|id| id_map.contains(id));
        match hit {
            Some(id) => {
                if seen.insert(id.to_string()) {
                    out.push(id.to_string());
                }
            }
            None => unparseable += 1,
        }
    }
    (out, unparseable)
}

/// Remove repeated IDs, keeping the first occurrence.
pub fn dedupe_ranked(items: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|i| seen.insert(i.clone())).collect()
}

/// Ranked lists keyed by sample id.
pub type RankedPredictions = HashMap<String, Vec<String>>;

/// Index ranked predictions by sample id; a repeated id is fatal.
pub fn index_ranked(records: Vec<PredictionRecord>) -> Result<RankedPredictions> {
    let mut map = HashMap::with_capacity(records.len());
    for r in records {
        let items = dedupe_ranked(r.items.unwrap_or_default());
        if map.insert(r.sample_id.clone(), items).is_some() {
            return Err(Error::DuplicateSampleId(r.sample_id));
        }
    }
    Ok(map)
}

/// 1-based rank of `truth`, if it appears in the first `k` entries.
fn rank_within(ranked: &[String], truth: &str, k: usize) -> Option<usize> {
    ranked.iter().take(k).position(|i| i == truth).map(|p| p + 1)
}

fn mean_over<F: Fn(Option<&Vec<String>>, &str) -> f64>(
    preds: &RankedPredictions,
    truths: &[(String, String)],
    f: F,
) -> f64 {
    if truths.is_empty() {
        return 0.0;
    }
    let total: f64 = truths.iter().map(|(id, t)| f(preds.get(id), t)).sum();
    total / truths.len() as f64
}

/// Fraction of samples whose truth sits in the top `k`. Samples without a
/// prediction count as misses.
pub fn hit_ratio_at_k(preds: &RankedPredictions, truths: &[(String, String)], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    mean_over(preds, truths, |p, t| {
        p.and_then(|r| rank_within(r, t, k)).map_or(0.0, |_| 1.0)
    })
}

/// NDCG@k with a single relevant item: the ideal DCG is 1, so each sample
/// scores `1 / log2(rank + 1)` when ranked within `k`.
pub fn ndcg_at_k(preds: &RankedPredictions, truths: &[(String, String)], k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    mean_over(preds, truths, |p, t| {
        p.and_then(|r| rank_within(r, t, k))
            .map_or(0.0, |rank| 1.0 / ((rank + 1) as f64).log2())
    })
}

/// Area under the ROC curve via the Mann-Whitney statistic, tied scores
/// sharing their average rank.
pub fn auc_roc(scores: &[(f64, bool)]) -> Result<f64> {
    let n_pos = scores.iter().filter(|(_, l)| *l).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&o| scores[o].1).count();
        rank_sum_pos += avg * pos_in_group as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Metric values in table column order plus bookkeeping counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub task: Task,
    pub values: Vec<(String, f64)>,
    pub n_evaluated: usize,
    pub n_unparseable: usize,
    pub n_missing: usize,
}

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.values.len() + 4))?;
        m.serialize_entry("task", &self.task)?;
        for (k, v) in &self.values {
            m.serialize_entry(k, v)?;
        }
        m.serialize_entry("n_evaluated", &self.n_evaluated)?;
        m.serialize_entry("n_unparseable", &self.n_unparseable)?;
        m.serialize_entry("n_missing", &self.n_missing)?;
        m.end()
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<usize> = self.values.iter().map(|(n, _)| n.len().max(6)).collect();
        write!(f, "{:<10}", "task")?;
        for ((n, _), w) in self.values.iter().zip(&widths) {
            write!(f, "  {n:>w$}")?;
        }
        writeln!(f, "  {:>11}  {:>13}  {:>9}", "n_evaluated", "n_unparseable", "n_missing")?;
        write!(f, "{:<10}", self.task.name())?;
        for ((_, v), w) in self.values.iter().zip(&widths) {
            write!(f, "  {v:>w$.4}")?;
        }
        writeln!(
            f,
            "  {:>11}  {:>13}  {:>9}",
            self.n_evaluated, self.n_unparseable, self.n_missing
        )
    }
}

/// Score predictions against truths. Missing predictions score as misses;
/// for rating, a missing positive is ranked below every score and a missing
/// negative above every score.
pub fn evaluate(
    task: Task,
    records: Vec<PredictionRecord>,
    truths: &[TruthRecord],
    n_unparseable: usize,
) -> Result<MetricsReport> {
    if !task.is_recommendation() {
        return Err(Error::ShapeMismatch {
            task: task.to_string(),
            detail: "only retrieval, ranking and rating runs can be evaluated".into(),
        });
    }
    if records.is_empty() {
        log::warn!("empty prediction file for {task}");
    }
    let shape_err = |detail: String| Error::ShapeMismatch {
        task: task.to_string(),
        detail,
    };
    if task == Task::Rating {
        let mut scores = HashMap::with_capacity(records.len());
        for r in records {
            let s = r
                .score
                .ok_or_else(|| shape_err(format!("record {} has no score", r.sample_id)))?;
            if scores.insert(r.sample_id.clone(), s).is_some() {
                return Err(Error::DuplicateSampleId(r.sample_id));
            }
        }
        let mut pairs = Vec::with_capacity(truths.len());
        let mut n_evaluated = 0;
        for t in truths {
            let label = t
                .label
                .ok_or_else(|| shape_err(format!("truth {} has no label", t.sample_id)))?
                == 1;
            let s = match scores.get(&t.sample_id) {
                Some(&s) => {
                    n_evaluated += 1;
                    s
                }
                None if label => f64::NEG_INFINITY,
                None => f64::INFINITY,
            };
            pairs.push((s, label));
        }
        let auc = if n_evaluated == 0 { 0.0 } else { auc_roc(&pairs)? };
        return Ok(MetricsReport {
            task,
            values: vec![("AUC-ROC".into(), auc)],
            n_evaluated,
            n_unparseable,
            n_missing: truths.len() - n_evaluated,
        });
    }

    if let Some(r) = records.iter().find(|r| r.items.is_none()) {
        return Err(shape_err(format!("record {} has no ranked items", r.sample_id)));
    }
    let preds = index_ranked(records)?;
    let truth_pairs = truths
        .iter()
        .map(|t| {
            t.target
                .clone()
                .map(|target| (t.sample_id.clone(), target))
                .ok_or_else(|| shape_err(format!("truth {} has no target", t.sample_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n_evaluated = truth_pairs.iter().filter(|(id, _)| preds.contains_key(id)).count();
    let mut values = Vec::new();
    for k in NDCG_CUTOFFS {
        values.push((format!("NDCG@{k}"), ndcg_at_k(&preds, &truth_pairs, k)));
    }
    for k in HR_CUTOFFS {
        values.push((format!("HR@{k}"), hit_ratio_at_k(&preds, &truth_pairs, k)));
    }
    Ok(MetricsReport {
        task,
        values,
        n_evaluated,
        n_unparseable,
        n_missing: truth_pairs.len() - n_evaluated,
    })
}

/// Read a prediction file leniently: lines that are not valid records are
/// counted, not fatal.
pub fn read_predictions(path: &Path) -> Result<(Vec<PredictionRecord>, usize)> {
    let jl = artifact::read_lines(path, "predict")?;
    let mut records = Vec::with_capacity(jl.lines.len());
    let mut bad = 0;
    for l in &jl.lines {
        match serde_json::from_str::<PredictionRecord>(l) {
            Ok(r) if r.score.is_none_or(f64::is_finite) => records.push(r),
            _ => bad += 1,
        }
    }
    Ok((records, bad))
}

pub fn evaluate_run(pred_path: &Path, truth_path: &Path, task: Task) -> Result<MetricsReport> {
    let (records, bad) = read_predictions(pred_path)?;
    let (_, truths): (_, Vec<TruthRecord>) = artifact::read_jsonl(truth_path, "gen")?;
    evaluate(task, records, &truths, bad)
}
