//! Pipeline stages. Each stage reads the artifacts of the one before it from
//! the output directory, checks their seed, and writes its own.
//!
//! ```text
//! ingest -> {dataset}.snapshot.json
//! split  -> {dataset}.split.json, {dataset}.idmap.tsv
//! gen    -> {dataset}.{task}.{split}[.epoch{e}].jsonl, *.truth.jsonl
//! train  -> {dataset}.model.{model}.json
//! predict-> {dataset}.{model}.{task}.test.pred.jsonl
//! eval   -> {dataset}.{model}.{task}.report.json
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::artifact::{self, Header};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ingest::{self, CorpusStats, ItemMetadata, RawInteraction, Sequences};
use crate::metrics::{self, MetricsReport};
use crate::models::{self, MarkovTable, Model};
use crate::sample_gen::{self, Catalog, CorpusReport, DataSample, Generator, SplitKind, Task};
use crate::split::{self, DatasetSplit, IdMap};
use crate::synth::{self, SynthConfig};

/// Counts from each preprocessing step, kept for diagnosing count mismatches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestLog {
    pub review_records: usize,
    pub reviews_skipped: usize,
    pub duplicates_removed: usize,
    pub removed_by_core: usize,
    /// Consecutive purchases of one user sharing a timestamp.
    pub timestamp_ties: usize,
    pub meta_records: usize,
    pub meta_skipped: usize,
    pub items_without_meta: usize,
}

/// Everything later stages need from the raw logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub dataset: String,
    pub k_core: usize,
    pub sequences: Sequences,
    pub catalog: Catalog,
    pub stats: CorpusStats,
    pub log: IngestLog,
}

/// Dedupe, k-core filter and index raw records; attach metadata by raw ID.
pub fn build_snapshot(
    dataset: &str,
    reviews: ingest::Parsed<RawInteraction>,
    meta: Option<ingest::Parsed<ItemMetadata>>,
    k_core: usize,
) -> Result<Snapshot> {
    let mut log = IngestLog {
        review_records: reviews.records.len() + reviews.skipped,
        reviews_skipped: reviews.skipped,
        ..IngestLog::default()
    };
    let parsed = reviews.records.len();
    let deduped = ingest::dedupe(reviews.records);
    log.duplicates_removed = parsed - deduped.len();
    let before_core = deduped.len();
    let core = ingest::k_core_filter(deduped, k_core)?;
    log.removed_by_core = before_core - core.len();
    let sequences = ingest::build_sequences(&core);
    log.timestamp_ties = sequences
        .sequences
        .iter()
        .map(|s| s.items.windows(2).filter(|p| p[0].timestamp == p[1].timestamp).count())
        .sum();

    let mut by_raw: HashMap<String, ItemMetadata> = HashMap::new();
    if let Some(m) = meta {
        log.meta_records = m.records.len() + m.skipped;
        log.meta_skipped = m.skipped;
        for r in m.records {
            by_raw.entry(r.item_raw_id.clone()).or_insert(r);
        }
    }
    let items: Vec<Option<ItemMetadata>> = sequences
        .item_raw_ids
        .iter()
        .map(|id| by_raw.remove(id))
        .collect();
    log.items_without_meta = items.iter().filter(|m| m.is_none()).count();
    if log.items_without_meta > 0 {
        log::warn!("{} items have no metadata; their titles render empty", log.items_without_meta);
    }
    let stats = ingest::compute_stats(&sequences.sequences)?;
    Ok(Snapshot {
        dataset: dataset.to_string(),
        k_core,
        sequences,
        catalog: Catalog { items },
        stats,
        log,
    })
}

fn header(cfg: &RunConfig) -> Header {
    Header::new(cfg.seed, cfg.digest())
}

fn open_raw(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<Snapshot> {
    let reviews_path = cfg
        .reviews
        .as_deref()
        .ok_or_else(|| Error::Config("ingest needs a reviews file".into()))?;
    let reviews = ingest::parse_interactions(open_raw(reviews_path)?, cfg.format)?;
    if reviews.skipped > 0 {
        log::warn!("skipped {} malformed review records", reviews.skipped);
    }
    let meta = match cfg.meta.as_deref() {
        Some(p) => Some(ingest::parse_metadata(open_raw(p)?, cfg.format)?),
        None => None,
    };
    let snap = build_snapshot(&cfg.dataset, reviews, meta, cfg.k_core)?;
    artifact::write_document(&cfg.snapshot_path(), &header(cfg), &snap)?;
    log::info!("{}: {}", cfg.dataset, snap.stats);
    Ok(snap)
}

pub fn load_snapshot(cfg: &RunConfig) -> Result<Snapshot> {
    let path = cfg.snapshot_path();
    let (h, snap): (Header, Snapshot) = artifact::read_document(&path, "ingest")?;
    h.check_seed(&path, cfg.seed)?;
    Ok(snap)
}

/// Split a snapshot and build its ID map with the stage seeds of `cfg`.
pub fn split_snapshot(cfg: &RunConfig, snap: &Snapshot) -> Result<(DatasetSplit, IdMap)> {
    let n_items = snap.sequences.n_items();
    let split = split::build_split(&snap.sequences.sequences, n_items, cfg.stage_seed("valid-users"))?;
    let id_map = IdMap::new(n_items, cfg.stage_seed("id-map"))?;
    Ok((split, id_map))
}

pub fn cmd_split(cfg: &RunConfig) -> Result<(DatasetSplit, IdMap)> {
    let snap = load_snapshot(cfg)?;
    let (split, id_map) = split_snapshot(cfg, &snap)?;
    let h = header(cfg);
    artifact::write_document(&cfg.split_path(), &h, &split)?;
    let path = cfg.id_map_path();
    let mut out = artifact::create(&path)?;
    id_map
        .write_tsv(&mut out, &h.line(), &snap.sequences.item_raw_ids)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&path, e))?;
    Ok((split, id_map))
}

/// Read an ID map file and the raw IDs in index order, checking its seed.
pub fn load_id_map(cfg: &RunConfig) -> Result<(IdMap, Vec<String>)> {
    let path = cfg.id_map_path();
    let mut reader = artifact::open_input(&path, "split")?;
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(&path, e))?;
    #[derive(Deserialize)]
    struct Wrapper {
        header: Header,
    }
    let h = first
        .strip_prefix("# ")
        .and_then(|l| serde_json::from_str::<Wrapper>(l.trim()).ok())
        .ok_or_else(|| Error::Format {
            path: path.clone(),
            detail: "missing header line".into(),
        })?
        .header;
    h.check_seed(&path, cfg.seed)?;
    IdMap::read_tsv(reader, cfg.stage_seed("id-map"))
}

/// Snapshot, split and ID map loaded together.
pub struct Loaded {
    pub snapshot: Snapshot,
    pub split: DatasetSplit,
    pub id_map: IdMap,
}

impl Loaded {
    pub fn from_dir(cfg: &RunConfig) -> Result<Self> {
        let snapshot = load_snapshot(cfg)?;
        let path = cfg.split_path();
        let (h, split): (Header, DatasetSplit) = artifact::read_document(&path, "split")?;
        h.check_seed(&path, cfg.seed)?;
        let (id_map, raw) = load_id_map(cfg)?;
        if raw != snapshot.sequences.item_raw_ids {
            return Err(Error::Format {
                path: cfg.id_map_path(),
                detail: "item table does not match the snapshot".into(),
            });
        }
        Ok(Self {
            snapshot,
            split,
            id_map,
        })
    }

    pub fn generator(&self, cfg: &RunConfig) -> Result<Generator<'_>> {
        Generator::new(
            &self.snapshot.dataset,
            &self.split,
            &self.id_map,
            &self.snapshot.catalog,
            cfg.gen_config()?,
        )
    }
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<CorpusReport> {
    let loaded = Loaded::from_dir(cfg)?;
    let gen = loaded.generator(cfg)?;
    let report = gen.generate_corpus(&cfg.out, &header(cfg))?;
    for f in &report.files {
        log::info!("{} samples -> {}", f.samples, f.path.display());
    }
    Ok(report)
}

/// Reference models the harness can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Popularity,
    Markov,
    BprMf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Popularity, ModelKind::Markov, ModelKind::BprMf];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Popularity => "popularity",
            ModelKind::Markov => "markov",
            ModelKind::BprMf => "bpr-mf",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?} (expected popularity, markov or bpr-mf)")))
    }
}

pub fn fit(kind: ModelKind, gen: &Generator<'_>, cfg: &RunConfig) -> Result<Model> {
    Ok(match kind {
        ModelKind::Popularity => Model::Popularity {
            counts: gen.popularity.counts().to_vec(),
        },
        ModelKind::Markov => Model::Markov(MarkovTable::from_generator(gen)),
        ModelKind::BprMf => {
            let trained = models::train_bpr_mf(gen, &cfg.bpr_config(), cfg.stage_seed("bpr"))?;
            if let (Some(first), Some(last)) = (trained.epoch_losses.first(), trained.epoch_losses.last()) {
                log::info!("bpr-mf loss {first:.4} -> {last:.4}");
            }
            Model::BprMf(trained.model)
        }
    })
}

pub fn cmd_train(cfg: &RunConfig, kind: ModelKind) -> Result<Model> {
    let loaded = Loaded::from_dir(cfg)?;
    let gen = loaded.generator(cfg)?;
    let model = fit(kind, &gen, cfg)?;
    artifact::write_document(&cfg.model_path(kind.name()), &header(cfg), &model)?;
    Ok(model)
}

fn recommendation_tasks(cfg: &RunConfig) -> Result<Vec<Task>> {
    Ok(cfg.task_set()?.into_iter().filter(|t| t.is_recommendation()).collect())
}

/// Write test-split predictions of a trained model for every enabled
/// recommendation task. Ranking pools are rebuilt from seeds and checked
/// against the test corpus when it exists.
pub fn cmd_predict(cfg: &RunConfig, kind: ModelKind) -> Result<Vec<PathBuf>> {
    let loaded = Loaded::from_dir(cfg)?;
    let gen = loaded.generator(cfg)?;
    let model_path = cfg.model_path(kind.name());
    let (h, model): (Header, Model) = artifact::read_document(&model_path, "train")?;
    h.check_seed(&model_path, cfg.seed)?;
    let mut written = Vec::new();
    for task in recommendation_tasks(cfg)? {
        if task == Task::Ranking {
            let corpus = cfg
                .out
                .join(sample_gen::corpus_file_name(&cfg.dataset, task, SplitKind::Test, None));
            if corpus.exists() {
                let (ch, samples): (Option<Header>, Vec<DataSample>) = artifact::read_jsonl(&corpus, "gen")?;
                if let Some(ch) = ch {
                    ch.check_seed(&corpus, cfg.seed)?;
                }
                models::verify_pools(&gen, &samples)?;
            }
        }
        let preds = models::emit_predictions(&model, &gen, task, cfg.k_max)?;
        let path = cfg.prediction_path(kind.name(), task);
        artifact::write_jsonl(&path, &header(cfg), &preds)?;
        written.push(path);
    }
    Ok(written)
}

/// Evaluate one prediction file against a truth file and write the report.
pub fn eval_files(cfg: &RunConfig, pred: &Path, truth: &Path, task: Task, report: &Path) -> Result<MetricsReport> {
    let jl = artifact::read_lines(truth, "gen")?;
    if let Some(h) = &jl.header {
        h.check_seed(truth, cfg.seed)?;
    }
    let r = metrics::evaluate_run(pred, truth, task)?;
    artifact::write_document(report, &header(cfg), &r)?;
    Ok(r)
}

pub fn cmd_eval(cfg: &RunConfig, kind: ModelKind) -> Result<Vec<MetricsReport>> {
    recommendation_tasks(cfg)?
        .into_iter()
        .map(|task| {
            let truth = cfg
                .out
                .join(sample_gen::truth_file_name(&cfg.dataset, task, SplitKind::Test));
            eval_files(
                cfg,
                &cfg.prediction_path(kind.name(), task),
                &truth,
                task,
                &cfg.report_path(kind.name(), task),
            )
        })
        .collect()
}

/// Published statistics of the three Amazon categories, with the train
/// sample count of each recommendation task at window 20.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub key: &'static str,
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub sparsity: f64,
    pub train_samples: usize,
}

pub const REFERENCES: [Reference; 3] = [
    Reference {
        key: "toys",
        users: 19_412,
        items: 11_924,
        interactions: 167_597,
        sparsity: 99.93,
        train_samples: 30_761,
    },
    Reference {
        key: "beauty",
        users: 22_363,
        items: 12_101,
        interactions: 198_502,
        sparsity: 99.93,
        train_samples: 36_582,
    },
    Reference {
        key: "sports",
        users: 35_598,
        items: 18_357,
        interactions: 296_337,
        sparsity: 99.95,
        train_samples: 47_320,
    },
];

pub fn reference_for(dataset: &str) -> Option<Reference> {
    let d = dataset.to_lowercase();
    REFERENCES.into_iter().find(|r| d.contains(r.key))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskCounts {
    pub task: Task,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub dataset: String,
    pub stats: CorpusStats,
    pub train_interactions: usize,
    /// Per-epoch train counts for dynamic tasks; valid and test are 0.
    pub tasks: Vec<TaskCounts>,
    pub log: IngestLog,
    /// Lines describing where the counts depart from the published ones.
    pub mismatches: Vec<String>,
}

impl StatsReport {
    pub fn matches_reference(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn stats_report(cfg: &RunConfig, snap: &Snapshot) -> Result<StatsReport> {
    let (split, _) = split_snapshot(cfg, snap)?;
    let (train, valid, test) = sample_gen::expected_counts(&split, cfg.window_size);
    let tasks = cfg
        .task_set()?
        .into_iter()
        .filter(|&t| t != Task::Ie)
        .map(|task| {
            if task.is_dynamic() {
                TaskCounts {
                    task,
                    train,
                    valid: 0,
                    test: 0,
                }
            } else {
                TaskCounts { task, train, valid, test }
            }
        })
        .collect();
    let mut mismatches = Vec::new();
    if let Some(r) = reference_for(&snap.dataset) {
        let s = &snap.stats;
        let mut check = |what: &str, got: usize, want: usize| {
            if got != want {
                mismatches.push(format!("{what}: got {got}, published {want} ({:+})", got as i64 - want as i64));
            }
        };
        check("users", s.n_users, r.users);
        check("items", s.n_items, r.items);
        check("interactions", s.n_interactions, r.interactions);
        if cfg.window_size == 20 {
            check("train samples", train, r.train_samples);
        }
        if (s.sparsity * 100.0).round() != (r.sparsity * 100.0).round() {
            mismatches.push(format!("sparsity: got {:.2}, published {:.2}", s.sparsity, r.sparsity));
        }
        if !mismatches.is_empty() {
            let l = &snap.log;
            mismatches.push(format!(
                "preprocessing: {} review records, {} malformed, {} duplicates dropped (earliest kept), \
                 {} removed by {}-core, {} same-timestamp neighbours ordered by raw item id",
                l.review_records, l.reviews_skipped, l.duplicates_removed, l.removed_by_core, snap.k_core, l.timestamp_ties
            ));
        }
    }
    Ok(StatsReport {
        dataset: snap.dataset.clone(),
        stats: snap.stats,
        train_interactions: split.train_interactions(),
        tasks,
        log: snap.log.clone(),
        mismatches,
    })
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsReport> {
    let snap = load_snapshot(cfg)?;
    stats_report(cfg, &snap)
}

impl std::fmt::Display for StatsReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}", self.dataset)?;
        writeln!(f, "  {}", self.stats)?;
        writeln!(f, "  train interactions {}", self.train_interactions)?;
        writeln!(f, "  {:<10} {:>10} {:>8} {:>8}", "task", "# train", "# valid", "# test")?;
        for t in &self.tasks {
            if t.task.is_dynamic() {
                writeln!(f, "  {:<10} {:>10} {:>8} {:>8}", t.task.name(), format!("DS {}", t.train), 0, 0)?;
            } else {
                writeln!(f, "  {:<10} {:>10} {:>8} {:>8}", t.task.name(), t.train, t.valid, t.test)?;
            }
        }
        for m in &self.mismatches {
            writeln!(f, "  MISMATCH {m}")?;
        }
        Ok(())
    }
}

/// Write a synthetic fixture as Amazon-style review and metadata files.
pub fn cmd_synth(preset: &str, seed: u64, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    let data = synth::generate(&SynthConfig::preset(preset, seed)?)?;
    synth::write_amazon_jsonl(&data, dir, name)
}

/// Every stage in order, then train, predict and evaluate each model.
pub fn run_pipeline(cfg: &RunConfig, kinds: &[ModelKind]) -> Result<Vec<(ModelKind, MetricsReport)>> {
    cmd_ingest(cfg)?;
    cmd_split(cfg)?;
    cmd_gen(cfg)?;
    let mut reports = Vec::new();
    for &kind in kinds {
        cmd_train(cfg, kind)?;
        cmd_predict(cfg, kind)?;
        for r in cmd_eval(cfg, kind)? {
            reports.push((kind, r));
        }
    }
    Ok(reports)
}
