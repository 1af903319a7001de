//! Run configuration: one JSON file plus command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::InputFormat;
use crate::models::BprConfig;
use crate::sample_gen::{parse_tasks, GenConfig, Task};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: String,
    pub reviews: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub format: InputFormat,
    pub snapshot: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub k_core: usize,
    pub window_size: usize,
    pub mask_ratio: f64,
    pub pool_size: usize,
    pub epochs: usize,
    pub tasks: String,
    /// Beam width / list length for retrieval predictions.
    pub k_max: usize,
    pub dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub bpr_epochs: usize,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gen = GenConfig::default();
        let bpr = BprConfig::default();
        Self {
            dataset: "synthetic".into(),
            reviews: None,
            meta: None,
            format: InputFormat::AmazonReviewJsonl,
            snapshot: None,
            out: PathBuf::from("out"),
            seed: 0,
            k_core: 5,
            window_size: gen.window_size,
            mask_ratio: gen.mask_ratio,
            pool_size: gen.pool_size,
            epochs: gen.epochs,
            tasks: "all".into(),
            k_max: 20,
            dim: bpr.dim,
            learning_rate: bpr.learning_rate,
            l2: bpr.l2,
            bpr_epochs: bpr.epochs,
            jobs: None,
        }
    }
}

/// Fields that change experiment outputs; paths and worker counts do not.
#[derive(Serialize)]
struct Experiment<'a> {
    dataset: &'a str,
    seed: u64,
    k_core: usize,
    window_size: usize,
    mask_ratio: f64,
    pool_size: usize,
    epochs: usize,
    tasks: Vec<&'static str>,
    k_max: usize,
    dim: usize,
    learning_rate: f64,
    l2: f64,
    bpr_epochs: usize,
}

impl RunConfig {
    /// Load a JSON object; keys may use `-` or `_`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
        let normalized: serde_json::Map<String, serde_json::Value> = obj
            .iter()
            .map(|(k, v)| (k.replace('_', "-"), v.clone()))
            .collect();
        serde_json::from_value(serde_json::Value::Object(normalized)).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn task_set(&self) -> Result<BTreeSet<Task>> {
        parse_tasks(&self.tasks)
    }

    pub fn gen_config(&self) -> Result<GenConfig> {
        let cfg = GenConfig {
            window_size: self.window_size,
            mask_ratio: self.mask_ratio,
            pool_size: self.pool_size,
            seed: self.stage_seed("gen"),
            epochs: self.epochs,
            tasks: self.task_set()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bpr_config(&self) -> BprConfig {
        BprConfig {
            dim: self.dim,
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs: self.bpr_epochs,
        }
    }

    /// Seed for one pipeline stage, derived from the global seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive(self.seed, stage, &[])
    }

    /// Short hex digest of the settings that determine experiment outputs.
    pub fn digest(&self) -> String {
        let tasks = self
            .task_set()
            .map(|t| t.into_iter().map(Task::name).collect())
            .unwrap_or_default();
        let e = Experiment {
            dataset: &self.dataset,
            seed: self.seed,
            k_core: self.k_core,
            window_size: self.window_size,
            mask_ratio: self.mask_ratio,
            pool_size: self.pool_size,
            epochs: self.epochs,
            tasks,
            k_max: self.k_max,
            dim: self.dim,
            learning_rate: self.learning_rate,
            l2: self.l2,
            bpr_epochs: self.bpr_epochs,
        };
        let bytes = serde_json::to_vec(&e).expect("plain struct serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.snapshot
            .clone()
            .unwrap_or_else(|| self.out.join(format!("{}.snapshot.json", self.dataset)))
    }

    pub fn split_path(&self) -> PathBuf {
        self.out.join(format!("{}.split.json", self.dataset))
    }

    pub fn id_map_path(&self) -> PathBuf {
        self.out.join(format!("{}.idmap.tsv", self.dataset))
    }

    pub fn model_path(&self, model: &str) -> PathBuf {
        self.out.join(format!("{}.model.{model}.json", self.dataset))
    }

    pub fn prediction_path(&self, model: &str, task: Task) -> PathBuf {
        self.out.join(format!("{}.{model}.{task}.test.pred.jsonl", self.dataset))
    }

    pub fn report_path(&self, model: &str, task: Task) -> PathBuf {
        self.out.join(format!("{}.{model}.{task}.report.json", self.dataset))
    }
}
