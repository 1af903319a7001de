//! Data-sample generation.
//!
//! Every user's history is cut into sliding windows. Each train window yields
//! one retrieval, ranking and rating sample (static), plus one MIM, MLM and
//! BPR sample per epoch whose masks and negatives are redrawn every epoch.
//! Validation and test users contribute a single window ending at the held-out
//! item.
//!
//! A window supplies `history = window[..len-1]` and `target = window[len-1]`
//! to the retrieval, ranking, rating and BPR templates; MIM masks the whole
//! window.
//!
//! Randomness is drawn from per-sample streams keyed by (seed, task, user,
//! window, epoch), so the output is independent of thread count and of the
//! order in which samples are produced.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{self, Header};
use crate::error::{Error, Result};
use crate::ingest::{Interaction, ItemMetadata};
use crate::prompt::{self, ItemText};
use crate::seed::{self, SampleRng};
use crate::split::{DatasetSplit, IdMap, UserSplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Retrieval,
    Ranking,
    Rating,
    Mim,
    Mlm,
    Bpr,
    Ie,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Retrieval,
        Task::Ranking,
        Task::Rating,
        Task::Mim,
        Task::Mlm,
        Task::Bpr,
        Task::Ie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Retrieval => "retrieval",
            Task::Ranking => "ranking",
            Task::Rating => "rating",
            Task::Mim => "mim",
            Task::Mlm => "mlm",
            Task::Bpr => "bpr",
            Task::Ie => "ie",
        }
    }

    /// Tasks evaluated on the validation and test splits.
    pub fn is_recommendation(self) -> bool {
        matches!(self, Task::Retrieval | Task::Ranking | Task::Rating)
    }

    /// Tasks whose samples are resampled every epoch.
    pub fn is_dynamic(self) -> bool {
        matches!(self, Task::Mim | Task::Mlm | Task::Bpr)
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown task {s:?}")))
    }
}

/// Parse a comma-separated task list; `all` selects every task except IE.
pub fn parse_tasks(s: &str) -> Result<BTreeSet<Task>> {
    let mut out = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "all" {
            out.extend(Task::ALL.into_iter().filter(|t| *t != Task::Ie));
        } else {
            out.insert(part.parse()?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Valid,
    Test,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Valid => "valid",
            SplitKind::Test => "test",
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl std::fmt::Display for SplitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub window_size: usize,
    pub mask_ratio: f64,
    pub pool_size: usize,
    pub seed: u64,
    pub epochs: usize,
    pub tasks: BTreeSet<Task>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            window_size: 20,
            mask_ratio: 0.20,
            pool_size: 100,
            seed: 0,
            epochs: 1,
            tasks: Task::ALL.into_iter().filter(|t| *t != Task::Ie).collect(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::Config("window size must be at least 2".into()));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::Config("mask ratio must lie in (0, 1)".into()));
        }
        if self.pool_size < 2 {
            return Err(Error::Config("candidate pool size must be at least 2".into()));
        }
        Ok(())
    }
}

/// A contiguous slice of one user's history.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub user: usize,
    pub split: SplitKind,
    /// 0-based position among the user's windows for this split.
    pub index: usize,
    /// 1-based start offset into the sequence the window was cut from.
    pub start: usize,
    pub items: Vec<Interaction>,
}

impl WindowSpec {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn history(&self) -> &[Interaction] {
        &self.items[..self.items.len() - 1]
    }

    pub fn target(&self) -> &Interaction {
        &self.items[self.items.len() - 1]
    }
}

/// Number of train windows for a train split of length `l`.
pub fn train_window_count(l: usize, w: usize) -> usize {
    if l <= w {
        1
    } else {
        l - w + 1
    }
}

/// Train: every window of length `min(w, L_train)` over the train split.
/// Valid/test: one window ending at the held-out item, left-truncated to `w`.
pub fn enumerate_windows(user: &UserSplit, w: usize, split: SplitKind) -> Vec<WindowSpec> {
    match split {
        SplitKind::Train => {
            let l = user.train.len();
            let len = w.min(l);
            (0..train_window_count(l, w))
                .map(|k| WindowSpec {
                    user: user.user,
                    split,
                    index: k,
                    start: k + 1,
                    items: user.train[k..k + len].to_vec(),
                })
                .collect()
        }
        SplitKind::Valid | SplitKind::Test => {
            let mut seq: Vec<Interaction> = user.train.clone();
            seq.push(user.valid);
            if split == SplitKind::Test {
                seq.push(user.test);
            }
            let from = seq.len().saturating_sub(w);
            vec![WindowSpec {
                user: user.user,
                split,
                index: 0,
                start: from + 1,
                items: seq[from..].to_vec(),
            }]
        }
    }
}

/// Train-interaction counts, used as negative-sampling weights.
#[derive(Debug, Clone)]
pub struct PopularityTable {
    counts: Vec<u64>,
    sampler: Option<WeightedIndex<u64>>,
}

impl PopularityTable {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let sampler = WeightedIndex::new(&counts).ok();
        Self { counts, sampler }
    }

    pub fn from_split(split: &DatasetSplit) -> Self {
        let mut counts = vec![0u64; split.n_items];
        for i in split.users.iter().flat_map(|u| &u.train) {
            counts[i.item] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probability(&self, item: usize) -> f64 {
        let t = self.total();
        if t == 0 {
            0.0
        } else {
            self.counts[item] as f64 / t as f64
        }
    }
}

/// Draw `n` distinct items outside `owned` with probability proportional to
/// train popularity (successive sampling without replacement).
///
/// `owned` must be sorted.
pub fn sample_negatives_by_popularity(
    user: usize,
    owned: &[usize],
    pop: &PopularityTable,
    n: usize,
    rng: &mut SampleRng,
) -> Result<Vec<usize>> {
    let owned_weighted = owned.iter().filter(|&&i| pop.counts[i] > 0).count();
    let nonzero = pop.counts.iter().filter(|&&c| c > 0).count();
    let eligible = nonzero - owned_weighted;
    if eligible < n {
        return Err(Error::InsufficientNegatives {
            user,
            eligible,
            requested: n,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let sampler = pop.sampler.as_ref().expect("nonzero weights");
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let budget = 64 * n + 1024;
    while chosen.len() < n && attempts < budget {
        attempts += 1;
        let item = sampler.sample(rng);
        if owned.binary_search(&item).is_err() && !chosen.contains(&item) {
            chosen.push(item);
        }
    }
    if chosen.len() < n {
        // Rejection stalls when the eligible mass is tiny. Finish with
        // exponential keys over the remaining eligible items, which draws from
        // the same successive-sampling distribution.
        let mut keyed: Vec<(f64, usize)> = (0..pop.counts.len())
            .filter(|&i| pop.counts[i] > 0 && owned.binary_search(&i).is_err() && !chosen.contains(&i))
            .map(|i| {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (-u.ln() / pop.counts[i] as f64, i)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        chosen.extend(keyed.into_iter().take(n - chosen.len()).map(|(_, i)| i));
    }
    Ok(chosen)
}

/// Insert the target at a uniformly random position among the negatives.
fn place_target(negatives: &[usize], target: usize, rng: &mut SampleRng) -> Vec<usize> {
    let pos = rng.gen_range(0..=negatives.len());
    let mut pool = negatives.to_vec();
    pool.insert(pos, target);
    pool
}

/// Per-sample provenance.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub user: Option<usize>,
    pub window: Option<usize>,
    pub epoch: Option<usize>,
    pub target: Option<String>,
    pub candidates: Option<Vec<String>>,
}

/// One rendered prompt; the unit of every corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSample {
    pub id: String,
    pub task: Task,
    pub input: String,
    pub output: String,
    pub meta: SampleMeta,
}

/// Item metadata indexed by dense item index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub items: Vec<Option<ItemMetadata>>,
}

impl Catalog {
    pub fn title(&self, item: usize) -> Option<&str> {
        self.items
            .get(item)
            .and_then(Option::as_ref)
            .and_then(|m| m.title.as_deref())
    }

    pub fn metadata(&self, item: usize) -> Option<&ItemMetadata> {
        self.items.get(item).and_then(Option::as_ref)
    }
}

/// Binds a split, its ID map and catalog to a generation config.
pub struct Generator<'a> {
    pub dataset: &'a str,
    pub split: &'a DatasetSplit,
    pub id_map: &'a IdMap,
    pub catalog: &'a Catalog,
    pub popularity: PopularityTable,
    pub config: GenConfig,
    missing_titles: AtomicUsize,
}

impl<'a> Generator<'a> {
    pub fn new(
        dataset: &'a str,
        split: &'a DatasetSplit,
        id_map: &'a IdMap,
        catalog: &'a Catalog,
        config: GenConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            dataset,
            split,
            id_map,
            catalog,
            popularity: PopularityTable::from_split(split),
            config,
            missing_titles: AtomicUsize::new(0),
        })
    }

    /// Titles rendered empty because the catalog had none.
    pub fn missing_titles(&self) -> usize {
        self.missing_titles.load(Ordering::Relaxed)
    }

    fn text(&self, item: usize) -> ItemText<'_> {
        let title = self.catalog.title(item).unwrap_or_else(|| {
            self.missing_titles.fetch_add(1, Ordering::Relaxed);
            ""
        });
        ItemText::new(self.id_map.display(item), title)
    }

    fn texts(&self, items: &[Interaction]) -> Vec<ItemText<'_>> {
        items.iter().map(|i| self.text(i.item)).collect()
    }

    pub fn sample_id(&self, task: Task, w: &WindowSpec, epoch: Option<usize>) -> String {
        let mut id = format!("{}.{}.{}.u{}.w{}", self.dataset, task, w.split, w.user, w.index);
        if let Some(e) = epoch {
            id.push_str(&format!(".e{e}"));
        }
        id
    }

    fn meta(&self, w: &WindowSpec, epoch: Option<usize>) -> SampleMeta {
        SampleMeta {
            user: Some(w.user),
            window: Some(w.index),
            epoch,
            ..SampleMeta::default()
        }
    }

    /// Sorted item indices of the user's full sequence.
    pub fn owned(&self, user: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.split.users[user].full().map(|i| i.item).collect();
        v.sort_unstable();
        v
    }

    pub fn windows(&self, user: usize, split: SplitKind) -> Vec<WindowSpec> {
        enumerate_windows(&self.split.users[user], self.config.window_size, split)
    }

    /// Users that get samples for `split`.
    pub fn users_for(&self, split: SplitKind) -> Vec<usize> {
        match split {
            SplitKind::Valid => self.split.valid_users.iter().copied().collect(),
            _ => (0..self.split.n_users()).collect(),
        }
    }

    pub fn gen_retrieval(&self, w: &WindowSpec) -> DataSample {
        let target = self.id_map.display(w.target().item).to_string();
        DataSample {
            id: self.sample_id(Task::Retrieval, w, None),
            task: Task::Retrieval,
            input: prompt::retrieval(&self.texts(w.history())),
            output: target.clone(),
            meta: SampleMeta {
                target: Some(target),
                ..self.meta(w, None)
            },
        }
    }

    /// The RNG stream behind a window's ranking pool.
    fn ranking_rng(&self, w: &WindowSpec) -> SampleRng {
        seed::rng(
            self.config.seed,
            "ranking",
            &[w.split.tag(), w.user as u64, w.index as u64],
        )
    }

    /// The candidate pool for a window's ranking sample: `pool_size - 1`
    /// popularity negatives with the target at a random slot. Pure function
    /// of (seed, split, user, window), so evaluators can rebuild it.
    pub fn ranking_pool(&self, w: &WindowSpec) -> Result<Vec<usize>> {
        let mut rng = self.ranking_rng(w);
        let negatives = sample_negatives_by_popularity(
            w.user,
            &self.owned(w.user),
            &self.popularity,
            self.config.pool_size - 1,
            &mut rng,
        )?;
        Ok(place_target(&negatives, w.target().item, &mut rng))
    }

    pub fn gen_ranking(&self, w: &WindowSpec, negatives: &[usize], rng: &mut SampleRng) -> Result<DataSample> {
        if negatives.len() + 1 != self.config.pool_size {
            return Err(Error::Config(format!(
                "ranking needs {} negatives, got {}",
                self.config.pool_size - 1,
                negatives.len()
            )));
        }
        let pool = place_target(negatives, w.target().item, rng);
        self.ranking_sample(w, &pool)
    }

    fn ranking_sample(&self, w: &WindowSpec, pool: &[usize]) -> Result<DataSample> {
        let mut seen = BTreeSet::new();
        for &c in pool {
            if !seen.insert(c) {
                return Err(Error::DuplicateCandidate(self.id_map.display(c).to_string()));
            }
        }
        let ids: Vec<&str> = pool.iter().map(|&c| self.id_map.display(c)).collect();
        let target = self.id_map.display(w.target().item).to_string();
        Ok(DataSample {
            id: self.sample_id(Task::Ranking, w, None),
            task: Task::Ranking,
            input: prompt::ranking(&self.texts(w.history()), &ids),
            output: target.clone(),
            meta: SampleMeta {
                target: Some(target),
                candidates: Some(ids.iter().map(|s| s.to_string()).collect()),
                ..self.meta(w, None)
            },
        })
    }

    fn ranking_for_window(&self, w: &WindowSpec) -> Result<DataSample> {
        let mut rng = self.ranking_rng(w);
        let negatives = sample_negatives_by_popularity(
            w.user,
            &self.owned(w.user),
            &self.popularity,
            self.config.pool_size - 1,
            &mut rng,
        )?;
        self.gen_ranking(w, &negatives, &mut rng)
    }

    pub fn gen_rating(&self, w: &WindowSpec) -> DataSample {
        let (likes, dislikes): (Vec<Interaction>, Vec<Interaction>) =
            w.history().iter().partition(|i| i.liked());
        let target = w.target();
        DataSample {
            id: self.sample_id(Task::Rating, w, None),
            task: Task::Rating,
            input: prompt::rating(&self.texts(&likes), &self.texts(&dislikes), &self.text(target.item)),
            output: prompt::rating_answer(target.liked()).to_string(),
            meta: SampleMeta {
                target: Some(self.id_map.display(target.item).to_string()),
                ..self.meta(w, None)
            },
        }
    }

    pub fn gen_mim(&self, w: &WindowSpec, epoch: usize, rng: &mut SampleRng) -> DataSample {
        let masked = mask_positions(w.len(), self.config.mask_ratio, rng);
        let slots: Vec<Option<ItemText<'_>>> = w
            .items
            .iter()
            .enumerate()
            .map(|(p, i)| (masked.binary_search(&p).is_err()).then(|| self.text(i.item)))
            .collect();
        let answers: Vec<ItemText<'_>> = masked.iter().map(|&p| self.text(w.items[p].item)).collect();
        DataSample {
            id: self.sample_id(Task::Mim, w, Some(epoch)),
            task: Task::Mim,
            input: prompt::mim(&slots),
            output: prompt::item_list(&answers),
            meta: SampleMeta {
                candidates: Some(answers.iter().map(|t| t.id.to_string()).collect()),
                ..self.meta(w, Some(epoch))
            },
        }
    }

    /// A random contiguous span of the user's train split (length 2..=w).
    /// The sample has no output; span corruption happens in the trainer.
    pub fn gen_mlm(&self, w: &WindowSpec, epoch: usize, rng: &mut SampleRng) -> DataSample {
        let train = &self.split.users[w.user].train;
        let (start, len) = mlm_span(train.len(), self.config.window_size, rng);
        DataSample {
            id: self.sample_id(Task::Mlm, w, Some(epoch)),
            task: Task::Mlm,
            input: prompt::item_list(&self.texts(&train[start..start + len])),
            output: String::new(),
            meta: self.meta(w, Some(epoch)),
        }
    }

    pub fn gen_bpr(&self, w: &WindowSpec, negative: usize, epoch: usize, rng: &mut SampleRng) -> Result<DataSample> {
        if self.split.users[w.user].owns(negative) {
            return Err(Error::NegativeInSequence {
                user: w.user,
                item: negative,
            });
        }
        let pos = self.text(w.target().item);
        let neg = self.text(negative);
        let choices = if rng.gen_bool(0.5) { [&pos, &neg] } else { [&neg, &pos] };
        Ok(DataSample {
            id: self.sample_id(Task::Bpr, w, Some(epoch)),
            task: Task::Bpr,
            input: prompt::bpr(&self.texts(w.history()), choices),
            output: pos.entry(),
            meta: SampleMeta {
                target: Some(pos.id.to_string()),
                candidates: Some(choices.iter().map(|c| c.id.to_string()).collect()),
                ..self.meta(w, Some(epoch))
            },
        })
    }

    fn bpr_for_window(&self, w: &WindowSpec, epoch: usize) -> Result<DataSample> {
        let mut rng = self.dynamic_rng(Task::Bpr, w, epoch);
        let neg = sample_negatives_by_popularity(w.user, &self.owned(w.user), &self.popularity, 1, &mut rng)?;
        self.gen_bpr(w, neg[0], epoch, &mut rng)
    }

    fn dynamic_rng(&self, task: Task, w: &WindowSpec, epoch: usize) -> SampleRng {
        seed::rng(
            self.config.seed,
            task.name(),
            &[w.user as u64, w.index as u64, epoch as u64],
        )
    }

    /// One question/answer sample per populated content field.
    pub fn gen_ie(&self, item: usize) -> Vec<DataSample> {
        let Some(meta) = self.catalog.metadata(item) else {
            return Vec::new();
        };
        let id = self.id_map.display(item);
        let fields: [(&str, Option<String>); 5] = [
            ("title", meta.title.clone()),
            (
                "categories",
                (!meta.categories.is_empty()).then(|| meta.categories.join(", ")),
            ),
            ("brand", meta.brand.clone()),
            ("price", meta.price.map(|p| format!("{p:.2}"))),
            ("description", meta.description.clone()),
        ];
        fields
            .into_iter()
            .filter_map(|(field, answer)| {
                answer.map(|a| DataSample {
                    id: format!("{}.ie.train.i{item}.{field}", self.dataset),
                    task: Task::Ie,
                    input: prompt::content_question(field, id),
                    output: a,
                    meta: SampleMeta {
                        target: Some(id.to_string()),
                        ..SampleMeta::default()
                    },
                })
            })
            .collect()
    }

    /// All samples of one (task, split, epoch) in (user, window) order.
    /// `epoch` is ignored for static tasks.
    pub fn samples(&self, task: Task, split: SplitKind, epoch: usize) -> Result<Vec<DataSample>> {
        if task == Task::Ie {
            return Ok((0..self.split.n_items).flat_map(|i| self.gen_ie(i)).collect());
        }
        if task.is_dynamic() && split != SplitKind::Train {
            return Ok(Vec::new());
        }
        let per_user: Vec<Result<Vec<DataSample>>> = self
            .users_for(split)
            .into_par_iter()
            .map(|u| {
                self.windows(u, split)
                    .iter()
                    .map(|w| self.sample_for(task, w, epoch))
                    .collect()
            })
            .collect();
        let mut out = Vec::new();
        for r in per_user {
            out.extend(r?);
        }
        Ok(out)
    }

    fn sample_for(&self, task: Task, w: &WindowSpec, epoch: usize) -> Result<DataSample> {
        match task {
            Task::Retrieval => Ok(self.gen_retrieval(w)),
            Task::Ranking => self.ranking_for_window(w),
            Task::Rating => Ok(self.gen_rating(w)),
            Task::Mim => Ok(self.gen_mim(w, epoch, &mut self.dynamic_rng(Task::Mim, w, epoch))),
            Task::Mlm => Ok(self.gen_mlm(w, epoch, &mut self.dynamic_rng(Task::Mlm, w, epoch))),
            Task::Bpr => self.bpr_for_window(w, epoch),
            Task::Ie => unreachable!("IE samples are per item"),
        }
    }

    /// Write every enabled corpus file (and truth files for the held-out
    /// splits) into `out_dir`.
    pub fn generate_corpus(&self, out_dir: &Path, header: &Header) -> Result<CorpusReport> {
        let mut report = CorpusReport::default();
        if self.config.tasks.is_empty() {
            log::warn!("no tasks enabled; nothing generated");
            return Ok(report);
        }
        for &task in &self.config.tasks {
            let jobs: Vec<(SplitKind, Option<usize>)> = if task == Task::Ie {
                vec![(SplitKind::Train, None)]
            } else if task.is_dynamic() {
                (0..self.config.epochs).map(|e| (SplitKind::Train, Some(e))).collect()
            } else {
                vec![(SplitKind::Train, None), (SplitKind::Valid, None), (SplitKind::Test, None)]
            };
            for (split, epoch) in jobs {
                let samples = self.samples(task, split, epoch.unwrap_or(0))?;
                let path = out_dir.join(corpus_file_name(self.dataset, task, split, epoch));
                artifact::write_jsonl(&path, header, &samples)?;
                report.files.push(CorpusFile {
                    path,
                    task,
                    split,
                    epoch,
                    samples: samples.len(),
                });
                if task.is_recommendation() && split != SplitKind::Train {
                    let truth: Vec<crate::metrics::TruthRecord> = samples.iter().map(truth_of).collect();
                    let path = out_dir.join(truth_file_name(self.dataset, task, split));
                    artifact::write_jsonl(&path, header, &truth)?;
                }
            }
        }
        report.missing_titles = self.missing_titles();
        if report.missing_titles > 0 {
            log::warn!("{} item renderings had no title", report.missing_titles);
        }
        Ok(report)
    }
}

/// MIM mask count: `round(ratio * len)` (halves up), clamped to `[1, len-1]`.
pub fn mask_count(len: usize, ratio: f64) -> usize {
    let m = (ratio * len as f64 + 1e-9).round() as usize;
    m.clamp(1, len.saturating_sub(1).max(1))
}

/// Sorted positions to mask in a window of `len` items.
pub fn mask_positions(len: usize, ratio: f64, rng: &mut SampleRng) -> Vec<usize> {
    let mut p = index::sample(rng, len, mask_count(len, ratio)).into_vec();
    p.sort_unstable();
    p
}

/// Uniform start in `0..=l-2`, then uniform length in `2..=min(w, l-start)`.
pub fn mlm_span(l: usize, w: usize, rng: &mut SampleRng) -> (usize, usize) {
    debug_assert!(l >= 2);
    let start = rng.gen_range(0..=l - 2);
    let max_len = w.min(l - start);
    (start, rng.gen_range(2..=max_len))
}

pub fn truth_of(s: &DataSample) -> crate::metrics::TruthRecord {
    match s.task {
        Task::Rating => crate::metrics::TruthRecord::label(&s.id, s.output == "yes"),
        _ => crate::metrics::TruthRecord::target(&s.id, s.meta.target.clone().unwrap_or_default()),
    }
}

pub fn corpus_file_name(dataset: &str, task: Task, split: SplitKind, epoch: Option<usize>) -> String {
    match epoch {
        Some(e) => format!("{dataset}.{task}.{split}.epoch{e}.jsonl"),
        None => format!("{dataset}.{task}.{split}.jsonl"),
    }
}

pub fn truth_file_name(dataset: &str, task: Task, split: SplitKind) -> String {
    format!("{dataset}.{task}.{split}.truth.jsonl")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFile {
    pub path: PathBuf,
    pub task: Task,
    pub split: SplitKind,
    pub epoch: Option<usize>,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusReport {
    pub files: Vec<CorpusFile>,
    pub missing_titles: usize,
}

/// Expected per-split sample counts for a recommendation task.
pub fn expected_counts(split: &DatasetSplit, w: usize) -> (usize, usize, usize) {
    let train = split
        .users
        .iter()
        .map(|u| train_window_count(u.train.len(), w))
        .sum();
    (train, split.valid_users.len(), split.n_users())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::build_split;
    use crate::ingest::UserSequence;

    fn inter(item: usize, rating: f64) -> Interaction {
        Interaction {
            item,
            rating,
            timestamp: item as i64,
        }
    }

    fn user_with_train(len: usize) -> UserSplit {
        UserSplit {
            user: 0,
            train: (0..len).map(|i| inter(i, 4.0)).collect(),
            valid: inter(len, 4.0),
            test: inter(len + 1, 4.0),
        }
    }

    struct Fixture {
        split: DatasetSplit,
        ids: IdMap,
        catalog: Catalog,
    }

    fn fixture(n_users: usize, n_items: usize, len: usize) -> Fixture {
        let seqs: Vec<UserSequence> = (0..n_users)
            .map(|u| UserSequence {
                user: u,
                items: (0..len)
                    .map(|t| Interaction {
                        item: (u * 7 + t * 3) % n_items,
                        rating: [5.0, 2.0, 4.0, 3.0][t % 4],
                        timestamp: t as i64,
                    })
                    .collect(),
            })
            .collect();
        let split = build_split(&seqs, n_items, 1).unwrap();
        let ids = IdMap::new(n_items, 1).unwrap();
        let catalog = Catalog {
            items: (0..n_items)
                .map(|i| {
                    Some(ItemMetadata {
                        item_raw_id: format!("R{i}"),
                        title: Some(format!("Title {i}")),
                        ..ItemMetadata::default()
                    })
                })
                .collect(),
        };
        Fixture { split, ids, catalog }
    }

    #[test]
    fn window_counts() {
        assert_eq!(enumerate_windows(&user_with_train(5), 20, SplitKind::Train).len(), 1);
        let ws = enumerate_windows(&user_with_train(25), 20, SplitKind::Train);
        assert_eq!(ws.iter().map(|w| w.start).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
        assert!(ws.iter().all(|w| w.len() == 20));
    }

    #[test]
    fn held_out_windows_end_at_target() {
        let u = user_with_train(30);
        let v = &enumerate_windows(&u, 20, SplitKind::Valid)[0];
        assert_eq!((v.len(), v.target().item), (20, 30));
        let t = &enumerate_windows(&u, 20, SplitKind::Test)[0];
        assert_eq!((t.len(), t.target().item, t.items[0].item), (20, 31, 12));
    }

    #[test]
    fn mask_counts() {
        assert_eq!(mask_count(10, 0.2), 2);
        assert_eq!(mask_count(2, 0.2), 1);
        assert_eq!(mask_count(5, 0.2), 1);
        assert_eq!(mask_count(3, 0.9), 2);
        assert_eq!(mask_count(20, 0.2), 4);
    }

    #[test]
    fn mlm_on_two_items_takes_both() {
        let mut rng = seed::rng(1, "t", &[]);
        for _ in 0..50 {
            assert_eq!(mlm_span(2, 20, &mut rng), (0, 2));
        }
    }

    #[test]
    fn forced_negative_set() {
        let pop = PopularityTable::from_counts(vec![5, 3, 2]);
        let mut rng = seed::rng(3, "t", &[]);
        let mut got = sample_negatives_by_popularity(0, &[0], &pop, 2, &mut rng).unwrap();
        got.sort_unstable();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn zero_count_items_never_drawn() {
        let pop = PopularityTable::from_counts(vec![0, 4, 0, 1]);
        let mut rng = seed::rng(3, "t", &[]);
        for _ in 0..2000 {
            let n = sample_negatives_by_popularity(0, &[], &pop, 1, &mut rng).unwrap();
            assert!(n[0] == 1 || n[0] == 3);
        }
        let err = sample_negatives_by_popularity(0, &[1], &pop, 2, &mut rng).unwrap_err();
        assert!(matches!(err, Error::InsufficientNegatives { eligible: 1, requested: 2, .. }));
    }

    #[test]
    fn fallback_path_still_respects_exclusion() {
        // one heavy owned item soaks up almost all mass, forcing the fallback
        let mut counts = vec![1_000_000_000u64];
        counts.extend(std::iter::repeat_n(1, 30));
        let pop = PopularityTable::from_counts(counts);
        let mut rng = seed::rng(9, "t", &[]);
        let got = sample_negatives_by_popularity(0, &[0], &pop, 20, &mut rng).unwrap();
        let uniq: BTreeSet<_> = got.iter().copied().collect();
        assert_eq!(uniq.len(), 20);
        assert!(!uniq.contains(&0));
    }

    #[test]
    fn retrieval_of_minimum_window() {
        let f = fixture(4, 40, 5);
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, GenConfig::default()).unwrap();
        let w = WindowSpec {
            user: 0,
            split: SplitKind::Train,
            index: 0,
            start: 1,
            items: vec![inter(3, 4.0), inter(9, 4.0)],
        };
        let s = g.gen_retrieval(&w);
        assert_eq!(s.output, f.ids.display(9));
        assert_eq!(s.input.matches("Item ID:").count(), 1);
    }

    #[test]
    fn rating_boundary_is_dislike() {
        let f = fixture(4, 40, 5);
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, GenConfig::default()).unwrap();
        let w = WindowSpec {
            user: 0,
            split: SplitKind::Train,
            index: 0,
            start: 1,
            items: vec![inter(3, 5.0), inter(4, 4.0), inter(9, 3.0)],
        };
        let s = g.gen_rating(&w);
        assert_eq!(s.output, "no");
        assert!(!s.input.contains("dislikes"));
    }

    #[test]
    fn two_candidate_pool() {
        let f = fixture(4, 40, 5);
        let cfg = GenConfig {
            pool_size: 2,
            ..GenConfig::default()
        };
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, cfg).unwrap();
        let w = &g.windows(0, SplitKind::Test)[0];
        let mut rng = seed::rng(1, "x", &[]);
        let s = g.gen_ranking(w, &[39], &mut rng).unwrap();
        let c: BTreeSet<String> = s.meta.candidates.clone().unwrap().into_iter().collect();
        let want: BTreeSet<String> = [f.ids.display(39), f.ids.display(w.target().item)]
            .into_iter()
            .map(String::from)
            .collect();
        assert_eq!(c, want);
        assert!(g.gen_ranking(w, &[39, 38], &mut rng).is_err());
        assert!(matches!(
            g.gen_ranking(w, &[w.target().item], &mut rng),
            Err(Error::DuplicateCandidate(_))
        ));
    }

    #[test]
    fn bpr_rejects_owned_negative() {
        let f = fixture(4, 40, 5);
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, GenConfig::default()).unwrap();
        let w = &g.windows(0, SplitKind::Train)[0];
        let owned = f.split.users[0].test.item;
        let mut rng = seed::rng(1, "x", &[]);
        assert!(matches!(
            g.gen_bpr(w, owned, 0, &mut rng),
            Err(Error::NegativeInSequence { .. })
        ));
    }

    #[test]
    fn ie_one_sample_per_field() {
        let mut f = fixture(4, 40, 5);
        f.catalog.items[0] = Some(ItemMetadata {
            item_raw_id: "R0".into(),
            title: Some("Shoe".into()),
            brand: Some("Nike".into()),
            categories: vec!["Sports".into(), "Running".into()],
            price: Some(59.5),
            description: Some("A shoe.".into()),
        });
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, GenConfig::default()).unwrap();
        let all = g.gen_ie(0);
        assert_eq!(all.len(), 5);
        let brand = all.iter().find(|s| s.id.ends_with(".brand")).unwrap();
        assert_eq!(brand.input, format!("What's the brand of {}?", f.ids.display(0)));
        assert_eq!(brand.output, "Nike");
        assert_eq!(g.gen_ie(1).len(), 1);
    }

    #[test]
    fn missing_title_counted_and_empty() {
        let mut f = fixture(4, 40, 5);
        f.catalog.items[3] = None;
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, GenConfig::default()).unwrap();
        let w = WindowSpec {
            user: 0,
            split: SplitKind::Train,
            index: 0,
            start: 1,
            items: vec![inter(3, 4.0), inter(9, 4.0)],
        };
        let s = g.gen_retrieval(&w);
        assert!(s.input.contains(&format!("Item ID: {}, Title: ;", f.ids.display(3))));
        assert_eq!(g.missing_titles(), 1);
    }

    #[test]
    fn static_tasks_ignore_epoch_dynamic_tasks_do_not() {
        let f = fixture(30, 200, 12);
        let g = Generator::new("t", &f.split, &f.ids, &f.catalog, GenConfig::default()).unwrap();
        for task in [Task::Retrieval, Task::Ranking, Task::Rating] {
            assert_eq!(
                g.samples(task, SplitKind::Train, 0).unwrap(),
                g.samples(task, SplitKind::Train, 1).unwrap()
            );
        }
        for task in [Task::Mim, Task::Mlm, Task::Bpr] {
            assert_ne!(
                g.samples(task, SplitKind::Train, 0).unwrap(),
                g.samples(task, SplitKind::Train, 1).unwrap()
            );
        }
    }

    #[test]
    fn parses_task_lists() {
        let t = parse_tasks("retrieval, mim").unwrap();
        assert_eq!(t.into_iter().collect::<Vec<_>>(), vec![Task::Retrieval, Task::Mim]);
        assert_eq!(parse_tasks("all").unwrap().len(), 6);
        assert!(parse_tasks("nope").is_err());
        assert!(parse_tasks("").unwrap().is_empty());
    }
}
