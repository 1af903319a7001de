//! Reference recommenders: popularity, the History rating baseline, a
//! first-order Markov chain and BPR matrix factorization.
//!
//! They read the same splits the corpus is generated from and write
//! predictions in the harness format, so a run of the evaluator against them
//! checks that the held-out targets carry recoverable signal.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Interaction;
use crate::metrics::PredictionRecord;
use crate::sample_gen::{sample_negatives_by_popularity, DataSample, Generator, PopularityTable, SplitKind, Task, WindowSpec};
use crate::seed;

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BprConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for BprConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            learning_rate: 0.05,
            l2: 1e-4,
            epochs: 30,
        }
    }
}

/// User and item embeddings, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub n_users: usize,
    pub n_items: usize,
    pub dim: usize,
    pub l2: f64,
    pub learning_rate: f64,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
}

/// Gradient of the BPR loss with respect to the three rows it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct BprGrad {
    pub user: Vec<f64>,
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl FactorModel {
    /// Entries drawn uniformly from [-0.05, 0.05].
    pub fn init(n_users: usize, n_items: usize, cfg: &BprConfig, seed: u64) -> Result<Self> {
        if cfg.dim == 0 {
            return Err(Error::Config("factor dimension must be at least 1".into()));
        }
        if cfg.learning_rate <= 0.0 || cfg.l2 < 0.0 {
            return Err(Error::Config("need learning_rate > 0 and l2 >= 0".into()));
        }
        let mut rng = seed::rng(seed, "bpr-init", &[n_users as u64, n_items as u64, cfg.dim as u64]);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-0.05..=0.05)).collect() };
        let user_factors = draw(n_users * cfg.dim);
        let item_factors = draw(n_items * cfg.dim);
        Ok(Self {
            n_users,
            n_items,
            dim: cfg.dim,
            l2: cfg.l2,
            learning_rate: cfg.learning_rate,
            user_factors,
            item_factors,
        })
    }

    pub fn user(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn score(&self, u: usize, i: usize) -> f64 {
        dot(self.user(u), self.item(i))
    }

    /// Multiply every parameter by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.user_factors.iter_mut().chain(m.item_factors.iter_mut()).for_each(|x| *x *= c);
        m
    }

    fn all_finite(&self) -> bool {
        self.user_factors.iter().chain(&self.item_factors).all(|x| x.is_finite())
    }
}

/// `-ln σ(s(u,i⁺) - s(u,i⁻)) + l2 (‖u‖² + ‖i⁺‖² + ‖i⁻‖²)`.
pub fn bpr_loss(model: &FactorModel, u: usize, pos: usize, neg: usize) -> f64 {
    let x = model.score(u, pos) - model.score(u, neg);
    softplus(-x) + model.l2 * (sq_norm(model.user(u)) + sq_norm(model.item(pos)) + sq_norm(model.item(neg)))
}

pub fn bpr_grad(model: &FactorModel, u: usize, pos: usize, neg: usize) -> BprGrad {
    let (pu, pp, pn) = (model.user(u), model.item(pos), model.item(neg));
    let x = model.score(u, pos) - model.score(u, neg);
    // d/dx of -ln σ(x)
    let g = -sigmoid(-x);
    let r = 2.0 * model.l2;
    BprGrad {
        user: (0..model.dim).map(|d| g * (pp[d] - pn[d]) + r * pu[d]).collect(),
        pos: (0..model.dim).map(|d| g * pu[d] + r * pp[d]).collect(),
        neg: (0..model.dim).map(|d| -g * pu[d] + r * pn[d]).collect(),
    }
}

fn sgd_step(model: &mut FactorModel, u: usize, pos: usize, neg: usize) {
    let grad = bpr_grad(model, u, pos, neg);
    let (dim, lr) = (model.dim, model.learning_rate);
    for d in 0..dim {
        model.user_factors[u * dim + d] -= lr * grad.user[d];
        model.item_factors[pos * dim + d] -= lr * grad.pos[d];
        model.item_factors[neg * dim + d] -= lr * grad.neg[d];
    }
}

/// Trained model plus the mean BPR loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainedBpr {
    pub model: FactorModel,
    pub epoch_losses: Vec<f64>,
}

/// SGD on uniformly drawn train pairs, each with one popularity negative
/// drawn from outside the user's full sequence. One epoch is as many steps
/// as there are train pairs.
pub fn train_bpr_mf(gen: &Generator<'_>, cfg: &BprConfig, seed: u64) -> Result<TrainedBpr> {
    let split = gen.split;
    let mut model = FactorModel::init(split.n_users(), split.n_items, cfg, seed)?;
    let pairs: Vec<(usize, usize)> = split
        .users
        .iter()
        .flat_map(|u| u.train.iter().map(move |i| (u.user, i.item)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Config("no train interactions".into()));
    }
    let owned: Vec<Vec<usize>> = (0..split.n_users()).map(|u| gen.owned(u)).collect();
    let mut rng = seed::rng(seed, "bpr-train", &[]);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for _ in 0..pairs.len() {
            let (u, pos) = pairs[rng.gen_range(0..pairs.len())];
            let neg = sample_negatives_by_popularity(u, &owned[u], &gen.popularity, 1, &mut rng)?[0];
            total += bpr_loss(&model, u, pos, neg);
            sgd_step(&mut model, u, pos, neg);
            step += 1;
            let touched = model.user(u).iter().chain(model.item(pos)).chain(model.item(neg));
            if !touched.clone().all(|x| x.is_finite()) {
                return Err(Error::Diverged { step });
            }
        }
        epoch_losses.push(total / pairs.len() as f64);
        log::debug!("bpr-mf epoch {} loss {:.5}", epoch_losses.len(), total / pairs.len() as f64);
    }
    if !model.all_finite() {
        return Err(Error::Diverged { step });
    }
    Ok(TrainedBpr { model, epoch_losses })
}

/// The `k` items with the most train interactions, ties by item index.
pub fn popularity_rank(pop: &PopularityTable, k: usize) -> Vec<usize> {
    let mut items: Vec<usize> = (0..pop.counts().len()).collect();
    items.sort_by(|&a, &b| pop.counts()[b].cmp(&pop.counts()[a]).then(a.cmp(&b)));
    items.truncate(k);
    items
}

/// Share of the user's train ratings that are likes; 0.5 with no history.
pub fn history_score(train: &[Interaction]) -> f64 {
    if train.is_empty() {
        return 0.5;
    }
    train.iter().filter(|i| i.liked()).count() as f64 / train.len() as f64
}

/// Successor counts over consecutive train pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTable {
    #[serde(with = "pair_lists")]
    pub successors: Vec<BTreeMap<usize, u64>>,
    pub popularity: Vec<u64>,
}

impl MarkovTable {
    pub fn from_generator(gen: &Generator<'_>) -> Self {
        let mut successors = vec![BTreeMap::new(); gen.split.n_items];
        for u in &gen.split.users {
            for pair in u.train.windows(2) {
                *successors[pair[0].item].entry(pair[1].item).or_insert(0) += 1;
            }
        }
        Self {
            successors,
            popularity: gen.popularity.counts().to_vec(),
        }
    }

    fn key(&self, last: Option<usize>, item: usize) -> (f64, f64) {
        let succ = last
            .and_then(|l| self.successors.get(l))
            .and_then(|m| m.get(&item))
            .copied()
            .unwrap_or(0);
        (succ as f64, self.popularity[item] as f64)
    }
}

// JSON object keys are strings, which tagged enums cannot turn back into
// integers; store each map as a list of pairs.
mod pair_lists {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(maps: &[BTreeMap<usize, u64>], s: S) -> Result<S::Ok, S::Error> {
        let lists: Vec<Vec<(usize, u64)>> = maps.iter().map(|m| m.iter().map(|(&k, &v)| (k, v)).collect()).collect();
        lists.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BTreeMap<usize, u64>>, D::Error> {
        let lists = Vec::<Vec<(usize, u64)>>::deserialize(d)?;
        Ok(lists.into_iter().map(|l| l.into_iter().collect()).collect())
    }
}

/// Successors of `last_item` by count, padded with popular items.
pub fn markov_predict(table: &MarkovTable, last_item: usize, k: usize) -> Vec<usize> {
    let items: Vec<usize> = (0..table.popularity.len()).collect();
    top_k(&items, k, |i| table.key(Some(last_item), i))
}

/// Order `items` best first by a descending key, ties by ascending index.
fn top_k<F: Fn(usize) -> (f64, f64)>(items: &[usize], k: usize, key: F) -> Vec<usize> {
    let mut keyed: Vec<((f64, f64), usize)> = items.iter().map(|&i| (key(i), i)).collect();
    let cmp = |a: &((f64, f64), usize), b: &((f64, f64), usize)| -> Ordering {
        b.0 .0
            .total_cmp(&a.0 .0)
            .then(b.0 .1.total_cmp(&a.0 .1))
            .then(a.1.cmp(&b.1))
    };
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k, cmp);
        keyed.truncate(k);
    }
    keyed.sort_by(cmp);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// A fitted reference recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    /// Ranks by train popularity; rates with the History baseline.
    Popularity { counts: Vec<u64> },
    Markov(MarkovTable),
    BprMf(FactorModel),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Popularity { .. } => "popularity",
            Model::Markov(_) => "markov",
            Model::BprMf(_) => "bpr-mf",
        }
    }

    fn key(&self, user: usize, history: &[Interaction], item: usize) -> (f64, f64) {
        match self {
            Model::Popularity { counts } => (counts[item] as f64, 0.0),
            Model::Markov(t) => t.key(history.last().map(|i| i.item), item),
            Model::BprMf(m) => (m.score(user, item), 0.0),
        }
    }

    /// Like-probability for the rating task.
    pub fn rating_score(&self, user: usize, train: &[Interaction], target: usize) -> f64 {
        match self {
            Model::BprMf(m) => sigmoid(m.score(user, target)),
            _ => history_score(train),
        }
    }

    /// Best-first ranking of `items` for a user with the given history.
    pub fn rank(&self, user: usize, history: &[Interaction], items: &[usize], k: usize) -> Vec<usize> {
        top_k(items, k, |i| self.key(user, history, i))
    }
}

/// Check that the ranking pools rebuilt from seeds match a corpus file.
pub fn verify_pools(gen: &Generator<'_>, corpus: &[DataSample]) -> Result<()> {
    for s in corpus.iter().filter(|s| s.task == Task::Ranking) {
        let (Some(user), Some(window)) = (s.meta.user, s.meta.window) else {
            continue;
        };
        let split = if s.id.contains(".test.") {
            SplitKind::Test
        } else if s.id.contains(".valid.") {
            SplitKind::Valid
        } else {
            SplitKind::Train
        };
        let w = gen
            .windows(user, split)
            .into_iter()
            .nth(window)
            .ok_or_else(|| Error::Config(format!("sample {} has no matching window", s.id)))?;
        let rebuilt: Vec<String> = gen
            .ranking_pool(&w)?
            .into_iter()
            .map(|i| gen.id_map.display(i).to_string())
            .collect();
        if Some(&rebuilt) != s.meta.candidates.as_ref() {
            return Err(Error::Config(format!(
                "ranking pool of {} differs from the corpus; was the corpus generated with another seed or config?",
                s.id
            )));
        }
    }
    Ok(())
}

/// Predictions for every test-split sample of `task`.
pub fn emit_predictions(model: &Model, gen: &Generator<'_>, task: Task, k_max: usize) -> Result<Vec<PredictionRecord>> {
    if !task.is_recommendation() {
        return Err(Error::Config(format!("{task} is not a recommendation task")));
    }
    let all_items: Vec<usize> = (0..gen.split.n_items).collect();
    let per_user: Vec<Result<PredictionRecord>> = gen
        .users_for(SplitKind::Test)
        .into_par_iter()
        .map(|u| {
            let w: WindowSpec = gen.windows(u, SplitKind::Test).remove(0);
            let id = gen.sample_id(task, &w, None);
            let history = w.history();
            Ok(match task {
                Task::Retrieval => {
                    // previously bought items cannot be the next purchase
                    let seen: Vec<usize> = {
                        let mut s: Vec<usize> = gen.split.users[u].train.iter().map(|i| i.item).collect();
                        s.push(gen.split.users[u].valid.item);
                        s.sort_unstable();
                        s
                    };
                    let candidates: Vec<usize> =
                        all_items.iter().copied().filter(|i| seen.binary_search(i).is_err()).collect();
                    let ranked = model.rank(u, history, &candidates, k_max);
                    PredictionRecord::ranked(id, ranked.into_iter().map(|i| gen.id_map.display(i).to_string()).collect())
                }
                Task::Ranking => {
                    let pool = gen.ranking_pool(&w)?;
                    let ranked = model.rank(u, history, &pool, pool.len());
                    PredictionRecord::ranked(id, ranked.into_iter().map(|i| gen.id_map.display(i).to_string()).collect())
                }
                _ => PredictionRecord::scored(
                    id,
                    model.rating_score(u, &gen.split.users[u].train, w.target().item),
                ),
            })
        })
        .collect();
    per_user.into_iter().collect()
}
