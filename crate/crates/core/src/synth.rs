//! Synthetic review logs with planted structure.
//!
//! Three presets cover the harness's needs: a general fixture (Zipf item
//! popularity, two taste clusters, planted successor pairs), a deterministic
//! chain where each item is always followed by the same next item, and a pure
//! two-cluster world where collaborative filtering beats popularity.

use std::io::Write;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifact;
use crate::error::{Error, Result};
use crate::ingest::{ItemMetadata, RawInteraction};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Item popularity ∝ 1 / rank^exponent within each cluster.
    pub zipf_exponent: f64,
    pub clusters: usize,
    /// Probability a fresh draw comes from the user's own cluster.
    pub affinity: f64,
    /// Probability the next item is the planted successor of the previous one.
    pub chain_prob: f64,
    /// Every n-th purchase shares the previous timestamp (0 disables ties).
    pub tie_every: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// 1,000 users over a Zipf catalog with two taste clusters and planted
    /// sequential pairs.
    pub fn standard(seed: u64) -> Self {
        Self {
            n_users: 1000,
            n_items: 600,
            min_len: 5,
            max_len: 40,
            zipf_exponent: 1.0,
            clusters: 2,
            affinity: 0.8,
            chain_prob: 0.3,
            tie_every: 7,
            seed,
        }
    }

    /// Every purchase is followed by the item's fixed successor.
    pub fn planted_chain(seed: u64) -> Self {
        Self {
            n_users: 1000,
            n_items: 400,
            min_len: 6,
            max_len: 30,
            zipf_exponent: 0.0,
            clusters: 1,
            affinity: 1.0,
            chain_prob: 1.0,
            tie_every: 0,
            seed,
        }
    }

    /// Users buy only inside their own half of the catalog.
    pub fn two_clusters(seed: u64) -> Self {
        Self {
            n_users: 1000,
            n_items: 200,
            min_len: 8,
            max_len: 20,
            zipf_exponent: 0.3,
            clusters: 2,
            affinity: 1.0,
            chain_prob: 0.0,
            tie_every: 0,
            seed,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        match name {
            "standard" => Ok(Self::standard(seed)),
            "chain" => Ok(Self::planted_chain(seed)),
            "clusters" => Ok(Self::two_clusters(seed)),
            other => Err(Error::Config(format!(
                "unknown fixture {other:?} (expected standard, chain or clusters)"
            ))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.n_items < self.clusters || self.min_len < 3 || self.min_len > self.max_len {
            return Err(Error::Config("inconsistent synthetic fixture parameters".into()));
        }
        if self.max_len >= self.n_items / self.clusters {
            return Err(Error::Config("sequences must be shorter than a cluster".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub interactions: Vec<RawInteraction>,
    pub metadata: Vec<ItemMetadata>,
}

pub fn item_raw_id(i: usize) -> String {
    format!("B{:09}", 100_003 * i % 1_000_000_007)
}

const NOUNS: [&str; 12] = [
    "Puzzle", "Blocks", "Kite", "Robot", "Yo-Yo", "Marbles", "Doll", "Train Set", "Crayons", "Ball",
    "Drum", "Planet Model",
];
const ADJECTIVES: [&str; 8] = ["Classic", "Deluxe", "Mini", "Wooden", "Glow", "Travel", "Giant", "Rainbow"];

fn metadata_for(i: usize, cluster: usize, rng: &mut impl Rng) -> ItemMetadata {
    let title = format!(
        "{} {} No. {}",
        ADJECTIVES[i % ADJECTIVES.len()],
        NOUNS[(i / ADJECTIVES.len()) % NOUNS.len()],
        i
    );
    ItemMetadata {
        item_raw_id: item_raw_id(i),
        title: Some(title),
        brand: rng.gen_bool(0.7).then(|| format!("Brand{}", i % 17)),
        categories: vec!["Toys & Games".to_string(), format!("Cluster {cluster}")],
        price: rng
            .gen_bool(0.6)
            .then(|| (rng.gen_range(199..9999) as f64) / 100.0),
        description: rng.gen_bool(0.4).then(|| format!("Synthetic product number {i}.")),
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, "synth", &[]);
    let cluster_of = |i: usize| i % cfg.clusters;

    // within-cluster Zipf over a shuffled rank order
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.clusters];
    for i in 0..cfg.n_items {
        members[cluster_of(i)].push(i);
    }
    for m in &mut members {
        m.shuffle(&mut rng);
    }
    let samplers: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| {
            let w: Vec<f64> = (0..m.len()).map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent)).collect();
            WeightedIndex::new(w).expect("positive weights")
        })
        .collect();

    // planted successor: a random cycle through each cluster
    let mut successor = vec![0usize; cfg.n_items];
    for m in &members {
        let mut order = m.clone();
        order.shuffle(&mut rng);
        for k in 0..order.len() {
            successor[order[k]] = order[(k + 1) % order.len()];
        }
    }

    let mut interactions = Vec::new();
    for u in 0..cfg.n_users {
        let home = u % cfg.clusters;
        let len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let mut seq: Vec<usize> = Vec::with_capacity(len);
        while seq.len() < len {
            let next = match seq.last() {
                Some(&prev) if rng.gen_bool(cfg.chain_prob) => successor[prev],
                _ => {
                    let c = if rng.gen_bool(cfg.affinity) {
                        home
                    } else {
                        rng.gen_range(0..cfg.clusters)
                    };
                    members[c][samplers[c].sample(&mut rng)]
                }
            };
            if !seq.contains(&next) {
                seq.push(next);
            } else if cfg.chain_prob >= 1.0 {
                break;
            }
        }
        let mut t: i64 = 1_300_000_000 + rng.gen_range(0..1_000_000);
        for (pos, &item) in seq.iter().enumerate() {
            if cfg.tie_every == 0 || pos == 0 || pos % cfg.tie_every != 0 {
                t += rng.gen_range(3_600..864_000);
            }
            let rating = if rng.gen_bool(0.7) {
                rng.gen_range(4..=5)
            } else {
                rng.gen_range(1..=3)
            } as f64;
            interactions.push(RawInteraction {
                user_raw_id: format!("U{u:06}"),
                item_raw_id: item_raw_id(item),
                rating,
                timestamp: t,
            });
        }
    }
    // log files interleave users
    interactions.shuffle(&mut rng);

    let metadata = (0..cfg.n_items)
        .map(|i| metadata_for(i, cluster_of(i), &mut rng))
        .collect();
    Ok(SynthData {
        interactions,
        metadata,
    })
}

/// Write `{name}.reviews.jsonl` and `{name}.meta.jsonl` in the Amazon field
/// layout. Returns the two paths.
pub fn write_amazon_jsonl(data: &SynthData, dir: &Path, name: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let reviews = dir.join(format!("{name}.reviews.jsonl"));
    let meta = dir.join(format!("{name}.meta.jsonl"));
    let mut out = artifact::create(&reviews)?;
    for r in &data.interactions {
        let line = serde_json::json!({
            "reviewerID": r.user_raw_id,
            "asin": r.item_raw_id,
            "overall": r.rating,
            "unixReviewTime": r.timestamp,
        });
        writeln!(out, "{line}").map_err(|e| Error::io(&reviews, e))?;
    }
    out.flush().map_err(|e| Error::io(&reviews, e))?;
    let mut out = artifact::create(&meta)?;
    for m in &data.metadata {
        let mut obj = serde_json::Map::new();
        obj.insert("asin".into(), m.item_raw_id.clone().into());
        if let Some(t) = &m.title {
            obj.insert("title".into(), t.clone().into());
        }
        if let Some(b) = &m.brand {
            obj.insert("brand".into(), b.clone().into());
        }
        obj.insert("categories".into(), serde_json::json!([m.categories]));
        if let Some(p) = m.price {
            obj.insert("price".into(), p.into());
        }
        if let Some(d) = &m.description {
            obj.insert("description".into(), d.clone().into());
        }
        writeln!(out, "{}", serde_json::Value::Object(obj)).map_err(|e| Error::io(&meta, e))?;
    }
    out.flush().map_err(|e| Error::io(&meta, e))?;
    Ok((reviews, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn chain_fixture_follows_successors() {
        let d = generate(&SynthConfig::planted_chain(3)).unwrap();
        let mut by_user: std::collections::HashMap<&str, Vec<&RawInteraction>> = Default::default();
        for r in &d.interactions {
            by_user.entry(&r.user_raw_id).or_default().push(r);
        }
        let mut succ: std::collections::HashMap<&str, &str> = Default::default();
        for rows in by_user.values_mut() {
            rows.sort_by_key(|r| r.timestamp);
            for w in rows.windows(2) {
                let prev = succ.insert(&w[0].item_raw_id, &w[1].item_raw_id);
                assert!(prev.is_none() || prev == Some(w[1].item_raw_id.as_str()));
            }
        }
    }

    #[test]
    fn no_repeat_purchases_and_deterministic() {
        let cfg = SynthConfig::standard(11);
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        let pairs: HashSet<(&str, &str)> = a
            .interactions
            .iter()
            .map(|r| (r.user_raw_id.as_str(), r.item_raw_id.as_str()))
            .collect();
        assert_eq!(pairs.len(), a.interactions.len());
    }

    #[test]
    fn raw_ids_are_distinct() {
        let ids: HashSet<String> = (0..5000).map(item_raw_id).collect();
        assert_eq!(ids.len(), 5000);
    }
}
