//! Slow reference implementations used to cross-check the library.

use std::collections::HashMap;

/// Graded DCG over the first `k` distinct predictions with relevance 1 for
/// the truth, divided by the DCG of the ideal ordering.
pub fn ndcg_scan(ranked: Option<&Vec<String>>, truth: &str, k: usize) -> f64 {
    let Some(ranked) = ranked else { return 0.0 };
    let mut distinct: Vec<&String> = Vec::new();
    for r in ranked {
        if !distinct.contains(&r) {
            distinct.push(r);
        }
    }
    let mut dcg = 0.0;
    for (i, r) in distinct.iter().take(k).enumerate() {
        let rel = if r.as_str() == truth { 1.0 } else { 0.0 };
        dcg += (2f64.powf(rel) - 1.0) / ((i + 2) as f64).log2();
    }
    let idcg = 1.0 / 2f64.log2();
    dcg / idcg
}

pub fn hit_scan(ranked: Option<&Vec<String>>, truth: &str, k: usize) -> f64 {
    let Some(ranked) = ranked else { return 0.0 };
    let mut distinct: Vec<&String> = Vec::new();
    for r in ranked {
        if !distinct.contains(&r) {
            distinct.push(r);
        }
    }
    if distinct.iter().take(k).any(|r| r.as_str() == truth) {
        1.0
    } else {
        0.0
    }
}

pub fn mean_scan(
    preds: &HashMap<String, Vec<String>>,
    truths: &[(String, String)],
    k: usize,
    f: fn(Option<&Vec<String>>, &str, usize) -> f64,
) -> f64 {
    let total: f64 = truths.iter().map(|(id, t)| f(preds.get(id), t, k)).sum();
    total / truths.len() as f64
}

/// Probability that a positive outscores a negative, ties counting half,
/// over all pairs.
pub fn auc_pairs(scores: &[(f64, bool)]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for &(sp, lp) in scores {
        if !lp {
            continue;
        }
        for &(sn, ln) in scores {
            if ln {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// The k-core by exhaustion: the union of every (user set, item set) whose
/// induced subgraph has all degrees at least `k`. Edges are (user, item).
pub fn k_core_exhaustive(edges: &[(usize, usize)], n_users: usize, n_items: usize, k: usize) -> Vec<(usize, usize)> {
    let mut best_users = 0u32;
    let mut best_items = 0u32;
    for us in 0u32..(1 << n_users) {
        for is in 0u32..(1 << n_items) {
            let inside: Vec<&(usize, usize)> = edges
                .iter()
                .filter(|(u, i)| us >> u & 1 == 1 && is >> i & 1 == 1)
                .collect();
            let ok_users = (0..n_users)
                .filter(|u| us >> u & 1 == 1)
                .all(|u| inside.iter().filter(|e| e.0 == u).count() >= k);
            let ok_items = (0..n_items)
                .filter(|i| is >> i & 1 == 1)
                .all(|i| inside.iter().filter(|e| e.1 == i).count() >= k);
            if ok_users && ok_items {
                best_users |= us;
                best_items |= is;
            }
        }
    }
    edges
        .iter()
        .copied()
        .filter(|(u, i)| best_users >> u & 1 == 1 && best_items >> i & 1 == 1)
        .collect()
}
