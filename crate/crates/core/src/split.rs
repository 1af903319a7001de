//! Display-ID mapping and leave-one-out partitioning.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Interaction, UserSequence};
use crate::seed;

/// Number of users the validation split is restricted to.
pub const VALIDATION_USERS: usize = 3000;

/// Bijection between dense item indices and short display IDs ("I123").
///
/// The numbers are a seeded random permutation of `0..n`, so neighbouring
/// display IDs carry no information about the items behind them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    forward: Vec<String>,
    inverse: HashMap<String, usize>,
    seed: u64,
}

impl IdMap {
    pub fn new(n_items: usize, seed: u64) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::Config("id map needs at least one item".into()));
        }
        let mut perm: Vec<usize> = (0..n_items).collect();
        perm.shuffle(&mut seed::rng(seed, "id-map", &[n_items as u64]));
        Ok(Self::from_display(perm.into_iter().map(|n| format!("I{n}")).collect(), seed))
    }

    fn from_display(forward: Vec<String>, seed: u64) -> Self {
        let inverse = forward.iter().enumerate().map(|(j, d)| (d.clone(), j)).collect();
        Self {
            forward,
            inverse,
            seed,
        }
    }

    pub fn display(&self, item: usize) -> &str {
        &self.forward[item]
    }

    pub fn item(&self, display: &str) -> Option<usize> {
        self.inverse.get(display).copied()
    }

    pub fn contains(&self, display: &str) -> bool {
        self.inverse.contains_key(display)
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Write the two-column `raw_id<TAB>display_id` table, one row per item in
    /// index order, after a `#`-prefixed header line.
    pub fn write_tsv<W: Write>(&self, mut out: W, header: &str, raw_ids: &[String]) -> std::io::Result<()> {
        writeln!(out, "# {header}")?;
        for (raw, display) in raw_ids.iter().zip(&self.forward) {
            writeln!(out, "{raw}\t{display}")?;
        }
        Ok(())
    }

    /// Read a table written by [`IdMap::write_tsv`]; returns the map and the
    /// raw IDs in index order.
    pub fn read_tsv<R: BufRead>(input: R, seed: u64) -> Result<(Self, Vec<String>)> {
        let mut raw = Vec::new();
        let mut forward = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let (r, d) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("bad id-map row {line:?}")))?;
            raw.push(r.to_string());
            forward.push(d.to_string());
        }
        Ok((Self::from_display(forward, seed), raw))
    }
}

/// One user's leave-one-out partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSplit {
    pub user: usize,
    pub train: Vec<Interaction>,
    pub valid: Interaction,
    pub test: Interaction,
}

impl UserSplit {
    /// train, valid and test in chronological order.
    pub fn full(&self) -> impl Iterator<Item = &Interaction> {
        self.train.iter().chain([&self.valid, &self.test])
    }

    pub fn owns(&self, item: usize) -> bool {
        self.full().any(|i| i.item == item)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub n_items: usize,
    pub users: Vec<UserSplit>,
    /// Sorted user indices that get a validation sample.
    pub valid_users: BTreeSet<usize>,
}

impl DatasetSplit {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn train_interactions(&self) -> usize {
        self.users.iter().map(|u| u.train.len()).sum()
    }
}

/// Last item to test, second-to-last to validation, the rest to train.
pub fn apply_leave_one_out(sequences: &[UserSequence], n_items: usize) -> Result<Vec<UserSplit>> {
    sequences
        .iter()
        .map(|s| {
            let n = s.items.len();
            if n < 3 {
                return Err(Error::SequenceTooShort { user: s.user, len: n });
            }
            Ok(UserSplit {
                user: s.user,
                train: s.items[..n - 2].to_vec(),
                valid: s.items[n - 2],
                test: s.items[n - 1],
            })
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|users| {
            if users.iter().flat_map(|u| u.full()).any(|i| i.item >= n_items) {
                Err(Error::Config("item index out of range".into()))
            } else {
                Ok(users)
            }
        })
}

/// Uniform sample of `min(3000, n_users)` users, fixed per seed.
pub fn select_validation_users(n_users: usize, seed: u64) -> BTreeSet<usize> {
    let m = VALIDATION_USERS.min(n_users);
    let mut rng = seed::rng(seed, "valid-users", &[n_users as u64]);
    index::sample(&mut rng, n_users, m).into_iter().collect()
}

pub fn build_split(sequences: &[UserSequence], n_items: usize, seed: u64) -> Result<DatasetSplit> {
    let users = apply_leave_one_out(sequences, n_items)?;
    let valid_users = select_validation_users(users.len(), seed);
    Ok(DatasetSplit {
        n_items,
        users,
        valid_users,
    })
}
