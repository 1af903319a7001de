//! Review-log ingestion: parsing, deduplication, k-core filtering and
//! per-user sequence construction.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Ratings strictly above this value count as "like".
pub const LIKE_THRESHOLD: f64 = 3.0;

/// Fraction of malformed records tolerated before parsing aborts.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

/// One review event as it appears in the source log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub user_raw_id: String,
    pub item_raw_id: String,
    pub rating: f64,
    pub timestamp: i64,
}

impl RawInteraction {
    pub fn new(user: &str, item: &str, rating: f64, timestamp: i64) -> Self {
        Self {
            user_raw_id: user.to_string(),
            item_raw_id: item.to_string(),
            rating,
            timestamp,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.user_raw_id.is_empty() || self.item_raw_id.is_empty() {
            return Err("empty user or item id".into());
        }
        if !(1.0..=5.0).contains(&self.rating) {
            return Err(format!("rating {} outside [1,5]", self.rating));
        }
        if self.timestamp < 0 {
            return Err(format!("negative timestamp {}", self.timestamp));
        }
        Ok(())
    }
}

/// Catalog record for one item. `title == None` flags a missing title.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemMetadata {
    pub item_raw_id: String,
    pub title: Option<String>,
    pub brand: Option<String>,
    pub categories: Vec<String>,
    pub price: Option<f64>,
    pub description: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    AmazonReviewJsonl,
    Csv,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amazon-review-jsonl" | "jsonl" | "json" => Ok(InputFormat::AmazonReviewJsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::Config(format!("unknown input format {other:?}"))),
        }
    }
}

/// Result of a tolerant parse: the well-formed records in input order plus
/// the number of records that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

fn finish<T>(results: Vec<std::result::Result<T, String>>) -> Result<Parsed<T>> {
    let total = results.len();
    let mut records = Vec::with_capacity(total);
    let mut skipped = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => records.push(v),
            Err(e) => {
                skipped += 1;
                if first.is_none() {
                    first = Some(e);
                }
            }
        }
    }
    if total > 0 && skipped as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        return Err(Error::TooManyMalformed {
            malformed: skipped,
            total,
            first: first.unwrap_or_default(),
        });
    }
    if skipped > 0 {
        log::warn!(
            "skipped {skipped} malformed record(s) of {total}; first: {}",
            first.unwrap_or_default()
        );
    }
    Ok(Parsed { records, skipped })
}

fn read_lines<R: Read>(stream: R) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    Ok(lines)
}

fn json_str(v: &Value, key: &str) -> std::result::Result<String, String> {
    match v.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(format!("missing field {key}")),
    }
}

fn json_f64(v: &Value, key: &str) -> std::result::Result<f64, String> {
    match v.get(key) {
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| format!("bad number in {key}")),
        Some(Value::String(s)) => s.trim().parse().map_err(|_| format!("bad number in {key}")),
        _ => Err(format!("missing field {key}")),
    }
}

fn json_i64(v: &Value, key: &str) -> std::result::Result<i64, String> {
    match v.get(key) {
        Some(Value::Number(n)) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
            .ok_or_else(|| format!("bad integer in {key}")),
        Some(Value::String(s)) => s.trim().parse().map_err(|_| format!("bad integer in {key}")),
        _ => Err(format!("missing field {key}")),
    }
}

fn review_from_json(line: &str) -> std::result::Result<RawInteraction, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let r = RawInteraction {
        user_raw_id: json_str(&v, "reviewerID")?,
        item_raw_id: json_str(&v, "asin")?,
        rating: json_f64(&v, "overall")?,
        timestamp: json_i64(&v, "unixReviewTime")?,
    };
    r.validate()?;
    Ok(r)
}

fn csv_column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Config(format!("CSV header lacks column {name:?}")))
}

fn csv_records<R: Read>(stream: R) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(stream);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Stream(std::io::Error::other(e)))?
        .clone();
    let mut rows = Vec::new();
    for row in rdr.records() {
        match row {
            Ok(r) => rows.push(r),
            Err(e) if e.is_io_error() => return Err(Error::Stream(std::io::Error::other(e))),
            // a row the CSV reader cannot decode is kept as an empty record
            // and counted as malformed below
            Err(_) => rows.push(csv::StringRecord::new()),
        }
    }
    Ok((headers, rows))
}

/// Parse review records. Malformed records are skipped and counted; more
/// than 10% malformed is fatal.
pub fn parse_interactions<R: Read>(stream: R, format: InputFormat) -> Result<Parsed<RawInteraction>> {
    match format {
        InputFormat::AmazonReviewJsonl => {
            let lines = read_lines(stream)?;
            let results: Vec<_> = lines.par_iter().map(|l| review_from_json(l)).collect();
            finish(results)
        }
        InputFormat::Csv => {
            let (headers, rows) = match csv_records(stream) {
                Ok(v) => v,
                // no header at all: an empty stream
                Err(Error::Config(_)) => return Ok(Parsed { records: vec![], skipped: 0 }),
                Err(e) => return Err(e),
            };
            if headers.is_empty() {
                return Ok(Parsed { records: vec![], skipped: 0 });
            }
            let cu = csv_column(&headers, "reviewerID")?;
            let ci = csv_column(&headers, "asin")?;
            let cr = csv_column(&headers, "overall")?;
            let ct = csv_column(&headers, "unixReviewTime")?;
            let results = rows
                .iter()
                .map(|row| {
                    let field = |c: usize| {
                        row.get(c)
                            .filter(|s| !s.trim().is_empty())
                            .ok_or_else(|| format!("missing column {c}"))
                    };
                    let r = RawInteraction {
                        user_raw_id: field(cu)?.to_string(),
                        item_raw_id: field(ci)?.to_string(),
                        rating: field(cr)?.trim().parse().map_err(|_| "bad rating".to_string())?,
                        timestamp: field(ct)?
                            .trim()
                            .parse()
                            .map_err(|_| "bad timestamp".to_string())?,
                    };
                    r.validate()?;
                    Ok(r)
                })
                .collect();
            finish(results)
        }
    }
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let joined: Vec<String> = parts.iter().filter_map(text_of).collect();
            if joined.is_empty() {
                None
            } else {
                Some(joined.join(" "))
            }
        }
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_price(s: &str) -> Option<f64> {
    let cleaned: String = s.chars().filter(|c| c.is_ascii_digit() || *c == '.').collect();
    cleaned.parse().ok()
}

fn flatten_categories(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) if !s.is_empty() => {
            if !out.contains(s) {
                out.push(s.clone());
            }
        }
        Value::Array(items) => items.iter().for_each(|i| flatten_categories(i, out)),
        _ => {}
    }
}

fn nonempty(s: Option<String>) -> Option<String> {
    s.filter(|t| !t.trim().is_empty())
}

fn metadata_from_json(line: &str) -> std::result::Result<ItemMetadata, String> {
    let v: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let item_raw_id = json_str(&v, "asin")?;
    if item_raw_id.is_empty() {
        return Err("empty asin".into());
    }
    let mut categories = Vec::new();
    for key in ["categories", "category"] {
        if let Some(c) = v.get(key) {
            flatten_categories(c, &mut categories);
        }
    }
    let price = match v.get("price") {
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => parse_price(s),
        _ => None,
    };
    Ok(ItemMetadata {
        item_raw_id,
        title: nonempty(v.get("title").and_then(text_of)),
        brand: nonempty(v.get("brand").and_then(text_of)),
        categories,
        price,
        description: nonempty(v.get("description").and_then(text_of)),
    })
}

/// Parse catalog records. CSV metadata separates categories with `|`.
pub fn parse_metadata<R: Read>(stream: R, format: InputFormat) -> Result<Parsed<ItemMetadata>> {
    match format {
        InputFormat::AmazonReviewJsonl => {
            let lines = read_lines(stream)?;
            let results: Vec<_> = lines.par_iter().map(|l| metadata_from_json(l)).collect();
            finish(results)
        }
        InputFormat::Csv => {
            let (headers, rows) = csv_records(stream)?;
            if headers.is_empty() {
                return Ok(Parsed { records: vec![], skipped: 0 });
            }
            let ci = csv_column(&headers, "asin")?;
            let col = |name: &str| headers.iter().position(|h| h.trim() == name);
            let (ct, cb, cc, cp, cd) = (
                col("title"),
                col("brand"),
                col("categories"),
                col("price"),
                col("description"),
            );
            let results = rows
                .iter()
                .map(|row| {
                    let get = |c: Option<usize>| {
                        c.and_then(|c| row.get(c))
                            .map(str::to_string)
                            .filter(|s| !s.trim().is_empty())
                    };
                    let item_raw_id = get(Some(ci)).ok_or("missing asin")?;
                    Ok(ItemMetadata {
                        item_raw_id,
                        title: get(ct),
                        brand: get(cb),
                        categories: get(cc)
                            .map(|s| s.split('|').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
                            .unwrap_or_default(),
                        price: get(cp).and_then(|s| parse_price(&s)),
                        description: get(cd),
                    })
                })
                .collect();
            finish(results)
        }
    }
}

/// Keep one interaction per (user, item): the earliest timestamp wins, ties
/// go to the record seen first. Survivors keep their input order.
pub fn dedupe(interactions: Vec<RawInteraction>) -> Vec<RawInteraction> {
    let mut best: HashMap<(&str, &str), usize> = HashMap::with_capacity(interactions.len());
    for (i, r) in interactions.iter().enumerate() {
        best.entry((r.user_raw_id.as_str(), r.item_raw_id.as_str()))
            .and_modify(|j| {
                if r.timestamp < interactions[*j].timestamp {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = vec![false; interactions.len()];
    for &i in best.values() {
        keep[i] = true;
    }
    interactions
        .into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

/// Iteratively drop users and items with fewer than `k` interactions until
/// every survivor has at least `k`.
pub fn k_core_filter(mut interactions: Vec<RawInteraction>, k: usize) -> Result<Vec<RawInteraction>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    loop {
        let mut user_deg: HashMap<&str, usize> = HashMap::new();
        let mut item_deg: HashMap<&str, usize> = HashMap::new();
        for r in &interactions {
            *user_deg.entry(&r.user_raw_id).or_default() += 1;
            *item_deg.entry(&r.item_raw_id).or_default() += 1;
        }
        let keep: Vec<bool> = interactions
            .iter()
            .map(|r| user_deg[r.user_raw_id.as_str()] >= k && item_deg[r.item_raw_id.as_str()] >= k)
            .collect();
        let before = interactions.len();
        let mut it = keep.into_iter();
        interactions.retain(|_| it.next().unwrap_or(false));
        if interactions.len() == before {
            break;
        }
    }
    if interactions.is_empty() {
        return Err(Error::EmptyCore { k });
    }
    Ok(interactions)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
}

impl Interaction {
    pub fn liked(&self) -> bool {
        self.rating > LIKE_THRESHOLD
    }
}

/// A user's chronologically ordered purchases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSequence {
    pub user: usize,
    pub items: Vec<Interaction>,
}

impl UserSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|i| i.item)
    }
}

/// Sequences plus the raw-ID tables behind the dense indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequences {
    pub user_raw_ids: Vec<String>,
    pub item_raw_ids: Vec<String>,
    pub sequences: Vec<UserSequence>,
}

impl Sequences {
    pub fn n_users(&self) -> usize {
        self.user_raw_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_raw_ids.len()
    }
}

/// Assign dense user/item indices in first-appearance order and sort each
/// user's items by (timestamp, raw item ID).
pub fn build_sequences(interactions: &[RawInteraction]) -> Sequences {
    let mut user_idx: HashMap<&str, usize> = HashMap::new();
    let mut item_idx: HashMap<&str, usize> = HashMap::new();
    let mut user_raw_ids = Vec::new();
    let mut item_raw_ids = Vec::new();
    let mut per_user: Vec<Vec<&RawInteraction>> = Vec::new();

    for r in interactions {
        let u = *user_idx.entry(&r.user_raw_id).or_insert_with(|| {
            user_raw_ids.push(r.user_raw_id.clone());
            per_user.push(Vec::new());
            user_raw_ids.len() - 1
        });
        item_idx.entry(&r.item_raw_id).or_insert_with(|| {
            item_raw_ids.push(r.item_raw_id.clone());
            item_raw_ids.len() - 1
        });
        per_user[u].push(r);
    }

    let sequences = per_user
        .into_iter()
        .enumerate()
        .map(|(u, mut rows)| {
            rows.sort_by(|a, b| {
                a.timestamp
                    .cmp(&b.timestamp)
                    .then_with(|| a.item_raw_id.cmp(&b.item_raw_id))
            });
            UserSequence {
                user: u,
                items: rows
                    .into_iter()
                    .map(|r| Interaction {
                        item: item_idx[r.item_raw_id.as_str()],
                        rating: r.rating,
                        timestamp: r.timestamp,
                    })
                    .collect(),
            }
        })
        .collect();

    Sequences {
        user_raw_ids,
        item_raw_ids,
        sequences,
    }
}

/// Dataset size summary in the usual "users / items / interactions /
/// sparsity" layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_interactions: usize,
    /// Percentage of empty cells in the user-item matrix.
    pub sparsity: f64,
}

pub fn compute_stats(sequences: &[UserSequence]) -> Result<CorpusStats> {
    if sequences.is_empty() {
        return Err(Error::Config("cannot compute statistics of an empty dataset".into()));
    }
    let mut items = std::collections::HashSet::new();
    let mut n_interactions = 0;
    for s in sequences {
        n_interactions += s.len();
        items.extend(s.item_ids());
    }
    let n_users = sequences.len();
    let n_items = items.len();
    let density = n_interactions as f64 / (n_users as f64 * n_items as f64);
    Ok(CorpusStats {
        n_users,
        n_items,
        n_interactions,
        sparsity: 100.0 * (1.0 - density),
    })
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "users {} / items {} / interactions {} / sparsity {:.2}%",
            self.n_users, self.n_items, self.n_interactions, self.sparsity
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ri(u: &str, i: &str, r: f64, t: i64) -> RawInteraction {
        RawInteraction::new(u, i, r, t)
    }

    #[test]
    fn parses_amazon_review_line() {
        let line = r#"{"reviewerID": "A12", "asin": "0000031852", "overall": 5.0, "unixReviewTime": 1357000000, "reviewText": "ok"}"#;
        let p = parse_interactions(line.as_bytes(), InputFormat::AmazonReviewJsonl).unwrap();
        assert_eq!(p.records, vec![ri("A12", "0000031852", 5.0, 1357000000)]);
        assert_eq!(p.skipped, 0);
    }

    #[test]
    fn empty_stream_is_empty() {
        for fmt in [InputFormat::AmazonReviewJsonl, InputFormat::Csv] {
            let p = parse_interactions(&b""[..], fmt).unwrap();
            assert!(p.records.is_empty());
            assert_eq!(p.skipped, 0);
        }
    }

    #[test]
    fn missing_rating_is_skipped_but_too_many_is_fatal() {
        // one bad line out of ten passes the 10% gate
        let mut lines: Vec<String> = (0..9)
            .map(|i| format!(r#"{{"reviewerID":"u{i}","asin":"a","overall":4,"unixReviewTime":1}}"#))
            .collect();
        lines.push(r#"{"reviewerID":"u","asin":"a","unixReviewTime":1}"#.into());
        let p = parse_interactions(lines.join("\n").as_bytes(), InputFormat::AmazonReviewJsonl).unwrap();
        assert_eq!((p.records.len(), p.skipped), (9, 1));

        let text = "{\"reviewerID\":\"u\",\"asin\":\"a\",\"overall\":4,\"unixReviewTime\":1}\n\
                    {\"reviewerID\":\"u\",\"asin\":\"b\",\"unixReviewTime\":1}\n\
                    {\"reviewerID\":\"v\",\"asin\":\"a\",\"overall\":2,\"unixReviewTime\":3}";
        let err = parse_interactions(text.as_bytes(), InputFormat::AmazonReviewJsonl).unwrap_err();
        assert!(matches!(err, Error::TooManyMalformed { malformed: 1, total: 3, .. }));
    }

    #[test]
    fn csv_with_header() {
        let text = "asin,reviewerID,overall,unixReviewTime\nB1,U1,4.0,10\nB2,U1,,11\n";
        let err = parse_interactions(text.as_bytes(), InputFormat::Csv).unwrap_err();
        assert!(matches!(err, Error::TooManyMalformed { .. }));
        let text = "asin,reviewerID,overall,unixReviewTime\nB1,U1,4.0,10\nB2,U1,3,11\n";
        let p = parse_interactions(text.as_bytes(), InputFormat::Csv).unwrap();
        assert_eq!(p.records, vec![ri("U1", "B1", 4.0, 10), ri("U1", "B2", 3.0, 11)]);
    }

    #[test]
    fn metadata_variants() {
        let text = r#"{"asin":"X","title":"Ball","brand":"Nike","categories":[["Toys & Games","Balls"]],"price":"$12.50","description":"round"}
{"asin":"Y","category":["A","B"],"price":3}"#;
        let p = parse_metadata(text.as_bytes(), InputFormat::AmazonReviewJsonl).unwrap();
        assert_eq!(p.records[0].categories, vec!["Toys & Games", "Balls"]);
        assert_eq!(p.records[0].price, Some(12.5));
        assert_eq!(p.records[1].title, None);
        assert_eq!(p.records[1].price, Some(3.0));
    }

    #[test]
    fn dedupe_keeps_earliest_then_first() {
        let out = dedupe(vec![ri("u", "i", 5.0, 100), ri("u", "i", 3.0, 50)]);
        assert_eq!(out, vec![ri("u", "i", 3.0, 50)]);
        let out = dedupe(vec![ri("u", "i", 4.0, 100), ri("u", "i", 2.0, 100)]);
        assert_eq!(out, vec![ri("u", "i", 4.0, 100)]);
        let disjoint = vec![ri("u", "i", 4.0, 1), ri("u", "j", 2.0, 2), ri("v", "i", 1.0, 3)];
        assert_eq!(dedupe(disjoint.clone()), disjoint);
    }

    fn clique(users: usize, items: usize) -> Vec<RawInteraction> {
        let mut v = Vec::new();
        for u in 0..users {
            for i in 0..items {
                v.push(ri(&format!("u{u}"), &format!("i{i}"), 4.0, (u * items + i) as i64));
            }
        }
        v
    }

    #[test]
    fn complete_clique_survives() {
        let c = clique(5, 5);
        assert_eq!(k_core_filter(c.clone(), 5).unwrap(), c);
    }

    #[test]
    fn light_user_removed() {
        let mut c = clique(6, 6);
        for i in 0..4 {
            c.push(ri("light", &format!("i{i}"), 4.0, 1000 + i));
        }
        let out = k_core_filter(c.clone(), 5).unwrap();
        assert_eq!(out, clique(6, 6));
    }

    #[test]
    fn too_sparse_is_fatal() {
        let c = clique(3, 3);
        assert!(matches!(k_core_filter(c, 5), Err(Error::EmptyCore { k: 5 })));
    }

    #[test]
    fn sequences_sorted_with_lexicographic_ties() {
        let rows = vec![
            ri("u", "c", 4.0, 30),
            ri("u", "a", 4.0, 10),
            ri("u", "b", 4.0, 20),
            ri("v", "B01", 4.0, 5),
            ri("v", "A99", 4.0, 5),
        ];
        let s = build_sequences(&rows);
        let order = |u: usize| -> Vec<&str> {
            s.sequences[u].items.iter().map(|i| s.item_raw_ids[i.item].as_str()).collect()
        };
        assert_eq!(order(0), vec!["a", "b", "c"]);
        assert_eq!(order(1), vec!["A99", "B01"]);
        assert_eq!(s.item_raw_ids, vec!["c", "a", "b", "B01", "A99"]);
    }

    #[test]
    fn stats_of_full_matrix() {
        let s = build_sequences(&clique(2, 2));
        let st = compute_stats(&s.sequences).unwrap();
        assert_eq!((st.n_users, st.n_items, st.n_interactions), (2, 2, 4));
        assert_eq!(st.sparsity, 0.0);
    }

    fn arb_interactions() -> impl Strategy<Value = Vec<RawInteraction>> {
        prop::collection::vec((0u8..12, 0u8..12, 1u8..=5, 0i64..40), 0..200).prop_map(|rows| {
            rows.into_iter()
                .map(|(u, i, r, t)| ri(&format!("u{u}"), &format!("i{i}"), r as f64, t))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn dedupe_is_idempotent(rows in arb_interactions()) {
            let once = dedupe(rows);
            prop_assert_eq!(dedupe(once.clone()), once);
        }

        #[test]
        fn k_core_is_a_fixpoint(rows in arb_interactions(), k in 1usize..5) {
            if let Ok(out) = k_core_filter(dedupe(rows), k) {
                let mut ud: HashMap<&str, usize> = HashMap::new();
                let mut id: HashMap<&str, usize> = HashMap::new();
                for r in &out {
                    *ud.entry(&r.user_raw_id).or_default() += 1;
                    *id.entry(&r.item_raw_id).or_default() += 1;
                }
                prop_assert!(ud.values().all(|&d| d >= k));
                prop_assert!(id.values().all(|&d| d >= k));
                prop_assert_eq!(k_core_filter(out.clone(), k).unwrap(), out);
            }
        }

        #[test]
        fn sequence_order_is_strict(rows in arb_interactions()) {
            let s = build_sequences(&dedupe(rows));
            for seq in &s.sequences {
                for w in seq.items.windows(2) {
                    let a = (w[0].timestamp, &s.item_raw_ids[w[0].item]);
                    let b = (w[1].timestamp, &s.item_raw_ids[w[1].item]);
                    prop_assert!(a < b);
                }
            }
        }

        #[test]
        fn sparsity_matches_density_count(rows in arb_interactions()) {
            let s = build_sequences(&dedupe(rows));
            if s.sequences.is_empty() { return Ok(()); }
            let st = compute_stats(&s.sequences).unwrap();
            // brute force: mark every cell of the user-item grid
            let mut grid = vec![vec![false; s.n_items()]; s.n_users()];
            for seq in &s.sequences {
                for it in &seq.items { grid[seq.user][it.item] = true; }
            }
            let filled = grid.iter().flatten().filter(|c| **c).count() as f64;
            let expected = 100.0 * (1.0 - filled / (s.n_users() * s.n_items()) as f64);
            prop_assert!((st.sparsity - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }
}
