//! Renderings of one beauty-shop history compared byte for byte with
//! reference samples.

mod common;

use common::{beauty, BEAUTY_ITEMS};
use recprompt::prompt::{self, ItemText};
use recprompt::sample_gen::{GenConfig, Generator, SplitKind, Task};
use recprompt::seed;

const RETRIEVAL_IN: &str = include_str!("golden/retrieval.input.txt");
const RETRIEVAL_OUT: &str = include_str!("golden/retrieval.output.txt");
const RANKING_IN: &str = include_str!("golden/ranking.input.txt");
const RANKING_OUT: &str = include_str!("golden/ranking.output.txt");
const RATING_IN: &str = include_str!("golden/rating.input.txt");
const RATING_OUT: &str = include_str!("golden/rating.output.txt");
const MIM_IN: &str = include_str!("golden/mim.input.txt");
const MIM_OUT: &str = include_str!("golden/mim.output.txt");
const MLM_IN: &str = include_str!("golden/mlm.input.txt");
const BPR_IN: &str = include_str!("golden/bpr.input.txt");
const BPR_OUT: &str = include_str!("golden/bpr.output.txt");

fn gen_config(window_size: usize) -> GenConfig {
    GenConfig {
        window_size,
        pool_size: 2,
        tasks: [Task::Retrieval, Task::Rating].into(),
        ..GenConfig::default()
    }
}

fn texts(range: std::ops::Range<usize>) -> Vec<ItemText<'static>> {
    BEAUTY_ITEMS[range]
        .iter()
        .map(|(id, title, _)| ItemText::new(id, title))
        .collect()
}

#[test]
fn retrieval_sample_matches() {
    let b = beauty();
    let gen = Generator::new("beauty", &b.split, &b.id_map, &b.catalog, gen_config(20)).unwrap();
    let w = gen.windows(0, SplitKind::Test).remove(0);
    let s = gen.gen_retrieval(&w);
    assert_eq!(s.input, RETRIEVAL_IN);
    assert_eq!(s.output, RETRIEVAL_OUT);
}

#[test]
fn rating_sample_matches_on_six_item_window() {
    let b = beauty();
    let gen = Generator::new("beauty", &b.split, &b.id_map, &b.catalog, gen_config(6)).unwrap();
    let w = gen.windows(0, SplitKind::Test).remove(0);
    assert_eq!(w.history().len(), 5);
    let s = gen.gen_rating(&w);
    assert_eq!(s.input, RATING_IN);
    assert_eq!(s.output, RATING_OUT);
}

#[test]
fn ranking_template_matches() {
    // the reference candidate list repeats two IDs, which the generator
    // rejects, so only the template is compared
    let ids: Vec<&str> = RANKING_IN
        .rsplit_once("Candidate items are: ")
        .unwrap()
        .1
        .trim_end_matches('.')
        .split(", ")
        .collect();
    assert_eq!(ids.len(), 100);
    assert!(ids.contains(&RANKING_OUT));
    assert_eq!(prompt::ranking(&texts(0..9), &ids), RANKING_IN);
}

#[test]
fn mim_template_matches() {
    let t = texts(0..10);
    let slots: Vec<Option<ItemText<'_>>> = t
        .iter()
        .enumerate()
        .map(|(p, x)| (p != 1 && p != 5).then_some(*x))
        .collect();
    assert_eq!(prompt::mim(&slots), MIM_IN);
    assert_eq!(prompt::item_list(&[t[1], t[5]]), MIM_OUT);
}

#[test]
fn generated_mim_agrees_with_template() {
    let b = beauty();
    let gen = Generator::new("beauty", &b.split, &b.id_map, &b.catalog, gen_config(20)).unwrap();
    let w = gen.windows(0, SplitKind::Test).remove(0);
    let s = gen.gen_mim(&w, 0, &mut seed::rng(3, "golden", &[]));
    let masked = s.meta.candidates.unwrap();
    assert_eq!(masked.len(), 2);
    let t = texts(0..10);
    let slots: Vec<Option<ItemText<'_>>> = t
        .iter()
        .map(|x| (!masked.iter().any(|m| m == x.id)).then_some(*x))
        .collect();
    assert_eq!(s.input, prompt::mim(&slots));
}

#[test]
fn mlm_span_matches() {
    assert_eq!(prompt::item_list(&texts(6..8)), MLM_IN);
}

#[test]
fn bpr_sample_matches_when_negative_drawn_first() {
    let b = beauty();
    let gen = Generator::new("beauty", &b.split, &b.id_map, &b.catalog, gen_config(20)).unwrap();
    let w = gen.windows(0, SplitKind::Test).remove(0);
    let s = (0..64)
        .map(|k| gen.gen_bpr(&w, 10, 0, &mut seed::rng(k, "golden", &[])).unwrap())
        .find(|s| s.meta.candidates.as_ref().unwrap()[0] == "I4168")
        .expect("a fair coin lands negative-first within 64 tries");
    assert_eq!(s.input, BPR_IN);
    assert_eq!(s.output, BPR_OUT);
}
