#![allow(dead_code)]

pub mod oracle;

use recprompt::config::RunConfig;
use recprompt::ingest::{Interaction, ItemMetadata, Parsed};
use recprompt::pipeline::{self, Snapshot};
use recprompt::sample_gen::{Catalog, GenConfig, Generator};
use recprompt::split::{DatasetSplit, IdMap, UserSplit};
use recprompt::synth::{self, SynthConfig};

/// Display ID, title and rating of the beauty-shop user, oldest first. The
/// last row is a negative the user never bought.
pub const BEAUTY_ITEMS: [(&str, &str, f64); 11] = [
    ("I9762", "Winstonia's 8 Wheels Combo Set Nail Art Polymer Slices Fimo Decal Pieces Accessories - Butterflies, Bows, Animals, Fruit, Flowers, Dragonflies, Cupcakes, Hearts", 5.0),
    ("I8123", "MASH Rhinestones 2400 Piece 12 Color Nail Art Nailart Manicure Wheels", 5.0),
    ("I158", "Aveeno Clear Complexion Daily Moisturizer, 4 Ounce", 4.0),
    ("I5324", "Bdellium Tools Professional Antibacterial Makeup Brush Studio Line - Precision Kabuki Airbrushed Effect 957", 5.0),
    ("I7522", "Bdellium Tools Professional Makeup Brush Green Bambu Series Smoky Eyes 5pc. Brush Set", 5.0),
    ("I7647", "real Techniques Stippling Brush", 2.0),
    ("I7811", "Maybelline New York Color Sensational High Shine Lipcolor, Coral Lustre 840, 0.12 Ounce", 4.0),
    ("I9440", "Bed Head BH313 Orange Crush 1-inch Styler", 3.0),
    ("I5046", "Herstyler Baby Curl Curling Iron, Purple", 1.0),
    ("I3977", "L'Oreal Paris HiP Studio Secrets Professional Color Truth Cream Eyeliner, Brown, 0.159 Ounce", 2.0),
    ("I4168", "Sulfur Soap with Lanolin", 0.0),
];

pub struct Beauty {
    pub split: DatasetSplit,
    pub id_map: IdMap,
    pub catalog: Catalog,
}

/// One user who bought items 0..10 in order (valid = item 8, test = item 9),
/// plus a second user who owns item 10 so it has nonzero popularity.
pub fn beauty() -> Beauty {
    let tsv: String = BEAUTY_ITEMS
        .iter()
        .enumerate()
        .map(|(i, (id, _, _))| format!("raw{i}\t{id}\n"))
        .collect();
    let (id_map, _) = IdMap::read_tsv(tsv.as_bytes(), 0).unwrap();
    let catalog = Catalog {
        items: BEAUTY_ITEMS
            .iter()
            .enumerate()
            .map(|(i, (_, title, _))| {
                Some(ItemMetadata {
                    item_raw_id: format!("raw{i}"),
                    title: Some(title.to_string()),
                    ..ItemMetadata::default()
                })
            })
            .collect(),
    };
    let inter = |i: usize| Interaction {
        item: i,
        rating: BEAUTY_ITEMS[i].2,
        timestamp: 1_000 + i as i64,
    };
    let main = UserSplit {
        user: 0,
        train: (0..8).map(inter).collect(),
        valid: inter(8),
        test: inter(9),
    };
    let other = UserSplit {
        user: 1,
        train: vec![inter(10), inter(0), inter(1)],
        valid: inter(2),
        test: inter(3),
    };
    Beauty {
        split: DatasetSplit {
            n_items: BEAUTY_ITEMS.len(),
            users: vec![main, other],
            valid_users: [0, 1].into(),
        },
        id_map,
        catalog,
    }
}

/// A synthetic fixture carried through ingest and split in memory.
pub struct Fixture {
    pub config: RunConfig,
    pub snapshot: Snapshot,
    pub split: DatasetSplit,
    pub id_map: IdMap,
}

impl Fixture {
    pub fn new(synth_cfg: &SynthConfig, config: RunConfig) -> Self {
        let data = synth::generate(synth_cfg).unwrap();
        let snapshot = pipeline::build_snapshot(
            &config.dataset,
            Parsed {
                records: data.interactions,
                skipped: 0,
            },
            Some(Parsed {
                records: data.metadata,
                skipped: 0,
            }),
            config.k_core,
        )
        .unwrap();
        let (split, id_map) = pipeline::split_snapshot(&config, &snapshot).unwrap();
        Self {
            config,
            snapshot,
            split,
            id_map,
        }
    }

    pub fn standard() -> Self {
        Self::new(&SynthConfig::standard(1), RunConfig::default())
    }

    pub fn generator(&self) -> Generator<'_> {
        self.generator_with(self.config.gen_config().unwrap())
    }

    pub fn generator_with(&self, cfg: GenConfig) -> Generator<'_> {
        Generator::new(
            &self.config.dataset,
            &self.split,
            &self.id_map,
            &self.snapshot.catalog,
            cfg,
        )
        .unwrap()
    }
}
