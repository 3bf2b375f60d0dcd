//! Synthetic dataset shared by the CLI tests: six target words in two
//! periods, two well separated senses in four dimensions.
//!
//! `alpha`, `beta`, `gamma` use sense A in C1 and sense B in C2; `delta`,
//! `epsilon`, `zeta` mix both senses half and half in each period. Words of
//! one group are copies of each other scaled by powers of two, so every
//! scale-invariant measure gives them bit-identical scores.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use lsc_core::annotator::{scale_map, ScaleMap};
use lsc_core::dataio::{write_clusters, write_embeddings, write_gold, write_judgments, write_uses, GoldScore};
use lsc_core::geometry::cosine_similarity;
use lsc_core::{Clustering, EmbeddingSet, Judgment, UsageInstance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tempfile::TempDir;

pub const SENSE_A: [f64; 4] = [2.0, 1.0, -1.0, -1.5];
pub const SENSE_B: [f64; 4] = [-1.0, -1.5, 2.0, 1.0];
pub const CHANGED: [&str; 3] = ["alpha", "beta", "gamma"];
pub const STABLE: [&str; 3] = ["delta", "epsilon", "zeta"];
pub const PERIODS: [&str; 2] = ["C1", "C2"];
pub const PER_PERIOD: usize = 8;
pub const LAYERS: usize = 3;

pub struct Fixture {
    _dir: TempDir,
    pub root: PathBuf,
    pub emb_dir: PathBuf,
    pub layers_dir: PathBuf,
    pub uses: PathBuf,
    pub judgments: PathBuf,
    pub gold: PathBuf,
    pub gold_clusters: PathBuf,
}

impl Fixture {
    pub fn out(&self, name: &str) -> PathBuf {
        self.root.join("out").join(name)
    }
}

struct Word {
    lemma: &'static str,
    /// Per period: (usage id, sense index, vector).
    rows: Vec<Vec<(String, usize, Vec<f64>)>>,
}

fn jittered(center: &[f64; 4], noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    center.iter().map(|c| c + noise.sample(rng)).collect()
}

/// Sense sequence per period for the changed (all A, then all B) or stable (alternating) pattern.
fn senses(changed: bool, period: usize) -> Vec<usize> {
    (0..PER_PERIOD).map(|i| if changed { period } else { i % 2 }).collect()
}

fn words(seed: u64) -> Vec<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let centers = [SENSE_A, SENSE_B];
    let mut out = Vec::new();
    for (group, changed) in [(CHANGED, true), (STABLE, false)] {
        let base: Vec<Vec<Vec<f64>>> = (0..PERIODS.len())
            .map(|p| {
                senses(changed, p)
                    .into_iter()
                    .map(|s| jittered(&centers[s], &noise, &mut rng))
                    .collect()
            })
            .collect();
        for (k, lemma) in group.into_iter().enumerate() {
            let scale = f64::from(1u32 << k);
            let rows = (0..PERIODS.len())
                .map(|p| {
                    senses(changed, p)
                        .into_iter()
                        .zip(&base[p])
                        .enumerate()
                        .map(|(i, (s, v))| {
                            let id = format!("{lemma}-{}-{i}", PERIODS[p]);
                            (id, s, v.iter().map(|x| x * scale).collect())
                        })
                        .collect()
                })
                .collect();
            out.push(Word { lemma, rows });
        }
    }
    out
}

fn sets_for(words: &[Word], layer_noise: Option<(u64, f64)>) -> Vec<EmbeddingSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(layer_noise.map_or(0, |(s, _)| s));
    let noise = Normal::new(0.0, layer_noise.map_or(1.0, |(_, sd)| sd)).unwrap();
    let mut sets = Vec::new();
    for w in words {
        for (p, rows) in w.rows.iter().enumerate() {
            let ids = rows.iter().map(|(id, _, _)| id.clone()).collect();
            let vectors = rows
                .iter()
                .map(|(_, _, v)| match layer_noise {
                    Some(_) => v.iter().map(|x| x + noise.sample(&mut rng)).collect(),
                    None => v.clone(),
                })
                .collect();
            sets.push(EmbeddingSet::new(w.lemma, PERIODS[p], 4, "12", ids, vectors).unwrap());
        }
    }
    sets
}

pub fn build() -> Fixture {
    build_with_seed(7)
}

pub fn build_with_seed(seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let words = words(seed);

    let emb_dir = root.join("emb");
    write_embeddings(&emb_dir, &sets_for(&words, None), "synthetic").unwrap();
    let layers_dir = root.join("layers");
    for k in 1..=LAYERS {
        let sets = sets_for(&words, Some((seed * 100 + k as u64, 0.05)));
        write_embeddings(layers_dir.join(k.to_string()), &sets, "synthetic").unwrap();
    }

    let mut usages = Vec::new();
    let mut judgments = Vec::new();
    let mut items = Vec::new();
    let mut labels = Vec::new();
    for w in &words {
        let context = format!("the {} stood there", w.lemma);
        let flat: Vec<&(String, usize, Vec<f64>)> = w.rows.iter().flatten().collect();
        for (p, rows) in w.rows.iter().enumerate() {
            for (id, sense, _) in rows {
                usages.push(UsageInstance {
                    usage_id: id.clone(),
                    lemma: w.lemma.to_string(),
                    context: context.clone(),
                    target_span: (4, 4 + w.lemma.len()),
                    period_id: PERIODS[p].to_string(),
                });
                items.push(id.clone());
                labels.push(*sense);
            }
        }
        for (i, a) in flat.iter().enumerate() {
            for b in &flat[i + 1..] {
                let value = scale_map(cosine_similarity(&a.2, &b.2).unwrap(), ScaleMap::default());
                judgments.push(Judgment::new(a.0.clone(), b.0.clone(), "human", value));
            }
        }
    }
    let uses = root.join("uses.tsv");
    write_uses(&uses, &usages).unwrap();
    let judgments_path = root.join("judgments.tsv");
    write_judgments(&judgments_path, &judgments).unwrap();

    let gold: Vec<GoldScore> = CHANGED
        .iter()
        .map(|l| (l, 1.0))
        .chain(STABLE.iter().map(|l| (l, 0.0)))
        .map(|(l, g)| GoldScore {
            lemma: l.to_string(),
            graded: g,
            period_pair: None,
        })
        .collect();
    let gold_path = root.join("gold.tsv");
    write_gold(&gold_path, &gold).unwrap();
    let gold_clusters = root.join("senses.tsv");
    write_clusters(&gold_clusters, &Clustering::new(items, labels).unwrap()).unwrap();

    Fixture {
        _dir: dir,
        root,
        emb_dir,
        layers_dir,
        uses,
        judgments: judgments_path,
        gold: gold_path,
        gold_clusters,
    }
}

pub fn arg(path: &Path) -> String {
    path.display().to_string()
}
