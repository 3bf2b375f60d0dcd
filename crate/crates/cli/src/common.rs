use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use lsc_core::dataio::{load_embeddings, EmbeddingStore, GoldScore};
use lsc_core::geometry::aggregate_layers;
use lsc_core::metrics::{spearman, EvalResult, Metric};
use lsc_core::{ChangeScore, DistanceKind, EmbeddingSet, LayerSpec};
use rayon::prelude::*;
use serde_json::Value;

use crate::args::GcdMethod;
use crate::error::CliError;

pub fn path_value(path: &Path) -> Value {
    Value::String(path.display().to_string())
}

pub fn parse_layer(spec: &str) -> Result<LayerSpec, CliError> {
    Ok(spec.parse::<LayerSpec>()?)
}

/// Runs `f` over `items` on `jobs` threads (0 = all cores), keeping input order.
pub fn parallel_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Distance a form-based method will use, checking any user override.
pub fn resolve_distance(method: GcdMethod, requested: Option<DistanceKind>) -> Result<DistanceKind, CliError> {
    let fixed = match method {
        GcdMethod::Apd => return Ok(requested.unwrap_or(DistanceKind::Cosine)),
        GcdMethod::Widid => DistanceKind::Canberra,
        GcdMethod::Prt | GcdMethod::ApJsd => DistanceKind::Cosine,
    };
    match requested {
        Some(d) if d != fixed => Err(CliError::Config(format!(
            "method {} always uses {fixed} distance, got {d}",
            method.name()
        ))),
        _ => Ok(fixed),
    }
}

/// Picks the two periods to compare from those present in the data.
pub fn resolve_periods(
    requested: Option<&[String]>,
    available: &BTreeSet<String>,
    warnings: &mut Vec<String>,
) -> Result<(String, String), CliError> {
    if let Some(req) = requested {
        return match req {
            [a, b] if a != b => Ok((a.clone(), b.clone())),
            _ => Err(CliError::Config(format!(
                "--periods needs two distinct periods, got `{}`",
                req.join(",")
            ))),
        };
    }
    let mut it = available.iter();
    match (it.next(), it.next()) {
        (Some(a), Some(b)) => {
            if available.len() > 2 {
                warnings.push(format!(
                    "found periods {}; comparing {a} and {b}",
                    available.iter().cloned().collect::<Vec<_>>().join(", ")
                ));
            }
            Ok((a.clone(), b.clone()))
        }
        _ => Err(CliError::Data(format!("need two periods, found {}", available.len()))),
    }
}

pub fn periods_of(store: &EmbeddingStore) -> BTreeSet<String> {
    store.keys().map(|(_, p)| p.clone()).collect()
}

pub fn lemmas_of(store: &EmbeddingStore) -> Vec<String> {
    store
        .keys()
        .map(|(l, _)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn load_nonempty(dir: &Path) -> Result<EmbeddingStore, CliError> {
    let store = load_embeddings(dir)?;
    if store.is_empty() {
        return Err(CliError::Data(format!("{}: no embedding files found", dir.display())));
    }
    Ok(store)
}

/// Directories `<root>/1 .. <root>/L` of a per-layer embedding tree.
pub fn layer_dirs(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut found = BTreeSet::new();
    let entries = std::fs::read_dir(root).map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
        if entry.path().is_dir() {
            if let Some(k) = entry.file_name().to_str().and_then(|n| n.parse::<usize>().ok()) {
                found.insert(k);
            }
        }
    }
    let count = found.len();
    if count == 0 {
        return Err(CliError::Data(format!("{}: no per-layer directories", root.display())));
    }
    if found.iter().copied().ne(1..=count) {
        return Err(CliError::Data(format!(
            "{}: layer directories must be numbered 1..{count} without gaps",
            root.display()
        )));
    }
    Ok((1..=count).map(|k| root.join(k.to_string())).collect())
}

/// Loads the per-layer stores of every directory in `dirs`.
pub fn load_layer_stores(dirs: &[PathBuf]) -> Result<Vec<EmbeddingStore>, CliError> {
    dirs.iter().map(|d| load_nonempty(d)).collect()
}

/// Combines the sets of one target across layer stores.
pub fn combine_layers(
    stores: &[&EmbeddingStore],
    key: &(String, String),
    spec: &LayerSpec,
) -> lsc_core::Result<EmbeddingSet> {
    let stack = stores
        .iter()
        .map(|s| {
            s.get(key).cloned().ok_or_else(|| {
                lsc_core::Error::InconsistentLayers(format!("{} has no period {} in every layer", key.0, key.1))
            })
        })
        .collect::<lsc_core::Result<Vec<_>>>()?;
    let mut set = match spec {
        LayerSpec::Single(_) => stack.into_iter().next().expect("one layer"),
        LayerSpec::Aggregate(mode, _) => {
            let positions: Vec<usize> = (1..=stack.len()).collect();
            aggregate_layers(&stack, &positions, *mode)?
        }
    };
    set.layer_spec = spec.to_string();
    Ok(set)
}

/// Embeddings for the run: the directory itself, or the selected layers of a per-layer tree.
pub fn load_store(emb_dir: &Path, layer: Option<&LayerSpec>) -> Result<EmbeddingStore, CliError> {
    let Some(spec) = layer else {
        return load_nonempty(emb_dir);
    };
    let dirs: Vec<PathBuf> = spec.layers().iter().map(|k| emb_dir.join(k.to_string())).collect();
    let stores = load_layer_stores(&dirs)?;
    let refs: Vec<&EmbeddingStore> = stores.iter().collect();
    let mut out = EmbeddingStore::new();
    for key in stores[0].keys() {
        out.insert(key.clone(), combine_layers(&refs, key, spec)?);
    }
    Ok(out)
}

/// Spearman correlation of scores against gold, with warnings for unmatched targets.
pub fn evaluate_against_gold(
    task: &str,
    scores: &[ChangeScore],
    gold: &[GoldScore],
    warnings: &mut Vec<String>,
) -> Option<EvalResult> {
    let by_lemma: BTreeMap<&str, f64> = scores.iter().map(|s| (s.lemma.as_str(), s.value)).collect();
    let mut predicted = Vec::new();
    let mut expected = Vec::new();
    for g in gold {
        match by_lemma.get(g.lemma.as_str()) {
            Some(&v) => {
                predicted.push(v);
                expected.push(g.graded);
            }
            None => warnings.push(format!("gold target {} has no score", g.lemma)),
        }
    }
    let gold_lemmas: BTreeSet<&str> = gold.iter().map(|g| g.lemma.as_str()).collect();
    for s in scores {
        if !gold_lemmas.contains(s.lemma.as_str()) {
            warnings.push(format!("target {} has no gold score", s.lemma));
        }
    }
    match spearman(&predicted, &expected) {
        Ok(rho) => Some(EvalResult::new(task, Metric::Spearman, rho, predicted.len())),
        Err(e) => {
            warnings.push(format!("{task} evaluation skipped: {e}"));
            None
        }
    }
}
