use std::collections::{BTreeSet, HashSet};

use lsc_core::clustering::ApParams;
use lsc_core::dataio::{load_gold, EmbeddingStore, Report};
use lsc_core::geometry::{enumerate_layer_combos, AggregationMode};
use lsc_core::metrics::EvalResult;
use lsc_core::{ChangeScore, LayerSpec};
use serde_json::{json, Value};

use crate::args::LayersArgs;
use crate::commands::gcd::score_pair;
use crate::common::{
    combine_layers, evaluate_against_gold, layer_dirs, lemmas_of, load_layer_stores, parallel_map, path_value,
    periods_of, resolve_distance, resolve_periods,
};
use crate::error::CliError;

/// Layer specs to evaluate, without repeating single layers across modes.
fn sweep_specs(layers: usize, lengths: &BTreeSet<usize>, modes: &[AggregationMode]) -> Vec<LayerSpec> {
    let mut seen = HashSet::new();
    let mut specs = Vec::new();
    for combo in enumerate_layer_combos(layers, lengths) {
        for &mode in modes {
            let spec = LayerSpec::for_combo(mode, &combo);
            if seen.insert(spec.to_string()) {
                specs.push(spec);
            }
        }
    }
    specs
}

fn summary(values: &[f64]) -> Value {
    if values.is_empty() {
        return json!({ "count": 0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    json!({
        "count": values.len(),
        "mean": mean,
        "std": var.sqrt(),
        "min": values.iter().copied().fold(f64::INFINITY, f64::min),
        "max": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

pub fn run(args: &LayersArgs) -> Result<Report, CliError> {
    let emb = &args.embeddings;
    let distance = resolve_distance(args.method, args.distance)?;
    let ap = ApParams::default().with_seed(emb.seed);
    ap.validate()?;
    let lengths: BTreeSet<usize> = args.lengths.iter().copied().collect();
    if lengths.contains(&0) {
        return Err(CliError::Config("combination lengths must be positive".into()));
    }
    let mut modes: Vec<AggregationMode> = Vec::new();
    for m in &args.mode {
        let mode = AggregationMode::from(*m);
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }

    let gold = args.gold.as_ref().map(load_gold).transpose()?;
    let dirs = layer_dirs(&emb.emb_dir)?;
    let specs = sweep_specs(dirs.len(), &lengths, &modes);
    if specs.is_empty() {
        return Err(CliError::Config(format!(
            "no combination of lengths {:?} fits {} layers",
            lengths,
            dirs.len()
        )));
    }
    let stores = load_layer_stores(&dirs)?;

    let mut report = Report::new("layers");
    let periods = resolve_periods(emb.periods.as_deref(), &periods_of(&stores[0]), &mut report.warnings)?;
    let lemmas = lemmas_of(&stores[0]);
    let jobs: Vec<(usize, &String)> = (0..specs.len())
        .flat_map(|s| lemmas.iter().map(move |l| (s, l)))
        .collect();
    let outcomes = parallel_map(emb.jobs, &jobs, |&(s, lemma)| {
        let spec = &specs[s];
        let selected: Vec<&EmbeddingStore> = spec.layers().iter().map(|&k| &stores[k - 1]).collect();
        let first = combine_layers(&selected, &(lemma.clone(), periods.0.clone()), spec)?;
        let second = combine_layers(&selected, &(lemma.clone(), periods.1.clone()), spec)?;
        score_pair(args.method, distance, &ap, &first, &second)
    })?;

    let mut per_spec: Vec<Vec<ChangeScore>> = vec![Vec::new(); specs.len()];
    for (&(s, lemma), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(score) => per_spec[s].push(score),
            Err(e) => report
                .warnings
                .push(format!("skipped {lemma} at layers {}: {e}", specs[s])),
        }
    }

    let mut runs = Vec::new();
    let mut correlations = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (s, scores) in per_spec.iter().enumerate() {
        let task = format!("gcd:{}", specs[s]);
        let eval: Option<EvalResult> = gold
            .as_ref()
            .and_then(|g| evaluate_against_gold(&task, scores, g, &mut report.warnings));
        if let Some(e) = &eval {
            correlations.push(e.value);
            if best.is_none_or(|(_, v)| e.value > v) {
                best = Some((s, e.value));
            }
            report.evaluations.push(e.clone());
        }
        let values: serde_json::Map<String, Value> =
            scores.iter().map(|sc| (sc.lemma.clone(), sc.value.into())).collect();
        runs.push(json!({
            "layer": specs[s].to_string(),
            "spearman": eval.as_ref().map(|e| e.value),
            "n": eval.as_ref().map_or(scores.len(), |e| e.n),
            "scores": values,
        }));
    }
    if let Some((s, rho)) = best {
        report.scores = per_spec[s].clone();
        report
            .extra
            .insert("best".into(), json!({ "layer": specs[s].to_string(), "spearman": rho }));
    }
    report.extra.insert("runs".into(), Value::Array(runs));
    report.extra.insert("distribution".into(), summary(&correlations));

    let config = &mut report.config;
    config.insert("method".into(), args.method.name().into());
    config.insert("distance".into(), distance.to_string().into());
    config.insert("emb_dir".into(), path_value(&emb.emb_dir));
    config.insert("layer_count".into(), dirs.len().into());
    config.insert("lengths".into(), lengths.iter().copied().collect::<Vec<_>>().into());
    config.insert(
        "modes".into(),
        modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().into(),
    );
    config.insert("gold".into(), args.gold.as_deref().map_or(Value::Null, path_value));
    config.insert("periods".into(), vec![periods.0, periods.1].into());
    config.insert("seed".into(), emb.seed.into());
    Ok(report)
}
