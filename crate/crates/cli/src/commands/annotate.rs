use std::collections::{BTreeMap, BTreeSet, HashMap};

use lsc_core::annotator::{build_usage_graph, compare_metric, graph_gcd, wic_judgments, wsi, ScaleMap};
use lsc_core::clustering::CorrParams;
use lsc_core::dataio::{load_clusters, load_gold, load_judgments_with, load_uses_with, EmbeddingStore, Report};
use lsc_core::metrics::{adjusted_rand_index, purity, spearman, weighted_average, EvalResult, Metric};
use lsc_core::{ChangeScore, Clustering, Judgment, UsageInstance};
use serde_json::{json, Value};

use crate::args::AnnotateArgs;
use crate::common::{evaluate_against_gold, load_store, parallel_map, parse_layer, path_value, resolve_periods};
use crate::error::CliError;

/// Human judgments of one pair, reduced to their mean.
struct JudgedPair {
    first: String,
    second: String,
    human_mean: f64,
}

struct Target {
    lemma: String,
    usages: Vec<UsageInstance>,
    pairs: Vec<JudgedPair>,
}

struct Annotated {
    score: ChangeScore,
    clustering: Clustering,
    /// `(human mean, computational judgment, similarity)` per pair, in pair order.
    wic: Vec<(f64, f64, f64)>,
    judgments: Vec<Judgment>,
}

/// Groups usages and human-judged pairs by lemma. Pairs crossing lemmas or
/// naming unknown usages are counted and dropped.
fn collect_targets(usages: Vec<UsageInstance>, human: &[Judgment], warnings: &mut Vec<String>) -> Vec<Target> {
    let lemma_of: HashMap<String, String> = usages.iter().map(|u| (u.usage_id.clone(), u.lemma.clone())).collect();
    let mut by_lemma: BTreeMap<String, Vec<UsageInstance>> = BTreeMap::new();
    for u in usages {
        by_lemma.entry(u.lemma.clone()).or_default().push(u);
    }
    let mut pair_values: BTreeMap<String, BTreeMap<(String, String), Vec<f64>>> = BTreeMap::new();
    let mut stray = 0usize;
    for j in human {
        let (a, b) = j.pair_key();
        match (lemma_of.get(a), lemma_of.get(b)) {
            (Some(la), Some(lb)) if la == lb && a != b => pair_values
                .entry(la.clone())
                .or_default()
                .entry((a.to_string(), b.to_string()))
                .or_default()
                .push(j.value),
            _ => stray += 1,
        }
    }
    if stray > 0 {
        warnings.push(format!(
            "ignored {stray} judgments on unknown, identical or cross-lemma usages"
        ));
    }
    by_lemma
        .into_iter()
        .map(|(lemma, usages)| {
            let pairs = pair_values
                .remove(&lemma)
                .unwrap_or_default()
                .into_iter()
                .map(|((first, second), values)| JudgedPair {
                    first,
                    second,
                    human_mean: values.iter().sum::<f64>() / values.len() as f64,
                })
                .collect();
            Target { lemma, usages, pairs }
        })
        .collect()
}

struct Settings<'a> {
    scale: ScaleMap,
    corr: CorrParams,
    annotator: &'a str,
    periods: &'a (String, String),
    ru_procedure: bool,
}

fn annotate_target(target: &Target, store: &EmbeddingStore, settings: &Settings) -> lsc_core::Result<Annotated> {
    let vectors: HashMap<&str, &[f64]> = store
        .range((target.lemma.clone(), String::new())..)
        .take_while(|((lemma, _), _)| *lemma == target.lemma)
        .flat_map(|(_, set)| set.rows())
        .collect();
    let pairs: Vec<(String, String)> = target
        .pairs
        .iter()
        .map(|p| (p.first.clone(), p.second.clone()))
        .collect();
    let computed = wic_judgments(&pairs, &vectors, settings.annotator, settings.scale)?;
    let wic = target
        .pairs
        .iter()
        .zip(&computed)
        .map(|(p, c)| (p.human_mean, c.judgment.value, c.similarity))
        .collect();
    let judgments: Vec<Judgment> = computed.into_iter().map(|c| c.judgment).collect();
    let graph = build_usage_graph(&target.lemma, target.usages.clone(), &judgments)?;
    let clustering = wsi(&graph, &settings.corr)?;
    let periods = (settings.periods.0.as_str(), settings.periods.1.as_str());
    let score = if settings.ru_procedure {
        compare_metric(&graph, periods, settings.scale.range().1)?
    } else {
        graph_gcd(&graph, &clustering, periods)?
    };
    Ok(Annotated {
        score,
        clustering,
        wic,
        judgments,
    })
}

fn evaluate_wsi(results: &[(String, Annotated)], gold: &Clustering, report: &mut Report) -> Result<(), CliError> {
    let gold_items: BTreeSet<String> = gold.items().iter().cloned().collect();
    let mut ari_scores = Vec::new();
    let mut purity_scores = Vec::new();
    for (lemma, result) in results {
        let keep: BTreeSet<String> = result
            .clustering
            .items()
            .iter()
            .filter(|id| gold_items.contains(*id))
            .cloned()
            .collect();
        if keep.is_empty() {
            report.warnings.push(format!("no gold clusters for usages of {lemma}"));
            continue;
        }
        let predicted = result.clustering.restrict(&keep);
        let reference = gold.restrict(&keep);
        let n = keep.len();
        let ari = adjusted_rand_index(&predicted, &reference)?;
        let pur = purity(&predicted, &reference)?;
        report
            .evaluations
            .push(EvalResult::new(format!("wsi:{lemma}"), Metric::Ari, ari, n));
        report
            .evaluations
            .push(EvalResult::new(format!("wsi:{lemma}"), Metric::Purity, pur, n));
        ari_scores.push((ari, n as f64));
        purity_scores.push((pur, n as f64));
    }
    if !ari_scores.is_empty() {
        let total = ari_scores.iter().map(|(_, w)| *w as usize).sum();
        report.evaluations.push(EvalResult::new(
            "wsi:ari",
            Metric::AvgW,
            weighted_average(&ari_scores)?,
            total,
        ));
        report.evaluations.push(EvalResult::new(
            "wsi:purity",
            Metric::AvgW,
            weighted_average(&purity_scores)?,
            total,
        ));
    }
    Ok(())
}

pub fn run(args: &AnnotateArgs) -> Result<Report, CliError> {
    let emb = &args.embeddings;
    let scale = args.scale_map;
    let (lo, hi) = scale.range();
    let corr = CorrParams {
        threshold: args.tau.unwrap_or((lo + hi) / 2.0),
        restarts: args.restarts,
        seed: emb.seed,
        ..CorrParams::default()
    };
    corr.validate(scale.range())?;
    let layer = args.layer.as_deref().map(parse_layer).transpose()?;

    let usages = load_uses_with(&args.uses, &args.column_aliases)?;
    let human = load_judgments_with(&args.judgments, &args.column_aliases)?;
    let gold = args.gold.as_ref().map(load_gold).transpose()?;
    let gold_clusters = args.gold_clusters.as_ref().map(load_clusters).transpose()?;
    let store = load_store(&emb.emb_dir, layer.as_ref())?;

    let mut report = Report::new("annotate");
    if human.skipped_zero > 0 {
        report
            .warnings
            .push(format!("skipped {} cannot-decide judgments", human.skipped_zero));
    }
    let available: BTreeSet<String> = usages.iter().map(|u| u.period_id.clone()).collect();
    let periods = resolve_periods(emb.periods.as_deref(), &available, &mut report.warnings)?;
    let targets = collect_targets(usages, &human.judgments, &mut report.warnings);

    let settings = Settings {
        scale,
        corr: corr.clone(),
        annotator: &args.annotator,
        periods: &periods,
        ru_procedure: args.ru_procedure,
    };
    let outcomes = parallel_map(emb.jobs, &targets, |t| annotate_target(t, &store, &settings))?;
    let mut results = Vec::new();
    for (target, outcome) in targets.iter().zip(outcomes) {
        match outcome {
            Ok(a) => results.push((target.lemma.clone(), a)),
            Err(e) => report.warnings.push(format!("skipped {}: {e}", target.lemma)),
        }
    }

    let (human_means, computed): (Vec<f64>, Vec<f64>) = results
        .iter()
        .flat_map(|(_, a)| a.wic.iter().map(|&(h, c, _)| (h, c)))
        .unzip();
    match spearman(&computed, &human_means) {
        Ok(rho) => report
            .evaluations
            .push(EvalResult::new("wic", Metric::Spearman, rho, computed.len())),
        Err(e) => report.warnings.push(format!("wic evaluation skipped: {e}")),
    }
    if let Some(gold) = &gold_clusters {
        evaluate_wsi(&results, gold, &mut report)?;
    }
    report.scores = results.iter().map(|(_, a)| a.score.clone()).collect();
    if let Some(gold) = &gold {
        if let Some(eval) = evaluate_against_gold("gcd", &report.scores, gold, &mut report.warnings) {
            report.evaluations.push(eval);
        }
    }

    let clusters: serde_json::Map<String, Value> = results
        .iter()
        .map(|(lemma, a)| {
            let labels: serde_json::Map<String, Value> = a
                .clustering
                .items()
                .iter()
                .zip(a.clustering.labels())
                .map(|(id, &l)| (id.clone(), l.into()))
                .collect();
            (lemma.clone(), Value::Object(labels))
        })
        .collect();
    let judgments: serde_json::Map<String, Value> = results
        .iter()
        .map(|(lemma, a)| {
            let rows: Vec<Value> = a
                .judgments
                .iter()
                .zip(&a.wic)
                .map(|(j, &(human, _, similarity))| {
                    json!({
                        "identifier1": j.usage_id_1,
                        "identifier2": j.usage_id_2,
                        "judgment": j.value,
                        "similarity": similarity,
                        "human_mean": human,
                    })
                })
                .collect();
            (lemma.clone(), Value::Array(rows))
        })
        .collect();
    report.extra.insert("clusters".into(), Value::Object(clusters));
    report.extra.insert("judgments".into(), Value::Object(judgments));

    let config = &mut report.config;
    config.insert("uses".into(), path_value(&args.uses));
    config.insert("judgments".into(), path_value(&args.judgments));
    config.insert("emb_dir".into(), path_value(&emb.emb_dir));
    config.insert("layer".into(), layer.map_or(Value::Null, |l| l.to_string().into()));
    config.insert("gold".into(), args.gold.as_deref().map_or(Value::Null, path_value));
    config.insert(
        "gold_clusters".into(),
        args.gold_clusters.as_deref().map_or(Value::Null, path_value),
    );
    config.insert("periods".into(), vec![periods.0.clone(), periods.1.clone()].into());
    config.insert("scale_map".into(), scale.to_string().into());
    config.insert("tau".into(), corr.threshold.into());
    config.insert("restarts".into(), corr.restarts.into());
    config.insert("exact_below".into(), corr.exact_below.into());
    config.insert("max_moves".into(), corr.max_moves.into());
    config.insert("seed".into(), emb.seed.into());
    config.insert("annotator".into(), args.annotator.clone().into());
    config.insert("column_aliases".into(), args.column_aliases.to_string().into());
    config.insert("ru_procedure".into(), args.ru_procedure.into());
    Ok(report)
}
