use lsc_core::clustering::ApParams;
use lsc_core::dataio::{load_gold, EmbeddingStore, Report};
use lsc_core::{form, sense, ChangeScore, DistanceKind, EmbeddingSet};
use serde_json::Value;

use crate::args::{GcdArgs, GcdMethod};
use crate::common::{
    evaluate_against_gold, lemmas_of, load_store, parallel_map, parse_layer, path_value, periods_of, resolve_distance,
    resolve_periods,
};
use crate::error::CliError;

/// Scores one target with an already configured method.
pub fn score_pair(
    method: GcdMethod,
    distance: DistanceKind,
    ap: &ApParams,
    first: &EmbeddingSet,
    second: &EmbeddingSet,
) -> lsc_core::Result<ChangeScore> {
    match method {
        GcdMethod::Apd => form::apd(first, second, distance),
        GcdMethod::Prt => form::prt(first, second),
        GcdMethod::ApJsd => sense::ap_jsd(first, second, ap),
        GcdMethod::Widid => sense::widid(first, second, ap),
    }
}

/// Scores every lemma of `store`; failed targets become warnings.
pub fn score_store(
    store: &EmbeddingStore,
    method: GcdMethod,
    distance: DistanceKind,
    ap: &ApParams,
    periods: &(String, String),
    jobs: usize,
) -> Result<(Vec<ChangeScore>, Vec<String>), CliError> {
    let lemmas = lemmas_of(store);
    let results = parallel_map(jobs, &lemmas, |lemma| {
        let get = |p: &String| {
            store
                .get(&(lemma.clone(), p.clone()))
                .ok_or_else(|| lsc_core::Error::EmptyInput(format!("no embeddings for period {p}")))
        };
        score_pair(method, distance, ap, get(&periods.0)?, get(&periods.1)?)
    })?;
    let mut scores = Vec::new();
    let mut warnings = Vec::new();
    for (lemma, result) in lemmas.iter().zip(results) {
        match result {
            Ok(s) => scores.push(s),
            Err(e) => warnings.push(format!("skipped {lemma}: {e}")),
        }
    }
    Ok((scores, warnings))
}

pub fn run(args: &GcdArgs) -> Result<Report, CliError> {
    let emb = &args.embeddings;
    let distance = resolve_distance(args.method, args.distance)?;
    let layer = args.layer.as_deref().map(parse_layer).transpose()?;
    let ap = ApParams::default().with_seed(emb.seed);
    ap.validate()?;

    let gold = load_gold(&args.gold)?;
    let store = load_store(&emb.emb_dir, layer.as_ref())?;

    let mut report = Report::new("gcd");
    let periods = resolve_periods(emb.periods.as_deref(), &periods_of(&store), &mut report.warnings)?;
    let (scores, warnings) = score_store(&store, args.method, distance, &ap, &periods, emb.jobs)?;
    report.warnings.extend(warnings);
    if let Some(eval) = evaluate_against_gold("gcd", &scores, &gold, &mut report.warnings) {
        report.evaluations.push(eval);
    }
    report.scores = scores;

    let config = &mut report.config;
    config.insert("method".into(), args.method.name().into());
    config.insert("distance".into(), distance.to_string().into());
    config.insert("layer".into(), layer.map_or(Value::Null, |l| l.to_string().into()));
    config.insert("emb_dir".into(), path_value(&emb.emb_dir));
    config.insert("gold".into(), path_value(&args.gold));
    config.insert("periods".into(), vec![periods.0, periods.1].into());
    config.insert("seed".into(), emb.seed.into());
    if matches!(args.method, GcdMethod::ApJsd | GcdMethod::Widid) {
        config.insert(
            "affinity_propagation".into(),
            serde_json::to_value(&ap).map_err(|e| CliError::Config(e.to_string()))?,
        );
    }
    Ok(report)
}
