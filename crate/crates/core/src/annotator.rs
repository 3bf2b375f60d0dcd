//! Computational annotation: embedding similarities stand in for human
//! proximity judgments, feed a usage graph, and the graph is clustered into
//! senses and scored for change.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{correlation_cluster, CorrParams};
use crate::error::{Error, Result};
use crate::geometry::cosine_similarity;
use crate::model::{ChangeScore, Clustering, Judgment, Method, UsageGraph, UsageInstance, DUREL_MAX, DUREL_MIN};
use crate::sense::{cluster_distributions, jsd};

/// How a cosine similarity in `[-1, 1]` becomes a judgment value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScaleMap {
    Linear { lo: f64, hi: f64 },
    Raw,
}

impl Default for ScaleMap {
    fn default() -> Self {
        ScaleMap::Linear {
            lo: DUREL_MIN,
            hi: DUREL_MAX,
        }
    }
}

impl ScaleMap {
    pub fn linear(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "linear scale needs finite lo < hi, got {lo}..{hi}"
            )));
        }
        Ok(ScaleMap::Linear { lo, hi })
    }

    /// Range of values the map can produce.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            ScaleMap::Linear { lo, hi } => (lo, hi),
            ScaleMap::Raw => (-1.0, 1.0),
        }
    }

    pub fn apply(&self, similarity: f64) -> f64 {
        scale_map(similarity, *self)
    }
}

impl fmt::Display for ScaleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleMap::Linear { lo, hi } => write!(f, "linear:{lo}:{hi}"),
            ScaleMap::Raw => f.write_str("raw"),
        }
    }
}

impl FromStr for ScaleMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("raw") {
            return Ok(ScaleMap::Raw);
        }
        let bad = || Error::InvalidParameter(format!("scale map `{s}`: expected `raw` or `linear:LO:HI`"));
        let mut parts = s.split(':');
        if !parts.next().is_some_and(|k| k.eq_ignore_ascii_case("linear")) {
            return Err(bad());
        }
        let lo = parts.next().and_then(|p| p.parse::<f64>().ok()).ok_or_else(bad)?;
        let hi = parts.next().and_then(|p| p.parse::<f64>().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        ScaleMap::linear(lo, hi)
    }
}

/// `lo + (hi - lo)·(s + 1)/2` clamped to `[lo, hi]`, or `s` itself for [`ScaleMap::Raw`].
pub fn scale_map(similarity: f64, map: ScaleMap) -> f64 {
    match map {
        ScaleMap::Linear { lo, hi } => (lo + (hi - lo) * (similarity + 1.0) / 2.0).clamp(lo, hi),
        ScaleMap::Raw => similarity,
    }
}

/// Embedding lookup by usage id.
pub trait VectorStore {
    fn vector(&self, usage_id: &str) -> Option<&[f64]>;
}

impl VectorStore for HashMap<String, Vec<f64>> {
    fn vector(&self, usage_id: &str) -> Option<&[f64]> {
        self.get(usage_id).map(Vec::as_slice)
    }
}

impl VectorStore for HashMap<&str, &[f64]> {
    fn vector(&self, usage_id: &str) -> Option<&[f64]> {
        self.get(usage_id).copied()
    }
}

/// A computational judgment together with the similarity it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct WicJudgment {
    pub judgment: Judgment,
    pub similarity: f64,
}

/// Judges every pair by the cosine similarity of its two usages' embeddings.
pub fn wic_judgments<S: VectorStore + ?Sized>(
    pairs: &[(String, String)],
    store: &S,
    annotator: &str,
    map: ScaleMap,
) -> Result<Vec<WicJudgment>> {
    let lookup = |id: &str| store.vector(id).ok_or_else(|| Error::UnknownUsage(id.to_string()));
    pairs
        .iter()
        .map(|(a, b)| {
            let similarity = cosine_similarity(lookup(a)?, lookup(b)?)?;
            Ok(WicJudgment {
                judgment: Judgment::new(a.clone(), b.clone(), annotator, scale_map(similarity, map)),
                similarity,
            })
        })
        .collect()
}

pub fn build_usage_graph(lemma: &str, usages: Vec<UsageInstance>, judgments: &[Judgment]) -> Result<UsageGraph> {
    UsageGraph::build(lemma, usages, judgments)
}

/// Word sense induction: correlation clustering of the usage graph. Items
/// of the result are usage ids in node order.
pub fn wsi(graph: &UsageGraph, params: &CorrParams) -> Result<Clustering> {
    correlation_cluster(graph, params)
}

fn period_map(graph: &UsageGraph) -> HashMap<String, String> {
    graph
        .nodes()
        .iter()
        .map(|u| (u.usage_id.clone(), u.period_id.clone()))
        .collect()
}

/// √JSD between the two periods' distributions over the clusters of `clustering`.
pub fn graph_gcd(graph: &UsageGraph, clustering: &Clustering, periods: (&str, &str)) -> Result<ChangeScore> {
    let (p, q) = cluster_distributions(clustering, &period_map(graph), periods)?;
    for (dist, period) in [(&p, periods.0), (&q, periods.1)] {
        if dist.empty {
            return Err(Error::EmptyInput(format!(
                "no usages of {} in period {period}",
                graph.lemma()
            )));
        }
    }
    let value = jsd(&p, &q)?.sqrt();
    Ok(ChangeScore::new(
        graph.lemma(),
        Method::GraphJsd,
        value,
        (periods.0.to_string(), periods.1.to_string()),
    )
    .with_detail("clusters", p.probs.len() as f64))
}

/// `scale_max` minus the mean weight of edges joining the two periods.
pub fn compare_metric(graph: &UsageGraph, periods: (&str, &str), scale_max: f64) -> Result<ChangeScore> {
    let nodes = graph.nodes();
    let crosses = |i: usize, j: usize| {
        let (a, b) = (nodes[i].period_id.as_str(), nodes[j].period_id.as_str());
        (a == periods.0 && b == periods.1) || (a == periods.1 && b == periods.0)
    };
    let weights: Vec<f64> = graph
        .edges()
        .filter(|&(i, j, _)| crosses(i, j))
        .map(|(_, _, e)| e.weight)
        .collect();
    if weights.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no annotated pairs of {} across {} and {}",
            graph.lemma(),
            periods.0,
            periods.1
        )));
    }
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    Ok(ChangeScore::new(
        graph.lemma(),
        Method::Compare,
        scale_max - mean,
        (periods.0.to_string(), periods.1.to_string()),
    )
    .with_detail("mean_relatedness", mean)
    .with_detail("cross_edges", weights.len() as f64))
}
