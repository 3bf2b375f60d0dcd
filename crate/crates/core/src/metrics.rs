//! Evaluation statistics.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Clustering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Spearman,
    Ari,
    Purity,
    AvgW,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Spearman => "SPEARMAN",
            Metric::Ari => "ARI",
            Metric::Purity => "PURITY",
            Metric::AvgW => "AVG_W",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// What was evaluated, e.g. `gcd`, `wic` or `wsi:plane`.
    pub task: String,
    pub metric: Metric,
    pub value: f64,
    pub n: usize,
}

impl EvalResult {
    pub fn new(task: impl Into<String>, metric: Metric, value: f64, n: usize) -> Self {
        EvalResult {
            task: task.into(),
            metric,
            value,
            n,
        }
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!("{} observations", x.len())));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("correlation input {v}")));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("correlation input {v}")));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

fn pairs(n: u64) -> i128 {
    i128::from(n) * (i128::from(n) - 1) / 2
}

/// Adjusted Rand index (Hubert and Arabie). Computed in integers up to the
/// final division, so small cases come out exact.
pub fn adjusted_rand_index(a: &Clustering, b: &Clustering) -> Result<f64> {
    let (la, lb) = a.aligned_with(b)?;
    if la == lb || la.len() < 2 {
        return Ok(1.0);
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in la.iter().zip(&lb) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: i128 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: i128 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(la.len() as u64);
    // (index - sa·sb/total) / ((sa+sb)/2 - sa·sb/total), scaled by 2·total.
    let numerator = 2 * (total * index - sum_a * sum_b);
    let denominator = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if denominator == 0 {
        return Ok(if same_partition(&la, &lb) { 1.0 } else { 0.0 });
    }
    Ok(numerator as f64 / denominator as f64)
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut forward = HashMap::new();
    let mut backward = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *forward.entry(x).or_insert(y) == y && *backward.entry(y).or_insert(x) == x)
}

/// Share of items that belong to the majority gold class of their predicted cluster.
pub fn purity(pred: &Clustering, gold: &Clustering) -> Result<f64> {
    let (lp, lg) = pred.aligned_with(gold)?;
    if lp.is_empty() {
        return Err(Error::EmptyInput("purity of an empty clustering".into()));
    }
    let mut table: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
    for (&p, &g) in lp.iter().zip(&lg) {
        *table.entry(p).or_default().entry(g).or_default() += 1;
    }
    let majority: usize = table
        .values()
        .map(|classes| classes.values().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / lp.len() as f64)
}

/// `Σ weight·value / Σ weight` over `(value, weight)` pairs.
pub fn weighted_average(scores: &[(f64, f64)]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("weighted average of no scores".into()));
    }
    if let Some((_, w)) = scores.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(format!("weight {w} is not positive")));
    }
    let total: f64 = scores.iter().map(|(_, w)| w).sum();
    Ok(scores.iter().map(|(v, w)| v * w).sum::<f64>() / total)
}
