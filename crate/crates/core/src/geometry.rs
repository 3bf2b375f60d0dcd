//! Distances, prototype vectors and layer aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Operand, Result};
use crate::model::EmbeddingSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    #[default]
    Cosine,
    Canberra,
}

impl DistanceKind {
    pub fn distance(self, u: &[f64], v: &[f64]) -> Result<f64> {
        match self {
            DistanceKind::Cosine => cosine_distance(u, v),
            DistanceKind::Canberra => canberra_distance(u, v),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Cosine => "cosine",
            DistanceKind::Canberra => "canberra",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(DistanceKind::Cosine),
            "canberra" => Ok(DistanceKind::Canberra),
            other => Err(Error::InvalidParameter(format!("unknown distance `{other}`"))),
        }
    }
}

fn check_lengths(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(())
}

fn squared_norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    check_lengths(u, v)?;
    let uu = squared_norm(u);
    if uu == 0.0 {
        return Err(Error::ZeroNorm(Operand::First));
    }
    let vv = squared_norm(v);
    if vv == 0.0 {
        return Err(Error::ZeroNorm(Operand::Second));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    // One square root keeps cos(u, c·u) exactly 1 for power-of-two c.
    let product = uu * vv;
    let denominator = if product.is_normal() {
        product.sqrt()
    } else {
        uu.sqrt() * vv.sqrt()
    };
    Ok((dot / denominator).clamp(-1.0, 1.0))
}

/// `1 - cos(u, v)`, in `[0, 2]`. Zero vectors are rejected.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

/// `Σ |uᵢ - vᵢ| / (|uᵢ| + |vᵢ|)`; coordinates where both are zero contribute 0.
pub fn canberra_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    check_lengths(u, v)?;
    Ok(u.iter()
        .zip(v)
        .map(|(a, b)| {
            let den = a.abs() + b.abs();
            if den == 0.0 {
                0.0
            } else {
                (a - b).abs() / den
            }
        })
        .sum())
}

/// Componentwise mean of equal-length vectors.
pub fn mean_vector<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::EmptyInput("mean of zero vectors".into()))?
        .as_ref();
    let mut acc = vec![0.0; first.len()];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != acc.len() {
            return Err(Error::DimMismatch {
                expected: acc.len(),
                found: v.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// The prototype (average) embedding of a set.
pub fn prototype(set: &EmbeddingSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no embeddings for {} in period {}",
            set.lemma, set.period_id
        )));
    }
    mean_vector(&set.vectors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Sum,
    Concat,
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::Sum => "sum",
            AggregationMode::Concat => "cat",
        })
    }
}

/// Layer provenance of an embedding set: `12`, `sum:1+4+5` or `cat:9+10+11+12`.
///
/// Parsing also accepts ranges (`sum:9-12`); formatting always lists layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Single(usize),
    Aggregate(AggregationMode, Vec<usize>),
}

impl LayerSpec {
    /// Canonical spec for a combination; singletons print as the bare layer.
    pub fn for_combo(mode: AggregationMode, combo: &[usize]) -> LayerSpec {
        let mut combo = combo.to_vec();
        combo.sort_unstable();
        combo.dedup();
        match combo.as_slice() {
            [single] => LayerSpec::Single(*single),
            _ => LayerSpec::Aggregate(mode, combo),
        }
    }

    pub fn layers(&self) -> Vec<usize> {
        match self {
            LayerSpec::Single(l) => vec![*l],
            LayerSpec::Aggregate(_, c) => c.clone(),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Single(l) => write!(f, "{l}"),
            LayerSpec::Aggregate(mode, combo) => write!(f, "{mode}:{}", combo.iter().join("+")),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("malformed layer spec `{s}`"));
        let parse_layer = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let Some((mode, rest)) = s.split_once(':') else {
            return Ok(LayerSpec::Single(parse_layer(s)?));
        };
        let mode = match mode {
            "sum" => AggregationMode::Sum,
            "cat" | "concat" => AggregationMode::Concat,
            _ => return Err(bad()),
        };
        let mut layers = Vec::new();
        for part in rest.split('+') {
            match part.split_once('-') {
                Some((lo, hi)) => {
                    let (lo, hi) = (parse_layer(lo)?, parse_layer(hi)?);
                    if lo > hi {
                        return Err(bad());
                    }
                    layers.extend(lo..=hi);
                }
                None => layers.push(parse_layer(part)?),
            }
        }
        if layers.is_empty() {
            return Err(bad());
        }
        Ok(LayerSpec::for_combo(mode, &layers))
    }
}

/// Combines per-layer embedding sets of the same usages.
///
/// `stack[i]` holds layer `i + 1`; `combo` lists 1-based layer indices.
pub fn aggregate_layers(stack: &[EmbeddingSet], combo: &[usize], mode: AggregationMode) -> Result<EmbeddingSet> {
    if combo.is_empty() {
        return Err(Error::LayerCombo("empty combination".into()));
    }
    let mut sorted = combo.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::LayerCombo(format!("repeated layer in {combo:?}")));
    }
    if let Some(&bad) = sorted.iter().find(|&&l| l == 0 || l > stack.len()) {
        return Err(Error::LayerCombo(format!("layer {bad} outside 1..={}", stack.len())));
    }
    let selected: Vec<&EmbeddingSet> = sorted.iter().map(|&l| &stack[l - 1]).collect();
    let base = selected[0];
    for s in &selected[1..] {
        if s.usage_ids != base.usage_ids {
            return Err(Error::InconsistentLayers(format!(
                "usage order differs for {}",
                s.layer_spec
            )));
        }
        if s.dim != base.dim {
            return Err(Error::InconsistentLayers(format!(
                "dimension {} vs {} for {}",
                s.dim, base.dim, s.layer_spec
            )));
        }
    }
    let vectors: Vec<Vec<f64>> = (0..base.len())
        .map(|row| match mode {
            AggregationMode::Sum => {
                let mut acc = vec![0.0; base.dim];
                for s in &selected {
                    for (a, x) in acc.iter_mut().zip(&s.vectors[row]) {
                        *a += x;
                    }
                }
                acc
            }
            AggregationMode::Concat => selected.iter().flat_map(|s| s.vectors[row].iter().copied()).collect(),
        })
        .collect();
    let dim = match mode {
        AggregationMode::Sum => base.dim,
        AggregationMode::Concat => base.dim * selected.len(),
    };
    Ok(EmbeddingSet {
        lemma: base.lemma.clone(),
        period_id: base.period_id.clone(),
        dim,
        vectors,
        usage_ids: base.usage_ids.clone(),
        layer_spec: LayerSpec::for_combo(mode, &sorted).to_string(),
    })
}

/// All subsets of `1..=layers` whose size is in `lengths`, sorted lexicographically.
pub fn enumerate_layer_combos(layers: usize, lengths: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = lengths
        .iter()
        .filter(|&&k| k >= 1 && k <= layers)
        .flat_map(|&k| (1..=layers).combinations(k))
        .collect();
    out.sort();
    out
}
