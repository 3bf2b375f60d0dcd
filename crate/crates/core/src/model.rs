//! Shared data model: usages, embedding sets, judgments, usage graphs,
//! clusterings and change scores.
//!
//! Every type here is constructed once and never mutated afterwards, so values
//! can be shared freely between worker threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One occurrence of a target word in a dated context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageInstance {
    pub usage_id: String,
    pub lemma: String,
    pub context: String,
    /// Character offsets `[start, end)` of the target inside `context`.
    pub target_span: (usize, usize),
    pub period_id: String,
}

impl UsageInstance {
    pub fn span_is_valid(&self) -> bool {
        let (start, end) = self.target_span;
        start < end && end <= self.context.chars().count()
    }

    /// The target token as it appears in the context, if the span is valid.
    pub fn target_text(&self) -> Option<String> {
        if !self.span_is_valid() {
            return None;
        }
        let (start, end) = self.target_span;
        Some(self.context.chars().skip(start).take(end - start).collect())
    }
}

/// Contextualized vectors of one target word in one time period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub lemma: String,
    pub period_id: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    /// Aligned with `vectors`.
    pub usage_ids: Vec<String>,
    /// Layer provenance, e.g. `12` or `sum:9+10+11+12`.
    pub layer_spec: String,
}

impl EmbeddingSet {
    /// Builds a set, rejecting ragged rows, non-finite components and duplicate ids.
    pub fn new(
        lemma: impl Into<String>,
        period_id: impl Into<String>,
        dim: usize,
        layer_spec: impl Into<String>,
        usage_ids: Vec<String>,
        vectors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let set = EmbeddingSet {
            lemma: lemma.into(),
            period_id: period_id.into(),
            dim,
            vectors,
            usage_ids,
            layer_spec: layer_spec.into(),
        };
        if set.dim == 0 {
            return Err(Error::InvalidParameter("embedding dimension must be positive".into()));
        }
        if set.usage_ids.len() != set.vectors.len() {
            return Err(Error::LengthMismatch {
                left: set.usage_ids.len(),
                right: set.vectors.len(),
            });
        }
        let mut seen = HashSet::new();
        for (id, v) in set.usage_ids.iter().zip(&set.vectors) {
            if v.len() != set.dim {
                return Err(Error::DimMismatch {
                    expected: set.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding row `{id}`")));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate usage id `{id}` in embedding set"
                )));
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.usage_ids
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter().map(Vec::as_slice))
    }

    pub fn vector_of(&self, usage_id: &str) -> Option<&[f64]> {
        self.usage_ids
            .iter()
            .position(|id| id == usage_id)
            .map(|i| self.vectors[i].as_slice())
    }
}

/// A proximity judgment on the DURel scale (4 identical .. 1 unrelated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub usage_id_1: String,
    pub usage_id_2: String,
    pub annotator: String,
    pub value: f64,
}

pub const DUREL_MIN: f64 = 1.0;
pub const DUREL_MAX: f64 = 4.0;

impl Judgment {
    pub fn new(
        usage_id_1: impl Into<String>,
        usage_id_2: impl Into<String>,
        annotator: impl Into<String>,
        value: f64,
    ) -> Self {
        Judgment {
            usage_id_1: usage_id_1.into(),
            usage_id_2: usage_id_2.into(),
            annotator: annotator.into(),
            value,
        }
    }

    /// Order-independent key of the judged pair.
    pub fn pair_key(&self) -> (&str, &str) {
        let (a, b) = (self.usage_id_1.as_str(), self.usage_id_2.as_str());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn is_on_durel_scale(&self) -> bool {
        (DUREL_MIN..=DUREL_MAX).contains(&self.value)
    }
}

/// An aggregated edge of a usage graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Arithmetic mean of `judgments`, accumulated in insertion order.
    pub weight: f64,
    pub judgments: Vec<Judgment>,
}

/// Weighted graph of word usages whose edges carry averaged proximity judgments.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageGraph {
    lemma: String,
    nodes: Vec<UsageInstance>,
    index: HashMap<String, usize>,
    edges: BTreeMap<(usize, usize), Edge>,
}

impl UsageGraph {
    /// Nodes keep the order of `usages`; judgments on the same unordered pair
    /// are averaged, whatever their annotator.
    pub fn build(lemma: impl Into<String>, usages: Vec<UsageInstance>, judgments: &[Judgment]) -> Result<Self> {
        let mut index = HashMap::with_capacity(usages.len());
        for (i, u) in usages.iter().enumerate() {
            if index.insert(u.usage_id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate usage id `{}`", u.usage_id)));
            }
        }
        let mut grouped: BTreeMap<(usize, usize), Vec<Judgment>> = BTreeMap::new();
        for j in judgments {
            let a = *index
                .get(&j.usage_id_1)
                .ok_or_else(|| Error::UnknownUsage(j.usage_id_1.clone()))?;
            let b = *index
                .get(&j.usage_id_2)
                .ok_or_else(|| Error::UnknownUsage(j.usage_id_2.clone()))?;
            if a == b {
                return Err(Error::InvalidParameter(format!("self-judgment on `{}`", j.usage_id_1)));
            }
            if !j.value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "judgment on ({}, {})",
                    j.usage_id_1, j.usage_id_2
                )));
            }
            grouped.entry((a.min(b), a.max(b))).or_default().push(j.clone());
        }
        let edges = grouped
            .into_iter()
            .map(|(key, judgments)| {
                let sum: f64 = judgments.iter().map(|j| j.value).sum();
                let weight = sum / judgments.len() as f64;
                (key, Edge { weight, judgments })
            })
            .collect();
        Ok(UsageGraph {
            lemma: lemma.into(),
            nodes: usages,
            index,
            edges,
        })
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn nodes(&self) -> &[UsageInstance] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, usage_id: &str) -> Option<usize> {
        self.index.get(usage_id).copied()
    }

    /// Edges as `(i, j, edge)` with `i < j`, in ascending key order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &Edge)> {
        self.edges.iter().map(|(&(i, j), e)| (i, j, e))
    }

    pub fn weighted_edges(&self) -> Vec<(usize, usize, f64)> {
        self.edges().map(|(i, j, e)| (i, j, e.weight)).collect()
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&Edge> {
        self.edges.get(&(a.min(b), a.max(b)))
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.nodes.iter().map(|u| u.usage_id.clone()).collect()
    }
}

/// A partition of items into sense clusters.
///
/// Items are addressed by string id (usage ids, or decimal indices for anonymous data).
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    items: Vec<String>,
    labels: Vec<usize>,
    exemplars: Option<BTreeMap<usize, usize>>,
    converged: bool,
}

impl Clustering {
    pub fn new(items: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if items.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: items.len(),
                right: labels.len(),
            });
        }
        let mut seen = HashSet::with_capacity(items.len());
        for it in &items {
            if !seen.insert(it.as_str()) {
                return Err(Error::InvalidParameter(format!("item `{it}` clustered twice")));
            }
        }
        Ok(Clustering {
            items,
            labels,
            exemplars: None,
            converged: true,
        })
    }

    /// Anonymous items named `"0"`, `"1"`, ...
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let items = (0..labels.len()).map(|i| i.to_string()).collect();
        Clustering {
            items,
            labels,
            exemplars: None,
            converged: true,
        }
    }

    pub fn with_exemplars(mut self, exemplars: BTreeMap<usize, usize>) -> Self {
        self.exemplars = Some(exemplars);
        self
    }

    pub fn with_converged(mut self, converged: bool) -> Self {
        self.converged = converged;
        self
    }

    /// Relabels clusters densely in order of first appearance.
    pub fn canonicalized(mut self) -> Self {
        let map = first_appearance_map(&self.labels);
        for l in &mut self.labels {
            *l = map[l];
        }
        if let Some(ex) = self.exemplars.take() {
            self.exemplars = Some(
                ex.into_iter()
                    .filter_map(|(k, v)| map.get(&k).map(|&nk| (nk, v)))
                    .collect(),
            );
        }
        self
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn exemplars(&self) -> Option<&BTreeMap<usize, usize>> {
        self.exemplars.as_ref()
    }

    /// False when the producing algorithm stopped at its iteration cap.
    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn label_of(&self, item: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item).map(|p| self.labels[p])
    }

    pub fn cluster_ids(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_ids().len()
    }

    /// Positions of the members of cluster `k`.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == k)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn label_map(&self) -> HashMap<&str, usize> {
        self.items
            .iter()
            .map(String::as_str)
            .zip(self.labels.iter().copied())
            .collect()
    }

    /// Keeps only the listed items, preserving order.
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Clustering {
        let (items, labels) = self
            .items
            .iter()
            .zip(&self.labels)
            .filter(|(it, _)| keep.contains(*it))
            .map(|(it, &l)| (it.clone(), l))
            .unzip();
        Clustering {
            items,
            labels,
            exemplars: None,
            converged: self.converged,
        }
    }

    /// Labels of both clusterings in `self`'s item order; errors unless the
    /// item sets are identical.
    pub fn aligned_with(&self, other: &Clustering) -> Result<(Vec<usize>, Vec<usize>)> {
        if self.len() != other.len() {
            return Err(Error::ItemMismatch);
        }
        let theirs = other.label_map();
        let mut b = Vec::with_capacity(self.len());
        for it in &self.items {
            b.push(*theirs.get(it.as_str()).ok_or(Error::ItemMismatch)?);
        }
        Ok((self.labels.clone(), b))
    }
}

pub(crate) fn first_appearance_map(labels: &[usize]) -> HashMap<usize, usize> {
    let mut map = HashMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    map
}

/// Change measure that produced a [`ChangeScore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Apd,
    Prt,
    ApJsd,
    Widid,
    GraphJsd,
    Compare,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Apd => "APD",
            Method::Prt => "PRT",
            Method::ApJsd => "AP_JSD",
            Method::Widid => "WIDID",
            Method::GraphJsd => "GRAPH_JSD",
            Method::Compare => "COMPARE",
        })
    }
}

/// Degree of change of one target word between two periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeScore {
    pub lemma: String,
    pub method: Method,
    pub value: f64,
    pub period_pair: (String, String),
    /// Auxiliary numbers such as cluster counts or the raw COMPARE mean.
    #[serde(default)]
    pub details: BTreeMap<String, f64>,
}

impl ChangeScore {
    pub fn new(lemma: impl Into<String>, method: Method, value: f64, period_pair: (String, String)) -> Self {
        ChangeScore {
            lemma: lemma.into(),
            method,
            value,
            period_pair,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

/// One consistency problem found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateUsage(String),
    BadSpan {
        usage_id: String,
        span: (usize, usize),
        context_chars: usize,
    },
    UnknownJudgmentUsage(String),
    SelfJudgment(String),
    JudgmentOffScale {
        pair: (String, String),
        value: f64,
    },
    UnknownEmbeddingUsage {
        lemma: String,
        period_id: String,
        usage_id: String,
    },
    RowDimMismatch {
        lemma: String,
        period_id: String,
        usage_id: String,
        expected: usize,
        found: usize,
    },
    NonFiniteRow {
        lemma: String,
        period_id: String,
        usage_id: String,
    },
    DuplicateEmbeddingRow {
        lemma: String,
        period_id: String,
        usage_id: String,
    },
    RowCountMismatch {
        lemma: String,
        period_id: String,
        ids: usize,
        vectors: usize,
    },
    UnknownPeriod {
        lemma: String,
        period_id: String,
    },
    PeriodMismatch {
        usage_id: String,
        usage_period: String,
        embedding_period: String,
    },
    LemmaMismatch {
        usage_id: String,
        usage_lemma: String,
        embedding_lemma: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateUsage(id) => write!(f, "usage id `{id}` occurs more than once"),
            BadSpan {
                usage_id,
                span,
                context_chars,
            } => write!(
                f,
                "usage `{usage_id}`: target span {}:{} invalid for a context of {context_chars} characters",
                span.0, span.1
            ),
            UnknownJudgmentUsage(id) => write!(f, "judgment references unknown usage `{id}`"),
            SelfJudgment(id) => write!(f, "judgment pairs usage `{id}` with itself"),
            JudgmentOffScale { pair, value } => {
                write!(f, "judgment ({}, {}) = {value} outside [1, 4]", pair.0, pair.1)
            }
            UnknownEmbeddingUsage {
                lemma,
                period_id,
                usage_id,
            } => write!(f, "embedding {lemma}/{period_id}: row `{usage_id}` has no usage"),
            RowDimMismatch {
                lemma,
                period_id,
                usage_id,
                expected,
                found,
            } => write!(
                f,
                "embedding {lemma}/{period_id}: row `{usage_id}` has length {found}, expected {expected}"
            ),
            NonFiniteRow {
                lemma,
                period_id,
                usage_id,
            } => write!(
                f,
                "embedding {lemma}/{period_id}: row `{usage_id}` has non-finite components"
            ),
            DuplicateEmbeddingRow {
                lemma,
                period_id,
                usage_id,
            } => write!(f, "embedding {lemma}/{period_id}: row `{usage_id}` repeated"),
            RowCountMismatch {
                lemma,
                period_id,
                ids,
                vectors,
            } => write!(f, "embedding {lemma}/{period_id}: {ids} ids for {vectors} vectors"),
            UnknownPeriod { lemma, period_id } => {
                write!(f, "embedding {lemma}/{period_id}: period not used by any usage")
            }
            PeriodMismatch {
                usage_id,
                usage_period,
                embedding_period,
            } => write!(
                f,
                "usage `{usage_id}` belongs to {usage_period} but is embedded under {embedding_period}"
            ),
            LemmaMismatch {
                usage_id,
                usage_lemma,
                embedding_lemma,
            } => write!(
                f,
                "usage `{usage_id}` has lemma {usage_lemma} but is embedded under {embedding_lemma}"
            ),
        }
    }
}

/// Cross-checks usages, embeddings and judgments. An empty result means every
/// reference resolves and every row is well formed.
pub fn validate_dataset(
    usages: &[UsageInstance],
    embeddings: &[EmbeddingSet],
    judgments: &[Judgment],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut by_id: HashMap<&str, &UsageInstance> = HashMap::with_capacity(usages.len());
    for u in usages {
        if by_id.insert(u.usage_id.as_str(), u).is_some() {
            out.push(Violation::DuplicateUsage(u.usage_id.clone()));
        }
        if !u.span_is_valid() {
            out.push(Violation::BadSpan {
                usage_id: u.usage_id.clone(),
                span: u.target_span,
                context_chars: u.context.chars().count(),
            });
        }
    }
    let periods: BTreeSet<&str> = usages.iter().map(|u| u.period_id.as_str()).collect();

    for j in judgments {
        for id in [&j.usage_id_1, &j.usage_id_2] {
            if !by_id.contains_key(id.as_str()) {
                out.push(Violation::UnknownJudgmentUsage(id.clone()));
            }
        }
        if j.usage_id_1 == j.usage_id_2 {
            out.push(Violation::SelfJudgment(j.usage_id_1.clone()));
        }
        if !j.is_on_durel_scale() {
            out.push(Violation::JudgmentOffScale {
                pair: (j.usage_id_1.clone(), j.usage_id_2.clone()),
                value: j.value,
            });
        }
    }

    for set in embeddings {
        let (lemma, period_id) = (&set.lemma, &set.period_id);
        if !periods.contains(period_id.as_str()) {
            out.push(Violation::UnknownPeriod {
                lemma: lemma.clone(),
                period_id: period_id.clone(),
            });
        }
        if set.usage_ids.len() != set.vectors.len() {
            out.push(Violation::RowCountMismatch {
                lemma: lemma.clone(),
                period_id: period_id.clone(),
                ids: set.usage_ids.len(),
                vectors: set.vectors.len(),
            });
        }
        let mut seen = HashSet::new();
        for (id, v) in set.usage_ids.iter().zip(&set.vectors) {
            if !seen.insert(id.as_str()) {
                out.push(Violation::DuplicateEmbeddingRow {
                    lemma: lemma.clone(),
                    period_id: period_id.clone(),
                    usage_id: id.clone(),
                });
            }
            if v.len() != set.dim {
                out.push(Violation::RowDimMismatch {
                    lemma: lemma.clone(),
                    period_id: period_id.clone(),
                    usage_id: id.clone(),
                    expected: set.dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                out.push(Violation::NonFiniteRow {
                    lemma: lemma.clone(),
                    period_id: period_id.clone(),
                    usage_id: id.clone(),
                });
            }
            match by_id.get(id.as_str()) {
                None => out.push(Violation::UnknownEmbeddingUsage {
                    lemma: lemma.clone(),
                    period_id: period_id.clone(),
                    usage_id: id.clone(),
                }),
                Some(u) => {
                    if &u.period_id != period_id {
                        out.push(Violation::PeriodMismatch {
                            usage_id: id.clone(),
                            usage_period: u.period_id.clone(),
                            embedding_period: period_id.clone(),
                        });
                    }
                    if &u.lemma != lemma {
                        out.push(Violation::LemmaMismatch {
                            usage_id: id.clone(),
                            usage_lemma: u.lemma.clone(),
                            embedding_lemma: lemma.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}
