//! Affinity propagation by responsibility/availability message passing.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::cosine_similarity;
use crate::model::{Clustering, EmbeddingSet};

/// Self-similarity assigned to every item before message passing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preference {
    /// Median of the off-diagonal similarities.
    Median,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Cosine,
    NegSquaredEuclidean,
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::Cosine => "cosine",
            Similarity::NegSquaredEuclidean => "neg_squared_euclidean",
        })
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "neg_squared_euclidean" | "euclidean" => Ok(Similarity::NegSquaredEuclidean),
            _ => Err(Error::InvalidParameter(format!("unknown similarity `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApParams {
    pub damping: f64,
    pub max_iter: usize,
    /// Iterations the exemplar set must stay unchanged to declare convergence.
    pub convergence_iter: usize,
    pub preference: Preference,
    pub similarity: Similarity,
    pub seed: u64,
}

impl Default for ApParams {
    fn default() -> Self {
        ApParams {
            damping: 0.9,
            max_iter: 200,
            convergence_iter: 15,
            preference: Preference::Median,
            similarity: Similarity::Cosine,
            seed: 0,
        }
    }
}

impl ApParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter(format!(
                "damping {} outside [0.5, 1)",
                self.damping
            )));
        }
        if self.max_iter == 0 || self.convergence_iter == 0 {
            return Err(Error::InvalidParameter("iteration counts must be positive".into()));
        }
        if let Preference::Value(p) = self.preference {
            if !p.is_finite() {
                return Err(Error::NonFinite("preference".into()));
            }
        }
        Ok(())
    }
}

/// Row-major `n × n` similarity matrix; the diagonal is left at zero.
pub fn similarity_matrix<V: AsRef<[f64]>>(vectors: &[V], kind: Similarity) -> Result<Vec<f64>> {
    let n = vectors.len();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let (a, b) = (vectors[i].as_ref(), vectors[k].as_ref());
            let v = match kind {
                Similarity::Cosine => cosine_similarity(a, b)?,
                Similarity::NegSquaredEuclidean => {
                    if a.len() != b.len() {
                        return Err(Error::LengthMismatch {
                            left: a.len(),
                            right: b.len(),
                        });
                    }
                    -a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
                }
            };
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("similarity of items {i} and {k}")));
            }
            s[i * n + k] = v;
            s[k * n + i] = v;
        }
    }
    Ok(s)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Clusters the rows of an embedding set. Items are the set's usage ids.
pub fn affinity_propagation(set: &EmbeddingSet, params: &ApParams) -> Result<Clustering> {
    if set.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no embeddings for {} in period {}",
            set.lemma, set.period_id
        )));
    }
    let anonymous = affinity_propagation_on(&set.vectors, params)?;
    let exemplars = anonymous.exemplars().cloned().unwrap_or_default();
    Ok(Clustering::new(set.usage_ids.clone(), anonymous.labels().to_vec())?
        .with_exemplars(exemplars)
        .with_converged(anonymous.converged()))
}

/// Clusters plain vectors; items are named by their index.
///
/// Exact duplicate vectors are merged into one weighted item before message
/// passing: the item's similarities to others are scaled by its multiplicity
/// and its preference gains the similarities among its copies. This keeps the
/// net-similarity objective of the original problem while avoiding the
/// perfectly tied candidates that stall plain message passing.
pub fn affinity_propagation_on<V: AsRef<[f64]>>(vectors: &[V], params: &ApParams) -> Result<Clustering> {
    params.validate()?;
    let n_items = vectors.len();
    if n_items == 0 {
        return Err(Error::EmptyInput("affinity propagation over zero items".into()));
    }
    if n_items == 1 {
        return Ok(Clustering::from_labels(vec![0]).with_exemplars(BTreeMap::from([(0, 0)])));
    }
    let (mut unique, mut item_to_unique) = collapse_duplicates(vectors);
    let reps: Vec<&[f64]> = unique.iter().map(|&i| vectors[i].as_ref()).collect();
    let mut n = reps.len();
    let mut counts = vec![0usize; n];
    for &u in &item_to_unique {
        counts[u] += 1;
    }
    let mut s = similarity_matrix(&reps, params.similarity)?;
    let self_similarity = match params.similarity {
        Similarity::Cosine => {
            // Validates the norm of singleton rows as well.
            for r in &reps {
                cosine_similarity(r, r)?;
            }
            1.0
        }
        Similarity::NegSquaredEuclidean => 0.0,
    };

    let preference = match params.preference {
        Preference::Median => {
            let mut values = Vec::with_capacity(n_items * (n_items - 1));
            for i in 0..n {
                for k in 0..n {
                    let v = if i == k { self_similarity } else { s[i * n + k] };
                    let times = if i == k {
                        counts[i] * (counts[i] - 1)
                    } else {
                        counts[i] * counts[k]
                    };
                    values.extend(std::iter::repeat_n(v, times));
                }
            }
            median(values)
        }
        Preference::Value(p) => p,
    };
    if preference > self_similarity && n < n_items {
        // Copies would rather be exemplars of their own; keep them apart.
        unique = (0..n_items).collect();
        item_to_unique = unique.clone();
        n = n_items;
        counts = vec![1; n];
        s = similarity_matrix(vectors, params.similarity)?;
    }
    for i in 0..n {
        for k in 0..n {
            s[i * n + k] = if i == k {
                preference + (counts[i] - 1) as f64 * self_similarity
            } else {
                counts[i] as f64 * s[i * n + k]
            };
        }
    }

    let (exemplars, converged) = if n == 1 {
        (vec![0], true)
    } else if let Some(chosen) = trivial_exemplars(&s, n) {
        (chosen, true)
    } else {
        exemplars_by_message_passing(s.clone(), n, params)
    };

    let assign = |exemplars: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|i| match exemplars.iter().position(|&e| e == i) {
                Some(k) => k,
                None => argmax(exemplars.iter().map(|&e| s[i * n + e])),
            })
            .collect()
    };
    let mut exemplars = exemplars;
    let c = assign(&exemplars);
    for (k, ex) in exemplars.iter_mut().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&i| c[i] == k).collect();
        let best = argmax(
            members
                .iter()
                .map(|&j| members.iter().map(|&i| s[i * n + j]).sum::<f64>()),
        );
        *ex = members[best];
    }
    let c = assign(&exemplars);
    let labels: Vec<usize> = item_to_unique.iter().map(|&u| unique[exemplars[c[u]]]).collect();

    let clustering = Clustering::from_labels(labels.clone())
        .with_exemplars(labels.iter().map(|&e| (e, e)).collect())
        .with_converged(converged);
    Ok(clustering.canonicalized())
}

/// First index of each distinct vector, and the distinct slot of every item.
fn collapse_duplicates<V: AsRef<[f64]>>(vectors: &[V]) -> (Vec<usize>, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique = Vec::new();
    let slots = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let key: Vec<u64> = v.as_ref().iter().map(|x| x.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();
    (unique, slots)
}

/// Exact optimum when every off-diagonal similarity is equal, a case message
/// passing cannot resolve: each item worth more as exemplar than as member
/// becomes one, else the single best item takes everyone.
fn trivial_exemplars(s: &[f64], n: usize) -> Option<Vec<usize>> {
    let first = s[1];
    let all_equal = (0..n).all(|i| (0..n).all(|k| i == k || s[i * n + k] == first));
    if !all_equal {
        return None;
    }
    let chosen: Vec<usize> = (0..n).filter(|&k| s[k * n + k] > first).collect();
    if chosen.is_empty() {
        return Some(vec![argmax((0..n).map(|k| s[k * n + k]))]);
    }
    Some(chosen)
}

fn exemplars_by_message_passing(mut s: Vec<f64>, n: usize, params: &ApParams) -> (Vec<usize>, bool) {
    // Tiny seeded jitter removes exact ties between candidate exemplars.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for v in s.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += (f64::EPSILON * *v + f64::MIN_POSITIVE * 100.0) * z;
    }
    let (converged, (r, a)) = run(&s, n, params);
    let evidence: Vec<f64> = (0..n).map(|k| r[k * n + k] + a[k * n + k]).collect();
    let exemplars: Vec<usize> = (0..n).filter(|&k| evidence[k] > 0.0).collect();
    if exemplars.is_empty() {
        // Degenerate run: fall back to the single strongest self-evidence.
        return (vec![argmax(evidence.iter().copied())], false);
    }
    (exemplars, converged)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

type Messages = (Vec<f64>, Vec<f64>);

/// True if promoting one more item to exemplar would raise the net
/// similarity of the current assignment. Groups of near-duplicate points can
/// hold no exemplar for many iterations while their candidates stay tied; such
/// a state looks stable but is not a fixed point worth stopping at.
fn can_add_exemplar(s: &[f64], n: usize, is_exemplar: &[bool]) -> bool {
    let exemplars: Vec<usize> = (0..n).filter(|&k| is_exemplar[k]).collect();
    let current: Vec<f64> = (0..n)
        .map(|i| {
            if is_exemplar[i] {
                s[i * n + i]
            } else {
                exemplars
                    .iter()
                    .map(|&e| s[i * n + e])
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    (0..n).filter(|&j| !is_exemplar[j]).any(|j| {
        let gain: f64 = (0..n)
            .filter(|&i| i != j && !is_exemplar[i])
            .map(|i| (s[i * n + j] - current[i]).max(0.0))
            .sum();
        s[j * n + j] - current[j] + gain > 0.0
    })
}

fn run(s: &[f64], n: usize, params: &ApParams) -> (bool, Messages) {
    let lambda = params.damping;
    let mut r = vec![0.0; n * n];
    let mut a = vec![0.0; n * n];
    let window = params.convergence_iter;
    let mut history = vec![vec![false; n]; window];
    let mut positive = vec![0.0; n];

    for it in 0..params.max_iter {
        // r(i,k) ← s(i,k) − max_{k'≠k} [a(i,k') + s(i,k')]
        for i in 0..n {
            let row = i * n;
            let (mut first, mut first_k, mut second) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for k in 0..n {
                let v = a[row + k] + s[row + k];
                if v > first {
                    second = first;
                    first = v;
                    first_k = k;
                } else if v > second {
                    second = v;
                }
            }
            for k in 0..n {
                let competitor = if k == first_k { second } else { first };
                let update = s[row + k] - competitor;
                r[row + k] = lambda * r[row + k] + (1.0 - lambda) * update;
            }
        }

        // a(i,k) ← min(0, r(k,k) + Σ_{i'∉{i,k}} max(0, r(i',k))); a(k,k) ← Σ_{i'≠k} max(0, r(i',k))
        for k in 0..n {
            let mut column = r[k * n + k];
            for i in 0..n {
                if i != k {
                    positive[i] = r[i * n + k].max(0.0);
                    column += positive[i];
                }
            }
            for i in 0..n {
                let update = if i == k {
                    column - r[k * n + k]
                } else {
                    (column - positive[i]).min(0.0)
                };
                a[i * n + k] = lambda * a[i * n + k] + (1.0 - lambda) * update;
            }
        }

        let flags: Vec<bool> = (0..n).map(|k| r[k * n + k] + a[k * n + k] > 0.0).collect();
        let found = flags.iter().filter(|&&f| f).count();
        history[it % window] = flags;
        if it >= window {
            let stable = (0..n).all(|k| {
                let hits = history.iter().filter(|h| h[k]).count();
                hits == 0 || hits == window
            });
            if stable && found > 0 && !can_add_exemplar(s, n, &history[it % window]) {
                return (true, (r, a));
            }
        }
    }
    (false, (r, a))
}
