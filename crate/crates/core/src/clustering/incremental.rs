//! A-posteriori affinity propagation: clusters evolve across time steps while
//! keeping their identities.
//!
//! Memory holds one `(prototype, count)` pair per cluster. A step clusters the
//! memorized prototypes together with the new period's vectors. A resulting
//! cluster that swallowed old prototypes inherits the smallest of their ids and
//! the others are merged into it; clusters without old prototypes get fresh ids
//! that are never reused.

use std::collections::BTreeMap;

use crate::clustering::affinity::{affinity_propagation_on, ApParams};
use crate::error::{Error, Result};
use crate::model::{Clustering, EmbeddingSet};

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub cluster_id: usize,
    pub prototype: Vec<f64>,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AppMemory {
    entries: Vec<MemoryEntry>,
    step: usize,
    next_id: usize,
}

impl AppMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Memory seeded with existing clusters, e.g. from an earlier run.
    pub fn from_entries(mut entries: Vec<MemoryEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.cluster_id);
        if entries.windows(2).any(|w| w[0].cluster_id == w[1].cluster_id) {
            return Err(Error::InvalidParameter("duplicate cluster id in memory".into()));
        }
        if entries.iter().any(|e| e.member_count == 0) {
            return Err(Error::InvalidParameter("memory entry with zero members".into()));
        }
        if let Some(first) = entries.first() {
            let dim = first.prototype.len();
            if let Some(e) = entries.iter().find(|e| e.prototype.len() != dim) {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: e.prototype.len(),
                });
            }
        }
        let next_id = entries.last().map_or(0, |e| e.cluster_id + 1);
        Ok(AppMemory {
            entries,
            step: 0,
            next_id,
        })
    }

    /// Entries in ascending cluster-id order.
    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.prototype.len())
    }

    pub fn cluster_ids(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.cluster_id).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AppStep {
    /// Assignment of the step's usages to persistent cluster ids.
    pub clustering: Clustering,
    pub memory: AppMemory,
    /// Old cluster id → id it was merged into during this step.
    pub merges: BTreeMap<usize, usize>,
}

/// Follows merge links until reaching a surviving id.
pub fn resolve_merges(id: usize, merges: &BTreeMap<usize, usize>) -> usize {
    let mut id = id;
    while let Some(&next) = merges.get(&id) {
        if next == id {
            break;
        }
        id = next;
    }
    id
}

pub fn app_step(memory: &AppMemory, set: &EmbeddingSet, params: &ApParams) -> Result<AppStep> {
    if let Some(dim) = memory.dim() {
        if dim != set.dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: set.dim,
            });
        }
    }
    if set.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no embeddings for {} in period {}",
            set.lemma, set.period_id
        )));
    }

    let old = memory.entries.len();
    let points: Vec<&[f64]> = memory
        .entries
        .iter()
        .map(|e| e.prototype.as_slice())
        .chain(set.vectors.iter().map(Vec::as_slice))
        .collect();
    let joint = affinity_propagation_on(&points, params)?;

    let mut next_id = memory.next_id;
    let mut merges = BTreeMap::new();
    let mut entries = Vec::new();
    let mut assigned = vec![0usize; set.len()];
    for k in 0..joint.cluster_count() {
        let members = joint.members(k);
        let (olds, news): (Vec<usize>, Vec<usize>) = members.into_iter().partition(|&p| p < old);
        let id = match olds.iter().map(|&p| memory.entries[p].cluster_id).min() {
            Some(id) => {
                for &p in &olds {
                    let other = memory.entries[p].cluster_id;
                    if other != id {
                        merges.insert(other, id);
                    }
                }
                id
            }
            None => {
                next_id += 1;
                next_id - 1
            }
        };
        for &p in &news {
            assigned[p - old] = id;
        }
        entries.push(if olds.len() == 1 && news.is_empty() {
            memory.entries[olds[0]].clone()
        } else {
            let mut sum = vec![0.0; set.dim];
            let mut count = 0;
            for &p in &olds {
                let e = &memory.entries[p];
                for (s, x) in sum.iter_mut().zip(&e.prototype) {
                    *s += x * e.member_count as f64;
                }
                count += e.member_count;
            }
            for &p in &news {
                for (s, x) in sum.iter_mut().zip(points[p]) {
                    *s += x;
                }
                count += 1;
            }
            sum.iter_mut().for_each(|s| *s /= count as f64);
            MemoryEntry {
                cluster_id: id,
                prototype: sum,
                member_count: count,
            }
        });
    }
    entries.sort_by_key(|e| e.cluster_id);

    let clustering = Clustering::new(set.usage_ids.clone(), assigned)?.with_converged(joint.converged());
    Ok(AppStep {
        clustering,
        memory: AppMemory {
            entries,
            step: memory.step + 1,
            next_id,
        },
        merges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::affinity::affinity_propagation;
    use approx::assert_abs_diff_eq;

    fn set(period: &str, rows: Vec<Vec<f64>>) -> EmbeddingSet {
        let ids = (0..rows.len()).map(|i| format!("{period}-{i}")).collect();
        EmbeddingSet::new("w", period, rows[0].len(), "12", ids, rows).unwrap()
    }

    fn near(center: [f64; 2], n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let t = i as f64 * 0.002;
                vec![center[0] + t, center[1] + 0.5 * t]
            })
            .collect()
    }

    #[test]
    fn empty_memory_reduces_to_plain_ap() {
        let mut rows = near([10.0, 1.0], 5);
        rows.extend(near([1.0, 10.0], 5));
        let s = set("C1", rows);
        let params = ApParams::default();
        let step = app_step(&AppMemory::new(), &s, &params).unwrap();
        let plain = affinity_propagation(&s, &params).unwrap();
        assert_eq!(step.clustering.labels(), plain.labels());
        assert_eq!(step.memory.cluster_ids(), vec![0, 1]);
        assert_eq!(step.memory.entries()[0].member_count, 5);
        assert_eq!(step.memory.step(), 1);
        assert!(step.merges.is_empty());
    }

    #[test]
    fn new_points_join_memorized_cluster() {
        let memory = AppMemory::from_entries(vec![MemoryEntry {
            cluster_id: 0,
            prototype: vec![1.0, 0.0],
            member_count: 5,
        }])
        .unwrap();
        // Points on the ray through (1, 0): cosine-identical to the prototype.
        let rows: Vec<Vec<f64>> = [0.9, 0.95, 1.05, 1.1, 1.2].iter().map(|&x| vec![x, 0.0]).collect();
        let s = set("C2", rows.clone());
        let step = app_step(&memory, &s, &ApParams::default()).unwrap();
        assert_eq!(step.clustering.labels(), &[0, 0, 0, 0, 0]);
        let e = &step.memory.entries()[0];
        assert_eq!(e.member_count, 10);
        // Weighted mean: (5·(1,0) + Σ rows) / 10.
        let expected_x = (5.0 + rows.iter().map(|r| r[0]).sum::<f64>()) / 10.0;
        assert_abs_diff_eq!(e.prototype[0], expected_x, epsilon = 1e-12);
        assert_eq!(e.prototype[1], 0.0);
    }

    #[test]
    fn absorbing_cluster_inherits_smallest_id() {
        let memory = AppMemory::from_entries(vec![
            MemoryEntry {
                cluster_id: 0,
                prototype: vec![1.0, 0.0],
                member_count: 1,
            },
            MemoryEntry {
                cluster_id: 1,
                prototype: vec![0.0, 1.0],
                member_count: 1,
            },
        ])
        .unwrap();
        // Points around (0.7, 0.7) are far more similar to each other and to
        // both prototypes than the prototypes are to one another; a low
        // preference yields one exemplar among them.
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![0.7 + 0.001 * i as f64, 0.7]).collect();
        let params = ApParams {
            preference: crate::clustering::Preference::Value(-1.0),
            ..ApParams::default()
        };
        let step = app_step(&memory, &set("C2", rows), &params).unwrap();
        assert_eq!(step.clustering.labels(), &[0; 6]);
        assert_eq!(step.memory.cluster_ids(), vec![0]);
        assert_eq!(step.merges, BTreeMap::from([(1, 0)]));
        assert_eq!(step.memory.entries()[0].member_count, 8);
    }

    #[test]
    fn fresh_ids_are_not_reused_after_merges() {
        let memory = AppMemory::from_entries(vec![MemoryEntry {
            cluster_id: 4,
            prototype: vec![1.0, 0.0],
            member_count: 2,
        }])
        .unwrap();
        let mut rows = near([10.0, 0.5], 4);
        rows.extend(near([0.5, 10.0], 4));
        let step = app_step(&memory, &set("C2", rows), &ApParams::default()).unwrap();
        assert_eq!(step.memory.cluster_ids(), vec![4, 5]);
        assert_eq!(step.clustering.labels(), &[4, 4, 4, 4, 5, 5, 5, 5]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let memory = AppMemory::from_entries(vec![MemoryEntry {
            cluster_id: 0,
            prototype: vec![1.0, 0.0, 0.0],
            member_count: 1,
        }])
        .unwrap();
        assert!(matches!(
            app_step(&memory, &set("C2", vec![vec![1.0, 0.0]]), &ApParams::default()),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn merge_chains_resolve() {
        let merges = BTreeMap::from([(3, 1), (1, 0)]);
        assert_eq!(resolve_merges(3, &merges), 0);
        assert_eq!(resolve_merges(2, &merges), 2);
    }
}
