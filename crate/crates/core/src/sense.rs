//! Sense-based change scores.
//!
//! * AP+JSD clusters both periods jointly and compares how the usages of each
//!   period spread over the clusters.
//! * WiDiD clusters the periods one after the other with a-posteriori AP and
//!   averages Canberra distances between per-period sense prototypes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::clustering::{affinity_propagation_on, app_step, resolve_merges, ApParams, AppMemory};
use crate::error::{Error, Result};
use crate::form::average_pairwise_distance;
use crate::geometry::{mean_vector, DistanceKind};
use crate::model::{ChangeScore, Clustering, EmbeddingSet, Method};

/// Share of one period's usages in each cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDistribution {
    pub probs: BTreeMap<usize, f64>,
    /// Set when the period had no usages; `probs` is then all zeros.
    pub empty: bool,
}

impl ClusterDistribution {
    pub fn keys(&self) -> BTreeSet<usize> {
        self.probs.keys().copied().collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.probs.values().copied().collect()
    }
}

/// Per-period cluster distributions over a shared key set (clusters holding
/// at least one usage of either period). Items of other periods are ignored.
pub fn cluster_distributions(
    clustering: &Clustering,
    period_of: &HashMap<String, String>,
    periods: (&str, &str),
) -> Result<(ClusterDistribution, ClusterDistribution)> {
    let mut counts: [BTreeMap<usize, usize>; 2] = [BTreeMap::new(), BTreeMap::new()];
    let mut keys = BTreeSet::new();
    for (item, &label) in clustering.items().iter().zip(clustering.labels()) {
        let period = period_of
            .get(item)
            .ok_or_else(|| Error::InvalidParameter(format!("item `{item}` has no period")))?;
        let slot = if period == periods.0 {
            0
        } else if period == periods.1 {
            1
        } else {
            continue;
        };
        *counts[slot].entry(label).or_default() += 1;
        keys.insert(label);
    }
    let build = |c: &BTreeMap<usize, usize>| {
        let total: usize = c.values().sum();
        let probs = keys
            .iter()
            .map(|&k| {
                let n = c.get(&k).copied().unwrap_or(0);
                (k, if total == 0 { 0.0 } else { n as f64 / total as f64 })
            })
            .collect();
        ClusterDistribution {
            probs,
            empty: total == 0,
        }
    };
    Ok((build(&counts[0]), build(&counts[1])))
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).log2()
    }
}

/// Jensen-Shannon divergence in bits, so the value lies in `[0, 1]`.
pub fn jsd(p: &ClusterDistribution, q: &ClusterDistribution) -> Result<f64> {
    if p.empty || q.empty {
        return Err(Error::EmptyInput(
            "cluster distribution of a period without usages".into(),
        ));
    }
    if p.keys() != q.keys() {
        return Err(Error::KeyMismatch);
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (a, b) in p.probs.values().zip(q.probs.values()) {
        let m = 0.5 * (a + b);
        kl_p += kl_term(*a, m);
        kl_q += kl_term(*b, m);
    }
    Ok((0.5 * (kl_p + kl_q)).clamp(0.0, 1.0))
}

fn require_rows(set: &EmbeddingSet) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no embeddings for {} in period {}",
            set.lemma, set.period_id
        )));
    }
    Ok(())
}

/// Joint AP clustering of both periods, scored by the JSD of the period distributions.
pub fn ap_jsd(first: &EmbeddingSet, second: &EmbeddingSet, params: &ApParams) -> Result<ChangeScore> {
    require_rows(first)?;
    require_rows(second)?;
    if first.dim != second.dim {
        return Err(Error::DimMismatch {
            expected: first.dim,
            found: second.dim,
        });
    }
    let vectors: Vec<&[f64]> = first.vectors.iter().chain(&second.vectors).map(Vec::as_slice).collect();
    let joint = affinity_propagation_on(&vectors, params)?;

    // Positional item names keep the two periods apart even if ids collide.
    let tags = ["1", "2"];
    let items: Vec<String> = (0..first.len())
        .map(|i| format!("{}:{i}", tags[0]))
        .chain((0..second.len()).map(|i| format!("{}:{i}", tags[1])))
        .collect();
    let period_of: HashMap<String, String> = items.iter().map(|it| (it.clone(), it[..1].to_string())).collect();
    let clustering = Clustering::new(items, joint.labels().to_vec())?;
    let (p, q) = cluster_distributions(&clustering, &period_of, (tags[0], tags[1]))?;
    let value = jsd(&p, &q)?;
    Ok(ChangeScore::new(
        &first.lemma,
        Method::ApJsd,
        value,
        (first.period_id.clone(), second.period_id.clone()),
    )
    .with_detail("clusters", joint.cluster_count() as f64)
    .with_detail("converged", f64::from(u8::from(joint.converged()))))
}

/// Mean vector of this period's members of each cluster, in ascending
/// cluster-id order. Clusters without members from `set` are skipped.
pub fn sense_prototypes(clustering: &Clustering, set: &EmbeddingSet) -> Result<Vec<Vec<f64>>> {
    require_rows(set)?;
    let labels = clustering.label_map();
    let mut groups: BTreeMap<usize, Vec<&[f64]>> = BTreeMap::new();
    for (id, v) in set.rows() {
        let k = *labels.get(id).ok_or_else(|| Error::Unassigned(id.to_string()))?;
        groups.entry(k).or_default().push(v);
    }
    groups.values().map(|members| mean_vector(members)).collect()
}

/// WiDiD: incremental clustering of the two periods in chronological order,
/// then APD with Canberra distance over the per-period sense prototypes.
pub fn widid(first: &EmbeddingSet, second: &EmbeddingSet, params: &ApParams) -> Result<ChangeScore> {
    require_rows(first)?;
    require_rows(second)?;
    let step1 = app_step(&AppMemory::new(), first, params)?;
    let step2 = app_step(&step1.memory, second, params)?;

    let relabelled: Vec<usize> = step1
        .clustering
        .labels()
        .iter()
        .map(|&l| resolve_merges(l, &step2.merges))
        .collect();
    let first_final = Clustering::new(first.usage_ids.clone(), relabelled)?;
    let psi1 = sense_prototypes(&first_final, first)?;
    let psi2 = sense_prototypes(&step2.clustering, second)?;
    let value = average_pairwise_distance(&psi1, &psi2, DistanceKind::Canberra)?;
    let converged = step1.clustering.converged() && step2.clustering.converged();
    Ok(ChangeScore::new(
        &first.lemma,
        Method::Widid,
        value,
        (first.period_id.clone(), second.period_id.clone()),
    )
    .with_detail("clusters", step2.memory.entries().len() as f64)
    .with_detail("prototypes_first", psi1.len() as f64)
    .with_detail("prototypes_second", psi2.len() as f64)
    .with_detail("converged", f64::from(u8::from(converged))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dist(values: &[f64]) -> ClusterDistribution {
        ClusterDistribution {
            probs: values.iter().copied().enumerate().collect(),
            empty: false,
        }
    }

    fn items_with_periods(periods: &[&str]) -> (Vec<String>, HashMap<String, String>) {
        let items: Vec<String> = (0..periods.len()).map(|i| format!("u{i}")).collect();
        let map = items
            .iter()
            .cloned()
            .zip(periods.iter().map(|p| p.to_string()))
            .collect();
        (items, map)
    }

    #[test]
    fn distribution_examples() {
        let (items, map) = items_with_periods(&["C1", "C1", "C2", "C2"]);
        let c = Clustering::new(items.clone(), vec![0, 0, 1, 1]).unwrap();
        let (p, q) = cluster_distributions(&c, &map, ("C1", "C2")).unwrap();
        assert_eq!(p.values(), vec![1.0, 0.0]);
        assert_eq!(q.values(), vec![0.0, 1.0]);

        let c = Clustering::new(items, vec![0, 1, 0, 1]).unwrap();
        let (p, q) = cluster_distributions(&c, &map, ("C1", "C2")).unwrap();
        assert_eq!(p.values(), vec![0.5, 0.5]);
        assert_eq!(p, q);

        let (items, map) = items_with_periods(&["C1", "C1", "C1", "C1", "C2", "C2"]);
        let c = Clustering::new(items, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let (p, q) = cluster_distributions(&c, &map, ("C1", "C2")).unwrap();
        assert_eq!(p.values(), vec![0.75, 0.25]);
        assert_eq!(q.values(), vec![0.0, 1.0]);
    }

    #[test]
    fn empty_period_is_flagged() {
        let (items, map) = items_with_periods(&["C1", "C1"]);
        let c = Clustering::new(items, vec![0, 1]).unwrap();
        let (p, q) = cluster_distributions(&c, &map, ("C1", "C2")).unwrap();
        assert!(!p.empty);
        assert!(q.empty);
        assert!(matches!(jsd(&p, &q), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn jsd_examples() {
        assert_eq!(jsd(&dist(&[0.3, 0.7]), &dist(&[0.3, 0.7])).unwrap(), 0.0);
        assert_eq!(jsd(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 1.0);
        // M = (0.75, 0.25); ½[0.5·log2(0.5/0.75) + 0.5·log2(0.5/0.25) + log2(1/0.75)]
        let expected = 0.5 * (0.5 * (0.5f64 / 0.75).log2() + 0.5 * 2f64.log2() + (1.0f64 / 0.75).log2());
        let got = jsd(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.31127812445913283, epsilon = 1e-12);
    }

    #[test]
    fn jsd_rejects_mismatched_keys() {
        let mut q = dist(&[0.5, 0.5]);
        q.probs = BTreeMap::from([(0, 0.5), (7, 0.5)]);
        assert!(matches!(jsd(&dist(&[0.5, 0.5]), &q), Err(Error::KeyMismatch)));
    }

    fn set(period: &str, rows: Vec<Vec<f64>>) -> EmbeddingSet {
        let ids = (0..rows.len()).map(|i| format!("{period}-{i}")).collect();
        EmbeddingSet::new("w", period, rows[0].len(), "12", ids, rows).unwrap()
    }

    fn tight(center: [f64; 2], n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                vec![center[0] + 0.01 * (1.7 * t).sin(), center[1] + 0.01 * (2.3 * t).cos()]
            })
            .collect()
    }

    #[test]
    fn ap_jsd_examples() {
        let cloud = {
            let mut r = tight([10.0, 1.0], 4);
            r.extend(tight([1.0, 10.0], 4));
            r
        };
        let p = ApParams::default();
        assert_eq!(
            ap_jsd(&set("C1", cloud.clone()), &set("C2", cloud), &p).unwrap().value,
            0.0
        );

        let a = set("C1", tight([10.0, 0.0], 5));
        let b = set("C2", tight([0.0, 10.0], 5));
        let s = ap_jsd(&a, &b, &p).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.details["clusters"], 2.0);

        let one = set("C1", vec![vec![1.0, 2.0]]);
        assert_eq!(ap_jsd(&one, &set("C2", vec![vec![1.0, 2.0]]), &p).unwrap().value, 0.0);
    }

    #[test]
    fn sense_prototype_examples() {
        let s = set("C1", vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let c = Clustering::new(s.usage_ids.clone(), vec![0, 0]).unwrap();
        assert_eq!(sense_prototypes(&c, &s).unwrap(), vec![vec![1.0, 1.0]]);

        let s = set("C1", vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut items = s.usage_ids.clone();
        items.push("other-period".into());
        let c = Clustering::new(items, vec![3, 1, 9]).unwrap();
        // Cluster 9 only has a member from another period and is skipped.
        assert_eq!(sense_prototypes(&c, &s).unwrap(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn sense_prototypes_require_assignment() {
        let s = set("C1", vec![vec![1.0, 0.0]]);
        let c = Clustering::new(vec!["x".into()], vec![0]).unwrap();
        assert!(matches!(sense_prototypes(&c, &s), Err(Error::Unassigned(_))));
    }

    #[test]
    fn widid_examples() {
        let p = ApParams::default();
        let v = set("C1", vec![vec![1.0, 2.0]]);
        assert_eq!(widid(&v, &set("C2", vec![vec![1.0, 2.0]]), &p).unwrap().value, 0.0);

        let a = set("C1", vec![vec![1.0, 0.0]; 3]);
        let b = set("C2", vec![vec![0.0, 1.0]; 3]);
        assert_eq!(widid(&a, &b, &p).unwrap().value, 2.0);

        let near_a = set(
            "C1",
            vec![vec![1.0 + 1e-3, 1e-3], vec![1.0, 2e-3], vec![1.0 + 2e-3, 1e-3]],
        );
        let near_b = set(
            "C2",
            vec![vec![1e-3, 1.0], vec![2e-3, 1.0 + 1e-3], vec![1e-3, 1.0 + 2e-3]],
        );
        let s = widid(&near_a, &near_b, &p).unwrap();
        assert!((s.value - 2.0).abs() < 0.01, "{}", s.value);

        let two = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]];
        let s = widid(&set("C1", two.clone()), &set("C2", two), &p).unwrap();
        assert_eq!(s.value, 1.0);
        assert_eq!(s.details["prototypes_first"], 2.0);
    }

    #[test]
    fn widid_of_period_against_itself_matches_its_own_prototypes() {
        let mut rows = tight([10.0, 1.0], 5);
        rows.extend(tight([1.0, 10.0], 5));
        let s = widid(&set("C1", rows.clone()), &set("C2", rows.clone()), &ApParams::default()).unwrap();
        assert_eq!(s.details["prototypes_first"], 2.0);
        assert_eq!(s.details["prototypes_second"], 2.0);
        let a = mean_vector(&rows[..5]).unwrap();
        let b = mean_vector(&rows[5..]).unwrap();
        let psi = [a, b];
        let expected = average_pairwise_distance(&psi, &psi, DistanceKind::Canberra).unwrap();
        assert!((s.value - expected).abs() < 1e-12);

        let one = vec![vec![0.3, 0.7]; 4];
        let s = widid(&set("C1", one.clone()), &set("C2", one), &ApParams::default()).unwrap();
        assert_eq!(s.value, 0.0);
    }

    fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_filter_map("non-zero mass", |v| {
            let total: f64 = v.iter().sum();
            (total > 1e-6).then(|| v.iter().map(|x| x / total).collect())
        })
    }

    proptest! {
        #[test]
        fn jsd_is_symmetric_and_bounded(p in distribution(5), q in distribution(5)) {
            let (p, q) = (dist(&p), dist(&q));
            let a = jsd(&p, &q).unwrap();
            prop_assert_eq!(a, jsd(&q, &p).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(jsd(&p, &p).unwrap().abs() < 1e-12);
        }

        #[test]
        fn relabelling_clusters_keeps_jsd(labels in prop::collection::vec(0usize..4, 2..30), shift in 1usize..50) {
            let periods: Vec<&str> = (0..labels.len()).map(|i| if i % 2 == 0 { "C1" } else { "C2" }).collect();
            let (items, map) = items_with_periods(&periods);
            let a = Clustering::new(items.clone(), labels.clone()).unwrap();
            let b = Clustering::new(items, labels.iter().map(|l| (l * 7 + shift) % 97).collect()).unwrap();
            let (p1, q1) = cluster_distributions(&a, &map, ("C1", "C2")).unwrap();
            let (p2, q2) = cluster_distributions(&b, &map, ("C1", "C2")).unwrap();
            prop_assert!((jsd(&p1, &q1).unwrap() - jsd(&p2, &q2).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn sqrt_jsd_triangle_inequality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let v: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 1e-9).collect();
            let t: f64 = v.iter().sum();
            dist(&v.iter().map(|x| x / t).collect::<Vec<_>>())
        };
        for _ in 0..1000 {
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let d = |x: &ClusterDistribution, y: &ClusterDistribution| jsd(x, y).unwrap().sqrt();
            assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        }
    }
}
