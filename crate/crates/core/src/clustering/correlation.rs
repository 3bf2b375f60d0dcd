//! Weighted correlation clustering of usage graphs.
//!
//! An edge of weight `w` pulls its endpoints together when `w > τ` and pushes
//! them apart when `w < τ`. The loss of a partition is
//!
//! ```text
//! Σ_{within-cluster edges} max(0, τ − w) + Σ_{cross-cluster edges} max(0, w − τ)
//! ```
//!
//! Partitions are normalised so that every cluster is connected through graph
//! edges: splitting a cluster along a missing edge never changes the loss, and
//! it keeps unrelated usages (in particular isolated nodes) apart.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Clustering, UsageGraph};

/// Largest graph the exhaustive oracle accepts.
pub const MAX_EXACT_NODES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrParams {
    /// Weights above the threshold attract, weights below repel.
    pub threshold: f64,
    pub restarts: usize,
    pub max_moves: usize,
    pub seed: u64,
    /// Graphs with at most this many nodes are solved exactly.
    pub exact_below: usize,
}

impl Default for CorrParams {
    fn default() -> Self {
        CorrParams {
            threshold: 2.5,
            restarts: 30,
            max_moves: 100_000,
            seed: 0,
            exact_below: 10,
        }
    }
}

impl CorrParams {
    /// Checks the threshold against the judgment scale `[lo, hi]` in use.
    pub fn validate(&self, scale: (f64, f64)) -> Result<()> {
        if !self.threshold.is_finite() || self.threshold < scale.0 || self.threshold > scale.1 {
            return Err(Error::InvalidParameter(format!(
                "threshold {} outside the judgment scale [{}, {}]",
                self.threshold, scale.0, scale.1
            )));
        }
        if self.restarts == 0 || self.max_moves == 0 {
            return Err(Error::InvalidParameter(
                "restarts and max_moves must be positive".into(),
            ));
        }
        if self.exact_below > MAX_EXACT_NODES {
            return Err(Error::InvalidParameter(format!(
                "exact_below {} exceeds {MAX_EXACT_NODES}",
                self.exact_below
            )));
        }
        Ok(())
    }
}

struct Problem {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    /// Per node: `(neighbour, τ − w)`.
    adjacency: Vec<Vec<(usize, f64)>>,
    threshold: f64,
}

impl Problem {
    fn new(graph: &UsageGraph, threshold: f64) -> Self {
        let n = graph.node_count();
        let edges = graph.weighted_edges();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in &edges {
            adjacency[i].push((j, threshold - w));
            adjacency[j].push((i, threshold - w));
        }
        Problem {
            n,
            edges,
            adjacency,
            threshold,
        }
    }

    fn loss(&self, labels: &[usize]) -> f64 {
        edge_loss(&self.edges, labels, self.threshold)
    }

    /// Splits every cluster into its edge-connected pieces and relabels by
    /// first appearance.
    fn normalise(&self, labels: &[usize]) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(i, j, _) in &self.edges {
            if labels[i] == labels[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut ids = HashMap::new();
        (0..self.n)
            .map(|v| {
                let root = find(&mut parent, v);
                let next = ids.len();
                *ids.entry(root).or_insert(next)
            })
            .collect()
    }
}

fn edge_loss(edges: &[(usize, usize, f64)], labels: &[usize], threshold: f64) -> f64 {
    edges
        .iter()
        .map(|&(i, j, w)| {
            if labels[i] == labels[j] {
                (threshold - w).max(0.0)
            } else {
                (w - threshold).max(0.0)
            }
        })
        .sum()
}

fn tolerance(reference: f64) -> f64 {
    1e-12 * (1.0 + reference.abs())
}

/// A scored, normalised partition.
#[derive(Debug, Clone)]
struct Candidate {
    loss: f64,
    clusters: usize,
    labels: Vec<usize>,
}

impl Candidate {
    fn from_labels(problem: &Problem, labels: &[usize]) -> Self {
        let labels = problem.normalise(labels);
        Candidate {
            loss: problem.loss(&labels),
            clusters: labels.iter().max().map_or(0, |m| m + 1),
            labels,
        }
    }

    /// Lower loss first, then fewer clusters, then the lexicographically
    /// smaller canonical assignment.
    fn better_than(&self, other: &Candidate) -> bool {
        if self.loss < other.loss - tolerance(other.loss) {
            return true;
        }
        if self.loss > other.loss + tolerance(other.loss) {
            return false;
        }
        match self.clusters.cmp(&other.clusters) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.labels < other.labels,
        }
    }
}

fn check_assignment(graph: &UsageGraph, clustering: &Clustering) -> Result<Vec<usize>> {
    let map = clustering.label_map();
    graph
        .nodes()
        .iter()
        .map(|u| {
            map.get(u.usage_id.as_str())
                .copied()
                .ok_or_else(|| Error::Unassigned(u.usage_id.clone()))
        })
        .collect()
}

pub fn correlation_loss(graph: &UsageGraph, clustering: &Clustering, threshold: f64) -> Result<f64> {
    let labels = check_assignment(graph, clustering)?;
    Ok(edge_loss(&graph.weighted_edges(), &labels, threshold))
}

fn to_clustering(graph: &UsageGraph, labels: Vec<usize>) -> Result<Clustering> {
    Clustering::new(graph.node_ids(), labels)
}

/// Exhaustive minimum-loss partition, for graphs of at most [`MAX_EXACT_NODES`] nodes.
pub fn brute_force_correlation_cluster(graph: &UsageGraph, threshold: f64) -> Result<Clustering> {
    if graph.node_count() > MAX_EXACT_NODES {
        return Err(Error::TooManyNodes {
            nodes: graph.node_count(),
            max: MAX_EXACT_NODES,
        });
    }
    let problem = Problem::new(graph, threshold);
    let best = exhaustive(&problem);
    to_clustering(graph, best.labels)
}

fn exhaustive(problem: &Problem) -> Candidate {
    let n = problem.n;
    if n == 0 {
        return Candidate {
            loss: 0.0,
            clusters: 0,
            labels: Vec::new(),
        };
    }
    // Only edges towards earlier nodes are charged when a node is placed, so
    // the running sum is a lower bound on every completion.
    let earlier: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|v| problem.adjacency[v].iter().copied().filter(|&(u, _)| u < v).collect())
        .collect();

    struct Search<'a> {
        problem: &'a Problem,
        earlier: Vec<Vec<(usize, f64)>>,
        labels: Vec<usize>,
        best: Option<Candidate>,
    }

    impl Search<'_> {
        fn bound(&self) -> f64 {
            self.best.as_ref().map_or(f64::INFINITY, |b| b.loss + tolerance(b.loss))
        }

        fn visit(&mut self, v: usize, used: usize, partial: f64) {
            if partial > self.bound() {
                return;
            }
            if v == self.problem.n {
                let candidate = Candidate::from_labels(self.problem, &self.labels);
                if self.best.as_ref().is_none_or(|b| candidate.better_than(b)) {
                    self.best = Some(candidate);
                }
                return;
            }
            for k in 0..=used {
                let mut cost = partial;
                for &(u, slack) in &self.earlier[v] {
                    // slack = τ − w
                    cost += if self.labels[u] == k {
                        slack.max(0.0)
                    } else {
                        (-slack).max(0.0)
                    };
                }
                self.labels[v] = k;
                self.visit(v + 1, used.max(k + 1), cost);
            }
        }
    }

    let mut search = Search {
        problem,
        earlier,
        labels: vec![0; n],
        best: None,
    };
    search.visit(0, 0, 0.0);
    search.best.expect("at least one partition exists")
}

/// Correlation clustering: exact for small graphs, multi-start local search otherwise.
///
/// The local search starts from all-singletons, from one cluster and, per
/// restart, from a random balanced two-way cut; each start is improved by
/// greedy best single-node moves until no move lowers the loss.
pub fn correlation_cluster(graph: &UsageGraph, params: &CorrParams) -> Result<Clustering> {
    if graph.node_count() == 0 {
        return Err(Error::EmptyInput(format!(
            "usage graph of {} has no nodes",
            graph.lemma()
        )));
    }
    let problem = Problem::new(graph, params.threshold);
    if graph.node_count() <= params.exact_below.min(MAX_EXACT_NODES) {
        return to_clustering(graph, exhaustive(&problem).labels);
    }
    let best = local_search_restarts(&problem, params);
    to_clustering(graph, best.labels)
}

fn local_search_restarts(problem: &Problem, params: &CorrParams) -> Candidate {
    let n = problem.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut starts: Vec<Vec<usize>> = vec![(0..n).collect(), vec![0; n]];
    let mut order: Vec<usize> = (0..n).collect();
    for r in 0..params.restarts {
        if r % 2 == 0 {
            order.shuffle(&mut rng);
            let mut labels = vec![0; n];
            for &v in &order[n.div_ceil(2)..] {
                labels[v] = 1;
            }
            starts.push(labels);
        } else {
            let k = 2 + (r / 2) % 3;
            starts.push((0..n).map(|_| rng.random_range(0..k.min(n))).collect());
        }
    }

    let mut best: Option<Candidate> = None;
    for start in starts {
        let labels = improve(problem, start, params.max_moves);
        let candidate = Candidate::from_labels(problem, &labels);
        if best.as_ref().is_none_or(|b| candidate.better_than(b)) {
            best = Some(candidate);
        }
    }
    best.expect("at least one start")
}

/// Alternates single-node moves with whole-cluster merges until neither
/// lowers the loss or the move budget runs out.
fn improve(problem: &Problem, labels: Vec<usize>, max_moves: usize) -> Vec<usize> {
    let mut budget = max_moves;
    let mut labels = labels;
    loop {
        let (moved, used) = greedy_moves(problem, labels, budget);
        labels = moved;
        budget = budget.saturating_sub(used);
        if budget == 0 || !merge_best_pair(problem, &mut labels) {
            return labels;
        }
        budget -= 1;
    }
}

/// Merges the two clusters whose union lowers the loss the most, if any.
/// Merging `a` and `b` changes the loss by the summed slack of the edges between them.
fn merge_best_pair(problem: &Problem, labels: &mut [usize]) -> bool {
    let mut between: HashMap<(usize, usize), f64> = HashMap::new();
    for &(u, v, w) in &problem.edges {
        let (a, b) = (labels[u], labels[v]);
        if a != b {
            *between.entry((a.min(b), a.max(b))).or_insert(0.0) += problem.threshold - w;
        }
    }
    let best = between
        .into_iter()
        .filter(|&(_, delta)| delta < -tolerance(delta))
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let Some(((a, b), _)) = best else { return false };
    for l in labels.iter_mut() {
        if *l == b {
            *l = a;
        }
    }
    true
}

/// Repeatedly applies the single-node move with the largest loss decrease.
///
/// Moving `v` from cluster `a` to `b` changes the loss by `g(b) − g(a)` where
/// `g(c) = Σ_{u ∈ c, u ~ v} (τ − w(u, v))`; a fresh cluster has `g = 0`.
fn greedy_moves(problem: &Problem, mut labels: Vec<usize>, max_moves: usize) -> (Vec<usize>, usize) {
    let n = problem.n;
    // Labels live in 0..n; track sizes so an empty label is always available.
    let mut sizes = vec![0usize; n];
    for &l in &labels {
        sizes[l] += 1;
    }
    let mut gains: HashMap<usize, f64> = HashMap::new();
    for used in 0..max_moves {
        let mut best: Option<(f64, usize, usize)> = None;
        for v in 0..n {
            gains.clear();
            for &(u, slack) in &problem.adjacency[v] {
                *gains.entry(labels[u]).or_insert(0.0) += slack;
            }
            let here = gains.get(&labels[v]).copied().unwrap_or(0.0);
            let mut target: Option<(f64, usize)> = None;
            let mut consider = |g: f64, c: usize| {
                if target.is_none_or(|(tg, tc)| g < tg || (g == tg && c < tc)) {
                    target = Some((g, c));
                }
            };
            for (&c, &g) in &gains {
                if c != labels[v] {
                    consider(g, c);
                }
            }
            if sizes[labels[v]] > 1 {
                let fresh = sizes.iter().position(|&s| s == 0).expect("fewer clusters than nodes");
                consider(0.0, fresh);
            }
            if let Some((g, c)) = target {
                let delta = g - here;
                if delta < -tolerance(here) && best.is_none_or(|(bd, _, _)| delta < bd) {
                    best = Some((delta, v, c));
                }
            }
        }
        let Some((_, v, c)) = best else { return (labels, used) };
        sizes[labels[v]] -= 1;
        sizes[c] += 1;
        labels[v] = c;
    }
    (labels, max_moves)
}
