//! Form-based change scores: average pairwise distance (APD) and prototype
//! distance (PRT).

use crate::error::{Error, Result};
use crate::geometry::{cosine_distance, prototype, DistanceKind};
use crate::model::{ChangeScore, EmbeddingSet, Method};

/// Mean of `d(a, b)` over all `a ∈ first`, `b ∈ second`, accumulated row-major.
pub fn average_pairwise_distance<A, B>(first: &[A], second: &[B], kind: DistanceKind) -> Result<f64>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if first.is_empty() || second.is_empty() {
        return Err(Error::EmptyInput("average pairwise distance over an empty set".into()));
    }
    let mut total = 0.0;
    for a in first {
        for b in second {
            total += kind.distance(a.as_ref(), b.as_ref())?;
        }
    }
    Ok(total / (first.len() as f64 * second.len() as f64))
}

fn check_pair(first: &EmbeddingSet, second: &EmbeddingSet) -> Result<()> {
    for s in [first, second] {
        if s.is_empty() {
            return Err(Error::EmptyInput(format!(
                "no embeddings for {} in period {}",
                s.lemma, s.period_id
            )));
        }
    }
    if first.dim != second.dim {
        return Err(Error::DimMismatch {
            expected: first.dim,
            found: second.dim,
        });
    }
    Ok(())
}

fn periods(first: &EmbeddingSet, second: &EmbeddingSet) -> (String, String) {
    (first.period_id.clone(), second.period_id.clone())
}

pub fn apd(first: &EmbeddingSet, second: &EmbeddingSet, kind: DistanceKind) -> Result<ChangeScore> {
    check_pair(first, second)?;
    let value = average_pairwise_distance(&first.vectors, &second.vectors, kind)?;
    Ok(ChangeScore::new(
        &first.lemma,
        Method::Apd,
        value,
        periods(first, second),
    ))
}

pub fn prt(first: &EmbeddingSet, second: &EmbeddingSet) -> Result<ChangeScore> {
    check_pair(first, second)?;
    let value = cosine_distance(&prototype(first)?, &prototype(second)?)?;
    Ok(ChangeScore::new(
        &first.lemma,
        Method::Prt,
        value,
        periods(first, second),
    ))
}
