//! Embedding vectors and nearest-neighbour ranking, generic over the float
//! type. The crate root exposes `f64` and `f32` aliases.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::frames::FrameId;

/// Float types usable for embeddings and scores.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Sum + Debug + Send + Sync + 'static {}

/// An L2-normalised embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    /// Normalises `values` to unit length. Returns `None` for empty or zero
    /// vectors.
    pub fn normalized(values: Vec<T>) -> Option<Self> {
        let norm = values.iter().map(|&v| v * v).sum::<T>().sqrt();
        if values.is_empty() || norm <= T::zero() || !norm.is_finite() {
            return None;
        }
        Some(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Cosine similarity, clamped into `[-1, 1]`.
    pub fn cosine(&self, other: &Self) -> T {
        cosine(&self.values, &other.values)
    }

    pub fn cast<U: Scalar>(&self) -> Embedding<U> {
        Embedding {
            values: self
                .values
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap_or(0.0)).unwrap_or_else(U::zero))
                .collect(),
        }
    }
}

/// Cosine similarity of two vectors; zero when either has zero length or the
/// dimensions disagree.
pub fn cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    if a.len() != b.len() || a.is_empty() {
        return T::zero();
    }
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    if na <= T::zero() || nb <= T::zero() {
        return T::zero();
    }
    (dot / (na * nb)).max(-T::one()).min(T::one())
}

/// A scored candidate frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored<T> {
    pub id: FrameId,
    pub score: T,
}

/// Highest-scoring `k` ids, returned in ascending id order. Equal scores are
/// ranked by ascending id; NaN scores rank last.
pub fn top_k_ascending<T: Scalar>(candidates: &[Scored<T>], k: usize) -> Vec<FrameId> {
    let mut ranked: Vec<Scored<T>> = candidates.to_vec();
    ranked.sort_by(|a, b| compare_desc(a.score, b.score).then(a.id.cmp(&b.id)));
    let mut ids: Vec<FrameId> = ranked.into_iter().take(k).map(|s| s.id).collect();
    ids.sort_unstable();
    ids
}

fn compare_desc<T: Scalar>(a: T, b: T) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.partial_cmp(&a).unwrap_or(Ordering::Equal),
    }
}
