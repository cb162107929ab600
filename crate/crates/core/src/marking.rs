//! Selection of the elements to refine.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkingStrategy {
    /// Bulk criterion `Σ_{M} η̂^2 ≥ θ Σ η̂^2` with minimal cardinality.
    Doerfler,
    /// Every element with `η̂(T) ≥ γ max η̂`.
    Maximum,
}

fn check<T: Real>(eta2: &[T]) -> Result<bool> {
    let mut any = false;
    for (t, &v) in eta2.iter().enumerate() {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(input(format!("indicator of element {t} is {v}, expected finite and nonnegative")));
        }
        any |= v > T::zero();
    }
    Ok(any)
}

/// Element IDs sorted by descending indicator, ties by ascending ID.
fn ranking<T: Real>(eta2: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eta2.len()).collect();
    order.sort_by(|&a, &b| eta2[b].partial_cmp(&eta2[a]).expect("finite").then(a.cmp(&b)));
    order
}

/// Dörfler marking on squared indicators. Returns the marked IDs in ascending order;
/// the set is empty exactly when every indicator is zero (nothing left to refine).
pub fn doerfler_mark<T: Real>(eta2: &[T], theta: T) -> Result<Vec<usize>> {
    if !(theta > T::zero() && theta < T::one()) {
        return Err(input(format!("theta must lie in (0, 1), got {theta}")));
    }
    if !check(eta2)? {
        return Ok(Vec::new());
    }
    let total: T = eta2.iter().copied().sum();
    let goal = theta * total;
    let mut marked = Vec::new();
    let mut acc = T::zero();
    for t in ranking(eta2) {
        marked.push(t);
        acc += eta2[t];
        if acc >= goal {
            break;
        }
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Maximum strategy on squared indicators: marks `T` with `η̂(T) ≥ γ max η̂`.
pub fn maximum_mark<T: Real>(eta2: &[T], gamma: T) -> Result<Vec<usize>> {
    if !(gamma > T::zero() && gamma <= T::one()) {
        return Err(input(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if !check(eta2)? {
        return Ok(Vec::new());
    }
    let max = eta2.iter().copied().fold(T::zero(), T::max);
    // compare squares: η̂ ≥ γ max η̂  ⇔  η̂^2 ≥ γ^2 max η̂^2
    let bound = gamma * gamma * max;
    Ok((0..eta2.len()).filter(|&t| eta2[t] > T::zero() && eta2[t] >= bound).collect())
}

pub fn mark<T: Real>(strategy: MarkingStrategy, eta2: &[T], parameter: T) -> Result<Vec<usize>> {
    match strategy {
        MarkingStrategy::Doerfler => doerfler_mark(eta2, parameter),
        MarkingStrategy::Maximum => maximum_mark(eta2, parameter),
    }
}
