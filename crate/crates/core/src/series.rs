//! Infinite sums evaluated as a partial sum plus an explicit geometric tail bound.

use serde::Serialize;

use crate::error::{Result, TreeError};
use crate::scalar::Scalar;

/// A truncated series: `value` is the partial sum, the exact sum lies within
/// `tail_bound` of it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Truncated<T> {
    pub value: T,
    pub tail_bound: T,
    /// Number of terms summed.
    pub terms: usize,
}

impl<T: Scalar> Truncated<T> {
    pub fn exact(value: T) -> Self {
        Truncated { value, tail_bound: T::zero(), terms: 0 }
    }

    /// True when `x` lies in `[value - tail_bound - tol, value + tail_bound + tol]`.
    pub fn brackets(&self, x: T, tol: T) -> bool {
        (x - self.value).abs() <= self.tail_bound + tol
    }

    /// `tail_bound / |value|`, infinite when the partial sum vanishes and the tail does not.
    pub fn relative_tail(&self) -> T {
        if self.tail_bound == T::zero() {
            T::zero()
        } else if self.value == T::zero() {
            T::infinity()
        } else {
            self.tail_bound / self.value.abs()
        }
    }

    /// Errors when the tail exceeds `fraction` of the partial sum.
    pub fn require_tail_within(self, fraction: T) -> Result<Self> {
        if self.relative_tail() > fraction {
            Err(TreeError::TailTooLarge {
                partial: self.value.as_f64(),
                tail: self.tail_bound.as_f64(),
                fraction: fraction.as_f64(),
            })
        } else {
            Ok(self)
        }
    }
}

/// `Σ_{k >= 0} first * ratio^k`, the bound for a geometrically dominated tail.
pub fn geometric_tail<T: Scalar>(first: T, ratio: T) -> Result<T> {
    if !(ratio < T::one()) || ratio < T::zero() {
        return Err(TreeError::Divergent(format!("geometric ratio {ratio} is not in [0, 1)")));
    }
    Ok(first / (T::one() - ratio))
}

/// Sums `term(k)` for `k = start, start+1, ...` until the tail bound drops to `tol`.
///
/// `envelope(k)` must bound `|term(j)| / ratio^(j-k)` for every `j >= k`, so that
/// the tail from index `k` on is at most `envelope(k) / (1 - ratio)`. Stops after
/// `max_terms` terms even if `tol` has not been reached; the returned bound is
/// always honest.
pub fn sum_until<T: Scalar>(
    start: usize,
    mut term: impl FnMut(usize) -> T,
    envelope: impl Fn(usize) -> T,
    ratio: T,
    tol: T,
    max_terms: usize,
) -> Result<Truncated<T>> {
    let mut value = T::zero();
    let mut k = start;
    let mut tail = geometric_tail(envelope(k), ratio)?;
    let mut terms = 0;
    while tail > tol && terms < max_terms {
        value = value + term(k);
        k += 1;
        terms += 1;
        tail = geometric_tail(envelope(k), ratio)?;
    }
    Ok(Truncated { value, tail_bound: tail, terms })
}

/// Sums `term(k)` for `k` in `start..=end` and attaches the tail bound
/// `envelope(end + 1) / (1 - ratio)`.
pub fn sum_to<T: Scalar>(
    start: usize,
    end: usize,
    term: impl Fn(usize) -> T,
    envelope: impl Fn(usize) -> T,
    ratio: T,
) -> Result<Truncated<T>> {
    let value = (start..=end).map(&term).fold(T::zero(), |a, b| a + b);
    let tail_bound = geometric_tail(envelope(end + 1), ratio)?;
    Ok(Truncated { value, tail_bound, terms: end + 1 - start.min(end + 1) })
}
