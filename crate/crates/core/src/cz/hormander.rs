//! The integral Hörmander condition for kernels given by profile.

use serde::Serialize;

use crate::error::Result;
use crate::kernel::{hormander_sup, ProfileKernel};
use crate::scalar::Scalar;
use crate::tree::Tree;

/// Largest ratio between successive rows still called stable.
pub const STABILITY_RATIO: f64 = 1.1;
/// Rows up to this `|v|` are exempt from the stability requirement.
pub const STABILITY_FROM_DEPTH: usize = 3;

/// Supremum over `1 <= |v| <= depth_v`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HormanderRow<T> {
    pub depth_v: usize,
    pub value: T,
    pub tail_bound: T,
    pub truncation: usize,
    pub nv: usize,
    pub nx: usize,
    pub ny: usize,
    /// `value / previous value`; `None` on the first row or after a zero.
    pub ratio: Option<T>,
    /// The tail is within the requested fraction of the partial sum.
    pub tail_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HormanderReport<T> {
    pub rows: Vec<HormanderRow<T>>,
    /// Every ratio past [`STABILITY_FROM_DEPTH`] is at most [`STABILITY_RATIO`].
    pub stable: bool,
    pub tails_ok: bool,
}

/// `sup_{v ≠ o} sup_{x,y ∈ T_v} Σ_{z ∉ T_v} |K(z,x) - K(z,y)| q^{-α|z|}` truncated at
/// `|v| <= depth`, `|x|, |y| <= |v| + depth_xy`, one row per `depth`.
///
/// Fails when the kernel gives no difference bound or its bound cannot make the
/// `z`-tail summable.
pub fn hormander_check<T: Scalar, K: ProfileKernel<T> + ?Sized>(
    kernel: &K,
    alpha: T,
    depth_v: usize,
    depth_xy: usize,
    z_truncation: usize,
    tail_fraction: T,
) -> Result<HormanderReport<T>> {
    let mut rows: Vec<HormanderRow<T>> = Vec::with_capacity(depth_v);
    for d in 1..=depth_v {
        let e = hormander_sup(kernel, alpha, d, depth_xy, z_truncation, tail_fraction)?;
        let ratio = rows.last().and_then(|r| if r.value > T::zero() { Some(e.value / r.value) } else { None });
        let tail_ok = e.tail_bound <= tail_fraction * e.value || e.tail_bound == T::zero();
        rows.push(HormanderRow {
            depth_v: d,
            value: e.value,
            tail_bound: e.tail_bound,
            truncation: e.truncation,
            nv: e.nv,
            nx: e.nx,
            ny: e.ny,
            ratio,
            tail_ok,
        });
    }
    let limit = T::lit(STABILITY_RATIO);
    let stable = rows.iter().filter(|r| r.depth_v > STABILITY_FROM_DEPTH).all(|r| r.ratio.is_none_or(|x| x <= limit));
    let tails_ok = rows.iter().all(|r| r.tail_ok);
    Ok(HormanderReport { rows, stable, tails_ok })
}

/// `K = 0`.
#[derive(Clone, Copy, Debug)]
pub struct ZeroKernel {
    pub tree: Tree,
}

impl<T: Scalar> ProfileKernel<T> for ZeroKernel {
    fn tree(&self) -> Tree {
        self.tree
    }

    fn profile(&self, _: usize, _: usize, _: usize) -> Result<T> {
        Ok(T::zero())
    }

    fn difference_growth(&self, _: usize, _: usize, _: usize) -> Option<(T, T)> {
        Some((T::zero(), T::zero()))
    }
}

/// `K(z, x) = q^{α|z|}`, whose only available bound grows like the weight decays.
#[derive(Clone, Copy, Debug)]
pub struct AntiDecayingKernel<T> {
    pub tree: Tree,
    pub alpha: T,
}

impl<T: Scalar> ProfileKernel<T> for AntiDecayingKernel<T> {
    fn tree(&self) -> Tree {
        self.tree
    }

    fn profile(&self, nz: usize, _: usize, _: usize) -> Result<T> {
        Ok(self.tree.qs::<T>().powf(self.alpha * T::count(nz)))
    }

    fn difference_growth(&self, _: usize, _: usize, _: usize) -> Option<(T, T)> {
        Some((T::lit(2.0), self.alpha))
    }
}
