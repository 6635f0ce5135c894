//! Bergman projectors and the Toeplitz-type operators `S_{a,b,c}`, `T_{a,b,c}`.

mod matrix;
mod region;
mod witness;

pub use matrix::{
    matrix_norm_estimate, operator_matrix, operator_norm_estimate, NormEstimate, NormMethod, NormOptions,
    OperatorMatrix, WitnessCertificate, DEFAULT_MAX_VERTICES,
};
pub use region::{predicted_bounded, schur_window, SchurWindow};
pub use witness::{
    default_witness_r, fit_ratio_exponent, witness_image_norm_pow, witness_norm_pow, witness_ratio_pow,
    WitnessParams,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};
use crate::harmonic::{DenseFunction, HarmonicExpansion};
use crate::kernel::{KernelEvaluator, ProfileKernel, MAX_Z_TRUNCATION};
use crate::measure::{exp_total_mass, ExpMeasure, RadialMeasure};
use crate::scalar::Scalar;
use crate::series::{geometric_tail, Truncated};
use crate::tree::{Region, Tree, Vertex};

/// Absolute kernel `|K_c|` (`S`) or signed kernel `K_c` (`T`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    S,
    T,
}

/// `f ↦ q^{-a|z|} Σ_x k(z, x) f(x) q^{-b|x|}` with `k = |K_c|` or `K_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub kind: OperatorKind,
}

impl<T: Scalar> OperatorParams<T> {
    pub fn new(a: T, b: T, c: T, kind: OperatorKind) -> Result<Self> {
        if !(c > T::one()) {
            return Err(TreeError::Parameter(format!("kernel exponent c must exceed 1, got {c}")));
        }
        Ok(OperatorParams { a, b, c, kind })
    }

    /// `P_β = T_{0,β,β}`, which is also the cross-measure operator `K_β^α` for every `α`.
    pub fn projector(beta: T) -> Result<Self> {
        Self::new(T::zero(), beta, beta, OperatorKind::T)
    }

    /// Parameters of the adjoint in `L²_α`: `T_{a,b,c}^* = T_{b-α, a+α, c}`.
    pub fn adjoint(&self, alpha: T) -> Self {
        OperatorParams { a: self.b - alpha, b: self.a + alpha, c: self.c, kind: self.kind }
    }
}

/// An operator of the `S`/`T` family bound to a tree.
#[derive(Clone, Debug)]
pub struct Toeplitz<T: Scalar> {
    params: OperatorParams<T>,
    kernel: KernelEvaluator<T>,
}

impl<T: Scalar> Toeplitz<T> {
    pub fn new(tree: Tree, params: OperatorParams<T>) -> Result<Self> {
        let kernel = KernelEvaluator::new(RadialMeasure::exponential(tree, params.c)?)?;
        Ok(Toeplitz { params, kernel })
    }

    pub fn params(&self) -> OperatorParams<T> {
        self.params
    }

    pub fn tree(&self) -> Tree {
        self.kernel.measure().tree()
    }

    pub fn kernel(&self) -> &KernelEvaluator<T> {
        &self.kernel
    }

    /// `q^{-a|z|} k(z, x) q^{-b|x|}`.
    pub fn entry(&self, z: &Vertex, x: &Vertex) -> Result<T> {
        let q: T = self.tree().qs();
        let mut k = self.kernel.kernel(z, x)?;
        if self.params.kind == OperatorKind::S {
            k = k.abs();
        }
        Ok(q.powf(-self.params.a * T::count(z.norm())) * k * q.powf(-self.params.b * T::count(x.norm())))
    }

    /// The operator applied to a finitely supported `f`, at `z`.
    pub fn apply(&self, f: &DenseFunction<T>, z: &Vertex) -> Result<T> {
        f.iter().try_fold(T::zero(), |acc, (x, &fx)| {
            if fx == T::zero() {
                Ok(acc)
            } else {
                Ok(acc + self.entry(z, x)? * fx)
            }
        })
    }

    /// The operator applied to the radial `f(x) = phi(|x|)` truncated to `|x| <= depth`,
    /// at `z`. Sums over classes of fixed `(|x|, |z ∧ x|)`, so `depth` may be large.
    pub fn apply_radial(&self, z: &Vertex, phi: impl Fn(usize) -> T, depth: usize) -> Result<T> {
        let tree = self.tree();
        tree.validate(z)?;
        let q: T = tree.qs();
        let nz = z.norm();
        let mut acc = T::zero();
        for l in 0..=nz.min(depth) {
            for n in l..=depth {
                if l == nz && n < nz {
                    continue;
                }
                let count: T = if l < nz {
                    tree.confluent_class_count(l, n)
                } else if nz == 0 {
                    tree.sphere_count(n)
                } else {
                    q.powi((n - nz) as i32)
                };
                let mut k = ProfileKernel::profile(&self.kernel, nz, n, l)?;
                if self.params.kind == OperatorKind::S {
                    k = k.abs();
                }
                acc = acc + count * k * phi(n) * q.powf(-self.params.b * T::count(n));
            }
        }
        Ok(q.powf(-self.params.a * T::count(nz)) * acc)
    }

    /// The output restricted to a bounded region.
    pub fn apply_on(&self, f: &DenseFunction<T>, region: Region) -> Result<DenseFunction<T>> {
        let tree = self.tree();
        let zs: Vec<Vertex> = tree.enumerate(&region)?.collect();
        let values: Result<BTreeMap<Vertex, T>> = zs
            .into_par_iter()
            .map(|z| {
                let y = self.apply(f, &z)?;
                Ok((z, y))
            })
            .collect();
        let values = values?;
        let out = DenseFunction::finitely_supported(tree, values)?;
        out.restrict(region)
    }
}

/// `P_β f(z) = Σ_x K_β(z, x) f(x) q^{-β|x|}` for finitely supported `f`.
pub fn project<T: Scalar>(m: &ExpMeasure<T>, f: &DenseFunction<T>, z: &Vertex) -> Result<T> {
    Toeplitz::new(m.tree(), OperatorParams::projector(m.alpha())?)?.apply(f, z)
}

/// `P_β f(z) = ⟨f, K_z⟩` for `f` in the span of the basis, by orthogonality.
pub fn project_expansion<T: Scalar>(
    kernel: &KernelEvaluator<T>,
    f: &HarmonicExpansion<T>,
    z: &Vertex,
) -> Result<T> {
    f.inner_product(&kernel.kernel_from_basis(z)?, kernel.measure())
}

/// `Σ_x |f(x)|^p σ(x)` for a finitely supported `f`.
pub fn lp_norm_pow<T: Scalar>(m: &RadialMeasure<T>, f: &DenseFunction<T>, p: T) -> Result<T> {
    check_p(p)?;
    f.iter().try_fold(T::zero(), |acc, (x, &fx)| Ok(acc + fx.abs().powf(p) * m.density_at(x)?))
}

/// `‖f‖_{L^p(σ)}` for a finitely supported `f`.
pub fn lp_norm<T: Scalar>(m: &RadialMeasure<T>, f: &DenseFunction<T>, p: T) -> Result<T> {
    Ok(lp_norm_pow(m, f, p)?.powf(p.recip()))
}

fn check_p<T: Scalar>(p: T) -> Result<()> {
    if p < T::one() {
        return Err(TreeError::Parameter(format!("exponent p must be at least 1, got {p}")));
    }
    Ok(())
}

/// `‖q^{-R|·|} 1_{B(o,N)}‖^p` in `L^p_α`: the partial sum to depth `N` and the
/// exact remainder of the untruncated function as `tail_bound`.
pub fn radial_lp_norm_pow<T: Scalar>(q: u32, alpha: T, r: T, p: T, depth: usize) -> Result<Truncated<T>> {
    check_p(p)?;
    let tree = Tree::new(q)?;
    let s = r * p + alpha;
    let qs = T::count(q as usize);
    let value = (0..=depth)
        .map(|n| tree.sphere_count::<T>(n) * qs.powf(-s * T::count(n)))
        .fold(T::zero(), |a, b| a + b);
    let tail = exp_total_mass(q, s)? - value;
    Ok(Truncated { value, tail_bound: tail.max(T::zero()), terms: depth + 1 })
}

/// `‖f‖^p` in `L^p(σ)` for a finite basis expansion: exact sum over `B(o, N)` plus
/// `sup|f|^p σ(X \ B(o, N))`.
pub fn expansion_lp_norm_pow<T: Scalar>(
    f: &HarmonicExpansion<T>,
    m: &RadialMeasure<T>,
    p: T,
    depth: usize,
) -> Result<Truncated<T>> {
    check_p(p)?;
    let tree = f.tree();
    let dense = f.render(Region::ball(Vertex::root(), depth))?;
    let value = lp_norm_pow(m, &dense, p)?;
    let q: T = tree.qs();
    let a_sup = q / (q - T::one());
    // |e_{v,j}| <= 1 for the Helmert basis.
    let sup = f.terms().fold(f.c0.abs(), |acc, (_, c)| acc + c.abs() * a_sup);
    let inner = (0..=depth)
        .map(|n| Ok(tree.sphere_count::<T>(n) * m.density(n)?))
        .try_fold(T::zero(), |a, b: Result<T>| Ok::<T, TreeError>(a + b?))?;
    let outer = (m.total_mass()? - inner).max(T::zero());
    Ok(Truncated { value, tail_bound: sup.powf(p) * outer, terms: depth + 1 })
}

/// `Σ_z f(z) g(z) q^{-α|z|}` by orthogonality; for real expansions this is the inner product.
pub fn dual_pairing<T: Scalar>(f: &HarmonicExpansion<T>, g: &HarmonicExpansion<T>, m: &ExpMeasure<T>) -> Result<T> {
    f.inner_product(g, m.measure())
}

/// `Σ_z |K_γ(x, z)| q^{-β|z|}`, grouped by `ℓ = |z ∧ x|` and summed radially in `|z|`.
///
/// The truncation starts at `|x| + start` and is doubled until the tail is at most
/// `tail_fraction` of the partial sum.
pub fn kernel_l1_moment<T: Scalar>(
    tree: Tree,
    x: &Vertex,
    gamma: T,
    beta: T,
    start: usize,
    tail_fraction: T,
) -> Result<Truncated<T>> {
    tree.validate(x)?;
    if !(beta > T::one()) {
        return Err(TreeError::Parameter(format!("beta must exceed 1, got {beta}")));
    }
    let k = KernelEvaluator::new(RadialMeasure::exponential(tree, gamma)?)?;
    let mut n = x.norm() + start.max(1);
    loop {
        let s = kernel_l1_partial(&k, x.norm(), beta, n)?;
        if !(s.relative_tail() > tail_fraction) {
            return Ok(s);
        }
        if n >= MAX_Z_TRUNCATION {
            return s.require_tail_within(tail_fraction);
        }
        n = (2 * n).min(MAX_Z_TRUNCATION);
    }
}

fn kernel_l1_partial<T: Scalar>(k: &KernelEvaluator<T>, nx: usize, beta: T, truncation: usize) -> Result<Truncated<T>> {
    let tree = k.measure().tree();
    let q: T = tree.qs();
    let inv_total = k.measure().total_mass()?.recip();
    let prefactor = q * q / ((q - T::one()) * (q - T::one()));
    let decay = |n: usize| q.powf(-beta * T::count(n));
    let ratio = q.powf(T::one() - beta);
    let mut value = T::zero();
    let mut tail = T::zero();
    let mut inv_b_sum = T::zero();
    for l in 0..=nx {
        inv_b_sum = inv_b_sum + k.measure().b_const(l)?.recip();
        // |K| <= 1/B_γ + q²/(q-1)² Σ_{t<=l} 1/b_t since |Γ| < 1.
        let k_sup = inv_total + prefactor * inv_b_sum;
        // Vertices at depth n in the class, computed in `T` to avoid overflow.
        let count = |n: usize| -> T {
            if l < nx {
                tree.confluent_class_count(l, n)
            } else if nx == 0 {
                tree.sphere_count(n)
            } else {
                q.powi((n - nx) as i32)
            }
        };
        let count_coef = if l < nx {
            T::count(tree.successors_at_depth(l) - 1) * q.powi(-(l as i32) - 1)
        } else if nx == 0 {
            (q + T::one()) / q
        } else {
            q.powi(-(nx as i32))
        };
        for n in l..=truncation {
            let kv = ProfileKernel::profile(k, n, nx, l)?;
            value = value + count(n) * kv.abs() * decay(n);
        }
        let first = q.powf((T::one() - beta) * T::count(truncation + 1));
        tail = tail + k_sup * count_coef * geometric_tail(first, ratio)?;
    }
    Ok(Truncated { value, tail_bound: tail, terms: truncation + 1 })
}
