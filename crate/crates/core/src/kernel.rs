//! The reproducing kernel of `A^2(σ)`, computed by recursion, closed formula and
//! basis expansion, and the integral Hörmander sum for kernels that depend on
//! `(|z|, |x|, |z ∧ x|)` only.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::Serialize;

use crate::error::{Result, TreeError};
use crate::harmonic::{basis_fn_unchecked, HarmonicExpansion};
use crate::measure::{a_shifted, ExpMeasure, RadialMeasure};
use crate::scalar::Scalar;
use crate::series::{geometric_tail, Truncated};
use crate::tree::{Tree, Vertex};

/// Largest radial truncation tried when widening a Hörmander sum.
pub const MAX_Z_TRUNCATION: usize = 4096;
/// The tail of a Hörmander sum may be at most this fraction of its partial sum.
pub const HORMANDER_TAIL_FRACTION: f64 = 0.1;

/// `Γ(v, z, x)`: `(d-1)/d` when `z, x` lie below the same child of `v`, `-1/d` when
/// below different children, 0 unless both lie in `T_v \ {v}`; `d = #s(v)`.
pub fn gamma<T: Scalar>(tree: &Tree, v: &Vertex, z: &Vertex, x: &Vertex) -> T {
    if !v.is_strict_prefix_of(z) || !v.is_strict_prefix_of(x) {
        return T::zero();
    }
    let d = T::count(tree.num_children(v));
    let k = v.norm();
    if z.labels()[k] == x.labels()[k] {
        (d - T::one()) / d
    } else {
        -T::one() / d
    }
}

/// `Γ_t` along the geodesic to `z ∧ x`, from the three integers `(|z|, |x|, ℓ)`.
fn gamma_profile<T: Scalar>(tree: &Tree, t: usize, nz: usize, nx: usize, l: usize) -> T {
    let d = T::count(tree.successors_at_depth(t));
    if t < l {
        (d - T::one()) / d
    } else if l == nz || l == nx {
        T::zero()
    } else {
        -T::one() / d
    }
}

/// A kernel on `X × X` that depends on `(|z|, |x|, |z ∧ x|)` only.
pub trait ProfileKernel<T: Scalar>: Sync {
    fn tree(&self) -> Tree;

    /// `K(z, x)` for `|z| = nz`, `|x| = nx`, `|z ∧ x| = l`.
    fn profile(&self, nz: usize, nx: usize, l: usize) -> Result<T>;

    /// `(C, λ)` with `|K(z, x) - K(z, y)| <= C q^{λ|z|}` whenever `|z ∧ x| = |z ∧ y| = l`,
    /// `|x| = nx`, `|y| = ny`. `None` when no bound is known.
    fn difference_growth(&self, l: usize, nx: usize, ny: usize) -> Option<(T, T)>;
}

/// Evaluates `K_σ` and caches it by profile `(|z|, |x|, |z ∧ x|)`.
#[derive(Debug)]
pub struct KernelEvaluator<T> {
    measure: RadialMeasure<T>,
    inv_total: T,
    cache: RwLock<HashMap<(usize, usize, usize), T>>,
}

impl<T: Scalar> Clone for KernelEvaluator<T> {
    fn clone(&self) -> Self {
        KernelEvaluator {
            measure: self.measure.clone(),
            inv_total: self.inv_total,
            cache: RwLock::new(self.cache.read().expect("kernel cache poisoned").clone()),
        }
    }
}

impl<T: Scalar> KernelEvaluator<T> {
    pub fn new(measure: RadialMeasure<T>) -> Result<Self> {
        let inv_total = measure.total_mass()?.recip();
        Ok(KernelEvaluator { measure, inv_total, cache: RwLock::new(HashMap::new()) })
    }

    pub fn measure(&self) -> &RadialMeasure<T> {
        &self.measure
    }

    fn q(&self) -> T {
        self.measure.tree().qs()
    }

    /// `q² / (q-1)²`.
    fn prefactor(&self) -> T {
        let q = self.q();
        q * q / ((q - T::one()) * (q - T::one()))
    }

    fn check(&self, z: &Vertex, x: &Vertex) -> Result<()> {
        let tree = self.measure.tree();
        tree.validate(z)?;
        tree.validate(x)
    }

    /// `K(z, x)` through the cached profile.
    pub fn kernel(&self, z: &Vertex, x: &Vertex) -> Result<T> {
        self.check(z, x)?;
        self.profile_value(z.norm(), x.norm(), z.confluent_depth(x))
    }

    fn profile_value(&self, nz: usize, nx: usize, l: usize) -> Result<T> {
        let key = if nz <= nx { (nz, nx, l) } else { (nx, nz, l) };
        if let Some(&k) = self.cache.read().expect("kernel cache poisoned").get(&key) {
            return Ok(k);
        }
        let k = self.profile_uncached(key.0, key.1, key.2)?;
        self.cache.write().expect("kernel cache poisoned").insert(key, k);
        Ok(k)
    }

    fn profile_uncached(&self, nz: usize, nx: usize, l: usize) -> Result<T> {
        if l > nz.min(nx) {
            return Err(TreeError::Parameter(format!(
                "confluent depth {l} exceeds min(|z|, |x|) = {}",
                nz.min(nx)
            )));
        }
        let tree = self.measure.tree();
        let q = self.q();
        let mut sum = T::zero();
        for t in 0..=l {
            let g: T = gamma_profile(&tree, t, nz, nx, l);
            if g == T::zero() {
                continue;
            }
            let ti = t as i32;
            sum = sum
                + g / self.measure.b_const(t)?
                    * (T::one() - q.powi(ti - nz as i32))
                    * (T::one() - q.powi(ti - nx as i32));
        }
        Ok(self.inv_total + self.prefactor() * sum)
    }

    /// `1/B_σ + q²/(q-1)² Σ_{t=0}^{|z∧x|} Γ(v_t, z, x)/b_t (1 - q^{t-|z|})(1 - q^{t-|x|})`,
    /// evaluated with `Γ` on the actual vertices `v_t ∈ [o, z]`.
    pub fn kernel_closed(&self, z: &Vertex, x: &Vertex) -> Result<T> {
        self.check(z, x)?;
        let tree = self.measure.tree();
        let q = self.q();
        let mut sum = T::zero();
        for t in 0..=z.confluent_depth(x) {
            let vt = z.ancestor(t);
            let g: T = gamma(&tree, &vt, z, x);
            let ti = t as i32;
            sum = sum
                + g / self.measure.b_const(t)?
                    * (T::one() - q.powi(ti - z.norm() as i32))
                    * (T::one() - q.powi(ti - x.norm() as i32));
        }
        Ok(self.inv_total + self.prefactor() * sum)
    }

    /// Two-step recursion along `[o, z]`:
    /// `K_{v_m} = -(1/q) K_{v_{m-2}} + ((q+1)/q) K_{v_{m-1}} + a_{|x|-m} Γ(v_{m-1}, z, x) / b_{m-1}`.
    pub fn kernel_recursive(&self, z: &Vertex, x: &Vertex) -> Result<T> {
        self.check(z, x)?;
        let tree = self.measure.tree();
        let q = self.q();
        // Harmonic extension of Γ(v, z, ·) from B(o, |v|).
        let gamma_ext = |m: usize| -> Result<T> {
            let v = z.ancestor(m - 1);
            let g: T = gamma(&tree, &v, z, x);
            if g == T::zero() {
                return Ok(T::zero());
            }
            Ok(a_shifted(q, x.norm() + 1 - m) * g / self.measure.b_const(m - 1)?)
        };
        let mut prev = self.inv_total;
        if z.is_root() {
            return Ok(prev);
        }
        let mut cur = prev + gamma_ext(1)?;
        for m in 2..=z.norm() {
            let next = -prev / q + (q + T::one()) / q * cur + gamma_ext(m)?;
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// `K_z = f_0/B_σ + Σ_{v ∈ [o, p(z)]} Σ_j f_{v,j}(z)/b_{|v|} f_{v,j}`.
    pub fn kernel_from_basis(&self, z: &Vertex) -> Result<HarmonicExpansion<T>> {
        let tree = self.measure.tree();
        tree.validate(z)?;
        let mut e = HarmonicExpansion::constant(tree, self.inv_total);
        for depth in 0..z.norm() {
            let v = z.ancestor(depth);
            let b = self.measure.b_const(depth)?;
            for j in 1..tree.num_children(&v) {
                let c: T = basis_fn_unchecked(&tree, &v, j, z);
                e.add_term(v.clone(), j, c / b)?;
            }
        }
        Ok(e)
    }

    /// `q²/(q-1)² Σ_{t <= l} |q^{t-nx} - q^{t-ny}| / b_t`, a bound on
    /// `|K(z, x) - K(z, y)|` for every `z` with `|z ∧ x| = |z ∧ y| = l`.
    pub fn difference_bound(&self, l: usize, nx: usize, ny: usize) -> Result<T> {
        let q = self.q();
        let mut sum = T::zero();
        for t in 0..=l {
            let ti = t as i32;
            sum = sum + (q.powi(ti - nx as i32) - q.powi(ti - ny as i32)).abs() / self.measure.b_const(t)?;
        }
        Ok(self.prefactor() * sum)
    }
}

impl<T: Scalar> ProfileKernel<T> for KernelEvaluator<T> {
    fn tree(&self) -> Tree {
        self.measure.tree()
    }

    fn profile(&self, nz: usize, nx: usize, l: usize) -> Result<T> {
        self.profile_value(nz, nx, l)
    }

    fn difference_growth(&self, l: usize, nx: usize, ny: usize) -> Option<(T, T)> {
        self.difference_bound(l, nx, ny).ok().map(|c| (c, T::zero()))
    }
}

/// `Σ_{z ∉ T_v} |K(z, x) - K(z, y)| q^{-α|z|}` for `x, y ∈ T_v`, as a function of
/// `|v|`, `|x|`, `|y|`; `z` is grouped by `ℓ = |z ∧ v|` and summed radially up to
/// `|z| <= truncation`, with the remainder bounded through `difference_growth`.
pub fn hormander_sum<T: Scalar, K: ProfileKernel<T> + ?Sized>(
    kernel: &K,
    alpha: T,
    nv: usize,
    nx: usize,
    ny: usize,
    truncation: usize,
) -> Result<Truncated<T>> {
    if nv == 0 || nx < nv || ny < nv {
        return Err(TreeError::Parameter(format!(
            "need 1 <= |v| <= |x|, |y|; got |v| = {nv}, |x| = {nx}, |y| = {ny}"
        )));
    }
    let tree = kernel.tree();
    let q: T = tree.qs();
    let truncation = truncation.max(nv);
    let mut value = T::zero();
    let mut tail = T::zero();
    for l in 0..nv {
        for n in l..=truncation {
            let count: T = tree.confluent_class_count(l, n);
            let diff = (kernel.profile(n, nx, l)? - kernel.profile(n, ny, l)?).abs();
            value = value + count * diff * q.powf(-alpha * T::count(n));
        }
        if nx == ny {
            continue;
        }
        let (c, lambda) = kernel.difference_growth(l, nx, ny).ok_or_else(|| {
            TreeError::Parameter("kernel supplies no bound on |K(z,x) - K(z,y)|".into())
        })?;
        // count(l, n) <= (d_l - 1) q^{n-l-1} for n > l.
        let others = T::count(tree.successors_at_depth(l) - 1);
        let ratio = q.powf(T::one() + lambda - alpha);
        let first = q.powf((T::one() + lambda - alpha) * T::count(truncation + 1));
        let geo = geometric_tail(first, ratio).map_err(|_| {
            TreeError::Divergent(format!(
                "growth exponent {lambda} leaves the z-sum divergent against q^(-{alpha}|z|)"
            ))
        })?;
        tail = tail + c * others * q.powi(-(l as i32) - 1) * geo;
    }
    Ok(Truncated { value, tail_bound: tail, terms: truncation + 1 })
}

/// Sum and location of the worst case found by [`hormander_sup`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HormanderEstimate<T> {
    pub value: T,
    pub tail_bound: T,
    pub truncation: usize,
    pub nv: usize,
    pub nx: usize,
    pub ny: usize,
}

/// Supremum of [`hormander_sum`] over `1 <= |v| <= depth_v` and
/// `|v| <= |x|, |y| <= |v| + depth_xy`.
///
/// The sum depends on `v, x, y` only through their depths, so every vertex at a
/// given depth gives the same value. The truncation is doubled until each tail
/// is at most `tail_fraction` of its partial sum; past [`MAX_Z_TRUNCATION`] the
/// call fails.
pub fn hormander_sup<T: Scalar, K: ProfileKernel<T> + ?Sized>(
    kernel: &K,
    alpha: T,
    depth_v: usize,
    depth_xy: usize,
    z_truncation: usize,
    tail_fraction: T,
) -> Result<HormanderEstimate<T>> {
    if depth_v == 0 {
        return Err(TreeError::Parameter("depth_v must be at least 1".into()));
    }
    let mut best = HormanderEstimate {
        value: T::zero(),
        tail_bound: T::zero(),
        truncation: z_truncation,
        nv: 1,
        nx: 1,
        ny: 1,
    };
    for nv in 1..=depth_v {
        for nx in nv..=nv + depth_xy {
            for ny in nx..=nv + depth_xy {
                let mut n = z_truncation.max(nv);
                let s = loop {
                    let s = hormander_sum(kernel, alpha, nv, nx, ny, n)?;
                    if !(s.relative_tail() > tail_fraction) {
                        break s;
                    }
                    if n >= MAX_Z_TRUNCATION {
                        s.require_tail_within(tail_fraction)?;
                    }
                    n = (2 * n).min(MAX_Z_TRUNCATION);
                };
                if s.value + s.tail_bound > best.value + best.tail_bound {
                    best = HormanderEstimate { value: s.value, tail_bound: s.tail_bound, truncation: n, nv, nx, ny };
                }
            }
        }
    }
    Ok(best)
}

/// The Hörmander constant of `K_α` against `μ_α`.
pub fn hormander_constant_for_kernel<T: Scalar>(
    m: &ExpMeasure<T>,
    depth_v: usize,
    depth_xy: usize,
    z_truncation: usize,
) -> Result<HormanderEstimate<T>> {
    let k = KernelEvaluator::new(m.measure().clone())?;
    hormander_sup(&k, m.alpha(), depth_v, depth_xy, z_truncation, T::lit(HORMANDER_TAIL_FRACTION))
}

/// `Σ_{ℓ=0}^{n-1} q^{ℓ-n}`, the last sum in the proof that `K_α` satisfies the
/// Hörmander condition; bounded by `q/(q-1)`.
pub fn hormander_geometric_sum<T: Scalar>(q: u32, n: usize) -> T {
    let q = T::count(q as usize);
    (0..n).map(|l| q.powi(l as i32 - n as i32)).fold(T::zero(), |a, b| a + b)
}
