//! The test functions `g_{v,j} = f_{v,j} q^{-R|·|}` and their closed-form norms.

use super::OperatorParams;
use crate::error::{Result, TreeError};
use crate::harmonic::helmert;
use crate::measure::{b_alpha_zero, c_const};
use crate::scalar::Scalar;
use crate::tree::{Tree, Vertex};

/// An operator, a measure exponent `α` and a Lebesgue exponent `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WitnessParams<T> {
    pub params: OperatorParams<T>,
    pub alpha: T,
    pub p: T,
}

/// `max{(1-α)/p, c-b} + 1`.
pub fn default_witness_r<T: Scalar>(w: &WitnessParams<T>) -> T {
    ((T::one() - w.alpha) / w.p).max(w.params.c - w.params.b) + T::one()
}

fn check_r<T: Scalar>(w: &WitnessParams<T>, r: T) -> Result<()> {
    let floor = ((T::one() - w.alpha) / w.p).max(w.params.c - w.params.b);
    if !(r > floor) {
        return Err(TreeError::Parameter(format!("witness decay R = {r} must exceed {floor}")));
    }
    Ok(())
}

fn e_norm_pow<T: Scalar>(tree: &Tree, v: &Vertex, j: usize, p: T) -> Result<T> {
    tree.validate(v)?;
    let d = tree.num_children(v);
    if j == 0 || j >= d {
        return Err(TreeError::BasisIndex { vertex: v.to_string(), j, max: d - 1 });
    }
    Ok((0..d).map(|i| helmert::<T>(d, j, i).abs().powf(p)).sum())
}

/// `‖g_{v,j}‖^p = ‖e_{v,j}‖_p^p C(Rp+α, p) q^{-(Rp+α)|v|}`.
pub fn witness_norm_pow<T: Scalar>(tree: &Tree, w: &WitnessParams<T>, v: &Vertex, j: usize, r: T) -> Result<T> {
    check_r(w, r)?;
    let s = r * w.p + w.alpha;
    let q: T = tree.qs();
    Ok(e_norm_pow(tree, v, j, w.p)? * c_const(tree.q(), s, w.p)?.value * q.powf(-s * T::count(v.norm())))
}

/// `‖T g_{v,j}‖^p = ‖e_{v,j}‖_p^p C(ap+α, p) (b_{b+R,|v|}/b_{c,|v|})^p q^{-(ap+α)|v|}`.
///
/// The image is `q^{-a|z|} (b_{b+R,|v|}/b_{c,|v|}) f_{v,j}(z)`; it has infinite norm
/// unless `ap + α > 1`.
pub fn witness_image_norm_pow<T: Scalar>(
    tree: &Tree,
    w: &WitnessParams<T>,
    v: &Vertex,
    j: usize,
    r: T,
) -> Result<T> {
    check_r(w, r)?;
    let s = w.params.a * w.p + w.alpha;
    if !(s > T::one()) {
        return Err(TreeError::Divergent(format!("ap + alpha = {s} <= 1: the image is not in L^p")));
    }
    let q: T = tree.qs();
    let n = T::count(v.norm());
    let b_in = b_alpha_zero(q, w.params.b + r) * q.powf(-(w.params.b + r) * n);
    let b_c = b_alpha_zero(q, w.params.c) * q.powf(-w.params.c * n);
    Ok(e_norm_pow(tree, v, j, w.p)?
        * c_const(tree.q(), s, w.p)?.value
        * (b_in / b_c).powf(w.p)
        * q.powf(-s * n))
}

/// `‖T g_{v,j}‖^p / ‖g_{v,j}‖^p`.
pub fn witness_ratio_pow<T: Scalar>(tree: &Tree, w: &WitnessParams<T>, v: &Vertex, j: usize, r: T) -> Result<T> {
    Ok(witness_image_norm_pow(tree, w, v, j, r)? / witness_norm_pow(tree, w, v, j, r)?)
}

/// Least-squares slope of `log_q` of [`witness_ratio_pow`] against `|v|`, over
/// the leftmost vertices at the given depths.
pub fn fit_ratio_exponent<T: Scalar>(
    tree: &Tree,
    w: &WitnessParams<T>,
    r: T,
    depths: impl IntoIterator<Item = usize>,
) -> Result<T> {
    let ln_q = tree.qs::<T>().ln();
    let points: Vec<(T, T)> = depths
        .into_iter()
        .map(|d| Ok((T::count(d), witness_ratio_pow(tree, w, &Tree::leftmost(d), 1, r)?.ln() / ln_q)))
        .collect::<Result<_>>()?;
    if points.len() < 2 {
        return Err(TreeError::Parameter("a slope needs at least two depths".into()));
    }
    let n = T::count(points.len());
    let mx = points.iter().map(|p| p.0).sum::<T>() / n;
    let my = points.iter().map(|p| p.1).sum::<T>() / n;
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let sxx = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    Ok(sxy / sxx)
}
