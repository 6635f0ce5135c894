//! Restriction of `S`/`T` to `B(o, N)` and estimates of its `L^p_α` norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::witness::{default_witness_r, WitnessParams};
use super::{OperatorParams, Toeplitz};
use crate::error::{Result, TreeError};
use crate::harmonic::basis_fn_unchecked;
use crate::scalar::Scalar;
use crate::tree::{Tree, Vertex};

/// Default cap on the number of vertices of `B(o, N)` for dense matrices.
pub const DEFAULT_MAX_VERTICES: usize = 2048;

/// `M[z][x]` for `z, x ∈ B(o, N)`, rows and columns in lexicographic vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T> {
    tree: Tree,
    depth: usize,
    vertices: Vec<Vertex>,
    entries: Vec<T>,
}

impl<T: Scalar> OperatorMatrix<T> {
    pub fn zeros(tree: Tree, depth: usize) -> Self {
        let vertices = tree.ball_vertices(depth);
        let n = vertices.len();
        OperatorMatrix { tree, depth, vertices, entries: vec![T::zero(); n * n] }
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.size() + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let n = self.size();
        &self.entries[row * n..(row + 1) * n]
    }

    /// Matrix of the adjoint in `L²_α`: `A[x][z] = M[z][x] q^{-α|z|} / q^{-α|x|}`.
    pub fn weighted_adjoint(&self, alpha: T) -> Self {
        let n = self.size();
        let w = self.weights(alpha);
        let mut entries = vec![T::zero(); n * n];
        for z in 0..n {
            for x in 0..n {
                entries[x * n + z] = self.get(z, x) * w[z] / w[x];
            }
        }
        OperatorMatrix { tree: self.tree, depth: self.depth, vertices: self.vertices.clone(), entries }
    }

    fn weights(&self, alpha: T) -> Vec<T> {
        let q: T = self.tree.qs();
        self.vertices.iter().map(|v| q.powf(-alpha * T::count(v.norm()))).collect()
    }

    /// `W^{1/p} M W^{-1/p}`: the same operator acting on unweighted `ℓ^p`.
    fn scaled(&self, alpha: T, p: T) -> Vec<T> {
        let n = self.size();
        let w: Vec<T> = self.weights(alpha).into_iter().map(|w| w.powf(p.recip())).collect();
        let mut out = self.entries.clone();
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, e) in row.iter_mut().enumerate() {
                *e = *e * w[i] / w[j];
            }
        });
        out
    }

    /// `M f` for `f` indexed like the columns.
    pub fn apply(&self, f: &[T]) -> Vec<T> {
        matvec(&self.entries, self.size(), f)
    }
}

fn matvec<T: Scalar>(m: &[T], n: usize, x: &[T]) -> Vec<T> {
    m.par_chunks(n).map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
}

fn matvec_t<T: Scalar>(m: &[T], n: usize, y: &[T]) -> Vec<T> {
    (0..n).into_par_iter().map(|j| (0..n).map(|i| m[i * n + j] * y[i]).sum()).collect()
}

/// Assembles the matrix of `S`/`T` on `B(o, N)`; errors past `max_vertices`.
pub fn operator_matrix<T: Scalar>(
    tree: Tree,
    params: OperatorParams<T>,
    depth: usize,
    max_vertices: usize,
) -> Result<OperatorMatrix<T>> {
    let count = tree.ball_size(depth);
    if count > max_vertices as u64 {
        return Err(TreeError::SizeLimit(format!(
            "B(o, {depth}) has {count} vertices, above the cap of {max_vertices}"
        )));
    }
    let op = Toeplitz::new(tree, params)?;
    let vertices = tree.ball_vertices(depth);
    let n = vertices.len();
    let rows: Result<Vec<Vec<T>>> = vertices
        .par_iter()
        .map(|z| vertices.iter().map(|x| op.entry(z, x)).collect())
        .collect();
    let entries = rows?.into_iter().flatten().collect::<Vec<T>>();
    debug_assert_eq!(entries.len(), n * n);
    Ok(OperatorMatrix { tree, depth, vertices, entries })
}

/// How a [`NormEstimate`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormMethod {
    /// Largest singular value by power iteration (`p = 2`).
    PowerIteration,
    /// Maximum weighted column sum (`p = 1`, exact for the restriction).
    ColumnSum,
    /// Nonlinear power method (Boyd); a lower bound on the restricted norm.
    NonlinearPower,
    /// All entries vanish.
    Zero,
}

/// A basis-function witness `g_{v,j} = f_{v,j} q^{-R|·|}` and its ratio `‖Mg‖/‖g‖`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessCertificate<T> {
    pub v: Vertex,
    pub j: usize,
    pub r: T,
    pub ratio: T,
}

/// Estimate of the `L^p_α` norm of an operator restricted to `B(o, N)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEstimate<T> {
    pub value: T,
    /// Best certified lower bound on the restricted norm.
    pub lower_bound: T,
    /// Riesz–Thorin bound `‖B‖_1^{1/p} ‖B‖_∞^{1/p'}`, a certified upper bound.
    pub upper_bound: Option<T>,
    pub witness: Option<WitnessCertificate<T>>,
    pub method: NormMethod,
    pub iterations: usize,
    pub depth: usize,
    pub vertices: usize,
}

/// Iteration controls for [`matrix_norm_estimate`].
#[derive(Clone, Debug, PartialEq)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub max_vertices: usize,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions { tol: 1e-8, max_iter: 20_000, seed: 0x5eed, max_vertices: DEFAULT_MAX_VERTICES }
    }
}

fn lp<T: Scalar>(x: &[T], p: T) -> T {
    x.iter().map(|v| v.abs().powf(p)).sum::<T>().powf(p.recip())
}

/// `sign(y) |y|^{r-1}`.
fn dual_map<T: Scalar>(y: &[T], r: T) -> Vec<T> {
    y.iter().map(|&v| v.signum() * v.abs().powf(r - T::one())).collect()
}

/// `L^p_α` norm estimate of the restricted operator `M`.
pub fn matrix_norm_estimate<T: Scalar>(
    m: &OperatorMatrix<T>,
    alpha: T,
    p: T,
    opts: &NormOptions,
) -> Result<NormEstimate<T>> {
    if p < T::one() {
        return Err(TreeError::Parameter(format!("exponent p must be at least 1, got {p}")));
    }
    let n = m.size();
    let b = m.scaled(alpha, p);
    let col_max = (0..n).map(|j| (0..n).map(|i| b[i * n + j].abs()).sum::<T>()).fold(T::zero(), T::max);
    let row_max = b.par_chunks(n).map(|r| r.iter().map(|v| v.abs()).sum::<T>()).reduce(T::zero, T::max);
    let mut est = NormEstimate {
        value: T::zero(),
        lower_bound: T::zero(),
        upper_bound: None,
        witness: None,
        method: NormMethod::Zero,
        iterations: 0,
        depth: m.depth(),
        vertices: n,
    };
    if col_max == T::zero() {
        est.upper_bound = Some(T::zero());
        return Ok(est);
    }
    let upper = if p == T::one() { col_max } else { col_max.powf(p.recip()) * row_max.powf(T::one() - p.recip()) };
    est.upper_bound = Some(upper);
    if p == T::one() {
        est.value = col_max;
        est.lower_bound = col_max;
        est.method = NormMethod::ColumnSum;
        return Ok(est);
    }

    let tol = T::lit(opts.tol);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(0.5..1.5))).collect();
    let two = T::lit(2.0);
    let p_dual = p / (p - T::one());
    let mut last = T::zero();
    for it in 1..=opts.max_iter {
        let norm = lp(&x, p);
        x.iter_mut().for_each(|v| *v = *v / norm);
        let y = matvec(&b, n, &x);
        let value = lp(&y, p);
        let z = if p == two { matvec_t(&b, n, &y) } else { matvec_t(&b, n, &dual_map(&y, p)) };
        x = if p == two { z } else { dual_map(&z, p_dual) };
        if it > 1 && (value - last).abs() <= tol * value {
            est.value = value;
            est.lower_bound = value;
            est.iterations = it;
            est.method = if p == two { NormMethod::PowerIteration } else { NormMethod::NonlinearPower };
            return Ok(est);
        }
        if x.iter().all(|v| *v == T::zero()) {
            return Err(TreeError::NoConvergence { iterations: it, last: value.as_f64() });
        }
        last = value;
    }
    Err(TreeError::NoConvergence { iterations: opts.max_iter, last: last.as_f64() })
}

/// Norm estimate of `S_{a,b,c}`/`T_{a,b,c}` on `L^p_α` restricted to `B(o, N)`,
/// combined with the best witness ratio over `g_{v,j}`, `v` leftmost at depths `1..N`.
pub fn operator_norm_estimate<T: Scalar>(
    tree: Tree,
    params: OperatorParams<T>,
    alpha: T,
    p: T,
    depth: usize,
    opts: &NormOptions,
) -> Result<NormEstimate<T>> {
    let m = operator_matrix(tree, params, depth, opts.max_vertices)?;
    let mut est = matrix_norm_estimate(&m, alpha, p, opts)?;
    let witness = WitnessParams { params, alpha, p };
    let r = default_witness_r(&witness);
    let q: T = tree.qs();
    let w: Vec<T> = m.vertices().iter().map(|x| q.powf(-alpha * T::count(x.norm()))).collect();
    let lp_w = |f: &[T]| f.iter().zip(&w).map(|(v, w)| v.abs().powf(p) * *w).sum::<T>().powf(p.recip());
    for d in 1..depth {
        let v = Tree::leftmost(d);
        let g: Vec<T> = m
            .vertices()
            .iter()
            .map(|x| basis_fn_unchecked::<T>(&tree, &v, 1, x) * q.powf(-r * T::count(x.norm())))
            .collect();
        let gn = lp_w(&g);
        if gn == T::zero() {
            continue;
        }
        let ratio = lp_w(&m.apply(&g)) / gn;
        if est.witness.as_ref().is_none_or(|c| ratio > c.ratio) {
            est.witness = Some(WitnessCertificate { v, j: 1, r, ratio });
        }
    }
    if let Some(c) = &est.witness {
        est.lower_bound = est.lower_bound.max(c.ratio);
        est.value = est.value.max(c.ratio);
    }
    Ok(est)
}
