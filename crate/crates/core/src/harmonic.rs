//! Laplacian, harmonic extension and the orthonormal basis of the harmonic Bergman space.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};
use crate::measure::{a_n, c_const, ExpMeasure, RadialMeasure};
use crate::scalar::Scalar;
use crate::tree::{Region, Tree, Vertex};

/// Default absolute tolerance on Laplacian values when testing harmonicity.
pub const HARMONIC_TOL: f64 = 1e-10;

/// A function with finitely many nonzero values.
///
/// With a recorded `region`, the function is only defined there and the
/// Laplacian refuses to look outside it. Without one, it is defined on the
/// whole tree and vanishes off `values`.
#[derive(Clone, Debug)]
pub struct DenseFunction<T> {
    tree: Tree,
    region: Option<Region>,
    values: BTreeMap<Vertex, T>,
}

impl<T: Scalar> DenseFunction<T> {
    /// Samples `f` on every vertex of a bounded region.
    pub fn from_fn(tree: Tree, region: Region, f: impl Fn(&Vertex) -> T + Sync) -> Result<Self> {
        let vertices: Vec<Vertex> = tree.enumerate(&region)?.collect();
        let values = vertices.into_par_iter().map(|v| {
            let y = f(&v);
            (v, y)
        });
        Ok(DenseFunction { tree, region: Some(region), values: values.collect() })
    }

    /// A function defined everywhere, equal to `values` on their keys and 0 elsewhere.
    pub fn finitely_supported(tree: Tree, values: BTreeMap<Vertex, T>) -> Result<Self> {
        for v in values.keys() {
            tree.validate(v)?;
        }
        Ok(DenseFunction { tree, region: None, values })
    }

    /// The indicator of a single vertex, defined everywhere.
    pub fn indicator(tree: Tree, v: Vertex) -> Result<Self> {
        Self::finitely_supported(tree, BTreeMap::from([(v, T::one())]))
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn is_defined_at(&self, v: &Vertex) -> bool {
        self.region.as_ref().is_none_or(|r| r.contains(v))
    }

    /// `f(v)`, zero outside the stored values.
    pub fn get(&self, v: &Vertex) -> T {
        self.values.get(v).copied().unwrap_or(T::zero())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vertex, &T)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(&Vertex, T) -> T) -> Self {
        DenseFunction {
            tree: self.tree,
            region: self.region.clone(),
            values: self.values.iter().map(|(v, &y)| (v.clone(), f(v, y))).collect(),
        }
    }

    /// Restriction to a bounded region; the result is only defined there.
    pub fn restrict(&self, region: Region) -> Result<Self> {
        let values = self
            .tree
            .enumerate(&region)?
            .map(|v| {
                let y = self.get(&v);
                (v, y)
            })
            .collect();
        Ok(DenseFunction { tree: self.tree, region: Some(region), values })
    }

    /// `Δf(v) = f(v) - (1/(q+1)) Σ_{u ~ v} f(u)`.
    pub fn laplacian(&self, v: &Vertex) -> Result<T> {
        self.tree.validate(v)?;
        let neighbors = self.tree.neighbors(v);
        let mut sum = T::zero();
        for u in &neighbors {
            if !self.is_defined_at(u) {
                return Err(TreeError::OutsideSupport { vertex: v.to_string(), neighbor: u.to_string() });
            }
            sum = sum + self.get(u);
        }
        Ok(self.get(v) - sum / T::count(neighbors.len()))
    }

    /// Checks `|Δf| <= tol` on every vertex of a bounded region.
    pub fn check_harmonic_on(&self, region: &Region, tol: T) -> Result<()> {
        for v in self.tree.enumerate(region)? {
            let l = self.laplacian(&v)?;
            if l.abs() > tol {
                return Err(TreeError::NotHarmonic { vertex: v.to_string(), value: l.as_f64() });
            }
        }
        Ok(())
    }
}

/// The unique harmonic function `g^H_n` that agrees with `g` on `B(o, n+1)` and
/// is radial on every sector rooted at `S(o, n+1)`.
#[derive(Clone, Debug)]
pub struct HarmonicExtension<T> {
    g: DenseFunction<T>,
    n: usize,
}

impl<T: Scalar> HarmonicExtension<T> {
    /// Validates that `g` is defined on `B(o, n+1)` and harmonic on `B(o, n)`.
    pub fn new(g: DenseFunction<T>, n: usize, tol: T) -> Result<Self> {
        let tree = g.tree();
        for v in tree.ball_vertices(n + 1) {
            if !g.is_defined_at(&v) {
                return Err(TreeError::OutsideSupport {
                    vertex: format!("ball of radius {} about the root", n + 1),
                    neighbor: v.to_string(),
                });
            }
        }
        g.check_harmonic_on(&Region::ball(Vertex::root(), n), tol)?;
        Ok(HarmonicExtension { g, n })
    }

    pub fn eval(&self, x: &Vertex) -> T {
        let depth = x.norm();
        if depth <= self.n {
            return self.g.get(x);
        }
        let a = a_n(self.g.tree().qs::<T>(), depth - self.n - 1);
        a * self.g.get(&x.ancestor(self.n + 1)) - (a - T::one()) * self.g.get(&x.ancestor(self.n))
    }

    /// Dense view on a bounded region.
    pub fn render(&self, region: Region) -> Result<DenseFunction<T>> {
        DenseFunction::from_fn(self.g.tree(), region, |x| self.eval(x))
    }
}

/// `g^H_n(x)` in a single call; validates `g` every time.
pub fn harmonic_extension<T: Scalar>(g: &DenseFunction<T>, n: usize, x: &Vertex) -> Result<T> {
    g.tree().validate(x)?;
    Ok(HarmonicExtension::new(g.clone(), n, T::lit(HARMONIC_TOL))?.eval(x))
}

/// `e_j(i)` of the Helmert basis of the zero-sum vectors in `R^d`, `1 <= j <= d-1`.
pub fn helmert<T: Scalar>(d: usize, j: usize, i: usize) -> T {
    debug_assert!(j >= 1 && j < d && i < d);
    let norm = T::count(j * (j + 1)).sqrt();
    if i < j {
        T::one() / norm
    } else if i == j {
        -T::count(j) / norm
    } else {
        T::zero()
    }
}

/// An element `e_{v,j}` of the orthonormal basis of `W_v`; `coefficients[c]` is its
/// value at the child with label `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct WBasisElement<T> {
    pub v: Vertex,
    pub j: usize,
    pub coefficients: Vec<T>,
}

impl<T: Scalar> WBasisElement<T> {
    /// `(Σ_c |e(c)|^p)^{1/p}`.
    pub fn lp_norm(&self, p: T) -> T {
        self.coefficients.iter().map(|c| c.abs().powf(p)).fold(T::zero(), |a, b| a + b).powf(p.recip())
    }
}

/// The Helmert basis of `W_v`, children in label order: `#s(v) - 1` elements.
pub fn w_basis<T: Scalar>(tree: &Tree, v: &Vertex) -> Result<Vec<WBasisElement<T>>> {
    tree.validate(v)?;
    let d = tree.num_children(v);
    Ok((1..d)
        .map(|j| WBasisElement { v: v.clone(), j, coefficients: (0..d).map(|i| helmert(d, j, i)).collect() })
        .collect())
}

fn check_index(tree: &Tree, v: &Vertex, j: usize) -> Result<()> {
    let max = tree.num_children(v) - 1;
    if j == 0 || j > max {
        return Err(TreeError::BasisIndex { vertex: v.to_string(), j, max });
    }
    Ok(())
}

/// `f_{v,j}(x) = a_{|x|-|v|-1} e_{v,j}(p^{|x|-|v|-1}(x))` on `T_v \ {v}`, 0 elsewhere.
pub fn basis_fn_eval<T: Scalar>(tree: &Tree, v: &Vertex, j: usize, x: &Vertex) -> Result<T> {
    tree.validate(v)?;
    tree.validate(x)?;
    check_index(tree, v, j)?;
    Ok(basis_fn_unchecked(tree, v, j, x))
}

pub(crate) fn basis_fn_unchecked<T: Scalar>(tree: &Tree, v: &Vertex, j: usize, x: &Vertex) -> T {
    if !v.is_strict_prefix_of(x) {
        return T::zero();
    }
    let d = tree.num_children(v);
    let child = x.labels()[v.norm()] as usize;
    a_n(tree.qs::<T>(), x.norm() - v.norm() - 1) * helmert(d, j, child)
}

/// `‖f_{v,j}‖^p` in `L^p(μ_α)`: `‖e_{v,j}‖_p^p C(α, p) q^{-α|v|}`.
pub fn lp_norm_pow_basis_fn<T: Scalar>(v: &Vertex, j: usize, p: T, m: &ExpMeasure<T>) -> Result<T> {
    let tree = m.tree();
    tree.validate(v)?;
    check_index(&tree, v, j)?;
    let d = tree.num_children(v);
    let e_norm_p = (0..d).map(|i| helmert::<T>(d, j, i).abs().powf(p)).fold(T::zero(), |a, b| a + b);
    let c = c_const(tree.q(), m.alpha(), p)?.value;
    Ok(e_norm_p * c * tree.qs::<T>().powf(-m.alpha() * T::count(v.norm())))
}

/// `‖f_{v,j}‖` in `L^p(μ_α)`.
pub fn lp_norm_basis_fn<T: Scalar>(v: &Vertex, j: usize, p: T, m: &ExpMeasure<T>) -> Result<T> {
    Ok(lp_norm_pow_basis_fn(v, j, p, m)?.powf(p.recip()))
}

/// Index `(v, j)` of the basis function `f_{v,j}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    pub v: Vertex,
    pub j: usize,
}

/// A finite combination `c0 f_0 + Σ c_{v,j} f_{v,j}` of basis functions.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicExpansion<T> {
    tree: Tree,
    pub c0: T,
    terms: BTreeMap<BasisIndex, T>,
}

/// One line of the serialized form of an expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExpansionRecord {
    Constant { f0: f64 },
    Term { v: Vertex, j: usize, c: f64 },
}

impl<T: Scalar> HarmonicExpansion<T> {
    pub fn constant(tree: Tree, c0: T) -> Self {
        HarmonicExpansion { tree, c0, terms: BTreeMap::new() }
    }

    /// The single basis function `f_{v,j}`.
    pub fn basis(tree: Tree, v: Vertex, j: usize) -> Result<Self> {
        let mut e = Self::constant(tree, T::zero());
        e.add_term(v, j, T::one())?;
        Ok(e)
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    /// Adds `c f_{v,j}` to the expansion.
    pub fn add_term(&mut self, v: Vertex, j: usize, c: T) -> Result<()> {
        self.tree.validate(&v)?;
        check_index(&self.tree, &v, j)?;
        let slot = self.terms.entry(BasisIndex { v, j }).or_insert(T::zero());
        *slot = *slot + c;
        Ok(())
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: T) {
        self.c0 = self.c0 + s * other.c0;
        for (idx, &c) in &other.terms {
            let slot = self.terms.entry(idx.clone()).or_insert(T::zero());
            *slot = *slot + s * c;
        }
    }

    pub fn coefficient(&self, v: &Vertex, j: usize) -> T {
        self.terms.get(&BasisIndex { v: v.clone(), j }).copied().unwrap_or(T::zero())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisIndex, &T)> {
        self.terms.iter()
    }

    /// Evaluates at `x`; only `v ∈ [o, p(x)]` contribute.
    pub fn eval(&self, x: &Vertex) -> T {
        let q = self.tree.qs::<T>();
        let mut total = self.c0;
        for depth in 0..x.norm() {
            let v = x.ancestor(depth);
            let d = self.tree.successors_at_depth(depth);
            let child = x.labels()[depth] as usize;
            let a = a_n(q, x.norm() - depth - 1);
            for j in 1..d {
                if let Some(&c) = self.terms.get(&BasisIndex { v: v.clone(), j }) {
                    total = total + c * a * helmert(d, j, child);
                }
            }
        }
        total
    }

    /// Dense view on a bounded region.
    pub fn render(&self, region: Region) -> Result<DenseFunction<T>> {
        DenseFunction::from_fn(self.tree, region, |x| self.eval(x))
    }

    /// Exact `⟨f, g⟩` in `A^2(σ)`, using `‖f_0‖² = B_σ`, `‖f_{v,j}‖² = b_{|v|}` and orthogonality.
    pub fn inner_product(&self, other: &Self, m: &RadialMeasure<T>) -> Result<T> {
        let mut total = self.c0 * other.c0 * m.total_mass()?;
        for (idx, &c) in &self.terms {
            if let Some(&d) = other.terms.get(idx) {
                total = total + c * d * m.b_const(idx.v.norm())?;
            }
        }
        Ok(total)
    }

    pub fn norm_squared(&self, m: &RadialMeasure<T>) -> Result<T> {
        self.inner_product(self, m)
    }

    pub fn to_records(&self) -> Vec<ExpansionRecord> {
        std::iter::once(ExpansionRecord::Constant { f0: self.c0.as_f64() })
            .chain(self.terms.iter().map(|(idx, c)| ExpansionRecord::Term {
                v: idx.v.clone(),
                j: idx.j,
                c: c.as_f64(),
            }))
            .collect()
    }

    pub fn from_records(tree: Tree, records: &[ExpansionRecord]) -> Result<Self> {
        let mut e = Self::constant(tree, T::zero());
        for r in records {
            match r {
                ExpansionRecord::Constant { f0 } => e.c0 = e.c0 + T::lit(*f0),
                ExpansionRecord::Term { v, j, c } => e.add_term(v.clone(), *j, T::lit(*c))?,
            }
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tree(q: u32) -> Tree {
        Tree::new(q).unwrap()
    }

    fn v(labels: &[u32]) -> Vertex {
        Vertex::from_labels(labels.to_vec())
    }

    #[test]
    fn laplacian_examples() {
        let t = tree(2);
        let c = DenseFunction::from_fn(t, Region::ball(Vertex::root(), 4), |_| 3.0f64).unwrap();
        c.check_harmonic_on(&Region::ball(Vertex::root(), 3), 1e-14).unwrap();
        assert!(matches!(c.laplacian(&v(&[0, 1, 1, 0])), Err(TreeError::OutsideSupport { .. })));
        let ind = DenseFunction::<f64>::indicator(t, Vertex::root()).unwrap();
        assert_eq!(ind.laplacian(&Vertex::root()).unwrap(), 1.0);
        assert_relative_eq!(ind.laplacian(&v(&[2])).unwrap(), -1.0 / 3.0);
    }

    #[test]
    fn basis_functions_are_harmonic() {
        for q in [2, 3] {
            let t = tree(q);
            for center in [Vertex::root(), v(&[1]), v(&[0, 1])] {
                for j in 1..t.num_children(&center) {
                    let f = HarmonicExpansion::<f64>::basis(t, center.clone(), j).unwrap();
                    let dense = f.render(Region::ball(Vertex::root(), 5)).unwrap();
                    dense.check_harmonic_on(&Region::ball(Vertex::root(), 4), 1e-12).unwrap();
                }
            }
        }
    }

    #[test]
    fn helmert_basis() {
        let t = tree(2);
        let b = w_basis::<f64>(&t, &v(&[1])).unwrap();
        assert_eq!(b.len(), 1);
        let s = 0.5f64.sqrt();
        assert_relative_eq!(b[0].coefficients[0], s);
        assert_relative_eq!(b[0].coefficients[1], -s);
        let root = w_basis::<f64>(&t, &Vertex::root()).unwrap();
        assert_eq!(root.len(), 2);
        let s6 = 6f64.sqrt();
        for (c, e) in root[1].coefficients.iter().zip([1.0 / s6, 1.0 / s6, -2.0 / s6]) {
            assert_relative_eq!(*c, e, max_relative = 1e-15);
        }
        for q in [2, 3, 5] {
            let t = tree(q);
            for center in [Vertex::root(), v(&[0])] {
                let b = w_basis::<f64>(&t, &center).unwrap();
                assert_eq!(b.len(), t.num_children(&center) - 1);
                for e in &b {
                    assert!(e.coefficients.iter().sum::<f64>().abs() < 1e-14);
                }
                for (i, e) in b.iter().enumerate() {
                    for (k, f) in b.iter().enumerate() {
                        let dot: f64 = e.coefficients.iter().zip(&f.coefficients).map(|(a, b)| a * b).sum();
                        let expected = if i == k { 1.0 } else { 0.0 };
                        assert!((dot - expected).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn basis_fn_values() {
        let t = tree(2);
        let center = v(&[1]);
        let e = w_basis::<f64>(&t, &center).unwrap();
        assert_eq!(basis_fn_eval::<f64>(&t, &center, 1, &center).unwrap(), 0.0);
        assert_eq!(basis_fn_eval::<f64>(&t, &center, 1, &v(&[1, 1])).unwrap(), e[0].coefficients[1]);
        assert_relative_eq!(basis_fn_eval::<f64>(&t, &center, 1, &v(&[1, 0, 1])).unwrap(), 1.5 * e[0].coefficients[0]);
        assert_eq!(basis_fn_eval::<f64>(&t, &center, 1, &v(&[0, 0, 1])).unwrap(), 0.0);
        assert!(matches!(basis_fn_eval::<f64>(&t, &center, 2, &center), Err(TreeError::BasisIndex { .. })));
        assert!(basis_fn_eval::<f64>(&t, &center, 0, &center).is_err());
        let bound = e[0].coefficients[0].abs() / (1.0 - 0.5);
        for x in t.enumerate(&Region::sector(center.clone(), 8)).unwrap() {
            assert!(basis_fn_eval::<f64>(&t, &center, 1, &x).unwrap().abs() <= bound);
        }
    }

    #[test]
    fn extension_examples() {
        let t = tree(2);
        let c = DenseFunction::from_fn(t, Region::ball(Vertex::root(), 3), |_| 2.0f64).unwrap();
        let ext = HarmonicExtension::new(c, 2, 1e-12).unwrap();
        assert_eq!(ext.eval(&v(&[0, 1, 0, 1, 1])), 2.0);

        // E_{v,j}: zero on B(o, |v|), e_{v,j} on s(v).
        let center = v(&[2, 1]);
        let e = w_basis::<f64>(&t, &center).unwrap().remove(0);
        let mut values = BTreeMap::new();
        for (c, &val) in e.coefficients.iter().enumerate() {
            values.insert(center.child(c as u32), val);
        }
        let big = DenseFunction::finitely_supported(t, values).unwrap();
        let g = big.restrict(Region::ball(Vertex::root(), 3)).unwrap();
        let ext = HarmonicExtension::new(g.clone(), 2, 1e-12).unwrap();
        for x in t.ball_vertices(7) {
            assert_relative_eq!(ext.eval(&x), basis_fn_eval(&t, &center, 1, &x).unwrap(), epsilon = 1e-14);
        }

        let x = v(&[2, 1, 0, 1]);
        let a1 = 1.5;
        let expected = a1 * g.get(&x.ancestor(3)) - (a1 - 1.0) * g.get(&x.ancestor(2));
        assert_relative_eq!(harmonic_extension(&g, 2, &x).unwrap(), expected);
        assert_relative_eq!(ext.eval(&v(&[2, 1, 0, 1, 1])), 1.75 * g.get(&v(&[2, 1, 0])) - 0.75 * g.get(&center));
    }

    #[test]
    fn extension_rejects_non_harmonic_data() {
        let t = tree(2);
        let ind = DenseFunction::<f64>::indicator(t, Vertex::root()).unwrap();
        let g = ind.restrict(Region::ball(Vertex::root(), 2)).unwrap();
        match harmonic_extension(&g, 1, &Vertex::root()) {
            Err(TreeError::NotHarmonic { vertex, .. }) => assert_eq!(vertex, "[]"),
            other => panic!("expected NotHarmonic, got {other:?}"),
        }
        let small = ind.restrict(Region::ball(Vertex::root(), 1)).unwrap();
        assert!(matches!(harmonic_extension(&small, 1, &Vertex::root()), Err(TreeError::OutsideSupport { .. })));
    }

    #[test]
    fn inner_products() {
        let t = tree(2);
        let m = ExpMeasure::<f64>::new(t, 2.0).unwrap();
        let f0 = HarmonicExpansion::constant(t, 1.0);
        let f = HarmonicExpansion::basis(t, v(&[0, 1]), 1).unwrap();
        assert_relative_eq!(f0.inner_product(&f0, &m).unwrap(), 2.5);
        assert_eq!(f0.inner_product(&f, &m).unwrap(), 0.0);
        assert_relative_eq!(f.inner_product(&f, &m).unwrap(), m.b_const(2).unwrap());
    }

    #[test]
    fn lp_norms_of_basis_functions() {
        let t = tree(2);
        let m = ExpMeasure::<f64>::new(t, 2.0).unwrap();
        let center = v(&[1]);
        assert_relative_eq!(
            lp_norm_pow_basis_fn(&center, 1, 2.0, &m).unwrap(),
            m.b_const(1).unwrap(),
            max_relative = 1e-12
        );
        // Direct sum over the sector to depth 40; the remainder is bounded by
        // sup|f| * σ(T_v ∩ {|x| > 40}).
        let direct: f64 = (2..=40)
            .map(|n| {
                let k = n - 1 - 1;
                let a = (2.0 - 2f64.powi(-k)) / 1.0;
                2f64.powi(n - 1) * a * 0.5f64.sqrt() * 4f64.powi(-n)
            })
            .sum();
        let tail = 2.0 * 0.5f64.sqrt() * 4f64.powi(-41) * 2f64.powi(40) / (1.0 - 0.5);
        let closed = lp_norm_pow_basis_fn(&center, 1, 1.0, &m).unwrap();
        assert!((closed - direct).abs() <= tail + 1e-15, "{closed} vs {direct}");
        let e1 = 2.0 * 0.5f64.sqrt();
        assert_relative_eq!(closed, e1 * c_const(2, 2.0, 1.0).unwrap().value / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn record_round_trip() {
        let t = tree(3);
        let mut e = HarmonicExpansion::constant(t, 0.5f64);
        e.add_term(v(&[0, 1]), 2, 0.25).unwrap();
        e.add_term(Vertex::root(), 3, -1.0).unwrap();
        let json = serde_json::to_string(&e.to_records()).unwrap();
        assert!(json.contains(r#"{"v":"[0,1]","j":2,"c":0.25}"#));
        assert!(json.contains(r#"{"f0":0.5}"#));
        let back: Vec<ExpansionRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(HarmonicExpansion::from_records(t, &back).unwrap(), e);
        assert!(e.clone().add_term(Vertex::root(), 4, 1.0).is_err());
    }
}
