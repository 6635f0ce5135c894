//! Radial reference measures and the scalar constants derived from them.

use std::collections::BTreeSet;
use std::ops::Deref;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{Result, TreeError};
use crate::scalar::Scalar;
use crate::series::{geometric_tail, sum_until, Truncated};
use crate::tree::{GromovBall, Tree, Vertex};

/// Tail tolerance of every truncated series, relative to its leading term.
pub const SERIES_TOL: f64 = 1e-13;
/// Hard cap on the number of summed terms.
pub const MAX_TERMS: usize = 1_000_000;

/// `a_n = (q - q^{-n}) / (q - 1)` for `n >= 0` and `a_{-1} = 0`.
pub fn a_seq<T: Scalar>(q: u32, n: i64) -> Result<T> {
    match n {
        n if n < -1 => Err(TreeError::IndexBelowMinusOne(n)),
        -1 => Ok(T::zero()),
        n => Ok(a_n(T::count(q as usize), n as usize)),
    }
}

/// `a_n` for `n >= 0`.
pub(crate) fn a_n<T: Scalar>(q: T, n: usize) -> T {
    (q - q.powi(-(n as i32))) / (q - T::one())
}

/// `a_{n-1}`, with `a_{-1} = 0` at `n = 0`.
pub(crate) fn a_shifted<T: Scalar>(q: T, n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        a_n(q, n - 1)
    }
}

/// `C(s, p) = Σ_{m >= 1} q^{(1-s)m - 1} a_{m-1}^p`.
pub fn c_const<T: Scalar>(q: u32, s: T, p: T) -> Result<Truncated<T>> {
    if !(s > T::one()) {
        return Err(TreeError::Divergent(format!("C(s, p) requires s > 1, got s = {s}")));
    }
    if p < T::one() {
        return Err(TreeError::Parameter(format!("C(s, p) requires p >= 1, got p = {p}")));
    }
    let qs = T::count(q as usize);
    let ratio = qs.powf(T::one() - s);
    let a_sup = (qs / (qs - T::one())).powf(p);
    sum_until(
        1,
        |m| qs.powf((T::one() - s) * T::count(m) - T::one()) * a_n(qs, m - 1).powf(p),
        |m| qs.powf((T::one() - s) * T::count(m) - T::one()) * a_sup,
        ratio,
        T::lit(SERIES_TOL) * qs.powf(-s),
        MAX_TERMS,
    )
}

/// How `σ_n` is given.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Density<T> {
    /// `σ_n = q^{-α n}`.
    Exponential { alpha: T },
    /// `σ_0, ..., σ_M` followed, if `tail` is set, by `σ_n = σ_M r^{n-M}`.
    Table { values: Vec<T>, tail: Option<T> },
}

/// A radial, strictly positive, nonincreasing density on a homogeneous tree.
#[derive(Clone, Debug)]
pub struct RadialMeasure<T> {
    tree: Tree,
    density: Density<T>,
    b_cache: Arc<RwLock<Vec<T>>>,
}

impl<T: Scalar> RadialMeasure<T> {
    /// `μ_α`, requiring `α > 1` so that the mass is finite.
    pub fn exponential(tree: Tree, alpha: T) -> Result<Self> {
        if !(alpha > T::one()) {
            return Err(TreeError::MeasureNotFinite(format!(
                "exponential measure needs alpha > 1, got {alpha}"
            )));
        }
        Ok(Self::with_density(tree, Density::Exponential { alpha }))
    }

    /// A tabulated density with an optional geometric tail `σ_{n+1} = r σ_n` beyond the table.
    pub fn table(tree: Tree, values: Vec<T>, tail: Option<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(TreeError::InvalidMeasure("empty density table".into()));
        }
        for (n, &s) in values.iter().enumerate() {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(TreeError::InvalidMeasure(format!("sigma_{n} = {s} is not positive")));
            }
            if n > 0 && s > values[n - 1] {
                return Err(TreeError::InvalidMeasure(format!(
                    "density increases at n = {n}: {} < {s}",
                    values[n - 1]
                )));
            }
        }
        if let Some(r) = tail {
            if !(r > T::zero()) || r > T::one() {
                return Err(TreeError::InvalidMeasure(format!("tail ratio {r} is not in (0, 1]")));
            }
            if !(r * tree.qs::<T>() < T::one()) {
                return Err(TreeError::MeasureNotFinite(format!(
                    "tail ratio {r} times q = {} is not below 1",
                    tree.q()
                )));
            }
        }
        Ok(Self::with_density(tree, Density::Table { values, tail }))
    }

    fn with_density(tree: Tree, density: Density<T>) -> Self {
        RadialMeasure { tree, density, b_cache: Arc::new(RwLock::new(Vec::new())) }
    }

    pub fn tree(&self) -> Tree {
        self.tree
    }

    pub fn density_rule(&self) -> &Density<T> {
        &self.density
    }

    /// `α` when the density is exponential.
    pub fn alpha(&self) -> Option<T> {
        match self.density {
            Density::Exponential { alpha } => Some(alpha),
            Density::Table { .. } => None,
        }
    }

    fn q(&self) -> T {
        self.tree.qs()
    }

    /// `σ_n`.
    pub fn density(&self, n: usize) -> Result<T> {
        match &self.density {
            Density::Exponential { alpha } => Ok(self.q().powf(-*alpha * T::count(n))),
            Density::Table { values, tail } => match values.get(n) {
                Some(&s) => Ok(s),
                None => match tail {
                    Some(r) => {
                        let m = values.len() - 1;
                        Ok(values[m] * r.powi((n - m) as i32))
                    }
                    None => Err(TreeError::MeasureNotFinite(format!(
                        "density table ends at n = {} and has no tail rule",
                        values.len() - 1
                    ))),
                },
            },
        }
    }

    /// `σ(v)`.
    pub fn density_at(&self, v: &Vertex) -> Result<T> {
        self.density(v.norm())
    }

    /// Index of the last tabulated value and the tail ratio, for table densities.
    fn table_parts(&self) -> Option<(&[T], Option<T>)> {
        match &self.density {
            Density::Table { values, tail } => Some((values.as_slice(), *tail)),
            Density::Exponential { .. } => None,
        }
    }

    fn require_tail(&self, what: &str) -> Result<T> {
        match self.table_parts() {
            Some((_, Some(r))) => Ok(r),
            _ => Err(TreeError::MeasureNotFinite(format!(
                "{what} needs an infinite sum but the table has no tail rule"
            ))),
        }
    }

    /// `Σ_{n >= n0} σ_n q^{n - k}`: the mass of `{x ∈ T_u : |x| >= n0}` for `|u| = k >= 1`.
    fn layered_mass(&self, k: usize, n0: usize) -> Result<T> {
        let q = self.q();
        match &self.density {
            Density::Exponential { alpha } => {
                let r = q.powf(T::one() - *alpha);
                let first = q.powf(-*alpha * T::count(n0)) * q.powi((n0 - k) as i32);
                geometric_tail(first, r)
            }
            Density::Table { values, .. } => {
                let m = values.len() - 1;
                let head = (n0..=m)
                    .map(|n| values[n] * q.powi((n - k) as i32))
                    .fold(T::zero(), |a, b| a + b);
                let r = self.require_tail("sector mass")?;
                let k0 = (n0.max(m + 1) - m) as i32;
                let rest = values[m] * q.powi(m as i32 - k as i32) * geometric_tail((r * q).powi(k0), r * q)?;
                Ok(head + rest)
            }
        }
    }

    /// `B_σ = σ_0 + ((q+1)/q) Σ_{n >= 1} σ_n q^n`.
    pub fn total_mass(&self) -> Result<T> {
        let q = self.q();
        match &self.density {
            Density::Exponential { alpha } => {
                let qa = q.powf(*alpha);
                Ok((qa + T::one()) / (qa - q))
            }
            Density::Table { values, .. } => {
                let children = T::count(self.tree.successors_at_depth(0));
                Ok(values[0] + children * self.layered_mass(1, 1)?)
            }
        }
    }

    /// `b_n = Σ_{m >= n+1} σ_m a_{m-n-1} Σ_{k=0}^{m-n-1} q^k`, memoized.
    pub fn b_const(&self, n: usize) -> Result<T> {
        if let Some(&b) = self.b_cache.read().expect("b cache poisoned").get(n) {
            return Ok(b);
        }
        let mut cache = self.b_cache.write().expect("b cache poisoned");
        while cache.len() <= n {
            let k = cache.len();
            let b = self.b_uncached(k)?;
            cache.push(b);
        }
        Ok(cache[n])
    }

    /// `(b_0, ..., b_{n_max})`.
    pub fn bergman_constants(&self, n_max: usize) -> Result<Vec<T>> {
        self.b_const(n_max)?;
        Ok(self.b_cache.read().expect("b cache poisoned")[..=n_max].to_vec())
    }

    fn b_uncached(&self, n: usize) -> Result<T> {
        match &self.density {
            Density::Exponential { alpha } => {
                Ok(b_alpha_zero(self.q(), *alpha) * self.q().powf(-*alpha * T::count(n)))
            }
            Density::Table { .. } => Ok(self.b_series(n)?.value),
        }
    }

    /// `b_n` by direct summation, with a bound on the omitted tail.
    pub fn b_series(&self, n: usize) -> Result<Truncated<T>> {
        let q = self.q();
        let term = |m: usize| -> T {
            let j = m - n;
            let sigma = self.density(m).unwrap_or(T::zero());
            sigma * a_shifted(q, j) * (q.powi(j as i32) - T::one()) / (q - T::one())
        };
        let (ratio, start_tail) = match &self.density {
            Density::Exponential { alpha } => (q.powf(T::one() - *alpha), n + 1),
            Density::Table { values, .. } => {
                let last = values.len() - 1;
                match self.table_parts().and_then(|(_, t)| t) {
                    Some(r) => (r * q, (n + 1).max(last)),
                    None => {
                        let value = (n + 1..=last.max(n)).map(term).fold(T::zero(), |a, b| a + b);
                        if last > n {
                            return Err(TreeError::MeasureNotFinite(
                                "b_n needs an infinite sum but the table has no tail rule".into(),
                            ));
                        }
                        return Ok(Truncated::exact(value));
                    }
                }
            }
        };
        let head = (n + 1..start_tail).map(term).fold(T::zero(), |a, b| a + b);
        // |term(m)| <= σ_m q^{m-n} q / (q-1)^2 and σ_m q^m decays by `ratio`.
        let envelope = |m: usize| {
            self.density(m).unwrap_or(T::zero()) * q.powi((m - n) as i32) * q
                / ((q - T::one()) * (q - T::one()))
        };
        let tol = T::lit(SERIES_TOL) * self.density(n + 1)?;
        let rest = sum_until(start_tail, term, envelope, ratio, tol, MAX_TERMS)?;
        Ok(Truncated { value: head + rest.value, tail_bound: rest.tail_bound, terms: rest.terms + start_tail - n - 1 })
    }

    /// `σ(T_u)` for `u ≠ o`.
    pub fn sector_mass(&self, u: &Vertex) -> Result<T> {
        if u.is_root() {
            return Err(TreeError::Parameter(
                "the sector at the root is the whole tree; use total_mass".into(),
            ));
        }
        self.tree.validate(u)?;
        self.layered_mass(u.norm(), u.norm())
    }

    /// `σ(T_u)` for any vertex at depth `k >= 1`.
    pub fn sector_mass_at_depth(&self, k: usize) -> Result<T> {
        if k == 0 {
            return self.total_mass();
        }
        self.layered_mass(k, k)
    }

    /// `σ(Y_ℓ)` where `Y_ℓ = {z : |z ∧ v| = ℓ}` for a vertex `v` with `|v| > ℓ`.
    pub fn confluent_class_mass(&self, l: usize) -> Result<T> {
        let others = T::count(self.tree.successors_at_depth(l) - 1);
        Ok(self.density(l)? + others * self.sector_mass_at_depth(l + 1)?)
    }

    pub fn measure_of_ball(&self, ball: &GromovBall) -> Result<T> {
        match ball {
            GromovBall::Singleton(v) => self.density_at(v),
            GromovBall::Sector(u) if u.is_root() => self.total_mass(),
            GromovBall::Sector(u) => self.sector_mass(u),
            GromovBall::WholeTree => self.total_mass(),
        }
    }

    /// Mass of a finite vertex set; repeated vertices count once.
    pub fn measure_of_set<'a>(&self, vertices: impl IntoIterator<Item = &'a Vertex>) -> Result<T> {
        let set: BTreeSet<&Vertex> = vertices.into_iter().collect();
        set.into_iter().try_fold(T::zero(), |acc, v| Ok(acc + self.density_at(v)?))
    }
}

/// `B_s = (q^s + 1)/(q^s - q)`, the mass of `μ_s`; requires `s > 1`.
pub fn exp_total_mass<T: Scalar>(q: u32, s: T) -> Result<T> {
    if !(s > T::one()) {
        return Err(TreeError::MeasureNotFinite(format!("q^(-s|x|) has infinite mass for s = {s}")));
    }
    let qs = T::count(q as usize).powf(s);
    Ok((qs + T::one()) / (qs - T::count(q as usize)))
}

/// Closed form of `b_{α,0}` as three geometric series:
/// `q/(q-1)^2 [G(q^{1-α}) - 2 G(q^{-α}) + G(q^{-1-α})]` with `G(y) = y/(1-y)`.
pub fn b_alpha_zero<T: Scalar>(q: T, alpha: T) -> T {
    let g = |y: T| y / (T::one() - y);
    let one = T::one();
    q / ((q - one) * (q - one))
        * (g(q.powf(one - alpha)) - T::lit(2.0) * g(q.powf(-alpha)) + g(q.powf(-one - alpha)))
}

/// `μ_α` together with the closed forms available for it.
#[derive(Clone, Debug)]
pub struct ExpMeasure<T> {
    inner: RadialMeasure<T>,
    alpha: T,
}

impl<T: Scalar> ExpMeasure<T> {
    pub fn new(tree: Tree, alpha: T) -> Result<Self> {
        Ok(ExpMeasure { inner: RadialMeasure::exponential(tree, alpha)?, alpha })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn measure(&self) -> &RadialMeasure<T> {
        &self.inner
    }

    /// `B_α = (q^α + 1)/(q^α - q)`.
    pub fn b_total(&self) -> T {
        let q: T = self.inner.tree.qs();
        let qa = q.powf(self.alpha);
        (qa + T::one()) / (qa - q)
    }

    /// `max{q^α + 1, B_α}`: the doubling constant of `μ_α` for the Gromov metric.
    pub fn doubling_constant(&self) -> T {
        let qa = self.inner.tree.qs::<T>().powf(self.alpha);
        (qa + T::one()).max(self.b_total())
    }
}

impl<T> Deref for ExpMeasure<T> {
    type Target = RadialMeasure<T>;
    fn deref(&self) -> &RadialMeasure<T> {
        &self.inner
    }
}

impl<T: Scalar> TryFrom<RadialMeasure<T>> for ExpMeasure<T> {
    type Error = TreeError;
    fn try_from(m: RadialMeasure<T>) -> Result<Self> {
        match m.alpha() {
            Some(alpha) => Ok(ExpMeasure { inner: m, alpha }),
            None => Err(TreeError::InvalidMeasure("measure is not exponential".into())),
        }
    }
}

/// Parsed form of a measure specification file.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureSpec {
    pub q: u32,
    pub kind: MeasureKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    Exp { alpha: f64 },
    Table { values: Vec<f64>, tail: Option<f64> },
}

impl MeasureSpec {
    /// Parses `key=value` lines. `#` starts a comment. Keys: `kind` (`exp` or
    /// `table`), `q`, `alpha`, `values` (comma separated), `tail` (`geometric:r`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut q = None;
        let mut alpha = None;
        let mut values = None;
        let mut tail = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TreeError::Parse(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            match key.trim() {
                "kind" => kind = Some(value.to_string()),
                "q" => q = Some(value.parse::<u32>().map_err(|e| err(format!("q: {e}")))?),
                "alpha" => alpha = Some(num(value)?),
                "values" => {
                    values = Some(value.split(',').map(num).collect::<Result<Vec<f64>>>()?)
                }
                "tail" => {
                    let r = value
                        .strip_prefix("geometric:")
                        .ok_or_else(|| err(format!("unknown tail rule {value:?}")))?;
                    tail = Some(num(r)?);
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let q = q.ok_or_else(|| TreeError::Parse("missing key q".into()))?;
        let kind = match kind.as_deref() {
            Some("exp") => MeasureKind::Exp {
                alpha: alpha.ok_or_else(|| TreeError::Parse("missing key alpha".into()))?,
            },
            Some("table") => MeasureKind::Table {
                values: values.ok_or_else(|| TreeError::Parse("missing key values".into()))?,
                tail,
            },
            Some(other) => return Err(TreeError::Parse(format!("unknown measure kind {other:?}"))),
            None => return Err(TreeError::Parse("missing key kind".into())),
        };
        Ok(MeasureSpec { q, kind })
    }

    pub fn build<T: Scalar>(&self) -> Result<RadialMeasure<T>> {
        let tree = Tree::new(self.q)?;
        match &self.kind {
            MeasureKind::Exp { alpha } => RadialMeasure::exponential(tree, T::lit(*alpha)),
            MeasureKind::Table { values, tail } => RadialMeasure::table(
                tree,
                values.iter().map(|&v| T::lit(v)).collect(),
                tail.map(T::lit),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp(q: u32, alpha: f64) -> ExpMeasure<f64> {
        ExpMeasure::new(Tree::new(q).unwrap(), alpha).unwrap()
    }

    /// `b_n` summed from its definition with plain loops, to `m = n + 200`.
    fn b_oracle(q: f64, sigma: impl Fn(usize) -> f64, n: usize) -> f64 {
        let mut total = 0.0;
        for m in n + 1..=n + 200 {
            let j = m - n - 1;
            let a = (q - q.powi(-(j as i32))) / (q - 1.0);
            let geo: f64 = (0..=j).map(|k| q.powi(k as i32)).sum();
            total += sigma(m) * a * geo;
        }
        total
    }

    #[test]
    fn a_sequence_values() {
        assert_eq!(a_seq::<f64>(2, -1).unwrap(), 0.0);
        assert_eq!(a_seq::<f64>(2, 0).unwrap(), 1.0);
        assert_eq!(a_seq::<f64>(2, 2).unwrap(), 1.75);
        assert!(matches!(a_seq::<f64>(2, -2), Err(TreeError::IndexBelowMinusOne(-2))));
    }

    #[test]
    fn total_mass_closed_forms() {
        assert_relative_eq!(exp(2, 2.0).total_mass().unwrap(), 2.5, max_relative = 1e-15);
        assert_relative_eq!(exp(3, 2.0).total_mass().unwrap(), 10.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn table_with_geometric_tail_matches_exponential() {
        let tree = Tree::new(2).unwrap();
        let values: Vec<f64> = (0..6).map(|n| 4f64.powi(-n)).collect();
        let t = RadialMeasure::table(tree, values, Some(0.25)).unwrap();
        let e = exp(2, 2.0);
        assert_relative_eq!(t.total_mass().unwrap(), 2.5, max_relative = 1e-12);
        for n in 0..8 {
            assert_relative_eq!(t.b_const(n).unwrap(), e.b_const(n).unwrap(), max_relative = 1e-12);
        }
        let u = Vertex::from_labels(vec![1, 0]);
        assert_relative_eq!(t.sector_mass(&u).unwrap(), e.sector_mass(&u).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn total_mass_by_truncated_series() {
        for (q, alpha) in [(2u32, 2.0f64), (3, 1.5), (4, 3.0)] {
            let m = exp(q, alpha);
            let qf = q as f64;
            let r = qf.powf(1.0 - alpha);
            let s = sum_until(1, |n| qf.powf(-alpha * n as f64) * qf.powi(n as i32), |n| r.powi(n as i32), r, 1e-14, 100_000)
                .unwrap();
            let series = 1.0 + (qf + 1.0) / qf * s.value;
            assert!((series - m.total_mass().unwrap()).abs() <= 1e-12 + s.tail_bound);
        }
    }

    #[test]
    fn b_alpha_against_series_oracle() {
        let m = exp(2, 2.0);
        let oracle = b_oracle(2.0, |n| 4f64.powi(-(n as i32)), 0);
        assert_relative_eq!(oracle, 20.0 / 21.0, max_relative = 1e-13);
        assert_relative_eq!(m.b_const(0).unwrap(), oracle, max_relative = 1e-13);
        assert_relative_eq!(m.b_const(3).unwrap(), 20.0 / 21.0 / 64.0, max_relative = 1e-13);
        for (q, alpha) in [(2u32, 1.5f64), (2, 2.0), (2, 3.0), (3, 1.5), (3, 2.0), (3, 3.0)] {
            let m = exp(q, alpha);
            let qf = q as f64;
            for n in 0..=10 {
                let direct = m.b_series(n).unwrap();
                let scaled = m.b_const(n).unwrap();
                assert!((direct.value - scaled).abs() <= 1e-12 * scaled + direct.tail_bound);
                if alpha >= 2.0 {
                    let o = b_oracle(qf, |k| qf.powf(-alpha * k as f64), n);
                    assert_relative_eq!(o, scaled, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn b_is_decreasing() {
        let m = exp(3, 1.5);
        let b = m.bergman_constants(30).unwrap();
        assert!(b.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn c_const_values() {
        let c = c_const::<f64>(2, 2.0, 2.0).unwrap();
        assert!(c.brackets(20.0 / 21.0, 1e-12));
        assert_relative_eq!(c.value, exp(2, 2.0).b_const(0).unwrap(), max_relative = 1e-12);
        let slow = c_const::<f64>(2, 1.01, 1.0).unwrap();
        assert!(slow.value.is_finite() && slow.value > 100.0);
        assert!(slow.tail_bound <= 1e-12);
        assert!(c_const::<f64>(2, 1.0, 2.0).is_err());
    }

    #[test]
    fn c_const_decays_like_q_to_minus_s() {
        for q in [2u32, 3] {
            let c = c_const::<f64>(q, 40.0, 2.0).unwrap().value;
            assert!(((q as f64).powf(40.0) * c - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sector_masses() {
        let m = exp(2, 2.0);
        assert_relative_eq!(m.sector_mass(&Vertex::from_labels(vec![0])).unwrap(), 0.5, max_relative = 1e-15);
        let u = Vertex::from_labels(vec![2, 1]);
        assert_relative_eq!(m.sector_mass(&u).unwrap(), 0.125, max_relative = 1e-15);
        let ratio = m.sector_mass(&u.predecessor().unwrap()).unwrap() / m.sector_mass(&u).unwrap();
        assert_relative_eq!(ratio, 4.0, max_relative = 1e-14);
        assert!(m.sector_mass(&Vertex::root()).is_err());
    }

    #[test]
    fn measure_of_regions() {
        let m = exp(2, 2.0);
        let tree = m.tree();
        assert_eq!(m.measure_of_ball(&GromovBall::Singleton(Vertex::root())).unwrap(), 1.0);
        assert_relative_eq!(m.measure_of_ball(&GromovBall::WholeTree).unwrap(), 2.5, max_relative = 1e-15);
        let ball = tree.ball_vertices(3);
        let direct: f64 = ball.iter().map(|v| 4f64.powi(-(v.norm() as i32))).sum();
        assert_relative_eq!(m.measure_of_set(ball.iter()).unwrap(), direct, max_relative = 1e-14);
        let twice: Vec<&Vertex> = ball.iter().chain(ball.iter()).collect();
        assert_relative_eq!(m.measure_of_set(twice).unwrap(), direct, max_relative = 1e-14);
    }

    #[test]
    fn confluent_class_mass_closed_form() {
        for (q, alpha) in [(2u32, 2.0f64), (3, 1.7)] {
            let m = exp(q, alpha);
            let qf = q as f64;
            for l in 1..5 {
                let expected = qf.powf(-alpha * l as f64) * (1.0 - qf.powf(-alpha)) / (1.0 - qf.powf(1.0 - alpha));
                assert_relative_eq!(m.confluent_class_mass(l).unwrap(), expected, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn nondoubling_for_the_graph_metric() {
        let m = exp(2, 2.0);
        let tree = m.tree();
        let mut last = 0.0;
        for n in 1..=6 {
            let v = Tree::leftmost(2 * n);
            let big: Vec<Vertex> = tree.enumerate(&crate::tree::Region::ball(v.clone(), 2 * n)).unwrap().collect();
            let small: Vec<Vertex> = tree.enumerate(&crate::tree::Region::ball(v, n)).unwrap().collect();
            let ratio = m.measure_of_set(big.iter()).unwrap() / m.measure_of_set(small.iter()).unwrap();
            assert!(ratio > last, "n = {n}: {ratio} <= {last}");
            last = ratio;
        }
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let tree = Tree::new(2).unwrap();
        assert!(RadialMeasure::table(tree, vec![1.0, 2.0], None).is_err());
        assert!(RadialMeasure::table(tree, vec![1.0, 0.0], None).is_err());
        assert!(matches!(
            RadialMeasure::table(tree, vec![1.0, 0.5], Some(0.5)),
            Err(TreeError::MeasureNotFinite(_))
        ));
        assert!(RadialMeasure::<f64>::exponential(tree, 1.0).is_err());
        let finite = RadialMeasure::table(tree, vec![1.0, 0.25], None).unwrap();
        assert!(matches!(finite.total_mass(), Err(TreeError::MeasureNotFinite(_))));
        assert!(finite.density(5).is_err());
    }

    #[test]
    fn spec_file_parsing() {
        let s = MeasureSpec::parse("kind=exp\nalpha=2.0\nq=2\n").unwrap();
        assert_eq!(s.kind, MeasureKind::Exp { alpha: 2.0 });
        let m: RadialMeasure<f64> = s.build().unwrap();
        assert_relative_eq!(m.total_mass().unwrap(), 2.5);
        let t = MeasureSpec::parse("# table\nkind=table\nq=2\nvalues=1, 0.25, 0.0625\ntail=geometric:0.25\n").unwrap();
        let m: RadialMeasure<f64> = t.build().unwrap();
        assert_relative_eq!(m.total_mass().unwrap(), 2.5, max_relative = 1e-12);
        let err = MeasureSpec::parse("kind=exp\nq=2\nbogus\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
        assert!(MeasureSpec::parse("kind=table\nq=2\nvalues=1\ntail=linear:2").is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let m = ExpMeasure::<f32>::new(Tree::new(2).unwrap(), 2.0).unwrap();
        assert!((m.b_const(0).unwrap() - 20.0 / 21.0).abs() < 1e-6);
        assert!((m.total_mass().unwrap() - 2.5).abs() < 1e-6);
    }
}
