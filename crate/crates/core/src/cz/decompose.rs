//! The Calderón–Zygmund decomposition of a finitely supported function at level `t`.

use rayon::prelude::*;
use serde::Serialize;

use super::{heap_index, sector_ratio_constant, ser_ball, PartitionSet};
use crate::error::{Result, TreeError};
use crate::harmonic::DenseFunction;
use crate::measure::ExpMeasure;
use crate::scalar::Scalar;
use crate::tree::{GromovBall, Region, Tree, Vertex};

/// Relative slack for the inequalities checked by [`verify_cz`].
pub const CZ_TOL: f64 = 1e-12;

/// A selected set `Q ∈ 𝒬` together with the value of `g` on it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzPiece<T> {
    #[serde(flatten)]
    pub set: PartitionSet,
    /// `μ_α(Q)`.
    pub mass: T,
    /// `μ_α(Q)^{-1} Σ_{z∈Q} |f(z)| q^{-α|z|}`.
    pub avg: T,
    /// `g` on `Q`: the signed average of `f`.
    pub g_value: T,
    /// The set `Q̃` whose average did not exceed `t`.
    #[serde(serialize_with = "ser_ball")]
    pub reference: GromovBall,
}

/// `f = g + b` with `b = Σ_Q b_Q`.
///
/// `free` lists `ℱ` with one compression: a `Sector(u)` entry stands for every
/// singleton of `T_u`, which is where the stopping rule ends when `f` vanishes on
/// `T_u`. `g = f` off `Ω`; `g = g_value` on each selected `Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzDecomposition<T> {
    #[serde(skip)]
    pub tree: Tree,
    pub alpha: T,
    pub t: T,
    pub selected: Vec<CzPiece<T>>,
    #[serde(serialize_with = "ser_balls")]
    pub free: Vec<GromovBall>,
}

fn ser_balls<S: serde::Serializer>(b: &[GromovBall], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(b.iter().map(|b| b.to_string()))
}

impl<T: Scalar> CzDecomposition<T> {
    /// The selected set containing `z`, if any.
    pub fn piece_of(&self, z: &Vertex) -> Option<&CzPiece<T>> {
        self.selected.iter().find(|p| p.set.piece.contains(z))
    }

    /// `g(z)`.
    pub fn g(&self, f: &DenseFunction<T>, z: &Vertex) -> T {
        self.piece_of(z).map_or_else(|| f.get(z), |p| p.g_value)
    }

    /// `b(z) = f(z) - g(z)`.
    pub fn b(&self, f: &DenseFunction<T>, z: &Vertex) -> T {
        f.get(z) - self.g(f, z)
    }

    /// `μ_α(Ω)`.
    pub fn omega_mass(&self) -> T {
        self.selected.iter().map(|p| p.mass).fold(T::zero(), |a, b| a + b)
    }

    /// Export rows: one per selected set with `b_Q` inline on the support of `f`.
    pub fn records(&self, f: &DenseFunction<T>) -> Vec<CzRecord<T>> {
        self.selected
            .iter()
            .map(|p| {
                let b: Vec<(String, T)> = f
                    .iter()
                    .filter(|(z, _)| p.set.piece.contains(z))
                    .map(|(z, &fz)| (z.to_string(), fz - p.g_value))
                    .collect();
                CzRecord {
                    piece: p.set.piece.to_string(),
                    scale: p.set.scale,
                    index: p.set.index,
                    mass: p.mass,
                    avg: p.avg,
                    g: p.g_value,
                    b,
                    b_elsewhere: -p.g_value,
                }
            })
            .collect()
    }
}

/// One exported selected set. `b_elsewhere` is `b_Q` off the support of `f`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzRecord<T> {
    pub piece: String,
    pub scale: usize,
    pub index: u64,
    pub mass: T,
    pub avg: T,
    pub g: T,
    pub b: Vec<(String, T)>,
    pub b_elsewhere: T,
}

fn weighted_sums<T: Scalar>(f: &DenseFunction<T>, set: &GromovBall, m: &ExpMeasure<T>) -> Result<(T, T)> {
    f.iter()
        .filter(|(z, _)| set.contains(z))
        .try_fold((T::zero(), T::zero()), |(abs, signed), (z, &fz)| {
            let w = m.density_at(z)?;
            Ok((abs + fz.abs() * w, signed + fz * w))
        })
}

fn l1_norm<T: Scalar>(f: &DenseFunction<T>, m: &ExpMeasure<T>) -> Result<T> {
    f.iter().try_fold(T::zero(), |acc, (z, &fz)| Ok(acc + fz.abs() * m.density_at(z)?))
}

struct Walker<'a, T: Scalar> {
    f: &'a DenseFunction<T>,
    m: &'a ExpMeasure<T>,
    t: T,
    top: Vertex,
    selected: Vec<CzPiece<T>>,
    free: Vec<GromovBall>,
}

impl<'a, T: Scalar> Walker<'a, T> {
    fn visit(&mut self, set: PartitionSet) -> Result<()> {
        let tree = self.m.tree();
        let mass = self.m.measure_of_ball(&set.piece)?;
        let (abs, signed) = weighted_sums(self.f, &set.piece, self.m)?;
        let avg = abs / mass;
        if avg > self.t {
            let reference = match set.parent(&tree, &self.top) {
                Some(p) => p.piece,
                None => GromovBall::WholeTree,
            };
            self.selected.push(CzPiece { set, mass, avg, g_value: signed / mass, reference });
            return Ok(());
        }
        let u = match &set.piece {
            GromovBall::Singleton(_) => {
                self.free.push(set.piece);
                return Ok(());
            }
            GromovBall::Sector(u) => u.clone(),
            GromovBall::WholeTree => unreachable!("sector partitions contain no whole-tree set"),
        };
        if abs == T::zero() {
            // Every descendant average is 0 <= t, so the walk ends in singletons of F.
            self.free.push(set.piece);
            return Ok(());
        }
        let k = set.index;
        let m = set.scale + 1;
        self.visit(PartitionSet { piece: GromovBall::Singleton(u.clone()), scale: m, index: k })?;
        for c in tree.children(&u) {
            let index = heap_index(&tree, &self.top, &c).expect("child lies in the sector");
            self.visit(PartitionSet { piece: GromovBall::Sector(c), scale: m, index })?;
        }
        Ok(())
    }
}

/// Runs the stopping-time selection on each `T_v`, `|v| = 1`, in parallel, and
/// assigns the root to `𝒬` when `|f(o)| > t` and to `ℱ` otherwise.
pub fn cz_decompose<T: Scalar>(f: &DenseFunction<T>, t: T, m: &ExpMeasure<T>) -> Result<CzDecomposition<T>> {
    if f.region().is_some() {
        return Err(TreeError::Parameter("the decomposition needs a finitely supported function".into()));
    }
    let tree = m.tree();
    let threshold = l1_norm(f, m)? / m.total_mass()?;
    if !(t > threshold) {
        return Err(TreeError::LevelTooLow { t: t.as_f64(), threshold: threshold.as_f64() });
    }
    let root = Vertex::root();
    let mut selected = Vec::new();
    let mut free = Vec::new();
    let f_root = f.get(&root);
    if f_root.abs() > t {
        let mass = m.density(0)?;
        selected.push(CzPiece {
            set: PartitionSet { piece: GromovBall::Singleton(root.clone()), scale: 0, index: 0 },
            mass,
            avg: f_root.abs(),
            g_value: f_root,
            reference: GromovBall::WholeTree,
        });
    } else {
        free.push(GromovBall::Singleton(root.clone()));
    }
    let tops: Vec<Vertex> = tree.children(&root).collect();
    let parts: Result<Vec<(Vec<CzPiece<T>>, Vec<GromovBall>)>> = tops
        .into_par_iter()
        .map(|v| {
            let mut w = Walker { f, m, t, top: v.clone(), selected: Vec::new(), free: Vec::new() };
            w.visit(PartitionSet { piece: GromovBall::Sector(v), scale: 0, index: 0 })?;
            Ok((w.selected, w.free))
        })
        .collect();
    for (s, fr) in parts? {
        selected.extend(s);
        free.extend(fr);
    }
    Ok(CzDecomposition { tree, alpha: m.alpha(), t, selected, free })
}

/// Which conclusion of the decomposition a violation concerns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CzCheck {
    Partition,
    BoundOnF,
    VanishingMean,
    TwoSidedAverage,
    OmegaMass,
    GNorm,
    GSup,
    BadPartL1,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzViolation {
    pub check: CzCheck,
    pub piece: Option<String>,
    pub detail: String,
}

/// Outcome of [`verify_cz`]. Every quantity is recomputed from `f` and the sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzReport<T> {
    pub t: T,
    pub f_l1: T,
    pub selected: usize,
    pub free: usize,
    pub omega_mass: T,
    pub g_norm_sq: T,
    /// `(1 + C_α²) t ‖f‖₁` with `C_α = D_α`.
    pub g_norm_bound: T,
    pub b_l1: T,
    /// `D_α`, used for the two-sided average bound and the norm bounds.
    pub c_alpha: T,
    /// `max{q^α, (1 - q^{1-α})^{-1}}`, valid for sets strictly inside a sector.
    pub c_sector: T,
    /// Selected sets whose average exceeds `c_sector · t`; only top-level sets may.
    pub above_sector_constant: Vec<String>,
    /// `‖g‖²` lies between the bound and twice the bound.
    pub g_norm_flagged: bool,
    pub violations: Vec<CzViolation>,
}

impl<T> CzReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the decomposition against `f` and `t`.
pub fn verify_cz<T: Scalar>(d: &CzDecomposition<T>, f: &DenseFunction<T>, t: T, m: &ExpMeasure<T>) -> Result<CzReport<T>> {
    let tree = m.tree();
    let tol = T::lit(CZ_TOL);
    let slack = T::one() + tol;
    let f_l1 = l1_norm(f, m)?;
    let c_alpha = m.doubling_constant();
    let c_sector = sector_ratio_constant(m);
    let mut violations = Vec::new();
    let mut above = Vec::new();
    let mut bad = |check, piece: Option<&GromovBall>, detail: String| {
        violations.push(CzViolation { check, piece: piece.map(|p| p.to_string()), detail });
    };

    // Partition: exact cover of a ball that reaches below every set, sectors
    // covering the frontier, and total mass.
    let deepest = d
        .selected
        .iter()
        .map(|p| &p.set.piece)
        .chain(&d.free)
        .map(|b| match b {
            GromovBall::Singleton(u) | GromovBall::Sector(u) => u.norm(),
            GromovBall::WholeTree => 0,
        })
        .max()
        .unwrap_or(0);
    let cut = deepest + 1;
    let sets: Vec<&GromovBall> = d.selected.iter().map(|p| &p.set.piece).chain(&d.free).collect();
    for z in tree.enumerate(&Region::ball(Vertex::root(), cut))? {
        let hits: Vec<&&GromovBall> = sets.iter().filter(|s| s.contains(&z)).collect();
        if hits.len() != 1 {
            bad(CzCheck::Partition, None, format!("{z} lies in {} sets", hits.len()));
        } else if z.norm() == cut && !matches!(hits[0], GromovBall::Sector(_) | GromovBall::WholeTree) {
            bad(CzCheck::Partition, Some(hits[0]), format!("frontier vertex {z} is not covered by a sector"));
        }
    }
    let mut total = T::zero();
    for s in &sets {
        total = total + m.measure_of_ball(s)?;
    }
    if (total - m.total_mass()?).abs() > tol * m.total_mass()? {
        bad(CzCheck::Partition, None, format!("sets carry mass {total}, the tree {}", m.total_mass()?));
    }

    // |f| <= t on F.
    for (z, &fz) in f.iter() {
        if d.piece_of(z).is_none() && fz.abs() > t * slack {
            bad(CzCheck::BoundOnF, None, format!("|f({z})| = {} > t", fz.abs()));
        }
    }

    let mut omega_mass = T::zero();
    let mut g_norm_sq = T::zero();
    let mut b_l1 = T::zero();
    let mut g_sup = T::zero();
    for p in &d.selected {
        let set = &p.set.piece;
        let mass = m.measure_of_ball(set)?;
        omega_mass = omega_mass + mass;
        let (abs, _) = weighted_sums(f, set, m)?;
        let avg = abs / mass;
        let mut mean = T::zero();
        let mut b_abs = T::zero();
        let mut support_mass = T::zero();
        for (z, &fz) in f.iter().filter(|(z, _)| set.contains(z)) {
            let w = m.density_at(z)?;
            mean = mean + (fz - p.g_value) * w;
            b_abs = b_abs + (fz - p.g_value).abs() * w;
            support_mass = support_mass + w;
        }
        // b_Q = -g on the part of Q where f vanishes.
        let rest = (mass - support_mass).max(T::zero());
        mean = mean - p.g_value * rest;
        b_abs = b_abs + p.g_value.abs() * rest;
        b_l1 = b_l1 + b_abs;
        g_norm_sq = g_norm_sq + p.g_value * p.g_value * mass;
        g_sup = g_sup.max(p.g_value.abs());
        let scale = abs.max(T::min_positive_value());
        if mean.abs() > tol * scale {
            bad(CzCheck::VanishingMean, Some(set), format!("Σ b_Q q^(-α|z|) = {:e}", mean.as_f64()));
        }
        if !(avg > t) || avg > c_alpha * t * slack {
            bad(CzCheck::TwoSidedAverage, Some(set), format!("average {avg} outside (t, C_α t] = ({t}, {}]", c_alpha * t));
        }
        if avg > c_sector * t * slack {
            above.push(set.to_string());
        }
        let reference_avg = weighted_sums(f, &p.reference, m)?.0 / m.measure_of_ball(&p.reference)?;
        if reference_avg > t * slack {
            bad(CzCheck::TwoSidedAverage, Some(set), format!("reference {} has average {reference_avg} > t", p.reference));
        }
    }
    for (z, &fz) in f.iter() {
        if d.piece_of(z).is_none() {
            g_norm_sq = g_norm_sq + fz * fz * m.density_at(z)?;
            g_sup = g_sup.max(fz.abs());
        }
    }
    if omega_mass > f_l1 / t * slack {
        bad(CzCheck::OmegaMass, None, format!("μ(Ω) = {omega_mass} > ‖f‖₁/t = {}", f_l1 / t));
    }
    let g_norm_bound = (T::one() + c_alpha * c_alpha) * t * f_l1;
    let g_norm_flagged = g_norm_sq > g_norm_bound * slack && g_norm_sq <= T::lit(2.0) * g_norm_bound;
    if g_norm_sq > T::lit(2.0) * g_norm_bound {
        bad(CzCheck::GNorm, None, format!("‖g‖² = {g_norm_sq} > 2 (1 + C_α²) t ‖f‖₁ = {}", T::lit(2.0) * g_norm_bound));
    }
    if g_sup > c_alpha * t * slack {
        bad(CzCheck::GSup, None, format!("‖g‖∞ = {g_sup} > C_α t"));
    }
    if b_l1 > (T::one() + c_alpha) * f_l1 * slack {
        bad(CzCheck::BadPartL1, None, format!("Σ ‖b_Q‖₁ = {b_l1} > (1 + C_α) ‖f‖₁"));
    }

    Ok(CzReport {
        t,
        f_l1,
        selected: d.selected.len(),
        free: d.free.len(),
        omega_mass,
        g_norm_sq,
        g_norm_bound,
        b_l1,
        c_alpha,
        c_sector,
        above_sector_constant: above,
        g_norm_flagged,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn mu(alpha: f64) -> ExpMeasure<f64> {
        ExpMeasure::new(Tree::new(2).unwrap(), alpha).unwrap()
    }

    fn random_f(m: &ExpMeasure<f64>, depth: usize, rng: &mut ChaCha8Rng) -> DenseFunction<f64> {
        let values: BTreeMap<Vertex, f64> =
            m.tree().ball_vertices(depth).into_iter().map(|v| (v, rng.gen_range(-1.0..1.0))).collect();
        DenseFunction::finitely_supported(m.tree(), values).unwrap()
    }

    #[test]
    fn level_below_threshold_is_rejected() {
        let m = mu(2.0);
        let f = DenseFunction::indicator(m.tree(), Vertex::root()).unwrap();
        // ‖f‖₁/μ(X) = 1/2.5.
        assert!(matches!(cz_decompose(&f, 0.4, &m), Err(TreeError::LevelTooLow { .. })));
        assert!(cz_decompose(&f, 0.41, &m).is_ok());
    }

    #[test]
    fn small_functions_give_an_empty_omega() {
        let m = mu(2.0);
        let values: BTreeMap<Vertex, f64> = m.tree().ball_vertices(2).into_iter().map(|v| (v, 0.3)).collect();
        let f = DenseFunction::finitely_supported(m.tree(), values).unwrap();
        let d = cz_decompose(&f, 0.5, &m).unwrap();
        assert!(d.selected.is_empty());
        for z in m.tree().ball_vertices(4) {
            assert_eq!(d.b(&f, &z), 0.0);
        }
        let r = verify_cz(&d, &f, 0.5, &m).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.b_l1, 0.0);
    }

    #[test]
    fn a_tall_spike_is_captured_by_a_set_with_bounded_average() {
        let m = mu(2.0);
        let w = Vertex::from_labels(vec![1, 0, 1]);
        let f = DenseFunction::finitely_supported(m.tree(), BTreeMap::from([(w.clone(), 1e6)])).unwrap();
        let t = 2.0 * 1e6 * 2f64.powi(-6) / 2.5;
        let d = cz_decompose(&f, t, &m).unwrap();
        let q = d.piece_of(&w).unwrap();
        assert!(q.avg > t && q.avg <= m.doubling_constant() * t);
        let r = verify_cz(&d, &f, t, &m).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.omega_mass <= r.f_l1 / t);
    }

    #[test]
    fn random_functions_pass_every_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for alpha in [1.5, 2.0, 3.0] {
            let m = mu(alpha);
            for _ in 0..40 {
                let f = random_f(&m, 4, &mut rng);
                let t = 2.0 * l1_norm(&f, &m).unwrap() / m.total_mass().unwrap();
                let d = cz_decompose(&f, t, &m).unwrap();
                let r = verify_cz(&d, &f, t, &m).unwrap();
                assert!(r.passed(), "{:?}", r.violations);
                assert!(!r.g_norm_flagged);
            }
        }
    }

    #[test]
    fn tampering_with_g_breaks_the_vanishing_mean() {
        let m = mu(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_f(&m, 4, &mut rng);
        let t = 1.01 * l1_norm(&f, &m).unwrap() / m.total_mass().unwrap();
        let mut d = cz_decompose(&f, t, &m).unwrap();
        assert!(!d.selected.is_empty());
        d.selected[0].g_value += 1e-3;
        let r = verify_cz(&d, &f, t, &m).unwrap();
        assert!(r.violations.iter().any(|v| v.check == CzCheck::VanishingMean));
    }

    #[test]
    fn root_spike_selects_the_root() {
        let m = mu(2.0);
        let f = DenseFunction::finitely_supported(m.tree(), BTreeMap::from([(Vertex::root(), 2.0)])).unwrap();
        let d = cz_decompose(&f, 1.0, &m).unwrap();
        assert_eq!(d.selected.len(), 1);
        assert_eq!(d.selected[0].set.piece, GromovBall::Singleton(Vertex::root()));
        assert_eq!(d.selected[0].reference, GromovBall::WholeTree);
        let r = verify_cz(&d, &f, 1.0, &m).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        let records = d.records(&f);
        assert_eq!(records[0].piece, "Singleton([])");
        assert_eq!(records[0].b, vec![("[]".to_string(), 0.0)]);
    }

    #[test]
    fn decompositions_are_deterministic() {
        let m = mu(1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_f(&m, 3, &mut rng);
        let t = 1.5 * l1_norm(&f, &m).unwrap() / m.total_mass().unwrap();
        let a = cz_decompose(&f, t, &m).unwrap();
        let b = cz_decompose(&f, t, &m).unwrap();
        assert_eq!(a, b);
    }
}
