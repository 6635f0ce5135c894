//! Calderón–Zygmund theory for `(X, ρ, μ_α)`: sector partitions, the
//! decomposition at a level `t`, and Hörmander-type checks for kernels.

mod decompose;
mod hormander;
mod weak;

pub use decompose::{cz_decompose, verify_cz, CzCheck, CzDecomposition, CzPiece, CzRecord, CzReport, CzViolation};
pub use hormander::{hormander_check, AntiDecayingKernel, HormanderReport, HormanderRow, ZeroKernel};
pub use weak::{
    kernel_level_sets, least_squares_slope, projection_distribution, random_unit_function, weak_type_experiment,
    witness_contrast, Distribution, WeakTypeRow, WitnessContrastRow,
};

use serde::Serialize;

use crate::error::{Result, TreeError};
use crate::measure::ExpMeasure;
use crate::scalar::Scalar;
use crate::tree::{GromovBall, Tree, Vertex};

/// Largest `I_m` accepted by [`partition`].
pub const MAX_PARTITION_INDEX: u64 = 1 << 20;

/// `I_m = (q^{m+1} - q)/(q - 1)`: the largest index at scale `m`.
pub fn index_bound(q: u32, m: usize) -> u64 {
    let q = q as u64;
    (q.saturating_pow(m as u32 + 1) - q) / (q - 1)
}

/// `v_k` in the labelling `v_0 = v`, `s(v_k) = {v_{qk+1}, …, v_{qk+q}}`.
pub fn heap_vertex(tree: &Tree, v: &Vertex, k: u64) -> Vertex {
    let q = tree.q() as u64;
    let mut labels = Vec::new();
    let mut k = k;
    while k > 0 {
        labels.push(((k - 1) % q) as u32);
        k = (k - 1) / q;
    }
    let mut out = v.clone();
    for &l in labels.iter().rev() {
        out = out.child(l);
    }
    out
}

/// Index of `u ∈ T_v` in the labelling of [`heap_vertex`].
pub fn heap_index(tree: &Tree, v: &Vertex, u: &Vertex) -> Option<u64> {
    if !v.is_prefix_of(u) {
        return None;
    }
    let q = tree.q() as u64;
    Some(u.labels()[v.norm()..].iter().fold(0u64, |k, &l| q * k + l as u64 + 1))
}

/// Scale at which `v_k` first appears, i.e. its depth below `v`.
#[cfg(test)]
fn scale_of_index(q: u32, k: u64) -> usize {
    let mut m = 0;
    while index_bound(q, m) < k {
        m += 1;
    }
    m
}

/// The set `Q_{k,m}` of a sector partition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct PartitionSet {
    #[serde(serialize_with = "crate::cz::ser_ball")]
    pub piece: GromovBall,
    pub scale: usize,
    pub index: u64,
}

pub(crate) fn ser_ball<S: serde::Serializer>(b: &GromovBall, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(b)
}

impl PartitionSet {
    /// The set of the previous scale containing this one; `None` at scale 0.
    pub fn parent(&self, tree: &Tree, v: &Vertex) -> Option<PartitionSet> {
        if self.scale == 0 {
            return None;
        }
        let m = self.scale;
        let q = tree.q();
        let k = self.index;
        let (index, sector) = match self.piece {
            GromovBall::Sector(_) => ((k - 1) / q as u64, true),
            _ if m >= 2 && k <= index_bound(q, m - 2) => (k, false),
            _ => (k, true),
        };
        let u = heap_vertex(tree, v, index);
        let piece = if sector { GromovBall::Sector(u) } else { GromovBall::Singleton(u) };
        Some(PartitionSet { piece, scale: m - 1, index })
    }
}

/// The partition `{Q_{k,m} : 0 <= k <= I_m}` of `T_v`.
pub fn partition(tree: &Tree, v: &Vertex, m: usize) -> Result<Vec<PartitionSet>> {
    tree.validate(v)?;
    if v.is_root() {
        return Err(TreeError::Parameter(
            "partitions are built inside T_v for v != o; the root is handled by the decomposition".into(),
        ));
    }
    let top = index_bound(tree.q(), m);
    if top > MAX_PARTITION_INDEX {
        return Err(TreeError::SizeLimit(format!("I_{m} = {top} exceeds {MAX_PARTITION_INDEX}")));
    }
    let singletons = if m == 0 { None } else { Some(index_bound(tree.q(), m - 1)) };
    Ok((0..=top)
        .map(|k| {
            let u = heap_vertex(tree, v, k);
            let piece = match singletons {
                Some(s) if k <= s => GromovBall::Singleton(u),
                _ => GromovBall::Sector(u),
            };
            PartitionSet { piece, scale: m, index: k }
        })
        .collect())
}

/// `max{q^α, (1 - q^{1-α})^{-1}}`: the ratio bound between nested partition sets
/// inside one sector.
pub fn sector_ratio_constant<T: Scalar>(m: &ExpMeasure<T>) -> T {
    let q: T = m.tree().qs();
    let qa = q.powf(m.alpha());
    qa.max((T::one() - q.powf(T::one() - m.alpha())).recip())
}

/// Largest `μ(B(v, 2r))/μ(B(v, r))` found by [`doubling_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingReport<T> {
    pub max_ratio: T,
    pub claimed: T,
    pub center: Vertex,
    #[serde(serialize_with = "crate::cz::ser_ball")]
    pub ball: GromovBall,
    pub balls_checked: usize,
}

impl<T: Scalar> DoublingReport<T> {
    pub fn holds(&self, tol: T) -> bool {
        self.max_ratio <= self.claimed * (T::one() + tol)
    }
}

/// Enumerates every Gromov ball centred in `B(o, depth)` and every radius in its
/// menu, and compares the worst doubling ratio with `D_α`.
///
/// Each ball `B(v, r)` is realised on an interval of radii whose right endpoint
/// `r*` maximises `B(v, 2r)`; those endpoints form the menu.
pub fn doubling_check<T: Scalar>(m: &ExpMeasure<T>, depth: usize) -> Result<DoublingReport<T>> {
    let tree = m.tree();
    let mut best: Option<DoublingReport<T>> = None;
    let mut checked = 0;
    for v in tree.ball_vertices(depth) {
        for (r, ball) in tree.gromov_balls_at::<T>(&v) {
            let big = tree.gromov_ball(&v, r + r)?;
            let ratio = m.measure_of_ball(&big)? / m.measure_of_ball(&ball)?;
            checked += 1;
            if best.as_ref().is_none_or(|b| ratio > b.max_ratio) {
                best = Some(DoublingReport {
                    max_ratio: ratio,
                    claimed: m.doubling_constant(),
                    center: v.clone(),
                    ball,
                    balls_checked: 0,
                });
            }
        }
    }
    let mut out = best.expect("the root ball is always checked");
    out.balls_checked = checked;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    fn t(q: u32) -> Tree {
        Tree::new(q).unwrap()
    }

    #[test]
    fn index_bounds() {
        assert_eq!(index_bound(2, 0), 0);
        assert_eq!(index_bound(2, 1), 2);
        assert_eq!(index_bound(2, 2), 6);
        assert_eq!(index_bound(3, 2), 12);
    }

    #[test]
    fn heap_labelling_round_trips() {
        let tree = t(3);
        let v = Vertex::from_labels(vec![2, 1]);
        for k in 0..200 {
            let u = heap_vertex(&tree, &v, k);
            assert_eq!(heap_index(&tree, &v, &u), Some(k));
            assert_eq!(u.norm() - v.norm(), scale_of_index(3, k));
            let kids: Vec<u64> = tree.children(&u).map(|c| heap_index(&tree, &v, &c).unwrap()).collect();
            assert_eq!(kids, (1..=3).map(|l| 3 * k + l).collect::<Vec<_>>());
        }
    }

    #[test]
    fn partition_examples() {
        let tree = t(2);
        let v = Vertex::from_labels(vec![1]);
        let p0 = partition(&tree, &v, 0).unwrap();
        assert_eq!(p0, vec![PartitionSet { piece: GromovBall::Sector(v.clone()), scale: 0, index: 0 }]);
        assert_eq!(partition(&tree, &v, 2).unwrap().len(), 7);
        assert!(partition(&tree, &Vertex::root(), 1).is_err());
    }

    #[test]
    fn partitions_cover_the_sector_exactly() {
        for q in [2, 3] {
            let tree = t(q);
            let v = Vertex::from_labels(vec![0]);
            for m in 0..4 {
                let pieces = partition(&tree, &v, m).unwrap();
                let cut = v.norm() + m + 3;
                let mut seen = BTreeSet::new();
                for u in tree.enumerate(&crate::tree::Region::sector(v.clone(), cut)).unwrap() {
                    let hits = pieces.iter().filter(|p| p.piece.contains(&u)).count();
                    assert_eq!(hits, 1, "q={q} m={m} u={u}");
                    seen.insert(u);
                }
                // Every sector piece reaches the cut, so tails match.
                for p in &pieces {
                    if let GromovBall::Sector(u) = &p.piece {
                        assert!(u.norm() <= cut);
                    }
                }
                let mu = ExpMeasure::new(tree, 2.0f64).unwrap();
                let total: f64 = pieces.iter().map(|p| mu.measure_of_ball(&p.piece).unwrap()).sum();
                assert_relative_eq!(total, mu.sector_mass(&v).unwrap(), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn partitions_refine_with_bounded_ratios() {
        for alpha in [1.5, 2.0, 3.0] {
            let tree = t(2);
            let mu = ExpMeasure::new(tree, alpha).unwrap();
            let c = sector_ratio_constant(&mu);
            let v = Vertex::from_labels(vec![2, 0]);
            for m in 1..5 {
                let coarse = partition(&tree, &v, m - 1).unwrap();
                for p in partition(&tree, &v, m).unwrap() {
                    let parent = p.parent(&tree, &v).unwrap();
                    assert!(coarse.contains(&parent));
                    let containing: Vec<_> = coarse
                        .iter()
                        .filter(|c| match &p.piece {
                            GromovBall::Singleton(u) | GromovBall::Sector(u) => c.piece.contains(u),
                            GromovBall::WholeTree => false,
                        })
                        .collect();
                    assert_eq!(containing, vec![&parent]);
                    let ratio = mu.measure_of_ball(&parent.piece).unwrap() / mu.measure_of_ball(&p.piece).unwrap();
                    assert!(ratio >= 1.0 - 1e-15 && ratio <= c * (1.0 + 1e-13), "ratio {ratio} vs {c}");
                }
            }
        }
    }

    #[test]
    fn doubling_constants() {
        for (alpha, expected) in [(2.0, 5.0), (3.0, 9.0)] {
            let mu = ExpMeasure::new(t(2), alpha).unwrap();
            let r = doubling_check(&mu, 6).unwrap();
            assert_relative_eq!(r.claimed, expected, max_relative = 1e-15);
            assert_relative_eq!(r.max_ratio, expected, max_relative = 1e-12);
            assert_eq!(r.balls_checked, (0..=6).map(|n| t(2).sphere_size(n) as usize * (n + 2)).sum::<usize>());
        }
        // Near α = 1 the root ratio B_α dominates.
        let mu = ExpMeasure::new(t(2), 1.2f64).unwrap();
        let r = doubling_check(&mu, 3).unwrap();
        assert_relative_eq!(r.max_ratio, mu.b_total(), max_relative = 1e-12);
        assert!(r.center.is_root());

        let mu = ExpMeasure::new(t(2), 2.0f64).unwrap();
        let v = Vertex::from_labels(vec![1, 1]);
        let ratio = mu.sector_mass(&v).unwrap() / mu.density_at(&v).unwrap();
        assert_relative_eq!(ratio, 1.0 / (1.0 - 0.5), max_relative = 1e-13);
    }
}
