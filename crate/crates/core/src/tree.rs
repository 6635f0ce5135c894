//! Vertex addressing and metric geometry of the `q`-homogeneous tree.
//!
//! A vertex is identified by the word of child labels read along the geodesic
//! from the root `o`. The root has `q + 1` children labelled `0..=q`; every
//! other vertex has `q` children labelled `0..q`. No vertex table is ever
//! materialised: regions are walked lazily in lexicographic word order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TreeError};
use crate::scalar::Scalar;

/// Canonical word address of a vertex. The root is the empty word.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex(Vec<u32>);

impl Vertex {
    pub fn root() -> Self {
        Vertex(Vec::new())
    }

    /// Builds an address without checking labels against a branching number.
    pub fn from_labels(labels: impl Into<Vec<u32>>) -> Self {
        Vertex(labels.into())
    }

    pub fn labels(&self) -> &[u32] {
        &self.0
    }

    /// Distance from the root, `|v|`.
    pub fn norm(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// `p(v)`; `None` at the root.
    pub fn predecessor(&self) -> Option<Vertex> {
        if self.0.is_empty() {
            None
        } else {
            Some(Vertex(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// The vertex of `[o, v]` at the given depth. Panics if `depth > |v|`.
    pub fn ancestor(&self, depth: usize) -> Vertex {
        Vertex(self.0[..depth].to_vec())
    }

    /// `p^k(v)`, or `None` when `k > |v|`.
    pub fn nth_predecessor(&self, k: usize) -> Option<Vertex> {
        self.0.len().checked_sub(k).map(|d| self.ancestor(d))
    }

    pub fn child(&self, label: u32) -> Vertex {
        let mut w = self.0.clone();
        w.push(label);
        Vertex(w)
    }

    /// Label of the child of `p(v)` leading to `v`.
    pub fn last_label(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// True when `self` lies on `[o, other]`, i.e. `other ∈ T_self`.
    pub fn is_prefix_of(&self, other: &Vertex) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// True when `other ∈ T_self \ {self}`.
    pub fn is_strict_prefix_of(&self, other: &Vertex) -> bool {
        other.0.len() > self.0.len() && self.is_prefix_of(other)
    }

    /// `|u ∧ v|`: length of the longest common prefix.
    pub fn confluent_depth(&self, other: &Vertex) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// `u ∧ v`.
    pub fn confluent(&self, other: &Vertex) -> Vertex {
        self.ancestor(self.confluent_depth(other))
    }

    /// Geodesic distance `|u| + |v| - 2|u ∧ v|`.
    pub fn distance(&self, other: &Vertex) -> usize {
        self.norm() + other.norm() - 2 * self.confluent_depth(other)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("]")
    }
}

impl fmt::Debug for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Vertex {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| TreeError::AddressParse(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(Vertex::root());
        }
        inner
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| TreeError::AddressParse(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Vertex)
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A `q`-homogeneous tree: every vertex has `q + 1` neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tree {
    q: u32,
}

impl Tree {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 {
            return Err(TreeError::InvalidBranching(q));
        }
        Ok(Tree { q })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// `q` as a scalar.
    pub fn qs<T: Scalar>(&self) -> T {
        T::count(self.q as usize)
    }

    /// `#s(v)`: `q + 1` at the root, `q` elsewhere.
    pub fn num_children(&self, v: &Vertex) -> usize {
        self.successors_at_depth(v.norm())
    }

    /// `#s(v)` for any vertex at the given depth.
    pub fn successors_at_depth(&self, depth: usize) -> usize {
        if depth == 0 {
            self.q as usize + 1
        } else {
            self.q as usize
        }
    }

    pub fn validate(&self, v: &Vertex) -> Result<()> {
        for (i, &l) in v.0.iter().enumerate() {
            let max = if i == 0 { self.q } else { self.q - 1 };
            if l > max {
                return Err(TreeError::LabelOutOfRange {
                    address: v.to_string(),
                    position: i,
                    label: l,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Parses and validates a bracketed address such as `"[0,1,0]"`.
    pub fn parse_vertex(&self, s: &str) -> Result<Vertex> {
        let v: Vertex = s.parse()?;
        self.validate(&v)?;
        Ok(v)
    }

    /// The successors `s(v)` in label order.
    pub fn children<'a>(&self, v: &'a Vertex) -> impl Iterator<Item = Vertex> + 'a {
        (0..self.num_children(v) as u32).map(move |l| v.child(l))
    }

    /// All `q + 1` neighbours: the predecessor (if any) followed by the successors.
    pub fn neighbors(&self, v: &Vertex) -> Vec<Vertex> {
        let mut out = Vec::with_capacity(self.q as usize + 1);
        if let Some(p) = v.predecessor() {
            out.push(p);
        }
        out.extend(self.children(v));
        out
    }

    pub fn distance(&self, u: &Vertex, v: &Vertex) -> Result<usize> {
        self.validate(u)?;
        self.validate(v)?;
        Ok(u.distance(v))
    }

    pub fn confluent(&self, u: &Vertex, v: &Vertex) -> Result<Vertex> {
        self.validate(u)?;
        self.validate(v)?;
        Ok(u.confluent(v))
    }

    /// `#S(v, n)`: 1 for `n = 0`, `(q+1) q^(n-1)` otherwise.
    pub fn sphere_size(&self, n: usize) -> u64 {
        if n == 0 {
            1
        } else {
            (self.q as u64 + 1).saturating_mul((self.q as u64).saturating_pow(n as u32 - 1))
        }
    }

    /// `#B(v, n)`.
    pub fn ball_size(&self, n: usize) -> u64 {
        (0..=n).map(|k| self.sphere_size(k)).fold(0u64, u64::saturating_add)
    }

    /// Number of vertices at depth `n` inside `T_v`, for `n >= |v|`.
    pub fn sector_layer_size(&self, v: &Vertex, n: usize) -> u64 {
        if n < v.norm() {
            0
        } else if v.is_root() {
            self.sphere_size(n)
        } else {
            (self.q as u64).pow((n - v.norm()) as u32)
        }
    }

    /// Number of vertices `z` with `|z| = n` and `|z ∧ v| = l`, where `v` is any
    /// vertex with `|v| > l`.
    pub fn confluent_class_size(&self, l: usize, n: usize) -> u64 {
        if n < l {
            0
        } else if n == l {
            1
        } else {
            let other_children = self.successors_at_depth(l) as u64 - 1;
            other_children * (self.q as u64).pow((n - l - 1) as u32)
        }
    }

    /// [`Tree::sphere_size`] in floating point.
    pub fn sphere_count<T: Scalar>(&self, n: usize) -> T {
        if n == 0 {
            T::one()
        } else {
            let q: T = self.qs();
            (q + T::one()) * q.powi(n as i32 - 1)
        }
    }

    /// [`Tree::confluent_class_size`] in floating point; exact while it fits, no overflow past.
    pub fn confluent_class_count<T: Scalar>(&self, l: usize, n: usize) -> T {
        if n < l {
            T::zero()
        } else if n == l {
            T::one()
        } else {
            T::count(self.successors_at_depth(l) - 1) * self.qs::<T>().powi((n - l - 1) as i32)
        }
    }

    /// Gromov distance `ρ(u, v) = e^{-|u ∧ v|}` for `u ≠ v`, 0 otherwise.
    pub fn gromov_distance<T: Scalar>(&self, u: &Vertex, v: &Vertex) -> T {
        if u == v {
            T::zero()
        } else {
            gromov_level::<T>(u.confluent_depth(v))
        }
    }

    /// The Gromov ball `{u : ρ(v, u) < r}`.
    ///
    /// The sector depth is the least `ℓ` with `e^{-ℓ} < r`, so the ball agrees
    /// pointwise with [`Tree::gromov_distance`] for every radius, including
    /// radii of the form `e^{-k}`.
    pub fn gromov_ball<T: Scalar>(&self, v: &Vertex, r: T) -> Result<GromovBall> {
        if !(r > T::zero()) {
            return Err(TreeError::Parameter(format!("Gromov radius must be positive, got {r}")));
        }
        if r > T::one() {
            return Ok(GromovBall::WholeTree);
        }
        // least l >= 0 with exp(-l) < r; r <= 1 forces l >= 1
        let mut l = (-r.ln()).floor().to_usize().unwrap_or(0).saturating_sub(1);
        while gromov_level::<T>(l) >= r {
            l += 1;
        }
        if l > v.norm() {
            Ok(GromovBall::Singleton(v.clone()))
        } else {
            Ok(GromovBall::Sector(v.ancestor(l)))
        }
    }

    /// Every distinct Gromov ball centred at `v`, with a radius realising it,
    /// ordered from the singleton to the whole tree (`|v| + 2` balls).
    pub fn gromov_balls_at<T: Scalar>(&self, v: &Vertex) -> Vec<(T, GromovBall)> {
        let n = v.norm();
        let mut out = Vec::with_capacity(n + 2);
        out.push((gromov_level::<T>(n), GromovBall::Singleton(v.clone())));
        for l in (1..=n).rev() {
            out.push((gromov_level::<T>(l - 1), GromovBall::Sector(v.ancestor(l))));
        }
        out.push((T::lit(2.0), GromovBall::WholeTree));
        out
    }

    /// Lazily walks a finite region in lexicographic word order.
    pub fn enumerate(&self, region: &Region) -> Result<Walk> {
        if let Region::Sector { root, max_depth: None } = region {
            return Err(TreeError::UnboundedRegion(format!(
                "sector {root} needs a depth cutoff"
            )));
        }
        if let Some(c) = region.anchor() {
            self.validate(c)?;
        }
        Ok(Walk {
            tree: *self,
            region: region.clone(),
            stack: vec![Vertex::root()],
        })
    }

    /// Convenience: all vertices of `B(o, n)` in lexicographic order.
    pub fn ball_vertices(&self, n: usize) -> Vec<Vertex> {
        self.enumerate(&Region::ball(Vertex::root(), n))
            .expect("root ball is finite")
            .collect()
    }

    /// Convenience: all vertices of `S(o, n)` in lexicographic order.
    pub fn sphere_vertices(&self, n: usize) -> Vec<Vertex> {
        self.enumerate(&Region::sphere(Vertex::root(), n))
            .expect("root sphere is finite")
            .collect()
    }

    /// A canonical vertex at the given depth: all labels zero.
    pub fn leftmost(depth: usize) -> Vertex {
        Vertex(vec![0; depth])
    }
}

/// `e^{-ℓ}` evaluated identically everywhere it is used.
pub fn gromov_level<T: Scalar>(l: usize) -> T {
    (-T::count(l)).exp()
}

/// A ball of the Gromov metric: a singleton, a sector, or the whole tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GromovBall {
    Singleton(Vertex),
    Sector(Vertex),
    WholeTree,
}

impl GromovBall {
    pub fn contains(&self, u: &Vertex) -> bool {
        match self {
            GromovBall::Singleton(v) => v == u,
            GromovBall::Sector(v) => v.is_prefix_of(u),
            GromovBall::WholeTree => true,
        }
    }

    /// The region of the ball cut at absolute depth `max_depth`.
    pub fn truncated(&self, max_depth: usize) -> Region {
        match self {
            GromovBall::Singleton(v) => Region::ball(v.clone(), 0),
            GromovBall::Sector(v) => Region::sector(v.clone(), max_depth),
            GromovBall::WholeTree => Region::sector(Vertex::root(), max_depth),
        }
    }
}

impl fmt::Display for GromovBall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GromovBall::Singleton(v) => write!(f, "Singleton({v})"),
            GromovBall::Sector(v) => write!(f, "Sector({v})"),
            GromovBall::WholeTree => f.write_str("WholeTree"),
        }
    }
}

/// A region of the tree that can be walked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    /// `B(center, radius)` for the graph metric.
    Ball { center: Vertex, radius: usize },
    /// `S(center, radius)` for the graph metric.
    Sphere { center: Vertex, radius: usize },
    /// `T_root ∩ {|x| <= max_depth}`; `None` is unbounded and cannot be walked.
    Sector { root: Vertex, max_depth: Option<usize> },
}

impl Region {
    pub fn ball(center: Vertex, radius: usize) -> Self {
        Region::Ball { center, radius }
    }

    pub fn sphere(center: Vertex, radius: usize) -> Self {
        Region::Sphere { center, radius }
    }

    pub fn sector(root: Vertex, max_depth: usize) -> Self {
        Region::Sector { root, max_depth: Some(max_depth) }
    }

    fn anchor(&self) -> Option<&Vertex> {
        match self {
            Region::Ball { center, .. } | Region::Sphere { center, .. } => Some(center),
            Region::Sector { root, .. } => Some(root),
        }
    }

    pub fn contains(&self, u: &Vertex) -> bool {
        match self {
            Region::Ball { center, radius } => u.distance(center) <= *radius,
            Region::Sphere { center, radius } => u.distance(center) == *radius,
            Region::Sector { root, max_depth } => {
                root.is_prefix_of(u) && max_depth.is_none_or(|m| u.norm() <= m)
            }
        }
    }

    /// (emit, descend) for a vertex reached by the walk.
    fn visit(&self, u: &Vertex) -> (bool, bool) {
        match self {
            Region::Ball { center, radius } | Region::Sphere { center, radius } => {
                let d = u.distance(center);
                let emit = match self {
                    Region::Ball { .. } => d <= *radius,
                    _ => d == *radius,
                };
                let descend = if u.is_prefix_of(center) {
                    u.norm() < center.norm() + radius
                } else {
                    d < *radius
                };
                (emit, descend)
            }
            Region::Sector { root, max_depth } => {
                let m = max_depth.unwrap_or(usize::MAX);
                if root.is_prefix_of(u) {
                    (u.norm() <= m, u.norm() < m)
                } else if u.is_prefix_of(root) {
                    (false, true)
                } else {
                    (false, false)
                }
            }
        }
    }
}

/// Lexicographic pre-order walk over a [`Region`].
pub struct Walk {
    tree: Tree,
    region: Region,
    stack: Vec<Vertex>,
}

impl Iterator for Walk {
    type Item = Vertex;

    fn next(&mut self) -> Option<Vertex> {
        while let Some(u) = self.stack.pop() {
            let (emit, descend) = self.region.visit(&u);
            if descend {
                let k = self.tree.num_children(&u) as u32;
                for l in (0..k).rev() {
                    self.stack.push(u.child(l));
                }
            }
            if emit {
                return Some(u);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashSet, VecDeque};

    fn v(s: &str) -> Vertex {
        s.parse().unwrap()
    }

    /// Breadth-first distances on the explicit truncated graph.
    fn bfs_distance(tree: &Tree, depth: usize, a: &Vertex, b: &Vertex) -> usize {
        let verts: HashSet<Vertex> = tree.ball_vertices(depth).into_iter().collect();
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([(a.clone(), 0usize)]);
        seen.insert(a.clone());
        while let Some((u, d)) = queue.pop_front() {
            if &u == b {
                return d;
            }
            for w in tree.neighbors(&u) {
                if verts.contains(&w) && seen.insert(w.clone()) {
                    queue.push_back((w, d + 1));
                }
            }
        }
        unreachable!("truncated ball is connected")
    }

    #[test]
    fn distance_examples() {
        let t = Tree::new(2).unwrap();
        assert_eq!(t.distance(&v("[0]"), &v("[0,1]")).unwrap(), 1);
        assert_eq!(t.distance(&Vertex::root(), &Vertex::root()).unwrap(), 0);
        assert_eq!(t.distance(&v("[0,1,0]"), &v("[1]")).unwrap(), 4);
        assert_eq!(bfs_distance(&t, 4, &v("[0,1,0]"), &v("[1]")), 4);
    }

    #[test]
    fn distance_matches_bfs_on_small_ball() {
        let t = Tree::new(2).unwrap();
        let verts = t.ball_vertices(3);
        for a in verts.iter().step_by(3) {
            for b in verts.iter().step_by(5) {
                assert_eq!(a.distance(b), bfs_distance(&t, 3, a, b), "{a} {b}");
            }
        }
    }

    #[test]
    fn validation_rejects_bad_labels() {
        let t = Tree::new(2).unwrap();
        assert!(t.validate(&v("[2,1]")).is_ok());
        assert!(matches!(
            t.distance(&v("[3]"), &Vertex::root()),
            Err(TreeError::LabelOutOfRange { .. })
        ));
        assert!(t.validate(&v("[0,2]")).is_err());
        assert!(Tree::new(1).is_err());
    }

    #[test]
    fn confluent_examples() {
        assert_eq!(v("[0,1,0]").confluent(&v("[0,0]")), v("[0]"));
        assert_eq!(v("[2,1]").confluent(&v("[2,1]")), v("[2,1]"));
        assert_eq!(v("[1,0,1]").confluent(&v("[2,1]")), Vertex::root());
    }

    #[test]
    fn sphere_sizes() {
        let t2 = Tree::new(2).unwrap();
        let t3 = Tree::new(3).unwrap();
        assert_eq!(t2.sphere_size(0), 1);
        assert_eq!(t2.sphere_size(3), 12);
        assert_eq!(t3.sphere_size(2), 12);
        for n in 0..6 {
            assert_eq!(t3.sphere_vertices(n).len() as u64, t3.sphere_size(n));
        }
    }

    #[test]
    fn gromov_distance_examples() {
        let t = Tree::new(2).unwrap();
        let a = v("[0,1]");
        assert_eq!(t.gromov_distance::<f64>(&a, &a), 0.0);
        assert_eq!(t.gromov_distance::<f64>(&v("[0]"), &v("[1]")), 1.0);
        assert!((t.gromov_distance::<f64>(&a, &v("[0,0]")) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gromov_ball_examples() {
        let t = Tree::new(2).unwrap();
        let c = v("[0,1,0]");
        // ρ < 0.5 forces |u ∧ c| >= 1
        assert_eq!(t.gromov_ball(&c, 0.5f64).unwrap(), GromovBall::Sector(v("[0]")));
        assert_eq!(
            t.gromov_ball(&c, (-3.0f64).exp()).unwrap(),
            GromovBall::Singleton(c.clone())
        );
        assert_eq!(t.gromov_ball(&Vertex::root(), 2.0f64).unwrap(), GromovBall::WholeTree);
        assert_eq!(
            t.gromov_ball(&Vertex::root(), 1.0f64).unwrap(),
            GromovBall::Singleton(Vertex::root())
        );
        assert!(t.gromov_ball(&c, 0.0f64).is_err());
        // tie radius e^{-1}: ρ(c,u) < e^{-1} needs |u ∧ c| >= 2
        assert_eq!(
            t.gromov_ball(&c, (-1.0f64).exp()).unwrap(),
            GromovBall::Sector(v("[0,1]"))
        );
        assert_eq!(t.gromov_ball(&c, 1.0f64).unwrap(), GromovBall::Sector(v("[0]")));
    }

    #[test]
    fn every_vertex_centres_norm_plus_two_balls() {
        let t = Tree::new(2).unwrap();
        for c in t.ball_vertices(4) {
            let mut radii: Vec<f64> = vec![2.0, 1.5, 1.0];
            for k in 0..=c.norm() + 2 {
                let e = (-(k as f64)).exp();
                radii.extend([e, 0.7 * e, 1.2 * e]);
            }
            let balls: HashSet<GromovBall> =
                radii.iter().map(|&r| t.gromov_ball(&c, r).unwrap()).collect();
            assert_eq!(balls.len(), c.norm() + 2, "centre {c}");
            let listed: HashSet<GromovBall> =
                t.gromov_balls_at::<f64>(&c).into_iter().map(|(_, b)| b).collect();
            assert_eq!(balls, listed);
            for (r, b) in t.gromov_balls_at::<f64>(&c) {
                assert_eq!(t.gromov_ball(&c, r).unwrap(), b);
            }
        }
    }

    #[test]
    fn gromov_ball_matches_pointwise_definition() {
        let t = Tree::new(2).unwrap();
        let pts = t.ball_vertices(5);
        for c in t.ball_vertices(3) {
            for k in 0..=4 {
                for r in [(-(k as f64)).exp(), 0.8 * (-(k as f64)).exp(), 1.3] {
                    let ball = t.gromov_ball(&c, r).unwrap();
                    for u in &pts {
                        assert_eq!(
                            ball.contains(u),
                            t.gromov_distance::<f64>(&c, u) < r,
                            "c={c} r={r} u={u}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_counts_and_order() {
        let t = Tree::new(2).unwrap();
        let s0: Vec<_> = t.enumerate(&Region::sphere(Vertex::root(), 0)).unwrap().collect();
        assert_eq!(s0, vec![Vertex::root()]);
        assert_eq!(t.sphere_vertices(2).len(), 6);
        let ball = t.ball_vertices(2);
        assert_eq!(ball.len(), 10);
        let mut sorted = ball.clone();
        sorted.sort();
        assert_eq!(ball, sorted);
        assert!(matches!(
            t.enumerate(&Region::Sector { root: v("[1]"), max_depth: None }),
            Err(TreeError::UnboundedRegion(_))
        ));
    }

    #[test]
    fn enumeration_of_off_root_regions_matches_filter() {
        let t = Tree::new(3).unwrap();
        let all = t.ball_vertices(6);
        let regions = [
            Region::ball(v("[1,2]"), 3),
            Region::sphere(v("[0,0,1]"), 2),
            Region::sector(v("[3,1]"), 5),
        ];
        for r in regions {
            let walked: Vec<_> = t.enumerate(&r).unwrap().collect();
            let filtered: Vec<_> = all.iter().filter(|u| r.contains(u)).cloned().collect();
            assert_eq!(walked, filtered, "{r:?}");
        }
    }

    #[test]
    fn successors_and_predecessors() {
        let t = Tree::new(3).unwrap();
        for u in t.ball_vertices(3) {
            let expected = if u.is_root() { 4 } else { 3 };
            assert_eq!(t.children(&u).count(), expected);
            assert_eq!(t.neighbors(&u).len(), 4);
            if let Some(p) = u.predecessor() {
                assert_eq!(p.norm() + 1, u.norm());
            }
        }
        assert_eq!(Vertex::root().predecessor(), None);
    }

    #[test]
    fn address_text_form() {
        assert_eq!(Vertex::root().to_string(), "[]");
        assert_eq!(v("[0, 1,0]").to_string(), "[0,1,0]");
        assert_eq!(v("[]"), Vertex::root());
        assert!("0,1".parse::<Vertex>().is_err());
        assert!("[a]".parse::<Vertex>().is_err());
    }

    #[test]
    fn confluent_class_sizes_add_up() {
        let t = Tree::new(2).unwrap();
        let c = v("[1,0,1,1]");
        for n in 0..7 {
            let layer = t.sphere_vertices(n);
            for l in 0..c.norm() {
                let direct = layer.iter().filter(|z| z.confluent_depth(&c) == l).count() as u64;
                assert_eq!(direct, t.confluent_class_size(l, n), "l={l} n={n}");
            }
        }
    }
}
