//! Reproducible experiment drivers. Each returns plain rows in a canonical order,
//! independent of how many worker threads ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cz::{cz_decompose, doubling_check, hormander_check, random_unit_function, verify_cz, CzReport, DoublingReport, HormanderRow};
use crate::error::{Result, TreeError};
use crate::kernel::{KernelEvaluator, ProfileKernel, HORMANDER_TAIL_FRACTION};
use crate::measure::{ExpMeasure, RadialMeasure};
use crate::operators::{
    default_witness_r, fit_ratio_exponent, kernel_l1_moment, operator_norm_estimate, predicted_bounded, schur_window,
    NormMethod, NormOptions, OperatorKind, OperatorParams, SchurWindow, WitnessParams,
};
use crate::scalar::Scalar;
use crate::tree::{Tree, Vertex};

/// Largest number of values accepted on one grid axis.
pub const MAX_AXIS_VALUES: usize = 64;
/// Largest number of grid points in one phase diagram.
pub const MAX_GRID_POINTS: usize = 4096;
/// Residual above which a kernel table counts as a breach.
pub const KERNEL_RESIDUAL_TOL: f64 = 1e-10;

/// A representative pair `(z, x)` with `|z| = nz`, `|x| = nx`, `|z ∧ x| = l`.
pub fn profile_representatives(nz: usize, nx: usize, l: usize) -> Option<(Vertex, Vertex)> {
    if l > nz.min(nx) {
        return None;
    }
    let x = Tree::leftmost(nx);
    let mut labels = x.ancestor(l).labels().to_vec();
    if nz > l {
        // Leave x's path unless x stops at depth l.
        labels.push(if l < nx { 1 } else { 0 });
        labels.resize(nz, 0);
    }
    Some((Vertex::from_labels(labels), x))
}

/// One profile key of the kernel with its three evaluations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelTableRow {
    pub nz: usize,
    pub nx: usize,
    pub l: usize,
    pub closed: f64,
    pub recursive: f64,
    pub basis: f64,
    pub residual_recursive: f64,
    pub residual_basis: f64,
}

/// `K_σ(z, x)` on every profile key with `|z|, |x| <= depth`.
pub fn kernel_table<T: Scalar>(m: &RadialMeasure<T>, depth: usize) -> Result<Vec<KernelTableRow>> {
    let k = KernelEvaluator::new(m.clone())?;
    let keys: Vec<(usize, usize, usize)> = (0..=depth)
        .flat_map(|nz| (0..=depth).flat_map(move |nx| (0..=nz.min(nx)).map(move |l| (nz, nx, l))))
        .collect();
    keys.into_par_iter()
        .map(|(nz, nx, l)| {
            let (z, x) = profile_representatives(nz, nx, l).expect("key is admissible");
            let closed = k.kernel_closed(&z, &x)?;
            let recursive = k.kernel_recursive(&z, &x)?;
            let basis = k.kernel_from_basis(&z)?.eval(&x);
            debug_assert_eq!(ProfileKernel::profile(&k, nz, nx, l)?, k.kernel(&z, &x)?);
            Ok(KernelTableRow {
                nz,
                nx,
                l,
                closed: closed.as_f64(),
                recursive: recursive.as_f64(),
                basis: basis.as_f64(),
                residual_recursive: (recursive - closed).abs().as_f64(),
                residual_basis: (closed - basis).abs().as_f64(),
            })
        })
        .collect()
}

/// The largest of both residual columns.
pub fn max_residual(rows: &[KernelTableRow]) -> f64 {
    rows.iter().map(|r| r.residual_recursive.max(r.residual_basis)).fold(0.0, f64::max)
}

/// Axes of a phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub p: Vec<f64>,
    pub depths: Vec<usize>,
    pub kind: OperatorKind,
}

impl PhaseGrid {
    /// Grid points in `(a, b, c, p)` lexicographic order.
    pub fn points(&self) -> Result<Vec<(f64, f64, f64, f64)>> {
        let axes = [("a", self.a.len()), ("b", self.b.len()), ("c", self.c.len()), ("p", self.p.len()), ("depths", self.depths.len())];
        let over: Vec<String> = axes
            .iter()
            .filter(|(_, n)| *n > MAX_AXIS_VALUES || *n == 0)
            .map(|(name, n)| format!("{name} has {n} values"))
            .collect();
        if !over.is_empty() {
            return Err(TreeError::SizeLimit(format!(
                "each axis needs 1..={MAX_AXIS_VALUES} values: {}",
                over.join(", ")
            )));
        }
        let total = self.a.len() * self.b.len() * self.c.len() * self.p.len();
        if total > MAX_GRID_POINTS {
            return Err(TreeError::SizeLimit(format!("{total} grid points exceed {MAX_GRID_POINTS}")));
        }
        let mut out = Vec::with_capacity(total);
        for &a in &self.a {
            for &b in &self.b {
                for &c in &self.c {
                    for &p in &self.p {
                        out.push((a, b, c, p));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One grid point of a phase diagram.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub predicted_bounded: bool,
    /// Schur exponent window, when `p > 1` and it is nonempty.
    pub window_lo: Option<f64>,
    pub window_hi: Option<f64>,
    /// Restricted norm estimate at the deepest truncation and its certified bounds.
    pub norm: f64,
    pub norm_lower: f64,
    pub norm_upper: Option<f64>,
    /// Largest ratio between norm estimates at successive depths.
    pub max_step_ratio: f64,
    /// Growth exponent of `‖T g_v‖^p/‖g_v‖^p` in `log_q` per level; `None` when the
    /// image of the witness is not in `L^p_α`.
    pub witness_exponent: Option<f64>,
    pub theory_exponent: f64,
}

/// One depth of a norm trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub p: f64,
    pub depth: usize,
    pub vertices: usize,
    pub value: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    pub method: NormMethod,
    pub iterations: usize,
}

/// Depths of the leftmost vertices used to fit the witness exponent.
pub const WITNESS_FIT_DEPTHS: std::ops::RangeInclusive<usize> = 1..=8;

/// Evaluates one grid point.
pub fn phase_point(
    tree: Tree,
    alpha: f64,
    (a, b, c, p): (f64, f64, f64, f64),
    depths: &[usize],
    kind: OperatorKind,
    opts: &NormOptions,
) -> Result<(PhaseRow, Vec<TrajectoryRow>)> {
    let params = OperatorParams::new(a, b, c, kind)?;
    let mut trajectory = Vec::with_capacity(depths.len());
    for &d in depths {
        let e = operator_norm_estimate(tree, params, alpha, p, d, opts)?;
        trajectory.push(TrajectoryRow {
            a,
            b,
            c,
            p,
            depth: d,
            vertices: e.vertices,
            value: e.value,
            lower_bound: e.lower_bound,
            upper_bound: e.upper_bound,
            method: e.method,
            iterations: e.iterations,
        });
    }
    let max_step_ratio = trajectory
        .windows(2)
        .map(|w| if w[0].value > 0.0 { w[1].value / w[0].value } else { 1.0 })
        .fold(1.0, f64::max);
    let w = WitnessParams { params: OperatorParams::new(a, b, c, OperatorKind::T)?, alpha, p };
    let witness_exponent = match fit_ratio_exponent(&tree, &w, default_witness_r(&w), WITNESS_FIT_DEPTHS) {
        Ok(s) => Some(s),
        Err(TreeError::Divergent(_)) => None,
        Err(e) => return Err(e),
    };
    let (window_lo, window_hi) = match schur_window(a, b, c, p, alpha) {
        SchurWindow::Interval { lo, hi } => (Some(lo), Some(hi)),
        _ => (None, None),
    };
    let last = trajectory.last().expect("at least one depth");
    let row = PhaseRow {
        a,
        b,
        c,
        p,
        predicted_bounded: predicted_bounded(a, b, c, p, alpha),
        window_lo,
        window_hi,
        norm: last.value,
        norm_lower: last.lower_bound,
        norm_upper: last.upper_bound,
        max_step_ratio,
        witness_exponent,
        theory_exponent: (c - a - b) * p,
    };
    Ok((row, trajectory))
}

/// Every grid point, in grid order.
pub fn phase_diagram(
    tree: Tree,
    alpha: f64,
    grid: &PhaseGrid,
    opts: &NormOptions,
) -> Result<(Vec<PhaseRow>, Vec<TrajectoryRow>)> {
    let points = grid.points()?;
    let results: Vec<(PhaseRow, Vec<TrajectoryRow>)> = points
        .into_par_iter()
        .map(|pt| phase_point(tree, alpha, pt, &grid.depths, grid.kind, opts))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut traj = Vec::new();
    for (r, t) in results {
        rows.push(r);
        traj.extend(t);
    }
    Ok((rows, traj))
}

/// `Σ_z |K_γ(x, z)| q^{-β|z|}` at `|x| = nx`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub nx: usize,
    pub moment: f64,
    pub tail_bound: f64,
    pub per_level: Option<f64>,
}

pub fn moment_table(tree: Tree, gamma: f64, beta: f64, depths: &[usize]) -> Result<Vec<MomentRow>> {
    depths
        .par_iter()
        .map(|&n| {
            let s = kernel_l1_moment(tree, &Tree::leftmost(n), gamma, beta, 30, 0.01)?;
            Ok(MomentRow {
                nx: n,
                moment: s.value,
                tail_bound: s.tail_bound,
                per_level: if n == 0 { None } else { Some(s.value / n as f64) },
            })
        })
        .collect()
}

/// The Hörmander supremum of `K_α` for `|v| <= depth_v`.
pub fn hormander_scan(m: &ExpMeasure<f64>, depth_v: usize, depth_xy: usize, z_truncation: usize) -> Result<Vec<HormanderRow<f64>>> {
    let k = KernelEvaluator::new(m.measure().clone())?;
    Ok(hormander_check(&k, m.alpha(), depth_v, depth_xy, z_truncation, HORMANDER_TAIL_FRACTION)?.rows)
}

/// One decomposition of the demo.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzRun {
    pub trial: usize,
    /// `t = t_factor ‖f‖₁/μ(X)`.
    pub t_factor: f64,
    pub report: CzReport<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CzDemo {
    pub q: u32,
    pub alpha: f64,
    pub seed: u64,
    pub support_depth: usize,
    pub doubling: DoublingReport<f64>,
    pub runs: Vec<CzRun>,
}

impl CzDemo {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(|r| r.report.passed()) && self.doubling.holds(1e-12)
    }
}

/// Decomposes `trials` seeded random unit functions on `B(o, support_depth)` at
/// every level factor; trial `i` uses stream `i` of the generator.
pub fn cz_demo(
    m: &ExpMeasure<f64>,
    trials: usize,
    support_depth: usize,
    t_factors: &[f64],
    doubling_depth: usize,
    seed: u64,
) -> Result<CzDemo> {
    if let Some(bad) = t_factors.iter().find(|&&x| !(x > 1.0)) {
        return Err(TreeError::Parameter(format!("level factors must exceed 1, got {bad}")));
    }
    let total = m.total_mass()?;
    let runs: Vec<Vec<CzRun>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let f = random_unit_function(m, support_depth, &mut rng)?;
            t_factors
                .iter()
                .map(|&factor| {
                    let t = factor / total;
                    let d = cz_decompose(&f, t, m)?;
                    Ok(CzRun { trial: i, t_factor: factor, report: verify_cz(&d, &f, t, m)? })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(CzDemo {
        q: m.tree().q(),
        alpha: m.alpha(),
        seed,
        support_depth,
        doubling: doubling_check(m, doubling_depth)?,
        runs: runs.into_iter().flatten().collect(),
    })
}
