//! `treeberg`: reproducible experiments on harmonic Bergman spaces of trees.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a checked bound was
//! breached (outputs are still written).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::ExperimentConfig;
use treeberg_core::cz::hormander_check;
use treeberg_core::experiments::{cz_demo, kernel_table, max_residual, moment_table, phase_diagram, PhaseGrid};
use treeberg_core::measure::MeasureSpec;
use treeberg_core::operators::NormOptions;
use treeberg_core::{ExpMeasure, Kernel, Tree};

/// Environment variable holding the worker count.
const WORKERS_VAR: &str = "TREEBERG_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "treeberg", version, about = "Experiments on harmonic Bergman spaces of homogeneous trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Configuration file (`key = value` lines under `[section]` headers).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel values over profile keys with the three-way residuals.
    KernelTable(Common),
    /// Predicted boundedness, norm trajectories and witness exponents on a grid.
    PhaseDiagram(Common),
    /// Seeded Calderón–Zygmund decompositions with verifier reports.
    CzDemo(Common),
    /// Truncated Hörmander supremum and the kernel moment table.
    HormanderScan(Common),
}

/// How a command ended when it did not fail outright.
enum Outcome {
    Clean,
    Breach(String),
}

fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct PhaseCsvRow {
    a: f64,
    b: f64,
    c: f64,
    p: f64,
    predicted_bounded: bool,
    window_lo: Option<f64>,
    window_hi: Option<f64>,
    norm: f64,
    norm_lower: f64,
    norm_upper: Option<f64>,
    max_step_ratio: f64,
    /// Only judged where the point is predicted bounded.
    step_ok: Option<bool>,
    witness_exponent: Option<f64>,
    theory_exponent: f64,
    /// Only judged where `c > a + b`.
    witness_ok: Option<bool>,
}

#[derive(Serialize)]
struct HormanderCsvRow {
    depth_v: usize,
    value: f64,
    tail_bound: f64,
    truncation: usize,
    nv: usize,
    nx: usize,
    ny: usize,
    ratio: Option<f64>,
    tail_ok: bool,
}

fn kernel_table_cmd(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let spec = MeasureSpec { q: cfg.q, kind: cfg.measure_kind() };
    let m = spec.build::<f64>()?;
    let rows = kernel_table(&m, cfg.kernel_table.depth)?;
    write_csv(&out.join("kernel_table.csv"), &rows)?;
    let worst = max_residual(&rows);
    println!("kernel-table: {} rows, max residual {worst:e}", rows.len());
    if worst > cfg.kernel_table.residual_tol {
        return Ok(Outcome::Breach(format!("residual {worst:e} exceeds {:e}", cfg.kernel_table.residual_tol)));
    }
    Ok(Outcome::Clean)
}

fn phase_diagram_cmd(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let alpha = cfg.exponential_alpha("phase-diagram")?;
    let pd = &cfg.phase_diagram;
    let grid = PhaseGrid {
        a: pd.a.clone(),
        b: pd.b.clone(),
        c: pd.c.clone(),
        p: pd.p.clone(),
        depths: pd.depths.clone(),
        kind: pd.kind,
    };
    let opts = NormOptions { tol: pd.tol, max_iter: pd.max_iter, seed: cfg.seed, max_vertices: pd.max_vertices };
    let (rows, trajectories) = phase_diagram(Tree::new(cfg.q)?, alpha, &grid, &opts)?;
    let mut bad_witness = 0;
    let mut unsettled = 0;
    let csv_rows: Vec<PhaseCsvRow> = rows
        .iter()
        .map(|r| {
            let step_ok = r.predicted_bounded.then_some(r.max_step_ratio <= pd.step_ratio);
            let witness_ok = (r.c > r.a + r.b).then(|| {
                r.witness_exponent
                    .is_some_and(|s| (s - r.theory_exponent).abs() <= pd.exponent_tol * r.theory_exponent.abs())
            });
            bad_witness += usize::from(witness_ok == Some(false));
            unsettled += usize::from(step_ok == Some(false));
            PhaseCsvRow {
                a: r.a,
                b: r.b,
                c: r.c,
                p: r.p,
                predicted_bounded: r.predicted_bounded,
                window_lo: r.window_lo,
                window_hi: r.window_hi,
                norm: r.norm,
                norm_lower: r.norm_lower,
                norm_upper: r.norm_upper,
                max_step_ratio: r.max_step_ratio,
                step_ok,
                witness_exponent: r.witness_exponent,
                theory_exponent: r.theory_exponent,
                witness_ok,
            }
        })
        .collect();
    write_csv(&out.join("phase_diagram.csv"), &csv_rows)?;
    write_csv(&out.join("phase_trajectories.csv"), &trajectories)?;
    println!(
        "phase-diagram: {} points, {bad_witness} witness exponents off, {unsettled} bounded trajectories above ratio {}",
        rows.len(),
        pd.step_ratio
    );
    if bad_witness > 0 {
        return Ok(Outcome::Breach(format!("{bad_witness} witness exponents outside the tolerance")));
    }
    Ok(Outcome::Clean)
}

fn cz_demo_cmd(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let alpha = cfg.exponential_alpha("cz-demo")?;
    let m = ExpMeasure::new(Tree::new(cfg.q)?, alpha)?;
    let c = &cfg.cz_demo;
    let demo = cz_demo(&m, c.trials, c.support_depth, &c.t_grid, c.doubling_depth, cfg.seed)?;
    let mut json = serde_json::to_string_pretty(&demo)?;
    json.push('\n');
    write_text(&out.join("cz_demo.json"), &json)?;
    let failed = demo.runs.iter().filter(|r| !r.report.passed()).count();
    println!(
        "cz-demo: {} runs, {failed} with violations, doubling ratio {} (claimed {})",
        demo.runs.len(),
        demo.doubling.max_ratio,
        demo.doubling.claimed
    );
    if !demo.passed() {
        return Ok(Outcome::Breach(format!("{failed} runs failed verification or the doubling bound failed")));
    }
    Ok(Outcome::Clean)
}

fn hormander_scan_cmd(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let alpha = cfg.exponential_alpha("hormander-scan")?;
    let tree = Tree::new(cfg.q)?;
    let h = &cfg.hormander_scan;
    let k = Kernel::new(ExpMeasure::new(tree, alpha)?.measure().clone())?;
    let report = hormander_check(&k, alpha, h.depth_v, h.depth_xy, h.z_truncation, h.tail_fraction)?;
    let rows: Vec<HormanderCsvRow> = report
        .rows
        .iter()
        .map(|r| HormanderCsvRow {
            depth_v: r.depth_v,
            value: r.value,
            tail_bound: r.tail_bound,
            truncation: r.truncation,
            nv: r.nv,
            nx: r.nx,
            ny: r.ny,
            ratio: r.ratio,
            tail_ok: r.tail_ok,
        })
        .collect();
    write_csv(&out.join("hormander_scan.csv"), &rows)?;
    let moments = moment_table(tree, h.gamma.unwrap_or(alpha), h.beta.unwrap_or(alpha), &h.moment_depths)?;
    write_csv(&out.join("moment_table.csv"), &moments)?;
    println!(
        "hormander-scan: {} rows, stable {}, tails within {}: {}; {} moment rows",
        rows.len(),
        report.stable,
        h.tail_fraction,
        report.tails_ok,
        moments.len()
    );
    let mut problems = Vec::new();
    if !report.tails_ok {
        problems.push("tail bounds above the allowed fraction");
    }
    if !report.stable {
        problems.push("supremum not stable");
    }
    if problems.is_empty() {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Breach(problems.join(", ")))
    }
}

fn configure_workers() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().with_context(|| format!("{WORKERS_VAR}={raw:?} is not a worker count"))?;
    if n == 0 {
        bail!("{WORKERS_VAR} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn load(common: &Common) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
    let text = fs::read_to_string(&common.config).with_context(|| format!("reading {}", common.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("in {}", common.config.display()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let out = cfg.out.clone();
    Ok((cfg, out))
}

/// A command body: the resolved configuration and the output directory.
type CommandFn = fn(&ExperimentConfig, &Path) -> anyhow::Result<Outcome>;

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    configure_workers()?;
    let (name, common, cmd): (&str, &Common, CommandFn) = match &cli.command {
        Command::KernelTable(c) => ("kernel_table", c, kernel_table_cmd),
        Command::PhaseDiagram(c) => ("phase_diagram", c, phase_diagram_cmd),
        Command::CzDemo(c) => ("cz_demo", c, cz_demo_cmd),
        Command::HormanderScan(c) => ("hormander_scan", c, hormander_scan_cmd),
    };
    let (cfg, out) = load(common)?;
    // The record omits the output location so that it depends on inputs only.
    let recorded = ExperimentConfig { out: PathBuf::from("."), ..cfg.clone() };
    write_text(&out.join(format!("{name}.cfg")), &recorded.to_text())?;
    cmd(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Breach(msg)) => {
            eprintln!("breach: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
