//! Experiment configuration: `key = value` lines under `[section]` headers.
//!
//! `#` starts a comment. Lists are comma separated. Every key is optional; the
//! defaults reproduce the reference experiments at `q = 2`, `α = 2`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use treeberg_core::measure::MeasureKind;
use treeberg_core::operators::OperatorKind;

/// A configuration error, with the 1-based line it refers to when there is one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line: Some(line), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    /// `exp` or `table`.
    pub kind: String,
    pub alpha: f64,
    pub values: Vec<f64>,
    /// Ratio of the geometric tail of a table.
    pub tail: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTableConfig {
    pub depth: usize,
    pub residual_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub p: Vec<f64>,
    pub depths: Vec<usize>,
    pub kind: OperatorKind,
    pub tol: f64,
    pub max_iter: usize,
    pub max_vertices: usize,
    /// Allowed relative error of the witness exponent.
    pub exponent_tol: f64,
    /// Largest successive-depth norm ratio reported as settled.
    pub step_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzConfig {
    pub trials: usize,
    pub support_depth: usize,
    /// Levels as multiples of `‖f‖₁/μ(X)`.
    pub t_grid: Vec<f64>,
    pub doubling_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HormanderConfig {
    pub depth_v: usize,
    pub depth_xy: usize,
    pub z_truncation: usize,
    pub tail_fraction: f64,
    pub moment_depths: Vec<usize>,
    /// Kernel exponent of the moment table; defaults to `alpha`.
    pub gamma: Option<f64>,
    /// Weight exponent of the moment table; defaults to `alpha`.
    pub beta: Option<f64>,
}

/// Everything a run depends on besides the command name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub q: u32,
    pub measure: MeasureConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub kernel_table: KernelTableConfig,
    pub phase_diagram: PhaseConfig,
    pub cz_demo: CzConfig,
    pub hormander_scan: HormanderConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            q: 2,
            measure: MeasureConfig { kind: "exp".into(), alpha: 2.0, values: Vec::new(), tail: None },
            seed: 0,
            out: PathBuf::from("."),
            kernel_table: KernelTableConfig { depth: 4, residual_tol: 1e-10 },
            phase_diagram: PhaseConfig {
                a: vec![0.0, 0.5],
                b: vec![0.5, 1.0, 1.5, 2.0, 2.5],
                c: vec![1.5, 2.0, 2.5, 3.0],
                p: vec![1.0, 1.5, 2.0, 3.0],
                depths: vec![4, 5, 6],
                kind: OperatorKind::T,
                tol: 1e-8,
                max_iter: 20_000,
                max_vertices: 2048,
                exponent_tol: 0.02,
                step_ratio: 1.1,
            },
            cz_demo: CzConfig { trials: 20, support_depth: 4, t_grid: vec![1.5, 2.0, 4.0], doubling_depth: 6 },
            hormander_scan: HormanderConfig {
                depth_v: 8,
                depth_xy: 3,
                z_truncation: 24,
                tail_fraction: 0.1,
                moment_depths: (0..=8).collect(),
                gamma: None,
                beta: None,
            },
        }
    }
}

fn scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| at(line, format!("{key}: cannot parse {value:?}: {e}")))
}

fn list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    let items: Vec<&str> = value.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(at(line, format!("{key}: empty list entry in {value:?}")));
    }
    items.into_iter().map(|s| scalar(line, key, s)).collect()
}

fn positive(line: usize, key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(at(line, format!("{key} must be positive, got {x}")))
    }
}

impl ExperimentConfig {
    /// Parses the text of a configuration file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at(line, format!("unterminated section header {content:?}")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(at(line, format!("unknown section [{name}]; expected one of {}", SECTIONS.join(", "))));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| at(line, format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(at(line, format!("key {key:?} appears before any [section]")));
            }
            if let Some(first) = seen.insert((section.clone(), key.to_string()), line) {
                return Err(at(line, format!("[{section}] {key} already set on line {first}")));
            }
            cfg.set(&section, key, value, line)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str, line: usize) -> Result<(), ConfigError> {
        match (section, key) {
            ("tree", "q") => {
                self.q = scalar(line, key, v)?;
                if self.q < 2 {
                    return Err(at(line, format!("q must be at least 2, got {}", self.q)));
                }
            }
            ("measure", "kind") => {
                if v != "exp" && v != "table" {
                    return Err(at(line, format!("kind must be exp or table, got {v:?}")));
                }
                self.measure.kind = v.to_string();
            }
            ("measure", "alpha") => {
                self.measure.alpha = scalar(line, key, v)?;
                if !(self.measure.alpha > 1.0) {
                    return Err(at(line, format!("alpha must exceed 1, got {v}")));
                }
            }
            ("measure", "values") => self.measure.values = list(line, key, v)?,
            ("measure", "tail") => {
                let r = v.strip_prefix("geometric:").ok_or_else(|| at(line, format!("tail must be geometric:<ratio>, got {v:?}")))?;
                self.measure.tail = Some(positive(line, key, scalar(line, key, r)?)?);
            }
            ("run", "seed") => self.seed = scalar(line, key, v)?,
            ("run", "out") => self.out = PathBuf::from(v),
            ("kernel_table", "depth") => self.kernel_table.depth = scalar(line, key, v)?,
            ("kernel_table", "residual_tol") => self.kernel_table.residual_tol = positive(line, key, scalar(line, key, v)?)?,
            ("phase_diagram", "a") => self.phase_diagram.a = list(line, key, v)?,
            ("phase_diagram", "b") => self.phase_diagram.b = list(line, key, v)?,
            ("phase_diagram", "c") => self.phase_diagram.c = list(line, key, v)?,
            ("phase_diagram", "p") => self.phase_diagram.p = list(line, key, v)?,
            ("phase_diagram", "depths") => self.phase_diagram.depths = list(line, key, v)?,
            ("phase_diagram", "kind") => {
                self.phase_diagram.kind = match v {
                    "S" | "s" => OperatorKind::S,
                    "T" | "t" => OperatorKind::T,
                    _ => return Err(at(line, format!("kind must be S or T, got {v:?}"))),
                }
            }
            ("phase_diagram", "tol") => self.phase_diagram.tol = positive(line, key, scalar(line, key, v)?)?,
            ("phase_diagram", "max_iter") => self.phase_diagram.max_iter = scalar(line, key, v)?,
            ("phase_diagram", "max_vertices") => self.phase_diagram.max_vertices = scalar(line, key, v)?,
            ("phase_diagram", "exponent_tol") => self.phase_diagram.exponent_tol = positive(line, key, scalar(line, key, v)?)?,
            ("phase_diagram", "step_ratio") => self.phase_diagram.step_ratio = positive(line, key, scalar(line, key, v)?)?,
            ("cz_demo", "trials") => self.cz_demo.trials = scalar(line, key, v)?,
            ("cz_demo", "support_depth") => self.cz_demo.support_depth = scalar(line, key, v)?,
            ("cz_demo", "t_grid") => {
                self.cz_demo.t_grid = list(line, key, v)?;
                if let Some(bad) = self.cz_demo.t_grid.iter().find(|&&x| !(x > 1.0)) {
                    return Err(at(line, format!("t_grid factors must exceed 1, got {bad}")));
                }
            }
            ("cz_demo", "doubling_depth") => self.cz_demo.doubling_depth = scalar(line, key, v)?,
            ("hormander_scan", "depth_v") => self.hormander_scan.depth_v = scalar(line, key, v)?,
            ("hormander_scan", "depth_xy") => self.hormander_scan.depth_xy = scalar(line, key, v)?,
            ("hormander_scan", "z_truncation") => self.hormander_scan.z_truncation = scalar(line, key, v)?,
            ("hormander_scan", "tail_fraction") => self.hormander_scan.tail_fraction = positive(line, key, scalar(line, key, v)?)?,
            ("hormander_scan", "moment_depths") => self.hormander_scan.moment_depths = list(line, key, v)?,
            ("hormander_scan", "gamma") => self.hormander_scan.gamma = Some(scalar(line, key, v)?),
            ("hormander_scan", "beta") => self.hormander_scan.beta = Some(scalar(line, key, v)?),
            _ => return Err(at(line, format!("unknown key {key:?} in [{section}]"))),
        }
        Ok(())
    }

    /// Cross-key checks that no single line can be blamed for.
    fn validate(&self) -> Result<(), ConfigError> {
        let whole = |m: String| ConfigError { line: None, message: m };
        if self.measure.kind == "table" && self.measure.values.is_empty() {
            return Err(whole("[measure] kind = table needs values".into()));
        }
        if self.phase_diagram.depths.is_empty() {
            return Err(whole("[phase_diagram] depths must not be empty".into()));
        }
        if self.cz_demo.t_grid.is_empty() {
            return Err(whole("[cz_demo] t_grid must not be empty".into()));
        }
        Ok(())
    }

    pub fn measure_kind(&self) -> MeasureKind {
        match self.measure.kind.as_str() {
            "table" => MeasureKind::Table { values: self.measure.values.clone(), tail: self.measure.tail },
            _ => MeasureKind::Exp { alpha: self.measure.alpha },
        }
    }

    /// `alpha` of an exponential measure; commands other than the kernel table need one.
    pub fn exponential_alpha(&self, command: &str) -> Result<f64, ConfigError> {
        match self.measure.kind.as_str() {
            "exp" => Ok(self.measure.alpha),
            _ => Err(ConfigError {
                line: None,
                message: format!("{command} needs an exponential measure ([measure] kind = exp)"),
            }),
        }
    }

    /// The resolved configuration in the file format; parsing it gives `self` back.
    pub fn to_text(&self) -> String {
        fn join<T: fmt::Display>(xs: &[T]) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let mut push = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        push("[tree]".into());
        push(format!("q = {}", self.q));
        push("\n[measure]".into());
        push(format!("kind = {}", self.measure.kind));
        push(format!("alpha = {}", self.measure.alpha));
        if !self.measure.values.is_empty() {
            push(format!("values = {}", join(&self.measure.values)));
        }
        if let Some(r) = self.measure.tail {
            push(format!("tail = geometric:{r}"));
        }
        push("\n[run]".into());
        push(format!("seed = {}", self.seed));
        if self.out != *"." {
            push(format!("out = {}", self.out.display()));
        }
        let k = &self.kernel_table;
        push("\n[kernel_table]".into());
        push(format!("depth = {}", k.depth));
        push(format!("residual_tol = {:e}", k.residual_tol));
        let p = &self.phase_diagram;
        push("\n[phase_diagram]".into());
        push(format!("a = {}", join(&p.a)));
        push(format!("b = {}", join(&p.b)));
        push(format!("c = {}", join(&p.c)));
        push(format!("p = {}", join(&p.p)));
        push(format!("depths = {}", join(&p.depths)));
        push(format!("kind = {}", if p.kind == OperatorKind::S { "S" } else { "T" }));
        push(format!("tol = {:e}", p.tol));
        push(format!("max_iter = {}", p.max_iter));
        push(format!("max_vertices = {}", p.max_vertices));
        push(format!("exponent_tol = {}", p.exponent_tol));
        push(format!("step_ratio = {}", p.step_ratio));
        let c = &self.cz_demo;
        push("\n[cz_demo]".into());
        push(format!("trials = {}", c.trials));
        push(format!("support_depth = {}", c.support_depth));
        push(format!("t_grid = {}", join(&c.t_grid)));
        push(format!("doubling_depth = {}", c.doubling_depth));
        let h = &self.hormander_scan;
        push("\n[hormander_scan]".into());
        push(format!("depth_v = {}", h.depth_v));
        push(format!("depth_xy = {}", h.depth_xy));
        push(format!("z_truncation = {}", h.z_truncation));
        push(format!("tail_fraction = {}", h.tail_fraction));
        push(format!("moment_depths = {}", join(&h.moment_depths)));
        if let Some(g) = h.gamma {
            push(format!("gamma = {g}"));
        }
        if let Some(b) = h.beta {
            push(format!("beta = {b}"));
        }
        s
    }
}

const SECTIONS: &[&str] = &["tree", "measure", "run", "kernel_table", "phase_diagram", "cz_demo", "hormander_scan"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
        assert_eq!(ExperimentConfig::parse("# nothing\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn sections_and_lists() {
        let cfg = ExperimentConfig::parse(
            "[tree]\nq = 3\n[measure]\nalpha = 2.5 # comment\n[phase_diagram]\np = 1, 2\nkind = S\n[hormander_scan]\ngamma = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.q, 3);
        assert_eq!(cfg.measure.alpha, 2.5);
        assert_eq!(cfg.phase_diagram.p, vec![1.0, 2.0]);
        assert_eq!(cfg.phase_diagram.kind, OperatorKind::S);
        assert_eq!(cfg.hormander_scan.gamma, Some(3.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[tree]\nq = two\n", 2, "q"),
            ("\n\n[nope]\n", 3, "unknown section"),
            ("[tree]\nq = 2\nq = 3\n", 3, "already set on line 2"),
            ("q = 2\n", 1, "before any"),
            ("[measure]\nalpha = 0.5\n", 2, "alpha must exceed 1"),
            ("[cz_demo]\nt_grid = 2, 1\n", 2, "exceed 1"),
            ("[phase_diagram]\na = 0,,1\n", 2, "empty list entry"),
            ("[tree]\nq\n", 2, "expected key = value"),
            ("[tree\n", 1, "unterminated"),
            ("[run]\ncolour = blue\n", 2, "unknown key"),
        ];
        for (text, line, needle) in cases {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert_eq!(e.line, Some(line), "{text:?}");
            assert!(e.to_string().contains(needle), "{e} lacks {needle:?}");
            assert!(e.to_string().starts_with(&format!("line {line}:")));
        }
        let e = ExperimentConfig::parse("[measure]\nkind = table\n").unwrap_err();
        assert_eq!(e.line, None);
    }

    #[test]
    fn text_form_round_trips() {
        let mut cfg = ExperimentConfig {
            measure: MeasureConfig { kind: "table".into(), alpha: 2.0, values: vec![1.0, 0.25, 0.0625], tail: Some(0.25) },
            seed: 99,
            out: PathBuf::from("results/run1"),
            ..ExperimentConfig::default()
        };
        cfg.hormander_scan.beta = Some(2.5);
        cfg.phase_diagram.kind = OperatorKind::S;
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&d.to_text()).unwrap(), d);
    }
}
