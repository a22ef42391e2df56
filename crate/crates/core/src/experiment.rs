//! Convergence experiments: mesh sequences, solve/estimate loops, tables
//! and rate fits.

use std::cell::RefCell;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{solve, DiscreteField};
use crate::dofs::{DofOptions, DofSystem, Variant};
use crate::error::{Error, Result};
use crate::estimator::{dorfler, estimate, Augmentation, Indicators};
use crate::mesh::Mesh;
use crate::norms::{energy_error, ErrorRules};
use crate::problems::{Problem, ProblemKind};
use crate::quadrature::SquareRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Driver {
    Uniform,
    /// Uniform, then one local refinement at the origin, then uniform.
    Variant1,
    /// `switch_level` uniform refinements, one local step, then uniform.
    Variant2,
    /// Level `j >= 1`: `j - 1` uniform refinements followed by `j` rounds
    /// of refining every element touching the physical boundary.
    #[serde(alias = "boundary_local")]
    BoundaryLocal,
    Adaptive,
}

impl std::str::FromStr for Driver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform" => Driver::Uniform,
            "variant1" => Driver::Variant1,
            "variant2" => Driver::Variant2,
            "boundary-local" | "boundary_local" => Driver::BoundaryLocal,
            "adaptive" => Driver::Adaptive,
            _ => return Err(Error::Config(format!("unknown driver '{s}'"))),
        })
    }
}

fn default_theta() -> f64 {
    0.5
}
fn default_switch() -> usize {
    6
}
fn default_load_rule() -> usize {
    5
}
fn default_regular_rule() -> usize {
    7
}
fn default_singular_rule() -> usize {
    10
}
fn default_window() -> usize {
    4
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub variant: Variant,
    pub driver: Driver,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Number of rows; defaults depend on the driver.
    #[serde(default)]
    pub max_levels: Option<usize>,
    /// No mesh with more degrees of freedom is solved.
    #[serde(default)]
    pub max_ndof: Option<usize>,
    #[serde(default = "default_switch")]
    pub switch_level: usize,
    /// Boundary term in the marking indicators; defaults per problem.
    #[serde(default)]
    pub augmentation: Option<Augmentation>,
    #[serde(default = "default_load_rule")]
    pub load_rule: usize,
    #[serde(default = "default_regular_rule")]
    pub error_rule: usize,
    #[serde(default = "default_singular_rule")]
    pub singular_error_rule: usize,
    /// Rows used by the tail slope fit.
    #[serde(default = "default_window")]
    pub tail_window: usize,
    /// Record wall-clock seconds; when off the column is zero and output is
    /// bit-reproducible.
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default)]
    pub write_indicators: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemKind, variant: Variant, driver: Driver) -> Self {
        ExperimentConfig {
            problem,
            variant,
            driver,
            theta: default_theta(),
            max_levels: None,
            max_ndof: None,
            switch_level: default_switch(),
            augmentation: None,
            load_rule: default_load_rule(),
            error_rule: default_regular_rule(),
            singular_error_rule: default_singular_rule(),
            tail_window: default_window(),
            timing: true,
            write_indicators: false,
            out: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if self.max_levels == Some(0) {
            return Err(Error::Config("max_levels must be positive".into()));
        }
        for (name, n) in [
            ("load_rule", self.load_rule),
            ("error_rule", self.error_rule),
            ("singular_error_rule", self.singular_error_rule),
        ] {
            if !(1..=30).contains(&n) {
                return Err(Error::Config(format!("{name} must lie in 1..=30, got {n}")));
            }
        }
        if self.tail_window < 2 {
            return Err(Error::Config("tail_window must be at least 2".into()));
        }
        if self.driver == Driver::BoundaryLocal && !Problem::new(self.problem).is_fictitious() {
            return Err(Error::Config("boundary-local driver needs a fictitious-domain problem".into()));
        }
        Ok(())
    }

    fn levels(&self) -> usize {
        self.max_levels.unwrap_or(match (self.driver, self.max_ndof) {
            (Driver::Variant1 | Driver::Variant2, _) => 9,
            (Driver::Uniform, _) => 6,
            (Driver::BoundaryLocal, _) => 6,
            (Driver::Adaptive, None) => 18,
            (Driver::Adaptive, Some(_)) => usize::MAX,
        })
    }

    /// Marking augmentation in effect, with the per-problem default.
    pub fn augmentation(&self) -> Augmentation {
        self.augmentation.unwrap_or(match self.problem {
            ProblemKind::CuspDomain => Augmentation::Global,
            _ => Augmentation::None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub ndof: usize,
    pub sqrt_ndof: f64,
    pub error: f64,
    pub eta: f64,
    pub h_max: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub rows: usize,
}

/// Least-squares slope of `log error` against `log sqrt(ndof)`.
pub fn fit_rate(rows: &[ConvergenceRow]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.sqrt_ndof.ln(), r.error.ln())).collect();
    fit_log_log(&pts)
}

/// Least-squares line through `(x, y)` pairs; slope with its standard error.
pub fn fit_log_log(pts: &[(f64, f64)]) -> Result<RateFit> {
    let n = pts.len();
    if n < 2 {
        return Err(Error::Config("rate fit needs at least two rows".into()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Config("rate fit with constant abscissae".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let stderr = if n > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit { slope, stderr, rows: n })
}

/// Degrees of freedom for a problem on a mesh: essential conditions from
/// the boundary tags and zeroed vertices outside fictitious domains.
pub fn dof_system(problem: &Problem, mesh: &Mesh, variant: Variant) -> Result<DofSystem> {
    let zero = |p: [f64; 2]| problem.zero_vertex(p);
    let opts = DofOptions {
        zero_vertex: if problem.is_fictitious() { Some(&zero) } else { None },
        ..DofOptions::new(variant)
    };
    DofSystem::build(mesh, &opts)
}

/// Elements meeting the physical boundary inside the background mesh.
pub fn touching_elements(problem: &Problem, mesh: &Mesh) -> Vec<bool> {
    (0..mesh.n_elements())
        .map(|e| {
            let r = mesh.elem_rect(e);
            let b = [r.center[0] - r.half[0], r.center[0] + r.half[0], r.center[1] - r.half[1], r.center[1] + r.half[1]];
            problem.touches_interface(b)
        })
        .collect()
}

/// The boundary-local mesh of level `j >= 1`.
pub fn boundary_local_mesh(problem: &Problem, j: usize) -> Result<Mesh> {
    let mut m = problem.initial_mesh();
    for _ in 1..j {
        m.uniform_refine()?;
    }
    for _ in 0..j {
        let touch = touching_elements(problem, &m);
        let ids: Vec<usize> = (0..m.n_elements()).filter(|&e| touch[e]).map(|e| m.elem_id(e)).collect();
        m.refine_marked(&ids)?;
    }
    Ok(m)
}

/// Mesh of a given level for the non-adaptive drivers.
pub fn sequence_mesh(problem: &Problem, driver: Driver, switch_level: usize, level: usize) -> Result<Mesh> {
    let local_step = match driver {
        Driver::Uniform => None,
        Driver::Variant1 => Some(2),
        Driver::Variant2 => Some(switch_level + 1),
        Driver::BoundaryLocal => return boundary_local_mesh(problem, level),
        Driver::Adaptive => return Err(Error::Config("adaptive meshes depend on the solution".into())),
    };
    let mut m = problem.initial_mesh();
    for k in 1..=level {
        if Some(k) == local_step {
            m.refine_at([0.0, 0.0])?;
        } else {
            m.uniform_refine()?;
        }
    }
    Ok(m)
}

/// Everything computed on one mesh.
pub struct LevelResult {
    pub mesh: Mesh,
    pub ndof: usize,
    pub solution: DiscreteField,
    pub indicators: Indicators,
    pub error: f64,
}

/// Solves, estimates and measures the error on one mesh.
pub fn solve_level(problem: &Problem, mesh: &Mesh, variant: Variant, cfg: &ExperimentConfig) -> Result<LevelResult> {
    let dofs = dof_system(problem, mesh, variant)?;
    // assembly and estimator sample the load at the same points
    let cache = RefCell::new(HashMap::<(u64, u64), f64>::new());
    let f = |x: f64, y: f64| *cache.borrow_mut().entry((x.to_bits(), y.to_bits())).or_insert_with(|| problem.load(x, y));
    let u = solve(mesh, &dofs, &f, &SquareRule::new(cfg.load_rule))?;
    let indicators = estimate(mesh, &u, &f);
    let rules = ErrorRules { regular: cfg.error_rule, singular: cfg.singular_error_rule };
    let error = energy_error(mesh, &u, problem, rules);
    Ok(LevelResult { mesh: mesh.clone(), ndof: dofs.ndof(), solution: u, indicators, error })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub tail: Option<RateFit>,
    pub all: Option<RateFit>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub rows: Vec<ConvergenceRow>,
    pub mesh_hashes: Vec<String>,
    /// Captured estimator fraction of every marking step (adaptive only).
    pub captured: Vec<f64>,
    pub summary: RunSummary,
    pub final_mesh: Mesh,
    /// Per-level indicator tables, kept when `write_indicators` is set.
    pub indicator_csv: Vec<String>,
}

#[derive(Serialize)]
struct RunJson<'a> {
    config: &'a ExperimentConfig,
    rows: &'a [ConvergenceRow],
    summary: &'a RunSummary,
    captured_fractions: &'a [f64],
    mesh_hashes: &'a [String],
    sequence_hash: String,
}

impl RunResult {
    pub fn csv(&self) -> String {
        let mut s = String::from("level,ndof,sqrt_ndof,error,eta,h_max,seconds\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}\n",
                r.level, r.ndof, r.sqrt_ndof, r.error, r.eta, r.h_max, r.seconds
            ));
        }
        s
    }

    /// Hash over the ordered per-level mesh hashes.
    pub fn sequence_hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.mesh_hashes {
            h.update(m.as_bytes());
        }
        format!("{:x}", h.finalize())
    }

    pub fn json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RunJson {
            config: &self.config,
            rows: &self.rows,
            summary: &self.summary,
            captured_fractions: &self.captured,
            mesh_hashes: &self.mesh_hashes,
            sequence_hash: self.sequence_hash(),
        })?)
    }

    /// Writes `convergence.csv`, `run.json`, `mesh_final.json` and, if
    /// requested, `indicators_<level>.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("convergence.csv"), self.csv())?;
        std::fs::write(dir.join("run.json"), self.json()?)?;
        self.final_mesh.save(&dir.join("mesh_final.json"))?;
        for (k, s) in self.indicator_csv.iter().enumerate() {
            std::fs::write(dir.join(format!("indicators_{k}.csv")), s)?;
        }
        Ok(())
    }
}

/// Runs the configured experiment. On a solver failure the rows computed
/// so far are written to the output directory before the error returns.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mut res = RunResult {
        config: cfg.clone(),
        rows: Vec::new(),
        mesh_hashes: Vec::new(),
        captured: Vec::new(),
        summary: RunSummary { tail: None, all: None },
        final_mesh: Problem::new(cfg.problem).initial_mesh(),
        indicator_csv: Vec::new(),
    };
    let outcome = run_into(cfg, &mut res);
    res.summary = summarize(&res.rows, cfg.tail_window);
    if let Err(e) = outcome {
        if let Some(dir) = &cfg.out {
            res.write(dir)?;
        }
        return Err(e);
    }
    if let Some(dir) = &cfg.out {
        res.write(dir)?;
    }
    Ok(res)
}

fn summarize(rows: &[ConvergenceRow], window: usize) -> RunSummary {
    let tail = &rows[rows.len().saturating_sub(window)..];
    RunSummary { tail: fit_rate(tail).ok(), all: fit_rate(rows).ok() }
}

fn run_into(cfg: &ExperimentConfig, res: &mut RunResult) -> Result<()> {
    let problem = Problem::new(cfg.problem);
    let levels = cfg.levels();
    let first = if cfg.driver == Driver::BoundaryLocal { 1 } else { 0 };
    let mut mesh = match cfg.driver {
        Driver::Adaptive => problem.initial_mesh(),
        d => sequence_mesh(&problem, d, cfg.switch_level, first)?,
    };
    let mut level = first;
    loop {
        let start = cfg.timing.then(Instant::now);
        let ndof = dof_system(&problem, &mesh, cfg.variant)?.ndof();
        if cfg.max_ndof.is_some_and(|n| ndof > n) {
            break;
        }
        let lr = solve_level(&problem, &mesh, cfg.variant, cfg)?;
        let mut next = None;
        if cfg.driver == Driver::Adaptive {
            // marking is always driven by the averaging solution so that
            // both variants see the same meshes
            let drive = if cfg.variant == Variant::Averaging {
                lr.indicators.clone()
            } else {
                solve_level(&problem, &mesh, Variant::Averaging, cfg)?.indicators
            };
            let touching = touching_elements(&problem, &mesh);
            let eta_sq = drive.augmented(&mesh, &touching, cfg.augmentation());
            let marked = dorfler(&mesh, &eta_sq, cfg.theta);
            let total: f64 = eta_sq.iter().sum();
            let got: f64 = marked.iter().map(|&id| eta_sq[mesh.elem_pos(id).unwrap()]).sum();
            res.captured.push(if total > 0.0 { got / total } else { 1.0 });
            next = Some(marked);
        }
        let seconds = start.map_or(0.0, |t| t.elapsed().as_secs_f64());
        res.rows.push(ConvergenceRow {
            level,
            ndof: lr.ndof,
            sqrt_ndof: (lr.ndof as f64).sqrt(),
            error: lr.error,
            eta: lr.indicators.eta(),
            h_max: mesh.h_max(),
            seconds,
        });
        res.mesh_hashes.push(mesh.content_hash());
        if cfg.write_indicators {
            res.indicator_csv.push(lr.indicators.to_csv(&mesh));
        }
        res.final_mesh = mesh.clone();
        if res.rows.len() >= levels {
            break;
        }
        level += 1;
        match next {
            Some(marked) => mesh.refine_marked(&marked)?,
            None => {
                mesh = match cfg.driver {
                    Driver::BoundaryLocal => boundary_local_mesh(&problem, level)?,
                    Driver::Variant1 if level == 2 => {
                        let mut m = mesh;
                        m.refine_at([0.0, 0.0])?;
                        m
                    }
                    Driver::Variant2 if level == cfg.switch_level + 1 => {
                        let mut m = mesh;
                        m.refine_at([0.0, 0.0])?;
                        m
                    }
                    _ => {
                        let mut m = mesh;
                        m.uniform_refine()?;
                        m
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_slope() {
        let rows: Vec<ConvergenceRow> = [10.0f64, 20.0, 40.0, 80.0]
            .iter()
            .map(|&s| ConvergenceRow {
                level: 0,
                ndof: (s * s) as usize,
                sqrt_ndof: s,
                error: 3.0 / s,
                eta: 0.0,
                h_max: 0.0,
                seconds: 0.0,
            })
            .collect();
        let fit = fit_rate(&rows).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
    }

    #[test]
    fn constant_abscissae_rejected() {
        assert!(fit_log_log(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_log_log(&[(1.0, 2.0)]).is_err());
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let ok = r#"{"problem":"lshape_clamped","variant":"averaging","driver":"adaptive"}"#;
        assert_eq!(ExperimentConfig::from_json(ok).unwrap().theta, 0.5);
        let bad = r#"{"problem":"lshape_clamped","variant":"averaging","driver":"adaptive","thetta":0.3}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
        let theta = r#"{"problem":"lshape_clamped","variant":"hard","driver":"uniform","theta":0}"#;
        assert!(ExperimentConfig::from_json(theta).is_err());
    }

    #[test]
    fn variant_sequences_have_hanging_nodes_where_expected() {
        let p = Problem::new(ProblemKind::BiquarticSquare);
        let m = sequence_mesh(&p, Driver::Variant1, 6, 2).unwrap();
        assert!(m.vertices().iter().any(|v| v.is_irregular()));
        assert!(m.check_mesh_condition().is_empty());
        let m = sequence_mesh(&p, Driver::Variant2, 6, 6).unwrap();
        assert!(!m.vertices().iter().any(|v| v.is_irregular()));
    }
}
