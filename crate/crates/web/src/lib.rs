//! Browser bindings: an interactive solve/refine session on one benchmark
//! and a side-by-side comparison of the two hanging-node couplings.
//!
//! All results cross the boundary as JSON strings so the page needs no
//! generated type glue beyond the exported functions.

use adini::dofs::Variant;
use adini::estimator::dorfler;
use adini::experiment::{run_experiment, solve_level, touching_elements, Driver, ExperimentConfig, LevelResult};
use adini::mesh::Mesh;
use adini::problems::{Problem, ProblemKind};
use adini::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Cell {
    /// `[x0, x1, y0, y1]`
    b: [f64; 4],
    level: u32,
    /// Discrete solution at the element centre.
    u: f64,
    /// Local estimator contribution.
    eta: f64,
    marked: bool,
}

#[derive(Serialize, Clone)]
struct Row {
    ndof: usize,
    error: f64,
    eta: f64,
}

#[derive(Serialize)]
struct View<'a> {
    problem: &'static str,
    variant: String,
    bbox: [f64; 4],
    cells: Vec<Cell>,
    hanging: Vec<[f64; 2]>,
    history: &'a [Row],
}

#[wasm_bindgen]
pub struct Session {
    problem: Problem,
    cfg: ExperimentConfig,
    mesh: Mesh,
    level: Option<LevelResult>,
    /// Marking indicators of the current mesh (always from the averaging
    /// solution, as in the experiment driver).
    marking: Option<Vec<f64>>,
    marked: Vec<usize>,
    history: Vec<Row>,
}

impl Session {
    pub fn create(problem: &str, variant: &str) -> Result<Session> {
        let kind: ProblemKind = problem.parse()?;
        let variant: Variant = variant.parse()?;
        let problem = Problem::new(kind);
        let mesh = problem.initial_mesh();
        let mut cfg = ExperimentConfig::new(kind, variant, Driver::Adaptive);
        cfg.timing = false;
        Ok(Session { problem, cfg, mesh, level: None, marking: None, marked: Vec::new(), history: Vec::new() })
    }

    /// Solves on the current mesh and returns the view.
    pub fn solve_json(&mut self) -> Result<String> {
        let lr = solve_level(&self.problem, &self.mesh, self.cfg.variant, &self.cfg)?;
        let drive = if self.cfg.variant == Variant::Averaging {
            lr.indicators.clone()
        } else {
            solve_level(&self.problem, &self.mesh, Variant::Averaging, &self.cfg)?.indicators
        };
        let touching = touching_elements(&self.problem, &self.mesh);
        self.marking = Some(drive.augmented(&self.mesh, &touching, self.cfg.augmentation()));
        self.history.push(Row { ndof: lr.ndof, error: lr.error, eta: lr.indicators.eta() });
        self.level = Some(lr);
        self.marked.clear();
        Ok(self.view())
    }

    /// Dörfler marking with bulk parameter `theta` on the last solution,
    /// then refinement with closure. Returns the number of marked elements.
    pub fn refine_adaptive_n(&mut self, theta: f64) -> Result<usize> {
        if self.marking.is_none() {
            self.solve_json()?;
        }
        let eta = self.marking.take().unwrap_or_default();
        let marked = dorfler(&self.mesh, &eta, theta);
        self.mesh.refine_marked(&marked)?;
        self.level = None;
        self.marked = marked;
        Ok(self.marked.len())
    }

    pub fn refine_uniform_n(&mut self) -> Result<()> {
        self.mesh.uniform_refine()?;
        self.level = None;
        self.marking = None;
        self.marked.clear();
        Ok(())
    }

    /// Current mesh, with solution data if the mesh has been solved on.
    pub fn view(&self) -> String {
        let lr = self.level.as_ref();
        let cells = (0..self.mesh.n_elements())
            .map(|e| {
                let r = self.mesh.elem_rect(e);
                Cell {
                    b: [r.center[0] - r.half[0], r.center[0] + r.half[0], r.center[1] - r.half[1], r.center[1] + r.half[1]],
                    level: self.mesh.elem_level(e),
                    u: lr.map_or(0.0, |l| l.solution.local[e].value(0.0, 0.0)),
                    eta: lr.map_or(0.0, |l| l.indicators.total[e].max(0.0).sqrt()),
                    marked: self.marked.contains(&self.mesh.elem_id(e)),
                }
            })
            .collect();
        let hanging = self.mesh.vertices().iter().filter(|v| v.is_irregular()).map(|v| v.x).collect();
        let view = View {
            problem: self.problem.kind.name(),
            variant: self.cfg.variant.to_string(),
            bbox: self.mesh.domain().bbox(),
            cells,
            hanging,
            history: &self.history,
        };
        serde_json::to_string(&view).expect("view serializes")
    }
}

fn js(e: adini::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
impl Session {
    /// `problem`: biquartic_square, disk_fictitious, lshape_clamped,
    /// cusp_domain or lshape_mixed; `variant`: averaging or hard.
    #[wasm_bindgen(constructor)]
    pub fn new(problem: &str, variant: &str) -> std::result::Result<Session, JsError> {
        Session::create(problem, variant).map_err(js)
    }

    pub fn solve(&mut self) -> std::result::Result<String, JsError> {
        self.solve_json().map_err(js)
    }

    pub fn refine_adaptive(&mut self, theta: f64) -> std::result::Result<usize, JsError> {
        self.refine_adaptive_n(theta).map_err(js)
    }

    pub fn refine_uniform(&mut self) -> std::result::Result<(), JsError> {
        self.refine_uniform_n().map_err(js)
    }

    #[wasm_bindgen(js_name = view)]
    pub fn view_js(&self) -> String {
        self.view()
    }

    pub fn ndof(&self) -> usize {
        self.level.as_ref().map_or(0, |l| l.ndof)
    }
}

#[derive(Serialize)]
struct Comparison {
    sqrt_ndof: Vec<f64>,
    averaging: Vec<f64>,
    hard: Vec<f64>,
}

/// Errors of both couplings on the biquartic benchmark along the
/// `variant1` or `variant2` mesh sequence, for `levels` meshes.
pub fn compare_json(driver: &str, levels: usize) -> Result<String> {
    let driver: Driver = driver.parse()?;
    let mut out = Comparison { sqrt_ndof: Vec::new(), averaging: Vec::new(), hard: Vec::new() };
    for variant in [Variant::Averaging, Variant::Hard] {
        let mut cfg = ExperimentConfig::new(ProblemKind::BiquarticSquare, variant, driver);
        cfg.max_levels = Some(levels.max(1));
        cfg.timing = false;
        let res = run_experiment(&cfg)?;
        let errors = res.rows.iter().map(|r| r.error).collect();
        match variant {
            Variant::Averaging => {
                out.sqrt_ndof = res.rows.iter().map(|r| r.sqrt_ndof).collect();
                out.averaging = errors;
            }
            Variant::Hard => out.hard = errors,
        }
    }
    Ok(serde_json::to_string(&out).expect("comparison serializes"))
}

#[wasm_bindgen]
pub fn compare_variants(driver: &str, levels: usize) -> std::result::Result<String, JsError> {
    compare_json(driver, levels).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_session_refines_towards_the_corner() {
        let mut s = Session::create("lshape_clamped", "averaging").unwrap();
        for _ in 0..10 {
            s.solve_json().unwrap();
            assert!(s.refine_adaptive_n(0.5).unwrap() > 0);
        }
        let v: serde_json::Value = serde_json::from_str(&s.solve_json().unwrap()).unwrap();
        assert_eq!(v["history"].as_array().unwrap().len(), 11);
        let cells = v["cells"].as_array().unwrap();
        let depth = cells.iter().map(|c| c["level"].as_u64().unwrap()).max().unwrap();
        assert!(depth >= 3, "depth {depth}");
        let at_corner = |c: &&serde_json::Value| {
            let b: Vec<f64> = c["b"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            b[0] <= 0.0 && 0.0 <= b[1] && b[2] <= 0.0 && 0.0 <= b[3]
        };
        assert!(cells.iter().filter(|c| c["level"].as_u64() == Some(depth)).any(|c| at_corner(&c)));
    }

    #[test]
    fn comparison_shows_the_hard_coupling_falling_behind() {
        let v: serde_json::Value = serde_json::from_str(&compare_json("variant1", 5).unwrap()).unwrap();
        let a = v["averaging"].as_array().unwrap();
        let h = v["hard"].as_array().unwrap();
        assert_eq!(a.len(), 5);
        assert!(h[4].as_f64().unwrap() > a[4].as_f64().unwrap());
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(Session::create("annulus", "averaging").is_err());
        assert!(compare_json("sideways", 2).is_err());
    }
}
