//! Acceptance criteria at their pinned tolerances. Prints one PASS/FAIL
//! line per criterion followed by the measured quantities. Exits non-zero
//! on failure only when ADINI_ACCEPTANCE_STRICT=1.

use std::time::Instant;

use adini::dofs::Variant;
use adini::experiment::{fit_rate, run_experiment, ConvergenceRow, Driver, ExperimentConfig, RunResult};
use adini::lemmas;
use adini::problems::ProblemKind;

const DESK_NDOF: usize = 250_000;

const VARIANT1_AVERAGING: [f64; 9] = [
    2.0591764, 1.0301870, 1.0433594, 0.29807752, 0.078992566, 0.021075216, 0.0058258067, 0.0016965534, 5.2326441e-4,
];
const LSHAPE_UNIFORM: [f64; 6] = [4.3022478, 1.5788651, 0.79281859, 0.50551098, 0.34217677, 0.23404170];

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        self.pass &= ok;
        self.notes.push(format!("[{}] {note}", if ok { "ok" } else { "no" }));
    }

    fn within(&mut self, label: &str, got: f64, want: f64, rel: f64) {
        let d = (got - want) / want;
        self.check(d.abs() <= rel, format!("{label}: {got:.8e} vs {want:.8e} ({:+.2}%)", 100.0 * d));
    }

    fn slope(&mut self, label: &str, rows: &[ConvergenceRow], want: f64, tol: f64) {
        match fit_rate(rows) {
            Ok(f) => self.check(
                (f.slope - want).abs() <= tol,
                format!("{label}: {:.4} +- {:.4} over {} rows, want {want:.3} +- {tol}", f.slope, f.stderr, f.rows),
            ),
            Err(e) => self.check(false, format!("{label}: {e}")),
        }
    }
}

fn run(problem: ProblemKind, variant: Variant, driver: Driver, max_ndof: Option<usize>) -> RunResult {
    let mut cfg = ExperimentConfig::new(problem, variant, driver);
    cfg.max_ndof = max_ndof;
    cfg.timing = false;
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{} {variant} {driver:?}: {e}", problem.name()))
}

fn last(rows: &[ConvergenceRow], n: usize) -> &[ConvergenceRow] {
    &rows[rows.len().saturating_sub(n)..]
}

/// Rows within the last decade of degrees of freedom.
fn last_decade(rows: &[ConvergenceRow]) -> &[ConvergenceRow] {
    let top = rows.last().map_or(0, |r| r.ndof);
    let from = rows.iter().position(|r| 10 * r.ndof >= top).unwrap_or(0);
    &rows[from..]
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let r = run(ProblemKind::BiquarticSquare, Variant::Averaging, Driver::Variant1, None);
    o.check(r.rows.len() == 9, format!("{} rows", r.rows.len()));
    for (row, want) in r.rows.iter().zip(VARIANT1_AVERAGING) {
        o.within(&format!("level {}", row.level), row.error, want, 0.01);
    }
    o.slope("tail slope", last(&r.rows, 4), -1.5, 0.1);
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let r = run(ProblemKind::BiquarticSquare, Variant::Hard, Driver::Variant1, None);
    o.within("final error", r.rows.last().map_or(f64::NAN, |r| r.error), 2.4204452e-3, 0.01);
    o.slope("tail slope", last(&r.rows, 4), -1.0, 0.1);
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let mut post = [f64::NAN; 2];
    for (k, (variant, want)) in [(Variant::Averaging, 1.1611867e-3), (Variant::Hard, 8.1792817e-3)].into_iter().enumerate() {
        let r = run(ProblemKind::BiquarticSquare, variant, Driver::Variant2, None);
        o.slope(&format!("{variant} pre-break slope, levels 2-6"), &r.rows[2..=6], -2.0, 0.1);
        post[k] = r.rows.get(7).map_or(f64::NAN, |r| r.error);
        o.within(&format!("{variant} post-break error"), post[k], want, 0.01);
    }
    o.notes.push(format!("hard / averaging after the break: {:.2}", post[1] / post[0]));
    o
}

fn criteria_4_5() -> (Outcome, Outcome) {
    let mut o4 = Outcome::new();
    let u = run(ProblemKind::LshapeClamped, Variant::Averaging, Driver::Uniform, None);
    for (row, want) in u.rows.iter().zip(LSHAPE_UNIFORM) {
        o4.within(&format!("uniform sqrt(ndof) {:.2}", row.sqrt_ndof), row.error, want, 0.01);
    }
    o4.slope("uniform slope", last(&u.rows, 4), -0.544, 0.05);
    let a = run(ProblemKind::LshapeClamped, Variant::Averaging, Driver::Adaptive, Some(DESK_NDOF));
    o4.slope("adaptive slope (last decade)", last_decade(&a.rows), -1.0, 0.15);
    let min_capture = a.captured.iter().copied().fold(f64::INFINITY, f64::min);
    o4.check(min_capture >= 0.5, format!("smallest captured fraction {min_capture:.3} >= theta"));

    let mut o5 = Outcome::new();
    let ratios: Vec<f64> = u.rows.iter().map(|r| r.eta / r.error).collect();
    for (row, q) in u.rows.iter().zip(&ratios) {
        o5.check((5.0..=30.0).contains(q), format!("level {}: eta/error = {q:.2}", row.level));
    }
    let drift = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    o5.check(drift < 2.0, format!("max/min drift {drift:.2} < 2"));
    (o4, o5)
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let u = run(ProblemKind::DiskFictitious, Variant::Averaging, Driver::Uniform, None);
    o.slope("uniform slope", last(&u.rows, 4), -0.5, 0.1);
    let b = run(ProblemKind::DiskFictitious, Variant::Averaging, Driver::BoundaryLocal, None);
    o.slope("boundary-local slope", last(&b.rows, 4), -1.0, 0.15);
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let u = run(ProblemKind::LshapeMixed, Variant::Averaging, Driver::Uniform, None);
    o.slope("uniform slope", last(&u.rows, 4), -1.0 / 3.0, 0.07);
    let a = run(ProblemKind::LshapeMixed, Variant::Averaging, Driver::Adaptive, Some(DESK_NDOF));
    o.slope("adaptive slope (last decade)", last_decade(&a.rows), -1.0, 0.15);
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let checks = lemmas::two_element_identities()
        .into_iter()
        .chain(lemmas::edge_identity())
        .chain(lemmas::averaging_rule())
        .chain(lemmas::hard_defect())
        .chain(lemmas::quadratic_reproduction(1, 5))
        .chain(lemmas::bfs_matching(1, 3))
        .chain(lemmas::quasi_interpolation_stability(1))
        .chain(lemmas::bilinear_stability(1));
    for c in checks {
        o.check(c.pass, format!("{} / {}: {:.3e} ({})", c.suite, c.name, c.value, c.bound));
    }
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let r = lemmas::mesh_fuzz(1, 1000);
    let c = r.check();
    o.check(c.pass, format!("{}: area defect {:.3e}", c.name, c.value));
    o
}

fn timed<T>(f: fn() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn main() {
    // `cargo test` passes filter arguments; this harness always runs fully
    let strict = std::env::var("ADINI_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    for (n, f) in [(1, criterion_1 as fn() -> Outcome), (2, criterion_2), (3, criterion_3)] {
        let (o, s) = timed(f);
        results.push((n, o, s));
    }
    let ((o4, o5), s) = timed(criteria_4_5);
    results.push((4, o4, s));
    results.push((5, o5, 0.0));
    for (n, f) in [(6, criterion_6 as fn() -> Outcome), (7, criterion_7), (8, criterion_8), (9, criterion_9)] {
        let (o, s) = timed(f);
        results.push((n, o, s));
    }

    for (n, o, s) in &results {
        let s = if *n == 5 { "shared with 4".to_string() } else { format!("{s:.1} s") };
        println!("criterion {n}: {} ({s})", if o.pass { "PASS" } else { "FAIL" });
        for note in &o.notes {
            println!("    {note}");
        }
    }
    println!();
    for (n, o, _) in &results {
        println!("criterion {n}: {}", if o.pass { "PASS" } else { "FAIL" });
    }
    let failed = results.iter().filter(|r| !r.1.pass).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
