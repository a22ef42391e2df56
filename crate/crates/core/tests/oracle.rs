//! Exact rational values for the clamped biquartic problem on the 2x2 mesh,
//! computed symbolically by tools/oracles/adini_2x2.py and frozen here.

use adini::assembly::assemble;
use adini::dofs::Variant;
use adini::experiment::{dof_system, solve_level, Driver, ExperimentConfig};
use adini::problems::{Problem, ProblemKind};
use adini::quadrature::SquareRule;

fn close(got: f64, want: f64, rel: f64) {
    assert!((got - want).abs() <= rel * want.abs().max(1e-300), "{got:.17e} vs {want:.17e}");
}

#[test]
fn coarse_system_matches_the_symbolic_oracle() {
    let problem = Problem::new(ProblemKind::BiquarticSquare);
    let mesh = problem.initial_mesh();
    let cfg = ExperimentConfig::new(ProblemKind::BiquarticSquare, Variant::Averaging, Driver::Uniform);
    let dofs = dof_system(&problem, &mesh, Variant::Averaging).unwrap();
    let sys = assemble(&mesh, &dofs, &|x, y| problem.load(x, y), &SquareRule::new(cfg.load_rule));
    assert_eq!(sys.n, 3);
    // lower triangle, column-major: the first entry is the diagonal of column 0
    assert_eq!(sys.row_idx[sys.col_ptr[0]], 0);
    close(sys.values[sys.col_ptr[0]], 216.0 / 5.0, 1e-13);
    close(sys.rhs[0], -1696.0 / 35.0, 1e-13);
    assert!(sys.rhs[1].abs() < 1e-12 && sys.rhs[2].abs() < 1e-12);

    let x = sys.solve().unwrap();
    close(x[0], -212.0 / 189.0, 1e-12);
    assert!(x[1].abs() < 1e-12 && x[2].abs() < 1e-12);

    let lr = solve_level(&problem, &mesh, Variant::Averaging, &cfg).unwrap();
    close(lr.error * lr.error, 124352.0 / 33075.0, 1e-11);
}
