//! Broken energy errors against closed-form solutions.

use crate::assembly::DiscreteField;
use crate::mesh::Mesh;
use crate::problems::Problem;
use crate::quadrature::SquareRule;

#[derive(Debug, Clone, Copy)]
pub struct ErrorRules {
    pub regular: usize,
    /// Rule on elements touching a singular point.
    pub singular: usize,
}

impl Default for ErrorRules {
    fn default() -> Self {
        ErrorRules { regular: 7, singular: 10 }
    }
}

/// Squared broken energy error `|D^2 (u - u_h)|^2_T` per element,
/// restricted to quadrature points inside the physical domain.
pub fn energy_error_sq(mesh: &Mesh, u_h: &DiscreteField, problem: &Problem, rules: ErrorRules) -> Vec<f64> {
    let regular = SquareRule::new(rules.regular);
    let singular = SquareRule::new(rules.singular);
    let sing = problem.singular_points();
    let fict = problem.is_fictitious();
    (0..mesh.n_elements())
        .map(|e| {
            let rect = u_h.rects[e];
            let rule = if sing.iter().any(|&p| rect.contains(p)) { &singular } else { &regular };
            let jac = rect.area() / 4.0;
            let mut s = 0.0;
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let x = rect.to_phys(q[0], q[1]);
                if fict && !problem.inside(x) {
                    continue;
                }
                let hu = problem.hessian(x[0], x[1]);
                let hh = u_h.hessian(e, q[0], q[1]);
                let d = [hu[0] - hh[0], hu[1] - hh[1], hu[2] - hh[2]];
                s += w * jac * (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]);
            }
            s
        })
        .collect()
}

pub fn energy_error(mesh: &Mesh, u_h: &DiscreteField, problem: &Problem, rules: ErrorRules) -> f64 {
    energy_error_sq(mesh, u_h, problem, rules).iter().sum::<f64>().sqrt()
}
