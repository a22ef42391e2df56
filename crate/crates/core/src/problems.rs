//! Benchmark problems with closed-form solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::mesh::{Domain, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    BiquarticSquare,
    DiskFictitious,
    LshapeClamped,
    CuspDomain,
    LshapeMixed,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::BiquarticSquare,
        ProblemKind::DiskFictitious,
        ProblemKind::LshapeClamped,
        ProblemKind::CuspDomain,
        ProblemKind::LshapeMixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::BiquarticSquare => "biquartic_square",
            ProblemKind::DiskFictitious => "disk_fictitious",
            ProblemKind::LshapeClamped => "lshape_clamped",
            ProblemKind::CuspDomain => "cusp_domain",
            ProblemKind::LshapeMixed => "lshape_mixed",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem '{s}'")))
    }
}

/// Root of `sin^2(a w) = a^2 sin^2(w)` near `guess`, by Newton's method.
pub fn singular_exponent(omega: f64, guess: f64) -> f64 {
    let s2 = omega.sin().powi(2);
    let mut a = guess;
    for _ in 0..50 {
        let f = (a * omega).sin().powi(2) - a * a * s2;
        let df = 2.0 * (a * omega).sin() * (a * omega).cos() * omega - 2.0 * a * s2;
        let step = f / df;
        a -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    a
}

pub const LSHAPE_OMEGA: f64 = 1.5 * PI;
pub const CUSP_OMEGA: f64 = 1.75 * PI;

#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ProblemKind,
    alpha: f64,
    omega: f64,
}

fn bubble(x: Jet, y: Jet) -> Jet {
    let a = x * x + (-1.0);
    let b = y * y + (-1.0);
    a * a * b * b
}

impl Problem {
    pub fn new(kind: ProblemKind) -> Self {
        let (omega, alpha) = match kind {
            ProblemKind::LshapeClamped => (LSHAPE_OMEGA, singular_exponent(LSHAPE_OMEGA, 0.5444837)),
            ProblemKind::CuspDomain => (CUSP_OMEGA, singular_exponent(CUSP_OMEGA, 0.50500969)),
            _ => (0.0, 0.0),
        };
        Problem { kind, alpha, omega }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn domain(&self) -> Domain {
        let lshape = vec![[-1.0, 1.0, 0.0, 1.0], [-1.0, 0.0, -1.0, 0.0]];
        match self.kind {
            ProblemKind::LshapeClamped => Domain { rects: lshape, simply_supported: vec![] },
            ProblemKind::LshapeMixed => Domain {
                rects: lshape,
                simply_supported: vec![[[0.0, -1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
            },
            _ => Domain::rectangle(-1.0, 1.0, -1.0, 1.0),
        }
    }

    pub fn initial_mesh(&self) -> Mesh {
        let n = match self.kind {
            ProblemKind::LshapeClamped | ProblemKind::LshapeMixed => 4,
            _ => 2,
        };
        Mesh::tensor(self.domain(), n, n).expect("benchmark domain")
    }

    /// Does the mesh cover a larger square than the physical domain?
    pub fn is_fictitious(&self) -> bool {
        matches!(self.kind, ProblemKind::DiskFictitious | ProblemKind::CuspDomain)
    }

    /// Membership in the closed physical domain.
    pub fn inside(&self, p: [f64; 2]) -> bool {
        match self.kind {
            ProblemKind::DiskFictitious => p[0] * p[0] + p[1] * p[1] <= 1.0,
            ProblemKind::CuspDomain => !in_cusp_hole(p) || on_cusp_hole_boundary(p),
            _ => true,
        }
    }

    /// Vertices whose degrees of freedom are set to zero on fictitious meshes.
    pub fn zero_vertex(&self, p: [f64; 2]) -> bool {
        match self.kind {
            ProblemKind::DiskFictitious => p[0] * p[0] + p[1] * p[1] >= 1.0,
            ProblemKind::CuspDomain => in_cusp_hole(p),
            _ => false,
        }
    }

    /// Points where the solution is singular.
    pub fn singular_points(&self) -> &'static [[f64; 2]] {
        match self.kind {
            ProblemKind::LshapeClamped | ProblemKind::CuspDomain | ProblemKind::LshapeMixed => &[[0.0, 0.0]],
            _ => &[],
        }
    }

    /// Does the closed rectangle `[x0, x1] x [y0, y1]` meet the boundary of
    /// the physical domain inside the mesh?
    pub fn touches_interface(&self, b: [f64; 4]) -> bool {
        match self.kind {
            ProblemKind::DiskFictitious => {
                let cx = 0.0f64.clamp(b[0], b[1]);
                let cy = 0.0f64.clamp(b[2], b[3]);
                let near = cx * cx + cy * cy;
                let far = b[0].abs().max(b[1].abs()).powi(2) + b[2].abs().max(b[3].abs()).powi(2);
                near <= 1.0 && far >= 1.0
            }
            ProblemKind::CuspDomain => {
                let corners = [[b[0], b[2]], [b[1], b[2]], [b[1], b[3]], [b[0], b[3]]];
                let holes = corners.iter().filter(|&&p| in_cusp_hole(p)).count();
                holes > 0 && holes < 4 || corners.iter().any(|&p| on_cusp_hole_boundary(p))
            }
            _ => false,
        }
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet {
        self.jet_to(x, y, crate::jet::DEGREE)
    }

    /// Expansion of the exact solution truncated at total degree `deg`.
    pub fn jet_to(&self, x: f64, y: f64, deg: usize) -> Jet {
        match self.kind {
            ProblemKind::BiquarticSquare => {
                let (jx, jy) = Jet::variables_to(x, y, deg);
                -bubble(jx, jy)
            }
            ProblemKind::DiskFictitious => {
                let (jx, jy) = Jet::variables_to(x, y, deg);
                let s = jx * jx + jy * jy + (-1.0);
                (s * s).scale(1.0 / 64.0)
            }
            ProblemKind::LshapeClamped | ProblemKind::CuspDomain => {
                let (jx, jy) = Jet::variables_to(x, y, deg);
                let (r, t) = Jet::polar_to(x, y, deg);
                bubble(jx, jy) * r.powf(1.0 + self.alpha) * self.grisvard(t)
            }
            ProblemKind::LshapeMixed => {
                let (jx, jy) = Jet::variables_to(x, y, deg);
                let (r, t) = Jet::polar_to(x, y, deg);
                bubble(jx, jy) * r.powf(4.0 / 3.0) * t.scale(4.0 / 3.0).sin()
            }
        }
    }

    fn grisvard(&self, t: Jet) -> Jet {
        let (a, w) = (self.alpha, self.omega);
        let sm = |s: f64| ((a - 1.0) * s).sin();
        let sp = |s: f64| ((a + 1.0) * s).sin();
        let cm = |s: f64| ((a - 1.0) * s).cos();
        let cp = |s: f64| ((a + 1.0) * s).cos();
        let k1 = sm(w) / (a - 1.0) - sp(w) / (a + 1.0);
        let k2 = cm(w) - cp(w);
        let tm = t.scale(a - 1.0);
        let tp = t.scale(a + 1.0);
        (tm.cos() - tp.cos()).scale(k1) - (tm.sin().scale(1.0 / (a - 1.0)) - tp.sin().scale(1.0 / (a + 1.0))).scale(k2)
    }

    pub fn exact(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).value()
    }

    pub fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        self.jet_to(x, y, 2).hessian()
    }

    /// Right-hand side `f = bilaplacian(u)`.
    pub fn load(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            ProblemKind::DiskFictitious => 1.0,
            ProblemKind::CuspDomain if in_cusp_hole([x, y]) && !on_cusp_hole_boundary([x, y]) => 0.0,
            _ => {
                if x == 0.0 && y == 0.0 && !self.singular_points().is_empty() {
                    return 0.0;
                }
                self.jet(x, y).bilaplacian()
            }
        }
    }
}

/// Closed triangle with vertices (0,0), (1,-1), (1,0).
fn in_cusp_hole(p: [f64; 2]) -> bool {
    p[0] >= 0.0 && p[1] <= 0.0 && p[1] >= -p[0]
}

fn on_cusp_hole_boundary(p: [f64; 2]) -> bool {
    in_cusp_hole(p) && (p[1] == 0.0 || p[1] == -p[0] || p[0] == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biquartic_load_at_origin() {
        let p = Problem::new(ProblemKind::BiquarticSquare);
        assert!((p.load(0.0, 0.0) + 80.0).abs() < 1e-12);
    }

    #[test]
    fn disk_is_biharmonic_with_unit_load() {
        let p = Problem::new(ProblemKind::DiskFictitious);
        for &(x, y) in &[(0.1, 0.2), (-0.5, 0.6), (0.9, -0.3)] {
            assert!((p.jet(x, y).bilaplacian() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_exponents() {
        let a = Problem::new(ProblemKind::LshapeClamped).alpha();
        assert!((a - 0.5444837).abs() < 1e-7);
        assert!(((a * LSHAPE_OMEGA).sin().powi(2) - a * a).abs() < 1e-14);
        let a = Problem::new(ProblemKind::CuspDomain).alpha();
        assert!((a - 0.50500969).abs() < 1e-8);
    }

    #[test]
    fn clamped_conditions_on_reentrant_edges() {
        for kind in [ProblemKind::LshapeClamped, ProblemKind::CuspDomain] {
            let p = Problem::new(kind);
            // theta = 0 ray and the other bounding ray of the sector
            let w = if kind == ProblemKind::LshapeClamped { LSHAPE_OMEGA } else { CUSP_OMEGA };
            for &r in &[0.2, 0.5] {
                for t in [1e-300, w] {
                    let (x, y) = (r * t.cos(), r * t.sin());
                    let j = p.jet(x, y);
                    assert!(j.value().abs() < 1e-13, "{kind:?} value at angle {t}");
                    assert!(j.deriv(1, 0).abs() < 1e-12 && j.deriv(0, 1).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mixed_simply_supported_conditions() {
        let p = Problem::new(ProblemKind::LshapeMixed);
        for &s in &[0.2, 0.5, 0.8] {
            let j = p.jet(s, 0.0);
            assert!(j.value().abs() < 1e-14 && j.deriv(0, 2).abs() < 1e-11);
            let j = p.jet(0.0, -s);
            assert!(j.value().abs() < 1e-14 && j.deriv(2, 0).abs() < 1e-11);
        }
    }
}
