//! The Adini rectangle: shape space P3 + span{x^3 y, x y^3} with vertex
//! values and gradients as degrees of freedom.
//!
//! Local degrees of freedom are ordered corner by corner (counterclockwise
//! from the lower-left corner), each corner carrying `(v, d_x v, d_y v)`.

use std::sync::OnceLock;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::poly::{idx, Q3};
use crate::quadrature::SquareRule;

/// Exponents of the shape space monomials in `(xi, eta)`.
pub const MONOMIALS: [(usize, usize); 12] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (3, 1),
    (1, 3),
];

pub const REF_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Axis-aligned rectangle given by centre and half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub center: [f64; 2],
    pub half: [f64; 2],
}

impl Rect {
    pub fn from_bounds(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect {
            center: [0.5 * (x0 + x1), 0.5 * (y0 + y1)],
            half: [0.5 * (x1 - x0), 0.5 * (y1 - y0)],
        }
    }

    pub fn to_phys(&self, xi: f64, eta: f64) -> [f64; 2] {
        [self.center[0] + self.half[0] * xi, self.center[1] + self.half[1] * eta]
    }

    pub fn to_ref(&self, x: f64, y: f64) -> [f64; 2] {
        [(x - self.center[0]) / self.half[0], (y - self.center[1]) / self.half[1]]
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half[0] * self.half[1]
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.half[0].hypot(self.half[1])
    }

    pub fn corner(&self, k: usize) -> [f64; 2] {
        self.to_phys(REF_CORNERS[k][0], REF_CORNERS[k][1])
    }

    /// Closed containment test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= self.half[0] && (p[1] - self.center[1]).abs() <= self.half[1]
    }
}

pub struct AdiniReference {
    /// Reference basis functions, dual to the reference functionals
    /// `(v, d_xi v, d_eta v)` at the corners.
    pub basis: [Q3; 12],
    /// Condition number of the functional matrix.
    pub condition: f64,
    gram: [[[f64; 12]; 12]; 3],
}

pub fn adini() -> &'static AdiniReference {
    static REF: OnceLock<AdiniReference> = OnceLock::new();
    REF.get_or_init(AdiniReference::build)
}

impl AdiniReference {
    fn build() -> Self {
        let mut m = Mat::<f64>::zeros(12, 12);
        for (c, z) in REF_CORNERS.iter().enumerate() {
            for (k, &(a, b)) in MONOMIALS.iter().enumerate() {
                let p = Q3::monomial(a, b);
                m[(3 * c, k)] = p.value(z[0], z[1]);
                m[(3 * c + 1, k)] = p.deriv(1, 0, z[0], z[1]);
                m[(3 * c + 2, k)] = p.deriv(0, 1, z[0], z[1]);
            }
        }
        let sv = m.singular_values().expect("svd of functional matrix");
        let condition = sv[0] / sv[sv.len() - 1];
        let inv = m.partial_piv_lu().inverse();
        let mut basis = [Q3::zero(); 12];
        for (i, phi) in basis.iter_mut().enumerate() {
            for (k, &(a, b)) in MONOMIALS.iter().enumerate() {
                phi.c[idx(a, b)] = inv[(k, i)];
            }
        }
        let rule = SquareRule::new(3);
        let mut gram = [[[0.0; 12]; 12]; 3];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let h: Vec<[f64; 3]> = basis.iter().map(|phi| phi.hessian(p[0], p[1])).collect();
            for i in 0..12 {
                for j in 0..12 {
                    for c in 0..3 {
                        gram[c][i][j] += w * h[i][c] * h[j][c];
                    }
                }
            }
        }
        AdiniReference { basis, condition, gram }
    }
}

/// Scaling between physical and reference derivative degrees of freedom.
#[inline]
pub fn dof_scale(half: [f64; 2]) -> [f64; 12] {
    let mut s = [1.0; 12];
    for c in 0..4 {
        s[3 * c + 1] = half[0];
        s[3 * c + 2] = half[1];
    }
    s
}

/// Reference-coordinate polynomial of the Adini function with physical
/// degrees of freedom `d` on a rectangle with half-widths `half`.
pub fn local_polynomial(d: &[f64; 12], half: [f64; 2]) -> Q3 {
    let s = dof_scale(half);
    let basis = &adini().basis;
    let mut p = Q3::zero();
    for i in 0..12 {
        if d[i] != 0.0 {
            p.add_scaled(d[i] * s[i], &basis[i]);
        }
    }
    p
}

/// Physical basis function `i` on a rectangle with half-widths `half`, in
/// reference coordinates.
pub fn physical_basis(i: usize, half: [f64; 2]) -> Q3 {
    let mut p = adini().basis[i];
    let s = dof_scale(half)[i];
    for c in p.c.iter_mut() {
        *c *= s;
    }
    p
}

/// Physical derivative `d_x^i d_y^j` of a reference-coordinate polynomial.
#[inline]
pub fn phys_deriv(p: &Q3, half: [f64; 2], i: usize, j: usize, xi: f64, eta: f64) -> f64 {
    p.deriv(i, j, xi, eta) / (half[0].powi(i as i32) * half[1].powi(j as i32))
}

/// Physical Hessian `[u_xx, u_xy, u_yy]`.
#[inline]
pub fn phys_hessian(p: &Q3, half: [f64; 2], xi: f64, eta: f64) -> [f64; 3] {
    let h = p.hessian(xi, eta);
    [
        h[0] / (half[0] * half[0]),
        h[1] / (half[0] * half[1]),
        h[2] / (half[1] * half[1]),
    ]
}

/// Local stiffness matrix of the piecewise Hessian inner product.
pub fn stiffness(half: [f64; 2]) -> [[f64; 12]; 12] {
    let g = &adini().gram;
    let [hx, hy] = half;
    let s = dof_scale(half);
    let cxx = hy / hx.powi(3);
    let cxy = 2.0 / (hx * hy);
    let cyy = hx / hy.powi(3);
    let mut k = [[0.0; 12]; 12];
    for i in 0..12 {
        for j in 0..12 {
            k[i][j] = s[i] * s[j] * (cxx * g[0][i][j] + cxy * g[1][i][j] + cyy * g[2][i][j]);
        }
    }
    k
}

/// Local load vector `int_T f phi_i` by tensor Gauss quadrature.
pub fn load(rect: &Rect, rule: &SquareRule, f: &dyn Fn(f64, f64) -> f64) -> [f64; 12] {
    let basis = &adini().basis;
    let s = dof_scale(rect.half);
    let jac = rect.half[0] * rect.half[1];
    let mut out = [0.0; 12];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let x = rect.to_phys(p[0], p[1]);
        let fw = f(x[0], x[1]) * w * jac;
        if fw == 0.0 {
            continue;
        }
        for i in 0..12 {
            out[i] += fw * basis[i].value(p[0], p[1]);
        }
    }
    for i in 0..12 {
        out[i] *= s[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn functional(p: &Q3, j: usize) -> f64 {
        let z = REF_CORNERS[j / 3];
        match j % 3 {
            0 => p.value(z[0], z[1]),
            1 => p.deriv(1, 0, z[0], z[1]),
            _ => p.deriv(0, 1, z[0], z[1]),
        }
    }

    #[test]
    fn basis_is_dual_to_functionals() {
        let r = adini();
        for i in 0..12 {
            for j in 0..12 {
                let v = functional(&r.basis[i], j);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-13, "phi_{i} dof {j} = {v}");
            }
        }
        assert!(r.condition < 1e3, "condition {}", r.condition);
    }

    #[test]
    fn basis_lives_in_shape_space() {
        for phi in &adini().basis {
            for a in 0..4 {
                for b in 0..4 {
                    if !MONOMIALS.contains(&(a, b)) {
                        assert_eq!(phi.c[idx(a, b)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_with_affine_kernel() {
        let half = [0.3, 0.7];
        let k = stiffness(half);
        for i in 0..12 {
            for j in 0..12 {
                assert!((k[i][j] - k[j][i]).abs() < 1e-12 * k[i][i].abs().max(1.0));
            }
        }
        // dofs of 1, x and y on the rectangle centred at the origin
        let r = Rect { center: [0.0, 0.0], half };
        for f in 0..3 {
            let mut d = [0.0; 12];
            for c in 0..4 {
                let z = r.corner(c);
                let (v, gx, gy) = match f {
                    0 => (1.0, 0.0, 0.0),
                    1 => (z[0], 1.0, 0.0),
                    _ => (z[1], 0.0, 1.0),
                };
                d[3 * c] = v;
                d[3 * c + 1] = gx;
                d[3 * c + 2] = gy;
            }
            for i in 0..12 {
                let kd: f64 = (0..12).map(|j| k[i][j] * d[j]).sum();
                assert!(kd.abs() < 1e-11, "kernel {f}: {kd}");
            }
        }
    }

    #[test]
    fn stiffness_reproduces_hessian_energy_of_quadratic() {
        // q = x^2 + 3xy - y^2 has D^2 q : D^2 q = 4 + 2*9 + 4 = 26
        let r = Rect { center: [0.2, -0.1], half: [0.5, 0.25] };
        let q = |x: f64, y: f64| (x * x + 3.0 * x * y - y * y, 2.0 * x + 3.0 * y, 3.0 * x - 2.0 * y);
        let mut d = [0.0; 12];
        for c in 0..4 {
            let z = r.corner(c);
            let (v, gx, gy) = q(z[0], z[1]);
            d[3 * c] = v;
            d[3 * c + 1] = gx;
            d[3 * c + 2] = gy;
        }
        let k = stiffness(r.half);
        let e: f64 = (0..12).map(|i| (0..12).map(|j| d[i] * k[i][j] * d[j]).sum::<f64>()).sum();
        assert!((e - 26.0 * r.area()).abs() < 1e-11);
    }

    #[test]
    fn local_polynomial_interpolates_dofs() {
        let half = [0.25, 0.5];
        let d = [1.0, -2.0, 0.5, 0.3, 0.1, -0.4, 2.0, 1.5, 0.0, -1.0, 0.7, 0.2];
        let p = local_polynomial(&d, half);
        for c in 0..4 {
            let z = REF_CORNERS[c];
            assert!((p.value(z[0], z[1]) - d[3 * c]).abs() < 1e-13);
            assert!((phys_deriv(&p, half, 1, 0, z[0], z[1]) - d[3 * c + 1]).abs() < 1e-12);
            assert!((phys_deriv(&p, half, 0, 1, z[0], z[1]) - d[3 * c + 2]).abs() < 1e-12);
        }
    }
}
