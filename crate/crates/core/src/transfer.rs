//! Interpolation and averaging operators used as diagnostics: the
//! hanging-node aware bilinear interpolation `Q`, the Adini interpolation
//! `I_h`, the bicubic (BFS) averaging `J` and `J_0`, and the element-wise
//! L2 projection onto bicubics.

use std::sync::OnceLock;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use crate::assembly::DiscreteField;
use crate::dofs::{DofState, DofSystem};
use crate::element::{phys_deriv, Rect, REF_CORNERS};
use crate::mesh::Mesh;
use crate::poly::{idx, Q3};
use crate::quadrature::{gauss_legendre, SquareRule};

/// Multi-indices of the bicubic vertex functionals.
pub const BFS_ALPHA: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Continuous piecewise bilinear function given by its vertex values.
#[derive(Debug, Clone)]
pub struct BilinearField {
    /// One value per mesh vertex; irregular entries are derived.
    pub values: Vec<f64>,
}

impl BilinearField {
    /// Value and gradient on element `e` at a reference point.
    pub fn eval(&self, mesh: &Mesh, e: usize, xi: f64, eta: f64) -> (f64, [f64; 2]) {
        let r = mesh.elem_rect(e);
        let v = mesh.elem_vertices(e).map(|k| self.values[k]);
        let mut val = 0.0;
        let mut g = [0.0; 2];
        for (c, z) in REF_CORNERS.iter().enumerate() {
            let bx = 0.5 * (1.0 + z[0] * xi);
            let by = 0.5 * (1.0 + z[1] * eta);
            val += v[c] * bx * by;
            g[0] += v[c] * 0.5 * z[0] * by / r.half[0];
            g[1] += v[c] * bx * 0.5 * z[1] / r.half[1];
        }
        (val, g)
    }
}

/// `Q v`: takes `data[z]` at regular vertices and interpolates linearly
/// along the host side at irregular ones.
pub fn q1_interpolate(mesh: &Mesh, data: &dyn Fn(usize) -> f64) -> BilinearField {
    let values = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, vx)| match vx.hanging {
            None => data(v),
            Some(h) => {
                let [l1, l2] = h.lambda;
                (l2 * data(h.ends[0]) + l1 * data(h.ends[1])) / (l1 + l2)
            }
        })
        .collect();
    BilinearField { values }
}

/// Adini interpolation with the boundary and hanging-node constraints of
/// `dofs`. `data(v)` returns `(value, d_x, d_y)` at vertex `v`; it is only
/// queried where a degree of freedom is free.
pub fn adini_interpolate(mesh: &Mesh, dofs: &DofSystem, data: &dyn Fn(usize) -> [f64; 3]) -> DiscreteField {
    let mut free = vec![0.0; dofs.n_free()];
    for v in 0..mesh.vertices().len() {
        let mut cached = None;
        for a in 0..3 {
            if let DofState::Free(i) = dofs.states[3 * v + a] {
                let d = *cached.get_or_insert_with(|| data(v));
                free[i] = d[a];
            }
        }
    }
    DiscreteField::from_free(mesh, dofs, free)
}

/// Convenience wrapper of [`adini_interpolate`] for a function given by
/// value and gradient at physical points.
pub fn adini_interpolate_fn(mesh: &Mesh, dofs: &DofSystem, u: &dyn Fn([f64; 2]) -> [f64; 3]) -> DiscreteField {
    adini_interpolate(mesh, dofs, &|v| u(mesh.vertex(v).x))
}

pub struct BfsReference {
    pub basis: [Q3; 16],
    mass_inv: [[f64; 16]; 16],
}

/// Reference bicubic basis dual to `d^alpha` at the corners, ordered corner
/// by corner and within a corner by [`BFS_ALPHA`].
pub fn bfs() -> &'static BfsReference {
    static REF: OnceLock<BfsReference> = OnceLock::new();
    REF.get_or_init(|| {
        let mut m = Mat::<f64>::zeros(16, 16);
        for (c, z) in REF_CORNERS.iter().enumerate() {
            for (k, &(i, j)) in BFS_ALPHA.iter().enumerate() {
                for a in 0..4 {
                    for b in 0..4 {
                        m[(4 * c + k, idx(a, b))] = Q3::monomial(a, b).deriv(i, j, z[0], z[1]);
                    }
                }
            }
        }
        let inv = m.partial_piv_lu().inverse();
        let mut basis = [Q3::zero(); 16];
        for (n, psi) in basis.iter_mut().enumerate() {
            for k in 0..16 {
                psi.c[k] = inv[(k, n)];
            }
        }
        // mass matrix of the monomials on the reference square
        let moment = |p: usize| if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
        let mut mass = Mat::<f64>::zeros(16, 16);
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        mass[(idx(a, b), idx(c, d))] = moment(a + c) * moment(b + d);
                    }
                }
            }
        }
        let mi = mass.partial_piv_lu().inverse();
        let mut mass_inv = [[0.0; 16]; 16];
        for (i, row) in mass_inv.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = mi[(i, j)];
            }
        }
        BfsReference { basis, mass_inv }
    })
}

/// Bicubic on `rect` with physical vertex data `d[4 * corner + k]`.
pub fn bfs_polynomial(d: &[f64; 16], rect: &Rect) -> Q3 {
    let [hx, hy] = rect.half;
    let scale = [1.0, hx, hy, hx * hy];
    let mut p = Q3::zero();
    for (n, psi) in bfs().basis.iter().enumerate() {
        if d[n] != 0.0 {
            p.add_scaled(d[n] * scale[n % 4], psi);
        }
    }
    p
}

/// Element-wise L2 projection onto bicubics, 5x5 Gauss.
pub fn project_q3(mesh: &Mesh, f: &dyn Fn(f64, f64) -> f64) -> DiscreteField {
    let rule = SquareRule::new(5);
    let mi = &bfs().mass_inv;
    let mut local = Vec::with_capacity(mesh.n_elements());
    let mut rects = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let r = mesh.elem_rect(e);
        let mut b = [0.0; 16];
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let x = r.to_phys(q[0], q[1]);
            let v = w * f(x[0], x[1]);
            for a in 0..4 {
                for c in 0..4 {
                    b[idx(a, c)] += v * q[0].powi(a as i32) * q[1].powi(c as i32);
                }
            }
        }
        let mut p = Q3::zero();
        for i in 0..16 {
            p.c[i] = (0..16).map(|j| mi[i][j] * b[j]).sum();
        }
        local.push(p);
        rects.push(r);
    }
    DiscreteField { free: Vec::new(), local, rects }
}

fn functionals_at(v: &DiscreteField, e: usize, z: [f64; 2]) -> [f64; 4] {
    let r = v.rects[e];
    let q = r.to_ref(z[0], z[1]);
    BFS_ALPHA.map(|(i, j)| phys_deriv(&v.local[e], r.half, i, j, q[0], q[1]))
}

/// BFS averaging `J v` (or `J_0 v` with `zero_boundary`) of a piecewise
/// bicubic field. The result is C1 at all vertices.
pub fn bfs_average(mesh: &Mesh, v: &DiscreteField, zero_boundary: bool) -> DiscreteField {
    let nv = mesh.vertices().len();
    // basic averaging M over all elements containing the vertex
    let mut m = vec![[0.0; 4]; nv];
    for (z, vx) in mesh.vertices().iter().enumerate() {
        if zero_boundary && vx.boundary.is_some() {
            continue;
        }
        let elems = mesh.vertex_elems(z);
        for &e in elems {
            let f = functionals_at(v, e, vx.x);
            for k in 0..4 {
                m[z][k] += f[k] / elems.len() as f64;
            }
        }
    }
    let m_poly = |e: usize| {
        let r = mesh.elem_rect(e);
        let mut d = [0.0; 16];
        for (c, &z) in mesh.elem_vertices(e).iter().enumerate() {
            d[4 * c..4 * c + 4].copy_from_slice(&m[z]);
        }
        (bfs_polynomial(&d, &r), r)
    };
    let mut j = m.clone();
    for (z, vx) in mesh.vertices().iter().enumerate() {
        if let Some(h) = vx.hanging {
            let (p, r) = m_poly(h.host);
            let q = r.to_ref(vx.x[0], vx.x[1]);
            j[z] = BFS_ALPHA.map(|(a, b)| phys_deriv(&p, r.half, a, b, q[0], q[1]));
        }
    }
    let mut local = Vec::with_capacity(mesh.n_elements());
    let mut rects = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let r = mesh.elem_rect(e);
        let mut d = [0.0; 16];
        for (c, &z) in mesh.elem_vertices(e).iter().enumerate() {
            d[4 * c..4 * c + 4].copy_from_slice(&j[z]);
        }
        local.push(bfs_polynomial(&d, &r));
        rects.push(r);
    }
    DiscreteField { free: Vec::new(), local, rects }
}

/// Vertex data `(v, d_x v, d_y v)` of a field that is C1 at vertex `z`,
/// read from the first element having `z` as a corner.
pub fn vertex_data(mesh: &Mesh, v: &DiscreteField, z: usize) -> [f64; 3] {
    let x = mesh.vertex(z).x;
    let e = mesh.vertex_elems(z)[0];
    let f = functionals_at(v, e, x);
    [f[0], f[1], f[2]]
}

/// Largest mismatch of the one-sided bicubic functionals over all regular
/// vertices and incident elements, relative to the largest magnitude.
pub fn vertex_mismatch(mesh: &Mesh, v: &DiscreteField) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1e-300;
    for (z, vx) in mesh.vertices().iter().enumerate() {
        let fs: Vec<[f64; 4]> = mesh.vertex_elems(z).iter().map(|&e| functionals_at(v, e, vx.x)).collect();
        for f in &fs {
            for k in 0..4 {
                scale = scale.max(f[k].abs());
                worst = worst.max((f[k] - fs[0][k]).abs());
            }
        }
    }
    worst / scale
}

/// `sum_T |v - w|^2_T` for two piecewise fields on the same mesh.
pub fn l2_diff_sq(v: &DiscreteField, w: &DiscreteField) -> f64 {
    let rule = SquareRule::new(5);
    let mut s = 0.0;
    for e in 0..v.local.len() {
        let jac = v.rects[e].area() / 4.0;
        for (q, wt) in rule.points.iter().zip(&rule.weights) {
            let d = v.local[e].value(q[0], q[1]) - w.local[e].value(q[0], q[1]);
            s += wt * jac * d * d;
        }
    }
    s
}

/// `sum_T |D^2 (v - w)|^2_T`.
pub fn energy_diff_sq(v: &DiscreteField, w: &DiscreteField) -> f64 {
    let rule = SquareRule::new(4);
    let mut s = 0.0;
    for e in 0..v.local.len() {
        let jac = v.rects[e].area() / 4.0;
        for (q, wt) in rule.points.iter().zip(&rule.weights) {
            let a = v.hessian(e, q[0], q[1]);
            let b = w.hessian(e, q[0], q[1]);
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            s += wt * jac * (d[0] * d[0] + 2.0 * d[1] * d[1] + d[2] * d[2]);
        }
    }
    s
}

/// `sum_E h_E |[v]|^2_E + h_E^3 |[grad v . n]|^2_E`, boundary edges
/// contributing traces.
pub fn jump_bound_sq(mesh: &Mesh, v: &DiscreteField) -> f64 {
    let (gx, gw) = gauss_legendre(5);
    let mut s = 0.0;
    for edge in mesh.edges() {
        let a = mesh.vertex(edge.ends[0]).x;
        let b = mesh.vertex(edge.ends[1]).x;
        let h = edge.length;
        for (t, w) in gx.iter().zip(&gw) {
            let p = [
                0.5 * (a[0] + b[0]) + 0.5 * t * (b[0] - a[0]),
                0.5 * (a[1] + b[1]) + 0.5 * t * (b[1] - a[1]),
            ];
            let side = |e: Option<usize>| {
                e.map_or([0.0; 2], |e| {
                    let r = v.rects[e];
                    let q = r.to_ref(p[0], p[1]);
                    let (i, j) = if edge.normal_axis == 0 { (1, 0) } else { (0, 1) };
                    [v.local[e].value(q[0], q[1]), phys_deriv(&v.local[e], r.half, i, j, q[0], q[1])]
                })
            };
            let lo = side(edge.elems[0]);
            let hi = side(edge.elems[1]);
            s += 0.5 * w * h * (h * (lo[0] - hi[0]).powi(2) + h.powi(3) * (lo[1] - hi[1]).powi(2));
        }
    }
    s
}

/// Bicubic field given by a local polynomial on every element, expressed
/// in that element's reference coordinates.
pub fn from_polynomial(mesh: &Mesh, p: &dyn Fn(&Rect) -> Q3) -> DiscreteField {
    let rects: Vec<Rect> = (0..mesh.n_elements()).map(|e| mesh.elem_rect(e)).collect();
    let local = rects.iter().map(p).collect();
    DiscreteField { free: Vec::new(), local, rects }
}

/// A global polynomial with physical coefficients `c[idx(a, b)]` of
/// `x^a y^b`, re-expanded in the reference coordinates of `rect`.
pub fn restrict_global(c: &Q3, rect: &Rect) -> Q3 {
    c.affine(rect.half[0], rect.center[0], rect.half[1], rect.center[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofs::Variant;
    use crate::mesh::Domain;

    fn hanging_mesh() -> Mesh {
        let mut m = Mesh::tensor(Domain::rectangle(-1.0, 1.0, -1.0, 1.0), 4, 4).unwrap();
        m.refine_at([0.1, 0.1]).unwrap();
        m.refine_at([0.3, 0.2]).unwrap();
        m
    }

    #[test]
    fn q_reproduces_affine() {
        let m = hanging_mesh();
        let f = |p: [f64; 2]| 0.3 - 1.7 * p[0] + 0.4 * p[1];
        let q = q1_interpolate(&m, &|v| f(m.vertex(v).x));
        for (v, vx) in m.vertices().iter().enumerate() {
            assert!((q.values[v] - f(vx.x)).abs() < 1e-13);
        }
    }

    #[test]
    fn q_of_square_at_midpoint() {
        let m = hanging_mesh();
        let q = q1_interpolate(&m, &|v| m.vertex(v).x[0].powi(2));
        let (v, vx) = m.vertices().iter().enumerate().find(|(_, v)| v.hanging.is_some()).unwrap();
        let h = vx.hanging.unwrap();
        let (x1, x2) = (m.vertex(h.ends[0]).x, m.vertex(h.ends[1]).x);
        if h.normal_axis() == 1 {
            assert!((q.values[v] - 0.5 * (x1[0].powi(2) + x2[0].powi(2))).abs() < 1e-14);
            assert!((q.values[v] - vx.x[0].powi(2)).abs() > 1e-3);
        } else {
            assert!((q.values[v] - vx.x[0].powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn bfs_basis_is_dual() {
        for (n, psi) in bfs().basis.iter().enumerate() {
            for (c, z) in REF_CORNERS.iter().enumerate() {
                for (k, &(i, j)) in BFS_ALPHA.iter().enumerate() {
                    let want = if n == 4 * c + k { 1.0 } else { 0.0 };
                    assert!((psi.deriv(i, j, z[0], z[1]) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn averaging_keeps_global_bicubics() {
        let m = hanging_mesh();
        let mut g = Q3::zero();
        for (k, c) in g.c.iter_mut().enumerate() {
            *c = ((k * 7 % 5) as f64 - 2.0) * 0.3;
        }
        let v = from_polynomial(&m, &|r| restrict_global(&g, r));
        let j = bfs_average(&m, &v, false);
        assert!(l2_diff_sq(&v, &j) < 1e-24);
        assert!(vertex_mismatch(&m, &j) < 1e-12);
    }

    #[test]
    fn projection_is_exact_on_bicubics() {
        let m = hanging_mesh();
        let f = |x: f64, y: f64| x.powi(3) * y * y - 2.0 * x * y.powi(3) + 0.5;
        let p = project_q3(&m, &f);
        for e in 0..m.n_elements() {
            let r = m.elem_rect(e);
            let x = r.to_phys(0.3, -0.6);
            assert!((p.local[e].value(0.3, -0.6) - f(x[0], x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_preserves_quadratics_inside() {
        let m = hanging_mesh();
        let u = |p: [f64; 2]| {
            let (x, y) = (p[0], p[1]);
            [1.0 + x - 2.0 * y + x * x + 0.5 * x * y - y * y, 1.0 + 2.0 * x + 0.5 * y, -2.0 + 0.5 * x - 2.0 * y]
        };
        for variant in [Variant::Averaging, Variant::Hard] {
            let opts = crate::dofs::DofOptions { essential: false, ..crate::dofs::DofOptions::new(variant) };
            let d = DofSystem::build(&m, &opts).unwrap();
            let ih = adini_interpolate_fn(&m, &d, &u);
            for e in 0..m.n_elements() {
                let r = m.elem_rect(e);
                let x = r.to_phys(0.2, 0.7);
                assert!((ih.local[e].value(0.2, 0.7) - u(x)[0]).abs() < 1e-12);
            }
        }
    }
}
