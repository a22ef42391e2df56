//! Residual error estimator and bulk marking.

use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteField;
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{gauss_legendre, SquareRule};

/// Boundary-approximation term added on fictitious meshes during marking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    #[default]
    None,
    /// `h_T^2` times the global estimator, squared.
    Global,
    /// `h_T^2` times the element's own indicator.
    Local,
}

/// Per-element indicator components, indexed by element position.
#[derive(Debug, Clone, Default)]
pub struct Indicators {
    pub volume: Vec<f64>,
    /// Jump terms of normal derivative order 1, 2 and 3.
    pub jumps: [Vec<f64>; 3],
    pub projection: Vec<f64>,
    pub total: Vec<f64>,
}

impl Indicators {
    pub fn eta(&self) -> f64 {
        self.total.iter().sum::<f64>().sqrt()
    }

    /// Indicators used for marking, with the boundary term added on the
    /// given elements.
    pub fn augmented(&self, mesh: &Mesh, touching: &[bool], mode: Augmentation) -> Vec<f64> {
        let global = self.total.iter().sum::<f64>();
        self.total
            .iter()
            .enumerate()
            .map(|(e, &t)| {
                if !touching[e] {
                    return t;
                }
                let h2 = mesh.elem_rect(e).diameter().powi(2);
                match mode {
                    Augmentation::None => t,
                    Augmentation::Global => t + h2 * global,
                    Augmentation::Local => t + h2 * t,
                }
            })
            .collect()
    }

    /// CSV with one row per element: id, components, total.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut s = String::from("element,volume,jump1,jump2,jump3,projection,total\n");
        for e in 0..self.total.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                mesh.elem_id(e),
                self.volume[e],
                self.jumps[0][e],
                self.jumps[1][e],
                self.jumps[2][e],
                self.projection[e],
                self.total[e]
            ));
        }
        s
    }
}

/// Which normal-derivative jumps enter on a boundary edge.
fn boundary_weight(tag: BoundaryTag, j: usize) -> f64 {
    match (tag, j) {
        (BoundaryTag::Clamped, 1) => 1.0,
        (BoundaryTag::SimplySupported, 2) => 1.0,
        _ => 0.0,
    }
}

fn normal_deriv(u: &DiscreteField, e: usize, axis: usize, j: usize, p: [f64; 2]) -> f64 {
    let q = u.rects[e].to_ref(p[0], p[1]);
    if axis == 0 {
        u.deriv(e, j, 0, q[0], q[1])
    } else {
        u.deriv(e, 0, j, q[0], q[1])
    }
}

pub fn estimate(mesh: &Mesh, u: &DiscreteField, f: &dyn Fn(f64, f64) -> f64) -> Indicators {
    let ne = mesh.n_elements();
    let rule = SquareRule::new(5);
    let h: Vec<f64> = (0..ne).map(|e| u.rects[e].diameter()).collect();
    let mut ind = Indicators {
        volume: vec![0.0; ne],
        jumps: [vec![0.0; ne], vec![0.0; ne], vec![0.0; ne]],
        projection: vec![0.0; ne],
        total: vec![0.0; ne],
    };
    for e in 0..ne {
        let r = u.rects[e];
        let jac = r.area() / 4.0;
        let mut s = 0.0;
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let x = r.to_phys(q[0], q[1]);
            let v = f(x[0], x[1]);
            s += w * jac * v * v;
        }
        ind.volume[e] = h[e].powi(4) * s;
        ind.projection[e] = projection_defect_sq(u, e, mesh.is_irregular_elem(e));
    }
    let (gx, gw) = gauss_legendre(4);
    for edge in mesh.edges() {
        let a = mesh.vertex(edge.ends[0]).x;
        let b = mesh.vertex(edge.ends[1]).x;
        let half = 0.5 * edge.length;
        for j in 1..=3 {
            let weight = match edge.tag {
                Some(tag) => boundary_weight(tag, j),
                None => 1.0,
            };
            if weight == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for (t, w) in gx.iter().zip(&gw) {
                let p = [
                    0.5 * (a[0] + b[0]) + 0.5 * t * (b[0] - a[0]),
                    0.5 * (a[1] + b[1]) + 0.5 * t * (b[1] - a[1]),
                ];
                let lo = edge.elems[0].map_or(0.0, |e| normal_deriv(u, e, edge.normal_axis, j, p));
                let hi = edge.elems[1].map_or(0.0, |e| normal_deriv(u, e, edge.normal_axis, j, p));
                s += w * half * (lo - hi).powi(2);
            }
            for e in edge.elems.iter().flatten() {
                ind.jumps[j - 1][*e] += weight * h[*e].powi(2 * j as i32 - 3) * s;
            }
        }
    }
    for e in 0..ne {
        ind.total[e] = ind.volume[e] + ind.jumps[0][e] + ind.jumps[1][e] + ind.jumps[2][e] + ind.projection[e];
    }
    ind
}

/// `|(1 - P) D^2 u_h|^2_T` with `P` the L2 projection onto affine functions
/// (constants on elements with an irregular vertex), entrywise.
fn projection_defect_sq(u: &DiscreteField, e: usize, irregular: bool) -> f64 {
    let rule = SquareRule::new(3);
    let jac = u.rects[e].area() / 4.0;
    let hs: Vec<[f64; 3]> = rule.points.iter().map(|q| u.hessian(e, q[0], q[1])).collect();
    let mut total = 0.0;
    for (c, mult) in [(0usize, 1.0), (1, 2.0), (2, 1.0)] {
        // coefficients against the orthogonal basis 1, xi, eta
        let mut m = [0.0; 3];
        for (k, (q, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let v = hs[k][c];
            m[0] += w * v;
            m[1] += w * v * q[0];
            m[2] += w * v * q[1];
        }
        let p = [m[0] / 4.0, m[1] * 0.75, m[2] * 0.75];
        let mut s = 0.0;
        for (k, (q, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let proj = if irregular { p[0] } else { p[0] + p[1] * q[0] + p[2] * q[1] };
            s += w * (hs[k][c] - proj).powi(2);
        }
        total += mult * jac * s;
    }
    total
}

/// Smallest prefix of the indicators sorted decreasingly (ties by element
/// id) whose sum reaches `theta` times the total. Returns element ids.
pub fn dorfler(mesh: &Mesh, eta_sq: &[f64], theta: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(mesh.elem_id(a).cmp(&mesh.elem_id(b))));
    let total: f64 = eta_sq.iter().sum();
    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for e in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        acc += eta_sq[e];
        marked.push(mesh.elem_id(e));
    }
    marked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    #[test]
    fn dorfler_prefix_and_ties() {
        let m = Mesh::tensor(Domain::rectangle(0.0, 1.0, 0.0, 1.0), 2, 2).unwrap();
        assert_eq!(dorfler(&m, &[1.0, 3.0, 3.0, 1.0], 0.375), vec![1]);
        assert_eq!(dorfler(&m, &[1.0, 3.0, 3.0, 1.0], 0.5), vec![1, 2]);
        assert_eq!(dorfler(&m, &[1.0, 1.0, 1.0, 1.0], 0.3), vec![0, 1]);
        assert_eq!(dorfler(&m, &[1.0, 1.0, 1.0, 1.0], 1.0).len(), 4);
    }
}
