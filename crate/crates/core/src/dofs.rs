//! Global degrees of freedom: vertex values and gradients, with essential
//! boundary conditions and hanging-node constraints.
//!
//! Degree of freedom `3 * v + a` of vertex `v` is its value (`a = 0`),
//! `d_x` (`a = 1`) or `d_y` (`a = 2`).

use serde::{Deserialize, Serialize};

use crate::element::{adini, dof_scale};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh};

/// How the normal derivative at a hanging node is coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Weighted average of the normal derivatives at the host side's ends.
    Averaging,
    /// Normal derivative of the coarse element's polynomial.
    Hard,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaging" => Ok(Variant::Averaging),
            "hard" => Ok(Variant::Hard),
            _ => Err(Error::Config(format!("unknown variant '{s}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Averaging => "averaging",
            Variant::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofState {
    Free(usize),
    /// Set to zero by a boundary condition.
    Zero,
    /// Set to zero because the vertex lies outside the physical domain.
    ZeroOutside,
    Constrained,
}

/// `dof = sum terms` before elimination of dependent degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub dof: usize,
    pub terms: Vec<(usize, f64)>,
}

pub struct DofOptions<'a> {
    pub variant: Variant,
    /// Apply the essential boundary conditions of the mesh's boundary tags.
    pub essential: bool,
    /// Regular vertices whose degrees of freedom are set to zero.
    pub zero_vertex: Option<&'a dyn Fn([f64; 2]) -> bool>,
}

impl DofOptions<'_> {
    pub fn new(variant: Variant) -> Self {
        DofOptions { variant, essential: true, zero_vertex: None }
    }
}

#[derive(Debug, Clone)]
pub struct DofSystem {
    pub variant: Variant,
    pub states: Vec<DofState>,
    pub rows: Vec<ConstraintRow>,
    /// Each global degree of freedom as a combination of free ones.
    expansion: Vec<Vec<(u32, f64)>>,
    n_free: usize,
}

impl DofSystem {
    pub fn new(mesh: &Mesh, variant: Variant) -> Result<Self> {
        Self::build(mesh, &DofOptions::new(variant))
    }

    pub fn build(mesh: &Mesh, opts: &DofOptions) -> Result<Self> {
        let nv = mesh.vertices().len();
        let mut states = vec![DofState::Zero; 3 * nv];
        let mut n_free = 0;
        for (v, vx) in mesh.vertices().iter().enumerate() {
            let kinds: [DofState; 3] = if vx.hanging.is_some() {
                [DofState::Constrained; 3]
            } else if let (true, Some(b)) = (opts.essential, vx.boundary) {
                match (b.tag, b.normal_axis) {
                    (BoundaryTag::SimplySupported, Some(ax)) => {
                        let mut k = [DofState::Zero; 3];
                        k[1 + ax] = DofState::Free(0);
                        k
                    }
                    _ => [DofState::Zero; 3],
                }
            } else if opts.zero_vertex.is_some_and(|f| f(vx.x)) {
                [DofState::ZeroOutside; 3]
            } else {
                [DofState::Free(0); 3]
            };
            for a in 0..3 {
                states[3 * v + a] = match kinds[a] {
                    DofState::Free(_) => {
                        n_free += 1;
                        DofState::Free(n_free - 1)
                    }
                    k => k,
                };
            }
        }
        let rows = constraint_rows(mesh, opts.variant);
        let mut sys = DofSystem { variant: opts.variant, states, rows, expansion: Vec::new(), n_free };
        sys.expand()?;
        Ok(sys)
    }

    fn expand(&mut self) -> Result<()> {
        let n = self.states.len();
        let mut row_of = vec![usize::MAX; n];
        for (r, row) in self.rows.iter().enumerate() {
            row_of[row.dof] = r;
        }
        let mut exp: Vec<Option<Vec<(u32, f64)>>> = vec![None; n];
        for d in 0..n {
            exp[d] = match self.states[d] {
                DofState::Free(i) => Some(vec![(i as u32, 1.0)]),
                DofState::Zero | DofState::ZeroOutside => Some(Vec::new()),
                DofState::Constrained => None,
            };
        }
        let mut in_progress = vec![false; n];
        for d in 0..n {
            resolve(d, &self.rows, &row_of, &mut exp, &mut in_progress)?;
        }
        self.expansion = exp.into_iter().map(|e| e.unwrap()).collect();
        Ok(())
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Degrees of freedom not removed by boundary conditions: free,
    /// constrained and fictitious-domain ones.
    pub fn ndof(&self) -> usize {
        self.states.iter().filter(|s| !matches!(s, DofState::Zero)).count()
    }

    pub fn n_constrained(&self) -> usize {
        self.states.iter().filter(|s| matches!(s, DofState::Constrained)).count()
    }

    pub fn expansion(&self, dof: usize) -> &[(u32, f64)] {
        &self.expansion[dof]
    }

    /// Global degree of freedom of local index `i` of element `e`.
    #[inline]
    pub fn local_dof(mesh: &Mesh, e: usize, i: usize) -> usize {
        3 * mesh.elem_vertices(e)[i / 3] + i % 3
    }

    /// Values of all global degrees of freedom for a free coefficient vector.
    pub fn full_vector(&self, free: &[f64]) -> Vec<f64> {
        self.expansion
            .iter()
            .map(|e| e.iter().map(|&(i, w)| w * free[i as usize]).sum())
            .collect()
    }
}

fn resolve(
    d: usize,
    rows: &[ConstraintRow],
    row_of: &[usize],
    exp: &mut Vec<Option<Vec<(u32, f64)>>>,
    in_progress: &mut [bool],
) -> Result<()> {
    if exp[d].is_some() {
        return Ok(());
    }
    if in_progress[d] {
        return Err(Error::MeshCondition(format!("cyclic hanging-node constraints at dof {d}")));
    }
    in_progress[d] = true;
    let row = &rows[row_of[d]];
    let mut acc: Vec<(u32, f64)> = Vec::new();
    for &(t, w) in &row.terms {
        resolve(t, rows, row_of, exp, in_progress)?;
        for &(i, c) in exp[t].as_ref().unwrap() {
            acc.push((i, w * c));
        }
    }
    acc.sort_by_key(|p| p.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(acc.len());
    for (i, w) in acc {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += w,
            _ => merged.push((i, w)),
        }
    }
    merged.retain(|p| p.1 != 0.0);
    in_progress[d] = false;
    exp[d] = Some(merged);
    Ok(())
}

/// Cubic Hermite weights `(h00, h10, h01, h11)` and their derivatives at `s`.
fn hermite(s: f64) -> ([f64; 4], [f64; 4]) {
    let (s2, s3) = (s * s, s * s * s);
    (
        [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2],
        [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s],
    )
}

/// Weights of the normal derivatives at the two ends of a host side for a
/// hanging vertex at distances `lambda` from them: linear interpolation.
pub fn averaging_weights(lambda: [f64; 2]) -> [f64; 2] {
    let len = lambda[0] + lambda[1];
    [lambda[1] / len, lambda[0] / len]
}

/// Constraint rows for every hanging vertex, three per vertex.
pub fn constraint_rows(mesh: &Mesh, variant: Variant) -> Vec<ConstraintRow> {
    let mut rows = Vec::new();
    for (v, vx) in mesh.vertices().iter().enumerate() {
        let Some(h) = vx.hanging else { continue };
        let n = h.normal_axis();
        let (at, an) = (2 - n, 1 + n);
        let [z1, z2] = h.ends;
        let len = h.lambda[0] + h.lambda[1];
        let s = h.lambda[0] / len;
        let (w, dw) = hermite(s);
        rows.push(ConstraintRow {
            dof: 3 * v,
            terms: vec![(3 * z1, w[0]), (3 * z1 + at, w[1] * len), (3 * z2, w[2]), (3 * z2 + at, w[3] * len)],
        });
        rows.push(ConstraintRow {
            dof: 3 * v + at,
            terms: vec![
                (3 * z1, dw[0] / len),
                (3 * z1 + at, dw[1]),
                (3 * z2, dw[2] / len),
                (3 * z2 + at, dw[3]),
            ],
        });
        let normal = match variant {
            Variant::Averaging => {
                let w = averaging_weights(h.lambda);
                vec![(3 * z1 + an, w[0]), (3 * z2 + an, w[1])]
            }
            Variant::Hard => {
                let rect = mesh.elem_rect(h.host);
                let p = rect.to_ref(vx.x[0], vx.x[1]);
                let sc = dof_scale(rect.half);
                let basis = &adini().basis;
                let ev = mesh.elem_vertices(h.host);
                (0..12)
                    .map(|i| {
                        let d = if n == 0 { basis[i].deriv(1, 0, p[0], p[1]) } else { basis[i].deriv(0, 1, p[0], p[1]) };
                        (3 * ev[i / 3] + i % 3, d * sc[i] / rect.half[n])
                    })
                    .filter(|t| t.1 != 0.0)
                    .collect()
            }
        };
        rows.push(ConstraintRow { dof: 3 * v + an, terms: normal });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Domain;

    fn square(n: usize) -> Mesh {
        Mesh::tensor(Domain::rectangle(-1.0, 1.0, -1.0, 1.0), n, n).unwrap()
    }

    #[test]
    fn midpoint_hermite_row() {
        let mut m = square(4);
        m.refine_at([0.0, 0.0]).unwrap();
        let rows = constraint_rows(&m, Variant::Averaging);
        assert_eq!(rows.len(), 12);
        // hanging vertex on an edge of length 2h = 0.5
        for r in rows.iter().filter(|r| r.dof % 3 == 0) {
            let w: Vec<f64> = r.terms.iter().map(|t| t.1).collect();
            assert_eq!(w, vec![0.5, 0.0625, 0.5, -0.0625]);
        }
    }

    #[test]
    fn counts_on_small_meshes() {
        let m = square(2);
        let d = DofSystem::new(&m, Variant::Averaging).unwrap();
        assert_eq!((d.n_free(), d.ndof()), (3, 3));
        let mut m = square(4);
        m.refine_at([0.0, 0.0]).unwrap();
        let d = DofSystem::new(&m, Variant::Hard).unwrap();
        assert_eq!((d.n_free(), d.ndof(), d.n_constrained()), (30, 42, 12));
    }

    #[test]
    fn mixed_lshape_counts() {
        let d = Domain {
            rects: vec![[-1.0, 1.0, 0.0, 1.0], [-1.0, 0.0, -1.0, 0.0]],
            simply_supported: vec![[[0.0, -1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
        };
        let mut m = Mesh::tensor(d, 4, 4).unwrap();
        assert_eq!(DofSystem::new(&m, Variant::Averaging).unwrap().ndof(), 17);
        m.uniform_refine().unwrap();
        assert_eq!(DofSystem::new(&m, Variant::Averaging).unwrap().ndof(), 105);
    }
}
