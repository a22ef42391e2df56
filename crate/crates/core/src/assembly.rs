//! Assembly of the reduced stiffness system and its solution.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use crate::dofs::DofSystem;
use crate::element::{self, local_polynomial, phys_hessian, Rect};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::poly::Q3;
use crate::quadrature::SquareRule;

/// Free indices touched by element `e` and the dense map from them to
/// the 12 local degrees of freedom (`c[i][k]`, local `i`, free `k`).
fn element_map(mesh: &Mesh, dofs: &DofSystem, e: usize) -> (Vec<u32>, Vec<[f64; 12]>) {
    let mut free: Vec<u32> = Vec::with_capacity(16);
    for i in 0..12 {
        for &(f, _) in dofs.expansion(DofSystem::local_dof(mesh, e, i)) {
            free.push(f);
        }
    }
    free.sort_unstable();
    free.dedup();
    let mut c = vec![[0.0; 12]; free.len()];
    for i in 0..12 {
        for &(f, w) in dofs.expansion(DofSystem::local_dof(mesh, e, i)) {
            let k = free.binary_search(&f).unwrap();
            c[k][i] += w;
        }
    }
    (free, c)
}

fn reduce(k: &[[f64; 12]; 12], c: &[[f64; 12]]) -> Vec<f64> {
    let m = c.len();
    // kc[a][i] = sum_j k[i][j] c[a][j]
    let kc: Vec<[f64; 12]> = c
        .iter()
        .map(|ca| {
            let mut r = [0.0; 12];
            for i in 0..12 {
                r[i] = (0..12).map(|j| k[i][j] * ca[j]).sum();
            }
            r
        })
        .collect();
    let mut out = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            out[a * m + b] = (0..12).map(|i| c[a][i] * kc[b][i]).sum();
        }
    }
    out
}

/// Lower triangle of the stiffness matrix and the load vector.
pub struct LinearSystem {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
}

pub fn assemble(mesh: &Mesh, dofs: &DofSystem, f: &dyn Fn(f64, f64) -> f64, load_rule: &SquareRule) -> LinearSystem {
    let n = dofs.n_free();
    let ne = mesh.n_elements();
    let maps: Vec<(Vec<u32>, Vec<[f64; 12]>)> = (0..ne).map(|e| element_map(mesh, dofs, e)).collect();
    let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (free, _) in &maps {
        for (a, &j) in free.iter().enumerate() {
            cols[j as usize].extend_from_slice(&free[a..]);
        }
    }
    let mut col_ptr = Vec::with_capacity(n + 1);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    for c in cols.iter_mut() {
        c.sort_unstable();
        c.dedup();
        row_idx.extend(c.iter().map(|&r| r as usize));
        col_ptr.push(row_idx.len());
        *c = Vec::new();
    }
    drop(cols);
    let mut values = vec![0.0; row_idx.len()];
    let mut rhs = vec![0.0; n];
    for (e, (free, c)) in maps.iter().enumerate() {
        let rect = mesh.elem_rect(e);
        let k = element::stiffness(rect.half);
        let kr = reduce(&k, c);
        let fl = element::load(&rect, load_rule, f);
        let m = free.len();
        for a in 0..m {
            rhs[free[a] as usize] += (0..12).map(|i| c[a][i] * fl[i]).sum::<f64>();
        }
        for b in 0..m {
            let j = free[b] as usize;
            let col = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            for a in b..m {
                let r = free[a] as usize;
                let pos = col_ptr[j] + col.binary_search(&r).unwrap();
                values[pos] += kr[a * m + b];
            }
        }
    }
    LinearSystem { n, col_ptr, row_idx, values, rhs }
}

impl LinearSystem {
    /// `y = A x` using the stored lower triangle.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.values[self.col_ptr[j]]).collect()
    }

    /// Sparse Cholesky; falls back to preconditioned conjugate gradients if
    /// the factorization fails.
    pub fn solve(&self) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Ok(Vec::new());
        }
        match self.solve_cholesky() {
            Ok(x) => Ok(x),
            Err(Error::NotPositiveDefinite) => self.solve_cg(1e-12, 20 * self.n + 100),
            Err(e) => Err(e),
        }
    }

    pub fn solve_cholesky(&self) -> Result<Vec<f64>> {
        let sym = SymbolicSparseColMat::new_checked(self.n, self.n, self.col_ptr.clone(), None, self.row_idx.clone());
        let a = SparseColMat::new(sym, self.values.clone());
        let llt = a.sp_cholesky(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
        let mut b = Mat::<f64>::zeros(self.n, 1);
        for i in 0..self.n {
            b[(i, 0)] = self.rhs[i];
        }
        let x = llt.solve(&b);
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }

    pub fn solve_cg(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let d = self.diagonal();
        if d.iter().any(|&v| v <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let bnorm = dot(&self.rhs, &self.rhs).sqrt();
        let mut x = vec![0.0; self.n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = self.rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&d).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 0..max_iter {
            let ap = self.apply(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            let alpha = rz / pap;
            for i in 0..self.n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let res = dot(&r, &r).sqrt() / bnorm;
            if res < tol {
                return Ok(x);
            }
            if it + 1 == max_iter {
                return Err(Error::NoConvergence { iterations: max_iter, residual: res });
            }
            for i in 0..self.n {
                z[i] = r[i] / d[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..self.n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: f64::NAN })
    }
}

/// A function of the discrete space, stored element by element.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    pub free: Vec<f64>,
    /// Polynomial on each element in the element's reference coordinates.
    pub local: Vec<Q3>,
    pub rects: Vec<Rect>,
}

impl DiscreteField {
    pub fn from_free(mesh: &Mesh, dofs: &DofSystem, free: Vec<f64>) -> Self {
        let full = dofs.full_vector(&free);
        Self::from_full(mesh, &full, free)
    }

    /// From values of all global degrees of freedom.
    pub fn from_full(mesh: &Mesh, full: &[f64], free: Vec<f64>) -> Self {
        let mut local = Vec::with_capacity(mesh.n_elements());
        let mut rects = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let rect = mesh.elem_rect(e);
            let mut d = [0.0; 12];
            for (i, di) in d.iter_mut().enumerate() {
                *di = full[DofSystem::local_dof(mesh, e, i)];
            }
            local.push(local_polynomial(&d, rect.half));
            rects.push(rect);
        }
        DiscreteField { free, local, rects }
    }

    /// Physical derivative `d_x^i d_y^j` on element `e` at reference point.
    pub fn deriv(&self, e: usize, i: usize, j: usize, xi: f64, eta: f64) -> f64 {
        element::phys_deriv(&self.local[e], self.rects[e].half, i, j, xi, eta)
    }

    pub fn hessian(&self, e: usize, xi: f64, eta: f64) -> [f64; 3] {
        phys_hessian(&self.local[e], self.rects[e].half, xi, eta)
    }

    /// Value at a physical point (first element containing it).
    pub fn value_at(&self, p: [f64; 2]) -> Option<f64> {
        self.rects.iter().position(|r| r.contains(p)).map(|e| {
            let q = self.rects[e].to_ref(p[0], p[1]);
            self.local[e].value(q[0], q[1])
        })
    }

    /// Broken energy `sum_T |D^2 v|^2_T`.
    pub fn energy_sq(&self) -> f64 {
        let rule = SquareRule::new(3);
        let mut s = 0.0;
        for e in 0..self.local.len() {
            let jac = self.rects[e].area() / 4.0;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let h = self.hessian(e, p[0], p[1]);
                s += w * jac * (h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2]);
            }
        }
        s
    }
}

/// Assembles and solves; returns the discrete solution.
pub fn solve(
    mesh: &Mesh,
    dofs: &DofSystem,
    f: &dyn Fn(f64, f64) -> f64,
    load_rule: &SquareRule,
) -> Result<DiscreteField> {
    let sys = assemble(mesh, dofs, f, load_rule);
    let x = sys.solve()?;
    Ok(DiscreteField::from_free(mesh, dofs, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dofs::Variant;
    use crate::mesh::Domain;

    fn mesh() -> Mesh {
        let mut m = Mesh::tensor(Domain::rectangle(-1.0, 1.0, -1.0, 1.0), 4, 4).unwrap();
        m.refine_at([0.0, 0.0]).unwrap();
        m.refine_at([-0.1, -0.1]).unwrap();
        m
    }

    #[test]
    fn matrix_is_symmetric_positive_definite() {
        let m = mesh();
        for v in [Variant::Averaging, Variant::Hard] {
            let d = DofSystem::new(&m, v).unwrap();
            let sys = assemble(&m, &d, &|_, _| 1.0, &SquareRule::new(5));
            let n = sys.n;
            let mut a = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let col = sys.apply(&e);
                for i in 0..n {
                    a[(i, j)] = col[i];
                }
            }
            let ev = a.self_adjoint_eigenvalues(Side::Lower).unwrap();
            assert!(ev[0] > 1e-8, "smallest eigenvalue {}", ev[0]);
        }
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let m = mesh();
        let d = DofSystem::new(&m, Variant::Averaging).unwrap();
        let sys = assemble(&m, &d, &|x, y| 1.0 + x * y, &SquareRule::new(5));
        let a = sys.solve_cholesky().unwrap();
        let b = sys.solve_cg(1e-13, 10_000).unwrap();
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * scale);
    }

    #[test]
    fn discrete_field_is_continuous_across_hanging_edges() {
        let m = mesh();
        for v in [Variant::Averaging, Variant::Hard] {
            let d = DofSystem::new(&m, v).unwrap();
            let u = solve(&m, &d, &|_, _| 1.0, &SquareRule::new(5)).unwrap();
            for edge in m.edges() {
                let [Some(a), Some(b)] = edge.elems else { continue };
                let p0 = m.vertex(edge.ends[0]).x;
                let p1 = m.vertex(edge.ends[1]).x;
                for t in [0.1, 0.5, 0.77] {
                    let p = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
                    let qa = u.rects[a].to_ref(p[0], p[1]);
                    let qb = u.rects[b].to_ref(p[0], p[1]);
                    let va = u.local[a].value(qa[0], qa[1]);
                    let vb = u.local[b].value(qb[0], qb[1]);
                    assert!((va - vb).abs() < 1e-13, "{v}: jump {}", va - vb);
                }
            }
        }
    }
}
