//! Bivariate polynomials of degree at most 3 in each variable, stored in
//! monomial form on the reference square [-1, 1]^2.

/// Coefficient of xi^a eta^b lives at index `a + 4 * b`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Q3 {
    pub c: [f64; 16],
}

#[inline]
pub fn idx(a: usize, b: usize) -> usize {
    a + 4 * b
}

#[inline]
fn falling(a: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for t in 0..k {
        r *= (a - t) as f64;
    }
    r
}

impl Q3 {
    pub fn zero() -> Self {
        Q3 { c: [0.0; 16] }
    }

    pub fn monomial(a: usize, b: usize) -> Self {
        let mut p = Q3::zero();
        p.c[idx(a, b)] = 1.0;
        p
    }

    /// `d^i/dxi^i d^j/deta^j` evaluated at `(xi, eta)`.
    pub fn deriv(&self, i: usize, j: usize, xi: f64, eta: f64) -> f64 {
        if i > 3 || j > 3 {
            return 0.0;
        }
        let px = [1.0, xi, xi * xi, xi * xi * xi];
        let py = [1.0, eta, eta * eta, eta * eta * eta];
        let mut s = 0.0;
        for b in j..4 {
            let mut row = 0.0;
            for a in i..4 {
                let c = self.c[idx(a, b)];
                if c != 0.0 {
                    row += c * falling(a, i) * px[a - i];
                }
            }
            s += row * falling(b, j) * py[b - j];
        }
        s
    }

    pub fn value(&self, xi: f64, eta: f64) -> f64 {
        self.deriv(0, 0, xi, eta)
    }

    /// Second derivatives `[d_xixi, d_xieta, d_etaeta]`.
    pub fn hessian(&self, xi: f64, eta: f64) -> [f64; 3] {
        [
            self.deriv(2, 0, xi, eta),
            self.deriv(1, 1, xi, eta),
            self.deriv(0, 2, xi, eta),
        ]
    }

    pub fn add_scaled(&mut self, s: f64, other: &Q3) {
        for k in 0..16 {
            self.c[k] += s * other.c[k];
        }
    }

    /// The polynomial `xi -> p(xi)` as a function of a physical variable
    /// pair is obtained by composing with an affine map; this re-expands
    /// `p(s_x * xi + t_x, s_y * eta + t_y)` in monomials of `(xi, eta)`.
    pub fn affine(&self, sx: f64, tx: f64, sy: f64, ty: f64) -> Q3 {
        let bx = binomial_expansion(sx, tx);
        let by = binomial_expansion(sy, ty);
        let mut out = Q3::zero();
        for a in 0..4 {
            for b in 0..4 {
                let c = self.c[idx(a, b)];
                if c == 0.0 {
                    continue;
                }
                for p in 0..=a {
                    for q in 0..=b {
                        out.c[idx(p, q)] += c * bx[a][p] * by[b][q];
                    }
                }
            }
        }
        out
    }
}

/// Row `a` holds the coefficients of `(s*x + t)^a` in powers of `x`.
fn binomial_expansion(s: f64, t: f64) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    m[0][0] = 1.0;
    for a in 1..4 {
        for p in 0..=a {
            let from_t = if p <= a - 1 { m[a - 1][p] * t } else { 0.0 };
            let from_s = if p >= 1 { m[a - 1][p - 1] * s } else { 0.0 };
            m[a][p] = from_t + from_s;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_monomial() {
        let p = Q3::monomial(3, 2);
        let (x, y) = (0.3, -0.7);
        assert!((p.value(x, y) - x.powi(3) * y * y).abs() < 1e-15);
        assert!((p.deriv(1, 1, x, y) - 3.0 * x * x * 2.0 * y).abs() < 1e-15);
        assert!((p.deriv(3, 2, x, y) - 12.0).abs() < 1e-15);
        assert_eq!(p.deriv(0, 3, x, y), 0.0);
    }

    #[test]
    fn affine_composition() {
        let mut p = Q3::zero();
        p.c[idx(3, 1)] = 2.0;
        p.c[idx(1, 2)] = -1.5;
        p.c[idx(0, 0)] = 0.25;
        let q = p.affine(0.5, 0.5, 2.0, -1.0);
        for &(x, y) in &[(0.1, 0.2), (-0.9, 0.4), (0.7, -0.3)] {
            assert!((q.value(x, y) - p.value(0.5 * x + 0.5, 2.0 * y - 1.0)).abs() < 1e-13);
        }
    }
}
