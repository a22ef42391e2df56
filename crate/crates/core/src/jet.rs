//! Truncated bivariate Taylor expansions of total degree 4, used to obtain
//! derivatives of closed-form solutions.

use std::ops::{Add, Mul, Neg, Sub};

pub const DEGREE: usize = 4;
pub const LEN: usize = 15;

/// Index of the coefficient of `dx^a dy^b`.
#[inline]
pub const fn jidx(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

const fn exps() -> [(usize, usize); LEN] {
    let mut out = [(0, 0); LEN];
    let mut d = 0;
    while d <= DEGREE {
        let mut b = 0;
        while b <= d {
            out[jidx(d - b, b)] = (d - b, b);
            b += 1;
        }
        d += 1;
    }
    out
}

pub const EXPONENTS: [(usize, usize); LEN] = exps();

const N_PRODUCTS: usize = 70;

/// Number of product terms whose result has total degree at most `d`.
const PRODUCTS_UP_TO: [usize; DEGREE + 1] = [1, 5, 15, 35, 70];

/// Index triples `(i, j, k)` with `x^i * x^j = x^k`, ordered by the degree
/// of `k` so that truncated products use a prefix.
const PRODUCTS: [(u8, u8, u8); N_PRODUCTS] = {
    let mut t = [(0u8, 0u8, 0u8); N_PRODUCTS];
    let mut n = 0;
    let mut d = 0;
    while d <= DEGREE {
        let mut p = 0;
        while p <= d {
            let q = d - p;
            let mut bi = 0;
            while bi <= p {
                let mut bj = 0;
                while bj <= q {
                    let i = jidx(p - bi, bi);
                    let j = jidx(q - bj, bj);
                    t[n] = (i as u8, j as u8, jidx(d - bi - bj, bi + bj) as u8);
                    n += 1;
                    bj += 1;
                }
                bi += 1;
            }
            p += 1;
        }
        d += 1;
    }
    t
};

/// Taylor coefficients around a base point, truncated at total degree
/// `deg <= 4`. Coefficients above `deg` are kept zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub c: [f64; LEN],
    pub deg: usize,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c, deg: DEGREE }
    }

    /// The coordinate functions `x` and `y` expanded at `(x0, y0)`.
    pub fn variables(x0: f64, y0: f64) -> (Jet, Jet) {
        Jet::variables_to(x0, y0, DEGREE)
    }

    /// Coordinate jets truncated at degree `deg`; everything built from
    /// them is computed to that order only.
    pub fn variables_to(x0: f64, y0: f64, deg: usize) -> (Jet, Jet) {
        assert!((1..=DEGREE).contains(&deg));
        let mut x = Jet::constant(x0);
        let mut y = Jet::constant(y0);
        x.deg = deg;
        y.deg = deg;
        x.c[jidx(1, 0)] = 1.0;
        y.c[jidx(0, 1)] = 1.0;
        (x, y)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative `d_x^a d_y^b` at the base point.
    pub fn deriv(&self, a: usize, b: usize) -> f64 {
        if a + b > DEGREE {
            return 0.0;
        }
        debug_assert!(a + b <= self.deg, "derivative beyond truncation degree");
        self.c[jidx(a, b)] * factorial(a) * factorial(b)
    }

    pub fn hessian(&self) -> [f64; 3] {
        [self.deriv(2, 0), self.deriv(1, 1), self.deriv(0, 2)]
    }

    /// `u_xxxx + 2 u_xxyy + u_yyyy`.
    pub fn bilaplacian(&self) -> f64 {
        self.deriv(4, 0) + 2.0 * self.deriv(2, 2) + self.deriv(0, 4)
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut r = *self;
        for v in r.c.iter_mut() {
            *v *= s;
        }
        r
    }

    /// `f(self)` for a univariate `f` with derivatives `d[k] = f^(k)(self(0))`.
    pub fn compose(&self, d: [f64; DEGREE + 1]) -> Jet {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Jet::constant(d[0]);
        out.deg = self.deg;
        let mut pow = delta;
        let mut fact = 1.0;
        for (k, dk) in d.iter().enumerate().take(self.deg + 1).skip(1) {
            fact *= k as f64;
            let s = dk / fact;
            for i in 1..LEN {
                out.c[i] += s * pow.c[i];
            }
            if k < self.deg {
                pow = pow * delta;
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let a = self.c[0];
        let i = 1.0 / a;
        self.compose([i, -i * i, 2.0 * i * i * i, -6.0 * i.powi(4), 24.0 * i.powi(5)])
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.c[0];
        let mut d = [0.0; DEGREE + 1];
        let mut coef = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = coef * a.powf(p - k as f64);
            coef *= p - k as f64;
        }
        self.compose(d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    /// Polar radius and angle of `(x, y)` jets. The angle's base value is
    /// taken in `[0, 2 pi)`.
    pub fn polar(x0: f64, y0: f64) -> (Jet, Jet) {
        Jet::polar_to(x0, y0, DEGREE)
    }

    pub fn polar_to(x0: f64, y0: f64, deg: usize) -> (Jet, Jet) {
        let (x, y) = Jet::variables_to(x0, y0, deg);
        let r2 = x * x + y * y;
        let r = r2.sqrt();
        let mut t0 = y0.atan2(x0);
        if t0 < 0.0 {
            t0 += 2.0 * std::f64::consts::PI;
        }
        // theta = t0 + atan(w) with w = (x0 dy - y0 dx) / (r0^2 + x0 dx + y0 dy)
        let mut num = Jet::constant(0.0);
        num.deg = deg;
        num.c[jidx(1, 0)] = -y0;
        num.c[jidx(0, 1)] = x0;
        let mut den = Jet::constant(x0 * x0 + y0 * y0);
        den.deg = deg;
        den.c[jidx(1, 0)] = x0;
        den.c[jidx(0, 1)] = y0;
        let w = num * den.recip();
        let mut theta = w.compose([0.0, 1.0, 0.0, -2.0, 0.0]);
        theta.c[0] = t0;
        (r, theta)
    }
}

impl Jet {
    fn truncate(mut self, deg: usize) -> Jet {
        if deg < self.deg {
            self.deg = deg;
            self.c[(deg + 1) * (deg + 2) / 2..].fill(0.0);
        }
        self
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        for i in 0..LEN {
            self.c[i] += o.c[i];
        }
        self.truncate(o.deg)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, o: Jet) -> Jet {
        for i in 0..LEN {
            self.c[i] -= o.c[i];
        }
        self.truncate(o.deg)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let deg = self.deg.min(o.deg);
        let mut c = [0.0; LEN];
        for &(i, j, k) in &PRODUCTS[..PRODUCTS_UP_TO[deg]] {
            c[k as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { c, deg }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, o: f64) -> Jet {
        self.c[0] += o;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        self.scale(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, a: usize, b: usize) -> f64 {
        // central differences, one order at a time
        let h = 1e-2;
        if a > 0 {
            let g = |x: f64, y: f64| fd(f, x, y, a - 1, b);
            return (g(x + h, y) - g(x - h, y)) / (2.0 * h);
        }
        if b > 0 {
            let g = |x: f64, y: f64| fd(f, x, y, a, b - 1);
            return (g(x, y + h) - g(x, y - h)) / (2.0 * h);
        }
        f(x, y)
    }

    #[test]
    fn product_table_is_complete() {
        let mut seen = std::collections::HashSet::new();
        for (n, &(i, j, k)) in PRODUCTS.iter().enumerate() {
            let (a, b) = EXPONENTS[i as usize];
            let (c, d) = EXPONENTS[j as usize];
            assert_eq!(EXPONENTS[k as usize], (a + c, b + d));
            assert!(n < PRODUCTS_UP_TO[a + b + c + d]);
            assert!(seen.insert((i, j)));
        }
    }

    #[test]
    fn truncated_jets_agree_with_full_ones() {
        let build = |deg| {
            let (x, y) = Jet::variables_to(0.4, -0.7, deg);
            let (r, t) = Jet::polar_to(0.4, -0.7, deg);
            (x * x + (-1.0)) * r.powf(1.3) * t.scale(0.8).sin() + y.cos()
        };
        let full = build(4);
        let low = build(2);
        for (a, b) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            assert!((full.deriv(a, b) - low.deriv(a, b)).abs() < 1e-13);
        }
        assert!(low.c[6..].iter().all(|&c| c == 0.0));
    }

    #[test]
    fn polynomial_products_are_exact() {
        let (x, y) = Jet::variables(0.3, -0.4);
        let p = x * x * y + y * y * y * x;
        // d_x d_y (x^2 y + x y^3) = 2x + 3 y^2
        assert!((p.deriv(1, 1) - (0.6 + 3.0 * 0.16)).abs() < 1e-14);
        assert!((p.deriv(1, 3) - 6.0).abs() < 1e-14);
        assert!((p.deriv(2, 2)).abs() < 1e-14);
    }

    #[test]
    fn polar_angle_matches_atan2() {
        let f = |x: f64, y: f64| {
            let t = y.atan2(x);
            if t < 0.0 { t + 2.0 * std::f64::consts::PI } else { t }
        };
        for &(x, y) in &[(0.3, 0.7), (-0.5, 0.2), (-0.4, -0.6), (0.9, -0.05)] {
            let (r, t) = Jet::polar(x, y);
            assert!((r.value() - (x * x + y * y as f64).sqrt()).abs() < 1e-15);
            for (a, b) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
                let want = fd(&f, x, y, a, b);
                let got = t.deriv(a, b);
                assert!((got - want).abs() < 1e-3 * (1.0 + want.abs()), "({a},{b}): {got} vs {want}");
            }
            // r cos(theta) = x and r sin(theta) = y to all orders
            let (jx, jy) = Jet::variables(x, y);
            let ex = r * t.cos() - jx;
            let ey = r * t.sin() - jy;
            assert!(ex.c.iter().chain(ey.c.iter()).all(|c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn transcendental_compositions() {
        let f = |x: f64, y: f64| (x * y).sin() * (x + y * y).powf(1.5) + (0.5 * x).cos();
        let (x, y) = Jet::variables(0.6, 0.8);
        let j = (x * y).sin() * (x + y * y).powf(1.5) + (x * 0.5).cos();
        for (a, b) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (4, 0), (2, 2), (0, 4)] {
            let want = fd(&f, 0.6, 0.8, a, b);
            assert!((j.deriv(a, b) - want).abs() < 2e-3 * (1.0 + want.abs()), "({a},{b})");
        }
        let inv = (x + y).recip() * (x + y);
        assert!((inv.value() - 1.0).abs() < 1e-15);
        assert!(inv.c[1..].iter().all(|c| c.abs() < 1e-13));
    }
}
