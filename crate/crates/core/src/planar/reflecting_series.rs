//! Continuous part of the reflecting motion at constant rate.
//!
//! With rate λ the reflecting motion has the law of the motion that, at the
//! events of a Poisson process of rate ρ = 4λ/3, draws its direction
//! uniformly from all four (the draw keeps the old direction a quarter of
//! the time). Given m events the m+1 sojourn directions are i.i.d. uniform,
//! so the direction counts n = (n0, n1, n2, n3) are Multinomial(m+1, ¼) and
//! the occupation fractions (T_k / t) are Dirichlet(n). With unit speed,
//! X = T0 − T2 and Y = T1 − T3.
//!
//! Integrating out H = T0 + T2 leaves a polynomial in H, so a Gauss–Legendre
//! rule of sufficient order is exact. Counts with an empty horizontal
//! (vertical) direction put X (Y) on the boundary of its range and contribute
//! without the H integral. Counts with two or more empty directions land on
//! the sides, diagonals or vertices and are excluded.

use crate::specfun::GaussLegendre;
use crate::{Error, Result};

/// Series truncation: drop event counts whose Poisson tail is below this.
pub const DEFAULT_TAIL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct ReflectingSeries {
    t: f64,
    /// Largest sojourn count N = m + 1 kept.
    n_max: usize,
    inv_fact: Vec<f64>,
    /// e^{−ρt} ρ^{N−1} N!
    base: Vec<f64>,
    gl: GaussLegendre,
}

impl ReflectingSeries {
    /// Unit-speed series for constant rate `lambda` at time `t`.
    pub fn new(lambda: f64, t: f64, tail: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) || !(t > 0.0) {
            return Err(Error::domain(format!(
                "series needs lambda >= 0 and t > 0, got {lambda}, {t}"
            )));
        }
        let rho = 4.0 * lambda / 3.0;
        let mean = rho * t;
        // smallest m_max with P(M > m_max) < tail
        let mut pmf = (-mean).exp();
        let mut cdf = pmf;
        let mut m_max = 0usize;
        while 1.0 - cdf >= tail && m_max < 400 {
            m_max += 1;
            pmf *= mean / m_max as f64;
            cdf += pmf;
        }
        Self::with_sojourns(lambda, t, m_max + 1)
    }

    /// Series keeping sojourn counts up to `n_max`, independent of t. A fixed
    /// truncation keeps the density smooth in t, which finite differences need.
    pub fn with_sojourns(lambda: f64, t: f64, n_max: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) || !(t > 0.0) {
            return Err(Error::domain(format!(
                "series needs lambda >= 0 and t > 0, got {lambda}, {t}"
            )));
        }
        let rho = 4.0 * lambda / 3.0;
        let mean = rho * t;
        let n_max = n_max.max(4);
        let mut inv_fact = vec![1.0; n_max + 2];
        for n in 1..inv_fact.len() {
            inv_fact[n] = inv_fact[n - 1] / n as f64;
        }
        let mut base = vec![0.0; n_max + 1];
        // e^{−ρt} ρ^{N−1} N!, built incrementally: N! ρ^{N−1} = N ρ · (N−1)! ρ^{N−2}
        let mut acc = (-mean).exp();
        for (n, b) in base.iter_mut().enumerate().skip(1) {
            if n > 1 {
                acc *= n as f64 * rho;
            }
            *b = acc;
        }
        let gl = GaussLegendre::new(n_max / 2 + 2);
        Ok(Self {
            t,
            n_max,
            inv_fact,
            base,
            gl,
        })
    }

    pub fn max_sojourns(&self) -> usize {
        self.n_max
    }

    /// g^{n−1} / (n!(n−1)!) for n = 1..=len (index 0 unused).
    fn phi(&self, g: f64, len: usize, out: &mut [f64]) {
        let mut pow = 1.0;
        out[0] = 0.0;
        for n in 1..=len {
            out[n] = pow * self.inv_fact[n] * self.inv_fact[n - 1];
            pow *= g;
        }
    }

    /// Σ_{i+j=s, i,j≥1} a_i b_j for s = 2..=len+1 (index s).
    fn convolve(a: &[f64], b: &[f64], len: usize, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = 0.0;
        }
        for i in 1..=len {
            if a[i] == 0.0 {
                continue;
            }
            for j in 1..=(len + 1 - i).min(len) {
                out[i + j] += a[i] * b[j];
            }
        }
    }

    /// Joint density of the unit-speed motion at (x, y) with x, y > 0 and
    /// x + y < t. Other quadrants follow by symmetry.
    pub fn joint_unit_quadrant(&self, x: f64, y: f64) -> f64 {
        let t = self.t;
        let nm = self.n_max;
        let len = nm;
        let mut p0 = vec![0.0; len + 1];
        let mut p1 = vec![0.0; len + 1];
        let mut p2 = vec![0.0; len + 1];
        let mut p3 = vec![0.0; len + 1];
        let mut a = vec![0.0; len + 2];
        let mut b = vec![0.0; len + 2];

        // every direction visited
        let two_pow = |k: i32| 2f64.powi(k);
        let case_all = self.gl.integrate(
            |h| {
                self.phi(h + x, len, &mut p0);
                self.phi(h - x, len, &mut p2);
                self.phi(t - h + y, len, &mut p1);
                self.phi(t - h - y, len, &mut p3);
                Self::convolve(&p0, &p2, len, &mut a);
                Self::convolve(&p1, &p3, len, &mut b);
                let mut s = 0.0;
                for n in 4..=nm {
                    let mut inner = 0.0;
                    for ia in 2..=n - 2 {
                        inner += a[ia] * b[n - ia];
                    }
                    s += self.base[n] * 0.25f64.powi(n as i32) * two_pow(-(n as i32 - 2)) * inner;
                }
                s
            },
            x,
            t - y,
        );

        // direction 2 never taken: X = T0
        let mut psi = vec![0.0; len + 1];
        self.phi(x, len, &mut psi);
        self.phi(t - x + y, len, &mut p1);
        self.phi(t - x - y, len, &mut p3);
        Self::convolve(&p1, &p3, len, &mut b);
        let mut case_x = 0.0;
        for n in 3..=nm {
            let mut inner = 0.0;
            for ia in 1..=n - 2 {
                let ib = n - ia;
                inner += psi[ia] * b[ib] * two_pow(-(ib as i32 - 1));
            }
            case_x += self.base[n] * 0.25f64.powi(n as i32) * inner;
        }

        // direction 3 never taken: Y = T1
        self.phi(y, len, &mut psi);
        self.phi(t - y + x, len, &mut p0);
        self.phi(t - y - x, len, &mut p2);
        Self::convolve(&p0, &p2, len, &mut a);
        let mut case_y = 0.0;
        for n in 3..=nm {
            let mut inner = 0.0;
            for ib in 1..=n - 2 {
                let ia = n - ib;
                inner += psi[ib] * a[ia] * two_pow(-(ia as i32 - 1));
            }
            case_y += self.base[n] * 0.25f64.powi(n as i32) * inner;
        }

        case_all + case_x + case_y
    }

    /// Joint density of the unit-speed motion at an interior point off the
    /// axes.
    pub fn joint_unit(&self, x: f64, y: f64) -> Result<f64> {
        let (ax, ay) = (x.abs(), y.abs());
        if !(ax > 0.0 && ay > 0.0 && ax + ay < self.t) {
            return Err(Error::domain(format!(
                "({x}, {y}) is not in an open quadrant of the support at t = {}",
                self.t
            )));
        }
        Ok(self.joint_unit_quadrant(ax, ay))
    }

    /// Continuous part of the X marginal of the unit-speed motion at
    /// 0 < |x| < t. The sides and the horizontal diagonal project onto
    /// continuous laws in x and are included.
    pub fn marginal_unit(&self, x: f64) -> Result<f64> {
        let t = self.t;
        let x = x.abs();
        if !(x > 0.0 && x < t) {
            return Err(Error::domain(format!("|x| = {x} is not inside (0, {t})")));
        }
        let nm = self.n_max;
        let len = nm;
        let mut p0 = vec![0.0; len + 1];
        let mut p2 = vec![0.0; len + 1];
        let mut pv = vec![0.0; len + 1];
        let mut a = vec![0.0; len + 2];

        // both horizontal directions and some vertical time
        let mixed = self.gl.integrate(
            |h| {
                self.phi(h + x, len, &mut p0);
                self.phi(h - x, len, &mut p2);
                self.phi(t - h, len, &mut pv);
                Self::convolve(&p0, &p2, len, &mut a);
                let mut s = 0.0;
                for n in 3..=nm {
                    let mut inner = 0.0;
                    for ia in 2..=n - 1 {
                        let ib = n - ia;
                        inner += a[ia]
                            * pv[ib]
                            * 0.125f64.powi(ia as i32)
                            * 2.0
                            * 0.5f64.powi(ib as i32);
                    }
                    s += self.base[n] * inner;
                }
                s
            },
            x,
            t,
        );

        // horizontal only
        self.phi(t + x, len, &mut p0);
        self.phi(t - x, len, &mut p2);
        Self::convolve(&p0, &p2, len, &mut a);
        let mut diagonal = 0.0;
        for n in 2..=nm {
            diagonal += self.base[n] * 0.25f64.powi(n as i32) * 0.5f64.powi(n as i32 - 1) * a[n];
        }

        // one horizontal direction and some vertical time
        self.phi(x, len, &mut p0);
        self.phi(t - x, len, &mut pv);
        let mut one_sided = 0.0;
        for n in 2..=nm {
            let mut inner = 0.0;
            for ia in 1..=n - 1 {
                let ib = n - ia;
                inner += p0[ia] * pv[ib] * 0.25f64.powi(ia as i32) * 0.5f64.powi(ib as i32);
            }
            one_sided += self.base[n] * inner;
        }

        Ok(mixed + diagonal + one_sided)
    }
}
