//! Modified Bessel functions of order 0 and 1, the time derivative of the
//! Bessel kernel that appears in every constant-rate density, and 1D
//! quadrature (adaptive Gauss–Kronrod and fixed Gauss–Legendre).

use std::f64::consts::PI;

use crate::{Error, Result};

/// Power series below, large-argument expansion above.
const SERIES_CROSSOVER: f64 = 15.0;

/// Below this argument `I1(z)/z` is evaluated from its own series.
const SMALL_Z: f64 = 1e-6;

const MAX_SERIES_TERMS: usize = 500;

/// I₀(x) = Σ (x/2)^{2k} / k!²
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x > SERIES_CROSSOVER {
        return asymptotic(0.0, x);
    }
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < f64::EPSILON * 1e-2 * sum {
            break;
        }
    }
    sum
}

/// I₁(x) = Σ (x/2)^{2k+1} / (k!(k+1)!)
pub fn bessel_i1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_i1(-x);
    }
    if x > SERIES_CROSSOVER {
        return asymptotic(1.0, x);
    }
    x * bessel_i1_over_x(x)
}

/// I₁(x)/x, finite at the origin where it equals 1/2.
pub fn bessel_i1_over_x(x: f64) -> f64 {
    let x = x.abs();
    if x > SERIES_CROSSOVER {
        return asymptotic(1.0, x) / x;
    }
    let q = 0.25 * x * x;
    let mut term = 0.5;
    let mut sum = 0.5;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        term *= q / (kf * (kf + 1.0));
        sum += term;
        if term < f64::EPSILON * 1e-2 * sum {
            break;
        }
    }
    sum
}

/// Hankel expansion I_ν(x) ~ eˣ/√(2πx) Σ (−1)^k a_k(ν)/x^k, summed until the
/// terms stop shrinking.
fn asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_SERIES_TERMS {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < f64::EPSILON * 1e-2 * sum.abs() {
            break;
        }
    }
    // split the exponential so that results stay finite a little past 709
    let half = (0.5 * x).exp();
    half * (half * sum / (2.0 * PI * x).sqrt())
}

/// Argument of the light-cone Bessel kernel I₀(ν√(c²t² − x²)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselArg {
    pub nu: f64,
    pub c: f64,
    pub t: f64,
    pub x: f64,
}

impl BesselArg {
    pub fn new(nu: f64, c: f64, t: f64, x: f64) -> Self {
        Self { nu, c, t, x }
    }

    fn radius(&self) -> Result<f64> {
        let ct = self.c * self.t;
        let slack = 1e-12 * ct.max(f64::MIN_POSITIVE);
        if self.x.abs() > ct + slack {
            return Err(Error::domain(format!(
                "|x| = {} exceeds ct = {}",
                self.x.abs(),
                ct
            )));
        }
        Ok((ct * ct - self.x * self.x).max(0.0).sqrt())
    }

    /// I₀(ν√(c²t² − x²))
    pub fn i0(&self) -> Result<f64> {
        Ok(bessel_i0(self.nu * self.radius()?))
    }
}

/// ∂/∂t I₀(ν√(c²t² − x²)) = ν²c²t · I₁(z)/z with z = ν√(c²t² − x²).
///
/// The ratio form is finite on the light cone |x| = ct, where the derivative
/// tends to ν²c²t/2.
pub fn i0_time_derivative(arg: BesselArg) -> Result<f64> {
    let z = arg.nu * arg.radius()?;
    let ratio = if z < SMALL_Z {
        0.5 + z * z / 16.0
    } else {
        bessel_i1_over_x(z)
    };
    Ok(arg.nu * arg.nu * arg.c * arg.c * arg.t * ratio)
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 60;

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let (value, err) = gk15(f, a, b);
    if !value.is_finite() {
        return Err(Error::NonConvergent { a, b, tol });
    }
    if err <= tol || (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return Ok(value);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NonConvergent { a, b, tol });
    }
    let mid = 0.5 * (a + b);
    let left = adapt(f, a, mid, 0.5 * tol, depth + 1)?;
    let right = adapt(f, mid, b, 0.5 * tol, depth + 1)?;
    Ok(left + right)
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]` with an
/// absolute error target.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a > b {
        return Err(Error::domain(format!(
            "integration bounds reversed: {a} > {b}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let tol = abs_tol.max(f64::MIN_POSITIVE);
    adapt(&f, a, b, tol, 0)
}

/// Fixed-order Gauss–Legendre rule on [-1, 1]; exact for polynomials of
/// degree < 2n.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// ∫_a^b f using the rule mapped onto [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(center + half * x))
            .sum::<f64>()
            * half
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}
