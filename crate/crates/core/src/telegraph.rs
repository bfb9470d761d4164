//! One-dimensional telegraph process: a particle at speed v that reverses
//! at the events of a Poisson process.

use std::io::{self, Write};

use rand::Rng;
use serde::Serialize;

use crate::rates::{PoissonSampler, RateFunction};
use crate::specfun::{bessel_i0, bessel_i1_over_x, integrate};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TelegraphSpec {
    pub speed: f64,
    pub rate: RateFunction,
}

impl TelegraphSpec {
    pub fn new(speed: f64, rate: RateFunction) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::Config(format!(
                "speed must be positive, got {speed}"
            )));
        }
        Ok(Self { speed, rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelegraphSample {
    pub position: f64,
    pub final_velocity: f64,
    pub switch_count: usize,
}

/// Sampler reusable across paths; the initial velocity is ±v with
/// probability ½ each.
#[derive(Debug, Clone)]
pub struct TelegraphSampler {
    speed: f64,
    events: PoissonSampler,
}

impl TelegraphSampler {
    pub fn new(spec: &TelegraphSpec, t: f64) -> Result<Self> {
        Ok(Self {
            speed: spec.speed,
            events: PoissonSampler::new(&spec.rate, t)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TelegraphSample> {
        let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mut last = 0.0;
        let mut displacement = 0.0;
        let mut count = 0;
        self.events.for_each_event(rng, |s| {
            displacement += sign * (s - last);
            sign = -sign;
            last = s;
            count += 1;
        })?;
        displacement += sign * (self.events.horizon() - last);
        Ok(TelegraphSample {
            position: self.speed * displacement,
            final_velocity: sign * self.speed,
            switch_count: count,
        })
    }
}

pub fn sample_telegraph<R: Rng + ?Sized>(
    spec: &TelegraphSpec,
    t: f64,
    rng: &mut R,
) -> Result<TelegraphSample> {
    TelegraphSampler::new(spec, t)?.sample(rng)
}

/// Total mass of the two atoms at ±vt, zero when Λ diverges.
pub fn singular_mass(spec: &TelegraphSpec, t: f64) -> f64 {
    (-spec.rate.cumulative_or_infinite(t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AcForm {
    ConstantRate(f64),
    Unavailable,
}

/// Law of the telegraph position at a fixed time: atoms at ±vt plus an
/// absolutely continuous part on (−vt, vt).
#[derive(Debug, Clone)]
pub struct Density1D {
    pub atoms: Vec<(f64, f64)>,
    pub t: f64,
    pub spec: TelegraphSpec,
    ac: AcForm,
}

#[derive(Serialize)]
struct Density1DHeader<'a> {
    atoms: &'a [(f64, f64)],
    t: f64,
    v: f64,
    rate: String,
}

impl Density1D {
    /// Density law for any rate. The continuous part is only available in
    /// closed form for constant rates.
    pub fn new(spec: &TelegraphSpec, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("density needs t > 0, got {t}")));
        }
        let half = 0.5 * singular_mass(spec, t);
        let vt = spec.speed * t;
        let ac = match spec.rate.as_constant() {
            Some(mu) => AcForm::ConstantRate(mu),
            None => AcForm::Unavailable,
        };
        Ok(Self {
            atoms: vec![(-vt, half), (vt, half)],
            t,
            spec: spec.clone(),
            ac,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.spec.speed * self.t
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn has_ac(&self) -> bool {
        matches!(self.ac, AcForm::ConstantRate(_))
    }

    /// Continuous part at x, for |x| < vt.
    pub fn ac(&self, x: f64) -> Result<f64> {
        let vt = self.half_width();
        if !(x.abs() < vt) {
            return Err(Error::domain(format!(
                "|x| = {} is not inside (-{vt}, {vt})",
                x.abs()
            )));
        }
        match self.ac {
            AcForm::ConstantRate(mu) => Ok(const_ac(mu, self.spec.speed, self.t, x)),
            AcForm::Unavailable => Err(Error::UnsupportedRate(self.spec.rate.to_string())),
        }
    }

    /// ∫_a^b ac, for −vt ≤ a ≤ b ≤ vt.
    pub fn ac_integral(&self, a: f64, b: f64, tol: f64) -> Result<f64> {
        let mu = match self.ac {
            AcForm::ConstantRate(mu) => mu,
            AcForm::Unavailable => return Err(Error::UnsupportedRate(self.spec.rate.to_string())),
        };
        let vt = self.half_width();
        let (a, b) = (a.max(-vt), b.min(vt));
        if a >= b {
            return Ok(0.0);
        }
        let v = self.spec.speed;
        let t = self.t;
        integrate(|x| const_ac(mu, v, t, x), a, b, tol)
    }

    /// Atoms plus the integral of the continuous part.
    pub fn total_mass(&self) -> Result<f64> {
        let vt = self.half_width();
        Ok(self.atom_mass() + self.ac_integral(-vt, vt, 1e-12)?)
    }

    pub fn header_json(&self) -> String {
        serde_json::to_string(&Density1DHeader {
            atoms: &self.atoms,
            t: self.t,
            v: self.spec.speed,
            rate: self.spec.rate.to_string(),
        })
        .expect("header serializes")
    }

    /// `x,density` rows at `points` cell midpoints of (−vt, vt).
    pub fn write_csv<W: Write>(&self, points: usize, mut w: W) -> io::Result<()> {
        writeln!(w, "x,density")?;
        let vt = self.half_width();
        let dx = 2.0 * vt / points as f64;
        for i in 0..points {
            let x = -vt + (i as f64 + 0.5) * dx;
            let p = self
                .ac(x)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
            writeln!(w, "{x},{p}")?;
        }
        Ok(())
    }
}

/// e^{−μt}/(2v) · [μ I₀(z) + ∂ₜI₀(z)], z = (μ/v)√(v²t² − x²)
fn const_ac(mu: f64, v: f64, t: f64, x: f64) -> f64 {
    if mu == 0.0 {
        return 0.0;
    }
    let vt = v * t;
    let z = mu / v * ((vt - x) * (vt + x)).max(0.0).sqrt();
    let dt = mu * mu * t * bessel_i1_over_x(z);
    (-mu * t).exp() / (2.0 * v) * (mu * bessel_i0(z) + dt)
}

pub fn telegraph_density_const(mu: f64, v: f64, t: f64) -> Result<Density1D> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!("rate must be >= 0, got {mu}")));
    }
    let spec = TelegraphSpec::new(v, RateFunction::constant(mu))?;
    Density1D::new(&spec, t)
}

/// Density of the position given exactly n reversals, with the reversal
/// times distributed as uniform order statistics on (0, t).
pub fn telegraph_conditional_density(n: usize, v: f64, t: f64, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("conditional density needs n >= 1"));
    }
    let vt = v * t;
    if !(vt > 0.0) || !(x.abs() < vt) {
        return Err(Error::domain(format!(
            "|x| = {} is not inside (-{vt}, {vt})",
            x.abs()
        )));
    }
    let xi = x / vt;
    let w = (1.0 - xi) * (1.0 + xi);
    let k = n / 2;
    let b = central_binomial_over_4k(k);
    let value = if n % 2 == 1 {
        // n = 2k+1: (2k+1)! / (k!² 2^{2k+1}) · w^k
        b * (2 * k + 1) as f64 / 2.0 * w.powi(k as i32)
    } else {
        // n = 2k: (2k)! / (k!(k−1)! 2^{2k}) · w^{k−1}
        b * k as f64 * w.powi(k as i32 - 1)
    };
    Ok(value / vt)
}

/// (2k)! / (k!² 4^k)
fn central_binomial_over_4k(k: usize) -> f64 {
    (1..=k).fold(1.0, |b, j| {
        let jf = j as f64;
        b * (2.0 * jf - 1.0) / (2.0 * jf)
    })
}
