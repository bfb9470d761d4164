//! Switching intensities λ(t) and samplers for the non-homogeneous Poisson
//! process they drive.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;

use crate::specfun::integrate;
use crate::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const MAJORANT_POINTS: usize = 1024;
const MAJORANT_SAFETY: f64 = 1.01;
const CUSTOM_QUAD_TOL: f64 = 1e-12;

/// User-supplied rate. Only `eval` is required; Λ falls back to adaptive
/// quadrature and the derivatives to central differences.
///
/// The checks in `pdecheck` assume λ is C² where they use λ″. That is not
/// verified here.
#[derive(Clone)]
pub struct CustomRate {
    pub name: String,
    pub eval: ScalarFn,
    pub cumulative: Option<ScalarFn>,
    pub deriv1: Option<ScalarFn>,
    pub deriv2: Option<ScalarFn>,
    pub integrable_at_zero: bool,
}

impl CustomRate {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            cumulative: None,
            deriv1: None,
            deriv2: None,
            integrable_at_zero: true,
        }
    }

    pub fn with_cumulative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.cumulative = Some(Arc::new(f));
        self
    }

    pub fn with_derivatives(
        mut self,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.deriv1 = Some(Arc::new(d1));
        self.deriv2 = Some(Arc::new(d2));
        self
    }

    pub fn non_integrable(mut self) -> Self {
        self.integrable_at_zero = false;
        self
    }
}

impl fmt::Debug for CustomRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRate")
            .field("name", &self.name)
            .field("cumulative", &self.cumulative.is_some())
            .field("derivatives", &self.deriv1.is_some())
            .field("integrable_at_zero", &self.integrable_at_zero)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum RateKind {
    Constant(f64),
    /// λ/t
    FoongVanKolck(f64),
    /// λ·tanh(λt)
    IacusTanh(f64),
    /// λ·coth(λt)
    GarraCoth(f64),
    Custom(CustomRate),
}

/// A rate `factor · kind(t)`. The factor carries the thinned and split
/// clocks (qλ, λ/2, λ/3, ...) without touching the shape parameter.
#[derive(Debug, Clone)]
pub struct RateFunction {
    kind: RateKind,
    factor: f64,
}

impl RateFunction {
    pub fn new(kind: RateKind) -> Result<Self> {
        let param = match &kind {
            RateKind::Constant(l)
            | RateKind::FoongVanKolck(l)
            | RateKind::IacusTanh(l)
            | RateKind::GarraCoth(l) => Some(*l),
            RateKind::Custom(_) => None,
        };
        if let Some(l) = param {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::Config(format!(
                    "rate parameter must be finite and >= 0, got {l}"
                )));
            }
            if l == 0.0 && !matches!(kind, RateKind::Constant(_)) {
                return Err(Error::Config(
                    "time-varying rates need a positive parameter".into(),
                ));
            }
        }
        Ok(Self { kind, factor: 1.0 })
    }

    pub fn constant(lambda: f64) -> Self {
        Self::new(RateKind::Constant(lambda)).expect("invalid constant rate")
    }

    pub fn foong(lambda: f64) -> Self {
        Self::new(RateKind::FoongVanKolck(lambda)).expect("invalid rate parameter")
    }

    pub fn tanh(lambda: f64) -> Self {
        Self::new(RateKind::IacusTanh(lambda)).expect("invalid rate parameter")
    }

    pub fn coth(lambda: f64) -> Self {
        Self::new(RateKind::GarraCoth(lambda)).expect("invalid rate parameter")
    }

    pub fn custom(rate: CustomRate) -> Self {
        Self {
            kind: RateKind::Custom(rate),
            factor: 1.0,
        }
    }

    pub fn kind(&self) -> &RateKind {
        &self.kind
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// `k · λ(t)`
    pub fn scaled(&self, k: f64) -> Self {
        assert!(
            k.is_finite() && k >= 0.0,
            "scale factor must be finite and >= 0"
        );
        Self {
            kind: self.kind.clone(),
            factor: self.factor * k,
        }
    }

    /// Value of λ when the rate is time-independent.
    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            RateKind::Constant(l) => Some(self.factor * l),
            _ => None,
        }
    }

    pub fn integrable_at_zero(&self) -> bool {
        match &self.kind {
            RateKind::Constant(_) | RateKind::IacusTanh(_) => true,
            RateKind::FoongVanKolck(_) | RateKind::GarraCoth(_) => self.factor == 0.0,
            RateKind::Custom(c) => c.integrable_at_zero || self.factor == 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let base = match &self.kind {
            RateKind::Constant(l) => *l,
            RateKind::FoongVanKolck(l) => l / t,
            RateKind::IacusTanh(l) => l * (l * t).tanh(),
            RateKind::GarraCoth(l) => l / (l * t).tanh(),
            RateKind::Custom(c) => (c.eval)(t),
        };
        self.factor * base
    }

    pub fn deriv1(&self, t: f64) -> f64 {
        let base = match &self.kind {
            RateKind::Constant(_) => 0.0,
            RateKind::FoongVanKolck(l) => -l / (t * t),
            RateKind::IacusTanh(l) => {
                let sech = 1.0 / (l * t).cosh();
                l * l * sech * sech
            }
            RateKind::GarraCoth(l) => {
                let csch = 1.0 / (l * t).sinh();
                -l * l * csch * csch
            }
            RateKind::Custom(c) => match &c.deriv1 {
                Some(d) => d(t),
                None => {
                    let h = fd_step(t);
                    ((c.eval)(t + h) - (c.eval)(t - h)) / (2.0 * h)
                }
            },
        };
        self.factor * base
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        let base = match &self.kind {
            RateKind::Constant(_) => 0.0,
            RateKind::FoongVanKolck(l) => 2.0 * l / (t * t * t),
            RateKind::IacusTanh(l) => {
                let x = l * t;
                let sech = 1.0 / x.cosh();
                -2.0 * l * l * l * sech * sech * x.tanh()
            }
            RateKind::GarraCoth(l) => {
                let x = l * t;
                let csch = 1.0 / x.sinh();
                2.0 * l * l * l * csch * csch / x.tanh()
            }
            RateKind::Custom(c) => match &c.deriv2 {
                Some(d) => d(t),
                None => {
                    // a second difference at the first-derivative step loses
                    // half the digits; the cube root of eps is the balanced step
                    let h = 1e-4 * t.abs().max(1.0);
                    ((c.eval)(t + h) - 2.0 * (c.eval)(t) + (c.eval)(t - h)) / (h * h)
                }
            },
        };
        self.factor * base
    }

    /// Λ(t) = ∫₀ᵗ λ(s) ds.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::domain(format!(
                "cumulative rate needs t >= 0, got {t}"
            )));
        }
        if t == 0.0 || self.factor == 0.0 {
            return Ok(0.0);
        }
        if !self.integrable_at_zero() {
            return Err(Error::DivergentIntegral(self.to_string()));
        }
        let base = match &self.kind {
            RateKind::Constant(l) => l * t,
            RateKind::IacusTanh(l) => ln_cosh(l * t),
            RateKind::Custom(c) => match &c.cumulative {
                Some(f) => f(t),
                None => integrate(|s| (c.eval)(s), 0.0, t, CUSTOM_QUAD_TOL / self.factor)?,
            },
            RateKind::FoongVanKolck(_) | RateKind::GarraCoth(_) => unreachable!(),
        };
        Ok(self.factor * base)
    }

    /// Λ(t), with +∞ for rates that diverge at the origin.
    pub fn cumulative_or_infinite(&self, t: f64) -> f64 {
        self.cumulative(t).unwrap_or(f64::INFINITY)
    }

    /// Smallest t with Λ(t) = level, by bracketing and bisection.
    pub fn invert_cumulative(&self, level: f64) -> Result<f64> {
        if !(level >= 0.0) {
            return Err(Error::domain(format!("level must be >= 0, got {level}")));
        }
        if level == 0.0 {
            return Ok(0.0);
        }
        if !self.integrable_at_zero() {
            return Err(Error::DivergentIntegral(self.to_string()));
        }
        let mut hi = 1.0;
        while self.cumulative(hi)? < level {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::NoRoot { level });
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cumulative(mid)? < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (tag, param) = match &self.kind {
            RateKind::Constant(l) => return write!(f, "const:{}", self.factor * l),
            RateKind::FoongVanKolck(l) => ("foong", *l),
            RateKind::IacusTanh(l) => ("tanh", *l),
            RateKind::GarraCoth(l) => ("coth", *l),
            RateKind::Custom(c) => {
                if self.factor != 1.0 {
                    write!(f, "{}*", self.factor)?;
                }
                return write!(f, "custom:{}", c.name);
            }
        };
        if self.factor != 1.0 {
            write!(f, "{}*", self.factor)?;
        }
        write!(f, "{tag}:{param}")
    }
}

impl FromStr for RateFunction {
    type Err = Error;

    /// `const:1.0`, `tanh:2`, `coth:1.5`, `foong:1`, optionally prefixed by a
    /// multiplier as in `0.5*tanh:2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "unrecognized rate `{s}` (expected e.g. const:1.0, tanh:2, coth:1.5, foong:1)"
            ))
        };
        let s = s.trim();
        let (factor, body) = match s.split_once('*') {
            Some((k, rest)) => (k.trim().parse::<f64>().map_err(|_| bad())?, rest.trim()),
            None => (1.0, s),
        };
        let (tag, param) = body.split_once(':').ok_or_else(bad)?;
        let l: f64 = param.trim().parse().map_err(|_| bad())?;
        let kind = match tag.trim().to_ascii_lowercase().as_str() {
            "const" | "constant" => RateKind::Constant(l),
            "tanh" => RateKind::IacusTanh(l),
            "coth" => RateKind::GarraCoth(l),
            "foong" => RateKind::FoongVanKolck(l),
            _ => return Err(bad()),
        };
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(bad());
        }
        Ok(Self::new(kind)?.scaled(factor))
    }
}

fn fd_step(t: f64) -> f64 {
    1e-6f64.max(1e-6 * t.abs())
}

/// ln cosh x without overflow and without cancellation near 0.
pub fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        let s = (0.5 * x).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
    }
}

pub fn cumulative_rate(rate: &RateFunction, t: f64) -> Result<f64> {
    rate.cumulative(t)
}

/// Event times of one realization on (0, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct EventTimes {
    pub horizon: f64,
    pub times: Vec<f64>,
}

impl EventTimes {
    pub fn count(&self) -> usize {
        self.times.len()
    }

    /// CSV rows `path_id,event_index,t` for a batch of realizations.
    pub fn write_csv<W: Write>(paths: &[EventTimes], mut w: W) -> io::Result<()> {
        writeln!(w, "path_id,event_index,t")?;
        for (id, p) in paths.iter().enumerate() {
            for (j, t) in p.times.iter().enumerate() {
                writeln!(w, "{id},{j},{t}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Method {
    /// Exponential gaps at the constant rate.
    Homogeneous(f64),
    /// Candidates at rate `majorant`, kept with probability λ(t)/majorant.
    Thinning { majorant: f64 },
    /// Unit-rate arrivals mapped through Λ⁻¹.
    Inversion { total: f64 },
}

/// Reusable event-time sampler for one rate on one horizon. Building it does
/// the majorant search once so that per-path sampling allocates nothing.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    rate: RateFunction,
    horizon: f64,
    method: Method,
}

impl PoissonSampler {
    pub fn new(rate: &RateFunction, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!(
                "horizon must be finite and >= 0, got {horizon}"
            )));
        }
        if !rate.integrable_at_zero() {
            return Err(Error::NonIntegrableRate(rate.to_string()));
        }
        let method = if let Some(l) = rate.as_constant() {
            Method::Homogeneous(l)
        } else if let RateKind::Custom(CustomRate {
            cumulative: Some(_),
            ..
        }) = rate.kind()
        {
            Method::Inversion {
                total: rate.cumulative(horizon)?,
            }
        } else {
            let mut sup = 0.0f64;
            for i in 0..=MAJORANT_POINTS {
                let t = horizon * i as f64 / MAJORANT_POINTS as f64;
                let v = rate.eval(t);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NoMajorant {
                        rate: rate.to_string(),
                        horizon,
                    });
                }
                sup = sup.max(v);
            }
            Method::Thinning {
                majorant: sup * MAJORANT_SAFETY,
            }
        };
        Ok(Self {
            rate: rate.clone(),
            horizon,
            method,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rate(&self) -> &RateFunction {
        &self.rate
    }

    /// Calls `on_event` for each event time in increasing order.
    pub fn for_each_event<R, F>(&self, rng: &mut R, mut on_event: F) -> Result<()>
    where
        R: Rng + ?Sized,
        F: FnMut(f64),
    {
        match self.method {
            Method::Homogeneous(l) => {
                if l <= 0.0 {
                    return Ok(());
                }
                let mut t = 0.0;
                loop {
                    let e: f64 = rng.sample(Exp1);
                    t += e / l;
                    if t > self.horizon {
                        return Ok(());
                    }
                    on_event(t);
                }
            }
            Method::Thinning { majorant } => {
                if majorant <= 0.0 {
                    return Ok(());
                }
                let mut t = 0.0;
                loop {
                    let e: f64 = rng.sample(Exp1);
                    t += e / majorant;
                    if t > self.horizon {
                        return Ok(());
                    }
                    let lam = self.rate.eval(t);
                    if lam > majorant || !lam.is_finite() {
                        return Err(Error::NoMajorant {
                            rate: self.rate.to_string(),
                            horizon: self.horizon,
                        });
                    }
                    let u: f64 = rng.random();
                    if u * majorant < lam {
                        on_event(t);
                    }
                }
            }
            Method::Inversion { total } => {
                let mut level = 0.0;
                let mut lo = 0.0;
                loop {
                    let e: f64 = rng.sample(Exp1);
                    level += e;
                    if level > total {
                        return Ok(());
                    }
                    let t = self.invert_from(lo, level)?;
                    on_event(t);
                    lo = t;
                }
            }
        }
    }

    fn invert_from(&self, mut lo: f64, level: f64) -> Result<f64> {
        let mut hi = self.horizon;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.rate.cumulative(mid)? < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EventTimes> {
        let mut times = Vec::new();
        self.for_each_event(rng, |t| times.push(t))?;
        Ok(EventTimes {
            horizon: self.horizon,
            times,
        })
    }

    /// Number of events on (0, horizon].
    pub fn count<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let mut n = 0;
        self.for_each_event(rng, |_| n += 1)?;
        Ok(n)
    }
}

pub fn sample_poisson<R: Rng + ?Sized>(
    rate: &RateFunction,
    horizon: f64,
    rng: &mut R,
) -> Result<EventTimes> {
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be > 0, got {horizon}")));
    }
    PoissonSampler::new(rate, horizon)?.sample(rng)
}
