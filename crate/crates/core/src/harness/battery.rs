use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::binning::{LineBins, PlanarBins};
use super::stats::{chi_square_two_sample, chi_square_vs_probabilities, ChiSquare, MCEstimate};
use super::streams::{derive_seed, fold_paths, histogram};
use crate::pdecheck::{convergence_order, reference_case, reference_rate, PDEKind, Perturbed};
use crate::planar::{
    self, boundary_density_conditional, boundary_integral, conjectured_l1_probability,
    diagonal_integral, equilibrium_level, equilibrium_time, joint_density, l1_distance_cdf,
    l1_probability, marginal_singular, singular_masses, DecompositionSampler, Endpoint,
    MarginalSampler, MotionSpec, PlanarSampler, Region, Variant,
};
use crate::rates::RateFunction;
use crate::specfun::{bessel_i0, bessel_i1, integrate};
use crate::telegraph::{telegraph_density_const, TelegraphSampler, TelegraphSpec};
use crate::{Error, Result};

/// Significance level of every chi-square test.
pub const P_THRESHOLD: f64 = 0.001;
/// Bound on |z| for scalar-mass tests.
pub const Z_THRESHOLD: f64 = 3.0;
pub const FULL_PATHS: u64 = 1_000_000;
pub const QUICK_PATHS: u64 = 100_000;
pub const PDE_SPACINGS: [f64; 3] = [0.02, 0.01, 0.005];
pub const PDE_MIN_ORDER: f64 = 1.8;
pub const PDE_CONTROL_MAX_ORDER: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    ChiSquare,
    ZTest,
    Analytic,
    Pde,
    /// Generated for inspection; `pass` is not asserted.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub kind: TestKind,
    /// Chi-square statistic, max |z|, max absolute error or fitted order.
    pub statistic: f64,
    pub dof: Option<usize>,
    pub p_value: Option<f64>,
    pub z_score: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
    pub n: u64,
    pub bins: Option<usize>,
    pub details: BTreeMap<String, f64>,
}

impl TestReport {
    fn base(ctx: &Ctx, kind: TestKind, statistic: f64, threshold: f64, pass: bool) -> Self {
        Self {
            name: ctx.name.to_string(),
            kind,
            statistic,
            dof: None,
            p_value: None,
            z_score: None,
            threshold,
            pass,
            seed: ctx.seed,
            n: 0,
            bins: None,
            details: BTreeMap::new(),
        }
    }

    fn chi_square(ctx: &Ctx, r: ChiSquare, n: u64) -> Self {
        let mut t = Self::base(
            ctx,
            TestKind::ChiSquare,
            r.statistic,
            P_THRESHOLD,
            r.p_value > P_THRESHOLD,
        );
        t.dof = Some(r.dof);
        t.p_value = Some(r.p_value);
        t.n = n;
        t.bins = Some(r.bins);
        t
    }

    /// Several simultaneous z-tests; reports the largest |z|.
    fn z_tests(ctx: &Ctx, n: u64, items: &[(&str, MCEstimate, f64)]) -> Self {
        let mut worst = 0.0f64;
        let mut signed = 0.0;
        let mut details = BTreeMap::new();
        for (label, est, expected) in items {
            let z = est.z_score(*expected);
            if !(z.abs() <= worst) {
                worst = z.abs();
                signed = z;
            }
            details.insert(format!("{label}.estimate"), est.value);
            details.insert(format!("{label}.stderr"), est.stderr);
            details.insert(format!("{label}.expected"), *expected);
            details.insert(format!("{label}.z"), z);
        }
        let mut t = Self::base(
            ctx,
            TestKind::ZTest,
            worst,
            Z_THRESHOLD,
            worst < Z_THRESHOLD,
        );
        t.z_score = Some(signed);
        t.n = n;
        t.details = details;
        t
    }

    /// Largest absolute error against a tolerance.
    fn analytic(ctx: &Ctx, errors: &[(String, f64)], tol: f64) -> Self {
        let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        let pass = errors.iter().all(|e| e.1 <= tol);
        let mut t = Self::base(ctx, TestKind::Analytic, worst, tol, pass);
        t.details = errors.iter().cloned().collect();
        t
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Paths per Monte Carlo sample.
    pub paths: u64,
    pub quick: bool,
    /// Test names or group prefixes; `None` runs everything.
    pub tests: Option<Vec<String>>,
}

impl SuiteConfig {
    pub fn new(seed: u64, quick: bool) -> Self {
        Self {
            seed,
            paths: if quick { QUICK_PATHS } else { FULL_PATHS },
            quick,
            tests: None,
        }
    }
}

struct Ctx<'a> {
    name: &'a str,
    seed: u64,
    paths: u64,
}

impl Ctx<'_> {
    fn sub_seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }
}

type TestFn = fn(&Ctx) -> Result<TestReport>;

const TESTS: &[(&str, TestFn)] = &[
    ("masses-standard", masses_standard),
    ("masses-reflecting", masses_reflecting),
    ("decomposition-standard", |c| {
        decomposition(c, Variant::Standard)
    }),
    ("decomposition-reflecting", |c| {
        decomposition(c, Variant::Reflecting)
    }),
    ("joint-density-standard", joint_density_mc),
    ("joint-density-spot", joint_density_spot),
    ("boundary-integrals", boundary_integrals),
    ("boundary-standard-mc", |c| {
        side_law_mc(c, Variant::Standard)
    }),
    ("boundary-reflecting-mc", |c| {
        side_law_mc(c, Variant::Reflecting)
    }),
    ("diagonal-reflecting-mc", diagonal_law_mc),
    ("conditional-standard-n1", |c| {
        conditional_mc(c, Variant::Standard, 1)
    }),
    ("conditional-standard-n2", |c| {
        conditional_mc(c, Variant::Standard, 2)
    }),
    ("conditional-reflecting-n1", |c| {
        conditional_mc(c, Variant::Reflecting, 1)
    }),
    ("conditional-reflecting-n2", |c| {
        conditional_mc(c, Variant::Reflecting, 2)
    }),
    ("conditional-integrals", conditional_integrals),
    ("pde-telegraph2nd", |c| pde(c, PDEKind::Telegraph2nd)),
    ("pde-standard4th", |c| pde(c, PDEKind::Standard4th)),
    ("pde-boundary-side", |c| pde(c, PDEKind::BoundarySide)),
    ("pde-boundary-side-reflecting", |c| {
        pde(c, PDEKind::BoundarySideReflecting)
    }),
    ("pde-reflecting4th", |c| pde(c, PDEKind::Reflecting4th)),
    ("pde-marginal-standard3rd", |c| {
        pde(c, PDEKind::MarginalStandard3rd)
    }),
    ("pde-marginal-reflecting3rd", |c| {
        pde(c, PDEKind::MarginalReflecting3rd)
    }),
    ("pde-perturbed-control", pde_control),
    ("bessel-convolution", bessel_convolution),
    ("q-equivalence-standard", |c| {
        q_equivalence(c, Variant::QStandard(0.4), Variant::Standard)
    }),
    ("q-equivalence-reflecting", |c| {
        q_equivalence(c, Variant::QReflecting(0.4), Variant::Reflecting)
    }),
    ("q-equivalence-uniform", |c| {
        q_equivalence(c, Variant::Uniform, Variant::Reflecting)
    }),
    ("marginal-standard", |c| {
        marginal_vs_planar(c, Variant::Standard)
    }),
    ("marginal-reflecting", |c| {
        marginal_vs_planar(c, Variant::Reflecting)
    }),
    ("marginal-atoms-standard", |c| {
        marginal_atoms(c, Variant::Standard)
    }),
    ("marginal-atoms-reflecting", |c| {
        marginal_atoms(c, Variant::Reflecting)
    }),
    ("l1-distance-standard", l1_distance_mc),
    ("l1-distance-reflecting", l1_distance_reflecting),
    ("conjecture-endpoint", conjecture_endpoint),
    ("conjecture-interior", conjecture_interior),
    ("telegraph-density", telegraph_density_mc),
    ("equilibrium", equilibrium),
];

pub fn test_names() -> Vec<&'static str> {
    TESTS.iter().map(|t| t.0).collect()
}

/// Names selected by a list of names or group prefixes ("pde" selects every
/// "pde-…" test).
pub fn select_tests(selectors: &[String]) -> Result<Vec<&'static str>> {
    let mut out = Vec::new();
    for s in selectors {
        let hits: Vec<&'static str> = TESTS
            .iter()
            .map(|t| t.0)
            .filter(|n| {
                *n == s
                    || n.strip_prefix(s.as_str())
                        .is_some_and(|r| r.starts_with('-'))
            })
            .collect();
        if hits.is_empty() {
            return Err(Error::Config(format!("unknown test {s:?}")));
        }
        out.extend(hits);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Runs the selected tests concurrently; reports are sorted by name.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<TestReport>> {
    let names = match &config.tests {
        None => {
            let mut all = test_names();
            all.sort_unstable();
            all
        }
        Some(sel) => select_tests(sel)?,
    };
    let mut reports: Vec<TestReport> = names
        .par_iter()
        .map(|name| {
            let f = TESTS
                .iter()
                .find(|t| t.0 == *name)
                .expect("registered test")
                .1;
            let ctx = Ctx {
                name,
                seed: derive_seed(config.seed, name),
                paths: config.paths,
            };
            f(&ctx).map_err(|e| Error::Test {
                name: name.to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    reports.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMasses {
    pub vertex: MCEstimate,
    pub side: MCEstimate,
    pub diagonal: MCEstimate,
    pub interior: MCEstimate,
}

/// Monte Carlo frequencies of the vertex, side, diagonal and interior
/// classes at time t.
pub fn estimate_class_masses(spec: &MotionSpec, t: f64, n: u64, seed: u64) -> Result<ClassMasses> {
    if n < 10_000 {
        return Err(Error::Config(format!(
            "class masses need n >= 10000, got {n}"
        )));
    }
    let sampler = PlanarSampler::new(spec, t)?;
    let counts = histogram(n, seed, 4, |rng| {
        Ok(Some(match sampler.endpoint(rng)?.region {
            Region::Vertex(_) => 0,
            Region::Side(_) => 1,
            Region::HorizontalDiagonal | Region::VerticalDiagonal => 2,
            Region::Interior => 3,
        }))
    })?;
    let e = |k: usize| MCEstimate::from_count(counts[k], n, seed);
    Ok(ClassMasses {
        vertex: e(0)?,
        side: e(1)?,
        diagonal: e(2)?,
        interior: e(3)?,
    })
}

fn unit_spec(variant: Variant, lambda: f64) -> Result<MotionSpec> {
    MotionSpec::symmetric(variant, 1.0, RateFunction::constant(lambda))
}

fn masses(ctx: &Ctx, variant: Variant) -> Result<TestReport> {
    let spec = unit_spec(variant, 1.0)?;
    let m = estimate_class_masses(&spec, 1.0, ctx.paths, ctx.seed)?;
    let exact = singular_masses(&spec, 1.0);
    Ok(TestReport::z_tests(
        ctx,
        ctx.paths,
        &[
            ("vertex", m.vertex, exact.vertex),
            ("side", m.side, exact.side_total),
            ("diagonal", m.diagonal, exact.diagonal_total),
            ("interior", m.interior, exact.ac),
        ],
    ))
}

fn masses_standard(ctx: &Ctx) -> Result<TestReport> {
    masses(ctx, Variant::Standard)
}

fn masses_reflecting(ctx: &Ctx) -> Result<TestReport> {
    masses(ctx, Variant::Reflecting)
}

const PLANAR_BINS: usize = 25;

fn planar_histogram<F>(ctx: &Ctx, tag: &str, bins: &PlanarBins, endpoint: F) -> Result<Vec<u64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Endpoint> + Sync,
{
    histogram(ctx.paths, ctx.sub_seed(tag), bins.len(), |rng| {
        Ok(Some(bins.index(&endpoint(rng)?)))
    })
}

fn decomposition(ctx: &Ctx, variant: Variant) -> Result<TestReport> {
    let spec = unit_spec(variant, 1.0)?;
    let bins = PlanarBins::new(&spec, 1.0, PLANAR_BINS);
    let direct = PlanarSampler::new(&spec, 1.0)?;
    let rotated = DecompositionSampler::new(&spec, 1.0)?;
    let a = planar_histogram(ctx, "direct", &bins, |r| direct.endpoint(r))?;
    let b = planar_histogram(ctx, "decomposition", &bins, |r| rotated.endpoint(r))?;
    Ok(TestReport::chi_square(
        ctx,
        chi_square_two_sample(&a, &b)?,
        2 * ctx.paths,
    ))
}

fn joint_density_mc(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Standard, 1.0)?;
    let bins = PlanarBins::new(&spec, 1.0, PLANAR_BINS);
    let probs = bins.standard_probabilities(&spec)?;
    let sampler = PlanarSampler::new(&spec, 1.0)?;
    let counts = planar_histogram(ctx, "endpoints", &bins, |r| sampler.endpoint(r))?;
    Ok(TestReport::chi_square(
        ctx,
        chi_square_vs_probabilities(&counts, &probs)?,
        ctx.paths,
    ))
}

/// Value at the origin against ½ q², q = e^{−1/2}(I0(½) + I1(½))/2 being the
/// telegraph density at the centre for μ = v = ½, t = 1.
fn joint_density_spot(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Standard, 1.0)?;
    let value = joint_density(&spec, 0.0, 0.0, 1.0)?;
    let q = (-0.5f64).exp() * 0.5 * (bessel_i0(0.5) + bessel_i1(0.5));
    let oracle = 0.5 * q * q;
    Ok(
        TestReport::analytic(ctx, &[("origin".into(), (value - oracle).abs())], 1e-7)
            .detail("value", value)
            .detail("oracle", oracle),
    )
}

fn boundary_integrals(ctx: &Ctx) -> Result<TestReport> {
    let mut errors = Vec::new();
    for big_l in [0.5, 1.0, 2.0] {
        let std = unit_spec(Variant::Standard, big_l)?;
        let refl = unit_spec(Variant::Reflecting, big_l)?;
        let e = |a: f64| (-a).exp();
        let s = boundary_integral(&std, -1.0, 1.0, 1.0)?;
        let r = boundary_integral(&refl, -1.0, 1.0, 1.0)?;
        errors.push((
            format!("standard.L{big_l}"),
            (s - 0.5 * (e(big_l / 2.0) - e(big_l))).abs(),
        ));
        errors.push((
            format!("reflecting.L{big_l}"),
            (r - 0.5 * (e(2.0 * big_l / 3.0) - e(big_l))).abs(),
        ));
    }
    Ok(TestReport::analytic(ctx, &errors, 1e-8))
}

/// Rotates a point on side k onto side 0 and returns η = x − y there.
fn side_eta(k: u8, x: f64, y: f64) -> f64 {
    let (mut a, mut b) = (x, y);
    for _ in 0..k {
        (a, b) = (b, -a);
    }
    a - b
}

const LINE_BINS: usize = 40;

fn side_law_mc(ctx: &Ctx, variant: Variant) -> Result<TestReport> {
    let spec = unit_spec(variant, 1.0)?;
    let bins = LineBins::new(-1.0, 1.0, LINE_BINS, vec![]);
    let side_mass = boundary_integral(&spec, -1.0, 1.0, 1.0)?;
    let probs = bins.probabilities(
        |a, b| Ok(boundary_integral(&spec, a, b, 1.0)? / side_mass),
        &[],
    )?;
    let sampler = PlanarSampler::new(&spec, 1.0)?;
    let counts = histogram(ctx.paths, ctx.seed, bins.len(), |rng| {
        let e = sampler.endpoint(rng)?;
        Ok(match e.region {
            Region::Side(k) => bins.index(side_eta(k, e.state.x, e.state.y)),
            _ => None,
        })
    })?;
    let kept: u64 = counts.iter().sum();
    Ok(
        TestReport::chi_square(ctx, chi_square_vs_probabilities(&counts, &probs)?, kept)
            .detail("retained", kept as f64),
    )
}

fn diagonal_law_mc(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Reflecting, 1.0)?;
    let bins = LineBins::new(-1.0, 1.0, LINE_BINS, vec![]);
    let mass = diagonal_integral(&spec, -1.0, 1.0, 1.0)?;
    let probs = bins.probabilities(|a, b| Ok(diagonal_integral(&spec, a, b, 1.0)? / mass), &[])?;
    let sampler = PlanarSampler::new(&spec, 1.0)?;
    let counts = histogram(ctx.paths, ctx.seed, bins.len(), |rng| {
        let e = sampler.endpoint(rng)?;
        Ok(match e.region {
            Region::HorizontalDiagonal => bins.index(e.state.x),
            Region::VerticalDiagonal => bins.index(e.state.y),
            _ => None,
        })
    })?;
    let kept: u64 = counts.iter().sum();
    Ok(
        TestReport::chi_square(ctx, chi_square_vs_probabilities(&counts, &probs)?, kept)
            .detail("retained", kept as f64),
    )
}

/// Paths with exactly n events: η on the sides (all four rotated onto one)
/// against the conditional density, plus one class for the rest.
fn conditional_mc(ctx: &Ctx, variant: Variant, n: usize) -> Result<TestReport> {
    let spec = unit_spec(variant, 1.0)?;
    let bins = LineBins::new(-1.0, 1.0, LINE_BINS, vec![]);
    let dens = |eta: f64| boundary_density_conditional(&spec, n, eta, 1.0).unwrap_or(f64::NAN);
    let mut probs = Vec::with_capacity(LINE_BINS + 1);
    for i in 0..LINE_BINS {
        let (a, b) = bins.edges(i);
        probs.push(4.0 * integrate(dens, a, b, 1e-14)?);
    }
    probs.push((1.0 - probs.iter().sum::<f64>()).max(0.0));
    let sampler = PlanarSampler::new(&spec, 1.0)?;
    let counts = histogram(ctx.paths, ctx.seed, LINE_BINS + 1, |rng| {
        let e = sampler.endpoint(rng)?;
        if e.events != n {
            return Ok(None);
        }
        Ok(Some(match e.region {
            Region::Side(k) => bins
                .index(side_eta(k, e.state.x, e.state.y))
                .unwrap_or(LINE_BINS),
            _ => LINE_BINS,
        }))
    })?;
    let kept: u64 = counts.iter().sum();
    Ok(
        TestReport::chi_square(ctx, chi_square_vs_probabilities(&counts, &probs)?, kept)
            .detail("retained", kept as f64),
    )
}

fn conditional_integrals(ctx: &Ctx) -> Result<TestReport> {
    let mut errors = Vec::new();
    for (variant, label, per_switch) in [
        (Variant::Standard, "standard", 0.5f64),
        (Variant::Reflecting, "reflecting", 1.0 / 3.0),
    ] {
        let spec = unit_spec(variant, 1.0)?;
        for n in [1usize, 2] {
            let v = integrate(
                |eta| boundary_density_conditional(&spec, n, eta, 1.0).unwrap_or(f64::NAN),
                -1.0,
                1.0,
                1e-14,
            )?;
            errors.push((
                format!("{label}.n{n}"),
                (v - 0.5 * per_switch.powi(n as i32)).abs(),
            ));
        }
    }
    Ok(TestReport::analytic(ctx, &errors, 1e-10))
}

fn pde(ctx: &Ctx, kind: PDEKind) -> Result<TestReport> {
    let lambda = reference_rate(kind);
    let case = reference_case(kind, lambda, 1.0)?;
    let r = convergence_order(&case.form, case.field.as_ref(), &case.bx, &PDE_SPACINGS)?;
    let mut t = TestReport::base(
        ctx,
        TestKind::Pde,
        r.fitted_order,
        PDE_MIN_ORDER,
        r.fitted_order >= PDE_MIN_ORDER,
    );
    t.details.insert("lambda".into(), lambda);
    for (h, res) in r.h_list.iter().zip(&r.residuals) {
        t.details.insert(format!("residual.h{h}"), *res);
    }
    Ok(t)
}

/// Each reference field plus 0.01·x² must stop converging.
fn pde_control(ctx: &Ctx) -> Result<TestReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut details = BTreeMap::new();
    for kind in PDEKind::ALL {
        let case = reference_case(kind, reference_rate(kind), 1.0)?;
        let field = Perturbed {
            inner: case.field,
            eps: 0.01,
        };
        let order = match convergence_order(&case.form, &field, &case.bx, &PDE_SPACINGS) {
            Ok(r) => r.fitted_order,
            Err(Error::NonMonotone { fitted_order, .. }) => fitted_order,
            Err(e) => return Err(e),
        };
        details.insert(format!("{kind}.order"), order);
        worst = worst.max(order.abs());
    }
    let mut t = TestReport::base(
        ctx,
        TestKind::Pde,
        worst,
        PDE_CONTROL_MAX_ORDER,
        worst < PDE_CONTROL_MAX_ORDER,
    );
    t.details = details;
    Ok(t)
}

fn bessel_convolution(ctx: &Ctx) -> Result<TestReport> {
    let grid = [0.5, 1.0, 2.0];
    let mut errors = Vec::new();
    for &l in &grid {
        for &c in &grid {
            for &t in &grid {
                let ids = planar::bessel_convolution_identities(l, c, t)?;
                for (k, id) in ids.iter().enumerate() {
                    errors.push((format!("id{k}.l{l}.c{c}.t{t}"), (id.lhs - id.rhs).abs()));
                }
            }
        }
    }
    Ok(TestReport::analytic(ctx, &errors, 1e-8))
}

/// Thinned motion at rate 2 against the base motion at rate 2q.
fn q_equivalence(ctx: &Ctx, thinned: Variant, base: Variant) -> Result<TestReport> {
    let a_spec = unit_spec(thinned, 2.0)?;
    let b_spec = unit_spec(base, 2.0 * thinned.q())?;
    let bins = PlanarBins::new(&a_spec, 1.0, PLANAR_BINS);
    let a_s = PlanarSampler::new(&a_spec, 1.0)?;
    let b_s = PlanarSampler::new(&b_spec, 1.0)?;
    let a = planar_histogram(ctx, "thinned", &bins, |r| a_s.endpoint(r))?;
    let b = planar_histogram(ctx, "base", &bins, |r| b_s.endpoint(r))?;
    Ok(TestReport::chi_square(
        ctx,
        chi_square_two_sample(&a, &b)?,
        2 * ctx.paths,
    ))
}

fn marginal_bins() -> LineBins {
    LineBins::new(-1.0, 1.0, 2 * LINE_BINS, vec![-1.0, 0.0, 1.0])
}

fn marginal_vs_planar(ctx: &Ctx, variant: Variant) -> Result<TestReport> {
    let spec = unit_spec(variant, 1.0)?;
    let bins = marginal_bins();
    let m = MarginalSampler::new(&spec, 1.0)?;
    let p = PlanarSampler::new(&spec, 1.0)?;
    let idx = |x: f64| {
        bins.index(x)
            .ok_or_else(|| Error::domain(format!("x = {x} outside the support")))
    };
    let a = histogram(ctx.paths, ctx.sub_seed("marginal"), bins.len(), |r| {
        Ok(Some(idx(m.sample(r)?.position)?))
    })?;
    let b = histogram(ctx.paths, ctx.sub_seed("planar"), bins.len(), |r| {
        Ok(Some(idx(p.endpoint(r)?.state.x)?))
    })?;
    Ok(TestReport::chi_square(
        ctx,
        chi_square_two_sample(&a, &b)?,
        2 * ctx.paths,
    ))
}

fn marginal_atoms(ctx: &Ctx, variant: Variant) -> Result<TestReport> {
    let spec = unit_spec(variant, 1.0)?;
    let bins = marginal_bins();
    let m = MarginalSampler::new(&spec, 1.0)?;
    let counts = histogram(ctx.paths, ctx.seed, bins.len(), |r| {
        Ok(bins.index(m.sample(r)?.position))
    })?;
    let atoms = marginal_singular(&spec, 1.0);
    let k = bins.n;
    let est = |i: usize| MCEstimate::from_count(counts[i], ctx.paths, ctx.seed);
    Ok(TestReport::z_tests(
        ctx,
        ctx.paths,
        &[
            ("minus_ct", est(k)?, atoms.at_each_end),
            ("zero", est(k + 1)?, atoms.at_zero),
            ("plus_ct", est(k + 2)?, atoms.at_each_end),
        ],
    ))
}

fn l1_distance_mc(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Standard, 1.0)?;
    let bins = LineBins::new(0.0, 1.0, LINE_BINS, vec![]);
    let m = singular_masses(&spec, 1.0);
    let mut probs = bins.probabilities(
        |a, b| Ok(l1_distance_cdf(&spec, b, 1.0)? - l1_distance_cdf(&spec, a, 1.0)?),
        &[],
    )?;
    probs.push(m.border());
    let sampler = PlanarSampler::new(&spec, 1.0)?;
    let counts = histogram(ctx.paths, ctx.seed, bins.len() + 1, |rng| {
        let e = sampler.endpoint(rng)?;
        Ok(match e.region {
            Region::Vertex(_) | Region::Side(_) => Some(LINE_BINS),
            _ => bins.index(e.state.x.abs() + e.state.y.abs()),
        })
    })?;
    Ok(TestReport::chi_square(
        ctx,
        chi_square_vs_probabilities(&counts, &probs)?,
        ctx.paths,
    ))
}

fn conjecture_endpoint(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Reflecting, 1.0)?;
    let v = conjectured_l1_probability(&spec, 1.0, 1.0)?;
    let e = |a: f64| (-a).exp();
    let closed = 1.0 - 2.0 * e(2.0 / 3.0) + e(1.0);
    let m = singular_masses(&spec, 1.0);
    Ok(TestReport::analytic(
        ctx,
        &[
            ("closed_form".into(), (v - closed).abs()),
            ("off_border_mass".into(), (v - (1.0 - m.border())).abs()),
        ],
        1e-10,
    )
    .detail("value", v))
}

const L1_POINTS: [(&str, f64); 3] = [("u0.25", 0.25), ("u0.5", 0.5), ("u0.75", 0.75)];

/// Monte Carlo P{|X| + |Y| < u} of the reflecting motion at the points of
/// `L1_POINTS`.
fn reflecting_l1_estimates(ctx: &Ctx) -> Result<Vec<MCEstimate>> {
    let spec = unit_spec(Variant::Reflecting, 1.0)?;
    let sampler = PlanarSampler::new(&spec, 1.0)?;
    let k = L1_POINTS.len();
    let counts = histogram(ctx.paths, ctx.seed, k + 1, |rng| {
        let e = sampler.endpoint(rng)?;
        let z = e.state.x.abs() + e.state.y.abs();
        Ok(Some(
            L1_POINTS.iter().position(|&(_, u)| z < u).unwrap_or(k),
        ))
    })?;
    let mut below = 0;
    let mut out = Vec::with_capacity(k);
    for c in &counts[..k] {
        below += c;
        out.push(MCEstimate::from_count(below, ctx.paths, ctx.seed)?);
    }
    Ok(out)
}

/// Reflecting L1 law from the exact density against Monte Carlo.
fn l1_distance_reflecting(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Reflecting, 1.0)?;
    let est = reflecting_l1_estimates(ctx)?;
    let items = L1_POINTS
        .iter()
        .zip(est)
        .map(|(&(label, u), e)| Ok((label, e, l1_probability(&spec, u, 1.0)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestReport::z_tests(ctx, ctx.paths, &items))
}

/// The conjectured L1 law at interior u next to Monte Carlo and the exact
/// value; nothing is asserted.
fn conjecture_interior(ctx: &Ctx) -> Result<TestReport> {
    let spec = unit_spec(Variant::Reflecting, 1.0)?;
    let est = reflecting_l1_estimates(ctx)?;
    let items = L1_POINTS
        .iter()
        .zip(est)
        .map(|(&(label, u), e)| Ok((label, e, conjectured_l1_probability(&spec, u, 1.0)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut t = TestReport::z_tests(ctx, ctx.paths, &items);
    t.kind = TestKind::Report;
    for &(label, u) in &L1_POINTS {
        t.details
            .insert(format!("{label}.exact"), l1_probability(&spec, u, 1.0)?);
    }
    Ok(t)
}

fn telegraph_density_mc(ctx: &Ctx) -> Result<TestReport> {
    let spec = TelegraphSpec::new(1.0, RateFunction::constant(1.0))?;
    let d = telegraph_density_const(1.0, 1.0, 1.0)?;
    let bins = LineBins::new(-1.0, 1.0, LINE_BINS, vec![-1.0, 1.0]);
    let atom = d.atom_mass() / 2.0;
    let probs = bins.probabilities(|a, b| d.ac_integral(a, b, 1e-14), &[atom, atom])?;
    let sampler = TelegraphSampler::new(&spec, 1.0)?;
    let counts = histogram(ctx.paths, ctx.seed, bins.len(), |r| {
        Ok(bins.index(sampler.sample(r)?.position))
    })?;
    Ok(TestReport::chi_square(
        ctx,
        chi_square_vs_probabilities(&counts, &probs)?,
        ctx.paths,
    ))
}

/// t* where the continuous mass equals the border mass, for constant and
/// tanh rates.
fn equilibrium(ctx: &Ctx) -> Result<TestReport> {
    let level = equilibrium_level();
    let mut errors = vec![(
        "level".to_string(),
        (level + 2.0 * (1.0 - 0.5f64.sqrt()).ln()).abs(),
    )];
    for (label, rate) in [
        ("const", RateFunction::constant(1.0)),
        ("tanh", RateFunction::tanh(1.0)),
    ] {
        let spec = MotionSpec::symmetric(Variant::Standard, 1.0, rate)?;
        let t = equilibrium_time(&spec)?;
        let m = singular_masses(&spec, t);
        errors.push((format!("{label}.balance"), (m.ac - m.border()).abs()));
    }
    Ok(TestReport::analytic(ctx, &errors, 1e-10))
}

/// Draws one uniform per path; used to check stream plumbing.
pub fn uniform_mean(n: u64, seed: u64) -> Result<f64> {
    let s = fold_paths(
        n,
        seed,
        || 0.0f64,
        |acc, r| {
            *acc += r.random::<f64>();
            Ok(())
        },
        |a, b| *a += b,
    )?;
    Ok(s / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection() {
        let pde = select_tests(&["pde".into()]).unwrap();
        assert_eq!(pde.len(), 8);
        assert!(pde.iter().all(|n| n.starts_with("pde-")));
        assert_eq!(
            select_tests(&["equilibrium".into()]).unwrap(),
            vec!["equilibrium"]
        );
        assert!(matches!(
            select_tests(&["nope".into()]),
            Err(Error::Config(_))
        ));
        let cfg = SuiteConfig {
            tests: Some(vec![]),
            ..SuiteConfig::new(1, true)
        };
        assert!(run_suite(&cfg).unwrap().is_empty());
    }

    #[test]
    fn class_masses_partition() {
        let spec = unit_spec(Variant::Reflecting, 1.0).unwrap();
        assert!(matches!(
            estimate_class_masses(&spec, 1.0, 100, 4),
            Err(Error::Config(_))
        ));
        let m = estimate_class_masses(&spec, 1.0, 10_000, 4).unwrap();
        let total = m.vertex.value + m.side.value + m.diagonal.value + m.interior.value;
        assert!((total - 1.0).abs() < 1e-12);
        let m = estimate_class_masses(&spec, 0.0, 10_000, 4).unwrap();
        assert_eq!(m.vertex.value, 1.0);
    }

    #[test]
    fn side_rotation() {
        assert_eq!(side_eta(0, 0.75, 0.25), 0.5);
        assert_eq!(side_eta(1, -0.25, 0.75), 0.5);
        assert_eq!(side_eta(2, -0.75, -0.25), 0.5);
        assert_eq!(side_eta(3, 0.25, -0.75), 0.5);
    }

    #[test]
    fn analytic_tests_pass() {
        let cfg = SuiteConfig {
            tests: Some(vec![
                "boundary-integrals".into(),
                "conditional-integrals".into(),
                "conjecture-endpoint".into(),
                "equilibrium".into(),
            ]),
            ..SuiteConfig::new(1, true)
        };
        for r in run_suite(&cfg).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn plumbing() {
        assert!((uniform_mean(100_000, 5).unwrap() - 0.5).abs() < 0.005);
    }
}
