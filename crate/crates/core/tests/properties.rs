use orthomotion::harness::stats::{chi_square_two_sample, chi_square_vs_probabilities, ks_uniform};
use orthomotion::harness::streams::{histogram, path_rng};
use orthomotion::harness::{run_suite, SuiteConfig};
use orthomotion::planar::{
    boundary_integral, joint_density, singular_masses, MotionSpec, PlanarSampler, Region,
    SupportRegion, Variant,
};
use orthomotion::rates::{PoissonSampler, RateFunction};
use orthomotion::specfun::integrate;
use orthomotion::telegraph::telegraph_density_const;
use proptest::prelude::*;
use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Standard),
        Just(Variant::Reflecting),
        Just(Variant::Uniform),
        (0.05f64..1.0).prop_map(Variant::QStandard),
        (0.05f64..1.0).prop_map(Variant::QReflecting),
    ]
}

fn integrable_rate() -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        (0.1f64..3.0).prop_map(RateFunction::constant),
        (0.1f64..3.0).prop_map(RateFunction::tanh),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cumulative_matches_quadrature(rate in integrable_rate(), t in 0.01f64..10.0) {
        let numeric = integrate(|s| rate.eval(s), 0.0, t, 1e-12).unwrap();
        prop_assert!((rate.cumulative(t).unwrap() - numeric).abs() <= 1e-8);
    }

    #[test]
    fn inversion_round_trips(rate in integrable_rate(), t in 0.01f64..10.0) {
        let level = rate.cumulative(t).unwrap();
        let back = rate.invert_cumulative(level).unwrap();
        prop_assert!((back - t).abs() <= 1e-8 * t.max(1.0));
    }

    #[test]
    fn divergent_rates_have_infinite_cumulative(lambda in 0.1f64..3.0, t in 0.01f64..10.0) {
        for r in [RateFunction::coth(lambda), RateFunction::foong(lambda)] {
            prop_assert!(r.cumulative(t).is_err());
            prop_assert!(r.cumulative_or_infinite(t).is_infinite());
            let m = singular_masses(&MotionSpec::symmetric(Variant::Standard, 1.0, r).unwrap(), t);
            prop_assert_eq!(m.ac, 1.0);
        }
    }

    #[test]
    fn singular_masses_partition_unity(v in variant(), rate in integrable_rate(), t in 0.0f64..5.0) {
        let m = singular_masses(&MotionSpec::symmetric(v, 1.0, rate).unwrap(), t);
        prop_assert!((m.total() - 1.0).abs() < 1e-12);
        prop_assert!(m.vertex >= 0.0 && m.side_total >= 0.0 && m.diagonal_total >= 0.0 && m.ac >= -1e-15);
        if v.family() == orthomotion::planar::Family::Standard {
            prop_assert_eq!(m.diagonal_total, 0.0);
        }
    }

    #[test]
    fn telegraph_law_has_unit_mass(mu in 0.05f64..4.0, v in 0.2f64..3.0, t in 0.1f64..3.0) {
        let d = telegraph_density_const(mu, v, t).unwrap();
        prop_assert!((d.total_mass().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn side_integral_matches_mass(big_l in 0.05f64..4.0, c in 0.3f64..3.0) {
        for (variant, k) in [(Variant::Standard, 0.5), (Variant::Reflecting, 2.0 / 3.0)] {
            let spec = MotionSpec::symmetric(variant, c, RateFunction::constant(big_l)).unwrap();
            let side = boundary_integral(&spec, -c, c, 1.0).unwrap();
            prop_assert!((side - 0.5 * ((-k * big_l).exp() - (-big_l).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn joint_density_has_square_symmetries(x in -0.45f64..0.45, y in -0.45f64..0.45, lambda in 0.2f64..3.0) {
        prop_assume!(x != 0.0 && y != 0.0);
        for variant in [Variant::Standard, Variant::Reflecting] {
            let spec = MotionSpec::symmetric(variant, 1.0, RateFunction::constant(lambda)).unwrap();
            let p = joint_density(&spec, x, y, 1.0).unwrap();
            prop_assert!(p > 0.0);
            for q in [joint_density(&spec, -x, y, 1.0).unwrap(), joint_density(&spec, y, x, 1.0).unwrap()] {
                prop_assert!((p - q).abs() <= 1e-10 * p);
            }
        }
    }

    #[test]
    fn endpoints_stay_in_support(
        v in variant(),
        rate in integrable_rate(),
        cx in 0.2f64..3.0,
        cy in 0.2f64..3.0,
        t in 0.0f64..4.0,
        seed in any::<u64>(),
    ) {
        let spec = MotionSpec::new(v, cx, cy, rate).unwrap();
        let sampler = PlanarSampler::new(&spec, t).unwrap();
        let support = SupportRegion::new(&spec, t);
        for i in 0..20 {
            let e = sampler.endpoint(&mut path_rng(seed, i)).unwrap();
            let (x, y) = (e.state.x, e.state.y);
            prop_assert!(x.abs() / cx + y.abs() / cy <= t * (1.0 + 1e-12) + 1e-15);
            if let Region::Vertex(_) | Region::Side(_) = e.region {
                prop_assert!(matches!(support.classify(x, y), Some(Region::Vertex(_) | Region::Side(_))));
            }
            if e.region == Region::HorizontalDiagonal {
                prop_assert!(y.abs() <= 1e-12 * t.max(1.0));
            }
        }
    }

    #[test]
    fn two_sample_statistic_is_symmetric(a in prop::collection::vec(0u64..500, 12), b in prop::collection::vec(0u64..500, 12)) {
        prop_assume!(a.iter().sum::<u64>() > 0 && b.iter().sum::<u64>() > 0);
        let ab = chi_square_two_sample(&a, &b).unwrap();
        let ba = chi_square_two_sample(&b, &a).unwrap();
        prop_assert!((ab.statistic - ba.statistic).abs() <= 1e-9 * (1.0 + ab.statistic));
        prop_assert!(ab.statistic >= 0.0 && (0.0..=1.0).contains(&ab.p_value));
    }
}

/// Λ(event times) of a non-homogeneous process form a unit-rate process on
/// [0, Λ(T)]: the count is Poisson(Λ(T)) and, given the count, the
/// transformed times are uniform.
#[test]
fn time_rescaling_gives_unit_rate_process() {
    let rate = RateFunction::tanh(1.5);
    let horizon = 3.0;
    let big_l = rate.cumulative(horizon).unwrap();
    let sampler = PoissonSampler::new(&rate, horizon).unwrap();
    let n = 100_000;
    let max_k = 16;
    let counts = histogram(n, 17, max_k + 1, |rng| {
        Ok(Some(sampler.count(rng)?.min(max_k)))
    })
    .unwrap();
    let pois = Poisson::new(big_l).unwrap();
    let mut probs: Vec<f64> = (0..max_k as u64).map(|k| pois.pmf(k)).collect();
    probs.push(pois.sf(max_k as u64 - 1));
    let r = chi_square_vs_probabilities(&counts, &probs).unwrap();
    assert!(r.p_value > 0.001, "counts: {r:?}");

    let bins = 20;
    let uniform = orthomotion::harness::streams::fold_paths(
        n,
        18,
        || vec![0u64; bins],
        |h, rng| {
            for s in sampler.sample(rng)?.times {
                let u = rate.cumulative(s)? / big_l;
                h[((u * bins as f64) as usize).min(bins - 1)] += 1;
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )
    .unwrap();
    let r = chi_square_vs_probabilities(&uniform, &vec![1.0 / bins as f64; bins]).unwrap();
    assert!(r.p_value > 0.001, "rescaled times: {r:?}");
}

/// Two seeds of the same sampler: p-values over 200 repetitions are uniform.
#[test]
fn null_p_values_are_calibrated() {
    let spec =
        MotionSpec::symmetric(Variant::Reflecting, 1.0, RateFunction::constant(1.0)).unwrap();
    let sampler = PlanarSampler::new(&spec, 1.0).unwrap();
    let bins = 24;
    let class = |rng: &mut rand_chacha::ChaCha8Rng| {
        let e = sampler.endpoint(rng)?;
        Ok(Some(
            ((0.5 * (e.state.x + 1.0) * bins as f64) as usize).min(bins - 1),
        ))
    };
    let ps: Vec<f64> = (0..200u64)
        .map(|rep| {
            let a = histogram(4000, 2 * rep, bins, class).unwrap();
            let b = histogram(4000, 2 * rep + 1, bins, class).unwrap();
            chi_square_two_sample(&a, &b).unwrap().p_value
        })
        .collect();
    let d = ks_uniform(&ps);
    assert!(d < 0.12, "Kolmogorov distance {d}");
}

#[test]
fn suite_report_is_independent_of_thread_count() {
    let cfg = SuiteConfig {
        paths: 20_000,
        tests: Some(vec![
            "masses".into(),
            "telegraph-density".into(),
            "decomposition-standard".into(),
        ]),
        ..SuiteConfig::new(5, true)
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| serde_json::to_string(&run_suite(&cfg).unwrap()).unwrap())
    };
    assert_eq!(run(1), run(4));
}
