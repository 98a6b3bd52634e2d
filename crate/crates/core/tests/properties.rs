use abtime_core::estimands::group_time_weight;
use abtime_core::power::{power_one_sided, power_two_sided};
use abtime_core::{
    estimand, tau_cumulative, tau_cumulative_windowed, tau_windowed, AnalyticScenario,
    CountSchedule, EffectCurve, EmpiricalExposure, ExposureBoundary, ExposureDistribution,
    MeasurementStrategy, UserPanel, UserRecord, VarianceModel, ZConvention,
};
use proptest::prelude::*;

fn curve() -> impl Strategy<Value = EffectCurve> {
    prop_oneof![
        (0.0..2.0, 0.0..2.0).prop_map(|(a, b)| EffectCurve::ExponentialDecay { a, b }),
        (0.0..0.5, 0.05..1.0).prop_map(|(a, b)| EffectCurve::LinearTimesExp { a, b }),
        (1.0..40.0, 0.5..8.0, 0.0..2.0)
            .prop_map(|(shape, rate, scale)| EffectCurve::GammaPdfShape { shape, rate, scale }),
        (0.0..1.0, 0.5..14.0).prop_map(|(c, t_end)| EffectCurve::StepConstant { c, t_end }),
        Just(EffectCurve::Zero),
    ]
}

fn exposure() -> impl Strategy<Value = ExposureDistribution> {
    prop_oneof![
        (0.05..2.0).prop_map(|lambda| ExposureDistribution::Exponential { lambda }),
        (0.0..10.0, 0.0..10.0, 0.05..0.95).prop_map(|(a, b, p)| ExposureDistribution::TwoPoint {
            times: [a, b],
            probs: [p, 1.0 - p],
        }),
        (0.0..4.0, 5.0..25.0)
            .prop_map(|(k, horizon)| ExposureDistribution::PowerLawDensity { k, horizon }),
        prop::collection::vec(0.0..21.0, 1..12).prop_map(|times| {
            ExposureDistribution::Empirical(EmpiricalExposure::new(times).unwrap())
        }),
    ]
}

fn window() -> impl Strategy<Value = f64> {
    0.5..10.0
}

/// Random panels over `horizon` days with non-negative increments.
fn panel() -> impl Strategy<Value = UserPanel> {
    (2u32..12).prop_flat_map(|horizon| {
        let user = (
            any::<bool>(),
            0.0..=horizon as f64,
            prop::collection::vec(0.0..3.0, horizon as usize),
        );
        prop::collection::vec(user, 1..30).prop_map(move |users| {
            let records = users
                .into_iter()
                .enumerate()
                .map(|(i, (treated, exposure, increments))| UserRecord {
                    id: i as u64,
                    treated,
                    exposure,
                    increments,
                })
                .collect();
            UserPanel::new(horizon, records).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn cumulative_effect_is_monotone(c in curve(), t in 0.0..30.0f64, dt in 0.0..5.0f64) {
        prop_assert_eq!(c.cumulative(0.0).unwrap(), 0.0);
        let (a, b) = (c.cumulative(t).unwrap(), c.cumulative(t + dt).unwrap());
        prop_assert!(b >= a - 1e-12, "{} < {}", b, a);
    }

    #[test]
    fn cdf_is_monotone_and_bounded(d in exposure(), t in -1.0..30.0f64, dt in 0.0..5.0f64) {
        let (a, b) = (d.cdf(t), d.cdf(t + dt));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(b >= a);
    }

    #[test]
    fn integrating_one_gives_the_cdf(d in exposure(), t in 0.0..25.0f64) {
        let v = d.integrate_against(|_| 1.0, t).unwrap();
        prop_assert!((v - d.cdf(t)).abs() <= 1e-7, "{} vs {}", v, d.cdf(t));
    }

    #[test]
    fn windowed_estimand_ignores_time_and_exposure(
        c in curve(), d in exposure(), nu in window(), extra in 0.0..15.0f64,
    ) {
        let reference = tau_windowed(&c, nu).unwrap();
        let t = nu + extra;
        if let Some(v) = estimand(&c, &d, MeasurementStrategy::Windowed { nu }, t).unwrap() {
            prop_assert_eq!(v.to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn capped_equals_uncapped_within_the_window(
        c in curve(), d in exposure(), nu in window(), frac in 0.01..1.0f64,
    ) {
        let t = nu * frac;
        prop_assume!(d.cdf(t) > 0.0);
        let cw = tau_cumulative_windowed(&c, &d, nu, t).unwrap();
        let cum = tau_cumulative(&c, &d, t).unwrap();
        prop_assert!((cw - cum).abs() <= 1e-9 * (1.0 + cum.abs()), "{} vs {}", cw, cum);
    }

    #[test]
    fn estimands_are_ordered_for_non_negative_effects(
        c in curve(), d in exposure(), nu in window(), t in 0.1..25.0f64,
    ) {
        prop_assume!(d.cdf(t) > 0.0);
        let cum = tau_cumulative(&c, &d, t).unwrap();
        let cw = tau_cumulative_windowed(&c, &d, nu, t).unwrap();
        let w = tau_windowed(&c, nu).unwrap();
        let slack = 1e-9 * (1.0 + cum.abs());
        prop_assert!(cw >= -slack);
        prop_assert!(cw <= cum + slack, "cw {} cum {}", cw, cum);
        prop_assert!(cw <= w + slack, "cw {} w {}", cw, w);
    }

    #[test]
    fn group_time_weights_sum_to_one(times in prop::collection::vec(0.0..21.0f64, 1..15), t in 0.0..21.0f64) {
        let d = ExposureDistribution::Empirical(EmpiricalExposure::new(times).unwrap());
        prop_assume!(d.cdf(t) > 0.0);
        let sum: f64 = d
            .atoms()
            .iter()
            .filter(|&&(e, _)| e <= t)
            .map(|&(e, _)| group_time_weight(&d, e, t, t).unwrap())
            .sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn power_rises_with_expected_z(z in -5.0..5.0f64, dz in 0.0..3.0f64, crit in 0.5..3.0f64) {
        prop_assert!(power_one_sided(z + dz, crit) >= power_one_sided(z, crit));
        if z >= 0.0 {
            prop_assert!(power_two_sided(z + dz, crit) >= power_two_sided(z, crit));
        }
    }

    #[test]
    fn decomposition_closes(
        c in curve(), lambda in 0.1..1.5f64, t in 1.0..15.0f64, dt in 0.5..6.0f64,
    ) {
        let model = AnalyticScenario {
            curve: c,
            dist: ExposureDistribution::Exponential { lambda },
            variance: VarianceModel::LinearGrowth { sigma2: 1.0 },
            n1: 1_000,
            n0: 1_000,
            z_convention: ZConvention::DivideByStandardDeviation,
        };
        let d = model.decompose(t, t + dt, CountSchedule::Expected).unwrap();
        prop_assert!(d.gap().abs() <= 1e-8, "gap {}", d.gap());
    }

    #[test]
    fn availability_is_monotone(p in panel(), nu in window(), f in 0.0..1.0f64, g in 0.0..1.0f64) {
        let horizon = p.horizon() as f64;
        let (t1, t2) = (horizon * f.min(g), horizon * f.max(g));
        for strategy in [
            MeasurementStrategy::Cumulative,
            MeasurementStrategy::Windowed { nu },
            MeasurementStrategy::CumulativeWindowed { nu },
        ] {
            for i in 0..p.len() {
                if p.measure(i, strategy, t1).unwrap().is_some() {
                    prop_assert!(p.measure(i, strategy, t2).unwrap().is_some());
                }
            }
        }
    }

    #[test]
    fn strategies_agree_where_they_should(p in panel(), nu in window(), f in 0.0..=1.0f64) {
        let t = p.horizon() as f64 * f;
        for i in 0..p.len() {
            let e = p.user(i).exposure;
            let cw = p.measure(i, MeasurementStrategy::CumulativeWindowed { nu }, t).unwrap();
            if e + nu <= t {
                let w = p.measure(i, MeasurementStrategy::Windowed { nu }, t).unwrap();
                prop_assert_eq!(cw, w);
            } else {
                let cum = p.measure(i, MeasurementStrategy::Cumulative, t).unwrap();
                prop_assert_eq!(cw, cum);
            }
        }
    }

    #[test]
    fn measurements_grow_with_time(p in panel(), nu in window(), f in 0.0..1.0f64, g in 0.0..1.0f64) {
        let horizon = p.horizon() as f64;
        let (t1, t2) = (horizon * f.min(g), horizon * f.max(g));
        for strategy in [MeasurementStrategy::Cumulative, MeasurementStrategy::CumulativeWindowed { nu }] {
            for i in 0..p.len() {
                if let Some(a) = p.measure(i, strategy, t1).unwrap() {
                    let b = p.measure(i, strategy, t2).unwrap().unwrap();
                    prop_assert!(b >= a - 1e-12, "{} < {}", b, a);
                }
            }
        }
    }

    #[test]
    fn group_counts_match_exposed_users(p in panel(), f in 0.0..=1.0f64) {
        let t = p.horizon() as f64 * f;
        let exposed = p.users().filter(|u| u.exposure < t).count();
        let inclusive = p.users().filter(|u| u.exposure <= t).count();
        match p.group_means(MeasurementStrategy::Cumulative, t) {
            Ok(m) => prop_assert_eq!(m.n1 + m.n0, exposed),
            Err(_) => {
                let groups = p.users().filter(|u| u.exposure < t).map(|u| u.treated);
                let (mut has1, mut has0) = (false, false);
                for g in groups {
                    if g { has1 = true } else { has0 = true }
                }
                prop_assert!(!(has1 && has0));
            }
        }
        if let Ok(m) = p.group_means_with(MeasurementStrategy::Cumulative, t, ExposureBoundary::Inclusive) {
            prop_assert_eq!(m.n1 + m.n0, inclusive);
        }
    }
}
