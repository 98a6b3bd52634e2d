use std::path::{Path, PathBuf};

use abtime_core::metrics::VarianceMode;
use abtime_core::power::{power_one_sided, power_two_sided};
use abtime_core::simulator::{replication_rng, Sidedness};
use abtime_core::{
    estimand, power_curve, simulate_panel, CountSchedule, EffectCurve, Error, ExposureDistribution,
    MeasurementStrategy, Scenario, UserPanel, ZConvention, ZOptions,
};
use anyhow::Result;

use crate::config::{strategy_label, Grid};
use crate::output::{flag, num, opt_num, write_csv};
use crate::panel_io;

pub const FAST: EffectCurve = EffectCurve::ExponentialDecay { a: 0.1, b: 0.1 };
pub const SLOW: EffectCurve = EffectCurve::LinearTimesExp { a: 0.04, b: 0.2 };

/// `Ok(None)` for results that are undefined at this time rather than wrong.
fn defined<T>(r: abtime_core::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(
            Error::UndefinedConditional { .. }
            | Error::InsufficientData { .. }
            | Error::DegenerateVariance,
        ) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn estimand_rows(
    curve: &EffectCurve,
    dist: &ExposureDistribution,
    strategies: &[MeasurementStrategy],
    times: &[f64],
    prefix: &[String],
) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for &strategy in strategies {
        for &t in times {
            let value = estimand(curve, dist, strategy, t)?;
            let mut row = vec![num(t)];
            row.extend_from_slice(prefix);
            row.extend([
                strategy.name().to_owned(),
                strategy.window().map(num).unwrap_or_default(),
                opt_num(value),
                flag(value.is_some()),
            ]);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn estimands(
    scenario: &Scenario,
    strategies: &[MeasurementStrategy],
    grid: Grid,
    out: &Path,
) -> Result<()> {
    let rows = estimand_rows(
        &scenario.curve,
        &scenario.exposure,
        strategies,
        &grid.points(),
        &[],
    )?;
    write_csv(out, &["t", "strategy", "nu", "value", "defined"], &rows)
}

fn expected_z_rows(
    scenario: &Scenario,
    strategy: MeasurementStrategy,
    times: &[f64],
    critical: f64,
) -> Result<Vec<Vec<String>>> {
    let model = scenario.analytic_model();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let z = defined(model.expected_z_for(strategy, t, CountSchedule::Expected))?;
        let power = z.map(|z| match scenario.sidedness {
            Sidedness::One => power_one_sided(z, critical),
            Sidedness::Two => power_two_sided(z, critical),
        });
        rows.push(vec![
            num(t),
            opt_num(z),
            opt_num(power),
            model.z_convention.name().to_owned(),
        ]);
    }
    Ok(rows)
}

pub fn expected_z(
    scenario: &Scenario,
    strategy: MeasurementStrategy,
    grid: Grid,
    critical: Option<f64>,
    out: &Path,
) -> Result<()> {
    let critical = critical.unwrap_or_else(|| scenario.critical_value());
    let rows = expected_z_rows(scenario, strategy, &grid.points(), critical)?;
    write_csv(out, &["t", "expected_z", "power", "convention"], &rows)
}

pub fn decompose(scenario: &Scenario, pairs: &[(f64, f64)], out: &Path) -> Result<()> {
    let model = scenario.analytic_model();
    let mut rows = Vec::with_capacity(pairs.len());
    for &(t, t_prime) in pairs {
        let d = model.decompose(t, t_prime, CountSchedule::Expected)?;
        rows.push(vec![
            num(t),
            num(t_prime),
            num(d.term_variance_reweight),
            num(d.term_new_time_old_users),
            num(d.term_new_users),
            num(d.total),
            num(d.direct),
            num(d.gap()),
        ]);
    }
    write_csv(
        out,
        &[
            "t", "t_prime", "term1", "term2", "term3", "total", "direct", "gap",
        ],
        &rows,
    )
}

fn power_rows(scenario: &Scenario) -> Result<Vec<Vec<String>>> {
    let result = power_curve(scenario)?;
    Ok(result
        .points
        .iter()
        .map(|p| {
            vec![
                p.day.to_string(),
                strategy_label(p.strategy),
                opt_num(p.rejection_rate()),
                opt_num(p.se()),
                flag(p.defined()),
            ]
        })
        .collect())
}

const SIMULATE_HEADER: [&str; 5] = ["day", "strategy", "rejection_rate", "se", "defined"];

pub fn simulate(scenario: &Scenario, out: &Path) -> Result<()> {
    write_csv(out, &SIMULATE_HEADER, &power_rows(scenario)?)
}

/// Writes the panel of replication 0.
pub fn panel(scenario: &Scenario, out: &Path) -> Result<()> {
    let mut rng = replication_rng(scenario.seed, 0);
    let panel = simulate_panel(scenario, &mut rng)?;
    panel_io::write_panel(out, &panel)
}

pub fn analyze(
    panel_path: &Path,
    strategies: &[MeasurementStrategy],
    grid: Grid,
    scenario: &Scenario,
    out: &Path,
) -> Result<()> {
    let panel: UserPanel = panel_io::read_panel(panel_path)?;
    let options = ZOptions {
        variance: VarianceMode::Estimated,
        convention: scenario.z_convention,
        boundary: scenario.exposure_boundary,
    };
    let mut rows = Vec::new();
    for &strategy in strategies {
        for t in grid.points() {
            let row = match defined(panel.z_statistic(strategy, t, &options))? {
                Some(z) => vec![
                    num(t),
                    strategy_label(strategy),
                    num(z.diff),
                    num(z.variance),
                    num(z.z),
                    z.n1.to_string(),
                    z.n0.to_string(),
                ],
                None => {
                    let (mut n1, mut n0) = (0usize, 0usize);
                    for (i, user) in panel.users().enumerate() {
                        let y = panel.measure_with(i, strategy, t, scenario.exposure_boundary)?;
                        if y.is_some() {
                            *if user.treated { &mut n1 } else { &mut n0 } += 1;
                        }
                    }
                    let mut row = vec![num(t), strategy_label(strategy)];
                    row.extend([String::new(), String::new(), String::new()]);
                    row.extend([n1.to_string(), n0.to_string()]);
                    row
                }
            };
            rows.push(row);
        }
    }
    write_csv(
        out,
        &["t", "strategy", "diff", "variance", "z", "n1", "n0"],
        &rows,
    )
}

/// Reference datasets `fig1_effects.csv` to `fig6_expected_z.csv`, written
/// into `dir`.
///
/// `seed` and `replications` apply to the two power curves.
pub fn figures(dir: &Path, seed: Option<u64>, replications: Option<usize>) -> Result<Vec<PathBuf>> {
    use abtime_core::simulator::{builtin_dgp1, builtin_dgp2, builtin_example2};

    let mut written = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let path = dir.join(name);
        write_csv(&path, header, &rows)?;
        written.push(path);
        Ok(())
    };
    let fine = Grid {
        start: 0.0,
        stop: 21.0,
        step: 0.1,
    }
    .points();

    let rows = fine
        .iter()
        .map(|&t| {
            Ok(vec![
                num(t),
                num(FAST.incremental(t)?),
                num(FAST.cumulative(t)?),
            ])
        })
        .collect::<abtime_core::Result<_>>()?;
    emit("fig1_effects.csv", &["t", "delta", "cumulative"], rows)?;

    let rows = fine
        .iter()
        .map(|&t| {
            Ok(vec![
                num(t),
                num(FAST.incremental(t)?),
                num(FAST.cumulative(t)?),
                num(SLOW.incremental(t)?),
                num(SLOW.cumulative(t)?),
            ])
        })
        .collect::<abtime_core::Result<_>>()?;
    emit(
        "fig2_curves.csv",
        &[
            "t",
            "fast_delta",
            "fast_cumulative",
            "slow_delta",
            "slow_cumulative",
        ],
        rows,
    )?;

    let strategies = [
        MeasurementStrategy::Cumulative,
        MeasurementStrategy::CumulativeWindowed { nu: 7.0 },
        MeasurementStrategy::Windowed { nu: 7.0 },
    ];
    let times = Grid {
        start: 0.25,
        stop: 21.0,
        step: 0.25,
    }
    .points();
    let mut rows = Vec::new();
    for (curve_name, curve) in [("fast", FAST), ("slow", SLOW)] {
        for lambda in [0.1, 0.4, 1.0] {
            let dist = ExposureDistribution::Exponential { lambda };
            let prefix = [curve_name.to_owned(), num(lambda)];
            rows.extend(estimand_rows(&curve, &dist, &strategies, &times, &prefix)?);
        }
    }
    emit(
        "fig3_estimands.csv",
        &["t", "curve", "lambda", "strategy", "nu", "value", "defined"],
        rows,
    )?;

    for (name, mut scenario) in [
        ("fig4_power_dgp1.csv", builtin_dgp1()),
        ("fig5_power_dgp2.csv", builtin_dgp2()),
    ] {
        if let Some(seed) = seed {
            scenario.seed = seed;
        }
        if let Some(reps) = replications {
            scenario.replications = reps;
        }
        emit(name, &SIMULATE_HEADER, power_rows(&scenario)?)?;
    }

    let example = builtin_example2();
    debug_assert_eq!(example.z_convention, ZConvention::DivideByVariance);
    let rows = expected_z_rows(
        &example,
        MeasurementStrategy::Cumulative,
        &Grid {
            start: 0.0,
            stop: 21.0,
            step: 0.1,
        }
        .points(),
        example.critical_value(),
    )?;
    emit(
        "fig6_expected_z.csv",
        &["t", "expected_z", "power", "convention"],
        rows,
    )?;
    Ok(written)
}
