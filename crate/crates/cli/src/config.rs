//! JSON scenario documents, `--set` overrides and time grids.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use abtime_core::simulator::{
    builtin_dgp1, builtin_dgp2, builtin_example2, Assignment, Sidedness, TestVariance,
};
use abtime_core::{
    EffectCurve, EmpiricalExposure, ExposureBoundary, ExposureDistribution, MeasurementStrategy,
    Scenario, TabulatedCurve, ZConvention,
};
use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Dgp1,
    Dgp2,
    Example2,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Dgp1 => "dgp1",
            Builtin::Dgp2 => "dgp2",
            Builtin::Example2 => "example2",
        }
    }

    pub fn scenario(self) -> Scenario {
        match self {
            Builtin::Dgp1 => builtin_dgp1(),
            Builtin::Dgp2 => builtin_dgp2(),
            Builtin::Example2 => builtin_example2(),
        }
    }
}

impl FromStr for Builtin {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_owned()))
            .map_err(|_| anyhow!("unknown scenario `{s}` (expected dgp1, dgp2 or example2)"))
    }
}

/// Every field is optional and overrides the chosen built-in (`dgp1` unless
/// `base` says otherwise).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub base: Option<Builtin>,
    pub n_users: Option<usize>,
    pub assignment: Option<AssignmentConfig>,
    pub exposure: Option<ExposureConfig>,
    pub curve: Option<CurveConfig>,
    pub noise_sigma: Option<f64>,
    pub horizon_days: Option<u32>,
    pub strategies: Option<Vec<StrategyConfig>>,
    pub alpha: Option<f64>,
    pub sidedness: Option<SidednessConfig>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub variance_mode: Option<VarianceModeConfig>,
    pub z_convention: Option<ConventionConfig>,
    pub exposure_boundary: Option<BoundaryConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssignmentConfig {
    Bernoulli { p: f64 },
    ExactSplit {},
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExposureConfig {
    Exponential { lambda: f64 },
    TwoPoint { times: [f64; 2], probs: [f64; 2] },
    PowerLaw { k: f64, horizon: f64 },
    Empirical { times: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveConfig {
    ExponentialDecay { a: f64, b: f64 },
    LinearTimesExp { a: f64, b: f64 },
    GammaPdf { shape: f64, rate: f64, scale: f64 },
    StepConstant { c: f64, t_end: f64 },
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
    Zero {},
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyConfig {
    Cumulative {},
    Windowed { nu: f64 },
    CumulativeWindowed { nu: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidednessConfig {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModeConfig {
    Known,
    Estimated,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionConfig {
    Sd,
    Variance,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Strict,
    Inclusive,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub grid: Option<Grid>,
}

/// Evenly spaced times `start, start+step, …` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        let finite = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !finite || self.step <= 0.0 || self.stop < self.start {
            bail!("grid needs finite start <= stop and step > 0, got {self:?}");
        }
        if (self.stop - self.start) / self.step > 1e7 {
            bail!("grid has more than 10^7 points");
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            bail!("grid must look like start:stop:step, got `{s}`");
        };
        let num = |p: &str| -> Result<f64> {
            p.trim()
                .parse()
                .with_context(|| format!("bad grid number `{p}`"))
        };
        let grid = Grid {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Parses `cumulative`, `windowed:NU` or `cumulative_windowed:NU`.
pub fn parse_strategy(s: &str) -> Result<MeasurementStrategy> {
    let (name, nu) = match s.split_once(':') {
        Some((name, nu)) => {
            let nu: f64 = nu.parse().with_context(|| format!("bad window in `{s}`"))?;
            (name, Some(nu))
        }
        None => (s, None),
    };
    let strategy = match (name, nu) {
        ("cumulative", None) => MeasurementStrategy::Cumulative,
        ("windowed", Some(nu)) => MeasurementStrategy::Windowed { nu },
        ("cumulative_windowed", Some(nu)) => MeasurementStrategy::CumulativeWindowed { nu },
        _ => bail!(
            "unknown strategy `{s}` (expected cumulative, windowed:NU or cumulative_windowed:NU)"
        ),
    };
    strategy.validate()?;
    Ok(strategy)
}

/// Short label used in CSV output, in the same syntax `parse_strategy` reads.
pub fn strategy_label(strategy: MeasurementStrategy) -> String {
    match strategy.window() {
        Some(nu) => format!("{}:{nu}", strategy.name()),
        None => strategy.name().to_owned(),
    }
}

/// Writes `value` at the dotted `path` inside `doc`, creating objects on the
/// way. The value is read as JSON when it parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` must look like key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("override key `{path}` has an empty segment");
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| anyhow!("cannot set `{path}`: `{key}` sits inside a non-object"))?;
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| anyhow!("cannot set `{path}`: parent is not an object"))?;
    map.insert(keys[keys.len() - 1].to_owned(), value);
    Ok(())
}

/// Reads the optional config file and applies overrides in order.
pub fn load_document(path: Option<&Path>, overrides: &[String]) -> Result<Value> {
    let mut doc = match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => Value::Object(Map::new()),
    };
    if !doc.is_object() {
        bail!("config must be a JSON object");
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    Ok(doc)
}

impl ScenarioConfig {
    pub fn from_document(doc: Value) -> Result<Self> {
        serde_json::from_value(doc).context("invalid scenario config")
    }

    /// The scenario this document describes, validated.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let mut s = self.base.unwrap_or(Builtin::Dgp1).scenario();
        if let Some(n) = self.n_users {
            s.n_users = n;
        }
        if let Some(a) = &self.assignment {
            s.assignment = match *a {
                AssignmentConfig::Bernoulli { p } => Assignment::Bernoulli { p },
                AssignmentConfig::ExactSplit {} => Assignment::ExactSplit,
            };
        }
        if let Some(e) = &self.exposure {
            s.exposure = e.build()?;
        }
        if let Some(c) = &self.curve {
            s.curve = c.build()?;
        }
        if let Some(v) = self.noise_sigma {
            s.noise_sigma = v;
        }
        if let Some(v) = self.horizon_days {
            s.horizon_days = v;
        }
        if let Some(list) = &self.strategies {
            if list.is_empty() {
                bail!("strategies must not be empty");
            }
            s.strategies = list.iter().map(|c| c.build()).collect();
        }
        if let Some(v) = self.alpha {
            s.alpha = v;
        }
        if let Some(v) = self.sidedness {
            s.sidedness = match v {
                SidednessConfig::One => Sidedness::One,
                SidednessConfig::Two => Sidedness::Two,
            };
        }
        if let Some(v) = self.replications {
            s.replications = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.variance_mode {
            s.variance_mode = match v {
                VarianceModeConfig::Known => TestVariance::Known,
                VarianceModeConfig::Estimated => TestVariance::Estimated,
            };
        }
        if let Some(v) = self.z_convention {
            s.z_convention = match v {
                ConventionConfig::Sd => ZConvention::DivideByStandardDeviation,
                ConventionConfig::Variance => ZConvention::DivideByVariance,
            };
        }
        if let Some(v) = self.exposure_boundary {
            s.exposure_boundary = match v {
                BoundaryConfig::Strict => ExposureBoundary::Strict,
                BoundaryConfig::Inclusive => ExposureBoundary::Inclusive,
            };
        }
        if let Some(grid) = self.output.as_ref().and_then(|o| o.grid) {
            grid.validate()?;
        }
        s.validate().context("invalid scenario")?;
        Ok(s)
    }
}

impl ExposureConfig {
    fn build(&self) -> Result<ExposureDistribution> {
        Ok(match self {
            ExposureConfig::Exponential { lambda } => {
                ExposureDistribution::Exponential { lambda: *lambda }
            }
            ExposureConfig::TwoPoint { times, probs } => ExposureDistribution::TwoPoint {
                times: *times,
                probs: *probs,
            },
            ExposureConfig::PowerLaw { k, horizon } => ExposureDistribution::PowerLawDensity {
                k: *k,
                horizon: *horizon,
            },
            ExposureConfig::Empirical { times } => {
                ExposureDistribution::Empirical(EmpiricalExposure::new(times.clone())?)
            }
        })
    }
}

impl CurveConfig {
    fn build(&self) -> Result<EffectCurve> {
        Ok(match self {
            CurveConfig::ExponentialDecay { a, b } => {
                EffectCurve::ExponentialDecay { a: *a, b: *b }
            }
            CurveConfig::LinearTimesExp { a, b } => EffectCurve::LinearTimesExp { a: *a, b: *b },
            CurveConfig::GammaPdf { shape, rate, scale } => EffectCurve::GammaPdfShape {
                shape: *shape,
                rate: *rate,
                scale: *scale,
            },
            CurveConfig::StepConstant { c, t_end } => EffectCurve::StepConstant {
                c: *c,
                t_end: *t_end,
            },
            CurveConfig::Tabulated { grid, values } => {
                EffectCurve::Tabulated(TabulatedCurve::new(grid.clone(), values.clone())?)
            }
            CurveConfig::Zero {} => EffectCurve::Zero,
        })
    }
}

impl StrategyConfig {
    fn build(&self) -> MeasurementStrategy {
        match *self {
            StrategyConfig::Cumulative {} => MeasurementStrategy::Cumulative,
            StrategyConfig::Windowed { nu } => MeasurementStrategy::Windowed { nu },
            StrategyConfig::CumulativeWindowed { nu } => {
                MeasurementStrategy::CumulativeWindowed { nu }
            }
        }
    }
}
