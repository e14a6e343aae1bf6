//! Permutation repetitions and parameter sweeps.
//!
//! Each repetition scans the cloud in a fresh uniform permutation. The
//! permutation for repetition `r` comes from a Fisher-Yates shuffle driven by
//! ChaCha8 seeded with the base seed on stream `r`, so repetitions are
//! independent of each other and of the thread that runs them.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coloration::{aggregate_values, ColorSpec};
use crate::cover::{identity_order, CoverEngine};
use crate::error::{Error, Result};
use crate::geometry::{normalize_minmax, quantile_sorted, PointCloud};
use crate::metrics::{compute_metrics, GraphMetrics, METRIC_FIELDS};
use crate::synthetic::{attach_flag, CloudSpec};

/// The scan order used by repetition `rep` of a run seeded with `seed`.
pub fn permutation(n: usize, seed: u64, rep: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let mut order = identity_order(n);
    order.shuffle(&mut rng);
    order
}

/// Builds `reps` graphs of `cloud` at radius `epsilon`, one per permutation,
/// and measures each. Without a color spec every ball is colored 0.
pub fn run_repetitions(
    cloud: &PointCloud,
    epsilon: f64,
    color: Option<&ColorSpec>,
    reps: usize,
    seed: u64,
) -> Result<Vec<GraphMetrics>> {
    if reps == 0 {
        return Err(Error::InvalidParameter(
            "repetitions must be at least 1".into(),
        ));
    }
    let values = match color {
        Some(spec) => Some((spec.point_values(cloud)?, spec.function)),
        None => None,
    };
    let engine = CoverEngine::new(cloud);
    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let order = permutation(cloud.n_points(), seed, rep);
            let graph = engine.graph(epsilon, &order)?;
            let colors = match &values {
                Some((v, f)) => aggregate_values(&graph, v, *f),
                None => vec![0.0; graph.n_balls()],
            };
            compute_metrics(&graph, &colors)
        })
        .collect()
}

/// Mean, sample standard deviation and empirical 95% band of one quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    pub sd: f64,
    /// 2.5th percentile.
    pub ci_low: f64,
    /// 97.5th percentile.
    pub ci_high: f64,
}

impl SummaryStat {
    pub fn of(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "summary of no values");
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            sd,
            ci_low: quantile_sorted(&sorted, 0.025),
            ci_high: quantile_sorted(&sorted, 0.975),
        }
    }
}

/// Summary of all repetitions at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub repetitions: usize,
    /// Share of repetitions whose graph is a single ball.
    pub single_ball_fraction: f64,
    pub stats: BTreeMap<String, SummaryStat>,
}

impl SweepRow {
    pub fn stat(&self, field: &str) -> &SummaryStat {
        &self.stats[field]
    }
}

/// Summarizes a list of per-repetition metrics.
pub fn summarize(metrics: &[GraphMetrics]) -> Result<SweepRow> {
    summarize_at(f64::NAN, metrics)
}

fn summarize_at(value: f64, metrics: &[GraphMetrics]) -> Result<SweepRow> {
    if metrics.is_empty() {
        return Err(Error::InvalidParameter("nothing to summarize".into()));
    }
    let columns: Vec<[f64; 12]> = metrics.iter().map(GraphMetrics::values).collect();
    let stats = METRIC_FIELDS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let col: Vec<f64> = columns.iter().map(|c| c[i]).collect();
            (name.to_string(), SummaryStat::of(&col))
        })
        .collect();
    let single = metrics.iter().filter(|m| m.balls == 1).count();
    Ok(SweepRow {
        value,
        repetitions: metrics.len(),
        single_ball_fraction: single as f64 / metrics.len() as f64,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NPoints,
    NAxes,
    Epsilon,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::NPoints => "n_points",
            SweepParameter::NAxes => "n_axes",
            SweepParameter::Epsilon => "epsilon",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "n_points" | "points" => Ok(SweepParameter::NPoints),
            "n_axes" | "axes" => Ok(SweepParameter::NAxes),
            "epsilon" | "eps" => Ok(SweepParameter::Epsilon),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sweep parameter {s:?}"
            ))),
        }
    }
}

/// Threshold rule turning an axis into a binary flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRule {
    pub axis: String,
    pub threshold: f64,
    pub name: String,
}

/// A generated cloud, optionally flagged and normalized.
///
/// Flags are computed on raw coordinates, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCloud {
    pub spec: CloudSpec,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub flags: Vec<FlagRule>,
}

impl GeneratedCloud {
    pub fn build(&self) -> Result<PointCloud> {
        let mut cloud = self.spec.generate_with_outcome()?;
        for rule in &self.flags {
            let axis = cloud.axis_index(&rule.axis).ok_or_else(|| {
                Error::InvalidParameter(format!("flag axis {:?} not in cloud", rule.axis))
            })?;
            cloud = attach_flag(&cloud, axis, rule.threshold, &rule.name)?;
        }
        if self.normalize {
            cloud = normalize_minmax(&cloud).cloud;
        }
        Ok(cloud)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSource {
    Generator(GeneratedCloud),
    Fixed(PointCloud),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub source: CloudSource,
    /// Radius for point-count and axis-count sweeps.
    pub epsilon: Option<f64>,
    pub color: Option<ColorSpec>,
}

impl SweepSpec {
    pub const DEFAULT_REPETITIONS: usize = 10_000;

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("sweep has no values".into()));
        }
        if self
            .values
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidParameter(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter(
                "repetitions must be at least 1".into(),
            ));
        }
        match self.parameter {
            SweepParameter::Epsilon => {
                if let Some(&bad) = self.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidEpsilon(bad));
                }
            }
            SweepParameter::NPoints | SweepParameter::NAxes => {
                if !matches!(self.source, CloudSource::Generator(_)) {
                    return Err(Error::InvalidParameter(format!(
                        "a {} sweep needs a generator spec",
                        self.parameter.name()
                    )));
                }
                match self.epsilon {
                    Some(e) if e > 0.0 && e.is_finite() => {}
                    Some(e) => return Err(Error::InvalidEpsilon(e)),
                    None => {
                        return Err(Error::InvalidParameter(format!(
                            "a {} sweep needs a fixed epsilon",
                            self.parameter.name()
                        )))
                    }
                }
                if self.values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "{} values must be positive integers",
                        self.parameter.name()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

/// Runs every parameter value of `spec`.
///
/// Point-count and axis-count sweeps regenerate the cloud for each value from
/// the same generator seed; epsilon sweeps reuse one cloud.
pub fn sweep(spec: &SweepSpec) -> Result<SweepSummary> {
    spec.validate()?;
    let fixed = match (&spec.source, spec.parameter) {
        (CloudSource::Fixed(c), _) => Some(c.clone()),
        (CloudSource::Generator(g), SweepParameter::Epsilon) => Some(g.build()?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let (cloud, epsilon) = match (spec.parameter, &spec.source) {
            (SweepParameter::Epsilon, _) => (fixed.clone().expect("fixed cloud"), value),
            (SweepParameter::NPoints, CloudSource::Generator(g)) => {
                let mut g = g.clone();
                g.spec.n_points = value as usize;
                (g.build()?, spec.epsilon.expect("validated"))
            }
            (SweepParameter::NAxes, CloudSource::Generator(g)) => {
                let mut g = g.clone();
                g.spec.n_axes = value as usize;
                (g.build()?, spec.epsilon.expect("validated"))
            }
            _ => unreachable!("validated"),
        };
        log::info!(
            "sweep {}={value}: {} repetitions",
            spec.parameter.name(),
            spec.repetitions
        );
        let metrics = run_repetitions(
            &cloud,
            epsilon,
            spec.color.as_ref(),
            spec.repetitions,
            spec.base_seed,
        )?;
        rows.push(summarize_at(value, &metrics)?);
    }
    Ok(SweepSummary {
        parameter: spec.parameter,
        rows,
    })
}

/// Plot-ready series: one array per statistic, aligned with `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub single_ball_fraction: Vec<f64>,
    pub series: BTreeMap<String, SeriesStat>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesStat {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl SweepSummary {
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec![
            self.parameter.name().to_string(),
            "repetitions".into(),
            "single_ball_fraction".into(),
        ];
        for f in METRIC_FIELDS {
            for s in ["mean", "sd", "ci_low", "ci_high"] {
                h.push(format!("{f}_{s}"));
            }
        }
        h
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.csv_header().join(","))?;
        for row in &self.rows {
            let mut cells = vec![
                row.value.to_string(),
                row.repetitions.to_string(),
                row.single_ball_fraction.to_string(),
            ];
            for f in METRIC_FIELDS {
                let s = row.stat(f);
                cells.extend([s.mean, s.sd, s.ci_low, s.ci_high].map(|v| v.to_string()));
            }
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn plot_series(&self) -> PlotSeries {
        let mut series: BTreeMap<String, SeriesStat> = BTreeMap::new();
        for row in &self.rows {
            for (name, s) in &row.stats {
                let e = series.entry(name.clone()).or_default();
                e.mean.push(s.mean);
                e.sd.push(s.sd);
                e.ci_low.push(s.ci_low);
                e.ci_high.push(s.ci_high);
            }
        }
        PlotSeries {
            parameter: self.parameter,
            values: self.rows.iter().map(|r| r.value).collect(),
            single_ball_fraction: self.rows.iter().map(|r| r.single_ball_fraction).collect(),
            series,
        }
    }
}
