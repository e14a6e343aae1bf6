//! Per-ball aggregation of point values and the display color scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cover::BMGraph;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// How member values are reduced to one number per ball.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorFunction {
    #[default]
    Mean,
    /// Fraction of members whose flag is 1.
    Proportion,
    /// Population standard deviation.
    StdDev,
    Min,
    Max,
    Range,
}

impl ColorFunction {
    pub const ALL: [ColorFunction; 6] = [
        ColorFunction::Mean,
        ColorFunction::Proportion,
        ColorFunction::StdDev,
        ColorFunction::Min,
        ColorFunction::Max,
        ColorFunction::Range,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ColorFunction::Mean => "mean",
            ColorFunction::Proportion => "proportion",
            ColorFunction::StdDev => "stddev",
            ColorFunction::Min => "min",
            ColorFunction::Max => "max",
            ColorFunction::Range => "range",
        }
    }

    fn apply(&self, values: impl Iterator<Item = f64> + Clone) -> f64 {
        match self {
            ColorFunction::Mean | ColorFunction::Proportion => mean(values),
            ColorFunction::StdDev => population_sd(values),
            ColorFunction::Min => values.fold(f64::INFINITY, f64::min),
            ColorFunction::Max => values.fold(f64::NEG_INFINITY, f64::max),
            ColorFunction::Range => {
                let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
                hi - lo
            }
        }
    }
}

impl fmt::Display for ColorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ColorFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ColorFunction::ALL
            .into_iter()
            .find(|c| {
                c.name().eq_ignore_ascii_case(s) || (s == "sd" && *c == ColorFunction::StdDev)
            })
            .ok_or_else(|| Error::InvalidParameter(format!("unknown color function {s:?}")))
    }
}

/// Which per-point value is aggregated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "name")]
pub enum ColorSource {
    #[default]
    Outcome,
    Axis(String),
    Flag(String),
}

impl fmt::Display for ColorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColorSource::Outcome => f.write_str("outcome"),
            ColorSource::Axis(a) => write!(f, "axis:{a}"),
            ColorSource::Flag(n) => write!(f, "flag:{n}"),
        }
    }
}

impl FromStr for ColorSource {
    type Err = Error;

    /// Accepts `outcome`, `axis:NAME` or `flag:NAME`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "outcome" => Ok(ColorSource::Outcome),
            Some(("axis", name)) if !name.is_empty() => Ok(ColorSource::Axis(name.to_string())),
            Some(("flag", name)) if !name.is_empty() => Ok(ColorSource::Flag(name.to_string())),
            _ => Err(Error::InvalidParameter(format!(
                "color source {s:?} is not outcome, axis:NAME or flag:NAME"
            ))),
        }
    }
}

/// A complete coloration: what to aggregate and how.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorSpec {
    pub function: ColorFunction,
    pub source: ColorSource,
}

impl ColorSpec {
    pub fn new(function: ColorFunction, source: ColorSource) -> Self {
        Self { function, source }
    }

    pub fn mean_outcome() -> Self {
        Self::default()
    }

    pub fn proportion(flag: impl Into<String>) -> Self {
        Self::new(ColorFunction::Proportion, ColorSource::Flag(flag.into()))
    }

    /// Per-point values this spec reads from `cloud`.
    pub fn point_values(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        if self.function == ColorFunction::Proportion
            && !matches!(self.source, ColorSource::Flag(_))
        {
            return Err(Error::MissingColorSource(
                "a binary flag for proportion coloration".into(),
            ));
        }
        match &self.source {
            ColorSource::Outcome => cloud
                .outcome()
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::MissingColorSource("an outcome vector".into())),
            ColorSource::Axis(name) => cloud
                .axis_index(name)
                .map(|k| cloud.column(k))
                .ok_or_else(|| Error::MissingColorSource(format!("axis {name:?}"))),
            ColorSource::Flag(name) => cloud
                .flag(name)
                .map(|f| f.iter().map(|&b| f64::from(b)).collect())
                .ok_or_else(|| Error::MissingColorSource(format!("binary flag {name:?}"))),
        }
    }
}

impl fmt::Display for ColorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.function, self.source)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn population_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = mean(values.clone());
    let (ss, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - m) * (v - m), n + 1));
    (ss / n as f64).sqrt()
}

/// One aggregated value per ball, in ball order.
pub fn aggregate(graph: &BMGraph, cloud: &PointCloud, spec: &ColorSpec) -> Result<Vec<f64>> {
    let values = spec.point_values(cloud)?;
    Ok(aggregate_values(graph, &values, spec.function))
}

/// [`aggregate`] over an explicit per-point value vector.
pub fn aggregate_values(graph: &BMGraph, values: &[f64], function: ColorFunction) -> Vec<f64> {
    graph
        .balls()
        .iter()
        .map(|b| function.apply(b.members.iter().map(|&m| values[m])))
        .collect()
}

/// Mean and spread of a source within one ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpread {
    pub mean: f64,
    pub sd: f64,
    /// `|mean| / sd`; absent when `sd` is 0. Large values mean the ball's
    /// average represents its members well.
    pub mean_to_sd: Option<f64>,
}

/// Mean-versus-spread check for every ball.
pub fn ball_spreads(graph: &BMGraph, values: &[f64]) -> Vec<BallSpread> {
    graph
        .balls()
        .iter()
        .map(|b| {
            let it = b.members.iter().map(|&m| values[m]);
            let mean = mean(it.clone());
            let sd = population_sd(it);
            BallSpread {
                mean,
                sd,
                mean_to_sd: (sd > 0.0).then(|| mean.abs() / sd),
            }
        })
        .collect()
}

/// Gradient anchors, lowest value first: red, orange, yellow, green, blue,
/// purple.
pub const GRADIENT_STOPS: [[u8; 3]; 6] = [
    [0xe6, 0x19, 0x4b],
    [0xf5, 0x82, 0x31],
    [0xff, 0xe1, 0x19],
    [0x3c, 0xb4, 0x4b],
    [0x43, 0x63, 0xd8],
    [0x91, 0x1e, 0xb4],
];

/// Affine map from the value domain onto the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorScale {
    pub low: f64,
    pub high: f64,
}

impl ColorScale {
    pub fn from_values(values: &[f64]) -> Self {
        let (low, high) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Self { low, high }
    }

    /// Position on the gradient in `[0, 1]`; 0.5 when the domain is a point.
    pub fn position(&self, value: f64) -> f64 {
        let span = self.high - self.low;
        if span > 0.0 {
            ((value - self.low) / span).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    pub fn rgb(&self, value: f64) -> [u8; 3] {
        gradient_rgb(self.position(value))
    }

    pub fn hex(&self, value: f64) -> String {
        let [r, g, b] = self.rgb(value);
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

/// Color at gradient position `t` in `[0, 1]`.
pub fn gradient_rgb(t: f64) -> [u8; 3] {
    let segments = (GRADIENT_STOPS.len() - 1) as f64;
    let x = t.clamp(0.0, 1.0) * segments;
    let i = (x.floor() as usize).min(GRADIENT_STOPS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (GRADIENT_STOPS[i], GRADIENT_STOPS[i + 1]);
    let mix = |k: usize| (f64::from(a[k]) + f * (f64::from(b[k]) - f64::from(a[k]))).round() as u8;
    [mix(0), mix(1), mix(2)]
}

/// Builds the scale for `values` and the hex color of each.
pub fn color_scale(values: &[f64]) -> (ColorScale, Vec<String>) {
    let scale = ColorScale::from_values(values);
    let hex = values.iter().map(|&v| scale.hex(v)).collect();
    (scale, hex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{build_cover, build_edges, identity_order};
    use approx::assert_abs_diff_eq;

    fn graph_of(values: &[f64], eps: f64) -> BMGraph {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let c = PointCloud::from_rows(&rows).unwrap();
        build_edges(build_cover(&c, eps, &identity_order(values.len())).unwrap())
    }

    #[test]
    fn mean_of_constant_outcome() {
        let g = graph_of(&[0.0, 0.1, 0.2], 1.0);
        assert_eq!(
            aggregate_values(&g, &[1.0, 1.0, 1.0], ColorFunction::Mean),
            vec![1.0]
        );
    }

    #[test]
    fn proportion_of_two_member_ball() {
        let rows = vec![vec![0.0, 1.0], vec![0.0, -1.0]];
        let c = PointCloud::from_rows(&rows)
            .unwrap()
            .with_flag("x2_pos", vec![1, 0])
            .unwrap();
        let g = build_edges(build_cover(&c, 2.0, &[0, 1]).unwrap());
        let v = aggregate(&g, &c, &ColorSpec::proportion("x2_pos")).unwrap();
        assert_eq!(v, vec![0.5]);
    }

    #[test]
    fn stddev_is_population_form() {
        let g = graph_of(&[0.0, 0.1], 1.0);
        // two members whose outcomes differ by 0.554: population sd is half
        // the gap, the sample form would be 0.392
        let sd = aggregate_values(&g, &[1.0, 1.554], ColorFunction::StdDev);
        assert_abs_diff_eq!(sd[0], 0.277, epsilon = 1e-12);

        let single = graph_of(&[5.0], 1.0);
        assert_eq!(
            aggregate_values(&single, &[3.3], ColorFunction::StdDev),
            vec![0.0]
        );
    }

    #[test]
    fn min_max_range() {
        let g = graph_of(&[0.0, 0.5, 1.0], 1.0);
        let y = [3.0, -1.0, 2.0];
        assert_eq!(aggregate_values(&g, &y, ColorFunction::Min), vec![-1.0]);
        assert_eq!(aggregate_values(&g, &y, ColorFunction::Max), vec![3.0]);
        assert_eq!(aggregate_values(&g, &y, ColorFunction::Range), vec![4.0]);
    }

    #[test]
    fn missing_sources_are_named() {
        let g = graph_of(&[0.0], 1.0);
        let c = PointCloud::from_rows(&[vec![0.0]]).unwrap();
        let err = aggregate(&g, &c, &ColorSpec::mean_outcome()).unwrap_err();
        assert!(err.to_string().contains("outcome"));
        let err = aggregate(&g, &c, &ColorSpec::proportion("fail")).unwrap_err();
        assert!(err.to_string().contains("fail"));
        let bad = ColorSpec::new(ColorFunction::Proportion, ColorSource::Outcome);
        assert!(aggregate(&g, &c, &bad)
            .unwrap_err()
            .to_string()
            .contains("binary flag"));
        let axis = ColorSpec::new(ColorFunction::Mean, ColorSource::Axis("X1".into()));
        assert_eq!(aggregate(&g, &c, &axis).unwrap(), vec![0.0]);
    }

    #[test]
    fn parse_specs() {
        assert_eq!(
            "stddev".parse::<ColorFunction>().unwrap(),
            ColorFunction::StdDev
        );
        assert_eq!(
            "sd".parse::<ColorFunction>().unwrap(),
            ColorFunction::StdDev
        );
        assert!("median".parse::<ColorFunction>().is_err());
        assert_eq!(
            "outcome".parse::<ColorSource>().unwrap(),
            ColorSource::Outcome
        );
        assert_eq!(
            "axis:X3".parse::<ColorSource>().unwrap(),
            ColorSource::Axis("X3".into())
        );
        assert_eq!(
            "flag:fail".parse::<ColorSource>().unwrap(),
            ColorSource::Flag("fail".into())
        );
        assert!("flag:".parse::<ColorSource>().is_err());
        let src = ColorSource::Flag("up".into());
        assert_eq!(src.to_string().parse::<ColorSource>().unwrap(), src);
    }

    #[test]
    fn scale_endpoints_and_midpoint() {
        let (scale, hex) = color_scale(&[0.0, 1.0]);
        assert_eq!(scale.position(0.0), 0.0);
        assert_eq!(scale.position(1.0), 1.0);
        assert_eq!(hex[0], "#e6194b");
        assert_eq!(hex[1], "#911eb4");

        let (scale, hex) = color_scale(&[5.0, 5.0, 5.0]);
        assert_eq!(scale.position(5.0), 0.5);
        assert!(hex.iter().all(|h| h == &hex[0]));
        assert_eq!(
            hex[0],
            format!(
                "#{:02x}{:02x}{:02x}",
                gradient_rgb(0.5)[0],
                gradient_rgb(0.5)[1],
                gradient_rgb(0.5)[2]
            )
        );

        let (scale, _) = color_scale(&[0.0, 0.5, 1.0]);
        assert_eq!(scale.position(0.5), 0.5);
    }

    #[test]
    fn scale_is_monotone() {
        let scale = ColorScale {
            low: -3.0,
            high: 7.0,
        };
        let mut last = -1.0;
        for i in 0..=100 {
            let p = scale.position(-3.0 + 0.1 * f64::from(i));
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn spreads() {
        let g = graph_of(&[0.0, 0.1], 1.0);
        let s = ball_spreads(&g, &[4.0, 6.0]);
        assert_eq!(s[0].mean, 5.0);
        assert_eq!(s[0].sd, 1.0);
        assert_eq!(s[0].mean_to_sd, Some(5.0));
        let s = ball_spreads(&g, &[2.0, 2.0]);
        assert_eq!(s[0].mean_to_sd, None);
    }
}
