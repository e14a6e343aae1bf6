//! Point clouds, the distance contract, and column preprocessing.
//!
//! A [`PointCloud`] is an immutable `n x d` matrix of finite coordinates stored
//! row-major, together with stable point identifiers, an optional outcome
//! vector and any number of named binary flags. Preprocessing functions never
//! mutate their input; they return a new cloud.
//!
//! Per-axis weighting is not applied anywhere in the engine. Callers who want
//! some variables to count more than others can rescale those columns (for
//! example with [`PointCloud::map_columns`]) after normalization.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance used for ball membership.
///
/// Any additional variant must be symmetric, nonnegative, zero exactly for
/// identical coordinates, and satisfy the triangle inequality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
        }
    }

    /// Distance between two rows of equal length.
    #[inline]
    pub fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => squared_euclidean(a, b).sqrt(),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        Ok(self.distance_unchecked(a, b))
    }

    /// Returns `Some(distance)` when the rows are within `radius`, `None`
    /// otherwise.
    ///
    /// The accumulation stops as soon as the partial sum of squares exceeds
    /// the squared radius by a relative margin of `1e-9`. Points that survive
    /// are judged by the same `sqrt` as [`Metric::distance`], so the verdict is
    /// identical to `distance(a, b) <= radius`.
    #[inline]
    pub fn within(&self, a: &[f64], b: &[f64], radius: f64) -> Option<f64> {
        match self {
            Metric::Euclidean => {
                let bound = radius * radius * (1.0 + 1e-9);
                let mut acc = 0.0;
                for (x, y) in a.iter().zip(b) {
                    let t = x - y;
                    acc += t * t;
                    if acc > bound {
                        return None;
                    }
                }
                let d = acc.sqrt();
                (d <= radius).then_some(d)
            }
        }
    }
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

/// Euclidean distance between two points.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Metric::Euclidean.distance(a, b)
}

/// An `n x d` cloud of points with optional outcome and binary flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    n_points: usize,
    n_axes: usize,
    coords: Vec<f64>,
    axis_names: Vec<String>,
    point_ids: Vec<String>,
    outcome: Option<Vec<f64>>,
    flags: BTreeMap<String, Vec<u8>>,
}

impl PointCloud {
    /// Builds a cloud from rows. Axis names default to `X1..Xd`, point ids
    /// to `1..n`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidCloud("cloud has no points".into()));
        }
        let d = rows[0].len();
        let mut coords = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(n, d, coords)
    }

    /// Builds a cloud from a row-major coordinate buffer.
    pub fn from_flat(n_points: usize, n_axes: usize, coords: Vec<f64>) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidCloud("cloud has no points".into()));
        }
        if n_axes == 0 {
            return Err(Error::InvalidCloud("cloud has no axes".into()));
        }
        if coords.len() != n_points * n_axes {
            return Err(Error::LengthMismatch {
                what: "coordinate buffer",
                expected: n_points * n_axes,
                found: coords.len(),
            });
        }
        if let Some(pos) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite coordinate at point {} axis {}",
                pos / n_axes,
                pos % n_axes
            )));
        }
        Ok(Self {
            n_points,
            n_axes,
            coords,
            axis_names: (1..=n_axes).map(|k| format!("X{k}")).collect(),
            point_ids: (1..=n_points).map(|i| i.to_string()).collect(),
            outcome: None,
            flags: BTreeMap::new(),
        })
    }

    pub fn with_axis_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_axes {
            return Err(Error::LengthMismatch {
                what: "axis names",
                expected: self.n_axes,
                found: names.len(),
            });
        }
        self.axis_names = names;
        Ok(self)
    }

    pub fn with_point_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_points {
            return Err(Error::LengthMismatch {
                what: "point ids",
                expected: self.n_points,
                found: ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidCloud(format!("duplicate point id {id:?}")));
            }
        }
        self.point_ids = ids;
        Ok(self)
    }

    pub fn with_outcome(mut self, outcome: Vec<f64>) -> Result<Self> {
        if outcome.len() != self.n_points {
            return Err(Error::LengthMismatch {
                what: "outcome",
                expected: self.n_points,
                found: outcome.len(),
            });
        }
        if let Some(i) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "non-finite outcome at point {i}"
            )));
        }
        self.outcome = Some(outcome);
        Ok(self)
    }

    pub fn with_flag(mut self, name: impl Into<String>, values: Vec<u8>) -> Result<Self> {
        if values.len() != self.n_points {
            return Err(Error::LengthMismatch {
                what: "binary flag",
                expected: self.n_points,
                found: values.len(),
            });
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidCloud("binary flags must be 0 or 1".into()));
        }
        self.flags.insert(name.into(), values);
        Ok(self)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_axes(&self) -> usize {
        self.n_axes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n_axes..(i + 1) * self.n_axes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.n_axes)
    }

    pub fn column(&self, axis: usize) -> Vec<f64> {
        self.rows().map(|r| r[axis]).collect()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn axis_names(&self) -> &[String] {
        &self.axis_names
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axis_names.iter().position(|a| a == name)
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn outcome(&self) -> Option<&[f64]> {
        self.outcome.as_deref()
    }

    pub fn flag(&self, name: &str) -> Option<&[u8]> {
        self.flags.get(name).map(Vec::as_slice)
    }

    pub fn flags(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.flags
    }

    /// Returns a copy whose column `k` is `f(k, column)`; the closure must
    /// return a column of the same length with finite entries.
    pub fn map_columns<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &[f64]) -> Vec<f64>,
    {
        let mut coords = self.coords.clone();
        for k in 0..self.n_axes {
            let col = self.column(k);
            let mapped = f(k, &col);
            if mapped.len() != self.n_points {
                return Err(Error::LengthMismatch {
                    what: "mapped column",
                    expected: self.n_points,
                    found: mapped.len(),
                });
            }
            for (i, v) in mapped.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidCloud(format!(
                        "non-finite coordinate at point {i} axis {k}"
                    )));
                }
                coords[i * self.n_axes + k] = v;
            }
        }
        Ok(Self {
            coords,
            ..self.clone()
        })
    }
}

/// Linear-interpolation empirical quantile of unsorted data (the common
/// "type 7" definition): position `q * (n - 1)` between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// [`quantile`] on data that is already sorted ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let q = q.clamp(0.0, 1.0);
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Result of [`normalize_minmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub cloud: PointCloud,
    /// Indices of columns that were constant and were mapped to 0.
    pub constant_columns: Vec<usize>,
}

impl Normalized {
    pub fn warnings(&self) -> Vec<String> {
        self.constant_columns
            .iter()
            .map(|&k| {
                format!(
                    "column {} ({}) is constant; mapped to 0",
                    k,
                    self.cloud.axis_names()[k]
                )
            })
            .collect()
    }
}

/// Maps every column onto `[0, 1]` with `(x - min) / (max - min)`.
///
/// Constant columns become all zeros and are reported in
/// [`Normalized::constant_columns`].
pub fn normalize_minmax(cloud: &PointCloud) -> Normalized {
    let mut constant_columns = Vec::new();
    let out = cloud
        .map_columns(|k, col| {
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let span = hi - lo;
            if span > 0.0 {
                col.iter().map(|&v| (v - lo) / span).collect()
            } else {
                log::warn!("column {k} is constant; mapping it to 0");
                constant_columns.push(k);
                vec![0.0; col.len()]
            }
        })
        .expect("min-max mapping preserves shape and finiteness");
    Normalized {
        cloud: out,
        constant_columns,
    }
}

/// Per-column clamp bounds produced by [`winsorize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Result of [`winsorize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Winsorized {
    pub cloud: PointCloud,
    pub bounds: ClampBounds,
}

/// Clamps each column to its `[lower_q, upper_q]` linear-interpolation
/// quantiles.
pub fn winsorize(cloud: &PointCloud, lower_q: f64, upper_q: f64) -> Result<Winsorized> {
    if !(0.0..0.5).contains(&lower_q) || !(upper_q > 0.5 && upper_q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "winsorize quantiles must satisfy 0 <= lower < 0.5 < upper <= 1, got ({lower_q}, {upper_q})"
        )));
    }
    let mut lower = Vec::with_capacity(cloud.n_axes());
    let mut upper = Vec::with_capacity(cloud.n_axes());
    for k in 0..cloud.n_axes() {
        let mut col = cloud.column(k);
        col.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&col, lower_q));
        upper.push(quantile_sorted(&col, upper_q));
    }
    let bounds = ClampBounds { lower, upper };
    let cloud = clamp_columns(cloud, &bounds)?;
    Ok(Winsorized { cloud, bounds })
}

/// Clamps each column into `[bounds.lower[k], bounds.upper[k]]`.
pub fn clamp_columns(cloud: &PointCloud, bounds: &ClampBounds) -> Result<PointCloud> {
    if bounds.lower.len() != cloud.n_axes() || bounds.upper.len() != cloud.n_axes() {
        return Err(Error::LengthMismatch {
            what: "clamp bounds",
            expected: cloud.n_axes(),
            found: bounds.lower.len().min(bounds.upper.len()),
        });
    }
    cloud.map_columns(|k, col| {
        let (lo, hi) = (bounds.lower[k], bounds.upper[k]);
        col.iter().map(|&v| v.clamp(lo, hi)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn column_cloud(values: &[f64]) -> PointCloud {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            distance(&[0.0; 5], &[1.0; 5]).unwrap(),
            5f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            distance(&[0.0; 5], &[1.0; 5]).unwrap(),
            2.2360679,
            epsilon = 1e-7
        );
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        assert!(matches!(
            distance(&[0.0, 0.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn within_agrees_on_boundary() {
        let m = Metric::Euclidean;
        assert_eq!(m.within(&[0.0, 0.0], &[3.0, 4.0], 5.0), Some(5.0));
        assert_eq!(m.within(&[0.0, 0.0], &[3.0, 4.0], 4.999_999), None);
    }

    #[test]
    fn cloud_validation() {
        assert!(PointCloud::from_rows(&[]).is_err());
        assert!(PointCloud::from_rows(&[vec![]]).is_err());
        assert!(PointCloud::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(PointCloud::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let c = column_cloud(&[1.0, 2.0]);
        assert_eq!(c.point_ids(), ["1", "2"]);
        assert!(c
            .clone()
            .with_point_ids(vec!["a".into(), "a".into()])
            .is_err());
        assert!(c.clone().with_outcome(vec![1.0]).is_err());
        assert!(c.clone().with_flag("f", vec![0, 2]).is_err());
        assert!(c.with_flag("f", vec![0, 1]).is_ok());
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_minmax(&column_cloud(&[2.0, 4.0, 6.0]));
        assert_eq!(n.cloud.column(0), vec![0.0, 0.5, 1.0]);
        assert!(n.constant_columns.is_empty());

        let n = normalize_minmax(&column_cloud(&[5.0, 5.0, 5.0]));
        assert_eq!(n.cloud.column(0), vec![0.0, 0.0, 0.0]);
        assert_eq!(n.constant_columns, vec![0]);
        assert_eq!(n.warnings().len(), 1);

        let n = normalize_minmax(&column_cloud(&[-1.0, 0.0, 3.0]));
        assert_eq!(n.cloud.column(0), vec![0.0, 0.25, 1.0]);
    }

    #[test]
    fn normalize_keeps_ids_outcome_and_flags() {
        let c = column_cloud(&[1.0, 3.0])
            .with_outcome(vec![7.0, 8.0])
            .unwrap()
            .with_flag("f", vec![1, 0])
            .unwrap();
        let n = normalize_minmax(&c).cloud;
        assert_eq!(n.outcome(), c.outcome());
        assert_eq!(n.flag("f"), c.flag("f"));
        assert_eq!(n.point_ids(), c.point_ids());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.0), 1.0);
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 1.0), 4.0);
    }

    #[test]
    fn winsorize_examples() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let w = winsorize(&column_cloud(&values), 0.01, 0.99).unwrap();
        assert_abs_diff_eq!(w.bounds.lower[0], 1.99, epsilon = 1e-12);
        assert_abs_diff_eq!(w.bounds.upper[0], 99.01, epsilon = 1e-12);
        let col = w.cloud.column(0);
        assert_abs_diff_eq!(col[0], 1.99, epsilon = 1e-12);
        assert_eq!(col[1], 2.0);
        assert_abs_diff_eq!(col[99], 99.01, epsilon = 1e-12);

        let c = column_cloud(&[3.0, -2.0, 8.0]);
        assert_eq!(winsorize(&c, 0.0, 1.0).unwrap().cloud, c);

        let w = winsorize(&column_cloud(&[1.0, 2.0, 1000.0]), 0.0, 0.6).unwrap();
        let col = w.cloud.column(0);
        assert_eq!(&col[..2], &[1.0, 2.0]);
        assert_abs_diff_eq!(col[2], 201.6, epsilon = 1e-9);
    }

    #[test]
    fn winsorize_rejects_bad_quantiles() {
        let c = column_cloud(&[1.0, 2.0]);
        assert!(winsorize(&c, 0.5, 0.9).is_err());
        assert!(winsorize(&c, 0.1, 0.5).is_err());
        assert!(winsorize(&c, -0.1, 0.9).is_err());
    }

    fn arb_cloud() -> impl Strategy<Value = PointCloud> {
        (1usize..40, 1usize..5).prop_flat_map(|(n, d)| {
            proptest::collection::vec(-1e3f64..1e3, n * d)
                .prop_map(move |v| PointCloud::from_flat(n, d, v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn triangle_inequality(
            a in proptest::collection::vec(-100f64..100.0, 4),
            b in proptest::collection::vec(-100f64..100.0, 4),
            c in proptest::collection::vec(-100f64..100.0, 4),
        ) {
            let ab = distance(&a, &b).unwrap();
            let bc = distance(&b, &c).unwrap();
            let ac = distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(ab, distance(&b, &a).unwrap());
            prop_assert_eq!(distance(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn normalize_is_idempotent_and_rank_preserving(cloud in arb_cloud()) {
            let once = normalize_minmax(&cloud);
            let twice = normalize_minmax(&once.cloud);
            if once.constant_columns.is_empty() {
                prop_assert_eq!(&twice.cloud, &once.cloud);
            }
            for k in 0..cloud.n_axes() {
                let raw = cloud.column(k);
                let norm = once.cloud.column(k);
                for i in 0..raw.len() {
                    prop_assert!((0.0..=1.0).contains(&norm[i]));
                    for j in 0..raw.len() {
                        if raw[i] < raw[j] {
                            prop_assert!(norm[i] <= norm[j]);
                        }
                    }
                }
            }
        }

        #[test]
        fn winsorize_never_widens_and_bounds_are_stable(
            cloud in arb_cloud(),
            lq in 0.0f64..0.49,
            uq in 0.51f64..=1.0,
        ) {
            let w = winsorize(&cloud, lq, uq).unwrap();
            for k in 0..cloud.n_axes() {
                let raw = cloud.column(k);
                let out = w.cloud.column(k);
                let (rlo, rhi) = raw.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
                for v in out {
                    prop_assert!(v >= rlo && v <= rhi);
                    prop_assert!(v >= w.bounds.lower[k] && v <= w.bounds.upper[k]);
                }
            }
            // Re-applying the same bounds is a no-op.
            prop_assert_eq!(clamp_columns(&w.cloud, &w.bounds).unwrap(), w.cloud);
        }
    }
}
