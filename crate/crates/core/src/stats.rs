//! Conventional baseline: summary tables, correlations and k-means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quantile_sorted, PointCloud};

/// Row label used for the outcome in summary tables.
pub const OUTCOME_LABEL: &str = "Y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation.
    pub sd: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
    /// `m3 / m2^1.5`; `None` for a constant variable.
    pub skewness: Option<f64>,
    /// Non-excess `m4 / m2^2`; `None` for a constant variable.
    pub kurtosis: Option<f64>,
}

impl VariableSummary {
    pub fn of(name: impl Into<String>, values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidCloud(
                "summary needs at least 2 points".into(),
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for v in values {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let sd = (m2 / (n - 1.0)).sqrt();
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let constant = sorted[0] == sorted[sorted.len() - 1];
        Ok(Self {
            name: name.into(),
            mean,
            sd: if constant { 0.0 } else { sd },
            min: sorted[0],
            q25: quantile_sorted(&sorted, 0.25),
            q50: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            skewness: (!constant).then(|| m3 / m2.powf(1.5)),
            kurtosis: (!constant).then(|| m4 / (m2 * m2)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: Vec<VariableSummary>,
}

impl SummaryTable {
    pub fn row(&self, name: &str) -> Option<&VariableSummary> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// One row per axis, then the outcome (labelled `Y`) when present.
pub fn summarize_cloud(cloud: &PointCloud) -> Result<SummaryTable> {
    let mut rows = Vec::with_capacity(cloud.n_axes() + 1);
    for (j, name) in cloud.axis_names().iter().enumerate() {
        rows.push(VariableSummary::of(name.clone(), &cloud.column(j))?);
    }
    if let Some(y) = cloud.outcome() {
        rows.push(VariableSummary::of(OUTCOME_LABEL, y)?);
    }
    Ok(SummaryTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

/// Pearson correlations between axes.
pub fn correlations(cloud: &PointCloud) -> Result<CorrelationMatrix> {
    let d = cloud.n_axes();
    let n = cloud.n_points() as f64;
    let mut centered = Vec::with_capacity(d);
    let mut norms = Vec::with_capacity(d);
    for j in 0..d {
        let col = cloud.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss = c.iter().map(|v| v * v).sum::<f64>();
        if ss == 0.0 {
            return Err(Error::ConstantColumn {
                index: j,
                name: cloud.axis_names()[j].clone(),
            });
        }
        norms.push(ss.sqrt());
        centered.push(c);
    }
    let mut values = vec![vec![0.0; d]; d];
    for i in 0..d {
        values[i][i] = 1.0;
        for j in i + 1..d {
            let dot: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: cloud.axis_names().to_vec(),
        values,
    })
}

pub const DEFAULT_RESTARTS: usize = 25;
pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    /// 1-based label after canonical ordering.
    pub label: usize,
    pub size: usize,
    pub outcome_mean: Option<f64>,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub k: usize,
    /// 1-based cluster label per point.
    pub assignments: Vec<usize>,
    pub wss: f64,
    pub clusters: Vec<ClusterSummary>,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
    /// WSS after every iteration of the winning restart.
    pub wss_history: Vec<f64>,
}

impl KMeansResult {
    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.clusters.iter().map(|c| c.center.clone()).collect()
    }
}

struct Lloyd {
    assignments: Vec<usize>,
    centers: Vec<f64>,
    wss: f64,
    history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(cloud: &PointCloud, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = cloud.n_points();
    let mut chosen = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    chosen.push(first);
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(cloud.row(i), cloud.row(first)))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if *w > 0.0 && acc > r {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|w| *w > 0.0).expect("positive weight"))
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(cloud.row(i), cloud.row(next)));
        }
    }
    chosen.iter().flat_map(|&i| cloud.row(i).to_vec()).collect()
}

fn lloyd(cloud: &PointCloud, k: usize, mut centers: Vec<f64>) -> Lloyd {
    let n = cloud.n_points();
    let d = cloud.n_axes();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for i in 0..n {
            let row = cloud.row(i);
            let cur = assignments[i];
            let (mut best, mut best_d) = if cur == usize::MAX {
                (usize::MAX, f64::INFINITY)
            } else {
                (cur, sq_dist(row, &centers[cur * d..(cur + 1) * d]))
            };
            for c in 0..k {
                let dc = sq_dist(row, &centers[c * d..(c + 1) * d]);
                if dc < best_d {
                    best = c;
                    best_d = dc;
                }
            }
            if best != cur {
                assignments[i] = best;
                changed = true;
            }
            dist[i] = best_d;
        }

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        // Empty clusters take the point farthest from its center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a donor cluster");
                counts[assignments[far]] -= 1;
                assignments[far] = c;
                counts[c] = 1;
                dist[far] = 0.0;
                changed = true;
            }
        }

        let mut sums = vec![0.0; k * d];
        for (i, &a) in assignments.iter().enumerate() {
            for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(cloud.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            for j in 0..d {
                centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
            }
        }
        let wss: f64 = (0..n)
            .map(|i| {
                let a = assignments[i];
                sq_dist(cloud.row(i), &centers[a * d..(a + 1) * d])
            })
            .sum();
        if let Some(prev) = history.last() {
            debug_assert!(
                wss <= prev * (1.0 + 1e-12) + 1e-12,
                "WSS rose from {prev} to {wss}"
            );
        }
        history.push(wss);
        if !changed {
            break;
        }
    }
    Lloyd {
        assignments,
        centers,
        wss: *history.last().expect("at least one iteration"),
        history,
    }
}

fn check_k(cloud: &PointCloud, k: usize) -> Result<()> {
    if k == 0 || k > cloud.n_points() {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={}, got {k}",
            cloud.n_points()
        )));
    }
    Ok(())
}

fn best_of_restarts(cloud: &PointCloud, k: usize, restarts: usize, seed: u64) -> Lloyd {
    let runs: Vec<Lloyd> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            lloyd(cloud, k, plus_plus_init(cloud, k, &mut rng))
        })
        .collect();
    pick_best(runs)
}

fn pick_best(runs: Vec<Lloyd>) -> Lloyd {
    runs.into_iter()
        .reduce(|best, r| if r.wss < best.wss { r } else { best })
        .expect("at least one run")
}

fn finish(cloud: &PointCloud, k: usize, run: Lloyd) -> KMeansResult {
    let d = cloud.n_axes();
    let mut sizes = vec![0usize; k];
    let mut ysum = vec![0.0; k];
    for (i, &a) in run.assignments.iter().enumerate() {
        sizes[a] += 1;
        if let Some(y) = cloud.outcome() {
            ysum[a] += y[i];
        }
    }
    let ymean: Vec<Option<f64>> = (0..k)
        .map(|c| cloud.outcome().map(|_| ysum[c] / sizes[c] as f64))
        .collect();
    let center = |c: usize| run.centers[c * d..(c + 1) * d].to_vec();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| match (ymean[a], ymean[b]) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        _ => center(a)
            .iter()
            .zip(center(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal),
    });
    let mut relabel = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        relabel[old] = new + 1;
    }
    KMeansResult {
        k,
        assignments: run.assignments.iter().map(|&a| relabel[a]).collect(),
        wss: run.wss,
        clusters: order
            .iter()
            .enumerate()
            .map(|(new, &old)| ClusterSummary {
                label: new + 1,
                size: sizes[old],
                outcome_mean: ymean[old],
                center: center(old),
            })
            .collect(),
        iterations: run.history.len(),
        wss_history: run.history,
    }
}

/// k-means by Lloyd iterations from k-means++ seeds, best WSS over
/// `restarts` runs. Clusters are labelled 1..k by ascending outcome mean,
/// or by center coordinates when the cloud has no outcome.
pub fn kmeans(cloud: &PointCloud, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    check_k(cloud, k)?;
    Ok(finish(cloud, k, best_of_restarts(cloud, k, restarts, seed)))
}

/// Total squared deviation from the centroid, i.e. WSS for one cluster.
pub fn total_sum_of_squares(cloud: &PointCloud) -> f64 {
    let d = cloud.n_axes();
    let n = cloud.n_points() as f64;
    (0..d)
        .map(|j| {
            let col = cloud.column(j);
            let m = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        })
        .sum()
}

/// Best WSS for each k in 1..=k_max.
///
/// Besides the random restarts, each k > 1 also runs Lloyd from the best
/// (k-1) centers plus the point farthest from its center, so the series is
/// non-increasing.
pub fn elbow_series(
    cloud: &PointCloud,
    k_max: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_k(cloud, k_max)?;
    let d = cloud.n_axes();
    let mut out = Vec::with_capacity(k_max);
    let mut prev: Option<Lloyd> = None;
    for k in 1..=k_max {
        let mut best = best_of_restarts(cloud, k, restarts, seed);
        if let Some(p) = &prev {
            let far = (0..cloud.n_points())
                .max_by(|&a, &b| {
                    let da = sq_dist(cloud.row(a), &p.centers[p.assignments[a] * d..][..d]);
                    let db = sq_dist(cloud.row(b), &p.centers[p.assignments[b] * d..][..d]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("nonempty");
            let mut centers = p.centers.clone();
            centers.extend_from_slice(cloud.row(far));
            best = pick_best(vec![best, lloyd(cloud, k, centers)]);
        }
        out.push(best.wss);
        prev = Some(best);
    }
    Ok(out)
}
