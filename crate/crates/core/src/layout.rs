//! Seeded force-directed placement of balls in the plane.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cover::BMGraph;

pub const DEFAULT_LAYOUT_SEED: u64 = 123;
pub const DEFAULT_ITERATIONS: usize = 500;
/// Display radii, in layout units, of the smallest and largest ball.
pub const DEFAULT_RADIUS_RANGE: (f64, f64) = (0.1, 0.4);

/// Ideal edge length.
pub const SPRING_LENGTH: f64 = 1.0;
/// Pull of every ball toward the origin, proportional to its distance.
pub const GRAVITY: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutResult {
    /// `(x, y)` per ball, indexed by `id - 1`.
    pub positions: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    pub seed: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutOptions {
    pub seed: u64,
    pub iterations: usize,
    pub radius_range: (f64, f64),
}

impl Default for LayoutOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_LAYOUT_SEED,
            iterations: DEFAULT_ITERATIONS,
            radius_range: DEFAULT_RADIUS_RANGE,
        }
    }
}

/// Affine map of member counts onto `[r_min, r_max]`. Equal counts all get
/// the midpoint.
pub fn scale_sizes(counts: &[usize], r_min: f64, r_max: f64) -> Vec<f64> {
    let lo = counts.iter().copied().min().unwrap_or(0);
    let hi = counts.iter().copied().max().unwrap_or(0);
    if hi == lo {
        return vec![0.5 * (r_min + r_max); counts.len()];
    }
    let span = (hi - lo) as f64;
    counts
        .iter()
        .map(|&c| r_min + (r_max - r_min) * (c - lo) as f64 / span)
        .collect()
}

pub fn layout(graph: &BMGraph, seed: u64) -> LayoutResult {
    layout_with(
        graph,
        &LayoutOptions {
            seed,
            ..LayoutOptions::default()
        },
    )
}

/// Fruchterman-Reingold with linear cooling over a fixed number of
/// iterations, plus weak gravity so disconnected pieces stay close.
pub fn layout_with(graph: &BMGraph, opts: &LayoutOptions) -> LayoutResult {
    let n = graph.n_balls();
    let radii = scale_sizes(&graph.ball_sizes, opts.radius_range.0, opts.radius_range.1);
    let finish = |positions| LayoutResult {
        positions,
        radii,
        seed: opts.seed,
        iterations: opts.iterations,
    };
    if n <= 1 {
        return finish(vec![[0.0, 0.0]; n]);
    }

    let k = SPRING_LENGTH;
    let half = 0.5 * (n as f64).sqrt() * k;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(-half..half), rng.random_range(-half..half)])
        .collect();
    let t0 = 0.1 * half.max(1.0);
    let mut disp = vec![[0.0f64; 2]; n];

    for it in 0..opts.iterations {
        disp.iter_mut().for_each(|d| *d = [0.0, 0.0]);
        for i in 0..n {
            for j in i + 1..n {
                let (mut dx, mut dy) = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]);
                let mut dist = (dx * dx + dy * dy).sqrt();
                if dist < 1e-9 {
                    dx = 1e-9 * ((i + j) as f64).cos();
                    dy = 1e-9 * ((i + j) as f64).sin();
                    dist = 1e-9;
                }
                let f = k * k / dist;
                let (fx, fy) = (dx / dist * f, dy / dist * f);
                disp[i][0] += fx;
                disp[i][1] += fy;
                disp[j][0] -= fx;
                disp[j][1] -= fy;
            }
        }
        for &(a, b) in &graph.edges {
            let (i, j) = (a - 1, b - 1);
            let (dx, dy) = (pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]);
            let dist = (dx * dx + dy * dy).sqrt();
            if dist > 0.0 {
                let f = dist * dist / k;
                let (fx, fy) = (dx / dist * f, dy / dist * f);
                disp[i][0] -= fx;
                disp[i][1] -= fy;
                disp[j][0] += fx;
                disp[j][1] += fy;
            }
        }
        let t = t0 * (1.0 - it as f64 / opts.iterations as f64);
        for (p, d) in pos.iter_mut().zip(&disp) {
            let (gx, gy) = (d[0] - GRAVITY * p[0], d[1] - GRAVITY * p[1]);
            let len = (gx * gx + gy * gy).sqrt();
            if len > 0.0 {
                let step = len.min(t) / len;
                p[0] += gx * step;
                p[1] += gy * step;
            }
        }
    }

    let (cx, cy) = pos
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    let (cx, cy) = (cx / n as f64, cy / n as f64);
    for p in &mut pos {
        p[0] -= cx;
        p[1] -= cy;
    }
    finish(pos)
}
