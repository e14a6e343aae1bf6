//! Summary measures of a single Ball Mapper graph.

use serde::{Deserialize, Serialize};

use crate::cover::{ball_degree_profile, BMGraph};
use crate::error::{Error, Result};

/// Size, coloration and connectivity measures of one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub balls: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub mean_size: f64,
    pub delta_size: usize,
    pub min_col: f64,
    pub max_col: f64,
    pub delta_col: f64,
    /// Balls sharing no point with any other ball.
    pub zero_connection_balls: usize,
    /// Number of edges.
    pub total_connections: usize,
    /// Mean degree over balls with at least one edge, `2|E| / connected`.
    pub avg_connections_connected: f64,
    /// Edges per connected ball, `|E| / connected`. This is the quantity
    /// tabulated as "Con" in the published Ball Mapper sweep tables.
    pub con: f64,
}

/// Field names in the order used by CSV tables and sweep summaries.
pub const METRIC_FIELDS: [&str; 12] = [
    "balls",
    "min_size",
    "max_size",
    "mean_size",
    "delta_size",
    "min_col",
    "max_col",
    "delta_col",
    "zero_connection_balls",
    "total_connections",
    "avg_connections_connected",
    "con",
];

impl GraphMetrics {
    /// Values aligned with [`METRIC_FIELDS`].
    pub fn values(&self) -> [f64; 12] {
        [
            self.balls as f64,
            self.min_size as f64,
            self.max_size as f64,
            self.mean_size,
            self.delta_size as f64,
            self.min_col,
            self.max_col,
            self.delta_col,
            self.zero_connection_balls as f64,
            self.total_connections as f64,
            self.avg_connections_connected,
            self.con,
        ]
    }

    pub fn field(&self, name: &str) -> Option<f64> {
        METRIC_FIELDS
            .iter()
            .position(|f| *f == name)
            .map(|i| self.values()[i])
    }
}

pub fn compute_metrics(graph: &BMGraph, colors: &[f64]) -> Result<GraphMetrics> {
    let balls = graph.n_balls();
    if colors.len() != balls {
        return Err(Error::LengthMismatch {
            what: "ball colors",
            expected: balls,
            found: colors.len(),
        });
    }
    if balls == 0 {
        return Err(Error::InvalidParameter("graph has no balls".into()));
    }
    let sizes = &graph.ball_sizes;
    let min_size = *sizes.iter().min().expect("nonempty");
    let max_size = *sizes.iter().max().expect("nonempty");
    let mean_size = sizes.iter().sum::<usize>() as f64 / balls as f64;
    let (min_col, max_col) = colors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
            (lo.min(c), hi.max(c))
        });

    let degrees = ball_degree_profile(graph);
    let zero = degrees.iter().filter(|&&d| d == 0).count();
    let edges = graph.edges.len();
    let connected = balls - zero;
    let (avg, con) = if connected > 0 {
        (
            2.0 * edges as f64 / connected as f64,
            edges as f64 / connected as f64,
        )
    } else {
        (0.0, 0.0)
    };

    Ok(GraphMetrics {
        balls,
        min_size,
        max_size,
        mean_size,
        delta_size: max_size - min_size,
        min_col,
        max_col,
        delta_col: max_col - min_col,
        zero_connection_balls: zero,
        total_connections: edges,
        avg_connections_connected: avg,
        con,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{build_cover, build_edges, identity_order};
    use crate::geometry::PointCloud;
    use approx::assert_abs_diff_eq;

    fn line_graph(values: &[f64], eps: f64, order: &[usize]) -> BMGraph {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        let c = PointCloud::from_rows(&rows).unwrap();
        build_edges(build_cover(&c, eps, order).unwrap())
    }

    #[test]
    fn isolated_single_member_balls() {
        let g = line_graph(&[0.0, 10.0, 20.0], 1.0, &identity_order(3));
        let m = compute_metrics(&g, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.balls, 3);
        assert_eq!(m.delta_size, 0);
        assert_eq!(m.delta_col, 2.0);
        assert_eq!(m.zero_connection_balls, 3);
        assert_eq!(m.total_connections, 0);
        assert_eq!(m.avg_connections_connected, 0.0);
        assert_eq!(m.con, 0.0);
    }

    #[test]
    fn path_of_three_balls() {
        // balls at 0, 2, 4 with sizes 2, 3, 2
        let g = line_graph(&[0.0, 1.0, 2.0, 3.0, 4.0], 1.0, &[0, 2, 4, 1, 3]);
        assert_eq!(g.ball_sizes, vec![2, 3, 2]);
        let m = compute_metrics(&g, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.zero_connection_balls, 0);
        assert_eq!(m.total_connections, 2);
        assert_abs_diff_eq!(m.avg_connections_connected, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.con, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m.min_size, 2);
        assert_eq!(m.max_size, 3);
        assert_abs_diff_eq!(m.mean_size, 7.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m.delta_col, 0.0);
    }

    #[test]
    fn misaligned_colors_rejected() {
        let g = line_graph(&[0.0], 1.0, &[0]);
        assert!(compute_metrics(&g, &[]).is_err());
    }

    #[test]
    fn field_lookup() {
        let g = line_graph(&[0.0, 10.0], 1.0, &[0, 1]);
        let m = compute_metrics(&g, &[1.0, 4.0]).unwrap();
        assert_eq!(m.field("delta_col"), Some(3.0));
        assert_eq!(m.field("balls"), Some(2.0));
        assert_eq!(m.field("nope"), None);
    }
}
