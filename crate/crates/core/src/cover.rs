//! Greedy epsilon-net covers and the Ball Mapper graph.
//!
//! The cover is built by scanning points in a caller-supplied order. The
//! first point not yet covered becomes a landmark, and its ball collects
//! every point of the cloud (covered or not) within `epsilon`. Randomness
//! only ever enters through the scan order.
//!
//! Two balls are joined by an edge exactly when they share a member.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Metric, PointCloud};

/// One vertex of the graph: a landmark and the points within `epsilon` of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    /// 1-based, in creation order.
    pub id: usize,
    /// Index of the landmark point in the cloud.
    pub landmark: usize,
    /// Member point indices, ascending.
    pub members: Vec<usize>,
}

impl Ball {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, point: usize) -> bool {
        self.members.binary_search(&point).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub balls: Vec<Ball>,
    pub epsilon: f64,
    /// The scan order the landmarks were drawn from.
    pub order: Vec<usize>,
    pub metric: Metric,
    pub n_points: usize,
}

impl Cover {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Looks up a ball by its 1-based id.
    pub fn ball(&self, id: usize) -> Option<&Ball> {
        id.checked_sub(1).and_then(|i| self.balls.get(i))
    }

    pub fn landmarks(&self) -> impl Iterator<Item = usize> + '_ {
        self.balls.iter().map(|b| b.landmark)
    }
}

/// How ball members are found.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Membership {
    /// Compare every point against every landmark.
    Naive,
    /// Restrict candidates to a window on the widest axis and abandon a
    /// distance as soon as its partial sum exceeds the radius. Produces the
    /// same members as `Naive`.
    #[default]
    Pruned,
}

/// Reusable cover builder for one cloud.
///
/// Building the pruning index costs a sort; keep the engine around when
/// building many covers of the same cloud.
#[derive(Debug, Clone)]
pub struct CoverEngine<'a> {
    cloud: &'a PointCloud,
    metric: Metric,
    membership: Membership,
    sweep_axis: usize,
    /// `(coordinate on sweep_axis, point index)` sorted by coordinate.
    sorted: Vec<(f64, usize)>,
}

impl<'a> CoverEngine<'a> {
    pub fn new(cloud: &'a PointCloud) -> Self {
        Self::with_options(cloud, Metric::Euclidean, Membership::Pruned)
    }

    pub fn with_options(cloud: &'a PointCloud, metric: Metric, membership: Membership) -> Self {
        let (sweep_axis, sorted) = match membership {
            Membership::Naive => (0, Vec::new()),
            Membership::Pruned => {
                let axis = widest_axis(cloud);
                let mut sorted: Vec<(f64, usize)> =
                    cloud.rows().map(|r| r[axis]).zip(0..).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                (axis, sorted)
            }
        };
        Self {
            cloud,
            metric,
            membership,
            sweep_axis,
            sorted,
        }
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Points within `epsilon` of `center`, ascending.
    pub fn members(&self, center: usize, epsilon: f64) -> Vec<usize> {
        let c = self.cloud.row(center);
        match self.membership {
            Membership::Naive => (0..self.cloud.n_points())
                .filter(|&j| self.metric.distance_unchecked(c, self.cloud.row(j)) <= epsilon)
                .collect(),
            Membership::Pruned => {
                let v = c[self.sweep_axis];
                // Widen the window slightly so rounding in the full distance
                // can never admit a point the window rejected.
                let w = epsilon * (1.0 + 1e-9) + 4.0 * f64::EPSILON * v.abs().max(epsilon);
                let lo = self.sorted.partition_point(|&(x, _)| x < v - w);
                let hi = self.sorted.partition_point(|&(x, _)| x <= v + w);
                let mut out: Vec<usize> = self.sorted[lo..hi]
                    .iter()
                    .filter(|&&(_, j)| self.metric.within(c, self.cloud.row(j), epsilon).is_some())
                    .map(|&(_, j)| j)
                    .collect();
                out.sort_unstable();
                out
            }
        }
    }

    /// Greedy epsilon-net cover scanning points in `order`.
    pub fn cover(&self, epsilon: f64, order: &[usize]) -> Result<Cover> {
        check_epsilon(epsilon)?;
        let n = self.cloud.n_points();
        check_permutation(order, n)?;

        let mut covered = vec![false; n];
        let mut remaining = n;
        let mut balls = Vec::new();
        for &p in order {
            if remaining == 0 {
                break;
            }
            if covered[p] {
                continue;
            }
            let members = self.members(p, epsilon);
            for &m in &members {
                if !covered[m] {
                    covered[m] = true;
                    remaining -= 1;
                }
            }
            balls.push(Ball {
                id: balls.len() + 1,
                landmark: p,
                members,
            });
        }
        Ok(Cover {
            balls,
            epsilon,
            order: order.to_vec(),
            metric: self.metric,
            n_points: n,
        })
    }

    /// Cover plus edges in one call.
    pub fn graph(&self, epsilon: f64, order: &[usize]) -> Result<BMGraph> {
        Ok(build_edges(self.cover(epsilon, order)?))
    }
}

fn widest_axis(cloud: &PointCloud) -> usize {
    (0..cloud.n_axes())
        .map(|k| {
            let (lo, hi) = cloud
                .rows()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[k]), hi.max(r[k]))
                });
            (k, hi - lo)
        })
        .fold((0, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
        .0
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::InvalidOrder {
            n,
            reason: format!("length {} differs from {n}", order.len()),
        });
    }
    let mut seen = vec![false; n];
    for &p in order {
        if p >= n {
            return Err(Error::InvalidOrder {
                n,
                reason: format!("index {p} out of range"),
            });
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidOrder {
                n,
                reason: format!("index {p} repeated"),
            });
        }
    }
    Ok(())
}

/// `0, 1, ..., n-1`: the order in which the data was supplied.
pub fn identity_order(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Greedy epsilon-net cover of `cloud` scanning points in `order`.
pub fn build_cover(cloud: &PointCloud, epsilon: f64, order: &[usize]) -> Result<Cover> {
    CoverEngine::new(cloud).cover(epsilon, order)
}

/// A cover together with its intersection edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BMGraph {
    pub cover: Cover,
    /// `(i, j)` ball ids with `i < j`, sorted and unique.
    pub edges: Vec<(usize, usize)>,
    pub ball_sizes: Vec<usize>,
    /// Per-ball aggregated values, when a coloration has been applied.
    pub colors: Option<Vec<f64>>,
}

impl BMGraph {
    pub fn n_balls(&self) -> usize {
        self.cover.balls.len()
    }

    pub fn balls(&self) -> &[Ball] {
        &self.cover.balls
    }

    pub fn with_colors(mut self, colors: Vec<f64>) -> Result<Self> {
        if colors.len() != self.n_balls() {
            return Err(Error::LengthMismatch {
                what: "ball colors",
                expected: self.n_balls(),
                found: colors.len(),
            });
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&key).is_ok()
    }
}

/// Joins every pair of balls that share at least one point.
pub fn build_edges(cover: Cover) -> BMGraph {
    let map = point_to_ball_map(&cover);
    let mut edges = Vec::new();
    for balls in &map {
        for (i, &a) in balls.iter().enumerate() {
            for &b in &balls[i + 1..] {
                edges.push((a, b));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let ball_sizes = cover.balls.iter().map(Ball::size).collect();
    BMGraph {
        cover,
        edges,
        ball_sizes,
        colors: None,
    }
}

/// For each point index, the ids of the balls containing it (ascending).
pub fn point_to_ball_map(cover: &Cover) -> Vec<Vec<usize>> {
    let mut map = vec![Vec::new(); cover.n_points];
    for ball in &cover.balls {
        for &m in &ball.members {
            map[m].push(ball.id);
        }
    }
    map
}

/// Number of edges incident to each ball, indexed by `id - 1`.
pub fn ball_degree_profile(graph: &BMGraph) -> Vec<usize> {
    let mut deg = vec![0; graph.n_balls()];
    for &(a, b) in &graph.edges {
        deg[a - 1] += 1;
        deg[b - 1] += 1;
    }
    deg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(values: &[f64]) -> PointCloud {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn hand_traced_cover() {
        let c = line(&[0.0, 1.0, 2.5]);
        let cover = build_cover(&c, 1.0, &identity_order(3)).unwrap();
        assert_eq!(cover.len(), 2);
        assert_eq!(cover.balls[0].landmark, 0);
        assert_eq!(cover.balls[0].members, vec![0, 1]);
        assert_eq!(cover.balls[1].landmark, 2);
        assert_eq!(cover.balls[1].members, vec![2]);
        assert!(build_edges(cover).edges.is_empty());
    }

    #[test]
    fn hand_traced_edge() {
        let c = line(&[0.0, 1.0, 1.8]);
        let g = build_cover(&c, 1.0, &identity_order(3))
            .map(build_edges)
            .unwrap();
        assert_eq!(g.balls()[0].members, vec![0, 1]);
        assert_eq!(g.balls()[1].members, vec![1, 2]);
        assert_eq!(g.edges, vec![(1, 2)]);
        assert_eq!(g.ball_sizes, vec![2, 2]);
        assert_eq!(
            point_to_ball_map(&g.cover),
            vec![vec![1], vec![1, 2], vec![2]]
        );
        assert_eq!(ball_degree_profile(&g), vec![1, 1]);
    }

    #[test]
    fn degenerate_clouds() {
        let single = line(&[3.0]);
        let g = build_cover(&single, 0.5, &[0]).map(build_edges).unwrap();
        assert_eq!(g.n_balls(), 1);
        assert!(g.edges.is_empty());
        assert_eq!(point_to_ball_map(&g.cover), vec![vec![1]]);

        let dup = PointCloud::from_rows(&vec![vec![1.0, 2.0]; 7]).unwrap();
        let cover = build_cover(&dup, 1e-6, &identity_order(7)).unwrap();
        assert_eq!(cover.len(), 1);
        assert_eq!(cover.balls[0].size(), 7);
    }

    #[test]
    fn boundary_points_are_members() {
        let c = line(&[0.0, 2.0]);
        let cover = build_cover(&c, 2.0, &[0, 1]).unwrap();
        assert_eq!(cover.len(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = line(&[0.0, 1.0]);
        assert!(matches!(
            build_cover(&c, 0.0, &[0, 1]),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(matches!(
            build_cover(&c, -1.0, &[0, 1]),
            Err(Error::InvalidEpsilon(_))
        ));
        assert!(build_cover(&c, f64::NAN, &[0, 1]).is_err());
        assert!(matches!(
            build_cover(&c, 1.0, &[0]),
            Err(Error::InvalidOrder { .. })
        ));
        assert!(matches!(
            build_cover(&c, 1.0, &[0, 0]),
            Err(Error::InvalidOrder { .. })
        ));
        assert!(matches!(
            build_cover(&c, 1.0, &[0, 2]),
            Err(Error::InvalidOrder { .. })
        ));
    }

    #[test]
    fn degree_profiles() {
        let path = line(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let g = build_cover(&path, 1.0, &[0, 2, 4, 1, 3])
            .map(build_edges)
            .unwrap();
        // balls centred at 0, 2, 4 chained through 1 and 3
        assert_eq!(g.edges, vec![(1, 2), (2, 3)]);
        assert_eq!(ball_degree_profile(&g), vec![1, 2, 1]);

        let apart = line(&[0.0, 10.0, 20.0]);
        let g = build_cover(&apart, 1.0, &identity_order(3))
            .map(build_edges)
            .unwrap();
        assert_eq!(ball_degree_profile(&g), vec![0, 0, 0]);
    }

    fn arb_case() -> impl Strategy<Value = (PointCloud, f64, Vec<usize>)> {
        (1usize..60, 1usize..4).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(-3f64..3.0, n * d),
                0.05f64..2.5,
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            )
                .prop_map(move |(v, eps, order)| {
                    (PointCloud::from_flat(n, d, v).unwrap(), eps, order)
                })
        })
    }

    proptest! {
        #[test]
        fn pruned_matches_naive((cloud, eps, order) in arb_case()) {
            let naive = CoverEngine::with_options(&cloud, Metric::Euclidean, Membership::Naive)
                .cover(eps, &order).unwrap();
            let pruned = CoverEngine::new(&cloud).cover(eps, &order).unwrap();
            prop_assert_eq!(naive, pruned);
        }

        #[test]
        fn cover_invariants((cloud, eps, order) in arb_case()) {
            let g = build_edges(build_cover(&cloud, eps, &order).unwrap());
            let map = point_to_ball_map(&g.cover);
            prop_assert!(map.iter().all(|b| !b.is_empty()));
            for (i, a) in g.balls().iter().enumerate() {
                prop_assert!(a.contains(a.landmark));
                for b in &g.balls()[i + 1..] {
                    prop_assert!(distance_between(&cloud, a.landmark, b.landmark) > eps);
                }
            }
            for &(a, b) in &g.edges {
                prop_assert!(a < b);
                let (la, lb) = (g.balls()[a - 1].landmark, g.balls()[b - 1].landmark);
                prop_assert!(distance_between(&cloud, la, lb) <= 2.0 * eps + 1e-12);
            }
            let degree_sum: usize = ball_degree_profile(&g).iter().sum();
            prop_assert_eq!(degree_sum, 2 * g.edges.len());
        }

        #[test]
        fn single_axis_spread_within_two_epsilon((cloud, eps, order) in arb_case()) {
            let cover = build_cover(&cloud, eps, &order).unwrap();
            for ball in &cover.balls {
                for &x in &ball.members {
                    for &y in &ball.members {
                        for k in 0..cloud.n_axes() {
                            prop_assert!((cloud.row(x)[k] - cloud.row(y)[k]).abs() <= 2.0 * eps + 1e-12);
                        }
                    }
                }
            }
        }
    }

    fn distance_between(cloud: &PointCloud, a: usize, b: usize) -> f64 {
        Metric::Euclidean.distance_unchecked(cloud.row(a), cloud.row(b))
    }
}
