use ballmapper::coloration::ball_spreads;
use ballmapper::{
    aggregate_values, build_cover, build_edges, permutation, point_to_ball_map, CloudSpec,
    ColorFunction, PointCloud,
};
use proptest::prelude::*;

fn brute_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn cloud_strategy() -> impl Strategy<Value = PointCloud> {
    (1usize..80, 1usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(-3.0f64..3.0, n * d)
            .prop_map(move |flat| PointCloud::from_flat(n, d, flat).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cover_and_edges_match_brute_force(cloud in cloud_strategy(), eps in 0.05f64..4.0, seed in any::<u64>()) {
        let n = cloud.n_points();
        let order = permutation(n, seed, 0);
        let g = build_edges(build_cover(&cloud, eps, &order).unwrap());

        let landmarks: Vec<usize> = g.balls().iter().map(|b| b.landmark).collect();
        for i in 0..n {
            prop_assert!(landmarks.iter().any(|&l| brute_distance(cloud.row(i), cloud.row(l)) <= eps));
        }
        for (a, &la) in landmarks.iter().enumerate() {
            for &lb in &landmarks[a + 1..] {
                prop_assert!(brute_distance(cloud.row(la), cloud.row(lb)) > eps);
            }
        }
        for b in g.balls() {
            let expected: Vec<usize> = (0..n)
                .filter(|&i| brute_distance(cloud.row(i), cloud.row(b.landmark)) <= eps)
                .collect();
            prop_assert_eq!(&b.members, &expected);
        }
        for (ia, a) in g.balls().iter().enumerate() {
            for b in &g.balls()[ia + 1..] {
                let shared = a.members.iter().any(|m| b.members.contains(m));
                prop_assert_eq!(g.has_edge(a.id, b.id), shared);
                if shared {
                    prop_assert!(brute_distance(cloud.row(a.landmark), cloud.row(b.landmark)) <= 2.0 * eps);
                }
            }
        }
        let map = point_to_ball_map(&g.cover);
        prop_assert!(map.iter().all(|balls| !balls.is_empty()));
    }

    #[test]
    fn aggregates_stay_within_member_range(seed in 0u64..5000, eps in 0.3f64..2.0) {
        let cloud = CloudSpec::noise(60, 3, seed).generate_with_outcome().unwrap();
        let y = cloud.outcome().unwrap().to_vec();
        let g = build_edges(build_cover(&cloud, eps, &permutation(60, seed, 1)).unwrap());
        let means = aggregate_values(&g, &y, ColorFunction::Mean);
        let sds = aggregate_values(&g, &y, ColorFunction::StdDev);
        let spreads = ball_spreads(&g, &y);
        for (i, b) in g.balls().iter().enumerate() {
            let vals: Vec<f64> = b.members.iter().map(|&m| y[m]).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(means[i] >= lo - 1e-12 && means[i] <= hi + 1e-12);
            prop_assert!(sds[i] >= 0.0 && sds[i] <= (hi - lo) + 1e-12);
            prop_assert!((spreads[i].sd - sds[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn permutation_does_not_change_single_point_balls_count_when_far_apart() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![10.0 * i as f64, 0.0]).collect();
    let c = PointCloud::from_rows(&rows).unwrap();
    for rep in 0..10 {
        let g = build_edges(build_cover(&c, 1.0, &permutation(20, 5, rep)).unwrap());
        assert_eq!(g.n_balls(), 20);
        assert!(g.edges.is_empty());
    }
}
