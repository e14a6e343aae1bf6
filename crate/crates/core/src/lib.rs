//! Ball Mapper: graphs that summarize the shape of a point cloud.
//!
//! Points are scanned in some order; every point not yet covered becomes the
//! landmark of a new ball holding all points within `epsilon` of it. Balls
//! that share a point are joined by an edge, and each ball is colored by an
//! aggregate of some per-point value.
//!
//! ```
//! use ballmapper::{build_cover, build_edges, identity_order, PointCloud};
//!
//! let cloud = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![1.8]]).unwrap();
//! let graph = build_edges(build_cover(&cloud, 1.0, &identity_order(3)).unwrap());
//! assert_eq!(graph.n_balls(), 2);
//! assert_eq!(graph.edges, vec![(1, 2)]);
//! ```

pub mod bootstrap;
pub mod coloration;
pub mod cover;
pub mod error;
pub mod export;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod stats;
pub mod synthetic;

pub use bootstrap::{
    permutation, run_repetitions, summarize, sweep, CloudSource, FlagRule, GeneratedCloud,
    SummaryStat, SweepParameter, SweepRow, SweepSpec, SweepSummary,
};
pub use coloration::{
    aggregate, aggregate_values, ball_spreads, color_scale, BallSpread, ColorFunction, ColorScale,
    ColorSource, ColorSpec,
};
pub use cover::{
    ball_degree_profile, build_cover, build_edges, identity_order, point_to_ball_map, BMGraph,
    Ball, Cover, CoverEngine, Membership,
};
pub use error::{Error, Result};
pub use export::{export_graph, ExportContext, ExportFormat, GraphDocument, SCHEMA_VERSION};
pub use geometry::{
    clamp_columns, distance, normalize_minmax, quantile, winsorize, ClampBounds, Metric,
    Normalized, PointCloud, Winsorized,
};
pub use layout::{layout, layout_with, scale_sizes, LayoutOptions, LayoutResult};
pub use metrics::{compute_metrics, GraphMetrics, METRIC_FIELDS};
pub use stats::{
    correlations, elbow_series, kmeans, summarize_cloud, CorrelationMatrix, KMeansResult,
    SummaryTable,
};
pub use synthetic::{attach_flag, attach_outcome, CloudKind, CloudSpec};
