//! Canonical graph document and its JSON, DOT and CSV renderings.
//!
//! JSON output has sorted keys and every float rounded to 6 significant
//! digits, so exporting an imported document reproduces it byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coloration::{ColorScale, ColorSpec};
use crate::cover::{build_edges, identity_order, BMGraph, Ball, Cover};
use crate::error::{Error, Result};
use crate::geometry::Metric;
use crate::layout::LayoutResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Rounds to 6 significant digits.
pub fn round6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Dot,
    Csv,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Dot => "dot",
            ExportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "dot" => Ok(ExportFormat::Dot),
            "csv" => Ok(ExportFormat::Csv),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetadata {
    pub epsilon: f64,
    pub metric: Metric,
    pub color: Option<ColorSpec>,
    /// `[low, high]` of the ball values.
    pub color_domain: [f64; 2],
    pub n_points: usize,
    pub cloud_seed: Option<u64>,
    /// `None` means points were scanned in file order.
    pub permutation_seed: Option<u64>,
    pub layout_seed: u64,
    pub layout_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub id: usize,
    pub landmark: String,
    pub members: Vec<String>,
    pub size: usize,
    pub value: f64,
    pub hex: String,
    pub radius: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema_version: u32,
    pub metadata: GraphMetadata,
    pub point_ids: Vec<String>,
    pub balls: Vec<BallRecord>,
    pub edges: Vec<[usize; 2]>,
}

/// Seeds and provenance recorded alongside a graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportContext {
    pub color: Option<ColorSpec>,
    pub cloud_seed: Option<u64>,
    pub permutation_seed: Option<u64>,
}

impl GraphDocument {
    pub fn new(
        graph: &BMGraph,
        point_ids: &[String],
        colors: &[f64],
        layout: &LayoutResult,
        ctx: &ExportContext,
    ) -> Result<Self> {
        let nb = graph.n_balls();
        for (what, found) in [
            ("ball colors", colors.len()),
            ("layout positions", layout.positions.len()),
            ("layout radii", layout.radii.len()),
        ] {
            if found != nb {
                return Err(Error::LengthMismatch {
                    what,
                    expected: nb,
                    found,
                });
            }
        }
        if point_ids.len() != graph.cover.n_points {
            return Err(Error::LengthMismatch {
                what: "point ids",
                expected: graph.cover.n_points,
                found: point_ids.len(),
            });
        }
        let values: Vec<f64> = colors.iter().map(|&v| round6(v)).collect();
        let scale = ColorScale::from_values(&values);
        let balls = graph
            .balls()
            .iter()
            .enumerate()
            .map(|(i, b)| BallRecord {
                id: b.id,
                landmark: point_ids[b.landmark].clone(),
                members: b.members.iter().map(|&m| point_ids[m].clone()).collect(),
                size: b.size(),
                value: values[i],
                hex: scale.hex(values[i]),
                radius: round6(layout.radii[i]),
                x: round6(layout.positions[i][0]),
                y: round6(layout.positions[i][1]),
            })
            .collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            metadata: GraphMetadata {
                epsilon: round6(graph.cover.epsilon),
                metric: graph.cover.metric,
                color: ctx.color.clone(),
                color_domain: [scale.low, scale.high],
                n_points: graph.cover.n_points,
                cloud_seed: ctx.cloud_seed,
                permutation_seed: ctx.permutation_seed,
                layout_seed: layout.seed,
                layout_iterations: layout.iterations,
            },
            point_ids: point_ids.to_vec(),
            balls,
            edges: graph.edges.iter().map(|&(a, b)| [a, b]).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("document serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self =
            serde_json::from_str(text).map_err(|e| Error::MalformedGraph(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::MalformedGraph(format!(
                "schema_version {} is not {SCHEMA_VERSION}",
                doc.schema_version
            )));
        }
        doc.to_graph()?;
        Ok(doc)
    }

    /// The graph and ball values described by this document. The scan order
    /// is not stored, so the rebuilt cover carries the identity order.
    pub fn to_graph(&self) -> Result<(BMGraph, Vec<f64>)> {
        let bad = |m: String| Error::MalformedGraph(m);
        let index: HashMap<&str, usize> = self
            .point_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        if index.len() != self.point_ids.len() || self.point_ids.len() != self.metadata.n_points {
            return Err(bad(
                "point ids are not unique or do not match n_points".into()
            ));
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| bad(format!("unknown point id {id:?}")))
        };
        let mut balls = Vec::with_capacity(self.balls.len());
        for (i, b) in self.balls.iter().enumerate() {
            if b.id != i + 1 {
                return Err(bad(format!("ball {} found at position {}", b.id, i + 1)));
            }
            let mut members = b
                .members
                .iter()
                .map(|m| lookup(m))
                .collect::<Result<Vec<_>>>()?;
            members.sort_unstable();
            let landmark = lookup(&b.landmark)?;
            if members.len() != b.size || members.binary_search(&landmark).is_err() {
                return Err(bad(format!("ball {} is inconsistent", b.id)));
            }
            balls.push(Ball {
                id: b.id,
                landmark,
                members,
            });
        }
        let graph = build_edges(Cover {
            balls,
            epsilon: self.metadata.epsilon,
            order: identity_order(self.metadata.n_points),
            metric: self.metadata.metric,
            n_points: self.metadata.n_points,
        });
        let stored: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        if stored != graph.edges {
            return Err(bad("edges do not match ball intersections".into()));
        }
        let values = self.balls.iter().map(|b| b.value).collect();
        Ok((graph, values))
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph ballmapper {\n");
        s.push_str("  node [shape=circle, style=filled, fixedsize=true];\n");
        for b in &self.balls {
            let _ = writeln!(
                s,
                "  {} [label=\"{}\", width={}, fillcolor=\"{}\", pos=\"{},{}!\"];",
                b.id,
                b.id,
                round6(2.0 * b.radius),
                b.hex,
                b.x,
                b.y
            );
        }
        for e in &self.edges {
            let _ = writeln!(s, "  {} -- {};", e[0], e[1]);
        }
        s.push_str("}\n");
        s
    }

    /// One `point_id,ball_id` row per membership, in point order.
    pub fn to_csv(&self) -> String {
        let mut per_point = vec![Vec::new(); self.point_ids.len()];
        let index: HashMap<&str, usize> = self
            .point_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        for b in &self.balls {
            for m in &b.members {
                per_point[index[m.as_str()]].push(b.id);
            }
        }
        let mut s = String::from("point_id,ball_id\n");
        for (i, balls) in per_point.iter_mut().enumerate() {
            balls.sort_unstable();
            for b in balls.iter() {
                let _ = writeln!(s, "{},{b}", csv_field(&self.point_ids[i]));
            }
        }
        s
    }

    pub fn render(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Json => self.to_json(),
            ExportFormat::Dot => self.to_dot(),
            ExportFormat::Csv => self.to_csv(),
        }
    }
}

/// Renders `doc` in the format named by `format`.
pub fn export_graph(doc: &GraphDocument, format: &str) -> Result<String> {
    Ok(doc.render(format.parse()?))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
