//! CSV reading and writing of point clouds.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use ballmapper::PointCloud;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// A binary flag set to 1 where `column` is strictly above `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagDef {
    pub column: String,
    pub threshold: f64,
    pub name: String,
}

impl FromStr for FlagDef {
    type Err = AppError;

    /// `COLUMN:THRESHOLD[:NAME]`; the name defaults to the column.
    fn from_str(s: &str) -> AppResult<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || AppError::usage(format!("flag {s:?} is not COLUMN:THRESHOLD[:NAME]"));
        let (column, threshold, name) = match parts.as_slice() {
            [c, t] => (*c, *t, *c),
            [c, t, n] => (*c, *t, *n),
            _ => return Err(bad()),
        };
        if column.is_empty() || name.is_empty() {
            return Err(bad());
        }
        let threshold: f64 = threshold.trim().parse().map_err(|_| bad())?;
        Ok(Self {
            column: column.to_string(),
            threshold,
            name: name.to_string(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    /// Coordinate columns. When absent, every column that is not the id,
    /// the outcome or a flag source.
    pub axis_columns: Option<Vec<String>>,
    pub outcome_column: Option<String>,
    /// Column holding point ids; rows are numbered from 1 otherwise.
    pub id_column: Option<String>,
    pub flags: Vec<FlagDef>,
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> AppResult<PointCloud> {
    let file = File::open(path)
        .map_err(|e| AppError::data(format!("cannot open {}: {e}", path.display())))?;
    ingest_reader(file, opts)
}

fn parse_cell(raw: &str, row: usize, column: &str) -> AppResult<f64> {
    if raw.is_empty() {
        return Err(AppError::at(row, column, "missing value"));
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(AppError::at(
            row,
            column,
            format!("{raw:?} is not a finite number"),
        )),
    }
}

pub fn ingest_reader<R: Read>(reader: R, opts: &IngestOptions) -> AppResult<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| AppError::data(format!("cannot read header row: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(AppError::data("missing header row"));
    }
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::data(format!("column {name:?} not found in header")))
    };

    let id_col = opts.id_column.as_deref().map(position).transpose()?;
    let outcome_col = opts.outcome_column.as_deref().map(position).transpose()?;
    let flag_cols = opts
        .flags
        .iter()
        .map(|f| position(&f.column))
        .collect::<AppResult<Vec<_>>>()?;
    let axis_cols: Vec<usize> = match &opts.axis_columns {
        Some(names) => names
            .iter()
            .map(|n| position(n))
            .collect::<AppResult<_>>()?,
        None => (0..headers.len())
            .filter(|i| Some(*i) != id_col && Some(*i) != outcome_col && !flag_cols.contains(i))
            .collect(),
    };
    if axis_cols.is_empty() {
        return Err(AppError::data("no axis columns selected"));
    }

    let mut coords = Vec::new();
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut outcome = Vec::new();
    let mut flag_values: Vec<Vec<u8>> = vec![Vec::new(); opts.flags.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| AppError::Data {
            message: format!("malformed record: {e}"),
            row: Some(row),
            column: None,
        })?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        for &c in &axis_cols {
            coords.push(parse_cell(cell(c), row, &headers[c])?);
        }
        if let Some(c) = outcome_col {
            outcome.push(parse_cell(cell(c), row, &headers[c])?);
        }
        for (k, (&c, def)) in flag_cols.iter().zip(&opts.flags).enumerate() {
            let v = parse_cell(cell(c), row, &headers[c])?;
            flag_values[k].push(u8::from(v > def.threshold));
        }
        let id = match id_col {
            Some(c) => {
                let id = cell(c).to_string();
                if id.is_empty() {
                    return Err(AppError::at(row, &headers[c], "missing id"));
                }
                id
            }
            None => row.to_string(),
        };
        if !seen.insert(id.clone()) {
            let column = id_col.map(|c| headers[c].clone()).unwrap_or_default();
            return Err(AppError::at(row, column, format!("duplicate id {id:?}")));
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(AppError::data("no data rows"));
    }

    let names = axis_cols.iter().map(|&c| headers[c].clone()).collect();
    let mut cloud = PointCloud::from_flat(ids.len(), axis_cols.len(), coords)?
        .with_axis_names(names)?
        .with_point_ids(ids)?;
    if outcome_col.is_some() {
        cloud = cloud.with_outcome(outcome)?;
    }
    for (def, values) in opts.flags.iter().zip(flag_values) {
        cloud = cloud.with_flag(def.name.clone(), values)?;
    }
    Ok(cloud)
}

/// Header of [`write_cloud_csv`] output: `id`, the axes, `Y` when there is
/// an outcome, then the flags.
pub fn cloud_header(cloud: &PointCloud) -> Vec<String> {
    let mut header = vec!["id".to_string()];
    header.extend(cloud.axis_names().iter().cloned());
    if cloud.outcome().is_some() {
        header.push("Y".into());
    }
    header.extend(cloud.flags().keys().cloned());
    header
}

pub fn write_cloud_csv<W: Write>(cloud: &PointCloud, out: W) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| AppError::internal(format!("writing csv: {e}"));
    w.write_record(cloud_header(cloud)).map_err(io)?;
    for i in 0..cloud.n_points() {
        let mut rec = vec![cloud.point_ids()[i].clone()];
        rec.extend(cloud.row(i).iter().map(f64::to_string));
        if let Some(y) = cloud.outcome() {
            rec.push(y[i].to_string());
        }
        rec.extend(cloud.flags().values().map(|f| f[i].to_string()));
        w.write_record(rec).map_err(io)?;
    }
    w.flush()
        .map_err(|e| AppError::internal(format!("writing csv: {e}")))
}

/// Ingest options that read back a file written by [`write_cloud_csv`].
pub fn options_for_written(cloud: &PointCloud) -> IngestOptions {
    IngestOptions {
        axis_columns: Some(cloud.axis_names().to_vec()),
        outcome_column: cloud.outcome().map(|_| "Y".to_string()),
        id_column: Some("id".into()),
        flags: cloud
            .flags()
            .keys()
            .map(|k| FlagDef {
                column: k.clone(),
                threshold: 0.5,
                name: k.clone(),
            })
            .collect(),
    }
}
