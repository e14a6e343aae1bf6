//! Configuration, cloud preparation and single-graph builds shared by the
//! command line and the explorer service.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ballmapper::layout::{DEFAULT_ITERATIONS, DEFAULT_LAYOUT_SEED};
use ballmapper::{
    aggregate, build_edges, compute_metrics, identity_order, layout_with, normalize_minmax,
    permutation, winsorize, BMGraph, CloudSource, CloudSpec, ColorSpec, CoverEngine, ExportContext,
    ExportFormat, FlagRule, GeneratedCloud, GraphDocument, GraphMetrics, LayoutOptions, PointCloud,
    SweepParameter, SweepSpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::ingest::{ingest_reader, FlagDef, IngestOptions};

pub const OUT_DIR_ENV: &str = "BALLMAPPER_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ballmapper-out";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Where a cloud comes from and how it is preprocessed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudInput {
    pub input: Option<PathBuf>,
    pub generator: Option<CloudSpec>,
    #[serde(flatten)]
    pub ingest: IngestOptions,
    pub normalize: bool,
    /// Lower and upper winsorizing quantiles.
    pub winsorize: Option<[f64; 2]>,
}

/// A loaded cloud before and after preprocessing.
#[derive(Debug, Clone)]
pub struct PreparedCloud {
    pub raw: PointCloud,
    pub cloud: PointCloud,
    pub warnings: Vec<String>,
    pub input_sha256: Option<String>,
}

impl CloudInput {
    pub fn validate(&self) -> AppResult<()> {
        match (&self.input, &self.generator) {
            (Some(_), Some(_)) => Err(AppError::usage(
                "give either an input file or a generator, not both",
            )),
            (None, None) => Err(AppError::usage("an input file or a generator is required")),
            (None, Some(g)) => {
                g.validate()?;
                if self.ingest.axis_columns.is_some()
                    || self.ingest.outcome_column.is_some()
                    || self.ingest.id_column.is_some()
                {
                    return Err(AppError::usage("column options apply to input files only"));
                }
                self.check_winsorize()
            }
            (Some(_), None) => self.check_winsorize(),
        }
    }

    fn check_winsorize(&self) -> AppResult<()> {
        if let Some([lo, hi]) = self.winsorize {
            if !((0.0..0.5).contains(&lo) && hi > 0.5 && hi <= 1.0) {
                return Err(AppError::usage(format!(
                    "winsorize quantiles must satisfy 0 <= lower < 0.5 < upper <= 1, got {lo},{hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn load(&self) -> AppResult<PreparedCloud> {
        self.validate()?;
        let (raw, hash) = match (&self.input, &self.generator) {
            (Some(path), _) => {
                let bytes = fs::read(path)
                    .map_err(|e| AppError::data(format!("cannot read {}: {e}", path.display())))?;
                let cloud = ingest_reader(&bytes[..], &self.ingest)?;
                (cloud, Some(sha256_hex(&bytes)))
            }
            (None, Some(spec)) => (generated_with_flags(spec, &self.ingest.flags)?, None),
            (None, None) => unreachable!("validated"),
        };
        let prepared = self.preprocess(raw)?;
        Ok(PreparedCloud {
            input_sha256: hash,
            ..prepared
        })
    }

    /// Loads from CSV text instead of the `input` path.
    pub fn load_csv_text(&self, text: &str) -> AppResult<PreparedCloud> {
        self.check_winsorize()?;
        let raw = ingest_reader(text.as_bytes(), &self.ingest)?;
        Ok(PreparedCloud {
            input_sha256: Some(sha256_hex(text.as_bytes())),
            ..self.preprocess(raw)?
        })
    }

    fn preprocess(&self, raw: PointCloud) -> AppResult<PreparedCloud> {
        let mut cloud = raw.clone();
        let mut warnings = Vec::new();
        if let Some([lo, hi]) = self.winsorize {
            cloud = winsorize(&cloud, lo, hi)?.cloud;
        }
        if self.normalize {
            let n = normalize_minmax(&cloud);
            for w in n.warnings() {
                log::warn!("{w}");
                warnings.push(w);
            }
            cloud = n.cloud;
        }
        Ok(PreparedCloud {
            raw,
            cloud,
            warnings,
            input_sha256: None,
        })
    }

    /// The sweep source for this input: a generator when the sweep varies
    /// the cloud itself, otherwise the prepared cloud.
    pub fn sweep_source(&self, parameter: SweepParameter) -> AppResult<CloudSource> {
        match (parameter, &self.generator) {
            (SweepParameter::Epsilon, _) => Ok(CloudSource::Fixed(self.load()?.cloud)),
            (_, Some(spec)) => {
                self.validate()?;
                if self.winsorize.is_some() {
                    return Err(AppError::usage(
                        "winsorize is not available for point or axis sweeps",
                    ));
                }
                Ok(CloudSource::Generator(GeneratedCloud {
                    spec: spec.clone(),
                    normalize: self.normalize,
                    flags: self.ingest.flags.iter().map(flag_rule).collect(),
                }))
            }
            (_, None) => Err(AppError::usage(format!(
                "a {} sweep needs a generator",
                parameter.name()
            ))),
        }
    }
}

fn flag_rule(def: &FlagDef) -> FlagRule {
    FlagRule {
        axis: def.column.clone(),
        threshold: def.threshold,
        name: def.name.clone(),
    }
}

fn generated_with_flags(spec: &CloudSpec, flags: &[FlagDef]) -> AppResult<PointCloud> {
    Ok(GeneratedCloud {
        spec: spec.clone(),
        normalize: false,
        flags: flags.iter().map(flag_rule).collect(),
    }
    .build()?)
}

/// Mean outcome when the cloud has one, otherwise no coloration.
pub fn resolve_color(cloud: &PointCloud, color: Option<&ColorSpec>) -> Option<ColorSpec> {
    match color {
        Some(c) => Some(c.clone()),
        None => cloud.outcome().map(|_| ColorSpec::mean_outcome()),
    }
}

/// One fully built graph with everything derived from it.
#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: BMGraph,
    pub colors: Vec<f64>,
    pub metrics: GraphMetrics,
    pub document: GraphDocument,
    pub color: Option<ColorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub epsilon: f64,
    pub color: Option<ColorSpec>,
    pub permutation_seed: Option<u64>,
    pub layout_seed: u64,
    pub layout_iterations: usize,
}

pub fn build_graph(
    cloud: &PointCloud,
    params: &GraphParams,
    cloud_seed: Option<u64>,
) -> AppResult<BuiltGraph> {
    let order = match params.permutation_seed {
        Some(seed) => permutation(cloud.n_points(), seed, 0),
        None => identity_order(cloud.n_points()),
    };
    let graph = build_edges(CoverEngine::new(cloud).cover(params.epsilon, &order)?);
    let color = resolve_color(cloud, params.color.as_ref());
    let colors = match &color {
        Some(spec) => aggregate(&graph, cloud, spec)?,
        None => vec![0.0; graph.n_balls()],
    };
    let metrics = compute_metrics(&graph, &colors)?;
    let layout = layout_with(
        &graph,
        &LayoutOptions {
            seed: params.layout_seed,
            iterations: params.layout_iterations,
            ..LayoutOptions::default()
        },
    );
    let ctx = ExportContext {
        color: color.clone(),
        cloud_seed,
        permutation_seed: params.permutation_seed,
    };
    let document = GraphDocument::new(&graph, cloud.point_ids(), &colors, &layout, &ctx)?;
    Ok(BuiltGraph {
        graph,
        colors,
        metrics,
        document,
        color,
    })
}

fn default_layout_seed() -> u64 {
    DEFAULT_LAYOUT_SEED
}

fn default_layout_iterations() -> usize {
    DEFAULT_ITERATIONS
}

fn default_formats() -> Vec<ExportFormat> {
    vec![ExportFormat::Json, ExportFormat::Dot, ExportFormat::Csv]
}

/// Everything `run` needs to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub cloud: CloudInput,
    pub epsilon: f64,
    #[serde(default)]
    pub color: Option<ColorSpec>,
    #[serde(default)]
    pub permutation_seed: Option<u64>,
    #[serde(default = "default_layout_seed")]
    pub layout_seed: u64,
    #[serde(default = "default_layout_iterations")]
    pub layout_iterations: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ExportFormat>,
}

impl RunConfig {
    pub fn validate(&self) -> AppResult<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AppError::usage(format!(
                "epsilon must be a positive finite number, got {}",
                self.epsilon
            )));
        }
        if self.formats.is_empty() {
            return Err(AppError::usage("at least one output format is required"));
        }
        self.cloud.validate()
    }

    pub fn graph_params(&self) -> GraphParams {
        GraphParams {
            epsilon: self.epsilon,
            color: self.color.clone(),
            permutation_seed: self.permutation_seed,
            layout_seed: self.layout_seed,
            layout_iterations: self.layout_iterations,
        }
    }
}

fn default_repetitions() -> usize {
    SweepSpec::DEFAULT_REPETITIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub cloud: CloudInput,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Radius for point and axis sweeps.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub color: Option<ColorSpec>,
    pub output_dir: PathBuf,
}

impl SweepConfig {
    pub fn to_spec(&self) -> AppResult<SweepSpec> {
        let source = self.cloud.sweep_source(self.parameter)?;
        let color = match &source {
            CloudSource::Fixed(c) => resolve_color(c, self.color.as_ref()),
            CloudSource::Generator(_) => Some(self.color.clone().unwrap_or_default()),
        };
        let spec = SweepSpec {
            parameter: self.parameter,
            values: self.values.clone(),
            repetitions: self.repetitions,
            base_seed: self.seed,
            source,
            epsilon: self.epsilon,
            color,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub input_sha256: Option<String>,
    /// Output file name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, input_sha256: Option<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            input_sha256,
            outputs: BTreeMap::new(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn read(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            AppError::usage(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| AppError::usage(format!("malformed manifest {}: {e}", path.display())))
    }

    /// The stored config, after checking the manifest belongs to `command`.
    pub fn config_for<T: for<'de> Deserialize<'de>>(&self, command: &str) -> AppResult<T> {
        if self.command != command {
            return Err(AppError::usage(format!(
                "manifest was written by {:?}, not {command:?}",
                self.command
            )));
        }
        serde_json::from_value(self.config.clone())
            .map_err(|e| AppError::usage(format!("manifest config does not parse: {e}")))
    }

    /// Fails when the input file no longer matches the recorded hash.
    pub fn check_input(&self, prepared: &PreparedCloud) -> AppResult<()> {
        match (&self.input_sha256, &prepared.input_sha256) {
            (Some(want), Some(got)) if want != got => Err(AppError::data(format!(
                "input file changed since the manifest was written (sha256 {got}, expected {want})"
            ))),
            _ => Ok(()),
        }
    }
}

/// Collects output files and writes them together with a manifest.
pub struct OutputWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl OutputWriter {
    pub fn new(dir: &Path, manifest: Manifest) -> AppResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| AppError::internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> AppResult<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| AppError::internal(format!("cannot write {}: {e}", path.display())))?;
        self.manifest
            .outputs
            .insert(name.to_string(), sha256_hex(contents));
        Ok(path)
    }

    pub fn finish(self) -> AppResult<PathBuf> {
        let name = Manifest::file_name(&self.manifest.command);
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| AppError::internal(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator_input() -> CloudInput {
        CloudInput {
            generator: Some(CloudSpec::five_part(100, 3, 1)),
            ..Default::default()
        }
    }

    #[test]
    fn exactly_one_source() {
        assert!(CloudInput::default().validate().is_err());
        let both = CloudInput {
            input: Some("x.csv".into()),
            ..generator_input()
        };
        assert!(both.validate().is_err());
        assert!(generator_input().validate().is_ok());
    }

    #[test]
    fn run_config_round_trips_through_json() {
        let cfg = RunConfig {
            cloud: generator_input(),
            epsilon: 2.0,
            color: Some(ColorSpec::proportion("x3")),
            permutation_seed: Some(4),
            layout_seed: 123,
            layout_iterations: 50,
            output_dir: "out".into(),
            formats: default_formats(),
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
        assert!(RunConfig {
            epsilon: 0.0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            epsilon: f64::NAN,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn graph_build_is_deterministic() {
        let cloud = generator_input().load().unwrap().cloud;
        let params = GraphParams {
            epsilon: 1.5,
            color: None,
            permutation_seed: Some(9),
            layout_seed: 123,
            layout_iterations: 100,
        };
        let a = build_graph(&cloud, &params, Some(1)).unwrap();
        let b = build_graph(&cloud, &params, Some(1)).unwrap();
        assert_eq!(a.document.to_json(), b.document.to_json());
        assert_eq!(a.color, Some(ColorSpec::mean_outcome()));
    }

    #[test]
    fn point_sweeps_need_generators() {
        let file = CloudInput {
            input: Some("x.csv".into()),
            ..Default::default()
        };
        assert!(file.sweep_source(SweepParameter::NPoints).is_err());
        assert!(matches!(
            generator_input()
                .sweep_source(SweepParameter::NAxes)
                .unwrap(),
            CloudSource::Generator(_)
        ));
    }
}
