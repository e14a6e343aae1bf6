//! Command-line interface.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use ballmapper::stats::DEFAULT_RESTARTS;
use ballmapper::{
    correlations, elbow_series, kmeans, summarize_cloud, sweep, CloudKind, CloudSpec,
    ColorFunction, ColorSource, ColorSpec, ExportFormat, GraphDocument, SweepParameter, SweepSpec,
};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{AppError, AppResult};
use crate::ingest::{write_cloud_csv, FlagDef, IngestOptions};
use crate::pipeline::{
    build_graph, CloudInput, Manifest, OutputWriter, RunConfig, SweepConfig, DEFAULT_OUT_DIR,
    OUT_DIR_ENV,
};
use crate::server::{serve, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "ballmapper",
    version,
    about = "Ball Mapper graphs of point clouds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cloud to CSV.
    Generate(GenerateArgs),
    /// Build one graph end to end.
    Run(RunArgs),
    /// Summarize many permuted graphs across a parameter grid.
    Sweep(SweepArgs),
    /// Summary statistics and correlations.
    Stats(TableArgs),
    /// k-means clusters and elbow series.
    Kmeans(KmeansArgs),
    /// Start the explorer service.
    Serve(ServeArgs),
    /// Convert a graph JSON document to another format.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GeneratorArgs {
    /// Synthetic cloud kind: noise, five-part or uniform.
    #[arg(long, value_name = "KIND")]
    pub generator: Option<CloudKind>,
    #[arg(long, default_value_t = 500)]
    pub n_points: usize,
    #[arg(long, default_value_t = 5)]
    pub n_axes: usize,
    #[arg(long, default_value_t = 0)]
    pub cloud_seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.1)]
    pub outcome_noise_sd: f64,
}

impl GeneratorArgs {
    fn spec(&self) -> Option<CloudSpec> {
        self.generator.map(|kind| CloudSpec {
            kind,
            n_points: self.n_points,
            n_axes: self.n_axes,
            seed: self.cloud_seed,
            noise_sd: self.noise_sd,
            outcome_noise_sd: self.outcome_noise_sd,
            ..CloudSpec::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct CloudArgs {
    /// CSV file with a header row.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Comma-separated coordinate columns (default: all other columns).
    #[arg(long, value_delimiter = ',')]
    pub axis_columns: Option<Vec<String>>,
    #[arg(long)]
    pub outcome_column: Option<String>,
    #[arg(long)]
    pub id_column: Option<String>,
    /// Binary flag COLUMN:THRESHOLD[:NAME], 1 where the column exceeds the
    /// threshold. Repeatable.
    #[arg(long = "flag", value_name = "DEF")]
    pub flags: Vec<FlagDef>,
    /// Rescale every axis to [0, 1].
    #[arg(long)]
    pub normalize: bool,
    /// Winsorizing quantiles LOWER,UPPER.
    #[arg(long, value_delimiter = ',', num_args = 2, value_name = "Q")]
    pub winsorize: Option<Vec<f64>>,
}

impl CloudArgs {
    pub fn to_input(&self) -> CloudInput {
        CloudInput {
            input: self.input.clone(),
            generator: self.generator.spec(),
            ingest: IngestOptions {
                axis_columns: self.axis_columns.clone(),
                outcome_column: self.outcome_column.clone(),
                id_column: self.id_column.clone(),
                flags: self.flags.clone(),
            },
            normalize: self.normalize,
            winsorize: self.winsorize.as_ref().map(|w| [w[0], w[1]]),
        }
    }

    fn given(&self) -> bool {
        self.input.is_some() || self.generator.generator.is_some()
    }
}

#[derive(Debug, Clone, Args)]
pub struct ColorArgs {
    /// mean, proportion, stddev, min, max or range.
    #[arg(long)]
    pub color_function: Option<ColorFunction>,
    /// outcome, axis:NAME or flag:NAME.
    #[arg(long)]
    pub color_source: Option<ColorSource>,
}

impl ColorArgs {
    fn spec(&self) -> Option<ColorSpec> {
        match (self.color_function, &self.color_source) {
            (None, None) => None,
            (f, s) => {
                let source = s.clone().unwrap_or_default();
                let function = f.unwrap_or(if matches!(source, ColorSource::Flag(_)) {
                    ColorFunction::Proportion
                } else {
                    ColorFunction::Mean
                });
                Some(ColorSpec::new(function, source))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Flag definitions on generated axes, as for `run`.
    #[arg(long = "flag", value_name = "DEF")]
    pub flags: Vec<FlagDef>,
    /// Omit the outcome column.
    #[arg(long)]
    pub no_outcome: bool,
    /// Output CSV (default: OUTPUT_DIR/cloud.csv).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub color: ColorArgs,
    /// Scan points in a seeded random order instead of file order.
    #[arg(long)]
    pub permutation_seed: Option<u64>,
    #[arg(long, default_value_t = ballmapper::layout::DEFAULT_LAYOUT_SEED)]
    pub layout_seed: u64,
    #[arg(long, default_value_t = ballmapper::layout::DEFAULT_ITERATIONS)]
    pub layout_iterations: usize,
    /// Comma-separated graph formats: json, dot, csv.
    #[arg(long, value_delimiter = ',', default_value = "json,dot,csv")]
    pub formats: Vec<ExportFormat>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Repeat the run recorded in a manifest.
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,
    /// epsilon, n-points or n-axes.
    #[arg(long, default_value = "epsilon")]
    pub parameter: Option<SweepParameter>,
    /// Comma-separated, strictly increasing parameter values.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<f64>,
    #[arg(long, default_value_t = SweepSpec::DEFAULT_REPETITIONS)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Radius for n-points and n-axes sweeps.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub color: ColorArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,
    #[arg(long, short)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest k in the elbow series; 0 skips it.
    #[arg(long, default_value_t = 10)]
    pub elbow_max: usize,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub cloud: CloudArgs,
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Graph JSON written by `run`.
    #[arg(long, value_name = "PATH")]
    pub graph: PathBuf,
    /// json, dot or csv.
    #[arg(long)]
    pub format: String,
    /// Output file (default: stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Explicit flag, then the environment, then the built-in default.
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn print_json(value: &serde_json::Value) -> AppResult<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{value}").map_err(|e| AppError::internal(e.to_string()))
}

fn csv_bytes<S: Serialize>(
    header: &[String],
    rows: impl IntoIterator<Item = S>,
) -> AppResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| AppError::internal(format!("writing csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| AppError::internal(e.to_string()))
}

pub fn execute(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Stats(a) => stats(a),
        Command::Kmeans(a) => run_kmeans(a),
        Command::Serve(a) => run_serve(a),
        Command::Export(a) => export(a),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GenerateConfig {
    generator: CloudSpec,
    flags: Vec<FlagDef>,
    outcome: bool,
}

fn generate(a: GenerateArgs) -> AppResult<()> {
    let spec = a
        .generator
        .spec()
        .ok_or_else(|| AppError::usage("--generator is required"))?;
    spec.validate()?;
    let input = CloudInput {
        generator: Some(spec.clone()),
        ingest: IngestOptions {
            flags: a.flags.clone(),
            ..IngestOptions::default()
        },
        ..CloudInput::default()
    };
    let mut cloud = input.load()?.raw;
    if a.no_outcome {
        cloud = ballmapper::PointCloud::from_flat(
            cloud.n_points(),
            cloud.n_axes(),
            cloud.coords().to_vec(),
        )?
        .with_axis_names(cloud.axis_names().to_vec())?
        .with_point_ids(cloud.point_ids().to_vec())?;
        for def in &a.flags {
            let axis = cloud.axis_index(&def.column).expect("validated by load");
            cloud = ballmapper::attach_flag(&cloud, axis, def.threshold, &def.name)?;
        }
    }
    let mut buf = Vec::new();
    write_cloud_csv(&cloud, &mut buf)?;
    let config = GenerateConfig {
        generator: spec,
        flags: a.flags,
        outcome: !a.no_outcome,
    };
    let (dir, name) = match &a.output {
        Some(p) => (
            p.parent()
                .filter(|d| !d.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| ".".into()),
            p.file_name()
                .ok_or_else(|| AppError::usage("output must name a file"))?
                .to_string_lossy()
                .into_owned(),
        ),
        None => (output_dir(a.output_dir.as_deref()), "cloud.csv".to_string()),
    };
    let mut out = OutputWriter::new(&dir, Manifest::new("generate", &config, None))?;
    let path = out.write(&name, &buf)?;
    out.finish()?;
    print_json(&json!({ "cloud": path, "n_points": cloud.n_points(), "n_axes": cloud.n_axes() }))
}

fn run(a: RunArgs) -> AppResult<()> {
    let (config, recorded) = match &a.manifest {
        Some(path) => {
            let m = Manifest::read(path)?;
            let mut cfg: RunConfig = m.config_for("run")?;
            if let Some(dir) = &a.output_dir {
                cfg.output_dir = dir.clone();
            }
            (cfg, Some(m))
        }
        None => {
            if !a.cloud.given() {
                return Err(AppError::usage(
                    "run needs --input, --generator or --manifest",
                ));
            }
            let epsilon = a
                .epsilon
                .ok_or_else(|| AppError::usage("--epsilon is required"))?;
            let cfg = RunConfig {
                cloud: a.cloud.to_input(),
                epsilon,
                color: a.color.spec(),
                permutation_seed: a.permutation_seed,
                layout_seed: a.layout_seed,
                layout_iterations: a.layout_iterations,
                output_dir: output_dir(a.output_dir.as_deref()),
                formats: a.formats.clone(),
            };
            (cfg, None)
        }
    };
    config.validate()?;
    let prepared = config.cloud.load()?;
    if let Some(m) = &recorded {
        m.check_input(&prepared)?;
    }
    let cloud_seed = config.cloud.generator.as_ref().map(|g| g.seed);
    let built = build_graph(&prepared.cloud, &config.graph_params(), cloud_seed)?;

    let manifest = Manifest::new("run", &config, prepared.input_sha256.clone());
    let mut out = OutputWriter::new(&config.output_dir, manifest)?;
    for format in &config.formats {
        let name = match format {
            ExportFormat::Json => "graph.json",
            ExportFormat::Dot => "graph.dot",
            ExportFormat::Csv => "point_to_ball.csv",
        };
        out.write(name, built.document.render(*format).as_bytes())?;
    }
    let mut metrics = serde_json::to_string_pretty(&built.metrics).expect("metrics serialize");
    metrics.push('\n');
    out.write("metrics.json", metrics.as_bytes())?;
    let manifest_path = out.finish()?;
    print_json(&json!({
        "output_dir": config.output_dir,
        "manifest": manifest_path,
        "metrics": built.metrics,
        "warnings": prepared.warnings,
    }))
}

fn run_sweep(a: SweepArgs) -> AppResult<()> {
    let config = match &a.manifest {
        Some(path) => {
            let mut cfg: SweepConfig = Manifest::read(path)?.config_for("sweep")?;
            if let Some(dir) = &a.output_dir {
                cfg.output_dir = dir.clone();
            }
            cfg
        }
        None => {
            if !a.cloud.given() {
                return Err(AppError::usage(
                    "sweep needs --input, --generator or --manifest",
                ));
            }
            if a.values.is_empty() {
                return Err(AppError::usage("--values is required"));
            }
            SweepConfig {
                cloud: a.cloud.to_input(),
                parameter: a.parameter.unwrap_or(SweepParameter::Epsilon),
                values: a.values.clone(),
                repetitions: a.repetitions,
                seed: a.seed,
                epsilon: a.epsilon,
                color: a.color.spec(),
                output_dir: output_dir(a.output_dir.as_deref()),
            }
        }
    };
    let input_sha = config
        .cloud
        .input
        .as_ref()
        .map(|_| config.cloud.load())
        .transpose()?
        .and_then(|p| p.input_sha256);
    let spec = config.to_spec()?;
    let summary = sweep(&spec)?;

    let mut csv = Vec::new();
    summary
        .write_csv(&mut csv)
        .map_err(|e| AppError::internal(e.to_string()))?;
    let mut plot = serde_json::to_string_pretty(&summary.plot_series()).expect("plot serializes");
    plot.push('\n');
    let mut out = OutputWriter::new(
        &config.output_dir,
        Manifest::new("sweep", &config, input_sha),
    )?;
    let csv_path = out.write("sweep.csv", &csv)?;
    let plot_path = out.write("sweep_plot.json", plot.as_bytes())?;
    let manifest = out.finish()?;
    print_json(&json!({
        "summary": csv_path,
        "plot": plot_path,
        "manifest": manifest,
        "rows": summary.rows.len(),
    }))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn stats(a: TableArgs) -> AppResult<()> {
    let input = a.cloud.to_input();
    let prepared = input.load()?;
    let table = summarize_cloud(&prepared.cloud)?;
    let header: Vec<String> = [
        "variable", "mean", "sd", "min", "q25", "q50", "q75", "max", "skewness", "kurtosis",
    ]
    .map(String::from)
    .to_vec();
    let summary = csv_bytes(
        &header,
        table.rows.iter().map(|r| {
            (
                &r.name,
                r.mean.to_string(),
                r.sd.to_string(),
                r.min.to_string(),
                r.q25.to_string(),
                r.q50.to_string(),
                r.q75.to_string(),
                r.max.to_string(),
                opt(r.skewness),
                opt(r.kurtosis),
            )
        }),
    )?;
    let corr = correlations(&prepared.cloud)?;
    let mut header = vec!["variable".to_string()];
    header.extend(corr.names.iter().cloned());
    let rows: Vec<Vec<String>> = corr
        .names
        .iter()
        .zip(&corr.values)
        .map(|(n, row)| {
            std::iter::once(n.clone())
                .chain(row.iter().map(f64::to_string))
                .collect()
        })
        .collect();
    let corr_csv = csv_bytes(&header, rows)?;

    let dir = output_dir(a.output_dir.as_deref());
    let mut out = OutputWriter::new(
        &dir,
        Manifest::new("stats", &input, prepared.input_sha256.clone()),
    )?;
    let s = out.write("summary.csv", &summary)?;
    let c = out.write("correlations.csv", &corr_csv)?;
    out.finish()?;
    print_json(&json!({ "summary": s, "correlations": c }))
}

#[derive(Debug, Serialize)]
struct KmeansConfig<'a> {
    cloud: &'a CloudInput,
    k: usize,
    restarts: usize,
    seed: u64,
    elbow_max: usize,
}

fn run_kmeans(a: KmeansArgs) -> AppResult<()> {
    let input = a.cloud.to_input();
    let prepared = input.load()?;
    let cloud = &prepared.cloud;
    let result = kmeans(cloud, a.k, a.restarts, a.seed)?;

    let mut header: Vec<String> = ["cluster", "size", "outcome_mean"]
        .map(String::from)
        .to_vec();
    header.extend(cloud.axis_names().iter().map(|n| format!("center_{n}")));
    let clusters = csv_bytes(
        &header,
        result.clusters.iter().map(|c| {
            let mut row = vec![c.label.to_string(), c.size.to_string(), opt(c.outcome_mean)];
            row.extend(c.center.iter().map(f64::to_string));
            row
        }),
    )?;
    let assignments = csv_bytes(
        &["point_id".to_string(), "cluster".to_string()],
        cloud.point_ids().iter().zip(&result.assignments),
    )?;

    let dir = output_dir(a.output_dir.as_deref());
    let config = KmeansConfig {
        cloud: &input,
        k: a.k,
        restarts: a.restarts,
        seed: a.seed,
        elbow_max: a.elbow_max,
    };
    let mut out = OutputWriter::new(
        &dir,
        Manifest::new("kmeans", &config, prepared.input_sha256.clone()),
    )?;
    let c = out.write("kmeans_clusters.csv", &clusters)?;
    let p = out.write("kmeans_assignments.csv", &assignments)?;
    let mut elbow_path = None;
    if a.elbow_max > 0 {
        let wss = elbow_series(cloud, a.elbow_max.min(cloud.n_points()), a.restarts, a.seed)?;
        let elbow = csv_bytes(
            &["k".to_string(), "wss".to_string()],
            wss.iter().enumerate().map(|(i, w)| (i + 1, *w)),
        )?;
        elbow_path = Some(out.write("elbow.csv", &elbow)?);
    }
    out.finish()?;
    print_json(&json!({
        "clusters": c,
        "assignments": p,
        "elbow": elbow_path,
        "wss": result.wss,
    }))
}

fn run_serve(a: ServeArgs) -> AppResult<()> {
    let state = AppState::new(Some(a.bind));
    if a.cloud.given() {
        let input = a.cloud.to_input();
        let prepared = input.load()?;
        state.load(input, prepared);
    }
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::internal(e.to_string()))?;
    eprintln!("explorer service on http://{}", a.bind);
    rt.block_on(serve(a.bind, state))
        .map_err(|e| AppError::internal(format!("server failed: {e}")))
}

fn export(a: ExportArgs) -> AppResult<()> {
    let format: ExportFormat = a.format.parse()?;
    let text = std::fs::read_to_string(&a.graph)
        .map_err(|e| AppError::data(format!("cannot read {}: {e}", a.graph.display())))?;
    let doc = GraphDocument::from_json(&text)?;
    let rendered = doc.render(format);
    match &a.output {
        Some(p) => std::fs::write(p, rendered)
            .map_err(|e| AppError::internal(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(rendered.as_bytes())
                .map_err(|e| AppError::internal(e.to_string()))
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Failures print one JSON line to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = AppError::usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
