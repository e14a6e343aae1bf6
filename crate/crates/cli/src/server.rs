//! Local HTTP service backing the explorer UI.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use ballmapper::coloration::ball_spreads;
use ballmapper::export::round6;
use ballmapper::layout::{DEFAULT_ITERATIONS, DEFAULT_LAYOUT_SEED};
use ballmapper::{
    aggregate_values, color_scale, sweep, CloudSource, ColorFunction, ColorSource, ColorSpec,
    SweepParameter, SweepSpec, SweepSummary, SCHEMA_VERSION,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::AppError;
use crate::pipeline::{
    build_graph, sha256_hex, BuiltGraph, CloudInput, GraphParams, PreparedCloud,
};

struct LoadedCloud {
    prepared: PreparedCloud,
    input: CloudInput,
    hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct GraphKey {
    cloud: String,
    epsilon: u64,
    permutation_seed: Option<u64>,
    layout_seed: u64,
    color: String,
}

enum Job {
    Running,
    Done(Box<SweepSummary>),
    Failed(AppError),
}

struct Shared {
    cloud: RwLock<Option<Arc<LoadedCloud>>>,
    graphs: Mutex<HashMap<GraphKey, Arc<BuiltGraph>>>,
    last_graph: Mutex<Option<GraphKey>>,
    jobs: Mutex<HashMap<u64, Job>>,
    next_job: AtomicU64,
    bind: Option<SocketAddr>,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(bind: Option<SocketAddr>) -> Self {
        AppState(Arc::new(Shared {
            cloud: RwLock::new(None),
            graphs: Mutex::new(HashMap::new()),
            last_graph: Mutex::new(None),
            jobs: Mutex::new(HashMap::new()),
            next_job: AtomicU64::new(1),
            bind,
        }))
    }

    /// Replaces the loaded cloud.
    pub fn load(&self, input: CloudInput, prepared: PreparedCloud) {
        let hash = sha256_hex(&serde_json::to_vec(&prepared.cloud).expect("cloud serializes"));
        let mut slot = self.0.cloud.write().expect("cloud lock");
        let changed = slot.as_ref().is_none_or(|c| c.hash != hash);
        *slot = Some(Arc::new(LoadedCloud {
            prepared,
            input,
            hash,
        }));
        if changed {
            self.0.graphs.lock().expect("graph lock").clear();
            *self.0.last_graph.lock().expect("last graph lock") = None;
        }
    }

    fn cloud(&self) -> Result<Arc<LoadedCloud>, ApiError> {
        self.0
            .cloud
            .read()
            .expect("cloud lock")
            .clone()
            .ok_or_else(|| ApiError(StatusCode::CONFLICT, AppError::usage("no cloud loaded")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/cloud", post(upload_cloud))
        .route("/api/graph", get(get_graph))
        .route("/api/ball/{id}", get(get_ball))
        .route("/api/axes", get(get_axes))
        .route("/api/sweep", get(start_sweep))
        .route("/api/sweep/{id}", get(sweep_status))
        .route("/api/meta", get(get_meta))
        .with_state(state)
}

pub async fn serve(bind: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

struct ApiError(StatusCode, AppError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1.to_json())).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, AppError::usage(message))
}

fn not_found(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, AppError::usage(message))
}

type ApiResult<T> = Result<T, ApiError>;
type Params = Query<BTreeMap<String, String>>;

fn parse_param<T: std::str::FromStr>(
    q: &BTreeMap<String, String>,
    key: &str,
) -> ApiResult<Option<T>> {
    q.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| bad_request(format!("invalid {key} {v:?}")))
        })
        .transpose()
}

fn color_from_query(q: &BTreeMap<String, String>) -> ApiResult<Option<ColorSpec>> {
    let function = q
        .get("color")
        .map(|s| s.parse::<ColorFunction>())
        .transpose()
        .map_err(|e| bad_request(e.to_string()))?;
    let source = q
        .get("source")
        .map(|s| s.parse::<ColorSource>())
        .transpose()
        .map_err(|e| bad_request(e.to_string()))?;
    let spec = match (q.get("flag"), function, source) {
        (Some(_), _, Some(_)) => return Err(bad_request("give flag or source, not both")),
        (Some(flag), f, None) => Some(ColorSpec::new(
            f.unwrap_or(ColorFunction::Proportion),
            ColorSource::Flag(flag.clone()),
        )),
        (None, None, None) => None,
        (None, f, s) => Some(ColorSpec::new(f.unwrap_or_default(), s.unwrap_or_default())),
    };
    Ok(spec)
}

fn graph_params(q: &BTreeMap<String, String>) -> ApiResult<Option<GraphParams>> {
    let Some(epsilon) = parse_param::<f64>(q, "epsilon")? else {
        return Ok(None);
    };
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(bad_request(format!(
            "epsilon must be a positive finite number, got {epsilon}"
        )));
    }
    Ok(Some(GraphParams {
        epsilon,
        color: color_from_query(q)?,
        permutation_seed: parse_param(q, "seed")?,
        layout_seed: parse_param(q, "layout_seed")?.unwrap_or(DEFAULT_LAYOUT_SEED),
        layout_iterations: DEFAULT_ITERATIONS,
    }))
}

fn key_for(cloud: &LoadedCloud, p: &GraphParams) -> GraphKey {
    GraphKey {
        cloud: cloud.hash.clone(),
        epsilon: p.epsilon.to_bits(),
        permutation_seed: p.permutation_seed,
        layout_seed: p.layout_seed,
        color: serde_json::to_string(&p.color).expect("color serializes"),
    }
}

async fn built(
    state: &AppState,
    cloud: Arc<LoadedCloud>,
    params: GraphParams,
) -> ApiResult<(Arc<BuiltGraph>, bool)> {
    let key = key_for(&cloud, &params);
    let cached = state
        .0
        .graphs
        .lock()
        .expect("graph lock")
        .get(&key)
        .cloned();
    let (graph, hit) = match cached {
        Some(g) => (g, true),
        None => {
            let c = cloud.clone();
            let g = tokio::task::spawn_blocking(move || {
                let seed = c.input.generator.as_ref().map(|g| g.seed);
                build_graph(&c.prepared.cloud, &params, seed)
            })
            .await
            .map_err(|e| {
                ApiError(
                    StatusCode::INTERNAL_SERVER_ERROR,
                    AppError::internal(e.to_string()),
                )
            })?
            .map_err(|e| match e {
                AppError::Internal(_) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, e),
                _ => ApiError(StatusCode::BAD_REQUEST, e),
            })?;
            let g = Arc::new(g);
            state
                .0
                .graphs
                .lock()
                .expect("graph lock")
                .insert(key.clone(), g.clone());
            (g, false)
        }
    };
    *state.0.last_graph.lock().expect("last graph lock") = Some(key);
    Ok((graph, hit))
}

/// The graph named by the query, or the most recent one when no epsilon is
/// given.
async fn resolve_graph(
    state: &AppState,
    q: &BTreeMap<String, String>,
) -> ApiResult<(Arc<LoadedCloud>, Arc<BuiltGraph>)> {
    let params = graph_params(q)?;
    let cloud = state.cloud()?;
    match params {
        Some(p) => Ok((cloud.clone(), built(state, cloud, p).await?.0)),
        None => {
            let key = state.0.last_graph.lock().expect("last graph lock").clone();
            let graph = key
                .and_then(|k| state.0.graphs.lock().expect("graph lock").get(&k).cloned())
                .ok_or_else(|| not_found("no graph built yet; pass epsilon"))?;
            Ok((cloud, graph))
        }
    }
}

#[derive(Debug, Deserialize)]
struct CloudUpload {
    csv: Option<String>,
    #[serde(flatten)]
    input: CloudInput,
}

async fn upload_cloud(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let upload: CloudUpload = serde_json::from_slice(&body)
        .map_err(|e| bad_request(format!("malformed request body: {e}")))?;
    if upload.input.input.is_some() {
        return Err(bad_request(
            "file paths are not accepted; send csv text or a generator",
        ));
    }
    let input = upload.input;
    let csv = upload.csv;
    let result = tokio::task::spawn_blocking({
        let input = input.clone();
        move || match (&csv, &input.generator) {
            (Some(_), Some(_)) => Err(AppError::usage("send csv or generator, not both")),
            (Some(text), None) => input.load_csv_text(text),
            (None, Some(_)) => input.load(),
            (None, None) => Err(AppError::usage("send csv or generator")),
        }
    })
    .await
    .map_err(|e| {
        ApiError(
            StatusCode::INTERNAL_SERVER_ERROR,
            AppError::internal(e.to_string()),
        )
    })?;
    let prepared = result.map_err(|e| match e {
        AppError::Data { .. } => ApiError(StatusCode::UNPROCESSABLE_ENTITY, e),
        AppError::Usage(_) => ApiError(StatusCode::BAD_REQUEST, e),
        AppError::Internal(_) => ApiError(StatusCode::INTERNAL_SERVER_ERROR, e),
    })?;
    state.load(input, prepared);
    Ok(Json(cloud_summary(&*state.cloud()?)))
}

fn cloud_summary(c: &LoadedCloud) -> Value {
    let cloud = &c.prepared.cloud;
    json!({
        "hash": c.hash,
        "n_points": cloud.n_points(),
        "n_axes": cloud.n_axes(),
        "axis_names": cloud.axis_names(),
        "has_outcome": cloud.outcome().is_some(),
        "flags": cloud.flags().keys().collect::<Vec<_>>(),
        "normalized": c.input.normalize,
        "warnings": c.prepared.warnings,
    })
}

async fn get_graph(State(state): State<AppState>, Query(q): Params) -> ApiResult<Response> {
    let params = graph_params(&q)?.ok_or_else(|| bad_request("epsilon is required"))?;
    let cloud = state.cloud()?;
    let (graph, hit) = built(&state, cloud, params).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "application/json"),
            (
                header::HeaderName::from_static("x-graph-cache"),
                if hit { "hit" } else { "miss" },
            ),
        ],
        graph.document.to_json(),
    )
        .into_response())
}

async fn get_ball(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Params,
) -> ApiResult<Json<Value>> {
    let id: usize = id
        .parse()
        .map_err(|_| bad_request(format!("invalid ball id {id:?}")))?;
    let (loaded, built) = resolve_graph(&state, &q).await?;
    let ball = built.graph.cover.ball(id).ok_or_else(|| {
        not_found(format!(
            "no ball {id}; the graph has {}",
            built.graph.n_balls()
        ))
    })?;
    let raw = &loaded.prepared.raw;
    let members: Vec<Value> = ball
        .members
        .iter()
        .map(|&m| {
            json!({
                "id": raw.point_ids()[m],
                "coordinates": raw.row(m),
                "outcome": raw.outcome().map(|y| y[m]),
                "flags": raw.flags().iter().map(|(k, v)| (k.clone(), v[m])).collect::<BTreeMap<_, _>>(),
            })
        })
        .collect();
    let outcome = raw.outcome().map(|y| {
        let s = ball_spreads(&built.graph, y)[id - 1];
        json!({ "mean": s.mean, "sd": s.sd, "mean_to_sd": s.mean_to_sd })
    });
    let proportions: BTreeMap<&String, f64> = raw
        .flags()
        .iter()
        .map(|(k, v)| {
            let ones = ball.members.iter().filter(|&&m| v[m] == 1).count();
            (k, ones as f64 / ball.size() as f64)
        })
        .collect();
    Ok(Json(json!({
        "id": ball.id,
        "size": ball.size(),
        "landmark": raw.point_ids()[ball.landmark],
        "value": built.colors[id - 1],
        "color": built.color,
        "axis_names": raw.axis_names(),
        "members": members,
        "outcome": outcome,
        "flag_proportions": proportions,
    })))
}

async fn get_axes(State(state): State<AppState>, Query(q): Params) -> ApiResult<Json<Value>> {
    let cloud = state.cloud()?;
    let names = cloud.prepared.cloud.axis_names().to_vec();
    let graph = match resolve_graph(&state, &q).await {
        Ok((_, g)) => Some(g),
        Err(ApiError(StatusCode::NOT_FOUND, _)) if !q.contains_key("epsilon") => None,
        Err(e) => return Err(e),
    };
    let series = graph.map(|g| {
        let pc = &cloud.prepared.cloud;
        names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let values = aggregate_values(&g.graph, &pc.column(j), ColorFunction::Mean);
                let rounded: Vec<f64> = values.iter().map(|&v| round6(v)).collect();
                let (scale, hex) = color_scale(&rounded);
                (
                    name.clone(),
                    json!({ "values": rounded, "hex": hex, "domain": [scale.low, scale.high] }),
                )
            })
            .collect::<BTreeMap<_, _>>()
    });
    Ok(Json(json!({ "axis_names": names, "series": series })))
}

async fn start_sweep(
    State(state): State<AppState>,
    Query(q): Params,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let parameter: SweepParameter =
        parse_param(&q, "parameter")?.unwrap_or(SweepParameter::Epsilon);
    let values = q
        .get("values")
        .ok_or_else(|| bad_request("values is required"))?
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad_request(format!("invalid value {v:?}")))
        })
        .collect::<ApiResult<Vec<_>>>()?;
    let repetitions = parse_param(&q, "repetitions")?.unwrap_or(SweepSpec::DEFAULT_REPETITIONS);
    let base_seed = parse_param(&q, "seed")?.unwrap_or(0);
    let epsilon = parse_param(&q, "epsilon")?;
    let color = color_from_query(&q)?;
    let cloud = state.cloud()?;
    let source = match parameter {
        SweepParameter::Epsilon => CloudSource::Fixed(cloud.prepared.cloud.clone()),
        _ => cloud
            .input
            .sweep_source(parameter)
            .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e))?,
    };
    let color = match &source {
        CloudSource::Fixed(c) => crate::pipeline::resolve_color(c, color.as_ref()),
        CloudSource::Generator(_) => Some(color.unwrap_or_default()),
    };
    let spec = SweepSpec {
        parameter,
        values,
        repetitions,
        base_seed,
        source,
        epsilon,
        color,
    };
    spec.validate()
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.into()))?;

    let id = state.0.next_job.fetch_add(1, Ordering::Relaxed);
    state
        .0
        .jobs
        .lock()
        .expect("job lock")
        .insert(id, Job::Running);
    let st = state.clone();
    tokio::spawn(async move {
        let outcome = tokio::task::spawn_blocking(move || sweep(&spec)).await;
        let job = match outcome {
            Ok(Ok(summary)) => Job::Done(Box::new(summary)),
            Ok(Err(e)) => Job::Failed(e.into()),
            Err(e) => Job::Failed(AppError::internal(e.to_string())),
        };
        st.0.jobs.lock().expect("job lock").insert(id, job);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "job_id": id, "status": "running", "poll": format!("/api/sweep/{id}") })),
    ))
}

async fn sweep_status(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    let id: u64 = id
        .parse()
        .map_err(|_| bad_request(format!("invalid job id {id:?}")))?;
    let jobs = state.0.jobs.lock().expect("job lock");
    let job = jobs
        .get(&id)
        .ok_or_else(|| not_found(format!("no sweep job {id}")))?;
    Ok(Json(match job {
        Job::Running => json!({ "job_id": id, "status": "running" }),
        Job::Done(summary) => json!({
            "job_id": id,
            "status": "done",
            "summary": summary,
            "plot": summary.plot_series(),
        }),
        Job::Failed(e) => {
            json!({ "job_id": id, "status": "failed", "error": e.to_json()["error"] })
        }
    }))
}

async fn get_meta(State(state): State<AppState>) -> Json<Value> {
    let cloud = state.0.cloud.read().expect("cloud lock").clone();
    Json(json!({
        "schema_version": SCHEMA_VERSION,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "bind": state.0.bind.map(|b| b.to_string()),
        "defaults": {
            "layout_seed": DEFAULT_LAYOUT_SEED,
            "layout_iterations": DEFAULT_ITERATIONS,
            "repetitions": SweepSpec::DEFAULT_REPETITIONS,
        },
        "cloud": cloud.as_deref().map(cloud_summary),
        "config": cloud.as_deref().map(|c| serde_json::to_value(&c.input).expect("input serializes")),
        "cached_graphs": state.0.graphs.lock().expect("graph lock").len(),
    }))
}
