//! Route table and handlers under `/api/v1`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use evsite_core::assignment::{solve_ue, station_attribution, AssignmentResult, UeOptions};
use evsite_core::coupled::{read_snapshot, run_coupled, station_coverage, write_snapshot, CoupledConfig, TimeSlicedState};
use evsite_core::hotspots::{order_by_area, Hotspot};
use evsite_core::impact::{diff_states, filter_impact, ImpactThresholds};
use evsite_core::siting::{run_siting_with_progress, GaConfig, ObjectiveBreakdown, Placement, SitingError};
use evsite_core::{ChargingStation, Scenario, SliceLabel, StationId};

use crate::jobs::{JobHandle, JobKind, JobOutput};
use crate::{cached_state, coupled_key, schemas, ApiError, Shared, SitingRequest, StoredSolution};

pub const SITING_SCHEMA: &str = "evsite.siting";
pub const SITING_VERSION: u32 = 1;

type Api = Result<Response, ApiError>;
type AppState = State<Arc<Shared>>;

/// Result document of a siting job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SitingPayload {
    pub schema: String,
    pub version: u32,
    pub key: String,
    pub config: GaConfig,
    pub solutions: Vec<SolutionOut>,
    pub best_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionOut {
    /// Stable across runs: derived from the content key and the rank.
    pub id: String,
    pub rank: usize,
    pub placements: Vec<Placement>,
    pub objective: f64,
    pub breakdown: ObjectiveBreakdown,
    pub new_stations: Vec<ChargingStation>,
    /// Served share of total demand per slice after deployment.
    pub coverage_series: Vec<f64>,
}

pub fn router(shared: Arc<Shared>) -> Router {
    let api = Router::new()
        .route("/scenario", get(scenario))
        .route("/network", get(network))
        .route("/state/{slice}", get(state))
        .route("/hotspots", get(hotspots))
        .route("/stations", get(stations))
        .route("/stations/{id}/series", get(station_series))
        .route("/stations/{id}/attribution", get(attribution))
        .route("/siting", post(post_siting))
        .route("/run", post(post_run))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(job))
        .route("/jobs/{id}/result", get(job_result))
        .route("/solutions", get(solutions))
        .route("/solutions/{id}/impact", get(impact))
        .route("/schemas", get(schema_list))
        .route("/schemas/{name}", get(schema))
        .fallback(|| async { ApiError::not_found("unknown-route", "no such endpoint") });
    let static_dir = shared.cfg.static_dir.clone();
    let app = Router::new().nest("/api/v1", api).with_state(shared);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(include_str!("../static/index.html")) })),
    }
}

fn json<T: Serialize>(v: &T) -> Response {
    Json(v).into_response()
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request("bad-query", e.body_text()))
}

fn slice_index(s: &Shared, label: &str) -> Result<usize, ApiError> {
    s.baseline
        .slices
        .iter()
        .position(|x| x.slice.as_str() == label)
        .ok_or_else(|| ApiError::not_found("unknown-slice", format!("no slice `{label}`")))
}

fn station(s: &Shared, id: &str) -> Result<(usize, ChargingStation), ApiError> {
    let missing = || ApiError::not_found("unknown-station", format!("no station `{id}`"));
    let sid = StationId(id.parse().map_err(|_| missing())?);
    let k = s.baseline.station_index(sid).ok_or_else(missing)?;
    let st = s.scenario.stations.iter().find(|x| x.id == sid).ok_or_else(missing)?;
    Ok((k, st.clone()))
}

async fn scenario(State(s): AppState) -> Response {
    let sc = &s.scenario;
    json(&json!({
        "nodes": sc.road.nodes().len(),
        "links": sc.road.links().len(),
        "stations": sc.stations.len(),
        "buses": sc.grid.buses.len(),
        "lines": sc.grid.lines.len(),
        "slices": sc.od.slices,
        "ev_share": sc.od.ev_share,
        "charge_propensity": sc.coupling.charge_propensity,
        "energy_per_vehicle": sc.coupling.energy_per_vehicle,
        "content_hash": s.scenario_key,
    }))
}

async fn network(State(s): AppState) -> Response {
    let sc = &s.scenario;
    let bus = sc.coupling.lookup();
    json(&json!({
        "nodes": sc.road.nodes().iter().map(|n| json!({
            "id": n.id, "lat": n.lat, "lon": n.lon, "bus": bus.get(&n.id), "has_station": n.has_station,
        })).collect::<Vec<_>>(),
        "links": sc.road.links().iter().map(|l| json!({
            "id": l.id, "from": l.from, "to": l.to, "length": l.length, "capacity": l.capacity,
        })).collect::<Vec<_>>(),
        "buses": sc.grid.buses.iter().map(|b| json!({
            "id": b.id, "v_min": b.v_min, "v_max": b.v_max, "is_generator": b.is_generator, "base_load": b.base_load,
        })).collect::<Vec<_>>(),
        "lines": sc.grid.lines.iter().map(|l| json!({ "from": l.from, "to": l.to })).collect::<Vec<_>>(),
    }))
}

async fn state(State(s): AppState, Path(slice): Path<String>) -> Api {
    let k = slice_index(&s, &slice)?;
    let h = &s.baseline.header;
    Ok(json(&json!({
        "slice": slice,
        "node_ids": h.node_ids,
        "link_ids": h.link_ids,
        "bus_ids": h.bus_ids,
        "station_ids": h.station_ids,
        "state": s.baseline.slices[k],
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutQuery {
    layout: Option<String>,
}

/// `rank` and `link` place hotspots by rank, `volume` by mean link volume,
/// `area` by node count; only `link` carries the similarity edges.
async fn hotspots(State(s): AppState, q: Result<Query<LayoutQuery>, QueryRejection>) -> Api {
    let layout = query(q)?.layout.unwrap_or_else(|| "rank".into());
    let place = |h: &Hotspot| -> f64 {
        match layout.as_str() {
            "volume" => h.avg_volume,
            "area" => h.area_size as f64,
            _ => h.rank as f64,
        }
    };
    if !matches!(layout.as_str(), "rank" | "link" | "volume" | "area") {
        return Err(ApiError::bad_request("bad-layout", format!("unknown layout `{layout}`; expected rank, link, volume or area")));
    }
    let slices: Vec<Value> = s
        .timeline
        .slices
        .iter()
        .map(|sh| {
            let ordered = if layout == "area" { order_by_area(&sh.hotspots) } else { sh.hotspots.clone() };
            let hs: Vec<Value> = ordered
                .iter()
                .map(|h| {
                    let mut v = serde_json::to_value(h).unwrap_or(Value::Null);
                    v["y"] = json!(place(h));
                    v
                })
                .collect();
            json!({ "slice": sh.slice, "modularity": sh.modularity, "community_count": sh.communities.len(), "hotspots": hs })
        })
        .collect();
    let links = if layout == "link" { s.timeline.links.clone() } else { Vec::new() };
    Ok(json(&json!({ "layout": layout, "slices": slices, "links": links })))
}

async fn stations(State(s): AppState) -> Response {
    let out: Vec<Value> = s
        .scenario
        .stations
        .iter()
        .map(|st| {
            let node = s.scenario.road.node(st.node);
            json!({
                "id": st.id,
                "name": st.name,
                "node": st.node,
                "chargers": st.chargers,
                "is_existing": st.is_existing,
                "lat": node.map_or(0.0, |n| n.lat),
                "lon": node.map_or(0.0, |n| n.lon),
                "coverage": station_coverage(&s.baseline, st.id).unwrap_or(0.0),
            })
        })
        .collect();
    json(&out)
}

async fn station_series(State(s): AppState, Path(id): Path<String>) -> Api {
    let (k, st) = station(&s, &id)?;
    let series: Vec<Value> = s
        .baseline
        .slices
        .iter()
        .map(|x| {
            json!({
                "slice": x.slice,
                "assigned": x.station_assigned[k],
                "served": x.station_served[k],
                "coverage": x.station_coverage[k],
                "voltage": x.station_voltage[k],
            })
        })
        .collect();
    Ok(json(&json!({ "station": st.id, "chargers": st.chargers, "series": series })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceQuery {
    slice: Option<String>,
}

async fn attribution(State(s): AppState, Path(id): Path<String>, q: Result<Query<SliceQuery>, QueryRejection>) -> Api {
    let (_, st) = station(&s, &id)?;
    let label = match query(q)?.slice {
        Some(l) => l,
        None => s.baseline.slices.first().map(|x| x.slice.as_str().to_string()).unwrap_or_default(),
    };
    let k = slice_index(&s, &label)?;
    let slice = s.baseline.slices[k].slice.clone();
    let shared = s.clone();
    let ue = tokio::task::spawn_blocking(move || paths_for(&shared, &slice))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "solver-error", e))?;
    let c = &s.scenario.coupling;
    let att = station_attribution(&ue, &s.scenario.road, st.node, c.charge_propensity, s.scenario.od.ev_share)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "solver-error", e.to_string()))?;
    Ok(json(&json!({
        "station": st.id,
        "node": st.node,
        "slice": label,
        "link_ids": s.baseline.header.link_ids,
        "attribution": att,
    })))
}

/// Equilibrium with path flows for one slice, memoised.
fn paths_for(s: &Shared, slice: &SliceLabel) -> Result<Arc<AssignmentResult>, String> {
    if let Some(r) = s.attribution.lock().expect("attribution cache poisoned").get(slice) {
        return Ok(r.clone());
    }
    let demand: Vec<_> = s.scenario.od.entries_for(slice).cloned().collect();
    let opts = UeOptions { retain_paths: true, ..s.cfg.coupled.ue_options() };
    let r = Arc::new(solve_ue(&s.scenario.road, &demand, &s.cfg.coupled.cost, &opts).map_err(|e| e.to_string())?);
    s.attribution.lock().expect("attribution cache poisoned").insert(slice.clone(), r.clone());
    Ok(r)
}

fn accepted(h: JobHandle) -> Response {
    let loc = format!("/api/v1/jobs/{}", h.id);
    (StatusCode::ACCEPTED, [(header::LOCATION, loc)], Json(h)).into_response()
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(|b| b.is_ascii_whitespace()) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("bad-request", e.to_string()))
}

fn spawn_job(s: &Arc<Shared>, kind: JobKind, work: impl FnOnce(&Shared, &dyn Fn(f64)) -> Result<JobOutput, String> + Send + 'static) -> JobHandle {
    let handle = s.jobs.create(kind);
    let id = handle.id.clone();
    let shared = s.clone();
    let permits = s.permits[&kind].clone();
    tokio::spawn(async move {
        let Ok(_permit) = permits.acquire_owned().await else { return };
        shared.jobs.start(&id);
        let (sh, jid) = (shared.clone(), id.clone());
        let done = tokio::task::spawn_blocking(move || {
            let progress = |p: f64| sh.jobs.progress(&jid, p);
            work(&sh, &progress)
        })
        .await;
        match done {
            Ok(Ok(out)) => shared.jobs.finish(&id, out),
            Ok(Err(msg)) => shared.jobs.fail(&id, msg),
            Err(e) => shared.jobs.fail(&id, format!("job aborted: {e}")),
        }
    });
    handle
}

async fn post_siting(State(s): AppState, body: Bytes) -> Api {
    let req: SitingRequest = parse_body(&body)?;
    let ga = req.to_config();
    ga.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-config", e.to_string()))?;
    Ok(accepted(spawn_job(&s, JobKind::SitingRun, move |sh, progress| siting_job(sh, &ga, progress))))
}

/// Content key of a siting run over `scenario_key`.
pub fn siting_key(scenario_key: &str, ga: &GaConfig, coupled: &CoupledConfig) -> String {
    let ga_json = serde_json::to_vec(ga).unwrap_or_default();
    let coupled_json = serde_json::to_vec(coupled).unwrap_or_default();
    crate::keyed(scenario_key, &[b"siting-run", &ga_json, &coupled_json])
}

/// Runs the GA and packages the ranked solutions with their deployed
/// states (same order as `payload.solutions`).
pub fn build_siting(
    scenario: &Scenario,
    baseline: &TimeSlicedState,
    key: &str,
    ga: &GaConfig,
    coupled: &CoupledConfig,
    progress: impl FnMut(f64),
) -> Result<(SitingPayload, Vec<TimeSlicedState>), SitingError> {
    let run = run_siting_with_progress(scenario, &scenario.stations, baseline, ga, coupled, progress)?;
    let mut states = Vec::new();
    let solutions = run
        .solutions
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let out = SolutionOut {
                id: format!("{}-{}", &key[..12.min(key.len())], i + 1),
                rank: i + 1,
                placements: d.solution.placements,
                objective: d.solution.objective,
                breakdown: d.solution.breakdown,
                new_stations: d.new_stations,
                coverage_series: coverage_series(&d.state),
            };
            states.push(d.state);
            out
        })
        .collect();
    let payload = SitingPayload {
        schema: SITING_SCHEMA.into(),
        version: SITING_VERSION,
        key: key.to_string(),
        config: ga.clone(),
        solutions,
        best_history: run.best_history,
    };
    Ok((payload, states))
}

fn siting_job(s: &Shared, ga: &GaConfig, progress: &dyn Fn(f64)) -> Result<JobOutput, String> {
    let key = siting_key(&s.scenario_key, ga, &s.cfg.coupled);
    let output = |bytes: Arc<Vec<u8>>| JobOutput { bytes, content_type: "application/json" };
    if let Some(b) = s.memo.lock().expect("memo poisoned").get(&key) {
        return Ok(output(b.clone()));
    }
    let name = format!("siting-{key}.json");
    if let Some(bytes) = s.cache.get(&name) {
        if let Some(stored) = load_cached_siting(s, &key, &bytes) {
            register(s, stored);
            let b = Arc::new(bytes);
            s.memo.lock().expect("memo poisoned").insert(key, b.clone());
            return Ok(output(b));
        }
    }
    let (payload, states) = build_siting(&s.scenario, &s.baseline, &key, ga, &s.cfg.coupled, progress).map_err(|e| e.to_string())?;
    let bytes = serde_json::to_vec(&payload).map_err(|e| e.to_string())?;
    let stored: Vec<StoredSolution> = payload
        .solutions
        .into_iter()
        .zip(states)
        .map(|(out, state)| StoredSolution { out, state })
        .collect();
    for x in &stored {
        s.cache.put(&format!("siting-{key}-{}.jsonl", x.out.rank), write_snapshot(&x.state).as_bytes()).map_err(|e| e.to_string())?;
    }
    s.cache.put(&name, &bytes).map_err(|e| e.to_string())?;
    register(s, stored);
    let b = Arc::new(bytes);
    s.memo.lock().expect("memo poisoned").insert(key, b.clone());
    Ok(output(b))
}

fn load_cached_siting(s: &Shared, key: &str, bytes: &[u8]) -> Option<Vec<StoredSolution>> {
    let payload: SitingPayload = serde_json::from_slice(bytes).ok()?;
    if payload.schema != SITING_SCHEMA || payload.version != SITING_VERSION || payload.key != key {
        return None;
    }
    payload
        .solutions
        .into_iter()
        .map(|out| {
            let text = s.cache.get(&format!("siting-{key}-{}.jsonl", out.rank))?;
            let state = read_snapshot(&String::from_utf8_lossy(&text)).ok()?;
            Some(StoredSolution { out, state })
        })
        .collect()
}

fn register(s: &Shared, stored: Vec<StoredSolution>) {
    let mut map = s.solutions.lock().expect("solutions poisoned");
    for x in stored {
        map.insert(x.out.id.clone(), Arc::new(x));
    }
}

/// Served share of total demand per slice.
pub fn coverage_series(state: &TimeSlicedState) -> Vec<f64> {
    state.slices.iter().map(|x| x.station_coverage.iter().sum::<f64>().clamp(0.0, 1.0)).collect()
}

async fn post_run(State(s): AppState, body: Bytes) -> Api {
    let cfg: CoupledConfig = parse_body(&body)?;
    cfg.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-config", e.to_string()))?;
    Ok(accepted(spawn_job(&s, JobKind::CoupledRun, move |sh, _| {
        let key = coupled_key(&sh.scenario_key, &cfg, b"existing");
        let bytes = cached_state(&sh.memo, &sh.cache, &key, || {
            run_coupled(&sh.scenario, &sh.scenario.stations, &cfg).map_err(|e| e.to_string())
        })?;
        Ok(JobOutput { bytes, content_type: "application/x-ndjson" })
    })))
}

async fn list_jobs(State(s): AppState) -> Response {
    json(&s.jobs.list())
}

async fn job(State(s): AppState, Path(id): Path<String>) -> Api {
    s.jobs
        .get(&id)
        .map(|h| json(&h))
        .ok_or_else(|| ApiError::not_found("unknown-job", format!("no job `{id}`")))
}

async fn job_result(State(s): AppState, Path(id): Path<String>) -> Api {
    let h = s.jobs.get(&id).ok_or_else(|| ApiError::not_found("unknown-job", format!("no job `{id}`")))?;
    let out = s
        .jobs
        .output(&id)
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "job-not-done", format!("job `{id}` is {:?}", h.status).to_lowercase()))?;
    Ok(([(header::CONTENT_TYPE, out.content_type)], out.bytes.as_ref().clone()).into_response())
}

async fn solutions(State(s): AppState) -> Response {
    let list: Vec<SolutionOut> = s.solutions.lock().expect("solutions poisoned").values().map(|x| x.out.clone()).collect();
    json(&list)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImpactQuery {
    road_lo: Option<f64>,
    road_hi: Option<f64>,
    bus_lo: Option<f64>,
    bus_hi: Option<f64>,
    road_threshold: Option<f64>,
    bus_threshold: Option<f64>,
}

async fn impact(State(s): AppState, Path(id): Path<String>, q: Result<Query<ImpactQuery>, QueryRejection>) -> Api {
    let q = query(q)?;
    let sol = s
        .solutions
        .lock()
        .expect("solutions poisoned")
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("unknown-solution", format!("no solution `{id}`")))?;
    let d = ImpactThresholds::default();
    let t = ImpactThresholds { road: q.road_threshold.unwrap_or(d.road), bus: q.bus_threshold.unwrap_or(d.bus) };
    let report = diff_states(&s.baseline, &sol.state, &t)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "topology-mismatch", e.to_string()))?;
    let road = (q.road_lo.unwrap_or(f64::NEG_INFINITY), q.road_hi.unwrap_or(f64::INFINITY));
    let bus = (q.bus_lo.unwrap_or(f64::NEG_INFINITY), q.bus_hi.unwrap_or(f64::INFINITY));
    let filtered = filter_impact(&report, road, bus).map_err(|e| ApiError::bad_request("bad-range", e.to_string()))?;
    Ok(json(&json!({ "solution": id, "report": filtered })))
}

async fn schema_list() -> Response {
    json(&schemas::ALL.iter().map(|(n, _)| *n).collect::<Vec<_>>())
}

async fn schema(Path(name): Path<String>) -> Api {
    let text = schemas::get(&name).ok_or_else(|| ApiError::not_found("unknown-schema", format!("no schema `{name}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/schema+json")], text).into_response())
}
