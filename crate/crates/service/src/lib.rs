//! HTTP/JSON service over one scenario.
//!
//! The baseline coupled state and its hotspot timeline are computed once at
//! start-up and served synchronously. Coupled re-runs and siting runs are
//! asynchronous jobs on blocking threads, at most `workers` per kind at a time,
//! so status polls never wait on a solver. Results are keyed by a content hash
//! of scenario and configuration and persisted when a cache directory is set.

mod api;
mod cache;
mod error;
mod jobs;
pub mod schemas;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::Router;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use evsite_core::assignment::AssignmentResult;
use evsite_core::coupled::{read_snapshot, run_coupled, write_snapshot, CoupledConfig, TimeSlicedState};
use evsite_core::hotspots::{build_timeline, HotspotConfig, HotspotTimeline};
use evsite_core::ingest::ScenarioBundle;
use evsite_core::siting::{GaConfig, Weights};
use evsite_core::{Scenario, SliceLabel};

pub use api::{build_siting, coverage_series, siting_key, SitingPayload, SolutionOut, SITING_SCHEMA, SITING_VERSION};
pub use cache::content_key;
pub use error::{ApiError, ServiceError};
pub use jobs::{JobHandle, JobKind, JobStatus};

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub coupled: CoupledConfig,
    pub hotspots: HotspotConfig,
    /// Heavy jobs of one kind allowed to run at once.
    pub workers: usize,
    pub cache_dir: Option<PathBuf>,
    /// Served at `/`; a built-in placeholder page is used when unset.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            coupled: CoupledConfig::default(),
            hotspots: HotspotConfig::default(),
            workers: 1,
            cache_dir: None,
            static_dir: None,
        }
    }
}

/// Body of `POST /api/v1/siting`; omitted fields take the GA defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SitingRequest {
    pub weights: Weights,
    pub stations: usize,
    /// Inclusive charger range per new station.
    pub chargers: [u32; 2],
    pub children: usize,
    pub iterations: usize,
    pub seed: u64,
    pub elite: Option<usize>,
    pub mutation_rate: Option<f64>,
    pub fixed_cost: Option<f64>,
    pub unit_cost: Option<f64>,
}

impl Default for SitingRequest {
    fn default() -> Self {
        let d = GaConfig::default();
        SitingRequest {
            weights: d.weights,
            stations: d.new_station_count,
            chargers: [d.x_min, d.x_max],
            children: d.children_per_iteration,
            iterations: d.iterations,
            seed: d.seed,
            elite: None,
            mutation_rate: None,
            fixed_cost: None,
            unit_cost: None,
        }
    }
}

impl SitingRequest {
    pub fn to_config(&self) -> GaConfig {
        let d = GaConfig::default();
        GaConfig {
            children_per_iteration: self.children,
            iterations: self.iterations,
            new_station_count: self.stations,
            x_min: self.chargers[0],
            x_max: self.chargers[1],
            weights: self.weights,
            seed: self.seed,
            elite: self.elite.unwrap_or(d.elite.min(self.children)),
            mutation_rate: self.mutation_rate.unwrap_or(d.mutation_rate),
            fixed_cost: self.fixed_cost.unwrap_or(d.fixed_cost),
            unit_cost: self.unit_cost.unwrap_or(d.unit_cost),
        }
    }
}

pub(crate) struct StoredSolution {
    pub out: SolutionOut,
    pub state: TimeSlicedState,
}

pub(crate) struct Shared {
    pub scenario: Scenario,
    pub scenario_key: String,
    pub cfg: ServiceConfig,
    pub baseline: TimeSlicedState,
    pub timeline: HotspotTimeline,
    pub jobs: jobs::Registry,
    pub solutions: Mutex<BTreeMap<String, Arc<StoredSolution>>>,
    pub attribution: Mutex<HashMap<SliceLabel, Arc<AssignmentResult>>>,
    /// Finished result payloads by content key.
    pub memo: Mutex<HashMap<String, Arc<Vec<u8>>>>,
    pub cache: cache::DiskCache,
    pub permits: HashMap<JobKind, Arc<Semaphore>>,
}

pub(crate) fn keyed(scenario_key: &str, parts: &[&[u8]]) -> String {
    let mut all: Vec<&[u8]> = vec![scenario_key.as_bytes()];
    all.extend_from_slice(parts);
    content_key(&all)
}

/// Key of a coupled run over `cfg` with the station set named by `stations`.
pub(crate) fn coupled_key(scenario_key: &str, cfg: &CoupledConfig, stations: &[u8]) -> String {
    let cfg_json = serde_json::to_vec(cfg).unwrap_or_default();
    keyed(scenario_key, &[b"coupled-run", &cfg_json, stations])
}

/// Snapshot bytes for `key`, from memory, disk, or `run`.
pub(crate) fn cached_state(
    memo: &Mutex<HashMap<String, Arc<Vec<u8>>>>,
    cache: &cache::DiskCache,
    key: &str,
    run: impl FnOnce() -> Result<TimeSlicedState, String>,
) -> Result<Arc<Vec<u8>>, String> {
    if let Some(b) = memo.lock().expect("memo poisoned").get(key) {
        return Ok(b.clone());
    }
    let name = format!("state-{key}.jsonl");
    let bytes = match cache.get(&name) {
        Some(b) if read_snapshot(&String::from_utf8_lossy(&b)).is_ok() => b,
        _ => {
            let b = write_snapshot(&run()?).into_bytes();
            cache.put(&name, &b).map_err(|e| e.to_string())?;
            b
        }
    };
    let b = Arc::new(bytes);
    memo.lock().expect("memo poisoned").insert(key.to_string(), b.clone());
    Ok(b)
}

/// Scenario fingerprint over its canonical file forms.
pub fn scenario_key(s: &Scenario) -> String {
    let b = ScenarioBundle::from_scenario(s);
    let params = format!("{:?}|{:?}|{:?}", b.ev_share.to_bits(), b.charge_propensity.to_bits(), b.energy_per_vehicle.to_bits());
    content_key(&[b.road.as_bytes(), b.od.as_bytes(), b.stations.as_bytes(), b.grid.as_bytes(), b.coupling.as_bytes(), params.as_bytes()])
}

#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

impl Service {
    /// Validates the scenario and computes (or loads) the baseline state.
    pub fn new(scenario: Scenario, cfg: ServiceConfig) -> Result<Service, ServiceError> {
        let report = scenario.validate();
        if !report.is_empty() {
            return Err(ServiceError::Invalid(report.violations));
        }
        cfg.coupled.validate()?;
        let workers = cfg.workers.max(1);
        let permits = [JobKind::CoupledRun, JobKind::SitingRun]
            .into_iter()
            .map(|k| (k, Arc::new(Semaphore::new(workers))))
            .collect();
        let key = scenario_key(&scenario);
        let cache = cache::DiskCache::new(cfg.cache_dir.clone());
        let memo = Mutex::default();
        let bytes = cached_state(&memo, &cache, &coupled_key(&key, &cfg.coupled, b"existing"), || {
            run_coupled(&scenario, &scenario.stations, &cfg.coupled).map_err(|e| e.to_string())
        })
        .map_err(ServiceError::Cache)?;
        let baseline = read_snapshot(&String::from_utf8_lossy(&bytes)).map_err(|e| ServiceError::Cache(e.to_string()))?;
        let timeline = build_timeline(&baseline, &scenario.road, &cfg.hotspots);
        Ok(Service {
            shared: Arc::new(Shared {
                scenario_key: key,
                scenario,
                cfg,
                baseline,
                timeline,
                jobs: jobs::Registry::default(),
                solutions: Mutex::default(),
                attribution: Mutex::default(),
                memo,
                cache,
                permits,
            }),
        })
    }

    pub fn baseline(&self) -> &TimeSlicedState {
        &self.shared.baseline
    }

    pub fn router(&self) -> Router {
        api::router(self.shared.clone())
    }

    pub async fn serve(self, listener: tokio::net::TcpListener) -> std::io::Result<()> {
        axum::serve(listener, self.router()).await
    }

    /// Binds `addr`, reports the bound address, and serves until the process
    /// ends, on a runtime owned by this call.
    pub fn serve_blocking(self, addr: SocketAddr, on_bound: impl FnOnce(SocketAddr)) -> std::io::Result<()> {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind(addr).await?;
            on_bound(listener.local_addr()?);
            self.serve(listener).await
        })
    }
}
