//! Per-slice traffic -> demand -> station -> grid pipeline.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{accrue_demand, shortest_path_tree, solve_ue, AssignmentError, Graph, LinkCostModel, UeOptions};
use crate::model::{BusId, ChargingStation, LinkId, NodeId, SliceLabel, StationId};
use crate::opf::{solve_opf, OpfConfig, OpfError};
use crate::Scenario;

pub const SNAPSHOT_SCHEMA: &str = "evsite.state";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledConfig {
    pub cost: LinkCostModel,
    pub opf: OpfConfig,
    pub ue_tol: f64,
    pub ue_max_iter: usize,
    /// Maximum road distance (km) from a demand node to its serving station.
    pub service_radius: f64,
    /// Hours per slice.
    pub slice_hours: f64,
    /// Slices to run; empty means every slice of the OD matrix.
    pub slices: Vec<SliceLabel>,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        CoupledConfig {
            cost: LinkCostModel::default(),
            opf: OpfConfig::default(),
            ue_tol: 1e-4,
            ue_max_iter: 500,
            service_radius: 5.0,
            slice_hours: 1.0,
            slices: Vec::new(),
        }
    }
}

impl CoupledConfig {
    pub fn validate(&self) -> Result<(), CoupledError> {
        let bad = |m: &str| Err(CoupledError::InvalidConfig(m.to_string()));
        if !(self.service_radius > 0.0 && self.service_radius.is_finite()) {
            return bad("service_radius must be positive");
        }
        if !(self.slice_hours > 0.0 && self.slice_hours.is_finite()) {
            return bad("slice_hours must be positive");
        }
        if !(self.ue_tol > 0.0) {
            return bad("ue_tol must be positive");
        }
        if self.ue_max_iter == 0 {
            return bad("ue_max_iter must be at least 1");
        }
        self.cost.validate()?;
        Ok(())
    }

    pub fn ue_options(&self) -> UeOptions {
        UeOptions {
            tol: self.ue_tol,
            max_iter: self.ue_max_iter,
            retain_paths: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum CoupledError {
    #[error("invalid coupled config: {0}")]
    InvalidConfig(String),
    #[error("slice {0} is not in the OD matrix")]
    UnknownSlice(SliceLabel),
    #[error("unknown station {0}")]
    UnknownStation(StationId),
    #[error("station {station} sits on unknown node {node}")]
    StationNode { station: StationId, node: NodeId },
    #[error("road node {0} has no bus mapping")]
    Unmapped(NodeId),
    #[error("slice {slice}: {source}")]
    Assignment {
        slice: SliceLabel,
        source: AssignmentError,
    },
    #[error("slice {slice}: {source}")]
    Opf { slice: SliceLabel, source: OpfError },
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
}

impl From<AssignmentError> for CoupledError {
    fn from(e: AssignmentError) -> Self {
        CoupledError::InvalidConfig(e.to_string())
    }
}

/// Road distance (km) from every node that can reach `target` within
/// `radius`, as `(node index, distance)` in node order.
pub fn reach_within(reverse: &Graph, lengths: &[f64], target: usize, radius: f64) -> Vec<(usize, f64)> {
    let t = shortest_path_tree(reverse, target, lengths);
    t.dist
        .iter()
        .enumerate()
        .filter(|(_, d)| **d <= radius)
        .map(|(i, d)| (i, *d))
        .collect()
}

/// Nearest station (by road distance, within the radius) for every node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationReach {
    pub station_ids: Vec<StationId>,
    /// Per node: serving station index into `station_ids` and its distance.
    pub serving: Vec<Option<(usize, f64)>>,
}

impl StationReach {
    /// Stations must be sorted by id; equal distances go to the lowest id.
    pub fn new(scenario: &Scenario, stations: &[ChargingStation], radius: f64) -> Result<StationReach, CoupledError> {
        let road = &scenario.road;
        let reverse = Graph::new(road).reversed();
        let lengths: Vec<f64> = road.links().iter().map(|l| l.length).collect();
        let mut serving: Vec<Option<(usize, f64)>> = vec![None; road.nodes().len()];
        for (k, s) in stations.iter().enumerate() {
            let idx = road.node_index(s.node).ok_or(CoupledError::StationNode {
                station: s.id,
                node: s.node,
            })?;
            for (n, d) in reach_within(&reverse, &lengths, idx, radius) {
                match serving[n] {
                    Some((_, best)) if best <= d => {}
                    _ => serving[n] = Some((k, d)),
                }
            }
        }
        Ok(StationReach {
            station_ids: stations.iter().map(|s| s.id).collect(),
            serving,
        })
    }
}

/// One slice's split of node demand between stations and `unserved`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandAssignment {
    pub serving: Vec<Option<StationId>>,
    /// kWh per station, in station order.
    pub station_demand: Vec<f64>,
    pub unserved: f64,
}

pub fn assign_demand(reach: &StationReach, node_demand: &[f64]) -> DemandAssignment {
    let mut station_demand = vec![0.0; reach.station_ids.len()];
    let mut unserved = 0.0;
    for (s, d) in reach.serving.iter().zip(node_demand) {
        match s {
            Some((k, _)) => station_demand[*k] += d,
            None => unserved += d,
        }
    }
    DemandAssignment {
        serving: reach.serving.iter().map(|s| s.map(|(k, _)| reach.station_ids[k])).collect(),
        station_demand,
        unserved,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceState {
    pub slice: SliceLabel,
    pub relative_gap: f64,
    pub iterations: usize,
    /// Vehicles per link.
    pub link_volume: Vec<f64>,
    /// kWh per node.
    pub node_demand: Vec<f64>,
    pub total_demand: f64,
    /// kWh per station assigned by proximity.
    pub station_assigned: Vec<f64>,
    /// kWh per station actually delivered after any grid shedding.
    pub station_served: Vec<f64>,
    pub station_coverage: Vec<f64>,
    pub station_voltage: Vec<f64>,
    pub unserved: f64,
    /// Served MW per bus (base plus delivered charging).
    pub bus_load: Vec<f64>,
    pub bus_charging: Vec<f64>,
    pub bus_shed: Vec<f64>,
    pub bus_voltage: Vec<f64>,
    pub bus_price: Vec<f64>,
    pub served_fraction: Vec<f64>,
    pub opf_feasible: bool,
    pub opf_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateHeader {
    pub schema: String,
    pub version: u32,
    pub node_ids: Vec<NodeId>,
    pub link_ids: Vec<LinkId>,
    pub bus_ids: Vec<BusId>,
    pub station_ids: Vec<StationId>,
    pub station_nodes: Vec<NodeId>,
    pub station_chargers: Vec<u32>,
    pub node_server: Vec<Option<StationId>>,
    pub node_server_distance: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSlicedState {
    pub header: StateHeader,
    pub slices: Vec<SliceState>,
}

impl TimeSlicedState {
    pub fn station_index(&self, id: StationId) -> Option<usize> {
        self.header.station_ids.iter().position(|&s| s == id)
    }

    pub fn slice(&self, label: &SliceLabel) -> Option<&SliceState> {
        self.slices.iter().find(|s| &s.slice == label)
    }

    pub fn assignment(&self, slice: usize) -> DemandAssignment {
        let s = &self.slices[slice];
        DemandAssignment {
            serving: self.header.node_server.clone(),
            station_demand: s.station_assigned.clone(),
            unserved: s.unserved,
        }
    }
}

/// Runs every configured slice; slices are solved in parallel and merged in
/// slice order.
pub fn run_coupled(scenario: &Scenario, stations: &[ChargingStation], cfg: &CoupledConfig) -> Result<TimeSlicedState, CoupledError> {
    cfg.validate()?;
    let mut stations = stations.to_vec();
    stations.sort_by_key(|s| s.id);
    let slices = if cfg.slices.is_empty() {
        scenario.od.slices.clone()
    } else {
        for s in &cfg.slices {
            if !scenario.od.slices.contains(s) {
                return Err(CoupledError::UnknownSlice(s.clone()));
            }
        }
        cfg.slices.clone()
    };
    let road = &scenario.road;
    let grid = &scenario.grid;
    let reach = StationReach::new(scenario, &stations, cfg.service_radius)?;

    let bus_map = scenario.coupling.lookup();
    let station_bus: Vec<usize> = stations
        .iter()
        .map(|s| {
            bus_map
                .get(&s.node)
                .and_then(|b| grid.bus_index(*b))
                .ok_or(CoupledError::Unmapped(s.node))
        })
        .collect::<Result<_, _>>()?;

    let mut by_slice: HashMap<&SliceLabel, Vec<_>> = HashMap::new();
    for e in &scenario.od.entries {
        by_slice.entry(&e.slice).or_default().push(e.clone());
    }
    let empty = Vec::new();
    let slice_states = slices
        .par_iter()
        .map(|label| {
            let demand = by_slice.get(label).unwrap_or(&empty);
            let ue = solve_ue(road, demand, &cfg.cost, &cfg.ue_options()).map_err(|source| CoupledError::Assignment {
                slice: label.clone(),
                source,
            })?;
            let node_demand = accrue_demand(&ue, road, &scenario.coupling, scenario.od.ev_share);
            let total_demand: f64 = node_demand.iter().sum();
            let da = assign_demand(&reach, &node_demand);

            let mut charging = vec![0.0; grid.buses.len()];
            for (k, &b) in station_bus.iter().enumerate() {
                charging[b] += kwh_to_mw(da.station_demand[k], cfg.slice_hours);
            }
            let opf = solve_opf(grid, &charging, &cfg.opf).map_err(|source| CoupledError::Opf {
                slice: label.clone(),
                source,
            })?;
            let station_served: Vec<f64> = da
                .station_demand
                .iter()
                .zip(&station_bus)
                .map(|(d, &b)| d * opf.served_fraction[b])
                .collect();
            let station_coverage = station_served
                .iter()
                .map(|s| if total_demand > 0.0 { s / total_demand } else { 0.0 })
                .collect();
            let bus_charging: Vec<f64> = (0..grid.buses.len()).map(|i| opf.charging_load[i] - opf.shed[i]).collect();
            Ok(SliceState {
                slice: label.clone(),
                relative_gap: ue.relative_gap,
                iterations: ue.iterations,
                link_volume: ue.link_volume,
                node_demand,
                total_demand,
                station_assigned: da.station_demand,
                station_served,
                station_coverage,
                station_voltage: station_bus.iter().map(|&b| opf.bus_voltage[b]).collect(),
                unserved: da.unserved,
                bus_load: (0..grid.buses.len()).map(|i| opf.served_load(i)).collect(),
                bus_charging,
                bus_shed: opf.shed,
                bus_voltage: opf.bus_voltage,
                bus_price: opf.bus_price,
                served_fraction: opf.served_fraction,
                opf_feasible: opf.feasible,
                opf_cost: opf.cost,
            })
        })
        .collect::<Result<Vec<_>, CoupledError>>()?;

    Ok(TimeSlicedState {
        header: StateHeader {
            schema: SNAPSHOT_SCHEMA.to_string(),
            version: SNAPSHOT_VERSION,
            node_ids: road.nodes().iter().map(|n| n.id).collect(),
            link_ids: road.links().iter().map(|l| l.id).collect(),
            bus_ids: grid.buses.iter().map(|b| b.id).collect(),
            station_ids: stations.iter().map(|s| s.id).collect(),
            station_nodes: stations.iter().map(|s| s.node).collect(),
            station_chargers: stations.iter().map(|s| s.chargers).collect(),
            node_server: reach.serving.iter().map(|s| s.map(|(k, _)| stations[k].id)).collect(),
            node_server_distance: reach.serving.iter().map(|s| s.map(|(_, d)| d)).collect(),
        },
        slices: slice_states,
    })
}

/// Average MW over a slice that delivers `kwh`.
pub fn kwh_to_mw(kwh: f64, slice_hours: f64) -> f64 {
    kwh / 1000.0 / slice_hours
}

/// Mean over slices of the station's served share of total demand; slices
/// without demand contribute zero.
pub fn station_coverage(state: &TimeSlicedState, station: StationId) -> Result<f64, CoupledError> {
    let k = state.station_index(station).ok_or(CoupledError::UnknownStation(station))?;
    if state.slices.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = state.slices.iter().map(|s| s.station_coverage[k]).sum();
    Ok(sum / state.slices.len() as f64)
}

/// JSON Lines: a header line followed by one line per slice.
pub fn write_snapshot(state: &TimeSlicedState) -> String {
    let mut out = serde_json::to_string(&state.header).unwrap_or_default();
    out.push('\n');
    for s in &state.slices {
        out.push_str(&serde_json::to_string(s).unwrap_or_default());
        out.push('\n');
    }
    out
}

pub fn read_snapshot(text: &str) -> Result<TimeSlicedState, CoupledError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let err = |line: usize, message: String| CoupledError::Snapshot { line: line + 1, message };
    let (i, first) = lines.next().ok_or_else(|| err(0, "empty snapshot".into()))?;
    let header: StateHeader = serde_json::from_str(first).map_err(|e| err(i, e.to_string()))?;
    if header.schema != SNAPSHOT_SCHEMA || header.version != SNAPSHOT_VERSION {
        return Err(err(i, format!("unsupported schema {} v{}", header.schema, header.version)));
    }
    let slices = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(i, e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(TimeSlicedState { header, slices })
}
