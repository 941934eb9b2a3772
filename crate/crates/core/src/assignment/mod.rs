//! Static user-equilibrium traffic assignment and node charging demand.

mod demand;
mod frank_wolfe;
mod paths;

pub use demand::{accrue_demand, station_attribution};
pub use frank_wolfe::solve_ue;
pub use paths::{shortest_path_tree, Graph, Tree};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LinkId, NodeId};

/// BPR link performance function `t(v) = t0 * (1 + alpha * (v / c)^beta)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkCostModel {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LinkCostModel {
    fn default() -> Self {
        LinkCostModel {
            alpha: 0.15,
            beta: 4.0,
        }
    }
}

impl LinkCostModel {
    pub fn validate(&self) -> Result<(), AssignmentError> {
        if self.alpha >= 0.0 && self.beta >= 1.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(AssignmentError::InvalidCostModel {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }

    #[inline]
    pub fn travel_time(&self, t0: f64, capacity: f64, volume: f64) -> f64 {
        t0 * (1.0 + self.alpha * (volume / capacity).powf(self.beta))
    }

    /// Integral of the travel time from 0 to `volume`.
    #[inline]
    pub fn integral(&self, t0: f64, capacity: f64, volume: f64) -> f64 {
        t0 * (volume
            + self.alpha * capacity * (volume / capacity).powf(self.beta + 1.0) / (self.beta + 1.0))
    }
}

/// Flow on one path of one OD pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFlow {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub flow: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdPathFlows {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand: f64,
    pub paths: Vec<PathFlow>,
}

/// Per-iteration convergence record.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStat {
    pub relative_gap: f64,
    /// Beckmann objective at the iterate the gap was measured on.
    pub objective: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// Vehicles per link, in road-network link order.
    pub link_volume: Vec<f64>,
    pub relative_gap: f64,
    pub iterations: usize,
    pub od_path_flows: Option<Vec<OdPathFlows>>,
    pub trace: Vec<IterationStat>,
}

impl AssignmentResult {
    pub fn converged(&self, tol: f64) -> bool {
        self.relative_gap <= tol
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Keep per-OD path flows (needed for station attribution).
    pub retain_paths: bool,
}

impl Default for UeOptions {
    fn default() -> Self {
        UeOptions {
            tol: 1e-4,
            max_iter: 500,
            retain_paths: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("unreachable OD pairs: {0:?}")]
    Disconnected(Vec<(NodeId, NodeId)>),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("invalid link cost model alpha={alpha} beta={beta}")]
    InvalidCostModel { alpha: f64, beta: f64 },
    #[error("path flows were not retained for this assignment")]
    PathsNotRetained,
}
