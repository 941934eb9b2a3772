//! Coupled road/grid modelling and charging-station siting.

pub mod assignment;
pub mod coupled;
pub mod hotspots;
pub mod impact;
pub mod ingest;
pub mod lp;
pub mod model;
pub mod opf;
pub mod siting;
pub mod synthetic;

pub use model::*;

/// The five validated inputs of one study area.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub road: RoadNetwork,
    pub od: OdMatrix,
    pub stations: Vec<ChargingStation>,
    pub grid: PowerGridCase,
    pub coupling: CouplingMap,
}

impl Scenario {
    pub fn validate(&self) -> ValidationReport {
        validate_scenario(&self.road, &self.od, &self.stations, &self.grid, &self.coupling)
    }
}
