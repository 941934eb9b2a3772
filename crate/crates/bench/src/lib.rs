//! Shared inputs for the criterion benches.

use evsite_core::ingest::{parse_od, parse_road_network};
use evsite_core::{OdEntry, RoadNetwork};

/// The 24-node assignment benchmark with its peak-hour demand.
pub fn sioux_falls() -> (RoadNetwork, Vec<OdEntry>) {
    let road = parse_road_network(include_str!("../../core/fixtures/sioux_falls/road.tntp")).expect("bundled network parses");
    let od = parse_od(include_str!("../../core/fixtures/sioux_falls/od.csv"), 1.0).expect("bundled demand parses");
    (road, od.entries)
}
