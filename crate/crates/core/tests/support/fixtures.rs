//! Hand-built networks and grids shared by the oracle and acceptance suites.
#![allow(dead_code)]

use evsite_core::coupled::*;
use evsite_core::*;

pub fn node(id: u32) -> RoadNode {
    RoadNode { id: NodeId(id), lat: 0.0, lon: 0.0, has_station: false }
}

pub fn road(n: u32, links: &[(u32, u32, f64, f64, f64)]) -> RoadNetwork {
    RoadNetwork::new(
        (1..=n).map(node).collect(),
        links
            .iter()
            .enumerate()
            .map(|(i, &(a, b, t0, cap, len))| RoadLink {
                id: LinkId(i as u32 + 1),
                from: NodeId(a),
                to: NodeId(b),
                free_flow_time: t0,
                capacity: cap,
                length: len,
            })
            .collect(),
    )
}

pub fn od(o: u32, d: u32, trips: f64) -> OdEntry {
    OdEntry { origin: NodeId(o), destination: NodeId(d), slice: SliceLabel::hour(8), trips }
}

pub fn bus(id: u32, load: f64, gen: Option<(f64, f64)>) -> Bus {
    Bus {
        id: BusId(id),
        base_load: load,
        v_min: 0.5,
        v_max: 1.1,
        is_generator: gen.is_some(),
        gen_min: 0.0,
        gen_max: gen.map_or(0.0, |g| g.1),
        gen_cost: gen.map_or(0.0, |g| g.0),
    }
}

pub fn line(a: u32, b: u32, s: f64, lim: f64) -> Line {
    Line { from: BusId(a), to: BusId(b), susceptance: s, flow_limit: lim }
}

pub fn three_bus() -> PowerGridCase {
    PowerGridCase {
        base_mva: 100.0,
        buses: vec![bus(1, 0.0, Some((10.0, 300.0))), bus(2, 0.0, Some((30.0, 300.0))), bus(3, 150.0, None)],
        lines: vec![line(1, 2, 10.0, 500.0), line(1, 3, 10.0, 60.0), line(2, 3, 10.0, 500.0)],
        slack_bus: BusId(1),
    }
}

/// The same dispatch problem written out by hand over (g1, g2, th2, th3).
pub fn three_bus_by_hand() -> crate::vertices::SmallLp {
    let k = 100.0 * 10.0;
    // Flows as coefficient rows over (g1, g2, th2, th3); th1 = 0.
    let f12 = [0.0, 0.0, -k, 0.0];
    let f13 = [0.0, 0.0, 0.0, -k];
    let f23 = [0.0, 0.0, k, -k];
    let lin = |terms: &[(f64, [f64; 4])], g: [f64; 4]| -> Vec<f64> {
        (0..4).map(|j| g[j] + terms.iter().map(|(s, r)| s * r[j]).sum::<f64>()).collect()
    };
    let eq = vec![
        (lin(&[(-1.0, f12), (-1.0, f13)], [1.0, 0.0, 0.0, 0.0]), 0.0),
        (lin(&[(1.0, f12), (-1.0, f23)], [0.0, 1.0, 0.0, 0.0]), 0.0),
        (lin(&[(1.0, f13), (1.0, f23)], [0.0; 4]), 150.0),
    ];
    let neg = |r: [f64; 4]| r.map(|v| -v).to_vec();
    let ineq = vec![
        (vec![-1.0, 0.0, 0.0, 0.0], 0.0),
        (vec![1.0, 0.0, 0.0, 0.0], 300.0),
        (vec![0.0, -1.0, 0.0, 0.0], 0.0),
        (vec![0.0, 1.0, 0.0, 0.0], 300.0),
        (f12.to_vec(), 500.0),
        (neg(f12), 500.0),
        (f13.to_vec(), 60.0),
        (neg(f13), 60.0),
        (f23.to_vec(), 500.0),
        (neg(f23), 500.0),
    ];
    crate::vertices::SmallLp { c: vec![10.0, 30.0, 0.0, 0.0], eq, ineq }
}

pub fn modularity(n: usize, edges: &[(usize, usize, f64)], comm: &[usize]) -> f64 {
    // Q = 1/(2m) sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j, w) in edges {
        a[i][j] += w;
        a[j][i] += w;
    }
    let k: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if comm[i] == comm[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

pub fn state_with_volumes(r: &RoadNetwork, volume: Vec<f64>) -> TimeSlicedState {
    let n = r.nodes().len();
    TimeSlicedState {
        header: StateHeader {
            schema: SNAPSHOT_SCHEMA.into(),
            version: SNAPSHOT_VERSION,
            node_ids: r.nodes().iter().map(|n| n.id).collect(),
            link_ids: r.links().iter().map(|l| l.id).collect(),
            bus_ids: vec![],
            station_ids: vec![],
            station_nodes: vec![],
            station_chargers: vec![],
            node_server: vec![None; n],
            node_server_distance: vec![None; n],
        },
        slices: vec![SliceState {
            slice: SliceLabel::hour(0),
            relative_gap: 0.0,
            iterations: 1,
            link_volume: volume,
            node_demand: vec![1.0; n],
            total_demand: n as f64,
            station_assigned: vec![],
            station_served: vec![],
            station_coverage: vec![],
            station_voltage: vec![],
            unserved: n as f64,
            bus_load: vec![],
            bus_charging: vec![],
            bus_shed: vec![],
            bus_voltage: vec![],
            bus_price: vec![],
            served_fraction: vec![],
            opf_feasible: true,
            opf_cost: 0.0,
        }],
    }
}

/// Three intersections in a row; a new station at the far end pulls charging
/// load from a weak, distant bus onto a stiff one near the slack.
pub fn impact_fixture() -> (Scenario, ChargingStation) {
    let links = [
        (1, 2, 2.0, 5000.0, 1.0),
        (2, 1, 2.0, 5000.0, 1.0),
        (2, 3, 2.0, 5000.0, 1.0),
        (3, 2, 2.0, 5000.0, 1.0),
    ];
    let existing = ChargingStation { id: StationId(1), name: "old".into(), node: NodeId(1), chargers: 10, is_existing: true };
    let r = road(3, &links).with_station_flags(std::slice::from_ref(&existing));
    let sc = Scenario {
        road: r,
        od: OdMatrix {
            slices: vec![SliceLabel::hour(8), SliceLabel::hour(9)],
            entries: vec![
                od(1, 3, 1000.0),
                OdEntry { slice: SliceLabel::hour(9), ..od(1, 3, 800.0) },
            ],
            ev_share: 1.0,
        },
        stations: vec![existing.clone()],
        grid: PowerGridCase {
            base_mva: 100.0,
            buses: vec![bus(1, 0.0, Some((10.0, 1000.0))), bus(2, 20.0, None), bus(3, 0.0, None)],
            lines: vec![line(1, 2, 2.0, 1000.0), line(1, 3, 50.0, 1000.0)],
            slack_bus: BusId(1),
        },
        coupling: CouplingMap {
            node_to_bus: vec![(NodeId(1), BusId(2)), (NodeId(2), BusId(2)), (NodeId(3), BusId(3))],
            charge_propensity: 1.0,
            energy_per_vehicle: 30.0,
        },
    };
    let new = ChargingStation { id: StationId(2), name: "new".into(), node: NodeId(3), chargers: 10, is_existing: false };
    (sc, new)
}
