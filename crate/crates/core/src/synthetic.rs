//! Seeded scenario generators for tests, benches and desk-scale runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::*;
use crate::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub struct CityConfig {
    /// Grid side; the city has `side * side` intersections.
    pub side: usize,
    pub slices: usize,
    pub od_pairs: usize,
    /// Peak-hour trips per OD pair, drawn uniformly from this range.
    pub peak_trips: (f64, f64),
    pub ev_share: f64,
    pub charge_propensity: f64,
    pub energy_per_vehicle: f64,
    pub existing_stations: usize,
    pub seed: u64,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            side: 10,
            slices: 24,
            od_pairs: 80,
            peak_trips: (40.0, 160.0),
            ev_share: 0.2,
            charge_propensity: 0.1,
            energy_per_vehicle: 30.0,
            existing_stations: 3,
            seed: 1,
        }
    }
}

/// Relative demand over the day with morning and evening peaks.
pub fn daily_profile(hour: usize) -> f64 {
    let h = hour as f64;
    0.15 + (-(h - 8.0).powi(2) / 4.0).exp() + 0.9 * (-(h - 17.5).powi(2) / 5.0).exp()
}

/// Grid city: two-way 0.5 km blocks, every third row and column an
/// arterial, coupled block-wise to the IEEE 14-bus case.
pub fn synthetic_city(cfg: &CityConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let side = cfg.side.max(2);
    let id = |r: usize, c: usize| NodeId((r * side + c + 1) as u32);
    let mut nodes = Vec::new();
    for r in 0..side {
        for c in 0..side {
            nodes.push(RoadNode {
                id: id(r, c),
                lat: 43.50 + 0.0045 * r as f64,
                lon: -96.75 + 0.0062 * c as f64,
                has_station: false,
            });
        }
    }
    let mut links = Vec::new();
    let mut push = |a: NodeId, b: NodeId, arterial: bool| {
        for (f, t) in [(a, b), (b, a)] {
            links.push(RoadLink {
                id: LinkId(links.len() as u32 + 1),
                from: f,
                to: t,
                free_flow_time: if arterial { 0.75 } else { 1.0 },
                capacity: if arterial { 1200.0 } else { 500.0 },
                length: 0.5,
            });
        }
    };
    for r in 0..side {
        for c in 0..side {
            if c + 1 < side {
                push(id(r, c), id(r, c + 1), r % 3 == 0);
            }
            if r + 1 < side {
                push(id(r, c), id(r + 1, c), c % 3 == 0);
            }
        }
    }
    let n = side * side;

    let mut pairs = std::collections::BTreeMap::new();
    while pairs.len() < cfg.od_pairs.min(n * (n - 1)) {
        let o = rng.random_range(0..n);
        let d = rng.random_range(0..n);
        if o != d {
            let peak = rng.random_range(cfg.peak_trips.0..=cfg.peak_trips.1);
            pairs.entry((o, d)).or_insert(peak);
        }
    }
    let slices: Vec<SliceLabel> = (0..cfg.slices).map(|h| SliceLabel::hour((h % 24) as u8)).collect();
    let mut entries = Vec::new();
    for (h, s) in slices.iter().enumerate() {
        for (&(o, d), &peak) in &pairs {
            let trips = (peak * daily_profile(h)).round();
            if trips > 0.0 {
                entries.push(OdEntry {
                    origin: NodeId(o as u32 + 1),
                    destination: NodeId(d as u32 + 1),
                    slice: s.clone(),
                    trips,
                });
            }
        }
    }

    let mut stations = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    while stations.len() < cfg.existing_stations.min(n) {
        let node = rng.random_range(0..n);
        if used.insert(node) {
            stations.push(ChargingStation {
                id: StationId(stations.len() as u32 + 1),
                name: format!("station-{}", stations.len() + 1),
                node: NodeId(node as u32 + 1),
                chargers: rng.random_range(4..=12),
                is_existing: true,
            });
        }
    }

    let grid = PowerGridCase::ieee14();
    let node_to_bus = (0..n)
        .map(|i| (NodeId(i as u32 + 1), grid.buses[i * grid.buses.len() / n].id))
        .collect();
    let road = RoadNetwork::new(nodes, links).with_station_flags(&stations);
    Scenario {
        road,
        od: OdMatrix {
            slices,
            entries,
            ev_share: cfg.ev_share,
        },
        stations,
        grid,
        coupling: CouplingMap {
            node_to_bus,
            charge_propensity: cfg.charge_propensity,
            energy_per_vehicle: cfg.energy_per_vehicle,
        },
    }
}

/// Small random valid scenario: a strongly connected road graph (a two-way
/// ring plus random chords), random demand over one or two slices, up to two
/// stations, and a connected grid with ample capacity.
pub fn random_scenario(seed: u64, max_nodes: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=max_nodes.max(3));
    let nodes: Vec<RoadNode> = (0..n)
        .map(|i| RoadNode {
            id: NodeId(i as u32 + 1),
            lat: 43.0 + rng.random_range(0.0..0.1),
            lon: -96.0 + rng.random_range(0.0..0.1),
            has_station: false,
        })
        .collect();
    let mut links = Vec::new();
    let mut add = |rng: &mut ChaCha8Rng, a: usize, b: usize| {
        links.push(RoadLink {
            id: LinkId(links.len() as u32 + 1),
            from: NodeId(a as u32 + 1),
            to: NodeId(b as u32 + 1),
            free_flow_time: rng.random_range(1.0..10.0),
            capacity: rng.random_range(50.0..500.0),
            length: rng.random_range(0.1..3.0),
        });
    };
    for i in 0..n {
        add(&mut rng, i, (i + 1) % n);
        add(&mut rng, (i + 1) % n, i);
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            add(&mut rng, a, b);
        }
    }

    let slices: Vec<SliceLabel> = (0..rng.random_range(1..=2u8)).map(SliceLabel::hour).collect();
    let mut entries = Vec::new();
    for s in &slices {
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..rng.random_range(1..=2 * n) {
            let (o, d) = (rng.random_range(0..n), rng.random_range(0..n));
            if o != d && seen.insert((o, d)) {
                entries.push(OdEntry {
                    origin: NodeId(o as u32 + 1),
                    destination: NodeId(d as u32 + 1),
                    slice: s.clone(),
                    trips: rng.random_range(1..=200) as f64,
                });
            }
        }
        // Every slice carries demand, so the OD file form can represent it.
        if seen.is_empty() {
            entries.push(OdEntry {
                origin: NodeId(1),
                destination: NodeId(2),
                slice: s.clone(),
                trips: rng.random_range(1..=200) as f64,
            });
        }
    }

    let mut stations = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for k in 0..rng.random_range(0..=2usize) {
        let node = rng.random_range(0..n);
        if used.insert(node) {
            stations.push(ChargingStation {
                id: StationId(k as u32 + 1),
                name: format!("s{}", k + 1),
                node: NodeId(node as u32 + 1),
                chargers: rng.random_range(1..=10),
                is_existing: true,
            });
        }
    }

    let nb = rng.random_range(2..=5usize);
    let buses: Vec<Bus> = (0..nb)
        .map(|i| {
            let gen = i == 0 || rng.random_bool(0.3);
            Bus {
                id: BusId(i as u32 + 1),
                base_load: if i == 0 { 0.0 } else { rng.random_range(0.0..40.0) },
                v_min: 0.9,
                v_max: 1.1,
                is_generator: gen,
                gen_min: 0.0,
                gen_max: if gen { rng.random_range(200.0..400.0) } else { 0.0 },
                gen_cost: if gen { rng.random_range(5.0..50.0) } else { 0.0 },
            }
        })
        .collect();
    let mut lines = Vec::new();
    for i in 1..nb {
        let parent = rng.random_range(0..i);
        lines.push(Line {
            from: BusId(parent as u32 + 1),
            to: BusId(i as u32 + 1),
            susceptance: rng.random_range(2.0..20.0),
            flow_limit: rng.random_range(200.0..400.0),
        });
    }
    if nb > 2 && rng.random_bool(0.5) {
        lines.push(Line {
            from: BusId(1),
            to: BusId(nb as u32),
            susceptance: rng.random_range(2.0..20.0),
            flow_limit: rng.random_range(20.0..100.0),
        });
    }
    let node_to_bus = (0..n)
        .map(|i| (NodeId(i as u32 + 1), BusId(rng.random_range(1..=nb as u32))))
        .collect();
    let road = RoadNetwork::new(nodes, links).with_station_flags(&stations);
    Scenario {
        road,
        od: OdMatrix {
            slices,
            entries,
            ev_share: rng.random_range(0.05..0.5),
        },
        stations,
        grid: PowerGridCase {
            base_mva: 100.0,
            buses,
            lines,
            slack_bus: BusId(1),
        },
        coupling: CouplingMap {
            node_to_bus,
            charge_propensity: rng.random_range(0.0..1.0),
            energy_per_vehicle: rng.random_range(5.0..60.0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn city_is_valid_and_sized() {
        let s = synthetic_city(&CityConfig::default());
        assert_eq!(s.road.nodes().len(), 100);
        assert_eq!(s.road.links().len(), 360);
        assert_eq!(s.od.slices.len(), 24);
        assert!(s.validate().is_empty(), "{:?}", s.validate());
    }

    #[test]
    fn random_scenarios_validate() {
        for seed in 0..50 {
            let s = random_scenario(seed, 12);
            assert!(s.validate().is_empty(), "seed {seed}: {:?}", s.validate());
        }
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(random_scenario(9, 10), random_scenario(9, 10));
        assert_eq!(synthetic_city(&CityConfig::default()), synthetic_city(&CityConfig::default()));
    }
}
