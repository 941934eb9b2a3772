//! Shared domain types for the coupled road/grid model.
//!
//! Everything here is plain data: constructors build lookup indices but do not
//! reject inconsistent input. [`validate_scenario`] is the single place that
//! checks invariants and cross references, and it reports problems instead of
//! failing so a caller can show every violation at once.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Road intersection id.
    NodeId
);
id_type!(
    /// Directed road link id.
    LinkId
);
id_type!(
    /// Power-grid bus id.
    BusId
);
id_type!(
    /// Charging station id.
    StationId
);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadNode {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
    pub has_station: bool,
}

/// A directed road segment. Two-way roads are two links.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadLink {
    pub id: LinkId,
    pub from: NodeId,
    pub to: NodeId,
    /// Minutes.
    pub free_flow_time: f64,
    /// Vehicles per slice.
    pub capacity: f64,
    /// Kilometres.
    pub length: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RoadNetwork {
    nodes: Vec<RoadNode>,
    links: Vec<RoadLink>,
    node_index: HashMap<NodeId, usize>,
    link_index: HashMap<LinkId, usize>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.links == other.links
    }
}

impl RoadNetwork {
    /// Builds the network and its id lookups. Duplicate ids resolve to the
    /// first occurrence; use [`validate_scenario`] to detect them.
    pub fn new(nodes: Vec<RoadNode>, links: Vec<RoadLink>) -> Self {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            node_index.entry(n.id).or_insert(i);
        }
        let mut link_index = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            link_index.entry(l.id).or_insert(i);
        }
        RoadNetwork {
            nodes,
            links,
            node_index,
            link_index,
        }
    }

    pub fn nodes(&self) -> &[RoadNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[RoadLink] {
        &self.links
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn link_index(&self, id: LinkId) -> Option<usize> {
        self.link_index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&RoadNode> {
        self.node_index(id).map(|i| &self.nodes[i])
    }

    /// Returns a copy with `has_station` set from the given station list.
    pub fn with_station_flags(&self, stations: &[ChargingStation]) -> RoadNetwork {
        let occupied: BTreeSet<NodeId> = stations.iter().map(|s| s.node).collect();
        let nodes = self
            .nodes
            .iter()
            .map(|n| RoadNode {
                has_station: occupied.contains(&n.id),
                ..n.clone()
            })
            .collect();
        RoadNetwork::new(nodes, self.links.clone())
    }
}

/// Hour-of-day slice label, `h00`..`h23`, optionally prefixed by a date as
/// `YYYY-MM-DD/h08` for multi-day data. Ordering is chronological.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SliceLabel(String);

impl SliceLabel {
    pub fn parse(s: &str) -> Option<SliceLabel> {
        let (date, hour) = match s.split_once('/') {
            Some((d, h)) => (Some(d), h),
            None => (None, s),
        };
        if let Some(d) = date {
            let b = d.as_bytes();
            let ok = b.len() == 10
                && b[4] == b'-'
                && b[7] == b'-'
                && b.iter()
                    .enumerate()
                    .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit());
            if !ok {
                return None;
            }
        }
        let digits = hour.strip_prefix('h')?;
        if digits.len() != 2 || !digits.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let h: u8 = digits.parse().ok()?;
        (h < 24).then(|| SliceLabel(s.to_string()))
    }

    pub fn hour(h: u8) -> SliceLabel {
        assert!(h < 24, "hour out of range");
        SliceLabel(format!("h{h:02}"))
    }

    pub fn with_date(date: &str, h: u8) -> Option<SliceLabel> {
        SliceLabel::parse(&format!("{date}/h{h:02}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn date(&self) -> Option<&str> {
        self.0.split_once('/').map(|(d, _)| d)
    }

    pub fn hour_of_day(&self) -> u8 {
        let h = self.0.rsplit('h').next().unwrap_or("0");
        h.parse().unwrap_or(0)
    }
}

impl fmt::Display for SliceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for SliceLabel {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        SliceLabel::parse(&s).ok_or_else(|| format!("invalid slice label `{s}`"))
    }
}

impl From<SliceLabel> for String {
    fn from(s: SliceLabel) -> String {
        s.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdEntry {
    pub origin: NodeId,
    pub destination: NodeId,
    pub slice: SliceLabel,
    /// Vehicles (all powertrains).
    pub trips: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdMatrix {
    pub slices: Vec<SliceLabel>,
    pub entries: Vec<OdEntry>,
    /// Fraction of trips made by EVs.
    pub ev_share: f64,
}

impl OdMatrix {
    pub fn entries_for<'a>(&'a self, slice: &'a SliceLabel) -> impl Iterator<Item = &'a OdEntry> {
        self.entries.iter().filter(move |e| &e.slice == slice)
    }

    pub fn scaled(&self, factor: f64) -> OdMatrix {
        OdMatrix {
            entries: self
                .entries
                .iter()
                .map(|e| OdEntry {
                    trips: e.trips * factor,
                    ..e.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingStation {
    pub id: StationId,
    pub name: String,
    pub node: NodeId,
    /// Number of chargers, the station "size".
    pub chargers: u32,
    pub is_existing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    /// MW.
    pub base_load: f64,
    /// Per-unit.
    pub v_min: f64,
    pub v_max: f64,
    pub is_generator: bool,
    /// MW.
    pub gen_min: f64,
    pub gen_max: f64,
    /// $/MWh.
    pub gen_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    /// Per-unit on the case MVA base.
    pub susceptance: f64,
    /// MW.
    pub flow_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerGridCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub slack_bus: BusId,
}

impl PowerGridCase {
    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// The bundled IEEE 14-bus test case.
    pub fn ieee14() -> PowerGridCase {
        crate::ingest::parse_grid_case(include_str!("../fixtures/ieee14.case"))
            .expect("bundled IEEE-14 case parses")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMap {
    pub node_to_bus: Vec<(NodeId, BusId)>,
    /// Fraction of EV flow entering a node that becomes charging demand.
    pub charge_propensity: f64,
    /// kWh per charging vehicle.
    pub energy_per_vehicle: f64,
}

impl CouplingMap {
    pub fn bus_of(&self, node: NodeId) -> Option<BusId> {
        self.node_to_bus
            .iter()
            .find(|(n, _)| *n == node)
            .map(|(_, b)| *b)
    }

    pub fn lookup(&self) -> HashMap<NodeId, BusId> {
        self.node_to_bus.iter().copied().collect()
    }
}

/// One violation found by [`validate_scenario`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    /// Machine-readable code, e.g. `unknown-node`.
    pub code: String,
    /// Offending entity, e.g. `station:4` or `link:12`.
    pub entity: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, code: &str) -> usize {
        self.violations.iter().filter(|v| v.code == code).count()
    }

    fn push(&mut self, code: &str, entity: String, message: String) {
        self.violations.push(Violation {
            code: code.to_string(),
            entity,
            message,
        });
    }
}

/// Checks every invariant of the five scenario inputs and their cross
/// references. Pure: the same input always yields the same report.
pub fn validate_scenario(
    road: &RoadNetwork,
    od: &OdMatrix,
    stations: &[ChargingStation],
    grid: &PowerGridCase,
    coupling: &CouplingMap,
) -> ValidationReport {
    let mut r = ValidationReport::default();

    let mut seen = BTreeSet::new();
    for n in road.nodes() {
        if !seen.insert(n.id) {
            r.push("duplicate-node", format!("node:{}", n.id), "node id repeated".into());
        }
        if !n.lat.is_finite() || !n.lon.is_finite() {
            r.push("bad-coordinate", format!("node:{}", n.id), "non-finite coordinate".into());
        }
    }
    let mut seen = BTreeSet::new();
    for l in road.links() {
        let e = format!("link:{}", l.id);
        if !seen.insert(l.id) {
            r.push("duplicate-link", e.clone(), "link id repeated".into());
        }
        for end in [l.from, l.to] {
            if road.node_index(end).is_none() {
                r.push("unknown-node", e.clone(), format!("endpoint {end} does not exist"));
            }
        }
        if !(l.free_flow_time > 0.0 && l.free_flow_time.is_finite()) {
            r.push("bad-free-flow-time", e.clone(), format!("free_flow_time {}", l.free_flow_time));
        }
        if !(l.capacity > 0.0 && l.capacity.is_finite()) {
            r.push("bad-capacity", e.clone(), format!("capacity {}", l.capacity));
        }
        if !(l.length >= 0.0 && l.length.is_finite()) {
            r.push("bad-length", e, format!("length {}", l.length));
        }
    }

    if !(0.0..=1.0).contains(&od.ev_share) {
        r.push("bad-ev-share", "od".into(), format!("ev_share {}", od.ev_share));
    }
    let mut seen = BTreeSet::new();
    let known_slices: BTreeSet<&SliceLabel> = od.slices.iter().collect();
    for e in &od.entries {
        let ent = format!("od:{}>{}@{}", e.origin, e.destination, e.slice);
        if !(e.trips >= 0.0 && e.trips.is_finite()) {
            r.push("negative-trips", ent.clone(), format!("trips {}", e.trips));
        }
        if e.origin == e.destination {
            r.push("self-trip", ent.clone(), "origin equals destination".into());
        }
        for end in [e.origin, e.destination] {
            if road.node_index(end).is_none() {
                r.push("unknown-node", ent.clone(), format!("node {end} does not exist"));
            }
        }
        if !known_slices.contains(&e.slice) {
            r.push("unknown-slice", ent.clone(), "slice not declared".into());
        }
        if !seen.insert((e.origin, e.destination, e.slice.clone())) {
            r.push("duplicate-od", ent, "entry repeated".into());
        }
    }

    let mut seen_ids = BTreeSet::new();
    let mut seen_nodes = BTreeSet::new();
    for s in stations {
        let e = format!("station:{}", s.id);
        if !seen_ids.insert(s.id) {
            r.push("duplicate-station", e.clone(), "station id repeated".into());
        }
        if road.node_index(s.node).is_none() {
            r.push("unknown-node", e.clone(), format!("node {} does not exist", s.node));
        }
        if s.chargers < 1 {
            r.push("bad-chargers", e.clone(), "station needs at least one charger".into());
        }
        if !seen_nodes.insert(s.node) {
            r.push("station-collision", e, format!("node {} already has a station", s.node));
        }
    }

    let mut seen = BTreeSet::new();
    for b in &grid.buses {
        let e = format!("bus:{}", b.id);
        if !seen.insert(b.id) {
            r.push("duplicate-bus", e.clone(), "bus id repeated".into());
        }
        if !(b.v_min < b.v_max) {
            r.push("bounds-order", e.clone(), format!("v_min {} >= v_max {}", b.v_min, b.v_max));
        }
        if !(b.base_load >= 0.0) {
            r.push("negative-load", e.clone(), format!("base load {}", b.base_load));
        }
        if b.is_generator && !(b.gen_min >= 0.0 && b.gen_min <= b.gen_max) {
            r.push(
                "bounds-order",
                e,
                format!("generation bounds [{}, {}]", b.gen_min, b.gen_max),
            );
        }
    }
    if grid.bus_index(grid.slack_bus).is_none() {
        r.push("missing-slack", "grid".into(), format!("slack bus {} does not exist", grid.slack_bus));
    }
    if !(grid.base_mva > 0.0) {
        r.push("bad-base-mva", "grid".into(), format!("base MVA {}", grid.base_mva));
    }
    for (i, l) in grid.lines.iter().enumerate() {
        let e = format!("line:{i}");
        for end in [l.from, l.to] {
            if grid.bus_index(end).is_none() {
                r.push("unknown-bus", e.clone(), format!("bus {end} does not exist"));
            }
        }
        if !(l.susceptance > 0.0) {
            r.push("bad-susceptance", e.clone(), format!("susceptance {}", l.susceptance));
        }
        if !(l.flow_limit > 0.0) {
            r.push("bad-flow-limit", e, format!("flow limit {}", l.flow_limit));
        }
    }

    let mut mapped = BTreeSet::new();
    for (n, b) in &coupling.node_to_bus {
        let e = format!("coupling:{n}");
        if !mapped.insert(*n) {
            r.push("duplicate-mapping", e.clone(), "node mapped twice".into());
        }
        if road.node_index(*n).is_none() {
            r.push("unknown-node", e.clone(), format!("node {n} does not exist"));
        }
        if grid.bus_index(*b).is_none() {
            r.push("unknown-bus", e, format!("bus {b} does not exist"));
        }
    }
    for n in road.nodes() {
        if !mapped.contains(&n.id) {
            r.push("uncovered-node", format!("node:{}", n.id), "node has no bus".into());
        }
    }
    if !(0.0..=1.0).contains(&coupling.charge_propensity) {
        r.push(
            "bad-propensity",
            "coupling".into(),
            format!("charge propensity {}", coupling.charge_propensity),
        );
    }
    if !(coupling.energy_per_vehicle > 0.0 && coupling.energy_per_vehicle.is_finite()) {
        r.push(
            "bad-energy",
            "coupling".into(),
            format!("energy per vehicle {}", coupling.energy_per_vehicle),
        );
    }

    r
}
