use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{parse_f64, parse_num, syntax, IngestError};
use crate::model::{ChargingStation, NodeId, RoadNetwork, StationId};

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Nearest road node by great-circle distance; equal distances go to the
/// lowest node id.
pub fn nearest_node(road: &RoadNetwork, lat: f64, lon: f64) -> Option<NodeId> {
    road.nodes()
        .iter()
        .map(|n| (haversine_km(lat, lon, n.lat, n.lon), n.id))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Two or more input stations snapped to the same node and were merged into
/// `kept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeWarning {
    pub node: NodeId,
    pub kept: StationId,
    pub merged: Vec<StationId>,
    pub chargers: u32,
}

/// Parses station inventory and pins each station to its nearest intersection.
/// Stations landing on the same node are merged: chargers are summed and the
/// lowest station id (and its name) survives. A header without rows is an
/// empty inventory; a file without a header is an error.
pub fn parse_stations(
    text: &str,
    road: &RoadNetwork,
) -> Result<(Vec<ChargingStation>, Vec<MergeWarning>), IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        syntax(line, e.to_string())
    };
    let headers = rdr.headers().map_err(err)?.clone();
    if headers.is_empty() {
        return Err(IngestError::EmptyFile("stations"));
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| syntax(1, format!("missing `{name}` column")))
    };
    let (c_id, c_name, c_lat, c_lon, c_ch) =
        (col("id")?, col("name")?, col("lat")?, col("lon")?, col("chargers")?);
    let c_exist = headers.iter().position(|h| h.eq_ignore_ascii_case("existing"));

    let mut by_node: BTreeMap<NodeId, Vec<ChargingStation>> = BTreeMap::new();
    let mut ids = std::collections::BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = StationId(parse_num(line, "station id", &rec[c_id])?);
        if !ids.insert(id) {
            return Err(IngestError::DuplicateId {
                kind: "station",
                id: id.to_string(),
            });
        }
        let lat = parse_f64(line, "lat", &rec[c_lat])?;
        let lon = parse_f64(line, "lon", &rec[c_lon])?;
        let chargers: u32 = parse_num(line, "chargers", &rec[c_ch])?;
        if chargers == 0 {
            return Err(syntax(line, "station needs at least one charger"));
        }
        let is_existing = match c_exist.map(|c| &rec[c]) {
            None | Some("") | Some("1") | Some("true") => true,
            Some("0") | Some("false") => false,
            Some(t) => return Err(syntax(line, format!("invalid existing flag `{t}`"))),
        };
        let node = nearest_node(road, lat, lon)
            .ok_or_else(|| syntax(line, "road network has no nodes to snap to"))?;
        by_node.entry(node).or_default().push(ChargingStation {
            id,
            name: rec[c_name].to_string(),
            node,
            chargers,
            is_existing,
        });
    }

    let mut stations = Vec::new();
    let mut warnings = Vec::new();
    for (node, mut group) in by_node {
        group.sort_by_key(|s| s.id);
        let mut first = group[0].clone();
        if group.len() > 1 {
            first.chargers = group.iter().map(|s| s.chargers).sum();
            first.is_existing = group.iter().any(|s| s.is_existing);
            warnings.push(MergeWarning {
                node,
                kept: first.id,
                merged: group[1..].iter().map(|s| s.id).collect(),
                chargers: first.chargers,
            });
        }
        stations.push(first);
    }
    stations.sort_by_key(|s| s.id);
    Ok((stations, warnings))
}

/// Writes stations at the coordinates of their snapped node, so re-parsing
/// against the same network pins them to the same nodes.
pub fn write_stations(stations: &[ChargingStation], road: &RoadNetwork) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["id", "name", "lat", "lon", "chargers", "existing"]);
    for s in stations {
        let (lat, lon) = road.node(s.node).map(|n| (n.lat, n.lon)).unwrap_or((0.0, 0.0));
        let _ = w.write_record([
            s.id.to_string(),
            s.name.clone(),
            lat.to_string(),
            lon.to_string(),
            s.chargers.to_string(),
            u8::from(s.is_existing).to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RoadNode;

    fn road() -> RoadNetwork {
        let pts = [(3, 0.0, -0.01), (5, 0.5, 0.5), (7, 0.0, 0.01)];
        RoadNetwork::new(
            pts.iter()
                .map(|&(id, lat, lon)| RoadNode { id: NodeId(id), lat, lon, has_station: false })
                .collect(),
            vec![],
        )
    }

    #[test]
    fn exact_coordinates_snap_to_node() {
        let (s, w) = parse_stations("id,name,lat,lon,chargers\n1,A,0.5,0.5,4\n", &road()).unwrap();
        assert_eq!(s[0].node, NodeId(5));
        assert!(w.is_empty());
    }

    #[test]
    fn equidistant_goes_to_lowest_id() {
        let (s, _) = parse_stations("id,name,lat,lon,chargers\n1,A,0,0,4\n", &road()).unwrap();
        assert_eq!(s[0].node, NodeId(3));
    }

    #[test]
    fn collisions_merge() {
        let text = "id,name,lat,lon,chargers\n1,A,0.5,0.5,4\n2,B,0.5001,0.5,6\n";
        let (s, w) = parse_stations(text, &road()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].chargers, 10);
        assert_eq!(s[0].id, StationId(1));
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].merged, vec![StationId(2)]);
    }

    #[test]
    fn empty_file() {
        assert_eq!(parse_stations("id,name,lat,lon,chargers\n", &road()).unwrap().0, vec![]);
        assert_eq!(parse_stations("", &road()).unwrap_err().code(), "empty-file");
    }

    #[test]
    fn haversine_quarter_meridian() {
        let d = haversine_km(0.0, 0.0, 90.0, 0.0);
        assert!((d - EARTH_RADIUS_KM * std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }
}
