use super::{AssignmentError, AssignmentResult};
use crate::model::{CouplingMap, NodeId, RoadNetwork};

/// Charging demand per node (kWh, road-node order).
///
/// A node accrues `rho * ev_share * energy_per_vehicle` for every vehicle
/// entering it, i.e. the sum of its inbound link volumes.
pub fn accrue_demand(
    result: &AssignmentResult,
    road: &RoadNetwork,
    coupling: &CouplingMap,
    ev_share: f64,
) -> Vec<f64> {
    let factor = coupling.charge_propensity * ev_share * coupling.energy_per_vehicle;
    let mut inbound = vec![0.0; road.nodes().len()];
    for (l, v) in road.links().iter().zip(&result.link_volume) {
        if let Some(i) = road.node_index(l.to) {
            inbound[i] += v;
        }
    }
    inbound.into_iter().map(|v| factor * v).collect()
}

/// EV volume per link (road link order) that may charge at a station on
/// `station_node`: the flow of every used path visiting the node, scaled by
/// `rho * ev_share`.
pub fn station_attribution(
    result: &AssignmentResult,
    road: &RoadNetwork,
    station_node: NodeId,
    charge_propensity: f64,
    ev_share: f64,
) -> Result<Vec<f64>, AssignmentError> {
    if road.node_index(station_node).is_none() {
        return Err(AssignmentError::UnknownNode(station_node));
    }
    let flows = result
        .od_path_flows
        .as_ref()
        .ok_or(AssignmentError::PathsNotRetained)?;
    let scale = charge_propensity * ev_share;
    let mut out = vec![0.0; road.links().len()];
    for od in flows {
        for p in od.paths.iter().filter(|p| p.nodes.contains(&station_node)) {
            for l in &p.links {
                if let Some(i) = road.link_index(*l) {
                    out[i] += scale * p.flow;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{solve_ue, LinkCostModel, UeOptions};
    use crate::model::{BusId, LinkId, OdEntry, RoadLink, RoadNode, SliceLabel};

    fn coupling(n: u32, rho: f64, energy: f64) -> CouplingMap {
        CouplingMap {
            node_to_bus: (1..=n).map(|i| (NodeId(i), BusId(1))).collect(),
            charge_propensity: rho,
            energy_per_vehicle: energy,
        }
    }

    fn road(links: &[(u32, u32, f64)], n: u32) -> RoadNetwork {
        RoadNetwork::new(
            (1..=n)
                .map(|i| RoadNode { id: NodeId(i), lat: 0.0, lon: 0.0, has_station: false })
                .collect(),
            links
                .iter()
                .enumerate()
                .map(|(i, &(a, b, t0))| RoadLink {
                    id: LinkId(i as u32 + 1),
                    from: NodeId(a),
                    to: NodeId(b),
                    free_flow_time: t0,
                    capacity: 100.0,
                    length: 1.0,
                })
                .collect(),
        )
    }

    fn result(v: Vec<f64>) -> AssignmentResult {
        AssignmentResult { link_volume: v, relative_gap: 0.0, iterations: 1, od_path_flows: None, trace: vec![] }
    }

    #[test]
    fn single_link_formula() {
        let r = road(&[(1, 2, 1.0)], 2);
        let cd = accrue_demand(&result(vec![100.0]), &r, &coupling(2, 0.1, 10.0), 0.5);
        assert_eq!(cd, vec![0.0, 50.0]);
    }

    #[test]
    fn zero_propensity() {
        let r = road(&[(1, 2, 1.0), (2, 1, 1.0)], 2);
        let cd = accrue_demand(&result(vec![7.0, 9.0]), &r, &coupling(2, 0.0, 10.0), 0.5);
        assert!(cd.iter().all(|&d| d == 0.0));
    }

    fn od(o: u32, d: u32, t: f64) -> OdEntry {
        OdEntry { origin: NodeId(o), destination: NodeId(d), slice: SliceLabel::hour(0), trips: t }
    }

    #[test]
    fn attribution_on_single_path() {
        let r = road(&[(1, 2, 1.0), (2, 3, 1.0)], 3);
        let opts = UeOptions { retain_paths: true, ..UeOptions::default() };
        let a = solve_ue(&r, &[od(1, 3, 40.0)], &LinkCostModel::default(), &opts).unwrap();
        let att = station_attribution(&a, &r, NodeId(2), 0.1, 0.5).unwrap();
        assert!(att.iter().all(|&v| (v - 0.1 * 0.5 * 40.0).abs() < 1e-12));
        assert_eq!(
            station_attribution(&a, &r, NodeId(9), 0.1, 0.5),
            Err(AssignmentError::UnknownNode(NodeId(9)))
        );
    }

    #[test]
    fn attribution_off_path_is_zero() {
        let r = road(&[(1, 2, 1.0), (3, 1, 1.0)], 3);
        let opts = UeOptions { retain_paths: true, ..UeOptions::default() };
        let a = solve_ue(&r, &[od(1, 2, 40.0)], &LinkCostModel::default(), &opts).unwrap();
        let att = station_attribution(&a, &r, NodeId(3), 0.1, 0.5).unwrap();
        assert!(att.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn attribution_requires_paths() {
        let r = road(&[(1, 2, 1.0)], 2);
        let a = solve_ue(&r, &[od(1, 2, 4.0)], &LinkCostModel::default(), &UeOptions::default()).unwrap();
        assert_eq!(
            station_attribution(&a, &r, NodeId(1), 0.1, 0.5),
            Err(AssignmentError::PathsNotRetained)
        );
    }
}
