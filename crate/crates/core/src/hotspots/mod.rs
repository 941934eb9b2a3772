//! Traffic hotspots: volume-weighted communities of the road graph, ranked
//! per slice and linked across adjacent slices.

mod louvain;

pub use louvain::{louvain, Partition, WeightedGraph};

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::TimeSlicedState;
use crate::model::{LinkId, NodeId, RoadNetwork, SliceLabel};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HotspotConfig {
    pub top_k: usize,
    pub resolution: f64,
    pub similarity_threshold: f64,
}

impl Default for HotspotConfig {
    fn default() -> Self {
        HotspotConfig {
            top_k: 5,
            resolution: 1.0,
            similarity_threshold: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub slice: SliceLabel,
    pub rank: usize,
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    pub avg_volume: f64,
    pub area_size: usize,
    pub demand_share: f64,
    pub served_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotspotLink {
    pub from_slice: SliceLabel,
    pub from_rank: usize,
    pub to_slice: SliceLabel,
    pub to_rank: usize,
    pub similarity: f64,
}

/// Full output of one slice's detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceHotspots {
    pub slice: SliceLabel,
    /// Top-k by rank.
    pub hotspots: Vec<Hotspot>,
    /// Every community found, as sorted node-id lists in rank order.
    pub communities: Vec<Vec<NodeId>>,
    pub modularity: f64,
    pub pass_modularity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotspotTimeline {
    pub slices: Vec<SliceHotspots>,
    pub links: Vec<HotspotLink>,
}

/// Undirected projection over nodes with positive incident volume, in
/// ascending node-id order. Pair weights sum both directions.
pub fn volume_graph(road: &RoadNetwork, volume: &[f64]) -> (Vec<NodeId>, WeightedGraph) {
    let mut incident: HashMap<NodeId, f64> = HashMap::new();
    for (l, &v) in road.links().iter().zip(volume) {
        if v > 0.0 {
            *incident.entry(l.from).or_default() += v;
            *incident.entry(l.to).or_default() += v;
        }
    }
    let nodes: Vec<NodeId> = incident.keys().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut pairs: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for (l, &v) in road.links().iter().zip(volume) {
        if v > 0.0 {
            let (a, b) = (index[&l.from], index[&l.to]);
            *pairs.entry((a.min(b), a.max(b))).or_default() += v;
        }
    }
    let g = WeightedGraph {
        n: nodes.len(),
        edges: pairs.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
    };
    (nodes, g)
}

/// Detects and ranks the communities of slice `slice` (index into
/// `state.slices`); the top `cfg.top_k` become hotspots.
pub fn detect_hotspots(state: &TimeSlicedState, slice: usize, road: &RoadNetwork, cfg: &HotspotConfig) -> SliceHotspots {
    let s = &state.slices[slice];
    let (nodes, g) = volume_graph(road, &s.link_volume);
    let part = louvain(&g, cfg.resolution);

    let node_pos: HashMap<NodeId, usize> = state.header.node_ids.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut served_at: HashMap<NodeId, f64> = HashMap::new();
    for (k, n) in state.header.station_nodes.iter().enumerate() {
        *served_at.entry(*n).or_default() += s.station_served[k];
    }
    let share = |x: f64| if s.total_demand > 0.0 { (x / s.total_demand).clamp(0.0, 1.0) } else { 0.0 };

    let mut found: Vec<Hotspot> = part
        .members()
        .into_iter()
        .map(|members| {
            let set: BTreeSet<NodeId> = members.iter().map(|&v| nodes[v]).collect();
            let mut links = Vec::new();
            let mut vol = 0.0;
            for (l, &v) in road.links().iter().zip(&s.link_volume) {
                if set.contains(&l.from) && set.contains(&l.to) {
                    links.push(l.id);
                    vol += v;
                }
            }
            let demand: f64 = set.iter().filter_map(|n| node_pos.get(n)).map(|&i| s.node_demand[i]).sum();
            let served: f64 = set.iter().filter_map(|n| served_at.get(n)).sum();
            Hotspot {
                slice: s.slice.clone(),
                rank: 0,
                area_size: set.len(),
                avg_volume: if links.is_empty() { 0.0 } else { vol / links.len() as f64 },
                nodes: set.into_iter().collect(),
                links,
                demand_share: share(demand),
                served_share: share(served),
            }
        })
        .collect();
    found.sort_by(|a, b| b.avg_volume.total_cmp(&a.avg_volume).then(a.nodes[0].cmp(&b.nodes[0])));
    for (i, h) in found.iter_mut().enumerate() {
        h.rank = i + 1;
    }
    let communities = found.iter().map(|h| h.nodes.clone()).collect();
    found.truncate(cfg.top_k.max(1));
    SliceHotspots {
        slice: s.slice.clone(),
        hotspots: found,
        communities,
        modularity: part.modularity,
        pass_modularity: part.pass_modularity,
    }
}

/// Hotspots reordered by node count (largest first, rank breaks ties).
pub fn order_by_area(hotspots: &[Hotspot]) -> Vec<Hotspot> {
    let mut v = hotspots.to_vec();
    v.sort_by(|a, b| b.area_size.cmp(&a.area_size).then(a.rank.cmp(&b.rank)));
    v
}

pub fn jaccard(a: &[NodeId], b: &[NodeId]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn link_hotspots(prev: &[Hotspot], next: &[Hotspot], threshold: f64) -> Vec<HotspotLink> {
    let mut out = Vec::new();
    for a in prev {
        for b in next {
            let similarity = jaccard(&a.nodes, &b.nodes);
            if similarity >= threshold && similarity > 0.0 {
                out.push(HotspotLink {
                    from_slice: a.slice.clone(),
                    from_rank: a.rank,
                    to_slice: b.slice.clone(),
                    to_rank: b.rank,
                    similarity,
                });
            }
        }
    }
    out
}

/// Detection runs per slice in parallel; linking walks adjacent pairs.
pub fn build_timeline(state: &TimeSlicedState, road: &RoadNetwork, cfg: &HotspotConfig) -> HotspotTimeline {
    let slices: Vec<SliceHotspots> = (0..state.slices.len())
        .into_par_iter()
        .map(|i| detect_hotspots(state, i, road, cfg))
        .collect();
    let links = slices
        .windows(2)
        .flat_map(|w| link_hotspots(&w[0].hotspots, &w[1].hotspots, cfg.similarity_threshold))
        .collect();
    HotspotTimeline { slices, links }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs(rank: usize, nodes: &[u32]) -> Hotspot {
        Hotspot {
            slice: SliceLabel::hour(0),
            rank,
            nodes: nodes.iter().map(|&n| NodeId(n)).collect(),
            links: vec![],
            avg_volume: 0.0,
            area_size: nodes.len(),
            demand_share: 0.0,
            served_share: 0.0,
        }
    }

    #[test]
    fn jaccard_examples() {
        let ids = |v: &[u32]| v.iter().map(|&n| NodeId(n)).collect::<Vec<_>>();
        assert_eq!(jaccard(&ids(&[1, 2, 3]), &ids(&[1, 2, 3])), 1.0);
        assert_eq!(jaccard(&ids(&[1, 2]), &ids(&[3])), 0.0);
        assert_eq!(jaccard(&ids(&[1, 2, 3]), &ids(&[2, 3, 4])), 0.5);
    }

    #[test]
    fn disjoint_sets_are_not_linked() {
        let links = link_hotspots(&[hs(1, &[1, 2])], &[hs(1, &[3, 4]), hs(2, &[2, 5])], 0.1);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].to_rank, 2);
        assert!((links[0].similarity - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn area_ordering() {
        let v = order_by_area(&[hs(1, &[1]), hs(2, &[2, 3, 4]), hs(3, &[5, 6, 7])]);
        assert_eq!(v.iter().map(|h| h.rank).collect::<Vec<_>>(), vec![2, 3, 1]);
    }
}
