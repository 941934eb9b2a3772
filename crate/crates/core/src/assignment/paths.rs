use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{NodeId, RoadNetwork};

/// Compact adjacency view of a [`RoadNetwork`] using positional indices.
#[derive(Clone, Debug)]
pub struct Graph {
    pub(crate) node_ids: Vec<NodeId>,
    /// For each node, outgoing `(link index, head node index)` in link order.
    pub(crate) out: Vec<Vec<(usize, usize)>>,
    pub(crate) link_tail: Vec<usize>,
    pub(crate) link_head: Vec<usize>,
}

impl Graph {
    /// Panics if a link references a node missing from the network; run
    /// validation first.
    pub fn new(road: &RoadNetwork) -> Graph {
        let n = road.nodes().len();
        let mut out = vec![Vec::new(); n];
        let mut link_tail = Vec::with_capacity(road.links().len());
        let mut link_head = Vec::with_capacity(road.links().len());
        for (li, l) in road.links().iter().enumerate() {
            let u = road.node_index(l.from).expect("link tail exists");
            let v = road.node_index(l.to).expect("link head exists");
            out[u].push((li, v));
            link_tail.push(u);
            link_head.push(v);
        }
        Graph {
            node_ids: road.nodes().iter().map(|n| n.id).collect(),
            out,
            link_tail,
            link_head,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn link_count(&self) -> usize {
        self.link_tail.len()
    }

    /// Graph with every link reversed; link indices are preserved.
    pub fn reversed(&self) -> Graph {
        let mut out = vec![Vec::new(); self.node_count()];
        for li in 0..self.link_count() {
            out[self.link_head[li]].push((li, self.link_tail[li]));
        }
        Graph {
            node_ids: self.node_ids.clone(),
            out,
            link_tail: self.link_head.clone(),
            link_head: self.link_tail.clone(),
        }
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path tree.
#[derive(Clone, Debug)]
pub struct Tree {
    pub dist: Vec<f64>,
    pub pred_link: Vec<Option<usize>>,
}

impl Tree {
    /// Link indices from the root to `target`, or `None` if unreachable.
    pub fn path_links(&self, g: &Graph, target: usize) -> Option<Vec<usize>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut links = Vec::new();
        let mut v = target;
        while let Some(l) = self.pred_link[v] {
            links.push(l);
            v = g.link_tail[l];
        }
        links.reverse();
        Some(links)
    }
}

fn node_sequence(g: &Graph, pred_link: &[Option<usize>], target: usize) -> Vec<NodeId> {
    let mut seq = vec![g.node_ids[target]];
    let mut v = target;
    while let Some(l) = pred_link[v] {
        v = g.link_tail[l];
        seq.push(g.node_ids[v]);
    }
    seq.reverse();
    seq
}

/// Dijkstra over non-negative link costs. Among equal-cost paths the one
/// with the lexicographically smallest node-id sequence wins; parallel links
/// with equal cost resolve to the lower link index.
pub fn shortest_path_tree(g: &Graph, root: usize, cost: &[f64]) -> Tree {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred_link: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[root] = 0.0;
    heap.push(Entry(0.0, root));
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(li, v) in &g.out[u] {
            if done[v] {
                continue;
            }
            let nd = d + cost[li];
            if nd < dist[v] {
                dist[v] = nd;
                pred_link[v] = Some(li);
                heap.push(Entry(nd, v));
            } else if nd == dist[v] {
                if let Some(cur) = pred_link[v] {
                    let p = g.link_tail[cur];
                    if p != u
                        && node_sequence(g, &pred_link, u) < node_sequence(g, &pred_link, p)
                    {
                        pred_link[v] = Some(li);
                    }
                }
            }
        }
    }
    Tree { dist, pred_link }
}
