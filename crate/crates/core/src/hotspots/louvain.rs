//! Louvain modularity maximisation on an undirected weighted graph.

use std::collections::BTreeMap;

/// Undirected weighted graph over vertices `0..n`. Each unordered pair is
/// stored once; self-loops are allowed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Community index per vertex, numbered `0..k` by first appearance.
    pub community: Vec<usize>,
    pub modularity: f64,
    /// Modularity after each completed pass.
    pub pass_modularity: Vec<f64>,
}

impl Partition {
    pub fn count(&self) -> usize {
        self.community.iter().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count()];
        for (v, &c) in self.community.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    /// Weight of self-loops (each counted once).
    self_w: Vec<f64>,
    degree: Vec<f64>,
    m: f64,
}

impl Level {
    fn from_graph(g: &WeightedGraph) -> Level {
        let mut nb: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); g.n];
        let mut self_w = vec![0.0; g.n];
        let mut degree = vec![0.0; g.n];
        let mut m = 0.0;
        for &(a, b, w) in &g.edges {
            m += w;
            if a == b {
                self_w[a] += w;
                degree[a] += 2.0 * w;
            } else {
                *nb[a].entry(b).or_default() += w;
                *nb[b].entry(a).or_default() += w;
                degree[a] += w;
                degree[b] += w;
            }
        }
        Level {
            adj: nb.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_w,
            degree,
            m,
        }
    }

    fn modularity(&self, comm: &[usize], gamma: f64) -> f64 {
        if self.m <= 0.0 {
            return 0.0;
        }
        let k = comm.iter().max().map_or(0, |c| c + 1);
        let mut inside = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for v in 0..self.adj.len() {
            tot[comm[v]] += self.degree[v];
            inside[comm[v]] += self.self_w[v];
            for &(u, w) in &self.adj[v] {
                if u > v && comm[u] == comm[v] {
                    inside[comm[v]] += w;
                }
            }
        }
        (0..k)
            .map(|c| inside[c] / self.m - gamma * (tot[c] / (2.0 * self.m)).powi(2))
            .sum()
    }

    /// Local moving phase; returns whether any vertex changed community.
    fn local_moves(&self, comm: &mut [usize], gamma: f64) -> bool {
        let n = self.adj.len();
        let mut tot = vec![0.0; n];
        for v in 0..n {
            tot[comm[v]] += self.degree[v];
        }
        let two_m = 2.0 * self.m;
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for v in 0..n {
                let cv = comm[v];
                let kv = self.degree[v];
                let mut links: BTreeMap<usize, f64> = BTreeMap::new();
                links.insert(cv, 0.0);
                for &(u, w) in &self.adj[v] {
                    *links.entry(comm[u]).or_default() += w;
                }
                tot[cv] -= kv;
                let gain = |c: usize, kin: f64| kin / self.m - gamma * tot[c] * kv / (two_m * self.m);
                let stay = gain(cv, links[&cv]);
                let mut best = (cv, stay);
                for (&c, &kin) in &links {
                    let g = gain(c, kin);
                    if g > best.1 + 1e-12 * (1.0 + best.1.abs()) {
                        best = (c, g);
                    }
                }
                tot[best.0] += kv;
                if best.0 != cv {
                    comm[v] = best.0;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                return moved_any;
            }
        }
    }

    fn aggregate(&self, comm: &[usize], k: usize) -> Level {
        let mut nb: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        let mut self_w = vec![0.0; k];
        let mut degree = vec![0.0; k];
        for v in 0..self.adj.len() {
            let c = comm[v];
            self_w[c] += self.self_w[v];
            degree[c] += self.degree[v];
            for &(u, w) in &self.adj[v] {
                let d = comm[u];
                if d == c {
                    if u > v {
                        self_w[c] += w;
                    }
                } else {
                    *nb[c].entry(d).or_default() += w;
                }
            }
        }
        Level {
            adj: nb.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_w,
            degree,
            m: self.m,
        }
    }
}

/// Renumbers labels `0..k` in order of first appearance.
fn compact(labels: &mut [usize]) -> usize {
    let mut map = BTreeMap::new();
    let mut order = Vec::new();
    for l in labels.iter() {
        if !map.contains_key(l) {
            map.insert(*l, order.len());
            order.push(*l);
        }
    }
    for l in labels.iter_mut() {
        *l = map[l];
    }
    order.len()
}

/// Vertices are visited in ascending index order, so the result is a pure
/// function of the graph.
pub fn louvain(g: &WeightedGraph, gamma: f64) -> Partition {
    let mut level = Level::from_graph(g);
    let mut assignment: Vec<usize> = (0..g.n).collect();
    let mut pass_modularity = Vec::new();
    let mut modularity = level.modularity(&(0..g.n).collect::<Vec<_>>(), gamma);
    if level.m > 0.0 {
        loop {
            let n = level.adj.len();
            let mut comm: Vec<usize> = (0..n).collect();
            let moved = level.local_moves(&mut comm, gamma);
            if !moved {
                break;
            }
            let k = compact(&mut comm);
            for a in assignment.iter_mut() {
                *a = comm[*a];
            }
            level = level.aggregate(&comm, k);
            modularity = level.modularity(&(0..k).collect::<Vec<_>>(), gamma);
            pass_modularity.push(modularity);
            if k == n {
                break;
            }
        }
    }
    compact(&mut assignment);
    Partition {
        community: assignment,
        modularity,
        pass_modularity,
    }
}
