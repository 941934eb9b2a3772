use std::collections::BTreeMap;

use rayon::prelude::*;

use super::paths::{shortest_path_tree, Graph};
use super::{
    AssignmentError, AssignmentResult, IterationStat, LinkCostModel, OdPathFlows, PathFlow, UeOptions,
};
use crate::model::{OdEntry, RoadNetwork};

struct Od {
    origin: usize,
    dest: usize,
    demand: f64,
}

struct Loading {
    volume: Vec<f64>,
    /// Shortest-path travel time, sum over OD of demand * cost.
    sptt: f64,
    /// AON path per OD (only when retaining paths).
    paths: Vec<Vec<usize>>,
}

struct Problem<'a> {
    graph: Graph,
    t0: Vec<f64>,
    cap: Vec<f64>,
    cost: &'a LinkCostModel,
    ods: Vec<Od>,
    /// origin index -> OD indices, ascending origin.
    by_origin: Vec<(usize, Vec<usize>)>,
}

impl Problem<'_> {
    fn times(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(a, &v)| self.cost.travel_time(self.t0[a], self.cap[a], v))
            .collect()
    }

    fn beckmann(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(a, &v)| self.cost.integral(self.t0[a], self.cap[a], v))
            .sum()
    }

    /// All-or-nothing loading on fixed link times. Shortest path trees are
    /// built in parallel per origin; contributions are summed in origin order
    /// so the result does not depend on the thread count.
    fn all_or_nothing(&self, times: &[f64], keep_paths: bool) -> Result<Loading, Vec<usize>> {
        let per_origin: Vec<_> = self
            .by_origin
            .par_iter()
            .map(|(o, ods)| {
                let tree = shortest_path_tree(&self.graph, *o, times);
                let mut contrib = Vec::new();
                let mut paths = Vec::new();
                let mut sptt = 0.0;
                let mut missing = Vec::new();
                for &k in ods {
                    let od = &self.ods[k];
                    match tree.path_links(&self.graph, od.dest) {
                        Some(p) => {
                            sptt += od.demand * tree.dist[od.dest];
                            for &l in &p {
                                contrib.push((l, od.demand));
                            }
                            if keep_paths {
                                paths.push((k, p));
                            }
                        }
                        None => missing.push(k),
                    }
                }
                (contrib, sptt, paths, missing)
            })
            .collect();

        let mut volume = vec![0.0; self.graph.link_count()];
        let mut sptt = 0.0;
        let mut all_paths = vec![Vec::new(); if keep_paths { self.ods.len() } else { 0 }];
        let mut missing = Vec::new();
        for (contrib, s, paths, miss) in per_origin {
            for (l, f) in contrib {
                volume[l] += f;
            }
            sptt += s;
            for (k, p) in paths {
                all_paths[k] = p;
            }
            missing.extend(miss);
        }
        if !missing.is_empty() {
            return Err(missing);
        }
        Ok(Loading {
            volume,
            sptt,
            paths: all_paths,
        })
    }

    /// Exact line search by bisection on the directional derivative of the
    /// Beckmann objective over `[0, 1]`.
    fn line_search(&self, x: &[f64], y: &[f64]) -> f64 {
        let slope = |lambda: f64| -> f64 {
            x.iter()
                .zip(y)
                .enumerate()
                .map(|(a, (&xa, &ya))| {
                    let d = ya - xa;
                    if d == 0.0 {
                        0.0
                    } else {
                        d * self.cost.travel_time(self.t0[a], self.cap[a], xa + lambda * d)
                    }
                })
                .sum()
        };
        if slope(1.0) <= 0.0 {
            return 1.0;
        }
        if slope(0.0) >= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn link_time(&self, a: usize, v: f64) -> f64 {
        self.cost.travel_time(self.t0[a], self.cap[a], v.max(0.0))
    }

    /// One Gauss-Seidel sweep of path-based gradient projection: per OD, flow
    /// moves from each costlier used path onto the current shortest path by
    /// an exact line search on the links the two paths do not share.
    fn projection_sweep(&self, x: &mut [f64], flows: &mut [Vec<(Vec<usize>, f64)>]) {
        let mut times = self.times(x);
        for (o, ods) in &self.by_origin {
            let tree = shortest_path_tree(&self.graph, *o, &times);
            for &k in ods {
                let sp = tree
                    .path_links(&self.graph, self.ods[k].dest)
                    .expect("reachability checked on the first loading");
                let set = &mut flows[k];
                let s = match set.iter().position(|(l, _)| *l == sp) {
                    Some(i) => i,
                    None => {
                        set.push((sp, 0.0));
                        set.len() - 1
                    }
                };
                for i in 0..set.len() {
                    if i == s || set[i].1 <= 0.0 {
                        continue;
                    }
                    let only_p: Vec<usize> = set[i].0.iter().copied().filter(|a| !set[s].0.contains(a)).collect();
                    let only_s: Vec<usize> = set[s].0.iter().copied().filter(|a| !set[i].0.contains(a)).collect();
                    let excess = |d: f64| -> f64 {
                        only_p.iter().map(|&a| self.link_time(a, x[a] - d)).sum::<f64>()
                            - only_s.iter().map(|&a| self.link_time(a, x[a] + d)).sum::<f64>()
                    };
                    if excess(0.0) <= 0.0 {
                        continue;
                    }
                    let f = set[i].1;
                    let d = if excess(f) >= 0.0 {
                        f
                    } else {
                        let (mut lo, mut hi) = (0.0_f64, f);
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            if excess(mid) > 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                            if hi - lo <= 1e-15 * f {
                                break;
                            }
                        }
                        0.5 * (lo + hi)
                    };
                    for &a in &only_p {
                        x[a] -= d;
                        times[a] = self.link_time(a, x[a]);
                    }
                    for &a in &only_s {
                        x[a] += d;
                        times[a] = self.link_time(a, x[a]);
                    }
                    set[i].1 = if d == f { 0.0 } else { f - d };
                    set[s].1 += d;
                }
                set.retain(|(_, f)| *f > 0.0);
            }
        }
    }

    /// Largest relative excess of a used path's cost over its OD minimum.
    fn path_excess(&self, x: &[f64], flows: &[Vec<(Vec<usize>, f64)>]) -> f64 {
        let times = self.times(x);
        self.by_origin
            .par_iter()
            .map(|(o, ods)| {
                let tree = shortest_path_tree(&self.graph, *o, &times);
                ods.iter()
                    .flat_map(|&k| {
                        let best = tree.dist[self.ods[k].dest];
                        flows[k].iter().map(move |(links, _)| (links, best))
                    })
                    .map(|(links, best)| {
                        let c: f64 = links.iter().map(|&a| times[a]).sum();
                        if best > 0.0 { (c - best) / best } else { 0.0 }
                    })
                    .fold(0.0_f64, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    fn gap(&self, x: &[f64]) -> f64 {
        let times = self.times(x);
        let aon = self.all_or_nothing(&times, false).expect("reachability checked on the first loading");
        let tstt: f64 = x.iter().zip(&times).map(|(v, t)| v * t).sum();
        if tstt > 0.0 {
            ((tstt - aon.sptt) / tstt).max(0.0)
        } else {
            0.0
        }
    }
}

/// Solves the static user-equilibrium assignment for one slice of demand with
/// the Frank-Wolfe algorithm.
///
/// Each iteration loads all demand onto current shortest paths and moves
/// towards that loading by the step minimising the Beckmann objective. Stops
/// when the relative gap `(TSTT - SPTT) / TSTT` reaches `opts.tol` or after
/// `opts.max_iter` gap evaluations; failing to converge is reported through
/// `relative_gap`, not as an error.
///
/// With `retain_paths`, the Frank-Wolfe stage is followed by gradient
/// projection sweeps over the path sets (at most `opts.max_iter` more)
/// until every used path is within `opts.tol` of its OD minimum cost.
pub fn solve_ue(
    road: &RoadNetwork,
    demand: &[OdEntry],
    cost: &LinkCostModel,
    opts: &UeOptions,
) -> Result<AssignmentResult, AssignmentError> {
    if !(opts.tol > 0.0) {
        return Err(AssignmentError::InvalidTolerance(opts.tol));
    }
    cost.validate()?;
    let graph = Graph::new(road);
    let mut ods = Vec::new();
    for e in demand.iter().filter(|e| e.trips > 0.0) {
        let origin = road
            .node_index(e.origin)
            .ok_or(AssignmentError::UnknownNode(e.origin))?;
        let dest = road
            .node_index(e.destination)
            .ok_or(AssignmentError::UnknownNode(e.destination))?;
        ods.push(Od {
            origin,
            dest,
            demand: e.trips,
        });
    }
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, od) in ods.iter().enumerate() {
        grouped.entry(od.origin).or_default().push(k);
    }
    let p = Problem {
        t0: road.links().iter().map(|l| l.free_flow_time).collect(),
        cap: road.links().iter().map(|l| l.capacity).collect(),
        graph,
        cost,
        ods,
        by_origin: grouped.into_iter().collect(),
    };
    let keep = opts.retain_paths;

    let initial = p.all_or_nothing(&p.t0, keep).map_err(|missing| {
        AssignmentError::Disconnected(
            missing
                .into_iter()
                .map(|k| {
                    let od = &p.ods[k];
                    (p.graph.node_ids[od.origin], p.graph.node_ids[od.dest])
                })
                .collect(),
        )
    })?;
    let mut x = initial.volume;
    let mut path_flows: Vec<Vec<(Vec<usize>, f64)>> = if keep {
        initial
            .paths
            .into_iter()
            .zip(&p.ods)
            .map(|(path, od)| vec![(path, od.demand)])
            .collect()
    } else {
        Vec::new()
    };

    let mut trace = Vec::new();
    let mut gap;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let times = p.times(&x);
        let aon = p
            .all_or_nothing(&times, keep)
            .expect("reachability checked on the first loading");
        let tstt: f64 = x.iter().zip(&times).map(|(v, t)| v * t).sum();
        gap = if tstt > 0.0 {
            ((tstt - aon.sptt) / tstt).max(0.0)
        } else {
            0.0
        };
        let objective = p.beckmann(&x);
        if gap <= opts.tol || iterations >= opts.max_iter {
            trace.push(IterationStat {
                relative_gap: gap,
                objective,
                step: 0.0,
            });
            break;
        }
        let step = p.line_search(&x, &aon.volume);
        trace.push(IterationStat {
            relative_gap: gap,
            objective,
            step,
        });
        for (xa, ya) in x.iter_mut().zip(&aon.volume) {
            *xa += step * (ya - *xa);
        }
        if keep {
            for (k, flows) in path_flows.iter_mut().enumerate() {
                for f in flows.iter_mut() {
                    f.1 *= 1.0 - step;
                }
                let target = &aon.paths[k];
                let add = step * p.ods[k].demand;
                match flows.iter_mut().find(|(links, _)| links == target) {
                    Some(f) => f.1 += add,
                    None => flows.push((target.clone(), add)),
                }
            }
        }
    }

    // Frank-Wolfe path sets keep every early all-or-nothing path with a
    // geometrically decaying share; polish them to a path-level equilibrium.
    if keep {
        let budget = iterations + opts.max_iter;
        while iterations < budget && (gap > opts.tol || p.path_excess(&x, &path_flows) > opts.tol) {
            iterations += 1;
            p.projection_sweep(&mut x, &mut path_flows);
            gap = p.gap(&x);
            trace.push(IterationStat {
                relative_gap: gap,
                objective: p.beckmann(&x),
                step: 0.0,
            });
        }
    }

    let od_path_flows = keep.then(|| {
        p.ods
            .iter()
            .zip(path_flows)
            .map(|(od, flows)| OdPathFlows {
                origin: p.graph.node_ids[od.origin],
                destination: p.graph.node_ids[od.dest],
                demand: od.demand,
                paths: flows
                    .into_iter()
                    .filter(|(_, f)| *f > 0.0)
                    .map(|(links, flow)| {
                        let mut nodes = vec![p.graph.node_ids[od.origin]];
                        nodes.extend(links.iter().map(|&l| p.graph.node_ids[p.graph.link_head[l]]));
                        PathFlow {
                            nodes,
                            links: links.iter().map(|&l| road.links()[l].id).collect(),
                            flow,
                        }
                    })
                    .collect(),
            })
            .collect()
    });

    Ok(AssignmentResult {
        link_volume: x,
        relative_gap: gap,
        iterations,
        od_path_flows,
        trace,
    })
}
