//! DC optimal power flow with nodal prices and a linear voltage estimate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LinearProgram, LpError, Relation};
use crate::model::{BusId, PowerGridCase};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpfConfig {
    /// Per-unit voltage drop per (per-unit reactance x per-unit load).
    pub voltage_sensitivity: f64,
}

impl Default for OpfConfig {
    fn default() -> Self {
        OpfConfig {
            voltage_sensitivity: 1.0,
        }
    }
}

/// All vectors are in bus order of the case, except `line_flow` (line order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpfResult {
    pub bus_ids: Vec<BusId>,
    /// Requested load: base plus charging, MW.
    pub bus_load: Vec<f64>,
    pub charging_load: Vec<f64>,
    /// Charging load that could not be delivered, MW.
    pub shed: Vec<f64>,
    pub bus_voltage: Vec<f64>,
    /// Pre-clamp estimate minus the clamped value (negative below v_min).
    pub voltage_violation: Vec<f64>,
    pub bus_price: Vec<f64>,
    /// Zero at buses without a generator.
    pub generation: Vec<f64>,
    pub line_flow: Vec<f64>,
    pub served_fraction: Vec<f64>,
    pub feasible: bool,
    pub cost: f64,
    pub dual_objective: f64,
}

impl OpfResult {
    pub fn served_load(&self, i: usize) -> f64 {
        self.bus_load[i] - self.shed[i]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error("bus {0} carries load but has no path to generation")]
    StructurallyInfeasible(BusId),
    #[error("charging load vector has {got} entries, case has {expected} buses")]
    LoadLength { expected: usize, got: usize },
    #[error("charging load at bus {0} is negative or not finite")]
    BadLoad(BusId),
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
}

/// Variable layout of the dispatch LP.
struct Layout {
    gen: Vec<Option<usize>>,
    theta: Vec<Option<(usize, usize)>>,
    sigma: Option<usize>,
}

fn build_lp(grid: &PowerGridCase, base: &[f64], charging: &[f64], sigma: Option<f64>) -> (LinearProgram, Layout, Vec<usize>) {
    let n = grid.buses.len();
    let mut lp = LinearProgram::default();
    let gen = grid
        .buses
        .iter()
        .map(|b| b.is_generator.then(|| lp.add_var(if sigma.is_some() { b.gen_cost } else { 0.0 })))
        .collect::<Vec<_>>();
    let theta = grid
        .buses
        .iter()
        .map(|b| (b.id != grid.slack_bus).then(|| (lp.add_var(0.0), lp.add_var(0.0))))
        .collect::<Vec<_>>();
    let sigma_var = sigma.is_none().then(|| lp.add_var(-1.0));
    let lay = Layout {
        gen,
        theta,
        sigma: sigma_var,
    };

    // Flow on a line as coefficients over theta variables.
    let flow_terms = |f: usize, t: usize, k: f64, out: &mut Vec<(usize, f64)>| {
        if let Some((p, m)) = lay.theta[f] {
            out.push((p, k));
            out.push((m, -k));
        }
        if let Some((p, m)) = lay.theta[t] {
            out.push((p, -k));
            out.push((m, k));
        }
    };
    let ends: Vec<(usize, usize)> = grid
        .lines
        .iter()
        .map(|l| (grid.bus_index(l.from).unwrap_or(0), grid.bus_index(l.to).unwrap_or(0)))
        .collect();

    let mut balance_rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::new();
        if let Some(g) = lay.gen[i] {
            row.push((g, 1.0));
        }
        for (l, &(f, t)) in grid.lines.iter().zip(&ends) {
            let k = grid.base_mva * l.susceptance;
            if f == i {
                flow_terms(f, t, -k, &mut row);
            }
            if t == i {
                flow_terms(f, t, k, &mut row);
            }
        }
        let rhs = match sigma {
            Some(s) => base[i] + s * charging[i],
            None => {
                if charging[i] > 0.0 {
                    row.push((lay.sigma.unwrap_or(0), -charging[i]));
                }
                base[i]
            }
        };
        balance_rows.push(lp.add_row(row, Relation::Eq, rhs));
    }
    for (l, &(f, t)) in grid.lines.iter().zip(&ends) {
        let k = grid.base_mva * l.susceptance;
        let mut row = Vec::new();
        flow_terms(f, t, k, &mut row);
        if row.is_empty() {
            continue;
        }
        let neg = row.iter().map(|&(j, a)| (j, -a)).collect();
        lp.add_row(row, Relation::Le, l.flow_limit);
        lp.add_row(neg, Relation::Le, l.flow_limit);
    }
    for (b, g) in grid.buses.iter().zip(&lay.gen) {
        if let Some(g) = *g {
            lp.add_row(vec![(g, 1.0)], Relation::Le, b.gen_max);
            if b.gen_min > 0.0 {
                lp.add_row(vec![(g, 1.0)], Relation::Ge, b.gen_min);
            }
        }
    }
    if let Some(s) = lay.sigma {
        lp.add_row(vec![(s, 1.0)], Relation::Le, 1.0);
    }
    (lp, lay, balance_rows)
}

/// Buses grouped into islands by lines with positive susceptance.
fn islands(grid: &PowerGridCase) -> Vec<usize> {
    let n = grid.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for l in &grid.lines {
        if let (Some(a), Some(b)) = (grid.bus_index(l.from), grid.bus_index(l.to)) {
            if l.susceptance > 0.0 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

#[derive(PartialEq)]
struct Entry(f64, usize);
impl Eq for Entry {}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest reactance-weighted distance from the slack bus.
pub fn electrical_distance(grid: &PowerGridCase) -> Vec<f64> {
    let n = grid.buses.len();
    let mut adj = vec![Vec::new(); n];
    for l in &grid.lines {
        if let (Some(a), Some(b)) = (grid.bus_index(l.from), grid.bus_index(l.to)) {
            if l.susceptance > 0.0 {
                adj[a].push((b, 1.0 / l.susceptance));
                adj[b].push((a, 1.0 / l.susceptance));
            }
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    let Some(s) = grid.bus_index(grid.slack_bus) else { return dist };
    dist[s] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, s)]);
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            if d + w < dist[v] {
                dist[v] = d + w;
                heap.push(Entry(d + w, v));
            }
        }
    }
    dist
}

/// Solves the dispatch for one slice. `charging_load` is MW per bus in case
/// order. When the full load cannot be delivered, a common fraction of every
/// charging load is served and the rest is shed; base load is never shed.
pub fn solve_opf(grid: &PowerGridCase, charging_load: &[f64], cfg: &OpfConfig) -> Result<OpfResult, OpfError> {
    let n = grid.buses.len();
    if charging_load.len() != n {
        return Err(OpfError::LoadLength {
            expected: n,
            got: charging_load.len(),
        });
    }
    for (b, &c) in grid.buses.iter().zip(charging_load) {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(OpfError::BadLoad(b.id));
        }
    }
    let base: Vec<f64> = grid.buses.iter().map(|b| b.base_load).collect();
    let isl = islands(grid);
    for (i, b) in grid.buses.iter().enumerate() {
        let has_gen = grid.buses.iter().enumerate().any(|(j, g)| isl[j] == isl[i] && g.is_generator && g.gen_max > 0.0);
        if base[i] + charging_load[i] > 0.0 && !has_gen {
            return Err(OpfError::StructurallyInfeasible(b.id));
        }
    }

    let mut sigma = 1.0;
    let (mut lp, mut lay, mut rows) = build_lp(grid, &base, charging_load, Some(1.0));
    let mut sol = lp.solve();
    if sol == Err(LpError::Infeasible) && charging_load.iter().any(|&c| c > 0.0) {
        let (slp, slay, _) = build_lp(grid, &base, charging_load, None);
        match slp.solve() {
            Ok(s) => {
                let star = s.x[slay.sigma.unwrap_or(0)].clamp(0.0, 1.0);
                sigma = (star * (1.0 - 1e-9)).max(0.0);
                (lp, lay, rows) = build_lp(grid, &base, charging_load, Some(sigma));
                sol = lp.solve();
            }
            Err(LpError::Infeasible) => sol = Err(LpError::Infeasible),
            Err(e) => return Err(e.into()),
        }
    }

    let bus_load: Vec<f64> = (0..n).map(|i| base[i] + charging_load[i]).collect();
    let sol = match sol {
        Ok(s) => s,
        Err(LpError::Infeasible) => return Ok(infeasible_result(grid, bus_load, charging_load, cfg)),
        Err(e) => return Err(e.into()),
    };

    let theta = |i: usize| lay.theta[i].map(|(p, m)| sol.x[p] - sol.x[m]).unwrap_or(0.0);
    let line_flow = grid
        .lines
        .iter()
        .map(|l| {
            let f = grid.bus_index(l.from).unwrap_or(0);
            let t = grid.bus_index(l.to).unwrap_or(0);
            grid.base_mva * l.susceptance * (theta(f) - theta(t))
        })
        .collect();
    let generation = lay.gen.iter().map(|g| g.map(|g| sol.x[g]).unwrap_or(0.0)).collect();
    let bus_price = rows.iter().map(|&r| sol.duals[r]).collect();
    let served_fraction: Vec<f64> = charging_load.iter().map(|&c| if c > 0.0 { sigma } else { 1.0 }).collect();
    let shed: Vec<f64> = charging_load.iter().zip(&served_fraction).map(|(c, s)| c * (1.0 - s)).collect();
    let served: Vec<f64> = (0..n).map(|i| bus_load[i] - shed[i]).collect();
    let (bus_voltage, voltage_violation) = estimate_voltage(grid, &served, cfg);

    Ok(OpfResult {
        bus_ids: grid.buses.iter().map(|b| b.id).collect(),
        bus_load,
        charging_load: charging_load.to_vec(),
        shed,
        bus_voltage,
        voltage_violation,
        bus_price,
        generation,
        line_flow,
        served_fraction,
        feasible: true,
        cost: sol.objective,
        dual_objective: lp.dual_objective(&sol.duals),
    })
}

fn infeasible_result(grid: &PowerGridCase, bus_load: Vec<f64>, charging: &[f64], cfg: &OpfConfig) -> OpfResult {
    let n = grid.buses.len();
    let (bus_voltage, voltage_violation) = estimate_voltage(grid, &bus_load, cfg);
    OpfResult {
        bus_ids: grid.buses.iter().map(|b| b.id).collect(),
        bus_load,
        charging_load: charging.to_vec(),
        shed: charging.to_vec(),
        bus_voltage,
        voltage_violation,
        bus_price: vec![0.0; n],
        generation: vec![0.0; n],
        line_flow: vec![0.0; grid.lines.len()],
        served_fraction: vec![0.0; n],
        feasible: false,
        cost: 0.0,
        dual_objective: 0.0,
    }
}

/// `V_i = v_max(slack) - k * d_i * load_i / base_mva`, clamped into the bus
/// bounds. Returns the clamped voltages and pre-clamp violations.
pub fn estimate_voltage(grid: &PowerGridCase, served_load: &[f64], cfg: &OpfConfig) -> (Vec<f64>, Vec<f64>) {
    let dist = electrical_distance(grid);
    let v0 = grid
        .bus_index(grid.slack_bus)
        .map(|s| grid.buses[s].v_max)
        .unwrap_or(1.0);
    grid.buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let load = served_load[i] / grid.base_mva;
            // Islands without the slack get no estimate.
            let drop = if load == 0.0 || !dist[i].is_finite() { 0.0 } else { cfg.voltage_sensitivity * dist[i] * load };
            let raw = v0 - drop;
            let v = raw.clamp(b.v_min, b.v_max);
            (v, raw - v)
        })
        .unzip()
}

pub fn nodal_price(result: &OpfResult, bus: BusId) -> Result<f64, OpfError> {
    result
        .bus_ids
        .iter()
        .position(|&b| b == bus)
        .map(|i| result.bus_price[i])
        .ok_or(OpfError::UnknownBus(bus))
}
