//! Genetic search for new charging-station placements.
//!
//! Individuals are sets of `(node, chargers)` placements. Fitness is the
//! weighted objective
//! `f0 = -w1 * coverage + w2 * service / service_ref + w3 * investment / investment_ref`,
//! minimised. The references are the raw service and investment values of a
//! fixed reference placement (the highest-demand candidates at `x_max`).
//!
//! Every child draws from its own ChaCha stream keyed by (generation, child),
//! so evaluation order and thread count never change the outcome.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::Graph;
use crate::coupled::{reach_within, run_coupled, CoupledConfig, CoupledError, TimeSlicedState};
use crate::model::{ChargingStation, NodeId, StationId};
use crate::Scenario;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub children_per_iteration: usize,
    pub iterations: usize,
    pub new_station_count: usize,
    pub x_min: u32,
    pub x_max: u32,
    pub weights: Weights,
    pub seed: u64,
    pub elite: usize,
    pub mutation_rate: f64,
    pub fixed_cost: f64,
    pub unit_cost: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            children_per_iteration: 40,
            iterations: 50,
            new_station_count: 2,
            x_min: 6,
            x_max: 20,
            weights: Weights::default(),
            seed: 0,
            elite: 2,
            mutation_rate: 0.2,
            fixed_cost: 1.0,
            unit_cost: 0.1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), SitingError> {
        let bad = |m: &str| Err(SitingError::InvalidConfig(m.to_string()));
        let w = self.weights;
        if [w.w1, w.w2, w.w3].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return bad("weights must be non-negative");
        }
        if w.w1 + w.w2 + w.w3 == 0.0 {
            return bad("weights must not all be zero");
        }
        if self.children_per_iteration == 0 || self.iterations == 0 || self.new_station_count == 0 {
            return bad("children_per_iteration, iterations and new_station_count must be at least 1");
        }
        if self.x_min == 0 || self.x_min > self.x_max {
            return bad("charger range must satisfy 1 <= x_min <= x_max");
        }
        if self.elite > self.children_per_iteration {
            return bad("elite must not exceed children_per_iteration");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]");
        }
        if !(self.fixed_cost >= 0.0 && self.unit_cost >= 0.0) {
            return bad("costs must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SitingError {
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error("need {needed} candidate nodes, only {available} available")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("node {0} already has a station")]
    PlacementOnExistingStation(NodeId),
    #[error("node {0} is not a candidate")]
    UnknownCandidate(NodeId),
    #[error("placement set has {got} entries, expected {expected}")]
    PlacementCount { expected: usize, got: usize },
    #[error("chargers {chargers} at node {node} outside [{min}, {max}]")]
    ChargerBounds { node: NodeId, chargers: u32, min: u32, max: u32 },
    #[error(transparent)]
    Coupled(#[from] CoupledError),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub node: NodeId,
    pub chargers: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub coverage: f64,
    /// Summed `CD_i / x_i` in hours.
    pub service_time: f64,
    pub investment: f64,
    pub service_normalized: f64,
    pub investment_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SitingSolution {
    /// Sorted by node id.
    pub placements: Vec<Placement>,
    pub objective: f64,
    pub breakdown: ObjectiveBreakdown,
}

/// Precomputed baseline quantities shared by every fitness evaluation.
#[derive(Clone, Debug)]
pub struct SitingContext {
    pub candidates: Vec<NodeId>,
    existing: BTreeSet<NodeId>,
    cand_index: HashMap<NodeId, usize>,
    /// Per candidate: nodes within the radius and their road distance.
    reach: Vec<Vec<(usize, f64)>>,
    baseline_dist: Vec<f64>,
    node_demand: Vec<f64>,
    total_demand: f64,
    n_slices: usize,
    service_ref: f64,
    investment_ref: f64,
    cfg: GaConfig,
}

/// Road nodes without an existing station, ascending.
pub fn candidate_nodes(scenario: &Scenario, stations: &[ChargingStation]) -> Vec<NodeId> {
    let taken: BTreeSet<NodeId> = stations.iter().map(|s| s.node).collect();
    let mut v: Vec<NodeId> = scenario.road.nodes().iter().map(|n| n.id).filter(|n| !taken.contains(n)).collect();
    v.sort();
    v
}

impl SitingContext {
    pub fn new(
        scenario: &Scenario,
        baseline: &TimeSlicedState,
        candidates: &[NodeId],
        service_radius: f64,
        cfg: &GaConfig,
    ) -> Result<SitingContext, SitingError> {
        cfg.validate()?;
        let road = &scenario.road;
        let existing: BTreeSet<NodeId> = baseline.header.station_nodes.iter().copied().collect();
        let mut cands: Vec<NodeId> = candidates.to_vec();
        cands.sort();
        cands.dedup();
        for c in &cands {
            if existing.contains(c) {
                return Err(SitingError::PlacementOnExistingStation(*c));
            }
            if road.node_index(*c).is_none() {
                return Err(SitingError::UnknownCandidate(*c));
            }
        }
        let reverse = Graph::new(road).reversed();
        let lengths: Vec<f64> = road.links().iter().map(|l| l.length).collect();
        let reach: Vec<Vec<(usize, f64)>> = cands
            .par_iter()
            .map(|c| reach_within(&reverse, &lengths, road.node_index(*c).unwrap_or(0), service_radius))
            .collect();

        let n = road.nodes().len();
        let mut node_demand = vec![0.0; n];
        for s in &baseline.slices {
            for (acc, d) in node_demand.iter_mut().zip(&s.node_demand) {
                *acc += d;
            }
        }
        let baseline_dist = baseline
            .header
            .node_server_distance
            .iter()
            .map(|d| d.unwrap_or(f64::INFINITY))
            .collect();
        let mut ctx = SitingContext {
            cand_index: cands.iter().enumerate().map(|(i, c)| (*c, i)).collect(),
            candidates: cands,
            existing,
            reach,
            baseline_dist,
            total_demand: node_demand.iter().sum(),
            node_demand,
            n_slices: baseline.slices.len().max(1),
            service_ref: 1.0,
            investment_ref: 1.0,
            cfg: cfg.clone(),
        };
        ctx.set_reference();
        Ok(ctx)
    }

    fn set_reference(&mut self) {
        let k = self.cfg.new_station_count.min(self.candidates.len());
        let mut alone: Vec<(f64, NodeId)> = self
            .candidates
            .iter()
            .map(|&c| {
                let p = [Placement { node: c, chargers: self.cfg.x_max }];
                (self.captured(&p)[0], c)
            })
            .collect();
        alone.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut reference: Vec<Placement> = alone[..k]
            .iter()
            .map(|&(_, node)| Placement { node, chargers: self.cfg.x_max })
            .collect();
        reference.sort();
        let (_, service, investment) = self.raw(&reference);
        self.service_ref = if service > 0.0 { service } else { 1.0 };
        self.investment_ref = if investment > 0.0 { investment } else { 1.0 };
    }

    pub fn service_reference(&self) -> f64 {
        self.service_ref
    }

    pub fn investment_reference(&self) -> f64 {
        self.investment_ref
    }

    /// Demand (summed over slices) newly captured by each placement: nodes
    /// whose nearest new station is strictly closer than their baseline
    /// server, or that had none. Equal distances go to the lower node id.
    fn captured(&self, placements: &[Placement]) -> Vec<f64> {
        let mut best: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for (k, p) in placements.iter().enumerate() {
            let Some(&ci) = self.cand_index.get(&p.node) else { continue };
            for &(n, d) in &self.reach[ci] {
                match best.get(&n) {
                    Some(&(bd, _)) if bd <= d => {}
                    _ => {
                        best.insert(n, (d, k));
                    }
                }
            }
        }
        let mut out = vec![0.0; placements.len()];
        for (n, (d, k)) in best {
            if d < self.baseline_dist[n] {
                out[k] += self.node_demand[n];
            }
        }
        out
    }

    fn raw(&self, placements: &[Placement]) -> (f64, f64, f64) {
        let captured = self.captured(placements);
        let coverage = if self.total_demand > 0.0 {
            (captured.iter().sum::<f64>() / self.total_demand).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let service = placements
            .iter()
            .zip(&captured)
            .map(|(p, c)| (c / self.n_slices as f64) / p.chargers as f64)
            .sum();
        let investment = placements
            .iter()
            .map(|p| self.cfg.fixed_cost + self.cfg.unit_cost * p.chargers as f64)
            .sum();
        (coverage, service, investment)
    }

    pub fn check(&self, placements: &[Placement]) -> Result<(), SitingError> {
        if placements.len() != self.cfg.new_station_count {
            return Err(SitingError::PlacementCount {
                expected: self.cfg.new_station_count,
                got: placements.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for p in placements {
            if self.existing.contains(&p.node) {
                return Err(SitingError::PlacementOnExistingStation(p.node));
            }
            if !self.cand_index.contains_key(&p.node) || !seen.insert(p.node) {
                return Err(SitingError::UnknownCandidate(p.node));
            }
            if p.chargers < self.cfg.x_min || p.chargers > self.cfg.x_max {
                return Err(SitingError::ChargerBounds {
                    node: p.node,
                    chargers: p.chargers,
                    min: self.cfg.x_min,
                    max: self.cfg.x_max,
                });
            }
        }
        Ok(())
    }

    pub fn score(&self, placements: &[Placement]) -> Result<(ObjectiveBreakdown, f64), SitingError> {
        self.check(placements)?;
        Ok(self.score_unchecked(placements, &self.cfg.weights))
    }

    /// Same as `score` with different weights (references unchanged).
    pub fn score_with(&self, placements: &[Placement], w: &Weights) -> (ObjectiveBreakdown, f64) {
        self.score_unchecked(placements, w)
    }

    fn score_unchecked(&self, placements: &[Placement], w: &Weights) -> (ObjectiveBreakdown, f64) {
        let (coverage, service_time, investment) = self.raw(placements);
        let b = ObjectiveBreakdown {
            coverage,
            service_time,
            investment,
            service_normalized: service_time / self.service_ref,
            investment_normalized: investment / self.investment_ref,
        };
        let f0 = -w.w1 * b.coverage + w.w2 * b.service_normalized + w.w3 * b.investment_normalized;
        (b, f0)
    }

    fn solution(&self, mut placements: Vec<Placement>) -> SitingSolution {
        placements.sort();
        let (breakdown, objective) = self.score_unchecked(&placements, &self.cfg.weights);
        SitingSolution {
            placements,
            objective,
            breakdown,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveResult {
    /// Up to three solutions with distinct node sets, best first.
    pub solutions: Vec<SitingSolution>,
    /// Best objective seen so far, after each generation.
    pub best_history: Vec<f64>,
    pub evaluations: usize,
}

fn stream(seed: u64, generation: usize, child: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | child as u64);
    rng
}

fn cmp_solutions(a: &SitingSolution, b: &SitingSolution) -> std::cmp::Ordering {
    a.objective.total_cmp(&b.objective).then_with(|| a.placements.cmp(&b.placements))
}

struct Ga<'a> {
    ctx: &'a SitingContext,
    cfg: &'a GaConfig,
}

impl Ga<'_> {
    fn random_candidate(&self, rng: &mut ChaCha8Rng, used: &BTreeSet<NodeId>) -> Option<NodeId> {
        let free: Vec<NodeId> = self.ctx.candidates.iter().copied().filter(|c| !used.contains(c)).collect();
        (!free.is_empty()).then(|| free[rng.random_range(0..free.len())])
    }

    fn random_individual(&self, rng: &mut ChaCha8Rng) -> Vec<Placement> {
        let idx = sample(rng, self.ctx.candidates.len(), self.cfg.new_station_count);
        idx.into_iter()
            .map(|i| Placement {
                node: self.ctx.candidates[i],
                chargers: rng.random_range(self.cfg.x_min..=self.cfg.x_max),
            })
            .collect()
    }

    fn tournament<'p>(&self, rng: &mut ChaCha8Rng, pop: &'p [SitingSolution]) -> &'p SitingSolution {
        let a = &pop[rng.random_range(0..pop.len())];
        let b = &pop[rng.random_range(0..pop.len())];
        if cmp_solutions(a, b).is_le() {
            a
        } else {
            b
        }
    }

    fn child(&self, rng: &mut ChaCha8Rng, pop: &[SitingSolution]) -> Vec<Placement> {
        let pa = self.tournament(rng, pop);
        let pb = self.tournament(rng, pop);
        let mut used = BTreeSet::new();
        let mut child = Vec::with_capacity(self.cfg.new_station_count);
        for i in 0..self.cfg.new_station_count {
            let (first, second) = if rng.random_bool(0.5) { (pa, pb) } else { (pb, pa) };
            let pick = [first.placements[i], second.placements[i]]
                .into_iter()
                .chain(first.placements.iter().copied())
                .chain(second.placements.iter().copied())
                .find(|p| !used.contains(&p.node));
            let p = match pick {
                Some(p) => p,
                None => match self.random_candidate(rng, &used) {
                    Some(node) => Placement {
                        node,
                        chargers: rng.random_range(self.cfg.x_min..=self.cfg.x_max),
                    },
                    None => break,
                },
            };
            used.insert(p.node);
            child.push(p);
        }
        if rng.random_bool(self.cfg.mutation_rate) {
            self.mutate(rng, &mut child, &used);
        }
        child
    }

    /// Replaces one placement with a free candidate, or steps one charger
    /// count by one within bounds, with even odds.
    fn mutate(&self, rng: &mut ChaCha8Rng, child: &mut [Placement], used: &BTreeSet<NodeId>) {
        let i = rng.random_range(0..child.len());
        if rng.random_bool(0.5) {
            if let Some(node) = self.random_candidate(rng, used) {
                child[i] = Placement {
                    node,
                    chargers: rng.random_range(self.cfg.x_min..=self.cfg.x_max),
                };
            }
        } else {
            let x = child[i].chargers;
            let up = rng.random_bool(0.5);
            child[i].chargers = if up { (x + 1).min(self.cfg.x_max) } else { x.saturating_sub(1).max(self.cfg.x_min) };
        }
    }

    /// A child not evaluated before, unless `RETRIES` forced mutations all
    /// land on evaluated ones.
    fn fresh_child(&self, rng: &mut ChaCha8Rng, pop: &[SitingSolution], seen: &mut HashSet<Vec<Placement>>) -> Vec<Placement> {
        const RETRIES: usize = 16;
        let mut child = self.child(rng, pop);
        for _ in 0..RETRIES {
            if !seen.contains(&sorted(&child)) {
                break;
            }
            let used: BTreeSet<NodeId> = child.iter().map(|p| p.node).collect();
            self.mutate(rng, &mut child, &used);
        }
        seen.insert(sorted(&child));
        child
    }
}

fn sorted(p: &[Placement]) -> Vec<Placement> {
    let mut v = p.to_vec();
    v.sort();
    v
}

/// Runs the GA on precomputed baseline quantities.
pub fn evolve(ctx: &SitingContext) -> Result<EvolveResult, SitingError> {
    evolve_observed(ctx, |_, _| {})
}

/// As [`evolve`], handing every generation's population (generation 0 is the
/// random start) to `observe` before selection.
pub fn evolve_observed(ctx: &SitingContext, mut observe: impl FnMut(usize, &[SitingSolution])) -> Result<EvolveResult, SitingError> {
    let cfg = &ctx.cfg;
    if ctx.candidates.len() < cfg.new_station_count {
        return Err(SitingError::InsufficientCandidates {
            needed: cfg.new_station_count,
            available: ctx.candidates.len(),
        });
    }
    let ga = Ga { ctx, cfg };
    let size = cfg.children_per_iteration;
    let mut archive: BTreeMap<Vec<NodeId>, SitingSolution> = BTreeMap::new();
    let remember = |archive: &mut BTreeMap<Vec<NodeId>, SitingSolution>, s: &SitingSolution| {
        let key: Vec<NodeId> = s.placements.iter().map(|p| p.node).collect();
        match archive.get(&key) {
            Some(old) if cmp_solutions(old, s).is_le() => {}
            _ => {
                archive.insert(key, s.clone());
            }
        }
    };

    let mut pop: Vec<SitingSolution> = (0..size)
        .into_par_iter()
        .map(|c| ctx.solution(ga.random_individual(&mut stream(cfg.seed, 0, c))))
        .collect();
    pop.sort_by(cmp_solutions);
    observe(0, &pop);
    let mut seen: HashSet<Vec<Placement>> = pop.iter().map(|s| sorted(&s.placements)).collect();
    let mut evaluations = pop.len();
    let mut best_history = Vec::with_capacity(cfg.iterations);
    for s in &pop {
        remember(&mut archive, s);
    }

    for generation in 1..=cfg.iterations {
        let parents = &pop;
        // Drawn in order so the duplicate check is thread-independent.
        let drawn: Vec<Vec<Placement>> = (0..size - cfg.elite)
            .map(|c| ga.fresh_child(&mut stream(cfg.seed, generation, c), parents, &mut seen))
            .collect();
        let children: Vec<SitingSolution> = drawn.into_par_iter().map(|p| ctx.solution(p)).collect();
        evaluations += children.len();
        for s in &children {
            remember(&mut archive, s);
        }
        let mut next: Vec<SitingSolution> = pop[..cfg.elite].to_vec();
        next.extend(children);
        next.sort_by(cmp_solutions);
        pop = next;
        observe(generation, &pop);
        let best = archive.values().map(|s| s.objective).fold(f64::INFINITY, f64::min);
        best_history.push(best);
    }

    let mut ranked: Vec<SitingSolution> = archive.into_values().collect();
    ranked.sort_by(cmp_solutions);
    ranked.truncate(3);
    Ok(EvolveResult {
        solutions: ranked,
        best_history,
        evaluations,
    })
}

/// A solution together with its post-deployment state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeployedSolution {
    pub solution: SitingSolution,
    pub new_stations: Vec<ChargingStation>,
    pub state: TimeSlicedState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SitingRun {
    pub solutions: Vec<DeployedSolution>,
    pub best_history: Vec<f64>,
}

/// New stations get ids after the largest existing id, in node order.
pub fn new_stations(existing: &[ChargingStation], placements: &[Placement]) -> Vec<ChargingStation> {
    let next = existing.iter().map(|s| s.id.0).max().unwrap_or(0) + 1;
    placements
        .iter()
        .enumerate()
        .map(|(i, p)| ChargingStation {
            id: StationId(next + i as u32),
            name: format!("new-{}", p.node),
            node: p.node,
            chargers: p.chargers,
            is_existing: false,
        })
        .collect()
}

/// Evolves on the baseline, then re-runs the coupled model for each of the
/// returned solutions with existing plus new stations.
pub fn run_siting(
    scenario: &Scenario,
    stations: &[ChargingStation],
    baseline: &TimeSlicedState,
    ga: &GaConfig,
    coupled: &CoupledConfig,
) -> Result<SitingRun, SitingError> {
    run_siting_with_progress(scenario, stations, baseline, ga, coupled, |_| {})
}

/// As [`run_siting`], reporting completion in `[0, 1]`: evolution covers the
/// first 70%, each deployed re-solve an equal share of the rest.
pub fn run_siting_with_progress(
    scenario: &Scenario,
    stations: &[ChargingStation],
    baseline: &TimeSlicedState,
    ga: &GaConfig,
    coupled: &CoupledConfig,
    mut progress: impl FnMut(f64),
) -> Result<SitingRun, SitingError> {
    ga.validate()?;
    let candidates = candidate_nodes(scenario, stations);
    let ctx = SitingContext::new(scenario, baseline, &candidates, coupled.service_radius, ga)?;
    let evolved = evolve_observed(&ctx, |g, _| progress(0.7 * g as f64 / ga.iterations as f64))?;
    let n = evolved.solutions.len();
    let mut solutions = Vec::with_capacity(n);
    for (i, solution) in evolved.solutions.into_iter().enumerate() {
        let added = new_stations(stations, &solution.placements);
        let mut all = stations.to_vec();
        all.extend(added.iter().cloned());
        let state = run_coupled(scenario, &all, coupled)?;
        solutions.push(DeployedSolution {
            solution,
            new_stations: added,
            state,
        });
        progress(0.7 + 0.3 * (i + 1) as f64 / n as f64);
    }
    Ok(SitingRun {
        solutions,
        best_history: evolved.best_history,
    })
}
