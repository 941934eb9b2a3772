use criterion::{criterion_group, criterion_main, Criterion};

use evsite_bench::sioux_falls;
use evsite_core::assignment::{solve_ue, LinkCostModel, UeOptions};
use evsite_core::coupled::{run_coupled, CoupledConfig};
use evsite_core::hotspots::{louvain, volume_graph};
use evsite_core::opf::{solve_opf, OpfConfig};
use evsite_core::siting::{candidate_nodes, evolve, GaConfig, SitingContext};
use evsite_core::synthetic::{synthetic_city, CityConfig};
use evsite_core::PowerGridCase;

fn assignment(c: &mut Criterion) {
    let (road, od) = sioux_falls();
    let cost = LinkCostModel::default();
    let mut g = c.benchmark_group("ue");
    g.sample_size(20);
    g.bench_function("sioux_falls_gap_1e-4", |b| b.iter(|| solve_ue(&road, &od, &cost, &UeOptions::default()).unwrap()));
    let polished = UeOptions { retain_paths: true, ..UeOptions::default() };
    g.bench_function("sioux_falls_with_paths", |b| b.iter(|| solve_ue(&road, &od, &cost, &polished).unwrap()));
    g.finish();
}

fn power_flow(c: &mut Criterion) {
    let grid = PowerGridCase::ieee14();
    let charging: Vec<f64> = (0..grid.buses.len()).map(|i| 0.5 * (i % 4) as f64).collect();
    c.bench_function("opf/ieee14", |b| b.iter(|| solve_opf(&grid, &charging, &OpfConfig::default()).unwrap()));
}

fn city() -> evsite_core::Scenario {
    synthetic_city(&CityConfig::default())
}

fn coupled(c: &mut Criterion) {
    let sc = city();
    let mut g = c.benchmark_group("coupled");
    g.sample_size(10);
    g.bench_function("city_100_nodes_24_slices", |b| b.iter(|| run_coupled(&sc, &sc.stations, &CoupledConfig::default()).unwrap()));
    g.finish();
}

fn communities(c: &mut Criterion) {
    let sc = city();
    let state = run_coupled(&sc, &sc.stations, &CoupledConfig::default()).unwrap();
    let peak = &state.slices[8];
    let (_, graph) = volume_graph(&sc.road, &peak.link_volume);
    c.bench_function("louvain/city_peak_slice", |b| b.iter(|| louvain(&graph, 1.0)));
}

fn siting(c: &mut Criterion) {
    let sc = city();
    let coupled = CoupledConfig::default();
    let base = run_coupled(&sc, &sc.stations, &coupled).unwrap();
    let cands = candidate_nodes(&sc, &sc.stations);
    let ctx = SitingContext::new(&sc, &base, &cands, coupled.service_radius, &GaConfig::default()).unwrap();
    let mut g = c.benchmark_group("ga");
    g.sample_size(10);
    g.bench_function("city_default_config", |b| b.iter(|| evolve(&ctx).unwrap()));
    g.finish();
}

criterion_group!(benches, assignment, power_flow, coupled, communities, siting);
criterion_main!(benches);
