//! Baseline vs post-deployment deltas per slice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupled::TimeSlicedState;

pub const REPORT_SCHEMA: &str = "evsite.impact";
pub const REPORT_VERSION: u32 = 1;

/// Denominator floor for road deltas, in vehicles.
pub const ROAD_EPSILON: f64 = 1.0;
/// Denominator floor for voltage deltas, per unit.
pub const VOLTAGE_EPSILON: f64 = 1e-6;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactThresholds {
    /// Percent.
    pub road: f64,
    pub bus: f64,
}

impl Default for ImpactThresholds {
    fn default() -> Self {
        ImpactThresholds { road: 1.0, bus: 1.0 }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementDelta {
    pub id: u32,
    /// Signed percent change.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceImpact {
    pub slice: crate::model::SliceLabel,
    pub road_delta: Vec<ElementDelta>,
    pub voltage_delta: Vec<ElementDelta>,
    pub affected_road_count: usize,
    pub affected_bus_count: usize,
    pub mean_abs_road_delta: f64,
    pub mean_abs_voltage_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub schema: String,
    pub version: u32,
    pub thresholds: ImpactThresholds,
    pub road_epsilon: f64,
    pub voltage_epsilon: f64,
    pub slices: Vec<SliceImpact>,
    /// Total served share of demand per slice in the deployed state.
    pub coverage_series: Vec<f64>,
    pub baseline_coverage_series: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("states differ in {0}")]
    TopologyMismatch(&'static str),
    #[error("range lower bound {lo} exceeds upper bound {hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("report: {0}")]
    Format(String),
}

pub fn percent_change(old: f64, new: f64, eps: f64) -> f64 {
    if new == old {
        return 0.0;
    }
    100.0 * (new - old) / old.max(eps)
}

fn coverage_series(state: &TimeSlicedState) -> Vec<f64> {
    state
        .slices
        .iter()
        .map(|s| s.station_coverage.iter().sum::<f64>().clamp(0.0, 1.0))
        .collect()
}

fn counts(s: &mut SliceImpact, t: &ImpactThresholds) {
    s.affected_road_count = s.road_delta.iter().filter(|d| d.delta.abs() >= t.road).count();
    s.affected_bus_count = s.voltage_delta.iter().filter(|d| d.delta.abs() >= t.bus).count();
    let mean = |v: &[ElementDelta]| if v.is_empty() { 0.0 } else { v.iter().map(|d| d.delta.abs()).sum::<f64>() / v.len() as f64 };
    s.mean_abs_road_delta = mean(&s.road_delta);
    s.mean_abs_voltage_delta = mean(&s.voltage_delta);
}

pub fn diff_states(baseline: &TimeSlicedState, deployed: &TimeSlicedState, thresholds: &ImpactThresholds) -> Result<ImpactReport, ImpactError> {
    let (hb, hd) = (&baseline.header, &deployed.header);
    if hb.link_ids != hd.link_ids || hb.node_ids != hd.node_ids {
        return Err(ImpactError::TopologyMismatch("road network"));
    }
    if hb.bus_ids != hd.bus_ids {
        return Err(ImpactError::TopologyMismatch("grid buses"));
    }
    if baseline.slices.len() != deployed.slices.len() || baseline.slices.iter().zip(&deployed.slices).any(|(a, b)| a.slice != b.slice) {
        return Err(ImpactError::TopologyMismatch("slices"));
    }
    let slices = baseline
        .slices
        .iter()
        .zip(&deployed.slices)
        .map(|(a, b)| {
            let road_delta = hb
                .link_ids
                .iter()
                .enumerate()
                .map(|(i, id)| ElementDelta {
                    id: id.0,
                    delta: percent_change(a.link_volume[i], b.link_volume[i], ROAD_EPSILON),
                })
                .collect();
            let voltage_delta = hb
                .bus_ids
                .iter()
                .enumerate()
                .map(|(i, id)| ElementDelta {
                    id: id.0,
                    delta: percent_change(a.bus_voltage[i], b.bus_voltage[i], VOLTAGE_EPSILON),
                })
                .collect();
            let mut s = SliceImpact {
                slice: a.slice.clone(),
                road_delta,
                voltage_delta,
                affected_road_count: 0,
                affected_bus_count: 0,
                mean_abs_road_delta: 0.0,
                mean_abs_voltage_delta: 0.0,
            };
            counts(&mut s, thresholds);
            s
        })
        .collect();
    Ok(ImpactReport {
        schema: REPORT_SCHEMA.to_string(),
        version: REPORT_VERSION,
        thresholds: *thresholds,
        road_epsilon: ROAD_EPSILON,
        voltage_epsilon: VOLTAGE_EPSILON,
        slices,
        coverage_series: coverage_series(deployed),
        baseline_coverage_series: coverage_series(baseline),
    })
}

/// Keeps elements whose delta lies in the closed ranges and recounts.
pub fn filter_impact(report: &ImpactReport, road: (f64, f64), bus: (f64, f64)) -> Result<ImpactReport, ImpactError> {
    for (lo, hi) in [road, bus] {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(ImpactError::BadRange { lo, hi });
        }
    }
    let mut out = report.clone();
    for s in &mut out.slices {
        s.road_delta.retain(|d| road.0 <= d.delta && d.delta <= road.1);
        s.voltage_delta.retain(|d| bus.0 <= d.delta && d.delta <= bus.1);
        counts(s, &report.thresholds);
    }
    Ok(out)
}

pub fn write_report(report: &ImpactReport) -> String {
    let mut s = serde_json::to_string(report).unwrap_or_default();
    s.push('\n');
    s
}

pub fn read_report(text: &str) -> Result<ImpactReport, ImpactError> {
    let r: ImpactReport = serde_json::from_str(text).map_err(|e| ImpactError::Format(e.to_string()))?;
    if r.schema != REPORT_SCHEMA || r.version != REPORT_VERSION {
        return Err(ImpactError::Format(format!("unsupported schema {} v{}", r.schema, r.version)));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupled::{run_coupled, CoupledConfig};
    use crate::model::tests::minimal;
    use crate::Scenario;

    fn state() -> TimeSlicedState {
        let (road, od, stations, grid, coupling) = minimal();
        let sc = Scenario { road, od, stations, grid, coupling };
        run_coupled(&sc, &[], &CoupledConfig::default()).unwrap()
    }

    #[test]
    fn identical_states_are_all_zero() {
        let s = state();
        let r = diff_states(&s, &s, &ImpactThresholds::default()).unwrap();
        for sl in &r.slices {
            assert!(sl.road_delta.iter().chain(&sl.voltage_delta).all(|d| d.delta == 0.0));
            assert_eq!((sl.affected_road_count, sl.affected_bus_count), (0, 0));
        }
    }

    #[test]
    fn ten_percent_increase() {
        assert_eq!(percent_change(100.0, 110.0, ROAD_EPSILON), 10.0);
        assert_eq!(percent_change(0.0, 3.0, ROAD_EPSILON), 300.0);
        let base = state();
        let mut dep = base.clone();
        dep.slices[0].link_volume[0] = base.slices[0].link_volume[0] * 1.1;
        let r = diff_states(&base, &dep, &ImpactThresholds::default()).unwrap();
        assert!((r.slices[0].road_delta[0].delta - 10.0).abs() < 1e-9);
        assert_eq!(r.slices[0].affected_road_count, 1);
    }

    #[test]
    fn filters_are_closed_ranges() {
        let base = state();
        let mut dep = base.clone();
        dep.slices[0].link_volume[0] = base.slices[0].link_volume[0] * 1.05;
        let r = diff_states(&base, &dep, &ImpactThresholds::default()).unwrap();
        let d = r.slices[0].road_delta[0].delta;
        let f = filter_impact(&r, (d, d), (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert_eq!(f.slices[0].road_delta.len(), 1);
        let all = filter_impact(&r, (f64::NEG_INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert_eq!(all, r);
        let none = filter_impact(&r, (0.0, 0.0), (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
        assert!(none.slices[0].road_delta.is_empty());
        assert!(filter_impact(&r, (1.0, 0.0), (0.0, 0.0)).is_err());
    }

    #[test]
    fn mismatched_topology() {
        let base = state();
        let mut dep = base.clone();
        dep.header.bus_ids.pop();
        assert_eq!(diff_states(&base, &dep, &ImpactThresholds::default()), Err(ImpactError::TopologyMismatch("grid buses")));
    }

    #[test]
    fn report_round_trip() {
        let s = state();
        let r = diff_states(&s, &s, &ImpactThresholds::default()).unwrap();
        assert_eq!(read_report(&write_report(&r)).unwrap(), r);
    }
}
