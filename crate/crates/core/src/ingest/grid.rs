use std::collections::BTreeMap;
use std::fmt::Write;

use super::{content_lines, parse_f64, parse_num, syntax, IngestError};
use crate::model::{Bus, BusId, Line, PowerGridCase};

/// Parses a bus/branch case:
///
/// ```text
/// base_mva 100
/// bus  <id> <load_mw> <v_min> <v_max> <slack|pv|pq>
/// gen  <bus> <p_min_mw> <p_max_mw> <cost_per_mwh>
/// line <from> <to> <susceptance_pu> <limit_mw>
/// ```
///
/// `base_mva` defaults to 100. Exactly one bus must be `slack`.
pub fn parse_grid_case(text: &str) -> Result<PowerGridCase, IngestError> {
    let mut base_mva = 100.0;
    let mut buses: Vec<Bus> = Vec::new();
    let mut slack = Vec::new();
    let mut gens: BTreeMap<u32, (usize, f64, f64, f64)> = BTreeMap::new();
    let mut lines = Vec::new();

    for (line, raw) in content_lines(text) {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let want = |n: usize| {
            if toks.len() == n {
                Ok(())
            } else {
                Err(syntax(
                    line,
                    format!("`{}` row needs {} fields, found {}", toks[0], n - 1, toks.len() - 1),
                ))
            }
        };
        match toks[0] {
            "base_mva" => {
                want(2)?;
                base_mva = parse_f64(line, "base MVA", toks[1])?;
                if base_mva <= 0.0 {
                    return Err(syntax(line, "base MVA must be positive"));
                }
            }
            "bus" => {
                want(6)?;
                let id = BusId(parse_num(line, "bus id", toks[1])?);
                let base_load = parse_f64(line, "load", toks[2])?;
                let v_min = parse_f64(line, "v_min", toks[3])?;
                let v_max = parse_f64(line, "v_max", toks[4])?;
                match toks[5] {
                    "slack" => slack.push(id),
                    "pv" | "pq" => {}
                    t => return Err(syntax(line, format!("unknown bus type `{t}`"))),
                }
                if base_load < 0.0 {
                    return Err(syntax(line, "negative base load"));
                }
                if v_min >= v_max {
                    return Err(IngestError::BoundsOrder {
                        bus: id.0,
                        message: format!("v_min {v_min} >= v_max {v_max}"),
                    });
                }
                if buses.iter().any(|b| b.id == id) {
                    return Err(IngestError::DuplicateId {
                        kind: "bus",
                        id: id.to_string(),
                    });
                }
                buses.push(Bus {
                    id,
                    base_load,
                    v_min,
                    v_max,
                    is_generator: false,
                    gen_min: 0.0,
                    gen_max: 0.0,
                    gen_cost: 0.0,
                });
            }
            "gen" => {
                want(5)?;
                let bus: u32 = parse_num(line, "bus id", toks[1])?;
                let lo = parse_f64(line, "p_min", toks[2])?;
                let hi = parse_f64(line, "p_max", toks[3])?;
                let cost = parse_f64(line, "cost", toks[4])?;
                if lo < 0.0 || lo > hi {
                    return Err(IngestError::BoundsOrder {
                        bus,
                        message: format!("generation bounds [{lo}, {hi}]"),
                    });
                }
                if gens.insert(bus, (line, lo, hi, cost)).is_some() {
                    return Err(IngestError::DuplicateId {
                        kind: "generator",
                        id: bus.to_string(),
                    });
                }
            }
            "line" => {
                want(5)?;
                let from = BusId(parse_num(line, "from bus", toks[1])?);
                let to = BusId(parse_num(line, "to bus", toks[2])?);
                let susceptance = parse_f64(line, "susceptance", toks[3])?;
                let flow_limit = parse_f64(line, "limit", toks[4])?;
                if susceptance <= 0.0 || flow_limit <= 0.0 {
                    return Err(syntax(line, "susceptance and limit must be positive"));
                }
                if from == to {
                    return Err(syntax(line, "line connects a bus to itself"));
                }
                lines.push((line, Line { from, to, susceptance, flow_limit }));
            }
            t => return Err(syntax(line, format!("unknown row kind `{t}`"))),
        }
    }

    for (bus, (line, lo, hi, cost)) in gens {
        let b = buses
            .iter_mut()
            .find(|b| b.id.0 == bus)
            .ok_or_else(|| syntax(line, format!("generator on unknown bus {bus}")))?;
        b.is_generator = true;
        b.gen_min = lo;
        b.gen_max = hi;
        b.gen_cost = cost;
    }
    for (line, l) in &lines {
        for end in [l.from, l.to] {
            if !buses.iter().any(|b| b.id == end) {
                return Err(syntax(*line, format!("line references unknown bus {end}")));
            }
        }
    }
    let slack_bus = match slack.as_slice() {
        [] => return Err(IngestError::MissingSlack),
        [one] => *one,
        many => return Err(IngestError::MultipleSlack(many.iter().map(|b| b.0).collect())),
    };
    Ok(PowerGridCase {
        base_mva,
        buses,
        lines: lines.into_iter().map(|(_, l)| l).collect(),
        slack_bus,
    })
}

pub fn write_grid_case(grid: &PowerGridCase) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "base_mva {}", grid.base_mva);
    let _ = writeln!(s, "# bus id load_mw v_min v_max type");
    for b in &grid.buses {
        let kind = if b.id == grid.slack_bus {
            "slack"
        } else if b.is_generator {
            "pv"
        } else {
            "pq"
        };
        let _ = writeln!(s, "bus {} {} {} {} {}", b.id, b.base_load, b.v_min, b.v_max, kind);
    }
    let _ = writeln!(s, "# gen bus p_min p_max cost");
    for b in grid.buses.iter().filter(|b| b.is_generator) {
        let _ = writeln!(s, "gen {} {} {} {}", b.id, b.gen_min, b.gen_max, b.gen_cost);
    }
    let _ = writeln!(s, "# line from to susceptance limit_mw");
    for l in &grid.lines {
        let _ = writeln!(s, "line {} {} {} {}", l.from, l.to, l.susceptance, l.flow_limit);
    }
    s
}
