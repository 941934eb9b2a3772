use std::collections::BTreeSet;
use std::fmt::Write;

use super::{content_lines, parse_f64, parse_num, syntax, IngestError};
use crate::model::{LinkId, NodeId, RoadLink, RoadNetwork, RoadNode};

/// Parses a TNTP-style network file.
///
/// Rows with 3 or 4 fields are nodes (`id x y [has_station]`, x = longitude,
/// y = latitude). Rows with 5 to 10 fields are links (`init term capacity
/// length free_flow_time [b power speed toll type]`); trailing BPR columns are
/// read but ignored because link cost parameters are global. Link ids follow
/// row order starting at 1. Without a node table the nodes are `1..=N`, with
/// `N` from `<NUMBER OF NODES>`, at the origin.
pub fn parse_road_network(text: &str) -> Result<RoadNetwork, IngestError> {
    let mut declared_nodes: Option<usize> = None;
    let mut declared_links: Option<usize> = None;
    let mut in_metadata = text.contains("<END OF METADATA>");
    let mut nodes = Vec::new();
    let mut links = Vec::new();

    for (line, raw) in content_lines(text) {
        if raw.starts_with('<') {
            let close = raw
                .find('>')
                .ok_or_else(|| syntax(line, "unterminated metadata tag"))?;
            let tag = &raw[1..close];
            let value = raw[close + 1..].trim();
            match tag {
                "END OF METADATA" => in_metadata = false,
                "NUMBER OF NODES" => declared_nodes = Some(parse_num(line, "node count", value)?),
                "NUMBER OF LINKS" => declared_links = Some(parse_num(line, "link count", value)?),
                _ => {}
            }
            continue;
        }
        if in_metadata {
            return Err(syntax(line, "data row before <END OF METADATA>"));
        }
        let body = raw.trim_end_matches(';').trim();
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks.len() {
            3 | 4 => {
                let id = NodeId(parse_num(line, "node id", toks[0])?);
                let lon = parse_f64(line, "x", toks[1])?;
                let lat = parse_f64(line, "y", toks[2])?;
                let has_station = match toks.get(3) {
                    None | Some(&"0") => false,
                    Some(&"1") => true,
                    Some(t) => return Err(syntax(line, format!("invalid station flag `{t}`"))),
                };
                nodes.push(RoadNode {
                    id,
                    lat,
                    lon,
                    has_station,
                });
            }
            5..=10 => {
                let from = NodeId(parse_num(line, "init node", toks[0])?);
                let to = NodeId(parse_num(line, "term node", toks[1])?);
                let capacity = parse_f64(line, "capacity", toks[2])?;
                let length = parse_f64(line, "length", toks[3])?;
                let free_flow_time = parse_f64(line, "free flow time", toks[4])?;
                for t in &toks[5..] {
                    parse_f64(line, "link attribute", t)?;
                }
                if capacity <= 0.0 {
                    return Err(syntax(line, format!("capacity must be positive, got {capacity}")));
                }
                if free_flow_time <= 0.0 {
                    return Err(syntax(
                        line,
                        format!("free flow time must be positive, got {free_flow_time}"),
                    ));
                }
                if length < 0.0 {
                    return Err(syntax(line, format!("length must be non-negative, got {length}")));
                }
                links.push(RoadLink {
                    id: LinkId(links.len() as u32 + 1),
                    from,
                    to,
                    free_flow_time,
                    capacity,
                    length,
                });
            }
            n => return Err(syntax(line, format!("expected 3-4 or 5-10 fields, found {n}"))),
        }
    }

    if nodes.is_empty() {
        let n = match declared_nodes {
            Some(n) => n,
            None => links
                .iter()
                .flat_map(|l| [l.from.0, l.to.0])
                .max()
                .unwrap_or(0) as usize,
        };
        nodes = (1..=n as u32)
            .map(|i| RoadNode {
                id: NodeId(i),
                lat: 0.0,
                lon: 0.0,
                has_station: false,
            })
            .collect();
    } else if let Some(n) = declared_nodes {
        if n != nodes.len() {
            return Err(syntax(0, format!("declared {n} nodes, found {}", nodes.len())));
        }
    }
    if let Some(m) = declared_links {
        if m != links.len() {
            return Err(syntax(0, format!("declared {m} links, found {}", links.len())));
        }
    }

    let mut seen = BTreeSet::new();
    for n in &nodes {
        if !seen.insert(n.id) {
            return Err(IngestError::DuplicateId {
                kind: "node",
                id: n.id.to_string(),
            });
        }
    }
    for l in &links {
        for end in [l.from, l.to] {
            if !seen.contains(&end) {
                return Err(IngestError::DanglingEndpoint {
                    link: l.id.0,
                    node: end.0,
                });
            }
        }
    }
    Ok(RoadNetwork::new(nodes, links))
}

/// Writes a network in the layout read by [`parse_road_network`]. Link ids are
/// implied by row order, so a network whose ids are not `1..=m` in order will
/// come back renumbered.
pub fn write_road_network(road: &RoadNetwork) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<NUMBER OF ZONES> {}", road.nodes().len());
    let _ = writeln!(s, "<NUMBER OF NODES> {}", road.nodes().len());
    let _ = writeln!(s, "<FIRST THRU NODE> 1");
    let _ = writeln!(s, "<NUMBER OF LINKS> {}", road.links().len());
    let _ = writeln!(s, "<END OF METADATA>");
    let _ = writeln!(s);
    let _ = writeln!(s, "~\tnode\tx\ty\tstation\t;");
    for n in road.nodes() {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t;",
            n.id,
            n.lon,
            n.lat,
            u8::from(n.has_station)
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;"
    );
    for l in road.links() {
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t0.15\t4\t0\t0\t1\t;",
            l.from, l.to, l.capacity, l.length, l.free_flow_time
        );
    }
    s
}
