use std::collections::{BTreeSet, HashSet};

use super::{parse_f64, parse_num, syntax, IngestError};
use crate::model::{NodeId, OdEntry, OdMatrix, SliceLabel};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes())
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| syntax(1, format!("missing `{name}` column")))
}

fn csv_err(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    syntax(line, e.to_string())
}

/// Parses OD demand rows. Rows with zero trips are dropped, but their slice
/// label is still listed in `slices`. Slices are returned in chronological
/// order.
pub fn parse_od(text: &str, ev_share: f64) -> Result<OdMatrix, IngestError> {
    let mut rdr = reader(text);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let c_o = column(&headers, "origin")?;
    let c_d = column(&headers, "destination")?;
    let c_s = column(&headers, "slice")?;
    let c_t = column(&headers, "trips")?;
    let c_date = headers.iter().position(|h| h.eq_ignore_ascii_case("date"));

    let mut slices = BTreeSet::new();
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let origin = NodeId(parse_num(line, "origin", &rec[c_o])?);
        let destination = NodeId(parse_num(line, "destination", &rec[c_d])?);
        let raw_label = &rec[c_s];
        let label = match c_date {
            Some(c) if !rec[c].is_empty() => {
                let hour = raw_label
                    .strip_prefix('h')
                    .and_then(|h| h.parse::<u8>().ok())
                    .filter(|_| raw_label.len() == 3);
                hour.and_then(|h| SliceLabel::with_date(&rec[c], h))
            }
            _ => SliceLabel::parse(raw_label),
        }
        .ok_or_else(|| IngestError::UnknownSliceLabel {
            line,
            label: raw_label.to_string(),
        })?;
        let trips = parse_f64(line, "trips", &rec[c_t])?;
        if trips < 0.0 {
            return Err(IngestError::NegativeTrips { line, trips });
        }
        if origin == destination {
            return Err(syntax(line, format!("origin equals destination ({origin})")));
        }
        if !seen.insert((origin, destination, label.clone())) {
            return Err(IngestError::DuplicateEntry {
                line,
                origin: origin.0,
                destination: destination.0,
                slice: label.to_string(),
            });
        }
        slices.insert(label.clone());
        if trips > 0.0 {
            entries.push(OdEntry {
                origin,
                destination,
                slice: label,
                trips,
            });
        }
    }
    Ok(OdMatrix {
        slices: slices.into_iter().collect(),
        entries,
        ev_share,
    })
}

/// Writes entries in stored order. A `date` column is emitted only when some
/// slice carries a date.
pub fn write_od(od: &OdMatrix) -> String {
    let dated = od.entries.iter().any(|e| e.slice.date().is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    if dated {
        let _ = w.write_record(["origin", "destination", "date", "slice", "trips"]);
    } else {
        let _ = w.write_record(["origin", "destination", "slice", "trips"]);
    }
    for e in &od.entries {
        let o = e.origin.to_string();
        let d = e.destination.to_string();
        let t = e.trips.to_string();
        if dated {
            let date = e.slice.date().unwrap_or("");
            let hour = format!("h{:02}", e.slice.hour_of_day());
            let _ = w.write_record([o.as_str(), &d, date, &hour, &t]);
        } else {
            let _ = w.write_record([o.as_str(), &d, e.slice.as_str(), &t]);
        }
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
