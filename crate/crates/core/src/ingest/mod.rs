//! Readers and writers for the on-disk scenario formats.
//!
//! * road network: TNTP net-file layout (metadata block, then whitespace
//!   separated rows terminated by `;`), with an optional node table
//! * OD demand: CSV `origin,destination,slice,trips` with an optional `date`
//! * stations: CSV `id,name,lat,lon,chargers[,existing]`, snapped to the
//!   nearest intersection
//! * grid case: keyword rows `base_mva`, `bus`, `gen`, `line`
//! * coupling: CSV `node,bus`
//!
//! Every writer produces text its reader parses back to an equal value.

mod bundle;
mod grid;
mod od;
mod road;
mod stations;

pub use bundle::{parse_coupling, write_coupling, ScenarioBundle, FORMAT_VERSION};
pub use grid::{parse_grid_case, write_grid_case};
pub use od::{parse_od, write_od};
pub use road::{parse_road_network, write_road_network};
pub use stations::{haversine_km, nearest_node, parse_stations, write_stations, MergeWarning};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("link {link} references missing node {node}")]
    DanglingEndpoint { link: u32, node: u32 },
    #[error("line {line}: negative trips {trips}")]
    NegativeTrips { line: usize, trips: f64 },
    #[error("line {line}: unknown slice label `{label}`")]
    UnknownSliceLabel { line: usize, label: String },
    #[error("line {line}: duplicate OD entry {origin}->{destination} at {slice}")]
    DuplicateEntry {
        line: usize,
        origin: u32,
        destination: u32,
        slice: String,
    },
    #[error("no slack bus declared")]
    MissingSlack,
    #[error("multiple slack buses: {0:?}")]
    MultipleSlack(Vec<u32>),
    #[error("bus {bus}: {message}")]
    BoundsOrder { bus: u32, message: String },
    #[error("{0} file has no data rows")]
    EmptyFile(&'static str),
    #[error("unsupported format version `{0}`")]
    UnsupportedVersion(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl IngestError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Syntax { .. } => "syntax",
            IngestError::DuplicateId { .. } => "duplicate-id",
            IngestError::DanglingEndpoint { .. } => "dangling-endpoint",
            IngestError::NegativeTrips { .. } => "negative-trips",
            IngestError::UnknownSliceLabel { .. } => "unknown-slice-label",
            IngestError::DuplicateEntry { .. } => "duplicate-entry",
            IngestError::MissingSlack => "missing-slack",
            IngestError::MultipleSlack(_) => "multiple-slack",
            IngestError::BoundsOrder { .. } => "bounds-order",
            IngestError::EmptyFile(_) => "empty-file",
            IngestError::UnsupportedVersion(_) => "unsupported-version",
            IngestError::Io { .. } => "io",
        }
    }
}

pub(crate) fn syntax(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Syntax {
        line,
        message: message.into(),
    }
}

/// Splits text into (1-based line number, trimmed content), dropping blank
/// lines and lines starting with `#` or `~`.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('~') {
            None
        } else {
            Some((i + 1, t))
        }
    })
}

pub(crate) fn parse_num<T: std::str::FromStr>(line: usize, what: &str, tok: &str) -> Result<T, IngestError> {
    tok.trim()
        .parse::<T>()
        .map_err(|_| syntax(line, format!("invalid {what} `{tok}`")))
}

pub(crate) fn parse_f64(line: usize, what: &str, tok: &str) -> Result<f64, IngestError> {
    let v: f64 = parse_num(line, what, tok)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(syntax(line, format!("non-finite {what} `{tok}`")))
    }
}
