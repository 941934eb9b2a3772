//! JSON Schemas for every response body, served under `/api/v1/schemas`.

pub const ALL: &[(&str, &str)] = &[
    ("error", include_str!("../schemas/error.json")),
    ("scenario", include_str!("../schemas/scenario.json")),
    ("network", include_str!("../schemas/network.json")),
    ("state", include_str!("../schemas/state.json")),
    ("hotspots", include_str!("../schemas/hotspots.json")),
    ("stations", include_str!("../schemas/stations.json")),
    ("station-series", include_str!("../schemas/station-series.json")),
    ("attribution", include_str!("../schemas/attribution.json")),
    ("job", include_str!("../schemas/job.json")),
    ("jobs", include_str!("../schemas/jobs.json")),
    ("siting-result", include_str!("../schemas/siting-result.json")),
    ("solutions", include_str!("../schemas/solutions.json")),
    ("impact", include_str!("../schemas/impact.json")),
];

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
