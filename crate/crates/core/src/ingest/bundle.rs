use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    parse_grid_case, parse_num, parse_od, parse_road_network, parse_stations, syntax, write_grid_case,
    write_od, write_road_network, write_stations, IngestError, MergeWarning,
};
use crate::model::{BusId, CouplingMap, NodeId};
use crate::Scenario;

pub const FORMAT_VERSION: &str = "1";

/// `scenario.toml` plus the text of the five input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBundle {
    pub format_version: String,
    pub ev_share: f64,
    pub charge_propensity: f64,
    pub energy_per_vehicle: f64,
    #[serde(skip)]
    pub road: String,
    #[serde(skip)]
    pub od: String,
    #[serde(skip)]
    pub stations: String,
    #[serde(skip)]
    pub grid: String,
    #[serde(skip)]
    pub coupling: String,
}

#[derive(Deserialize)]
struct Manifest {
    format_version: String,
    ev_share: f64,
    charge_propensity: f64,
    energy_per_vehicle: f64,
    #[serde(default = "defaults::road")]
    road: String,
    #[serde(default = "defaults::od")]
    od: String,
    #[serde(default = "defaults::stations")]
    stations: String,
    #[serde(default = "defaults::grid")]
    grid: String,
    #[serde(default = "defaults::coupling")]
    coupling: String,
}

mod defaults {
    pub fn road() -> String {
        "road.tntp".into()
    }
    pub fn od() -> String {
        "od.csv".into()
    }
    pub fn stations() -> String {
        "stations.csv".into()
    }
    pub fn grid() -> String {
        "grid.case".into()
    }
    pub fn coupling() -> String {
        "coupling.csv".into()
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl ScenarioBundle {
    /// Reads `scenario.toml` and the files it names from `dir`.
    pub fn from_dir(dir: &Path) -> Result<ScenarioBundle, IngestError> {
        let manifest_path = dir.join("scenario.toml");
        let text = read(&manifest_path)?;
        let m: Manifest = toml::from_str(&text).map_err(|e| IngestError::Io {
            path: manifest_path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(ScenarioBundle {
            format_version: m.format_version,
            ev_share: m.ev_share,
            charge_propensity: m.charge_propensity,
            energy_per_vehicle: m.energy_per_vehicle,
            road: read(&dir.join(&m.road))?,
            od: read(&dir.join(&m.od))?,
            stations: read(&dir.join(&m.stations))?,
            grid: read(&dir.join(&m.grid))?,
            coupling: read(&dir.join(&m.coupling))?,
        })
    }

    pub fn from_scenario(s: &Scenario) -> ScenarioBundle {
        ScenarioBundle {
            format_version: FORMAT_VERSION.to_string(),
            ev_share: s.od.ev_share,
            charge_propensity: s.coupling.charge_propensity,
            energy_per_vehicle: s.coupling.energy_per_vehicle,
            road: write_road_network(&s.road),
            od: write_od(&s.od),
            stations: write_stations(&s.stations, &s.road),
            grid: write_grid_case(&s.grid),
            coupling: write_coupling(&s.coupling),
        }
    }

    /// Writes `scenario.toml` and the five input files into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), IngestError> {
        let io = |p: &Path, e: std::io::Error| IngestError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let manifest = format!(
            "format_version = \"{}\"\nev_share = {:?}\ncharge_propensity = {:?}\nenergy_per_vehicle = {:?}\n\
             road = \"road.tntp\"\nod = \"od.csv\"\nstations = \"stations.csv\"\ngrid = \"grid.case\"\ncoupling = \"coupling.csv\"\n",
            self.format_version, self.ev_share, self.charge_propensity, self.energy_per_vehicle
        );
        for (name, body) in [
            ("scenario.toml", manifest.as_str()),
            ("road.tntp", &self.road),
            ("od.csv", &self.od),
            ("stations.csv", &self.stations),
            ("grid.case", &self.grid),
            ("coupling.csv", &self.coupling),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| io(&p, e))?;
        }
        Ok(())
    }

    /// Parses every input. An empty station file is allowed here and yields
    /// no stations.
    pub fn parse(&self) -> Result<(Scenario, Vec<MergeWarning>), IngestError> {
        if self.format_version != FORMAT_VERSION {
            return Err(IngestError::UnsupportedVersion(self.format_version.clone()));
        }
        let road = parse_road_network(&self.road)?;
        let od = parse_od(&self.od, self.ev_share)?;
        let (stations, warnings) = match parse_stations(&self.stations, &road) {
            Ok(x) => x,
            Err(IngestError::EmptyFile(_)) => (Vec::new(), Vec::new()),
            Err(e) => return Err(e),
        };
        let road = road.with_station_flags(&stations);
        let grid = parse_grid_case(&self.grid)?;
        let coupling = parse_coupling(&self.coupling, self.charge_propensity, self.energy_per_vehicle)?;
        Ok((
            Scenario {
                road,
                od,
                stations,
                grid,
                coupling,
            },
            warnings,
        ))
    }
}

/// Parses `node,bus` rows.
pub fn parse_coupling(
    text: &str,
    charge_propensity: f64,
    energy_per_vehicle: f64,
) -> Result<CouplingMap, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut node_to_bus = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| syntax(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 2 {
            return Err(syntax(line, "expected `node,bus`"));
        }
        let node = NodeId(parse_num(line, "node", &rec[0])?);
        let bus = BusId(parse_num(line, "bus", &rec[1])?);
        if !seen.insert(node) {
            return Err(IngestError::DuplicateId {
                kind: "coupling node",
                id: node.to_string(),
            });
        }
        node_to_bus.push((node, bus));
    }
    Ok(CouplingMap {
        node_to_bus,
        charge_propensity,
        energy_per_vehicle,
    })
}

pub fn write_coupling(c: &CouplingMap) -> String {
    let mut s = String::from("node,bus\n");
    for (n, b) in &c.node_to_bus {
        s.push_str(&format!("{n},{b}\n"));
    }
    s
}
