//! The `--config` file: one TOML table per library config. Every field is
//! optional; flags given on the command line win over file values.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use evsite_core::coupled::CoupledConfig;
use evsite_core::hotspots::HotspotConfig;
use evsite_core::impact::ImpactThresholds;
use evsite_core::siting::GaConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub coupled: CoupledConfig,
    pub ga: GaConfig,
    pub hotspots: HotspotConfig,
    pub impact: ImpactThresholds,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: FileConfig = toml::from_str("[ga]\nseed = 9\n[coupled.cost]\nbeta = 2.0\n").unwrap();
        assert_eq!(c.ga.seed, 9);
        assert_eq!(c.ga.iterations, GaConfig::default().iterations);
        assert_eq!(c.coupled.cost.beta, 2.0);
        assert_eq!(c.coupled.cost.alpha, 0.15);
    }

    #[test]
    fn echo_round_trips() {
        let mut c = FileConfig::default();
        c.coupled.slices = vec![evsite_core::SliceLabel::hour(8)];
        c.ga.weights.w2 = 0.25;
        let back: FileConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[ga]\nseeed = 1\n").is_err());
    }
}
