//! Pipeline configuration: one TOML file with nested sections, every value
//! overridable from the command line via `--set path=value`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use geosynth::cart::{CartConfig, GeocodeOrder};
use geosynth::dpmpm::DpmpmConfig;
use geosynth::error::{Error, Result};
use geosynth::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synthesizer {
    CartCategorical,
    CartContinuous,
    Dpmpm,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CartSection {
    #[serde(flatten)]
    pub params: CartConfig,
    /// Coordinate order of the continuous synthesizer.
    pub geocode_order: GeocodeOrder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskSection {
    /// Defaults to the schema's quasi-identifier list when empty.
    pub quasi_identifiers: Vec<String>,
    pub targets_per_cluster: usize,
    pub block_on_cluster: bool,
    /// Grid sides in meters; 0 means exact-geocode matching. One report row
    /// per entry.
    pub grid_sizes: Vec<f64>,
    /// Also evaluate the benchmark scenario in which the intruder ignores
    /// the geocode entirely.
    pub include_no_geocode: bool,
}

impl Default for RiskSection {
    fn default() -> Self {
        RiskSection {
            quasi_identifiers: Vec::new(),
            targets_per_cluster: 100,
            block_on_cluster: true,
            grid_sizes: vec![0.0, 100.0, 1000.0, 10_000.0, 20_000.0],
            include_no_geocode: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub name: String,
    pub variable: String,
    /// Level labels whose union defines the outcome.
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilitySection {
    /// Categorical variable whose levels act as regions (ZIP-like).
    pub region_variable: String,
    /// Interaction levels for the UL measure.
    pub levels: Vec<usize>,
    /// Variables entering the interaction tables; empty means every
    /// categorical variable except the region variable.
    pub table_variables: Vec<String>,
    /// Number of radii in the L-function grid.
    pub r_count: usize,
    /// Spatial domain area; omitted means the original bounding box.
    pub domain_area: Option<f64>,
    pub share: Vec<OutcomeSpec>,
    pub l_function: Vec<OutcomeSpec>,
}

impl Default for UtilitySection {
    fn default() -> Self {
        UtilitySection {
            region_variable: String::new(),
            levels: vec![1, 2, 3],
            table_variables: Vec::new(),
            r_count: 50,
            domain_area: None,
            share: Vec::new(),
            l_function: Vec::new(),
        }
    }
}

/// Everything the pipeline needs, mirrored verbatim into the emitted
/// manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub schema: PathBuf,
    pub synthesizer: Synthesizer,
    /// Ordered synthesis targets; defaults to the schema's list when empty.
    #[serde(default)]
    pub synthesis_targets: Vec<String>,
    pub m: usize,
    pub mdav_k: usize,
    pub seed: u64,
    /// Optional pre-synthesis aggregation level in meters.
    #[serde(default)]
    pub aggregation: Option<f64>,
    pub output_dir: PathBuf,
    /// Worker threads; 0 keeps the rayon default.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub cart: CartSection,
    #[serde(default)]
    pub dpmpm: DpmpmConfig,
    #[serde(default)]
    pub risk: RiskSection,
    #[serde(default)]
    pub utility: UtilitySection,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads the config file and applies `--set path=value` overrides before
    /// deserializing.
    pub fn load(path: &Path, overrides: &[String]) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: toml::Table =
            toml::from_str(&text).map_err(|e| Error::Config(format!("parse: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: PipelineConfig = toml::Table::try_into(value)
            .map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.mdav_k < 1 {
            return Err(Error::Config("mdav_k must be >= 1".into()));
        }
        self.cart.params.validate()?;
        self.dpmpm.validate()?;
        for g in &self.risk.grid_sizes {
            if *g < 0.0 {
                return Err(Error::Config("risk.grid_sizes entries must be >= 0".into()));
            }
        }
        if let Some(g) = self.aggregation {
            if !(g > 0.0) {
                return Err(Error::Config("aggregation must be > 0 when set".into()));
            }
        }
        Ok(())
    }

    /// Ordered synthesis targets, falling back to the schema's declaration.
    pub fn targets(&self, schema: &Schema) -> Result<Vec<String>> {
        let targets = if self.synthesis_targets.is_empty() {
            schema.synthesis_targets().to_vec()
        } else {
            self.synthesis_targets.clone()
        };
        if targets.is_empty() {
            return Err(Error::Config(
                "no synthesis targets: set synthesis_targets in the config or schema".into(),
            ));
        }
        Ok(targets)
    }

    /// Quasi-identifiers for risk evaluation, falling back to the schema.
    pub fn quasi_identifiers(&self, schema: &Schema) -> Result<Vec<String>> {
        let qis = if self.risk.quasi_identifiers.is_empty() {
            schema.quasi_identifiers().to_vec()
        } else {
            self.risk.quasi_identifiers.clone()
        };
        if qis.is_empty() {
            return Err(Error::Config(
                "no quasi-identifiers: set risk.quasi_identifiers in the config or schema".into(),
            ));
        }
        Ok(qis)
    }
}

/// Applies one `path.to.key=value` override onto the parsed TOML tree. The
/// value is parsed as TOML when possible and as a bare string otherwise.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form path=value")))?;
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };

    let parts: Vec<&str> = path.split('.').collect();
    let mut current = table;
    for key in &parts[..parts.len() - 1] {
        current = current
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override path `{path}` crosses a non-table")))?;
    }
    current.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
input = "pop.csv"
schema = "schema.toml"
synthesizer = "cart_categorical"
m = 5
mdav_k = 100
seed = 7
output_dir = "out"

[utility]
region_variable = "zip"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.m, 5);
        assert_eq!(cfg.cart.params.minbucket, 7);
        assert_eq!(cfg.cart.params.cp, 1e-5);
        assert_eq!(cfg.dpmpm.truncation, 100);
        assert_eq!(cfg.risk.targets_per_cluster, 100);
        assert_eq!(cfg.risk.grid_sizes.len(), 5);
        assert!(cfg.risk.include_no_geocode);
        assert_eq!(cfg.utility.levels, vec![1, 2, 3]);
    }

    #[test]
    fn overrides_reach_nested_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = PipelineConfig::load(
            &path,
            &[
                "cart.cp=0.01".to_string(),
                "m=2".to_string(),
                "risk.block_on_cluster=false".to_string(),
                "dpmpm.thin=25".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.cart.params.cp, 0.01);
        assert_eq!(cfg.m, 2);
        assert!(!cfg.risk.block_on_cluster);
        assert_eq!(cfg.dpmpm.thin, 25);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = MINIMAL.replace("m = 5", "m = 0");
        assert!(PipelineConfig::from_toml_str(&bad).is_err());
        let bad = MINIMAL.replace("seed = 7", "seed = 7\naggregation = -3.0");
        assert!(PipelineConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let again = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(toml::to_string(&again).unwrap(), text);
    }
}
