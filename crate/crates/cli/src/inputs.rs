//! Input files and output writing shared by the subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use singlet_core::config::{ExperimentConfig, LabeledPair};
use singlet_core::metrics::ChshConfig;
use singlet_core::{SettingsPair, UnitVector};

use crate::Failure;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("cannot parse {}: {e}", path.display())))
}

/// An experiment configuration, or a run manifest carrying one.
pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let mut value: Value = read_json(path)?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| Failure::Usage(format!("invalid configuration in {}: {e}", path.display())))
}

#[derive(Deserialize)]
struct SettingsEntry {
    label: Option<String>,
    n_l: UnitVector,
    n_r: UnitVector,
}

/// A JSON array of `{"label": …, "n_l": [x, y, z], "n_r": [x, y, z]}`; vectors
/// are normalized on load.
pub fn load_settings(path: &Path) -> Result<Vec<LabeledPair>, Failure> {
    let entries: Vec<SettingsEntry> = read_json(path)?;
    if entries.is_empty() {
        return Err(Failure::Usage(format!("{} lists no settings pairs", path.display())));
    }
    Ok(entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| LabeledPair { label: e.label.unwrap_or_else(|| format!("pair_{i:03}")), pair: SettingsPair::new(e.n_l, e.n_r) })
        .collect())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ChshInput {
    Vectors(ChshConfig),
    Angles { angles_deg: [f64; 4] },
}

/// Either four vectors `a`, `a_prime`, `b`, `b_prime`, or coplanar
/// `angles_deg` in that order.
pub fn load_chsh_config(path: &Path) -> Result<ChshConfig, Failure> {
    Ok(match read_json::<ChshInput>(path)? {
        ChshInput::Vectors(c) => c,
        ChshInput::Angles { angles_deg: [a, ap, b, bp] } => ChshConfig::coplanar_deg(a, ap, b, bp),
    })
}

/// A JSON array of `[pair, pair]` candidates, each pair `{"n_l": …, "n_r": …}`.
pub fn load_candidates(path: &Path) -> Result<Vec<(SettingsPair, SettingsPair)>, Failure> {
    let raw: Vec<[SettingsPair; 2]> = read_json(path)?;
    if raw.is_empty() {
        return Err(Failure::Usage(format!("{} lists no candidates", path.display())));
    }
    Ok(raw.into_iter().map(|[s, t]| (s, t)).collect())
}

/// Collects output files and writes them into one directory.
pub struct OutputDir {
    dir: PathBuf,
    pub written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: BTreeMap::new() })
    }

    pub fn write(&mut self, role: &str, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.insert(role.to_string(), name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` describing the run and the files written so far.
    pub fn write_manifest(&mut self, command: &str, config: &impl Serialize) -> Result<(), Failure> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            outputs: &self.written,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(Failure::runtime)? + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a C,
    outputs: &'a BTreeMap<String, String>,
}
