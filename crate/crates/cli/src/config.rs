use std::path::{Path, PathBuf};

use augsel::{OracleConfig, SelectorConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "AUGSEL_OUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub manifest: Option<PathBuf>,
    /// Base for relative audio paths in the manifest. Defaults to the
    /// manifest's directory.
    pub audio_root: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub min_segment_s: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            min_segment_s: augsel::corpus::MIN_SEGMENT_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub hidden_policies: usize,
    pub candidates_per_target: usize,
    /// Falls back to `selector.master_seed`.
    pub master_seed: Option<u64>,
    pub inject_hidden: bool,
    pub tail_fraction: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let d = OracleConfig::default();
        Self {
            hidden_policies: d.hidden_policies,
            candidates_per_target: d.candidates_per_target,
            master_seed: None,
            inject_hidden: d.inject_hidden,
            tail_fraction: d.tail_fraction,
        }
    }
}

/// The whole run description, as read from TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub paths: Paths,
    pub corpus: CorpusSection,
    pub selector: SelectorConfig,
    pub oracle: OracleSection,
}

impl RunConfig {
    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            hidden_policies: self.oracle.hidden_policies,
            candidates_per_target: self.oracle.candidates_per_target,
            selector: self.selector,
            master_seed: self.oracle.master_seed.unwrap_or(self.selector.master_seed),
            inject_hidden: self.oracle.inject_hidden,
            tail_fraction: self.oracle.tail_fraction,
        }
    }

    pub fn manifest(&self) -> Result<&Path, CliError> {
        self.paths
            .manifest
            .as_deref()
            .ok_or_else(|| CliError::Config("missing required key `paths.manifest`".into()))
    }

    pub fn audio_root(&self) -> Result<PathBuf, CliError> {
        match &self.paths.audio_root {
            Some(p) => Ok(p.clone()),
            None => Ok(self
                .manifest()?
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()),
        }
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.paths.out_dir.as_deref().ok_or_else(|| {
            CliError::Config(format!(
                "no output directory: set `paths.out_dir`, pass --out or set {OUT_DIR_ENV}"
            ))
        })
    }

    /// The config as echoed into reports that must not depend on where they
    /// are written.
    pub fn echo_without_out_dir(&self) -> RunConfig {
        let mut c = self.clone();
        c.paths.out_dir = None;
        c
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |e: augsel::Error| CliError::Config(e.to_string());
        self.selector.validate().map_err(bad)?;
        self.oracle_config().validate().map_err(bad)?;
        if !(self.corpus.min_segment_s >= 0.0) {
            return Err(CliError::Config("corpus.min_segment_s must be non-negative".into()));
        }
        Ok(())
    }
}

/// Command-line adjustments applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub env_out: Option<PathBuf>,
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

fn apply_set(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override key `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base
                .join(&*path)
                .components()
                .filter(|c| !matches!(c, std::path::Component::CurDir))
                .collect();
        }
    }
}

/// Reads the config file (or starts from defaults), applies overrides and
/// resolves relative paths against the file's directory.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let (mut table, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            let table: Table = text
                .parse()
                .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?;
            (table, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (Table::new(), PathBuf::new()),
    };
    for s in &overrides.set {
        apply_set(&mut table, s)?;
    }
    let mut config: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().to_string()))?;

    let cwd = std::env::current_dir().unwrap_or_default();
    let base = cwd.join(base);
    resolve(&base, &mut config.paths.manifest);
    resolve(&base, &mut config.paths.audio_root);
    resolve(&base, &mut config.paths.out_dir);
    if let Some(out) = overrides.out.as_ref().or(overrides.env_out.as_ref()) {
        config.paths.out_dir = Some(cwd.join(out));
    }
    if let Some(seed) = overrides.seed {
        config.selector.master_seed = seed;
        config.oracle.master_seed = Some(seed);
    }
    config.oracle.master_seed = Some(config.oracle.master_seed.unwrap_or(config.selector.master_seed));
    config.validate()?;
    Ok(config)
}
