use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::evaluator::{MdrParams, PhysicsParams};
use crate::gripper::{GripperFamily, GripperSpec};
use crate::metrics::DEFAULT_STEP;
use crate::projection::PriorTag;
use crate::qd::{Algorithm, FitnessMode, QdConfig};
use crate::{Error, Result};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "QDGRASP_OUTPUT_ROOT";

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_fitness() -> FitnessMode {
    FitnessMode::Shake
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_nu_bins() -> usize {
    18
}

fn default_scale() -> f64 {
    1.0
}

fn default_samples() -> usize {
    crate::mesh::DEFAULT_SAMPLE_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Directory name under the output root; derived from mesh, prior and algorithm when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub prior: PriorTag,
    pub algorithm: Algorithm,
    #[serde(default = "default_fitness")]
    pub fitness: FitnessMode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Quantization step for coverage and voxel outputs (m).
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_nu_bins")]
    pub nu_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub path: PathBuf,
    /// Multiplier taking file units to meters.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub sample_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRef {
    pub preset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GripperChoice {
    Preset(PresetRef),
    Inline(GripperSpec),
}

impl GripperChoice {
    pub fn resolve(&self) -> Result<GripperSpec> {
        let spec = match self {
            GripperChoice::Preset(p) => {
                GripperSpec::preset(&p.preset).map_err(|e| Error::config("gripper.preset", e.to_string()))?
            }
            GripperChoice::Inline(s) => s.clone(),
        };
        spec.validate().map_err(|e| Error::config("gripper", e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub mesh: MeshSection,
    pub gripper: GripperChoice,
    #[serde(default)]
    pub qd: QdConfig,
    #[serde(default)]
    pub physics: PhysicsParams,
    #[serde(default)]
    pub mdr: MdrParams,
}

impl RunConfig {
    /// Parses TOML text, applies `section.key=value` overrides and validates.
    /// Relative mesh paths are taken relative to `base_dir`.
    pub fn from_toml(text: &str, overrides: &[String], base_dir: Option<&Path>) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        if let Some(g) = table.get("gripper").and_then(|g| g.as_table()) {
            if g.contains_key("preset") && g.len() > 1 {
                let extra = g.keys().find(|k| *k != "preset").cloned().unwrap_or_default();
                return Err(Error::config(
                    format!("gripper.{extra}"),
                    "a preset gripper takes no other keys; give a full inline spec instead",
                ));
            }
        }
        if let Some(k) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::config(k.as_str(), "unknown section"));
        }
        let mut cfg = RunConfig {
            run: section(&mut table, "run")?.ok_or_else(|| Error::config("run", "missing section"))?,
            mesh: section(&mut table, "mesh")?.ok_or_else(|| Error::config("mesh", "missing section"))?,
            gripper: section(&mut table, "gripper")?.ok_or_else(|| Error::config("gripper", "missing section"))?,
            qd: section(&mut table, "qd")?.unwrap_or_default(),
            physics: section(&mut table, "physics")?.unwrap_or_default(),
            mdr: section(&mut table, "mdr")?.unwrap_or_default(),
        };
        if let Some(base) = base_dir {
            if cfg.mesh.path.is_relative() {
                cfg.mesh.path = base.join(&cfg.mesh.path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.gripper.resolve()?;
        if self.run.prior == PriorTag::Antipodal && spec.family != GripperFamily::ParallelJaw {
            return Err(Error::config(
                "run.prior",
                format!(
                    "the antipodal prior needs a parallel_jaw gripper, `{}` is not one",
                    spec.name
                ),
            ));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("run.seeds", "at least one seed is required"));
        }
        if !(self.run.step > 0.0 && self.run.step.is_finite()) {
            return Err(Error::config("run.step", "must be a positive length"));
        }
        if self.run.nu_bins == 0 {
            return Err(Error::config("run.nu_bins", "must be at least 1"));
        }
        if let Some(name) = &self.run.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(Error::config("run.name", "must be a plain directory name"));
            }
        }
        if !(self.mesh.scale > 0.0 && self.mesh.scale.is_finite()) {
            return Err(Error::config("mesh.scale", "must be positive"));
        }
        if self.mesh.samples == 0 {
            return Err(Error::config("mesh.samples", "must be at least 1"));
        }
        let tag = |section: &str, (k, m): (&str, String)| Error::config(format!("{section}.{k}"), m);
        self.qd.validate().map_err(|e| tag("qd", e))?;
        self.physics.validate().map_err(|e| tag("physics", e))?;
        self.mdr.validate().map_err(|e| tag("mdr", e))?;
        Ok(())
    }

    /// Run directory name when `run.name` is not set.
    pub fn default_name(&self) -> String {
        let stem = self.mesh.path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
        format!("{stem}_{}_{}", self.run.prior.as_str(), self.run.algorithm.as_str())
    }

    /// `run.output_dir`, else `$QDGRASP_OUTPUT_ROOT/<name>`, else `runs/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(d) = &self.run.output_dir {
            return d.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(self.run.name.clone().unwrap_or_else(|| self.default_name()))
    }
}

const SECTIONS: [&str; 6] = ["run", "mesh", "gripper", "qd", "physics", "mdr"];

fn section<T: DeserializeOwned>(table: &mut toml::Table, name: &str) -> Result<Option<T>> {
    let Some(value) = table.remove(name) else {
        return Ok(None);
    };
    if !value.is_table() {
        return Err(Error::config(name, "expected a section"));
    }
    T::deserialize(value).map(Some).map_err(|e| {
        let msg = e.to_string().trim().to_string();
        let key = ["unknown field `", "missing field `", "in `"]
            .iter()
            .find_map(|pat| {
                let rest = &msg[msg.rfind(pat)? + pat.len()..];
                Some(format!("{name}.{}", &rest[..rest.find('`')?]))
            })
            .unwrap_or_else(|| name.to_string());
        if name == "gripper" && key == name {
            Error::config(name, "expected `preset = \"<name>\"` or a complete inline gripper spec")
        } else {
            Error::config(key, msg)
        }
    })
}

/// Sets `section.key` (dotted path) to a TOML literal, or to a string if it does not parse.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like section.key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty path component"));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
