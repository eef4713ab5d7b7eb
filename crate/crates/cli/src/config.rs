//! Run configuration: TOML file, dotted-key overrides and the config hash.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skewlab::class_a::ConditionCOptions;
use skewlab::experiments::ExperimentConfig;
use skewlab::{BivarPoly, ComplexPoly, SkewProduct, C64};

/// Polynomial coefficients: `p` as `[re, im]` by ascending power, `q` as
/// `[j, k, re, im]` terms `c z^j w^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub p: Vec<[f64; 2]>,
    pub q: Vec<[f64; 4]>,
}

impl Default for MapConfig {
    fn default() -> Self {
        // z^2 + z/4, w^2 + w/2 + 10 z^2
        Self {
            p: vec![[0.0, 0.0], [0.25, 0.0], [1.0, 0.0]],
            q: vec![[0.0, 2.0, 1.0, 0.0], [0.0, 1.0, 0.5, 0.0], [2.0, 0.0, 10.0, 0.0]],
        }
    }
}

impl MapConfig {
    pub fn build(&self) -> Result<SkewProduct> {
        let p = ComplexPoly::new(self.p.iter().map(|c| C64::new(c[0], c[1])).collect());
        let mut terms = Vec::with_capacity(self.q.len());
        for t in &self.q {
            let (j, k) = (t[0], t[1]);
            if j < 0.0 || k < 0.0 || j.fract() != 0.0 || k.fract() != 0.0 {
                bail!("map.q term powers must be non-negative integers, got [{j}, {k}]");
            }
            terms.push((j as u32, k as u32, C64::new(t[2], t[3])));
        }
        SkewProduct::new(p, BivarPoly::from_terms(terms)).map_err(|e| anyhow!(ConfigError(e.to_string())))
    }
}

/// Box for a raster; `half = 0` picks a box from the escape bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceConfig {
    /// Base point of the slice `Ω_z`.
    pub z: [f64; 2],
    pub center: [f64; 2],
    pub half: f64,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self { z: [0.0, 0.0], center: [0.0, 0.0], half: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    /// `[z_re, z_im, w_re, w_im]`
    pub from: [f64; 4],
    pub to: [f64; 4],
    /// Per-axis resolution of the optional 4D grid; 0 skips that method.
    pub grid4_resolution: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self { from: [0.0, 0.0, -0.5, 0.0], to: [0.1, 0.0, -0.2, 0.1], grid4_resolution: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Exact rationals such as `10` or `21/2`.
    pub l: String,
    pub b: String,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { l: "10".into(), b: "5".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// `2d` for the skew product, `1d` for the base map alone.
    pub mode: String,
    pub merge_tol: f64,
    pub map: MapConfig,
    pub experiment: ExperimentConfig,
    pub check: ConditionCOptions,
    pub slice: SliceConfig,
    pub distance: DistanceConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            threads: 0,
            mode: "2d".into(),
            merge_tol: skewlab::preimage::MERGE_TOL,
            map: MapConfig::default(),
            experiment: ExperimentConfig::default(),
            check: ConditionCOptions::default(),
            slice: SliceConfig::default(),
            distance: DistanceConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// Marker for errors that map to the configuration exit code.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let table: toml::Table = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                // round-trip through the struct first so unknown keys are caught
                let cfg: RunConfig = table.try_into().map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                toml::Value::try_from(cfg)?
            }
            None => toml::Value::try_from(RunConfig::default())?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = value.try_into().map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(|e| config_err(e.to_string()))?;
        if !(self.merge_tol > 0.0 && self.check.eps > 0.0 && self.check.slice_cell > 0.0) {
            return Err(config_err("tolerances must be positive"));
        }
        if self.mode != "1d" && self.mode != "2d" {
            return Err(config_err(format!("mode must be \"1d\" or \"2d\", got {:?}", self.mode)));
        }
        if self.slice.half < 0.0 {
            return Err(config_err("slice.half must be >= 0"));
        }
        let r4 = self.distance.grid4_resolution;
        if r4 != 0 && !(r4.is_power_of_two() && (8..=64).contains(&r4)) {
            return Err(config_err("distance.grid4_resolution must be 0 or a power of two in 8..=64"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, leaving out settings that do
    /// not change results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.threads = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `a.b.c=value`; the value is parsed as a TOML value, falling back to a
/// plain string.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| config_err(format!("override {spec:?} is not key=value")))?;
    let key = key.trim();
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node.as_table_mut().ok_or_else(|| config_err(format!("{key}: {part} is not a table")))?;
        if !table.contains_key(*part) {
            return Err(config_err(format!("unknown config key {key:?}")));
        }
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table.get_mut(*part).expect("checked above");
    }
    Err(config_err(format!("empty config key in {spec:?}")))
}

/// Every key with its default, one `key = value` line each.
pub fn documented_keys() -> String {
    fn walk(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
        match v {
            toml::Value::Table(t) => {
                for (k, v) in t {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            other => out.push(format!("  {prefix} = {other}")),
        }
    }
    let mut lines = Vec::new();
    walk("", &toml::Value::try_from(RunConfig::default()).expect("defaults serialize"), &mut lines);
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn overrides_change_the_hash() {
        let base = RunConfig::load(None, &[]).unwrap();
        let cfg = RunConfig::load(None, &["experiment.seed=7".into(), "verify.l=21/2".into()]).unwrap();
        assert_eq!(cfg.experiment.seed, 7);
        assert_eq!(cfg.verify.l, "21/2");
        assert_ne!(base.hash(), cfg.hash());
        let moved = RunConfig::load(None, &["out_dir=elsewhere".into(), "threads=2".into()]).unwrap();
        assert_eq!(base.hash(), moved.hash());
    }

    #[test]
    fn bad_keys_and_values_are_config_errors() {
        for o in ["experiment.nope=1", "experiment.u_resolution=100", "mode=3d", "seed"] {
            let err = RunConfig::load(None, &[o.into()]).unwrap_err();
            assert!(err.downcast_ref::<ConfigError>().is_some(), "{o}: {err}");
        }
    }

    #[test]
    fn help_lists_nested_keys() {
        let keys = documented_keys();
        for k in ["experiment.seed = 1", "check.dilation = 2", "verify.b = \"5\"", "map.p = "] {
            assert!(keys.contains(k), "{k} missing from\n{keys}");
        }
    }
}
