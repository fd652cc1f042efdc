//! Run configurations. Every command builds its configuration from flags, then a
//! `--config` JSON file may override any field; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use stabsel::resampling::{PairCounting, ResamplingPlan, Scheme};
use stabsel::simulate::Topology;
use stabsel::solvers::GlassoOptions;
use stabsel::stability::{build_pi_grid, PferMethod};
use stabsel::{Error, Result};

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    // tagged enums are replaced whole so stale variant fields do not linger
                    Some(slot) if slot.is_object() && v.is_object() && v.get("kind").is_none() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies the JSON file at `path` on top of `config`.
pub fn with_overrides<T: Serialize + DeserializeOwned>(config: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(config) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    let over: Value = serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    if !over.is_object() {
        return Err(Error::InvalidInput(format!("{}: expected a JSON object", path.display())));
    }
    let mut base = serde_json::to_value(config)?;
    merge(&mut base, over);
    serde_json::from_value(base).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg()))
    }
}

fn check_input(path: &Path) -> Result<()> {
    check(path.is_file(), || format!("input file {} does not exist", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSimulationConfig {
    pub topology: Topology,
    pub p: usize,
    pub n: usize,
    pub groups: Option<Vec<usize>>,
    pub v_b: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub prefix: String,
}

impl GraphSimulationConfig {
    pub fn validate(&self) -> Result<()> {
        stabsel::simulate::GraphSpec { topology: self.topology, p: self.p, seed: self.seed }.validate()?;
        check(self.n >= 2, || format!("need at least 2 observations, got {}", self.n))?;
        check(self.v_b > 0.0 && self.v_b <= 1.0, || format!("v_b must lie in (0, 1], got {}", self.v_b))?;
        if let Some(g) = &self.groups {
            let b = stabsel::multiblock::BlockStructure::new(g)?;
            check(b.p() == self.p, || format!("group sizes sum to {}, p is {}", b.p(), self.p))?;
        }
        check(!self.prefix.is_empty(), || "empty output prefix".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSimulationConfig {
    pub n: usize,
    pub p: usize,
    pub signals: usize,
    pub ev: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub prefix: String,
}

impl RegressionSimulationConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.n >= 2 && self.p >= 1, || "need n >= 2 and p >= 1".into())?;
        check(self.signals <= self.p, || format!("{} signals for {} predictors", self.signals, self.p))?;
        check(self.ev > 0.0 && self.ev < 1.0, || format!("explained variance must lie in (0, 1), got {}", self.ev))?;
        check(!self.prefix.is_empty(), || "empty output prefix".into())
    }
}

/// Settings shared by all calibration modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub data: PathBuf,
    pub n_lambdas: usize,
    pub n_pis: usize,
    pub scheme: Scheme,
    pub k: usize,
    pub pair_counting: PairCounting,
    pub pfer_method: PferMethod,
    /// Upper bound on the PFER; `null` for unconstrained calibration.
    pub pfer_max: Option<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub prefix: String,
    pub glasso: GlassoOptions,
    /// Response column (regression only).
    pub response: String,
    /// Variable group sizes (multi-block only).
    pub groups: Option<Vec<usize>>,
    /// Penalty on the blocks not being calibrated (block-wise mode).
    pub lambda0: f64,
    pub mode: MultiBlockMode,
    pub lambdas_per_block: usize,
}

impl CalibrationConfig {
    pub fn plan(&self) -> ResamplingPlan {
        ResamplingPlan { scheme: self.scheme, k: self.k, master_seed: self.seed, pair_counting: self.pair_counting }
    }

    pub fn validate(&self) -> Result<()> {
        check_input(&self.data)?;
        check(self.n_lambdas >= 2, || "need at least 2 penalty values".into())?;
        build_pi_grid(self.n_pis)?;
        if let Some(eta) = self.pfer_max {
            check(eta > 0.0, || format!("PFER bound must be positive, got {eta}"))?;
        }
        check(!self.prefix.is_empty(), || "empty output prefix".into())?;
        if let Some(g) = &self.groups {
            stabsel::multiblock::BlockStructure::new(g)?;
        }
        check(self.lambda0 >= 0.0 && self.lambda0.is_finite(), || format!("lambda0 must be finite and nonnegative, got {}", self.lambda0))?;
        check(self.lambdas_per_block >= 2, || "need at least 2 penalty values per block".into())?;
        // the observation count is checked once the data is read
        self.plan().validate(usize::MAX / 2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MultiBlockMode {
    Blockwise,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreGridConfig {
    pub proportions: PathBuf,
    pub n_pis: usize,
    pub pfer_method: PferMethod,
    pub pfer_max: Option<f64>,
    pub out_dir: PathBuf,
    pub prefix: String,
}

impl ScoreGridConfig {
    pub fn validate(&self) -> Result<()> {
        check_input(&self.proportions)?;
        build_pi_grid(self.n_pis)?;
        if let Some(eta) = self.pfer_max {
            check(eta > 0.0, || format!("PFER bound must be positive, got {eta}"))?;
        }
        check(!self.prefix.is_empty(), || "empty output prefix".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GraphSimulationConfig {
        GraphSimulationConfig {
            topology: Topology::ErdosRenyi { nu: 0.02 },
            p: 100,
            n: 200,
            groups: None,
            v_b: 1.0,
            seed: 1,
            out_dir: ".".into(),
            prefix: "graph".into(),
        }
    }

    #[test]
    fn file_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"p": 30, "topology": {"kind": "scale_free"}}"#).unwrap();
        let c = with_overrides(sample(), Some(&path)).unwrap();
        assert_eq!((c.p, c.n, c.topology), (30, 200, Topology::ScaleFree));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"nodes": 30}"#).unwrap();
        let e = with_overrides(sample(), Some(&path)).unwrap_err().to_string();
        assert!(e.contains("nodes"), "{e}");
        std::fs::write(&path, "[1]").unwrap();
        assert!(with_overrides(sample(), Some(&path)).is_err());
    }

    #[test]
    fn validation() {
        assert!(sample().validate().is_ok());
        assert!(GraphSimulationConfig { p: 2, ..sample() }.validate().is_err());
        assert!(GraphSimulationConfig { groups: Some(vec![50, 40]), ..sample() }.validate().is_err());
        assert!(GraphSimulationConfig { v_b: 0.0, ..sample() }.validate().is_err());
    }
}
