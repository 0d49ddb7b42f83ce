//! Run configuration: one TOML file, optionally patched with
//! `--set section.key=value` overrides.
//!
//! Schema (every key optional, defaults shown by `RunConfig::default`):
//!
//! ```toml
//! seed = 0                 # global seed, split into named substreams
//! out = "out"              # output root
//!
//! [field.downwash]         # single-vehicle column
//! [field.merge]            # merging oracle
//! [noise]                  # sigma_force, sigma_torque
//! [sweep]                  # lateral_extent, vertical_extent, speed, legs,
//!                          # samples_per_leg, spacing, altitudes
//! [[datasets]]             # formation, k, oracle, optional samples_per_leg
//! [naive]                  # e_cells, datasets
//! [train]                  # optimiser settings, models, datasets
//! [train.architecture]     # psi, phi, big_phi layer sizes
//! [eval]                   # oracle, altitudes, extent, resolution, speed,
//!                          # slice_axis, slice_resolution, cases
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use downwash_core::eval::{EvalSettings, LateralAxis};
use downwash_core::field::NoiseParams;
use downwash_core::formations::{Formation, FormationKind, SweepConfig};
use downwash_core::models::{Architecture, LossWeighting, ModelKind, TrainConfig};
use downwash_core::oracle::{FieldParams, OracleKind};
use downwash_core::seed::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub field: FieldParams,
    pub noise: NoiseSection,
    pub sweep: SweepConfig,
    pub datasets: Vec<DatasetSpec>,
    pub naive: NaiveSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma_force: f64,
    pub sigma_torque: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseParams::default();
        NoiseSection {
            sigma_force: n.sigma_force,
            sigma_torque: n.sigma_torque,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub formation: FormationKind,
    pub k: usize,
    pub oracle: OracleKind,
    /// Overrides `sweep.samples_per_leg` for this dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_leg: Option<usize>,
}

impl DatasetSpec {
    pub fn new(formation: FormationKind, k: usize, oracle: OracleKind) -> Self {
        DatasetSpec {
            formation,
            k,
            oracle,
            samples_per_leg: None,
        }
    }

    pub fn stem(&self) -> String {
        format!("{}_k{}_{}", self.formation, self.k, self.oracle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveSection {
    /// Grid cells along each leg.
    pub e_cells: usize,
    /// Dataset stems to fit from; empty means every K=1 dataset.
    pub datasets: Vec<String>,
}

impl Default for NaiveSection {
    fn default() -> Self {
        NaiveSection {
            e_cells: 51,
            datasets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// `per_axis` or `per_group` target standardisation.
    pub loss_weighting: LossWeighting,
    /// Trainable models to fit.
    pub models: Vec<ModelKind>,
    /// Dataset stems forming the training mix; empty means all datasets.
    pub datasets: Vec<String>,
    pub architecture: Architecture,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            loss_weighting: t.loss_weighting,
            models: vec![ModelKind::Linear, ModelKind::DeepSet],
            datasets: Vec::new(),
            architecture: Architecture::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub formation: FormationKind,
    pub k: usize,
}

impl CaseSpec {
    pub fn label(&self) -> String {
        format!("{}_k{}", self.formation, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Ground truth for every evaluation.
    pub oracle: OracleKind,
    pub altitudes: Vec<f64>,
    pub extent: f64,
    pub resolution: usize,
    pub speed: f64,
    pub slice_axis: LateralAxis,
    pub slice_resolution: usize,
    pub cases: Vec<CaseSpec>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            oracle: OracleKind::Merging,
            altitudes: vec![0.3, 0.8, 1.3],
            extent: 2.0,
            resolution: 64,
            speed: 0.5,
            slice_axis: LateralAxis::E,
            slice_resolution: 201,
            cases: vec![
                CaseSpec {
                    formation: FormationKind::LeaderFollower,
                    k: 3,
                },
                CaseSpec {
                    formation: FormationKind::LeaderFollower,
                    k: 4,
                },
                CaseSpec {
                    formation: FormationKind::SideBySide,
                    k: 1,
                },
            ],
        }
    }
}

impl EvalSection {
    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            altitudes: self.altitudes.clone(),
            extent: self.extent,
            resolution: self.resolution,
            speed: self.speed,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        use FormationKind::*;
        let merging = OracleKind::Merging;
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            field: FieldParams::default(),
            noise: NoiseSection::default(),
            sweep: SweepConfig::default(),
            datasets: vec![
                DatasetSpec::new(SideBySide, 1, merging),
                DatasetSpec::new(SideBySide, 2, merging),
                DatasetSpec::new(Stack, 2, merging),
                DatasetSpec::new(LeaderFollower, 3, merging),
                DatasetSpec::new(Hybrid3, 3, merging),
            ],
            naive: NaiveSection::default(),
            // Every formation, sized to keep the full pipeline near ten minutes
            // on one core.
            train: TrainSection {
                epochs: 40,
                ..TrainSection::default()
            },
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    /// Parse and validate TOML text. `origin` names the source in errors.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load `path` (or the defaults when `None`) and apply overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let (mut table, origin) = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                let origin = p.display().to_string();
                // Typed parse first so schema errors point at the file's lines.
                RunConfig::from_toml(&text, &origin)?;
                let table: toml::Table =
                    toml::from_str(&text).map_err(|e| CliError::config(format!("{origin}: {e}")))?;
                (table, origin)
            }
            None => (
                toml::Table::try_from(RunConfig::default()).expect("defaults serialize"),
                "defaults".to_string(),
            ),
        };
        if overrides.is_empty() {
            return Self::from_table(table, &origin);
        }
        for raw in overrides {
            apply_override(&mut table, raw)?;
        }
        Self::from_table(table, &format!("{origin} with --set {}", overrides.join(" --set ")))
    }

    fn from_table(table: toml::Table, origin: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e| CliError::config(format!("{origin}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |what: &str, e: downwash_core::Error| CliError::config(format!("[{what}] {e}"));
        self.field.validate().map_err(|e| bad("field", e))?;
        self.noise_params("").validate().map_err(|e| bad("noise", e))?;
        self.sweep.validate().map_err(|e| bad("sweep", e))?;
        if self.datasets.is_empty() {
            return Err(CliError::config("[datasets] at least one dataset is required"));
        }
        let mut stems = BTreeSet::new();
        for d in &self.datasets {
            Formation::new(d.formation, d.k, self.sweep.spacing).map_err(|e| bad("datasets", e))?;
            if d.samples_per_leg == Some(0) {
                return Err(CliError::config(format!(
                    "[datasets] {}: samples_per_leg must be positive",
                    d.stem()
                )));
            }
            if !stems.insert(d.stem()) {
                return Err(CliError::config(format!("[datasets] duplicate dataset {}", d.stem())));
            }
        }
        for s in self.naive.datasets.iter().chain(&self.train.datasets) {
            if !stems.contains(s) {
                return Err(CliError::config(format!(
                    "unknown dataset `{s}` (configured: {stems:?})"
                )));
            }
        }
        if self.naive.e_cells == 0 {
            return Err(CliError::config("[naive] e_cells must be positive"));
        }
        self.train_config("").validate().map_err(|e| bad("train", e))?;
        if self.train.models.iter().any(|m| !m.is_trainable()) {
            return Err(CliError::config(
                "[train] models lists a model without trainable parameters",
            ));
        }
        let ev = &self.eval;
        if ev.resolution < 8 {
            return Err(CliError::config("[eval] resolution must be at least 8"));
        }
        if ev.slice_resolution < 2 {
            return Err(CliError::config("[eval] slice_resolution must be at least 2"));
        }
        if !(ev.extent > 0.0 && ev.speed.is_finite()) || ev.altitudes.iter().any(|a| !(*a > 0.0)) {
            return Err(CliError::config("[eval] extent and altitudes must be positive"));
        }
        for c in &ev.cases {
            Formation::new(c.formation, c.k, self.sweep.spacing).map_err(|e| bad("eval", e))?;
        }
        Ok(())
    }

    /// Noise for one dataset, seeded from the `dataset` substream.
    pub fn noise_params(&self, stem: &str) -> NoiseParams {
        NoiseParams {
            sigma_force: self.noise.sigma_force,
            sigma_torque: self.noise.sigma_torque,
            seed: derive_seed(self.seed, &format!("dataset/{stem}")),
        }
    }

    /// Optimiser settings for one model, shuffled from the `shuffle` substream.
    pub fn train_config(&self, model: &str) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            loss_weighting: t.loss_weighting,
            seed: derive_seed(self.seed, &format!("shuffle/{model}")),
        }
    }

    pub fn init_seed(&self, model: &str) -> u64 {
        derive_seed(self.seed, &format!("init/{model}"))
    }

    pub fn sweep_for(&self, d: &DatasetSpec) -> SweepConfig {
        let mut s = self.sweep.clone();
        if let Some(n) = d.samples_per_leg {
            s.samples_per_leg = n;
        }
        s
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Set `a.b.c = value` in `table`. The value is parsed as a TOML value and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, raw: &str) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("--set {raw}: expected KEY=VALUE")))?;
    let key = key.trim();
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(format!("--set {raw}: malformed key `{key}`")));
    }
    let (last, parents) = parts.split_last().unwrap();
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("--set {raw}: `{p}` is not a section")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}
