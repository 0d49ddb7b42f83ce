//! Predictive models and the registry that selects them by name.
//!
//! | name      | structure                                  | fitted by            |
//! |-----------|--------------------------------------------|----------------------|
//! | `naive`   | grid lookup of one neighbour, summed       | cell averaging, K=1  |
//! | `linear`  | `sum_j psi(x_j - x_i)`                     | Adam on weighted MSE |
//! | `deepset` | `big_phi(sum_j phi(x_j - x_i))`            | Adam on weighted MSE |
//!
//! All three sum over neighbours in canonical order, so predictions are
//! bitwise invariant to the order neighbours are listed in.

mod deepset;
mod grid;
mod linear;
mod train;

pub use deepset::DeepSetModel;
pub use grid::{GridLookupModel, GridSpec};
pub use linear::LinearAggModel;
pub use train::{
    axis_scales, axis_weights, batch_loss_and_grad, rmse, samples_from_records, target_variance, train, weighted_loss,
    LossWeighting, TrainConfig, TrainReport, TrainSample,
};

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FormationSnapshot;
use crate::nn::Mlp;
use crate::predictor::WrenchModel;

/// Relative position (3) and relative velocity (3).
pub const FEATURE_DIM: usize = 6;
pub const WRENCH_DIM: usize = 6;

/// Canonically ordered per-neighbour feature vectors.
pub fn features(snap: &FormationSnapshot) -> Vec<[f64; FEATURE_DIM]> {
    snap.canonical_relative_states().iter().map(|r| r.features()).collect()
}

fn checked_scale(scale: [f64; WRENCH_DIM]) -> Result<[f64; WRENCH_DIM]> {
    if scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
        Ok(scale)
    } else {
        Err(Error::invalid(format!(
            "output scale must be positive and finite, got {scale:?}"
        )))
    }
}

/// A set model trained by gradient descent on a flat parameter vector.
pub trait SetRegressor: WrenchModel {
    fn params(&self) -> Vec<f64>;

    fn set_params(&mut self, p: &[f64]) -> Result<()>;

    fn n_params(&self) -> usize;

    /// Fixed per-axis factor applied to the network output. Training sets it
    /// to the target spread so every axis is learnt in standardised units.
    fn output_scale(&self) -> [f64; WRENCH_DIM];

    fn set_output_scale(&mut self, scale: [f64; WRENCH_DIM]) -> Result<()>;

    /// Prediction from per-neighbour features, summed in the order given.
    fn predict_features(&self, feats: &[[f64; FEATURE_DIM]]) -> [f64; WRENCH_DIM];

    /// Forward and backward pass for one sample. `grad_out` maps the
    /// prediction to dL/d(prediction); parameter gradients are added into
    /// `grad`. Returns the prediction.
    fn backprop(
        &self,
        feats: &[[f64; FEATURE_DIM]],
        grad_out: &dyn Fn(&[f64; WRENCH_DIM]) -> [f64; WRENCH_DIM],
        grad: &mut [f64],
    ) -> [f64; WRENCH_DIM];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    Linear,
    #[serde(rename = "deepset")]
    DeepSet,
}

/// Layer sizes for the trainable models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub psi: Vec<usize>,
    pub phi: Vec<usize>,
    pub big_phi: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            psi: LinearAggModel::DEFAULT_DIMS.to_vec(),
            phi: DeepSetModel::DEFAULT_PHI.to_vec(),
            big_phi: DeepSetModel::DEFAULT_BIG_PHI.to_vec(),
        }
    }
}

type TrainableCtor = fn(&Architecture, u64) -> Result<Box<dyn SetRegressor>>;

struct Entry {
    name: &'static str,
    kind: ModelKind,
    description: &'static str,
    init: Option<TrainableCtor>,
}

const REGISTRY: &[Entry] = &[
    Entry {
        name: "naive",
        kind: ModelKind::Naive,
        description: "single-neighbour grid lookup, summed pairwise",
        init: None,
    },
    Entry {
        name: "linear",
        kind: ModelKind::Linear,
        description: "learnt per-neighbour network, summed",
        init: Some(|arch, seed| Ok(Box::new(LinearAggModel::init(&arch.psi, seed)?))),
    },
    Entry {
        name: "deepset",
        kind: ModelKind::DeepSet,
        description: "learnt embedding, sum-pooled, learnt decoder",
        init: Some(|arch, seed| Ok(Box::new(DeepSetModel::init(&arch.phi, &arch.big_phi, seed)?))),
    },
];

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Naive, ModelKind::Linear, ModelKind::DeepSet];

    fn entry(self) -> &'static Entry {
        REGISTRY.iter().find(|e| e.kind == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        self.entry().name
    }

    pub fn description(self) -> &'static str {
        self.entry().description
    }

    pub fn is_trainable(self) -> bool {
        self.entry().init.is_some()
    }

    /// Freshly initialised trainable model.
    pub fn init_trainable(self, arch: &Architecture, seed: u64) -> Result<Box<dyn SetRegressor>> {
        match self.entry().init {
            Some(ctor) => ctor(arch, seed),
            None => Err(Error::invalid(format!(
                "`{}` is fitted from single-neighbour data, not by gradient descent",
                self.as_str()
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        REGISTRY
            .iter()
            .find(|e| e.name == s)
            .map(|e| e.kind)
            .ok_or_else(|| Error::UnknownName {
                kind: "model",
                name: s.to_string(),
                known: REGISTRY.iter().map(|e| e.name).collect::<Vec<_>>().join(", "),
            })
    }
}

pub const MODEL_FORMAT: &str = "downwash-model";
pub const MODEL_VERSION: u32 = 1;

/// Parameters of any registered model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Naive {
        grid: GridLookupModel,
    },
    Linear {
        psi: Mlp,
        output_scale: [f64; WRENCH_DIM],
    },
    #[serde(rename = "deepset")]
    DeepSet {
        phi: Mlp,
        big_phi: Mlp,
        output_scale: [f64; WRENCH_DIM],
    },
}

impl SavedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SavedModel::Naive { .. } => ModelKind::Naive,
            SavedModel::Linear { .. } => ModelKind::Linear,
            SavedModel::DeepSet { .. } => ModelKind::DeepSet,
        }
    }

    pub fn into_model(self) -> Result<Box<dyn WrenchModel>> {
        match self {
            SavedModel::Naive { grid } => Ok(Box::new(grid)),
            other => Ok(other.into_trainable()?),
        }
    }

    pub fn into_trainable(self) -> Result<Box<dyn SetRegressor>> {
        let (mut model, scale): (Box<dyn SetRegressor>, _) = match self {
            SavedModel::Naive { .. } => return ModelKind::Naive.init_trainable(&Architecture::default(), 0),
            SavedModel::Linear { psi, output_scale } => (Box::new(LinearAggModel::new(psi)?), output_scale),
            SavedModel::DeepSet {
                phi,
                big_phi,
                output_scale,
            } => (Box::new(DeepSetModel::new(phi, big_phi)?), output_scale),
        };
        model.set_output_scale(scale)?;
        Ok(model)
    }
}

impl From<&LinearAggModel> for SavedModel {
    fn from(m: &LinearAggModel) -> Self {
        SavedModel::Linear {
            psi: m.psi().clone(),
            output_scale: m.output_scale(),
        }
    }
}

impl From<&DeepSetModel> for SavedModel {
    fn from(m: &DeepSetModel) -> Self {
        SavedModel::DeepSet {
            phi: m.phi().clone(),
            big_phi: m.big_phi().clone(),
            output_scale: m.output_scale(),
        }
    }
}

impl From<&GridLookupModel> for SavedModel {
    fn from(m: &GridLookupModel) -> Self {
        SavedModel::Naive { grid: m.clone() }
    }
}

/// Rebuild a [`SavedModel`] from a trained model's kind and parameters.
pub fn saved_from_trainable(kind: ModelKind, arch: &Architecture, model: &dyn SetRegressor) -> Result<SavedModel> {
    let p = model.params();
    match kind {
        ModelKind::Linear => Ok(SavedModel::Linear {
            psi: Mlp::from_params(&arch.psi, p)?,
            output_scale: model.output_scale(),
        }),
        ModelKind::DeepSet => {
            let n_phi = crate::nn::param_count(&arch.phi);
            if p.len() < n_phi {
                return Err(Error::DimensionMismatch {
                    expected: n_phi + crate::nn::param_count(&arch.big_phi),
                    actual: p.len(),
                });
            }
            let (a, b) = p.split_at(n_phi);
            Ok(SavedModel::DeepSet {
                phi: Mlp::from_params(&arch.phi, a.to_vec())?,
                big_phi: Mlp::from_params(&arch.big_phi, b.to_vec())?,
                output_scale: model.output_scale(),
            })
        }
        ModelKind::Naive => Err(Error::invalid("naive model has no trainable parameters")),
    }
}

/// Provenance recorded alongside trained parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMeta {
    pub datasets: Vec<String>,
    pub config: Option<TrainConfig>,
    pub loss_history: Vec<f64>,
}

/// Versioned model file: architecture and every parameter, JSON-encoded
/// with exact float round-tripping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub model: SavedModel,
    pub training: TrainingMeta,
}

impl ModelFile {
    pub fn new(model: SavedModel, training: TrainingMeta) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model,
            training,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported model format {} v{}", file.format, file.version),
            ));
        }
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Vec3, VehicleState, Wrench6};

    fn snap(pos: &[(f64, f64, f64)]) -> FormationSnapshot {
        let nbs = pos
            .iter()
            .map(|&(n, e, d)| VehicleState::new(Vec3::new(n, e, d), Vec3::new(0.0, 0.5, 0.0), 0.0))
            .collect();
        FormationSnapshot::new(VehicleState::default(), nbs).unwrap()
    }

    #[test]
    fn registry_names() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!(matches!("mlp".parse::<ModelKind>(), Err(Error::UnknownName { .. })));
        assert!(ModelKind::Naive.init_trainable(&Architecture::default(), 0).is_err());
        let m = ModelKind::DeepSet.init_trainable(&Architecture::default(), 0).unwrap();
        assert_eq!(m.name(), "deepset");
        assert_eq!(
            m.n_params(),
            6 * 64 + 64 + 64 * 64 + 64 + 64 * 64 + 64 + 64 * 64 + 64 + 64 * 6 + 6
        );
    }

    #[test]
    fn linear_k0_and_pair_sum() {
        let m = LinearAggModel::init(&[6, 8, 6], 1).unwrap();
        let empty = FormationSnapshot::new(VehicleState::default(), vec![]).unwrap();
        assert_eq!(m.predict(&empty), Wrench6::ZERO);

        let a = snap(&[(0.1, 0.2, -0.5)]);
        let b = snap(&[(-0.3, 0.4, -0.9)]);
        let ab = snap(&[(0.1, 0.2, -0.5), (-0.3, 0.4, -0.9)]);
        let sum = m.predict(&a) + m.predict(&b);
        for (x, y) in m.predict(&ab).to_array().iter().zip(sum.to_array()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn deepset_k0_is_decoder_of_zero() {
        let m = DeepSetModel::init(&[6, 8, 5], &[5, 7, 6], 2).unwrap();
        let empty = FormationSnapshot::new(VehicleState::default(), vec![]).unwrap();
        let direct = m.big_phi().forward(&[0.0; 5]).unwrap();
        assert_eq!(m.predict(&empty).to_array().to_vec(), direct);
    }

    #[test]
    fn deepset_affine_composition() {
        // phi: x -> A x + a (single layer), big_phi: h -> B h + b.
        let phi = Mlp::from_params(&[6, 2], vec![1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0.5, -0.5]).unwrap();
        let mut bp = vec![0.0; 2 * 6 + 6];
        bp[0] = 2.0; // out0 = 2*h0
        bp[2 * 2 + 1] = 3.0; // out2 = 3*h1
        bp[12 + 5] = 1.0; // bias of yaw
        let big_phi = Mlp::from_params(&[2, 6], bp).unwrap();
        let m = DeepSetModel::new(phi, big_phi).unwrap();
        let w = m.predict(&snap(&[(0.4, -0.2, -1.0)]));
        // h = (0.4 + 0.5, -0.2 - 0.5) = (0.9, -0.7)
        assert!((w.f_n - 1.8).abs() < 1e-15);
        assert!((w.f_d + 2.1).abs() < 1e-15);
        assert_eq!(w.t_yaw, 1.0);
        assert_eq!(w.f_e, 0.0);
    }

    #[test]
    fn deepset_duplicate_neighbour_doubles_embedding() {
        let m = DeepSetModel::init(&[6, 16, 8], &[8, 16, 6], 3).unwrap();
        let one = features(&snap(&[(0.2, 0.1, -0.7)]));
        let two = features(&snap(&[(0.2, 0.1, -0.7), (0.2, 0.1, -0.7)]));
        let (p1, p2) = (m.pooled(&one), m.pooled(&two));
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = DeepSetModel::init(&[6, 5, 4], &[4, 3, 6], 9).unwrap();
        let file = ModelFile::new(
            SavedModel::from(&ds),
            TrainingMeta {
                datasets: vec!["a.csv".into()],
                config: Some(TrainConfig::default()),
                loss_history: vec![0.5, 0.25, 1.0 / 3.0],
            },
        );
        let path = dir.path().join("m.json");
        file.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json(), file.to_json());
        let SavedModel::DeepSet { phi, .. } = &back.model else {
            panic!()
        };
        assert_eq!(
            phi.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
            ds.phi().params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
        );
    }
}
