use crate::error::{Error, Result};
use crate::frame::{FormationSnapshot, Wrench6};
use crate::nn::Mlp;
use crate::predictor::WrenchModel;

use super::{features, SetRegressor, FEATURE_DIM, WRENCH_DIM};

/// Learnt linear aggregation: one per-neighbour network `psi` applied to
/// each relative state and summed, then scaled per axis by `output_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAggModel {
    psi: Mlp,
    output_scale: [f64; WRENCH_DIM],
}

impl LinearAggModel {
    pub const DEFAULT_DIMS: [usize; 4] = [FEATURE_DIM, 64, 64, WRENCH_DIM];

    pub fn new(psi: Mlp) -> Result<Self> {
        if psi.d_in() != FEATURE_DIM || psi.d_out() != WRENCH_DIM {
            return Err(Error::invalid(format!(
                "psi must map {FEATURE_DIM} -> {WRENCH_DIM}, got {:?}",
                psi.dims()
            )));
        }
        Ok(LinearAggModel {
            psi,
            output_scale: [1.0; WRENCH_DIM],
        })
    }

    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        LinearAggModel::new(Mlp::init(dims, seed)?)
    }

    pub fn psi(&self) -> &Mlp {
        &self.psi
    }

    /// The model's prediction for one neighbour with these features.
    pub fn single(&self, feat: &[f64; FEATURE_DIM]) -> Wrench6 {
        Wrench6::from_array(self.predict_features(&[*feat]))
    }
}

impl WrenchModel for LinearAggModel {
    fn name(&self) -> &str {
        "linear"
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        Wrench6::from_array(self.predict_features(&features(snap)))
    }
}

impl SetRegressor for LinearAggModel {
    fn params(&self) -> Vec<f64> {
        self.psi.params().to_vec()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.psi.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.psi.n_params(),
                actual: p.len(),
            });
        }
        self.psi.params_mut().copy_from_slice(p);
        Ok(())
    }

    fn n_params(&self) -> usize {
        self.psi.n_params()
    }

    fn output_scale(&self) -> [f64; WRENCH_DIM] {
        self.output_scale
    }

    fn set_output_scale(&mut self, scale: [f64; WRENCH_DIM]) -> Result<()> {
        self.output_scale = super::checked_scale(scale)?;
        Ok(())
    }

    fn predict_features(&self, feats: &[[f64; FEATURE_DIM]]) -> [f64; WRENCH_DIM] {
        let mut out = [0.0; WRENCH_DIM];
        for f in feats {
            for (o, v) in out.iter_mut().zip(self.psi.trace(f).output()) {
                *o += v;
            }
        }
        std::array::from_fn(|a| out[a] * self.output_scale[a])
    }

    fn backprop(
        &self,
        feats: &[[f64; FEATURE_DIM]],
        grad_out: &dyn Fn(&[f64; WRENCH_DIM]) -> [f64; WRENCH_DIM],
        grad: &mut [f64],
    ) -> [f64; WRENCH_DIM] {
        let traces: Vec<_> = feats.iter().map(|f| self.psi.trace(f)).collect();
        let mut out = [0.0; WRENCH_DIM];
        for t in &traces {
            for (o, v) in out.iter_mut().zip(t.output()) {
                *o += v;
            }
        }
        let out: [f64; WRENCH_DIM] = std::array::from_fn(|a| out[a] * self.output_scale[a]);
        let g = grad_out(&out);
        let g: [f64; WRENCH_DIM] = std::array::from_fn(|a| g[a] * self.output_scale[a]);
        for t in &traces {
            self.psi.backward(t, &g, grad);
        }
        out
    }
}
