use crate::error::{Error, Result};
use crate::frame::{FormationSnapshot, Wrench6};
use crate::nn::Mlp;
use crate::predictor::WrenchModel;

use super::{features, SetRegressor, FEATURE_DIM, WRENCH_DIM};

/// Deep Sets aggregation: per-neighbour embedding `phi`, sum pooling, then
/// a decoder `big_phi` on the pooled embedding, scaled per axis by
/// `output_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepSetModel {
    phi: Mlp,
    big_phi: Mlp,
    output_scale: [f64; WRENCH_DIM],
}

impl DeepSetModel {
    pub const DEFAULT_PHI: [usize; 4] = [FEATURE_DIM, 64, 64, 64];
    pub const DEFAULT_BIG_PHI: [usize; 3] = [64, 64, WRENCH_DIM];

    pub fn new(phi: Mlp, big_phi: Mlp) -> Result<Self> {
        if phi.d_in() != FEATURE_DIM || big_phi.d_out() != WRENCH_DIM || big_phi.d_in() != phi.d_out() {
            return Err(Error::invalid(format!(
                "incompatible deep set dims: phi {:?}, big_phi {:?}",
                phi.dims(),
                big_phi.dims()
            )));
        }
        Ok(DeepSetModel {
            phi,
            big_phi,
            output_scale: [1.0; WRENCH_DIM],
        })
    }

    pub fn init(phi_dims: &[usize], big_phi_dims: &[usize], seed: u64) -> Result<Self> {
        DeepSetModel::new(
            Mlp::init(phi_dims, seed)?,
            Mlp::init(big_phi_dims, seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?,
        )
    }

    pub fn phi(&self) -> &Mlp {
        &self.phi
    }

    pub fn big_phi(&self) -> &Mlp {
        &self.big_phi
    }

    pub fn embedding_dim(&self) -> usize {
        self.phi.d_out()
    }

    /// Sum of `phi` embeddings, in the given order.
    pub fn pooled(&self, feats: &[[f64; FEATURE_DIM]]) -> Vec<f64> {
        let mut pooled = vec![0.0; self.embedding_dim()];
        for f in feats {
            for (p, v) in pooled.iter_mut().zip(self.phi.trace(f).output()) {
                *p += v;
            }
        }
        pooled
    }
}

impl WrenchModel for DeepSetModel {
    fn name(&self) -> &str {
        "deepset"
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        Wrench6::from_array(self.predict_features(&features(snap)))
    }
}

impl SetRegressor for DeepSetModel {
    fn params(&self) -> Vec<f64> {
        let mut p = self.phi.params().to_vec();
        p.extend_from_slice(self.big_phi.params());
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                actual: p.len(),
            });
        }
        let (a, b) = p.split_at(self.phi.n_params());
        self.phi.params_mut().copy_from_slice(a);
        self.big_phi.params_mut().copy_from_slice(b);
        Ok(())
    }

    fn n_params(&self) -> usize {
        self.phi.n_params() + self.big_phi.n_params()
    }

    fn output_scale(&self) -> [f64; WRENCH_DIM] {
        self.output_scale
    }

    fn set_output_scale(&mut self, scale: [f64; WRENCH_DIM]) -> Result<()> {
        self.output_scale = super::checked_scale(scale)?;
        Ok(())
    }

    fn predict_features(&self, feats: &[[f64; FEATURE_DIM]]) -> [f64; WRENCH_DIM] {
        let pooled = self.pooled(feats);
        let head = self.big_phi.trace(&pooled);
        std::array::from_fn(|a| head.output()[a] * self.output_scale[a])
    }

    fn backprop(
        &self,
        feats: &[[f64; FEATURE_DIM]],
        grad_out: &dyn Fn(&[f64; WRENCH_DIM]) -> [f64; WRENCH_DIM],
        grad: &mut [f64],
    ) -> [f64; WRENCH_DIM] {
        let traces: Vec<_> = feats.iter().map(|f| self.phi.trace(f)).collect();
        let mut pooled = vec![0.0; self.embedding_dim()];
        for t in &traces {
            for (p, v) in pooled.iter_mut().zip(t.output()) {
                *p += v;
            }
        }
        let head = self.big_phi.trace(&pooled);
        let out: [f64; WRENCH_DIM] = std::array::from_fn(|a| head.output()[a] * self.output_scale[a]);
        let g = grad_out(&out);
        let g: [f64; WRENCH_DIM] = std::array::from_fn(|a| g[a] * self.output_scale[a]);

        let (g_phi, g_head) = grad.split_at_mut(self.phi.n_params());
        let g_pooled = self.big_phi.backward(&head, &g, g_head);
        for t in &traces {
            self.phi.backward(t, &g_pooled, g_phi);
        }
        out
    }
}
