use crate::frame::{FormationSnapshot, Wrench6};

/// Anything that maps a formation snapshot to the wrench on the sufferer:
/// ground-truth oracles as well as the fitted models.
pub trait WrenchModel: Send + Sync {
    /// Registry name of the strategy.
    fn name(&self) -> &str;

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6;
}

/// Predicts the zero wrench everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroModel;

impl WrenchModel for ZeroModel {
    fn name(&self) -> &str {
        "zero"
    }

    fn predict(&self, _snap: &FormationSnapshot) -> Wrench6 {
        Wrench6::ZERO
    }
}

impl<M: WrenchModel + ?Sized> WrenchModel for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        (**self).predict(snap)
    }
}

impl<M: WrenchModel + ?Sized> WrenchModel for &M {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        (**self).predict(snap)
    }
}
