//! Ground-truth aggregation oracles, selectable by name.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{aggregate_additive, aggregate_merging, DownwashParams, MergeParams};
use crate::frame::{FormationSnapshot, Wrench6};
use crate::predictor::WrenchModel;

/// Parameters shared by every oracle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    pub downwash: DownwashParams,
    pub merge: MergeParams,
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        self.downwash.validate()?;
        self.merge.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Additive,
    Merging,
}

type OracleCtor = fn(&FieldParams) -> Box<dyn WrenchModel>;

const ORACLES: &[(&str, OracleKind, OracleCtor)] = &[
    ("additive", OracleKind::Additive, |f| {
        Box::new(AdditiveOracle { params: f.downwash })
    }),
    ("merging", OracleKind::Merging, |f| {
        Box::new(MergingOracle {
            params: f.downwash,
            merge: f.merge,
        })
    }),
];

impl OracleKind {
    pub const ALL: [OracleKind; 2] = [OracleKind::Additive, OracleKind::Merging];

    pub fn as_str(self) -> &'static str {
        ORACLES.iter().find(|(_, k, _)| *k == self).map(|e| e.0).unwrap()
    }

    /// Instantiate the oracle with the given field parameters.
    pub fn build(self, field: &FieldParams) -> Box<dyn WrenchModel> {
        let ctor = ORACLES.iter().find(|(_, k, _)| *k == self).unwrap().2;
        ctor(field)
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ORACLES
            .iter()
            .find(|(name, _, _)| *name == s)
            .map(|e| e.1)
            .ok_or_else(|| Error::UnknownName {
                kind: "oracle",
                name: s.to_string(),
                known: ORACLES.iter().map(|e| e.0).collect::<Vec<_>>().join(", "),
            })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdditiveOracle {
    pub params: DownwashParams,
}

impl WrenchModel for AdditiveOracle {
    fn name(&self) -> &str {
        "additive"
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        aggregate_additive(snap, &self.params)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MergingOracle {
    pub params: DownwashParams,
    pub merge: MergeParams,
}

impl WrenchModel for MergingOracle {
    fn name(&self) -> &str {
        "merging"
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        aggregate_merging(snap, &self.params, &self.merge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for kind in OracleKind::ALL {
            assert_eq!(kind.as_str().parse::<OracleKind>().unwrap(), kind);
            assert_eq!(kind.build(&FieldParams::default()).name(), kind.as_str());
        }
        assert!("cfd".parse::<OracleKind>().is_err());
    }
}
