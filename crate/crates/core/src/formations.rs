//! Formation geometries and grid-sweep trajectory generation.
//!
//! The sufferer sits at the origin, stationary. A formation of K neighbours
//! flies straight E-aligned legs through a square lateral area at a set of
//! altitudes above it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetMeta, Record};
use crate::error::{Error, Result};
use crate::field::{NoiseParams, NoiseStream};
use crate::frame::{FormationSnapshot, Vec3, VehicleState, Wrench6};
use crate::oracle::{FieldParams, OracleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormationKind {
    /// Abreast, offsets along N, perpendicular to travel.
    SideBySide,
    /// In trail, offsets along E, the direction of travel.
    LeaderFollower,
    /// Stacked D planes, each lower vehicle at the edge of the one above.
    Stack,
    /// Equilateral triangle in one lateral plane. K = 3 only.
    Hybrid3,
}

impl FormationKind {
    pub const ALL: [FormationKind; 4] = [
        FormationKind::SideBySide,
        FormationKind::LeaderFollower,
        FormationKind::Stack,
        FormationKind::Hybrid3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormationKind::SideBySide => "side_by_side",
            FormationKind::LeaderFollower => "leader_follower",
            FormationKind::Stack => "stack",
            FormationKind::Hybrid3 => "hybrid3",
        }
    }
}

impl fmt::Display for FormationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "formation",
                name: s.to_string(),
                known: FormationKind::ALL.map(|k| k.as_str()).join(", "),
            })
    }
}

/// Neighbour offsets from the formation reference point.
///
/// Lateral offsets always have zero mean. Vertical offsets are zero except
/// for `Stack`, where vehicle `i` sits `i * spacing` above the lowest one,
/// so the formation altitude is the altitude of its lowest member.
pub fn formation_offsets(kind: FormationKind, k: usize, spacing: f64) -> Result<Vec<Vec3>> {
    if k == 0 {
        return Err(Error::invalid("formation needs at least one vehicle"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
    }
    let centred = |i: usize, pitch: f64| (i as f64 - (k - 1) as f64 / 2.0) * pitch;
    let offsets = match kind {
        FormationKind::SideBySide => (0..k).map(|i| Vec3::new(centred(i, spacing), 0.0, 0.0)).collect(),
        FormationKind::LeaderFollower => (0..k).map(|i| Vec3::new(0.0, centred(i, spacing), 0.0)).collect(),
        FormationKind::Stack => (0..k)
            .map(|i| Vec3::new(0.0, centred(i, spacing / 2.0), -(i as f64) * spacing))
            .collect(),
        FormationKind::Hybrid3 => {
            if k != 3 {
                return Err(Error::invalid(format!("hybrid3 requires k = 3, got {k}")));
            }
            // Circumradius of an equilateral triangle with side `spacing`;
            // one vertex leads along +E.
            let rho = spacing / 3f64.sqrt();
            (0..3)
                .map(|i| {
                    let theta = i as f64 * 2.0 * std::f64::consts::PI / 3.0;
                    Vec3::new(rho * theta.sin(), rho * theta.cos(), 0.0)
                })
                .collect()
        }
    };
    Ok(offsets)
}

/// A formation shape: kind, vehicle count and spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formation {
    pub kind: FormationKind,
    pub k: usize,
    pub spacing: f64,
    offsets: Vec<Vec3>,
}

impl Formation {
    pub fn new(kind: FormationKind, k: usize, spacing: f64) -> Result<Self> {
        let offsets = formation_offsets(kind, k, spacing)?;
        Ok(Formation {
            kind,
            k,
            spacing,
            offsets,
        })
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    /// Snapshot with the formation reference point at (`n`, `e`), `altitude`
    /// metres above the sufferer, every vehicle moving at `velocity`.
    pub fn snapshot(&self, n: f64, e: f64, altitude: f64, velocity: Vec3) -> Result<FormationSnapshot> {
        let centre = Vec3::new(n, e, -altitude);
        let neighbours = self
            .offsets
            .iter()
            .map(|&o| VehicleState::new(centre + o, velocity, 0.0))
            .collect();
        FormationSnapshot::new(VehicleState::default(), neighbours)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Side of the square lateral area, m.
    pub lateral_extent: f64,
    /// Height of the explored volume above the sufferer, m.
    pub vertical_extent: f64,
    /// Formation speed along +E, m/s.
    pub speed: f64,
    /// Legs per altitude, spread uniformly in N.
    pub legs: usize,
    pub samples_per_leg: usize,
    /// Formation spacing, m.
    pub spacing: f64,
    /// Formation altitudes above the sufferer, m.
    pub altitudes: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            lateral_extent: 2.0,
            vertical_extent: 1.4,
            speed: 0.5,
            legs: 36,
            samples_per_leg: 200,
            spacing: 0.5,
            altitudes: vec![0.3, 0.8, 1.3],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.lateral_extent, self.vertical_extent, self.speed, self.spacing];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("sweep extents, speed and spacing must be positive"));
        }
        if self.legs == 0 || self.samples_per_leg == 0 {
            return Err(Error::invalid("sweep needs at least one leg and one sample per leg"));
        }
        if self.altitudes.is_empty() {
            return Err(Error::invalid("sweep needs at least one altitude"));
        }
        for &a in &self.altitudes {
            if !(a > 0.0 && a <= self.vertical_extent) {
                return Err(Error::invalid(format!(
                    "altitude {a} outside (0, {}]",
                    self.vertical_extent
                )));
            }
        }
        Ok(())
    }

    /// Uniform points across `[-extent/2, extent/2]`, endpoints included;
    /// a single point sits at the centre.
    pub fn linspace(extent: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![0.0];
        }
        let step = extent / (count - 1) as f64;
        (0..count).map(|i| -extent / 2.0 + i as f64 * step).collect()
    }

    pub fn leg_offsets_n(&self) -> Vec<f64> {
        Self::linspace(self.lateral_extent, self.legs)
    }

    pub fn sample_positions_e(&self) -> Vec<f64> {
        Self::linspace(self.lateral_extent, self.samples_per_leg)
    }

    pub fn leg_duration(&self) -> f64 {
        self.lateral_extent / self.speed
    }

    pub fn velocity(&self) -> Vec3 {
        Vec3::new(0.0, self.speed, 0.0)
    }
}

/// Fly every (altitude, leg) of the sweep with the given formation and
/// record ground truth from `oracle` plus a noisy measurement.
///
/// Leg `altitude_index * legs + leg_index` draws its noise from the stream
/// of the same index, so legs may be generated in any order.
pub fn generate_sweep(
    kind: FormationKind,
    k: usize,
    cfg: &SweepConfig,
    oracle: OracleKind,
    field: &FieldParams,
    noise: &NoiseParams,
) -> Result<Dataset> {
    let meta = DatasetMeta::new(kind, k, cfg.clone(), oracle, *field, *noise);
    generate_from_meta(&meta)
}

pub(crate) fn generate_from_meta(meta: &DatasetMeta) -> Result<Dataset> {
    let cfg = &meta.sweep;
    cfg.validate()?;
    meta.field.validate()?;
    meta.noise.validate()?;
    let formation = Formation::new(meta.formation, meta.k, cfg.spacing)?;
    let truth = meta.oracle.build(&meta.field);

    let legs_n = cfg.leg_offsets_n();
    let samples_e = cfg.sample_positions_e();
    let velocity = cfg.velocity();
    let duration = cfg.leg_duration();
    let time_step = if samples_e.len() > 1 {
        duration / (samples_e.len() - 1) as f64
    } else {
        0.0
    };

    let legs: Vec<(usize, f64, f64)> = cfg
        .altitudes
        .iter()
        .flat_map(|&alt| legs_n.iter().map(move |&n| (alt, n)))
        .enumerate()
        .map(|(i, (alt, n))| (i, alt, n))
        .collect();

    let per_leg: Vec<Result<Vec<Record>>> = legs
        .par_iter()
        .map(|&(leg, altitude, n)| {
            let mut stream = NoiseStream::new(&meta.noise, leg as u64);
            let start = leg as f64 * duration;
            samples_e
                .iter()
                .enumerate()
                .map(|(s, &e)| {
                    let snapshot = formation.snapshot(n, e, altitude, velocity)?;
                    let truth: Wrench6 = truth.predict(&snapshot);
                    Ok(Record {
                        time: start + s as f64 * time_step,
                        measured: stream.apply(truth),
                        truth,
                        snapshot,
                    })
                })
                .collect()
        })
        .collect();

    let mut records = Vec::with_capacity(legs.len() * samples_e.len());
    for leg in per_leg {
        records.extend(leg?);
    }
    Ok(Dataset {
        meta: meta.clone(),
        records,
    })
}

/// Noiseless oracle values on a uniform lateral grid of formation positions
/// spanning `[-extent/2, extent/2]` on both axes, endpoints included.
/// Returned row-major with N outer: `((n, e), wrench)`.
pub fn grid_slice(
    formation: &Formation,
    altitude: f64,
    extent: f64,
    resolution: usize,
    velocity: Vec3,
    oracle: &dyn crate::predictor::WrenchModel,
) -> Result<Vec<((f64, f64), Wrench6)>> {
    if resolution < 2 {
        return Err(Error::invalid("grid slice resolution must be at least 2"));
    }
    let axis = SweepConfig::linspace(extent, resolution);
    let points: Vec<(f64, f64)> = axis.iter().flat_map(|&n| axis.iter().map(move |&e| (n, e))).collect();
    points
        .par_iter()
        .map(|&(n, e)| {
            let snap = formation.snapshot(n, e, altitude, velocity)?;
            Ok(((n, e), oracle.predict(&snap)))
        })
        .collect()
}
