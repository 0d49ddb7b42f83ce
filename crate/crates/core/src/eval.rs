//! Model evaluation: truth-normalised integrated plane error, D-axis slice
//! profiles, contour grids and the cross-product benchmark table.
//!
//! All plane quantities sample the formation reference point over the cell
//! midpoints of a `resolution x resolution` grid spanning
//! `[-extent/2, extent/2]` on both lateral axes, at a fixed altitude above
//! the sufferer.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formations::{Formation, SweepConfig};
use crate::frame::{Vec3, Wrench6, AXES, AXIS_D};
use crate::predictor::WrenchModel;

/// Where and how finely a lateral plane is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub altitude: f64,
    pub extent: f64,
    pub resolution: usize,
    /// Velocity of every formation member, m/s.
    pub velocity: Vec3,
}

impl PlaneSpec {
    pub fn new(altitude: f64, extent: f64, resolution: usize, speed: f64) -> Self {
        PlaneSpec {
            altitude,
            extent,
            resolution,
            velocity: Vec3::new(0.0, speed, 0.0),
        }
    }

    pub fn cell(&self) -> f64 {
        self.extent / self.resolution as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell() * self.cell()
    }

    /// Cell midpoints along one axis.
    pub fn axis(&self) -> Vec<f64> {
        let h = self.cell();
        (0..self.resolution)
            .map(|i| -self.extent / 2.0 + (i as f64 + 0.5) * h)
            .collect()
    }

    /// Midpoints, N outer, E inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let axis = self.axis();
        axis.iter().flat_map(|&n| axis.iter().map(move |&e| (n, e))).collect()
    }
}

/// Wrench from `model` at every plane point, in [`PlaneSpec::points`] order.
fn evaluate_plane(model: &dyn WrenchModel, formation: &Formation, plane: &PlaneSpec) -> Result<Vec<Wrench6>> {
    plane
        .points()
        .par_iter()
        .map(|&(n, e)| Ok(model.predict(&formation.snapshot(n, e, plane.altitude, plane.velocity)?)))
        .collect()
}

/// Per-axis error; `None` where the truth integrates to zero.
pub type AxisErrors = [Option<f64>; 6];

/// Integral of |prediction - truth| over the plane divided by the integral
/// of |truth| (midpoint rule), per axis.
pub fn integrated_plane_error(
    model: &dyn WrenchModel,
    truth: &dyn WrenchModel,
    formation: &Formation,
    plane: &PlaneSpec,
) -> Result<AxisErrors> {
    if plane.resolution < 8 {
        return Err(Error::invalid("integrated plane error needs resolution >= 8"));
    }
    let pred = evaluate_plane(model, formation, plane)?;
    let gt = evaluate_plane(truth, formation, plane)?;
    let area = plane.cell_area();
    let mut err = [0.0; 6];
    let mut mass = [0.0; 6];
    for (p, t) in pred.iter().zip(&gt) {
        let (d, a) = ((*p - *t).abs(), t.abs());
        for i in 0..6 {
            err[i] += d[i] * area;
            mass[i] += a[i] * area;
        }
    }
    Ok(std::array::from_fn(|i| (mass[i] > 0.0).then(|| err[i] / mass[i])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralAxis {
    N,
    E,
}

/// D-force along a straight transect of formation positions through the
/// origin. `columns` holds one series per model, then the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    pub axis: LateralAxis,
    pub altitude: f64,
    pub positions: Vec<f64>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub const TRUTH_COLUMN: &str = "ground_truth";

impl SliceProfile {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn truth(&self) -> &[f64] {
        self.column(TRUTH_COLUMN).expect("truth column present")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("position");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (i, x) in self.positions.iter().enumerate() {
            let _ = write!(out, "{x}");
            for c in &self.columns {
                let _ = write!(out, ",{}", c[i]);
            }
            out.push('\n');
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
pub fn slice_profile(
    models: &[&dyn WrenchModel],
    truth: &dyn WrenchModel,
    formation: &Formation,
    altitude: f64,
    axis: LateralAxis,
    extent: f64,
    resolution: usize,
    velocity: Vec3,
) -> Result<SliceProfile> {
    if resolution < 2 {
        return Err(Error::invalid("slice profile needs resolution >= 2"));
    }
    let positions = SweepConfig::linspace(extent, resolution);
    let snaps = positions
        .iter()
        .map(|&x| {
            let (n, e) = match axis {
                LateralAxis::N => (x, 0.0),
                LateralAxis::E => (0.0, x),
            };
            formation.snapshot(n, e, altitude, velocity)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = models.iter().map(|m| m.name().to_string()).collect();
    names.push(TRUTH_COLUMN.to_string());
    let columns = models
        .iter()
        .copied()
        .chain(std::iter::once(truth))
        .map(|m| snaps.par_iter().map(|s| m.predict(s).f_d).collect())
        .collect();
    Ok(SliceProfile {
        axis,
        altitude,
        positions,
        names,
        columns,
    })
}

/// Number of distinct peaks in a 1-D profile.
///
/// A peak is a local maximum (plateaus count once) reaching at least
/// `min_height` of the global maximum. Adjacent peaks whose separating
/// valley stays above `max_valley` of the lower peak are merged into one.
pub fn count_peaks(values: &[f64], min_height: f64, max_valley: f64) -> usize {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) || values.len() < 3 {
        return 0;
    }
    let floor = min_height * top;
    let mut peaks: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < values.len() {
        // Extent of the plateau starting at i.
        let mut j = i;
        while j + 1 < values.len() && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == values.len() || values[j + 1] < values[i];
        if left_lower && right_lower && values[i] >= floor {
            peaks.push(i);
        }
        i = j + 1;
    }
    let mut merged: Vec<usize> = Vec::new();
    for p in peaks {
        if let Some(&q) = merged.last() {
            let valley = values[q..=p].iter().copied().fold(f64::INFINITY, f64::min);
            if valley > max_valley * values[q].min(values[p]) {
                if values[p] > values[q] {
                    *merged.last_mut().unwrap() = p;
                }
                continue;
            }
        }
        merged.push(p);
    }
    merged.len()
}

/// Default peak criteria used by reports: 20 % of the maximum, valleys
/// must dip below 80 % of the lower peak.
pub fn count_profile_peaks(values: &[f64]) -> usize {
    count_peaks(values, 0.2, 0.8)
}

/// D-force over the plane, on the same midpoints as the plane error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub altitude: f64,
    pub axis: Vec<f64>,
    /// Row-major, N outer.
    pub values: Vec<f64>,
    pub cell_area: f64,
}

impl ContourGrid {
    pub fn resolution(&self) -> usize {
        self.axis.len()
    }

    pub fn at(&self, i_n: usize, i_e: usize) -> f64 {
        self.values[i_n * self.axis.len() + i_e]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Area where the value is at least `fraction` of the grid maximum.
    pub fn support_area(&self, fraction: f64) -> f64 {
        let max = self.max();
        if !(max > 0.0) {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v >= fraction * max).count() as f64 * self.cell_area
    }

    /// Radius of the disc with the same area as [`ContourGrid::support_area`].
    pub fn support_radius(&self, fraction: f64) -> f64 {
        (self.support_area(fraction) / std::f64::consts::PI).sqrt()
    }

    /// Long-format CSV: `n,e,f_d`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,e,f_d\n");
        let r = self.resolution();
        for i in 0..r {
            for j in 0..r {
                let _ = writeln!(out, "{},{},{}", self.axis[i], self.axis[j], self.at(i, j));
            }
        }
        out
    }
}

pub fn contour_grid(model: &dyn WrenchModel, formation: &Formation, plane: &PlaneSpec) -> Result<ContourGrid> {
    if plane.resolution < 2 {
        return Err(Error::invalid("contour grid needs resolution >= 2"));
    }
    let values = evaluate_plane(model, formation, plane)?
        .into_iter()
        .map(|w| w.f_d)
        .collect();
    Ok(ContourGrid {
        altitude: plane.altitude,
        axis: plane.axis(),
        values,
        cell_area: plane.cell_area(),
    })
}

/// Settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub altitudes: Vec<f64>,
    pub extent: f64,
    pub resolution: usize,
    pub speed: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            altitudes: vec![1.3],
            extent: 2.0,
            resolution: 64,
            speed: 0.5,
        }
    }
}

impl EvalSettings {
    pub fn plane(&self, altitude: f64) -> PlaneSpec {
        PlaneSpec::new(altitude, self.extent, self.resolution, self.speed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub formation: String,
    pub k: usize,
    pub oracle: String,
    pub altitude: f64,
    pub model: String,
    pub errors: AxisErrors,
    /// Axes on which this model has the lowest error of its group.
    pub wins: [bool; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub settings: EvalSettings,
    pub rows: Vec<BenchmarkRow>,
}

impl EvalReport {
    pub fn row(&self, formation: &str, altitude: f64, model: &str) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.formation == formation && r.altitude == altitude && r.model == model)
    }

    /// One row per (formation, altitude, model) with the six axis errors
    /// (`n/a` where undefined) and the axes the model wins on.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("formation,k,oracle,altitude,model");
        for a in AXES {
            let _ = write!(out, ",{a}");
        }
        out.push_str(",wins\n");
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{},{}", r.formation, r.k, r.oracle, r.altitude, r.model);
            for e in r.errors {
                match e {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push_str(",n/a"),
                }
            }
            let wins: Vec<&str> = (0..6).filter(|&i| r.wins[i]).map(|i| AXES[i]).collect();
            let _ = writeln!(out, ",{}", wins.join(";"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// A formation to benchmark, labelled for the report.
pub struct BenchCase<'a> {
    pub label: String,
    pub formation: Formation,
    pub truth: &'a dyn WrenchModel,
}

/// Every model against every case and altitude, marking per-axis winners.
pub fn benchmark(models: &[&dyn WrenchModel], cases: &[BenchCase<'_>], settings: &EvalSettings) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for case in cases {
        for &alt in &settings.altitudes {
            let plane = settings.plane(alt);
            let group_start = rows.len();
            for m in models {
                let errors = integrated_plane_error(*m, case.truth, &case.formation, &plane)?;
                rows.push(BenchmarkRow {
                    formation: case.label.clone(),
                    k: case.formation.k,
                    oracle: case.truth.name().to_string(),
                    altitude: alt,
                    model: m.name().to_string(),
                    errors,
                    wins: [false; 6],
                });
            }
            let group = &mut rows[group_start..];
            for axis in 0..6 {
                let best = group
                    .iter()
                    .filter_map(|r| r.errors[axis])
                    .fold(f64::INFINITY, f64::min);
                for r in group.iter_mut() {
                    r.wins[axis] = r.errors[axis] == Some(best);
                }
            }
        }
    }
    Ok(EvalReport {
        settings: settings.clone(),
        rows,
    })
}

/// D-axis entry of an [`AxisErrors`].
pub fn d_error(errors: &AxisErrors) -> Option<f64> {
    errors[AXIS_D]
}
