use serde::{Deserialize, Serialize};

use crate::dataset::Record;
use crate::error::{Error, Result};
use crate::formations::SweepConfig;
use crate::frame::{FormationSnapshot, Vec3, Wrench6};
use crate::predictor::WrenchModel;

/// Regular lattice of cell centres over relative position (N, E, D).
///
/// Cell `i` on an axis is centred at `origin + i * cell`; the covered
/// region extends half a cell beyond the outermost centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub cell: [f64; 3],
    pub counts: [usize; 3],
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.counts[a] == 0 || !(self.cell[a] > 0.0) || !self.origin[a].is_finite() {
                return Err(Error::invalid(format!("bad grid axis {a}: {self:?}")));
            }
        }
        Ok(())
    }

    /// Grid aligned with a sweep: N centres on the legs, `e_cells` uniform
    /// centres across the leg length, D centres on the (evenly spaced)
    /// altitudes.
    pub fn for_sweep(cfg: &SweepConfig, e_cells: usize) -> Result<Self> {
        cfg.validate()?;
        if e_cells == 0 {
            return Err(Error::invalid("grid needs at least one E cell"));
        }
        let span = cfg.lateral_extent;
        let axis = |count: usize| {
            if count == 1 {
                (0.0, span)
            } else {
                (-span / 2.0, span / (count - 1) as f64)
            }
        };
        let (n0, dn) = axis(cfg.legs);
        let (e0, de) = axis(e_cells);

        let mut alts = cfg.altitudes.clone();
        alts.sort_by(f64::total_cmp);
        alts.dedup();
        let (d0, dd) = match alts.len() {
            1 => (-alts[0], cfg.vertical_extent),
            m => {
                let step = (alts[m - 1] - alts[0]) / (m - 1) as f64;
                let uniform = alts
                    .windows(2)
                    .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.max(1.0));
                if !uniform {
                    return Err(Error::invalid(format!(
                        "grid needs evenly spaced altitudes, got {alts:?}"
                    )));
                }
                (-alts[m - 1], step)
            }
        };
        let spec = GridSpec {
            origin: [n0, e0, d0],
            cell: [dn, de, dd],
            counts: [cfg.legs, e_cells, alts.len()],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.counts[1] + i[1]) * self.counts[2] + i[2]
    }

    pub fn centre(&self, i: [usize; 3]) -> Vec3 {
        Vec3::from_array(std::array::from_fn(|a| self.origin[a] + i[a] as f64 * self.cell[a]))
    }

    /// Fractional index coordinates, or `None` outside the covered region.
    fn fractional(&self, p: Vec3) -> Option<[f64; 3]> {
        let x = p.to_array();
        let mut u = [0.0; 3];
        for a in 0..3 {
            u[a] = (x[a] - self.origin[a]) / self.cell[a];
            if !(u[a] >= -0.5 && u[a] <= self.counts[a] as f64 - 0.5) {
                return None;
            }
        }
        Some(u)
    }

    /// Cell whose centre is nearest to `p`, if `p` is covered.
    pub fn nearest_cell(&self, p: Vec3) -> Option<[usize; 3]> {
        let u = self.fractional(p)?;
        Some(std::array::from_fn(|a| {
            (u[a].round().max(0.0) as usize).min(self.counts[a] - 1)
        }))
    }
}

/// Single-neighbour wrench lookup table fitted from K = 1 flights, summed
/// over neighbours at query time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLookupModel {
    spec: GridSpec,
    values: Vec<[f64; 6]>,
    /// Descriptions of the data the table was fitted from.
    pub fitted_from: Vec<String>,
}

impl GridLookupModel {
    pub fn from_values(spec: GridSpec, values: Vec<[f64; 6]>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_cells(),
                actual: values.len(),
            });
        }
        Ok(GridLookupModel {
            spec,
            values,
            fitted_from: Vec::new(),
        })
    }

    /// Bin measured wrenches by relative position and average per cell.
    /// Empty cells copy the nearest non-empty cell (by distance between
    /// centres, ties to the lowest index). Samples outside the grid are
    /// ignored.
    pub fn fit<'a>(records: impl IntoIterator<Item = &'a Record>, spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_cells();
        let mut sums = vec![[0.0; 6]; n];
        let mut counts = vec![0usize; n];
        let mut total = 0usize;
        for r in records {
            total += 1;
            if r.snapshot.k() != 1 {
                return Err(Error::invalid(format!(
                    "grid model is fitted from single-neighbour data, got a K={} record",
                    r.snapshot.k()
                )));
            }
            let rel = r.snapshot.relative_states()[0];
            if let Some(cell) = spec.nearest_cell(rel.dpos) {
                let idx = spec.index(cell);
                for (s, v) in sums[idx].iter_mut().zip(r.measured.to_array()) {
                    *s += v;
                }
                counts[idx] += 1;
            }
        }
        if total == 0 {
            return Err(Error::invalid("cannot fit a grid model from an empty dataset"));
        }
        let filled: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
        if filled.is_empty() {
            return Err(Error::invalid("no sample falls inside the grid"));
        }

        let cells: Vec<[usize; 3]> = (0..spec.counts[0])
            .flat_map(|i| (0..spec.counts[1]).flat_map(move |j| (0..spec.counts[2]).map(move |k| [i, j, k])))
            .collect();
        let mut values = vec![[0.0; 6]; n];
        for idx in 0..n {
            if counts[idx] > 0 {
                values[idx] = sums[idx].map(|s| s / counts[idx] as f64);
            }
        }
        for (idx, cell) in cells.iter().enumerate() {
            if counts[idx] > 0 {
                continue;
            }
            let here = spec.centre(*cell);
            let nearest = filled
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = (spec.centre(cells[a]) - here).norm();
                    let db = (spec.centre(cells[b]) - here).norm();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .unwrap();
            values[idx] = values[nearest];
        }
        GridLookupModel::from_values(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[[f64; 6]] {
        &self.values
    }

    /// Trilinear interpolation between cell centres; zero outside the grid.
    pub fn query(&self, dpos: Vec3) -> Wrench6 {
        let Some(u) = self.spec.fractional(dpos) else {
            return Wrench6::ZERO;
        };
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let c = self.spec.counts[a];
            if c == 1 {
                continue;
            }
            let ua = u[a].clamp(0.0, (c - 1) as f64);
            let i0 = (ua.floor() as usize).min(c - 2);
            base[a] = i0;
            t[a] = ua - i0 as f64;
        }
        let mut out = [0.0; 6];
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut skip = false;
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                if self.spec.counts[a] == 1 {
                    if hi {
                        skip = true;
                    }
                    continue;
                }
                idx[a] = base[a] + hi as usize;
                w *= if hi { t[a] } else { 1.0 - t[a] };
            }
            if skip {
                continue;
            }
            let v = &self.values[self.spec.index(idx)];
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        Wrench6::from_array(out)
    }
}

impl WrenchModel for GridLookupModel {
    fn name(&self) -> &str {
        "naive"
    }

    fn predict(&self, snap: &FormationSnapshot) -> Wrench6 {
        snap.canonical_relative_states()
            .iter()
            .map(|r| self.query(r.dpos))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::VehicleState;

    fn spec() -> GridSpec {
        GridSpec {
            origin: [-1.0, -1.0, -1.3],
            cell: [0.5, 0.25, 0.5],
            counts: [5, 9, 3],
        }
    }

    fn record(pos: Vec3, measured: Wrench6) -> Record {
        let snap = FormationSnapshot::new(VehicleState::default(), vec![VehicleState::hover(pos)]).unwrap();
        Record {
            time: 0.0,
            snapshot: snap,
            truth: measured,
            measured,
        }
    }

    #[test]
    fn single_cell_mean_and_fill() {
        let p = Vec3::new(0.02, 0.01, -0.8);
        let vals = [1.0, 2.0, 6.0];
        let recs: Vec<Record> = vals
            .iter()
            .map(|&v| record(p, Wrench6::from_array([0.0, 0.0, v, 0.0, 0.0, 0.0])))
            .collect();
        let g = GridLookupModel::fit(&recs, spec()).unwrap();
        // Every cell is the only populated one, or filled from it.
        assert!(g.values().iter().all(|v| v[2] == 3.0));
    }

    #[test]
    fn fit_errors() {
        assert!(GridLookupModel::fit(std::iter::empty(), spec()).is_err());
        let two = FormationSnapshot::new(
            VehicleState::default(),
            vec![
                VehicleState::hover(Vec3::new(0.0, 0.0, -1.0)),
                VehicleState::hover(Vec3::new(0.0, 0.3, -1.0)),
            ],
        )
        .unwrap();
        let r = Record {
            time: 0.0,
            snapshot: two,
            truth: Wrench6::ZERO,
            measured: Wrench6::ZERO,
        };
        assert!(matches!(
            GridLookupModel::fit([&r], spec()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn centres_exact_and_outside_zero() {
        let s = spec();
        let values: Vec<[f64; 6]> = (0..s.n_cells()).map(|i| [i as f64 * 0.37 - 3.0; 6]).collect();
        let g = GridLookupModel::from_values(s, values.clone()).unwrap();
        for i in 0..5 {
            for j in 0..9 {
                for k in 0..3 {
                    let got = g.query(s.centre([i, j, k])).to_array();
                    assert_eq!(got, values[s.index([i, j, k])]);
                }
            }
        }
        assert_eq!(g.query(Vec3::new(1.3, 0.0, -0.8)), Wrench6::ZERO);
        assert_eq!(g.query(Vec3::new(0.0, 0.0, 0.0)), Wrench6::ZERO);
        // Inside the half-cell margin clamps to the edge value.
        assert_eq!(
            g.query(Vec3::new(1.2, 1.0, -0.3)).to_array(),
            values[s.index([4, 8, 2])]
        );
    }

    #[test]
    fn interpolates_linear_fields_exactly() {
        let s = spec();
        let f = |p: Vec3| 2.0 * p.n - 0.5 * p.e + 3.0 * p.d + 1.0;
        let values: Vec<[f64; 6]> = (0..5)
            .flat_map(|i| (0..9).flat_map(move |j| (0..3).map(move |k| [i, j, k])))
            .map(|c| [f(s.centre(c)); 6])
            .collect();
        let g = GridLookupModel::from_values(s, values).unwrap();
        for p in [Vec3::new(0.13, -0.77, -0.41), Vec3::new(-0.9, 0.6, -1.2)] {
            assert!((g.query(p).f_d - f(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_aligned_spec() {
        let s = GridSpec::for_sweep(&SweepConfig::default(), 51).unwrap();
        assert_eq!(s.counts, [36, 51, 3]);
        assert!((s.centre([35, 50, 2]).to_array()[0] - 1.0).abs() < 1e-12);
        assert!((s.centre([0, 0, 0]).d + 1.3).abs() < 1e-12);
        assert!((s.centre([0, 0, 2]).d + 0.3).abs() < 1e-12);
        let uneven = SweepConfig {
            altitudes: vec![0.3, 0.5, 1.3],
            ..SweepConfig::default()
        };
        assert!(GridSpec::for_sweep(&uneven, 51).is_err());
    }
}
