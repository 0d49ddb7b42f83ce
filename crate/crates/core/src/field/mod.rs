//! Synthetic ground-truth downwash field.
//!
//! A single neighbour produces a narrow Gaussian column of downward force
//! below it. Two aggregation rules turn K such columns into the wrench felt
//! by the sufferer: plain superposition ([`aggregate_additive`]) and a
//! merging rule ([`aggregate_merging`]) in which nearby columns are pulled
//! together, advected forward and narrowed as they descend.

mod noise;

pub use noise::{add_noise, NoiseParams, NoiseStream};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FormationSnapshot, RelativeState, Vec3, Wrench6};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownwashParams {
    /// D-axis force directly beneath the source at zero vertical separation, N.
    pub peak_force: f64,
    /// Lateral 1/e radius of the column at the source, m.
    pub core_radius: f64,
    /// Fractional radius growth per metre of vertical separation.
    pub expansion_rate: f64,
    /// e-folding length of the on-axis force, m.
    pub vertical_decay_length: f64,
    /// Pitch/roll torque per newton of D-force per metre of lateral offset.
    pub torque_gain: f64,
    /// Fraction of D-force that appears as outward lateral push.
    pub lateral_gain: f64,
}

impl Default for DownwashParams {
    fn default() -> Self {
        DownwashParams {
            peak_force: 4.0,
            core_radius: 0.12,
            expansion_rate: 0.05,
            vertical_decay_length: 3.0,
            torque_gain: 0.2,
            lateral_gain: 0.1,
        }
    }
}

impl DownwashParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.peak_force > 0.0
            && self.core_radius > 0.0
            && self.expansion_rate >= 0.0
            && self.vertical_decay_length > 0.0
            && self.torque_gain.is_finite()
            && self.lateral_gain.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad downwash params: {self:?}")))
        }
    }

    /// Column radius after descending `dz` metres.
    pub fn radius_at(&self, dz: f64) -> f64 {
        self.core_radius * (1.0 + self.expansion_rate * dz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeParams {
    /// Lateral separation below which two columns merge, m.
    pub merge_radius: f64,
    /// Fraction of the way to the cluster centroid travelled per metre of descent.
    pub contraction_rate: f64,
    /// Forward displacement per metre of descent, along the cluster velocity.
    pub advect_gain: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        MergeParams {
            merge_radius: 0.6,
            contraction_rate: 0.6,
            advect_gain: 0.15,
        }
    }
}

impl MergeParams {
    pub fn validate(&self) -> Result<()> {
        if self.merge_radius >= 0.0 && self.contraction_rate >= 0.0 && self.advect_gain >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad merge params: {self:?}")))
        }
    }
}

/// Wrench from one column whose axis sits at `offset` (N, E) from the
/// sufferer, `dz` metres above it, with source radius `core_radius`.
fn column_wrench(offset_n: f64, offset_e: f64, dz: f64, core_radius: f64, p: &DownwashParams) -> Wrench6 {
    if dz <= 0.0 {
        return Wrench6::ZERO;
    }
    let radius = core_radius * (1.0 + p.expansion_rate * dz);
    let r = offset_n.hypot(offset_e);
    let u = r / radius;
    let spread = (core_radius / radius).powi(2);
    let f_d = p.peak_force * (-u * u).exp() * (-dz / p.vertical_decay_length).exp() * spread;

    // Outward push acts along sufferer-minus-column, i.e. -offset.
    let lateral = p.lateral_gain * f_d * u * (-u * u).exp();
    let (f_n, f_e) = if r > 0.0 {
        (-lateral * offset_n / r, -lateral * offset_e / r)
    } else {
        (0.0, 0.0)
    };

    Wrench6 {
        f_n,
        f_e,
        f_d,
        t_pitch: p.torque_gain * f_d * offset_n,
        t_roll: p.torque_gain * f_d * offset_e,
        t_yaw: 0.0,
    }
}

/// Wrench on the sufferer from a single neighbour at `rel`.
///
/// Zero when the neighbour is level with or below the sufferer.
pub fn single_vehicle_wrench(rel: &RelativeState, p: &DownwashParams) -> Wrench6 {
    column_wrench(rel.dpos.n, rel.dpos.e, -rel.dpos.d, p.core_radius, p)
}

/// Superposition of the single-vehicle field over all neighbours.
pub fn aggregate_additive(snap: &FormationSnapshot, p: &DownwashParams) -> Wrench6 {
    snap.canonical_relative_states()
        .iter()
        .map(|rel| single_vehicle_wrench(rel, p))
        .sum()
}

/// Single-linkage clusters over lateral distance, for neighbours above the
/// near-field regime. Input must already be in canonical order; clusters
/// come out ordered by their first member, members ascending.
fn merge_clusters(rel: &[RelativeState], p: &DownwashParams, m: &MergeParams) -> Vec<Vec<usize>> {
    let n = rel.len();
    let eligible: Vec<bool> = rel.iter().map(|r| -r.dpos.d > 2.0 * p.core_radius).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !(eligible[i] && eligible[j]) {
                continue;
            }
            let gap = (rel[i].dpos.n - rel[j].dpos.n).hypot(rel[i].dpos.e - rel[j].dpos.e);
            if gap < m.merge_radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        match slot[root] {
            Some(c) => clusters[c].push(i),
            None => {
                slot[root] = Some(clusters.len());
                clusters.push(vec![i]);
            }
        }
    }
    clusters
}

/// A column source after the merging transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VirtualSource {
    pub offset: Vec3,
    pub core_radius: f64,
}

/// The virtual sources produced by the merging rule, in canonical order.
pub fn merged_sources(snap: &FormationSnapshot, p: &DownwashParams, m: &MergeParams) -> Vec<VirtualSource> {
    let rel = snap.canonical_relative_states();
    let mut out = Vec::with_capacity(rel.len());
    for cluster in merge_clusters(&rel, p, m) {
        if cluster.len() == 1 {
            out.push(VirtualSource {
                offset: rel[cluster[0]].dpos,
                core_radius: p.core_radius,
            });
            continue;
        }
        let c = cluster.len() as f64;
        let (mut cn, mut ce, mut vn, mut ve) = (0.0, 0.0, 0.0, 0.0);
        for &i in &cluster {
            cn += rel[i].dpos.n;
            ce += rel[i].dpos.e;
            vn += rel[i].dvel.n;
            ve += rel[i].dvel.e;
        }
        let (cn, ce, vn, ve) = (cn / c, ce / c, vn / c, ve / c);
        let speed = vn.hypot(ve);
        let (dir_n, dir_e) = if speed > 0.0 {
            (vn / speed, ve / speed)
        } else {
            (0.0, 0.0)
        };
        let sqrt_c = c.sqrt();
        for &i in &cluster {
            let pos = rel[i].dpos;
            let dz = -pos.d;
            let pull = (m.contraction_rate * dz).min(1.0);
            let advect = m.advect_gain * dz;
            let shrink = (1.0 + (sqrt_c - 1.0) * (-dz / p.vertical_decay_length).exp()) / sqrt_c;
            out.push(VirtualSource {
                offset: Vec3::new(
                    pos.n + (cn - pos.n) * pull + dir_n * advect,
                    pos.e + (ce - pos.e) * pull + dir_e * advect,
                    pos.d,
                ),
                core_radius: p.core_radius * shrink,
            });
        }
    }
    out
}

/// Aggregation in which nearby columns merge laterally and contract with
/// descent. Reduces exactly to [`aggregate_additive`] when no clusters form.
pub fn aggregate_merging(snap: &FormationSnapshot, p: &DownwashParams, m: &MergeParams) -> Wrench6 {
    merged_sources(snap, p, m)
        .iter()
        .map(|s| column_wrench(s.offset.n, s.offset.e, -s.offset.d, s.core_radius, p))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::VehicleState;

    fn rel(n: f64, e: f64, d: f64) -> RelativeState {
        RelativeState {
            dpos: Vec3::new(n, e, d),
            dvel: Vec3::ZERO,
        }
    }

    fn snap(positions: &[(f64, f64, f64)], vel: Vec3) -> FormationSnapshot {
        let nbs = positions
            .iter()
            .map(|&(n, e, d)| VehicleState::new(Vec3::new(n, e, d), vel, 0.0))
            .collect();
        FormationSnapshot::new(VehicleState::default(), nbs).unwrap()
    }

    #[test]
    fn on_axis_is_pure_downforce() {
        let w = single_vehicle_wrench(&rel(0.0, 0.0, -1.0), &DownwashParams::default());
        assert!(w.f_d > 0.0);
        assert_eq!([w.f_n, w.f_e, w.t_pitch, w.t_roll, w.t_yaw], [0.0; 5]);
    }

    #[test]
    fn no_upwash_below() {
        let p = DownwashParams::default();
        assert_eq!(single_vehicle_wrench(&rel(0.0, 0.0, 0.5), &p), Wrench6::ZERO);
        assert_eq!(single_vehicle_wrench(&rel(0.1, 0.0, 0.0), &p), Wrench6::ZERO);
    }

    #[test]
    fn closed_form_value() {
        // Reference evaluated independently (python, float64):
        // R = 0.12*(1+0.05*0.8) = 0.1248
        // fd = 4*exp(-(0.1/0.1248)^2)*exp(-0.8/3)*(0.12/0.1248)^2
        let w = single_vehicle_wrench(&rel(0.1, 0.0, -0.8), &DownwashParams::default());
        let expected = 1.4905323565781647;
        assert!((w.f_d - expected).abs() < 1e-12, "{}", w.f_d);
        assert!(w.f_n < 0.0, "push is away from the column");
        assert_eq!(w.f_e, 0.0);
        assert!((w.t_pitch - 0.2 * expected * 0.1).abs() < 1e-12);
    }

    #[test]
    fn on_axis_force_decays_monotonically() {
        let p = DownwashParams::default();
        let mut prev = f64::INFINITY;
        for i in 1..400 {
            let f = single_vehicle_wrench(&rel(0.0, 0.0, -0.01 * i as f64), &p).f_d;
            assert!(f < prev);
            prev = f;
        }
    }

    #[test]
    fn additive_small_cases() {
        let p = DownwashParams::default();
        assert_eq!(aggregate_additive(&snap(&[], Vec3::ZERO), &p), Wrench6::ZERO);
        let one = snap(&[(0.2, -0.1, -0.7)], Vec3::ZERO);
        assert_eq!(
            aggregate_additive(&one, &p),
            single_vehicle_wrench(&rel(0.2, -0.1, -0.7), &p)
        );

        let pair = aggregate_additive(&snap(&[(0.3, 0.0, -1.0), (-0.3, 0.0, -1.0)], Vec3::ZERO), &p);
        let single = single_vehicle_wrench(&rel(0.3, 0.0, -1.0), &p);
        assert!(pair.f_n.abs() < 1e-15);
        assert!(pair.t_pitch.abs() < 1e-15);
        assert!((pair.f_d - 2.0 * single.f_d).abs() < 1e-15);
    }

    #[test]
    fn merging_reduces_to_additive() {
        let p = DownwashParams::default();
        let m = MergeParams::default();
        let vel = Vec3::new(0.0, 0.5, 0.0);
        let one = snap(&[(0.05, 0.1, -1.2)], vel);
        assert_eq!(aggregate_merging(&one, &p, &m), aggregate_additive(&one, &p));

        let far = snap(&[(0.0, -2.5, -1.0), (0.0, 2.5, -1.0)], vel);
        let (a, b) = (aggregate_merging(&far, &p, &m), aggregate_additive(&far, &p));
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() <= 1e-12);
        }

        let close = snap(&[(0.0, -0.5, -1.3), (0.0, 0.0, -1.3), (0.0, 0.5, -1.3)], vel);
        let zero_radius = MergeParams { merge_radius: 0.0, ..m };
        assert_eq!(
            aggregate_merging(&close, &p, &zero_radius),
            aggregate_additive(&close, &p)
        );
        assert_ne!(aggregate_merging(&close, &p, &m), aggregate_additive(&close, &p));
    }

    #[test]
    fn near_field_neighbours_do_not_cluster() {
        let p = DownwashParams::default();
        let s = snap(&[(0.0, -0.2, -0.2), (0.0, 0.2, -0.2)], Vec3::new(0.0, 0.5, 0.0));
        assert_eq!(merged_sources(&s, &p, &MergeParams::default()).len(), 2);
        assert_eq!(
            aggregate_merging(&s, &p, &MergeParams::default()),
            aggregate_additive(&s, &p)
        );
    }

    #[test]
    fn leader_follower_merges_toward_centre() {
        // Sufferer fixed, formation centroid swept along E at 1.3 m.
        let p = DownwashParams::default();
        let m = MergeParams::default();
        let vel = Vec3::new(0.0, 0.5, 0.0);
        let profile = |c: f64, merging: bool| {
            let s = snap(&[(0.0, c - 0.5, -1.3), (0.0, c, -1.3), (0.0, c + 0.5, -1.3)], vel);
            if merging {
                aggregate_merging(&s, &p, &m).f_d
            } else {
                aggregate_additive(&s, &p).f_d
            }
        };
        let grid: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 * 0.005).collect();
        let argmax = |merging: bool| {
            grid.iter()
                .copied()
                .max_by(|a, b| profile(*a, merging).total_cmp(&profile(*b, merging)))
                .unwrap()
        };
        let merged_peak = argmax(true);
        let merged_max = profile(merged_peak, true);
        let additive_max = grid.iter().map(|&c| profile(c, false)).fold(0.0, f64::max);
        assert!(merged_max > additive_max);
        // Formation edges: the outer vehicles pass overhead at c = ±0.5.
        assert!(profile(0.5, true) < profile(0.5, false));
        assert!(profile(-0.5, true) < profile(-0.5, false));
    }
}
