//! Vehicle states, relative states and 6-DOF wrenches in the NED frame.
//!
//! D is positive down, so a neighbour flying above the sufferer has a
//! negative relative D offset.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum distance between a neighbour and the sufferer, metres.
pub const MIN_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub n: f64,
    pub e: f64,
    pub d: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { n: 0.0, e: 0.0, d: 0.0 };

    pub const fn new(n: f64, e: f64, d: f64) -> Self {
        Vec3 { n, e, d }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.n, self.e, self.d]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn norm(self) -> f64 {
        (self.n * self.n + self.e * self.e + self.d * self.d).sqrt()
    }

    /// Horizontal (N-E plane) distance from the origin.
    pub fn lateral_norm(self) -> f64 {
        self.n.hypot(self.e)
    }

    pub fn is_finite(self) -> bool {
        self.n.is_finite() && self.e.is_finite() && self.d.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.n + o.n, self.e + o.e, self.d + o.d)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.n - o.n, self.e - o.e, self.d - o.d)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.n, -self.e, -self.d)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.n * s, self.e * s, self.d * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Radians. Carried through but unused by the yaw-symmetric field.
    pub yaw: f64,
}

impl VehicleState {
    pub fn new(position: Vec3, velocity: Vec3, yaw: f64) -> Self {
        VehicleState {
            position,
            velocity,
            yaw,
        }
    }

    /// Stationary vehicle at `position`.
    pub fn hover(position: Vec3) -> Self {
        VehicleState::new(position, Vec3::ZERO, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.yaw.is_finite()
    }

    /// Flat layout used by the dataset format: n, e, d, vn, ve, vd, yaw.
    pub fn to_row(&self) -> [f64; 7] {
        let p = self.position;
        let v = self.velocity;
        [p.n, p.e, p.d, v.n, v.e, v.d, self.yaw]
    }

    pub fn from_row(r: [f64; 7]) -> Self {
        VehicleState::new(Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5]), r[6])
    }
}

/// Neighbour state expressed relative to the sufferer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeState {
    pub dpos: Vec3,
    pub dvel: Vec3,
}

impl RelativeState {
    /// Model input features: relative position then relative velocity.
    pub fn features(&self) -> [f64; 6] {
        [
            self.dpos.n,
            self.dpos.e,
            self.dpos.d,
            self.dvel.n,
            self.dvel.e,
            self.dvel.d,
        ]
    }

    /// Total order used to make set summations independent of input order:
    /// relative position by (D, N, E), then relative velocity.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        let key = |r: &Self| [r.dpos.d, r.dpos.n, r.dpos.e, r.dvel.d, r.dvel.n, r.dvel.e];
        let (a, b) = (key(self), key(other));
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// State of `neighbour` relative to `sufferer`.
pub fn relative_state(neighbour: &VehicleState, sufferer: &VehicleState) -> RelativeState {
    RelativeState {
        dpos: neighbour.position - sufferer.position,
        dvel: neighbour.velocity - sufferer.velocity,
    }
}

/// Force (N, E, D) in newtons and torque (pitch, roll, yaw) in newton-metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench6 {
    pub f_n: f64,
    pub f_e: f64,
    pub f_d: f64,
    pub t_pitch: f64,
    pub t_roll: f64,
    pub t_yaw: f64,
}

/// Axis labels in storage order.
pub const AXES: [&str; 6] = ["N", "E", "D", "Pitch", "Roll", "Yaw"];

/// Index of the D-axis force in [`Wrench6::to_array`].
pub const AXIS_D: usize = 2;

impl Wrench6 {
    pub const ZERO: Wrench6 = Wrench6 {
        f_n: 0.0,
        f_e: 0.0,
        f_d: 0.0,
        t_pitch: 0.0,
        t_roll: 0.0,
        t_yaw: 0.0,
    };

    pub fn to_array(self) -> [f64; 6] {
        [self.f_n, self.f_e, self.f_d, self.t_pitch, self.t_roll, self.t_yaw]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Wrench6 {
            f_n: a[0],
            f_e: a[1],
            f_d: a[2],
            t_pitch: a[3],
            t_roll: a[4],
            t_yaw: a[5],
        }
    }

    pub fn from_slice(a: &[f64]) -> Self {
        let mut arr = [0.0; 6];
        arr.copy_from_slice(&a[..6]);
        Wrench6::from_array(arr)
    }

    pub fn scale(self, s: f64) -> Self {
        Wrench6::from_array(self.to_array().map(|v| v * s))
    }

    /// Componentwise absolute values.
    pub fn abs(self) -> [f64; 6] {
        self.to_array().map(f64::abs)
    }

    pub fn max_abs(self) -> f64 {
        self.abs().into_iter().fold(0.0, f64::max)
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl Add for Wrench6 {
    type Output = Wrench6;
    fn add(self, o: Wrench6) -> Wrench6 {
        let (a, b) = (self.to_array(), o.to_array());
        Wrench6::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl AddAssign for Wrench6 {
    fn add_assign(&mut self, o: Wrench6) {
        *self = *self + o;
    }
}

impl Sub for Wrench6 {
    type Output = Wrench6;
    fn sub(self, o: Wrench6) -> Wrench6 {
        let (a, b) = (self.to_array(), o.to_array());
        Wrench6::from_array(std::array::from_fn(|i| a[i] - b[i]))
    }
}

impl std::iter::Sum for Wrench6 {
    fn sum<I: Iterator<Item = Wrench6>>(iter: I) -> Wrench6 {
        iter.fold(Wrench6::ZERO, |acc, w| acc + w)
    }
}

/// The sufferer plus its K neighbours at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSnapshot {
    sufferer: VehicleState,
    neighbours: Vec<VehicleState>,
}

impl FormationSnapshot {
    pub fn new(sufferer: VehicleState, neighbours: Vec<VehicleState>) -> Result<Self> {
        if !sufferer.is_finite() {
            return Err(Error::invalid("sufferer state is not finite"));
        }
        for (j, nb) in neighbours.iter().enumerate() {
            if !nb.is_finite() {
                return Err(Error::invalid(format!("neighbour {j} state is not finite")));
            }
            if (nb.position - sufferer.position).norm() <= MIN_SEPARATION {
                return Err(Error::invalid(format!("neighbour {j} coincides with the sufferer")));
            }
        }
        Ok(FormationSnapshot { sufferer, neighbours })
    }

    pub fn sufferer(&self) -> &VehicleState {
        &self.sufferer
    }

    pub fn neighbours(&self) -> &[VehicleState] {
        &self.neighbours
    }

    pub fn k(&self) -> usize {
        self.neighbours.len()
    }

    /// Relative states in input order.
    pub fn relative_states(&self) -> Vec<RelativeState> {
        self.neighbours
            .iter()
            .map(|nb| relative_state(nb, &self.sufferer))
            .collect()
    }

    /// Relative states sorted by [`RelativeState::canonical_cmp`].
    pub fn canonical_relative_states(&self) -> Vec<RelativeState> {
        let mut rel = self.relative_states();
        rel.sort_by(RelativeState::canonical_cmp);
        rel
    }

    /// Same snapshot with neighbours reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        FormationSnapshot {
            sufferer: self.sufferer,
            neighbours: perm.iter().map(|&i| self.neighbours[i]).collect(),
        }
    }
}
