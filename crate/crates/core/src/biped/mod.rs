//! The 9-DOF 3D biped: torso with yaw/roll/pitch Euler angles, two legs with
//! hip pitch, hip roll and knee, point feet.
//!
//! Coordinates `q = (θy, θr, θp, q1, q2, q3, q4, q5, q6)`; `q1..q3` belong to
//! the stance leg (hip pitch, hip roll, knee) and `q4..q6` to the swing leg.
//! Everything is expressed in a stance frame centred at the stance foot. It
//! equals the world frame when the right leg is in stance and is its mirror
//! image (`y ↦ −y`) when the left leg is, so the equations of motion are the
//! same for both legs and an impact only relabels coordinates.
//!
//! Torso orientation is `R_T = R_z(θy) R_x(θr) R_y(θp)`.

mod dynamics;
mod gait;
mod impact;
pub(crate) mod kinematics;
mod quasi;

pub use dynamics::{
    bias, dynamics, kinetic_energy, mass_matrix, potential_energy, total_energy, Terms,
};
pub use gait::GaitSpec;
pub use impact::{impact_map, impact_velocity, relabel, relabel_vector};
pub use kinematics::{forward_kinematics, swing_foot_jacobian, FramePositions, Positions};
pub use quasi::{to_quasi, QuasiState};

use crate::{Error, Result};

/// Number of generalized coordinates.
pub const DOF: usize = 9;
/// Index of the yaw angle in `q`.
pub const YAW: usize = 0;

/// Hip heights below this count as a fall, m.
pub const MIN_HIP_HEIGHT: f64 = 0.3;

/// Geometry, masses and gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BipedParams {
    /// Shin length, m.
    pub l1: f64,
    /// Thigh length, m.
    pub l2: f64,
    /// Torso length, m.
    pub l3: f64,
    /// Hip width, m.
    pub w: f64,
    pub torso_mass: f64,
    /// Torso centre of mass above the hip centre along the torso axis, m.
    pub torso_com: f64,
    /// Principal torso inertia `(Ixx, Iyy, Izz)` about its centre of mass.
    pub torso_inertia: [f64; 3],
    /// Point mass at each thigh midpoint, kg.
    pub thigh_mass: f64,
    /// Point mass at each shin midpoint, kg.
    pub shin_mass: f64,
    pub g: f64,
    /// Open interval allowed for both knees, rad.
    pub knee_limits: (f64, f64),
}

impl Default for BipedParams {
    fn default() -> Self {
        BipedParams {
            l1: 0.4,
            l2: 0.4,
            l3: 0.5,
            w: 0.2,
            torso_mass: 20.0,
            torso_com: 0.25,
            torso_inertia: [1.0, 0.8, 0.5],
            thigh_mass: 2.0,
            shin_mass: 1.0,
            g: 9.81,
            knee_limits: (0.0, core::f64::consts::PI),
        }
    }
}

impl BipedParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let lengths = [self.l1, self.l2, self.l3, self.w];
        let masses = [self.torso_mass, self.thigh_mass, self.shin_mass];
        if !lengths.iter().chain(&masses).chain(&self.torso_inertia).all(|v| pos(*v)) {
            return Err(Error::InvalidParameter(
                "lengths, masses and inertias must be positive",
            ));
        }
        if !(self.torso_com.is_finite() && self.g.is_finite() && self.g > 0.0) {
            return Err(Error::InvalidParameter("torso offset and gravity must be finite"));
        }
        if !(self.knee_limits.0 < self.knee_limits.1) {
            return Err(Error::InvalidParameter("knee limits must be increasing"));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.torso_mass + 2.0 * (self.thigh_mass + self.shin_mass)
    }

    /// `‖r_H‖²` (equally `‖r_FH‖²`) for knee angle `knee`.
    pub fn leg_length_sq(&self, knee: f64) -> f64 {
        self.l1 * self.l1
            + self.l2 * self.l2
            + 0.25 * self.w * self.w
            + 2.0 * self.l1 * self.l2 * knee.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StanceLeg {
    Left,
    Right,
}

impl StanceLeg {
    pub fn other(self) -> Self {
        match self {
            StanceLeg::Left => StanceLeg::Right,
            StanceLeg::Right => StanceLeg::Left,
        }
    }

    /// `+1` when the stance frame is the world frame, `−1` when mirrored.
    pub fn sign(self) -> f64 {
        match self {
            StanceLeg::Right => 1.0,
            StanceLeg::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BipedState {
    pub q: [f64; DOF],
    pub qdot: [f64; DOF],
    pub stance_leg: StanceLeg,
}

impl BipedState {
    pub fn new(q: [f64; DOF], qdot: [f64; DOF], stance_leg: StanceLeg) -> Self {
        BipedState { q, qdot, stance_leg }
    }

    pub fn to_array(&self) -> [f64; 2 * DOF] {
        let mut x = [0.0; 2 * DOF];
        x[..DOF].copy_from_slice(&self.q);
        x[DOF..].copy_from_slice(&self.qdot);
        x
    }

    pub fn from_array(x: &[f64; 2 * DOF], stance_leg: StanceLeg) -> Self {
        let mut q = [0.0; DOF];
        let mut qdot = [0.0; DOF];
        q.copy_from_slice(&x[..DOF]);
        qdot.copy_from_slice(&x[DOF..]);
        BipedState { q, qdot, stance_leg }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|v| v.is_finite())
    }

    /// Yaw seen in the world frame.
    pub fn world_yaw(&self) -> f64 {
        self.stance_leg.sign() * self.q[YAW]
    }

    /// Same state with the yaw angle shifted by `delta`.
    pub fn with_yaw_offset(mut self, delta: f64) -> Self {
        self.q[YAW] += delta;
        self
    }
}

/// Switching function for the hybrid solver: `−z_F`, so touchdown of the
/// swing foot is a negative-to-positive crossing.
pub fn guard(state: &BipedState, params: &BipedParams) -> f64 {
    -swing_foot_height(&state.q, params)
}

/// Height `z_F` of the swing foot above the ground.
pub fn swing_foot_height(q: &[f64; DOF], params: &BipedParams) -> f64 {
    forward_kinematics(q, params).stance.swing_foot[2]
}

/// Fall and joint-limit check for a state inside a step.
pub fn check_posture(q: &[f64; DOF], params: &BipedParams) -> Result<()> {
    let (lo, hi) = params.knee_limits;
    if !(q[5] > lo && q[5] < hi && q[8] > lo && q[8] < hi) {
        return Err(Error::StepFailed("knee angle outside its limits"));
    }
    let pos = forward_kinematics(q, params);
    if !(pos.stance.hip[2] >= MIN_HIP_HEIGHT) {
        return Err(Error::StepFailed("hip dropped below the fall height"));
    }
    Ok(())
}
