//! Quasi-velocity chart `(ξ₂, ζ₂)` built on the yaw frame `Y`.
//!
//! `(v_x, v_y, v_z)` is the hip velocity expressed in `Y`, which is not the
//! time derivative of the hip's `Y` coordinates while the torso yaws. The
//! swing-foot rates are true derivatives of its `Y` coordinates.

use crate::jet::Jet;
use crate::lip::MIN_CHART_Y;
use crate::{Error, Result};

use super::kinematics::{chain, seed, to_yaw_frame};
use super::{BipedParams, BipedState};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuasiState {
    pub theta_y: f64,
    pub theta_r: f64,
    pub theta_p: f64,
    pub r: f64,
    pub alpha: f64,
    pub z: f64,
    pub x_fh: f64,
    pub y_fh: f64,
    pub z_fh: f64,
    pub theta_y_dot: f64,
    pub theta_r_dot: f64,
    pub theta_p_dot: f64,
    pub v: f64,
    pub gamma: f64,
    pub v_z: f64,
    pub x_fh_dot: f64,
    pub y_fh_dot: f64,
    pub z_fh_dot: f64,
    /// Hip velocity components in `Y` that `(v, γ)` summarize.
    pub v_x: f64,
    pub v_y: f64,
}

impl QuasiState {
    /// `ξ₂ = (θy, θr, θp, r, α, z, x_FH, y_FH, z_FH)`.
    pub fn xi(&self) -> [f64; 9] {
        [
            self.theta_y,
            self.theta_r,
            self.theta_p,
            self.r,
            self.alpha,
            self.z,
            self.x_fh,
            self.y_fh,
            self.z_fh,
        ]
    }

    /// `ζ₂ = (θ̇y, θ̇r, θ̇p, v, γ, v_z, ẋ_FH, ẏ_FH, ż_FH)`.
    pub fn zeta(&self) -> [f64; 9] {
        [
            self.theta_y_dot,
            self.theta_r_dot,
            self.theta_p_dot,
            self.v,
            self.gamma,
            self.v_z,
            self.x_fh_dot,
            self.y_fh_dot,
            self.z_fh_dot,
        ]
    }

    /// The reduced coordinates `(α, γ, θ̇y, v)`.
    pub fn reduced(&self) -> [f64; 4] {
        [self.alpha, self.gamma, self.theta_y_dot, self.v]
    }

    /// Hip position in `Y` rebuilt from `(r, α, z)`.
    pub fn hip_yaw(&self) -> [f64; 3] {
        [self.r * self.alpha.sin(), self.r * self.alpha.cos(), self.z]
    }
}

pub fn to_quasi(state: &BipedState, params: &BipedParams) -> Result<QuasiState> {
    let (q, qd) = (&state.q, &state.qdot);
    let c = chain(&seed(q, qd), params);
    let yaw = Jet::variable(q[0], qd[0]);
    let hip_val = [c.hip[0].v, c.hip[1].v, c.hip[2].v];
    let hip_vel = [c.hip[0].d, c.hip[1].d, c.hip[2].d];
    let hip = to_yaw_frame(q[0], &hip_val);
    let vel = to_yaw_frame(q[0], &hip_vel);
    let fh = to_yaw_frame(yaw, &c.swing_rel);
    if !(hip[1].abs() >= MIN_CHART_Y) {
        return Err(Error::DegenerateY { y: hip[1] });
    }
    Ok(QuasiState {
        theta_y: q[0],
        theta_r: q[1],
        theta_p: q[2],
        r: hip[0].hypot(hip[1]),
        alpha: (hip[0] / hip[1]).atan(),
        z: hip[2],
        x_fh: fh[0].v,
        y_fh: fh[1].v,
        z_fh: fh[2].v,
        theta_y_dot: qd[0],
        theta_r_dot: qd[1],
        theta_p_dot: qd[2],
        v: vel[0].hypot(vel[1]),
        gamma: vel[0] * vel[1],
        v_z: vel[2],
        x_fh_dot: fh[0].d,
        y_fh_dot: fh[1].d,
        z_fh_dot: fh[2].d,
        v_x: vel[0],
        v_y: vel[1],
    })
}
