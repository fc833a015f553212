//! Equations of motion `D(q) q̈ + H(q, q̇) = B u`.
//!
//! Each point mass contributes `m Jᵀ(J q̈ + J̇q̇ + g e_z)` and the torso adds
//! the rotational Newton-Euler term `J_ωᵀ(I ω̇ + ω × I ω)` in body axes.
//! Jacobian columns and `J̇q̇` come from forward-mode jets, so `D` and `H`
//! are exact up to roundoff.

use crate::jet::Jet;
use crate::linalg::{Lu, Matrix};
use crate::Result;

use super::kinematics::{
    chain, seed, to_yaw_frame, unit, M3, N_POINTS, STANCE_SHIN, STANCE_THIGH, SWING_FOOT,
    SWING_SHIN, SWING_THIGH, TORSO,
};
use super::{BipedParams, BipedState, DOF};

/// Number of actuated joints.
pub const N_INPUTS: usize = 6;

fn masses(p: &BipedParams) -> [f64; N_POINTS] {
    let mut m = [0.0; N_POINTS];
    m[STANCE_THIGH] = p.thigh_mass;
    m[SWING_THIGH] = p.thigh_mass;
    m[STANCE_SHIN] = p.shin_mass;
    m[SWING_SHIN] = p.shin_mass;
    m[TORSO] = p.torso_mass;
    m
}

/// `vee` of the skew-symmetric part of `Rᵀ A`.
fn body_vee(r: &M3<f64>, a: &M3<f64>) -> [f64; 3] {
    let m = |i: usize, j: usize| r[0][i] * a[0][j] + r[1][i] * a[1][j] + r[2][i] * a[2][j];
    [
        0.5 * (m(2, 1) - m(1, 2)),
        0.5 * (m(0, 2) - m(2, 0)),
        0.5 * (m(1, 0) - m(0, 1)),
    ]
}

fn values(m: &M3<Jet>, part: impl Fn(&Jet) -> f64) -> M3<f64> {
    core::array::from_fn(|i| core::array::from_fn(|j| part(&m[i][j])))
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Everything the simulator and the controller need at one state.
#[derive(Debug, Clone)]
pub struct Terms {
    /// `D(q)`.
    pub mass: Matrix,
    /// `H(q, q̇)`.
    pub bias: [f64; DOF],
    /// Stance-frame swing-foot Jacobian `∂r_F/∂q`, 3×9.
    pub swing_foot_jacobian: Matrix,
    /// `r_FH` in the yaw frame, its Jacobian, rate and `J̇q̇`.
    pub swing_rel_yaw: [f64; 3],
    pub swing_rel_yaw_jacobian: Matrix,
    pub swing_rel_yaw_rate: [f64; 3],
    pub swing_rel_yaw_bias: [f64; 3],
    pub kinetic: f64,
    pub potential: f64,
}

impl Terms {
    pub fn new(q: &[f64; DOF], qdot: &[f64; DOF], p: &BipedParams) -> Terms {
        let m = masses(p);
        let inertia = p.torso_inertia;

        let cv = chain(&seed(q, qdot), p);
        let rot = values(&cv.rot, |j| j.v);
        let omega = body_vee(&rot, &values(&cv.rot, |j| j.d));
        let omega_bias = body_vee(&rot, &values(&cv.rot, |j| j.dd));
        let ys = to_yaw_frame(Jet::variable(q[0], qdot[0]), &cv.swing_rel);

        let mut jac = [[[0.0; DOF]; 3]; N_POINTS];
        let mut jw = [[0.0; DOF]; 3];
        let mut swing_rel_yaw_jacobian = Matrix::zeros(3, DOF);
        for k in 0..DOF {
            let ck = chain(&seed(q, &unit(k)), p);
            for (i, pt) in ck.points.iter().enumerate() {
                for a in 0..3 {
                    jac[i][a][k] = pt[a].d;
                }
            }
            let wk = body_vee(&rot, &values(&ck.rot, |j| j.d));
            for a in 0..3 {
                jw[a][k] = wk[a];
            }
            let yk = to_yaw_frame(Jet::variable(q[0], if k == 0 { 1.0 } else { 0.0 }), &ck.swing_rel);
            for a in 0..3 {
                swing_rel_yaw_jacobian[(a, k)] = yk[a].d;
            }
        }

        let mut mass = Matrix::zeros(DOF, DOF);
        let mut bias = [0.0; DOF];
        let mut kinetic = 0.0;
        let mut potential = 0.0;
        for i in 0..N_POINTS {
            if m[i] == 0.0 {
                continue;
            }
            let pt = &cv.points[i];
            let b = [pt[0].dd, pt[1].dd, pt[2].dd + p.g];
            kinetic += 0.5 * m[i] * (pt[0].d * pt[0].d + pt[1].d * pt[1].d + pt[2].d * pt[2].d);
            potential += m[i] * p.g * pt[2].v;
            let jm = &jac[i];
            for r in 0..DOF {
                for c in r..DOF {
                    let s = jm[0][r] * jm[0][c] + jm[1][r] * jm[1][c] + jm[2][r] * jm[2][c];
                    mass[(r, c)] += m[i] * s;
                }
                bias[r] += m[i] * (jm[0][r] * b[0] + jm[1][r] * b[1] + jm[2][r] * b[2]);
            }
        }
        let iw = [inertia[0] * omega[0], inertia[1] * omega[1], inertia[2] * omega[2]];
        let gyro = cross(&omega, &iw);
        let torque = [
            inertia[0] * omega_bias[0] + gyro[0],
            inertia[1] * omega_bias[1] + gyro[1],
            inertia[2] * omega_bias[2] + gyro[2],
        ];
        kinetic += 0.5 * (omega[0] * iw[0] + omega[1] * iw[1] + omega[2] * iw[2]);
        for r in 0..DOF {
            for c in r..DOF {
                let s: f64 = (0..3).map(|a| inertia[a] * jw[a][r] * jw[a][c]).sum();
                mass[(r, c)] += s;
            }
            bias[r] += (0..3).map(|a| jw[a][r] * torque[a]).sum::<f64>();
        }
        for r in 0..DOF {
            for c in 0..r {
                mass[(r, c)] = mass[(c, r)];
            }
        }

        let swing_foot_jacobian = Matrix::from_fn(3, DOF, |a, k| jac[SWING_FOOT][a][k]);
        Terms {
            mass,
            bias,
            swing_foot_jacobian,
            swing_rel_yaw: [ys[0].v, ys[1].v, ys[2].v],
            swing_rel_yaw_jacobian,
            swing_rel_yaw_rate: [ys[0].d, ys[1].d, ys[2].d],
            swing_rel_yaw_bias: [ys[0].dd, ys[1].dd, ys[2].dd],
            kinetic,
            potential,
        }
    }

    /// `q̈ = D⁻¹(B u − H)`.
    pub fn acceleration(&self, u: &[f64; N_INPUTS]) -> Result<[f64; DOF]> {
        let lu = Lu::new(&self.mass)?;
        let mut rhs = [0.0; DOF];
        for i in 0..DOF {
            let bu = if i >= 3 { u[i - 3] } else { 0.0 };
            rhs[i] = bu - self.bias[i];
        }
        let x = lu.solve(&rhs);
        Ok(core::array::from_fn(|i| x[i]))
    }
}

pub fn mass_matrix(q: &[f64; DOF], params: &BipedParams) -> Matrix {
    Terms::new(q, &[0.0; DOF], params).mass
}

pub fn bias(q: &[f64; DOF], qdot: &[f64; DOF], params: &BipedParams) -> [f64; DOF] {
    Terms::new(q, qdot, params).bias
}

/// Joint accelerations under torques `u = (u_S, u_F)`.
pub fn dynamics(
    state: &BipedState,
    u: &[f64; N_INPUTS],
    params: &BipedParams,
) -> Result<[f64; DOF]> {
    if !u.iter().all(|v| v.is_finite()) {
        return Err(crate::Error::InvalidParameter("torques must be finite"));
    }
    Terms::new(&state.q, &state.qdot, params).acceleration(u)
}

pub fn kinetic_energy(state: &BipedState, params: &BipedParams) -> f64 {
    Terms::new(&state.q, &state.qdot, params).kinetic
}

pub fn potential_energy(q: &[f64; DOF], params: &BipedParams) -> f64 {
    let c = chain(q, params);
    let m = masses(params);
    (0..N_POINTS).map(|i| m[i] * params.g * c.points[i][2]).sum()
}

pub fn total_energy(state: &BipedState, params: &BipedParams) -> f64 {
    let t = Terms::new(&state.q, &state.qdot, params);
    t.kinetic + t.potential
}
