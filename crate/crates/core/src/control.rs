//! Posture and foot-placement control for the invariant biped step.
//!
//! Outputs, driven to zero by input-output linearization with PD feedback:
//!
//! * posture `y1 = (θr, θp − θp^d, q3 − q_k^d)`
//! * placement `y2 = (x_FH − x_d(p), y_FH − y0, q6 − q6^d(p))`
//!
//! `x_FH, y_FH` are swing-foot coordinates relative to the hip in the yaw
//! frame, so no output reads `θy`. The phase `p` is time since impact over
//! the step period of the matched pendulum. `x_d` carries the swing foot
//! smoothly from `−x0` (where the previous impact leaves it) to `x0` by
//! `p = phase_split`; `q6^d` adds a knee-flexion bump over the same
//! interval for ground clearance. All references are constant afterwards.

use core::f64::consts::PI;

use crate::biped::{
    self, check_posture, impact_map, swing_foot_height, BipedParams, BipedState, GaitSpec,
    StanceLeg, Terms, DOF,
};
use crate::hybrid::{locate_crossing_with, HybridModel, IntegratorConfig};
use crate::linalg::{condition_number, Lu, Matrix};
use crate::lip::{synchronized_step_duration, LipParams};
use crate::{Error, Result};

pub const N_OUTPUTS: usize = 6;

/// Largest condition number accepted for the decoupling matrix.
pub const MAX_DECOUPLING_CONDITION: f64 = 1e8;

/// Largest `|z_F|` accepted by the impact of a closed-loop step, m.
pub const IMPACT_TOLERANCE: f64 = 1e-8;

/// How the 6×6 decoupling system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Decoupling {
    /// Exact linearization using all six torques for all six outputs.
    Joint,
    /// Posture from stance torques only and placement from swing torques
    /// only; the cross-coupling blocks are dropped.
    BlockDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ControlConfig {
    pub gait: GaitSpec,
    /// Proportional gains per output, 1/s².
    pub kp: [f64; N_OUTPUTS],
    /// Derivative gains per output, 1/s.
    pub kd: [f64; N_OUTPUTS],
    /// Peak extra swing-knee flexion, rad.
    pub q6_clearance: f64,
    /// Phase at which the swing references settle.
    pub phase_split: f64,
    /// Symmetric torque bound, N·m.
    pub torque_limit: f64,
    /// Kinetic energy of the matched pendulum that sets the step period, J/kg.
    pub nominal_k0: f64,
    pub decoupling: Decoupling,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            gait: GaitSpec::default(),
            kp: [2500.0; N_OUTPUTS],
            kd: [100.0; N_OUTPUTS],
            q6_clearance: 0.6,
            phase_split: 0.5,
            torque_limit: 1e4,
            nominal_k0: 0.7,
            decoupling: Decoupling::Joint,
        }
    }
}

impl ControlConfig {
    pub fn validate(&self, params: &BipedParams) -> Result<()> {
        self.gait.validate(params)?;
        let pos = |v: &f64| v.is_finite() && *v > 0.0;
        if !(self.kp.iter().all(pos) && self.kd.iter().all(pos)) {
            return Err(Error::InvalidParameter("gains must be positive"));
        }
        if !(self.phase_split > 0.0 && self.phase_split < 1.0) {
            return Err(Error::InvalidParameter("phase_split must lie in (0, 1)"));
        }
        if !(pos(&self.torque_limit) && self.q6_clearance.is_finite() && pos(&self.nominal_k0)) {
            return Err(Error::InvalidParameter(
                "torque limit and nominal energy must be positive",
            ));
        }
        Ok(())
    }

    /// Pendulum with the same `ω` and foot targets as the gait.
    pub fn matched_lip(&self, params: &BipedParams) -> Result<LipParams> {
        LipParams::new(params.g, self.gait.z0(params), self.gait.x0, self.gait.y0)
    }
}

/// Output values and rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outputs {
    pub y: [f64; N_OUTPUTS],
    pub ydot: [f64; N_OUTPUTS],
    pub phase: f64,
}

impl Outputs {
    pub fn y1(&self) -> [f64; 3] {
        [self.y[0], self.y[1], self.y[2]]
    }

    pub fn y2(&self) -> [f64; 3] {
        [self.y[3], self.y[4], self.y[5]]
    }

    /// `max(|y|, |ẏ|)` over all channels.
    pub fn max_error(&self) -> f64 {
        self.y.iter().chain(&self.ydot).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `phase = clamp(elapsed / t_nominal, 0, 1)`.
pub fn phase_variable(elapsed: f64, t_nominal: f64) -> f64 {
    (elapsed / t_nominal).clamp(0.0, 1.0)
}

/// Closed-loop evaluation at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub outputs: Outputs,
    pub u: [f64; 6],
    pub qddot: [f64; DOF],
    /// `u` hit the torque limit in some channel.
    pub saturated: bool,
}

/// A controller bound to a model: caches the nominal step period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    pub params: BipedParams,
    pub config: ControlConfig,
    pub t_nominal: f64,
}

impl Controller {
    pub fn new(params: &BipedParams, config: &ControlConfig) -> Result<Controller> {
        params.validate()?;
        config.validate(params)?;
        let lip = config.matched_lip(params)?;
        let t_nominal = synchronized_step_duration(&lip, config.nominal_k0)?;
        Ok(Controller {
            params: *params,
            config: *config,
            t_nominal,
        })
    }

    pub fn phase(&self, elapsed: f64) -> f64 {
        phase_variable(elapsed, self.t_nominal)
    }

    /// Desired output values with first and second phase derivatives.
    fn reference(&self, phase: f64) -> ([f64; N_OUTPUTS], [f64; N_OUTPUTS], [f64; N_OUTPUTS]) {
        let g = &self.config.gait;
        let s = self.config.phase_split;
        let c = self.config.q6_clearance;
        let mut h = [0.0, g.theta_p_d, g.q_k_d, g.x0, g.y0, g.q_k_d];
        let mut d1 = [0.0; N_OUTPUTS];
        let mut d2 = [0.0; N_OUTPUTS];
        if phase < s {
            let a = PI * phase / s;
            let k = PI / s;
            // x_d = −x0 + 2x0 (1 − cos a)/2
            h[3] = -g.x0 + g.x0 * (1.0 - a.cos());
            d1[3] = g.x0 * k * a.sin();
            d2[3] = g.x0 * k * k * a.cos();
            // q6_d = q_k + c sin²a
            h[5] = g.q_k_d + c * a.sin() * a.sin();
            d1[5] = c * k * (2.0 * a).sin();
            d2[5] = 2.0 * c * k * k * (2.0 * a).cos();
        }
        (h, d1, d2)
    }

    fn actual(terms: &Terms, q: &[f64; DOF], qd: &[f64; DOF]) -> ([f64; N_OUTPUTS], [f64; N_OUTPUTS]) {
        let sy = terms.swing_rel_yaw;
        let sr = terms.swing_rel_yaw_rate;
        (
            [q[1], q[2], q[5], sy[0], sy[1], q[8]],
            [qd[1], qd[2], qd[5], sr[0], sr[1], qd[8]],
        )
    }

    fn outputs_from(&self, terms: &Terms, q: &[f64; DOF], qd: &[f64; DOF], elapsed: f64) -> Outputs {
        let phase = self.phase(elapsed);
        let rate = if elapsed < self.t_nominal { 1.0 / self.t_nominal } else { 0.0 };
        let (h, d1, _) = self.reference(phase);
        let (ha, hda) = Self::actual(terms, q, qd);
        Outputs {
            y: core::array::from_fn(|i| ha[i] - h[i]),
            ydot: core::array::from_fn(|i| hda[i] - d1[i] * rate),
            phase,
        }
    }

    pub fn outputs(&self, state: &BipedState, elapsed: f64) -> Outputs {
        let terms = Terms::new(&state.q, &state.qdot, &self.params);
        self.outputs_from(&terms, &state.q, &state.qdot, elapsed)
    }

    /// Output Jacobian `∂h/∂q`, 6×9.
    fn output_jacobian(terms: &Terms) -> Matrix {
        let mut j = Matrix::zeros(N_OUTPUTS, DOF);
        j[(0, 1)] = 1.0;
        j[(1, 2)] = 1.0;
        j[(2, 5)] = 1.0;
        for k in 0..DOF {
            j[(3, k)] = terms.swing_rel_yaw_jacobian[(0, k)];
            j[(4, k)] = terms.swing_rel_yaw_jacobian[(1, k)];
        }
        j[(5, 8)] = 1.0;
        j
    }

    pub fn evaluate(&self, state: &BipedState, elapsed: f64) -> Result<Evaluation> {
        let (q, qd) = (&state.q, &state.qdot);
        let terms = Terms::new(q, qd, &self.params);
        let outputs = self.outputs_from(&terms, q, qd, elapsed);
        let rate = if elapsed < self.t_nominal { 1.0 / self.t_nominal } else { 0.0 };
        let (_, _, d2) = self.reference(outputs.phase);

        let lu = Lu::new(&terms.mass)?;
        let b_mat = Matrix::from_fn(DOF, 6, |i, j| if i == j + 3 { 1.0 } else { 0.0 });
        let dinv_b = lu.solve_matrix(&b_mat);
        let dinv_h = lu.solve(&terms.bias);
        let jh = Self::output_jacobian(&terms);
        let a = jh.matmul(&dinv_b);
        let jh_dinv_h = jh.mul_vec(&dinv_h);
        let sb = terms.swing_rel_yaw_bias;
        let drift = [0.0, 0.0, 0.0, sb[0], sb[1], 0.0];
        let cfg = &self.config;
        let rhs: [f64; N_OUTPUTS] = core::array::from_fn(|i| {
            let v = -cfg.kp[i] * outputs.y[i] - cfg.kd[i] * outputs.ydot[i];
            let b = -jh_dinv_h[i] + drift[i] - d2[i] * rate * rate;
            v - b
        });

        let mut u = [0.0; 6];
        match cfg.decoupling {
            Decoupling::Joint => {
                check_condition(&a)?;
                let x = Lu::new(&a)?.solve(&rhs);
                u.copy_from_slice(&x);
            }
            Decoupling::BlockDiagonal => {
                for blk in 0..2 {
                    let o = 3 * blk;
                    let ab = a.block(o, o, 3, 3);
                    check_condition(&ab)?;
                    let x = Lu::new(&ab)?.solve(&rhs[o..o + 3]);
                    u[o..o + 3].copy_from_slice(&x);
                }
            }
        }
        let lim = cfg.torque_limit;
        let mut saturated = false;
        for ui in u.iter_mut() {
            if ui.abs() > lim {
                *ui = ui.clamp(-lim, lim);
                saturated = true;
            }
        }
        let qddot = terms.acceleration(&u)?;
        Ok(Evaluation {
            outputs,
            u,
            qddot,
            saturated,
        })
    }

    pub fn control_law(&self, state: &BipedState, elapsed: f64) -> Result<[f64; 6]> {
        Ok(self.evaluate(state, elapsed)?.u)
    }
}

fn check_condition(a: &Matrix) -> Result<()> {
    let condition = condition_number(a).unwrap_or(f64::INFINITY);
    if !(condition <= MAX_DECOUPLING_CONDITION) {
        return Err(Error::SingularDecoupling { condition });
    }
    Ok(())
}

/// The closed-loop biped as a hybrid model on `(q, q̇)`.
///
/// The stance frame already absorbs the left/right mirror, so the flow does
/// not depend on which leg is in stance.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoop {
    pub controller: Controller,
}

impl ClosedLoop {
    pub fn new(params: &BipedParams, config: &ControlConfig) -> Result<ClosedLoop> {
        Ok(ClosedLoop {
            controller: Controller::new(params, config)?,
        })
    }

    fn state(x: &[f64; 2 * DOF]) -> BipedState {
        BipedState::from_array(x, StanceLeg::Right)
    }
}

impl HybridModel<{ 2 * DOF }> for ClosedLoop {
    fn flow(&self, t: f64, x: &[f64; 2 * DOF]) -> Result<[f64; 2 * DOF]> {
        let s = Self::state(x);
        check_posture(&s.q, &self.controller.params)?;
        let e = self.controller.evaluate(&s, t)?;
        let mut f = [0.0; 2 * DOF];
        f[..DOF].copy_from_slice(&s.qdot);
        f[DOF..].copy_from_slice(&e.qddot);
        Ok(f)
    }

    fn guard(&self, x: &[f64; 2 * DOF]) -> f64 {
        -swing_foot_height(&Self::state(x).q, &self.controller.params)
    }

    fn reset(&self, x: &[f64; 2 * DOF]) -> Result<[f64; 2 * DOF]> {
        let s = impact_map(&Self::state(x), &self.controller.params, IMPACT_TOLERANCE)?;
        Ok(s.to_array())
    }
}

/// One continuous phase from a post-impact state to the next touchdown.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub duration: f64,
    /// State at touchdown, before the impact map.
    pub pre_impact: BipedState,
    /// Output errors at touchdown.
    pub outputs: Outputs,
    /// Smallest swing-foot height seen on the sampling grid after it first
    /// rose above the arming threshold and before the final descent began.
    pub min_clearance: f64,
}

/// Integrates the closed loop from `start` (just after an impact) until the
/// swing foot lands. Failures inside the step map to `StepFailed`.
pub fn closed_loop_step(
    model: &ClosedLoop,
    start: &BipedState,
    config: &IntegratorConfig,
) -> Result<StepOutcome> {
    let mut samples = alloc::vec::Vec::new();
    let x0 = start.to_array();
    let ev = locate_crossing_with(
        |t, x: &[f64; 2 * DOF], tau| model.advance(t, x, tau),
        |x: &[f64; 2 * DOF]| model.guard(x),
        &x0,
        config,
        Some(&mut samples),
    )
    .map_err(|e| match e {
        Error::NoCrossing { .. } => Error::StepFailed("swing foot never touched down"),
        Error::NotArmed { .. } => Error::StepFailed("swing foot never left the ground"),
        other => other,
    })?;
    let pre = BipedState::from_array(&ev.state_at_crossing, start.stance_leg);
    let outputs = model.controller.outputs(&pre, ev.time_of_crossing);
    let heights: alloc::vec::Vec<f64> = samples
        .iter()
        .map(|(_, x)| biped::swing_foot_height(&ClosedLoop::state(x).q, &model.controller.params))
        .collect();
    Ok(StepOutcome {
        duration: ev.time_of_crossing,
        pre_impact: pre,
        outputs,
        min_clearance: mid_swing_minimum(&heights, config.arming_threshold),
    })
}

/// Minimum height between lift-off and the last local maximum.
fn mid_swing_minimum(heights: &[f64], threshold: f64) -> f64 {
    let Some(first) = heights.iter().position(|h| *h > threshold) else {
        return f64::NAN;
    };
    let peak = heights
        .iter()
        .enumerate()
        .skip(first)
        .fold((first, f64::NEG_INFINITY), |(bi, bh), (i, h)| {
            if *h >= bh {
                (i, *h)
            } else {
                (bi, bh)
            }
        })
        .0;
    heights[first..=peak].iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_clamps() {
        assert_eq!(phase_variable(0.0, 0.8), 0.0);
        assert_eq!(phase_variable(0.4, 0.8), 0.5);
        assert_eq!(phase_variable(2.0, 0.8), 1.0);
    }

    #[test]
    fn references_settle_after_split() {
        let c = Controller::new(&BipedParams::default(), &ControlConfig::default()).unwrap();
        let g = c.config.gait;
        for p in [c.config.phase_split, 0.9, 1.0] {
            let (h, d1, d2) = c.reference(p);
            assert_eq!(h, [0.0, g.theta_p_d, g.q_k_d, g.x0, g.y0, g.q_k_d]);
            assert!(d1.iter().chain(&d2).all(|v| *v == 0.0));
        }
        let (h, _, _) = c.reference(0.0);
        assert_eq!(h[3], -g.x0);
        assert_eq!(h[5], g.q_k_d);
    }

    #[test]
    fn reference_derivatives_match_differences() {
        let c = Controller::new(&BipedParams::default(), &ControlConfig::default()).unwrap();
        let e = 1e-6;
        for p in [0.1, 0.3, 0.55] {
            let (_, d1, d2) = c.reference(p);
            let (hp, d1p, _) = c.reference(p + e);
            let (hm, d1m, _) = c.reference(p - e);
            for i in 0..N_OUTPUTS {
                assert!((d1[i] - (hp[i] - hm[i]) / (2.0 * e)).abs() < 1e-6);
                assert!((d2[i] - (d1p[i] - d1m[i]) / (2.0 * e)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn mid_swing_minimum_ignores_final_descent() {
        let h = [0.0, 0.01, 0.03, 0.02, 0.05, 0.04, 0.0];
        assert_eq!(mid_swing_minimum(&h, 1e-6), 0.01);
    }
}
