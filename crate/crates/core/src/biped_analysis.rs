//! Restricted Poincaré map of the closed-loop biped on `(α, γ, θ̇y, v)`.
//!
//! A reduced point is lifted to the unique pre-impact state that satisfies
//! the impact conditions of the gait with `θy = 0`, pushed through the
//! impact map and one closed-loop step, and read back at the next
//! touchdown.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::biped::kinematics::{chain, seed, unit};
use crate::biped::{
    impact_map, to_quasi, BipedParams, BipedState, GaitSpec, StanceLeg, DOF, YAW,
};
use crate::control::{closed_loop_step, ClosedLoop, StepOutcome, IMPACT_TOLERANCE};
use crate::hybrid::IntegratorConfig;
use crate::linalg::{eigenvalues, spectral_radius, Lu, Matrix};
use crate::lip::{velocities_from_gamma_v, VelocityBranch};
use crate::lip_analysis::numeric_jacobian;
use crate::{Error, Result};

/// Reduced coordinates `(α, γ, θ̇y, v)`.
pub type Reduced = [f64; 4];

/// Central-difference step for the biped map.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Convergence threshold on `‖P̂(x) − x‖∞`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Largest accepted output error at impact for a valid report.
pub const M_P_TOLERANCE: f64 = 1e-3;

/// Integrator settings for map evaluations: a tight event tolerance keeps
/// the map smooth enough for Newton to reach [`FIXED_POINT_TOLERANCE`].
pub fn analysis_integrator() -> IntegratorConfig {
    IntegratorConfig::default().with_event_tolerance(1e-12)
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let r = a % two_pi;
    if r > core::f64::consts::PI {
        r - two_pi
    } else if r <= -core::f64::consts::PI {
        r + two_pi
    } else {
        r
    }
}

/// Hip pitch and roll that put the foot of a leg with knee `knee` at `u`
/// (torso coordinates, relative to the hip centre). `side` is `−1` for the
/// stance leg and `+1` for the swing leg.
fn leg_ik(u: [f64; 3], side: f64, knee: f64, p: &BipedParams) -> Result<(f64, f64)> {
    let half_w = 0.5 * p.w;
    let rho_sq = u[1] * u[1] + u[2] * u[2];
    if rho_sq < half_w * half_w {
        return Err(Error::LiftInfeasible("foot inside the hip width"));
    }
    let wz = -(rho_sq - half_w * half_w).sqrt();
    let roll = u[2].atan2(u[1]) - wz.atan2(side * half_w);
    let lx = -p.l1 * knee.sin();
    let lz = -p.l2 - p.l1 * knee.cos();
    let pitch = lz.atan2(lx) - wz.atan2(u[0]);
    Ok((wrap(pitch), wrap(roll)))
}

/// Pre-impact state on the invariant impact manifold with reduced
/// coordinates `xr` and `θy = 0`, right leg in stance.
pub fn lift_to_full_state(xr: &Reduced, gait: &GaitSpec, params: &BipedParams) -> Result<BipedState> {
    let [alpha, gamma, yaw_rate, v] = *xr;
    if !xr.iter().all(|x| x.is_finite()) {
        return Err(Error::LiftInfeasible("non-finite reduced coordinates"));
    }
    if !(v > 0.0) {
        return Err(Error::LiftInfeasible("no forward motion"));
    }
    gait.validate(params).map_err(|_| Error::LiftInfeasible("gait out of reach"))?;
    let (vx, vy) = velocities_from_gamma_v(gamma, v, VelocityBranch::SagittalDominant)?;
    let (r0, z0) = (gait.r0(), gait.z0(params));
    let hip = [r0 * alpha.sin(), r0 * alpha.cos(), z0];
    let (sp, cp) = (gait.theta_p_d.sin(), gait.theta_p_d.cos());
    // R_T = R_y(θp); u = R_Tᵀ w
    let body = |w: [f64; 3]| [cp * w[0] - sp * w[2], w[1], sp * w[0] + cp * w[2]];
    let (q1, q2) = leg_ik(body([-hip[0], -hip[1], -hip[2]]), -1.0, gait.q_k_d, params)?;
    let (q4, q5) = leg_ik(body([gait.x0, gait.y0, -z0]), 1.0, gait.q_k_d, params)?;
    let k = gait.q_k_d;
    let q = [0.0, 0.0, gait.theta_p_d, q1, q2, k, q4, q5, k];

    // Hip velocity in Y: v = J_yaw θ̇y + J_q1 q̇1 + J_q2 q̇2 at θy = 0.
    let vz = -(hip[0] * vx + hip[1] * vy) / z0;
    let col = |k: usize| {
        let c = chain(&seed(&q, &unit(k)), params);
        [c.hip[0].d, c.hip[1].d, c.hip[2].d]
    };
    let (j0, j1, j2) = (col(YAW), col(3), col(4));
    let rhs: [f64; 3] = core::array::from_fn(|i| [vx, vy, vz][i] - j0[i] * yaw_rate);
    let a = Matrix::from_fn(3, 2, |i, j| if j == 0 { j1[i] } else { j2[i] });
    let at = a.transpose();
    let rates = Lu::new(&at.matmul(&a))
        .map_err(|_| Error::LiftInfeasible("stance hip rates are singular"))?
        .solve(&at.mul_vec(&rhs));
    let residual = (0..3)
        .map(|i| (j1[i] * rates[0] + j2[i] * rates[1] - rhs[i]).abs())
        .fold(0.0, f64::max);
    if residual > 1e-9 * (1.0 + v) {
        return Err(Error::LiftInfeasible("hip velocity not tangent to the leg sphere"));
    }
    let mut qdot = [0.0; DOF];
    qdot[YAW] = yaw_rate;
    qdot[3] = rates[0];
    qdot[4] = rates[1];
    Ok(BipedState::new(q, qdot, StanceLeg::Right))
}

/// Impact conditions of the gait, as residuals that vanish on the manifold:
/// posture `(θr, θp − θp^d, q3 − q_k^d)` with rates, placement
/// `(x_FH − x0, y_FH − y0, q6 − q_k^d)` with rates.
pub fn impact_conditions(state: &BipedState, gait: &GaitSpec, params: &BipedParams) -> Result<[f64; 12]> {
    let qs = to_quasi(state, params)?;
    let (q, qd) = (&state.q, &state.qdot);
    Ok([
        q[1],
        q[2] - gait.theta_p_d,
        q[5] - gait.q_k_d,
        qd[1],
        qd[2],
        qd[5],
        qs.x_fh - gait.x0,
        qs.y_fh - gait.y0,
        q[8] - gait.q_k_d,
        qs.x_fh_dot,
        qs.y_fh_dot,
        qd[8],
    ])
}

/// One evaluation of the restricted map with its step diagnostics.
#[derive(Debug, Clone)]
pub struct MapStep {
    pub next: Reduced,
    pub step: StepOutcome,
}

pub fn restricted_poincare_step(
    xr: &Reduced,
    model: &ClosedLoop,
    config: &IntegratorConfig,
) -> Result<MapStep> {
    let c = &model.controller;
    let pre = lift_to_full_state(xr, &c.config.gait, &c.params)?;
    let post = impact_map(&pre, &c.params, IMPACT_TOLERANCE)?;
    let step = closed_loop_step(model, &post, config)?;
    let next = to_quasi(&step.pre_impact, &c.params)?.reduced();
    Ok(MapStep { next, step })
}

pub fn restricted_poincare(xr: &Reduced, model: &ClosedLoop, config: &IntegratorConfig) -> Result<Reduced> {
    Ok(restricted_poincare_step(xr, model, config)?.next)
}

/// Seed from the matched pendulum: `α = atan(x0/y0)`, `γ = ω²x0y0`,
/// `θ̇y = 0`, `v = √(2K)`.
pub fn lip_seed(model: &ClosedLoop, k0: f64) -> Result<Reduced> {
    let c = &model.controller;
    let lip = c.config.matched_lip(&c.params)?;
    let fp = crate::lip_analysis::fixed_point(&lip, k0)?;
    Ok([fp.alpha, fp.gamma, 0.0, fp.v])
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn residual(x: &Reduced, model: &ClosedLoop, config: &IntegratorConfig) -> Result<Reduced> {
    let p = restricted_poincare(x, model, config)?;
    Ok(core::array::from_fn(|i| p[i] - x[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolverStep {
    Newton,
    FixedPointIteration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub point: Reduced,
    /// `‖P̂(x) − x‖∞` at `point`.
    pub residual: f64,
    pub iterations: usize,
    /// Which update each iteration used.
    pub history: Vec<(SolverStep, f64)>,
}

/// Damped Newton on `P̂(x) − x`, falling back to plain iteration when no
/// damped Newton step reduces the residual.
pub fn find_fixed_point(
    guess: &Reduced,
    model: &ClosedLoop,
    config: &IntegratorConfig,
) -> Result<FixedPoint> {
    let mut x = *guess;
    let mut f = residual(&x, model, config)?;
    let mut norm = inf_norm(&f);
    let mut history = Vec::new();
    for it in 0..MAX_NEWTON_ITERATIONS {
        if norm <= FIXED_POINT_TOLERANCE {
            return Ok(FixedPoint {
                point: x,
                residual: norm,
                iterations: it,
                history,
            });
        }
        let newton = numeric_jacobian(
            |y| {
                let y4: Reduced = core::array::from_fn(|i| y[i]);
                residual(&y4, model, config).map(|r| r.to_vec())
            },
            &x,
            DEFAULT_FD_STEP,
        )
        .and_then(|j| Lu::new(&j).map(|lu| lu.solve(&f)));
        let mut accepted = false;
        if let Ok(dx) = newton {
            let mut t = 1.0;
            for _ in 0..8 {
                let cand: Reduced = core::array::from_fn(|i| x[i] - t * dx[i]);
                if let Ok(fc) = residual(&cand, model, config) {
                    let nc = inf_norm(&fc);
                    if nc < norm {
                        x = cand;
                        f = fc;
                        norm = nc;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if accepted {
            history.push((SolverStep::Newton, norm));
            continue;
        }
        let cand: Reduced = core::array::from_fn(|i| x[i] + f[i]);
        let fc = residual(&cand, model, config)?;
        x = cand;
        f = fc;
        norm = inf_norm(&f);
        history.push((SolverStep::FixedPointIteration, norm));
    }
    if norm <= FIXED_POINT_TOLERANCE {
        return Ok(FixedPoint {
            point: x,
            residual: norm,
            iterations: MAX_NEWTON_ITERATIONS,
            history,
        });
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
    })
}

/// Map iterations run before Newton in [`find_stable_fixed_point`].
pub const DEFAULT_SETTLE_STEPS: usize = 20;

/// Iterates the map `settle_steps` times from `guess` and then runs
/// [`find_fixed_point`]. Newton alone converges to whichever fixed point is
/// nearest, saddles included; settling first moves the guess into the
/// basin of an attracting gait.
pub fn find_stable_fixed_point(
    guess: &Reduced,
    settle_steps: usize,
    model: &ClosedLoop,
    config: &IntegratorConfig,
) -> Result<FixedPoint> {
    let mut x = *guess;
    for _ in 0..settle_steps {
        x = restricted_poincare(&x, model, config)?;
    }
    find_fixed_point(&x, model, config)
}

/// One row of an iterated-map experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StepRow {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub thetadot_y: f64,
    pub v: f64,
}

impl StepRow {
    fn new(n: usize, x: &Reduced) -> StepRow {
        StepRow {
            n,
            alpha: x[0],
            gamma: x[1],
            thetadot_y: x[2],
            v: x[3],
        }
    }

    pub fn reduced(&self) -> Reduced {
        [self.alpha, self.gamma, self.thetadot_y, self.v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSettings {
    /// Perturbation added to the fixed point before iterating, per
    /// coordinate `(α, γ, θ̇y, v)`.
    pub perturbation: Reduced,
    pub n_steps: usize,
    pub fd_step: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings {
            perturbation: [0.0, 0.0, 0.0, 0.01],
            n_steps: 40,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BipedPoincareReport {
    pub fixed_point: Reduced,
    pub jacobian: Matrix,
    #[cfg_attr(feature = "serde", serde(serialize_with = "crate::complex_pairs"))]
    pub spectrum: Vec<Complex64>,
    pub spectral_radius: f64,
    /// Spectral radii of the `(α, γ)` and `(θ̇y, v)` diagonal blocks.
    pub block_radii: [f64; 2],
    pub step_sequence: Vec<StepRow>,
    /// Largest output error (values and rates) at each impact of the
    /// sequence.
    pub m_p_residuals: Vec<f64>,
    /// Geometric-mean contraction of `‖x_n − x*‖` over the second half of
    /// the sequence.
    pub observed_ratio: f64,
    /// Every impact met [`M_P_TOLERANCE`].
    pub valid: bool,
}

/// Iterates the map from `start`, stopping early on failure.
pub fn iterate_map(
    start: &Reduced,
    n_steps: usize,
    model: &ClosedLoop,
    config: &IntegratorConfig,
) -> Result<(Vec<StepRow>, Vec<f64>)> {
    let mut rows = Vec::with_capacity(n_steps + 1);
    let mut residuals = Vec::with_capacity(n_steps);
    let mut x = *start;
    rows.push(StepRow::new(0, &x));
    for n in 1..=n_steps {
        let s = restricted_poincare_step(&x, model, config)?;
        residuals.push(s.step.outputs.max_error());
        x = s.next;
        rows.push(StepRow::new(n, &x));
    }
    Ok((rows, residuals))
}

/// `(‖e_N‖ / ‖e_M‖)^(1/(N−M))` with `M = N/2`.
pub fn observed_contraction(rows: &[StepRow], fixed_point: &Reduced) -> f64 {
    let err = |r: &StepRow| {
        let x = r.reduced();
        let d: Vec<f64> = (0..4).map(|i| x[i] - fixed_point[i]).collect();
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let n = rows.len() - 1;
    let m = n / 2;
    if n == m {
        return f64::NAN;
    }
    (err(&rows[n]) / err(&rows[m])).powf(1.0 / (n - m) as f64)
}

pub fn stability_report(
    fixed_point: &Reduced,
    model: &ClosedLoop,
    config: &IntegratorConfig,
    settings: &ReportSettings,
) -> Result<BipedPoincareReport> {
    let jacobian = numeric_jacobian(
        |y| {
            let y4: Reduced = core::array::from_fn(|i| y[i]);
            restricted_poincare(&y4, model, config).map(|r| r.to_vec())
        },
        fixed_point,
        settings.fd_step,
    )?;
    let spectrum = eigenvalues(&jacobian)?;
    let rho = spectral_radius(&spectrum);
    let block_radii = [
        spectral_radius(&eigenvalues(&jacobian.block(0, 0, 2, 2))?),
        spectral_radius(&eigenvalues(&jacobian.block(2, 2, 2, 2))?),
    ];
    let start: Reduced = core::array::from_fn(|i| fixed_point[i] + settings.perturbation[i]);
    let (rows, residuals) = iterate_map(&start, settings.n_steps, model, config)?;
    let observed_ratio = observed_contraction(&rows, fixed_point);
    let valid = residuals.iter().all(|r| *r <= M_P_TOLERANCE);
    Ok(BipedPoincareReport {
        fixed_point: *fixed_point,
        jacobian,
        spectrum,
        spectral_radius: rho,
        block_radii,
        step_sequence: rows,
        m_p_residuals: residuals,
        observed_ratio,
        valid,
    })
}

/// Unreduced walk used to check the yaw behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct YawTrace {
    /// World yaw at each touchdown, starting with the lifted state.
    pub world_yaw: Vec<f64>,
    /// `(q, q̇)` at each touchdown.
    pub states: Vec<BipedState>,
}

/// Walks `n_steps` full steps from the lifted `xr` with initial yaw
/// `yaw0`.
pub fn walk_from_reduced(
    xr: &Reduced,
    yaw0: f64,
    n_steps: usize,
    model: &ClosedLoop,
    config: &IntegratorConfig,
) -> Result<YawTrace> {
    let c = &model.controller;
    let mut state = lift_to_full_state(xr, &c.config.gait, &c.params)?.with_yaw_offset(yaw0);
    let mut trace = YawTrace {
        world_yaw: Vec::with_capacity(n_steps + 1),
        states: Vec::with_capacity(n_steps + 1),
    };
    trace.world_yaw.push(state.world_yaw());
    trace.states.push(state);
    for _ in 0..n_steps {
        let post = impact_map(&state, &c.params, IMPACT_TOLERANCE)?;
        state = closed_loop_step(model, &post, config)?.pre_impact;
        trace.world_yaw.push(state.world_yaw());
        trace.states.push(state);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct YawReport {
    pub world_yaw: Vec<f64>,
    /// `max |θ_{n+2} − θ_n|` over the trace.
    pub two_period_error: f64,
    /// `max |θ^δ_n − θ_n − δ|` for the offset run.
    pub offset_shift_error: f64,
    /// Largest change in `(q̂, q̇)` caused by the offset.
    pub offset_state_error: f64,
}

pub fn yaw_period_check(
    fixed_point: &Reduced,
    model: &ClosedLoop,
    config: &IntegratorConfig,
    n_steps: usize,
    offset: f64,
) -> Result<YawReport> {
    let base = walk_from_reduced(fixed_point, 0.0, n_steps, model, config)?;
    let moved = walk_from_reduced(fixed_point, offset, n_steps, model, config)?;
    let two_period_error = base
        .world_yaw
        .windows(3)
        .map(|w| (w[2] - w[0]).abs())
        .fold(0.0, f64::max);
    let offset_shift_error = base
        .world_yaw
        .iter()
        .zip(&moved.world_yaw)
        .map(|(a, b)| (b - a - offset).abs())
        .fold(0.0, f64::max);
    let offset_state_error = base
        .states
        .iter()
        .zip(&moved.states)
        .map(|(a, b)| {
            (1..DOF)
                .map(|i| (a.q[i] - b.q[i]).abs())
                .chain((0..DOF).map(|i| (a.qdot[i] - b.qdot[i]).abs()))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(YawReport {
        world_yaw: base.world_yaw,
        two_period_error,
        offset_shift_error,
        offset_state_error,
    })
}
