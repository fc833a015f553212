//! The 3D linear inverted pendulum under an `(x0, y0)`-invariant step.
//!
//! The point mass (m = 1) moves in the plane `z = z0` with
//! `ẍ = ω²x, ÿ = ω²y`, `ω = √(g/z0)`, in a frame centred on the support
//! point. A step starts at `(−x0, y0)` and ends when `x² + y² = x0² + y0²`
//! on the forward side. The reset swaps support and flips the lateral axis:
//! `(x, y, ẋ, ẏ) ↦ (−x0, y0, ẋ, −ẏ)`.


use crate::hybrid::{locate_crossing_with, HybridModel, IntegratorConfig};
use crate::{Error, Result};

/// Kinetic energy used by the default experiments (J, unit mass).
pub const DEFAULT_K0: f64 = 1.0;

/// Largest `|x² + y² − r0²|` accepted by [`reset`].
pub const ON_GUARD_TOLERANCE: f64 = 1e-8;

/// Below this `|y|` the switching-surface chart is undefined.
pub const MIN_CHART_Y: f64 = 1e-9;

/// Pendulum constants and gait targets.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LipParams {
    /// Gravity, m/s².
    pub g: f64,
    /// Height of the mass plane, m.
    pub z0: f64,
    /// Sagittal foot placement target, m.
    pub x0: f64,
    /// Lateral foot placement target, m.
    pub y0: f64,
}

impl Default for LipParams {
    fn default() -> Self {
        LipParams {
            g: 9.81,
            z0: 0.8,
            x0: 0.15,
            y0: 0.2,
        }
    }
}

impl LipParams {
    pub fn new(g: f64, z0: f64, x0: f64, y0: f64) -> Result<Self> {
        let p = LipParams { g, z0, x0, y0 };
        p.validate()?;
        Ok(p)
    }

    /// Pendulum matched to a given natural frequency (`g` kept, `z0 = g/ω²`).
    pub fn from_omega(omega: f64, g: f64, x0: f64, y0: f64) -> Result<Self> {
        LipParams::new(g, g / (omega * omega), x0, y0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.g) && ok(self.z0)) {
            return Err(Error::InvalidParameter("g and z0 must be positive"));
        }
        if !(ok(self.x0) && ok(self.y0)) {
            return Err(Error::InvalidParameter("x0 and y0 must be positive"));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        (self.g / self.z0).sqrt()
    }

    pub fn omega_sq(&self) -> f64 {
        self.g / self.z0
    }

    pub fn r0_sq(&self) -> f64 {
        self.x0 * self.x0 + self.y0 * self.y0
    }

    /// `ω² x0 y0`: the pre-impact `ẋẏ` of the synchronized gait, and the
    /// lower bound on feasible kinetic energies.
    pub fn gamma_star(&self) -> f64 {
        self.omega_sq() * self.x0 * self.y0
    }

    pub fn with_targets(mut self, x0: f64, y0: f64) -> Self {
        self.x0 = x0;
        self.y0 = y0;
        self
    }
}

/// Position and velocity of the mass in the support frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LipState {
    pub x: f64,
    pub y: f64,
    pub xdot: f64,
    pub ydot: f64,
}

impl LipState {
    pub fn new(x: f64, y: f64, xdot: f64, ydot: f64) -> Self {
        LipState { x, y, xdot, ydot }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.xdot, self.ydot]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        LipState::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Largest componentwise difference.
    pub fn distance(&self, other: &LipState) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Chart `(α, γ, v)` of the switching surface, with the redundant radius.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SwitchCoords {
    /// `atan(x / y)`, radians.
    pub alpha: f64,
    /// `ẋ ẏ`, m²/s².
    pub gamma: f64,
    /// `√(ẋ² + ẏ²)`, m/s.
    pub v: f64,
    /// `√(x² + y²)`, m.
    pub r: f64,
}

impl SwitchCoords {
    pub fn to_array3(self) -> [f64; 3] {
        [self.alpha, self.gamma, self.v]
    }
}

/// Which velocity root [`from_switch_coords`] picks. Forward walking is
/// assumed (`ẋ > 0`), so the sign of `ẏ` is the sign of `γ`; what remains
/// ambiguous is which component carries the larger magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum VelocityBranch {
    /// `|ẋ| ≥ |ẏ|`; the pre-impact branch near the periodic orbit.
    SagittalDominant,
    /// `|ẋ| < |ẏ|`.
    LateralDominant,
}

impl VelocityBranch {
    pub fn of(xdot: f64, ydot: f64) -> Self {
        if xdot.abs() >= ydot.abs() {
            VelocityBranch::SagittalDominant
        } else {
            VelocityBranch::LateralDominant
        }
    }
}

/// Result of one invariant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipStepResult {
    pub duration: f64,
    pub pre_impact: LipState,
    pub post_impact: LipState,
}

/// Closed-form flow for time `t`.
pub fn flow(state: &LipState, params: &LipParams, t: f64) -> LipState {
    let w = params.omega();
    let (ch, sh) = ((w * t).cosh(), (w * t).sinh());
    LipState {
        x: state.x * ch + state.xdot / w * sh,
        y: state.y * ch + state.ydot / w * sh,
        xdot: state.x * w * sh + state.xdot * ch,
        ydot: state.y * w * sh + state.ydot * ch,
    }
}

/// `(E_x, E_y) = (ẋ² − ω²x², ẏ² − ω²y²)`.
pub fn orbital_energies(state: &LipState, params: &LipParams) -> (f64, f64) {
    let w2 = params.omega_sq();
    (
        state.xdot * state.xdot - w2 * state.x * state.x,
        state.ydot * state.ydot - w2 * state.y * state.y,
    )
}

/// Synchronization measure of a step-start state, `ẋẏ + ω² x0 y0`.
pub fn sync_measure(state: &LipState, params: &LipParams) -> f64 {
    state.xdot * state.ydot + params.gamma_star()
}

/// `ẋẏ − ω²xy`, conserved along the flow.
pub fn cross_invariant(state: &LipState, params: &LipParams) -> f64 {
    state.xdot * state.ydot - params.omega_sq() * state.x * state.y
}

/// Kinetic energy of the unit mass.
pub fn kinetic_energy(state: &LipState) -> f64 {
    0.5 * (state.xdot * state.xdot + state.ydot * state.ydot)
}

/// Switching function: `x² + y² − r0²` on the forward half-plane.
///
/// Taking the minimum with `r0·x` keeps the function continuous while
/// making crossings behind the support point impossible, so a mass that
/// falls back yields `NoCrossing` instead of a spurious step.
pub fn guard(state: &LipState, params: &LipParams) -> f64 {
    let radial = state.x * state.x + state.y * state.y - params.r0_sq();
    radial.min(params.r0_sq().sqrt() * state.x)
}

/// Leg exchange: `(x, y, ẋ, ẏ) ↦ (−x0, y0, ẋ, −ẏ)`.
pub fn reset(pre_impact: &LipState, params: &LipParams) -> Result<LipState> {
    let residual = pre_impact.x * pre_impact.x + pre_impact.y * pre_impact.y - params.r0_sq();
    if !(residual.abs() <= ON_GUARD_TOLERANCE) {
        return Err(Error::NotOnGuard { residual });
    }
    Ok(LipState {
        x: -params.x0,
        y: params.y0,
        xdot: pre_impact.xdot,
        ydot: -pre_impact.ydot,
    })
}

/// One `(x0, y0)`-invariant step from a post-impact state.
///
/// The crossing is bracketed on the exact flow, bisected to
/// `config.event_tolerance` and then polished by one Newton step on the
/// closed form, which leaves the guard residual at roundoff level.
pub fn step(start: &LipState, params: &LipParams, config: &IntegratorConfig) -> Result<LipStepResult> {
    params.validate()?;
    let ev = locate_crossing_with(
        |_t, x: &[f64; 4], tau| Ok(flow(&LipState::from_array(*x), params, tau).to_array()),
        |x: &[f64; 4]| guard(&LipState::from_array(*x), params),
        &start.to_array(),
        config,
        None,
    )?;
    let mut t = ev.time_of_crossing;
    let mut pre = LipState::from_array(ev.state_at_crossing);
    let g = pre.x * pre.x + pre.y * pre.y - params.r0_sq();
    if g > ON_GUARD_TOLERANCE.max(config.event_tolerance) {
        // passed the support line already outside the circle: a sideways fall
        return Err(Error::NoCrossing { duration: t });
    }
    let gdot = 2.0 * (pre.x * pre.xdot + pre.y * pre.ydot);
    if gdot != 0.0 {
        let dt = -g / gdot;
        let polished = flow(&pre, params, dt);
        let g2 = polished.x * polished.x + polished.y * polished.y - params.r0_sq();
        if g2.abs() < g.abs() {
            pre = polished;
            t += dt;
        }
    }
    let post = reset(&pre, params)?;
    Ok(LipStepResult {
        duration: t,
        pre_impact: pre,
        post_impact: post,
    })
}

/// Step-start state at `(−x0, y0)` with zero synchronization measure and
/// kinetic energy `k0`.
pub fn synchronized_start(params: &LipParams, k0: f64) -> Result<LipState> {
    params.validate()?;
    let bound = params.gamma_star();
    if !(k0 > bound) {
        return Err(Error::InfeasibleEnergy { k0, bound });
    }
    let root = (k0 * k0 - bound * bound).sqrt();
    let xdot = (k0 + root).sqrt();
    Ok(LipState {
        x: -params.x0,
        y: params.y0,
        xdot,
        ydot: -bound / xdot,
    })
}

/// Pre-impact state of the synchronized orbit with kinetic energy `k0`.
pub fn synchronized_pre_impact(params: &LipParams, k0: f64) -> Result<LipState> {
    let s = synchronized_start(params, k0)?;
    Ok(LipState::new(params.x0, params.y0, s.xdot, -s.ydot))
}

/// Duration of the synchronized step, `(2/ω) artanh(ω x0 / ẋ0)`.
pub fn synchronized_step_duration(params: &LipParams, k0: f64) -> Result<f64> {
    let s = synchronized_start(params, k0)?;
    let w = params.omega();
    let ratio = w * params.x0 / s.xdot;
    if ratio >= 1.0 {
        return Err(Error::InvalidParameter(
            "sagittal orbital energy is not positive on the synchronized orbit",
        ));
    }
    Ok(2.0 / w * ratio.atanh())
}

pub fn to_switch_coords(state: &LipState) -> Result<SwitchCoords> {
    if !(state.y.abs() >= MIN_CHART_Y) {
        return Err(Error::DegenerateY { y: state.y });
    }
    Ok(SwitchCoords {
        alpha: (state.x / state.y).atan(),
        gamma: state.xdot * state.ydot,
        v: state.xdot.hypot(state.ydot),
        r: state.x.hypot(state.y),
    })
}

/// Inverse chart for `y > 0` and `ẋ > 0`.
pub fn from_switch_coords(coords: &SwitchCoords, branch: VelocityBranch) -> Result<LipState> {
    let (xd, yd) = velocities_from_gamma_v(coords.gamma, coords.v, branch)?;
    Ok(LipState {
        x: coords.r * coords.alpha.sin(),
        y: coords.r * coords.alpha.cos(),
        xdot: xd,
        ydot: yd,
    })
}

/// Solves `a b = γ`, `a² + b² = v²` for `(a, b)` with `a ≥ 0`.
pub(crate) fn velocities_from_gamma_v(
    gamma: f64,
    v: f64,
    branch: VelocityBranch,
) -> Result<(f64, f64)> {
    let bound = 0.5 * v * v;
    if !(v >= 0.0) || !(gamma.abs() <= bound * (1.0 + 1e-12)) {
        return Err(Error::InconsistentCoords { gamma, bound });
    }
    let v2 = v * v;
    let disc = (v2 * v2 - 4.0 * gamma * gamma).max(0.0).sqrt();
    let big = 0.5 * (v2 + disc);
    if big == 0.0 {
        return Ok((0.0, 0.0));
    }
    let big_mag = big.sqrt();
    let small = gamma / big_mag;
    Ok(match branch {
        VelocityBranch::SagittalDominant => (big_mag, small),
        VelocityBranch::LateralDominant => {
            // a = |γ| / b_mag, sign of b follows γ
            let a = small.abs();
            let b = if gamma >= 0.0 { big_mag } else { -big_mag };
            (a, b)
        }
    })
}

/// The pendulum as a [`HybridModel`] on `(x, y, ẋ, ẏ)`.
#[derive(Debug, Clone, Copy)]
pub struct LipModel {
    pub params: LipParams,
    /// Propagate with the closed form instead of RK4.
    pub closed_form: bool,
}

impl HybridModel<4> for LipModel {
    fn flow(&self, _t: f64, x: &[f64; 4]) -> Result<[f64; 4]> {
        let w2 = self.params.omega_sq();
        Ok([x[2], x[3], w2 * x[0], w2 * x[1]])
    }

    fn guard(&self, x: &[f64; 4]) -> f64 {
        guard(&LipState::from_array(*x), &self.params)
    }

    fn reset(&self, x: &[f64; 4]) -> Result<[f64; 4]> {
        reset(&LipState::from_array(*x), &self.params).map(LipState::to_array)
    }

    fn advance(&self, t: f64, x: &[f64; 4], tau: f64) -> Result<[f64; 4]> {
        if self.closed_form {
            Ok(flow(&LipState::from_array(*x), &self.params, tau).to_array())
        } else {
            crate::hybrid::rk4_step(&mut |t, x: &[f64; 4]| self.flow(t, x), t, x, tau)
        }
    }
}
