//! Shared hybrid-system machinery: fixed-step RK4, guard-crossing location
//! and the flow/guard/reset execution loop.
//!
//! Guards fire on negative-to-positive transitions only, and only after the
//! guard value has first dropped below `-arming_threshold`. Every reset in
//! this crate lands exactly on its switching surface, so an unarmed guard
//! would otherwise retrigger at `t = 0`.

use alloc::vec;
use alloc::vec::Vec;


use crate::{Error, Result};

const MAX_BISECTIONS: usize = 200;

/// Step size and event-location settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IntegratorConfig {
    /// Fixed RK4 step, seconds.
    pub step_size: f64,
    /// Required `|g|` at a located crossing.
    pub event_tolerance: f64,
    /// The guard is armed once it drops below `-arming_threshold`.
    pub arming_threshold: f64,
    /// Longest continuous phase before giving up, seconds.
    pub max_step_duration: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step_size: 1e-3,
            event_tolerance: 1e-10,
            arming_threshold: 1e-6,
            max_step_duration: 5.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.step_size,
            self.event_tolerance,
            self.arming_threshold,
            self.max_step_duration,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidParameter(
                "integrator settings must be finite and strictly positive",
            ));
        }
        if self.event_tolerance >= self.arming_threshold {
            return Err(Error::InvalidParameter(
                "event tolerance must be below the arming threshold",
            ));
        }
        Ok(())
    }

    pub fn with_step_size(mut self, h: f64) -> Self {
        self.step_size = h;
        self
    }

    pub fn with_event_tolerance(mut self, tol: f64) -> Self {
        self.event_tolerance = tol;
        self
    }
}

/// A located switching-surface crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardEvent<const N: usize> {
    /// Time since the start of the continuous phase.
    pub time_of_crossing: f64,
    pub state_at_crossing: [f64; N],
    pub guard_value_residual: f64,
}

/// One discrete transition of a hybrid execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactRecord<const N: usize> {
    /// Absolute time of the impact.
    pub time: f64,
    pub pre_impact: [f64; N],
    pub post_impact: [f64; N],
}

/// Samples and impacts of a hybrid execution.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridTrace<const N: usize> {
    /// One sample list per continuous phase, absolute time.
    pub phases: Vec<Vec<(f64, [f64; N])>>,
    pub events: Vec<ImpactRecord<N>>,
    /// First error that stopped the run, if any.
    pub failure: Option<Error>,
}

impl<const N: usize> HybridTrace<N> {
    pub fn sample_count(&self) -> usize {
        self.phases.iter().map(Vec::len).sum()
    }

    pub fn final_state(&self) -> Option<&[f64; N]> {
        self.phases.last().and_then(|p| p.last()).map(|(_, x)| x)
    }
}

/// A hybrid system: flow on the continuous phase, a scalar guard and a reset.
///
/// `t` passed to `flow` is the time since the start of the current
/// continuous phase, so phase-based controllers can be written directly.
pub trait HybridModel<const N: usize> {
    fn flow(&self, t: f64, x: &[f64; N]) -> Result<[f64; N]>;

    fn guard(&self, x: &[f64; N]) -> f64;

    fn reset(&self, x: &[f64; N]) -> Result<[f64; N]>;

    /// State at `t + tau` from `(t, x)`. Models with a closed-form flow can
    /// override the RK4 default.
    fn advance(&self, t: f64, x: &[f64; N], tau: f64) -> Result<[f64; N]> {
        rk4_step(&mut |t, x: &[f64; N]| self.flow(t, x), t, x, tau)
    }
}

fn check_finite<const N: usize>(x: &[f64; N], time: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { time })
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(f: &mut F, t: f64, x: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let axpy = |x: &[f64; N], k: &[f64; N], a: f64| {
        let mut out = *x;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += a * ki;
        }
        out
    };
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &axpy(x, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &axpy(x, &k2, 0.5 * h))?;
    let k4 = f(t + h, &axpy(x, &k3, h))?;
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    check_finite(&out, t + h)?;
    Ok(out)
}

/// Integrates `x' = f(t, x)` over `[0, duration]` with fixed RK4 steps,
/// shortening the last step to land on `duration`. Returns every sample,
/// starting with `(0, x0)`.
pub fn integrate_fixed_step<const N: usize, F>(
    mut f: F,
    x0: &[f64; N],
    duration: f64,
    config: &IntegratorConfig,
) -> Result<Vec<(f64, [f64; N])>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    if !(duration >= 0.0) {
        return Err(Error::InvalidParameter("duration must be non-negative"));
    }
    config.validate()?;
    check_finite(x0, 0.0)?;
    let h = config.step_size;
    let mut samples = vec![(0.0, *x0)];
    let mut x = *x0;
    let mut k = 0u64;
    loop {
        let t = k as f64 * h;
        if t >= duration {
            break;
        }
        let tau = h.min(duration - t);
        x = rk4_step(&mut f, t, &x, tau)?;
        k += 1;
        let t_next = if tau < h { duration } else { k as f64 * h };
        samples.push((t_next, x));
        if tau < h {
            break;
        }
    }
    Ok(samples)
}

/// Locates the first armed negative-to-positive crossing of `guard` along
/// the RK4 flow of `f` from `x0`.
pub fn locate_guard_crossing<const N: usize, F, G>(
    mut f: F,
    guard: G,
    x0: &[f64; N],
    config: &IntegratorConfig,
) -> Result<GuardEvent<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    G: FnMut(&[f64; N]) -> f64,
{
    locate_crossing_with(
        |t, x: &[f64; N], tau| rk4_step(&mut f, t, x, tau),
        guard,
        x0,
        config,
        None,
    )
}

/// Event location over an arbitrary propagator.
///
/// `advance(t, x, tau)` must return the state at `t + tau` given the state
/// `x` at `t`; it is called with `tau <= step_size`. Samples at the fixed
/// grid (excluding the crossing itself) are appended to `record` when given.
pub fn locate_crossing_with<const N: usize, A, G>(
    mut advance: A,
    mut guard: G,
    x0: &[f64; N],
    config: &IntegratorConfig,
    mut record: Option<&mut Vec<(f64, [f64; N])>>,
) -> Result<GuardEvent<N>>
where
    A: FnMut(f64, &[f64; N], f64) -> Result<[f64; N]>,
    G: FnMut(&[f64; N]) -> f64,
{
    config.validate()?;
    check_finite(x0, 0.0)?;
    let h = config.step_size;
    let t_max = config.max_step_duration;
    let mut x = *x0;
    let mut g = guard(&x);
    let mut armed = g < -config.arming_threshold;
    let mut k = 0u64;
    if let Some(rec) = record.as_deref_mut() {
        rec.push((0.0, x));
    }
    loop {
        let t = k as f64 * h;
        if t >= t_max {
            break;
        }
        let tau = h.min(t_max - t);
        let xn = advance(t, &x, tau)?;
        check_finite(&xn, t + tau)?;
        let gn = guard(&xn);
        if armed && g < 0.0 && gn >= 0.0 {
            return refine_crossing(&mut advance, &mut guard, t, &x, tau, gn, xn, config);
        }
        if gn < -config.arming_threshold {
            armed = true;
        }
        k += 1;
        x = xn;
        g = gn;
        if let Some(rec) = record.as_deref_mut() {
            rec.push((t + tau, x));
        }
    }
    if armed {
        Err(Error::NoCrossing { duration: t_max })
    } else {
        Err(Error::NotArmed { duration: t_max })
    }
}

#[allow(clippy::too_many_arguments)]
fn refine_crossing<const N: usize, A, G>(
    advance: &mut A,
    guard: &mut G,
    t: f64,
    x: &[f64; N],
    tau: f64,
    g_hi: f64,
    x_hi: [f64; N],
    config: &IntegratorConfig,
) -> Result<GuardEvent<N>>
where
    A: FnMut(f64, &[f64; N], f64) -> Result<[f64; N]>,
    G: FnMut(&[f64; N]) -> f64,
{
    let tol = config.event_tolerance;
    if g_hi.abs() <= tol {
        return Ok(GuardEvent {
            time_of_crossing: t + tau,
            state_at_crossing: x_hi,
            guard_value_residual: g_hi,
        });
    }
    let (mut lo, mut hi) = (0.0, tau);
    let mut best = (f64::INFINITY, 0.0, *x);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let xm = advance(t, x, mid)?;
        check_finite(&xm, t + mid)?;
        let gm = guard(&xm);
        if gm.abs() < best.0 {
            best = (gm.abs(), mid, xm);
        }
        if gm.abs() <= tol {
            return Ok(GuardEvent {
                time_of_crossing: t + mid,
                state_at_crossing: xm,
                guard_value_residual: gm,
            });
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::EventNotResolved { residual: best.0 })
}

/// Runs `n_steps` flow/guard/reset cycles from `x0`. Stops at the first
/// error, which is stored in [`HybridTrace::failure`].
pub fn run_hybrid<const N: usize, M: HybridModel<N>>(
    model: &M,
    x0: &[f64; N],
    n_steps: usize,
    config: &IntegratorConfig,
) -> HybridTrace<N> {
    let mut trace = HybridTrace {
        phases: Vec::new(),
        events: Vec::new(),
        failure: None,
    };
    if let Err(e) = config.validate().and_then(|_| check_finite(x0, 0.0)) {
        trace.phases.push(vec![(0.0, *x0)]);
        trace.failure = Some(e);
        return trace;
    }
    if n_steps == 0 {
        trace.phases.push(vec![(0.0, *x0)]);
        return trace;
    }
    let mut t0 = 0.0;
    let mut x = *x0;
    for _ in 0..n_steps {
        let mut samples = Vec::new();
        let located = locate_crossing_with(
            |t, x: &[f64; N], tau| model.advance(t, x, tau),
            |x: &[f64; N]| model.guard(x),
            &x,
            config,
            Some(&mut samples),
        );
        let mut phase: Vec<(f64, [f64; N])> =
            samples.into_iter().map(|(t, s)| (t0 + t, s)).collect();
        let event = match located {
            Ok(ev) => ev,
            Err(e) => {
                trace.phases.push(phase);
                trace.failure = Some(e);
                return trace;
            }
        };
        let t_impact = t0 + event.time_of_crossing;
        phase.push((t_impact, event.state_at_crossing));
        trace.phases.push(phase);
        let post = match model.reset(&event.state_at_crossing) {
            Ok(p) => p,
            Err(e) => {
                trace.failure = Some(e);
                return trace;
            }
        };
        trace.events.push(ImpactRecord {
            time: t_impact,
            pre_impact: event.state_at_crossing,
            post_impact: post,
        });
        t0 = t_impact;
        x = post;
    }
    trace.phases.push(vec![(t0, x)]);
    trace
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_growth(_t: f64, x: &[f64; 1]) -> Result<[f64; 1]> {
        Ok([x[0]])
    }

    #[test]
    fn constant_field_leaves_state_unchanged() {
        let cfg = IntegratorConfig::default();
        let s = integrate_fixed_step(|_, _: &[f64; 3]| Ok([0.0; 3]), &[1.0, -2.0, 3.0], 1.0, &cfg)
            .unwrap();
        assert_eq!(s.last().unwrap().1, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn exponential_matches_e() {
        let cfg = IntegratorConfig::default();
        let s = integrate_fixed_step(exp_growth, &[1.0], 1.0, &cfg).unwrap();
        let (t, x) = s.last().unwrap();
        assert_eq!(*t, 1.0);
        assert!((x[0] - core::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn partial_final_step_lands_on_duration() {
        let cfg = IntegratorConfig::default().with_step_size(0.3);
        let s = integrate_fixed_step(exp_growth, &[1.0], 1.0, &cfg).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.last().unwrap().0, 1.0);
    }

    #[test]
    fn zero_duration_returns_initial_sample() {
        let cfg = IntegratorConfig::default();
        let s = integrate_fixed_step(exp_growth, &[2.0], 0.0, &cfg).unwrap();
        assert_eq!(s, vec![(0.0, [2.0])]);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let cfg = IntegratorConfig::default();
        let r = integrate_fixed_step(|_, _: &[f64; 1]| Ok([f64::NAN]), &[0.0], 1.0, &cfg);
        assert!(matches!(r, Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn linear_motion_crossing() {
        let cfg = IntegratorConfig::default();
        let ev = locate_guard_crossing(|_, _: &[f64; 1]| Ok([1.0]), |x| x[0] - 1.0, &[-1.0], &cfg)
            .unwrap();
        assert!((ev.time_of_crossing - 2.0).abs() < 1e-9);
        assert!(ev.guard_value_residual.abs() <= cfg.event_tolerance);
    }

    #[test]
    fn unarmed_guard_reports_not_armed() {
        let cfg = IntegratorConfig {
            max_step_duration: 0.5,
            ..Default::default()
        };
        // starts on the surface and moves away
        let r = locate_guard_crossing(|_, _: &[f64; 1]| Ok([1.0]), |x| x[0], &[0.0], &cfg);
        assert!(matches!(r, Err(Error::NotArmed { .. })));
    }

    #[test]
    fn armed_but_never_crossing_reports_no_crossing() {
        let cfg = IntegratorConfig {
            max_step_duration: 0.5,
            ..Default::default()
        };
        let r = locate_guard_crossing(|_, _: &[f64; 1]| Ok([-1.0]), |x| x[0], &[0.0], &cfg);
        assert!(matches!(r, Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn positive_to_negative_does_not_fire() {
        let cfg = IntegratorConfig {
            max_step_duration: 3.0,
            ..Default::default()
        };
        let r = locate_guard_crossing(|_, _: &[f64; 1]| Ok([-1.0]), |x| x[0], &[1.0], &cfg);
        assert!(matches!(r, Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        let bad = IntegratorConfig {
            event_tolerance: 1e-3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = IntegratorConfig {
            step_size: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    struct Bouncer;

    // x' = -1 on a line, guard fires at x = -1, reset jumps back to 0.
    impl HybridModel<1> for Bouncer {
        fn flow(&self, _t: f64, _x: &[f64; 1]) -> Result<[f64; 1]> {
            Ok([-1.0])
        }
        fn guard(&self, x: &[f64; 1]) -> f64 {
            -1.0 - x[0]
        }
        fn reset(&self, _x: &[f64; 1]) -> Result<[f64; 1]> {
            Ok([0.0])
        }
    }

    #[test]
    fn run_hybrid_zero_steps() {
        let tr = run_hybrid(&Bouncer, &[0.0], 0, &IntegratorConfig::default());
        assert_eq!(tr.sample_count(), 1);
        assert!(tr.events.is_empty());
        assert!(tr.failure.is_none());
    }

    #[test]
    fn run_hybrid_counts_events_in_time_order() {
        let tr = run_hybrid(&Bouncer, &[0.0], 4, &IntegratorConfig::default());
        assert!(tr.failure.is_none());
        assert_eq!(tr.events.len(), 4);
        for (i, ev) in tr.events.iter().enumerate() {
            assert!((ev.time - (i + 1) as f64).abs() < 1e-9);
            assert_eq!(ev.post_impact, [0.0]);
        }
    }
}
