use gaitlab_core::hybrid::{run_hybrid, IntegratorConfig};
use gaitlab_core::lip::{
    cross_invariant, flow, from_switch_coords, kinetic_energy, orbital_energies, reset, step,
    sync_measure, synchronized_start, synchronized_step_duration, to_switch_coords, LipModel,
    LipParams, LipState, SwitchCoords, VelocityBranch,
};
use gaitlab_core::Error;
use proptest::prelude::*;

/// Plain RK4 on `ẍ = ω²x`, `ÿ = ω²y`, written out here rather than taken
/// from the crate.
fn rk4_oracle(s: [f64; 4], w2: f64, t: f64, n: usize) -> [f64; 4] {
    let f = |x: [f64; 4]| [x[2], x[3], w2 * x[0], w2 * x[1]];
    let h = t / n as f64;
    let mut x = s;
    for _ in 0..n {
        let k1 = f(x);
        let k2 = f(core::array::from_fn(|i| x[i] + 0.5 * h * k1[i]));
        let k3 = f(core::array::from_fn(|i| x[i] + 0.5 * h * k2[i]));
        let k4 = f(core::array::from_fn(|i| x[i] + h * k3[i]));
        x = core::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    x
}

/// Larger root of `a² + (c/a)² = 2k` by bisection.
fn sync_xdot_oracle(c: f64, k: f64) -> f64 {
    let f = |a: f64| a * a + c * c / (a * a) - 2.0 * k;
    let (mut lo, mut hi) = (c.abs().sqrt(), (2.0 * k).sqrt() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn params() -> impl Strategy<Value = LipParams> {
    (0.6..1.0f64, 0.08..0.2f64, 0.12..0.3f64)
        .prop_map(|(z0, x0, y0)| LipParams::new(9.81, z0, x0, y0).unwrap())
}

/// Post-impact start states that walk forward.
fn forward_start() -> impl Strategy<Value = (LipParams, LipState)> {
    params().prop_flat_map(|p| {
        let w = p.omega();
        let min_xdot = 1.2 * w * p.x0;
        ((min_xdot..min_xdot + 1.5), -1.0..1.0f64).prop_map(move |(xd, yd)| {
            (p, LipState::new(-p.x0, p.y0, xd, yd))
        })
    })
}

#[test]
fn closed_form_matches_rk4_oracle() {
    let p = LipParams::default();
    let s = LipState::new(-0.15, 0.2, 0.9, -0.4);
    for t in [0.05, 0.2, 0.5] {
        let a = flow(&s, &p, t).to_array();
        let b = rk4_oracle(s.to_array(), p.omega_sq(), t, 20_000);
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-11, "t={t}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn synchronized_start_matches_bisection_oracle() {
    let p = LipParams::default();
    for k0 in [0.4, 0.5, 1.0, 2.0] {
        let s = synchronized_start(&p, k0).unwrap();
        let xd = sync_xdot_oracle(p.omega_sq() * p.x0 * p.y0, k0);
        assert!((s.xdot - xd).abs() < 1e-12, "k0={k0}");
        assert!(sync_measure(&s, &p).abs() < 1e-14);
        assert!((kinetic_energy(&s) - k0).abs() < 1e-13);
    }
}

#[test]
fn synchronized_duration_matches_located_step() {
    let p = LipParams::default();
    let s = synchronized_start(&p, 1.0).unwrap();
    let r = step(&s, &p, &IntegratorConfig::default()).unwrap();
    let t = synchronized_step_duration(&p, 1.0).unwrap();
    assert!((r.duration - t).abs() < 1e-9);
    // the synchronized pre-impact state is mirror symmetric
    assert!((r.pre_impact.x - p.x0).abs() < 1e-9);
    assert!((r.pre_impact.ydot + s.ydot).abs() < 1e-9);
}

#[test]
fn rk4_hybrid_run_agrees_with_closed_form_steps() {
    let p = LipParams::default();
    let cfg = IntegratorConfig::default().with_step_size(1e-3);
    let start = synchronized_start(&p, 1.0).unwrap();
    let mut exact = start;
    for _ in 0..3 {
        exact = step(&exact, &p, &cfg).unwrap().post_impact;
    }
    for closed_form in [false, true] {
        let model = LipModel {
            params: p,
            closed_form,
        };
        let trace = run_hybrid(&model, &start.to_array(), 3, &cfg);
        assert!(trace.failure.is_none());
        assert_eq!(trace.events.len(), 3);
        let last = LipState::from_array(trace.events[2].post_impact);
        assert!(last.distance(&exact) < 1e-8, "{last:?} vs {exact:?}");
    }
}

#[test]
fn sideways_fall_reports_no_crossing() {
    let p = LipParams::default();
    let s = LipState::new(-p.x0, p.y0, 0.8, 1.5);
    let err = step(&s, &p, &IntegratorConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NoCrossing { .. }), "{err:?}");
}

#[test]
fn backward_fall_reports_no_crossing() {
    let p = LipParams::default();
    let s = LipState::new(-p.x0, p.y0, 0.2, -0.1);
    let err = step(&s, &p, &IntegratorConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NoCrossing { .. }), "{err:?}");
}

proptest! {
    #[test]
    fn flow_conserves_energies_and_cross_term(
        (p, s) in forward_start(),
        t in 0.0..0.6f64,
    ) {
        let a = flow(&s, &p, t);
        let (ex0, ey0) = orbital_energies(&s, &p);
        let (ex1, ey1) = orbital_energies(&a, &p);
        let scale = 1.0 + ex0.abs() + ey0.abs();
        prop_assert!((ex1 - ex0).abs() <= 1e-12 * scale);
        prop_assert!((ey1 - ey0).abs() <= 1e-12 * scale);
        let c0 = cross_invariant(&s, &p);
        prop_assert!((cross_invariant(&a, &p) - c0).abs() <= 1e-12 * scale);
    }

    #[test]
    fn step_preserves_kinetic_energy((p, s) in forward_start()) {
        let r = match step(&s, &p, &IntegratorConfig::default()) {
            Ok(r) => r,
            Err(e) => {
                // only a sideways fall may end a forward start
                prop_assert!(matches!(e, Error::NoCrossing { .. }), "{:?}", e);
                return Ok(());
            }
        };
        prop_assert!((kinetic_energy(&r.post_impact) - kinetic_energy(&s)).abs() <= 1e-10);
        prop_assert!(r.duration > 0.0);
        prop_assert!(r.pre_impact.x > 0.0);
        let radial = r.pre_impact.x.hypot(r.pre_impact.y) - p.r0_sq().sqrt();
        prop_assert!(radial.abs() < 1e-12);
    }

    #[test]
    fn reset_places_the_new_step_start((p, s) in forward_start()) {
        let Ok(r) = step(&s, &p, &IntegratorConfig::default()) else {
            return Ok(());
        };
        let pre = r.pre_impact;
        let post = reset(&pre, &p).unwrap();
        prop_assert_eq!((post.x, post.y), (-p.x0, p.y0));
        prop_assert_eq!(post.xdot, pre.xdot);
        prop_assert_eq!(post.ydot, -pre.ydot);
    }

    #[test]
    fn chart_round_trip(
        r in 0.1..0.5f64,
        alpha in -1.2..1.2f64,
        xd in 0.01..2.0f64,
        yd in -2.0..2.0f64,
    ) {
        let s = LipState::new(r * alpha.sin(), r * alpha.cos(), xd, yd);
        let c: SwitchCoords = to_switch_coords(&s).unwrap();
        let back = from_switch_coords(&c, VelocityBranch::of(xd, yd)).unwrap();
        prop_assert!(back.distance(&s) < 1e-9 * (1.0 + xd + yd.abs()));
    }
}
