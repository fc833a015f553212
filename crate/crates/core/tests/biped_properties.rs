use gaitlab_core::biped::{
    bias, dynamics, forward_kinematics, impact_map, impact_velocity, kinetic_energy, mass_matrix,
    relabel_vector, swing_foot_jacobian, to_quasi, total_energy, BipedParams, BipedState,
    GaitSpec, StanceLeg, DOF,
};
use gaitlab_core::biped_analysis::lift_to_full_state;
use gaitlab_core::control::{ClosedLoop, ControlConfig, Controller};
use gaitlab_core::hybrid::HybridModel;
use gaitlab_core::lip::{step, synchronized_start};
use gaitlab_core::Error;
use proptest::prelude::*;

fn config_q() -> impl Strategy<Value = [f64; DOF]> {
    (
        (-3.0..3.0f64, -0.3..0.3f64, -0.3..0.3f64),
        (-0.6..0.6f64, -0.3..0.3f64, 0.05..2.5f64),
        (-0.6..0.6f64, -0.3..0.3f64, 0.05..2.5f64),
    )
        .prop_map(|(t, s, w)| [t.0, t.1, t.2, s.0, s.1, s.2, w.0, w.1, w.2])
}

fn rates() -> impl Strategy<Value = [f64; DOF]> {
    prop::array::uniform9(-1.5..1.5f64)
}

fn norm_sq(v: &[f64; 3]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn leg_sq_oracle(p: &BipedParams, knee: f64) -> f64 {
    let (a, b, h) = (p.l1, p.l2, 0.5 * p.w);
    a * a + b * b + h * h + 2.0 * a * b * knee.cos()
}

/// Cholesky without pivoting; `None` if a pivot is not positive.
fn cholesky_ok(a: &gaitlab_core::linalg::Matrix) -> bool {
    let n = a.rows();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                if d.is_nan() || d <= 0.0 {
                    return false;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[(i, j)] - s) / l[j][j];
            }
        }
    }
    true
}

fn rk4_passive(state: &BipedState, p: &BipedParams, h: f64, n: usize) -> BipedState {
    let f = |x: &[f64; 2 * DOF]| {
        let s = BipedState::from_array(x, StanceLeg::Right);
        let a = dynamics(&s, &[0.0; 6], p).unwrap();
        let mut d = [0.0; 2 * DOF];
        d[..DOF].copy_from_slice(&s.qdot);
        d[DOF..].copy_from_slice(&a);
        d
    };
    let mut x = state.to_array();
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&core::array::from_fn(|i| x[i] + 0.5 * h * k1[i]));
        let k3 = f(&core::array::from_fn(|i| x[i] + 0.5 * h * k2[i]));
        let k4 = f(&core::array::from_fn(|i| x[i] + h * k3[i]));
        x = core::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    BipedState::from_array(&x, StanceLeg::Right)
}

fn gait_state() -> (BipedParams, GaitSpec, BipedState) {
    let p = BipedParams::default();
    let g = GaitSpec::default();
    let xr = [(g.x0 / g.y0).atan(), 0.25, 0.2, 1.0];
    (p, g, lift_to_full_state(&xr, &g, &p).unwrap())
}

#[test]
fn passive_energy_drift_is_small() {
    let p = BipedParams::default();
    let s = BipedState::new(
        [0.1, 0.05, 0.1, -0.2, -0.02, 0.3, 0.25, 0.03, 0.4],
        [0.3, -0.2, 0.1, 0.5, 0.1, -0.3, -0.4, 0.2, 0.6],
        StanceLeg::Right,
    );
    let e0 = total_energy(&s, &p);
    let end = rk4_passive(&s, &p, 1e-4, 5000);
    let e1 = total_energy(&end, &p);
    assert!(((e1 - e0) / e0).abs() <= 1e-6, "{e0} -> {e1}");
}

#[test]
fn double_support_height_matches_leg_geometry() {
    let (p, g, s) = gait_state();
    let r1_sq = leg_sq_oracle(&p, g.q_k_d);
    let z0 = (r1_sq - g.x0 * g.x0 - g.y0 * g.y0).sqrt();
    let fk = forward_kinematics(&s.q, &p);
    assert!((fk.yaw.hip[2] - z0).abs() < 1e-10);
    assert!((g.z0(&p) - z0).abs() < 1e-12);
    assert!(fk.stance.swing_foot[2].abs() < 1e-10);
}

#[test]
fn impact_on_guard_and_off_guard() {
    let (p, _, s) = gait_state();
    let post = impact_map(&s, &p, 1e-8).unwrap();
    assert_eq!(post.stance_leg, StanceLeg::Left);
    // the new stance foot is the old swing foot, so the new swing foot is
    // the old stance foot, at rest on the ground
    let fk = forward_kinematics(&post.q, &p);
    assert!(fk.stance.swing_foot[2].abs() < 1e-10);
    let mut lifted = s;
    lifted.q[8] += 0.1;
    assert!(matches!(
        impact_map(&lifted, &p, 1e-8),
        Err(Error::NotOnGuard { .. })
    ));
}

#[test]
fn nominal_period_matches_lip_step() {
    let p = BipedParams::default();
    let cfg = ControlConfig::default();
    let c = Controller::new(&p, &cfg).unwrap();
    let lip = cfg.matched_lip(&p).unwrap();
    let start = synchronized_start(&lip, cfg.nominal_k0).unwrap();
    let r = step(&start, &lip, &Default::default()).unwrap();
    assert!((c.t_nominal - r.duration).abs() < 1e-9);
}

#[test]
fn zero_outputs_are_held() {
    let (p, _, s) = gait_state();
    let model = ClosedLoop::new(&p, &ControlConfig::default()).unwrap();
    let c = &model.controller;
    let t = c.t_nominal;
    let y = c.outputs(&s, t);
    assert!(y.max_error() < 1e-10, "{y:?}");
    let next = model.advance(t, &s.to_array(), 1e-3).unwrap();
    let after = c.outputs(&BipedState::from_array(&next, StanceLeg::Right), t + 1e-3);
    assert!(after.max_error() < 1e-8, "{after:?}");
}

#[test]
fn roll_error_shows_in_first_posture_output() {
    let (p, _, mut s) = gait_state();
    let c = Controller::new(&p, &ControlConfig::default()).unwrap();
    s.q[1] += 0.1;
    let y1 = c.outputs(&s, c.t_nominal).y1();
    assert!((y1[0] - 0.1).abs() < 1e-12);
    assert!(y1[1].abs() < 1e-12 && y1[2].abs() < 1e-12);
}

#[test]
fn clearance_vanishes_after_split() {
    let (p, g, s) = gait_state();
    let cfg = ControlConfig::default();
    let c = Controller::new(&p, &cfg).unwrap();
    assert_eq!(s.q[8], g.q_k_d);
    let at_split = c.outputs(&s, cfg.phase_split * c.t_nominal);
    assert_eq!(at_split.y[5], 0.0);
    let early = c.outputs(&s, 0.25 * cfg.phase_split * c.t_nominal);
    assert!(early.y[5] < -0.1);
}

#[test]
fn torques_saturate() {
    let (p, _, mut s) = gait_state();
    s.q[1] += 0.2;
    let cfg = ControlConfig {
        torque_limit: 5.0,
        ..Default::default()
    };
    let c = Controller::new(&p, &cfg).unwrap();
    let e = c.evaluate(&s, 0.0).unwrap();
    assert!(e.saturated);
    assert!(e.u.iter().all(|u| u.abs() <= 5.0));
    assert!(e.u.iter().any(|u| u.abs() == 5.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn leg_norm_identities(q in config_q()) {
        let p = BipedParams::default();
        let fk = forward_kinematics(&q, &p);
        prop_assert!((norm_sq(&fk.stance.hip) - leg_sq_oracle(&p, q[5])).abs() < 1e-12);
        prop_assert!((norm_sq(&fk.stance.swing_rel) - leg_sq_oracle(&p, q[8])).abs() < 1e-12);
        prop_assert!((norm_sq(&fk.yaw.swing_rel) - leg_sq_oracle(&p, q[8])).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(q in config_q()) {
        let d = mass_matrix(&q, &BipedParams::default());
        for i in 0..DOF {
            for j in 0..DOF {
                prop_assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
        prop_assert!(cholesky_ok(&d));
    }

    #[test]
    fn impact_zeroes_foot_velocity_and_dissipates(q in config_q(), qd in rates()) {
        let p = BipedParams::default();
        let plus = impact_velocity(&q, &qd, &p).unwrap();
        let vf = swing_foot_jacobian(&q, &p).mul_vec(&plus);
        prop_assert!(vf.iter().all(|v| v.abs() <= 1e-10), "{:?}", vf);
        let before = kinetic_energy(&BipedState::new(q, qd, StanceLeg::Right), &p);
        let after = kinetic_energy(&BipedState::new(q, plus, StanceLeg::Right), &p);
        prop_assert!(after <= before * (1.0 + 1e-12));
    }

    #[test]
    fn yaw_is_cyclic(q in config_q(), qd in rates(), shift in -3.0..3.0f64) {
        let p = BipedParams::default();
        let mut moved = q;
        moved[0] += shift;
        let scale = |a: f64| 1e-10 * (1.0 + a.abs());
        let (d0, d1) = (mass_matrix(&q, &p), mass_matrix(&moved, &p));
        for i in 0..DOF {
            for j in 0..DOF {
                prop_assert!((d0[(i, j)] - d1[(i, j)]).abs() <= scale(d0[(i, j)]));
            }
        }
        let (h0, h1) = (bias(&q, &qd, &p), bias(&moved, &qd, &p));
        for i in 0..DOF {
            prop_assert!((h0[i] - h1[i]).abs() <= scale(h0[i]));
        }
        let (a, b) = (impact_velocity(&q, &qd, &p).unwrap(), impact_velocity(&moved, &qd, &p).unwrap());
        for i in 0..DOF {
            prop_assert!((a[i] - b[i]).abs() <= scale(a[i]));
        }
        let e0 = total_energy(&BipedState::new(q, qd, StanceLeg::Right), &p);
        let e1 = total_energy(&BipedState::new(moved, qd, StanceLeg::Right), &p);
        prop_assert!((e0 - e1).abs() <= scale(e0));
    }

    #[test]
    fn quasi_coordinates_ignore_yaw_except_its_own(q in config_q(), qd in rates(), shift in -1.0..1.0f64) {
        let p = BipedParams::default();
        let s = BipedState::new(q, qd, StanceLeg::Right);
        let (Ok(a), Ok(b)) = (to_quasi(&s, &p), to_quasi(&s.with_yaw_offset(shift), &p)) else {
            return Ok(());
        };
        let (xa, xb) = (a.xi(), b.xi());
        prop_assert!((xb[0] - xa[0] - shift).abs() < 1e-12);
        for i in 1..9 {
            prop_assert!((xa[i] - xb[i]).abs() < 1e-10);
        }
        let (za, zb) = (a.zeta(), b.zeta());
        for i in 0..9 {
            prop_assert!((za[i] - zb[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn relabel_twice_is_identity(v in rates()) {
        prop_assert_eq!(relabel_vector(&relabel_vector(&v)), v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn control_law_ignores_yaw(shift in -3.0..3.0f64, elapsed in 0.0..0.4f64, dq in rates()) {
        let (p, _, s) = gait_state();
        let c = Controller::new(&p, &ControlConfig::default()).unwrap();
        let mut s = s;
        for (v, d) in s.qdot.iter_mut().zip(dq) {
            *v += 0.1 * d;
        }
        let a = c.control_law(&s, elapsed).unwrap();
        let b = c.control_law(&s.with_yaw_offset(shift), elapsed).unwrap();
        for i in 0..6 {
            prop_assert!((a[i] - b[i]).abs() <= 1e-10 * (1.0 + a[i].abs()), "{:?} {:?}", a, b);
        }
    }
}
