//! Kinematic chain, written once over [`Scalar`] so the same code yields
//! positions, Jacobian columns and bias accelerations.

use crate::jet::{Jet, Scalar};
use crate::linalg::Matrix;

use super::{BipedParams, StanceLeg, DOF};

pub(crate) type V3<S> = [S; 3];
pub(crate) type M3<S> = [[S; 3]; 3];

/// Mass-carrying points plus the swing foot.
pub(crate) const STANCE_THIGH: usize = 0;
pub(crate) const STANCE_SHIN: usize = 1;
pub(crate) const SWING_THIGH: usize = 2;
pub(crate) const SWING_SHIN: usize = 3;
pub(crate) const TORSO: usize = 4;
pub(crate) const SWING_FOOT: usize = 5;
pub(crate) const N_POINTS: usize = 6;

pub(crate) fn rot_x<S: Scalar>(a: S) -> M3<S> {
    let (s, c) = (a.sin(), a.cos());
    let (o, i) = (S::cst(0.0), S::cst(1.0));
    [[i, o, o], [o, c, -s], [o, s, c]]
}

pub(crate) fn rot_y<S: Scalar>(a: S) -> M3<S> {
    let (s, c) = (a.sin(), a.cos());
    let (o, i) = (S::cst(0.0), S::cst(1.0));
    [[c, o, s], [o, i, o], [-s, o, c]]
}

pub(crate) fn rot_z<S: Scalar>(a: S) -> M3<S> {
    let (s, c) = (a.sin(), a.cos());
    let (o, i) = (S::cst(0.0), S::cst(1.0));
    [[c, -s, o], [s, c, o], [o, o, i]]
}

pub(crate) fn mat_mul<S: Scalar>(a: &M3<S>, b: &M3<S>) -> M3<S> {
    let mut m = [[S::cst(0.0); 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    m
}

pub(crate) fn mat_vec<S: Scalar>(a: &M3<S>, v: &V3<S>) -> V3<S> {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub(crate) fn mat_t_vec<S: Scalar>(a: &M3<S>, v: &V3<S>) -> V3<S> {
    [
        a[0][0] * v[0] + a[1][0] * v[1] + a[2][0] * v[2],
        a[0][1] * v[0] + a[1][1] * v[1] + a[2][1] * v[2],
        a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2],
    ]
}

fn add<S: Scalar>(a: V3<S>, b: V3<S>) -> V3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Point on a leg in torso coordinates, relative to the hip centre.
/// `thigh` and `shin` are the fractions of each link travelled.
fn leg_point<S: Scalar>(
    p: &BipedParams,
    side: f64,
    pitch: S,
    roll: S,
    knee: S,
    thigh: f64,
    shin: f64,
) -> V3<S> {
    let shin_angle = pitch + knee;
    let x = -(pitch.sin().scale(p.l2 * thigh) + shin_angle.sin().scale(p.l1 * shin));
    let z = -(pitch.cos().scale(p.l2 * thigh) + shin_angle.cos().scale(p.l1 * shin));
    let y = S::cst(side * 0.5 * p.w);
    let (s, c) = (roll.sin(), roll.cos());
    [x, c * y - s * z, s * y + c * z]
}

/// The chain evaluated at one configuration.
pub(crate) struct Chain<S> {
    /// Torso rotation `R_T`.
    pub rot: M3<S>,
    /// `r_H`: hip centre relative to the stance foot.
    pub hip: V3<S>,
    /// `r_FH`: swing foot relative to the hip centre.
    pub swing_rel: V3<S>,
    /// Points relative to the stance foot, indexed by the constants above.
    pub points: [V3<S>; N_POINTS],
}

pub(crate) fn chain<S: Scalar>(q: &[S; DOF], p: &BipedParams) -> Chain<S> {
    let rot = mat_mul(&mat_mul(&rot_z(q[0]), &rot_x(q[1])), &rot_y(q[2]));
    let stance = |t, s| leg_point(p, -1.0, q[3], q[4], q[5], t, s);
    let swing = |t, s| leg_point(p, 1.0, q[6], q[7], q[8], t, s);
    let foot_s = mat_vec(&rot, &stance(1.0, 1.0));
    let hip = [-foot_s[0], -foot_s[1], -foot_s[2]];
    let place = |local: V3<S>| add(hip, mat_vec(&rot, &local));
    let swing_rel = mat_vec(&rot, &swing(1.0, 1.0));
    let zero = S::cst(0.0);
    let points = [
        place(stance(0.5, 0.0)),
        place(stance(1.0, 0.5)),
        place(swing(0.5, 0.0)),
        place(swing(1.0, 0.5)),
        place([zero, zero, S::cst(p.torso_com)]),
        add(hip, swing_rel),
    ];
    Chain {
        rot,
        hip,
        swing_rel,
        points,
    }
}

/// Expresses a stance-frame vector in the yaw frame `Y`.
pub(crate) fn to_yaw_frame<S: Scalar>(yaw: S, v: &V3<S>) -> V3<S> {
    mat_t_vec(&rot_z(yaw), v)
}

pub(crate) fn seed(q: &[f64; DOF], dir: &[f64; DOF]) -> [Jet; DOF] {
    core::array::from_fn(|i| Jet::variable(q[i], dir[i]))
}

pub(crate) fn unit(k: usize) -> [f64; DOF] {
    let mut e = [0.0; DOF];
    e[k] = 1.0;
    e
}

/// Hip, swing-foot-minus-hip and swing-foot positions in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FramePositions {
    pub hip: [f64; 3],
    pub swing_rel: [f64; 3],
    pub swing_foot: [f64; 3],
}

/// Forward kinematics in the stance frame `I` and the yaw frame `Y`, both
/// centred at the stance foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Positions {
    pub stance: FramePositions,
    pub yaw: FramePositions,
}

impl Positions {
    /// World-frame positions given which leg is in stance and where its foot
    /// stands in the world.
    pub fn world(&self, stance_leg: StanceLeg, support: [f64; 3]) -> FramePositions {
        let s = stance_leg.sign();
        let w = |v: [f64; 3], shift: bool| {
            let o = if shift { support } else { [0.0; 3] };
            [v[0] + o[0], s * v[1] + o[1], v[2] + o[2]]
        };
        FramePositions {
            hip: w(self.stance.hip, true),
            swing_rel: w(self.stance.swing_rel, false),
            swing_foot: w(self.stance.swing_foot, true),
        }
    }
}

pub fn forward_kinematics(q: &[f64; DOF], params: &BipedParams) -> Positions {
    let c = chain(q, params);
    let stance = FramePositions {
        hip: c.hip,
        swing_rel: c.swing_rel,
        swing_foot: c.points[SWING_FOOT],
    };
    let y = |v: &[f64; 3]| to_yaw_frame(q[0], v);
    Positions {
        stance,
        yaw: FramePositions {
            hip: y(&c.hip),
            swing_rel: y(&c.swing_rel),
            swing_foot: y(&c.points[SWING_FOOT]),
        },
    }
}

/// `∂r_F/∂q`, 3×9.
pub fn swing_foot_jacobian(q: &[f64; DOF], params: &BipedParams) -> Matrix {
    let mut j = Matrix::zeros(3, DOF);
    for k in 0..DOF {
        let c = chain(&seed(q, &unit(k)), params);
        for i in 0..3 {
            j[(i, k)] = c.points[SWING_FOOT][i].d;
        }
    }
    j
}
