//! Rigid plastic impact of the swing foot and leg relabelling.

use crate::linalg::{Lu, Matrix};
use crate::{Error, Result};

use super::dynamics::Terms;
use super::{BipedParams, BipedState, DOF};

/// Post-impact velocities before relabelling:
/// `q̇⁺ = q̇⁻ − D⁻¹Jᵀ(J D⁻¹ Jᵀ)⁻¹ J q̇⁻` with `J = ∂r_F/∂q`.
pub fn impact_velocity(q: &[f64; DOF], qdot: &[f64; DOF], params: &BipedParams) -> Result<[f64; DOF]> {
    let t = Terms::new(q, &[0.0; DOF], params);
    let j = &t.swing_foot_jacobian;
    let lu = Lu::new(&t.mass)?;
    let dinv_jt = lu.solve_matrix(&j.transpose());
    let contact = j.matmul(&dinv_jt);
    let foot_vel = j.mul_vec(qdot);
    let impulse = Lu::new(&contact)?.solve(&foot_vel);
    let dq = dinv_jt.mul_vec(&impulse);
    Ok(core::array::from_fn(|i| qdot[i] - dq[i]))
}

/// Swaps the roles of the legs and mirrors the frame.
pub fn relabel_vector(v: &[f64; DOF]) -> [f64; DOF] {
    [-v[0], -v[1], v[2], v[6], -v[7], v[8], v[3], -v[4], v[5]]
}

/// Relabelling as a matrix, for analyses that need it explicitly.
pub fn relabel() -> Matrix {
    let mut r = Matrix::zeros(DOF, DOF);
    let map: [(usize, f64); DOF] = [
        (0, -1.0),
        (1, -1.0),
        (2, 1.0),
        (6, 1.0),
        (7, -1.0),
        (8, 1.0),
        (3, 1.0),
        (4, -1.0),
        (5, 1.0),
    ];
    for (i, (j, s)) in map.iter().enumerate() {
        r[(i, *j)] = *s;
    }
    r
}

/// Full reset: contact impulse, then relabelling and a stance flip.
/// `tolerance` bounds the accepted swing-foot height.
pub fn impact_map(pre: &BipedState, params: &BipedParams, tolerance: f64) -> Result<BipedState> {
    let z = super::swing_foot_height(&pre.q, params);
    if !(z.abs() <= tolerance) {
        return Err(Error::NotOnGuard { residual: z });
    }
    let qdot = impact_velocity(&pre.q, &pre.qdot, params)?;
    Ok(BipedState {
        q: relabel_vector(&pre.q),
        qdot: relabel_vector(&qdot),
        stance_leg: pre.stance_leg.other(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biped::{kinetic_energy, StanceLeg};

    #[test]
    fn relabel_is_an_involution() {
        let v: [f64; DOF] = core::array::from_fn(|i| i as f64 + 1.0);
        assert_eq!(relabel_vector(&relabel_vector(&v)), v);
        let r = relabel();
        assert!(r.matmul(&r).sub(&Matrix::identity(DOF)).max_abs() == 0.0);
        assert_eq!(r.mul_vec(&v), relabel_vector(&v).to_vec());
    }

    #[test]
    fn contact_velocity_vanishes_and_energy_drops() {
        let p = BipedParams::default();
        let q = [0.1, 0.05, 0.05, -0.3, 0.02, 0.3, 0.35, -0.05, 0.3];
        let qd = [0.2, -0.1, 0.3, 1.0, -0.4, 0.1, -0.8, 0.5, -0.3];
        let plus = impact_velocity(&q, &qd, &p).unwrap();
        let j = crate::biped::swing_foot_jacobian(&q, &p);
        assert!(j.mul_vec(&plus).iter().all(|v| v.abs() < 1e-12));
        let before = kinetic_energy(&BipedState::new(q, qd, StanceLeg::Right), &p);
        let after = kinetic_energy(&BipedState::new(q, plus, StanceLeg::Right), &p);
        assert!(after <= before);
        let twice = impact_velocity(&q, &plus, &p).unwrap();
        assert!(twice.iter().zip(&plus).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
