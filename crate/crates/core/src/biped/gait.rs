//! The quadruple `(θp^d, x0, y0, q_k^d)` that fixes an invariant step.

use crate::{Error, Result};

use super::BipedParams;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GaitSpec {
    /// Torso pitch at impact, rad.
    pub theta_p_d: f64,
    /// Swing-foot placement ahead of the hip, m.
    pub x0: f64,
    /// Swing-foot placement beside the hip, m.
    pub y0: f64,
    /// Knee angle of both legs at impact, rad.
    pub q_k_d: f64,
}

impl Default for GaitSpec {
    fn default() -> Self {
        GaitSpec {
            theta_p_d: 0.1,
            x0: 0.15,
            y0: 0.2,
            q_k_d: 0.3,
        }
    }
}

impl GaitSpec {
    pub fn validate(&self, params: &BipedParams) -> Result<()> {
        if !(self.x0 > 0.0 && self.y0 > 0.0 && self.q_k_d > 0.0 && self.theta_p_d.is_finite()) {
            return Err(Error::InvalidParameter("x0, y0 and q_k_d must be positive"));
        }
        let (lo, hi) = params.knee_limits;
        if !(self.q_k_d > lo && self.q_k_d < hi) {
            return Err(Error::InvalidParameter("q_k_d outside the knee limits"));
        }
        if !(self.r1_sq(params) > self.r0() * self.r0()) {
            return Err(Error::InvalidParameter("foot placement out of reach"));
        }
        Ok(())
    }

    pub fn r0(&self) -> f64 {
        self.x0.hypot(self.y0)
    }

    /// Leg length squared at the impact knee angle.
    pub fn r1_sq(&self, params: &BipedParams) -> f64 {
        params.leg_length_sq(self.q_k_d)
    }

    pub fn r1(&self, params: &BipedParams) -> f64 {
        self.r1_sq(params).sqrt()
    }

    /// Hip height at impact.
    pub fn z0(&self, params: &BipedParams) -> f64 {
        (self.r1_sq(params) - self.x0 * self.x0 - self.y0 * self.y0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_heights() {
        let p = BipedParams::default();
        let g = GaitSpec::default();
        g.validate(&p).unwrap();
        let r1_sq = 0.16 + 0.16 + 0.01 + 0.32 * 0.3f64.cos();
        assert!((g.r1_sq(&p) - r1_sq).abs() < 1e-15);
        assert!((g.z0(&p) - (r1_sq - 0.0625f64).sqrt()).abs() < 1e-15);
        assert!((g.z0(&p) - 0.757).abs() < 1e-3);
    }

    #[test]
    fn unreachable_placement_rejected() {
        let p = BipedParams::default();
        let g = GaitSpec {
            x0: 0.7,
            y0: 0.5,
            ..GaitSpec::default()
        };
        assert!(g.validate(&p).is_err());
    }
}
