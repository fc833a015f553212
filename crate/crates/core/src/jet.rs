//! Second-order forward-mode differentiation along a single direction.
//!
//! Kinematics are written once over [`Scalar`]. Evaluated with `f64` they
//! give positions; evaluated with [`Jet`] seeded as `q + s·d` they also give
//! the first and second derivatives with respect to `s`, i.e. the velocity
//! `J d` and the bias acceleration `(d/ds)² p` along `d`.

use core::ops::{Add, Mul, Neg, Sub};


/// Arithmetic needed by the kinematic chain.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn value(self) -> f64;

    fn scale(self, k: f64) -> Self {
        self * Self::cst(k)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn value(self) -> f64 {
        self
    }
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// Truncated Taylor expansion `v + d·s + dd·s²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: f64,
    pub dd: f64,
}

impl Jet {
    pub fn new(v: f64, d: f64, dd: f64) -> Self {
        Jet { v, d, dd }
    }

    /// Independent variable moving with rate `d`.
    pub fn variable(v: f64, d: f64) -> Self {
        Jet { v, d, dd: 0.0 }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.d + o.d, self.dd + o.dd)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.d - o.d, self.dd - o.dd)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.v * o.v,
            self.d * o.v + self.v * o.d,
            self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        )
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet::new(-self.v, -self.d, -self.dd)
    }
}

impl Scalar for Jet {
    fn cst(v: f64) -> Self {
        Jet::new(v, 0.0, 0.0)
    }
    fn sin(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        Jet::new(s, c * self.d, c * self.dd - s * self.d * self.d)
    }
    fn cos(self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        Jet::new(c, -s * self.d, -s * self.dd - c * self.d * self.d)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn scale(self, k: f64) -> Self {
        Jet::new(self.v * k, self.d * k, self.dd * k)
    }
}
