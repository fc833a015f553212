//! Hybrid dynamical models of walking with impacts: the 3D linear inverted
//! pendulum under an `(x0, y0)`-invariant step, a 9-DOF 3D biped with a rigid
//! impact map, controllers that enforce a discrete invariant gait, and the
//! Poincare-map tools used to certify the resulting periodic orbits.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(a <= b)` checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod biped;
pub mod biped_analysis;
pub mod control;
mod error;
pub mod hybrid;
pub mod jet;
pub mod linalg;
pub mod lip;
pub mod lip_analysis;

pub use error::{Error, Result};
pub use num_complex::Complex64;

#[cfg(feature = "serde")]
pub(crate) fn complex_pairs<S: serde::Serializer>(
    values: &[Complex64],
    s: S,
) -> core::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for z in values {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}
