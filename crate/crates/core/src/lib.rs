//! Canonical hyperbolic metrics with constant-curvature boundary on
//! triangulated surfaces.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collar;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod tuner;
pub mod verify;
