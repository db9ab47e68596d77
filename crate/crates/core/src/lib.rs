//! Numerical laboratory for curvature, conformal deformations, geodesics,
//! stability of minimal hypersurfaces and neck constructions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod chart;
pub mod conformal;
pub mod error;
mod fd;
pub mod field;
pub mod geodesic;
pub mod linalg;
pub mod neck;
pub mod sampling;
pub mod scan;
pub mod spline;
pub mod stability;

pub use error::{Error, Result};
