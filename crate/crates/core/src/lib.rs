// matrix code reads better with explicit indices
#![allow(clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod coefficients;
pub mod galois;
pub mod linalg;
pub mod model;
pub mod adversary;
pub mod protocol;
pub mod decoder;
pub mod provisioning;
pub mod harness;
