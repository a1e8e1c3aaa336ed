//! Finite-weight workbench for the rank-one Heisenberg vertex algebra.

pub mod completion;
pub mod correlator;
pub mod error;
pub mod freefield;
pub mod graded;
pub mod module;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod seminorm;
pub mod sewing;
pub mod tail;
pub mod vertex;

pub use error::{Error, Result};
pub use graded::{
    pair, partitions_of, partitions_up_to, project, scale_l0, BasisState, DualVector,
    GradedVector, Partition, Sector, TruncationPolicy, Weight,
};
pub use scalar::{Scalar, ScaleFactor, C64};
