//! Truncated WKB transition kernels.

pub mod flat_transform;
pub mod generic;
pub mod kernel;
pub mod libor;

pub use flat_transform::{check_flat_transform, FlatTransformReport};
pub use generic::{c0_generic, c1, c_next, r0, wkb_recursion_rhs, C0Source, ConstantDrift, FlatDriftModel, GenericC0, LinearDrift};
pub use kernel::{c1_taylor2, AnchoredLiborKernel, AnchoredWkb, C1Mode, LiborKernel, Taylor2, WkbKernel};
pub use libor::LiborC0;
