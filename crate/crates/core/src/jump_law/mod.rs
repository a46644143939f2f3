//! The stochastic clock and the jump destination: conditional hazard laws,
//! survival functions, jump-time sampling and state-indexed jump kernels.

mod hazard;
mod kernel;

pub use hazard::{HazardLaw, JUMP_TIME_TOL};
pub use kernel::{
    DensityKernel, DiscreteKernel, EnvelopeFn, JumpKernel, ShiftedExponentialKernel, SupportKind,
    TiltedKernel,
};
