//! Simulation and verification toolkit for general piecewise deterministic
//! Markov processes (PDMPs).
//!
//! A process is given by its characteristic triple: a deterministic flow, a
//! conditional hazard law (rate density plus atoms) and a jump kernel. On top
//! of the simulator the crate builds the measure-valued generator, the
//! exponential martingale `M^h`, the tilted triple obtained by using `M^h` as
//! a likelihood ratio, and a Monte Carlo harness that checks those objects
//! against closed forms and matrix/ODE oracles.
//!
//! Module map:
//!
//! * [`sds`]: states, flows, additive functionals and quadrature along
//!   trajectories.
//! * [`jump_law`]: hazard laws, survival functions, jump-time sampling and
//!   jump kernels.
//! * [`engine`]: the characteristic triple as a simulator and skeleton paths.
//! * [`function`]: test functions `f` together with their path derivative and
//!   path jumps.
//! * [`generator`]: the measure-valued generator, the Dynkin process and the
//!   carré du champ.
//! * [`tilting`]: Stieltjes exponential, `M^h`, good-function diagnostics, the
//!   tilted model and the tilted generator.
//! * [`models`]: bundled models with oracles.
//! * [`harness`]: estimators, experiments, configuration and report output.

pub mod engine;
pub mod error;
pub mod function;
pub mod generator;
pub mod harness;
pub mod jump_law;
pub mod models;
pub mod rng;
pub mod sds;
pub mod tilting;

pub use engine::{PdmpModel, Skeleton};
pub use error::{Error, Result};
pub use function::{FunctionForm, TestFunction};
pub use jump_law::{HazardLaw, JumpKernel};
pub use sds::{Atom, Flow, PathFunctional, State, StateTag};
