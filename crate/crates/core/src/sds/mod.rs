//! Deterministic backbone: states, semi-dynamic systems (flows) and additive
//! functionals of a flow.

mod flow;
mod functional;
pub mod quadrature;
mod state;

pub use flow::{flow_eval, ConstantFlow, Flow, LinearFlow, Wall};
pub use functional::{
    af_eval, af_linear, integrate_along_flow, integrate_along_flow_with, normalize_atoms,
    offsets_coincide, Atom, AtomFn, CumulativeFn, DensityFn, PathFunctional,
};
pub use state::{State, StateDescriptor, StateTag};

/// Default absolute tolerance for quadrature along trajectories.
pub const DEFAULT_TOL: f64 = 1e-10;
