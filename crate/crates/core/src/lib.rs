//! Mode analysis of quasilinear first-order and quasisemilinear
//! second-order hyperbolic systems.
//!
//! The pipeline is: describe a system ([`systems`]), reduce a second-order
//! system to first order ([`reduction`]), compute dispersion roots,
//! amplitude spaces and modes ([`spectral`]), classify modes as genuinely
//! nonlinear or linearly degenerate ([`degeneracy`]), and observe gradient
//! blowup in 1-D runs ([`simulate`]).

pub mod degeneracy;
pub mod error;
pub mod linalg;
pub mod reduction;
pub mod simulate;
pub mod spectral;
pub mod systems;

pub use error::{Error, Result};
pub use systems::{
    builtin_model, Direction, FirstOrderSystem, PolyMatrixFn, Polynomial, SecondOrderSystem,
    StateVector, System, Term,
};
