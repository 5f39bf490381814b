//! Entropy-stable spectral collocation on curvilinear hexahedra with a
//! positivity-preserving flux limiter and Brenner-type artificial dissipation.

pub mod dissipation;
pub mod error;
pub mod flux;
pub mod harness;
pub mod limiter;
pub mod mesh;
pub mod rhs;
pub mod sbp;
pub mod sensor;
pub mod thermo;
pub mod time;

pub use error::{Error, Result};
pub use sbp::{build_lgl, operators, OperatorSet, TensorOps};
pub use thermo::{Gas, State, ViscosityLaw};
