//! Thermodynamic accounting for cyclic quantum machines: ergotropy and
//! passive states, entropy-production bounds, squeezed-bath engine cycles and
//! a parametrically pumped (catalyzed) engine.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalysis;
pub mod cycles;
pub mod entropy_bounds;
pub mod error;
pub mod gaussian;
pub mod lindblad;
pub mod par;
pub mod passivity;
pub mod quantum_core;

pub use error::{Error, Result};
