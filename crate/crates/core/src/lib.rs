//! Primal-dual splitting solvers with dynamic stepsizes for composite problems
//! `min f(x) + g(x) + h(Dx)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`prox`], [`linear`] and [`smooth`] hold the building blocks: proximity
//!   operators, linear maps with adjoints, and smooth terms with gradients.
//! * [`engine`] runs (randomized) Krasnosel'skii–Mann iterations of averaged
//!   operators over block-structured spaces.
//! * [`schedule`] describes iteration-dependent stepsizes and validates them.
//! * [`solvers`] implements PDSDS and ADMMDS⁺ on a single composite problem.
//! * [`composite`] implements the minibatch solvers on a sum of N composite terms.
//! * [`distributed`] implements the graph-based synchronous and asynchronous solvers.

pub mod composite;
pub mod distributed;
pub mod engine;
pub mod error;
pub mod linear;
pub mod prox;
pub mod rng;
pub mod schedule;
pub mod smooth;
pub mod solvers;
pub mod trace;

pub use error::{Error, Result};
pub use linear::LinearMap;
pub use prox::ProxFn;
pub use smooth::SmoothFn;
