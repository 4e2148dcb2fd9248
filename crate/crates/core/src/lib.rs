//! Distributed optimization for cooperative robot teams.
//!
//! Every robot runs a pure transition function `(state, inbox) -> (state, outbox)`
//! and the [`netsim`] engine advances all robots in lock-step over a simulated
//! communication graph. Two problem families are covered:
//!
//! * constraint-coupled programs, where local costs are linked by a shared
//!   budget `sum_i g_i(x_i) <= 0` (dual decomposition, primal decomposition for
//!   mixed-integer programs);
//! * aggregative programs, where every cost depends on the network average
//!   `sigma(x) = sum_i phi_i(x_i) / N` (projected aggregative tracking,
//!   Frank-Wolfe with gradient tracking, dual consensus ADMM).
//!
//! Centralized reference solvers live in [`oracle`]; the small dense LP/QP/MILP
//! machinery used inside every iteration lives in [`local_solvers`].

pub mod algorithms;
pub mod error;
pub mod graph_kit;
pub mod local_solvers;
pub mod netsim;
pub mod oracle;
pub mod problems;

pub use error::{Error, Result};

/// Dense column vector used across the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used across the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
