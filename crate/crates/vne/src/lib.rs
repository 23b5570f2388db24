//! Virtual network embedding as a network utility maximization problem.
//!
//! The crate models a physical hosting network and a stream of virtual
//! network (VN) requests, builds the embedding problem as a linear /
//! integer program, and solves it three ways:
//!
//! * [`monolith`] — the complete program solved centrally (the reference
//!   oracle),
//! * [`primal`] — primal decomposition: a master allocates capacity
//!   shares to per-partition subproblems and follows the subgradient of
//!   the sum of their optimal values,
//! * [`dual`] — dual decomposition: a master prices the shared node
//!   capacities and the subproblems optimize price-adjusted objectives.
//!
//! [`protocol`] wraps either decomposition as a master/agents message
//! protocol and accounts signaling overhead, and [`harness`] runs
//! sequential-arrival experiments (allocation ratio, revenue, overhead)
//! under pluggable VN partitioning policies.

pub mod dual;
pub mod harness;
pub mod lp;
pub mod model;
pub mod monolith;
pub mod partition;
pub mod primal;
pub mod protocol;
pub mod trace;
