//! Self-contained LP and MILP solving kernel.
//!
//! A revised primal simplex over bounded variables (dense explicit basis
//! inverse, product-form updates, Bland fallback under degeneracy) returns
//! vertex solutions with row duals; a best-bound branch and bound handles
//! integrality; piecewise-linear objective terms are encoded with a
//! convex-combination formulation so the same branch and bound solves them.
//! Solver instances are single-threaded and self-contained; problem data is
//! immutable during a solve.

mod branch_bound;
mod error;
mod export;
mod problem;
mod pwl;
mod simplex;
mod solution;

pub use branch_bound::{purify_to_vertex, solve_milp, solve_milp_with_cutoff, DEFAULT_REL_GAP, INT_TOL};
pub use error::LpError;
pub use export::write_lp_format;
pub use problem::{LinearProgram, MixedIntegerProgram, Sense, VarBound};
pub use pwl::{encode_pwl_objective, PwlEncoding, PwlTerm};
pub use simplex::{counters, solve_lp, solve_lp_with_basis, FEAS_TOL};
pub use solution::{SolveStatus, VertexSolution};
