//! Global optimization of mixed-integer linearly constrained separable
//! concave minimization by adaptive piecewise-linear under-approximation.
//!
//! Each univariate concave cost is replaced by the chord interpolant over a
//! growing breakpoint set; the resulting piecewise subproblem is solved to
//! global optimality as a MILP (every such subproblem is a relaxation, so its
//! value is a global lower bound); breakpoints are added at the incumbent
//! until the approximation is exact there, which certifies optimality.

mod cost;
mod error;
mod scp;
mod solve;

pub use cost::{build_underapprox, eval_concave, ConcaveCostFn, PowerTerm, PwlApprox};
pub use error::ApwlError;
pub use scp::{CouplingSystem, ScenarioBlock, SeparableConcaveProgram};
pub use solve::{
    apwl_solve, apwl_solve_with, initial_approximators, pwl_terms, step_breakpoint_update,
    Approximator, ApproxKind, ApwlIteration, ApwlOptions, ApwlTrace, ExtensiveSolver,
    SpSolution, SubproblemSolver,
};
