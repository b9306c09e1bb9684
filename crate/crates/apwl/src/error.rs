use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApwlError {
    #[error("negative input: concave cost functions are defined on y >= 0, got {0}")]
    NegativeInput(f64),
    #[error("degenerate breakpoints: {0}")]
    DegenerateBreakpoints(String),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("subproblem infeasible: the program has no feasible point")]
    Infeasible,
    #[error("iteration limit {0} reached; check termination tolerances")]
    IterationLimit(usize),
    #[error("kernel failure: {0}")]
    Kernel(#[from] lpcore::LpError),
    #[error("decomposition failure: {0}")]
    Decomposition(String),
}
