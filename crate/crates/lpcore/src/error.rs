use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("degenerate breakpoints: {0}")]
    DegenerateBreakpoints(String),
    #[error("iteration limit reached after {0} pivots")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
