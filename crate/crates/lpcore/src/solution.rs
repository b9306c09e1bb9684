//! Solution containers returned by the LP and MILP solvers.

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basis identifier over the solver's internal augmented system: the basic
/// column of each row plus the nonbasic columns resting at their upper
/// bounds (everything else rests at its lower bound or at zero when free).
#[derive(Debug, Clone, Default)]
pub struct Basis {
    pub basic: Vec<usize>,
    pub at_upper: Vec<usize>,
}

impl Basis {
    pub fn is_empty(&self) -> bool {
        self.basic.is_empty()
    }
}

/// A basic solution of a linear (or mixed-integer) program.
///
/// For `Optimal` LP solves the point is a basic feasible solution with
/// complementary-slackness duals and `lower_bound == objective`. MILP solves
/// carry no duals; `lower_bound` is the proven bound from branch and bound.
/// `basis` identifies the solve's final basis and can be fed back as a warm
/// start.
#[derive(Debug, Clone)]
pub struct VertexSolution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub lower_bound: f64,
    pub duals: Option<Vec<f64>>,
    pub basis: Basis,
}

impl VertexSolution {
    pub fn infeasible() -> Self {
        VertexSolution {
            status: SolveStatus::Infeasible,
            primal: Vec::new(),
            objective: f64::INFINITY,
            lower_bound: f64::INFINITY,
            duals: None,
            basis: Basis::default(),
        }
    }

    pub fn unbounded() -> Self {
        VertexSolution {
            status: SolveStatus::Unbounded,
            primal: Vec::new(),
            objective: f64::NEG_INFINITY,
            lower_bound: f64::NEG_INFINITY,
            duals: None,
            basis: Basis::default(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
