//! The adaptive piecewise-linear approximation loop: build chord
//! under-approximators of each concave term, globally solve the resulting
//! mixed-integer subproblem, add breakpoints at the incumbent, and stop once
//! the approximation is exact there. Subproblem objectives are valid global
//! lower bounds throughout because every subproblem relaxes the original.

use serde::Serialize;

use lpcore::{
    encode_pwl_objective, purify_to_vertex, solve_milp_with_cutoff, PwlTerm, SolveStatus,
    VertexSolution,
};

use crate::cost::{build_underapprox, ConcaveCostFn, PwlApprox};
use crate::error::ApwlError;
use crate::scp::SeparableConcaveProgram;

/// How one structural variable's cost enters the subproblem objective.
#[derive(Debug, Clone)]
pub enum ApproxKind {
    /// Fixed variable: constant contribution folded into the offset.
    Constant(f64),
    /// Linear cost fed directly as an objective coefficient.
    Linear(f64),
    /// Genuinely concave cost carrying a piecewise under-approximator.
    Curved(PwlApprox),
}

/// Under-approximator state for one structural variable.
#[derive(Debug, Clone)]
pub struct Approximator {
    pub cost: ConcaveCostFn,
    pub kind: ApproxKind,
}

/// Builds the initial approximators: two breakpoints at the variable bounds.
pub fn initial_approximators(scp: &SeparableConcaveProgram) -> Result<Vec<Approximator>, ApwlError> {
    scp.costs
        .iter()
        .zip(&scp.bounds)
        .map(|(f, &(lo, hi))| {
            let kind = if hi - lo <= 1e-12 * hi.max(1.0) {
                ApproxKind::Constant(f.at(lo))
            } else if f.is_linear() {
                ApproxKind::Linear(f.linear_slope())
            } else {
                ApproxKind::Curved(build_underapprox(f, &[lo, hi])?)
            };
            Ok(Approximator { cost: f.clone(), kind })
        })
        .collect()
}

/// Adds a breakpoint at `incumbent[i]` for every variable whose approximation
/// is more than `eps_term`-loose there and whose incumbent value is separated
/// from all existing breakpoints. Returns whether anything changed and how
/// many breakpoints were added.
pub fn step_breakpoint_update(
    approx: &mut [Approximator],
    incumbent: &[f64],
    eps_term_rel: f64,
) -> (bool, usize) {
    let mut added = 0;
    for (i, a) in approx.iter_mut().enumerate() {
        let ApproxKind::Curved(p) = &mut a.kind else { continue };
        let ub = *p.xs.last().unwrap();
        let y = incumbent[i].max(p.xs[0]).min(ub);
        let snap = 1e-9 * ub.max(1.0);
        let y_eval = if y.abs() <= snap { 0.0 } else { y };
        let exact = a.cost.at(y_eval);
        let approx_val = p.value_at(y);
        if exact - approx_val <= eps_term_rel * exact.abs().max(1.0) {
            continue;
        }
        let eps_bp = 1e-9 * p.span();
        let separated = p.xs.iter().all(|&x| (x - y).abs() > eps_bp);
        if separated {
            p.insert(y, exact);
            added += 1;
        }
    }
    (added > 0, added)
}

/// One iteration record of the solve trace.
#[derive(Debug, Clone, Serialize)]
pub struct ApwlIteration {
    pub index: usize,
    /// Structural variable values at this iteration's subproblem optimum.
    pub incumbent: Vec<f64>,
    /// Proven subproblem bound: a valid global lower bound.
    pub lower_bound: f64,
    /// Exact objective at this iteration's incumbent.
    pub exact_objective: f64,
    /// Best exact objective seen so far.
    pub best_objective: f64,
    pub breakpoints_added: usize,
    pub total_breakpoints: usize,
}

/// Per-iteration observability of a solve.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ApwlTrace {
    pub iterations: Vec<ApwlIteration>,
}

impl ApwlTrace {
    pub fn final_lower_bound(&self) -> f64 {
        self.iterations.last().map(|r| r.lower_bound).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Options for the outer loop.
#[derive(Debug, Clone)]
pub struct ApwlOptions {
    /// Certificate tolerance on (best upper bound - lower bound).
    pub rel_gap: f64,
    /// Relative exactness test of step 4.
    pub eps_term_rel: f64,
    /// Relative gap passed to subproblem solves.
    pub subproblem_gap: f64,
    pub max_iterations: usize,
}

impl ApwlOptions {
    pub fn with_gap(rel_gap: f64) -> Self {
        ApwlOptions {
            rel_gap,
            eps_term_rel: 1e-6,
            subproblem_gap: rel_gap.min(1e-6),
            max_iterations: 200,
        }
    }
}

impl Default for ApwlOptions {
    fn default() -> Self {
        ApwlOptions::with_gap(1e-4)
    }
}

/// A subproblem solution in the program's own variable space.
#[derive(Debug, Clone)]
pub struct SpSolution {
    pub y: Vec<f64>,
    pub block_x: Vec<Vec<f64>>,
    /// Optimal value of the piecewise subproblem.
    pub objective: f64,
    /// Proven lower bound on the subproblem optimum (accounts for the MILP gap).
    pub proven_lower: f64,
}

/// Strategy for globally solving the piecewise subproblem. The extensive
/// solver below assembles one MILP; a decomposition can stand in for it.
pub trait SubproblemSolver {
    /// Globally solves the piecewise subproblem. `cutoff`, when given, is a
    /// known valid upper bound on the subproblem optimum (the exact objective
    /// of the best iterate so far) and may be used to prune.
    fn solve(
        &mut self,
        scp: &SeparableConcaveProgram,
        approx: &[Approximator],
        rel_gap: f64,
        cutoff: Option<f64>,
    ) -> Result<SpSolution, ApwlError>;
}

/// Builds the piecewise terms for the curved variables.
pub fn pwl_terms(approx: &[Approximator]) -> Vec<PwlTerm> {
    approx
        .iter()
        .enumerate()
        .filter_map(|(j, a)| match &a.kind {
            ApproxKind::Curved(p) => {
                Some(PwlTerm { var: j, xs: p.xs.clone(), ys: p.ys.clone() })
            }
            _ => None,
        })
        .collect()
}

/// Solves the subproblem in extensive form through the kernel.
#[derive(Debug, Default)]
pub struct ExtensiveSolver;

impl SubproblemSolver for ExtensiveSolver {
    fn solve(
        &mut self,
        scp: &SeparableConcaveProgram,
        approx: &[Approximator],
        rel_gap: f64,
        cutoff: Option<f64>,
    ) -> Result<SpSolution, ApwlError> {
        let (mut base, block_offsets) = scp.assemble_linear();
        for (j, a) in approx.iter().enumerate() {
            match a.kind {
                ApproxKind::Linear(slope) => base.lp.objective[j] += slope,
                ApproxKind::Constant(v) => base.lp.objective_offset += v,
                ApproxKind::Curved(_) => {}
            }
        }
        let (mip, _encs) = encode_pwl_objective(&pwl_terms(approx), &base)?;
        let sol = solve_milp_with_cutoff(&mip, rel_gap, cutoff)?;
        match sol.status {
            SolveStatus::Infeasible => return Err(ApwlError::Infeasible),
            SolveStatus::Unbounded => {
                return Err(ApwlError::Malformed(
                    "subproblem unbounded: the program violates its boundedness contract".into(),
                ))
            }
            SolveStatus::Optimal => {}
        }
        let sol = purify_to_vertex(&sol, &mip)?;
        let n = scp.num_structural();
        let y = sol.primal[..n].to_vec();
        let block_x = scp
            .blocks
            .iter()
            .zip(&block_offsets)
            .map(|(blk, &off)| sol.primal[off..off + blk.num_x].to_vec())
            .collect();
        Ok(SpSolution {
            y,
            block_x,
            objective: sol.objective,
            proven_lower: sol.lower_bound,
        })
    }
}

/// Solves the program to global optimality within `rel_gap` using the
/// extensive-form subproblem solver.
pub fn apwl_solve(
    scp: &SeparableConcaveProgram,
    rel_gap: f64,
) -> Result<(VertexSolution, ApwlTrace), ApwlError> {
    apwl_solve_with(scp, &ApwlOptions::with_gap(rel_gap), &mut ExtensiveSolver)
}

/// Solves the program with a caller-supplied subproblem solver.
pub fn apwl_solve_with(
    scp: &SeparableConcaveProgram,
    opts: &ApwlOptions,
    solver: &mut dyn SubproblemSolver,
) -> Result<(VertexSolution, ApwlTrace), ApwlError> {
    scp.validate()?;
    let mut approx = initial_approximators(scp)?;
    let mut trace = ApwlTrace::default();
    let mut best: Option<SpSolution> = None;
    let mut best_exact = f64::INFINITY;

    for iter in 1..=opts.max_iterations {
        let cutoff = best.as_ref().map(|_| best_exact);
        let sp = solver.solve(scp, &approx, opts.subproblem_gap, cutoff)?;
        let exact = scp.exact_objective(&sp.y, &sp.block_x);
        if exact < best_exact {
            best_exact = exact;
            best = Some(sp.clone());
        }
        let (changed, added) = step_breakpoint_update(&mut approx, &sp.y, opts.eps_term_rel);
        trace.iterations.push(ApwlIteration {
            index: iter,
            incumbent: sp.y.clone(),
            lower_bound: sp.proven_lower,
            exact_objective: exact,
            best_objective: best_exact,
            breakpoints_added: added,
            total_breakpoints: approx
                .iter()
                .map(|a| match &a.kind {
                    ApproxKind::Curved(p) => p.num_breakpoints(),
                    _ => 0,
                })
                .sum(),
        });
        let gap_closed =
            best_exact - sp.proven_lower <= opts.rel_gap * best_exact.abs().max(1.0);
        if !changed || gap_closed {
            let sp = best.expect("an iterate exists at termination");
            let mut primal = sp.y.clone();
            for x in &sp.block_x {
                primal.extend_from_slice(x);
            }
            let sol = VertexSolution {
                status: SolveStatus::Optimal,
                primal,
                objective: best_exact,
                lower_bound: trace.final_lower_bound(),
                duals: None,
                basis: Default::default(),
            };
            return Ok((sol, trace));
        }
    }
    Err(ApwlError::IterationLimit(opts.max_iterations))
}
