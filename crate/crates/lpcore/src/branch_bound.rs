//! Best-bound branch and bound over LP relaxations solved by the simplex,
//! plus purification of mixed-integer solutions to basic points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::LpError;
use crate::problem::{MixedIntegerProgram, VarBound};
use crate::simplex::{solve_lp_with_basis, IncrementalLp, FEAS_TOL};
use crate::solution::{Basis, SolveStatus, VertexSolution};

/// Integer feasibility tolerance.
pub const INT_TOL: f64 = 1e-6;
/// Default relative optimality gap for MILP solves.
pub const DEFAULT_REL_GAP: f64 = 1e-4;

const MAX_NODES: usize = 2_000_000;

struct Node {
    bound: f64,
    seq: usize,
    lowers: Vec<f64>,
    uppers: Vec<f64>,
    warm: Basis,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for best-bound (smallest first).
        // Ties prefer the newest node so children follow their parents and
        // the engine's live basis usually matches the warm start.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| self.seq.cmp(&other.seq))
    }
}

fn most_fractional(primal: &[f64], integer: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &is_int) in integer.iter().enumerate() {
        if !is_int {
            continue;
        }
        let v = primal[j];
        let frac = (v - v.round()).abs();
        if frac <= INT_TOL {
            continue;
        }
        let dist = (v - v.floor()).min(v.ceil() - v);
        match best {
            Some((_, bd)) if dist <= bd => {}
            _ => best = Some((j, dist)),
        }
    }
    best.map(|(j, _)| (j, primal[j]))
}

/// Solves a mixed-integer program to within `rel_gap` relative optimality by
/// best-bound branch and bound, branching on the most fractional variable.
pub fn solve_milp(mip: &MixedIntegerProgram, rel_gap: f64) -> Result<VertexSolution, LpError> {
    solve_milp_with_cutoff(mip, rel_gap, None)
}

/// Like [`solve_milp`], additionally pruning every node whose relaxation
/// bound exceeds `cutoff` (a known valid upper bound on the optimum). The
/// returned solution may have `objective > cutoff` only when the true optimum
/// does.
pub fn solve_milp_with_cutoff(
    mip: &MixedIntegerProgram,
    rel_gap: f64,
    cutoff: Option<f64>,
) -> Result<VertexSolution, LpError> {
    mip.validate()?;
    if !rel_gap.is_finite() || rel_gap < 0.0 {
        return Err(LpError::MalformedProblem("rel_gap must be nonnegative".into()));
    }
    let lp = mip.lp.clone();
    let root = solve_lp_with_basis(&lp, None)?;
    match root.status {
        SolveStatus::Infeasible => return Ok(VertexSolution::infeasible()),
        SolveStatus::Unbounded => return Ok(VertexSolution::unbounded()),
        SolveStatus::Optimal => {}
    }
    if most_fractional(&root.primal, &mip.integer).is_none() {
        return Ok(root);
    }

    let mut engine = IncrementalLp::new(&lp)?;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: root.objective,
        seq,
        lowers: lp.bounds.iter().map(|b| b.lower).collect(),
        uppers: lp.bounds.iter().map(|b| b.upper).collect(),
        warm: root.basis.clone(),
    });
    let mut incumbent: Option<VertexSolution> = None;
    let mut nodes = 0usize;

    loop {
        // Dive depth-first until an incumbent exists (no pruning is possible
        // before one is known), then switch to best-bound order.
        let node = if incumbent.is_none() {
            let mut drained: Vec<Node> = heap.drain().collect();
            match drained.iter().enumerate().max_by_key(|(_, n)| n.seq) {
                None => break,
                Some((idx, _)) => {
                    let node = drained.swap_remove(idx);
                    heap.extend(drained);
                    node
                }
            }
        } else {
            match heap.pop() {
                None => break,
                Some(n) => n,
            }
        };
        nodes += 1;
        if nodes > MAX_NODES {
            return Err(LpError::IterationLimit(nodes));
        }
        if std::env::var_os("LPCORE_TRACE_BB").is_some() && nodes % 200 == 0 {
            eprintln!(
                "[bb] nodes {nodes} heap {} bound {:.9e} incumbent {:.9e}",
                heap.len(),
                node.bound,
                incumbent.as_ref().map(|s| s.objective).unwrap_or(f64::INFINITY)
            );
        }
        let inc_obj = incumbent.as_ref().map(|s| s.objective).unwrap_or(f64::INFINITY);
        // A caller-supplied cutoff prunes like an incumbent objective; ties
        // at the cutoff survive so an optimum equal to it is still found.
        let prune_at = inc_obj.min(
            cutoff.map(|c| c + 1e-9 * c.abs().max(1.0)).unwrap_or(f64::INFINITY),
        );
        if incumbent.is_some() && gap_closed(inc_obj, node.bound, rel_gap) {
            // Best-bound order: every remaining node is at least this bound.
            heap.push(node);
            break;
        }
        if node.bound >= prune_at {
            continue;
        }
        let bounds: Vec<VarBound> = node
            .lowers
            .iter()
            .zip(&node.uppers)
            .map(|(&l, &u)| VarBound::new(l, u))
            .collect();
        let sol = engine.solve(&bounds, Some(&node.warm))?;
        match sol.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => return Ok(VertexSolution::unbounded()),
            SolveStatus::Optimal => {}
        }
        if sol.objective >= prune_at - 1e-12 * (1.0 + prune_at.abs()) && incumbent.is_some() {
            continue;
        }
        if sol.objective >= prune_at && incumbent.is_none() {
            continue;
        }
        match most_fractional(&sol.primal, &mip.integer) {
            None => {
                if sol.objective < inc_obj {
                    incumbent = Some(sol);
                }
            }
            Some((j, v)) => {
                let mut down = Node {
                    bound: sol.objective,
                    seq: { seq += 1; seq },
                    lowers: node.lowers.clone(),
                    uppers: node.uppers.clone(),
                    warm: sol.basis.clone(),
                };
                down.uppers[j] = v.floor();
                let mut up = Node {
                    bound: sol.objective,
                    seq: { seq += 1; seq },
                    lowers: node.lowers,
                    uppers: node.uppers,
                    warm: sol.basis.clone(),
                };
                up.lowers[j] = v.ceil();
                if down.uppers[j] >= down.lowers[j] - 1e-12 {
                    heap.push(down);
                }
                if up.lowers[j] <= up.uppers[j] + 1e-12 {
                    heap.push(up);
                }
            }
        }
    }

    match incumbent {
        None => Ok(VertexSolution::infeasible()),
        Some(mut sol) => {
            let proven = heap
                .peek()
                .map(|n| n.bound.min(sol.objective))
                .unwrap_or(sol.objective);
            sol.lower_bound = proven;
            sol.duals = None;
            Ok(sol)
        }
    }
}

fn gap_closed(incumbent: f64, bound: f64, rel_gap: f64) -> bool {
    incumbent.is_finite() && incumbent - bound <= rel_gap * incumbent.abs().max(1.0)
}

/// Re-solves the LP obtained by fixing every integer variable of `mip` at its
/// (rounded) value in `solution`, warm-starting from the solution's basis.
/// Returns a basic optimal point of that restriction; the objective moves by
/// no more than roundoff.
pub fn purify_to_vertex(
    solution: &VertexSolution,
    mip: &MixedIntegerProgram,
) -> Result<VertexSolution, LpError> {
    if solution.status != SolveStatus::Optimal {
        return Err(LpError::MalformedProblem(
            "purify_to_vertex requires an optimal solution".into(),
        ));
    }
    if solution.primal.len() != mip.lp.num_vars {
        return Err(LpError::MalformedProblem("solution/problem size mismatch".into()));
    }
    let mut lp = mip.lp.clone();
    for (j, &is_int) in mip.integer.iter().enumerate() {
        if is_int {
            let v = solution.primal[j].round();
            debug_assert!(
                (solution.primal[j] - v).abs() <= 1e-5,
                "integer variable {j} far from integral: {}",
                solution.primal[j]
            );
            lp.bounds[j] = VarBound::fixed(v);
        }
    }
    let warm = if solution.basis.is_empty() { None } else { Some(&solution.basis) };
    let sol = solve_lp_with_basis(&lp, warm)?;
    if sol.status != SolveStatus::Optimal {
        return Err(LpError::Numerical(
            "integer-fixed restriction of an optimal solution must stay feasible".into(),
        ));
    }
    debug_assert!(
        (sol.objective - solution.objective).abs()
            <= FEAS_TOL.max(1e-9 * (1.0 + solution.objective.abs())),
        "purification moved the objective: {} -> {}",
        solution.objective,
        sol.objective
    );
    Ok(sol)
}
