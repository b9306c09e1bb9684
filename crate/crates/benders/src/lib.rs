//! L-shaped decomposition of the piecewise subproblem: a master over the
//! structural variables with one epigraph variable per group of first-stage
//! nodes, and per-node linear subproblems generating aggregated optimality
//! cuts. Relatively complete recourse is assumed, so no feasibility cuts
//! exist; a subproblem that turns out infeasible is a model-construction bug.
//!
//! Cuts accumulate in a [`CutPool`] that stays valid across outer
//! approximation iterations, warmstarting later solves. Subproblem solves run
//! in parallel; aggregation is serialized in group order so results are
//! independent of thread count and completion order.

use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use apwl::{
    pwl_terms, ApproxKind, Approximator, ApwlError, SeparableConcaveProgram, SpSolution,
    SubproblemSolver,
};
use lpcore::{
    encode_pwl_objective, solve_lp, LinearProgram, MixedIntegerProgram, Sense,
    SolveStatus, VarBound,
};
use scengen::ScenarioTree;

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("master problem infeasible")]
    MasterInfeasible,
    #[error(
        "subproblem for block {0} infeasible at a feasible master point; \
         the model violates relatively complete recourse"
    )]
    SubproblemInfeasible(usize),
    #[error("block {0} is unbounded over the structural box; epigraph bounds undefined")]
    UnboundedBlock(usize),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("grouping does not partition the program's blocks: {0}")]
    BadGrouping(String),
    #[error("kernel failure: {0}")]
    Kernel(#[from] lpcore::LpError),
}

impl From<BendersError> for ApwlError {
    fn from(e: BendersError) -> Self {
        match e {
            BendersError::MasterInfeasible => ApwlError::Infeasible,
            BendersError::IterationLimit(n) => ApwlError::IterationLimit(n),
            BendersError::Kernel(k) => ApwlError::Kernel(k),
            other => ApwlError::Decomposition(other.to_string()),
        }
    }
}

/// Cut aggregation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// One cut over all first-stage nodes.
    Single,
    /// One cut per (market-share projection, first demand index) pair.
    Grouped,
    /// One cut per first-stage node.
    Multi,
}

/// A partition of first-stage nodes into cut groups.
#[derive(Debug, Clone)]
pub struct Grouping {
    pub strategy: Strategy,
    /// Node ids (or raw block indices for tree-less programs) per group.
    pub groups: Vec<Vec<usize>>,
}

/// Builds the partition of the tree's first-stage nodes for a strategy. The
/// grouped strategy keys nodes by (projection, first demand index), giving
/// `2 * n_d` groups of `n_c` nodes each.
pub fn make_grouping(tree: &ScenarioTree, strategy: Strategy) -> Grouping {
    let first: Vec<usize> = tree.first_stage_nodes();
    let groups = match strategy {
        Strategy::Single => vec![first],
        Strategy::Multi => first.into_iter().map(|id| vec![id]).collect(),
        Strategy::Grouped => {
            let mut keys: Vec<(scengen::MsProjection, usize)> = tree
                .nodes_at_stage(0)
                .map(|n| (n.projection, n.demand_path[0]))
                .collect();
            keys.sort();
            keys.dedup();
            keys.into_iter()
                .map(|key| {
                    tree.nodes_at_stage(0)
                        .filter(|n| (n.projection, n.demand_path[0]) == key)
                        .map(|n| n.id)
                        .collect()
                })
                .collect()
        }
    };
    Grouping { strategy, groups }
}

impl Grouping {
    /// Single or multi partition over raw block indices, for programs that do
    /// not come from a scenario tree.
    pub fn trivial(num_blocks: usize, strategy: Strategy) -> Grouping {
        let groups = match strategy {
            Strategy::Single => {
                if num_blocks == 0 {
                    Vec::new()
                } else {
                    vec![(0..num_blocks).collect()]
                }
            }
            _ => (0..num_blocks).map(|b| vec![b]).collect(),
        };
        Grouping { strategy, groups }
    }

    /// Resolves node ids to block indices of `scp` and checks the partition.
    pub fn block_groups(&self, scp: &SeparableConcaveProgram) -> Result<Vec<Vec<usize>>, BendersError> {
        let nblocks = scp.blocks.len();
        let by_node = scp.blocks.iter().any(|b| b.source_node.is_some());
        let mut groups: Vec<Vec<usize>> = Vec::with_capacity(self.groups.len());
        let mut seen = vec![false; nblocks];
        for g in &self.groups {
            let mut blocks = Vec::with_capacity(g.len());
            for &key in g {
                let bi = if by_node {
                    scp.blocks
                        .iter()
                        .position(|b| b.source_node == Some(key))
                        .ok_or_else(|| {
                            BendersError::BadGrouping(format!("no block for node {key}"))
                        })?
                } else {
                    if key >= nblocks {
                        return Err(BendersError::BadGrouping(format!(
                            "block index {key} out of range"
                        )));
                    }
                    key
                };
                if seen[bi] {
                    return Err(BendersError::BadGrouping(format!("block {bi} in two groups")));
                }
                seen[bi] = true;
                blocks.push(bi);
            }
            if blocks.is_empty() {
                return Err(BendersError::BadGrouping("empty group".into()));
            }
            blocks.sort_unstable();
            groups.push(blocks);
        }
        if seen.iter().any(|&s| !s) {
            return Err(BendersError::BadGrouping("blocks left uncovered".into()));
        }
        Ok(groups)
    }
}

/// One optimality cut: `theta_g >= intercept + coefficients . y`.
#[derive(Debug, Clone)]
pub struct BendersCut {
    pub group: usize,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl BendersCut {
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(y).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Cuts and epigraph lower bounds accumulated across master iterations and
/// across outer approximation iterations. Cuts are never removed within one
/// outer solve.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    pub cuts: Vec<BendersCut>,
    /// Finite epigraph lower bound per group from block bounding relaxations.
    pub group_lower_bounds: Vec<f64>,
}

/// Per-iteration log record.
#[derive(Debug, Clone)]
pub struct BendersIteration {
    pub iteration: usize,
    pub master_bound: f64,
    pub recourse_value: f64,
    pub cuts_added: usize,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BendersStats {
    pub iterations: Vec<BendersIteration>,
    pub total_cuts: usize,
}

#[derive(Debug, Clone)]
pub struct BendersOptions {
    pub max_iterations: usize,
    /// Relative gap requested from master MILP solves.
    pub master_gap_factor: f64,
}

impl Default for BendersOptions {
    fn default() -> Self {
        BendersOptions { max_iterations: 500, master_gap_factor: 0.1 }
    }
}

/// Solution of one block LP at fixed structural values, with its cut data.
struct BlockCut {
    value: f64,
    intercept: f64,
    coefficients: Vec<f64>,
    x: Vec<f64>,
}

/// Solves one block at `y` and derives the tight optimality cut. Finite
/// variable upper bounds contribute their reduced-cost terms to the
/// intercept, which keeps the cut both valid and tight.
fn solve_block(
    scp: &SeparableConcaveProgram,
    block_index: usize,
    y: &[f64],
) -> Result<BlockCut, BendersError> {
    let blk = &scp.blocks[block_index];
    let mut lp = LinearProgram::new(blk.num_x);
    lp.objective = blk.cost.clone();
    for k in 0..blk.num_x {
        lp.bounds[k] = VarBound::new(0.0, blk.x_upper[k]);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); blk.num_rows()];
    for &(r, c, v) in &blk.b_entries {
        rows[r].push((c, v));
    }
    let mut rhs_shift = vec![0.0; blk.num_rows()];
    for &(r, j, v) in &blk.d_entries {
        rhs_shift[r] += v * y[j];
    }
    for (r, coeffs) in rows.iter().enumerate() {
        lp.add_row(coeffs, blk.senses[r], blk.rhs[r] - rhs_shift[r]);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        SolveStatus::Infeasible => return Err(BendersError::SubproblemInfeasible(block_index)),
        SolveStatus::Unbounded => return Err(BendersError::UnboundedBlock(block_index)),
        SolveStatus::Optimal => {}
    }
    let duals = sol.duals.as_ref().expect("LP optimum carries duals");
    // intercept = pi' d + sum over finite upper bounds of min(0, reduced cost) * u
    let mut intercept: f64 = blk.rhs.iter().zip(duals).map(|(d, p)| d * p).sum();
    let mut reduced = blk.cost.clone();
    for &(r, c, v) in &blk.b_entries {
        reduced[c] -= duals[r] * v;
    }
    for k in 0..blk.num_x {
        if blk.x_upper[k].is_finite() && reduced[k] < 0.0 {
            intercept += reduced[k] * blk.x_upper[k];
        }
    }
    let mut coefficients = vec![0.0; scp.num_structural()];
    for &(r, j, v) in &blk.d_entries {
        coefficients[j] -= duals[r] * v;
    }
    Ok(BlockCut { value: sol.objective, intercept, coefficients, x: sol.primal })
}

/// Solves every block of a group at `y`, returning the group recourse value
/// and the aggregated cut (tight at `y`), plus each block's solution.
pub fn solve_subproblem_group(
    scp: &SeparableConcaveProgram,
    group: usize,
    blocks: &[usize],
    y: &[f64],
) -> Result<(f64, BendersCut, Vec<(usize, Vec<f64>)>), BendersError> {
    let parts: Vec<Result<BlockCut, BendersError>> =
        blocks.par_iter().map(|&b| solve_block(scp, b, y)).collect();
    let mut value = 0.0;
    let mut intercept = 0.0;
    let mut coefficients = vec![0.0; scp.num_structural()];
    let mut xs = Vec::with_capacity(blocks.len());
    for (&b, part) in blocks.iter().zip(parts) {
        let part = part?;
        value += part.value;
        intercept += part.intercept;
        for (c, p) in coefficients.iter_mut().zip(&part.coefficients) {
            *c += p;
        }
        xs.push((b, part.x));
    }
    Ok((value, BendersCut { group, intercept, coefficients }, xs))
}

/// Finite lower bound for a block's value over the structural box: the block
/// LP with its own relaxed copy of the structural variables.
fn block_lower_bound(scp: &SeparableConcaveProgram, block_index: usize) -> Result<f64, BendersError> {
    let blk = &scp.blocks[block_index];
    let n = scp.num_structural();
    let mut lp = LinearProgram::new(blk.num_x + n);
    for k in 0..blk.num_x {
        lp.objective[k] = blk.cost[k];
        lp.bounds[k] = VarBound::new(0.0, blk.x_upper[k]);
    }
    for j in 0..n {
        lp.bounds[blk.num_x + j] = VarBound::new(scp.bounds[j].0, scp.bounds[j].1);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); blk.num_rows()];
    for &(r, c, v) in &blk.b_entries {
        rows[r].push((c, v));
    }
    for &(r, j, v) in &blk.d_entries {
        rows[r].push((blk.num_x + j, v));
    }
    for (r, coeffs) in rows.iter().enumerate() {
        lp.add_row(coeffs, blk.senses[r], blk.rhs[r]);
    }
    let sol = solve_lp(&lp)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol.objective),
        SolveStatus::Infeasible => Err(BendersError::SubproblemInfeasible(block_index)),
        SolveStatus::Unbounded => Err(BendersError::UnboundedBlock(block_index)),
    }
}

/// The L-shaped solver for one piecewise subproblem, reusable across outer
/// iterations through its persistent cut pool.
pub struct BendersSolver {
    grouping: Grouping,
    pub pool: CutPool,
    pub options: BendersOptions,
    pub stats: BendersStats,
    /// Logger for per-iteration records (wall times go here, never to files).
    pub log: Option<Box<dyn Fn(&BendersIteration) + Send>>,
}

impl BendersSolver {
    pub fn new(grouping: Grouping) -> Self {
        BendersSolver {
            grouping,
            pool: CutPool::default(),
            options: BendersOptions::default(),
            stats: BendersStats::default(),
            log: None,
        }
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }
}

impl SubproblemSolver for BendersSolver {
    fn solve(
        &mut self,
        scp: &SeparableConcaveProgram,
        approx: &[Approximator],
        rel_gap: f64,
        cutoff: Option<f64>,
    ) -> Result<SpSolution, ApwlError> {
        benders_solve_with_cutoff(scp, approx, &self.grouping, &mut self.pool, rel_gap, cutoff, &self.options, {
            let log = self.log.as_deref();
            let stats = &mut self.stats;
            move |rec: BendersIteration| {
                if let Some(log) = log {
                    log(&rec);
                }
                stats.iterations.push(rec);
            }
        })
        .map_err(ApwlError::from)
    }
}

/// Runs the L-shaped iteration for one piecewise subproblem. Cuts in `pool`
/// are reused and extended; the pool's epigraph bounds are computed on first
/// use.
pub fn benders_solve(
    scp: &SeparableConcaveProgram,
    approx: &[Approximator],
    grouping: &Grouping,
    pool: &mut CutPool,
    rel_gap: f64,
    options: &BendersOptions,
    on_iteration: impl FnMut(BendersIteration),
) -> Result<SpSolution, BendersError> {
    benders_solve_with_cutoff(scp, approx, grouping, pool, rel_gap, None, options, on_iteration)
}

/// [`benders_solve`] with a known valid upper bound on the subproblem
/// optimum, used to prune master solves.
#[allow(clippy::too_many_arguments)]
pub fn benders_solve_with_cutoff(
    scp: &SeparableConcaveProgram,
    approx: &[Approximator],
    grouping: &Grouping,
    pool: &mut CutPool,
    rel_gap: f64,
    cutoff: Option<f64>,
    options: &BendersOptions,
    mut on_iteration: impl FnMut(BendersIteration),
) -> Result<SpSolution, BendersError> {
    let n = scp.num_structural();
    let groups = grouping.block_groups(scp)?;

    // Master-only program when there is no operational part.
    if groups.is_empty() {
        let (sol, objective, lower) = solve_master(scp, approx, pool, &groups, rel_gap, cutoff)?;
        let y = sol.primal[..n].to_vec();
        return Ok(SpSolution { y, block_x: Vec::new(), objective, proven_lower: lower });
    }

    if pool.group_lower_bounds.len() != groups.len() {
        let bounds: Vec<Result<f64, BendersError>> = groups
            .par_iter()
            .map(|blocks| {
                let mut total = 0.0;
                for &b in blocks {
                    total += block_lower_bound(scp, b)?;
                }
                Ok(total)
            })
            .collect();
        pool.group_lower_bounds = bounds.into_iter().collect::<Result<Vec<_>, _>>()?;
    }

    let master_gap = (rel_gap * options.master_gap_factor).max(1e-9);
    let mut best: Option<SpSolution> = None;
    let mut best_ub = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;

    for iteration in 1..=options.max_iterations {
        let timer = Instant::now();
        let (msol, _master_obj, master_lower) =
            solve_master(scp, approx, pool, &groups, master_gap, cutoff.map(|c| best_ub.min(c)).or(Some(best_ub).filter(|b| b.is_finite())))?;
        let y = msol.primal[..n].to_vec();
        let theta0 = msol.primal.len() - groups.len();
        let thetas = &msol.primal[theta0..];
        lower = lower.max(master_lower);

        // Recourse at y: all block LPs in parallel, aggregation serialized in
        // group order so the outcome is independent of completion order.
        let flat: Vec<(usize, usize)> = groups
            .iter()
            .enumerate()
            .flat_map(|(g, bs)| bs.iter().map(move |&b| (g, b)))
            .collect();
        let solved: Vec<Result<BlockCut, BendersError>> =
            flat.par_iter().map(|&(_, b)| solve_block(scp, b, &y)).collect();
        let mut results: Vec<(f64, BendersCut, Vec<(usize, Vec<f64>)>)> = groups
            .iter()
            .enumerate()
            .map(|(g, _)| (0.0, BendersCut { group: g, intercept: 0.0, coefficients: vec![0.0; n] }, Vec::new()))
            .collect();
        for ((g, b), part) in flat.into_iter().zip(solved) {
            let part = part?;
            let entry = &mut results[g];
            entry.0 += part.value;
            entry.1.intercept += part.intercept;
            for (c, p) in entry.1.coefficients.iter_mut().zip(&part.coefficients) {
                *c += p;
            }
            entry.2.push((b, part.x));
        }
        let recourse: f64 = results.iter().map(|(v, _, _)| v).sum();
        let approx_part = msol.objective - thetas.iter().sum::<f64>();
        let upper = approx_part + recourse;
        if upper < best_ub {
            best_ub = upper;
            let mut block_x: Vec<Vec<f64>> = vec![Vec::new(); scp.blocks.len()];
            for (_, _, xs) in &results {
                for (b, x) in xs {
                    block_x[*b] = x.clone();
                }
            }
            best = Some(SpSolution {
                y: y.clone(),
                block_x,
                objective: upper,
                proven_lower: lower,
            });
        }

        let mut added = 0;
        for (g, (value, cut, _)) in results.iter().enumerate() {
            if *value > thetas[g] + 1e-9 * value.abs().max(1.0) {
                pool.cuts.push(cut.clone());
                added += 1;
            }
        }
        on_iteration(BendersIteration {
            iteration,
            master_bound: lower,
            recourse_value: recourse,
            cuts_added: added,
            wall_secs: timer.elapsed().as_secs_f64(),
        });

        let converged = best_ub - lower <= rel_gap * best_ub.abs().max(1.0);
        if converged || added == 0 {
            let mut sp = best.expect("an incumbent exists after an iteration");
            sp.proven_lower = lower;
            return Ok(sp);
        }
    }
    Err(BendersError::IterationLimit(options.max_iterations))
}

/// Builds and solves the master: structural variables with piecewise
/// encodings plus one epigraph variable per group bounded below by its pool
/// cuts and bounding-relaxation constant.
fn solve_master(
    scp: &SeparableConcaveProgram,
    approx: &[Approximator],
    pool: &CutPool,
    groups: &[Vec<usize>],
    gap: f64,
    cutoff: Option<f64>,
) -> Result<(lpcore::VertexSolution, f64, f64), BendersError> {
    let n = scp.num_structural();
    let mut lp = LinearProgram::new(n);
    lp.objective_offset = scp.objective_offset;
    for j in 0..n {
        lp.bounds[j] = VarBound::new(scp.bounds[j].0, scp.bounds[j].1);
    }
    let mut coupling_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); scp.coupling.num_rows()];
    for &(r, c, v) in &scp.coupling.entries {
        coupling_rows[r].push((c, v));
    }
    for (i, coeffs) in coupling_rows.iter().enumerate() {
        lp.add_row(coeffs, scp.coupling.senses[i], scp.coupling.rhs[i]);
    }
    for (j, a) in approx.iter().enumerate() {
        match a.kind {
            ApproxKind::Linear(slope) => lp.objective[j] += slope,
            ApproxKind::Constant(v) => lp.objective_offset += v,
            ApproxKind::Curved(_) => {}
        }
    }
    let mut integer = vec![false; n];
    integer.copy_from_slice(&scp.integer);
    let base = MixedIntegerProgram::new(lp, integer);
    let (mut mip, _encs) = encode_pwl_objective(&pwl_terms(approx), &base)?;
    // Epigraph variables and pooled cuts.
    let theta0 = mip.lp.num_vars;
    for g in 0..groups.len() {
        let lb = pool.group_lower_bounds[g];
        mip.lp.add_var(1.0, VarBound::new(lb, f64::INFINITY));
        mip.integer.push(false);
    }
    for cut in &pool.cuts {
        let mut coeffs: Vec<(usize, f64)> = vec![(theta0 + cut.group, 1.0)];
        for (j, &c) in cut.coefficients.iter().enumerate() {
            if c != 0.0 {
                coeffs.push((j, -c));
            }
        }
        mip.lp.add_row(&coeffs, Sense::Ge, cut.intercept);
    }
    let sol = lpcore::solve_milp_with_cutoff(&mip, gap, cutoff)?;
    match sol.status {
        SolveStatus::Infeasible => Err(BendersError::MasterInfeasible),
        SolveStatus::Unbounded => Err(BendersError::UnboundedBlock(usize::MAX)),
        SolveStatus::Optimal => {
            let obj = sol.objective;
            let lower = sol.lower_bound;
            Ok((sol, obj, lower))
        }
    }
}
