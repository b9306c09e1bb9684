//! The separable concave program abstraction: concave diagonal objective
//! terms over structural variables, a linear coupling system on those
//! variables, and one linear block per first-stage scenario node.

use lpcore::{LinearProgram, MixedIntegerProgram, Sense, VarBound};

use crate::cost::ConcaveCostFn;
use crate::error::ApwlError;

/// Linear rows over the structural variables only.
#[derive(Debug, Clone, Default)]
pub struct CouplingSystem {
    pub entries: Vec<(usize, usize, f64)>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
}

impl CouplingSystem {
    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }

    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) {
        let row = self.senses.len();
        for &(col, v) in coeffs {
            if v != 0.0 {
                self.entries.push((row, col, v));
            }
        }
        self.senses.push(sense);
        self.rhs.push(rhs);
    }
}

/// One first-stage scenario block: `B x + D y {sense} d` with objective
/// coefficients already weighted by node probability and discounting.
#[derive(Debug, Clone)]
pub struct ScenarioBlock {
    pub num_x: usize,
    /// Probability- and discount-weighted cost vector over the block's x.
    pub cost: Vec<f64>,
    /// Upper bounds on x (lower bounds are all zero).
    pub x_upper: Vec<f64>,
    /// (row, local x column, coefficient)
    pub b_entries: Vec<(usize, usize, f64)>,
    /// (row, structural column, coefficient)
    pub d_entries: Vec<(usize, usize, f64)>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    /// Scenario-tree node this block came from, when applicable.
    pub source_node: Option<usize>,
}

impl ScenarioBlock {
    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }
}

/// `min sum_i f_i(y_i) + sum_blocks cost' x  s.t.  A y {sense} b,
/// B x + D y {sense} d per block, bounds on y, x >= 0, integrality on y`.
#[derive(Debug, Clone)]
pub struct SeparableConcaveProgram {
    pub costs: Vec<ConcaveCostFn>,
    /// Finite, nonnegative bounds per structural variable.
    pub bounds: Vec<(f64, f64)>,
    pub integer: Vec<bool>,
    pub coupling: CouplingSystem,
    pub blocks: Vec<ScenarioBlock>,
    pub objective_offset: f64,
}

impl SeparableConcaveProgram {
    pub fn new(costs: Vec<ConcaveCostFn>, bounds: Vec<(f64, f64)>) -> Self {
        let n = costs.len();
        SeparableConcaveProgram {
            costs,
            bounds,
            integer: vec![false; n],
            coupling: CouplingSystem::default(),
            blocks: Vec::new(),
            objective_offset: 0.0,
        }
    }

    pub fn num_structural(&self) -> usize {
        self.costs.len()
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<(), ApwlError> {
        let n = self.num_structural();
        if self.bounds.len() != n || self.integer.len() != n {
            return Err(ApwlError::Malformed(
                "costs, bounds and integrality mask must have equal length".into(),
            ));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(ApwlError::Malformed(format!(
                    "structural variable {j} needs finite bounds, got [{lo}, {hi}]"
                )));
            }
            if lo < 0.0 {
                return Err(ApwlError::Malformed(format!(
                    "structural variable {j} has negative lower bound {lo}"
                )));
            }
            if lo > hi {
                return Err(ApwlError::Malformed(format!(
                    "structural variable {j} has empty bounds [{lo}, {hi}]"
                )));
            }
        }
        for &(row, col, v) in &self.coupling.entries {
            if row >= self.coupling.num_rows() || col >= n || !v.is_finite() {
                return Err(ApwlError::Malformed("coupling system entry out of range".into()));
            }
        }
        for (bi, blk) in self.blocks.iter().enumerate() {
            if blk.cost.len() != blk.num_x || blk.x_upper.len() != blk.num_x {
                return Err(ApwlError::Malformed(format!(
                    "block {bi}: cost/bound vectors must match num_x"
                )));
            }
            let m = blk.num_rows();
            for &(row, col, v) in &blk.b_entries {
                if row >= m || col >= blk.num_x || !v.is_finite() {
                    return Err(ApwlError::Malformed(format!("block {bi}: B entry out of range")));
                }
            }
            for &(row, col, v) in &blk.d_entries {
                if row >= m || col >= n || !v.is_finite() {
                    return Err(ApwlError::Malformed(format!("block {bi}: D entry out of range")));
                }
            }
        }
        Ok(())
    }

    /// Exact objective at a candidate point, snapping structural values that
    /// sit within roundoff of zero so the lower-semicontinuous rule applies.
    pub fn exact_objective(&self, y: &[f64], block_x: &[Vec<f64>]) -> f64 {
        let mut total = self.objective_offset;
        for (j, f) in self.costs.iter().enumerate() {
            let snap = 1e-9 * self.bounds[j].1.max(1.0);
            let v = if y[j].abs() <= snap { 0.0 } else { y[j].max(0.0) };
            total += f.at(v);
        }
        for (blk, x) in self.blocks.iter().zip(block_x) {
            total += blk.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        }
        total
    }

    /// Assembles the extensive-form linear part (no concave objective): all
    /// structural variables followed by each block's variables, with the
    /// coupling rows and every block row. Structural objective coefficients
    /// are zero; callers add linear slopes or piecewise encodings on top.
    pub fn assemble_linear(&self) -> (MixedIntegerProgram, Vec<usize>) {
        let n = self.num_structural();
        let mut lp = LinearProgram::new(n);
        lp.objective_offset = self.objective_offset;
        for j in 0..n {
            lp.bounds[j] = VarBound::new(self.bounds[j].0, self.bounds[j].1);
        }
        let mut block_offsets = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let off = lp.num_vars;
            block_offsets.push(off);
            for k in 0..blk.num_x {
                lp.add_var(blk.cost[k], VarBound::new(0.0, blk.x_upper[k]));
            }
        }
        let mut coupling_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.coupling.num_rows()];
        for &(r, c, v) in &self.coupling.entries {
            coupling_rows[r].push((c, v));
        }
        for (i, coeffs) in coupling_rows.iter().enumerate() {
            lp.add_row(coeffs, self.coupling.senses[i], self.coupling.rhs[i]);
        }
        for (bi, blk) in self.blocks.iter().enumerate() {
            let off = block_offsets[bi];
            let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); blk.num_rows()];
            for &(r, c, v) in &blk.b_entries {
                rows[r].push((off + c, v));
            }
            for &(r, c, v) in &blk.d_entries {
                rows[r].push((c, v));
            }
            for (r, coeffs) in rows.iter().enumerate() {
                lp.add_row(coeffs, blk.senses[r], blk.rhs[r]);
            }
        }
        let mut integer = vec![false; lp.num_vars];
        integer[..n].copy_from_slice(&self.integer);
        (MixedIntegerProgram::new(lp, integer), block_offsets)
    }
}
