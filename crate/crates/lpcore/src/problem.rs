//! Problem containers: linear programs in sparse triplet form and their
//! mixed-integer extension.

use crate::error::LpError;

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
    Ge,
}

/// Bounds of a single variable. `lower` may be `NEG_INFINITY` only for
/// variables explicitly declared free; `upper` may be `INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBound {
    pub lower: f64,
    pub upper: f64,
}

impl VarBound {
    pub fn new(lower: f64, upper: f64) -> Self {
        VarBound { lower, upper }
    }

    pub fn nonnegative() -> Self {
        VarBound { lower: 0.0, upper: f64::INFINITY }
    }

    pub fn fixed(v: f64) -> Self {
        VarBound { lower: v, upper: v }
    }

    pub fn free() -> Self {
        VarBound { lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }
}

/// A linear program `min c'x + offset  s.t.  Ax {=,<=,>=} b, l <= x <= u`
/// with `A` kept as sparse triplets.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    /// (row, col, value) triplets; duplicate (row, col) entries are summed.
    pub entries: Vec<(usize, usize, f64)>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    /// An empty program over `num_vars` nonnegative variables with zero objective.
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            objective_offset: 0.0,
            entries: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![VarBound::nonnegative(); num_vars],
        }
    }

    pub fn num_rows(&self) -> usize {
        self.senses.len()
    }

    /// Appends a variable and returns its column index.
    pub fn add_var(&mut self, objective: f64, bound: VarBound) -> usize {
        self.num_vars += 1;
        self.objective.push(objective);
        self.bounds.push(bound);
        self.num_vars - 1
    }

    /// Appends a row given its nonzero coefficients; returns the row index.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let row = self.senses.len();
        for &(col, val) in coeffs {
            if val != 0.0 {
                self.entries.push((row, col, val));
            }
        }
        self.senses.push(sense);
        self.rhs.push(rhs);
        row
    }

    /// Checks index ranges, NaN/Inf coefficients, and bound ordering.
    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars || self.bounds.len() != self.num_vars {
            return Err(LpError::MalformedProblem(format!(
                "objective/bounds length mismatch: {} vars, {} costs, {} bounds",
                self.num_vars,
                self.objective.len(),
                self.bounds.len()
            )));
        }
        if self.rhs.len() != self.senses.len() {
            return Err(LpError::MalformedProblem("rhs/senses length mismatch".into()));
        }
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::MalformedProblem(format!("objective[{i}] is not finite")));
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(LpError::MalformedProblem("objective offset is not finite".into()));
        }
        for (i, r) in self.rhs.iter().enumerate() {
            if !r.is_finite() {
                return Err(LpError::MalformedProblem(format!("rhs[{i}] is not finite")));
            }
        }
        let m = self.num_rows();
        for &(row, col, val) in &self.entries {
            if row >= m || col >= self.num_vars {
                return Err(LpError::MalformedProblem(format!(
                    "entry ({row},{col}) out of range ({m} rows, {} cols)",
                    self.num_vars
                )));
            }
            if !val.is_finite() {
                return Err(LpError::MalformedProblem(format!(
                    "entry ({row},{col}) is not finite"
                )));
            }
        }
        for (i, b) in self.bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() {
                return Err(LpError::MalformedProblem(format!("bounds[{i}] contain NaN")));
            }
            if b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(LpError::MalformedProblem(format!("bounds[{i}] are reversed infinities")));
            }
            if b.lower > b.upper {
                return Err(LpError::MalformedProblem(format!(
                    "bounds[{i}] empty: [{}, {}]",
                    b.lower, b.upper
                )));
            }
        }
        Ok(())
    }

    /// Column-wise view of the constraint matrix with duplicates summed.
    pub(crate) fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vars];
        for &(row, col, val) in &self.entries {
            cols[col].push((row, val));
        }
        for col in cols.iter_mut() {
            col.sort_by_key(|&(r, _)| r);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => merged.push((r, v)),
                }
            }
            merged.retain(|&(_, v)| v != 0.0);
            *col = merged;
        }
        cols
    }
}

/// A linear program plus an integrality mask over its variables.
#[derive(Debug, Clone)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    /// `integer[j]` marks variable `j` as integral.
    pub integer: Vec<bool>,
}

impl MixedIntegerProgram {
    pub fn continuous(lp: LinearProgram) -> Self {
        let n = lp.num_vars;
        MixedIntegerProgram { lp, integer: vec![false; n] }
    }

    pub fn new(lp: LinearProgram, integer: Vec<bool>) -> Self {
        MixedIntegerProgram { lp, integer }
    }

    pub fn num_integers(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        if self.integer.len() != self.lp.num_vars {
            return Err(LpError::MalformedProblem("integrality mask length mismatch".into()));
        }
        for (j, &is_int) in self.integer.iter().enumerate() {
            if is_int {
                let b = self.lp.bounds[j];
                if !b.lower.is_finite() || !b.upper.is_finite() {
                    return Err(LpError::MalformedProblem(format!(
                        "integer variable {j} must have finite bounds"
                    )));
                }
            }
        }
        Ok(())
    }
}
