//! Convex-combination encoding of piecewise-linear objective terms with one
//! segment-selection binary per piece and adjacency constraints.

use crate::error::LpError;
use crate::problem::{MixedIntegerProgram, Sense, VarBound};

/// A piecewise-linear objective term for one variable, given by breakpoint
/// abscissae and matching ordinates.
#[derive(Debug, Clone)]
pub struct PwlTerm {
    pub var: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Bookkeeping for one encoded term: column indices of the added variables.
#[derive(Debug, Clone)]
pub struct PwlEncoding {
    pub var: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Epigraph column carrying the objective contribution.
    pub value_var: usize,
    /// Convex-combination weight columns, one per breakpoint.
    pub weight_vars: Vec<usize>,
    /// Segment-selection binaries, one per segment (empty for a single segment).
    pub segment_vars: Vec<usize>,
}

/// Extends `base` with the encodings of `terms`. Each term contributes its
/// interpolated value to the objective through an epigraph variable; a term
/// with exactly two breakpoints degenerates to a plain linear objective
/// adjustment with no added variables.
///
/// The encoded program satisfies: weights are nonnegative and sum to one, at
/// most two adjacent weights are nonzero in any feasible integer assignment,
/// and the term variable equals the weighted sum of breakpoints.
pub fn encode_pwl_objective(
    terms: &[PwlTerm],
    base: &MixedIntegerProgram,
) -> Result<(MixedIntegerProgram, Vec<PwlEncoding>), LpError> {
    base.validate()?;
    let mut mip = base.clone();
    let mut encodings = Vec::with_capacity(terms.len());
    for term in terms {
        let enc = encode_one(term, &mut mip)?;
        encodings.push(enc);
    }
    mip.validate()?;
    Ok((mip, encodings))
}

fn encode_one(term: &PwlTerm, mip: &mut MixedIntegerProgram) -> Result<PwlEncoding, LpError> {
    let k = term.xs.len();
    if term.var >= mip.lp.num_vars {
        return Err(LpError::MalformedProblem(format!(
            "pwl term references variable {} of {}",
            term.var, mip.lp.num_vars
        )));
    }
    if k < 2 || term.ys.len() != k {
        return Err(LpError::MalformedProblem(
            "pwl term needs >= 2 breakpoints with matching ordinates".into(),
        ));
    }
    let b = mip.lp.bounds[term.var];
    if !b.lower.is_finite() || !b.upper.is_finite() {
        return Err(LpError::MalformedProblem(
            "pwl-encoded variables need finite bounds".into(),
        ));
    }
    let span = (term.xs[k - 1] - term.xs[0]).abs().max(b.upper - b.lower);
    for w in term.xs.windows(2) {
        if w[1] - w[0] <= 1e-9 * span.max(1e-300) {
            return Err(LpError::DegenerateBreakpoints(format!(
                "breakpoints {} and {} coincide within tolerance",
                w[0], w[1]
            )));
        }
    }
    if term.xs[0] > b.lower + 1e-9 * (1.0 + span) || term.xs[k - 1] < b.upper - 1e-9 * (1.0 + span) {
        return Err(LpError::MalformedProblem(format!(
            "breakpoints [{}, {}] do not cover bounds [{}, {}]",
            term.xs[0],
            term.xs[k - 1],
            b.lower,
            b.upper
        )));
    }
    for &y in &term.ys {
        if !y.is_finite() {
            return Err(LpError::MalformedProblem("pwl ordinate is not finite".into()));
        }
    }

    if k == 2 {
        // One segment: the interpolant is a line through the two points.
        let slope = (term.ys[1] - term.ys[0]) / (term.xs[1] - term.xs[0]);
        mip.lp.objective[term.var] += slope;
        mip.lp.objective_offset += term.ys[0] - slope * term.xs[0];
        return Ok(PwlEncoding {
            var: term.var,
            xs: term.xs.clone(),
            ys: term.ys.clone(),
            value_var: usize::MAX,
            weight_vars: Vec::new(),
            segment_vars: Vec::new(),
        });
    }

    let y_lo = term.ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_hi = term.ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let value_var = mip.lp.add_var(1.0, VarBound::new(y_lo, y_hi));
    mip.integer.push(false);
    let weight_vars: Vec<usize> = (0..k)
        .map(|_| {
            let v = mip.lp.add_var(0.0, VarBound::new(0.0, 1.0));
            mip.integer.push(false);
            v
        })
        .collect();
    let segment_vars: Vec<usize> = (0..k - 1)
        .map(|_| {
            let v = mip.lp.add_var(0.0, VarBound::new(0.0, 1.0));
            mip.integer.push(true);
            v
        })
        .collect();

    // sum of weights = 1
    let coeffs: Vec<(usize, f64)> = weight_vars.iter().map(|&w| (w, 1.0)).collect();
    mip.lp.add_row(&coeffs, Sense::Eq, 1.0);
    // variable linking: x - sum w_j * xs_j = 0
    let mut coeffs: Vec<(usize, f64)> = vec![(term.var, 1.0)];
    coeffs.extend(weight_vars.iter().zip(&term.xs).map(|(&w, &x)| (w, -x)));
    mip.lp.add_row(&coeffs, Sense::Eq, 0.0);
    // value linking: value - sum w_j * ys_j = 0
    let mut coeffs: Vec<(usize, f64)> = vec![(value_var, 1.0)];
    coeffs.extend(weight_vars.iter().zip(&term.ys).map(|(&w, &y)| (w, -y)));
    mip.lp.add_row(&coeffs, Sense::Eq, 0.0);
    // exactly one active segment
    let coeffs: Vec<(usize, f64)> = segment_vars.iter().map(|&z| (z, 1.0)).collect();
    mip.lp.add_row(&coeffs, Sense::Eq, 1.0);
    // adjacency: each weight is covered by its neighbouring segments
    for (j, &w) in weight_vars.iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = vec![(w, 1.0)];
        if j > 0 {
            coeffs.push((segment_vars[j - 1], -1.0));
        }
        if j < k - 1 {
            coeffs.push((segment_vars[j], -1.0));
        }
        mip.lp.add_row(&coeffs, Sense::Le, 0.0);
    }

    Ok(PwlEncoding {
        var: term.var,
        xs: term.xs.clone(),
        ys: term.ys.clone(),
        value_var,
        weight_vars,
        segment_vars,
    })
}
