//! Concave cost functions built from power terms plus a fixed charge, and
//! their piecewise-linear under-approximators.

use serde::{Deserialize, Serialize};

use crate::error::ApwlError;

/// One `q * y^r` term with `q >= 0` and `r` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

/// A lower-semicontinuous concave cost: `f(0) = 0` and
/// `f(y) = sum_i q_i y^{r_i} + w` for `y > 0`. Monotone nondecreasing on the
/// nonnegative axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcaveCostFn {
    pub powers: Vec<PowerTerm>,
    pub fixed_charge: f64,
}

impl ConcaveCostFn {
    pub fn new(powers: Vec<PowerTerm>, fixed_charge: f64) -> Result<Self, ApwlError> {
        for t in &powers {
            if !(t.coefficient >= 0.0) || !t.coefficient.is_finite() {
                return Err(ApwlError::Malformed(format!(
                    "power coefficient must be finite and >= 0, got {}",
                    t.coefficient
                )));
            }
            if !(t.exponent > 0.0 && t.exponent <= 1.0) {
                return Err(ApwlError::Malformed(format!(
                    "power exponent must lie in (0, 1], got {}",
                    t.exponent
                )));
            }
        }
        if !(fixed_charge >= 0.0) || !fixed_charge.is_finite() {
            return Err(ApwlError::Malformed(format!(
                "fixed charge must be finite and >= 0, got {fixed_charge}"
            )));
        }
        Ok(ConcaveCostFn { powers, fixed_charge })
    }

    pub fn zero() -> Self {
        ConcaveCostFn { powers: Vec::new(), fixed_charge: 0.0 }
    }

    pub fn linear(slope: f64) -> Self {
        ConcaveCostFn {
            powers: vec![PowerTerm { coefficient: slope, exponent: 1.0 }],
            fixed_charge: 0.0,
        }
    }

    /// Exact evaluation per the piecewise rule. Errors on negative input.
    pub fn eval(&self, y: f64) -> Result<f64, ApwlError> {
        if y < 0.0 {
            return Err(ApwlError::NegativeInput(y));
        }
        Ok(self.at(y))
    }

    /// Infallible evaluation; the caller guarantees `y >= 0`.
    pub fn at(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0, "concave cost evaluated at {y}");
        if y == 0.0 {
            return 0.0;
        }
        let mut v = self.fixed_charge;
        for t in &self.powers {
            v += t.coefficient * y.powf(t.exponent);
        }
        v
    }

    /// True when the function is a line through the origin, in which case the
    /// piecewise machinery is bypassed entirely.
    pub fn is_linear(&self) -> bool {
        self.fixed_charge == 0.0 && self.powers.iter().all(|t| t.exponent == 1.0)
    }

    pub fn linear_slope(&self) -> f64 {
        debug_assert!(self.is_linear());
        self.powers.iter().map(|t| t.coefficient).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.fixed_charge == 0.0 && self.powers.iter().all(|t| t.coefficient == 0.0)
    }

    /// The same function scaled by `s > 0` (preserves concavity and f(0)=0).
    pub fn scaled(&self, s: f64) -> Self {
        debug_assert!(s >= 0.0);
        ConcaveCostFn {
            powers: self
                .powers
                .iter()
                .map(|t| PowerTerm { coefficient: t.coefficient * s, exponent: t.exponent })
                .collect(),
            fixed_charge: self.fixed_charge * s,
        }
    }
}

/// Exact evaluation per the piecewise rule of [`ConcaveCostFn`].
pub fn eval_concave(f: &ConcaveCostFn, y: f64) -> Result<f64, ApwlError> {
    f.eval(y)
}

/// A piecewise-linear under-approximator stored as strictly increasing
/// breakpoint abscissae with exact ordinates. The first and last breakpoints
/// pin the variable's bounds and never move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwlApprox {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl PwlApprox {
    pub fn num_breakpoints(&self) -> usize {
        self.xs.len()
    }

    pub fn span(&self) -> f64 {
        self.xs[self.xs.len() - 1] - self.xs[0]
    }

    /// Interpolated value at `y`, clamped into the covered span.
    pub fn value_at(&self, y: f64) -> f64 {
        let k = self.xs.len();
        let y = y.clamp(self.xs[0], self.xs[k - 1]);
        let j = match self.xs.binary_search_by(|x| x.total_cmp(&y)) {
            Ok(j) => return self.ys[j],
            Err(j) => j.clamp(1, k - 1),
        };
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let t = (y - x0) / (x1 - x0);
        self.ys[j - 1] + t * (self.ys[j] - self.ys[j - 1])
    }

    /// Inserts a breakpoint keeping abscissae sorted. The caller has already
    /// checked separation from existing breakpoints.
    pub(crate) fn insert(&mut self, x: f64, y: f64) {
        let j = self.xs.partition_point(|&v| v < x);
        self.xs.insert(j, x);
        self.ys.insert(j, y);
    }
}

/// Builds the chord interpolant of `f` on the given breakpoints. The result
/// under-approximates `f` on the span, is concave and continuous, and matches
/// `f` exactly at every breakpoint.
pub fn build_underapprox(f: &ConcaveCostFn, breakpoints: &[f64]) -> Result<PwlApprox, ApwlError> {
    if breakpoints.len() < 2 {
        return Err(ApwlError::Malformed(
            "an under-approximator needs at least two breakpoints".into(),
        ));
    }
    let span = breakpoints[breakpoints.len() - 1] - breakpoints[0];
    if !(span > 0.0) {
        return Err(ApwlError::DegenerateBreakpoints(format!(
            "span [{}, {}] is empty",
            breakpoints[0],
            breakpoints[breakpoints.len() - 1]
        )));
    }
    for w in breakpoints.windows(2) {
        if w[1] - w[0] <= 1e-9 * span {
            return Err(ApwlError::DegenerateBreakpoints(format!(
                "breakpoints {} and {} coincide within tolerance",
                w[0], w[1]
            )));
        }
    }
    let mut ys = Vec::with_capacity(breakpoints.len());
    for &x in breakpoints {
        ys.push(f.eval(x)?);
    }
    Ok(PwlApprox { xs: breakpoints.to_vec(), ys })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sqrt() -> ConcaveCostFn {
        ConcaveCostFn::new(vec![PowerTerm { coefficient: 2.0, exponent: 0.5 }], 0.0).unwrap()
    }

    #[test]
    fn fixed_charge_is_dropped_at_zero() {
        let f = ConcaveCostFn::new(vec![PowerTerm { coefficient: 2.0, exponent: 0.5 }], 3.0)
            .unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert_eq!(f.eval(4.0).unwrap(), 7.0);
    }

    #[test]
    fn linear_case_evaluates_to_identity() {
        let f = ConcaveCostFn::linear(1.0);
        for y in [0.0, 1.0, 2.5] {
            assert_eq!(f.eval(y).unwrap(), y);
        }
        assert!(f.is_linear());
    }

    #[test]
    fn negative_input_is_rejected() {
        assert!(matches!(two_sqrt().eval(-0.1), Err(ApwlError::NegativeInput(_))));
    }

    #[test]
    fn chord_from_origin() {
        let f = two_sqrt();
        let p = build_underapprox(&f, &[0.0, 4.0]).unwrap();
        assert!((p.value_at(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_at_breakpoints_and_chord_between() {
        let f = two_sqrt();
        let p = build_underapprox(&f, &[0.0, 1.0, 4.0]).unwrap();
        assert!((p.value_at(1.0) - 2.0).abs() < 1e-12);
        assert!((p.value_at(2.0) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_breakpoints_rejected() {
        let f = two_sqrt();
        assert!(matches!(
            build_underapprox(&f, &[0.0, 1.0, 1.0 + 1e-12, 4.0]),
            Err(ApwlError::DegenerateBreakpoints(_))
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ConcaveCostFn::new(vec![PowerTerm { coefficient: -1.0, exponent: 0.5 }], 0.0)
            .is_err());
        assert!(ConcaveCostFn::new(vec![PowerTerm { coefficient: 1.0, exponent: 1.5 }], 0.0)
            .is_err());
        assert!(ConcaveCostFn::new(vec![], -2.0).is_err());
    }
}
