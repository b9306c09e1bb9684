//! Exhaustive oracles for desk-scale optimization tests.
//!
//! Vertices of `{x : A x {=,<=,>=} b, l <= x <= u}` are enumerated by solving
//! every n-subset of active hyperplanes (constraint rows and finite bounds)
//! and keeping the feasible, deduplicated solutions. Combined with integer
//! enumeration this minimizes an arbitrary objective supplied as a closure,
//! independently of any LP machinery. Only intended for small dimensions.

/// Row sense mirror kept local so the oracle shares no code with the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Eq,
    Le,
    Ge,
}

/// Dense polytope description.
#[derive(Debug, Clone)]
pub struct Polytope {
    /// Dense rows of the constraint matrix.
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Polytope {
    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        for (j, &v) in x.iter().enumerate() {
            if v < self.lower[j] - tol || v > self.upper[j] + tol {
                return false;
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let ok = match self.senses[i] {
                RowSense::Eq => (lhs - self.rhs[i]).abs() <= tol * (1.0 + self.rhs[i].abs()),
                RowSense::Le => lhs <= self.rhs[i] + tol * (1.0 + self.rhs[i].abs()),
                RowSense::Ge => lhs >= self.rhs[i] - tol * (1.0 + self.rhs[i].abs()),
            };
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Solves the square system given by the selected hyperplanes. Returns None
/// when singular.
fn solve_square(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col][col].abs();
        for r in (col + 1)..n {
            if m[r][col].abs() > best {
                piv = r;
                best = m[r][col].abs();
            }
        }
        if best < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let d = m[col][col];
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col] / d;
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Enumerates the vertices of the polytope. `tol` controls feasibility checks
/// and deduplication.
pub fn enumerate_vertices(p: &Polytope, tol: f64) -> Vec<Vec<f64>> {
    let n = p.num_vars();
    if n == 0 {
        return vec![Vec::new()];
    }
    // Candidate hyperplanes: every row as equality, every finite bound.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (i, row) in p.rows.iter().enumerate() {
        planes.push((row.clone(), p.rhs[i]));
    }
    for j in 0..n {
        if p.lower[j].is_finite() {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            planes.push((r, p.lower[j]));
        }
        if p.upper[j].is_finite() && p.upper[j] != p.lower[j] {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            planes.push((r, p.upper[j]));
        }
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut pick = vec![0usize; n];
    enumerate_subsets(planes.len(), n, &mut pick, 0, 0, &mut |chosen| {
        let a: Vec<Vec<f64>> = chosen.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = chosen.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(&a, &b) {
            if p.is_feasible(&x, tol)
                && !found
                    .iter()
                    .any(|v| v.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 10.0 * tol))
            {
                found.push(x);
            }
        }
    });
    found
}

fn enumerate_subsets(
    total: usize,
    want: usize,
    pick: &mut Vec<usize>,
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == want {
        f(&pick[..want]);
        return;
    }
    let remaining = want - depth;
    for i in start..=total.saturating_sub(remaining) {
        pick[depth] = i;
        enumerate_subsets(total, want, pick, depth + 1, i + 1, f);
    }
}

/// Result of an exhaustive minimization.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub point: Vec<f64>,
}

/// Minimizes `objective` over the polytope crossed with integer assignments:
/// for every integral assignment of the variables in `integer_vars` (within
/// their bounds), the continuous remainder is restricted accordingly and the
/// objective is evaluated at every vertex. Correct whenever the objective is
/// concave in the continuous variables. Returns None if infeasible everywhere.
pub fn minimize_concave(
    p: &Polytope,
    integer_vars: &[usize],
    objective: &dyn Fn(&[f64]) -> f64,
    tol: f64,
) -> Option<OracleResult> {
    let mut best: Option<OracleResult> = None;
    let mut assignment: Vec<i64> = Vec::new();
    enumerate_integer_assignments(p, integer_vars, 0, &mut assignment, &mut |assign| {
        let mut fixed = p.clone();
        for (&j, &v) in integer_vars.iter().zip(assign.iter()) {
            fixed.lower[j] = v as f64;
            fixed.upper[j] = v as f64;
        }
        for x in enumerate_vertices(&fixed, tol) {
            let val = objective(&x);
            let better = match &best {
                None => true,
                Some(b) => val < b.objective,
            };
            if better {
                best = Some(OracleResult { objective: val, point: x });
            }
        }
    });
    best
}

fn enumerate_integer_assignments(
    p: &Polytope,
    vars: &[usize],
    depth: usize,
    assignment: &mut Vec<i64>,
    f: &mut impl FnMut(&[i64]),
) {
    if depth == vars.len() {
        f(assignment);
        return;
    }
    let j = vars[depth];
    let lo = p.lower[j].ceil() as i64;
    let hi = p.upper[j].floor() as i64;
    for v in lo..=hi {
        assignment.push(v);
        enumerate_integer_assignments(p, vars, depth + 1, assignment, f);
        assignment.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_polytope_has_four_vertices() {
        let p = Polytope {
            rows: vec![],
            senses: vec![],
            rhs: vec![],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let vs = enumerate_vertices(&p, 1e-9);
        assert_eq!(vs.len(), 4);
    }

    #[test]
    fn triangle_vertices() {
        // x + y <= 4, y <= 3, x,y >= 0 has vertices (0,0),(4,0),(1,3),(0,3).
        let p = Polytope {
            rows: vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            senses: vec![RowSense::Le, RowSense::Le],
            rhs: vec![4.0, 3.0],
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, f64::INFINITY],
        };
        let mut vs = enumerate_vertices(&p, 1e-9);
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vs.len(), 4);
        let obj = |x: &[f64]| -x[0] - 2.0 * x[1];
        let best = vs.iter().map(|v| obj(v)).fold(f64::INFINITY, f64::min);
        assert!((best + 7.0).abs() < 1e-9);
    }

    #[test]
    fn integer_cross_product() {
        // One integer in {0,..,2} shifting a segment; concave objective.
        let p = Polytope {
            rows: vec![vec![1.0, 1.0]],
            senses: vec![RowSense::Le],
            rhs: vec![2.0],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
        };
        let obj = |x: &[f64]| x[1].sqrt() - x[0];
        let r = minimize_concave(&p, &[0], &obj, 1e-9).unwrap();
        assert!((r.objective + 2.0).abs() < 1e-9, "{:?}", r);
    }
}
