//! Revised primal simplex over bounded variables with a dense explicit basis
//! inverse, product-form updates, and periodic refactorization.
//!
//! The solver runs two phases. Phase 1 starts from slacks where the residual
//! sign permits and artificials elsewhere, minimizing total artificial mass.
//! Phase 2 minimizes the true cost with artificials pinned to zero. A warm
//! start from a previous basis skips phase 1 when the basic point is feasible
//! and otherwise restores feasibility by driving bound violations out with a
//! composite infeasibility objective.

use crate::error::LpError;
use crate::problem::{LinearProgram, Sense, VarBound};
use crate::solution::{Basis, SolveStatus, VertexSolution};

/// Primal feasibility tolerance on constraint residuals.
pub const FEAS_TOL: f64 = 1e-8;
/// Pivot magnitude below which a column entry is treated as zero.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
const OPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VStat {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting nonbasic at zero.
    FreeZero,
}

/// Outcome of the internal iteration loop.
enum LoopEnd {
    Optimal,
    Unbounded,
}

pub(crate) struct Simplex {
    m: usize,
    /// Total augmented columns: structurals, slacks, artificials.
    n_total: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Phase-2 costs over augmented columns.
    cost: Vec<f64>,
    rhs: Vec<f64>,
    /// First artificial column index.
    art0: usize,
    basis: Vec<usize>,
    stat: Vec<VStat>,
    x: Vec<f64>,
    /// Dense basis inverse, column-major: `binv[k*m + i] = B^-1[i][k]`.
    binv: Vec<f64>,
    /// Cached reduced costs for `price_cost`; rebuilt on cost switches and
    /// refactorizations, updated per pivot from the pivot row otherwise.
    reduced: Vec<f64>,
    devex: Vec<f64>,
    price_cost: Vec<f64>,
    price_valid: bool,
    pivots_since_refactor: usize,
    refactor_every: usize,
    total_pivots: usize,
    degenerate_streak: usize,
    bland: bool,
    max_pivots: usize,
    bland_after: usize,
}

impl Simplex {
    pub(crate) fn build(lp: &LinearProgram) -> Simplex {
        let m = lp.num_rows();
        let n_struct = lp.num_vars;
        let mut cols = lp.columns();
        let mut lower: Vec<f64> = lp.bounds.iter().map(|b| b.lower).collect();
        let mut upper: Vec<f64> = lp.bounds.iter().map(|b| b.upper).collect();
        let mut cost = lp.objective.clone();

        // Slacks for inequality rows.
        for (i, s) in lp.senses.iter().enumerate() {
            let coeff = match s {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            cols.push(vec![(i, coeff)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            cost.push(0.0);
        }
        // One artificial per row; sign fixed at init time.
        let art0 = cols.len();
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            cost.push(0.0);
        }
        let n_total = cols.len();
        let max_pivots = 200 * (m + n_total) + 20_000;
        let bland_after = 10 * (m + n_total);
        let refactor_every = (m / 2).clamp(64, 500);
        Simplex {
            m,
            n_total,
            n_struct,
            cols,
            lower,
            upper,
            cost,
            rhs: lp.rhs.clone(),
            art0,
            basis: Vec::new(),
            stat: vec![VStat::AtLower; n_total],
            x: vec![0.0; n_total],
            binv: vec![0.0; m * m],
            reduced: vec![0.0; n_total],
            devex: vec![1.0; n_total],
            price_cost: vec![0.0; n_total],
            price_valid: false,
            pivots_since_refactor: 0,
            refactor_every,
            total_pivots: 0,
            degenerate_streak: 0,
            bland: false,
            max_pivots,
            bland_after,
        }
    }

    fn start_value(&self, j: usize) -> (VStat, f64) {
        let (l, u) = (self.lower[j], self.upper[j]);
        if l.is_finite() {
            (VStat::AtLower, l)
        } else if u.is_finite() {
            (VStat::AtUpper, u)
        } else {
            (VStat::FreeZero, 0.0)
        }
    }

    /// Cold start: nonbasics at bounds, slack or signed artificial basic per row.
    fn init_cold(&mut self) {
        for j in 0..self.art0 {
            let (s, v) = self.start_value(j);
            self.stat[j] = s;
            self.x[j] = v;
        }
        // Residual r = b - A x_N over candidate nonbasics.
        let mut r = self.rhs.clone();
        for j in 0..self.art0 {
            let xj = self.x[j];
            if xj != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * xj;
                }
            }
        }
        self.basis = vec![0; self.m];
        // Prefer the row's slack as the initial basic variable when its
        // residual sign allows a feasible value.
        let mut slack_of_row: Vec<Option<usize>> = vec![None; self.m];
        for j in self.n_struct..self.art0 {
            let (i, c) = self.cols[j][0];
            slack_of_row[i] = Some(if c > 0.0 { j } else { j });
        }
        for i in 0..self.m {
            let mut chosen = None;
            if let Some(sj) = slack_of_row[i] {
                let c = self.cols[sj][0].1;
                let v = r[i] / c;
                if v >= 0.0 {
                    chosen = Some((sj, v));
                }
            }
            let (bj, bv) = match chosen {
                Some(p) => p,
                None => {
                    let aj = self.art0 + i;
                    if r[i] < 0.0 {
                        self.cols[aj][0].1 = -1.0;
                    }
                    (aj, r[i].abs())
                }
            };
            self.basis[i] = bj;
            self.stat[bj] = VStat::Basic;
            self.x[bj] = bv;
        }
        self.refactor().expect("initial basis is diagonal and invertible");
    }

    /// Greedy triangular crash: slacks cover their rows; equality rows are
    /// covered by repeatedly assigning columns that touch exactly one
    /// uncovered row; anything left falls back to its artificial. The result
    /// is a valid (triangular, hence nonsingular) basis that is typically
    /// close to feasible for block-structured models, and any remaining bound
    /// violations are driven out by the composite restoration.
    fn crash_basis(&self) -> Basis {
        let m = self.m;
        let mut row_cover: Vec<Option<usize>> = vec![None; m];
        let mut uncovered = m;
        for j in self.n_struct..self.art0 {
            let (i, _) = self.cols[j][0];
            if row_cover[i].is_none() {
                row_cover[i] = Some(j);
                uncovered -= 1;
            }
        }
        // uncovered_count[j]: how many uncovered rows column j touches.
        let mut used = vec![false; self.n_struct];
        loop {
            if uncovered == 0 {
                break;
            }
            let mut progress = false;
            for j in 0..self.n_struct {
                if used[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut hit: Option<usize> = None;
                let mut count = 0;
                for &(i, v) in &self.cols[j] {
                    if row_cover[i].is_none() && v.abs() > 1e-7 {
                        count += 1;
                        hit = Some(i);
                        if count > 1 {
                            break;
                        }
                    }
                }
                if count == 1 {
                    let i = hit.unwrap();
                    row_cover[i] = Some(j);
                    used[j] = true;
                    uncovered -= 1;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        Basis {
            basic: (0..m).map(|i| row_cover[i].unwrap_or(self.art0 + i)).collect(),
            at_upper: Vec::new(),
        }
    }

    /// Warm start from a stored basis. Returns false if the basis is
    /// unusable (wrong size, duplicates, singular).
    fn init_warm(&mut self, basis: &Basis) -> bool {
        let basic = &basis.basic;
        if basic.len() != self.m {
            return false;
        }
        let mut seen = vec![false; self.n_total];
        for &j in basic {
            if j >= self.n_total || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        self.basis = basic.clone();
        // Artificials play no role in a warm start; pin them to zero.
        for j in self.art0..self.n_total {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
        }
        for j in 0..self.n_total {
            let (s, v) = self.start_value(j);
            self.stat[j] = s;
            self.x[j] = v;
        }
        // Nonbasics recorded at their upper bound go back there (unless the
        // bound has moved to infinity, where the lower bound is safer).
        for &j in &basis.at_upper {
            if j < self.n_total && !seen[j] && self.upper[j].is_finite() {
                self.stat[j] = VStat::AtUpper;
                self.x[j] = self.upper[j];
            }
        }
        for &j in basic {
            self.stat[j] = VStat::Basic;
        }
        if self.refactor().is_err() {
            return false;
        }
        self.recompute_basic_values();
        true
    }

    /// Rebuilds `binv` from the current basis: starting from the identity,
    /// applies one product-form pivot per basis column. Work happens in
    /// contiguous column slices of the (column-major) storage.
    fn refactor(&mut self) -> Result<(), LpError> {
        counters::REFACTORS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let m = self.m;
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        let mut w = vec![0.0; m];
        for k in 0..m {
            // w = current-inverse * column of basis variable k. Slots below k
            // already hold replaced columns; slots k.. still hold identity
            // columns, so the pivot is chosen among them.
            w.iter_mut().for_each(|v| *v = 0.0);
            for &(i, a) in &self.cols[self.basis[k]] {
                let col = &self.binv[i * m..(i + 1) * m];
                for r in 0..m {
                    w[r] += a * col[r];
                }
            }
            let mut p = usize::MAX;
            let mut best = 1e-12;
            for (r, &val) in w.iter().enumerate().skip(k) {
                if val.abs() > best {
                    best = val.abs();
                    p = r;
                }
            }
            if p == usize::MAX {
                return Err(LpError::Numerical("singular basis".into()));
            }
            let piv = w[p];
            for c in 0..m {
                let col = &mut self.binv[c * m..(c + 1) * m];
                let f = col[p] / piv;
                if f != 0.0 {
                    for r in 0..m {
                        if r != p {
                            col[r] -= w[r] * f;
                        }
                    }
                }
                col[p] = f;
            }
            // Move the replaced slot into position k so inverse rows line up
            // with basis order (a column permutation of the working basis is
            // a row permutation of its inverse).
            if p != k {
                for c in 0..m {
                    self.binv.swap(c * m + p, c * m + k);
                }
            }
        }
        self.pivots_since_refactor = 0;
        self.price_valid = false;
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n_total {
            if self.stat[j] != VStat::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        // x_B = B^-1 r
        let mut xb = vec![0.0; m];
        for k in 0..m {
            let rk = r[k];
            if rk != 0.0 {
                let col = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    xb[i] += rk * col[i];
                }
            }
        }
        for i in 0..m {
            self.x[self.basis[i]] = xb[i];
        }
    }

    /// Row duals: solves B' y = c_B, i.e. y[i] = sum_k c_B[k] * B^-1[k][i].
    fn duals_for(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        let mut y = vec![0.0; m];
        for i in 0..m {
            let col = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for k in 0..m {
                acc += cb[k] * col[k];
            }
            y[i] = acc;
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64], cost: &[f64]) -> f64 {
        let mut d = cost[j];
        for &(i, a) in &self.cols[j] {
            d -= y[i] * a;
        }
        d
    }

    /// w = B^-1 A_q.
    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(i, a) in &self.cols[q] {
            let col = &self.binv[i * m..(i + 1) * m];
            for r in 0..m {
                w[r] += a * col[r];
            }
        }
        w
    }

    /// Rebuilds the reduced-cost cache for `cost` and resets Devex weights.
    fn reprice(&mut self, cost: &[f64]) {
        let y = self.duals_for(cost);
        for j in 0..self.n_total {
            self.reduced[j] = if self.stat[j] == VStat::Basic {
                0.0
            } else {
                self.reduced_cost(j, &y, cost)
            };
            self.devex[j] = 1.0;
        }
        self.price_cost.copy_from_slice(cost);
        self.price_valid = true;
    }

    /// One pricing pass over the cached reduced costs, Devex-weighted.
    /// Returns the entering column, its direction (+1 grows), and its reduced
    /// cost. A `None` from the cache is confirmed against freshly computed
    /// reduced costs before optimality is declared.
    fn price(&mut self, cost: &[f64], allow: impl Fn(usize) -> bool) -> Option<(usize, f64, f64)> {
        if !self.price_valid || self.price_cost != cost {
            self.reprice(cost);
        }
        for attempt in 0..2 {
            let mut best: Option<(usize, f64, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..self.n_total {
                if self.stat[j] == VStat::Basic || !allow(j) {
                    continue;
                }
                if self.lower[j] == self.upper[j] {
                    continue; // pinned
                }
                let d = self.reduced[j];
                let (viol, dir) = match self.stat[j] {
                    VStat::AtLower => (-d, 1.0),
                    VStat::AtUpper => (d, -1.0),
                    VStat::FreeZero => (d.abs(), if d < 0.0 { 1.0 } else { -1.0 }),
                    VStat::Basic => unreachable!(),
                };
                if viol <= OPT_TOL {
                    continue;
                }
                if self.bland {
                    return Some((j, dir, d));
                }
                let score = viol * viol / self.devex[j].max(1e-12);
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir, d));
                }
            }
            if best.is_some() {
                return best;
            }
            if attempt == 0 {
                // Confirm optimality with exact reduced costs.
                self.reprice(cost);
            }
        }
        None
    }

    /// Ratio test for entering column `q` moving in `dir`. Returns the step,
    /// the leaving row (None for a bound flip), and w.
    fn ratio(&self, q: usize, dir: f64) -> (f64, Option<usize>, Vec<f64>) {
        let w = self.ftran(q);
        let span = self.upper[q] - self.lower[q];
        let mut best_t = if span.is_finite() { span } else { f64::INFINITY };
        let mut leave: Option<usize> = None;
        let mut leave_mag = 0.0;
        for i in 0..self.m {
            let rate = dir * w[i];
            let bj = self.basis[i];
            let (limit, _to_lower) = if rate > PIVOT_TOL {
                let l = self.lower[bj];
                if !l.is_finite() {
                    continue;
                }
                (((self.x[bj] - l) / rate).max(0.0), true)
            } else if rate < -PIVOT_TOL {
                let u = self.upper[bj];
                if !u.is_finite() {
                    continue;
                }
                (((u - self.x[bj]) / (-rate)).max(0.0), false)
            } else {
                continue;
            };
            let mag = w[i].abs();
            let tie = (limit - best_t).abs() <= 1e-10 * (1.0 + best_t.abs());
            let better = if tie {
                match leave {
                    None => true,
                    Some(r) => {
                        if self.bland {
                            self.basis[i] < self.basis[r]
                        } else {
                            mag > leave_mag
                        }
                    }
                }
            } else {
                limit < best_t
            };
            if better && limit <= best_t + 1e-10 * (1.0 + best_t.abs()) {
                best_t = best_t.min(limit);
                leave = Some(i);
                leave_mag = mag;
            }
        }
        (best_t, leave, w)
    }

    fn apply_step(&mut self, q: usize, dir: f64, t: f64, w: &[f64]) {
        if t > 0.0 {
            self.x[q] += dir * t;
            for i in 0..self.m {
                let bj = self.basis[i];
                self.x[bj] -= dir * t * w[i];
            }
        }
    }

    fn pivot(&mut self, q: usize, r: usize, w: &[f64]) {
        let m = self.m;
        let leaving = self.basis[r];
        // Snap the leaving variable to the bound it hit.
        let lv = self.x[leaving];
        let (l, u) = (self.lower[leaving], self.upper[leaving]);
        if l.is_finite() && (lv - l).abs() <= (u - lv).abs() {
            self.x[leaving] = l;
            self.stat[leaving] = VStat::AtLower;
        } else if u.is_finite() {
            self.x[leaving] = u;
            self.stat[leaving] = VStat::AtUpper;
        } else {
            self.x[leaving] = lv;
            self.stat[leaving] = VStat::AtLower; // unreachable for free basics
        }
        self.basis[r] = q;
        self.stat[q] = VStat::Basic;
        // Reduced-cost and Devex updates from the pivot row (computed against
        // the pre-update inverse).
        if self.price_valid {
            let m = self.m;
            let mut rho = vec![0.0; m];
            for c in 0..m {
                rho[c] = self.binv[c * m + r];
            }
            let alpha_q = w[r];
            let d_q = self.reduced[q];
            let theta = d_q / alpha_q;
            let gamma_ref = self.devex[q].max(1.0);
            for j in 0..self.n_total {
                if self.stat[j] == VStat::Basic || j == q {
                    continue;
                }
                let mut alpha_j = 0.0;
                for &(i, a) in &self.cols[j] {
                    alpha_j += rho[i] * a;
                }
                if alpha_j != 0.0 {
                    self.reduced[j] -= theta * alpha_j;
                    let cand = (alpha_j / alpha_q) * (alpha_j / alpha_q) * gamma_ref;
                    if cand > self.devex[j] {
                        self.devex[j] = cand;
                    }
                }
            }
            self.reduced[q] = 0.0;
            self.reduced[leaving] = -theta;
            self.devex[leaving] = (gamma_ref / (alpha_q * alpha_q)).max(1.0);
        }
        // Product-form update of B^-1.
        let piv = w[r];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let f = col[r] / piv;
            if f != 0.0 {
                for i in 0..m {
                    if i != r {
                        col[i] -= w[i] * f;
                    }
                }
            }
            col[r] = f;
        }
        self.pivots_since_refactor += 1;
        self.total_pivots += 1;
        counters::PIVOTS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        if self.pivots_since_refactor >= self.refactor_every {
            if self.refactor().is_err() {
                // Leave stale inverse; the residual check at extraction
                // triggers a Numerical error if this ever matters.
            }
            self.recompute_basic_values();
        }
    }

    /// Iterates to optimality for `cost`. `allow` filters entering columns.
    fn iterate(
        &mut self,
        cost: &[f64],
        allow: impl Fn(usize) -> bool + Copy,
        mut early_stop: impl FnMut(&Simplex) -> bool,
    ) -> Result<LoopEnd, LpError> {
        loop {
            if early_stop(self) {
                return Ok(LoopEnd::Optimal);
            }
            if self.total_pivots > self.max_pivots {
                return Err(LpError::IterationLimit(self.total_pivots));
            }
            if self.degenerate_streak > self.bland_after {
                self.bland = true;
            }
            let Some((q, dir, _d)) = self.price(cost, allow) else {
                return Ok(LoopEnd::Optimal);
            };
            let (t, leave, w) = self.ratio(q, dir);
            if !t.is_finite() {
                return Ok(LoopEnd::Unbounded);
            }
            if t <= 1e-12 {
                self.degenerate_streak += 1;
            } else {
                self.degenerate_streak = 0;
                self.bland = false;
            }
            self.apply_step(q, dir, t, &w);
            match leave {
                Some(r) => self.pivot(q, r, &w),
                None => {
                    // Bound flip.
                    self.stat[q] = match self.stat[q] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        s => s,
                    };
                    self.x[q] = if self.stat[q] == VStat::AtUpper {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    self.total_pivots += 1;
                }
            }
        }
    }

    fn infeasibility(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            let j = self.basis[i];
            let v = self.x[j];
            if v < self.lower[j] {
                s += self.lower[j] - v;
            } else if v > self.upper[j] {
                s += v - self.upper[j];
            }
        }
        s
    }

    /// Drives bound violations of basic variables to zero with a composite
    /// phase 1: infeasibility costs are rebuilt every iteration, and the
    /// ratio test lets a violated basic travel to the bound it is heading
    /// toward (where it turns feasible) while feasible basics block normally.
    /// Returns false at a composite optimum that still carries infeasibility;
    /// the caller then falls back to the certifying artificial phase 1.
    fn restore_feasibility(&mut self) -> Result<bool, LpError> {
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let tol = FEAS_TOL * scale;
        let mut cost = vec![0.0; self.n_total];
        loop {
            counters::RESTORE_PASSES.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            if self.total_pivots > self.max_pivots {
                return Err(LpError::IterationLimit(self.total_pivots));
            }
            cost.iter_mut().for_each(|c| *c = 0.0);
            let mut infeasibility = 0.0;
            for i in 0..self.m {
                let j = self.basis[i];
                if self.x[j] > self.upper[j] + tol {
                    cost[j] = 1.0;
                    infeasibility += self.x[j] - self.upper[j];
                } else if self.x[j] < self.lower[j] - tol {
                    cost[j] = -1.0;
                    infeasibility += self.lower[j] - self.x[j];
                }
            }
            if infeasibility <= tol {
                self.recompute_basic_values();
                return Ok(self.infeasibility() <= tol * (1.0 + self.m as f64));
            }
            if self.degenerate_streak > self.bland_after {
                self.bland = true;
            }
            let Some((q, dir, _)) = self.price(&cost, |_| true) else {
                return Ok(false);
            };
            let (t, leave, w) = self.composite_ratio(q, dir, tol);
            let Some(t) = t else {
                // Unbounded composite direction cannot happen with a bounded
                // infeasibility objective; treat as numerical failure.
                return Err(LpError::Numerical("composite phase 1 unbounded".into()));
            };
            if t <= 1e-12 {
                self.degenerate_streak += 1;
            } else {
                self.degenerate_streak = 0;
                self.bland = false;
            }
            counters::RESTORE_PIVOTS.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            self.apply_step(q, dir, t, &w);
            match leave {
                Some(r) => self.pivot(q, r, &w),
                None => {
                    self.stat[q] = match self.stat[q] {
                        VStat::AtLower => VStat::AtUpper,
                        VStat::AtUpper => VStat::AtLower,
                        s => s,
                    };
                    self.x[q] = if self.stat[q] == VStat::AtUpper {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    self.total_pivots += 1;
                }
            }
        }
    }

    /// Ratio test for the composite phase: violated basics block where they
    /// become feasible, feasible basics at their usual bounds. Returns
    /// (step, leaving row, direction); step None means unbounded.
    fn composite_ratio(
        &self,
        q: usize,
        dir: f64,
        tol: f64,
    ) -> (Option<f64>, Option<usize>, Vec<f64>) {
        let w = self.ftran(q);
        let span = self.upper[q] - self.lower[q];
        let mut best_t = if span.is_finite() { span } else { f64::INFINITY };
        let mut leave: Option<usize> = None;
        let mut leave_mag = 0.0;
        for i in 0..self.m {
            let rate = dir * w[i];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let bj = self.basis[i];
            let (l, u, v) = (self.lower[bj], self.upper[bj], self.x[bj]);
            let limit = if v > u + tol {
                // Violated above: blocks only when decreasing, at the upper
                // bound where it becomes feasible.
                if rate > 0.0 { (v - u) / rate } else { continue }
            } else if v < l - tol {
                if rate < 0.0 { (l - v) / (-rate) } else { continue }
            } else if rate > 0.0 {
                if !l.is_finite() {
                    continue;
                }
                ((v - l) / rate).max(0.0)
            } else {
                if !u.is_finite() {
                    continue;
                }
                ((u - v) / (-rate)).max(0.0)
            };
            let mag = w[i].abs();
            let tie = (limit - best_t).abs() <= 1e-10 * (1.0 + best_t.abs());
            let better = if tie {
                match leave {
                    None => true,
                    Some(r) => {
                        if self.bland {
                            self.basis[i] < self.basis[r]
                        } else {
                            mag > leave_mag
                        }
                    }
                }
            } else {
                limit < best_t
            };
            if better && limit <= best_t + 1e-10 * (1.0 + best_t.abs()) {
                best_t = best_t.min(limit);
                leave = Some(i);
                leave_mag = mag;
            }
        }
        if !best_t.is_finite() {
            return (None, None, w);
        }
        (Some(best_t), leave, w)
    }

    fn phase1(&mut self) -> Result<bool, LpError> {
        let mut cost = vec![0.0; self.n_total];
        for j in self.art0..self.n_total {
            cost[j] = 1.0;
        }
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let art0 = self.art0;
        let end = self.iterate(&cost, |_| true, |sx| {
            (art0..sx.n_total).map(|j| sx.x[j]).sum::<f64>() <= 1e-11 * scale
                && sx.basis.iter().all(|&b| b < art0 || sx.x[b].abs() <= 1e-11 * scale)
        })?;
        if matches!(end, LoopEnd::Unbounded) {
            return Err(LpError::Numerical("phase 1 unbounded".into()));
        }
        let art_mass: f64 = (self.art0..self.n_total).map(|j| self.x[j].max(0.0)).sum();
        if art_mass > FEAS_TOL * scale {
            return Ok(false);
        }
        self.pin_artificials();
        Ok(true)
    }

    /// Pins artificial columns to zero, pivoting basic ones out when possible.
    fn pin_artificials(&mut self) {
        for i in 0..self.m {
            let bj = self.basis[i];
            if bj >= self.art0 {
                // Try to replace with any non-artificial column with a usable pivot.
                let mut replaced = false;
                for j in 0..self.art0 {
                    if self.stat[j] == VStat::Basic || self.lower[j] == self.upper[j] {
                        continue;
                    }
                    let w = self.ftran(j);
                    if w[i].abs() > 1e-7 {
                        self.apply_step(j, 1.0, 0.0, &w);
                        self.pivot(j, i, &w);
                        replaced = true;
                        break;
                    }
                }
                if !replaced {
                    // Redundant row: keep the artificial basic, pinned at zero.
                    self.x[self.basis[i]] = 0.0;
                }
            }
        }
        for j in self.art0..self.n_total {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.stat[j] != VStat::Basic {
                self.x[j] = 0.0;
            }
        }
    }

    fn phase2(&mut self) -> Result<LoopEnd, LpError> {
        let cost = self.cost.clone();
        let art0 = self.art0;
        self.iterate(&cost, |j| j < art0, |_| false)
    }

    fn objective(&self) -> f64 {
        (0..self.n_total).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Max residual of the original rows at the current point.
    fn max_residual(&self, lp: &LinearProgram) -> f64 {
        let mut ax = vec![0.0; self.m];
        for j in 0..self.n_total {
            let v = self.x[j];
            if v != 0.0 && j < self.n_struct {
                for &(i, a) in &self.cols[j] {
                    ax[i] += a * v;
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..self.m {
            let r = ax[i] - lp.rhs[i];
            let viol = match lp.senses[i] {
                Sense::Eq => r.abs(),
                Sense::Le => r.max(0.0),
                Sense::Ge => (-r).max(0.0),
            };
            worst = worst.max(viol / (1.0 + lp.rhs[i].abs()));
        }
        for j in 0..self.n_struct {
            let v = self.x[j];
            let b = VarBound::new(self.lower[j], self.upper[j]);
            let viol = (b.lower - v).max(0.0).max(v - b.upper.min(f64::INFINITY));
            if viol.is_finite() {
                worst = worst.max(viol / (1.0 + v.abs()));
            }
        }
        worst
    }
}

/// Solves a linear program with the revised primal simplex.
pub fn solve_lp(lp: &LinearProgram) -> Result<VertexSolution, LpError> {
    lp.validate()?;
    solve_lp_with_basis(lp, None)
}

/// Solves with an optional warm-start basis (augmented-column indices as
/// returned in [`VertexSolution::basis`]).
pub fn solve_lp_with_basis(
    lp: &LinearProgram,
    warm: Option<&Basis>,
) -> Result<VertexSolution, LpError> {
    lp.validate()?;
    solve_inner(lp, warm)
}

fn solve_inner(lp: &LinearProgram, warm: Option<&Basis>) -> Result<VertexSolution, LpError> {
    counters::SOLVES.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    // Warm basis, then the structural crash: a failed start is never a
    // feasibility verdict; the artificial two-phase path below certifies.
    let mut template = Some(Simplex::build(lp));
    let crash = template.as_ref().unwrap().crash_basis();
    let mut starts: Vec<&Basis> = Vec::with_capacity(2);
    if let Some(b) = warm {
        starts.push(b);
    }
    starts.push(&crash);
    for basis in starts {
        let mut sx = template.take().unwrap_or_else(|| Simplex::build(lp));
        if sx.init_warm(basis) {
            let scale = 1.0 + sx.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            {
                let tol = FEAS_TOL * scale;
                let nv = (0..sx.m)
                    .filter(|&i| {
                        let j = sx.basis[i];
                        sx.x[j] > sx.upper[j] + tol || sx.x[j] < sx.lower[j] - tol
                    })
                    .count();
                counters::WARM_VIOLATIONS.fetch_add(nv, std::sync::atomic::Ordering::Relaxed);
            }
            let restored = if sx.infeasibility() > FEAS_TOL * scale {
                sx.restore_feasibility().unwrap_or(false)
            } else {
                true
            };
            if restored {
                if let Ok(sol) = finish(sx, lp) {
                    if std::ptr::eq(basis, &crash) {
                        counters::CRASH_OK.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    } else {
                        counters::WARM_OK.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    }
                    return Ok(sol);
                }
            }
        }
    }
    counters::COLD.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let mut sx = Simplex::build(lp);
    sx.init_cold();
    if !sx.phase1()? {
        return Ok(VertexSolution::infeasible());
    }
    finish(sx, lp)
}

fn finish(mut sx: Simplex, lp: &LinearProgram) -> Result<VertexSolution, LpError> {
    finish_mut(&mut sx, lp)
}

fn finish_mut(sx: &mut Simplex, lp: &LinearProgram) -> Result<VertexSolution, LpError> {
    let piv0 = sx.total_pivots;
    let r = sx.phase2();
    counters::PHASE2_PIVOTS.fetch_add(sx.total_pivots - piv0, std::sync::atomic::Ordering::Relaxed);
    match r? {
        LoopEnd::Unbounded => return Ok(VertexSolution::unbounded()),
        LoopEnd::Optimal => {}
    }
    // Validate; refactor and re-run once if drift accumulated.
    if sx.max_residual(lp) > FEAS_TOL {
        sx.refactor()
            .map_err(|_| LpError::Numerical("singular basis at cleanup".into()))?;
        sx.recompute_basic_values();
        if sx.infeasibility() > 0.0 && !sx.restore_feasibility()? {
            return Err(LpError::Numerical("feasibility lost after refactor".into()));
        }
        if matches!(sx.phase2()?, LoopEnd::Unbounded) {
            return Ok(VertexSolution::unbounded());
        }
        if sx.max_residual(lp) > FEAS_TOL {
            return Err(LpError::Numerical(format!(
                "residual {:.3e} above tolerance after cleanup",
                sx.max_residual(lp)
            )));
        }
    }
    let duals = sx.duals_for(&sx.cost);
    let objective = sx.objective() + lp.objective_offset;
    let at_upper: Vec<usize> = (0..sx.n_total)
        .filter(|&j| sx.stat[j] == VStat::AtUpper)
        .collect();
    Ok(VertexSolution {
        status: SolveStatus::Optimal,
        primal: sx.x[..sx.n_struct].to_vec(),
        objective,
        lower_bound: objective,
        duals: Some(duals),
        basis: Basis { basic: sx.basis.clone(), at_upper },
    })
}

/// A persistent simplex over one structural problem that re-solves cheaply
/// after bound changes: the factorization and basis carry over, bound moves
/// are absorbed by the composite restoration, and refactorization happens
/// only on the usual pivot schedule. Used by branch and bound, where nodes
/// differ from their neighbours by a handful of bounds.
pub struct IncrementalLp {
    lp: LinearProgram,
    sx: Simplex,
    ready: bool,
}

impl IncrementalLp {
    pub fn new(lp: &LinearProgram) -> Result<Self, LpError> {
        lp.validate()?;
        Ok(IncrementalLp { lp: lp.clone(), sx: Simplex::build(lp), ready: false })
    }

    /// Solves with the given structural bounds. When the caller's warm basis
    /// matches the engine's live basis the factorization is reused outright;
    /// otherwise the warm basis is installed (one refactorization). Falls
    /// back to a certified fresh solve whenever the incremental path cannot
    /// conclude.
    pub fn solve(
        &mut self,
        bounds: &[VarBound],
        warm: Option<&Basis>,
    ) -> Result<VertexSolution, LpError> {
        debug_assert_eq!(bounds.len(), self.lp.num_vars);
        for (j, b) in bounds.iter().enumerate() {
            self.lp.bounds[j] = *b;
        }
        if self.ready {
            if let Some(b) = warm {
                if b.basic != self.sx.basis {
                    // Install the caller's basis; artificial bounds were
                    // pinned by the first certified solve and stay pinned.
                    if !self.sx.init_warm(b) {
                        self.ready = false;
                    }
                }
            }
        }
        if self.ready {
            let sx = &mut self.sx;
            for (j, b) in bounds.iter().enumerate() {
                sx.lower[j] = b.lower;
                sx.upper[j] = b.upper;
                if sx.stat[j] != VStat::Basic {
                    // Rest nonbasics on a bound valid under the new box.
                    let (stat, v) = match sx.stat[j] {
                        VStat::AtUpper if b.upper.is_finite() => (VStat::AtUpper, b.upper),
                        VStat::AtUpper | VStat::AtLower if b.lower.is_finite() => {
                            (VStat::AtLower, b.lower)
                        }
                        VStat::AtLower if b.upper.is_finite() => (VStat::AtUpper, b.upper),
                        _ => (VStat::FreeZero, 0.0),
                    };
                    sx.stat[j] = stat;
                    sx.x[j] = v;
                }
            }
            sx.recompute_basic_values();
            let scale = 1.0 + sx.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            {
                let tol = FEAS_TOL * scale;
                let nv = (0..sx.m)
                    .filter(|&i| {
                        let j = sx.basis[i];
                        sx.x[j] > sx.upper[j] + tol || sx.x[j] < sx.lower[j] - tol
                    })
                    .count();
                counters::WARM_VIOLATIONS.fetch_add(nv, std::sync::atomic::Ordering::Relaxed);
            }
            let restored = if sx.infeasibility() > FEAS_TOL * scale {
                sx.restore_feasibility().unwrap_or(false)
            } else {
                true
            };
            if restored {
                if let Ok(sol) = finish_mut(sx, &self.lp) {
                    counters::WARM_OK.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    counters::SOLVES.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    return Ok(sol);
                }
            }
        }
        // Certified path; also rebuilds the internal state for future reuse.
        let sol = solve_lp_with_basis(&self.lp, None)?;
        self.sx = Simplex::build(&self.lp);
        self.ready = match sol.status {
            SolveStatus::Optimal => self.sx.init_warm(&sol.basis),
            _ => false,
        };
        Ok(sol)
    }
}

/// Pivot and solve counters for performance diagnostics.
pub mod counters {
    use std::sync::atomic::{AtomicUsize, Ordering};
    pub static SOLVES: AtomicUsize = AtomicUsize::new(0);
    pub static PIVOTS: AtomicUsize = AtomicUsize::new(0);
    pub static REFACTORS: AtomicUsize = AtomicUsize::new(0);
    pub static WARM_OK: AtomicUsize = AtomicUsize::new(0);
    pub static CRASH_OK: AtomicUsize = AtomicUsize::new(0);
    pub static COLD: AtomicUsize = AtomicUsize::new(0);
    pub static RESTORE_PIVOTS: AtomicUsize = AtomicUsize::new(0);
    pub static RESTORE_PASSES: AtomicUsize = AtomicUsize::new(0);
    pub static WARM_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);
    pub static PHASE2_PIVOTS: AtomicUsize = AtomicUsize::new(0);

    pub fn snapshot() -> (usize, usize, usize) {
        (SOLVES.load(Ordering::Relaxed), PIVOTS.load(Ordering::Relaxed), REFACTORS.load(Ordering::Relaxed))
    }
}
