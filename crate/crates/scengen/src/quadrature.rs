//! Gaussian quadrature of truncated standard normal distributions by moment
//! matching: raw moments from the boundary-term recurrence, recurrence
//! coefficients via the moment-to-Jacobi (Chebyshev) algorithm, nodes and
//! weights from the symmetric tridiagonal eigenproblem. An `n`-point rule
//! matches the first `2n - 1` moments of the truncated distribution.

use serde::{Deserialize, Serialize};

use crate::error::ScenError;
use crate::normal::{cdf, pdf};

/// Discretization of a truncated standard normal: nodes inside the interval,
/// positive weights summing to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Raw moments `E[X^k]`, k = 0..=kmax, of the standard normal truncated to
/// `[a, b]`.
pub fn truncated_normal_moments(a: f64, b: f64, kmax: usize) -> Vec<f64> {
    let z = cdf(b) - cdf(a);
    assert!(z > 1e-300, "truncation interval carries no mass");
    let (fa, fb) = (pdf(a), pdf(b));
    let mut m = Vec::with_capacity(kmax + 1);
    m.push(1.0);
    if kmax >= 1 {
        m.push((fa - fb) / z);
    }
    for k in 2..=kmax {
        let boundary = (b.powi(k as i32 - 1) * fb - a.powi(k as i32 - 1) * fa) / z;
        let v = (k as f64 - 1.0) * m[k - 2] - boundary;
        m.push(v);
    }
    m
}

/// Builds the n-point rule for the standard normal truncated to `[a, b]`.
pub fn truncated_normal_quadrature(n: usize, a: f64, b: f64) -> Result<QuadratureRule, ScenError> {
    if n == 0 {
        return Err(ScenError::Validation("quadrature needs n >= 1".into()));
    }
    if !(a < b) {
        return Err(ScenError::Validation(format!(
            "quadrature interval [{a}, {b}] is empty"
        )));
    }
    let moments = truncated_normal_moments(a, b, 2 * n - 1);
    let (alpha, beta) = chebyshev_coefficients(&moments, n)?;
    let (nodes, first_components) = tridiag_eigen(&alpha, &beta)?;
    let mut weights: Vec<f64> = first_components.iter().map(|&v| moments[0] * v * v).collect();
    // Pair and sort nodes ascending for a deterministic rule.
    let mut pairs: Vec<(f64, f64)> = nodes.into_iter().zip(weights.drain(..)).collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rule = QuadratureRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    };
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        if !(w > 0.0) || !x.is_finite() {
            return Err(ScenError::IllConditioned(format!(
                "rule of order {n} on [{a}, {b}] produced node {x} with weight {w}"
            )));
        }
        if x < a - 1e-9 || x > b + 1e-9 {
            return Err(ScenError::IllConditioned(format!(
                "node {x} escaped the interval [{a}, {b}]"
            )));
        }
    }
    let mass: f64 = rule.weights.iter().sum();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(ScenError::IllConditioned(format!(
            "weights sum to {mass}, expected 1"
        )));
    }
    Ok(rule)
}

/// Moment-to-recurrence (Chebyshev) algorithm: from raw moments m_0..m_{2n-1}
/// to Jacobi coefficients alpha_0..alpha_{n-1}, beta_0..beta_{n-1}.
fn chebyshev_coefficients(m: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), ScenError> {
    let len = 2 * n;
    debug_assert!(m.len() >= len - 1);
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    alpha[0] = m[1] / m[0];
    beta[0] = m[0];
    if n == 1 {
        return Ok((alpha, beta));
    }
    // sigma rows for k-1 and k-2.
    let mut prev = vec![0.0; len + 1]; // sigma_{-1} = 0
    let mut curr: Vec<f64> = m.to_vec(); // sigma_0 = moments
    curr.resize(len + 1, 0.0);
    for k in 1..n {
        let mut next = vec![0.0; len + 1];
        for l in k..(2 * n - k) {
            next[l] = curr[l + 1] - alpha[k - 1] * curr[l] - beta[k - 1] * prev[l];
        }
        if !(next[k].abs() > 0.0) || !next[k].is_finite() || curr[k - 1] == 0.0 {
            return Err(ScenError::IllConditioned(format!(
                "moment matrix breakdown at order {k}"
            )));
        }
        alpha[k] = next[k + 1] / next[k] - curr[k] / curr[k - 1];
        beta[k] = next[k] / curr[k - 1];
        if !(beta[k] > 0.0) {
            return Err(ScenError::IllConditioned(format!(
                "nonpositive recurrence coefficient at order {k}: {}",
                beta[k]
            )));
        }
        prev = curr;
        curr = next;
    }
    Ok((alpha, beta))
}

/// Implicit-shift QL eigensolver for the symmetric tridiagonal Jacobi matrix
/// with diagonal `alpha` and off-diagonal `sqrt(beta[1..])`. Returns
/// eigenvalues and the first components of the normalized eigenvectors.
fn tridiag_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ScenError> {
    let n = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = vec![0.0; n];
    for k in 1..n {
        e[k - 1] = beta[k].sqrt();
    }
    // z starts as e_1 so z[j] accumulates the first eigenvector components.
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(ScenError::IllConditioned(
                    "tridiagonal eigensolver failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut i = m;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let bb = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if r == 0.0 && i > l {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of x^k against the truncated density.
    fn numeric_moment(a: f64, b: f64, k: usize, panels: usize) -> f64 {
        let z = cdf(b) - cdf(a);
        let h = (b - a) / panels as f64;
        let f = |x: f64| x.powi(k as i32) * pdf(x) / z;
        let mut s = f(a) + f(b);
        for i in 1..panels {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn moment_recurrence_matches_numeric_integration() {
        for k in 0..=9 {
            let m = truncated_normal_moments(-2.0, 2.0, 9);
            let num = numeric_moment(-2.0, 2.0, k, 4000);
            assert!(
                (m[k] - num).abs() < 1e-10,
                "moment {k}: recurrence {} vs numeric {num}",
                m[k]
            );
        }
    }

    #[test]
    fn single_node_rule_is_centered() {
        let r = truncated_normal_quadrature(1, -2.0, 2.0).unwrap();
        assert!(r.nodes[0].abs() < 1e-14);
        assert!((r.weights[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_node_rule_matches_truncation_variance() {
        let r = truncated_normal_quadrature(2, -2.0, 2.0).unwrap();
        let var = 1.0 - 2.0 * 2.0 * pdf(2.0) / (2.0 * cdf(2.0) - 1.0);
        let expected = var.sqrt();
        assert!((r.nodes[0] + expected).abs() < 1e-6, "node {}", r.nodes[0]);
        assert!((r.nodes[1] - expected).abs() < 1e-6);
        assert!((r.weights[0] - 0.5).abs() < 1e-9);
        assert!((r.weights[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rules_match_moments_up_to_order() {
        for n in 1..=10 {
            let r = truncated_normal_quadrature(n, -2.0, 2.0).unwrap();
            for k in 0..(2 * n) {
                let rule_m: f64 = r
                    .nodes
                    .iter()
                    .zip(&r.weights)
                    .map(|(&x, &w)| w * x.powi(k as i32))
                    .sum();
                let num = numeric_moment(-2.0, 2.0, k, 20_000);
                assert!(
                    (rule_m - num).abs() < 1e-8,
                    "n = {n}, moment {k}: rule {rule_m} vs numeric {num}"
                );
            }
        }
    }

    #[test]
    fn asymmetric_interval_rules_hold_mass() {
        let lo = crate::normal::inv_cdf(0.3);
        let r = truncated_normal_quadrature(3, lo, 0.0).unwrap();
        let mass: f64 = r.weights.iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for &x in &r.nodes {
            assert!(x >= lo - 1e-12 && x <= 1e-12);
        }
    }
}
