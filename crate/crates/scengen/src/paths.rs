//! Per-path scenario computations: EV stock compounding from quadrature
//! draws, the battery-aging recursion, average new-battery mass, supply and
//! demand conversion, and metal-price/cost scenarios.

use crate::envelope::{MsProjection, ProjectionEnvelope};
use crate::error::ScenError;
use crate::normal::inv_cdf;
use crate::quadrature::{truncated_normal_quadrature, QuadratureRule};
use crate::time::TimeStructure;

/// Annual EV stock along one demand path. `stage_draws[s]` is the quadrature
/// node of stage `s`; entry `t` of the result is the stock in model year
/// `t + 1`. Growth rates blend the two projections:
/// half the spread times the draw plus the midpoint.
pub fn ev_stock_path(
    env: &ProjectionEnvelope,
    stage_draws: &[f64],
    time: &TimeStructure,
) -> Vec<f64> {
    let y = env.num_years;
    let mut out = Vec::with_capacity(y);
    let mut level = env.ev_stock.base;
    for t in 1..=y {
        let prev_sds = if t == 1 { env.ev_stock.base } else { env.ev_stock.sds[t - 2] };
        let prev_steps = if t == 1 { env.ev_stock.base } else { env.ev_stock.steps[t - 2] };
        let d_sds = env.ev_stock.sds[t - 1] / prev_sds;
        let d_steps = env.ev_stock.steps[t - 1] / prev_steps;
        let stage = time.stage_of[time.period_of_year(t)];
        let z = stage_draws[stage];
        let rate = 0.5 * (d_sds - d_steps).abs() * z + 0.5 * (d_sds + d_steps);
        level *= rate;
        out.push(level);
    }
    out
}

/// Active battery counts by age along one EV path: `ab[t][a]` for model years
/// `t = 0..=num_years` and ages `a = 0..=max_age`. Survivors age with the
/// retirement profile; new batteries cover the clipped stock increase plus
/// replacements.
pub fn battery_aging(env: &ProjectionEnvelope, ev: &[f64]) -> Vec<Vec<f64>> {
    let y = env.num_years;
    let a_max = env.max_age();
    let ls = &env.retirement.rates;
    let mut ab = vec![vec![0.0; a_max + 1]; y + 1];
    ab[0] = env.initial_age_counts.clone();
    for t in 1..=y {
        for a in 1..=a_max {
            ab[t][a] = (1.0 - ls[a - 1]) * ab[t - 1][a - 1];
        }
        let retired: f64 = (1..=a_max).map(|a| ls[a - 1] * ab[t - 1][a - 1]).sum();
        let prev = if t == 1 { ev_at0(env) } else { ev[t - 2] };
        ab[t][0] = (ev[t - 1] - prev + retired).max(0.0);
    }
    ab
}

fn ev_at0(env: &ProjectionEnvelope) -> f64 {
    env.ev_stock.base
}

/// Similarity of the path to the optimistic projection per year, projected
/// onto [0, 1]; defined as 1/2 in years where the projections coincide.
/// Index `t` covers model year `t` for `t = 0..=num_years` (year 0 always
/// yields 1/2 since both projections share the measured base).
pub fn projection_mix(env: &ProjectionEnvelope, ev: &[f64]) -> Vec<f64> {
    let y = env.num_years;
    let mut lambda = Vec::with_capacity(y + 1);
    lambda.push(0.5);
    for t in 1..=y {
        let sds = env.ev_stock.sds[t - 1];
        let steps = env.ev_stock.steps[t - 1];
        let denom = sds - steps;
        let v = if denom.abs() <= 1e-12 * sds.abs().max(1.0) {
            0.5
        } else {
            ((ev[t - 1] - steps) / denom).clamp(0.0, 1.0)
        };
        lambda.push(v);
    }
    lambda
}

/// Average mass of a new battery by chemistry: `mass[t][i]` for model years
/// `t = 1..=num_years`. Returns the battery-EV sales share alongside.
///
/// The stock share is converted to a sales share recursively; years with no
/// new sales carry the previous year's share forward.
pub fn avg_battery_mass(
    env: &ProjectionEnvelope,
    ev: &[f64],
    ab: &[Vec<f64>],
    lambda: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let y = env.num_years;
    let a_max = env.max_age();
    let ls = &env.retirement.rates;
    let nchem = env.chemistries.len();
    // Stock share per year 0..=y.
    let stock_share: Vec<f64> = (0..=y)
        .map(|t| env.bev_share.sds[t] * lambda[t] + env.bev_share.steps[t] * (1.0 - lambda[t]))
        .collect();
    // Sales share: history at indices 0..a_max (oldest first), then modeled
    // years; sales_share[a_max + t] is model year t.
    let mut sales: Vec<f64> = env.bev_share.sales_history.clone();
    sales.push(stock_share[0]); // base year proxy
    for t in 1..=y {
        let ev_prev = if t == 1 { ev_at0(env) } else { ev[t - 2] };
        // Replacements weight each retiring cohort (LS_a of last year's
        // age-(a-1) batteries) by the sales share of its purchase year,
        // mirroring the aging recursion's retiree count.
        let replacements: f64 = (1..=a_max)
            .map(|a| {
                let past = sales[a_max + t - a];
                past * ls[a - 1] * ab[t - 1][a - 1]
            })
            .sum();
        let numer = stock_share[t] * ev[t - 1] - stock_share[t - 1] * ev_prev + replacements;
        let share = if ab[t][0] > 1e-12 {
            (numer / ab[t][0]).clamp(0.0, 1.0)
        } else {
            sales[a_max + t - 1]
        };
        sales.push(share);
    }
    let mass: Vec<Vec<f64>> = (1..=y)
        .map(|t| {
            let s = sales[a_max + t];
            (0..nchem)
                .map(|i| env.mass_bev[i] * s + env.mass_phev[i] * (1.0 - s))
                .collect()
        })
        .collect();
    (sales, mass)
}

/// Annual retired-battery supply and new-battery demand by chemistry for one
/// (projection, path) pair scaled by a zone share: `(supply, demand)` indexed
/// `[t-1][chem]` over model years.
pub fn supply_demand(
    env: &ProjectionEnvelope,
    ab: &[Vec<f64>],
    mass: &[Vec<f64>],
    projection: MsProjection,
    beta: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let y = env.num_years;
    let a_max = env.max_age();
    let ls = &env.retirement.rates;
    let ms = env.market_share.of(projection);
    let nchem = env.chemistries.len();
    // ms series index for model year t is a_max + t - 1 (year 1 -> a_max).
    let ms_at = |i: usize, t: i64| -> f64 {
        let idx = a_max as i64 + t - 1;
        debug_assert!(idx >= 0, "market share history exhausted");
        ms[i][idx as usize]
    };
    let mut supply = vec![vec![0.0; nchem]; y];
    let mut demand = vec![vec![0.0; nchem]; y];
    for t in 1..=y {
        for i in 0..nchem {
            let m = mass[t - 1][i];
            let mut s = 0.0;
            for a in 1..=a_max {
                s += ms_at(i, t as i64 - a as i64) * ls[a - 1] * ab[t - 1][a - 1];
            }
            supply[t - 1][i] = beta * m * s;
            demand[t - 1][i] = beta * m * ms_at(i, t as i64) * ab[t][0];
        }
    }
    (supply, demand)
}

/// Metal prices and material cost/value series for every cost index along one
/// demand path. Prices follow a two-sided truncated normal calibrated so the
/// blended median is the median and the blended bounds delimit an equal-tailed
/// 40% credible interval.
#[derive(Debug, Clone)]
pub struct CostScenarios {
    /// Quadrature draws per cost index (ascending).
    pub draws: Vec<f64>,
    /// Probabilities per cost index (each half reweighted by 1/2).
    pub probabilities: Vec<f64>,
    /// `prices[zeta][t][metal]` for model years `t = 1..=num_years`.
    pub prices: Vec<Vec<Vec<f64>>>,
    /// `material_cost[zeta][t][material]`.
    pub material_cost: Vec<Vec<Vec<f64>>>,
    /// `material_value[zeta][t][material]`.
    pub material_value: Vec<Vec<Vec<f64>>>,
}

/// The two half-interval rules behind the cost discretization. `n_c = 1` is
/// the deterministic special case: a single median draw with full weight.
/// Odd counts above one would lose probability mass and are rejected.
pub fn cost_quadrature(n_c: usize) -> Result<(Vec<f64>, Vec<f64>), ScenError> {
    if n_c == 1 {
        return Ok((vec![0.0], vec![1.0]));
    }
    if n_c == 0 || n_c % 2 != 0 {
        return Err(ScenError::OddSampleCount(n_c));
    }
    let lo = inv_cdf(0.3);
    let hi = inv_cdf(0.7);
    let below: QuadratureRule = truncated_normal_quadrature(n_c / 2, lo, 0.0)?;
    let above: QuadratureRule = truncated_normal_quadrature(n_c / 2, 0.0, hi)?;
    let mut draws = below.nodes.clone();
    draws.extend_from_slice(&above.nodes);
    let mut probs: Vec<f64> = below.weights.iter().map(|w| 0.5 * w).collect();
    probs.extend(above.weights.iter().map(|w| 0.5 * w));
    Ok((draws, probs))
}

pub fn cost_scenarios(
    env: &ProjectionEnvelope,
    lambda: &[f64],
    n_c: usize,
) -> Result<CostScenarios, ScenError> {
    let (draws, probabilities) = cost_quadrature(n_c)?;
    let y = env.num_years;
    let nmetal = env.metals.len();
    let inv_lo = inv_cdf(0.3);
    let inv_hi = inv_cdf(0.7);

    // Blended band parameters per year 0..=y and metal.
    let band = |t: usize, m: usize| -> (f64, f64, f64) {
        let b = &env.metal_prices[m];
        let l = lambda[t];
        (
            b.med_sds[t] * l + b.med_steps[t] * (1.0 - l),
            b.lb_sds[t] * l + b.lb_steps[t] * (1.0 - l),
            b.ub_sds[t] * l + b.ub_steps[t] * (1.0 - l),
        )
    };
    let metal_index: Vec<usize> = env
        .metals
        .iter()
        .map(|name| env.metal_prices.iter().position(|b| &b.metal == name).unwrap())
        .collect();

    let mut prices = vec![vec![vec![0.0; nmetal]; y]; draws.len()];
    for (zi, &z) in draws.iter().enumerate() {
        for t in 1..=y {
            for (mi, &bi) in metal_index.iter().enumerate() {
                let (med, lb, ub) = band(t, bi);
                let scale = if z >= 0.0 { (ub - med) / inv_hi } else { (lb - med) / inv_lo };
                prices[zi][t - 1][mi] = (med + scale * z).max(0.0);
            }
        }
    }

    // Base cost/value per material: deterministic value minus the base-year
    // median metal content, floored at zero.
    let med0: Vec<f64> = metal_index.iter().map(|&bi| band(0, bi).0).collect();
    let frac = |mat: &crate::envelope::PricedMaterial| -> Vec<f64> {
        env.metals
            .iter()
            .map(|m| mat.metal_fractions.get(m).copied().unwrap_or(0.0))
            .collect()
    };
    let nmat = env.materials.len();
    let mut material_cost = vec![vec![vec![0.0; nmat]; y]; draws.len()];
    let mut material_value = vec![vec![vec![0.0; nmat]; y]; draws.len()];
    for (ki, mat) in env.materials.iter().enumerate() {
        let fr = frac(mat);
        let content0: f64 = fr.iter().zip(&med0).map(|(f, v)| f * v).sum();
        let base_cost = (mat.base_cost - content0).max(0.0);
        let base_value = (mat.base_value - content0).max(0.0);
        for zi in 0..draws.len() {
            for t in 0..y {
                let content: f64 =
                    fr.iter().zip(&prices[zi][t]).map(|(f, v)| f * v).sum();
                material_cost[zi][t][ki] = base_cost + content;
                material_value[zi][t][ki] = base_value + content;
            }
        }
    }

    Ok(CostScenarios { draws, probabilities, prices, material_cost, material_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::tests_support::desk_envelope;

    #[test]
    fn identical_projections_collapse_paths() {
        let mut env = desk_envelope();
        env.ev_stock.steps = env.ev_stock.sds.clone();
        let time = env.time_structure(2).unwrap();
        let a = ev_stock_path(&env, &[2.0, 2.0], &time);
        let b = ev_stock_path(&env, &[-2.0, 0.5], &time);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 * x.abs());
        }
    }

    #[test]
    fn midpoint_draw_tracks_average_growth() {
        let env = desk_envelope();
        let time = env.time_structure(2).unwrap();
        let path = ev_stock_path(&env, &[0.0, 0.0], &time);
        let mut level = env.ev_stock.base;
        for t in 1..=env.num_years {
            let prev_sds = if t == 1 { env.ev_stock.base } else { env.ev_stock.sds[t - 2] };
            let prev_steps = if t == 1 { env.ev_stock.base } else { env.ev_stock.steps[t - 2] };
            level *= 0.5 * (env.ev_stock.sds[t - 1] / prev_sds + env.ev_stock.steps[t - 1] / prev_steps);
            assert!((path[t - 1] - level).abs() <= 1e-9 * level);
        }
    }

    #[test]
    fn unit_draw_tracks_max_growth() {
        // The rate is midpoint + (z/2)*spread, so z = +1 lands exactly on the
        // faster projection's growth each year.
        let env = desk_envelope();
        let time = env.time_structure(1).unwrap();
        let path = ev_stock_path(&env, &[1.0], &time);
        let mut level = env.ev_stock.base;
        for t in 1..=env.num_years {
            let prev_sds = if t == 1 { env.ev_stock.base } else { env.ev_stock.sds[t - 2] };
            let prev_steps = if t == 1 { env.ev_stock.base } else { env.ev_stock.steps[t - 2] };
            let hi = (env.ev_stock.sds[t - 1] / prev_sds).max(env.ev_stock.steps[t - 1] / prev_steps);
            level *= hi;
            assert!((path[t - 1] - level).abs() <= 1e-9 * level);
        }
        // At the truncation edge z = +2 the rate overshoots by half the
        // spread; the path must dominate the faster projection.
        let edge = ev_stock_path(&env, &[2.0], &time);
        for t in 0..env.num_years {
            assert!(edge[t] >= path[t] - 1e-9 * path[t]);
        }
    }

    #[test]
    fn aging_steady_state_with_single_year_life() {
        let mut env = desk_envelope();
        env.retirement = Retirement0 { max_age: 1, rates: vec![1.0] }.into();
        env.initial_age_counts = vec![100.0, 0.0];
        env.bev_share.sales_history = vec![0.5];
        let mut ncx = Vec::new();
        let mut lfp = Vec::new();
        for row in &env.market_share.ncx {
            ncx.push(vec![row[row.len() - env.num_years - 1 + 0]; 1 + env.num_years]);
        }
        for row in &env.market_share.lfp {
            lfp.push(vec![row[row.len() - env.num_years - 1 + 0]; 1 + env.num_years]);
        }
        env.market_share.ncx = ncx;
        env.market_share.lfp = lfp;
        // Constant stock of 100.
        env.ev_stock.base = 100.0;
        env.ev_stock.sds = vec![100.0; env.num_years];
        env.ev_stock.steps = vec![100.0; env.num_years];
        env.validate().unwrap();
        let time = env.time_structure(1).unwrap();
        let ev = ev_stock_path(&env, &[0.0], &time);
        let ab = battery_aging(&env, &ev);
        for t in 1..=env.num_years {
            assert!((ab[t][0] - 100.0).abs() < 1e-9, "full annual replacement");
        }
    }

    #[test]
    fn aging_clips_on_steep_decline() {
        let mut env = desk_envelope();
        env.ev_stock.base = 100.0;
        env.ev_stock.sds = (0..env.num_years).map(|t| 100.0 * 0.5f64.powi(t as i32 + 1)).collect();
        env.ev_stock.steps = env.ev_stock.sds.clone();
        env.retirement.rates = vec![0.0, 0.0, 1.0];
        env.retirement.max_age = 3;
        env.initial_age_counts = vec![100.0, 0.0, 0.0, 0.0];
        env.bev_share.sales_history = vec![0.5; 3];
        let a = env.max_age();
        for series in [&mut env.market_share.ncx, &mut env.market_share.lfp] {
            for row in series.iter_mut() {
                let v = row[0];
                *row = vec![v; a + env.num_years];
            }
        }
        env.validate().unwrap();
        let time = env.time_structure(1).unwrap();
        let ev = ev_stock_path(&env, &[0.0], &time);
        let ab = battery_aging(&env, &ev);
        assert_eq!(ab[1][0], 0.0, "positive-part clip must engage");
    }

    // Local alias so the steady-state test reads naturally.
    struct Retirement0 {
        max_age: usize,
        rates: Vec<f64>,
    }
    impl From<Retirement0> for crate::envelope::Retirement {
        fn from(r: Retirement0) -> Self {
            crate::envelope::Retirement { max_age: r.max_age, rates: r.rates }
        }
    }

    #[test]
    fn equal_masses_make_share_irrelevant() {
        let mut env = desk_envelope();
        env.mass_phev = env.mass_bev.clone();
        let time = env.time_structure(2).unwrap();
        let ev = ev_stock_path(&env, &[1.0, -1.0], &time);
        let ab = battery_aging(&env, &ev);
        let lambda = projection_mix(&env, &ev);
        let (_, mass) = avg_battery_mass(&env, &ev, &ab, &lambda);
        for t in 0..env.num_years {
            for i in 0..env.chemistries.len() {
                assert!((mass[t][i] - env.mass_bev[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pure_bev_share_gives_bev_mass() {
        let mut env = desk_envelope();
        env.bev_share.sds = vec![1.0; env.num_years + 1];
        env.bev_share.steps = vec![1.0; env.num_years + 1];
        env.bev_share.sales_history = vec![1.0; env.max_age()];
        let time = env.time_structure(2).unwrap();
        let ev = ev_stock_path(&env, &[0.5, 0.5], &time);
        let ab = battery_aging(&env, &ev);
        let lambda = projection_mix(&env, &ev);
        let (_, mass) = avg_battery_mass(&env, &ev, &ab, &lambda);
        for t in 0..env.num_years {
            for i in 0..env.chemistries.len() {
                assert!((mass[t][i] - env.mass_bev[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_stock_share_with_growth_and_no_retirement_matches_sales_share() {
        // Hand expansion of the recursion: with no retirements and constant
        // stock share s, new sales are the stock increase, so the numerator is
        // s * (EV_t - EV_{t-1}) and the share equals s every year.
        let mut env = desk_envelope();
        let s = 0.6;
        env.bev_share.sds = vec![s; env.num_years + 1];
        env.bev_share.steps = vec![s; env.num_years + 1];
        env.retirement.rates = vec![0.0, 0.0, 1.0];
        env.retirement.max_age = 3;
        env.initial_age_counts = vec![50.0, 0.0, 0.0, 0.0];
        env.bev_share.sales_history = vec![0.1; 3];
        let a = env.max_age();
        for series in [&mut env.market_share.ncx, &mut env.market_share.lfp] {
            for row in series.iter_mut() {
                let v = row[0];
                *row = vec![v; a + env.num_years];
            }
        }
        env.ev_stock.base = 50.0;
        env.ev_stock.sds = (0..env.num_years).map(|t| 50.0 * 1.2f64.powi(t as i32 + 1)).collect();
        env.ev_stock.steps = env.ev_stock.sds.clone();
        env.validate().unwrap();
        let time = env.time_structure(1).unwrap();
        let ev = ev_stock_path(&env, &[0.0], &time);
        let ab = battery_aging(&env, &ev);
        let lambda = projection_mix(&env, &ev);
        let (sales, _) = avg_battery_mass(&env, &ev, &ab, &lambda);
        for t in 1..=env.num_years {
            assert!(
                (sales[a + t] - s).abs() < 1e-9,
                "year {t}: sales share {} vs stock share {s}",
                sales[a + t]
            );
        }
    }

    #[test]
    fn zone_scaling_is_proportional() {
        let env = desk_envelope();
        let time = env.time_structure(2).unwrap();
        let ev = ev_stock_path(&env, &[0.3, -0.7], &time);
        let ab = battery_aging(&env, &ev);
        let lambda = projection_mix(&env, &ev);
        let (_, mass) = avg_battery_mass(&env, &ev, &ab, &lambda);
        let (s2, d2) = supply_demand(&env, &ab, &mass, MsProjection::Ncx, 0.2);
        let (s5, d5) = supply_demand(&env, &ab, &mass, MsProjection::Ncx, 0.5);
        for t in 0..env.num_years {
            for i in 0..env.chemistries.len() {
                assert!((s5[t][i] * 0.2 - s2[t][i] * 0.5).abs() < 1e-9 * (1.0 + s5[t][i]));
                assert!((d5[t][i] * 0.2 - d2[t][i] * 0.5).abs() < 1e-9 * (1.0 + d5[t][i]));
                assert!(s2[t][i] >= 0.0 && d2[t][i] >= 0.0);
            }
        }
        let (s0, d0) = supply_demand(&env, &ab, &mass, MsProjection::Ncx, 0.0);
        assert!(s0.iter().flatten().all(|&v| v == 0.0));
        assert!(d0.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn concentrated_market_share_isolates_chemistry() {
        let mut env = desk_envelope();
        let a = env.max_age();
        let y = env.num_years;
        env.market_share.ncx = vec![vec![1.0; a + y], vec![0.0; a + y]];
        env.market_share.lfp = vec![vec![0.0; a + y], vec![1.0; a + y]];
        env.validate().unwrap();
        let time = env.time_structure(2).unwrap();
        let ev = ev_stock_path(&env, &[0.0, 0.0], &time);
        let ab = battery_aging(&env, &ev);
        let lambda = projection_mix(&env, &ev);
        let (_, mass) = avg_battery_mass(&env, &ev, &ab, &lambda);
        let (s, d) = supply_demand(&env, &ab, &mass, MsProjection::Ncx, 1.0);
        for t in 0..y {
            assert_eq!(s[t][1], 0.0);
            assert_eq!(d[t][1], 0.0);
        }
        let total: f64 = d.iter().map(|row| row[0]).sum();
        assert!(total > 0.0);
    }

    #[test]
    fn cost_scenario_endpoints_and_median() {
        let mut env = desk_envelope();
        // Force the path onto STEPS exactly: lambda = 0 everywhere.
        env.ev_stock.sds = env.ev_stock.steps.iter().map(|v| v * 2.0).collect();
        env.validate().unwrap();
        let y = env.num_years;
        let lambda = vec![0.0; y + 1];
        let cs = cost_scenarios(&env, &lambda, 2).unwrap();
        // With lambda = 0 all band parameters equal their STEPS values.
        for t in 0..y {
            for (mi, metal) in env.metals.iter().enumerate() {
                let b = env.metal_prices.iter().find(|b| &b.metal == metal).unwrap();
                let lb = b.lb_steps[t + 1];
                let ub = b.ub_steps[t + 1];
                for zi in 0..2 {
                    let p = cs.prices[zi][t][mi];
                    assert!(p >= lb - 1e-9 && p <= ub + 1e-9, "price {p} outside [{lb}, {ub}]");
                }
            }
        }
        let mass: f64 = cs.probabilities.iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(matches!(cost_scenarios(&env, &lambda, 3), Err(ScenError::OddSampleCount(3))));
    }

    #[test]
    fn base_cost_decomposition_example() {
        // Deterministic cost 10, one metal at fraction 0.2 with base-year
        // median 30: base cost 4; a realization of 35 gives 4 + 7 = 11.
        let mut env = desk_envelope();
        env.metals = vec!["lithium".into()];
        env.metal_prices = vec![crate::envelope::MetalPriceBands {
            metal: "lithium".into(),
            med_sds: vec![30.0; env.num_years + 1],
            med_steps: vec![30.0; env.num_years + 1],
            lb_sds: vec![25.0; env.num_years + 1],
            ub_sds: vec![35.0; env.num_years + 1],
            lb_steps: vec![25.0; env.num_years + 1],
            ub_steps: vec![35.0; env.num_years + 1],
        }];
        env.materials = vec![crate::envelope::PricedMaterial {
            name: "salt".into(),
            base_cost: 10.0,
            base_value: 8.0,
            metal_fractions: [("lithium".to_string(), 0.2)].into_iter().collect(),
        }];
        env.validate().unwrap();
        let lambda = vec![0.5; env.num_years + 1];
        let cs = cost_scenarios(&env, &lambda, 2).unwrap();
        // Check the linear map price -> cost on the generated draws.
        for zi in 0..2 {
            let p = cs.prices[zi][0][0];
            let expect = (10.0 - 0.2 * 30.0) + 0.2 * p;
            assert!((cs.material_cost[zi][0][0] - expect).abs() < 1e-12);
        }
        // A median draw (z = 0) would give exactly the deterministic cost;
        // verify via direct formula at p = 30.
        let c_at_median: f64 = (10.0 - 0.2 * 30.0) + 0.2 * 30.0;
        assert!((c_at_median - 10.0).abs() < 1e-12);
        let v_at_35: f64 = (10.0 - 0.2 * 30.0) + 0.2 * 35.0;
        assert!((v_at_35 - 11.0).abs() < 1e-12);
    }
}
