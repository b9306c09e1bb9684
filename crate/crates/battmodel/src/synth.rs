//! Seeded synthetic instance generation for tests and the self-check
//! command: small envelopes and data files with consistent naming, capacity
//! bounds tuned so facility counts land in a requested range.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scengen::{
    assemble_tree, BevShare, EvStock, MarketShares, MetalPriceBands, PricedMaterial,
    ProjectionEnvelope, Retirement, ScenarioTree, ZoneShare, ENVELOPE_SCHEMA_VERSION,
};

use crate::data::{
    ConversionEcon, LineEcon, ModelData, ProcessEcon, ResourceIntensity, Zone, ZoneCosts,
    DATA_SCHEMA_VERSION,
};
use crate::error::ModelError;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub zones: usize,
    pub periods: usize,
    pub periods_per_planning: usize,
    pub stages: usize,
    pub n_d: usize,
    pub n_c: usize,
    /// Scales retired-battery supply after generation; small values starve
    /// recycling relative to demand.
    pub supply_scale: f64,
    /// Facility count the recycling capacity bound is tuned to produce.
    pub target_rec_facilities: usize,
    pub target_cp_lines: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            zones: 1,
            periods: 6,
            periods_per_planning: 2,
            stages: 2,
            n_d: 1,
            n_c: 2,
            supply_scale: 1.0,
            target_rec_facilities: 3,
            target_cp_lines: 2,
        }
    }
}

/// Generates a consistent (data, tree) pair.
pub fn synth_instance(cfg: &SynthConfig) -> Result<(ModelData, ScenarioTree), ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nchem = rng.random_range(1..=2usize);
    let nproc = rng.random_range(1..=2usize);
    let chems: Vec<String> = ["nmc", "lfp"][..nchem].iter().map(|s| s.to_string()).collect();
    let procs: Vec<String> = ["hydro", "direct"][..nproc].iter().map(|s| s.to_string()).collect();
    let powders: Vec<String> = chems.iter().map(|c| format!("cp_{c}")).collect();
    let mut materials = powders.clone();
    materials.push("black_mass".into());
    materials.push("li_salt".into());
    materials.push("graphite".into());
    let nk = materials.len();
    let np = powders.len();

    let y = cfg.periods; // one year per period in synthetic instances
    let a = 3;
    let betas: Vec<f64> = match cfg.zones {
        1 => vec![0.3],
        _ => vec![0.2, 0.5],
    };
    let zone_names: Vec<String> =
        ["us", "cn"][..cfg.zones].iter().map(|s| s.to_string()).collect();

    let base_ev = rng.random_range(1500.0..4000.0);
    let g_sds = rng.random_range(1.18..1.32);
    let g_steps = rng.random_range(1.06..1.15);
    let series = |g: f64| -> Vec<f64> { (1..=y).map(|t| base_ev * g.powi(t as i32)).collect() };

    let ms_main = rng.random_range(0.6..0.8);
    let market_row = |main: bool, share: f64| -> Vec<f64> {
        let v = if main { share } else { (1.0 - share).max(0.0) };
        vec![v; a + y]
    };
    let market_share = if nchem == 2 {
        MarketShares {
            ncx: vec![market_row(true, ms_main), market_row(false, ms_main)],
            lfp: vec![market_row(false, ms_main), market_row(true, ms_main)],
        }
    } else {
        MarketShares { ncx: vec![vec![0.9; a + y]], lfp: vec![vec![0.8; a + y]] }
    };

    let env = ProjectionEnvelope {
        schema_version: ENVELOPE_SCHEMA_VERSION,
        name: format!("synth-{}", cfg.seed),
        base_year: 2020,
        years_per_period: 1,
        num_years: y,
        periods_per_planning: cfg.periods_per_planning,
        chemistries: chems.clone(),
        zones: zone_names
            .iter()
            .zip(&betas)
            .map(|(name, &beta)| ZoneShare { name: name.clone(), beta })
            .collect(),
        ev_stock: EvStock { base: base_ev, sds: series(g_sds), steps: series(g_steps) },
        bev_share: BevShare {
            sds: vec![rng.random_range(0.6..0.8); y + 1],
            steps: vec![rng.random_range(0.5..0.7); y + 1],
            sales_history: vec![0.55; a],
        },
        market_share,
        retirement: Retirement {
            max_age: a,
            rates: vec![rng.random_range(0.05..0.2), rng.random_range(0.3..0.6), 1.0],
        },
        initial_age_counts: vec![0.35 * base_ev, 0.3 * base_ev, 0.2 * base_ev, 0.0],
        mass_bev: (0..nchem).map(|_| rng.random_range(0.35..0.5)).collect(),
        mass_phev: (0..nchem).map(|_| rng.random_range(0.1..0.2)).collect(),
        metals: vec!["lithium".into(), "nickel".into()],
        metal_prices: vec![
            price_bands(&mut rng, "lithium", y, 14.0..22.0),
            price_bands(&mut rng, "nickel", y, 10.0..18.0),
        ],
        materials: {
            let mut priced: Vec<PricedMaterial> = powders
                .iter()
                .enumerate()
                .map(|(p, name)| PricedMaterial {
                    name: name.clone(),
                    base_cost: rng.random_range(25.0..40.0),
                    base_value: rng.random_range(18.0..25.0),
                    metal_fractions: if p == 0 {
                        [("lithium".to_string(), 0.07), ("nickel".to_string(), 0.3)]
                            .into_iter()
                            .collect()
                    } else {
                        [("lithium".to_string(), 0.05)].into_iter().collect()
                    },
                })
                .collect();
            priced.push(PricedMaterial {
                name: "black_mass".into(),
                base_cost: rng.random_range(12.0..18.0),
                base_value: rng.random_range(9.0..14.0),
                metal_fractions: [("lithium".to_string(), 0.03), ("nickel".to_string(), 0.22)]
                    .into_iter()
                    .collect(),
            });
            priced.push(PricedMaterial {
                name: "li_salt".into(),
                base_cost: rng.random_range(8.0..14.0),
                base_value: rng.random_range(6.0..10.0),
                metal_fractions: [("lithium".to_string(), 0.18)].into_iter().collect(),
            });
            priced
        },
    };
    env.validate().map_err(|e| ModelError::Validation(e.to_string()))?;

    let mut tree = assemble_tree(&env, cfg.stages, cfg.n_d, cfg.n_c)
        .map_err(|e| ModelError::Validation(e.to_string()))?;
    if (cfg.supply_scale - 1.0).abs() > 1e-12 {
        for node in tree.nodes.iter_mut() {
            for zrow in node.supply.iter_mut() {
                for per in zrow.iter_mut() {
                    for v in per.iter_mut() {
                        *v *= cfg.supply_scale;
                    }
                }
            }
        }
    }

    // Capacity bounds tuned to the requested facility counts.
    let mut peak_supply = 0.0f64;
    let mut peak_powder = vec![0.0f64; np];
    for node in &tree.nodes {
        for (lt, _) in tree.time.periods_of_stage(node.stage).iter().enumerate() {
            let mut s_tot = 0.0;
            let mut powder = vec![0.0; np];
            for z in 0..betas.len() {
                for i in 0..nchem {
                    s_tot += node.supply[z][lt][i];
                    // own-chemistry powder requirement, filled in below once
                    // delta_nb exists; use mass fraction 0.35 as the tuning
                    // proxy.
                    powder[i.min(np - 1)] += 0.35 * node.demand[z][lt][i];
                }
            }
            peak_supply = peak_supply.max(s_tot);
            for (p, v) in powder.iter().enumerate() {
                peak_powder[p] = peak_powder[p].max(*v);
            }
        }
    }
    let u_rec = if peak_supply > 0.0 {
        peak_supply / (cfg.target_rec_facilities as f64 - rng.random_range(0.2..0.8))
    } else {
        1.0
    };
    let max_peak_powder = peak_powder.iter().cloned().fold(0.0f64, f64::max);
    let u_cp = if max_peak_powder > 0.0 {
        max_peak_powder / (cfg.target_cp_lines as f64 - rng.random_range(0.2..0.8))
    } else {
        1.0
    };

    // Transformation matrices.
    let mut delta_nb = vec![vec![0.0; nk]; nchem];
    for i in 0..nchem {
        delta_nb[i][i.min(np - 1)] = 0.35;
        delta_nb[i][nk - 1] = rng.random_range(0.1..0.2); // graphite
    }
    let bm = np; // black mass index
    let ls = np + 1; // li salt index
    let gr = nk - 1; // graphite index
    let mut delta_cp = vec![vec![0.0; nk]; np];
    for p in 0..np {
        delta_cp[p][bm] = rng.random_range(0.5..0.8);
        delta_cp[p][ls] = rng.random_range(0.05..0.15);
    }
    let mut delta_mc = vec![vec![0.0; nk]; nk];
    delta_mc[bm][bm] = rng.random_range(1.02..1.15);
    delta_mc[ls][ls] = rng.random_range(1.02..1.1);
    let mut delta_rec = vec![vec![vec![0.0; nproc]; nchem]; nk];
    for i in 0..nchem {
        // First process behaves hydrometallurgically, second directly.
        delta_rec[bm][i][0] = rng.random_range(0.3..0.45);
        delta_rec[ls][i][0] = rng.random_range(0.02..0.07);
        delta_rec[gr][i][0] = rng.random_range(0.1..0.18);
        if nproc > 1 {
            delta_rec[i.min(np - 1)][i][1] = rng.random_range(0.22..0.34);
            delta_rec[gr][i][1] = rng.random_range(0.1..0.16);
        }
    }

    let zone_costs = |rng: &mut ChaCha8Rng, us: bool| ZoneCosts {
        equipment_multiplier: if us { 1.0 } else { 0.6 },
        labor: if us { 20.0 } else { 3.0 } * rng.random_range(0.9..1.1),
        electricity: if us { 68.0 } else { 88.0 } * rng.random_range(0.9..1.1),
        natural_gas: if us { 3.84 } else { 12.0 },
        water: if us { 5.0 } else { 2.0 },
        landfill: if us { 55.36 } else { 10.0 },
        wastewater: if us { 7.0 } else { 3.0 },
    };
    let zones: Vec<Zone> = zone_names
        .iter()
        .zip(&betas)
        .enumerate()
        .map(|(zi, (name, &beta))| Zone {
            name: name.clone(),
            beta,
            costs: zone_costs(&mut rng, zi == 0),
        })
        .collect();

    let small_intensity = |rng: &mut ChaCha8Rng| ResourceIntensity {
        labor_hours: rng.random_range(0.005..0.03),
        electricity_kwh: rng.random_range(2.0..12.0),
        natural_gas_mmbtu: rng.random_range(0.0..0.05),
        water_kgal: rng.random_range(0.0..0.05),
        landfill_tons: rng.random_range(0.0..0.02),
        wastewater_kgal: rng.random_range(0.0..0.04),
    };
    let process_econ: Vec<ProcessEcon> = (0..nproc)
        .map(|_| {
            let r = rng.random_range(0.55..0.85);
            let q = rng.random_range(0.3..1.2) * u_rec.powf(1.0 - r);
            ProcessEcon {
                capex_coeff: q,
                capex_exponent: r,
                fixed_annual: rng.random_range(0.0..0.3) * q * u_rec.powf(r),
                intensity: small_intensity(&mut rng),
                base_variable_cost: (0..nchem).map(|_| rng.random_range(0.5..3.0)).collect(),
            }
        })
        .collect();
    let line_econ: Vec<LineEcon> = (0..np)
        .map(|_| {
            let r = rng.random_range(0.55..0.85);
            let q = rng.random_range(0.3..1.2) * u_cp.powf(1.0 - r);
            LineEcon {
                capex_coeff: q,
                capex_exponent: r,
                fixed_annual: rng.random_range(0.0..0.25) * q * u_cp.powf(r),
                intensity: small_intensity(&mut rng),
                base_variable_cost: rng.random_range(2.0..6.0),
            }
        })
        .collect();
    let conversion_econ: Vec<ConversionEcon> = (0..nk)
        .map(|k| ConversionEcon {
            intensity: if k == bm || k == ls {
                small_intensity(&mut rng)
            } else {
                ResourceIntensity::default()
            },
            base_variable_cost: if k == bm || k == ls { rng.random_range(0.5..2.0) } else { 0.0 },
        })
        .collect();

    let off = rng.random_range(0.5..2.0);
    let tr = |nz: usize, scale: f64| -> Vec<Vec<f64>> {
        (0..nz)
            .map(|a| (0..nz).map(|b| if a == b { 0.0 } else { scale }).collect())
            .collect()
    };

    // Premiums over scenario prices; graphite is unpriced and fully static.
    // Black mass has no purchase market, so its cathode-input premium is
    // prohibitive.
    let mut static_cost_nb = vec![0.0; nk];
    let mut static_cost_cp = vec![0.0; nk];
    let mut static_value = vec![0.0; nk];
    for k in 0..nk {
        if k == gr {
            static_cost_nb[k] = rng.random_range(3.0..6.0);
            static_cost_cp[k] = static_cost_nb[k];
            static_value[k] = 0.4 * static_cost_nb[k];
        } else if k == bm {
            static_cost_cp[k] = 500.0;
        } else if k == ls {
            static_cost_cp[k] = rng.random_range(0.5..2.0);
        }
    }

    let data = ModelData {
        schema_version: DATA_SCHEMA_VERSION,
        name: format!("synth-batt-{}", cfg.seed),
        chemistries: chems,
        processes: procs,
        materials,
        cathode_powders: powders,
        zones,
        delta_nb,
        delta_cp,
        delta_mc,
        delta_rec,
        u_rec,
        u_cp,
        gamma_annual: 0.03,
        rho: 0.25,
        eta: 0.70,
        transport_material: tr(cfg.zones, off),
        transport_battery: tr(cfg.zones, off * 1.5),
        static_cost_nb,
        static_cost_cp,
        static_value,
        process_econ,
        line_econ,
        conversion_econ,
    };
    data.validate()?;
    Ok((data, tree))
}

fn price_bands(
    rng: &mut ChaCha8Rng,
    metal: &str,
    years: usize,
    range: std::ops::Range<f64>,
) -> MetalPriceBands {
    let med0 = rng.random_range(range);
    let drift_sds = rng.random_range(1.0..1.03);
    let drift_steps = rng.random_range(0.99..1.02);
    let spread = rng.random_range(0.2..0.35);
    let series = |drift: f64| -> Vec<f64> {
        (0..=years).map(|t| med0 * drift.powi(t as i32)).collect()
    };
    let med_sds = series(drift_sds);
    let med_steps = series(drift_steps);
    MetalPriceBands {
        metal: metal.into(),
        lb_sds: med_sds.iter().map(|v| v * (1.0 - spread)).collect(),
        ub_sds: med_sds.iter().map(|v| v * (1.0 + spread)).collect(),
        lb_steps: med_steps.iter().map(|v| v * (1.0 - spread)).collect(),
        ub_steps: med_steps.iter().map(|v| v * (1.0 + spread)).collect(),
        med_sds,
        med_steps,
    }
}

/// Random feasible capacity plan: capacities within bounds, totals raised
/// where needed so installed capacity is nondecreasing across periods.
pub fn random_feasible_plan(
    data: &ModelData,
    counts: &crate::build::FacilityCounts,
    rng: &mut ChaCha8Rng,
) -> crate::plan::CapacityPlan {
    let (nz, nj, np) = (data.num_zones(), data.num_processes(), data.num_powders());
    let nl = counts.rec.len();
    let mut rec = vec![vec![vec![Vec::new(); nj]; nl]; nz];
    let mut cp = vec![vec![vec![Vec::new(); np]; nl]; nz];
    fn fill(rng: &mut ChaCha8Rng, slots: usize, bound: f64, prev_total: f64) -> Vec<f64> {
        let mut caps: Vec<f64> = (0..slots).map(|_| rng.random_range(0.0..=bound)).collect();
        let mut total: f64 = caps.iter().sum();
        let mut i = 0;
        while total < prev_total && i < slots {
            let bump = (bound - caps[i]).min(prev_total - total);
            caps[i] += bump;
            total += bump;
            i += 1;
        }
        caps
    }
    for z in 0..nz {
        for j in 0..nj {
            let mut prev_total = 0.0;
            for l in 0..nl {
                let caps = fill(rng, counts.rec[l], data.u_rec, prev_total);
                prev_total = caps.iter().sum();
                rec[z][l][j] = caps;
            }
        }
        for p in 0..np {
            let mut prev_total = 0.0;
            for l in 0..nl {
                let caps = fill(rng, counts.cp[l][p], data.u_cp, prev_total);
                prev_total = caps.iter().sum();
                cp[z][l][p] = caps;
            }
        }
    }
    crate::plan::CapacityPlan::PerFacility { rec, cp }
}
