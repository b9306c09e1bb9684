//! The default synthetic dataset shipped with the repository: a two-zone
//! (U.S./China) instance over 2021-2050 in five-year periods, with the
//! published facility bounds, discount and salvage rates, and the zonal cost
//! baseline. Magnitudes are plausible but synthetic.

use scengen::{
    BevShare, EvStock, MarketShares, MetalPriceBands, PricedMaterial, ProjectionEnvelope,
    Retirement, ZoneShare, ENVELOPE_SCHEMA_VERSION,
};

use crate::data::{
    ConversionEcon, LineEcon, ModelData, ProcessEcon, ResourceIntensity, Zone, ZoneCosts,
    DATA_SCHEMA_VERSION,
};

const YEARS: usize = 30;
const MAX_AGE: usize = 8;

fn ramp(start: f64, end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + (end - start) * i as f64 / (n - 1).max(1) as f64).collect()
}

/// Stock path compounding from `base` with growth tapering from `g0` to `g1`.
fn stock_series(base: f64, g0: f64, g1: f64) -> Vec<f64> {
    let rates = ramp(g0, g1, YEARS);
    let mut out = Vec::with_capacity(YEARS);
    let mut level = base;
    for r in rates {
        level *= r;
        out.push(level);
    }
    out
}

/// Default projection envelope ("desk-env"): 30 years from 2021 in five-year
/// periods, planning decisions every period. The fleet is a synthetic slice
/// of the market sized so facility counts stay in the single digits against
/// the published capacity bounds.
pub fn desk_envelope() -> ProjectionEnvelope {
    let base_ev = 110_000.0; // packs on the road in 2020
    let sds = stock_series(base_ev, 1.30, 1.02);
    let steps = stock_series(base_ev, 1.22, 1.01);
    let a = MAX_AGE;
    let ms = |nmc0: f64, nmc1: f64| -> Vec<Vec<f64>> {
        let nmc = ramp(nmc0, nmc1, a + YEARS);
        let lfp: Vec<f64> = nmc.iter().map(|v| (0.97 - v).max(0.0)).collect();
        vec![nmc, lfp]
    };
    let bands = |metal: &str, med0: f64, grow_sds: f64, grow_steps: f64| -> MetalPriceBands {
        let med_sds: Vec<f64> = (0..=YEARS).map(|t| med0 * grow_sds.powi(t as i32)).collect();
        let med_steps: Vec<f64> = (0..=YEARS).map(|t| med0 * grow_steps.powi(t as i32)).collect();
        MetalPriceBands {
            metal: metal.into(),
            lb_sds: med_sds.iter().map(|v| 0.72 * v).collect(),
            ub_sds: med_sds.iter().map(|v| 1.33 * v).collect(),
            lb_steps: med_steps.iter().map(|v| 0.75 * v).collect(),
            ub_steps: med_steps.iter().map(|v| 1.28 * v).collect(),
            med_sds,
            med_steps,
        }
    };
    ProjectionEnvelope {
        schema_version: ENVELOPE_SCHEMA_VERSION,
        name: "desk-env".into(),
        base_year: 2020,
        years_per_period: 5,
        num_years: YEARS,
        periods_per_planning: 1,
        chemistries: vec!["nmc".into(), "lfp".into()],
        zones: vec![
            ZoneShare { name: "us".into(), beta: 0.2 },
            ZoneShare { name: "cn".into(), beta: 0.5 },
        ],
        ev_stock: EvStock { base: base_ev, sds, steps },
        bev_share: BevShare {
            sds: ramp(0.68, 0.86, YEARS + 1),
            steps: ramp(0.66, 0.76, YEARS + 1),
            sales_history: vec![0.62; a],
        },
        market_share: MarketShares { ncx: ms(0.72, 0.62), lfp: ms(0.38, 0.30) },
        retirement: Retirement {
            max_age: a,
            rates: vec![0.02, 0.04, 0.08, 0.15, 0.30, 0.50, 0.70, 1.0],
        },
        initial_age_counts: vec![
            26_000.0, 23_000.0, 19_000.0, 15_000.0, 11_000.0, 8_000.0, 5_000.0, 3_000.0, 0.0,
        ],
        mass_bev: vec![0.45, 0.40],
        mass_phev: vec![0.15, 0.12],
        metals: vec!["lithium".into(), "cobalt".into(), "nickel".into()],
        metal_prices: vec![
            bands("lithium", 15_000.0, 1.018, 1.006),
            bands("cobalt", 45_000.0, 1.010, 1.002),
            bands("nickel", 18_000.0, 1.012, 1.004),
        ],
        materials: vec![
            PricedMaterial {
                name: "cp_nmc".into(),
                base_cost: 24_000.0,
                base_value: 21_000.0,
                metal_fractions: [
                    ("lithium".to_string(), 0.07),
                    ("cobalt".to_string(), 0.12),
                    ("nickel".to_string(), 0.33),
                ]
                .into_iter()
                .collect(),
            },
            PricedMaterial {
                name: "cp_lfp".into(),
                base_cost: 9_000.0,
                base_value: 8_000.0,
                metal_fractions: [("lithium".to_string(), 0.04)].into_iter().collect(),
            },
            PricedMaterial {
                name: "black_mass".into(),
                base_cost: 12_500.0,
                base_value: 11_000.0,
                metal_fractions: [
                    ("lithium".to_string(), 0.03),
                    ("cobalt".to_string(), 0.09),
                    ("nickel".to_string(), 0.22),
                ]
                .into_iter()
                .collect(),
            },
            PricedMaterial {
                name: "li_salt".into(),
                base_cost: 17_000.0,
                base_value: 15_500.0,
                metal_fractions: [("lithium".to_string(), 0.18)].into_iter().collect(),
            },
        ],
    }
}

/// Default model data ("desk-batt"): two zones with the baseline zonal cost
/// table, hydrometallurgical and direct recycling, and a compact material
/// set.
pub fn desk_data() -> ModelData {
    let us = ZoneCosts {
        equipment_multiplier: 1.0,
        labor: 20.00,
        electricity: 68.00,
        natural_gas: 3.84,
        water: 5.00,
        landfill: 55.36,
        wastewater: 7.00,
    };
    let cn = ZoneCosts {
        equipment_multiplier: 0.6,
        labor: 3.00,
        electricity: 88.00,
        natural_gas: 12.00,
        water: 2.00,
        landfill: 10.00,
        wastewater: 3.00,
    };
    // materials: cp_nmc, cp_lfp (powders), black_mass, li_salt, graphite
    let delta_nb = vec![
        vec![0.35, 0.00, 0.0, 0.0, 0.18], // nmc pack
        vec![0.00, 0.30, 0.0, 0.0, 0.15], // lfp pack
    ];
    let delta_cp = vec![
        vec![0.0, 0.0, 0.75, 0.12, 0.0], // cp_nmc inputs
        vec![0.0, 0.0, 0.00, 0.20, 0.0], // cp_lfp inputs
    ];
    let mut delta_mc = vec![vec![0.0; 5]; 5];
    delta_mc[2][2] = 1.08; // refine black mass
    delta_mc[3][3] = 1.04; // refine lithium salt
    // delta_rec[material][chem][process]; processes: hydro, direct
    let delta_rec = vec![
        vec![vec![0.00, 0.33], vec![0.00, 0.00]], // cp_nmc
        vec![vec![0.00, 0.00], vec![0.00, 0.28]], // cp_lfp
        vec![vec![0.42, 0.00], vec![0.18, 0.00]], // black_mass
        vec![vec![0.05, 0.00], vec![0.06, 0.00]], // li_salt
        vec![vec![0.15, 0.16], vec![0.15, 0.14]], // graphite
    ];
    ModelData {
        schema_version: DATA_SCHEMA_VERSION,
        name: "desk-batt".into(),
        chemistries: vec!["nmc".into(), "lfp".into()],
        processes: vec!["hydro".into(), "direct".into()],
        materials: vec![
            "cp_nmc".into(),
            "cp_lfp".into(),
            "black_mass".into(),
            "li_salt".into(),
            "graphite".into(),
        ],
        cathode_powders: vec!["cp_nmc".into(), "cp_lfp".into()],
        zones: vec![
            Zone { name: "us".into(), beta: 0.2, costs: us },
            Zone { name: "cn".into(), beta: 0.5, costs: cn },
        ],
        delta_nb,
        delta_cp,
        delta_mc,
        delta_rec,
        u_rec: 100_000.0,
        u_cp: 2_000.0,
        gamma_annual: 0.03,
        rho: 0.25,
        eta: 0.70,
        transport_material: vec![vec![0.0, 120.0], vec![120.0, 0.0]],
        transport_battery: vec![vec![0.0, 180.0], vec![180.0, 0.0]],
        // Powders, black mass and lithium salt are priced by the tree; these
        // are premiums. Black mass is a recycling intermediate with no
        // market, so buying it for cathode production is prohibitive.
        static_cost_nb: vec![0.0, 0.0, 0.0, 0.0, 6_000.0],
        static_cost_cp: vec![0.0, 0.0, 50_000.0, 500.0, 6_000.0],
        static_value: vec![0.0, 0.0, 0.0, 0.0, 2_500.0],
        process_econ: vec![
            ProcessEcon {
                // hydrometallurgical
                capex_coeff: 9_500.0,
                capex_exponent: 0.62,
                fixed_annual: 1_200_000.0,
                intensity: ResourceIntensity {
                    labor_hours: 0.9,
                    electricity_kwh: 180.0,
                    natural_gas_mmbtu: 0.35,
                    water_kgal: 0.8,
                    landfill_tons: 0.12,
                    wastewater_kgal: 0.6,
                },
                base_variable_cost: vec![240.0, 210.0],
            },
            ProcessEcon {
                // direct
                capex_coeff: 11_000.0,
                capex_exponent: 0.60,
                fixed_annual: 900_000.0,
                intensity: ResourceIntensity {
                    labor_hours: 0.7,
                    electricity_kwh: 120.0,
                    natural_gas_mmbtu: 0.20,
                    water_kgal: 0.5,
                    landfill_tons: 0.08,
                    wastewater_kgal: 0.4,
                },
                base_variable_cost: vec![300.0, 260.0],
            },
        ],
        line_econ: vec![
            LineEcon {
                capex_coeff: 15_000.0,
                capex_exponent: 0.58,
                fixed_annual: 240_000.0,
                intensity: ResourceIntensity {
                    labor_hours: 6.0,
                    electricity_kwh: 900.0,
                    natural_gas_mmbtu: 1.5,
                    water_kgal: 2.0,
                    landfill_tons: 0.3,
                    wastewater_kgal: 1.2,
                },
                base_variable_cost: 1_900.0,
            },
            LineEcon {
                capex_coeff: 12_500.0,
                capex_exponent: 0.58,
                fixed_annual: 200_000.0,
                intensity: ResourceIntensity {
                    labor_hours: 5.0,
                    electricity_kwh: 700.0,
                    natural_gas_mmbtu: 1.2,
                    water_kgal: 1.6,
                    landfill_tons: 0.25,
                    wastewater_kgal: 1.0,
                },
                base_variable_cost: 1_100.0,
            },
        ],
        conversion_econ: vec![
            ConversionEcon { intensity: ResourceIntensity::default(), base_variable_cost: 0.0 },
            ConversionEcon { intensity: ResourceIntensity::default(), base_variable_cost: 0.0 },
            ConversionEcon {
                intensity: ResourceIntensity {
                    labor_hours: 0.5,
                    electricity_kwh: 140.0,
                    natural_gas_mmbtu: 0.2,
                    water_kgal: 0.4,
                    landfill_tons: 0.05,
                    wastewater_kgal: 0.3,
                },
                base_variable_cost: 260.0,
            },
            ConversionEcon {
                intensity: ResourceIntensity {
                    labor_hours: 0.4,
                    electricity_kwh: 90.0,
                    natural_gas_mmbtu: 0.15,
                    water_kgal: 0.3,
                    landfill_tons: 0.04,
                    wastewater_kgal: 0.2,
                },
                base_variable_cost: 180.0,
            },
            ConversionEcon { intensity: ResourceIntensity::default(), base_variable_cost: 0.0 },
        ],
    }
}
