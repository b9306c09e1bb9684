//! Input schema for scenario generation: EV-stock projection envelopes,
//! battery retirement and chemistry market-share data, metal price bands, and
//! the priced materials they feed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenError;
use crate::time::TimeStructure;

pub const ENVELOPE_SCHEMA_VERSION: u32 = 1;

/// The two chemistry market-share projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsProjection {
    Ncx,
    Lfp,
}

impl MsProjection {
    pub const ALL: [MsProjection; 2] = [MsProjection::Ncx, MsProjection::Lfp];

    pub fn label(self) -> &'static str {
        match self {
            MsProjection::Ncx => "ncx",
            MsProjection::Lfp => "lfp",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneShare {
    pub name: String,
    /// Fraction of the global EV market allocated to the zone, in (0, 1].
    pub beta: f64,
}

/// Annual EV stock under both projections. Arrays cover model years
/// `1..=num_years`; the measured base-year stock is `base`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvStock {
    pub base: f64,
    pub sds: Vec<f64>,
    pub steps: Vec<f64>,
}

/// Battery-EV share of EV stock per projection, years `0..=num_years`
/// (index 0 is the base year), plus the sales-share history for the `max_age`
/// years before the base year (oldest first).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BevShare {
    pub sds: Vec<f64>,
    pub steps: Vec<f64>,
    pub sales_history: Vec<f64>,
}

/// Chemistry market shares per projection. Each chemistry's series covers
/// years `(1 - max_age)..=num_years`, i.e. `max_age` history entries followed
/// by the modeled years.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketShares {
    pub ncx: Vec<Vec<f64>>,
    pub lfp: Vec<Vec<f64>>,
}

impl MarketShares {
    pub fn of(&self, p: MsProjection) -> &Vec<Vec<f64>> {
        match p {
            MsProjection::Ncx => &self.ncx,
            MsProjection::Lfp => &self.lfp,
        }
    }
}

/// Retirement profile: `rates[a-1]` is the fraction of age-`a` batteries that
/// retire, for `a = 1..=max_age`, with the last entry equal to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Retirement {
    pub max_age: usize,
    pub rates: Vec<f64>,
}

/// Median and 40% highest-posterior-density bounds of one metal's price under
/// both projections, years `0..=num_years`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetalPriceBands {
    pub metal: String,
    pub med_sds: Vec<f64>,
    pub med_steps: Vec<f64>,
    pub lb_sds: Vec<f64>,
    pub ub_sds: Vec<f64>,
    pub lb_steps: Vec<f64>,
    pub ub_steps: Vec<f64>,
}

/// A material whose purchase cost and value respond to metal prices through
/// mass fractions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PricedMaterial {
    pub name: String,
    pub base_cost: f64,
    pub base_value: f64,
    /// Mass fraction of each metal in the material, in [0, 1].
    pub metal_fractions: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionEnvelope {
    pub schema_version: u32,
    pub name: String,
    /// Base calendar year; model year 1 is `base_year + 1`.
    pub base_year: i32,
    pub years_per_period: usize,
    pub num_years: usize,
    pub periods_per_planning: usize,
    pub chemistries: Vec<String>,
    pub zones: Vec<ZoneShare>,
    pub ev_stock: EvStock,
    pub bev_share: BevShare,
    pub market_share: MarketShares,
    pub retirement: Retirement,
    /// Active battery counts by age `0..=max_age` at the base year.
    pub initial_age_counts: Vec<f64>,
    /// Average battery pack mass per chemistry for battery EVs.
    pub mass_bev: Vec<f64>,
    /// Average battery pack mass per chemistry for plug-in hybrids.
    pub mass_phev: Vec<f64>,
    pub metals: Vec<String>,
    pub metal_prices: Vec<MetalPriceBands>,
    pub materials: Vec<PricedMaterial>,
}

impl ProjectionEnvelope {
    pub fn num_periods(&self) -> usize {
        self.num_years / self.years_per_period
    }

    pub fn time_structure(&self, stages: usize) -> Result<TimeStructure, ScenError> {
        TimeStructure::uniform(
            self.base_year + 1,
            self.years_per_period,
            self.num_periods(),
            self.periods_per_planning,
            stages,
        )
    }

    pub fn max_age(&self) -> usize {
        self.retirement.max_age
    }

    pub fn validate(&self) -> Result<(), ScenError> {
        if self.schema_version != ENVELOPE_SCHEMA_VERSION {
            return Err(ScenError::Validation(format!(
                "unsupported envelope schema version {}",
                self.schema_version
            )));
        }
        let y = self.num_years;
        if y == 0 || self.years_per_period == 0 || y % self.years_per_period != 0 {
            return Err(ScenError::Validation(format!(
                "num_years {y} must be a positive multiple of years_per_period {}",
                self.years_per_period
            )));
        }
        let nchem = self.chemistries.len();
        if nchem == 0 {
            return Err(ScenError::Validation("at least one chemistry required".into()));
        }
        if self.zones.is_empty() {
            return Err(ScenError::Validation("at least one zone required".into()));
        }
        for z in &self.zones {
            if !(z.beta > 0.0 && z.beta <= 1.0) {
                return Err(ScenError::Validation(format!(
                    "zone {} share {} outside (0, 1]",
                    z.name, z.beta
                )));
            }
        }
        if self.ev_stock.sds.len() != y || self.ev_stock.steps.len() != y {
            return Err(ScenError::DimensionMismatch(format!(
                "ev stock series must have {y} entries"
            )));
        }
        if !(self.ev_stock.base > 0.0)
            || self.ev_stock.sds.iter().any(|&v| !(v > 0.0))
            || self.ev_stock.steps.iter().any(|&v| !(v > 0.0))
        {
            return Err(ScenError::Validation("EV stock series must be positive".into()));
        }
        let a = self.retirement.max_age;
        if a == 0 || self.retirement.rates.len() != a {
            return Err(ScenError::DimensionMismatch(format!(
                "retirement needs max_age entries, got {} for max_age {a}",
                self.retirement.rates.len()
            )));
        }
        for &r in &self.retirement.rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(ScenError::Validation(format!("retirement rate {r} outside [0,1]")));
            }
        }
        if (self.retirement.rates[a - 1] - 1.0).abs() > 1e-12 {
            return Err(ScenError::Validation(
                "batteries must fully retire at max_age (last rate must be 1)".into(),
            ));
        }
        if self.initial_age_counts.len() != a + 1 {
            return Err(ScenError::DimensionMismatch(format!(
                "initial_age_counts needs max_age + 1 entries, got {}",
                self.initial_age_counts.len()
            )));
        }
        if self.bev_share.sds.len() != y + 1
            || self.bev_share.steps.len() != y + 1
            || self.bev_share.sales_history.len() != a
        {
            return Err(ScenError::DimensionMismatch(
                "bev_share needs num_years + 1 entries per projection and max_age history".into(),
            ));
        }
        for series in [&self.market_share.ncx, &self.market_share.lfp] {
            if series.len() != nchem {
                return Err(ScenError::DimensionMismatch(
                    "market share needs one series per chemistry".into(),
                ));
            }
            for row in series {
                if row.len() != a + y {
                    return Err(ScenError::DimensionMismatch(format!(
                        "market share series must cover max_age + num_years = {} years",
                        a + y
                    )));
                }
            }
            // Shares across chemistries stay within a unit per year.
            for t in 0..(a + y) {
                let total: f64 = series.iter().map(|row| row[t]).sum();
                if total > 1.0 + 1e-9 {
                    return Err(ScenError::Validation(format!(
                        "market shares sum to {total} > 1 at series index {t}"
                    )));
                }
            }
        }
        if self.mass_bev.len() != nchem || self.mass_phev.len() != nchem {
            return Err(ScenError::DimensionMismatch(
                "battery masses need one entry per chemistry".into(),
            ));
        }
        for bands in &self.metal_prices {
            if !self.metals.contains(&bands.metal) {
                return Err(ScenError::Validation(format!(
                    "price bands for unknown metal {}",
                    bands.metal
                )));
            }
            for series in [
                &bands.med_sds,
                &bands.med_steps,
                &bands.lb_sds,
                &bands.ub_sds,
                &bands.lb_steps,
                &bands.ub_steps,
            ] {
                if series.len() != y + 1 {
                    return Err(ScenError::DimensionMismatch(format!(
                        "metal {} price series must have num_years + 1 entries",
                        bands.metal
                    )));
                }
            }
            for t in 0..=y {
                if !(bands.lb_sds[t] <= bands.med_sds[t] && bands.med_sds[t] <= bands.ub_sds[t])
                    || !(bands.lb_steps[t] <= bands.med_steps[t]
                        && bands.med_steps[t] <= bands.ub_steps[t])
                {
                    return Err(ScenError::Validation(format!(
                        "metal {} bands must bracket the median at index {t}",
                        bands.metal
                    )));
                }
            }
        }
        for m in &self.metals {
            if !self.metal_prices.iter().any(|b| &b.metal == m) {
                return Err(ScenError::Validation(format!("metal {m} has no price bands")));
            }
        }
        for mat in &self.materials {
            for (metal, &frac) in &mat.metal_fractions {
                if !self.metals.contains(metal) {
                    return Err(ScenError::Validation(format!(
                        "material {} references unknown metal {metal}",
                        mat.name
                    )));
                }
                if !(0.0..=1.0).contains(&frac) {
                    return Err(ScenError::Validation(format!(
                        "material {} fraction {frac} outside [0,1]",
                        mat.name
                    )));
                }
            }
            if mat.base_cost < 0.0 || mat.base_value < 0.0 {
                return Err(ScenError::Validation(format!(
                    "material {} base cost/value must be nonnegative",
                    mat.name
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ScenError> {
        let text = std::fs::read_to_string(path)?;
        let env: ProjectionEnvelope = serde_json::from_str(&text)?;
        env.validate()?;
        Ok(env)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// A small but fully populated envelope for unit tests: two chemistries,
    /// two zones, six annual periods, three planning periods, max age 3.
    pub fn desk_envelope() -> ProjectionEnvelope {
        let y = 6;
        let a = 3;
        let grow = |rate: f64| -> Vec<f64> {
            (0..y).map(|t| 1000.0 * rate.powi(t as i32 + 1)).collect()
        };
        ProjectionEnvelope {
            schema_version: ENVELOPE_SCHEMA_VERSION,
            name: "unit-env".into(),
            base_year: 2020,
            years_per_period: 1,
            num_years: y,
            periods_per_planning: 2,
            chemistries: vec!["nmc".into(), "lfp".into()],
            zones: vec![
                ZoneShare { name: "us".into(), beta: 0.2 },
                ZoneShare { name: "cn".into(), beta: 0.5 },
            ],
            ev_stock: EvStock { base: 1000.0, sds: grow(1.25), steps: grow(1.10) },
            bev_share: BevShare {
                sds: vec![0.7; y + 1],
                steps: vec![0.6; y + 1],
                sales_history: vec![0.55; a],
            },
            market_share: MarketShares {
                ncx: vec![vec![0.7; a + y], vec![0.3; a + y]],
                lfp: vec![vec![0.35; a + y], vec![0.65; a + y]],
            },
            retirement: Retirement { max_age: a, rates: vec![0.1, 0.5, 1.0] },
            initial_age_counts: vec![400.0, 350.0, 250.0, 0.0],
            mass_bev: vec![0.45, 0.40],
            mass_phev: vec![0.15, 0.12],
            metals: vec!["lithium".into(), "nickel".into()],
            metal_prices: vec![
                MetalPriceBands {
                    metal: "lithium".into(),
                    med_sds: vec![22.0; y + 1],
                    med_steps: vec![18.0; y + 1],
                    lb_sds: vec![17.0; y + 1],
                    ub_sds: vec![29.0; y + 1],
                    lb_steps: vec![14.0; y + 1],
                    ub_steps: vec![23.0; y + 1],
                },
                MetalPriceBands {
                    metal: "nickel".into(),
                    med_sds: vec![16.0; y + 1],
                    med_steps: vec![13.0; y + 1],
                    lb_sds: vec![12.0; y + 1],
                    ub_sds: vec![21.0; y + 1],
                    lb_steps: vec![10.0; y + 1],
                    ub_steps: vec![17.0; y + 1],
                },
            ],
            materials: vec![
                PricedMaterial {
                    name: "li_salt".into(),
                    base_cost: 40.0,
                    base_value: 30.0,
                    metal_fractions: [("lithium".to_string(), 0.2)].into_iter().collect(),
                },
                PricedMaterial {
                    name: "precursor".into(),
                    base_cost: 50.0,
                    base_value: 38.0,
                    metal_fractions: [("nickel".to_string(), 0.3), ("lithium".to_string(), 0.05)]
                        .into_iter()
                        .collect(),
                },
            ],
        }
    }

    #[test]
    fn desk_envelope_validates() {
        desk_envelope().validate().unwrap();
    }
}
