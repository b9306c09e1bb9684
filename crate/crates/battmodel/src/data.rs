//! Static model data: index sets, mass-transformation coefficients, economic
//! scalars, facility cost curves, and location-dependent cost rates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use apwl::{ConcaveCostFn, PowerTerm};

use crate::error::ModelError;

pub const DATA_SCHEMA_VERSION: u32 = 1;

/// Location-dependent cost rates that scale facility and process costs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZoneCosts {
    pub equipment_multiplier: f64,
    /// Currency per labor hour.
    pub labor: f64,
    /// Currency per MWh.
    pub electricity: f64,
    /// Currency per MMBtu.
    pub natural_gas: f64,
    /// Currency per thousand gallons.
    pub water: f64,
    /// Currency per ton landfilled.
    pub landfill: f64,
    /// Currency per thousand gallons treated.
    pub wastewater: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    /// Fraction of the global market served from this zone.
    pub beta: f64,
    pub costs: ZoneCosts,
}

/// Per-tonne resource use of a process, priced against [`ZoneCosts`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResourceIntensity {
    pub labor_hours: f64,
    pub electricity_kwh: f64,
    pub natural_gas_mmbtu: f64,
    pub water_kgal: f64,
    pub landfill_tons: f64,
    pub wastewater_kgal: f64,
}

impl ResourceIntensity {
    pub fn unit_cost(&self, z: &ZoneCosts) -> f64 {
        self.labor_hours * z.labor
            + self.electricity_kwh * z.electricity / 1000.0
            + self.natural_gas_mmbtu * z.natural_gas
            + self.water_kgal * z.water
            + self.landfill_tons * z.landfill
            + self.wastewater_kgal * z.wastewater
    }
}

/// Annualized facility cost curve `equip * (q * y^r + w)` plus per-tonne
/// variable costs per chemistry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessEcon {
    pub capex_coeff: f64,
    pub capex_exponent: f64,
    pub fixed_annual: f64,
    pub intensity: ResourceIntensity,
    /// Base variable cost per tonne of battery recycled, per chemistry.
    pub base_variable_cost: Vec<f64>,
}

/// Cathode production line economics for one powder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineEcon {
    pub capex_coeff: f64,
    pub capex_exponent: f64,
    pub fixed_annual: f64,
    pub intensity: ResourceIntensity,
    pub base_variable_cost: f64,
}

/// Material-conversion economics for one material.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversionEcon {
    pub intensity: ResourceIntensity,
    pub base_variable_cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelData {
    pub schema_version: u32,
    pub name: String,
    pub chemistries: Vec<String>,
    pub processes: Vec<String>,
    pub materials: Vec<String>,
    /// Subset of `materials` that are cathode powders.
    pub cathode_powders: Vec<String>,
    pub zones: Vec<Zone>,
    /// `delta_nb[chem][material]`: tonnes of material per tonne of battery.
    pub delta_nb: Vec<Vec<f64>>,
    /// `delta_cp[powder][material]`: tonnes of input material per tonne of
    /// powder produced; nonzero only for non-powder materials.
    pub delta_cp: Vec<Vec<f64>>,
    /// `delta_mc[material][material]`: tonnes of input per tonne converted;
    /// nonzero only between non-powder materials.
    pub delta_mc: Vec<Vec<f64>>,
    /// `delta_rec[material][chem][process]`: tonnes recovered per tonne
    /// recycled.
    pub delta_rec: Vec<Vec<Vec<f64>>>,
    /// Maximum annual capacity of one recycling facility (tonnes/year).
    pub u_rec: f64,
    /// Maximum annual capacity of one cathode production line (tonnes/year).
    pub u_cp: f64,
    /// Annual discount rate in [0, 1).
    pub gamma_annual: f64,
    /// Inventory holding charge as a fraction of material value per year.
    pub rho: f64,
    /// Fraction of material value recovered when selling to the market.
    pub eta: f64,
    /// `transport_material[from][to]` currency per tonne; diagonal zero.
    pub transport_material: Vec<Vec<f64>>,
    pub transport_battery: Vec<Vec<f64>>,
    /// Static purchase-cost premium per material for battery manufacturing,
    /// added on top of the scenario price; the full cost for materials the
    /// tree does not price.
    pub static_cost_nb: Vec<f64>,
    /// Static purchase-cost premium per material for cathode production
    /// inputs. A prohibitive premium models intermediates that cannot be
    /// bought on a market.
    pub static_cost_cp: Vec<f64>,
    /// Static value component per material for inventory charges and salvage.
    pub static_value: Vec<f64>,
    /// Recycling process economics, one per process.
    pub process_econ: Vec<ProcessEcon>,
    /// Cathode line economics, one per powder.
    pub line_econ: Vec<LineEcon>,
    /// Conversion economics, one per material (used for non-powder inputs).
    pub conversion_econ: Vec<ConversionEcon>,
}

impl ModelData {
    pub fn num_chemistries(&self) -> usize {
        self.chemistries.len()
    }
    pub fn num_processes(&self) -> usize {
        self.processes.len()
    }
    pub fn num_materials(&self) -> usize {
        self.materials.len()
    }
    pub fn num_powders(&self) -> usize {
        self.cathode_powders.len()
    }
    pub fn num_zones(&self) -> usize {
        self.zones.len()
    }

    /// Material index of powder `p`.
    pub fn powder_material(&self, p: usize) -> usize {
        self.materials
            .iter()
            .position(|m| m == &self.cathode_powders[p])
            .expect("validated powder")
    }

    /// Powder index of material `k`, when it is a powder.
    pub fn powder_of_material(&self, k: usize) -> Option<usize> {
        self.cathode_powders.iter().position(|p| p == &self.materials[k])
    }

    pub fn is_powder(&self, k: usize) -> bool {
        self.powder_of_material(k).is_some()
    }

    /// Annualized facility cost curve for recycling process `j` in zone `z`.
    pub fn recycling_cost_curve(&self, z: usize, j: usize) -> ConcaveCostFn {
        let e = &self.process_econ[j];
        let mult = self.zones[z].costs.equipment_multiplier;
        ConcaveCostFn::new(
            vec![PowerTerm { coefficient: mult * e.capex_coeff, exponent: e.capex_exponent }],
            mult * e.fixed_annual,
        )
        .expect("validated curve")
    }

    /// Annualized line cost curve for powder `p` in zone `z`.
    pub fn line_cost_curve(&self, z: usize, p: usize) -> ConcaveCostFn {
        let e = &self.line_econ[p];
        let mult = self.zones[z].costs.equipment_multiplier;
        ConcaveCostFn::new(
            vec![PowerTerm { coefficient: mult * e.capex_coeff, exponent: e.capex_exponent }],
            mult * e.fixed_annual,
        )
        .expect("validated curve")
    }

    /// Variable recycling cost per tonne of chemistry `i` under process `j`
    /// in zone `z`.
    pub fn recycling_unit_cost(&self, z: usize, i: usize, j: usize) -> f64 {
        let e = &self.process_econ[j];
        e.base_variable_cost[i] + e.intensity.unit_cost(&self.zones[z].costs)
    }

    /// Variable cathode production cost per tonne of powder `p` in zone `z`.
    pub fn line_unit_cost(&self, z: usize, p: usize) -> f64 {
        let e = &self.line_econ[p];
        e.base_variable_cost + e.intensity.unit_cost(&self.zones[z].costs)
    }

    /// Variable conversion cost per tonne of material `k` in zone `z`.
    pub fn conversion_unit_cost(&self, z: usize, k: usize) -> f64 {
        let e = &self.conversion_econ[k];
        e.base_variable_cost + e.intensity.unit_cost(&self.zones[z].costs)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.schema_version != DATA_SCHEMA_VERSION {
            return Err(ModelError::Validation(format!(
                "unsupported data schema version {}",
                self.schema_version
            )));
        }
        let (ni, nj, nk, np, nz) = (
            self.num_chemistries(),
            self.num_processes(),
            self.num_materials(),
            self.num_powders(),
            self.num_zones(),
        );
        if ni == 0 || nj == 0 || nk == 0 || nz == 0 {
            return Err(ModelError::Validation("index sets must be nonempty".into()));
        }
        for p in &self.cathode_powders {
            if !self.materials.contains(p) {
                return Err(ModelError::InconsistentIndexing(format!(
                    "cathode powder {p} is not a material"
                )));
            }
        }
        if np >= nk {
            return Err(ModelError::Validation(
                "at least one non-powder material is required".into(),
            ));
        }
        for z in &self.zones {
            if !(z.beta > 0.0 && z.beta <= 1.0) {
                return Err(ModelError::Validation(format!(
                    "zone {} beta {} outside (0, 1]",
                    z.name, z.beta
                )));
            }
            let c = &z.costs;
            for (name, v) in [
                ("equipment_multiplier", c.equipment_multiplier),
                ("labor", c.labor),
                ("electricity", c.electricity),
                ("natural_gas", c.natural_gas),
                ("water", c.water),
                ("landfill", c.landfill),
                ("wastewater", c.wastewater),
            ] {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(ModelError::Validation(format!(
                        "zone {} rate {name} must be nonnegative",
                        z.name
                    )));
                }
            }
        }
        let dims_ok = self.delta_nb.len() == ni
            && self.delta_nb.iter().all(|r| r.len() == nk)
            && self.delta_cp.len() == np
            && self.delta_cp.iter().all(|r| r.len() == nk)
            && self.delta_mc.len() == nk
            && self.delta_mc.iter().all(|r| r.len() == nk)
            && self.delta_rec.len() == nk
            && self.delta_rec.iter().all(|r| r.len() == ni && r.iter().all(|c| c.len() == nj));
        if !dims_ok {
            return Err(ModelError::InconsistentIndexing(
                "transformation matrix dimensions disagree with index sets".into(),
            ));
        }
        let nonneg = self
            .delta_nb
            .iter()
            .flatten()
            .chain(self.delta_cp.iter().flatten())
            .chain(self.delta_mc.iter().flatten())
            .chain(self.delta_rec.iter().flatten().flatten())
            .all(|&v| v >= 0.0 && v.is_finite());
        if !nonneg {
            return Err(ModelError::Validation("transformation coefficients must be nonnegative".into()));
        }
        for (p, row) in self.delta_cp.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 && self.is_powder(k) {
                    return Err(ModelError::Validation(format!(
                        "cathode production of {} consumes powder {}",
                        self.cathode_powders[p], self.materials[k]
                    )));
                }
            }
        }
        for (kout, row) in self.delta_mc.iter().enumerate() {
            for (kin, &v) in row.iter().enumerate() {
                if v != 0.0 && (self.is_powder(kout) || self.is_powder(kin)) {
                    return Err(ModelError::Validation(
                        "material conversion must stay within non-powder materials".into(),
                    ));
                }
            }
        }
        if !(self.u_rec > 0.0) || !(self.u_cp > 0.0) {
            return Err(ModelError::Validation("facility capacities must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.gamma_annual) {
            return Err(ModelError::Validation(format!(
                "discount rate {} outside [0, 1)",
                self.gamma_annual
            )));
        }
        if !(0.0..=1.0).contains(&self.rho) || !(0.0..=1.0).contains(&self.eta) {
            return Err(ModelError::Validation("rho and eta must lie in [0, 1]".into()));
        }
        for m in [&self.transport_material, &self.transport_battery] {
            if m.len() != nz || m.iter().any(|r| r.len() != nz) {
                return Err(ModelError::InconsistentIndexing(
                    "transport matrices must be zones x zones".into(),
                ));
            }
            if m.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(ModelError::Validation("transport costs must be nonnegative".into()));
            }
        }
        for series in [&self.static_cost_nb, &self.static_cost_cp, &self.static_value] {
            if series.len() != nk {
                return Err(ModelError::InconsistentIndexing(
                    "static cost/value series must have one entry per material".into(),
                ));
            }
            if series.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(ModelError::Validation("static costs must be nonnegative".into()));
            }
        }
        if self.process_econ.len() != nj {
            return Err(ModelError::InconsistentIndexing("one econ entry per process".into()));
        }
        if self.line_econ.len() != np {
            return Err(ModelError::InconsistentIndexing("one econ entry per powder".into()));
        }
        if self.conversion_econ.len() != nk {
            return Err(ModelError::InconsistentIndexing("one conversion entry per material".into()));
        }
        for e in &self.process_econ {
            if e.base_variable_cost.len() != ni {
                return Err(ModelError::InconsistentIndexing(
                    "process variable costs must cover every chemistry".into(),
                ));
            }
            validate_curve(e.capex_coeff, e.capex_exponent, e.fixed_annual)?;
        }
        for e in &self.line_econ {
            validate_curve(e.capex_coeff, e.capex_exponent, e.fixed_annual)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let data: ModelData = serde_json::from_str(&text)?;
        data.validate()?;
        Ok(data)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn validate_curve(q: f64, r: f64, w: f64) -> Result<(), ModelError> {
    if !(q >= 0.0) || !(w >= 0.0) || !(r > 0.0 && r <= 1.0) {
        return Err(ModelError::Validation(format!(
            "cost curve parameters q={q}, r={r}, w={w} violate concavity requirements"
        )));
    }
    Ok(())
}
