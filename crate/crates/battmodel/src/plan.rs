//! Capacity plans in both formulations, solution extraction, the explicit
//! recourse construction, and the extreme-point structure check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use lpcore::VertexSolution;
use scengen::ScenarioTree;

use crate::build::{material_requirement, BatteryProgram, FacilityCounts};
use crate::data::ModelData;
use crate::error::ModelError;
use crate::index::{CapKey, FlowKey, Formulation};

/// Installed capacity decisions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CapacityPlan {
    /// `rec[zone][planning][process][slot]`, `cp[zone][planning][powder][slot]`.
    PerFacility { rec: Vec<Vec<Vec<Vec<f64>>>>, cp: Vec<Vec<Vec<Vec<f64>>>> },
    /// `(full facility count, remainder capacity)` per group.
    IntegerCount {
        rec: Vec<Vec<Vec<(u32, f64)>>>,
        cp: Vec<Vec<Vec<(u32, f64)>>>,
    },
}

impl CapacityPlan {
    /// Total installed recycling capacity for one (zone, planning, process).
    pub fn rec_total(&self, data: &ModelData, zone: usize, l: usize, process: usize) -> f64 {
        match self {
            CapacityPlan::PerFacility { rec, .. } => rec[zone][l][process].iter().sum(),
            CapacityPlan::IntegerCount { rec, .. } => {
                let (count, rem) = rec[zone][l][process];
                count as f64 * data.u_rec + rem
            }
        }
    }

    pub fn cp_total(&self, data: &ModelData, zone: usize, l: usize, powder: usize) -> f64 {
        match self {
            CapacityPlan::PerFacility { cp, .. } => cp[zone][l][powder].iter().sum(),
            CapacityPlan::IntegerCount { cp, .. } => {
                let (count, rem) = cp[zone][l][powder];
                count as f64 * data.u_cp + rem
            }
        }
    }

    /// Installed recycling capacity summed over processes.
    pub fn zone_rec_total(&self, data: &ModelData, zone: usize, l: usize) -> f64 {
        (0..data.num_processes()).map(|j| self.rec_total(data, zone, l, j)).sum()
    }

    /// Undiscounted annual planning cost of the plan in one planning period.
    pub fn planning_cost(&self, data: &ModelData, l: usize) -> f64 {
        let mut total = 0.0;
        for zone in 0..data.num_zones() {
            for process in 0..data.num_processes() {
                let f = data.recycling_cost_curve(zone, process);
                match self {
                    CapacityPlan::PerFacility { rec, .. } => {
                        for &y in &rec[zone][l][process] {
                            total += f.at(y);
                        }
                    }
                    CapacityPlan::IntegerCount { rec, .. } => {
                        let (count, rem) = rec[zone][l][process];
                        total += count as f64 * f.at(data.u_rec) + f.at(rem);
                    }
                }
            }
            for powder in 0..data.num_powders() {
                let f = data.line_cost_curve(zone, powder);
                match self {
                    CapacityPlan::PerFacility { cp, .. } => {
                        for &y in &cp[zone][l][powder] {
                            total += f.at(y);
                        }
                    }
                    CapacityPlan::IntegerCount { cp, .. } => {
                        let (count, rem) = cp[zone][l][powder];
                        total += count as f64 * f.at(data.u_cp) + f.at(rem);
                    }
                }
            }
        }
        total
    }
}

/// Maps an integer-count plan onto per-facility slots: the first `count`
/// facilities at the capacity bound, one at the remainder, the rest empty.
/// Totals and planning costs are preserved exactly since empty slots cost
/// nothing.
pub fn map_pmi_to_p(
    plan: &CapacityPlan,
    counts: &FacilityCounts,
    data: &ModelData,
) -> CapacityPlan {
    let CapacityPlan::IntegerCount { rec, cp } = plan else {
        return plan.clone();
    };
    let expand = |count: u32, rem: f64, slots: usize, bound: f64| -> Vec<f64> {
        (0..slots)
            .map(|n| {
                if (n as u32) < count {
                    bound
                } else if n as u32 == count {
                    rem
                } else {
                    0.0
                }
            })
            .collect()
    };
    let rec_out = rec
        .iter()
        .map(|zl| {
            zl.iter()
                .enumerate()
                .map(|(l, lj)| {
                    lj.iter()
                        .map(|&(count, rem)| expand(count, rem, counts.rec[l], data.u_rec))
                        .collect()
                })
                .collect()
        })
        .collect();
    let cp_out = cp
        .iter()
        .map(|zl| {
            zl.iter()
                .enumerate()
                .map(|(l, lp)| {
                    lp.iter()
                        .enumerate()
                        .map(|(p, &(count, rem))| expand(count, rem, counts.cp[l][p], data.u_cp))
                        .collect()
                })
                .collect()
        })
        .collect();
    CapacityPlan::PerFacility { rec: rec_out, cp: cp_out }
}

/// Counting check of the extreme-point structure: per (zone, planning,
/// process) at least `ceil(total/u) - 1` facilities sit at the bound and at
/// least `slots - ceil(total/u)` at zero, and the analogue for lines.
pub fn check_extreme_point_structure(plan: &CapacityPlan, data: &ModelData) -> bool {
    let CapacityPlan::PerFacility { rec, cp } = plan else {
        return false;
    };
    fn group_ok(values: &[f64], bound: f64) -> bool {
        let tol = 1e-9 * bound.max(1.0);
        let total: f64 = values.iter().sum();
        let ratio = total / bound;
        let snapped = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.abs().max(1.0) {
            ratio.round()
        } else {
            ratio
        };
        let needed = snapped.ceil() as i64;
        let at_bound = values.iter().filter(|&&v| (v - bound).abs() <= tol).count() as i64;
        let at_zero = values.iter().filter(|&&v| v.abs() <= tol).count() as i64;
        at_bound >= needed - 1 && at_zero >= values.len() as i64 - needed
    }
    for zl in rec {
        for lj in zl {
            for group in lj {
                if !group_ok(group, data.u_rec) {
                    return false;
                }
            }
        }
    }
    for zl in cp {
        for lp in zl {
            for group in lp {
                if !group_ok(group, data.u_cp) {
                    return false;
                }
            }
        }
    }
    true
}

/// Operational flows keyed by structured identity; absent keys are zero.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Flows {
    pub entries: BTreeMap<FlowKey, f64>,
}

impl Flows {
    pub fn get(&self, key: &FlowKey) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, key: FlowKey, value: f64) {
        if value != 0.0 {
            self.entries.insert(key, value);
        }
    }
}

/// Reads the capacity plan out of a solved program.
pub fn extract_plan(program: &BatteryProgram, data: &ModelData, y: &[f64]) -> CapacityPlan {
    let counts = &program.counts;
    let (nz, nj, np, nl) = (
        data.num_zones(),
        data.num_processes(),
        data.num_powders(),
        counts.rec.len(),
    );
    match program.layout.formulation {
        Formulation::PerFacility => {
            let mut rec = vec![vec![vec![Vec::new(); nj]; nl]; nz];
            let mut cp = vec![vec![vec![Vec::new(); np]; nl]; nz];
            for (col, key) in program.layout.y_keys.iter().enumerate() {
                match *key {
                    CapKey::RecFacility { zone, planning, process, .. } => {
                        rec[zone][planning][process].push(y[col].max(0.0));
                    }
                    CapKey::CpLine { zone, planning, powder, .. } => {
                        cp[zone][planning][powder].push(y[col].max(0.0));
                    }
                    _ => unreachable!("mixed formulation layout"),
                }
            }
            CapacityPlan::PerFacility { rec, cp }
        }
        Formulation::IntegerCount => {
            let mut rec = vec![vec![vec![(0u32, 0.0f64); nj]; nl]; nz];
            let mut cp = vec![vec![vec![(0u32, 0.0f64); np]; nl]; nz];
            for (col, key) in program.layout.y_keys.iter().enumerate() {
                match *key {
                    CapKey::RecCount { zone, planning, process } => {
                        rec[zone][planning][process].0 = y[col].round().max(0.0) as u32;
                    }
                    CapKey::RecRemainder { zone, planning, process } => {
                        rec[zone][planning][process].1 = y[col].max(0.0);
                    }
                    CapKey::CpCount { zone, planning, powder } => {
                        cp[zone][planning][powder].0 = y[col].round().max(0.0) as u32;
                    }
                    CapKey::CpRemainder { zone, planning, powder } => {
                        cp[zone][planning][powder].1 = y[col].max(0.0);
                    }
                    _ => unreachable!("mixed formulation layout"),
                }
            }
            CapacityPlan::IntegerCount { rec, cp }
        }
    }
}

/// Extraction result: the plan, the flows (with purchases reconstructed for
/// open-loop runs), and the largest negative implied purchase, which is zero
/// whenever the open-loop substitution assumption held.
#[derive(Debug, Clone)]
pub struct ExtractedSolution {
    pub plan: CapacityPlan,
    pub flows: Flows,
    pub implied_purchase_shortfall: f64,
}

/// Maps a vertex solution over (y, blocks) back to named flows.
pub fn extract_solution(
    program: &BatteryProgram,
    data: &ModelData,
    tree: &ScenarioTree,
    solution: &VertexSolution,
) -> ExtractedSolution {
    let n = program.scp.num_structural();
    let plan = extract_plan(program, data, &solution.primal[..n]);
    let mut flows = Flows::default();
    let mut offset = n;
    for (bi, block) in program.layout.blocks.iter().enumerate() {
        let nx = program.scp.blocks[bi].num_x;
        let xs = &solution.primal[offset..offset + nx];
        for (key, &v) in block.x_keys.iter().zip(xs) {
            if v.abs() > 1e-11 {
                flows.set(*key, v);
            }
        }
        offset += nx;
    }
    // Reconstruct the substituted flows: purchases from the demand identity,
    // new cathode inputs from the production recipe, conversion inputs from
    // the transformation image, and inventory deposits from the recovery
    // split. In the closed loop every reconstructed purchase is nonnegative
    // by the availability rows; for the open loop the largest negative
    // implied purchase measures how badly the substitution assumption failed.
    let mut shortfall = 0.0f64;
    for node in &tree.nodes {
        for &t in &tree.periods_of_node(node.id) {
            for zone in 0..data.num_zones() {
                for material in 0..data.num_materials() {
                    let req = material_requirement(data, tree, node.id, zone, t, material);
                    let recycled = if data.is_powder(material) {
                        flows.get(&FlowKey::InvNb { node: node.id, zone, period: t, material })
                    } else {
                        0.0
                    };
                    let implied = req - recycled;
                    shortfall = shortfall.max(-implied);
                    flows.set(
                        FlowKey::NmNb { node: node.id, zone, period: t, material },
                        implied.max(0.0),
                    );
                    if !data.is_powder(material) {
                        // New cathode inputs beyond converted material.
                        let mut need = 0.0;
                        for p in 0..data.num_powders() {
                            let kp = data.powder_material(p);
                            need += data.delta_cp[p][material]
                                * flows.get(&FlowKey::CpInv {
                                    node: node.id,
                                    zone,
                                    period: t,
                                    material: kp,
                                });
                        }
                        let converted =
                            flows.get(&FlowKey::McCp { node: node.id, zone, period: t, material });
                        flows.set(
                            FlowKey::NmCp { node: node.id, zone, period: t, material },
                            (need - converted).max(0.0),
                        );
                        // Conversion input drawn from inventory.
                        let mut drawn = 0.0;
                        for kout in 0..data.num_materials() {
                            if !data.is_powder(kout) {
                                drawn += data.delta_mc[kout][material]
                                    * flows.get(&FlowKey::McCp {
                                        node: node.id,
                                        zone,
                                        period: t,
                                        material: kout,
                                    });
                            }
                        }
                        flows.set(FlowKey::InvMc { node: node.id, zone, period: t, material }, drawn);
                    }
                    // Recovery into inventory.
                    let mut recovered = 0.0;
                    for chem in 0..data.num_chemistries() {
                        for process in 0..data.num_processes() {
                            recovered += data.delta_rec[material][chem][process]
                                * flows.get(&FlowKey::RbRm {
                                    node: node.id,
                                    zone,
                                    period: t,
                                    chem,
                                    process,
                                });
                        }
                    }
                    let sold = flows.get(&FlowKey::RmS { node: node.id, zone, period: t, material });
                    flows.set(
                        FlowKey::RmInv { node: node.id, zone, period: t, material },
                        (recovered - sold).max(0.0),
                    );
                }
            }
        }
    }
    ExtractedSolution { plan, flows, implied_purchase_shortfall: shortfall }
}

/// The explicit feasible completion of any capacity plan: buy every material
/// new, bank all retired batteries, recycle nothing.
pub fn verify_recourse(
    data: &ModelData,
    tree: &ScenarioTree,
    plan: &CapacityPlan,
) -> Result<Flows, ModelError> {
    let mut flows = Flows::default();
    for node in &tree.nodes {
        for &t in &tree.periods_of_node(node.id) {
            for zone in 0..data.num_zones() {
                for material in 0..data.num_materials() {
                    let req = material_requirement(data, tree, node.id, zone, t, material);
                    flows.set(FlowKey::NmNb { node: node.id, zone, period: t, material }, req);
                }
                for chem in 0..data.num_chemistries() {
                    // Cumulative supply along the ancestor path.
                    let mut stock = 0.0;
                    for tp in 0..=t {
                        let anc = tree.ancestor_at(node.id, tp);
                        stock += tree.supply_at(anc, zone, tp, chem);
                    }
                    flows.set(FlowKey::RbStock { node: node.id, zone, period: t, chem }, stock);
                }
            }
        }
    }
    let residual = flow_residual(data, tree, plan, &flows);
    if residual > 1e-9 {
        return Err(ModelError::Validation(format!(
            "recourse construction violated a constraint by {residual:.3e}; \
             this is a model-construction bug"
        )));
    }
    Ok(flows)
}

/// Largest relative constraint violation of (plan, flows) against the model
/// equations, evaluated directly from data and tree (independent of the
/// program assembly).
pub fn flow_residual(
    data: &ModelData,
    tree: &ScenarioTree,
    plan: &CapacityPlan,
    flows: &Flows,
) -> f64 {
    let time = &tree.time;
    let (nz, ni, nj, nk, np) = (
        data.num_zones(),
        data.num_chemistries(),
        data.num_processes(),
        data.num_materials(),
        data.num_powders(),
    );
    let mut worst = 0.0f64;
    let mut track = |violation: f64, scale: f64| {
        worst = worst.max(violation / (1.0 + scale.abs()));
    };
    for node in &tree.nodes {
        let nu = node.id;
        for &t in &tree.periods_of_node(nu) {
            let prev = if t == 0 { None } else { Some(tree.ancestor_at(nu, t - 1)) };
            let l = time.planning_period_of[t];
            for zone in 0..nz {
                for material in 0..nk {
                    let req = material_requirement(data, tree, nu, zone, t, material);
                    let nm = flows.get(&FlowKey::NmNb { node: nu, zone, period: t, material });
                    if data.is_powder(material) {
                        let inv = flows.get(&FlowKey::InvNb { node: nu, zone, period: t, material });
                        track((nm + inv - req).abs(), req);
                    } else {
                        track((nm - req).abs(), req);
                    }
                }
                for material in 0..nk {
                    if data.is_powder(material) {
                        continue;
                    }
                    let mut lhs = 0.0;
                    for p in 0..np {
                        let kp = data.powder_material(p);
                        lhs += data.delta_cp[p][material]
                            * flows.get(&FlowKey::CpInv { node: nu, zone, period: t, material: kp });
                    }
                    let nm = flows.get(&FlowKey::NmCp { node: nu, zone, period: t, material });
                    let mc = flows.get(&FlowKey::McCp { node: nu, zone, period: t, material });
                    track((lhs - nm - mc).abs(), lhs);
                    let mut conv = 0.0;
                    for kout in 0..nk {
                        if !data.is_powder(kout) {
                            conv += data.delta_mc[kout][material]
                                * flows.get(&FlowKey::McCp { node: nu, zone, period: t, material: kout });
                        }
                    }
                    let invmc = flows.get(&FlowKey::InvMc { node: nu, zone, period: t, material });
                    track((conv - invmc).abs(), conv);
                }
                for material in 0..nk {
                    let rm_in = flows.get(&FlowKey::RmInv { node: nu, zone, period: t, material });
                    let rm_s = flows.get(&FlowKey::RmS { node: nu, zone, period: t, material });
                    let mut recovered = 0.0;
                    for chem in 0..ni {
                        for process in 0..nj {
                            recovered += data.delta_rec[material][chem][process]
                                * flows.get(&FlowKey::RbRm { node: nu, zone, period: t, chem, process });
                        }
                    }
                    track((rm_in + rm_s - recovered).abs(), recovered);
                }
                for chem in 0..ni {
                    let stock = flows.get(&FlowKey::RbStock { node: nu, zone, period: t, chem });
                    let prev_stock = prev
                        .map(|pn| flows.get(&FlowKey::RbStock { node: pn, zone, period: t - 1, chem }))
                        .unwrap_or(0.0);
                    let mut net_in = 0.0;
                    for other in 0..nz {
                        if other != zone {
                            net_in += flows.get(&FlowKey::TrRb {
                                node: nu,
                                from_zone: other,
                                to_zone: zone,
                                period: t,
                                chem,
                            });
                            net_in -= flows.get(&FlowKey::TrRb {
                                node: nu,
                                from_zone: zone,
                                to_zone: other,
                                period: t,
                                chem,
                            });
                        }
                    }
                    let mut recycled = 0.0;
                    for process in 0..nj {
                        recycled +=
                            flows.get(&FlowKey::RbRm { node: nu, zone, period: t, chem, process });
                    }
                    let supply = tree.supply_at(nu, zone, t, chem);
                    track(
                        (stock - prev_stock - net_in - supply + recycled).abs(),
                        supply.max(stock),
                    );
                }
                for material in 0..nk {
                    let stock = flows.get(&FlowKey::InvStock { node: nu, zone, period: t, material });
                    let prev_stock = prev
                        .map(|pn| {
                            flows.get(&FlowKey::InvStock { node: pn, zone, period: t - 1, material })
                        })
                        .unwrap_or(0.0);
                    let mut net_in = 0.0;
                    for other in 0..nz {
                        if other != zone {
                            net_in += flows.get(&FlowKey::TrRm {
                                node: nu,
                                from_zone: other,
                                to_zone: zone,
                                period: t,
                                material,
                            });
                            net_in -= flows.get(&FlowKey::TrRm {
                                node: nu,
                                from_zone: zone,
                                to_zone: other,
                                period: t,
                                material,
                            });
                        }
                    }
                    let rm_in = flows.get(&FlowKey::RmInv { node: nu, zone, period: t, material });
                    let balance = if data.is_powder(material) {
                        let cpin = flows.get(&FlowKey::CpInv { node: nu, zone, period: t, material });
                        let use_nb = flows.get(&FlowKey::InvNb { node: nu, zone, period: t, material });
                        stock - prev_stock - net_in - rm_in - cpin + use_nb
                    } else {
                        let use_mc = flows.get(&FlowKey::InvMc { node: nu, zone, period: t, material });
                        stock - prev_stock - net_in - rm_in + use_mc
                    };
                    track(balance.abs(), stock.max(prev_stock));
                }
                for process in 0..nj {
                    let mut throughput = 0.0;
                    for chem in 0..ni {
                        throughput +=
                            flows.get(&FlowKey::RbRm { node: nu, zone, period: t, chem, process });
                    }
                    let cap = plan.rec_total(data, zone, l, process);
                    track((throughput - cap).max(0.0), cap);
                }
                for powder in 0..np {
                    let kp = data.powder_material(powder);
                    let out = flows.get(&FlowKey::CpInv { node: nu, zone, period: t, material: kp });
                    let cap = plan.cp_total(data, zone, l, powder);
                    track((out - cap).max(0.0), cap);
                }
            }
        }
    }
    // Nonnegativity of every recorded flow.
    for (_, &v) in flows.entries.iter() {
        track((-v).max(0.0), v.abs());
    }
    worst
}

/// Policy instruments: a floor on installed recycling capacity in the target
/// zone from the third planning period onward, and a per-tonne production
/// credit on recycling throughput in that zone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Tonnes/year floor applied at planning period 3 (index 2).
    pub grant_floor: f64,
    /// Currency per tonne of recycling throughput.
    pub credit_per_tonne: f64,
    pub target_zone: String,
}

/// Planning period (0-based) at which the grant floor binds.
pub const GRANT_PLANNING_INDEX: usize = 2;

/// Cheapest-process annual planning cost of installing `tonnes` of recycling
/// capacity in the zone: full facilities at the bound plus one remainder.
pub fn cheapest_grant_cost(data: &ModelData, zone: usize, tonnes: f64) -> f64 {
    if tonnes <= 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for process in 0..data.num_processes() {
        let f = data.recycling_cost_curve(zone, process);
        let ratio = tonnes / data.u_rec;
        let snapped = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
            ratio.round()
        } else {
            ratio
        };
        let full = snapped.floor();
        let rem = (tonnes - full * data.u_rec).max(0.0);
        let cost = full * f.at(data.u_rec) + f.at(rem);
        best = best.min(cost);
    }
    best
}

/// Adds the grant floor and credit revenue to a built program. The floor's
/// planning cost is offset by the cheapest-process cost of the granted
/// tonnage, computed once here; the credit subtracts discounted expected
/// revenue from every recycling flow in the target zone.
pub fn apply_policy(
    program: &mut BatteryProgram,
    data: &ModelData,
    tree: &ScenarioTree,
    policy: &PolicyConfig,
) -> Result<(), ModelError> {
    let zone = data
        .zones
        .iter()
        .position(|z| z.name == policy.target_zone)
        .ok_or_else(|| {
            ModelError::Validation(format!("unknown policy zone {}", policy.target_zone))
        })?;
    if policy.grant_floor < 0.0 || policy.credit_per_tonne < 0.0 {
        return Err(ModelError::Validation("policy magnitudes must be nonnegative".into()));
    }
    let time = &tree.time;
    let num_l = time.num_planning_periods();
    if policy.grant_floor > 0.0 {
        if num_l <= GRANT_PLANNING_INDEX {
            return Err(ModelError::Validation(format!(
                "grant policy needs at least {} planning periods, found {num_l}",
                GRANT_PLANNING_INDEX + 1
            )));
        }
        let available =
            data.num_processes() as f64 * program.counts.rec[GRANT_PLANNING_INDEX] as f64 * data.u_rec;
        if policy.grant_floor > available + 1e-9 {
            return Err(ModelError::InfeasibleGrant {
                requested: policy.grant_floor,
                available,
                zone: policy.target_zone.clone(),
            });
        }
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for process in 0..data.num_processes() {
            coeffs.extend(program.rec_capacity_expr(data, zone, GRANT_PLANNING_INDEX, process));
        }
        program.scp.coupling.add_row(&coeffs, lpcore::Sense::Ge, policy.grant_floor);
        // The granted tonnage's planning cost is covered externally.
        let grant_cost = cheapest_grant_cost(data, zone, policy.grant_floor);
        let covered: f64 = (0..time.periods)
            .filter(|&t| time.planning_period_of[t] >= GRANT_PLANNING_INDEX)
            .map(|t| time.discount_weight(t, data.gamma_annual))
            .sum::<f64>()
            * grant_cost;
        program.scp.objective_offset -= covered;
    }
    if policy.credit_per_tonne > 0.0 {
        for (bi, block) in program.layout.blocks.iter().enumerate() {
            for (col, key) in block.x_keys.iter().enumerate() {
                if let FlowKey::RbRm { node, zone: z, period, .. } = *key {
                    if z == zone {
                        let w = time.discount_weight(period, data.gamma_annual)
                            * tree.nodes[node].probability;
                        program.scp.blocks[bi].cost[col] -= w * policy.credit_per_tonne;
                    }
                }
            }
        }
    }
    Ok(())
}
