//! Construction of the planning programs from model data and a scenario
//! tree: per-facility (continuous) and integer-count capacity formulations,
//! each in closed- or open-loop form, as separable concave programs with one
//! scenario block per first-stage node.

use std::collections::HashMap;

use apwl::{ConcaveCostFn, ScenarioBlock, SeparableConcaveProgram};
use lpcore::Sense;
use scengen::ScenarioTree;

use crate::data::ModelData;
use crate::error::ModelError;
use crate::index::{BlockLayout, CapKey, FlowKey, Formulation, Layout, LoopKind};

/// Facility and line counts per planning period, from peak supply and peak
/// cathode demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacilityCounts {
    /// `rec[l]`: recycling facilities available in planning period `l`.
    pub rec: Vec<usize>,
    /// `cp[l][powder]`: cathode lines available per powder.
    pub cp: Vec<Vec<usize>>,
}

fn ceil_snapped(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    (x - 1e-9 * x.max(1.0)).ceil() as usize
}

/// Counts sized to recycle the largest annual zone-summed retired-battery
/// supply and to produce the largest annual cathode demand, per planning
/// period.
pub fn facility_counts(data: &ModelData, tree: &ScenarioTree) -> FacilityCounts {
    let time = &tree.time;
    let np = data.num_powders();
    let mut rec = Vec::new();
    let mut cp = Vec::new();
    for l in 0..time.num_planning_periods() {
        let mut peak_supply = 0.0f64;
        let mut peak_powder = vec![0.0f64; np];
        for t in time.periods_of_planning(l) {
            let stage = time.stage_of[t];
            for node in tree.nodes_at_stage(stage) {
                let mut total_s = 0.0;
                let mut powder = vec![0.0; np];
                for z in 0..tree.zones.len() {
                    for i in 0..data.num_chemistries() {
                        let s = tree.supply_at(node.id, z, t, i);
                        let d = tree.demand_at(node.id, z, t, i);
                        total_s += s;
                        for (p, val) in powder.iter_mut().enumerate() {
                            *val += data.delta_nb[i][data.powder_material(p)] * d;
                        }
                    }
                }
                peak_supply = peak_supply.max(total_s);
                for (p, val) in powder.iter().enumerate() {
                    peak_powder[p] = peak_powder[p].max(*val);
                }
            }
        }
        rec.push(ceil_snapped(peak_supply / data.u_rec));
        cp.push(peak_powder.iter().map(|&v| ceil_snapped(v / data.u_cp)).collect());
    }
    FacilityCounts { rec, cp }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub formulation: Formulation,
    pub loop_kind: LoopKind,
}

/// A built program together with the key layout needed to read solutions
/// back and the facility counts it was sized with.
#[derive(Debug, Clone)]
pub struct BatteryProgram {
    pub scp: SeparableConcaveProgram,
    pub layout: Layout,
    pub counts: FacilityCounts,
}

impl BatteryProgram {
    /// Column index of a capacity key.
    pub fn y_col(&self, key: CapKey) -> Option<usize> {
        self.layout.y_keys.iter().position(|k| *k == key)
    }

    /// Capacity expression (columns and coefficients summing to installed
    /// tonnes/year) for a recycling process in one zone and planning period.
    pub fn rec_capacity_expr(&self, data: &ModelData, zone: usize, l: usize, process: usize) -> Vec<(usize, f64)> {
        capacity_expr_rec(&self.layout, data, &self.counts, zone, l, process)
    }

    pub fn cp_capacity_expr(&self, data: &ModelData, zone: usize, l: usize, powder: usize) -> Vec<(usize, f64)> {
        capacity_expr_cp(&self.layout, data, &self.counts, zone, l, powder)
    }
}

fn capacity_expr_rec(
    layout: &Layout,
    data: &ModelData,
    counts: &FacilityCounts,
    zone: usize,
    l: usize,
    process: usize,
) -> Vec<(usize, f64)> {
    let mut expr = Vec::new();
    match layout.formulation {
        Formulation::PerFacility => {
            for slot in 0..counts.rec[l] {
                let key = CapKey::RecFacility { zone, planning: l, process, slot };
                if let Some(col) = layout.y_keys.iter().position(|k| *k == key) {
                    expr.push((col, 1.0));
                }
            }
        }
        Formulation::IntegerCount => {
            let ck = CapKey::RecCount { zone, planning: l, process };
            let rk = CapKey::RecRemainder { zone, planning: l, process };
            if let Some(col) = layout.y_keys.iter().position(|k| *k == ck) {
                expr.push((col, data.u_rec));
            }
            if let Some(col) = layout.y_keys.iter().position(|k| *k == rk) {
                expr.push((col, 1.0));
            }
        }
    }
    expr
}

fn capacity_expr_cp(
    layout: &Layout,
    data: &ModelData,
    counts: &FacilityCounts,
    zone: usize,
    l: usize,
    powder: usize,
) -> Vec<(usize, f64)> {
    let mut expr = Vec::new();
    match layout.formulation {
        Formulation::PerFacility => {
            for slot in 0..counts.cp[l][powder] {
                let key = CapKey::CpLine { zone, planning: l, powder, slot };
                if let Some(col) = layout.y_keys.iter().position(|k| *k == key) {
                    expr.push((col, 1.0));
                }
            }
        }
        Formulation::IntegerCount => {
            let ck = CapKey::CpCount { zone, planning: l, powder };
            let rk = CapKey::CpRemainder { zone, planning: l, powder };
            if let Some(col) = layout.y_keys.iter().position(|k| *k == ck) {
                expr.push((col, data.u_cp));
            }
            if let Some(col) = layout.y_keys.iter().position(|k| *k == rk) {
                expr.push((col, 1.0));
            }
        }
    }
    expr
}

/// Scenario-priced or static purchase costs and values.
pub(crate) struct Prices<'a> {
    data: &'a ModelData,
    tree: &'a ScenarioTree,
    /// data material index -> tree material index, when priced.
    priced: Vec<Option<usize>>,
}

impl<'a> Prices<'a> {
    pub(crate) fn new(data: &'a ModelData, tree: &'a ScenarioTree) -> Result<Self, ModelError> {
        let mut priced = vec![None; data.num_materials()];
        for (ti, name) in tree.materials.iter().enumerate() {
            match data.materials.iter().position(|m| m == name) {
                Some(k) => priced[k] = Some(ti),
                None => {
                    return Err(ModelError::InconsistentIndexing(format!(
                        "tree prices unknown material {name}"
                    )))
                }
            }
        }
        Ok(Prices { data, tree, priced })
    }

    /// Purchase cost for manufacturing: the scenario material price (when the
    /// tree prices the material) plus the static premium.
    pub(crate) fn cost_nb(&self, node: usize, t: usize, k: usize) -> f64 {
        let scenario = self.priced[k].map(|ti| self.tree.cost_at(node, t, ti)).unwrap_or(0.0);
        scenario + self.data.static_cost_nb[k]
    }

    pub(crate) fn cost_cp(&self, node: usize, t: usize, k: usize) -> f64 {
        let scenario = self.priced[k].map(|ti| self.tree.cost_at(node, t, ti)).unwrap_or(0.0);
        scenario + self.data.static_cost_cp[k]
    }

    pub(crate) fn value(&self, node: usize, t: usize, k: usize) -> f64 {
        let scenario = self.priced[k].map(|ti| self.tree.value_at(node, t, ti)).unwrap_or(0.0);
        scenario + self.data.static_value[k]
    }
}

/// Cross-checks naming and dimensions between the data file and the tree.
pub fn validate_pair(data: &ModelData, tree: &ScenarioTree) -> Result<(), ModelError> {
    data.validate()?;
    if data.chemistries != tree.chemistries {
        return Err(ModelError::InconsistentIndexing(
            "data and tree disagree on the chemistry list".into(),
        ));
    }
    let zone_names: Vec<&String> = data.zones.iter().map(|z| &z.name).collect();
    if zone_names.len() != tree.zones.len()
        || zone_names.iter().zip(&tree.zones).any(|(a, b)| *a != b)
    {
        return Err(ModelError::InconsistentIndexing(
            "data and tree disagree on the zone list".into(),
        ));
    }
    for (z, share) in data.zones.iter().zip(&tree.zone_shares) {
        if (z.beta - share).abs() > 1e-9 {
            return Err(ModelError::InconsistentIndexing(format!(
                "zone {} share differs between data ({}) and tree ({share})",
                z.name, z.beta
            )));
        }
    }
    Prices::new(data, tree).map(|_| ())
}

/// Demand-driven material requirement for manufacturing in one cell.
pub(crate) fn material_requirement(
    data: &ModelData,
    tree: &ScenarioTree,
    node: usize,
    zone: usize,
    t: usize,
    k: usize,
) -> f64 {
    (0..data.num_chemistries())
        .map(|i| data.delta_nb[i][k] * tree.demand_at(node, zone, t, i))
        .sum()
}

struct BlockBuilder {
    x_keys: Vec<FlowKey>,
    xcol: HashMap<FlowKey, usize>,
    cost: Vec<f64>,
    x_upper: Vec<f64>,
    b_entries: Vec<(usize, usize, f64)>,
    d_entries: Vec<(usize, usize, f64)>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
}

impl BlockBuilder {
    fn new() -> Self {
        BlockBuilder {
            x_keys: Vec::new(),
            xcol: HashMap::new(),
            cost: Vec::new(),
            x_upper: Vec::new(),
            b_entries: Vec::new(),
            d_entries: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
        }
    }

    fn add_var(&mut self, key: FlowKey, cost: f64, upper: f64) -> usize {
        let col = self.x_keys.len();
        self.x_keys.push(key);
        self.xcol.insert(key, col);
        self.cost.push(cost);
        self.x_upper.push(upper);
        col
    }

    fn col(&self, key: FlowKey) -> usize {
        *self.xcol.get(&key).unwrap_or_else(|| panic!("missing column {key:?}"))
    }

    fn row(&mut self, coeffs: Vec<(usize, f64)>, d: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        let r = self.senses.len();
        for (c, v) in coeffs {
            if v != 0.0 {
                self.b_entries.push((r, c, v));
            }
        }
        for (j, v) in d {
            if v != 0.0 {
                self.d_entries.push((r, j, v));
            }
        }
        self.senses.push(sense);
        self.rhs.push(rhs);
    }
}

/// Builds the program in the requested formulation and loop form.
pub fn build_program(
    data: &ModelData,
    tree: &ScenarioTree,
    opts: BuildOptions,
) -> Result<BatteryProgram, ModelError> {
    validate_pair(data, tree)?;
    let counts = facility_counts(data, tree);
    build_with_counts(data, tree, opts, counts)
}

/// Builds with explicit facility counts (test hook; `build_program` derives
/// them from the tree).
pub fn build_with_counts(
    data: &ModelData,
    tree: &ScenarioTree,
    opts: BuildOptions,
    counts: FacilityCounts,
) -> Result<BatteryProgram, ModelError> {
    let prices = Prices::new(data, tree)?;
    let time = &tree.time;
    let num_l = time.num_planning_periods();
    let (nz, ni, nj, nk, np) = (
        data.num_zones(),
        data.num_chemistries(),
        data.num_processes(),
        data.num_materials(),
        data.num_powders(),
    );
    let gamma = data.gamma_annual;
    let disc_t: Vec<f64> = (0..time.periods).map(|t| time.discount_weight(t, gamma)).collect();
    let disc_l: Vec<f64> =
        (0..num_l).map(|l| time.periods_of_planning(l).iter().map(|&t| disc_t[t]).sum()).collect();

    // Capacity variables.
    let mut y_keys: Vec<CapKey> = Vec::new();
    let mut y_costs: Vec<ConcaveCostFn> = Vec::new();
    let mut y_bounds: Vec<(f64, f64)> = Vec::new();
    let mut y_integer: Vec<bool> = Vec::new();
    match opts.formulation {
        Formulation::PerFacility => {
            for zone in 0..nz {
                for l in 0..num_l {
                    for process in 0..nj {
                        for slot in 0..counts.rec[l] {
                            y_keys.push(CapKey::RecFacility { zone, planning: l, process, slot });
                            y_costs.push(data.recycling_cost_curve(zone, process).scaled(disc_l[l]));
                            y_bounds.push((0.0, data.u_rec));
                            y_integer.push(false);
                        }
                    }
                }
            }
            for zone in 0..nz {
                for l in 0..num_l {
                    for powder in 0..np {
                        for slot in 0..counts.cp[l][powder] {
                            y_keys.push(CapKey::CpLine { zone, planning: l, powder, slot });
                            y_costs.push(data.line_cost_curve(zone, powder).scaled(disc_l[l]));
                            y_bounds.push((0.0, data.u_cp));
                            y_integer.push(false);
                        }
                    }
                }
            }
        }
        Formulation::IntegerCount => {
            for zone in 0..nz {
                for l in 0..num_l {
                    for process in 0..nj {
                        if counts.rec[l] == 0 {
                            continue;
                        }
                        let curve = data.recycling_cost_curve(zone, process);
                        y_keys.push(CapKey::RecCount { zone, planning: l, process });
                        y_costs.push(ConcaveCostFn::linear(disc_l[l] * curve.at(data.u_rec)));
                        y_bounds.push((0.0, (counts.rec[l] - 1) as f64));
                        y_integer.push(true);
                        y_keys.push(CapKey::RecRemainder { zone, planning: l, process });
                        y_costs.push(curve.scaled(disc_l[l]));
                        y_bounds.push((0.0, data.u_rec));
                        y_integer.push(false);
                    }
                }
            }
            for zone in 0..nz {
                for l in 0..num_l {
                    for powder in 0..np {
                        if counts.cp[l][powder] == 0 {
                            continue;
                        }
                        let curve = data.line_cost_curve(zone, powder);
                        y_keys.push(CapKey::CpCount { zone, planning: l, powder });
                        y_costs.push(ConcaveCostFn::linear(disc_l[l] * curve.at(data.u_cp)));
                        y_bounds.push((0.0, (counts.cp[l][powder] - 1) as f64));
                        y_integer.push(true);
                        y_keys.push(CapKey::CpRemainder { zone, planning: l, powder });
                        y_costs.push(curve.scaled(disc_l[l]));
                        y_bounds.push((0.0, data.u_cp));
                        y_integer.push(false);
                    }
                }
            }
        }
    }

    let layout_stub = Layout {
        formulation: opts.formulation,
        loop_kind: opts.loop_kind,
        y_keys: y_keys.clone(),
        blocks: Vec::new(),
    };

    let mut scp = SeparableConcaveProgram::new(y_costs, y_bounds);
    scp.integer = y_integer;
    let mut scp_ordering_rows: Vec<(usize, usize)> = Vec::new();

    // Identical facility slots are interchangeable; ordering them by
    // capacity removes the permutation symmetry without changing the optimal
    // value or the per-group capacity totals.
    if opts.formulation == Formulation::PerFacility {
        for zone in 0..nz {
            for l in 0..num_l {
                for process in 0..nj {
                    for slot in 1..counts.rec[l] {
                        let hi = CapKey::RecFacility { zone, planning: l, process, slot: slot - 1 };
                        let lo = CapKey::RecFacility { zone, planning: l, process, slot };
                        let hi_col = y_keys.iter().position(|k| *k == hi).unwrap();
                        let lo_col = y_keys.iter().position(|k| *k == lo).unwrap();
                        scp_ordering_rows.push((hi_col, lo_col));
                    }
                }
                for powder in 0..np {
                    for slot in 1..counts.cp[l][powder] {
                        let hi = CapKey::CpLine { zone, planning: l, powder, slot: slot - 1 };
                        let lo = CapKey::CpLine { zone, planning: l, powder, slot };
                        let hi_col = y_keys.iter().position(|k| *k == hi).unwrap();
                        let lo_col = y_keys.iter().position(|k| *k == lo).unwrap();
                        scp_ordering_rows.push((hi_col, lo_col));
                    }
                }
            }
        }
    }
    for (hi, lo) in scp_ordering_rows {
        scp.coupling.add_row(&[(hi, 1.0), (lo, -1.0)], Sense::Ge, 0.0);
    }

    // Nondecreasing installed capacity across planning periods.
    for zone in 0..nz {
        for process in 0..nj {
            for l in 1..num_l {
                let mut coeffs = capacity_expr_rec(&layout_stub, data, &counts, zone, l, process);
                let prev = capacity_expr_rec(&layout_stub, data, &counts, zone, l - 1, process);
                if coeffs.is_empty() && prev.is_empty() {
                    continue;
                }
                coeffs.extend(prev.into_iter().map(|(c, v)| (c, -v)));
                scp.coupling.add_row(&coeffs, Sense::Ge, 0.0);
            }
        }
        for powder in 0..np {
            for l in 1..num_l {
                let mut coeffs = capacity_expr_cp(&layout_stub, data, &counts, zone, l, powder);
                let prev = capacity_expr_cp(&layout_stub, data, &counts, zone, l - 1, powder);
                if coeffs.is_empty() && prev.is_empty() {
                    continue;
                }
                coeffs.extend(prev.into_iter().map(|(c, v)| (c, -v)));
                scp.coupling.add_row(&coeffs, Sense::Ge, 0.0);
            }
        }
    }

    // Generous transport box: total system mass can never exceed cumulative
    // supply plus demand-driven purchases.
    let mut mass_scale = 10.0;
    for node in &tree.nodes {
        for zrow in node.supply.iter().chain(node.demand.iter()) {
            for per in zrow {
                for &v in per {
                    mass_scale += v;
                }
            }
        }
    }
    let transport_cap = 10.0 * mass_scale;

    // One block per first-stage node, covering its whole subtree.
    let mut blocks: Vec<BlockLayout> = Vec::new();
    for &root in &tree.first_stage_nodes() {
        let subtree: Vec<usize> = tree
            .nodes
            .iter()
            .filter(|n| {
                let mut cur = n.id;
                while let Some(p) = tree.nodes[cur].parent {
                    cur = p;
                }
                cur == root
            })
            .map(|n| n.id)
            .collect();
        let mut bb = BlockBuilder::new();

        // Columns. Purchases, conversion inputs, and the recovered-material
        // split are substituted out: buying for manufacturing is the constant
        // requirement bill minus recycled powder use; new cathode inputs are
        // whatever production needs beyond converted material; conversion
        // input equals its transformation image; recovered material not sold
        // goes to inventory. The reduced program is an affine bijection of
        // the full one, so optima and extreme points correspond exactly.
        for &nu in &subtree {
            let p_node = tree.nodes[nu].probability;
            for &t in &tree.periods_of_node(nu) {
                let w = disc_t[t] * p_node;
                for from_zone in 0..nz {
                    for to_zone in 0..nz {
                        if from_zone == to_zone {
                            continue;
                        }
                        for chem in 0..ni {
                            bb.add_var(
                                FlowKey::TrRb { node: nu, from_zone, to_zone, period: t, chem },
                                w * data.transport_battery[from_zone][to_zone],
                                transport_cap,
                            );
                        }
                        for material in 0..nk {
                            bb.add_var(
                                FlowKey::TrRm { node: nu, from_zone, to_zone, period: t, material },
                                w * data.transport_material[from_zone][to_zone],
                                transport_cap,
                            );
                        }
                    }
                }
                for zone in 0..nz {
                    for material in 0..nk {
                        if data.is_powder(material) {
                            // Each tonne of recycled powder used displaces a
                            // purchased tonne.
                            bb.add_var(
                                FlowKey::InvNb { node: nu, zone, period: t, material },
                                -w * prices.cost_nb(nu, t, material),
                                f64::INFINITY,
                            );
                        } else {
                            // Converted material displaces new cathode inputs.
                            bb.add_var(
                                FlowKey::McCp { node: nu, zone, period: t, material },
                                w * (data.conversion_unit_cost(zone, material)
                                    - prices.cost_cp(nu, t, material)),
                                f64::INFINITY,
                            );
                        }
                        if let Some(p) = data.powder_of_material(material) {
                            // Line cost plus the new-input bill its recipe implies.
                            let mut unit = data.line_unit_cost(zone, p);
                            for k in 0..nk {
                                if data.delta_cp[p][k] != 0.0 {
                                    unit += data.delta_cp[p][k] * prices.cost_cp(nu, t, k);
                                }
                            }
                            bb.add_var(
                                FlowKey::CpInv { node: nu, zone, period: t, material },
                                w * unit,
                                f64::INFINITY,
                            );
                        }
                        bb.add_var(
                            FlowKey::RmS { node: nu, zone, period: t, material },
                            -w * data.eta * prices.value(nu, t, material),
                            f64::INFINITY,
                        );
                        bb.add_var(
                            FlowKey::InvStock { node: nu, zone, period: t, material },
                            w * data.rho * prices.value(nu, t, material),
                            f64::INFINITY,
                        );
                    }
                    for chem in 0..ni {
                        for process in 0..nj {
                            bb.add_var(
                                FlowKey::RbRm { node: nu, zone, period: t, chem, process },
                                w * data.recycling_unit_cost(zone, chem, process),
                                f64::INFINITY,
                            );
                        }
                        bb.add_var(
                            FlowKey::RbStock { node: nu, zone, period: t, chem },
                            0.0,
                            f64::INFINITY,
                        );
                    }
                }
            }
        }

        // Rows.
        for &nu in &subtree {
            for &t in &tree.periods_of_node(nu) {
                let prev: Option<usize> = if t == 0 { None } else { Some(tree.ancestor_at(nu, t - 1)) };
                for zone in 0..nz {
                    // Recycled powder cannot exceed the manufacturing
                    // requirement in the closed loop (purchases stay
                    // nonnegative after substitution).
                    if opts.loop_kind == LoopKind::Closed {
                        for material in 0..nk {
                            if !data.is_powder(material) {
                                continue;
                            }
                            let req = material_requirement(data, tree, nu, zone, t, material);
                            bb.row(
                                vec![(bb.col(FlowKey::InvNb { node: nu, zone, period: t, material }), 1.0)],
                                vec![],
                                Sense::Le,
                                req,
                            );
                        }
                    }
                    // Converted material cannot exceed what production needs
                    // (substituted new-input purchases stay nonnegative).
                    for material in 0..nk {
                        if data.is_powder(material) {
                            continue;
                        }
                        let mut coeffs: Vec<(usize, f64)> = Vec::new();
                        for p in 0..np {
                            let kp = data.powder_material(p);
                            let delta = data.delta_cp[p][material];
                            if delta != 0.0 {
                                coeffs.push((
                                    bb.col(FlowKey::CpInv { node: nu, zone, period: t, material: kp }),
                                    delta,
                                ));
                            }
                        }
                        coeffs.push((bb.col(FlowKey::McCp { node: nu, zone, period: t, material }), -1.0));
                        bb.row(coeffs, vec![], Sense::Ge, 0.0);
                    }
                    // Sales cannot exceed recovery (inventory deposits stay
                    // nonnegative after substitution).
                    for material in 0..nk {
                        let mut coeffs = vec![
                            (bb.col(FlowKey::RmS { node: nu, zone, period: t, material }), -1.0),
                        ];
                        for chem in 0..ni {
                            for process in 0..nj {
                                let delta = data.delta_rec[material][chem][process];
                                if delta != 0.0 {
                                    coeffs.push((
                                        bb.col(FlowKey::RbRm { node: nu, zone, period: t, chem, process }),
                                        delta,
                                    ));
                                }
                            }
                        }
                        bb.row(coeffs, vec![], Sense::Ge, 0.0);
                    }
                    // Retired-battery stock balance.
                    for chem in 0..ni {
                        let mut coeffs = vec![(bb.col(FlowKey::RbStock { node: nu, zone, period: t, chem }), 1.0)];
                        if let Some(pn) = prev {
                            coeffs.push((bb.col(FlowKey::RbStock { node: pn, zone, period: t - 1, chem }), -1.0));
                        }
                        for other in 0..nz {
                            if other == zone {
                                continue;
                            }
                            coeffs.push((
                                bb.col(FlowKey::TrRb { node: nu, from_zone: other, to_zone: zone, period: t, chem }),
                                -1.0,
                            ));
                            coeffs.push((
                                bb.col(FlowKey::TrRb { node: nu, from_zone: zone, to_zone: other, period: t, chem }),
                                1.0,
                            ));
                        }
                        for process in 0..nj {
                            coeffs.push((
                                bb.col(FlowKey::RbRm { node: nu, zone, period: t, chem, process }),
                                1.0,
                            ));
                        }
                        bb.row(coeffs, vec![], Sense::Eq, tree.supply_at(nu, zone, t, chem));
                    }
                    // Material inventory balance with deposits and conversion
                    // inputs substituted in.
                    for material in 0..nk {
                        let mut coeffs = vec![(bb.col(FlowKey::InvStock { node: nu, zone, period: t, material }), 1.0)];
                        if let Some(pn) = prev {
                            coeffs.push((
                                bb.col(FlowKey::InvStock { node: pn, zone, period: t - 1, material }),
                                -1.0,
                            ));
                        }
                        for other in 0..nz {
                            if other == zone {
                                continue;
                            }
                            coeffs.push((
                                bb.col(FlowKey::TrRm { node: nu, from_zone: other, to_zone: zone, period: t, material }),
                                -1.0,
                            ));
                            coeffs.push((
                                bb.col(FlowKey::TrRm { node: nu, from_zone: zone, to_zone: other, period: t, material }),
                                1.0,
                            ));
                        }
                        // minus recovery into inventory = -(recovered - sold)
                        for chem in 0..ni {
                            for process in 0..nj {
                                let delta = data.delta_rec[material][chem][process];
                                if delta != 0.0 {
                                    coeffs.push((
                                        bb.col(FlowKey::RbRm { node: nu, zone, period: t, chem, process }),
                                        -delta,
                                    ));
                                }
                            }
                        }
                        coeffs.push((bb.col(FlowKey::RmS { node: nu, zone, period: t, material }), 1.0));
                        if data.is_powder(material) {
                            coeffs.push((bb.col(FlowKey::CpInv { node: nu, zone, period: t, material }), -1.0));
                            coeffs.push((bb.col(FlowKey::InvNb { node: nu, zone, period: t, material }), 1.0));
                        } else {
                            // Conversion input drawn from inventory.
                            for kout in 0..nk {
                                if data.is_powder(kout) {
                                    continue;
                                }
                                let delta = data.delta_mc[kout][material];
                                if delta != 0.0 {
                                    coeffs.push((
                                        bb.col(FlowKey::McCp { node: nu, zone, period: t, material: kout }),
                                        delta,
                                    ));
                                }
                            }
                        }
                        bb.row(coeffs, vec![], Sense::Eq, 0.0);
                    }
                    // Capacity limits coupling to the planning variables.
                    let l = time.planning_period_of[t];
                    for process in 0..nj {
                        let d = capacity_expr_rec(&layout_stub, data, &counts, zone, l, process);
                        let coeffs: Vec<(usize, f64)> = (0..ni)
                            .map(|chem| {
                                (bb.col(FlowKey::RbRm { node: nu, zone, period: t, chem, process }), -1.0)
                            })
                            .collect();
                        bb.row(coeffs, d, Sense::Ge, 0.0);
                    }
                    for powder in 0..np {
                        let kp = data.powder_material(powder);
                        let d = capacity_expr_cp(&layout_stub, data, &counts, zone, l, powder);
                        let coeffs =
                            vec![(bb.col(FlowKey::CpInv { node: nu, zone, period: t, material: kp }), -1.0)];
                        bb.row(coeffs, d, Sense::Ge, 0.0);
                    }
                }
            }
        }

        scp.blocks.push(ScenarioBlock {
            num_x: bb.x_keys.len(),
            cost: bb.cost,
            x_upper: bb.x_upper,
            b_entries: bb.b_entries,
            d_entries: bb.d_entries,
            senses: bb.senses,
            rhs: bb.rhs,
            source_node: Some(root),
        });
        blocks.push(BlockLayout { first_node: root, x_keys: bb.x_keys });
    }

    // The substituted purchase bill: price times the demand-driven
    // requirement over every cell, common to both loop forms.
    let mut constant = 0.0;
    for node in &tree.nodes {
        let p_node = node.probability;
        for &t in &tree.periods_of_node(node.id) {
            let w = disc_t[t] * p_node;
            for zone in 0..nz {
                for material in 0..nk {
                    constant += w
                        * prices.cost_nb(node.id, t, material)
                        * material_requirement(data, tree, node.id, zone, t, material);
                }
            }
        }
    }
    scp.objective_offset += constant;

    let layout = Layout {
        formulation: opts.formulation,
        loop_kind: opts.loop_kind,
        y_keys,
        blocks,
    };
    scp.validate()?;
    Ok(BatteryProgram { scp, layout, counts })
}
