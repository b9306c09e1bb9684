//! Scenario tree assembly and the tree's file form. Nodes at stage `s` are
//! indexed by (market-share projection, demand-index prefix of length `s+1`,
//! cost index); demand and supply payloads depend only on the projection and
//! prefix, cost and value payloads on the prefix and cost index.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envelope::{MsProjection, ProjectionEnvelope};
use crate::error::ScenError;
use crate::paths::{
    avg_battery_mass, battery_aging, cost_quadrature, cost_scenarios, ev_stock_path,
    projection_mix, supply_demand,
};
use crate::quadrature::truncated_normal_quadrature;
use crate::time::TimeStructure;

pub const TREE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    /// 0-based stage.
    pub stage: usize,
    pub parent: Option<usize>,
    /// Unconditional probability of reaching this node.
    pub probability: f64,
    pub projection: MsProjection,
    /// Demand-index realizations through this node's stage (0-based).
    pub demand_path: Vec<usize>,
    /// Cost-index realization (0-based).
    pub cost_index: usize,
    /// `demand[zone][local period][chemistry]` over the stage's periods.
    pub demand: Vec<Vec<Vec<f64>>>,
    pub supply: Vec<Vec<Vec<f64>>>,
    /// `cost[local period][material]`.
    pub cost: Vec<Vec<f64>>,
    pub value: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub schema_version: u32,
    pub stages: usize,
    pub n_d: usize,
    pub n_c: usize,
    pub time: TimeStructure,
    pub zones: Vec<String>,
    pub zone_shares: Vec<f64>,
    pub chemistries: Vec<String>,
    pub materials: Vec<String>,
    pub nodes: Vec<TreeNode>,
}

impl ScenarioTree {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_at_stage(&self, stage: usize) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(move |n| n.stage == stage)
    }

    pub fn first_stage_nodes(&self) -> Vec<usize> {
        self.nodes_at_stage(0).map(|n| n.id).collect()
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.nodes_at_stage(self.stages - 1).map(|n| n.id).collect()
    }

    /// Ancestor of `node` at the stage of period `t`: the node itself when
    /// `t` falls in its own or a later stage, otherwise the unique node on
    /// the root path at that stage.
    pub fn ancestor_at(&self, node: usize, period: usize) -> usize {
        let target = self.time.stage_of[period];
        let mut cur = node;
        while self.nodes[cur].stage > target {
            cur = self.nodes[cur].parent.expect("non-root node has a parent");
        }
        cur
    }

    /// Periods covered by the node's stage.
    pub fn periods_of_node(&self, node: usize) -> Vec<usize> {
        self.time.periods_of_stage(self.nodes[node].stage)
    }

    /// Demand for `(node, zone, period, chemistry)` where `period` must fall
    /// in the node's stage.
    pub fn demand_at(&self, node: usize, zone: usize, period: usize, chem: usize) -> f64 {
        let n = &self.nodes[node];
        let local = period - self.time.periods_of_stage(n.stage)[0];
        n.demand[zone][local][chem]
    }

    pub fn supply_at(&self, node: usize, zone: usize, period: usize, chem: usize) -> f64 {
        let n = &self.nodes[node];
        let local = period - self.time.periods_of_stage(n.stage)[0];
        n.supply[zone][local][chem]
    }

    pub fn cost_at(&self, node: usize, period: usize, material: usize) -> f64 {
        let n = &self.nodes[node];
        let local = period - self.time.periods_of_stage(n.stage)[0];
        n.cost[local][material]
    }

    pub fn value_at(&self, node: usize, period: usize, material: usize) -> f64 {
        let n = &self.nodes[node];
        let local = period - self.time.periods_of_stage(n.stage)[0];
        n.value[local][material]
    }

    /// Structural and stochastic invariants. Used by tests and the self-check
    /// command; quadratic in the node count only at desk scale.
    pub fn check_integrity(&self) -> Result<(), ScenError> {
        let s_count = self.stages;
        for stage in 0..s_count {
            let expect = 2 * self.n_d.pow(stage as u32 + 1) * self.n_c;
            let nodes: Vec<&TreeNode> = self.nodes_at_stage(stage).collect();
            if nodes.len() != expect {
                return Err(ScenError::DimensionMismatch(format!(
                    "stage {stage} has {} nodes, expected {expect}",
                    nodes.len()
                )));
            }
            let mass: f64 = nodes.iter().map(|n| n.probability).sum();
            if (mass - 1.0).abs() > 1e-12 {
                return Err(ScenError::Validation(format!(
                    "stage {stage} probabilities sum to {mass}"
                )));
            }
        }
        for node in &self.nodes {
            if node.demand_path.len() != node.stage + 1 {
                return Err(ScenError::Validation(format!(
                    "node {}: demand path length {} at stage {}",
                    node.id,
                    node.demand_path.len(),
                    node.stage
                )));
            }
            match node.parent {
                None if node.stage == 0 => {}
                Some(p) => {
                    let parent = &self.nodes[p];
                    if parent.stage + 1 != node.stage
                        || parent.projection != node.projection
                        || parent.cost_index != node.cost_index
                        || parent.demand_path[..] != node.demand_path[..node.stage]
                    {
                        return Err(ScenError::Validation(format!(
                            "node {}: inconsistent parent {p}",
                            node.id
                        )));
                    }
                }
                None => {
                    return Err(ScenError::Validation(format!(
                        "node {} at stage {} lacks a parent",
                        node.id, node.stage
                    )));
                }
            }
            let periods = self.time.periods_of_stage(node.stage).len();
            if node.demand.len() != self.zones.len()
                || node.demand.iter().any(|z| z.len() != periods)
                || node.cost.len() != periods
            {
                return Err(ScenError::DimensionMismatch(format!(
                    "node {}: payload dimensions",
                    node.id
                )));
            }
            let neg = node
                .demand
                .iter()
                .flatten()
                .flatten()
                .chain(node.supply.iter().flatten().flatten())
                .chain(node.cost.iter().flatten())
                .chain(node.value.iter().flatten())
                .any(|&v| v < 0.0 || !v.is_finite());
            if neg {
                return Err(ScenError::Validation(format!(
                    "node {}: negative or non-finite payload",
                    node.id
                )));
            }
        }
        // Demand and supply are measurable in (projection, prefix): cost-index
        // siblings must agree exactly.
        for a in &self.nodes {
            for b in &self.nodes {
                if a.id < b.id
                    && a.stage == b.stage
                    && a.projection == b.projection
                    && a.demand_path == b.demand_path
                {
                    if a.demand != b.demand || a.supply != b.supply {
                        return Err(ScenError::Validation(format!(
                            "nodes {} and {} disagree on demand/supply across cost indices",
                            a.id, b.id
                        )));
                    }
                }
            }
        }
        // Ancestor path consistency.
        for node in &self.nodes {
            for t in 0..self.time.periods {
                if self.time.stage_of[t] > node.stage {
                    continue;
                }
                let direct = self.ancestor_at(node.id, t);
                for t2 in 0..self.time.periods {
                    let s2 = self.time.stage_of[t2];
                    if s2 > node.stage || s2 < self.time.stage_of[t] {
                        continue;
                    }
                    let via = self.ancestor_at(self.ancestor_at(node.id, t2), t);
                    if via != direct {
                        return Err(ScenError::Validation(format!(
                            "ancestor inconsistency at node {}, periods {t}/{t2}",
                            node.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ScenError> {
        let text = std::fs::read_to_string(path)?;
        let tree: ScenarioTree = serde_json::from_str(&text)?;
        if tree.schema_version != TREE_SCHEMA_VERSION {
            return Err(ScenError::Validation(format!(
                "unsupported tree schema version {}",
                tree.schema_version
            )));
        }
        Ok(tree)
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serializes")
    }
}

/// Mean of the annual series over the years of one period (annual rate).
fn aggregate_period(values: &[f64], time: &TimeStructure, period: usize) -> f64 {
    let years = time.years_of_period(period);
    let n = time.years_per_period as f64;
    years.map(|y| values[y - 1]).sum::<f64>() / n
}

/// Generates the full multistage tree from an envelope.
pub fn assemble_tree(
    env: &ProjectionEnvelope,
    stages: usize,
    n_d: usize,
    n_c: usize,
) -> Result<ScenarioTree, ScenError> {
    env.validate()?;
    if stages == 0 || n_d == 0 {
        return Err(ScenError::Validation("stages and n_d must be positive".into()));
    }
    let time = env.time_structure(stages)?;
    let demand_rule = truncated_normal_quadrature(n_d, -2.0, 2.0)?;
    let (_, cost_probs) = cost_quadrature(n_c)?;
    let nzones = env.zones.len();
    let nchem = env.chemistries.len();
    let nmat = env.materials.len();

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut stage_offsets: Vec<usize> = Vec::new();

    for stage in 0..stages {
        stage_offsets.push(nodes.len());
        let prefix_len = stage + 1;
        let prefix_count = n_d.pow(prefix_len as u32);
        for (pi, projection) in MsProjection::ALL.into_iter().enumerate() {
            for rank in 0..prefix_count {
                let prefix = unrank(rank, prefix_len, n_d);
                // Representative full path: extend with index 0.
                let mut full = prefix.clone();
                full.resize(stages, 0);
                let stage_draws: Vec<f64> =
                    full.iter().map(|&i| demand_rule.nodes[i]).collect();
                let ev = ev_stock_path(env, &stage_draws, &time);
                let ab = battery_aging(env, &ev);
                let lambda = projection_mix(env, &ev);
                let (_, mass) = avg_battery_mass(env, &ev, &ab, &lambda);
                let (supply_annual, demand_annual) =
                    supply_demand(env, &ab, &mass, projection, 1.0);
                let costs = cost_scenarios(env, &lambda, n_c)?;
                let periods = time.periods_of_stage(stage);
                let prob_prefix: f64 =
                    prefix.iter().map(|&i| demand_rule.weights[i]).product();
                for zeta in 0..n_c {
                    let id = nodes.len();
                    let parent = if stage == 0 {
                        None
                    } else {
                        let parent_rank = rank / n_d;
                        Some(
                            stage_offsets[stage - 1]
                                + (pi * n_d.pow(stage as u32) + parent_rank) * n_c
                                + zeta,
                        )
                    };
                    let mut demand = vec![vec![vec![0.0; nchem]; periods.len()]; nzones];
                    let mut supply = vec![vec![vec![0.0; nchem]; periods.len()]; nzones];
                    for (zi, zone) in env.zones.iter().enumerate() {
                        for (lt, &t) in periods.iter().enumerate() {
                            for i in 0..nchem {
                                let d_series: Vec<f64> =
                                    demand_annual.iter().map(|row| row[i]).collect();
                                let s_series: Vec<f64> =
                                    supply_annual.iter().map(|row| row[i]).collect();
                                demand[zi][lt][i] =
                                    zone.beta * aggregate_period(&d_series, &time, t);
                                supply[zi][lt][i] =
                                    zone.beta * aggregate_period(&s_series, &time, t);
                            }
                        }
                    }
                    let mut cost = vec![vec![0.0; nmat]; periods.len()];
                    let mut value = vec![vec![0.0; nmat]; periods.len()];
                    for (lt, &t) in periods.iter().enumerate() {
                        for k in 0..nmat {
                            let c_series: Vec<f64> =
                                costs.material_cost[zeta].iter().map(|row| row[k]).collect();
                            let v_series: Vec<f64> =
                                costs.material_value[zeta].iter().map(|row| row[k]).collect();
                            cost[lt][k] = aggregate_period(&c_series, &time, t);
                            value[lt][k] = aggregate_period(&v_series, &time, t);
                        }
                    }
                    nodes.push(TreeNode {
                        id,
                        stage,
                        parent,
                        probability: 0.5 * cost_probs[zeta] * prob_prefix,
                        projection,
                        demand_path: prefix.clone(),
                        cost_index: zeta,
                        demand,
                        supply,
                        cost,
                        value,
                    });
                }
            }
        }
    }

    let tree = ScenarioTree {
        schema_version: TREE_SCHEMA_VERSION,
        stages,
        n_d,
        n_c,
        time,
        zones: env.zones.iter().map(|z| z.name.clone()).collect(),
        zone_shares: env.zones.iter().map(|z| z.beta).collect(),
        chemistries: env.chemistries.clone(),
        materials: env.materials.iter().map(|m| m.name.clone()).collect(),
        nodes,
    };
    debug_assert!(tree.check_integrity().is_ok());
    Ok(tree)
}

/// Lexicographic unranking of a base-`n_d` prefix, most significant first.
fn unrank(rank: usize, len: usize, n_d: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    let mut r = rank;
    for slot in (0..len).rev() {
        out[slot] = r % n_d;
        r /= n_d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::tests_support::desk_envelope;

    #[test]
    fn leaf_counts_match_formula() {
        let env = desk_envelope();
        for (s, n_d, n_c) in [(2, 2, 2), (3, 4, 2), (3, 3, 4)] {
            let tree = assemble_tree(&env, s, n_d, n_c).unwrap();
            assert_eq!(tree.leaves().len(), 2 * n_d.pow(s as u32) * n_c);
            tree.check_integrity().unwrap();
        }
    }

    #[test]
    fn stage_probabilities_sum_to_one() {
        let env = desk_envelope();
        let tree = assemble_tree(&env, 3, 2, 2).unwrap();
        for stage in 0..3 {
            let mass: f64 = tree.nodes_at_stage(stage).map(|n| n.probability).sum();
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ancestor_within_own_stage_is_identity() {
        let env = desk_envelope();
        let tree = assemble_tree(&env, 3, 2, 2).unwrap();
        for node in &tree.nodes {
            for &t in tree.time.periods_of_stage(node.stage).iter() {
                assert_eq!(tree.ancestor_at(node.id, t), node.id);
            }
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let env = desk_envelope();
        let tree = assemble_tree(&env, 2, 2, 2).unwrap();
        let text = tree.to_json();
        let back: ScenarioTree = serde_json::from_str(&text).unwrap();
        assert_eq!(tree.to_json(), back.to_json());
        assert_eq!(tree.nodes.len(), back.nodes.len());
    }

    #[test]
    fn generation_is_deterministic() {
        let env = desk_envelope();
        let a = assemble_tree(&env, 3, 3, 2).unwrap().to_json();
        let b = assemble_tree(&env, 3, 3, 2).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn single_index_tree_has_identical_demand_paths() {
        let env = desk_envelope();
        let tree = assemble_tree(&env, 2, 1, 2).unwrap();
        // With n_d = 1 every stage has one demand realization; all nodes of a
        // projection share payloads across stages consistently.
        tree.check_integrity().unwrap();
        assert_eq!(tree.leaves().len(), 2 * 1 * 2);
    }
}

