//! Structured keys naming every capacity and flow variable, and the layout
//! that maps them onto program columns.

use serde::{Deserialize, Serialize};

/// Capacity variable identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapKey {
    /// Per-facility capacity (original formulation).
    RecFacility { zone: usize, planning: usize, process: usize, slot: usize },
    CpLine { zone: usize, planning: usize, powder: usize, slot: usize },
    /// Number of full facilities (integer-count formulation).
    RecCount { zone: usize, planning: usize, process: usize },
    /// Capacity of the one partial facility.
    RecRemainder { zone: usize, planning: usize, process: usize },
    CpCount { zone: usize, planning: usize, powder: usize },
    CpRemainder { zone: usize, planning: usize, powder: usize },
}

/// Operational flow identity. `material` and `powder` index the data's
/// material list; transports carry an ordered zone pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowKey {
    /// New material purchased for battery manufacturing.
    NmNb { node: usize, zone: usize, period: usize, material: usize },
    /// Recycled cathode powder used for battery manufacturing.
    InvNb { node: usize, zone: usize, period: usize, material: usize },
    /// New material purchased for cathode production.
    NmCp { node: usize, zone: usize, period: usize, material: usize },
    /// Converted material consumed by cathode production.
    McCp { node: usize, zone: usize, period: usize, material: usize },
    /// Powder produced by cathode production into inventory.
    CpInv { node: usize, zone: usize, period: usize, material: usize },
    /// Inventory material consumed by conversion.
    InvMc { node: usize, zone: usize, period: usize, material: usize },
    /// Batteries recycled, by chemistry and process.
    RbRm { node: usize, zone: usize, period: usize, chem: usize, process: usize },
    /// Recovered material placed into inventory.
    RmInv { node: usize, zone: usize, period: usize, material: usize },
    /// Recovered material sold to the market.
    RmS { node: usize, zone: usize, period: usize, material: usize },
    /// Retired-battery stock.
    RbStock { node: usize, zone: usize, period: usize, chem: usize },
    /// Recycled-material inventory stock.
    InvStock { node: usize, zone: usize, period: usize, material: usize },
    /// Retired batteries shipped between zones.
    TrRb { node: usize, from_zone: usize, to_zone: usize, period: usize, chem: usize },
    /// Recycled material shipped between zones.
    TrRm { node: usize, from_zone: usize, to_zone: usize, period: usize, material: usize },
}

impl FlowKey {
    pub fn node(&self) -> usize {
        match *self {
            FlowKey::NmNb { node, .. }
            | FlowKey::InvNb { node, .. }
            | FlowKey::NmCp { node, .. }
            | FlowKey::McCp { node, .. }
            | FlowKey::CpInv { node, .. }
            | FlowKey::InvMc { node, .. }
            | FlowKey::RbRm { node, .. }
            | FlowKey::RmInv { node, .. }
            | FlowKey::RmS { node, .. }
            | FlowKey::RbStock { node, .. }
            | FlowKey::InvStock { node, .. }
            | FlowKey::TrRb { node, .. }
            | FlowKey::TrRm { node, .. } => node,
        }
    }

    pub fn period(&self) -> usize {
        match *self {
            FlowKey::NmNb { period, .. }
            | FlowKey::InvNb { period, .. }
            | FlowKey::NmCp { period, .. }
            | FlowKey::McCp { period, .. }
            | FlowKey::CpInv { period, .. }
            | FlowKey::InvMc { period, .. }
            | FlowKey::RbRm { period, .. }
            | FlowKey::RmInv { period, .. }
            | FlowKey::RmS { period, .. }
            | FlowKey::RbStock { period, .. }
            | FlowKey::InvStock { period, .. }
            | FlowKey::TrRb { period, .. }
            | FlowKey::TrRm { period, .. } => period,
        }
    }

    /// Flow class label used by impact coefficient files and reports.
    pub fn class(&self) -> &'static str {
        match self {
            FlowKey::NmNb { .. } => "nm_nb",
            FlowKey::InvNb { .. } => "inv_nb",
            FlowKey::NmCp { .. } => "nm_cp",
            FlowKey::McCp { .. } => "mc_cp",
            FlowKey::CpInv { .. } => "cp_inv",
            FlowKey::InvMc { .. } => "inv_mc",
            FlowKey::RbRm { .. } => "rb_rm",
            FlowKey::RmInv { .. } => "rm_inv",
            FlowKey::RmS { .. } => "rm_s",
            FlowKey::RbStock { .. } => "rb_stock",
            FlowKey::InvStock { .. } => "inv_stock",
            FlowKey::TrRb { .. } => "tr_rb",
            FlowKey::TrRm { .. } => "tr_rm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    /// Per-facility capacities, continuous.
    PerFacility,
    /// Integer facility counts plus one remainder per group.
    IntegerCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Closed,
    Open,
}

/// Column identities of one scenario block.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    /// First-stage node backing this block.
    pub first_node: usize,
    pub x_keys: Vec<FlowKey>,
}

/// Column identities of the whole program.
#[derive(Debug, Clone)]
pub struct Layout {
    pub formulation: Formulation,
    pub loop_kind: LoopKind,
    pub y_keys: Vec<CapKey>,
    pub blocks: Vec<BlockLayout>,
}
