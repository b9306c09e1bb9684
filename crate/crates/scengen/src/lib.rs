//! Deterministic multistage scenario generation for the battery supply
//! chain: EV-stock paths from projection envelopes discretized by Gaussian
//! quadrature over truncated normals, a battery-aging recursion, chemistry
//! market shares, correlated metal-price scenarios, and tree assembly with an
//! ancestor map. Output is byte-identical across runs and thread counts.

mod envelope;
mod error;
pub mod normal;
mod paths;
mod quadrature;
mod time;
mod tree;

pub use envelope::{
    BevShare, EvStock, MarketShares, MetalPriceBands, MsProjection, PricedMaterial,
    ProjectionEnvelope, Retirement, ZoneShare, ENVELOPE_SCHEMA_VERSION,
};
pub use error::ScenError;
pub use paths::{
    avg_battery_mass, battery_aging, cost_quadrature, cost_scenarios, ev_stock_path,
    projection_mix, supply_demand, CostScenarios,
};
pub use quadrature::{truncated_normal_moments, truncated_normal_quadrature, QuadratureRule};
pub use time::TimeStructure;
pub use tree::{assemble_tree, ScenarioTree, TreeNode, TREE_SCHEMA_VERSION};
