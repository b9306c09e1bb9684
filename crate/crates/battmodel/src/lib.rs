//! Closed-loop EV-battery supply-chain planning models.
//!
//! Builds the multistage capacity-and-operations program from static model
//! data plus a scenario tree, in two equivalent capacity formulations (per
//! facility, and integer facility counts with one remainder) and two loop
//! forms (closed, where recovered material feeds manufacturing, and open,
//! where it is sold at market prices). Also provides policy instruments, the
//! explicit recourse construction, solution extraction, and structure checks.

mod build;
mod data;
pub mod desk;
mod error;
mod index;
mod plan;
pub mod synth;

pub use build::{
    build_program, build_with_counts, facility_counts, validate_pair, BatteryProgram,
    BuildOptions, FacilityCounts,
};
pub use data::{
    ConversionEcon, LineEcon, ModelData, ProcessEcon, ResourceIntensity, Zone, ZoneCosts,
    DATA_SCHEMA_VERSION,
};
pub use error::ModelError;
pub use index::{BlockLayout, CapKey, FlowKey, Formulation, Layout, LoopKind};
pub use plan::{
    apply_policy, check_extreme_point_structure, cheapest_grant_cost, extract_plan,
    extract_solution, flow_residual, map_pmi_to_p, verify_recourse, CapacityPlan,
    ExtractedSolution, Flows, PolicyConfig, GRANT_PLANNING_INDEX,
};
