//! Model construction oracles: facility counts, hand-solvable instances, the
//! formulation equivalence, structure checks, recourse, policies, and the
//! open-loop identity.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use apwl::apwl_solve;
use battmodel::synth::{random_feasible_plan, synth_instance, SynthConfig};
use battmodel::{
    apply_policy, build_program, check_extreme_point_structure, extract_solution,
    facility_counts, flow_residual, map_pmi_to_p, verify_recourse, BuildOptions, CapacityPlan,
    Formulation, LoopKind, ModelError, PolicyConfig,
};
use scengen::{MsProjection, ScenarioTree, TimeStructure, TreeNode, TREE_SCHEMA_VERSION};

/// Minimal one-chemistry, one-zone, one-period tree with explicit payloads.
fn mini_tree(supply: f64, demand: f64, cost: f64, value: f64) -> ScenarioTree {
    let time = TimeStructure::uniform(2021, 1, 1, 1, 1).unwrap();
    let node = |id: usize, projection: MsProjection| TreeNode {
        id,
        stage: 0,
        parent: None,
        probability: 0.5,
        projection,
        demand_path: vec![0],
        cost_index: 0,
        demand: vec![vec![vec![demand]]],
        supply: vec![vec![vec![supply]]],
        cost: vec![vec![cost; 3]],
        value: vec![vec![value; 3]],
    };
    ScenarioTree {
        schema_version: TREE_SCHEMA_VERSION,
        stages: 1,
        n_d: 1,
        n_c: 1,
        time,
        zones: vec!["us".into()],
        zone_shares: vec![0.3],
        chemistries: vec!["nmc".into()],
        materials: vec!["cp_nmc".into(), "black_mass".into(), "li_salt".into()],
        nodes: vec![node(0, MsProjection::Ncx), node(1, MsProjection::Lfp)],
    }
}

/// Data matching `mini_tree`: one chemistry, one process, three materials.
fn mini_data() -> battmodel::ModelData {
    use battmodel::{ConversionEcon, LineEcon, ModelData, ProcessEcon, ResourceIntensity, Zone, ZoneCosts};
    let flat = ZoneCosts {
        equipment_multiplier: 1.0,
        labor: 0.0,
        electricity: 0.0,
        natural_gas: 0.0,
        water: 0.0,
        landfill: 0.0,
        wastewater: 0.0,
    };
    ModelData {
        schema_version: battmodel::DATA_SCHEMA_VERSION,
        name: "mini".into(),
        chemistries: vec!["nmc".into()],
        processes: vec!["hydro".into()],
        materials: vec!["cp_nmc".into(), "black_mass".into(), "li_salt".into()],
        cathode_powders: vec!["cp_nmc".into()],
        zones: vec![Zone { name: "us".into(), beta: 0.3, costs: flat }],
        delta_nb: vec![vec![0.4, 0.0, 0.0]],
        delta_cp: vec![vec![0.0, 0.8, 0.1]],
        delta_mc: {
            let mut m = vec![vec![0.0; 3]; 3];
            m[1][1] = 1.1;
            m[2][2] = 1.05;
            m
        },
        delta_rec: vec![
            vec![vec![0.0]],  // cp_nmc not recovered by hydro
            vec![vec![0.45]], // black mass
            vec![vec![0.05]], // li salt
        ],
        u_rec: 100_000.0,
        u_cp: 2_000.0,
        gamma_annual: 0.0,
        rho: 0.25,
        eta: 0.7,
        transport_material: vec![vec![0.0]],
        transport_battery: vec![vec![0.0]],
        static_cost_nb: vec![0.0, 0.0, 0.0],
        static_cost_cp: vec![0.0, 10_000.0, 100.0],
        static_value: vec![0.0, 0.0, 0.0],
        process_econ: vec![ProcessEcon {
            capex_coeff: 50.0,
            capex_exponent: 0.7,
            fixed_annual: 1_000.0,
            intensity: ResourceIntensity::default(),
            base_variable_cost: vec![100.0],
        }],
        line_econ: vec![LineEcon {
            capex_coeff: 30.0,
            capex_exponent: 0.6,
            fixed_annual: 500.0,
            intensity: ResourceIntensity::default(),
            base_variable_cost: 400.0,
        }],
        conversion_econ: vec![
            ConversionEcon { intensity: ResourceIntensity::default(), base_variable_cost: 0.0 },
            ConversionEcon { intensity: ResourceIntensity::default(), base_variable_cost: 50.0 },
            ConversionEcon { intensity: ResourceIntensity::default(), base_variable_cost: 30.0 },
        ],
    }
}

#[test]
fn facility_counts_follow_ceilings() {
    let data = mini_data();
    // 250000 t of zone-summed supply against a 100000 t/y bound needs 3.
    let tree = mini_tree(250_000.0, 0.0, 20_000.0, 15_000.0);
    let counts = facility_counts(&data, &tree);
    assert_eq!(counts.rec, vec![3]);
    // Zero demand needs no cathode lines.
    assert_eq!(counts.cp, vec![vec![0]]);
    // An exactly integral ratio does not round up.
    let tree = mini_tree(200_000.0, 0.0, 20_000.0, 15_000.0);
    assert_eq!(facility_counts(&data, &tree).rec, vec![2]);
    // Demand of 12000 batteries at 0.4 t powder each: 4800 t over 2000 t/y.
    let tree = mini_tree(0.0, 12_000.0, 20_000.0, 15_000.0);
    let counts = facility_counts(&data, &tree);
    assert_eq!(counts.rec, vec![0]);
    assert_eq!(counts.cp, vec![vec![3]]);
}

#[test]
fn empty_market_solves_to_zero() {
    let data = mini_data();
    let tree = mini_tree(0.0, 0.0, 20_000.0, 15_000.0);
    let program = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::PerFacility, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    let (sol, _) = apwl_solve(&program.scp, 1e-8).unwrap();
    assert!(sol.objective.abs() < 1e-9, "objective {}", sol.objective);
    assert!(sol.primal.iter().all(|&v| v.abs() < 1e-7));
}

#[test]
fn no_capacity_instance_buys_everything_new() {
    // One chemistry, one period, demand d, no recycling possible: the
    // optimum pays the powder price for delta * d of powder.
    let data = mini_data();
    let d = 5_000.0;
    let price = 22_000.0;
    let tree = mini_tree(0.0, d, price, 15_000.0);
    let program = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::PerFacility, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    let (sol, _) = apwl_solve(&program.scp, 1e-8).unwrap();
    // Hand solve: both nodes have probability 1/2 and identical payloads, so
    // the expectation equals one node's cost: price * 0.4 * d. Building
    // cathode lines cannot pay off because black mass costs 10000 premium.
    let expect = price * 0.4 * d;
    assert!(
        (sol.objective - expect).abs() <= 1e-6 * expect,
        "objective {} vs hand value {expect}",
        sol.objective
    );
}

#[test]
fn pmi_variable_count_is_smaller_once_counts_exceed_two() {
    let cfg = SynthConfig { seed: 11, target_rec_facilities: 3, target_cp_lines: 3, ..SynthConfig::default() };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let p = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::PerFacility, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    let pmi = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    let counts = &p.counts;
    let p_vars: usize = p.scp.num_structural();
    let pmi_vars: usize = pmi.scp.num_structural();
    // Exact counting: per (zone, planning, process) the per-facility form has
    // N variables, the integer-count form 2 (when N > 0).
    let nz = data.num_zones();
    let expect_p: usize = nz
        * counts.rec.iter().map(|n| n * data.num_processes()).sum::<usize>()
        + nz * counts
            .cp
            .iter()
            .map(|row| row.iter().sum::<usize>())
            .sum::<usize>();
    let expect_pmi: usize = nz
        * counts.rec.iter().map(|n| if *n > 0 { 2 * data.num_processes() } else { 0 }).sum::<usize>()
        + nz * counts
            .cp
            .iter()
            .map(|row| row.iter().map(|&n| if n > 0 { 2 } else { 0 }).sum::<usize>())
            .sum::<usize>();
    assert_eq!(p_vars, expect_p);
    assert_eq!(pmi_vars, expect_pmi);
    if counts.rec.iter().any(|&n| n > 2) || counts.cp.iter().flatten().any(|&n| n > 2) {
        assert!(pmi_vars < p_vars);
    }
}

#[test]
fn formulations_reach_the_same_objective() {
    for seed in [3, 17] {
        let cfg = SynthConfig {
            seed,
            periods: 4,
            stages: 1,
            n_c: 2,
            target_rec_facilities: 3,
            target_cp_lines: 2,
            ..SynthConfig::default()
        };
        let (data, tree) = synth_instance(&cfg).unwrap();
        let opts = |f| BuildOptions { formulation: f, loop_kind: LoopKind::Closed };
        let p = build_program(&data, &tree, opts(Formulation::PerFacility)).unwrap();
        let pmi = build_program(&data, &tree, opts(Formulation::IntegerCount)).unwrap();
        let (psol, _) = apwl_solve(&p.scp, 1e-7).unwrap();
        let (pmisol, _) = apwl_solve(&pmi.scp, 1e-7).unwrap();
        assert!(
            (psol.objective - pmisol.objective).abs()
                <= 1e-4 * psol.objective.abs().max(1.0),
            "seed {seed}: per-facility {} vs integer-count {}",
            psol.objective,
            pmisol.objective
        );
        // The per-facility optimum carries the extreme-point structure.
        let plan = extract_solution(&p, &data, &tree, &psol).plan;
        assert!(check_extreme_point_structure(&plan, &data), "seed {seed}: {plan:?}");
        // And the mapped integer-count plan matches its own totals.
        let pmi_plan = extract_solution(&pmi, &data, &tree, &pmisol).plan;
        let mapped = map_pmi_to_p(&pmi_plan, &pmi.counts, &data);
        for z in 0..data.num_zones() {
            for l in 0..tree.time.num_planning_periods() {
                for j in 0..data.num_processes() {
                    let a = pmi_plan.rec_total(&data, z, l, j);
                    let b = mapped.rec_total(&data, z, l, j);
                    assert!((a - b).abs() < 1e-9 * a.max(1.0));
                }
            }
        }
    }
}

#[test]
fn map_pmi_examples() {
    let data = mini_data();
    let counts = battmodel::FacilityCounts { rec: vec![4], cp: vec![vec![0]] };
    let plan = CapacityPlan::IntegerCount {
        rec: vec![vec![vec![(2, 50_000.0)]]],
        cp: vec![vec![vec![(0, 0.0)]]],
    };
    let mapped = map_pmi_to_p(&plan, &counts, &data);
    match &mapped {
        CapacityPlan::PerFacility { rec, .. } => {
            assert_eq!(rec[0][0][0], vec![100_000.0, 100_000.0, 50_000.0, 0.0]);
        }
        _ => panic!("expected per-facility"),
    }
    // Zero plan maps to zeros.
    let zero = CapacityPlan::IntegerCount {
        rec: vec![vec![vec![(0, 0.0)]]],
        cp: vec![vec![vec![(0, 0.0)]]],
    };
    match map_pmi_to_p(&zero, &counts, &data) {
        CapacityPlan::PerFacility { rec, .. } => assert!(rec[0][0][0].iter().all(|&v| v == 0.0)),
        _ => panic!(),
    }
    // Planning cost of the mapped plan: 2 f(u) + f(50000).
    let f = data.recycling_cost_curve(0, 0);
    let expect = 2.0 * f.at(100_000.0) + f.at(50_000.0);
    assert!((mapped.planning_cost(&data, 0) - expect).abs() < 1e-9 * expect);
}

#[test]
fn extreme_point_structure_examples() {
    let data = mini_data();
    let plan = |groups: Vec<f64>| CapacityPlan::PerFacility {
        rec: vec![vec![vec![groups]]],
        cp: vec![vec![vec![vec![]]]],
    };
    assert!(check_extreme_point_structure(&plan(vec![100_000.0, 100_000.0, 50_000.0, 0.0]), &data));
    assert!(!check_extreme_point_structure(&plan(vec![60_000.0, 60_000.0]), &data));
    assert!(check_extreme_point_structure(&plan(vec![0.0, 0.0, 0.0]), &data));
}

#[test]
fn recourse_flows_are_feasible_for_random_plans() {
    let cfg = SynthConfig { seed: 5, zones: 2, ..SynthConfig::default() };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let counts = facility_counts(&data, &tree);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let plan = random_feasible_plan(&data, &counts, &mut rng);
        let flows = verify_recourse(&data, &tree, &plan).unwrap();
        assert!(flow_residual(&data, &tree, &plan, &flows) <= 1e-9);
    }
    // The zero plan also admits the explicit completion.
    let zero = random_feasible_plan(
        &data,
        &battmodel::FacilityCounts { rec: vec![0; counts.rec.len()], cp: vec![vec![0; data.num_powders()]; counts.cp.len()] },
        &mut rng,
    );
    verify_recourse(&data, &tree, &zero).unwrap();
}

#[test]
fn single_period_recourse_stock_equals_supply() {
    let data = mini_data();
    let tree = mini_tree(1_234.0, 10.0, 20_000.0, 15_000.0);
    let counts = facility_counts(&data, &tree);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let plan = random_feasible_plan(&data, &counts, &mut rng);
    let flows = verify_recourse(&data, &tree, &plan).unwrap();
    let stock = flows.get(&battmodel::FlowKey::RbStock { node: 0, zone: 0, period: 0, chem: 0 });
    assert!((stock - 1_234.0).abs() < 1e-9);
}

#[test]
fn open_loop_agrees_under_scarcity_and_identity_without_recycling() {
    let cfg = SynthConfig {
        seed: 23,
        periods: 4,
        stages: 1,
        n_c: 2,
        supply_scale: 0.02,
        target_rec_facilities: 1,
        target_cp_lines: 1,
        ..SynthConfig::default()
    };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let closed = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    let open = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Open },
    )
    .unwrap();
    let (csol, _) = apwl_solve(&closed.scp, 1e-8).unwrap();
    let (osol, _) = apwl_solve(&open.scp, 1e-8).unwrap();
    assert!(
        (csol.objective - osol.objective).abs() <= 1e-6 * csol.objective.abs().max(1.0),
        "closed {} vs open {}",
        csol.objective,
        osol.objective
    );
    let extracted = extract_solution(&open, &data, &tree, &osol);
    assert!(extracted.implied_purchase_shortfall <= 1e-7, "substitution assumption violated");

    // With all flows zero the open-loop objective is exactly the constant
    // purchase bill, which equals the closed-loop cost of the same plan.
    let zero_flows_cost = open.scp.objective_offset;
    assert!(zero_flows_cost > 0.0);
    assert!(osol.objective <= zero_flows_cost + 1e-9 * zero_flows_cost);
}

#[test]
fn policy_identity_and_grant_floor() {
    let cfg = SynthConfig {
        seed: 31,
        periods: 6,
        periods_per_planning: 2,
        stages: 1,
        n_c: 2,
        ..SynthConfig::default()
    };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let opts = BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Closed };
    let base = build_program(&data, &tree, opts).unwrap();
    let (base_sol, _) = apwl_solve(&base.scp, 1e-7).unwrap();

    // Zero policy leaves the program unchanged.
    let mut unchanged = build_program(&data, &tree, opts).unwrap();
    apply_policy(
        &mut unchanged,
        &data,
        &tree,
        &PolicyConfig { grant_floor: 0.0, credit_per_tonne: 0.0, target_zone: "us".into() },
    )
    .unwrap();
    assert_eq!(unchanged.scp.coupling.num_rows(), base.scp.coupling.num_rows());
    let (same_sol, _) = apwl_solve(&unchanged.scp, 1e-7).unwrap();
    assert!((same_sol.objective - base_sol.objective).abs() <= 1e-7 * base_sol.objective.abs().max(1.0));

    // A grant floor forces capacity from planning period 3 onward.
    let floor = 0.8 * data.u_rec * base.counts.rec[2].max(1) as f64;
    let mut granted = build_program(&data, &tree, opts).unwrap();
    apply_policy(
        &mut granted,
        &data,
        &tree,
        &PolicyConfig { grant_floor: floor, credit_per_tonne: 0.0, target_zone: "us".into() },
    )
    .unwrap();
    let (gsol, _) = apwl_solve(&granted.scp, 1e-7).unwrap();
    let plan = extract_solution(&granted, &data, &tree, &gsol).plan;
    for l in battmodel::GRANT_PLANNING_INDEX..tree.time.num_planning_periods() {
        let installed = plan.zone_rec_total(&data, 0, l);
        assert!(installed >= floor - 1e-6, "period {l}: {installed} < {floor}");
    }

    // An infeasible grant is rejected.
    let mut bad = build_program(&data, &tree, opts).unwrap();
    let err = apply_policy(
        &mut bad,
        &data,
        &tree,
        &PolicyConfig {
            grant_floor: data.u_rec * 1e6,
            credit_per_tonne: 0.0,
            target_zone: "us".into(),
        },
    );
    assert!(matches!(err, Err(ModelError::InfeasibleGrant { .. })));
}

#[test]
fn credits_never_raise_the_objective() {
    let cfg = SynthConfig { seed: 41, periods: 4, stages: 1, n_c: 2, ..SynthConfig::default() };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let opts = BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Closed };
    let mut last = f64::INFINITY;
    for credit in [0.0, 1.0, 3.0] {
        let mut program = build_program(&data, &tree, opts).unwrap();
        apply_policy(
            &mut program,
            &data,
            &tree,
            &PolicyConfig { grant_floor: 0.0, credit_per_tonne: credit, target_zone: "us".into() },
        )
        .unwrap();
        let (sol, _) = apwl_solve(&program.scp, 1e-8).unwrap();
        assert!(
            sol.objective <= last + 1e-6 * last.abs().max(1.0),
            "objective rose under a larger credit: {} after {last}",
            sol.objective
        );
        last = sol.objective;
    }
}

#[test]
fn solved_flows_pass_the_independent_checker() {
    let cfg = SynthConfig { seed: 47, periods: 4, stages: 1, n_c: 2, zones: 2, ..SynthConfig::default() };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let program = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    let (sol, _) = apwl_solve(&program.scp, 1e-7).unwrap();
    let extracted = extract_solution(&program, &data, &tree, &sol);
    let residual = flow_residual(&data, &tree, &extracted.plan, &extracted.flows);
    assert!(residual <= 1e-7, "solved flows violate the equations by {residual}");
}
