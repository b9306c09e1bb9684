use std::time::Instant;

use apwl::{apwl_solve, apwl_solve_with, ApwlOptions};
use benders::{BendersSolver, Grouping, Strategy};
use battmodel::synth::{synth_instance, SynthConfig};
use battmodel::{build_program, BuildOptions, Formulation, LoopKind};

fn main() {
    std::thread::spawn(|| {
        use std::sync::atomic::Ordering;
        loop {
            std::thread::sleep(std::time::Duration::from_secs(5));
            eprintln!(
                "[progress] solves {} pivots {} refactors {} restore_pivots {} passes {}",
                lpcore::counters::SOLVES.load(Ordering::Relaxed),
                lpcore::counters::PIVOTS.load(Ordering::Relaxed),
                lpcore::counters::REFACTORS.load(Ordering::Relaxed),
                lpcore::counters::RESTORE_PIVOTS.load(Ordering::Relaxed),
                lpcore::counters::RESTORE_PASSES.load(Ordering::Relaxed),
            );
        }
    });
    let cfg = SynthConfig { seed: 47, periods: 4, stages: 1, n_c: 2, zones: 2, ..SynthConfig::default() };
    let (data, tree) = synth_instance(&cfg).unwrap();
    let t0 = Instant::now();
    let program = build_program(
        &data,
        &tree,
        BuildOptions { formulation: Formulation::IntegerCount, loop_kind: LoopKind::Closed },
    )
    .unwrap();
    eprintln!("build: {:?}", t0.elapsed());
    let nrows: usize = program.scp.blocks.iter().map(|b| b.senses.len()).sum::<usize>()
        + program.scp.coupling.num_rows();
    let ncols: usize = program.scp.blocks.iter().map(|b| b.num_x).sum::<usize>()
        + program.scp.num_structural();
    eprintln!("scp: {} structural, {} blocks, {nrows} rows, {ncols} cols", program.scp.num_structural(), program.scp.blocks.len());
    let t1 = Instant::now();
    let mut opts = ApwlOptions::with_gap(1e-8);
    opts.max_iterations = 3;
    let r = apwl_solve_with(&program.scp, &opts, &mut apwl::ExtensiveSolver);
    eprintln!("3-iter probe: {:?} -> {:?}", t1.elapsed(), r.as_ref().map(|(s, t)| (s.objective, t.iterations.len())).map_err(|e| e.to_string()));
    let t1 = Instant::now();
    let (sol, trace) = apwl_solve(&program.scp, 1e-8).unwrap();
    eprintln!("solve: {:?}, obj {}, iters {}", t1.elapsed(), sol.objective, trace.iterations.len());
    let (solves, pivots, refactors) = lpcore::counters::snapshot();
    eprintln!("lp solves: {solves}, pivots: {pivots}, refactors: {refactors}");
    let t2 = Instant::now();
    let mut solver = BendersSolver::new(Grouping::trivial(program.scp.blocks.len(), Strategy::Single));
    let (bsol, btrace) = apwl_solve_with(&program.scp, &ApwlOptions::with_gap(1e-8), &mut solver).unwrap();
    eprintln!("benders solve: {:?}, obj {}, iters {}", t2.elapsed(), bsol.objective, btrace.iterations.len());
    use std::sync::atomic::Ordering;
    eprintln!("warm violations {} phase2 pivots {}",
        lpcore::counters::WARM_VIOLATIONS.load(Ordering::Relaxed),
        lpcore::counters::PHASE2_PIVOTS.load(Ordering::Relaxed));
    eprintln!("restore passes {} restore pivots {}",
        lpcore::counters::RESTORE_PASSES.load(Ordering::Relaxed),
        lpcore::counters::RESTORE_PIVOTS.load(Ordering::Relaxed));
    eprintln!("warm_ok {} crash_ok {} cold {}",
        lpcore::counters::WARM_OK.load(Ordering::Relaxed),
        lpcore::counters::CRASH_OK.load(Ordering::Relaxed),
        lpcore::counters::COLD.load(Ordering::Relaxed));
}
// counters printed via lpcore::counters in main above
