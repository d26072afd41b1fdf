mod common;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdnr::*;

fn run_batch(seed: u64, n_nets: usize, cmax_factor: f64) -> (usize, usize, usize, f64) {
    let opts = SolverOptions::default();
    let ev = Evaluator::exact_sigma_min();
    let (mut exact, mut within, mut stage1_ok) = (0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap: f64 = f64::NEG_INFINITY;
    for _ in 0..n_nets {
        let n_buses = rng.random_range(6..=12);
        let l = rng.random_range(1..=3);
        let net = common::random_network(n_buses, l, &mut rng);
        let scen = common::random_scenarios(&net, &mut rng);
        let (c0, _) = expected_loss(&net, &net.all_closed(), &scen, &opts).unwrap();
        let w = resolve_weights(&net, &scen, 0.5, -0.5, Some(cmax_factor * c0), None, &opts).unwrap();
        let res = two_stage_sbr(&net, &scen, &w, &ev, 5, &opts).unwrap();
        let report = brute_force_optimum(&net, &scen, &w, &ev, &opts, None).unwrap();
        let best = report.best_row().unwrap();
        let gap = (res.objective - best.score) / best.score.abs().max(1e-9);
        max_gap = max_gap.max(gap);
        if res.alpha_star.open_ids() == best.open { exact += 1; }
        if gap.abs() <= 0.02 { within += 1; }
        let s1 = res.trace.iter().find(|tr| matches!(tr.stage, Stage::StageOneOpening)).unwrap();
        if res.objective <= s1.score { stage1_ok += 1; }
    }
    (exact, within, stage1_ok, max_gap)
}

#[test]
fn robustness_sweep() {
    for factor in [2.0f64, 10.0] {
        println!("--- c_l_max = {factor} x all-closed loss ---");
        for seed in [2024u64, 7, 99, 1234, 5150, 31337, 271828] {
            let (e, wi, s1, mg) = run_batch(seed, 25, factor);
            println!("seed {seed}: exact {e}/25 within {wi}/25 stage1 {s1}/25 maxgap {mg:.5}");
        }
    }
}
