mod common;
use common::*;
use gridseer::protection::{solve_exact, protect_tph, BnbOptions, ProtectionTarget};
use std::time::Instant;

#[test]
#[ignore]
fn probe_scaling() {
    use rand::Rng;
    for case in ["ieee14.json", "ieee57.json"] {
        let (net, meters) = load_fixture(case);
        let n = net.buses().len() as i64;
        let mut rng = seeded(42);
        for trial in 0..3 {
            let mut targets = std::collections::BTreeSet::new();
            while targets.len() < 4 {
                targets.insert(rng.gen_range(2..=n));
            }
            let targets: Vec<i64> = targets.into_iter().collect();
            let target = ProtectionTarget::new(&net, targets.clone()).unwrap();
            let t0 = Instant::now();
            let tph = protect_tph(&net, &meters, &target).unwrap();
            let tph_time = t0.elapsed();
            let t0 = Instant::now();
            let opts = BnbOptions { timeout: std::time::Duration::from_secs(560) };
            let (plan, stats) = solve_exact(&net, &meters, &target, &opts).unwrap();
            println!(
                "{case} trial {trial} D={targets:?}: tph {} ({:?}), exact {} opt={} nodes={} pivots={} ({:?})",
                tph.cost, tph_time, plan.cost, plan.optimal, stats.nodes, stats.lp_pivots, t0.elapsed()
            );
        }
    }
}
