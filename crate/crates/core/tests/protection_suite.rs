//! Protection-planner checks: exhaustive-enumeration optimality oracle,
//! tree-pruning walkthrough golden, dominance, and algebraic soundness.

mod common;

use std::collections::BTreeSet;

use gridseer::protection::{
    protect_exact, protect_tph, solve_exact, tph_with_trace, verify_protection, BnbOptions,
    ProtectionTarget,
};
use gridseer::observability::validate_emst;

use common::*;

#[test]
fn single_adjacent_flow_meter_is_the_whole_plan() {
    let (net, meters) = load_fixture("ieee14.json");
    let target = ProtectionTarget::new(&net, vec![2]).unwrap();
    let plan = protect_exact(&net, &meters, &target, &BnbOptions::default()).unwrap();
    assert_eq!(plan.meters, vec!["r1"]);
    assert_eq!(plan.cost, 1.0);
    assert!(plan.optimal);
    let (ok, v) = validate_emst(&net, &meters, &plan.witness);
    assert!(ok, "{v:?}");
}

#[test]
fn fig5_prune_rounds_match_walkthrough() {
    let (net, meters) = load_fixture("fig5.json");
    let target = ProtectionTarget::new(&net, vec![5, 8]).unwrap();
    let (plan, trace) = tph_with_trace(&net, &meters, &target).unwrap();

    assert!(!trace.is_empty());
    let round1 = &trace[0];
    let expect_residual: BTreeSet<i64> = [1, 3, 4, 5, 6, 7, 8].into_iter().collect();
    assert_eq!(round1.residual, expect_residual);
    let mut pruned = round1.pruned.clone();
    pruned.sort_unstable();
    assert_eq!(pruned, vec![2, 9, 10, 11, 12]);

    // bus 7 survives: the injection meter at 6 measures it through line (6,7)
    assert!(plan.witness.vertices.contains(&7));
    let (ok, v) = validate_emst(&net, &meters, &plan.witness);
    assert!(ok, "{v:?}");
    assert!(verify_protection(&net, &meters, &plan, &target).unwrap());
}

#[test]
fn fig5_exact_matches_tph_here() {
    let (net, meters) = load_fixture("fig5.json");
    let target = ProtectionTarget::new(&net, vec![5, 8]).unwrap();
    let tph = protect_tph(&net, &meters, &target).unwrap();
    let exact = protect_exact(&net, &meters, &target, &BnbOptions::default()).unwrap();
    assert!(exact.optimal);
    assert_eq!(exact.cost, 6.0);
    assert!(tph.cost >= exact.cost);
    assert_eq!(tph.cost, 6.0);
}

#[test]
fn all_buses_targeted_means_spanning_witness() {
    let (net, meters) = load_fixture("fig5.json");
    let all: Vec<i64> = (2..=12).collect();
    let target = ProtectionTarget::new(&net, all).unwrap();
    let (plan, trace) = tph_with_trace(&net, &meters, &target).unwrap();
    assert!(trace.is_empty(), "no pruning is possible");
    assert_eq!(plan.witness.vertices.len(), 12);
    assert_eq!(plan.witness.edges.len(), 11);
}

#[test]
fn exact_cost_matches_enumeration_oracle_on_random_suite() {
    let mut mismatches = Vec::new();
    for seed in 0..40u64 {
        let mut rng = seeded(1000 + seed);
        use rand::Rng;
        let nbus = rng.gen_range(4..=9);
        let net = random_network(nbus, rng.gen_range(0..=3), &mut rng);
        let meters = observable_meters(&net, rng.gen_range(0..=3), &mut rng);
        if meters.len() > 14 {
            continue;
        }
        let k = rng.gen_range(1..=2.min(nbus - 1));
        let mut targets = BTreeSet::new();
        while targets.len() < k {
            targets.insert(rng.gen_range(2..=nbus as i64));
        }
        let targets: Vec<i64> = targets.into_iter().collect();
        let target = ProtectionTarget::new(&net, targets.clone()).unwrap();

        let oracle = oracle_protection_cost(&net, &meters, &targets);
        let plan = protect_exact(&net, &meters, &target, &BnbOptions::default());
        match (oracle, plan) {
            (Some(want), Ok(plan)) => {
                assert!(plan.optimal);
                if !close(plan.cost, want, 1e-6) {
                    mismatches.push(format!(
                        "seed {seed}: exact {} vs oracle {want}",
                        plan.cost
                    ));
                }
                assert!(verify_protection(&net, &meters, &plan, &target).unwrap());
                let (ok, v) = validate_emst(&net, &meters, &plan.witness);
                assert!(ok, "seed {seed}: witness invalid {v:?}");
                assert!(targets.iter().all(|t| plan.witness.vertices.contains(t)));
            }
            (None, Err(_)) => {}
            (want, got) => mismatches.push(format!(
                "seed {seed}: oracle {want:?} vs solver {}",
                got.map(|p| p.cost.to_string()).unwrap_or_else(|e| e.to_string())
            )),
        }
    }
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}

#[test]
fn tph_never_beats_exact_and_both_verify() {
    for seed in 0..25u64 {
        let mut rng = seeded(9000 + seed);
        use rand::Rng;
        let nbus = rng.gen_range(5..=10);
        let net = random_network(nbus, rng.gen_range(0..=4), &mut rng);
        let meters = observable_meters(&net, rng.gen_range(0..=4), &mut rng);
        let t = rng.gen_range(2..=nbus as i64);
        let target = ProtectionTarget::new(&net, vec![t]).unwrap();
        let exact = protect_exact(&net, &meters, &target, &BnbOptions::default()).unwrap();
        let tph = protect_tph(&net, &meters, &target).unwrap();
        assert!(
            tph.cost >= exact.cost - 1e-9,
            "seed {seed}: tph {} beats exact {}",
            tph.cost,
            exact.cost
        );
        assert!(verify_protection(&net, &meters, &exact, &target).unwrap());
        assert!(verify_protection(&net, &meters, &tph, &target).unwrap());
    }
}

#[test]
fn dropping_a_witness_meter_breaks_some_plan() {
    // mutation check: at least one plan in the suite loses soundness when a
    // witness meter is removed
    let mut broke = false;
    for seed in 0..10u64 {
        let mut rng = seeded(300 + seed);
        use rand::Rng;
        let nbus = rng.gen_range(5..=8);
        let net = random_network(nbus, rng.gen_range(0..=2), &mut rng);
        let meters = observable_meters(&net, 2, &mut rng);
        let t = rng.gen_range(2..=nbus as i64);
        let target = ProtectionTarget::new(&net, vec![t]).unwrap();
        let Ok(plan) = protect_exact(&net, &meters, &target, &BnbOptions::default()) else {
            continue;
        };
        for drop in &plan.meters {
            let mut mutated = plan.clone();
            mutated.meters.retain(|m| m != drop);
            if !verify_protection(&net, &meters, &mutated, &target).unwrap() {
                broke = true;
            }
        }
    }
    assert!(broke);
}

#[test]
fn full_basic_set_defends_every_state_variable() {
    let (net, meters) = load_fixture("ieee14.json");
    let basic = gridseer::observability::find_basic_set(&net, &meters).unwrap();
    let all_targets: Vec<i64> = net.state_buses();
    let target = ProtectionTarget::new(&net, all_targets).unwrap();
    let sub = meters.subset(&basic.meter_ids).unwrap();
    let ids = sub.ids();
    let sg = gridseer::model::measured_subgraph(&net, &sub, &ids).unwrap();
    let b2 = gridseer::observability::find_basic_set(&net, &sub).unwrap();
    let witness =
        gridseer::observability::construct_emst(&net, &sg, &sub, &b2).unwrap();
    let plan = gridseer::protection::ProtectionPlan {
        meters: basic.meter_ids.clone(),
        cost: basic.meter_ids.len() as f64,
        witness,
        optimal: false,
    };
    assert!(verify_protection(&net, &meters, &plan, &target).unwrap());
}

#[test]
fn enlarging_targets_never_cheapens_the_plan() {
    for seed in 0..12u64 {
        let mut rng = seeded(4400 + seed);
        use rand::Rng;
        let nbus = rng.gen_range(5..=9);
        let net = random_network(nbus, rng.gen_range(0..=3), &mut rng);
        let meters = observable_meters(&net, rng.gen_range(0..=3), &mut rng);
        let a = rng.gen_range(2..=nbus as i64);
        let mut b = rng.gen_range(2..=nbus as i64);
        if b == a {
            b = if a == 2 { 3 } else { 2 };
        }
        let small = ProtectionTarget::new(&net, vec![a]).unwrap();
        let big = ProtectionTarget::new(&net, vec![a, b]).unwrap();
        let ps = protect_exact(&net, &meters, &small, &BnbOptions::default()).unwrap();
        let pb = protect_exact(&net, &meters, &big, &BnbOptions::default()).unwrap();
        assert!(pb.cost >= ps.cost - 1e-9, "seed {seed}");
    }
}

#[test]
fn infeasible_targets_report_unreachable_set() {
    // meters only on the 1-2 line; bus 3 cannot be defended
    let doc = r#"{"buses":[{"id":1,"reference":true},{"id":2},{"id":3}],
        "lines":[{"from":1,"to":2,"x":0.1},{"from":2,"to":3,"x":0.1}],
        "meters":[{"id":"m","kind":"flow","line":[1,2]}]}"#;
    let (net, meters) =
        gridseer::parse::parse_case::<f64>(doc.as_bytes(), gridseer::parse::CaseFormat::NativeJson)
            .unwrap();
    let target = ProtectionTarget::new(&net, vec![3]).unwrap();
    let err = protect_exact(&net, &meters, &target, &BnbOptions::default()).unwrap_err();
    match err {
        gridseer::Error::TargetsUnreachable { unreachable } => assert_eq!(unreachable, vec![3]),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn solver_stats_expose_progress() {
    let (net, meters) = load_fixture("ieee14.json");
    let target = ProtectionTarget::new(&net, vec![8, 14]).unwrap();
    let (plan, stats) = solve_exact(&net, &meters, &target, &BnbOptions::default()).unwrap();
    assert!(plan.optimal);
    assert!(stats.nodes >= 1);
    assert!(close(stats.best_bound, plan.cost, 1e-6));
}
