use hetnet_harness::acceptance::{run_criterion, AcceptanceContext, Status, Verdict};

#[test]
fn each_missing_solver_is_reported_not_failed() {
    for (solver, criterion) in [("exhaustive", 1), ("dual", 3), ("dual-all-active", 4), ("iterative", 7)] {
        let mut ctx = AcceptanceContext::default();
        assert!(ctx.registry.remove(solver).is_some());
        let v = run_criterion(&ctx, criterion);
        assert_eq!(v.status, Status::MissingDependency, "{v}");
        assert!(v.detail.contains(solver));
    }
}

#[test]
fn verdicts_repeat_for_a_fixed_seed() {
    let strip = |v: Verdict| (v.status, v.detail.split("runtime").next().unwrap().to_string());
    for criterion in [1, 2] {
        let a = run_criterion(&AcceptanceContext::new(7), criterion);
        let b = run_criterion(&AcceptanceContext::new(7), criterion);
        assert_eq!(strip(a), strip(b));
    }
}

#[test]
fn other_seeds_give_other_draws_with_the_same_outcome() {
    let a = run_criterion(&AcceptanceContext::new(1), 2);
    let b = run_criterion(&AcceptanceContext::new(2), 2);
    assert_eq!(a.status, Status::Pass, "{a}");
    assert_eq!(b.status, Status::Pass, "{b}");
    assert_ne!(a.detail, b.detail);
}

#[test]
fn unknown_criterion_fails() {
    let v = run_criterion(&AcceptanceContext::default(), 9);
    assert_eq!(v.status, Status::Fail);
    assert_eq!(v.name, "unknown");
}

#[test]
fn verdict_round_trips_through_json() {
    let v = run_criterion(&AcceptanceContext::default(), 2);
    let text = serde_json::to_string(&v).unwrap();
    assert!(text.contains("\"status\":\"pass\""));
    assert_eq!(serde_json::from_str::<Verdict>(&text).unwrap(), v);
}
