//! End-to-end experiment runs through the harness.

use ripcert::harness::{run_distinguish, run_witness_check, sweep_tradeoff, CertifierKind, ExperimentSpec, RPolicy};

#[test]
fn witness_detects_planted_kernel_at_moderate_scale() {
    let spec = ExperimentSpec::new(600, 200, 40, 0.5, 400, CertifierKind::Witness, 11);
    let report = run_witness_check(&spec).unwrap();
    let c = &report.bound_comparisons[0];
    assert!(c.holds(), "{c:?}");
    assert!(report.planted.decided() == 400);
}

#[test]
fn witness_distinguisher_rejects_most_planted_samples() {
    let spec = ExperimentSpec::new(600, 200, 40, 0.5, 200, CertifierKind::Witness, 12);
    let report = run_distinguish(&spec).unwrap();
    // planted: the spike is a witness; null: the decoy is almost never one
    assert!(report.type2 < 0.3, "type2 = {}", report.type2);
    assert!(report.type1 < 0.05, "type1 = {}", report.type1);
}

#[test]
fn lazy_distinguish_with_audit_is_sound() {
    let mut spec = ExperimentSpec::new(300, 300, 3, 0.99, 40, CertifierKind::Lazy(RPolicy::Fixed(2)), 13);
    spec.audit = true;
    let report = run_distinguish(&spec).unwrap();
    // every yes is re-checked exhaustively
    assert!(report.null.yes > 0);
    assert_eq!(report.audited, report.null.yes + report.planted.yes);
    assert_eq!(report.soundness_violations, 0);
}

#[test]
fn sweep_rows_follow_grid() {
    let base = ExperimentSpec::new(80, 80, 2, 0.9, 6, CertifierKind::Lazy(RPolicy::Auto), 14);
    let table = sweep_tradeoff(&base, &[2, 4, 6], RPolicy::Auto).unwrap();
    let s: Vec<usize> = table.rows.iter().map(|r| r.s).collect();
    assert_eq!(s, vec![2, 4, 6]);
    assert!(table.rows.windows(2).all(|w| w[0].r_raw < w[1].r_raw));
    assert!(table.rows.iter().all(|r| r.r >= 2 && r.r <= r.s));
}

/// Exact pairwise distinguisher at a scale where the planted spike has
/// about five nonzeros. Each trial enumerates two million pairs of
/// 2000-long columns, so this runs for hours on one core.
#[test]
#[ignore]
fn exact_pairwise_distinguisher_at_calibrated_scale() {
    let mut spec = ExperimentSpec::new(2_000, 2_000, 2, 0.2, 30, CertifierKind::Exact, 15);
    spec.rho = Some(5.0 / 2_000.0);
    spec.beta = Some(-0.5);
    let report = run_distinguish(&spec).unwrap();
    println!("{}", report.to_csv(true));
    assert!(report.type1 + report.type2 <= 0.1 + 3.0 * (0.25f64 / 30.0).sqrt());
}
