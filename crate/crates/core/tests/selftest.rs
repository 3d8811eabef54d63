use pppks::selftest::{run_selftest, SelftestOptions};

#[test]
fn every_oracle_group_passes() {
    let reports = run_selftest(&SelftestOptions::default());
    for r in &reports {
        let worst = r.worst().unwrap();
        println!(
            "{:<28} {} checks, worst {} = {:.3e} (tol {:.1e})",
            r.group,
            r.checks.len(),
            worst.name,
            worst.error,
            worst.tolerance
        );
        for c in r.checks.iter().filter(|c| !c.passed()) {
            println!("  FAIL {} = {:e} > {:e}", c.name, c.error, c.tolerance);
        }
    }
    assert!(reports.iter().all(|r| r.passed()));
}

#[test]
fn corrupted_tolerances_fail() {
    let reports = run_selftest(&SelftestOptions { tolerance_scale: -1.0 });
    assert!(reports.iter().all(|r| !r.passed()));
}
