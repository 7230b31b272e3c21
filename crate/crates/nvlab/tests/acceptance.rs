//! Full acceptance battery: prints one pass/fail line per criterion.
//! Runs without the libtest harness so the lines are always shown.
//!
//! Criterion 10c asks for a κ⁻¹ decay of the evolution residual of the
//! high-energy ansatz. Expanding that residual by hand leaves
//! κ⁻²(−6∂x∂Y²v + 12∂x(v∂x⁻²∂Y²v) + 12∂Y(v∂x⁻¹∂Y v)) as the first
//! surviving term, so the measured slope is −2 and the criterion cannot
//! pass. It is still run and reported as FAIL; the test requires the set
//! of failing criteria to be exactly this one.

use nvlab::acceptance::{run_criterion, SuiteReport, CRITERIA};

const UNATTAINABLE: [&str; 1] = ["10c"];

fn main() {
    let mut outcomes = Vec::new();
    for id in CRITERIA {
        let c = run_criterion(id).expect("known criterion");
        println!("{}", c.summary_line());
        outcomes.push(c);
    }
    let report = SuiteReport::new(outcomes);
    println!("\n{}", report.table());
    let failed: Vec<&str> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
    assert_eq!(failed, UNATTAINABLE, "failing criteria differ from the known-unattainable set");
    let slope = report.criteria.iter().find(|c| c.id == "10c").and_then(|c| c.checks[0].measured);
    assert!(slope.is_some_and(|s| (s + 2.0).abs() < 0.05), "10c slope {slope:?}");
    println!("acceptance: {} of {} criteria pass; failing set {failed:?} is the known-unattainable set", CRITERIA.len() - failed.len(), CRITERIA.len());
}
