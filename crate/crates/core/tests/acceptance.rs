//! The acceptance suite: every verification criterion at its pinned
//! tolerance, one pass/fail line each. `cargo test --test acceptance`
//! is the release gate; the `paper-suite` subcommand runs the same set.

use stosync::acceptance;

#[test]
fn acceptance_suite() {
    let results = acceptance::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    let ids: Vec<&str> = results.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(
        ids,
        vec!["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12", "A13"],
        "every criterion appears exactly once, in order"
    );
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{}: {}", r.id, r.details))
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
