use posetfd::oracle::suites::{self, CheckResult, SuiteOptions};

fn assert_all(checks: Vec<CheckResult>) {
    for c in &checks {
        let tag = if c.informational {
            "info"
        } else if c.passed {
            "ok"
        } else {
            "FAIL"
        };
        println!("[{tag}] {}: {}", c.name, c.detail);
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed && !c.informational)
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

#[test]
fn axioms() {
    assert_all(suites::axiom_checks(&SuiteOptions::default()));
}

#[test]
fn closed_form_similarities() {
    assert_all(suites::meet_checks());
}

#[test]
fn minimal_sets() {
    assert_all(suites::minimal_set_checks());
}

#[test]
fn normalizers() {
    assert_all(suites::normalizer_checks());
}

#[test]
fn telescoping() {
    assert_all(suites::telescoping_checks(&SuiteOptions::default()));
}

#[test]
fn joins() {
    assert_all(suites::join_checks(&SuiteOptions::default()));
}

#[test]
fn lemmas() {
    assert_all(suites::lemma_checks(&SuiteOptions::default()));
}

#[test]
fn cpdag_oracles() {
    assert_all(suites::cpdag_checks(&SuiteOptions::default()));
}
