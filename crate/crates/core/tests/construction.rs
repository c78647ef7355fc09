//! End-to-end construction: dispatch, certification of the result and
//! reproducibility.

use crossover::construct::{construct, construct_with, three_step_construct, SearchConfig};
use crossover::model::{a_criterion, ModelKind};
use crossover::verify::{certify_theorem1, verify_totally_balanced};
use crossover::{fixtures, Error, Execution};

fn certified(t: usize, p: usize, n: usize) {
    let d = construct(t, p, n).unwrap_or_else(|e| panic!("({t},{p},{n}): {e}"));
    assert_eq!((d.t(), d.p(), d.n()), (t, p, n));
    assert!(verify_totally_balanced(&d).totally_balanced(), "({t},{p},{n})");
    let cert = certify_theorem1(&d);
    assert!(cert.verdict.is_optimal(), "({t},{p},{n}): {}", cert.verdict.label());
}

#[test]
fn three_period_cases() {
    certified(2, 3, 6);
    certified(3, 3, 9);
    certified(4, 3, 36);
    certified(5, 3, 30);
}

#[test]
fn four_period_cases() {
    for (t, n) in [(3, 4), (4, 16), (5, 40), (6, 40), (7, 28), (9, 48)] {
        certified(t, 4, n);
    }
}

#[test]
fn five_period_cases() {
    certified(4, 5, 10);
    certified(7, 5, 70);
}

#[test]
fn matches_example_one_criterion() {
    let d = construct(3, 3, 9).unwrap();
    let a = a_criterion(&d, ModelKind::Carryover).unwrap();
    let b = a_criterion(&fixtures::example1(), ModelKind::Carryover).unwrap();
    assert!((a - b).abs() <= 1e-6);
}

#[test]
fn search_is_reproducible_across_modes() {
    let seq = SearchConfig {
        execution: Execution::Sequential,
        ..SearchConfig::default()
    };
    let par = SearchConfig::default();
    let a = three_step_construct(6, 4, 40, &seq).unwrap();
    let b = three_step_construct(6, 4, 40, &par).unwrap();
    assert_eq!(a.design, b.design);
    assert_eq!(a.restart, b.restart);
    assert_eq!(three_step_construct(6, 4, 40, &par).unwrap().design, b.design);
}

#[test]
fn tiny_budget_reports_existence_failure() {
    let cfg = SearchConfig {
        max_restarts: 1,
        max_iters_per_restart: 1,
        symmetric: false,
        ..SearchConfig::default()
    };
    match construct_with(9, 4, 48, &cfg) {
        Err(Error::Existence(_)) => {}
        Ok(d) => assert!(certify_theorem1(&d).verdict.is_optimal()),
        Err(e) => panic!("unexpected error {e}"),
    }
}

#[test]
fn infeasible_parameters_are_rejected() {
    assert!(matches!(construct(3, 3, 10), Err(Error::Infeasible(_))));
    assert!(matches!(construct(3, 5, 9), Err(Error::Infeasible(_))));
    assert!(matches!(construct(3, 2, 9), Err(Error::Infeasible(_))));
}
