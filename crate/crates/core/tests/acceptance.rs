//! Acceptance suite: one PASS/FAIL line per criterion, runtime limits included.

use twistlab::cli::{lookup, run_check, ExperimentConfig, CHECKS};

fn criterion(n: u8) {
    let spec = CHECKS.iter().find(|c| c.criterion == Some(n)).expect("criterion is registered");
    let o = run_check(spec, &ExperimentConfig::default());
    let ok = o.passed && o.within_limit;
    println!(
        "{} criterion {n:>2} [{}] {:.2} s (limit {} s): {}",
        if ok { "PASS" } else { "FAIL" },
        o.id,
        o.elapsed_secs,
        o.limit_secs,
        o.summary
    );
    assert!(o.passed, "criterion {n} failed: {}", o.summary);
    assert!(o.within_limit, "criterion {n} took {:.2} s, limit {} s", o.elapsed_secs, o.limit_secs);
}

#[test]
fn c01_katok_twist_values() {
    criterion(1);
}

#[test]
fn c02_katok_fixed_point_scan() {
    criterion(2);
}

#[test]
fn c03_degeneration_roundtrip() {
    criterion(3);
}

#[test]
fn c04_extension_exactness() {
    criterion(4);
}

#[test]
fn c05_action_growth() {
    criterion(5);
}

#[test]
fn c06_smoothing_family() {
    criterion(6);
}

#[test]
fn c07_index_suite() {
    criterion(7);
}

#[test]
fn c08_billiard() {
    criterion(8);
}

#[test]
fn c09_orbit_survey() {
    criterion(9);
}

#[test]
fn c10_symplecticity_and_conservation() {
    criterion(10);
}

#[test]
fn every_criterion_is_registered_once() {
    for n in 1..=10u8 {
        assert_eq!(CHECKS.iter().filter(|c| c.criterion == Some(n)).count(), 1);
    }
    assert!(lookup("chords").is_some());
}
