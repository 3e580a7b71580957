mod common;

use common::checks;

fn ok(r: checks::Check) {
    if let Err(e) = r {
        panic!("{e}");
    }
}

#[test]
fn theory_matches_enumeration() {
    ok(checks::theory_oracle(150, 101));
}

#[test]
fn cdclt_matches_enumeration() {
    ok(checks::cdclt_oracle(150, 102));
}

#[test]
fn feasible_interval_matches_enumeration() {
    ok(checks::feasible_interval_oracle(150, 103));
}

#[test]
fn bam_satisfies_its_target() {
    ok(checks::bam_postcondition(2000, 104));
}

#[test]
fn subsystems_match_fixpoint() {
    ok(checks::subsystem_closures(100, 105));
}

#[test]
fn coverage_matches_re_evaluation() {
    ok(checks::coverage_metric(200, 106));
}

#[test]
fn frontend_clausifies_faithfully() {
    ok(checks::frontend_round_trip(150, 107));
}

#[test]
fn preprocessing_round_trips() {
    ok(checks::preprocess_round_trip(150, 108));
}
