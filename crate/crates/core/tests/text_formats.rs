mod common;

use common::{check_qir_golden, check_text_round_trips, corpus, random_programs};

#[test]
fn corpus_text_round_trips() {
    for (name, src) in corpus() {
        check_text_round_trips(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn random_text_round_trips() {
    for (seed, src) in random_programs().iter().enumerate() {
        check_text_round_trips(src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    }
}

#[test]
fn qir_matches_golden_files() {
    let mut emitted = 0;
    for (name, src) in corpus() {
        if check_qir_golden(&name, &src).unwrap_or_else(|e| panic!("{name}: {e}")) {
            emitted += 1;
        }
    }
    assert!(emitted >= 15, "only {emitted} corpus programs produced QIR");
}
