mod common;

use common::{check_round_trip, corpus, random_circuit, random_programs, Features};
use proptest::prelude::*;

#[test]
fn corpus_round_trips() {
    for (name, src) in corpus() {
        check_round_trip(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn random_circuits_round_trip() {
    for (seed, src) in random_programs().iter().enumerate() {
        check_round_trip(src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    }
}

/// A seed that once failed the round trip.
#[test]
fn past_failure_round_trips() {
    let src = random_circuit(17089, Features { classical: true });
    check_round_trip(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]
    #[test]
    fn linearize_then_bufferize_is_identity(seed in 10_000u64..20_000) {
        let src = random_circuit(seed, Features { classical: true });
        prop_assert_eq!(check_round_trip(&src), Ok(()), "{}", src);
    }
}
