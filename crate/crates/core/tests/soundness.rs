mod common;

use common::{check_pass_sound, random_programs, random_unitary_programs, SOUNDNESS_PIPELINES};

fn sweep(programs: &[String]) {
    for (name, pipeline) in SOUNDNESS_PIPELINES {
        for (seed, src) in programs.iter().enumerate() {
            check_pass_sound(src, pipeline).unwrap_or_else(|e| panic!("{name}, seed {seed}: {e}\n{src}"));
        }
    }
}

#[test]
fn passes_preserve_outcome_distributions() {
    sweep(&random_programs());
}

#[test]
fn passes_preserve_unitaries() {
    sweep(&random_unitary_programs());
}

#[test]
fn full_optimization_pipeline() {
    let pipeline = "canonicalize-modifiers,simplify-control-flow,remove-dead-alloc,linearize,cancel-inverses,\
                    merge-rotations,canonicalize-modifiers,cancel-inverses,bufferize";
    for (seed, src) in random_programs().iter().enumerate().take(100) {
        check_pass_sound(src, pipeline).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
    }
}
