//! Acceptance checks. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use qcc::dialect::unitary::{descriptor_matrix, inverse_descriptor, Modifier, UnitaryDescriptor};
use qcc::dialect::{GateKind, Matrix};
use qcc::emit::print_ir;
use qcc::sim::{equivalent, EquivalenceMode};
use qcc::transforms::run_pipeline_str;

const TIME_LIMIT: Duration = Duration::from_secs(10);
const GATE_ALGEBRA_TOLERANCE: f64 = 1e-12;
const BELL_TOLERANCE: f64 = 1e-12;
const EQUIVALENCE_TOLERANCE: f64 = 1e-9;
const ANGLE_DRAWS: usize = 100;

type Outcome = Result<String, String>;

fn run(m: &mut qcc::ir::Module, pipeline: &str) -> Result<(), String> {
    run_pipeline_str(m, pipeline, &route_context())
        .map(|_| ())
        .map_err(|e| format!("{pipeline}: {e}"))
}

fn dead_alloc_removal() -> Outcome {
    let mut m = import("OPENQASM 3;\nqubit q;\n");
    run(&mut m, "remove-dead-alloc")?;
    let got = print_ir(&m);
    if got != "qcir.module\n" {
        return Err(format!("alloc/dealloc program left:\n{got}"));
    }
    let golden = "qcir.module\n%q = qc.alloc : !qc.qubit\nqc.h(%q)\nqc.dealloc(%q)\n";
    let mut m = import("OPENQASM 3;\nqubit q;\nh q;\n");
    run(&mut m, "remove-dead-alloc")?;
    let got = print_ir(&m);
    if got != golden {
        return Err(format!("program with a gate changed:\n{got}"));
    }
    Ok("empty body; one-gate program unchanged".into())
}

fn inverse_cancellation() -> Outcome {
    let count = |body: &str| -> Result<usize, String> {
        let mut m = import(&format!("OPENQASM 3;\nqubit q;\n{body}"));
        run(&mut m, "linearize,cancel-inverses")?;
        Ok(gate_count(&m))
    };
    let (hh, hxh, h4) = (
        count("h q; h q;")?,
        count("h q; x q; h q;")?,
        count("h q; h q; h q; h q;")?,
    );
    if (hh, hxh, h4) != (0, 3, 0) {
        return Err(format!("gate counts H;H={hh} H;X;H={hxh} H^4={h4}, expected 0, 3, 0"));
    }
    Ok("H;H -> 0, H;X;H -> 3, H^4 -> 0".into())
}

fn reset_program() -> Outcome {
    let src = std::fs::read_to_string(corpus_dir().join("reset_idiom.qasm")).unwrap();
    let pipelines = [
        "",
        "linearize",
        "linearize,bufferize",
        "remove-dead-alloc",
        "linearize,cancel-inverses",
        "linearize,merge-rotations",
        "canonicalize-modifiers",
        "simplify-control-flow",
        "route",
    ];
    for p in pipelines {
        let mut m = import(&src);
        run(&mut m, p)?;
        let (total, worst) = reset_program_summary(&m)?;
        if (total - 1.0).abs() > EQUIVALENCE_TOLERANCE || worst > EQUIVALENCE_TOLERANCE {
            return Err(format!(
                "after `{p}`: total probability {total}, distance from |0> {worst:e}"
            ));
        }
    }
    Ok(format!(
        "|0> with probability 1 before and after {} pipelines",
        pipelines.len() - 1
    ))
}

fn bell_cli() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_qcc"))
        .arg(corpus_dir().join("bell.qasm"))
        .arg("--simulate")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit {:?}", out.status.code()));
    }
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    let lines: Vec<(&str, f64)> = text
        .lines()
        .filter_map(|l| l.split_once(' '))
        .map(|(k, p)| (k, p.parse().unwrap_or(f64::NAN)))
        .collect();
    let ok = lines.len() == 2
        && lines[0].0 == "00"
        && lines[1].0 == "11"
        && lines.iter().all(|(_, p)| (p - 0.5).abs() <= BELL_TOLERANCE);
    if ok {
        Ok(text.trim().replace('\n', ", "))
    } else {
        Err(format!("output: {text:?}"))
    }
}

fn conversion_round_trip() -> Outcome {
    let programs: Vec<String> = corpus().into_iter().map(|(_, s)| s).chain(random_programs()).collect();
    let failures: Vec<String> = programs
        .iter()
        .enumerate()
        .filter_map(|(i, p)| check_round_trip(p).err().map(|e| format!("#{i}: {e}")))
        .collect();
    match failures.first() {
        None => Ok(format!("{}/{} programs", programs.len(), programs.len())),
        Some(f) => Err(format!("{} of {} failed, first {f}", failures.len(), programs.len())),
    }
}

fn pass_soundness() -> Outcome {
    let programs = random_programs();
    let mut checked = 0;
    for (name, pipeline) in SOUNDNESS_PIPELINES {
        for (seed, src) in programs.iter().enumerate() {
            check_pass_sound(src, pipeline).map_err(|e| format!("{name}, seed {seed}: {e}"))?;
            checked += 1;
        }
    }
    for (seed, src) in random_unitary_programs().iter().enumerate() {
        check_pass_sound(src, "linearize,route,bufferize").map_err(|e| format!("route (unitary), seed {seed}: {e}"))?;
        checked += 1;
    }
    Ok(format!("{checked} pipeline runs equivalent"))
}

fn routing_conformance() -> Outcome {
    let mut routed = 0;
    let mut declined = Vec::new();
    let mut swaps = 0;
    for (map, cm) in coupling_maps() {
        for (name, src) in corpus() {
            match check_routing(&src, &cm).map_err(|e| format!("{name} on {map}: {e}"))? {
                RoutingCheck::Routed { swaps: s } => {
                    routed += 1;
                    swaps += s;
                }
                RoutingCheck::Declined => declined.push(format!("{name}@{map}")),
            }
        }
    }
    declined.sort();
    declined.dedup_by(|a, b| a.split('@').next() == b.split('@').next());
    let names: Vec<&str> = declined.iter().map(|d| d.split('@').next().unwrap()).collect();
    Ok(format!(
        "{routed} routings conform ({swaps} swaps); declined >2-qubit programs: {}",
        names.join(" ")
    ))
}

fn gate_algebra() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, kind) in GateKind::ALL.into_iter().enumerate() {
        for angles in angle_draws(k as u64, ANGLE_DRAWS, kind.num_params()) {
            let d = UnitaryDescriptor::standard(kind, angles);
            let u = descriptor_matrix(&d).map_err(|e| e.to_string())?;
            let v = descriptor_matrix(&inverse_descriptor(&d)).map_err(|e| e.to_string())?;
            let dev = (v * &u - Matrix::identity(u.nrows(), u.ncols()))
                .iter()
                .map(|x| x.norm())
                .fold(0.0, f64::max);
            worst = worst.max(dev);
        }
    }
    let sx2 = descriptor_matrix(&UnitaryDescriptor::standard(GateKind::Sx, vec![]).wrap(Modifier::Pow(2)))
        .map_err(|e| e.to_string())?;
    let x = descriptor_matrix(&UnitaryDescriptor::standard(GateKind::X, vec![])).map_err(|e| e.to_string())?;
    let sx_dev = (sx2 - x).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if worst > GATE_ALGEBRA_TOLERANCE || sx_dev > GATE_ALGEBRA_TOLERANCE {
        return Err(format!(
            "inverse deviation {worst:e}, pow(2){{sx}} deviation {sx_dev:e}"
        ));
    }
    Ok(format!(
        "{} kinds x {ANGLE_DRAWS} draws, max deviation {worst:.1e}",
        GateKind::ALL.len()
    ))
}

fn text_round_trips() -> Outcome {
    let mut qir = 0;
    let programs = corpus();
    for (name, src) in &programs {
        check_text_round_trips(src).map_err(|e| format!("{name}: {e}"))?;
        if check_qir_golden(name, src).map_err(|e| format!("{name}: {e}"))? {
            qir += 1;
        }
    }
    Ok(format!(
        "{} programs round trip; {qir} QIR goldens identical",
        programs.len()
    ))
}

fn unroll_then_cancel() -> Outcome {
    let src = "OPENQASM 3;\nqubit q;\nfor uint i in [0:3] { x q; }\n";
    let mut m = import(src);
    run(&mut m, "simplify-control-flow,linearize,cancel-inverses,bufferize")?;
    let n = gate_count(&m);
    let xs = m.walk().into_iter().filter(|o| m.op_name(*o) == "qc.x").count();
    if n != 1 || xs != 1 {
        return Err(format!("{n} gates left:\n{}", print_ir(&m)));
    }
    let single = import("OPENQASM 3;\nqubit q;\nx q;\n");
    let e = equivalent(&m, &single, EquivalenceMode::Unitary, None).map_err(|e| e.to_string())?;
    if e.deviation > EQUIVALENCE_TOLERANCE {
        return Err(format!("deviation {:e}", e.deviation));
    }
    Ok(format!("one X left, deviation {:.1e}", e.deviation))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("dead allocation removal", dead_alloc_removal),
        ("inverse cancellation", inverse_cancellation),
        ("measurement-conditioned reset", reset_program),
        ("Bell distribution from the CLI", bell_cli),
        ("linearize/bufferize round trip", conversion_round_trip),
        ("pass soundness sweep", pass_soundness),
        ("routing conformance", routing_conformance),
        ("gate algebra", gate_algebra),
        ("text round trips and QIR goldens", text_round_trips),
        ("unroll then cancel", unroll_then_cancel),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > TIME_LIMIT => Err(format!("took {elapsed:.1?} ({detail})")),
            r => r,
        };
        match result {
            Ok(detail) => println!("[PASS] {:>2} {name}: {detail} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2} {name}: {why} ({elapsed:.2?})", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
