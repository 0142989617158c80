mod common;

use std::process::{Command, Output};

use common::corpus_dir;

fn qcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcc"))
        .args(args)
        .env("QCC_COLOR", "never")
        .output()
        .expect("run qcc")
}

fn corpus_file(name: &str) -> String {
    corpus_dir().join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn bell_simulation() {
    let o = qcc(&[&corpus_file("bell.qasm"), "--simulate"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "00 0.5\n11 0.5\n");
}

#[test]
fn optimizing_pipeline_emits_qasm() {
    let o = qcc(&[
        &corpus_file("cancel_pairs.qasm"),
        "--passes",
        "linearize,cancel-inverses,bufferize",
        "--emit",
        "qasm",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "OPENQASM 3.0;\ninclude \"stdgates.inc\";\nqubit[2] q;\nt q[1];\nh q[1];\ntdg q[1];\n"
    );
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = qcc(&["nosuch.qasm"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nosuch.qasm"));
}

#[test]
fn verification_failures_are_located() {
    let dir = std::env::temp_dir().join(format!("qcc-cli-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.qcir");
    std::fs::write(&path, "qcir.module\n%q = qco.alloc : !qco.qubit\n%a = qco.h(%q) : !qco.qubit\n%b = qco.x(%q) : !qco.qubit\nqco.dealloc(%a)\nqco.dealloc(%b)\n").unwrap();
    let o = qcc(&[path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    let first = err.lines().next().unwrap();
    let mut parts = first.splitn(4, ':');
    assert_eq!(parts.next(), path.to_str());
    assert!(parts.next().unwrap().parse::<u32>().is_ok(), "{first}");
    assert!(parts.next().unwrap().parse::<u32>().is_ok(), "{first}");
    assert!(parts.next().unwrap().starts_with(" error:"), "{first}");
}

#[test]
fn routing_needs_a_coupling_map() {
    let input = corpus_file("line_chain.qasm");
    assert_eq!(qcc(&[&input, "--passes", "route"]).status.code(), Some(2));
    let dir = std::env::temp_dir().join(format!("qcc-cm-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cm = dir.join("line5.json");
    std::fs::write(&cm, r#"{"qubits": 5, "edges": [[0,1],[1,2],[2,3],[3,4]]}"#).unwrap();
    let o = qcc(&[
        &input,
        "--passes",
        "route",
        "--coupling-map",
        cm.to_str().unwrap(),
        "--emit",
        "qasm",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("swap q["));
}

#[test]
fn output_is_deterministic() {
    let input = corpus_file("modifiers.qasm");
    for emit in ["qcir", "qasm", "qir"] {
        let a = qcc(&[
            &input,
            "--passes",
            "canonicalize-modifiers,linearize,merge-rotations,bufferize",
            "--emit",
            emit,
        ]);
        let b = qcc(&[
            &input,
            "--passes",
            "canonicalize-modifiers,linearize,merge-rotations,bufferize",
            "--emit",
            emit,
        ]);
        assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn output_file_and_ir_dumps() {
    let dir = std::env::temp_dir().join(format!("qcc-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("bell.ll");
    let o = qcc(&[
        &corpus_file("bell.qasm"),
        "--emit",
        "qir",
        "-o",
        out.to_str().unwrap(),
        "--print-ir-after-all",
        "--passes",
        "linearize,bufferize",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .contains("@__quantum__qis__cnot__body"));
    let err = stderr(&o);
    assert!(
        err.contains("IR after linearize")
            && err.contains("IR after bufferize")
            && err.contains("IR after simplify-control-flow")
    );
}
