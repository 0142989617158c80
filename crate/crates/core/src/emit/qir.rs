//! Flat QIR-style emitter.
//!
//! Produces one LLVM-like function with one intrinsic call per gate,
//! measurement or reset, using integer-identified qubit and result handles.
//! The declaration list is fixed, so the output length is the number of
//! calls plus a constant overhead. Custom gates are expanded, powers are
//! repeated, negative controls are conjugated with `x` and singly controlled
//! gates without an intrinsic are decomposed over `cnot`.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::dialect::unitary::{
    canonical_descriptor, descriptor_with_env, inverse_descriptor, qubit_operands, BaseGate, DescriptorError, Modifier,
    UnitaryDescriptor,
};
use crate::dialect::{registry, GateKind};
use crate::ir::{Attribute, Module, ValueId};

pub const MAX_QUBITS: usize = 64;

const MAX_GATE_DEPTH: usize = 32;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QirEmitError {
    #[error("`{0}` remains after control-flow simplification; QIR output must be straight-line")]
    ResidualControlFlow(String),
    #[error("the program uses {0} qubits; at most {MAX_QUBITS} are supported")]
    TooManyQubits(usize),
    #[error("`{0}` belongs to the functional dialect; bufferize before emitting QIR")]
    WrongDialect(String),
    #[error("no QIR intrinsic for {0}")]
    UnsupportedGate(String),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

const PROLOGUE: &str = "\
; ModuleID = 'qcc'
source_filename = \"qcc\"

%Qubit = type opaque
%Result = type opaque

define void @main() #0 {
entry:
";

const INTRINSICS: &[(&str, &str)] = &[
    ("h__body", "%Qubit*"),
    ("x__body", "%Qubit*"),
    ("y__body", "%Qubit*"),
    ("z__body", "%Qubit*"),
    ("s__body", "%Qubit*"),
    ("s__adj", "%Qubit*"),
    ("t__body", "%Qubit*"),
    ("t__adj", "%Qubit*"),
    ("sx__body", "%Qubit*"),
    ("sx__adj", "%Qubit*"),
    ("rx__body", "double, %Qubit*"),
    ("ry__body", "double, %Qubit*"),
    ("rz__body", "double, %Qubit*"),
    ("r1__body", "double, %Qubit*"),
    ("u3__body", "double, double, double, %Qubit*"),
    ("swap__body", "%Qubit*, %Qubit*"),
    ("cnot__body", "%Qubit*, %Qubit*"),
    ("cz__body", "%Qubit*, %Qubit*"),
    ("ccx__body", "%Qubit*, %Qubit*, %Qubit*"),
    ("mz__body", "%Qubit*, %Result*"),
    ("reset__body", "%Qubit*"),
];

/// Lines emitted in addition to one line per call.
pub fn fixed_line_count() -> usize {
    PROLOGUE.lines().count() + 3 + INTRINSICS.len() + 2
}

struct Call {
    name: &'static str,
    angles: Vec<f64>,
    qubits: Vec<usize>,
    result: Option<usize>,
}

/// LLVM reads floating literals only with a decimal point.
fn llvm_double(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains('.') {
        return s;
    }
    match s.find('e') {
        Some(i) => format!("{}.0{}", &s[..i], &s[i..]),
        None => format!("{s}.0"),
    }
}

/// Emits a straight-line imperative-dialect module as flat QIR-style text.
pub fn emit_qir_flat(m: &Module) -> Result<String, QirEmitError> {
    let mut handles: HashMap<ValueId, usize> = HashMap::new();
    let mut registers: HashMap<ValueId, usize> = HashMap::new();
    let mut num_qubits = 0usize;
    let mut num_results = 0usize;
    let mut calls: Vec<Call> = Vec::new();
    for op in m.walk() {
        let name = m.op_name(op);
        if name.starts_with("qco.") {
            return Err(QirEmitError::WrongDialect(name.to_string()));
        }
        if name.starts_with("cf.") {
            return Err(QirEmitError::ResidualControlFlow(name.to_string()));
        }
    }
    for &op in m.block_ops(m.body()) {
        let name = m.op_name(op);
        let handle = |v: ValueId| handles[&v];
        match name {
            "qc.alloc" => {
                handles.insert(m.results(op)[0], num_qubits);
                num_qubits += 1;
            }
            "qc.alloc_reg" => {
                let size = m.attr(op, "size").and_then(Attribute::as_int).unwrap_or(1) as usize;
                registers.insert(m.results(op)[0], num_qubits);
                num_qubits += size;
            }
            "qc.extract" => {
                let base = registers[&m.operands(op)[0]];
                let idx = m.attr(op, "index").and_then(Attribute::as_int).unwrap_or(0) as usize;
                handles.insert(m.results(op)[0], base + idx);
            }
            "qc.measure" => {
                calls.push(Call {
                    name: "mz__body",
                    angles: Vec::new(),
                    qubits: vec![handle(m.operands(op)[0])],
                    result: Some(num_results),
                });
                num_results += 1;
            }
            "qc.reset" => calls.push(Call {
                name: "reset__body",
                angles: Vec::new(),
                qubits: vec![handle(m.operands(op)[0])],
                result: None,
            }),
            _ if registry::is_unitary(name) => {
                let d = descriptor_with_env(m, op, &HashMap::new())?;
                let wires: Vec<usize> = qubit_operands(m, op).into_iter().map(handle).collect();
                for (d, qs) in expand(m, &d, &wires, 0)? {
                    lower(&d, &qs, &mut calls)?;
                }
            }
            _ => {}
        }
    }
    if num_qubits > MAX_QUBITS {
        return Err(QirEmitError::TooManyQubits(num_qubits));
    }

    let mut out = String::from(PROLOGUE);
    for c in &calls {
        let mut args: Vec<String> = c.angles.iter().map(|a| format!("double {}", llvm_double(*a))).collect();
        args.extend(
            c.qubits
                .iter()
                .map(|q| format!("%Qubit* inttoptr (i64 {q} to %Qubit*)")),
        );
        if let Some(r) = c.result {
            args.push(format!("%Result* inttoptr (i64 {r} to %Result*)"));
        }
        let _ = writeln!(out, "  call void @__quantum__qis__{}({})", c.name, args.join(", "));
    }
    out.push_str("  ret void\n}\n\n");
    for (name, sig) in INTRINSICS {
        let _ = writeln!(out, "declare void @__quantum__qis__{name}({sig})");
    }
    let _ = writeln!(
        out,
        "\nattributes #0 = {{ \"entry_point\" \"qir_profiles\"=\"base_profile\" \"required_num_qubits\"=\"{num_qubits}\" \"required_num_results\"=\"{num_results}\" }}"
    );
    Ok(out)
}

type Placed = (UnitaryDescriptor, Vec<usize>);

/// Rewrites custom-gate descriptors into sequences of standard ones.
fn expand(m: &Module, d: &UnitaryDescriptor, wires: &[usize], depth: usize) -> Result<Vec<Placed>, QirEmitError> {
    let BaseGate::Custom(callee) = &d.base else {
        return Ok(vec![(d.clone(), wires.to_vec())]);
    };
    if depth > MAX_GATE_DEPTH {
        return Err(DescriptorError::Recursive(callee.clone()).into());
    }
    let def = m
        .lookup_symbol(callee)
        .ok_or_else(|| DescriptorError::UnresolvedCustomGate(callee.clone()))?;
    let block = m.region_block(def, 0);
    let args = m.block_args(block);
    let nparams = args.len() - d.targets;
    if nparams != d.angles.len() {
        return Err(DescriptorError::ParameterCount {
            name: callee.clone(),
            expected: nparams,
            found: d.angles.len(),
        }
        .into());
    }
    let controls = d.controls();
    let env: HashMap<ValueId, f64> = args[..nparams].iter().copied().zip(d.angles.iter().copied()).collect();
    let local: HashMap<ValueId, usize> = args[nparams..]
        .iter()
        .copied()
        .zip(wires[controls..].iter().copied())
        .collect();
    let mut seq: Vec<Placed> = Vec::new();
    for &op in m.block_ops(block) {
        if !registry::is_unitary(m.op_name(op)) {
            continue;
        }
        let inner = descriptor_with_env(m, op, &env)?;
        let qs: Vec<usize> = qubit_operands(m, op).iter().map(|q| local[q]).collect();
        seq.extend(expand(m, &inner, &qs, depth + 1)?);
    }
    // apply the call's own modifiers, innermost first
    let mut ctrl_end = wires.len() - d.targets;
    for modifier in d.modifiers.iter().rev() {
        seq = match modifier {
            Modifier::Ctrl(p) => {
                let cs = &wires[ctrl_end - p.len()..ctrl_end];
                ctrl_end -= p.len();
                seq.into_iter()
                    .map(|(g, qs)| {
                        let mut all = cs.to_vec();
                        all.extend(qs);
                        (g.wrap(Modifier::Ctrl(p.clone())), all)
                    })
                    .collect()
            }
            Modifier::Inv => seq
                .into_iter()
                .rev()
                .map(|(g, qs)| (canonical_descriptor(&inverse_descriptor(&g)), qs))
                .collect(),
            Modifier::Pow(k) => {
                let base: Vec<Placed> = if *k < 0 {
                    seq.into_iter()
                        .rev()
                        .map(|(g, qs)| (canonical_descriptor(&inverse_descriptor(&g)), qs))
                        .collect()
                } else {
                    seq
                };
                let n = k.unsigned_abs() as usize;
                base.iter().cycle().take(base.len() * n).cloned().collect()
            }
        };
    }
    Ok(seq)
}

/// Maps one standard-gate descriptor onto intrinsic calls.
fn lower(d: &UnitaryDescriptor, qubits: &[usize], calls: &mut Vec<Call>) -> Result<(), QirEmitError> {
    let d = canonical_descriptor(d);
    let unsupported = || QirEmitError::UnsupportedGate(format!("{:?} {}", d.modifiers, d.base));
    let BaseGate::Standard(kind) = d.base else {
        return Err(unsupported());
    };
    let call = |name: &'static str, angles: Vec<f64>, qubits: Vec<usize>| Call {
        name,
        angles,
        qubits,
        result: None,
    };
    // controls commute with powers: ctrl(U^k) = (ctrl U)^k
    if let Some(pos) = d.modifiers.iter().position(|m| matches!(m, Modifier::Pow(_))) {
        let Modifier::Pow(k) = d.modifiers[pos] else {
            unreachable!()
        };
        let mut inner = d.clone();
        inner.modifiers.remove(pos);
        if k < 0 {
            inner = canonical_descriptor(&inverse_descriptor(&inner));
        }
        for _ in 0..k.unsigned_abs() {
            lower(&inner, qubits, calls)?;
        }
        return Ok(());
    }
    if d.modifiers.contains(&Modifier::Inv) {
        return Err(unsupported());
    }
    let polarities: Vec<bool> = d
        .modifiers
        .iter()
        .flat_map(|m| match m {
            Modifier::Ctrl(p) => p.clone(),
            _ => Vec::new(),
        })
        .collect();
    if polarities.is_empty() {
        let (name, angles) = match kind {
            GateKind::I => return Ok(()),
            GateKind::H => ("h__body", vec![]),
            GateKind::X => ("x__body", vec![]),
            GateKind::Y => ("y__body", vec![]),
            GateKind::Z => ("z__body", vec![]),
            GateKind::S => ("s__body", vec![]),
            GateKind::Sdg => ("s__adj", vec![]),
            GateKind::T => ("t__body", vec![]),
            GateKind::Tdg => ("t__adj", vec![]),
            GateKind::Sx => ("sx__body", vec![]),
            GateKind::Sxdg => ("sx__adj", vec![]),
            GateKind::Swap => ("swap__body", vec![]),
            GateKind::Rx => ("rx__body", d.angles.clone()),
            GateKind::Ry => ("ry__body", d.angles.clone()),
            GateKind::Rz => ("rz__body", d.angles.clone()),
            GateKind::P => ("r1__body", d.angles.clone()),
            GateKind::U => ("u3__body", d.angles.clone()),
        };
        calls.push(call(name, angles, qubits.to_vec()));
        return Ok(());
    }
    let negated: Vec<usize> = polarities
        .iter()
        .zip(qubits)
        .filter(|(p, _)| !**p)
        .map(|(_, q)| *q)
        .collect();
    for q in &negated {
        calls.push(call("x__body", vec![], vec![*q]));
    }
    match (polarities.len(), kind) {
        (1, GateKind::X) => calls.push(call("cnot__body", vec![], qubits.to_vec())),
        (1, GateKind::Z) => calls.push(call("cz__body", vec![], qubits.to_vec())),
        (2, GateKind::X) => calls.push(call("ccx__body", vec![], qubits.to_vec())),
        (n, kind) => {
            let steps = controlled_steps(n, kind, &d.angles).ok_or_else(unsupported)?;
            for (controls, kind, angles, at) in steps {
                let mut step = UnitaryDescriptor::standard(kind, angles);
                if controls > 0 {
                    step = step.wrap(Modifier::Ctrl(vec![true; controls]));
                }
                let qs: Vec<usize> = at.iter().map(|i| qubits[*i]).collect();
                lower(&step, &qs, calls)?;
            }
        }
    }
    for q in &negated {
        calls.push(call("x__body", vec![], vec![*q]));
    }
    Ok(())
}

/// (controls, gate, angles, wire positions)
type Step = (usize, GateKind, Vec<f64>, Vec<usize>);

/// Decomposes a positively controlled standard gate into gates the intrinsic
/// set covers. Positions index the control wires first, then the targets.
fn controlled_steps(controls: usize, kind: GateKind, a: &[f64]) -> Option<Vec<Step>> {
    use std::f64::consts::FRAC_PI_4;
    use GateKind::*;
    let t = |k: GateKind, angles: Vec<f64>| (0, k, angles, vec![1]);
    let c = |k: GateKind, angles: Vec<f64>| (0, k, angles, vec![0]);
    let cx = (1, X, vec![], vec![0, 1]);
    let cp = |lambda: f64| {
        vec![
            c(P, vec![lambda / 2.0]),
            cx.clone(),
            t(P, vec![-lambda / 2.0]),
            cx.clone(),
            t(P, vec![lambda / 2.0]),
        ]
    };
    if controls == 2 {
        return (kind == Z).then(|| {
            vec![
                (0, H, vec![], vec![2]),
                (2, X, vec![], vec![0, 1, 2]),
                (0, H, vec![], vec![2]),
            ]
        });
    }
    if controls != 1 {
        return None;
    }
    Some(match kind {
        I => vec![],
        X => vec![cx],
        Z => vec![(1, Z, vec![], vec![0, 1])],
        Y => vec![t(Sdg, vec![]), cx, t(S, vec![])],
        H => vec![
            t(S, vec![]),
            t(H, vec![]),
            t(T, vec![]),
            cx,
            t(Tdg, vec![]),
            t(H, vec![]),
            t(Sdg, vec![]),
        ],
        S => cp(2.0 * FRAC_PI_4),
        Sdg => cp(-2.0 * FRAC_PI_4),
        T => cp(FRAC_PI_4),
        Tdg => cp(-FRAC_PI_4),
        P => cp(a[0]),
        Rz => vec![t(Rz, vec![a[0] / 2.0]), cx.clone(), t(Rz, vec![-a[0] / 2.0]), cx],
        Ry => vec![t(Ry, vec![a[0] / 2.0]), cx.clone(), t(Ry, vec![-a[0] / 2.0]), cx],
        Rx => vec![t(H, vec![]), (1, Rz, vec![a[0]], vec![0, 1]), t(H, vec![])],
        // sx = e^{iπ/4} rx(π/2)
        Sx => vec![c(P, vec![FRAC_PI_4]), (1, Rx, vec![2.0 * FRAC_PI_4], vec![0, 1])],
        Sxdg => vec![c(P, vec![-FRAC_PI_4]), (1, Rx, vec![-2.0 * FRAC_PI_4], vec![0, 1])],
        U => {
            let (theta, phi, lambda) = (a[0], a[1], a[2]);
            vec![
                c(P, vec![(lambda + phi) / 2.0]),
                t(P, vec![(lambda - phi) / 2.0]),
                cx.clone(),
                t(U, vec![-theta / 2.0, 0.0, -(phi + lambda) / 2.0]),
                cx,
                t(U, vec![theta / 2.0, phi, 0.0]),
            ]
        }
        Swap => vec![
            (1, X, vec![], vec![2, 1]),
            (2, X, vec![], vec![0, 1, 2]),
            (1, X, vec![], vec![2, 1]),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::import_qasm;

    fn qir(src: &str) -> Result<String, QirEmitError> {
        emit_qir_flat(&import_qasm(&format!("OPENQASM 3.0;\n{src}"), "t.qasm").unwrap())
    }

    fn calls(text: &str) -> Vec<&str> {
        text.lines().filter(|l| l.trim_start().starts_with("call ")).collect()
    }

    #[test]
    fn single_h() {
        let out = qir("qubit q; h q;").unwrap();
        assert_eq!(
            calls(&out),
            ["  call void @__quantum__qis__h__body(%Qubit* inttoptr (i64 0 to %Qubit*))"]
        );
        assert!(out.contains("\"required_num_qubits\"=\"1\""));
    }

    #[test]
    fn bell_prep() {
        let out = qir("qubit[2] q; h q[0]; cx q[0], q[1];").unwrap();
        let c = calls(&out);
        assert_eq!(c.len(), 2);
        assert!(c[0].contains("h__body"));
        assert!(c[1].contains("cnot__body(%Qubit* inttoptr (i64 0 to %Qubit*), %Qubit* inttoptr (i64 1 to %Qubit*))"));
        assert!(out.contains("\"required_num_qubits\"=\"2\""));
        assert_eq!(out.lines().count(), 2 + fixed_line_count());
    }

    #[test]
    fn residual_control_flow() {
        let err = qir("qubit q; bit c; c = measure q; while (c) { c = measure q; }").unwrap_err();
        assert!(matches!(err, QirEmitError::ResidualControlFlow(_)));
    }

    #[test]
    fn too_many_qubits() {
        assert!(matches!(qir("qubit[65] q;"), Err(QirEmitError::TooManyQubits(65))));
    }

    #[test]
    fn rotations_measure_and_custom_gates() {
        let out = qir(
            "gate g(a) x1, x2 { rz(a) x1; cz x1, x2; } qubit[2] q; bit c; rx(1) q[0]; inv @ g(0.5) q[1], q[0]; \
             negctrl @ x q[0], q[1]; pow(2) @ t q[0]; c = measure q[1];",
        )
        .unwrap();
        let c = calls(&out);
        assert!(c[0].contains("rx__body(double 1.0, "));
        assert!(c[1].contains("cz__body(%Qubit* inttoptr (i64 1 to %Qubit*), %Qubit* inttoptr (i64 0"));
        assert!(c[2].contains("rz__body(double -0.5, %Qubit* inttoptr (i64 1"));
        assert!(c[3].contains("x__body") && c[4].contains("cnot__body") && c[5].contains("x__body"));
        assert!(c[6].contains("t__body") && c[7].contains("t__body"));
        assert!(c[8].contains("mz__body(%Qubit* inttoptr (i64 1 to %Qubit*), %Result* inttoptr (i64 0 to %Result*))"));
        assert!(out.contains("\"required_num_results\"=\"1\""));
    }

    #[test]
    fn controlled_decompositions_are_exact() {
        use crate::dialect::unitary::{descriptor_matrix, embed};
        for kind in GateKind::ALL {
            for controls in 1..=2 {
                let angles: Vec<f64> = (0..kind.num_params()).map(|i| 0.7 - 1.3 * i as f64).collect();
                let Some(steps) = controlled_steps(controls, kind, &angles) else {
                    continue;
                };
                let n = controls + kind.num_qubits();
                let mut total = crate::dialect::Matrix::identity(1 << n, 1 << n);
                for (c, k, a, at) in steps {
                    let mut d = UnitaryDescriptor::standard(k, a);
                    if c > 0 {
                        d = d.wrap(Modifier::Ctrl(vec![true; c]));
                    }
                    total = embed(&descriptor_matrix(&d).unwrap(), &at, n) * total;
                }
                let d = UnitaryDescriptor::standard(kind, angles).wrap(Modifier::Ctrl(vec![true; controls]));
                let expected = descriptor_matrix(&d).unwrap();
                assert!((total - expected).norm() < 1e-12, "{controls} x {kind}");
            }
        }
    }

    #[test]
    fn controlled_gates_are_decomposed() {
        let out = qir("qubit[3] q; crz(0.5) q[0], q[1]; negctrl @ h q[1], q[2]; cswap q[0], q[1], q[2];").unwrap();
        assert!(!out.contains("crz"));
        let c = calls(&out);
        assert_eq!(c.iter().filter(|l| l.contains("ccx__body")).count(), 1);
        assert!(qir("qubit[3] q; ctrl(2) @ h q[0], q[1], q[2];").is_err());
    }

    #[test]
    fn doubles_always_have_a_point() {
        assert_eq!(llvm_double(1e-20), "1.0e-20");
        assert_eq!(llvm_double(2.0), "2.0");
        assert_eq!(llvm_double(-0.25), "-0.25");
    }
}
