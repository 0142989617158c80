//! Checks specific to the imperative dialect.

use std::collections::HashSet;

use super::registry::{is_unitary, split};
use super::unitary::qubit_operands;
use crate::ir::{Attribute, BlockId, Diagnostic, Module, OpId, Type, ValueDef};

/// Dialect-level verification of `qc.*` ops.
pub fn verify_hooks(m: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for op in m.walk() {
        let name = m.op_name(op);
        let err = |msg: String| Diagnostic::error(msg, m.nearest_loc(op));
        match split(name) {
            ("qc", "extract") => {
                let size = match m.value_type(m.operands(op)[0]) {
                    Type::QubitRegister(n) => *n as i64,
                    _ => continue,
                };
                let index = m.attr(op, "index").and_then(Attribute::as_int).unwrap_or(-1);
                if !(0..size).contains(&index) {
                    diags.push(err(format!(
                        "qc.extract index {index} out of range for register of size {size}"
                    )));
                }
            }
            ("qc", "dealloc") => {
                let q = m.operands(op)[0];
                let from_alloc = m
                    .defining_op(q)
                    .is_some_and(|d| matches!(m.op_name(d), "qc.alloc" | "qc.extract"));
                if !from_alloc {
                    diags.push(err("qc.dealloc operand does not come from an allocation".into()));
                }
            }
            ("qc", "ctrl" | "inv" | "pow") => {
                let block = m.region_block(op, 0);
                if !m.block_args(block).is_empty() {
                    diags.push(err(format!("{name} body must not have block arguments")));
                }
                check_single_unitary_body(m, op, block, &mut diags);
            }
            ("qc", "gate_def") => check_gate_def(m, op, &mut diags),
            ("qc" | "qco", "call_gate") => check_call(m, op, &mut diags),
            _ => {}
        }
        if name.starts_with("qc.") && is_unitary(name) && !matches!(split(name).1, "inv" | "pow") {
            check_distinct(m, op, &mut diags);
        }
    }
    diags
}

/// A modifier body holds exactly one unitary op (plus a `cf.yield` in the
/// functional dialect).
pub(crate) fn check_single_unitary_body(m: &Module, op: OpId, block: BlockId, diags: &mut Vec<Diagnostic>) {
    let body: Vec<OpId> = m
        .block_ops(block)
        .iter()
        .copied()
        .filter(|o| m.op_name(*o) != "cf.yield")
        .collect();
    let name = m.op_name(op);
    match body.as_slice() {
        [single] if is_unitary(m.op_name(*single)) => {}
        [single] => diags.push(Diagnostic::error(
            format!("{name} body holds non-unitary op `{}`", m.op_name(*single)),
            m.nearest_loc(*single),
        )),
        _ => diags.push(Diagnostic::error(
            format!("{name} body must hold exactly one unitary op, found {}", body.len()),
            m.nearest_loc(op),
        )),
    }
}

pub(crate) fn check_distinct(m: &Module, op: OpId, diags: &mut Vec<Diagnostic>) {
    let qs = qubit_operands(m, op);
    let mut seen = HashSet::new();
    if !qs.iter().all(|q| seen.insert(*q)) {
        diags.push(Diagnostic::error(
            format!("{} applied to the same qubit twice", m.op_name(op)),
            m.nearest_loc(op),
        ));
    }
}

fn check_gate_def(m: &Module, op: OpId, diags: &mut Vec<Diagnostic>) {
    if m.parent_block(op) != Some(m.body()) {
        diags.push(Diagnostic::error(
            "gate definitions must be top-level",
            m.nearest_loc(op),
        ));
    }
    let block = m.region_block(op, 0);
    for inner in m.walk_block(block) {
        let name = m.op_name(inner);
        if !is_unitary(name) && !name.starts_with("arith.") && name != "cf.yield" {
            diags.push(Diagnostic::error(
                format!("gate definition body holds non-unitary op `{name}`"),
                m.nearest_loc(inner),
            ));
        }
        for v in m.operands(inner) {
            if *m.value_type(*v) != Type::QubitRef {
                continue;
            }
            let is_param = matches!(m.value_def(*v), ValueDef::BlockArg { block: b, .. } if b == block);
            if !is_param {
                diags.push(Diagnostic::error(
                    "gate definition body uses a qubit that is not one of its arguments",
                    m.nearest_loc(inner),
                ));
            }
        }
    }
}

/// Callee exists and the call supplies its parameter and qubit counts.
pub(crate) fn check_call(m: &Module, op: OpId, diags: &mut Vec<Diagnostic>) {
    let callee = m.attr(op, "callee").and_then(Attribute::as_text).unwrap_or_default();
    let Some(def) = m.lookup_symbol(callee) else {
        diags.push(Diagnostic::error(
            format!("call to undefined gate `{callee}`"),
            m.nearest_loc(op),
        ));
        return;
    };
    if split(m.op_name(def)).0 != split(m.op_name(op)).0 {
        diags.push(Diagnostic::error(
            format!("call to `{callee}` crosses dialects"),
            m.nearest_loc(op),
        ));
        return;
    }
    let args = m.block_args(m.region_block(def, 0));
    let want_params = args.iter().filter(|a| *m.value_type(**a) == Type::Float64).count();
    let want_qubits = args.len() - want_params;
    let got_qubits = qubit_operands(m, op).len();
    let got_params = super::unitary::op_angles(m, op, &Default::default())
        .map(|a| a.len())
        .unwrap_or_else(|_| m.operands(op).len() - got_qubits);
    if want_params != got_params || want_qubits != got_qubits {
        diags.push(Diagnostic::error(
            format!(
                "gate `{callee}` takes {want_params} parameters and {want_qubits} qubits, call supplies {got_params} and {got_qubits}"
            ),
            m.nearest_loc(op),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::parse_ir;

    fn diags(body: &str) -> Vec<String> {
        let m = parse_ir(&format!(
            "qcir.module\n%a = qc.alloc : !qc.qubit\n%b = qc.alloc : !qc.qubit\n{body}qc.dealloc(%a)\nqc.dealloc(%b)\n"
        ))
        .unwrap();
        verify_hooks(&m).into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn well_formed_ops_pass() {
        assert!(diags("qc.ctrl(%a) { qc.x(%b) }\nqc.inv { qc.s(%a) }\n").is_empty());
    }

    #[test]
    fn repeated_qubits_are_rejected() {
        assert!(diags("qc.swap(%a, %a)\n")[0].contains("applied to the same qubit twice"));
        assert!(!diags("qc.ctrl(%a) { qc.x(%a) }\n").is_empty());
    }

    #[test]
    fn modifier_bodies_hold_one_unitary() {
        assert!(diags("qc.inv { qc.h(%a)\nqc.h(%b) }\n")[0].contains("exactly one unitary op, found 2"));
        assert!(diags("qc.inv { qc.reset(%a) }\n")[0].contains("non-unitary op `qc.reset`"));
    }

    #[test]
    fn calls_need_a_definition() {
        assert!(diags("qc.call_gate(%a) { callee = \"ghost\" }\n")[0].contains("undefined gate"));
    }
}
