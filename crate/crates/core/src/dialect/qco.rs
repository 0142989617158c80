//! Checks and queries specific to the functional dialect.

use std::fmt;

use super::qc::{check_call, check_distinct, check_single_unitary_body};
use super::registry::{is_unitary, split};
use crate::ir::{BlockId, Diagnostic, Location, Module, OpId, Type, ValueDef, ValueId};

/// Dialect-level verification of `qco.*` ops (structure of modifier bodies and
/// gate definitions). Linearity is checked separately by [`linearity_verify`].
pub fn verify_hooks(m: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for op in m.walk() {
        let name = m.op_name(op);
        match split(name) {
            ("qco", "ctrl" | "inv" | "pow") => {
                let block = m.region_block(op, 0);
                let args = m.block_args(block);
                let bad_args = args.iter().any(|a| *m.value_type(*a) != Type::QubitState);
                let targets = args.len();
                let ok_count = if split(name).1 == "ctrl" {
                    targets >= 1 && targets <= m.operands(op).len()
                } else {
                    targets == m.operands(op).len()
                };
                if bad_args || !ok_count {
                    diags.push(Diagnostic::error(
                        format!("{name} body arguments do not match its targets"),
                        m.nearest_loc(op),
                    ));
                }
                check_yield_count(m, op, block, targets, &mut diags);
                check_single_unitary_body(m, op, block, &mut diags);
            }
            ("qco", "gate_def") => {
                if m.parent_block(op) != Some(m.body()) {
                    diags.push(Diagnostic::error(
                        "gate definitions must be top-level",
                        m.nearest_loc(op),
                    ));
                }
                let block = m.region_block(op, 0);
                let states = m
                    .block_args(block)
                    .iter()
                    .filter(|a| *m.value_type(**a) == Type::QubitState)
                    .count();
                check_yield_count(m, op, block, states, &mut diags);
                for inner in m.walk_block(block) {
                    let n = m.op_name(inner);
                    if !is_unitary(n) && !n.starts_with("arith.") && n != "cf.yield" {
                        diags.push(Diagnostic::error(
                            format!("gate definition body holds non-unitary op `{n}`"),
                            m.nearest_loc(inner),
                        ));
                    }
                }
            }
            ("qco", "call_gate") => check_call(m, op, &mut diags),
            _ => {}
        }
        if name.starts_with("qco.") && is_unitary(name) {
            check_distinct(m, op, &mut diags);
        }
    }
    diags
}

fn check_yield_count(m: &Module, op: OpId, block: BlockId, count: usize, diags: &mut Vec<Diagnostic>) {
    let ok = m.terminator(block).is_some_and(|t| {
        m.op_name(t) == "cf.yield"
            && m.operands(t).len() == count
            && m.operands(t).iter().all(|v| *m.value_type(*v) == Type::QubitState)
    });
    if !ok {
        diags.push(Diagnostic::error(
            format!(
                "{} body must end with a cf.yield of {count} qubit states",
                m.op_name(op)
            ),
            m.nearest_loc(op),
        ));
    }
}

fn value_loc(m: &Module, v: ValueId) -> Option<Location> {
    match m.value_def(v) {
        ValueDef::Result { op, .. } => m.nearest_loc(op),
        ValueDef::BlockArg { block, .. } => m.block_parent_op(block).and_then(|op| m.nearest_loc(op)),
    }
}

fn describe(m: &Module, v: ValueId) -> String {
    match m.value_name(v) {
        Some(n) => format!("%{n}"),
        None => v.to_string(),
    }
}

/// Every qubit state has exactly one consumer. A state captured by a `cf.if`
/// must be consumed exactly once in each branch; capture by any other region
/// is rejected.
pub fn linearity_verify(m: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut check = |v: ValueId, block: BlockId| {
        if *m.value_type(v) == Type::QubitState {
            check_consumed_in(m, v, block, true, &mut diags);
        }
    };
    let mut stack = vec![m.body()];
    while let Some(block) = stack.pop() {
        for a in m.block_args(block) {
            check(*a, block);
        }
        for op in m.block_ops(block) {
            for r in m.results(*op) {
                check(*r, block);
            }
            for region in m.regions(*op) {
                stack.extend(region.blocks.iter().copied());
            }
        }
    }
    diags
}

fn check_consumed_in(m: &Module, v: ValueId, block: BlockId, home: bool, diags: &mut Vec<Diagnostic>) {
    let uses: Vec<(OpId, OpId)> = m
        .uses(v)
        .iter()
        .filter_map(|u| m.ancestor_in_block(u.op, block).map(|a| (u.op, a)))
        .collect();
    let direct = uses.iter().filter(|(u, a)| u == a).count();
    let mut anchors: Vec<OpId> = Vec::new();
    for (u, a) in &uses {
        if u != a && !anchors.contains(a) {
            anchors.push(*a);
        }
    }
    if direct + anchors.len() == 0 {
        let message = if home {
            format!("leaked state: {} is never consumed", describe(m, v))
        } else {
            format!("state {} is not threaded in branch of `cf.if`", describe(m, v))
        };
        diags.push(Diagnostic::error(message, value_loc(m, v)));
        return;
    }
    if direct + anchors.len() >= 2 {
        let (first, second) = (
            uses[0].1,
            uses.iter().map(|x| x.1).find(|a| *a != uses[0].1).unwrap_or(uses[1].0),
        );
        diags.push(Diagnostic::error(
            format!(
                "state reused: {} is consumed by both `{}` and `{}`",
                describe(m, v),
                m.op_name(first),
                m.op_name(second)
            ),
            m.nearest_loc(second),
        ));
        return;
    }
    if direct == 1 {
        return;
    }
    let anchor = anchors[0];
    if m.op_name(anchor) == "cf.if" {
        for i in 0..2 {
            check_consumed_in(m, v, m.region_block(anchor, i), false, diags);
        }
    } else {
        diags.push(Diagnostic::error(
            format!(
                "state {} is captured by the region of `{}`",
                describe(m, v),
                m.op_name(anchor)
            ),
            m.nearest_loc(uses[0].0),
        ));
    }
}

/// Why a [`defining_chain`] stopped before reaching an allocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ChainStop {
    /// The chain reached a block argument or the result of a region op.
    CrossesRegionBoundary(ValueId),
}

impl fmt::Display for ChainStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainStop::CrossesRegionBoundary(v) => write!(f, "chain crosses a region boundary at {v}"),
        }
    }
}

/// The operand that a qubit-state result of `op` continues, by position.
pub fn state_predecessor(m: &Module, op: OpId, result: usize) -> Option<ValueId> {
    let qubits: Vec<ValueId> = m
        .operands(op)
        .iter()
        .copied()
        .filter(|v| *m.value_type(*v) == Type::QubitState)
        .collect();
    match m.op_name(op) {
        "qco.alloc" => None,
        "qco.measure" | "qco.reset" => (result == 0).then(|| qubits[0]),
        n if n.starts_with("qco.") => qubits.get(result).copied(),
        _ => None,
    }
}

/// Gate sequence on one wire, from its allocation (or region boundary) to the
/// op defining `v`.
pub fn defining_chain(m: &Module, v: ValueId) -> (Vec<OpId>, Option<ChainStop>) {
    let mut chain = Vec::new();
    let mut cur = v;
    let stop = loop {
        match m.value_def(cur) {
            ValueDef::BlockArg { .. } => break Some(ChainStop::CrossesRegionBoundary(cur)),
            ValueDef::Result { op, index } => {
                if split(m.op_name(op)).0 == "cf" {
                    break Some(ChainStop::CrossesRegionBoundary(cur));
                }
                chain.push(op);
                match state_predecessor(m, op, index) {
                    Some(prev) => cur = prev,
                    None => break None,
                }
            }
        }
    };
    chain.reverse();
    (chain, stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::parse_ir;

    fn messages(text: &str) -> Vec<String> {
        let m = parse_ir(text).unwrap();
        linearity_verify(&m).into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn threaded_states_are_linear() {
        let m = parse_ir(
            "qcir.module\n%q0 = qco.alloc : !qco.qubit\n%q1 = qco.h(%q0) : !qco.qubit\n\
             %q2 = qco.x(%q1) : !qco.qubit\nqco.dealloc(%q2)\n",
        )
        .unwrap();
        assert!(linearity_verify(&m).is_empty());
        let x = m.walk()[2];
        assert_eq!(state_predecessor(&m, x, 0), Some(m.results(m.walk()[1])[0]));
        let (chain, stop) = defining_chain(&m, m.results(x)[0]);
        assert_eq!(chain.len(), 3);
        assert!(stop.is_none());
    }

    #[test]
    fn leaks_and_reuse_are_reported() {
        let leak = messages("qcir.module\n%q0 = qco.alloc : !qco.qubit\n%q1 = qco.h(%q0) : !qco.qubit\n");
        assert!(leak[0].starts_with("leaked state"), "{leak:?}");
        let reuse = messages(
            "qcir.module\n%q0 = qco.alloc : !qco.qubit\n%q1 = qco.h(%q0) : !qco.qubit\n\
             %q2 = qco.x(%q0) : !qco.qubit\nqco.dealloc(%q1)\nqco.dealloc(%q2)\n",
        );
        assert!(reuse[0].starts_with("state reused"), "{reuse:?}");
    }

    #[test]
    fn if_branches_must_each_consume() {
        let text = |else_yield: &str| {
            format!(
                "qcir.module\n%q0 = qco.alloc : !qco.qubit\n%q1 = qco.alloc : !qco.qubit\n\
                 %q2, %b = qco.measure(%q1) : !qco.qubit, i1\n\
                 %q3 = cf.if(%b) {{\n  %q4 = qco.x(%q0) : !qco.qubit\n  cf.yield(%q4)\n}} {{ cf.yield({else_yield}) }} : !qco.qubit\n\
                 qco.dealloc(%q3)\nqco.dealloc(%q2)\n"
            )
        };
        assert!(messages(&text("%q0")).is_empty());
        let m = parse_ir(&text("%q0")).unwrap();
        let if_op = m.walk().into_iter().find(|o| m.op_name(*o) == "cf.if").unwrap();
        let (_, stop) = defining_chain(&m, m.results(if_op)[0]);
        assert!(matches!(stop, Some(ChainStop::CrossesRegionBoundary(_))));
    }
}
