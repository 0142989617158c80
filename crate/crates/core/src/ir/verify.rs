//! Module verification: signatures, use lists, dominance, region structure and
//! the dialect hooks.

use std::collections::HashMap;

use super::{Diagnostic, Module, OpId, Type, Use, ValueDef, ValueId};
use crate::dialect::registry::{check_signature, is_terminator};
use crate::dialect::{qc, qco};

/// Checks every structural invariant. Never mutates the module; an empty list
/// means the module is valid.
pub fn verify(m: &Module) -> Vec<Diagnostic> {
    let mut diags = verify_structure(m);
    if diags.is_empty() {
        diags.extend(qc::verify_hooks(m));
        diags.extend(qco::verify_hooks(m));
        diags.extend(qco::linearity_verify(m));
    }
    diags
}

/// Generic checks only, without dialect hooks.
pub fn verify_structure(m: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let ops = m.walk();
    let mut scanned: HashMap<ValueId, Vec<Use>> = HashMap::new();
    for op in &ops {
        let op = *op;
        let loc = || m.nearest_loc(op);
        let o = m.op(op);
        let operand_types: Vec<Type> = o.operands().iter().map(|v| m.value_type(*v).clone()).collect();
        let result_types: Vec<Type> = o.results().iter().map(|v| m.value_type(*v).clone()).collect();
        if let Err(e) = check_signature(o.name(), &operand_types, &result_types, o.attrs(), o.regions().len()) {
            diags.push(Diagnostic::error(e.to_string(), loc()));
        }
        for (i, v) in o.operands().iter().enumerate() {
            scanned.entry(*v).or_default().push(Use { op, operand: i });
            if let Some(msg) = dominance_error(m, *v, op) {
                diags.push(Diagnostic::error(
                    format!("operand #{i} of `{}` {msg}", o.name()),
                    loc(),
                ));
            }
        }
        for region in o.regions() {
            if region.blocks.len() != 1 {
                diags.push(Diagnostic::error(
                    format!("region of `{}` must hold exactly one block", o.name()),
                    loc(),
                ));
            }
        }
        if is_terminator(o.name()) {
            let block = m.parent_block(op).expect("walked op has a parent");
            if m.terminator(block) != Some(op) || m.block_parent_op(block).is_none() {
                diags.push(Diagnostic::error(
                    format!("`{}` must terminate a nested region", o.name()),
                    loc(),
                ));
            }
        }
        check_control_flow(m, op, &mut diags);
    }
    for index in 0..m.value_count() {
        let v = ValueId(index as u32);
        let mut expected = scanned.remove(&v).unwrap_or_default();
        let mut actual: Vec<Use> = m.uses(v).iter().copied().filter(|u| m.is_live(u.op)).collect();
        if actual.len() != m.uses(v).len() {
            diags.push(Diagnostic::error(format!("use list of {v} names an erased op"), None));
            continue;
        }
        expected.sort_by_key(|u| (u.op, u.operand));
        actual.sort_by_key(|u| (u.op, u.operand));
        // ops that are live but detached are not walked; ignore their uses
        actual.retain(|u| m.walk_contains(u.op));
        if expected != actual {
            diags.push(Diagnostic::error(format!("use list of {v} is inconsistent"), None));
        }
    }
    diags
}

fn dominance_error(m: &Module, v: ValueId, user: OpId) -> Option<&'static str> {
    let def_block = match m.value_def(v) {
        ValueDef::Result { op, .. } => {
            if !m.is_live(op) {
                return Some("refers to a value of an erased op");
            }
            m.parent_block(op)?
        }
        ValueDef::BlockArg { block, .. } => block,
    };
    let Some(anchor) = m.ancestor_in_block(user, def_block) else {
        return Some("uses a value defined outside an enclosing region");
    };
    if let ValueDef::Result { op, .. } = m.value_def(v) {
        if op == anchor || m.position(op) >= m.position(anchor) {
            return Some("is used before its definition");
        }
    }
    None
}

fn types_of(m: &Module, vs: &[ValueId]) -> Vec<Type> {
    vs.iter().map(|v| m.value_type(*v).clone()).collect()
}

/// Terminators and block arguments of control-flow regions agree with the
/// op's results.
fn check_control_flow(m: &Module, op: OpId, diags: &mut Vec<Diagnostic>) {
    let name = m.op_name(op);
    let results = types_of(m, m.results(op));
    let mut fail = |msg: String| diags.push(Diagnostic::error(msg, m.nearest_loc(op)));
    let term = |b| m.terminator(b).map(|t| (m.op_name(t), types_of(m, m.operands(t))));
    match name {
        "cf.if" => {
            if m.regions(op).len() != 2 {
                return;
            }
            for i in 0..2 {
                let b = m.region_block(op, i);
                if !m.block_args(b).is_empty() {
                    fail("cf.if regions take no arguments".into());
                }
                match term(b) {
                    Some(("cf.yield", tys)) if tys == results => {}
                    _ => fail(format!(
                        "cf.if branch {i} must end with a cf.yield matching the results"
                    )),
                }
            }
        }
        "cf.for" => {
            if m.regions(op).len() != 1 {
                return;
            }
            let b = m.region_block(op, 0);
            let mut want_args = vec![Type::Index];
            want_args.extend(results.iter().cloned());
            if types_of(m, m.block_args(b)) != want_args {
                fail("cf.for body arguments must be the induction variable then the iteration values".into());
            }
            match term(b) {
                Some(("cf.yield", tys)) if tys == results => {}
                _ => fail("cf.for body must end with a cf.yield matching the results".into()),
            }
        }
        "cf.while" => {
            if m.regions(op).len() != 2 {
                return;
            }
            let (cond, body) = (m.region_block(op, 0), m.region_block(op, 1));
            if types_of(m, m.block_args(cond)) != results || types_of(m, m.block_args(body)) != results {
                fail("cf.while regions must take the iteration values as arguments".into());
            }
            match term(cond) {
                Some(("cf.condition", tys)) if tys.len() == results.len() + 1 && tys[1..] == results[..] => {}
                _ => {
                    fail("cf.while condition region must end with cf.condition forwarding the iteration values".into())
                }
            }
            match term(body) {
                Some(("cf.yield", tys)) if tys == results => {}
                _ => fail("cf.while body must end with a cf.yield matching the results".into()),
            }
        }
        _ => {}
    }
}

impl Module {
    /// True if `op` is attached somewhere below the top-level block.
    pub fn walk_contains(&self, op: OpId) -> bool {
        let mut cur = op;
        loop {
            let Some(block) = self.parent_block(cur) else {
                return false;
            };
            if block == self.body() {
                return true;
            }
            match self.block_parent_op(block) {
                Some(p) => cur = p,
                None => return false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::parse_ir;
    use crate::ir::{InsertPoint, OperationState};

    #[test]
    fn valid_modules_verify() {
        let m = parse_ir("qcir.module\n%q = qc.alloc : !qc.qubit\nqc.h(%q)\nqc.dealloc(%q)\n").unwrap();
        assert!(verify(&m).is_empty());
    }

    #[test]
    fn dominance_is_checked() {
        let mut m = parse_ir("qcir.module\n%q = qc.alloc : !qc.qubit\nqc.h(%q)\n").unwrap();
        let ops = m.block_ops(m.body()).to_vec();
        m.move_op(ops[1], InsertPoint::Start(m.body()));
        let diags = verify(&m);
        assert!(
            diags.iter().any(|d| d.message.contains("operand #0 of `qc.h`")),
            "{diags:?}"
        );
    }

    #[test]
    fn terminators_must_end_regions() {
        let mut m = Module::new();
        let body = m.body();
        m.build_op(InsertPoint::End(body), OperationState::new("cf.yield"))
            .unwrap();
        assert!(verify(&m)
            .iter()
            .any(|d| d.message.contains("must terminate a nested region")));
    }
}
