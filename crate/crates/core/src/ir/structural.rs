//! Structural equality of modules: same ops in the same order with the same
//! attributes, types and dataflow. Value names and locations are ignored.

use std::collections::HashMap;

use super::{BlockId, Module, OpId, ValueId};

/// True if `a` and `b` are identical up to value renaming.
pub fn structurally_equal(a: &Module, b: &Module) -> bool {
    structural_diff(a, b).is_none()
}

/// Description of the first difference between two modules, if any.
pub fn structural_diff(a: &Module, b: &Module) -> Option<String> {
    let mut map = HashMap::new();
    compare_blocks(a, a.body(), b, b.body(), &mut map).err()
}

fn compare_blocks(
    a: &Module,
    ba: BlockId,
    b: &Module,
    bb: BlockId,
    map: &mut HashMap<ValueId, ValueId>,
) -> Result<(), String> {
    let (args_a, args_b) = (a.block_args(ba), b.block_args(bb));
    if args_a.len() != args_b.len() {
        return Err(format!("block argument count {} vs {}", args_a.len(), args_b.len()));
    }
    for (x, y) in args_a.iter().zip(args_b) {
        if a.value_type(*x) != b.value_type(*y) {
            return Err(format!(
                "block argument type {} vs {}",
                a.value_type(*x),
                b.value_type(*y)
            ));
        }
        map.insert(*x, *y);
    }
    let (ops_a, ops_b) = (a.block_ops(ba), b.block_ops(bb));
    for (i, (x, y)) in ops_a.iter().zip(ops_b).enumerate() {
        compare_ops(a, *x, b, *y, map).map_err(|e| format!("op #{i}: {e}"))?;
    }
    if ops_a.len() != ops_b.len() {
        return Err(format!("block length {} vs {}", ops_a.len(), ops_b.len()));
    }
    Ok(())
}

fn compare_ops(a: &Module, x: OpId, b: &Module, y: OpId, map: &mut HashMap<ValueId, ValueId>) -> Result<(), String> {
    let (ox, oy) = (a.op(x), b.op(y));
    if ox.name() != oy.name() {
        return Err(format!("`{}` vs `{}`", ox.name(), oy.name()));
    }
    if ox.attrs() != oy.attrs() {
        return Err(format!("attributes of `{}` differ", ox.name()));
    }
    if ox.operands().len() != oy.operands().len() {
        return Err(format!("operand count of `{}` differs", ox.name()));
    }
    for (i, (u, v)) in ox.operands().iter().zip(oy.operands()).enumerate() {
        if map.get(u) != Some(v) {
            return Err(format!("operand #{i} of `{}` differs", ox.name()));
        }
    }
    if ox.regions().len() != oy.regions().len() {
        return Err(format!("region count of `{}` differs", ox.name()));
    }
    for (ra, rb) in ox.regions().iter().zip(oy.regions()) {
        if ra.blocks.len() != rb.blocks.len() {
            return Err(format!("block count of `{}` differs", ox.name()));
        }
        for (ba, bb) in ra.blocks.iter().zip(&rb.blocks) {
            compare_blocks(a, *ba, b, *bb, map)?;
        }
    }
    if ox.results().len() != oy.results().len() {
        return Err(format!("result count of `{}` differs", ox.name()));
    }
    for (u, v) in ox.results().iter().zip(oy.results()) {
        if a.value_type(*u) != b.value_type(*v) {
            return Err(format!("result type of `{}` differs", ox.name()));
        }
        map.insert(*u, *v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::parse_ir;

    #[test]
    fn names_do_not_matter_but_attributes_do() {
        let a =
            parse_ir("qcir.module\n%q = qc.alloc : !qc.qubit\nqc.rx(%q) { angle = 0.5 }\nqc.dealloc(%q)\n").unwrap();
        let b =
            parse_ir("qcir.module\n%z = qc.alloc : !qc.qubit\nqc.rx(%z) { angle = 0.5 }\nqc.dealloc(%z)\n").unwrap();
        let c =
            parse_ir("qcir.module\n%q = qc.alloc : !qc.qubit\nqc.rx(%q) { angle = 0.25 }\nqc.dealloc(%q)\n").unwrap();
        assert!(structurally_equal(&a, &b));
        assert!(structural_diff(&a, &c).unwrap().contains("attributes"));
    }

    #[test]
    fn dataflow_and_length_matter() {
        let two = "qcir.module\n%a = qc.alloc : !qc.qubit\n%b = qc.alloc : !qc.qubit\n";
        let a = parse_ir(&format!("{two}qc.swap(%a, %b)\n")).unwrap();
        let b = parse_ir(&format!("{two}qc.swap(%b, %a)\n")).unwrap();
        let c = parse_ir(&format!("{two}qc.swap(%a, %b)\nqc.x(%a)\n")).unwrap();
        assert!(structural_diff(&a, &b).unwrap().contains("operand #0"));
        assert!(structural_diff(&a, &c).unwrap().contains("block length"));
    }
}
