//! Greedy pattern application.

use super::{BlockId, Diagnostic, IrError, Module, OpId};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;

/// A local rewrite anchored on one or more opcodes.
pub trait RewritePattern {
    fn name(&self) -> &'static str;

    /// Whether the pattern may fire on an op with this opcode.
    fn anchors(&self, opcode: &str) -> bool;

    /// Higher benefits are tried first.
    fn benefit(&self) -> u32 {
        1
    }

    /// Either leaves the IR untouched and returns `false`, or rewrites and
    /// returns `true`.
    fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyOutcome {
    pub changed: bool,
    /// False if the sweep limit was hit while patterns were still firing.
    pub converged: bool,
    pub sweeps: usize,
}

impl GreedyOutcome {
    pub fn warning(&self) -> Option<Diagnostic> {
        (!self.converged).then(|| {
            Diagnostic::warning(
                format!(
                    "pattern rewriting did not reach a fixpoint within {} sweeps",
                    self.sweeps
                ),
                None,
            )
        })
    }
}

/// Applies `patterns` to every op nested under `root` until a full sweep
/// changes nothing or `max_iterations` sweeps have run.
///
/// Each sweep visits ops outermost first, top to bottom. On each op the
/// highest-benefit matching pattern fires (ties go to registration order) and
/// the sweep moves on.
pub fn apply_patterns_greedy(
    m: &mut Module,
    root: BlockId,
    patterns: &[&dyn RewritePattern],
    max_iterations: usize,
) -> Result<GreedyOutcome, IrError> {
    let mut ordered: Vec<&dyn RewritePattern> = patterns.to_vec();
    ordered.sort_by_key(|p| std::cmp::Reverse(p.benefit()));
    let mut changed = false;
    let max_iterations = max_iterations.max(1);
    for sweep in 1..=max_iterations {
        let mut sweep_changed = false;
        for op in m.walk_block(root) {
            if !m.is_live(op) || !attached_under(m, op, root) {
                continue;
            }
            let name = m.op_name(op);
            for p in ordered.iter().filter(|p| p.anchors(name)) {
                if p.match_and_rewrite(m, op)? {
                    sweep_changed = true;
                    break;
                }
            }
        }
        changed |= sweep_changed;
        if !sweep_changed {
            return Ok(GreedyOutcome {
                changed,
                converged: true,
                sweeps: sweep,
            });
        }
    }
    Ok(GreedyOutcome {
        changed,
        converged: false,
        sweeps: max_iterations,
    })
}

fn attached_under(m: &Module, op: OpId, root: BlockId) -> bool {
    let mut cur = op;
    loop {
        let Some(block) = m.parent_block(cur) else {
            return false;
        };
        if block == root {
            return true;
        }
        match m.block_parent_op(block) {
            Some(p) if m.is_live(p) => cur = p,
            _ => return false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::parse_ir;

    /// Erases a `qc.x` whose next op is also a `qc.x` on the same qubit.
    struct DropXPairs;

    impl RewritePattern for DropXPairs {
        fn name(&self) -> &'static str {
            "drop-x-pairs"
        }
        fn anchors(&self, opcode: &str) -> bool {
            opcode == "qc.x"
        }
        fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError> {
            let block = m.parent_block(op).unwrap();
            let pos = m.position(op);
            let Some(&next) = m.block_ops(block).get(pos + 1) else {
                return Ok(false);
            };
            if m.op_name(next) != "qc.x" || m.operands(next) != m.operands(op) {
                return Ok(false);
            }
            m.erase_op(next)?;
            m.erase_op(op)?;
            Ok(true)
        }
    }

    /// Always fires.
    struct Restless;

    impl RewritePattern for Restless {
        fn name(&self) -> &'static str {
            "restless"
        }
        fn anchors(&self, opcode: &str) -> bool {
            opcode == "qc.h"
        }
        fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError> {
            let n = m.attr(op, "n").and_then(|a| a.as_int()).unwrap_or(0);
            m.set_attr(op, "n", crate::ir::Attribute::Int(n + 1));
            Ok(true)
        }
    }

    fn module(body: &str) -> Module {
        parse_ir(&format!(
            "qcir.module\n%q = qc.alloc : !qc.qubit\n{body}qc.dealloc(%q)\n"
        ))
        .unwrap()
    }

    #[test]
    fn reaches_a_fixpoint() {
        let mut m = module("qc.x(%q)\nqc.x(%q)\nqc.x(%q)\nqc.x(%q)\nqc.x(%q)\n");
        let body = m.body();
        let out = apply_patterns_greedy(&mut m, body, &[&DropXPairs], 10).unwrap();
        assert!(out.changed && out.converged);
        assert_eq!(m.walk().len(), 3);
        assert!(out.warning().is_none());
    }

    #[test]
    fn stops_at_the_sweep_limit() {
        let mut m = module("qc.h(%q)\n");
        let body = m.body();
        let out = apply_patterns_greedy(&mut m, body, &[&Restless], 4).unwrap();
        assert!(!out.converged);
        assert_eq!(out.sweeps, 4);
        assert!(out.warning().unwrap().message.contains("4 sweeps"));
    }
}
