//! Optimization passes.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use super::{dialect_name, Pass, PassError, PassOutcome};
use crate::dialect::registry::{gate_kind, is_modifier, is_unitary, split};
use crate::dialect::unitary::{
    angle_is_identity, ctrl_polarities, descriptors_equivalent, inverse_descriptor, modifier_body_op,
    unitary_descriptor,
};
use crate::dialect::{module_dialect, DialectKind, GateKind};
use crate::ir::rewrite::{apply_patterns_greedy, RewritePattern};
use crate::ir::{Attribute, Diagnostic, InsertPoint, IrError, Module, OpId, OperationState, Region, Type, ValueId};

pub const DEFAULT_UNROLL_LIMIT: u64 = 64;

fn require(m: &Module, expected: &'static str) -> Result<(), PassError> {
    let k = module_dialect(m);
    let ok = match expected {
        "qc" => matches!(k, DialectKind::Qc | DialectKind::Classical),
        _ => matches!(k, DialectKind::Qco | DialectKind::Classical),
    };
    if ok {
        Ok(())
    } else {
        Err(PassError::UnknownDialectInput {
            expected,
            found: dialect_name(k),
        })
    }
}

fn run_greedy(
    m: &mut Module,
    patterns: &[&dyn RewritePattern],
    max_iterations: usize,
) -> Result<PassOutcome, PassError> {
    let body = m.body();
    let outcome = apply_patterns_greedy(m, body, patterns, max_iterations)?;
    Ok(PassOutcome {
        changed: outcome.changed,
        diagnostics: outcome.warning().into_iter().collect(),
        route: None,
    })
}

fn is_state(m: &Module, v: ValueId) -> bool {
    *m.value_type(v) == Type::QubitState
}

fn state_operands(m: &Module, op: OpId) -> Vec<ValueId> {
    m.operands(op).iter().copied().filter(|v| is_state(m, *v)).collect()
}

/// The unitary op whose results are exactly the state operands of `op`, in
/// order, if there is one.
fn sole_predecessor(m: &Module, op: OpId) -> Option<OpId> {
    let ins = state_operands(m, op);
    let first = m.defining_op(*ins.first()?)?;
    // A state captured by both branches of an `if` has one use per branch.
    let aligned = is_unitary(m.op_name(first))
        && m.parent_block(first) == m.parent_block(op)
        && m.results(first).iter().all(|r| m.uses(*r).len() == 1)
        && m.results(first).len() == ins.len()
        && ins.iter().zip(m.results(first)).all(|(a, b)| a == b);
    aligned.then_some(first)
}

/// Replaces the results of `op` by `values` and erases it.
fn replace_op(m: &mut Module, op: OpId, values: &[ValueId]) -> Result<(), IrError> {
    for (r, v) in m.results(op).to_vec().into_iter().zip(values) {
        m.replace_all_uses(r, *v)?;
    }
    m.erase_op(op)
}

fn bool_constant(m: &Module, v: ValueId) -> Option<bool> {
    let d = m.defining_op(v)?;
    (m.op_name(d) == "arith.constant").then(|| m.attr(d, "value").and_then(Attribute::as_bool))?
}

fn int_constant(m: &Module, v: ValueId) -> Option<i64> {
    let d = m.defining_op(v)?;
    (m.op_name(d) == "arith.constant").then(|| m.attr(d, "value").and_then(Attribute::as_int))?
}

// ---- remove-dead-alloc -------------------------------------------------------

/// Erases qubits that are allocated and released without being used.
pub struct RemoveDeadAlloc;

impl Pass for RemoveDeadAlloc {
    fn name(&self) -> &'static str {
        "remove-dead-alloc"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        require(m, "qc")?;
        let mut changed = false;
        for op in m.walk() {
            if !m.is_live(op) {
                continue;
            }
            match m.op_name(op) {
                "qc.alloc" => {
                    if let Some(deallocs) = dead_ref(m, m.results(op)[0]) {
                        for d in deallocs {
                            m.erase_op(d)?;
                        }
                        m.erase_op(op)?;
                        changed = true;
                    }
                }
                "qc.alloc_reg" => {
                    let reg = m.results(op)[0];
                    let extracts: Vec<OpId> = m.uses(reg).iter().map(|u| u.op).collect();
                    if extracts.iter().any(|e| m.op_name(*e) != "qc.extract") {
                        continue;
                    }
                    let mut doomed = Vec::new();
                    let all_dead = extracts.iter().all(|e| match dead_ref(m, m.results(*e)[0]) {
                        Some(d) => {
                            doomed.extend(d);
                            true
                        }
                        None => false,
                    });
                    if all_dead {
                        for d in doomed.into_iter().chain(extracts) {
                            m.erase_op(d)?;
                        }
                        m.erase_op(op)?;
                        changed = true;
                    }
                }
                _ => {}
            }
        }
        Ok(PassOutcome::changed(changed))
    }
}

/// The deallocs of `r` if they are its only use (at most one).
fn dead_ref(m: &Module, r: ValueId) -> Option<Vec<OpId>> {
    let uses = m.uses(r);
    match uses {
        [] => Some(Vec::new()),
        [u] if m.op_name(u.op) == "qc.dealloc" => Some(vec![u.op]),
        _ => None,
    }
}

// ---- cancel-inverses ---------------------------------------------------------

/// Removes adjacent pairs `g1; g2` on the same wires with `g2 = g1⁻¹`.
pub struct CancelInverses {
    pub max_iterations: usize,
}

struct CancelPattern;

impl RewritePattern for CancelPattern {
    fn name(&self) -> &'static str {
        "cancel-inverse-pair"
    }

    fn anchors(&self, opcode: &str) -> bool {
        opcode.starts_with("qco.") && is_unitary(opcode)
    }

    fn match_and_rewrite(&self, m: &mut Module, g2: OpId) -> Result<bool, IrError> {
        let Some(g1) = sole_predecessor(m, g2) else {
            return Ok(false);
        };
        if m.results(g2).len() != m.results(g1).len() {
            return Ok(false);
        }
        let (Ok(d1), Ok(d2)) = (unitary_descriptor(m, g1), unitary_descriptor(m, g2)) else {
            return Ok(false);
        };
        if d1.num_qubits() != m.results(g1).len() || !descriptors_equivalent(&d2, &inverse_descriptor(&d1)) {
            return Ok(false);
        }
        let inputs = state_operands(m, g1);
        replace_op(m, g2, &inputs)?;
        m.erase_op(g1)?;
        Ok(true)
    }
}

impl Pass for CancelInverses {
    fn name(&self) -> &'static str {
        "cancel-inverses"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        require(m, "qco")?;
        run_greedy(m, &[&CancelPattern], self.max_iterations)
    }
}

// ---- merge-rotations ---------------------------------------------------------

/// Fuses consecutive rotations of the same kind on the same wires.
pub struct MergeRotations {
    pub max_iterations: usize,
}

struct MergePattern;

/// The innermost op of a (possibly nested) modifier.
fn innermost(m: &Module, mut op: OpId) -> Option<OpId> {
    while is_modifier(m.op_name(op)) {
        op = modifier_body_op(m, op)?;
    }
    Some(op)
}

impl RewritePattern for MergePattern {
    fn name(&self) -> &'static str {
        "merge-rotations"
    }

    fn anchors(&self, opcode: &str) -> bool {
        opcode.starts_with("qco.") && is_unitary(opcode)
    }

    fn match_and_rewrite(&self, m: &mut Module, g2: OpId) -> Result<bool, IrError> {
        let Some(g1) = sole_predecessor(m, g2) else {
            return Ok(false);
        };
        let (Ok(d1), Ok(d2)) = (unitary_descriptor(m, g1), unitary_descriptor(m, g2)) else {
            return Ok(false);
        };
        let Some(kind) = d1
            .kind()
            .filter(|k| matches!(k, GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::P))
        else {
            return Ok(false);
        };
        if d2.kind() != Some(kind) || d1.modifiers != d2.modifiers || m.results(g1).len() != m.results(g2).len() {
            return Ok(false);
        }
        let (Some(i1), Some(i2)) = (innermost(m, g1), innermost(m, g2)) else {
            return Ok(false);
        };
        let (Some(a), Some(b)) = (
            m.attr(i1, "angle").and_then(Attribute::as_f64),
            m.attr(i2, "angle").and_then(Attribute::as_f64),
        ) else {
            return Ok(false);
        };
        let sum = a + b;
        if angle_is_identity(kind, sum, d1.is_controlled()) {
            let inputs = state_operands(m, g1);
            replace_op(m, g2, &inputs)?;
            m.erase_op(g1)?;
        } else {
            m.set_attr(i1, "angle", Attribute::Float(sum));
            let outs = m.results(g1).to_vec();
            replace_op(m, g2, &outs)?;
        }
        Ok(true)
    }
}

impl Pass for MergeRotations {
    fn name(&self) -> &'static str {
        "merge-rotations"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        require(m, "qco")?;
        run_greedy(m, &[&MergePattern], self.max_iterations)
    }
}

// ---- canonicalize-modifiers --------------------------------------------------

/// Normalizes modifier stacks: folds inverses into named gates, drops trivial
/// powers and controls, and merges nested controls.
pub struct CanonicalizeModifiers {
    pub max_iterations: usize,
}

struct ModifierPattern;

fn functional(m: &Module, op: OpId) -> bool {
    split(m.op_name(op)).0 == "qco"
}

/// Number of control operands of a modifier.
fn num_controls(m: &Module, op: OpId) -> usize {
    match split(m.op_name(op)) {
        ("qc", "ctrl") => m.operands(op).len(),
        ("qco", "ctrl") => m.operands(op).len() - m.block_args(m.region_block(op, 0)).len(),
        _ => 0,
    }
}

/// Replaces a control-free modifier by its body op.
fn hoist_body(m: &mut Module, op: OpId) -> Result<OpId, IrError> {
    let body = modifier_body_op(m, op).expect("modifier without body op");
    m.move_op(body, InsertPoint::Before(op));
    if functional(m, op) {
        let block = m.region_block(op, 0);
        let args = m.block_args(block).to_vec();
        let outer = m.operands(op).to_vec();
        for i in 0..m.operands(body).len() {
            if let Some(k) = args.iter().position(|a| *a == m.operands(body)[i]) {
                m.set_operand(body, i, outer[k]);
            }
        }
        let outs = m.results(body).to_vec();
        for (r, v) in m.results(op).to_vec().into_iter().zip(outs) {
            m.replace_all_uses(r, v)?;
        }
    }
    m.erase_op(op)?;
    Ok(body)
}

/// Rebuilds `op` under a different opcode and attributes.
fn replace_with(m: &mut Module, op: OpId, name: &str, attrs: crate::ir::AttrMap) -> Result<OpId, IrError> {
    let st = OperationState::new(name)
        .operands(m.operands(op).to_vec())
        .results(
            m.results(op)
                .iter()
                .map(|r| m.value_type(*r).clone())
                .collect::<Vec<_>>(),
        )
        .attrs(attrs)
        .loc(m.op(op).loc().cloned());
    let new = m.build_op(InsertPoint::Before(op), st)?;
    let outs = m.results(new).to_vec();
    replace_op(m, op, &outs)?;
    Ok(new)
}

/// Wraps `op` in a new control-free modifier.
fn wrap_in(m: &mut Module, op: OpId, mnemonic: &str, attrs: crate::ir::AttrMap) -> Result<OpId, IrError> {
    let dialect = split(m.op_name(op)).0;
    let name = format!("{dialect}.{mnemonic}");
    if dialect == "qc" {
        let block = m.create_block(&[]);
        let w = m.build_op(
            InsertPoint::Before(op),
            OperationState::new(name).attrs(attrs).region(Region::new(block)),
        )?;
        m.move_op(op, InsertPoint::End(block));
        return Ok(w);
    }
    let ins = state_operands(m, op);
    let outs = m.results(op).to_vec();
    let block = m.create_block(&vec![Type::QubitState; ins.len()]);
    let w = m.build_op(
        InsertPoint::Before(op),
        OperationState::new(name)
            .operands(ins.clone())
            .results(vec![Type::QubitState; ins.len()])
            .attrs(attrs)
            .region(Region::new(block)),
    )?;
    m.move_op(op, InsertPoint::End(block));
    let args = m.block_args(block).to_vec();
    for i in 0..m.operands(op).len() {
        if let Some(k) = ins.iter().position(|v| *v == m.operands(op)[i]) {
            m.set_operand(op, i, args[k]);
        }
    }
    for (o, n) in outs.iter().zip(m.results(w).to_vec()) {
        m.replace_all_uses(*o, n)?;
    }
    m.build_op(InsertPoint::End(block), OperationState::new("cf.yield").operands(outs))?;
    Ok(w)
}

fn inverted_gate(m: &Module, op: OpId) -> Option<(String, crate::ir::AttrMap)> {
    let kind = gate_kind(m.op_name(op))?;
    let dialect = split(m.op_name(op)).0;
    let mut attrs = m.op(op).attrs().clone();
    let inv = if let Some(k) = kind.named_inverse() {
        k
    } else if kind.is_rotation() {
        let a = m.attr(op, "angle")?.as_f64()?;
        attrs.insert("angle".into(), Attribute::Float(-a));
        kind
    } else {
        return None;
    };
    Some((format!("{dialect}.{}", inv.mnemonic()), attrs))
}

impl RewritePattern for ModifierPattern {
    fn name(&self) -> &'static str {
        "canonicalize-modifiers"
    }

    fn anchors(&self, opcode: &str) -> bool {
        is_modifier(opcode)
    }

    fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError> {
        let Some(body) = modifier_body_op(m, op) else {
            return Ok(false);
        };
        let body_name = m.op_name(body);
        match split(m.op_name(op)).1 {
            "inv" => {
                if split(body_name).1 == "inv" {
                    let inner = hoist_body(m, op)?;
                    hoist_body(m, inner)?;
                    return Ok(true);
                }
                if let Some((name, attrs)) = inverted_gate(m, body) {
                    let b = hoist_body(m, op)?;
                    replace_with(m, b, &name, attrs)?;
                    return Ok(true);
                }
                Ok(false)
            }
            "pow" => {
                let k = m.attr(op, "exponent").and_then(Attribute::as_int).unwrap_or(1);
                match k {
                    1 => {
                        hoist_body(m, op)?;
                    }
                    0 => {
                        let ins = state_operands(m, op);
                        replace_op(m, op, &ins)?;
                    }
                    k if k < 0 => {
                        m.set_attr(op, "exponent", Attribute::Int(-k));
                        wrap_in(m, body, "inv", Default::default())?;
                    }
                    _ => return Ok(false),
                }
                Ok(true)
            }
            _ => {
                if num_controls(m, op) == 0 {
                    hoist_body(m, op)?;
                    return Ok(true);
                }
                if split(body_name).1 == "ctrl" {
                    merge_controls(m, op, body)?;
                    return Ok(true);
                }
                Ok(false)
            }
        }
    }
}

/// `ctrl(a){ctrl(b){U}}` → `ctrl(a, b){U}`.
fn merge_controls(m: &mut Module, outer: OpId, inner: OpId) -> Result<(), IrError> {
    let (no, ni) = (num_controls(m, outer), num_controls(m, inner));
    let mut pol = ctrl_polarities(m, outer, no);
    pol.extend(ctrl_polarities(m, inner, ni));
    let u = modifier_body_op(m, inner).expect("ctrl without body op");
    let mut attrs = m.op(outer).attrs().clone();
    attrs.remove("polarities");
    if pol.iter().any(|p| !p) {
        attrs.insert(
            "polarities".into(),
            Attribute::Array(pol.into_iter().map(Attribute::Bool).collect()),
        );
    }
    let dialect = split(m.op_name(outer)).0;
    if dialect == "qc" {
        let block = m.create_block(&[]);
        let operands: Vec<ValueId> = m.operands(outer).iter().chain(m.operands(inner)).copied().collect();
        let new = m.build_op(
            InsertPoint::Before(outer),
            OperationState::new("qc.ctrl")
                .operands(operands)
                .attrs(attrs)
                .region(Region::new(block))
                .loc(m.op(outer).loc().cloned()),
        )?;
        let _ = new;
        m.move_op(u, InsertPoint::End(block));
        return m.erase_op(outer);
    }
    let targets = m.block_args(m.region_block(inner, 0)).to_vec();
    let block = m.create_block(&vec![Type::QubitState; targets.len()]);
    let new = m.build_op(
        InsertPoint::Before(outer),
        OperationState::new("qco.ctrl")
            .operands(m.operands(outer).to_vec())
            .results(vec![Type::QubitState; m.results(outer).len()])
            .attrs(attrs)
            .region(Region::new(block))
            .loc(m.op(outer).loc().cloned()),
    )?;
    m.move_op(u, InsertPoint::End(block));
    let args = m.block_args(block).to_vec();
    for i in 0..m.operands(u).len() {
        if let Some(k) = targets.iter().position(|t| *t == m.operands(u)[i]) {
            m.set_operand(u, i, args[k]);
        }
    }
    m.build_op(
        InsertPoint::End(block),
        OperationState::new("cf.yield").operands(m.results(u).to_vec()),
    )?;
    let outs = m.results(new).to_vec();
    // The inner yield still refers to `u`'s results; drop the old op tree
    // only after rerouting its external uses.
    for (r, v) in m.results(outer).to_vec().into_iter().zip(outs) {
        m.replace_all_uses(r, v)?;
    }
    let inner_yield = m
        .terminator(m.region_block(inner, 0))
        .expect("qco.ctrl body without yield");
    m.erase_op(inner_yield)?;
    m.erase_op(outer)
}

impl Pass for CanonicalizeModifiers {
    fn name(&self) -> &'static str {
        "canonicalize-modifiers"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        run_greedy(m, &[&ModifierPattern], self.max_iterations)
    }
}

// ---- simplify-control-flow ---------------------------------------------------

/// Folds constant conditions, unrolls short constant loops and erases empty
/// control flow.
pub struct SimplifyControlFlow {
    pub unroll_limit: u64,
}

const CF_SWEEPS: usize = 100;

struct ConstantIf;

impl RewritePattern for ConstantIf {
    fn name(&self) -> &'static str {
        "fold-constant-if"
    }

    fn anchors(&self, opcode: &str) -> bool {
        opcode == "cf.if"
    }

    fn benefit(&self) -> u32 {
        2
    }

    fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError> {
        let Some(c) = bool_constant(m, m.operands(op)[0]) else {
            return Ok(false);
        };
        inline_region(m, op, if c { 0 } else { 1 })?;
        Ok(true)
    }
}

/// Moves the body of a region of `op` before it, forwarding the yielded
/// values to the op's results, and erases `op`.
fn inline_region(m: &mut Module, op: OpId, index: usize) -> Result<(), IrError> {
    let block = m.region_block(op, index);
    let term = m.terminator(block).filter(|t| m.op_name(*t) == "cf.yield");
    let yielded = term.map(|t| m.operands(t).to_vec()).unwrap_or_default();
    for inner in m.block_ops(block).to_vec() {
        if Some(inner) != term {
            m.move_op(inner, InsertPoint::Before(op));
        }
    }
    for (r, v) in m.results(op).to_vec().into_iter().zip(yielded) {
        m.replace_all_uses(r, v)?;
    }
    m.erase_op(op)
}

fn only_terminator(m: &Module, op: OpId, index: usize) -> Option<Vec<ValueId>> {
    let block = m.region_block(op, index);
    match m.block_ops(block) {
        [t] if m.op_name(*t) == "cf.yield" => Some(m.operands(*t).to_vec()),
        [] => Some(Vec::new()),
        _ => None,
    }
}

struct EmptyControlFlow;

impl RewritePattern for EmptyControlFlow {
    fn name(&self) -> &'static str {
        "erase-empty-control-flow"
    }

    fn anchors(&self, opcode: &str) -> bool {
        matches!(opcode, "cf.if" | "cf.for")
    }

    fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError> {
        let forwarded = if m.op_name(op) == "cf.if" {
            match (only_terminator(m, op, 0), only_terminator(m, op, 1)) {
                (Some(a), Some(b)) if a == b => a,
                _ => return Ok(false),
            }
        } else {
            let Some(yielded) = only_terminator(m, op, 0) else {
                return Ok(false);
            };
            let iters = &m.block_args(m.region_block(op, 0))[1..];
            if yielded != iters {
                return Ok(false);
            }
            m.operands(op)[3..].to_vec()
        };
        if m.results(op).len() != forwarded.len() {
            return Ok(false);
        }
        replace_op(m, op, &forwarded)?;
        Ok(true)
    }
}

struct Unroll {
    limit: u64,
    warned: RefCell<HashSet<OpId>>,
    warnings: RefCell<Vec<Diagnostic>>,
}

/// Constant trip count of a `cf.for` with positive constant step.
pub fn trip_count(m: &Module, op: OpId) -> Option<u64> {
    let ops = m.operands(op);
    let (lb, ub, step) = (
        int_constant(m, ops[0])?,
        int_constant(m, ops[1])?,
        int_constant(m, ops[2])?,
    );
    if step <= 0 {
        return None;
    }
    Some(if ub <= lb {
        0
    } else {
        ((ub - lb) as u64).div_ceil(step as u64)
    })
}

impl RewritePattern for Unroll {
    fn name(&self) -> &'static str {
        "unroll-constant-for"
    }

    fn anchors(&self, opcode: &str) -> bool {
        opcode == "cf.for"
    }

    fn match_and_rewrite(&self, m: &mut Module, op: OpId) -> Result<bool, IrError> {
        let Some(trips) = trip_count(m, op) else {
            return Ok(false);
        };
        if trips > self.limit {
            if self.warned.borrow_mut().insert(op) {
                self.warnings.borrow_mut().push(Diagnostic::warning(
                    format!(
                        "loop not unrolled: trip count {trips} exceeds the unroll limit {}",
                        self.limit
                    ),
                    m.nearest_loc(op),
                ));
            }
            return Ok(false);
        }
        let lb = int_constant(m, m.operands(op)[0]).unwrap_or(0);
        let step = int_constant(m, m.operands(op)[2]).unwrap_or(1);
        let block = m.region_block(op, 0);
        let args = m.block_args(block).to_vec();
        let body: Vec<OpId> = m.block_ops(block).to_vec();
        let term = m.terminator(block).filter(|t| m.op_name(*t) == "cf.yield");
        let mut current: Vec<ValueId> = m.operands(op)[3..].to_vec();
        for k in 0..trips {
            let mut map: HashMap<ValueId, ValueId> = HashMap::new();
            if m.has_uses(args[0]) {
                let c = m.build_op(
                    InsertPoint::Before(op),
                    OperationState::new("arith.constant")
                        .attr("value", Attribute::Int(lb + step * k as i64))
                        .result(Type::Index),
                )?;
                map.insert(args[0], m.results(c)[0]);
            }
            for (a, v) in args[1..].iter().zip(&current) {
                map.insert(*a, *v);
            }
            for inner in &body {
                if Some(*inner) != term {
                    m.clone_op(*inner, InsertPoint::Before(op), &mut map)?;
                }
            }
            if let Some(t) = term {
                current = m
                    .operands(t)
                    .iter()
                    .map(|v| map.get(v).copied().unwrap_or(*v))
                    .collect();
            }
        }
        replace_op(m, op, &current)?;
        Ok(true)
    }
}

impl Pass for SimplifyControlFlow {
    fn name(&self) -> &'static str {
        "simplify-control-flow"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        let unroll = Unroll {
            limit: self.unroll_limit,
            warned: RefCell::default(),
            warnings: RefCell::default(),
        };
        let mut outcome = run_greedy(m, &[&ConstantIf, &EmptyControlFlow, &unroll], CF_SWEEPS)?;
        outcome.diagnostics.extend(unroll.warnings.into_inner());
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::print_ir;
    use crate::frontend::import_qasm;
    use crate::ir::verify::verify;
    use crate::transforms::convert::linearize;

    fn qc(src: &str) -> Module {
        import_qasm(src, "t.qasm").unwrap()
    }

    fn qco(src: &str) -> Module {
        linearize(&qc(src)).unwrap()
    }

    fn gate_count(m: &Module) -> usize {
        m.walk()
            .into_iter()
            .filter(|o| is_unitary(m.op_name(*o)) && m.parent_op(*o).is_none_or(|p| !is_modifier(m.op_name(p))))
            .count()
    }

    fn run(pass: &dyn Pass, m: &mut Module) -> PassOutcome {
        let out = pass.run(m).unwrap();
        assert!(verify(m).is_empty(), "{:?}\n{}", verify(m), print_ir(m));
        out
    }

    const CANCEL: CancelInverses = CancelInverses { max_iterations: 10 };
    const MERGE: MergeRotations = MergeRotations { max_iterations: 10 };
    const CANON: CanonicalizeModifiers = CanonicalizeModifiers { max_iterations: 10 };
    const SIMPLIFY: SimplifyControlFlow = SimplifyControlFlow { unroll_limit: 64 };

    #[test]
    fn dead_alloc_removed() {
        let mut m = qc("OPENQASM 3; qubit q;");
        assert!(run(&RemoveDeadAlloc, &mut m).changed);
        assert!(m.is_empty());
        let mut m = qc("OPENQASM 3; qubit q; h q;");
        assert!(!run(&RemoveDeadAlloc, &mut m).changed);
    }

    #[test]
    fn partly_used_register_kept() {
        let mut m = qc("OPENQASM 3; qubit[2] q; h q[1];");
        let before = print_ir(&m);
        assert!(!run(&RemoveDeadAlloc, &mut m).changed);
        assert_eq!(print_ir(&m), before);
        let mut m = qc("OPENQASM 3; qubit[2] q;");
        assert!(run(&RemoveDeadAlloc, &mut m).changed);
        assert!(m.is_empty());
    }

    #[test]
    fn hadamard_pairs_cancel() {
        let mut m = qco("OPENQASM 3; qubit q; h q; h q;");
        assert!(run(&CANCEL, &mut m).changed);
        assert_eq!(gate_count(&m), 0);
        let mut m = qco("OPENQASM 3; qubit q; h q; x q; h q;");
        assert!(!run(&CANCEL, &mut m).changed);
        assert_eq!(gate_count(&m), 3);
        let mut m = qco("OPENQASM 3; qubit q; h q; h q; h q; h q;");
        run(&CANCEL, &mut m);
        assert_eq!(gate_count(&m), 0);
        assert!(!run(&CANCEL, &mut m).changed);
    }

    #[test]
    fn inverse_angles_and_named_inverses_cancel() {
        let mut m = qco("OPENQASM 3; qubit q; rz(0.3) q; rz(-0.3) q; s q; sdg q; t q; inv @ t q;");
        run(&CANCEL, &mut m);
        assert_eq!(gate_count(&m), 0);
    }

    #[test]
    fn swapped_cx_does_not_cancel() {
        let mut m = qco("OPENQASM 3; qubit a; qubit b; cx a, b; cx b, a;");
        assert!(!run(&CANCEL, &mut m).changed);
        let mut m = qco("OPENQASM 3; qubit a; qubit b; cx a, b; cx a, b;");
        assert!(run(&CANCEL, &mut m).changed);
        assert_eq!(gate_count(&m), 0);
        let mut m = qco("OPENQASM 3; qubit a; qubit b; cx a, b; negctrl @ x a, b;");
        assert!(!run(&CANCEL, &mut m).changed);
    }

    #[test]
    fn rotations_merge() {
        let mut m = qco("OPENQASM 3; qubit q; rz(0.2) q; rz(0.3) q;");
        assert!(run(&MERGE, &mut m).changed);
        let text = print_ir(&m);
        assert!(text.contains("qco.rz(%q_0) { angle = 0.5 }"), "{text}");
        let mut m = qco("OPENQASM 3; qubit q; rz(pi) q; rz(pi) q;");
        run(&MERGE, &mut m);
        assert_eq!(gate_count(&m), 0);
        let mut m = qco("OPENQASM 3; qubit q; rx(0.1) q; rz(0.1) q;");
        assert!(!run(&MERGE, &mut m).changed);
        let mut m = qco("OPENQASM 3; qubit a; qubit b; ctrl @ rz(pi) a, b; ctrl @ rz(pi) a, b;");
        run(&MERGE, &mut m);
        assert_eq!(gate_count(&m), 1, "controlled rz(2π) is not the identity");
    }

    #[test]
    fn modifiers_canonicalize_in_both_dialects() {
        for functional in [false, true] {
            let prep = |s: &str| if functional { qco(s) } else { qc(s) };
            let mut m = prep("OPENQASM 3; qubit q; inv @ h q; inv @ inv @ x q; inv @ s q; pow(1) @ y q;");
            run(&CANON, &mut m);
            let names: Vec<&str> = m.walk().into_iter().map(|o| split(m.op_name(o)).1).collect();
            assert!(!names.contains(&"inv") && !names.contains(&"pow"), "{names:?}");
            assert!(names.contains(&"sdg"));

            let mut m = prep("OPENQASM 3; qubit q; pow(0) @ x q;");
            run(&CANON, &mut m);
            assert_eq!(gate_count(&m), 0);

            let mut m = prep("OPENQASM 3; qubit q; pow(-2) @ sx q;");
            run(&CANON, &mut m);
            let text = print_ir(&m);
            assert!(text.contains("exponent = 2") && text.contains(".sxdg"), "{text}");

            let mut m = prep("OPENQASM 3; qubit[3] q; ctrl @ negctrl @ x q[0], q[1], q[2];");
            let before = crate::sim::circuit_unitary(&crate::sim::as_imperative(&m).unwrap(), 3).unwrap();
            run(&CANON, &mut m);
            let ctrls = m
                .walk()
                .into_iter()
                .filter(|o| split(m.op_name(*o)).1 == "ctrl")
                .count();
            assert_eq!(ctrls, 1, "{}", print_ir(&m));
            assert!(print_ir(&m).contains("polarities = [true, false]"));
            let after = crate::sim::circuit_unitary(&crate::sim::as_imperative(&m).unwrap(), 3).unwrap();
            assert!((before - after).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_loops_unroll() {
        let mut m = qc("OPENQASM 3; qubit q; for uint i in [0:3] { x q; }");
        assert!(run(&SIMPLIFY, &mut m).changed);
        let xs = m.walk().into_iter().filter(|o| m.op_name(*o) == "qc.x").count();
        assert_eq!(xs, 3);
        let mut f = linearize(&m).unwrap();
        run(&CANCEL, &mut f);
        assert_eq!(gate_count(&f), 1);
    }

    #[test]
    fn unrolling_in_functional_form_threads_states() {
        let mut m = qco("OPENQASM 3; qubit q; bit c; for uint i in [0:2] { h q; c = measure q; } if (c) { x q; }");
        run(&SIMPLIFY, &mut m);
        assert!(!m.walk().into_iter().any(|o| m.op_name(o) == "cf.for"));
    }

    #[test]
    fn trip_count_limit_warns() {
        let mut m = qc("OPENQASM 3; qubit q; for uint i in [0:100] { x q; }");
        let out = run(&SIMPLIFY, &mut m);
        assert!(!out.changed);
        assert_eq!(out.diagnostics.len(), 1);
        assert!(!out.diagnostics[0].is_error());
        let out = run(&SimplifyControlFlow { unroll_limit: 100 }, &mut m);
        assert!(out.changed);
    }

    #[test]
    fn constant_if_and_empty_regions() {
        let mut m = qc("OPENQASM 3; qubit q; bit c = 1; if (c) { x q; } else { z q; }");
        run(&SIMPLIFY, &mut m);
        let names: Vec<&str> = m.walk().into_iter().map(|o| m.op_name(o)).collect();
        assert!(names.contains(&"qc.x") && !names.contains(&"qc.z") && !names.contains(&"cf.if"));

        let mut m = qc("OPENQASM 3; qubit q; bit c; c = measure q; if (c) { } for uint i in [0:500] { }");
        run(&SIMPLIFY, &mut m);
        assert!(
            !m.walk().into_iter().any(|o| m.op_name(o).starts_with("cf.")),
            "{}",
            print_ir(&m)
        );
    }

    #[test]
    fn while_is_never_unrolled() {
        let mut m = qc("OPENQASM 3; qubit q; bit c; c = measure q; while (c) { x q; c = measure q; }");
        assert!(!run(&SIMPLIFY, &mut m).changed);
    }
}
