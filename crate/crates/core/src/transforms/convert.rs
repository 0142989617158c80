//! Conversions between the two quantum dialects.
//!
//! `linearize` (qc → qco) walks the program in order and keeps, for each live
//! qubit reference, the latest state value on its wire. `bufferize` (qco → qc)
//! goes the other way: every state is mapped back to the reference of the wire
//! it travels on.
//!
//! Register slots become one `qco.alloc` each, tagged with `reg_index` and
//! `reg_size`; bufferize re-fuses a complete consecutive run into a register.
//! Qubits still live at the end of the program are consumed by a
//! `qco.dealloc {implicit = true}`, which bufferize drops again.

use std::collections::HashMap;

use super::{dialect_name, Pass, PassError, PassOutcome};
use crate::dialect::registry::{is_modifier, split};
use crate::dialect::unitary::{modifier_body_op, qubit_operands};
use crate::dialect::{module_dialect, qco, DialectKind};
use crate::ir::{Attribute, BlockId, InsertPoint, Location, Module, OpId, OperationState, Region, Type, ValueId};

pub struct Linearize;

impl Pass for Linearize {
    fn name(&self) -> &'static str {
        "linearize"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        *m = linearize(m)?;
        Ok(PassOutcome::changed(true))
    }
}

pub struct Bufferize;

impl Pass for Bufferize {
    fn name(&self) -> &'static str {
        "bufferize"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        *m = bufferize(m)?;
        Ok(PassOutcome::changed(true))
    }
}

fn functional_name(name: &str) -> String {
    format!("qco.{}", split(name).1)
}

fn imperative_name(name: &str) -> String {
    format!("qc.{}", split(name).1)
}

fn is_state(m: &Module, v: ValueId) -> bool {
    *m.value_type(v) == Type::QubitState
}

// ---- linearize ---------------------------------------------------------------

/// Converts an imperative module into the functional dialect.
pub fn linearize(src: &Module) -> Result<Module, PassError> {
    match module_dialect(src) {
        DialectKind::Qc | DialectKind::Classical => {}
        k => {
            return Err(PassError::UnknownDialectInput {
                expected: "qc",
                found: dialect_name(k),
            })
        }
    }
    let mut l = Linearizer {
        src,
        out: Module::new(),
        vals: HashMap::new(),
        live: Vec::new(),
        version: HashMap::new(),
        reg_size: HashMap::new(),
    };
    let body = l.out.body();
    l.block(src.body(), body)?;
    for (_, s) in std::mem::take(&mut l.live) {
        l.out.build_op(
            InsertPoint::End(body),
            OperationState::new("qco.dealloc")
                .operand(s)
                .attr("implicit", Attribute::Bool(true)),
        )?;
    }
    Ok(l.out)
}

struct Linearizer<'a> {
    src: &'a Module,
    out: Module,
    /// Classical values (and block arguments) of the source.
    vals: HashMap<ValueId, ValueId>,
    /// Live qubit references in allocation order, with their current state.
    live: Vec<(ValueId, ValueId)>,
    version: HashMap<ValueId, usize>,
    reg_size: HashMap<ValueId, i64>,
}

impl Linearizer<'_> {
    fn val(&self, v: ValueId) -> ValueId {
        self.vals[&v]
    }

    fn state_of(&self, r: ValueId, op: OpId) -> Result<ValueId, PassError> {
        self.live
            .iter()
            .find(|(x, _)| *x == r)
            .map(|(_, s)| *s)
            .ok_or_else(|| PassError::UnmappedQubit(self.src.nearest_loc(op)))
    }

    fn set_state(&mut self, r: ValueId, s: ValueId) {
        self.name_state(r, s);
        if let Some(e) = self.live.iter_mut().find(|(x, _)| *x == r) {
            e.1 = s;
        } else {
            self.live.push((r, s));
        }
    }

    fn name_state(&mut self, r: ValueId, s: ValueId) {
        if let Some(base) = self.src.value_name(r) {
            let k = self.version.entry(r).or_insert(0);
            let name = format!("{base}_{k}");
            *k += 1;
            self.out.set_value_name(s, name);
        }
    }

    fn copy_name(&mut self, old: ValueId, new: ValueId) {
        if let Some(n) = self.src.value_name(old) {
            self.out.set_value_name(new, n.to_string());
        }
    }

    fn loc(&self, op: OpId) -> Option<Location> {
        self.src.op(op).loc().cloned()
    }

    fn block(&mut self, from: BlockId, to: BlockId) -> Result<(), PassError> {
        for &op in self.src.block_ops(from) {
            if self.src.op_name(op) != "cf.yield" && self.src.op_name(op) != "cf.condition" {
                self.op(op, to)?;
            }
        }
        Ok(())
    }

    /// Consumes refs allocated inside a region that are still live at its end.
    fn close_scope(&mut self, outer: &[ValueId], to: BlockId) -> Result<(), PassError> {
        let inner: Vec<(ValueId, ValueId)> = self.live.iter().filter(|(r, _)| !outer.contains(r)).copied().collect();
        for (r, s) in inner {
            self.out.build_op(
                InsertPoint::End(to),
                OperationState::new("qco.dealloc")
                    .operand(s)
                    .attr("implicit", Attribute::Bool(true)),
            )?;
            self.live.retain(|(x, _)| *x != r);
        }
        Ok(())
    }

    fn op(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let name = src.op_name(op);
        let at = InsertPoint::End(to);
        match split(name) {
            ("qc", "alloc") => {
                let id = self.out.build_op(
                    at,
                    OperationState::new("qco.alloc")
                        .result(Type::QubitState)
                        .loc(self.loc(op)),
                )?;
                let s = self.out.results(id)[0];
                self.set_state(src.results(op)[0], s);
            }
            ("qc", "alloc_reg") => {
                let size = src.attr(op, "size").and_then(Attribute::as_int).unwrap_or(0);
                self.reg_size.insert(src.results(op)[0], size);
            }
            ("qc", "extract") => {
                let size = self.reg_size.get(&src.operands(op)[0]).copied().unwrap_or(0);
                let index = src.attr(op, "index").cloned().unwrap_or(Attribute::Int(0));
                let id = self.out.build_op(
                    at,
                    OperationState::new("qco.alloc")
                        .result(Type::QubitState)
                        .attr("reg_index", index)
                        .attr("reg_size", Attribute::Int(size))
                        .loc(self.loc(op)),
                )?;
                let s = self.out.results(id)[0];
                self.set_state(src.results(op)[0], s);
            }
            ("qc", "dealloc") => {
                let r = src.operands(op)[0];
                let s = self.state_of(r, op)?;
                self.out.build_op(
                    at,
                    OperationState::new("qco.dealloc")
                        .operand(s)
                        .attrs(src.op(op).attrs().clone())
                        .loc(self.loc(op)),
                )?;
                self.live.retain(|(x, _)| *x != r);
            }
            ("qc", "measure") | ("qc", "reset") => {
                let r = src.operands(op)[0];
                let s = self.state_of(r, op)?;
                let mut st = OperationState::new(functional_name(name))
                    .operand(s)
                    .result(Type::QubitState)
                    .attrs(src.op(op).attrs().clone())
                    .loc(self.loc(op));
                if name == "qc.measure" {
                    st = st.result(Type::Bit);
                }
                let id = self.out.build_op(at, st)?;
                let res = self.out.results(id).to_vec();
                self.set_state(r, res[0]);
                if let Some(bit) = res.get(1) {
                    self.vals.insert(src.results(op)[0], *bit);
                    self.copy_name(src.results(op)[0], *bit);
                }
            }
            ("qc", "gate_def") => self.gate_def(op, to)?,
            ("qc", _) => {
                let refs = qubit_operands(src, op);
                let mut wires = HashMap::new();
                for r in &refs {
                    wires.insert(*r, self.state_of(*r, op)?);
                }
                let outs = self.unitary(op, to, &wires)?;
                for (r, s) in refs.into_iter().zip(outs) {
                    self.set_state(r, s);
                }
            }
            ("cf", "if") => self.cf_if(op, to)?,
            ("cf", "for") => self.cf_for(op, to)?,
            ("cf", "while") => self.cf_while(op, to)?,
            _ => {
                let operands: Vec<ValueId> = src.operands(op).iter().map(|v| self.val(*v)).collect();
                let id = self.out.build_op(
                    at,
                    OperationState::new(name)
                        .operands(operands)
                        .results(src.results(op).iter().map(|r| src.value_type(*r).clone()))
                        .attrs(src.op(op).attrs().clone())
                        .loc(self.loc(op)),
                )?;
                for (o, n) in src.results(op).iter().zip(self.out.results(id).to_vec()) {
                    self.vals.insert(*o, n);
                    self.copy_name(*o, n);
                }
            }
        }
        Ok(())
    }

    /// Converts a unitary op given the input state of each of its refs and
    /// returns the output states in `qubit_operands` order.
    fn unitary(&mut self, op: OpId, to: BlockId, wires: &HashMap<ValueId, ValueId>) -> Result<Vec<ValueId>, PassError> {
        let src = self.src;
        let name = src.op_name(op);
        let refs = qubit_operands(src, op);
        let inputs: Vec<ValueId> = refs.iter().map(|r| wires[r]).collect();
        let mut st = OperationState::new(functional_name(name))
            .attrs(src.op(op).attrs().clone())
            .loc(self.loc(op));
        if is_modifier(name) {
            let body_op = modifier_body_op(src, op).ok_or_else(|| PassError::UnmappedQubit(src.nearest_loc(op)))?;
            let targets = qubit_operands(src, body_op);
            let block = self.out.create_block(&vec![Type::QubitState; targets.len()]);
            let args = self.out.block_args(block).to_vec();
            let inner: HashMap<ValueId, ValueId> = targets.iter().copied().zip(args).collect();
            let outs = self.unitary(body_op, block, &inner)?;
            self.out
                .build_op(InsertPoint::End(block), OperationState::new("cf.yield").operands(outs))?;
            st = st.region(Region::new(block));
        } else {
            let angles = src
                .operands(op)
                .iter()
                .filter(|v| *src.value_type(**v) == Type::Float64)
                .map(|v| self.val(*v));
            st = st.operands(angles.collect::<Vec<_>>());
        }
        let id = self.out.build_op(
            InsertPoint::End(to),
            st.operands(inputs.clone())
                .results(vec![Type::QubitState; inputs.len()]),
        )?;
        Ok(self.out.results(id).to_vec())
    }

    fn gate_def(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let sblock = src.region_block(op, 0);
        let sargs = src.block_args(sblock).to_vec();
        let types: Vec<Type> = sargs
            .iter()
            .map(|a| match src.value_type(*a) {
                Type::QubitRef => Type::QubitState,
                t => t.clone(),
            })
            .collect();
        let block = self.out.create_block(&types);
        let args = self.out.block_args(block).to_vec();
        let saved = std::mem::take(&mut self.live);
        let mut refs = Vec::new();
        for (a, n) in sargs.iter().zip(&args) {
            if *src.value_type(*a) == Type::QubitRef {
                refs.push(*a);
                self.set_state(*a, *n);
            } else {
                self.vals.insert(*a, *n);
                self.copy_name(*a, *n);
            }
        }
        self.block(sblock, block)?;
        let outs: Vec<ValueId> = refs.iter().map(|r| self.state_of(*r, op)).collect::<Result<_, _>>()?;
        self.out
            .build_op(InsertPoint::End(block), OperationState::new("cf.yield").operands(outs))?;
        self.live = saved;
        self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("qco.gate_def")
                .attrs(src.op(op).attrs().clone())
                .region(Region::new(block))
                .loc(self.loc(op)),
        )?;
        Ok(())
    }

    /// Refs used anywhere inside `op` that are live here, in live order.
    fn touched(&self, op: OpId) -> Vec<ValueId> {
        let src = self.src;
        let mut used = Vec::new();
        for inner in src.walk_op(op).into_iter().skip(1) {
            used.extend(
                src.operands(inner)
                    .iter()
                    .copied()
                    .filter(|v| *src.value_type(*v) == Type::QubitRef),
            );
        }
        self.live.iter().map(|(r, _)| *r).filter(|r| used.contains(r)).collect()
    }

    fn yield_values(&self, term: Option<OpId>, skip: usize) -> Vec<ValueId> {
        term.map(|t| self.src.operands(t)[skip..].iter().map(|v| self.val(*v)).collect())
            .unwrap_or_default()
    }

    fn cf_if(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let threaded = self.touched(op);
        let entry = self.live.clone();
        let mut regions = Vec::new();
        for i in 0..2 {
            let sblock = src.region_block(op, i);
            let block = self.out.create_block(&[]);
            self.block(sblock, block)?;
            self.close_scope(&entry.iter().map(|e| e.0).collect::<Vec<_>>(), block)?;
            let mut outs = self.yield_values(src.terminator(sblock), 0);
            for r in &threaded {
                outs.push(self.state_of(*r, op)?);
            }
            self.out
                .build_op(InsertPoint::End(block), OperationState::new("cf.yield").operands(outs))?;
            regions.push(Region::new(block));
            self.live = entry.clone();
        }
        let classical: Vec<Type> = src.results(op).iter().map(|r| src.value_type(*r).clone()).collect();
        let mut st = OperationState::new("cf.if")
            .operand(self.val(src.operands(op)[0]))
            .results(classical.clone())
            .results(vec![Type::QubitState; threaded.len()])
            .attrs(src.op(op).attrs().clone())
            .loc(self.loc(op));
        st.regions = regions;
        let id = self.out.build_op(InsertPoint::End(to), st)?;
        self.bind_results(op, id, &threaded);
        Ok(())
    }

    fn bind_results(&mut self, op: OpId, id: OpId, threaded: &[ValueId]) {
        let src = self.src;
        let res = self.out.results(id).to_vec();
        let nc = src.results(op).len();
        for (o, n) in src.results(op).iter().zip(&res) {
            self.vals.insert(*o, *n);
            self.copy_name(*o, *n);
        }
        for (r, s) in threaded.iter().zip(&res[nc..]) {
            self.set_state(*r, *s);
        }
    }

    /// Creates a block whose arguments mirror `sargs` followed by one state per
    /// threaded ref, and binds them.
    fn loop_block(&mut self, sargs: &[ValueId], threaded: &[ValueId]) -> BlockId {
        let src = self.src;
        let mut types: Vec<Type> = sargs.iter().map(|a| src.value_type(*a).clone()).collect();
        types.extend(vec![Type::QubitState; threaded.len()]);
        let block = self.out.create_block(&types);
        let args = self.out.block_args(block).to_vec();
        for (a, n) in sargs.iter().zip(&args) {
            self.vals.insert(*a, *n);
            self.copy_name(*a, *n);
        }
        for (r, n) in threaded.iter().zip(&args[sargs.len()..]) {
            self.set_state(*r, *n);
        }
        block
    }

    fn threaded_states(&self, threaded: &[ValueId], op: OpId) -> Result<Vec<ValueId>, PassError> {
        threaded.iter().map(|r| self.state_of(*r, op)).collect()
    }

    fn cf_for(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let threaded = self.touched(op);
        let outer: Vec<ValueId> = self.live.iter().map(|e| e.0).collect();
        let mut operands: Vec<ValueId> = src.operands(op).iter().map(|v| self.val(*v)).collect();
        operands.extend(self.threaded_states(&threaded, op)?);
        let sblock = src.region_block(op, 0);
        let block = self.loop_block(src.block_args(sblock), &threaded);
        self.block(sblock, block)?;
        self.close_scope(&outer, block)?;
        let mut outs = self.yield_values(src.terminator(sblock), 0);
        outs.extend(self.threaded_states(&threaded, op)?);
        self.out
            .build_op(InsertPoint::End(block), OperationState::new("cf.yield").operands(outs))?;
        let classical: Vec<Type> = src.results(op).iter().map(|r| src.value_type(*r).clone()).collect();
        let id = self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("cf.for")
                .operands(operands)
                .results(classical)
                .results(vec![Type::QubitState; threaded.len()])
                .attrs(src.op(op).attrs().clone())
                .region(Region::new(block))
                .loc(self.loc(op)),
        )?;
        self.bind_results(op, id, &threaded);
        Ok(())
    }

    fn cf_while(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let threaded = self.touched(op);
        let outer: Vec<ValueId> = self.live.iter().map(|e| e.0).collect();
        let mut operands: Vec<ValueId> = src.operands(op).iter().map(|v| self.val(*v)).collect();
        operands.extend(self.threaded_states(&threaded, op)?);

        let cblock_src = src.region_block(op, 0);
        let cblock = self.loop_block(src.block_args(cblock_src), &threaded);
        self.block(cblock_src, cblock)?;
        self.close_scope(&outer, cblock)?;
        let cond = src
            .terminator(cblock_src)
            .filter(|t| src.op_name(*t) == "cf.condition")
            .ok_or_else(|| PassError::UnmappedQubit(src.nearest_loc(op)))?;
        let mut outs: Vec<ValueId> = src.operands(cond).iter().map(|v| self.val(*v)).collect();
        outs.extend(self.threaded_states(&threaded, op)?);
        self.out.build_op(
            InsertPoint::End(cblock),
            OperationState::new("cf.condition").operands(outs),
        )?;

        let bblock_src = src.region_block(op, 1);
        let bblock = self.loop_block(src.block_args(bblock_src), &threaded);
        self.block(bblock_src, bblock)?;
        self.close_scope(&outer, bblock)?;
        let mut outs = self.yield_values(src.terminator(bblock_src), 0);
        outs.extend(self.threaded_states(&threaded, op)?);
        self.out
            .build_op(InsertPoint::End(bblock), OperationState::new("cf.yield").operands(outs))?;

        let classical: Vec<Type> = src.results(op).iter().map(|r| src.value_type(*r).clone()).collect();
        let id = self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("cf.while")
                .operands(operands)
                .results(classical)
                .results(vec![Type::QubitState; threaded.len()])
                .attrs(src.op(op).attrs().clone())
                .region(Region::new(cblock))
                .region(Region::new(bblock))
                .loc(self.loc(op)),
        )?;
        self.bind_results(op, id, &threaded);
        Ok(())
    }
}

// ---- bufferize ---------------------------------------------------------------

/// Converts a linear functional module back into the imperative dialect.
pub fn bufferize(src: &Module) -> Result<Module, PassError> {
    match module_dialect(src) {
        DialectKind::Qco | DialectKind::Classical => {}
        k => {
            return Err(PassError::UnknownDialectInput {
                expected: "qco",
                found: dialect_name(k),
            })
        }
    }
    let diags = qco::linearity_verify(src);
    if !diags.is_empty() {
        return Err(PassError::LinearityViolation(diags));
    }
    let mut b = Bufferizer {
        src,
        out: Module::new(),
        vals: HashMap::new(),
    };
    let body = b.out.body();
    b.block(src.body(), body)?;
    Ok(b.out)
}

struct Bufferizer<'a> {
    src: &'a Module,
    out: Module,
    /// Classical values map to their copies; states map to their wire's ref.
    vals: HashMap<ValueId, ValueId>,
}

/// `q0_3` → `q0`.
fn ref_name(state: &str) -> &str {
    match state.rsplit_once('_') {
        Some((base, k)) if !base.is_empty() && k.chars().all(|c| c.is_ascii_digit()) => base,
        _ => state,
    }
}

impl Bufferizer<'_> {
    fn val(&self, v: ValueId) -> ValueId {
        self.vals[&v]
    }

    fn loc(&self, op: OpId) -> Option<Location> {
        self.src.op(op).loc().cloned()
    }

    fn classical(&self, vs: &[ValueId]) -> Vec<ValueId> {
        vs.iter()
            .filter(|v| !is_state(self.src, **v))
            .map(|v| self.val(*v))
            .collect()
    }

    fn classical_types(&self, vs: &[ValueId]) -> Vec<Type> {
        vs.iter()
            .filter(|v| !is_state(self.src, **v))
            .map(|v| self.src.value_type(*v).clone())
            .collect()
    }

    fn bind(&mut self, old: ValueId, new: ValueId) {
        self.vals.insert(old, new);
        if !is_state(self.src, old) {
            if let Some(n) = self.src.value_name(old) {
                self.out.set_value_name(new, n.to_string());
            }
        }
    }

    /// Binds the classical values among `old` to `new`, in order.
    fn bind_classical(&mut self, old: &[ValueId], new: &[ValueId]) {
        let classical: Vec<ValueId> = old.iter().copied().filter(|v| !is_state(self.src, *v)).collect();
        for (o, n) in classical.into_iter().zip(new.to_vec()) {
            self.bind(o, n);
        }
    }

    /// Length of a complete register run starting at position `i` of `ops`.
    fn register_run(&self, ops: &[OpId], i: usize) -> Option<usize> {
        let src = self.src;
        let tag = |op: OpId| {
            (src.op_name(op) == "qco.alloc").then(|| {
                (
                    src.attr(op, "reg_index").and_then(Attribute::as_int),
                    src.attr(op, "reg_size").and_then(Attribute::as_int),
                )
            })
        };
        let (Some(0), Some(n)) = tag(ops[i])? else {
            return None;
        };
        let n = usize::try_from(n).ok().filter(|n| *n >= 1)?;
        (i + n <= ops.len() && (0..n).all(|k| tag(ops[i + k]) == Some((Some(k as i64), Some(n as i64))))).then_some(n)
    }

    fn block(&mut self, from: BlockId, to: BlockId) -> Result<(), PassError> {
        let ops = self.src.block_ops(from).to_vec();
        let mut i = 0;
        while i < ops.len() {
            if let Some(n) = self.register_run(&ops, i) {
                self.register(&ops[i..i + n], to)?;
                i += n;
                continue;
            }
            let name = self.src.op_name(ops[i]);
            if name != "cf.yield" && name != "cf.condition" {
                self.op(ops[i], to)?;
            }
            i += 1;
        }
        Ok(())
    }

    fn register(&mut self, allocs: &[OpId], to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let state0 = src.results(allocs[0])[0];
        let reg = self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("qc.alloc_reg")
                .attr("size", Attribute::Int(allocs.len() as i64))
                .result(Type::QubitRegister(allocs.len() as u32))
                .loc(self.loc(allocs[0])),
        )?;
        let regv = self.out.results(reg)[0];
        if let Some(n) = src.value_name(state0) {
            let slot = ref_name(n);
            let base = slot.strip_suffix('0').unwrap_or(slot);
            self.out.set_value_name(regv, base.to_string());
        }
        for (k, a) in allocs.iter().enumerate() {
            let id = self.out.build_op(
                InsertPoint::End(to),
                OperationState::new("qc.extract")
                    .operand(regv)
                    .attr("index", Attribute::Int(k as i64))
                    .result(Type::QubitRef)
                    .loc(self.loc(*a)),
            )?;
            let r = self.out.results(id)[0];
            self.name_ref(src.results(*a)[0], r);
            self.vals.insert(src.results(*a)[0], r);
        }
        Ok(())
    }

    fn name_ref(&mut self, state: ValueId, r: ValueId) {
        if let Some(n) = self.src.value_name(state) {
            self.out.set_value_name(r, ref_name(n).to_string());
        }
    }

    /// Maps each qubit-state result of `op` to the ref of the positionally
    /// corresponding state operand.
    fn forward_states(&mut self, op: OpId) {
        let src = self.src;
        let ins: Vec<ValueId> = src.operands(op).iter().copied().filter(|v| is_state(src, *v)).collect();
        let outs: Vec<ValueId> = src.results(op).iter().copied().filter(|v| is_state(src, *v)).collect();
        for (i, o) in ins.iter().zip(outs) {
            let r = self.val(*i);
            self.vals.insert(o, r);
        }
    }

    fn op(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let name = src.op_name(op);
        let at = InsertPoint::End(to);
        let mut attrs = src.op(op).attrs().clone();
        match split(name) {
            ("qco", "alloc") => {
                attrs.remove("reg_index");
                attrs.remove("reg_size");
                let id = self.out.build_op(
                    at,
                    OperationState::new("qc.alloc")
                        .attrs(attrs)
                        .result(Type::QubitRef)
                        .loc(self.loc(op)),
                )?;
                let r = self.out.results(id)[0];
                self.name_ref(src.results(op)[0], r);
                self.vals.insert(src.results(op)[0], r);
            }
            ("qco", "dealloc") => {
                if attrs.remove("implicit").and_then(|a| a.as_bool()) != Some(true) {
                    let r = self.val(src.operands(op)[0]);
                    self.out.build_op(
                        at,
                        OperationState::new("qc.dealloc")
                            .operand(r)
                            .attrs(attrs)
                            .loc(self.loc(op)),
                    )?;
                }
            }
            ("qco", "measure") => {
                let r = self.val(src.operands(op)[0]);
                let id = self.out.build_op(
                    at,
                    OperationState::new("qc.measure")
                        .operand(r)
                        .attrs(attrs)
                        .result(Type::Bit)
                        .loc(self.loc(op)),
                )?;
                self.vals.insert(src.results(op)[0], r);
                let bit = self.out.results(id)[0];
                self.bind(src.results(op)[1], bit);
            }
            ("qco", "reset") => {
                let r = self.val(src.operands(op)[0]);
                self.out.build_op(
                    at,
                    OperationState::new("qc.reset")
                        .operand(r)
                        .attrs(attrs)
                        .loc(self.loc(op)),
                )?;
                self.forward_states(op);
            }
            ("qco", "gate_def") => self.gate_def(op, to)?,
            ("qco", _) => {
                self.unitary(op, to)?;
            }
            ("cf", "if") => self.cf_if(op, to)?,
            ("cf", "for") => self.cf_for(op, to)?,
            ("cf", "while") => self.cf_while(op, to)?,
            _ => {
                let operands: Vec<ValueId> = src.operands(op).iter().map(|v| self.val(*v)).collect();
                let id = self.out.build_op(
                    at,
                    OperationState::new(name)
                        .operands(operands)
                        .results(src.results(op).iter().map(|r| src.value_type(*r).clone()))
                        .attrs(attrs)
                        .loc(self.loc(op)),
                )?;
                for (o, n) in src.results(op).iter().zip(self.out.results(id).to_vec()) {
                    self.bind(*o, n);
                }
            }
        }
        Ok(())
    }

    fn unitary(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let name = src.op_name(op);
        let mut st = OperationState::new(imperative_name(name))
            .attrs(src.op(op).attrs().clone())
            .loc(self.loc(op));
        if is_modifier(name) {
            let sblock = src.region_block(op, 0);
            let targets = src.block_args(sblock).to_vec();
            let operands = src.operands(op);
            let ncontrols = operands.len() - targets.len();
            for (a, o) in targets.iter().zip(&operands[ncontrols..]) {
                let r = self.val(*o);
                self.vals.insert(*a, r);
            }
            let block = self.out.create_block(&[]);
            let body_op = modifier_body_op(src, op).ok_or_else(|| PassError::UnmappedQubit(src.nearest_loc(op)))?;
            self.unitary(body_op, block)?;
            if name == "qco.ctrl" {
                st = st.operands(operands[..ncontrols].iter().map(|v| self.vals[v]).collect::<Vec<_>>());
            }
            st = st.region(Region::new(block));
        } else {
            st = st.operands(src.operands(op).iter().map(|v| self.val(*v)).collect::<Vec<_>>());
        }
        self.out.build_op(InsertPoint::End(to), st)?;
        self.forward_states(op);
        Ok(())
    }

    fn gate_def(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let sblock = src.region_block(op, 0);
        let sargs = src.block_args(sblock).to_vec();
        let types: Vec<Type> = sargs
            .iter()
            .map(|a| match src.value_type(*a) {
                Type::QubitState => Type::QubitRef,
                t => t.clone(),
            })
            .collect();
        let block = self.out.create_block(&types);
        for (a, n) in sargs.iter().zip(self.out.block_args(block).to_vec()) {
            self.vals.insert(*a, n);
            if let Some(name) = src.value_name(*a) {
                let name = if is_state(src, *a) { ref_name(name) } else { name };
                self.out.set_value_name(n, name.to_string());
            }
        }
        self.block(sblock, block)?;
        self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("qc.gate_def")
                .attrs(src.op(op).attrs().clone())
                .region(Region::new(block))
                .loc(self.loc(op)),
        )?;
        Ok(())
    }

    fn mismatch(&self, op: OpId) -> PassError {
        PassError::WireMismatch(self.src.nearest_loc(op))
    }

    /// Checks that the state operands of a terminator travel on `refs`.
    fn check_wires(&self, term: Option<OpId>, skip: usize, refs: &[ValueId], op: OpId) -> Result<(), PassError> {
        let src = self.src;
        let Some(t) = term else {
            return if refs.is_empty() {
                Ok(())
            } else {
                Err(self.mismatch(op))
            };
        };
        let states: Vec<ValueId> = src.operands(t)[skip..]
            .iter()
            .copied()
            .filter(|v| is_state(src, *v))
            .map(|v| self.val(v))
            .collect();
        if states == refs {
            Ok(())
        } else {
            Err(self.mismatch(op))
        }
    }

    /// Emits a terminator carrying only the classical operands.
    fn terminator(&mut self, term: Option<OpId>, to: BlockId) -> Result<(), PassError> {
        let (name, operands) = match term {
            Some(t) => (self.src.op_name(t), self.classical(self.src.operands(t))),
            None => ("cf.yield", Vec::new()),
        };
        self.out
            .build_op(InsertPoint::End(to), OperationState::new(name).operands(operands))?;
        Ok(())
    }

    fn cf_if(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let mut regions = Vec::new();
        let mut wires: Option<Vec<ValueId>> = None;
        for i in 0..2 {
            let sblock = src.region_block(op, i);
            let block = self.out.create_block(&[]);
            self.block(sblock, block)?;
            let term = src.terminator(sblock).filter(|t| src.op_name(*t) == "cf.yield");
            let refs: Vec<ValueId> = term
                .map(|t| {
                    src.operands(t)
                        .iter()
                        .filter(|v| is_state(src, **v))
                        .map(|v| self.val(*v))
                        .collect()
                })
                .unwrap_or_default();
            match &wires {
                Some(w) if *w != refs => return Err(self.mismatch(op)),
                _ => wires = Some(refs),
            }
            self.terminator(term, block)?;
            regions.push(Region::new(block));
        }
        let mut st = OperationState::new("cf.if")
            .operand(self.val(src.operands(op)[0]))
            .results(self.classical_types(src.results(op)))
            .attrs(src.op(op).attrs().clone())
            .loc(self.loc(op));
        st.regions = regions;
        let id = self.out.build_op(InsertPoint::End(to), st)?;
        let new = self.out.results(id).to_vec();
        self.bind_classical(src.results(op), &new);
        let states: Vec<ValueId> = src.results(op).iter().copied().filter(|v| is_state(src, *v)).collect();
        for (s, r) in states.into_iter().zip(wires.unwrap_or_default()) {
            self.vals.insert(s, r);
        }
        Ok(())
    }

    /// Binds the arguments of a loop block: classical ones get fresh block
    /// arguments, state ones map to the refs of the incoming states.
    fn loop_block(&mut self, sblock: BlockId, refs: &[ValueId]) -> BlockId {
        let src = self.src;
        let sargs = src.block_args(sblock).to_vec();
        let block = self.out.create_block(&self.classical_types(&sargs));
        let new = self.out.block_args(block).to_vec();
        self.bind_classical(&sargs, &new);
        let states: Vec<ValueId> = sargs.into_iter().filter(|v| is_state(src, *v)).collect();
        for (s, r) in states.into_iter().zip(refs) {
            self.vals.insert(s, *r);
        }
        block
    }

    fn state_refs(&self, vs: &[ValueId]) -> Vec<ValueId> {
        vs.iter()
            .filter(|v| is_state(self.src, **v))
            .map(|v| self.val(*v))
            .collect()
    }

    fn bind_loop_results(&mut self, op: OpId, id: OpId, refs: &[ValueId]) {
        let src = self.src;
        let new = self.out.results(id).to_vec();
        self.bind_classical(src.results(op), &new);
        let states: Vec<ValueId> = src.results(op).iter().copied().filter(|v| is_state(src, *v)).collect();
        for (s, r) in states.into_iter().zip(refs) {
            self.vals.insert(s, *r);
        }
    }

    fn cf_for(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let refs = self.state_refs(src.operands(op));
        let operands = self.classical(src.operands(op));
        let sblock = src.region_block(op, 0);
        let block = self.loop_block(sblock, &refs);
        self.block(sblock, block)?;
        let term = src.terminator(sblock).filter(|t| src.op_name(*t) == "cf.yield");
        self.check_wires(term, 0, &refs, op)?;
        self.terminator(term, block)?;
        let id = self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("cf.for")
                .operands(operands)
                .results(self.classical_types(src.results(op)))
                .attrs(src.op(op).attrs().clone())
                .region(Region::new(block))
                .loc(self.loc(op)),
        )?;
        self.bind_loop_results(op, id, &refs);
        Ok(())
    }

    fn cf_while(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let refs = self.state_refs(src.operands(op));
        let operands = self.classical(src.operands(op));

        let csrc = src.region_block(op, 0);
        let cblock = self.loop_block(csrc, &refs);
        self.block(csrc, cblock)?;
        let cond = src.terminator(csrc).filter(|t| src.op_name(*t) == "cf.condition");
        self.check_wires(cond, 1, &refs, op)?;
        self.terminator(cond, cblock)?;

        let bsrc = src.region_block(op, 1);
        let bblock = self.loop_block(bsrc, &refs);
        self.block(bsrc, bblock)?;
        let term = src.terminator(bsrc).filter(|t| src.op_name(*t) == "cf.yield");
        self.check_wires(term, 0, &refs, op)?;
        self.terminator(term, bblock)?;

        let id = self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("cf.while")
                .operands(operands)
                .results(self.classical_types(src.results(op)))
                .attrs(src.op(op).attrs().clone())
                .region(Region::new(cblock))
                .region(Region::new(bblock))
                .loc(self.loc(op)),
        )?;
        self.bind_loop_results(op, id, &refs);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::print_ir;
    use crate::frontend::import_qasm;
    use crate::ir::structural::structural_diff;
    use crate::ir::verify::verify;

    fn qc(src: &str) -> Module {
        import_qasm(src, "t.qasm").unwrap()
    }

    fn round_trip(src: &str) {
        let p = qc(src);
        let f = linearize(&p).unwrap();
        assert!(verify(&f).is_empty(), "{:?}\n{}", verify(&f), print_ir(&f));
        let back = bufferize(&f).unwrap();
        assert!(verify(&back).is_empty(), "{:?}", verify(&back));
        if let Some(d) = structural_diff(&p, &back) {
            panic!("{d}\n{}\n----\n{}", print_ir(&p), print_ir(&back));
        }
    }

    #[test]
    fn bell_states_are_versioned() {
        let f = linearize(&qc("OPENQASM 3; qubit q0; qubit q1; h q0; cx q0, q1;")).unwrap();
        let text = print_ir(&f);
        assert!(text.contains("%q0_1 = qco.h(%q0_0) : !qco.qubit"), "{text}");
        assert!(text.contains("qco.ctrl(%q0_1, %q1_0)"), "{text}");
        assert!(qco::linearity_verify(&f).is_empty());
    }

    #[test]
    fn alloc_dealloc_only() {
        let mut m = Module::new();
        let b = m.body();
        let a = m
            .build_op(
                InsertPoint::End(b),
                OperationState::new("qc.alloc").result(Type::QubitRef),
            )
            .unwrap();
        let q = m.results(a)[0];
        m.build_op(InsertPoint::End(b), OperationState::new("qc.dealloc").operand(q))
            .unwrap();
        let f = linearize(&m).unwrap();
        let names: Vec<_> = f.walk().into_iter().map(|o| f.op_name(o)).collect();
        assert_eq!(names, ["qco.alloc", "qco.dealloc"]);
        let back = bufferize(&f).unwrap();
        let names: Vec<_> = back.walk().into_iter().map(|o| back.op_name(o)).collect();
        assert_eq!(names, ["qc.alloc", "qc.dealloc"]);
    }

    #[test]
    fn reset_idiom_threads_the_if() {
        let src = "OPENQASM 3; qubit[1] q; bit c; h q[0]; c = measure q[0]; if (c) { x q[0]; }";
        let f = linearize(&qc(src)).unwrap();
        let text = print_ir(&f);
        assert!(text.contains("= cf.if(%c)"), "{text}");
        assert!(
            text.contains("cf.yield(%q0_3)") && text.contains("cf.yield(%q0_2)"),
            "{text}"
        );
        round_trip(src);
    }

    #[test]
    fn untouched_qubits_are_not_threaded_through_if() {
        let f = linearize(&qc(
            "OPENQASM 3; qubit a; qubit b; bit c; c = measure a; if (c) { x a; } else { z a; }",
        ))
        .unwrap();
        let iff = f.walk().into_iter().find(|o| f.op_name(*o) == "cf.if").unwrap();
        assert_eq!(f.results(iff).len(), 1);
    }

    #[test]
    fn round_trips() {
        round_trip("OPENQASM 3; include \"stdgates.inc\"; qubit[3] q; h q[0]; cx q[0], q[1]; ccx q[0], q[1], q[2];");
        round_trip(
            "OPENQASM 3; qubit[2] q; qubit r; bit c; bit d;
             for uint i in [0:3] { h r; d = measure r; cx q[0], q[1]; }
             while (d) { x r; d = measure r; }
             c = measure q[1];
             if (c) { reset q[0]; } else { inv @ s q[1]; }",
        );
        round_trip(
            "OPENQASM 3; gate g(t) a, b { cx a, b; rz(t/2) b; ctrl @ x a, b; } qubit[2] q;
             qubit r; g(0.5) q[0], q[1]; negctrl @ ctrl @ pow(2) @ x q[0], q[1], r;",
        );
    }

    #[test]
    fn deallocated_ref_is_unmapped() {
        let mut m = Module::new();
        let b = m.body();
        let a = m
            .build_op(
                InsertPoint::End(b),
                OperationState::new("qc.alloc").result(Type::QubitRef),
            )
            .unwrap();
        let q = m.results(a)[0];
        m.build_op(InsertPoint::End(b), OperationState::new("qc.dealloc").operand(q))
            .unwrap();
        m.build_op(InsertPoint::End(b), OperationState::new("qc.h").operand(q))
            .unwrap();
        assert!(matches!(linearize(&m), Err(PassError::UnmappedQubit(_))));
    }

    #[test]
    fn wrong_dialects_are_rejected() {
        let p = qc("OPENQASM 3; qubit q; h q;");
        assert!(matches!(bufferize(&p), Err(PassError::UnknownDialectInput { .. })));
        let f = linearize(&p).unwrap();
        assert!(matches!(linearize(&f), Err(PassError::UnknownDialectInput { .. })));
    }

    #[test]
    fn non_linear_input_is_refused() {
        let mut m = Module::new();
        let b = m.body();
        let a = m
            .build_op(
                InsertPoint::End(b),
                OperationState::new("qco.alloc").result(Type::QubitState),
            )
            .unwrap();
        let s = m.results(a)[0];
        m.build_op(
            InsertPoint::End(b),
            OperationState::new("qco.h").operand(s).result(Type::QubitState),
        )
        .unwrap();
        m.build_op(
            InsertPoint::End(b),
            OperationState::new("qco.x").operand(s).result(Type::QubitState),
        )
        .unwrap();
        assert!(matches!(bufferize(&m), Err(PassError::LinearityViolation(_))));
    }
}
