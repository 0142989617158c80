//! Lowering of the syntax tree to the imperative dialect.
//!
//! Classical bits become SSA `i1` values. Every bit (or register element) is
//! a variable; structured control flow threads the variables assigned inside
//! it as results, in variable-creation order. Reading a variable that was
//! never written materializes `false` in the scope that declared it.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::ast::*;
use super::{FrontendError, LocatedError};
use crate::dialect::GateKind;
use crate::ir::{Attribute, BlockId, InsertPoint, Location, Module, OperationState, Region, Type, ValueId};

type LResult<T> = Result<T, LocatedError>;

fn fail<T>(error: FrontendError, loc: &Location) -> LResult<T> {
    Err(LocatedError {
        error,
        loc: loc.clone(),
    })
}

enum QubitSym {
    Scalar(ValueId),
    Register(Vec<ValueId>),
}

#[derive(Clone)]
struct BitSym {
    vars: Vec<usize>,
    register: bool,
}

struct Scope {
    block: BlockId,
    values: HashMap<usize, ValueId>,
    bits: HashMap<String, BitSym>,
}

struct Var {
    depth: usize,
    name: String,
}

struct GateSig {
    params: usize,
    qubits: usize,
}

/// Names visible while lowering a gate body.
struct GateBody {
    name: String,
    params: HashMap<String, ValueId>,
    qubits: HashMap<String, ValueId>,
}

/// How a gate name maps onto the standard library.
struct StdGate {
    kind: GateKind,
    implied_controls: usize,
    params: usize,
    /// Angles prepended to the user's parameters (`u2` = `u(pi/2, ...)`).
    fixed: Vec<f64>,
}

fn std_gate(name: &str) -> Option<StdGate> {
    let g = |kind: GateKind, implied_controls: usize| StdGate {
        kind,
        implied_controls,
        params: kind.num_params(),
        fixed: Vec::new(),
    };
    Some(match name {
        "id" | "i" => g(GateKind::I, 0),
        "h" => g(GateKind::H, 0),
        "x" => g(GateKind::X, 0),
        "y" => g(GateKind::Y, 0),
        "z" => g(GateKind::Z, 0),
        "s" => g(GateKind::S, 0),
        "sdg" => g(GateKind::Sdg, 0),
        "t" => g(GateKind::T, 0),
        "tdg" => g(GateKind::Tdg, 0),
        "sx" => g(GateKind::Sx, 0),
        "sxdg" => g(GateKind::Sxdg, 0),
        "swap" => g(GateKind::Swap, 0),
        "rx" => g(GateKind::Rx, 0),
        "ry" => g(GateKind::Ry, 0),
        "rz" => g(GateKind::Rz, 0),
        "p" | "phase" | "u1" => g(GateKind::P, 0),
        "u" | "U" | "u3" => g(GateKind::U, 0),
        "u2" => StdGate {
            kind: GateKind::U,
            implied_controls: 0,
            params: 2,
            fixed: vec![std::f64::consts::FRAC_PI_2],
        },
        "cx" | "CX" | "cnot" => g(GateKind::X, 1),
        "cy" => g(GateKind::Y, 1),
        "cz" => g(GateKind::Z, 1),
        "ch" => g(GateKind::H, 1),
        "crx" => g(GateKind::Rx, 1),
        "cry" => g(GateKind::Ry, 1),
        "crz" => g(GateKind::Rz, 1),
        "cp" | "cphase" | "cu1" => g(GateKind::P, 1),
        "cswap" => g(GateKind::Swap, 1),
        "ccx" | "toffoli" => g(GateKind::X, 2),
        _ => return None,
    })
}

/// Modifier as applied during lowering (controls carry their polarity).
#[derive(Clone)]
enum Mod {
    Ctrl(Vec<bool>),
    Inv,
    Pow(i64),
}

/// Angle parameters of a call: folded constants or values inside gate bodies.
enum Angles {
    Const(Vec<f64>),
    Values(Vec<ValueId>),
}

pub(super) struct Lowerer {
    m: Module,
    qubits: HashMap<String, QubitSym>,
    declared: Vec<(ValueId, Location)>,
    vars: Vec<Var>,
    scopes: Vec<Scope>,
    gates: HashMap<String, GateSig>,
    gate_body: Option<GateBody>,
    loop_vars: Vec<String>,
}

impl Lowerer {
    pub(super) fn new() -> Self {
        let m = Module::new();
        let body = m.body();
        Lowerer {
            m,
            qubits: HashMap::new(),
            declared: Vec::new(),
            vars: Vec::new(),
            scopes: vec![Scope {
                block: body,
                values: HashMap::new(),
                bits: HashMap::new(),
            }],
            gates: HashMap::new(),
            gate_body: None,
            loop_vars: Vec::new(),
        }
    }

    pub(super) fn lower_program(mut self, p: &Program) -> LResult<Module> {
        self.lower_stmts(&p.stmts)?;
        let body = self.m.body();
        for (q, loc) in std::mem::take(&mut self.declared) {
            self.build(
                InsertPoint::End(body),
                OperationState::new("qc.dealloc").operand(q),
                &loc,
            )?;
        }
        Ok(self.m)
    }

    fn build(&mut self, at: InsertPoint, st: OperationState, loc: &Location) -> LResult<ValueIdList> {
        let op = self
            .m
            .build_op(at, st.loc(Some(loc.clone())))
            .map_err(|e| LocatedError {
                error: FrontendError::Semantic(e.to_string()),
                loc: loc.clone(),
            })?;
        Ok(self.m.results(op).to_vec())
    }

    fn cursor(&self) -> InsertPoint {
        InsertPoint::End(self.scopes.last().expect("scope stack is never empty").block)
    }

    fn lower_stmts(&mut self, stmts: &[Stmt]) -> LResult<()> {
        for s in stmts {
            self.lower_stmt(s)?;
        }
        Ok(())
    }

    fn at_global_scope(&self) -> bool {
        self.scopes.len() == 1 && self.gate_body.is_none()
    }

    fn lower_stmt(&mut self, s: &Stmt) -> LResult<()> {
        let loc = &s.loc;
        if self.gate_body.is_some() && !matches!(s.kind, StmtKind::Gate(_)) {
            return fail(
                FrontendError::Semantic("only gate applications are allowed in a gate body".into()),
                loc,
            );
        }
        match &s.kind {
            StmtKind::Include(_) => Ok(()),
            StmtKind::QubitDecl { name, size } => self.declare_qubits(name, *size, loc),
            StmtKind::BitDecl { name, size, init } => {
                self.declare_bits(name, *size, loc)?;
                match init {
                    None => Ok(()),
                    Some(BitValue::Literal(v)) => self.assign(
                        &Operand {
                            name: name.clone(),
                            index: None,
                            loc: loc.clone(),
                        },
                        *v,
                        loc,
                    ),
                    Some(BitValue::Measure(q)) => self.measure(
                        q,
                        Some(&Operand {
                            name: name.clone(),
                            index: None,
                            loc: loc.clone(),
                        }),
                        loc,
                    ),
                }
            }
            StmtKind::Gate(call) => self.gate_call(call),
            StmtKind::Measure { qubit, target } => self.measure(qubit, target.as_ref(), loc),
            StmtKind::Reset(q) => {
                for v in self.resolve_qubits(q)? {
                    self.build(self.cursor(), OpState::reset(v), loc)?;
                }
                Ok(())
            }
            StmtKind::Assign { target, value } => self.assign(target, *value, loc),
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => self.lower_if(cond, then_body, else_body, loc),
            StmtKind::For {
                var,
                start,
                step,
                end,
                body,
            } => self.lower_for(var, start, step.as_ref(), end, body, loc),
            StmtKind::While { cond, body } => self.lower_while(cond, body, loc),
            StmtKind::GateDef {
                name,
                params,
                qubits,
                body,
            } => self.gate_def(name, params, qubits, body, loc),
        }
    }

    // ---- declarations --------------------------------------------------------

    fn check_fresh_name(&self, name: &str, loc: &Location) -> LResult<()> {
        let taken = self.qubits.contains_key(name)
            || self.scopes.last().is_some_and(|s| s.bits.contains_key(name))
            || self.gates.contains_key(name)
            || std_gate(name).is_some()
            || builtin_constant(name).is_some();
        if taken {
            return fail(FrontendError::Semantic(format!("`{name}` is already declared")), loc);
        }
        Ok(())
    }

    fn declare_qubits(&mut self, name: &str, size: Option<u64>, loc: &Location) -> LResult<()> {
        if !self.at_global_scope() {
            return fail(
                FrontendError::Semantic("qubits must be declared at global scope".into()),
                loc,
            );
        }
        self.check_fresh_name(name, loc)?;
        let body = self.m.body();
        let sym = match size {
            None => {
                let q = self.build(InsertPoint::End(body), OpState::alloc(), loc)?[0];
                self.m.set_value_name(q, name);
                self.declared.push((q, loc.clone()));
                QubitSym::Scalar(q)
            }
            Some(n) => {
                let reg = self.build(
                    InsertPoint::End(body),
                    OperationState::new("qc.alloc_reg")
                        .attr("size", Attribute::Int(n as i64))
                        .result(Type::QubitRegister(n as u32)),
                    loc,
                )?[0];
                self.m.set_value_name(reg, name);
                let mut elems = Vec::new();
                for i in 0..n {
                    let q = self.build(
                        InsertPoint::End(body),
                        OperationState::new("qc.extract")
                            .operand(reg)
                            .attr("index", Attribute::Int(i as i64))
                            .result(Type::QubitRef),
                        loc,
                    )?[0];
                    self.m.set_value_name(q, format!("{name}{i}"));
                    self.declared.push((q, loc.clone()));
                    elems.push(q);
                }
                QubitSym::Register(elems)
            }
        };
        self.qubits.insert(name.to_string(), sym);
        Ok(())
    }

    fn declare_bits(&mut self, name: &str, size: Option<u64>, loc: &Location) -> LResult<()> {
        self.check_fresh_name(name, loc)?;
        let depth = self.scopes.len() - 1;
        let count = size.unwrap_or(1);
        let mut vars = Vec::new();
        for i in 0..count {
            vars.push(self.vars.len());
            self.vars.push(Var {
                depth,
                name: if size.is_some() {
                    format!("{name}{i}")
                } else {
                    name.to_string()
                },
            });
        }
        self.scopes[depth].bits.insert(
            name.to_string(),
            BitSym {
                vars,
                register: size.is_some(),
            },
        );
        Ok(())
    }

    // ---- name resolution -----------------------------------------------------

    fn const_index(&self, op: &Operand, len: usize) -> LResult<usize> {
        let e = op.index.as_ref().expect("caller checked for an index");
        if let Some(i) = e.fold_int() {
            if i < 0 || i as usize >= len {
                return fail(
                    FrontendError::Semantic(format!("index {i} out of range for `{}` of size {len}", op.name)),
                    &op.loc,
                );
            }
            return Ok(i as usize);
        }
        match e.free_ident() {
            Some((id, _)) if !self.loop_vars.iter().any(|v| v == id) && self.lookup_bits(id).is_none() => {
                fail(FrontendError::UndeclaredIdentifier(id.to_string()), &op.loc)
            }
            _ => fail(FrontendError::NonConstantIndex(op.name.clone()), &op.loc),
        }
    }

    fn resolve_qubits(&self, op: &Operand) -> LResult<Vec<ValueId>> {
        if let Some(g) = &self.gate_body {
            return match (g.qubits.get(&op.name), &op.index) {
                (Some(q), None) => Ok(vec![*q]),
                (Some(_), Some(_)) => fail(
                    FrontendError::Semantic("gate arguments cannot be indexed".into()),
                    &op.loc,
                ),
                (None, _) => fail(FrontendError::UndeclaredIdentifier(op.name.clone()), &op.loc),
            };
        }
        match (self.qubits.get(&op.name), &op.index) {
            (None, _) => fail(FrontendError::UndeclaredIdentifier(op.name.clone()), &op.loc),
            (Some(QubitSym::Scalar(q)), None) => Ok(vec![*q]),
            (Some(QubitSym::Scalar(_)), Some(_)) => fail(
                FrontendError::Semantic(format!("`{}` is not a register", op.name)),
                &op.loc,
            ),
            (Some(QubitSym::Register(qs)), None) => Ok(qs.clone()),
            (Some(QubitSym::Register(qs)), Some(_)) => Ok(vec![qs[self.const_index(op, qs.len())?]]),
        }
    }

    fn lookup_bits(&self, name: &str) -> Option<&BitSym> {
        self.scopes.iter().rev().find_map(|s| s.bits.get(name))
    }

    fn resolve_bits(&self, op: &Operand) -> LResult<Vec<usize>> {
        let Some(sym) = self.lookup_bits(&op.name) else {
            return fail(FrontendError::UndeclaredIdentifier(op.name.clone()), &op.loc);
        };
        match (&op.index, sym.register) {
            (None, _) => Ok(sym.vars.clone()),
            (Some(_), true) => Ok(vec![sym.vars[self.const_index(op, sym.vars.len())?]]),
            (Some(_), false) => fail(
                FrontendError::Semantic(format!("`{}` is not a register", op.name)),
                &op.loc,
            ),
        }
    }

    fn resolve_bit(&self, op: &Operand) -> LResult<usize> {
        match self.resolve_bits(op)?.as_slice() {
            [v] => Ok(*v),
            _ => fail(
                FrontendError::UnsupportedFeature("a whole register used as a condition".into()),
                &op.loc,
            ),
        }
    }

    // ---- variables -----------------------------------------------------------

    fn read_var(&mut self, var: usize, loc: &Location) -> LResult<ValueId> {
        let depth = self.vars[var].depth;
        for scope in self.scopes[depth..].iter().rev() {
            if let Some(v) = scope.values.get(&var) {
                return Ok(*v);
            }
        }
        let block = self.scopes[depth].block;
        let v = self.build(InsertPoint::End(block), OpState::bit_const(false), loc)?[0];
        self.m.set_value_name(v, self.vars[var].name.clone());
        self.scopes[depth].values.insert(var, v);
        Ok(v)
    }

    fn write_var(&mut self, var: usize, value: ValueId) {
        self.m.set_value_name(value, self.vars[var].name.clone());
        self.scopes
            .last_mut()
            .expect("scope stack is never empty")
            .values
            .insert(var, value);
    }

    /// Variables declared outside `stmts` that `stmts` may write.
    fn assigned_outer(&self, stmts: &[Stmt]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_assigned(stmts, &mut HashSet::new(), &mut out);
        out
    }

    fn collect_assigned(&self, stmts: &[Stmt], shadow: &mut HashSet<String>, out: &mut BTreeSet<usize>) {
        let note = |op: &Operand, shadow: &HashSet<String>, out: &mut BTreeSet<usize>| {
            if !shadow.contains(&op.name) {
                if let Ok(vs) = self.resolve_bits(op) {
                    out.extend(vs);
                }
            }
        };
        for s in stmts {
            match &s.kind {
                StmtKind::BitDecl { name, .. } => {
                    shadow.insert(name.clone());
                }
                StmtKind::Measure { target: Some(t), .. } | StmtKind::Assign { target: t, .. } => note(t, shadow, out),
                StmtKind::If {
                    then_body, else_body, ..
                } => {
                    self.collect_assigned(then_body, &mut shadow.clone(), out);
                    self.collect_assigned(else_body, &mut shadow.clone(), out);
                }
                StmtKind::For { body, .. } | StmtKind::While { body, .. } => {
                    self.collect_assigned(body, &mut shadow.clone(), out)
                }
                _ => {}
            }
        }
    }

    fn push_scope(&mut self, block: BlockId) {
        self.scopes.push(Scope {
            block,
            values: HashMap::new(),
            bits: HashMap::new(),
        });
    }

    fn pop_scope(&mut self) {
        self.scopes.pop().expect("scope stack is never empty");
    }

    fn read_vars(&mut self, vars: &[usize], loc: &Location) -> LResult<Vec<ValueId>> {
        vars.iter().map(|v| self.read_var(*v, loc)).collect()
    }

    // ---- statements ----------------------------------------------------------

    fn measure(&mut self, qubit: &Operand, target: Option<&Operand>, loc: &Location) -> LResult<()> {
        let qs = self.resolve_qubits(qubit)?;
        let bits = match target {
            Some(t) => {
                let bs = self.resolve_bits(t)?;
                if bs.len() != qs.len() {
                    return fail(
                        FrontendError::Semantic(format!("cannot measure {} qubits into {} bits", qs.len(), bs.len())),
                        loc,
                    );
                }
                bs.into_iter().map(Some).collect()
            }
            None => vec![None; qs.len()],
        };
        for (q, b) in qs.into_iter().zip(bits) {
            let r = self.build(self.cursor(), OpState::measure(q), loc)?[0];
            if let Some(var) = b {
                self.write_var(var, r);
            }
        }
        Ok(())
    }

    fn assign(&mut self, target: &Operand, value: bool, loc: &Location) -> LResult<()> {
        let vars = self.resolve_bits(target)?;
        if vars.len() != 1 {
            return fail(
                FrontendError::UnsupportedFeature("assignment to a whole register".into()),
                loc,
            );
        }
        let v = self.build(self.cursor(), OpState::bit_const(value), loc)?[0];
        self.write_var(vars[0], v);
        Ok(())
    }

    fn lower_if(&mut self, cond: &Condition, then_body: &[Stmt], else_body: &[Stmt], loc: &Location) -> LResult<()> {
        let cvar = self.resolve_bit(&cond.bit)?;
        let c = self.read_var(cvar, loc)?;
        let (first, second) = if cond.negated {
            (else_body, then_body)
        } else {
            (then_body, else_body)
        };
        let mut results: BTreeSet<usize> = self.assigned_outer(first);
        results.extend(self.assigned_outer(second));
        let results: Vec<usize> = results.into_iter().collect();
        let mut regions = Vec::new();
        for body in [first, second] {
            let block = self.m.create_block(&[]);
            self.push_scope(block);
            self.lower_stmts(body)?;
            let ys = self.read_vars(&results, loc)?;
            self.build(
                InsertPoint::End(block),
                OperationState::new("cf.yield").operands(ys),
                loc,
            )?;
            self.pop_scope();
            regions.push(Region::new(block));
        }
        let st = OperationState::new("cf.if")
            .operand(c)
            .results(vec![Type::Bit; results.len()])
            .region(regions.remove(0))
            .region(regions.remove(0));
        let rs = self.build(self.cursor(), st, loc)?;
        for (var, r) in results.into_iter().zip(rs) {
            self.write_var(var, r);
        }
        Ok(())
    }

    fn loop_bound(&self, e: &Expr, loc: &Location) -> LResult<i64> {
        e.fold_int().map_or_else(
            || {
                fail(
                    FrontendError::Semantic("loop bounds must be integer constants".into()),
                    loc,
                )
            },
            Ok,
        )
    }

    fn lower_for(
        &mut self,
        var: &str,
        start: &Expr,
        step: Option<&Expr>,
        end: &Expr,
        body: &[Stmt],
        loc: &Location,
    ) -> LResult<()> {
        let lb = self.loop_bound(start, loc)?;
        let ub = self.loop_bound(end, loc)?;
        let st = step.map(|s| self.loop_bound(s, loc)).transpose()?.unwrap_or(1);
        if st == 0 {
            return fail(FrontendError::Semantic("loop step must not be zero".into()), loc);
        }
        let iters: Vec<usize> = self.assigned_outer(body).into_iter().collect();
        let inits = self.read_vars(&iters, loc)?;
        let mut arg_types = vec![Type::Index];
        arg_types.extend(vec![Type::Bit; iters.len()]);
        let block = self.m.create_block(&arg_types);
        let args = self.m.block_args(block).to_vec();
        self.m.set_value_name(args[0], var);
        self.push_scope(block);
        for (v, a) in iters.iter().zip(&args[1..]) {
            self.write_var(*v, *a);
        }
        self.loop_vars.push(var.to_string());
        self.lower_stmts(body)?;
        self.loop_vars.pop();
        let ys = self.read_vars(&iters, loc)?;
        self.build(
            InsertPoint::End(block),
            OperationState::new("cf.yield").operands(ys),
            loc,
        )?;
        self.pop_scope();
        let mut bounds = Vec::new();
        for b in [lb, ub, st] {
            bounds.push(self.build(self.cursor(), OpState::index_const(b), loc)?[0]);
        }
        let st = OperationState::new("cf.for")
            .operands(bounds)
            .operands(inits)
            .results(vec![Type::Bit; iters.len()])
            .region(Region::new(block));
        let rs = self.build(self.cursor(), st, loc)?;
        for (v, r) in iters.into_iter().zip(rs) {
            self.write_var(v, r);
        }
        Ok(())
    }

    fn lower_while(&mut self, cond: &Condition, body: &[Stmt], loc: &Location) -> LResult<()> {
        if cond.negated {
            return fail(FrontendError::UnsupportedFeature("negated while condition".into()), loc);
        }
        let cvar = self.resolve_bit(&cond.bit)?;
        let mut iters = self.assigned_outer(body);
        iters.insert(cvar);
        let iters: Vec<usize> = iters.into_iter().collect();
        let inits = self.read_vars(&iters, loc)?;
        let types = vec![Type::Bit; iters.len()];

        let cond_block = self.m.create_block(&types);
        let cargs = self.m.block_args(cond_block).to_vec();
        self.push_scope(cond_block);
        for (v, a) in iters.iter().zip(&cargs) {
            self.write_var(*v, *a);
        }
        let c = self.read_var(cvar, loc)?;
        self.build(
            InsertPoint::End(cond_block),
            OperationState::new("cf.condition").operand(c).operands(cargs),
            loc,
        )?;
        self.pop_scope();

        let body_block = self.m.create_block(&types);
        let bargs = self.m.block_args(body_block).to_vec();
        self.push_scope(body_block);
        for (v, a) in iters.iter().zip(&bargs) {
            self.write_var(*v, *a);
        }
        self.lower_stmts(body)?;
        let ys = self.read_vars(&iters, loc)?;
        self.build(
            InsertPoint::End(body_block),
            OperationState::new("cf.yield").operands(ys),
            loc,
        )?;
        self.pop_scope();

        let st = OperationState::new("cf.while")
            .operands(inits)
            .results(types)
            .region(Region::new(cond_block))
            .region(Region::new(body_block));
        let rs = self.build(self.cursor(), st, loc)?;
        for (v, r) in iters.into_iter().zip(rs) {
            self.write_var(v, r);
        }
        Ok(())
    }

    fn gate_def(
        &mut self,
        name: &str,
        params: &[String],
        qubits: &[String],
        body: &[Stmt],
        loc: &Location,
    ) -> LResult<()> {
        if !self.at_global_scope() {
            return fail(
                FrontendError::Semantic("gates must be defined at global scope".into()),
                loc,
            );
        }
        self.check_fresh_name(name, loc)?;
        let mut seen = HashSet::new();
        for n in params.iter().chain(qubits) {
            if !seen.insert(n) {
                return fail(FrontendError::Semantic(format!("duplicate gate argument `{n}`")), loc);
            }
        }
        let mut types = vec![Type::Float64; params.len()];
        types.extend(vec![Type::QubitRef; qubits.len()]);
        let block = self.m.create_block(&types);
        let args = self.m.block_args(block).to_vec();
        for (n, a) in params.iter().chain(qubits).zip(&args) {
            self.m.set_value_name(*a, n.clone());
        }
        self.gate_body = Some(GateBody {
            name: name.to_string(),
            params: params.iter().cloned().zip(args.iter().copied()).collect(),
            qubits: qubits
                .iter()
                .cloned()
                .zip(args[params.len()..].iter().copied())
                .collect(),
        });
        self.push_scope(block);
        let result = self.lower_stmts(body);
        self.pop_scope();
        self.gate_body = None;
        result?;
        let body_block = self.m.body();
        self.build(
            InsertPoint::End(body_block),
            OperationState::new("qc.gate_def")
                .attr("sym_name", Attribute::Text(name.to_string()))
                .region(Region::new(block)),
            loc,
        )?;
        self.gates.insert(
            name.to_string(),
            GateSig {
                params: params.len(),
                qubits: qubits.len(),
            },
        );
        Ok(())
    }

    // ---- gate applications ---------------------------------------------------

    fn gate_call(&mut self, call: &GateCall) -> LResult<()> {
        let loc = &call.loc;
        let mut mods = Vec::new();
        for m in &call.modifiers {
            mods.push(match m {
                GateModifier::Ctrl(n) => Mod::Ctrl(vec![true; *n as usize]),
                GateModifier::NegCtrl(n) => Mod::Ctrl(vec![false; *n as usize]),
                GateModifier::Inv => Mod::Inv,
                GateModifier::Pow(e) => match e.fold_int() {
                    Some(k) => Mod::Pow(k),
                    None => {
                        return fail(
                            FrontendError::UnsupportedFeature("non-integer power modifier".into()),
                            loc,
                        )
                    }
                },
            });
        }
        let (base, base_qubits, want_params, fixed) = if let Some(g) = std_gate(&call.name) {
            mods.extend(std::iter::repeat_n(Mod::Ctrl(vec![true]), g.implied_controls));
            (Ok(g.kind), g.kind.num_qubits(), g.params, g.fixed)
        } else if let Some(sig) = self.gates.get(&call.name) {
            (Err(call.name.clone()), sig.qubits, sig.params, Vec::new())
        } else if self.gate_body.as_ref().is_some_and(|g| g.name == call.name) {
            return fail(FrontendError::RecursiveGateDefinition(call.name.clone()), loc);
        } else {
            return fail(FrontendError::UndeclaredIdentifier(call.name.clone()), loc);
        };
        if call.params.len() != want_params {
            return fail(
                FrontendError::Semantic(format!(
                    "gate `{}` takes {want_params} parameters, {} given",
                    call.name,
                    call.params.len()
                )),
                loc,
            );
        }
        let controls: usize = mods
            .iter()
            .map(|m| if let Mod::Ctrl(p) = m { p.len() } else { 0 })
            .sum();
        let want_qubits = controls + base_qubits;
        if call.qubits.len() != want_qubits {
            return fail(
                FrontendError::Semantic(format!(
                    "gate `{}` applies to {want_qubits} qubits, {} given",
                    call.name,
                    call.qubits.len()
                )),
                loc,
            );
        }
        let operand_lists: Vec<Vec<ValueId>> = call
            .qubits
            .iter()
            .map(|q| self.resolve_qubits(q))
            .collect::<LResult<_>>()?;
        let width = operand_lists.iter().map(Vec::len).max().unwrap_or(1);
        if operand_lists.iter().any(|l| l.len() != 1 && l.len() != width) {
            return fail(
                FrontendError::Semantic("registers of different sizes in one gate application".into()),
                loc,
            );
        }
        for i in 0..width {
            let qs: Vec<ValueId> = operand_lists
                .iter()
                .map(|l| if l.len() == 1 { l[0] } else { l[i] })
                .collect();
            let mut distinct = HashSet::new();
            if !qs.iter().all(|q| distinct.insert(*q)) {
                return fail(
                    FrontendError::Semantic(format!("gate `{}` applied to the same qubit twice", call.name)),
                    loc,
                );
            }
            let angles = self.angles(&call.params, &fixed, loc)?;
            let at = self.cursor();
            self.build_modified(at, &mods, &base, angles, &qs, loc)?;
        }
        Ok(())
    }

    fn angles(&mut self, params: &[Expr], fixed: &[f64], loc: &Location) -> LResult<Angles> {
        let folded: Option<Vec<f64>> = params.iter().map(Expr::fold).collect();
        if let Some(mut vals) = folded {
            let mut all = fixed.to_vec();
            all.append(&mut vals);
            return Ok(Angles::Const(all));
        }
        for p in params {
            if let Some((id, l)) = p.free_ident() {
                let known = self.gate_body.as_ref().is_some_and(|g| g.params.contains_key(id));
                if known {
                    continue;
                }
                if self.loop_vars.iter().any(|v| v == id) {
                    return fail(
                        FrontendError::UnsupportedFeature("loop variable used in an expression".into()),
                        l,
                    );
                }
                return fail(FrontendError::UndeclaredIdentifier(id.to_string()), l);
            }
        }
        let mut values = Vec::new();
        for x in fixed {
            values.push(self.build(self.cursor(), OpState::float_const(*x), loc)?[0]);
        }
        for p in params {
            values.push(self.lower_expr(p, loc)?);
        }
        Ok(Angles::Values(values))
    }

    fn lower_expr(&mut self, e: &Expr, loc: &Location) -> LResult<ValueId> {
        if let Some(x) = e.fold() {
            return Ok(self.build(self.cursor(), OpState::float_const(x), loc)?[0]);
        }
        match e {
            Expr::Ident(name, l) => match self.gate_body.as_ref().and_then(|g| g.params.get(name)) {
                Some(v) => Ok(*v),
                None => fail(FrontendError::UndeclaredIdentifier(name.clone()), l),
            },
            Expr::Neg(inner) => {
                let v = self.lower_expr(inner, loc)?;
                Ok(self.build(
                    self.cursor(),
                    OperationState::new("arith.negf").operand(v).result(Type::Float64),
                    loc,
                )?[0])
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (self.lower_expr(a, loc)?, self.lower_expr(b, loc)?);
                let name = match op {
                    BinOp::Add => "arith.addf",
                    BinOp::Sub => "arith.subf",
                    BinOp::Mul => "arith.mulf",
                    BinOp::Div => "arith.divf",
                };
                Ok(self.build(
                    self.cursor(),
                    OperationState::new(name).operand(a).operand(b).result(Type::Float64),
                    loc,
                )?[0])
            }
            Expr::Int(_) | Expr::Float(_) => unreachable!("constants fold"),
        }
    }

    fn build_modified(
        &mut self,
        at: InsertPoint,
        mods: &[Mod],
        base: &Result<GateKind, String>,
        angles: Angles,
        qubits: &[ValueId],
        loc: &Location,
    ) -> LResult<()> {
        let Some((first, rest)) = mods.split_first() else {
            let (name, extra_attrs) = match base {
                Ok(kind) => (format!("qc.{kind}"), None),
                Err(callee) => ("qc.call_gate".to_string(), Some(Attribute::Text(callee.clone()))),
            };
            let mut st = OperationState::new(name);
            if let Some(c) = extra_attrs {
                st = st.attr("callee", c);
            }
            match angles {
                Angles::Const(a) => {
                    if let Some((k, v)) = crate::dialect::unitary::angles_to_attrs(&a) {
                        st = st.attr(k, v);
                    }
                }
                Angles::Values(vs) => st = st.operands(vs),
            }
            self.build(at, st.operands(qubits.iter().copied()), loc)?;
            return Ok(());
        };
        let block = self.m.create_block(&[]);
        let (st, inner_qubits) = match first {
            Mod::Ctrl(pol) => {
                let n = pol.len();
                let mut st = OperationState::new("qc.ctrl").operands(qubits[..n].iter().copied());
                if pol.iter().any(|p| !p) {
                    st = st.attr(
                        "polarities",
                        Attribute::Array(pol.iter().map(|p| Attribute::Bool(*p)).collect()),
                    );
                }
                (st, &qubits[n..])
            }
            Mod::Inv => (OperationState::new("qc.inv"), qubits),
            Mod::Pow(k) => (
                OperationState::new("qc.pow").attr("exponent", Attribute::Int(*k)),
                qubits,
            ),
        };
        // angle values (gate bodies) must dominate the nested op, so they are
        // created at the outer cursor before the wrapper
        self.build_modified(InsertPoint::End(block), rest, base, angles, inner_qubits, loc)?;
        self.build(at, st.region(Region::new(block)), loc)?;
        Ok(())
    }
}

type ValueIdList = Vec<ValueId>;

/// Shorthands for frequently built ops.
struct OpState;

impl OpState {
    fn alloc() -> OperationState {
        OperationState::new("qc.alloc").result(Type::QubitRef)
    }

    fn reset(q: ValueId) -> OperationState {
        OperationState::new("qc.reset").operand(q)
    }

    fn measure(q: ValueId) -> OperationState {
        OperationState::new("qc.measure").operand(q).result(Type::Bit)
    }

    fn bit_const(v: bool) -> OperationState {
        OperationState::new("arith.constant")
            .attr("value", Attribute::Bool(v))
            .result(Type::Bit)
    }

    fn index_const(v: i64) -> OperationState {
        OperationState::new("arith.constant")
            .attr("value", Attribute::Int(v))
            .result(Type::Index)
    }

    fn float_const(v: f64) -> OperationState {
        OperationState::new("arith.constant")
            .attr("value", Attribute::Float(v))
            .result(Type::Float64)
    }
}

#[cfg(test)]
mod tests {
    use crate::emit::print_ir;
    use crate::frontend::{import_qasm, FrontendError};

    fn lower(src: &str) -> String {
        print_ir(&import_qasm(&format!("OPENQASM 3;\n{src}"), "t.qasm").unwrap())
    }

    fn error(src: &str) -> FrontendError {
        import_qasm(&format!("OPENQASM 3;\n{src}"), "t.qasm").unwrap_err().error
    }

    #[test]
    fn registers_are_allocated_then_extracted() {
        let ir = lower("qubit[2] q;\nh q[1];\n");
        assert!(ir.contains("%q = qc.alloc_reg { size = 2 } : !qc.qreg<2>"), "{ir}");
        assert!(ir.contains("%q1 = qc.extract(%q) { index = 1 } : !qc.qubit"), "{ir}");
        assert_eq!(ir.matches("qc.dealloc").count(), 2);
        assert!(ir.contains("qc.h(%q1)"));
    }

    #[test]
    fn legacy_gate_names_map_to_standard_ones() {
        let ir = lower("qubit q;\nu1(0.5) q;\nU(0.1, 0.2, 0.3) q;\n");
        assert!(ir.contains("qc.p(%q) { angle = 0.5 }"), "{ir}");
        assert!(ir.contains("qc.u(%q)"), "{ir}");
    }

    #[test]
    fn modifiers_nest_outermost_first() {
        let ir = lower("qubit[2] q;\nctrl @ inv @ s q[0], q[1];\n");
        assert!(ir.contains("qc.ctrl(%q0) {\n  qc.inv { qc.s(%q1) }\n}"), "{ir}");
    }

    #[test]
    fn semantic_errors() {
        assert_eq!(error("h q;\n"), FrontendError::UndeclaredIdentifier("q".into()));
        assert!(matches!(error("qubit[2] q;\nh q[2];\n"), FrontendError::Semantic(_)));
        assert!(matches!(error("qubit q;\ncx q, q;\n"), FrontendError::Semantic(_)));
        assert!(matches!(
            error("gate g a { g a; }\n"),
            FrontendError::RecursiveGateDefinition(_) | FrontendError::UndeclaredIdentifier(_)
        ));
    }
}
