//! OpenQASM 3 emitter for imperative-dialect modules.
//!
//! Every `qc.alloc_reg` becomes a `qubit[n]` register and every `qc.alloc` a
//! scalar `qubit`. Classical `i1` values are grouped into bit variables: the
//! values tied together by control flow (results, loop-carried arguments and
//! the yields feeding them) share one variable, declared at the start of the
//! innermost block enclosing all of them. Deallocations and index constants
//! have no QASM counterpart and are not printed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::dialect::registry::{gate_kind, is_modifier};
use crate::dialect::unitary::{angle_attrs, modifier_body_op};
use crate::dialect::GateKind;
use crate::ir::{format_f64, Attribute, BlockId, Module, OpId, Type, ValueDef, ValueId};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QasmEmitError {
    #[error("`{0}` belongs to the functional dialect; bufferize before emitting OpenQASM")]
    WrongDialect(String),
    #[error("`{op}` cannot be expressed in OpenQASM: {reason}")]
    Unsupported { op: String, reason: String },
}

const RESERVED: &[&str] = &[
    "OPENQASM",
    "include",
    "qubit",
    "qreg",
    "bit",
    "creg",
    "measure",
    "reset",
    "if",
    "else",
    "for",
    "while",
    "in",
    "gate",
    "ctrl",
    "negctrl",
    "inv",
    "pow",
    "true",
    "false",
    "pi",
    "tau",
    "euler",
    "U",
    "CX",
    "barrier",
    "def",
    "defcal",
    "cal",
    "delay",
    "box",
    "let",
    "const",
    "input",
    "output",
    "extern",
    "opaque",
    "gphase",
    "int",
    "uint",
    "float",
    "angle",
    "bool",
    "complex",
    "array",
    "switch",
    "break",
    "continue",
    "return",
    "end",
    "duration",
    "stretch",
    "durationof",
    "pragma",
    "id",
    "h",
    "x",
    "y",
    "z",
    "s",
    "sdg",
    "t",
    "tdg",
    "sx",
    "sxdg",
    "swap",
    "rx",
    "ry",
    "rz",
    "p",
    "phase",
    "u",
    "u1",
    "u2",
    "u3",
    "cx",
    "cnot",
    "cy",
    "cz",
    "ch",
    "crx",
    "cry",
    "crz",
    "cp",
    "cphase",
    "cu1",
    "cswap",
    "ccx",
    "toffoli",
];

/// Hands out identifiers that are valid, unreserved and unique.
struct Names {
    used: HashSet<String>,
}

impl Names {
    fn fresh(&mut self, hint: Option<&str>, fallback: &str) -> String {
        let mut base: String = hint
            .unwrap_or("")
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        if base.is_empty() || base.starts_with(|c: char| c.is_ascii_digit()) {
            base = format!("{fallback}{base}");
        }
        let name = if !self.used.contains(&base) && !RESERVED.contains(&base.as_str()) {
            base
        } else {
            (1..)
                .map(|i| format!("{base}_{i}"))
                .find(|c| !self.used.contains(c))
                .expect("unbounded search")
        };
        self.used.insert(name.clone());
        name
    }
}

fn find(parent: &mut HashMap<ValueId, ValueId>, v: ValueId) -> ValueId {
    let p = *parent.entry(v).or_insert(v);
    if p == v {
        return v;
    }
    let root = find(parent, p);
    parent.insert(v, root);
    root
}

fn union(parent: &mut HashMap<ValueId, ValueId>, a: ValueId, b: ValueId) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // keep the older value as representative for deterministic naming
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent.insert(hi, lo);
    }
}

struct Emitter<'a> {
    m: &'a Module,
    names: Names,
    qubit_text: HashMap<ValueId, String>,
    params: HashMap<ValueId, String>,
    gates: HashMap<String, String>,
    class_of: HashMap<ValueId, ValueId>,
    class_name: HashMap<ValueId, String>,
    /// Classes to declare at the start of each block, in declaration order.
    declare: HashMap<BlockId, Vec<ValueId>>,
    out: String,
}

/// Emits an imperative-dialect module as OpenQASM 3.
pub fn emit_qasm(m: &Module) -> Result<String, QasmEmitError> {
    for op in m.walk() {
        if m.op_name(op).starts_with("qco.") {
            return Err(QasmEmitError::WrongDialect(m.op_name(op).to_string()));
        }
    }
    let mut e = Emitter {
        m,
        names: Names { used: HashSet::new() },
        qubit_text: HashMap::new(),
        params: HashMap::new(),
        gates: HashMap::new(),
        class_of: HashMap::new(),
        class_name: HashMap::new(),
        declare: HashMap::new(),
        out: String::from("OPENQASM 3.0;\ninclude \"stdgates.inc\";\n"),
    };
    e.name_symbols();
    e.bit_classes();
    e.block(m.body(), 0)?;
    Ok(e.out)
}

impl Emitter<'_> {
    fn name_symbols(&mut self) {
        let m = self.m;
        for op in m.walk() {
            match m.op_name(op) {
                "qc.gate_def" => {
                    let sym = m.attr(op, "sym_name").and_then(Attribute::as_text).unwrap_or("g");
                    let name = self.names.fresh(Some(sym), "g");
                    self.gates.insert(sym.to_string(), name);
                    for &a in m.block_args(m.region_block(op, 0)) {
                        let fallback = if *m.value_type(a) == Type::Float64 {
                            "theta"
                        } else {
                            "a"
                        };
                        let n = self.names.fresh(m.value_name(a), fallback);
                        self.params.insert(a, n);
                    }
                }
                "qc.alloc" | "qc.alloc_reg" => {
                    let r = m.results(op)[0];
                    let n = self.names.fresh(m.value_name(r), "q");
                    self.qubit_text.insert(r, n);
                }
                "qc.extract" => {
                    let reg = m.operands(op)[0];
                    let idx = m.attr(op, "index").and_then(Attribute::as_int).unwrap_or(0);
                    if let Some(base) = self.qubit_text.get(&reg).cloned() {
                        self.qubit_text.insert(m.results(op)[0], format!("{base}[{idx}]"));
                    }
                }
                _ => {}
            }
        }
    }

    /// Groups `i1` values into variables and decides where each is declared.
    fn bit_classes(&mut self) {
        let m = self.m;
        let mut parent: HashMap<ValueId, ValueId> = HashMap::new();
        let mut bits: Vec<ValueId> = Vec::new();
        let mut result_lists: Vec<Vec<ValueId>> = Vec::new();
        for op in m.walk() {
            for &r in m.results(op) {
                if *m.value_type(r) == Type::Bit {
                    bits.push(r);
                }
            }
            for region in m.regions(op) {
                for &b in &region.blocks {
                    bits.extend(
                        m.block_args(b)
                            .iter()
                            .copied()
                            .filter(|a| *m.value_type(*a) == Type::Bit),
                    );
                }
            }
            let results = m.results(op).to_vec();
            let yield_of = |i: usize| m.terminator(m.region_block(op, i)).map(|t| m.operands(t).to_vec());
            let tie = |a: ValueId, b: ValueId, parent: &mut HashMap<ValueId, ValueId>| {
                if *m.value_type(a) == Type::Bit && *m.value_type(b) == Type::Bit {
                    union(parent, a, b);
                }
            };
            match m.op_name(op) {
                "cf.if" => {
                    for i in 0..2 {
                        for (r, y) in results.iter().zip(yield_of(i).unwrap_or_default()) {
                            tie(*r, y, &mut parent);
                        }
                    }
                }
                "cf.for" => {
                    let body = m.region_block(op, 0);
                    let args = m.block_args(body);
                    let ys = yield_of(0).unwrap_or_default();
                    for (i, r) in results.iter().enumerate() {
                        tie(*r, m.operands(op)[3 + i], &mut parent);
                        tie(*r, args[1 + i], &mut parent);
                        if let Some(y) = ys.get(i) {
                            tie(*r, *y, &mut parent);
                        }
                    }
                }
                "cf.while" => {
                    let cargs = m.block_args(m.region_block(op, 0)).to_vec();
                    let bargs = m.block_args(m.region_block(op, 1)).to_vec();
                    let cond = yield_of(0).unwrap_or_default();
                    let ys = yield_of(1).unwrap_or_default();
                    for (i, r) in results.iter().enumerate() {
                        tie(*r, m.operands(op)[i], &mut parent);
                        tie(*r, cargs[i], &mut parent);
                        tie(*r, bargs[i], &mut parent);
                        if let Some(c) = cond.get(1 + i) {
                            tie(*r, *c, &mut parent);
                        }
                        if let Some(y) = ys.get(i) {
                            tie(*r, *y, &mut parent);
                        }
                    }
                }
                _ => {}
            }
            if matches!(m.op_name(op), "cf.if" | "cf.for" | "cf.while") {
                result_lists.push(results.into_iter().filter(|r| *m.value_type(*r) == Type::Bit).collect());
            }
        }

        let mut members: BTreeMap<ValueId, Vec<ValueId>> = BTreeMap::new();
        let mut first_seen: HashMap<ValueId, usize> = HashMap::new();
        for (i, &v) in bits.iter().enumerate() {
            let c = find(&mut parent, v);
            self.class_of.insert(v, c);
            members.entry(c).or_default().push(v);
            first_seen.entry(c).or_insert(i);
        }

        // declaration order must agree with the result order of every cf op
        let mut succ: HashMap<ValueId, Vec<ValueId>> = HashMap::new();
        let mut indeg: HashMap<ValueId, usize> = members.keys().map(|c| (*c, 0)).collect();
        for list in &result_lists {
            for w in list.windows(2) {
                let (a, b) = (self.class_of[&w[0]], self.class_of[&w[1]]);
                if a != b {
                    succ.entry(a).or_default().push(b);
                    *indeg.get_mut(&b).expect("known class") += 1;
                }
            }
        }
        let mut order: Vec<ValueId> = Vec::new();
        let mut ready: Vec<ValueId> = indeg.iter().filter(|(_, d)| **d == 0).map(|(c, _)| *c).collect();
        while !ready.is_empty() {
            ready.sort_by_key(|c| std::cmp::Reverse(first_seen[c]));
            let c = ready.pop().expect("nonempty");
            order.push(c);
            for s in succ.remove(&c).unwrap_or_default() {
                let d = indeg.get_mut(&s).expect("known class");
                *d -= 1;
                if *d == 0 {
                    ready.push(s);
                }
            }
        }
        if order.len() != members.len() {
            // inconsistent constraints; fall back to appearance order
            order = members.keys().copied().collect();
            order.sort_by_key(|c| first_seen[c]);
        }

        for c in order {
            let vals = &members[&c];
            let needs_var = vals.len() > 1
                || vals.iter().any(|v| m.has_uses(*v))
                || vals
                    .iter()
                    .any(|v| m.defining_op(*v).is_some_and(|o| m.op_name(o) == "arith.constant"));
            if !needs_var {
                continue;
            }
            let home = vals
                .iter()
                .filter_map(|v| self.def_block(*v))
                .reduce(|a, b| self.common_block(a, b))
                .unwrap_or(m.body());
            let hint = vals.iter().find_map(|v| m.value_name(*v));
            let name = self.names.fresh(hint, "c");
            self.class_name.insert(c, name);
            self.declare.entry(home).or_default().push(c);
        }
    }

    fn def_block(&self, v: ValueId) -> Option<BlockId> {
        match self.m.value_def(v) {
            ValueDef::BlockArg { block, .. } => Some(block),
            ValueDef::Result { op, .. } => self.m.parent_block(op),
        }
    }

    fn ancestors(&self, mut b: BlockId) -> Vec<BlockId> {
        let mut out = vec![b];
        while let Some(op) = self.m.block_parent_op(b) {
            match self.m.parent_block(op) {
                Some(p) => {
                    out.push(p);
                    b = p;
                }
                None => break,
            }
        }
        out
    }

    fn common_block(&self, a: BlockId, b: BlockId) -> BlockId {
        let bs = self.ancestors(b);
        self.ancestors(a)
            .into_iter()
            .find(|x| bs.contains(x))
            .unwrap_or(self.m.body())
    }

    fn bit_var(&self, v: ValueId) -> Option<&str> {
        self.class_of
            .get(&v)
            .and_then(|c| self.class_name.get(c))
            .map(String::as_str)
    }

    fn unsupported<T>(&self, op: OpId, reason: &str) -> Result<T, QasmEmitError> {
        Err(QasmEmitError::Unsupported {
            op: self.m.op_name(op).to_string(),
            reason: reason.to_string(),
        })
    }

    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, b: BlockId, depth: usize) -> Result<(), QasmEmitError> {
        for c in self.declare.get(&b).cloned().unwrap_or_default() {
            let line = format!("bit {};", self.class_name[&c]);
            self.line(depth, &line);
        }
        for &op in self.m.block_ops(b) {
            self.op(op, depth)?;
        }
        Ok(())
    }

    /// Renders `head { body }`, inline when the body is a single statement.
    fn braced(&mut self, b: BlockId, depth: usize, head: &str) -> Result<String, QasmEmitError> {
        let mark = self.out.len();
        self.block(b, depth + 1)?;
        let body = self.out.split_off(mark);
        let indent = "  ".repeat(depth);
        let lines: Vec<&str> = body.lines().collect();
        Ok(match lines.as_slice() {
            [] => format!("{indent}{head} {{ }}\n"),
            [one] => format!("{indent}{head} {{ {} }}\n", one.trim_start()),
            _ => format!("{indent}{head} {{\n{body}{indent}}}\n"),
        })
    }

    fn qubit(&self, op: OpId, v: ValueId) -> Result<String, QasmEmitError> {
        self.qubit_text
            .get(&v)
            .or_else(|| self.params.get(&v))
            .cloned()
            .map_or_else(|| self.unsupported(op, "qubit operand has no name"), Ok)
    }

    fn op(&mut self, op: OpId, depth: usize) -> Result<(), QasmEmitError> {
        let m = self.m;
        let name = m.op_name(op);
        match name {
            "qc.alloc" => {
                let line = format!("qubit {};", self.qubit_text[&m.results(op)[0]]);
                self.line(depth, &line);
            }
            "qc.alloc_reg" => {
                let size = m.attr(op, "size").and_then(Attribute::as_int).unwrap_or(1);
                let line = format!("qubit[{size}] {};", self.qubit_text[&m.results(op)[0]]);
                self.line(depth, &line);
            }
            "qc.extract" | "qc.dealloc" | "cf.yield" | "cf.condition" => {}
            "qc.measure" => {
                let q = self.qubit(op, m.operands(op)[0])?;
                let line = match self.bit_var(m.results(op)[0]) {
                    Some(c) => format!("{c} = measure {q};"),
                    None => format!("measure {q};"),
                };
                self.line(depth, &line);
            }
            "qc.reset" => {
                let q = self.qubit(op, m.operands(op)[0])?;
                self.line(depth, &format!("reset {q};"));
            }
            "arith.constant" => {
                let r = m.results(op)[0];
                if *m.value_type(r) == Type::Bit {
                    let v = m.attr(op, "value").and_then(Attribute::as_bool).unwrap_or(false);
                    if let Some(c) = self.bit_var(r) {
                        let line = format!("{c} = {};", u8::from(v));
                        self.line(depth, &line);
                    }
                }
            }
            "arith.addf" | "arith.subf" | "arith.mulf" | "arith.divf" | "arith.negf" => {}
            "qc.gate_def" => {
                let block = m.region_block(op, 0);
                let sym = m.attr(op, "sym_name").and_then(Attribute::as_text).unwrap_or_default();
                let gname = self.gates[sym].clone();
                let args = m.block_args(block);
                let params: Vec<&str> = args
                    .iter()
                    .filter(|a| *m.value_type(**a) == Type::Float64)
                    .map(|a| self.params[a].as_str())
                    .collect();
                let qubits: Vec<&str> = args
                    .iter()
                    .filter(|a| *m.value_type(**a) != Type::Float64)
                    .map(|a| self.params[a].as_str())
                    .collect();
                let head = if params.is_empty() {
                    format!("gate {gname} {}", qubits.join(", "))
                } else {
                    format!("gate {gname}({}) {}", params.join(", "), qubits.join(", "))
                };
                let text = self.braced(block, depth, &head)?;
                self.out.push_str(&text);
            }
            "cf.if" => {
                let Some(c) = self.bit_var(m.operands(op)[0]).map(str::to_string) else {
                    return self.unsupported(op, "condition is not a bit variable");
                };
                let (then_b, else_b) = (m.region_block(op, 0), m.region_block(op, 1));
                let has_else = m.block_ops(else_b).iter().any(|o| m.op_name(*o) != "cf.yield");
                let then_empty = m.block_ops(then_b).iter().all(|o| m.op_name(*o) == "cf.yield");
                if then_empty && has_else {
                    let text = self.braced(else_b, depth, &format!("if (!{c})"))?;
                    self.out.push_str(&text);
                    return Ok(());
                }
                let mut text = self.braced(then_b, depth, &format!("if ({c})"))?;
                if has_else {
                    text.pop();
                    text.push(' ');
                    text.push_str(self.braced(else_b, depth, "else")?.trim_start());
                }
                self.out.push_str(&text);
            }
            "cf.for" => {
                let mut bounds = Vec::new();
                for &v in &m.operands(op)[..3] {
                    match m.defining_op(v).filter(|d| m.op_name(*d) == "arith.constant") {
                        Some(d) => bounds.push(m.attr(d, "value").and_then(Attribute::as_int).unwrap_or(0)),
                        None => return self.unsupported(op, "loop bounds must be constants"),
                    }
                }
                let body = m.region_block(op, 0);
                let iv = m.block_args(body)[0];
                let var = self.names.fresh(m.value_name(iv), "i");
                let range = if bounds[2] == 1 {
                    format!("[{}:{}]", bounds[0], bounds[1])
                } else {
                    format!("[{}:{}:{}]", bounds[0], bounds[2], bounds[1])
                };
                let text = self.braced(body, depth, &format!("for uint {var} in {range}"))?;
                self.out.push_str(&text);
            }
            "cf.while" => {
                let cond_b = m.region_block(op, 0);
                let cargs = m.block_args(cond_b).to_vec();
                let ops = m.block_ops(cond_b);
                let trivial = ops.len() == 1
                    && m.op_name(ops[0]) == "cf.condition"
                    && m.operands(ops[0])[1..] == cargs[..]
                    && cargs.contains(&m.operands(ops[0])[0]);
                if !trivial {
                    return self.unsupported(op, "the loop condition must be a carried bit");
                }
                let Some(c) = self.bit_var(m.operands(ops[0])[0]).map(str::to_string) else {
                    return self.unsupported(op, "condition is not a bit variable");
                };
                let text = self.braced(m.region_block(op, 1), depth, &format!("while ({c})"))?;
                self.out.push_str(&text);
            }
            _ if gate_kind(name).is_some() || is_modifier(name) || name == "qc.call_gate" => {
                let text = self.gate(op)?;
                self.line(depth, &text);
            }
            _ => return self.unsupported(op, "no OpenQASM equivalent"),
        }
        Ok(())
    }

    fn gate(&self, op: OpId) -> Result<String, QasmEmitError> {
        let m = self.m;
        let mut prefix = String::new();
        let mut qubits: Vec<ValueId> = Vec::new();
        let mut cur = op;
        while is_modifier(m.op_name(cur)) {
            match m.op_name(cur) {
                "qc.ctrl" => {
                    let controls = m.operands(cur);
                    let pol: Vec<bool> = m
                        .attr(cur, "polarities")
                        .and_then(Attribute::as_array)
                        .map(|a| a.iter().map(|p| p.as_bool().unwrap_or(true)).collect())
                        .unwrap_or_else(|| vec![true; controls.len()]);
                    let mut i = 0;
                    while i < pol.len() {
                        let run = pol[i..].iter().take_while(|p| **p == pol[i]).count();
                        let word = if pol[i] { "ctrl" } else { "negctrl" };
                        if run == 1 {
                            let _ = write!(prefix, "{word} @ ");
                        } else {
                            let _ = write!(prefix, "{word}({run}) @ ");
                        }
                        i += run;
                    }
                    qubits.extend_from_slice(controls);
                }
                "qc.inv" => prefix.push_str("inv @ "),
                "qc.pow" => {
                    let k = m.attr(cur, "exponent").and_then(Attribute::as_int).unwrap_or(1);
                    let _ = write!(prefix, "pow({k}) @ ");
                }
                _ => return self.unsupported(cur, "functional-dialect modifier"),
            }
            cur = match modifier_body_op(m, cur) {
                Some(b) => b,
                None => return self.unsupported(cur, "modifier body must hold one gate"),
            };
        }
        let name = m.op_name(cur);
        let (gname, nq) = match gate_kind(name) {
            Some(GateKind::I) => ("id".to_string(), 1),
            Some(k) => (k.mnemonic().to_string(), k.num_qubits()),
            None if name == "qc.call_gate" => {
                let callee = m.attr(cur, "callee").and_then(Attribute::as_text).unwrap_or_default();
                let Some(g) = self.gates.get(callee) else {
                    return self.unsupported(cur, "call to an undefined gate");
                };
                let nq = m
                    .operands(cur)
                    .iter()
                    .filter(|v| *m.value_type(**v) != Type::Float64)
                    .count();
                (g.clone(), nq)
            }
            None => return self.unsupported(cur, "not a gate"),
        };
        let operands = m.operands(cur);
        let nangle = operands.len() - nq;
        let params: Vec<String> = if nangle > 0 {
            operands[..nangle]
                .iter()
                .map(|v| self.expr(*v, cur).map(strip_parens))
                .collect::<Result<_, _>>()?
        } else {
            angle_attrs(m, cur).into_iter().map(format_f64).collect()
        };
        qubits.extend_from_slice(&operands[nangle..]);
        let qs: Vec<String> = qubits.iter().map(|q| self.qubit(cur, *q)).collect::<Result<_, _>>()?;
        let args = if params.is_empty() {
            String::new()
        } else {
            format!("({})", params.join(", "))
        };
        Ok(format!("{prefix}{gname}{args} {};", qs.join(", ")))
    }

    fn expr(&self, v: ValueId, user: OpId) -> Result<String, QasmEmitError> {
        let m = self.m;
        if let Some(p) = self.params.get(&v) {
            return Ok(p.clone());
        }
        let Some(d) = m.defining_op(v) else {
            return self.unsupported(user, "angle is not a gate parameter");
        };
        let operand = |i: usize| self.expr(m.operands(d)[i], user);
        Ok(match m.op_name(d) {
            "arith.constant" => match m.attr(d, "value").and_then(Attribute::as_f64) {
                Some(x) => format_f64(x),
                None => return self.unsupported(user, "non-float angle"),
            },
            "arith.negf" => {
                let inner = operand(0)?;
                if inner.starts_with('(') || !inner.starts_with('-') {
                    format!("-{inner}")
                } else {
                    format!("-({inner})")
                }
            }
            "arith.addf" => format!("({} + {})", operand(0)?, operand(1)?),
            "arith.subf" => format!("({} - {})", operand(0)?, operand(1)?),
            "arith.mulf" => format!("({} * {})", operand(0)?, operand(1)?),
            "arith.divf" => format!("({} / {})", operand(0)?, operand(1)?),
            _ => return self.unsupported(user, "angle expression uses an unsupported operation"),
        })
    }
}

/// Drops one pair of parentheses enclosing the whole expression.
fn strip_parens(e: String) -> String {
    if !e.starts_with('(') {
        return e;
    }
    let mut depth = 0;
    for (i, c) in e.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return if i == e.len() - 1 { e[1..i].to_string() } else { e };
                }
            }
            _ => {}
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::import_qasm;
    use crate::ir::structural::structural_diff;

    fn round_trip(src: &str) -> String {
        let m = import_qasm(src, "t.qasm").unwrap();
        let text = emit_qasm(&m).unwrap();
        let back = import_qasm(&text, "out.qasm").unwrap_or_else(|e| panic!("{e}\n{text}"));
        if let Some(d) = structural_diff(&m, &back) {
            panic!("{d}\n{text}");
        }
        text
    }

    #[test]
    fn bell() {
        let text = round_trip("OPENQASM 3.0; qubit[2] q; h q[0]; ctrl @ x q[0], q[1];");
        assert!(text.contains("h q[0];\nctrl @ x q[0], q[1];"), "{text}");
    }

    #[test]
    fn empty_module() {
        assert_eq!(
            emit_qasm(&Module::new()).unwrap(),
            "OPENQASM 3.0;\ninclude \"stdgates.inc\";\n"
        );
    }

    #[test]
    fn reset_idiom() {
        let text = round_trip("OPENQASM 3.0; qubit[1] q; bit c; h q[0]; c = measure q[0]; if (c) { x q[0]; }");
        assert!(text.contains("if (c) { x q[0]; }"), "{text}");
    }

    #[test]
    fn control_flow_and_gates() {
        round_trip(
            "OPENQASM 3.0;
            include \"stdgates.inc\";
            gate g(theta) a, b { ctrl @ rz(theta/2) a, b; h a; u2(0, -theta) b; rx(-(theta*2)) a; }
            qubit[2] q; qubit r; bit[2] c; bit d;
            negctrl(2) @ x q[0], q[1], r;
            inv @ pow(-2) @ s r;
            g(pi) q[1], r;
            c[0] = measure q[0];
            measure q[1] -> c[1];
            if (c[0]) { x q[0]; d = measure r; } else { h q; }
            for uint i in [0:3] { x r; c[1] = measure r; }
            for i in [4:-2:0] { if (d) { y r; } }
            while (d) { d = measure r; }
            if (c[1] == 0) x q[1];
            if (!c[0]) { z r; } else { bit e = measure r; if (e) { x r; } }",
        );
    }

    #[test]
    fn functional_dialect_is_rejected() {
        let m = crate::emit::parse_ir("qcir.module\n%q = qco.alloc : !qco.qubit\nqco.dealloc(%q)\n").unwrap();
        assert!(matches!(emit_qasm(&m), Err(QasmEmitError::WrongDialect(_))));
    }
}
