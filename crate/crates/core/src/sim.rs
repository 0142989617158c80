//! Dense statevector simulation and equivalence checking.
//!
//! Measurements are not sampled: every outcome with probability above
//! [`PRUNE_BELOW`] becomes its own branch, so two programs can be compared
//! exactly. Qubit 0 (the first allocated) is the least significant bit of a
//! basis index.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::dialect::registry::is_unitary;
use crate::dialect::unitary::{
    descriptor_matrix_with, descriptor_with_env, embed, qubit_operands, DescriptorError, ModuleGates,
};
use crate::dialect::{module_dialect, DialectKind, Matrix};
use crate::ir::{Attribute, BlockId, Location, Module, OpId, ValueId};
use crate::transforms::convert::bufferize;
use crate::transforms::RouteReport;

pub const MAX_QUBITS: usize = 12;
pub const MAX_UNITARY_QUBITS: usize = 6;
pub const DEFAULT_MAX_LOOP_ITERS: usize = 100;
/// Branches less likely than this are dropped.
pub const PRUNE_BELOW: f64 = 1e-12;
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;
const MAX_BRANCHES: usize = 1 << 16;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("program needs {needed} qubits, the simulator handles at most {limit}")]
    TooManyQubits { needed: usize, limit: usize },
    #[error("while loop did not terminate within {0} iterations")]
    UnboundedLoop(usize, Option<Location>),
    #[error("`{0}` has no unitary matrix")]
    NonUnitaryOp(String),
    #[error("measurement branching exceeded {0} branches")]
    TooManyBranches(usize),
    #[error("cannot compare: {0}")]
    ShapeMismatch(String),
    #[error("cannot simulate: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

/// Returns an imperative copy of `m` (bufferizing functional input).
pub fn as_imperative(m: &Module) -> Result<Module, SimError> {
    match module_dialect(m) {
        DialectKind::Qco => bufferize(m).map_err(|e| SimError::Unsupported(e.to_string())),
        DialectKind::Mixed => Err(SimError::Unsupported("module mixes both quantum dialects".into())),
        _ => Ok(m.clone()),
    }
}

// ---- state vectors -----------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two(), "amplitude count must be a power of two");
        StateVector {
            n: amps.len().trailing_zeros() as usize,
            amps,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Appends a qubit in |0⟩ as the new most significant bit.
    pub fn add_qubit(&mut self) -> usize {
        self.amps.resize(self.amps.len() * 2, Complex64::new(0.0, 0.0));
        self.n += 1;
        self.n - 1
    }

    /// Applies a `2^k × 2^k` matrix to `wires` (wire `i` is matrix qubit `i`).
    pub fn apply(&mut self, u: &Matrix, wires: &[usize]) {
        let dim = 1usize << wires.len();
        assert_eq!(u.nrows(), dim, "matrix size does not match wire count");
        let mask = wires.iter().fold(0usize, |acc, w| acc | (1 << w));
        let offsets: Vec<usize> = (0..dim)
            .map(|s| {
                wires
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (i, w)| acc | (((s >> i) & 1) << w))
            })
            .collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        for base in (0..self.amps.len()).filter(|b| b & mask == 0) {
            for (s, o) in offsets.iter().enumerate() {
                buf[s] = self.amps[base | o];
            }
            for (r, o) in offsets.iter().enumerate() {
                self.amps[base | o] = (0..dim).map(|s| u[(r, s)] * buf[s]).sum();
            }
        }
    }

    /// Probability that measuring `q` gives 1.
    pub fn probability_one(&self, q: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> q) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects `q` onto `outcome` and renormalizes.
    pub fn project(&mut self, q: usize, outcome: bool, probability: f64) {
        let scale = 1.0 / probability.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i >> q) & 1 == 1) == outcome {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn flip(&mut self, q: usize) {
        for i in 0..self.amps.len() {
            if (i >> q) & 1 == 0 {
                self.amps.swap(i, i | (1 << q));
            }
        }
    }

    /// Moves qubit `i` to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            amps[permute_index(i, perm)] = *a;
        }
        StateVector { n: self.n, amps }
    }

    /// Extends to `n` qubits with the new ones in |0⟩.
    pub fn padded(&self, n: usize) -> StateVector {
        let mut s = self.clone();
        while s.n < n {
            s.add_qubit();
        }
        s
    }
}

fn permute_index(i: usize, perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .fold(0, |acc, (q, p)| acc | (((i >> q) & 1) << p))
}

/// Matrix that moves qubit `i` to position `perm[i]`.
pub fn permutation_matrix(perm: &[usize]) -> Matrix {
    let dim = 1usize << perm.len();
    let mut p = Matrix::zeros(dim, dim);
    for i in 0..dim {
        p[(permute_index(i, perm), i)] = Complex64::new(1.0, 0.0);
    }
    p
}

// ---- simulation --------------------------------------------------------------

/// One path through the program.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// Measurement outcomes in execution order.
    pub record: Vec<bool>,
    pub probability: f64,
    pub state: StateVector,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutcomeDistribution {
    pub branches: Vec<Branch>,
}

/// Bitstring of a measurement record, first measurement leftmost.
pub fn record_key(record: &[bool]) -> String {
    record.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

impl OutcomeDistribution {
    /// Probability of each measurement record.
    pub fn probabilities(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for b in &self.branches {
            *out.entry(record_key(&b.record)).or_insert(0.0) += b.probability;
        }
        out
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

impl fmt::Display for OutcomeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.probabilities() {
            let key = if k.is_empty() { "-".to_string() } else { k };
            writeln!(f, "{key} {}", format_probability(p))?;
        }
        Ok(())
    }
}

/// Twelve decimals, trailing zeros trimmed.
pub fn format_probability(p: f64) -> String {
    let s = format!("{p:.12}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub max_qubits: usize,
    pub max_loop_iters: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_qubits: MAX_QUBITS,
            max_loop_iters: DEFAULT_MAX_LOOP_ITERS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Value {
    Bit(bool),
    Int(i64),
    Float(f64),
}

#[derive(Clone, Debug)]
struct Ctx {
    state: StateVector,
    record: Vec<bool>,
    probability: f64,
    qubits: HashMap<ValueId, usize>,
    values: HashMap<ValueId, Value>,
}

/// Simulates with default options.
pub fn simulate(m: &Module) -> Result<OutcomeDistribution, SimError> {
    simulate_with(m, &SimOptions::default())
}

pub fn simulate_with(m: &Module, options: &SimOptions) -> Result<OutcomeDistribution, SimError> {
    let m = as_imperative(m)?;
    let sim = Simulator {
        m: &m,
        options: *options,
        gates: ModuleGates::new(&m),
        matrices: Default::default(),
    };
    let start = Ctx {
        state: StateVector::zero(0),
        record: Vec::new(),
        probability: 1.0,
        qubits: HashMap::new(),
        values: HashMap::new(),
    };
    let ends = sim.block(m.body(), vec![start])?;
    Ok(OutcomeDistribution {
        branches: ends
            .into_iter()
            .map(|c| Branch {
                record: c.record,
                probability: c.probability,
                state: c.state,
            })
            .collect(),
    })
}

struct Simulator<'a> {
    m: &'a Module,
    options: SimOptions,
    gates: ModuleGates<'a>,
    matrices: std::cell::RefCell<HashMap<OpId, Matrix>>,
}

impl Simulator<'_> {
    fn block(&self, block: BlockId, mut ctxs: Vec<Ctx>) -> Result<Vec<Ctx>, SimError> {
        for &op in self.m.block_ops(block) {
            let mut next = Vec::with_capacity(ctxs.len());
            for c in ctxs {
                next.extend(self.op(op, c)?);
            }
            if next.len() > MAX_BRANCHES {
                return Err(SimError::TooManyBranches(MAX_BRANCHES));
            }
            ctxs = next;
        }
        Ok(ctxs)
    }

    fn values(&self, c: &Ctx, vs: &[ValueId]) -> Vec<Value> {
        vs.iter().map(|v| c.values[v]).collect()
    }

    fn bind(&self, c: &mut Ctx, vs: &[ValueId], values: &[Value]) {
        for (v, x) in vs.iter().zip(values) {
            c.values.insert(*v, *x);
        }
    }

    fn terminator_values(&self, c: &Ctx, block: BlockId) -> Vec<Value> {
        match self.m.terminator(block) {
            Some(t) if matches!(self.m.op_name(t), "cf.yield" | "cf.condition") => self.values(c, self.m.operands(t)),
            _ => Vec::new(),
        }
    }

    fn new_qubit(&self, c: &mut Ctx) -> Result<usize, SimError> {
        if c.state.num_qubits() >= self.options.max_qubits {
            return Err(SimError::TooManyQubits {
                needed: c.state.num_qubits() + 1,
                limit: self.options.max_qubits,
            });
        }
        Ok(c.state.add_qubit())
    }

    fn matrix(&self, op: OpId) -> Result<Matrix, SimError> {
        if let Some(u) = self.matrices.borrow().get(&op) {
            return Ok(u.clone());
        }
        let d = descriptor_with_env(self.m, op, &HashMap::new())?;
        let u = descriptor_matrix_with(&d, &self.gates)?;
        self.matrices.borrow_mut().insert(op, u.clone());
        Ok(u)
    }

    fn op(&self, op: OpId, mut c: Ctx) -> Result<Vec<Ctx>, SimError> {
        let m = self.m;
        let name = m.op_name(op);
        let arg = |c: &Ctx, i: usize| c.values[&m.operands(op)[i]];
        match name {
            "qc.alloc" => {
                let q = self.new_qubit(&mut c)?;
                c.qubits.insert(m.results(op)[0], q);
            }
            "qc.alloc_reg" => {
                let size = m.attr(op, "size").and_then(Attribute::as_int).unwrap_or(0);
                let first = c.state.num_qubits();
                for _ in 0..size {
                    self.new_qubit(&mut c)?;
                }
                c.qubits.insert(m.results(op)[0], first);
            }
            "qc.extract" => {
                let base = c.qubits[&m.operands(op)[0]];
                let index = m.attr(op, "index").and_then(Attribute::as_int).unwrap_or(0) as usize;
                c.qubits.insert(m.results(op)[0], base + index);
            }
            "qc.dealloc" | "qc.gate_def" | "cf.yield" | "cf.condition" => {}
            "qc.measure" | "qc.reset" => {
                let q = c.qubits[&m.operands(op)[0]];
                let p1 = c.state.probability_one(q);
                let mut out = Vec::new();
                for (outcome, p) in [(false, 1.0 - p1), (true, p1)] {
                    if p * c.probability < PRUNE_BELOW {
                        continue;
                    }
                    let mut b = c.clone();
                    b.state.project(q, outcome, p);
                    b.probability *= p;
                    if name == "qc.measure" {
                        b.record.push(outcome);
                        b.values.insert(m.results(op)[0], Value::Bit(outcome));
                    } else if outcome {
                        b.state.flip(q);
                    }
                    out.push(b);
                }
                return Ok(out);
            }
            "arith.constant" => {
                let v = match m.attr(op, "value") {
                    Some(Attribute::Bool(b)) => Value::Bit(*b),
                    Some(Attribute::Int(i)) => Value::Int(*i),
                    Some(Attribute::Float(x)) => Value::Float(*x),
                    _ => return Err(SimError::Unsupported("malformed constant".into())),
                };
                c.values.insert(m.results(op)[0], v);
            }
            "arith.addf" | "arith.subf" | "arith.mulf" | "arith.divf" | "arith.negf" => {
                let f = |v: Value| match v {
                    Value::Float(x) => x,
                    _ => f64::NAN,
                };
                let a = f(arg(&c, 0));
                let r = match name {
                    "arith.negf" => -a,
                    "arith.addf" => a + f(arg(&c, 1)),
                    "arith.subf" => a - f(arg(&c, 1)),
                    "arith.mulf" => a * f(arg(&c, 1)),
                    _ => a / f(arg(&c, 1)),
                };
                c.values.insert(m.results(op)[0], Value::Float(r));
            }
            "cf.if" => {
                let Value::Bit(cond) = arg(&c, 0) else {
                    return Err(SimError::Unsupported("non-bit condition".into()));
                };
                let block = m.region_block(op, if cond { 0 } else { 1 });
                let mut out = self.block(block, vec![c])?;
                for b in &mut out {
                    let vals = self.terminator_values(b, block);
                    self.bind(b, m.results(op), &vals);
                }
                return Ok(out);
            }
            "cf.for" => return self.run_for(op, c),
            "cf.while" => return self.run_while(op, c),
            _ if is_unitary(name) => {
                let u = self.matrix(op)?;
                let wires: Vec<usize> = qubit_operands(m, op).iter().map(|q| c.qubits[q]).collect();
                c.state.apply(&u, &wires);
            }
            _ => return Err(SimError::Unsupported(format!("`{name}` in an imperative program"))),
        }
        Ok(vec![c])
    }

    fn run_for(&self, op: OpId, c: Ctx) -> Result<Vec<Ctx>, SimError> {
        let m = self.m;
        let int = |v: Value| match v {
            Value::Int(i) => Ok(i),
            _ => Err(SimError::Unsupported("non-integer loop bound".into())),
        };
        let ops = m.operands(op);
        let (lb, ub, step) = (
            int(c.values[&ops[0]])?,
            int(c.values[&ops[1]])?,
            int(c.values[&ops[2]])?,
        );
        if step <= 0 {
            return Err(SimError::UnboundedLoop(0, m.nearest_loc(op)));
        }
        let block = m.region_block(op, 0);
        let args = m.block_args(block).to_vec();
        let init = self.values(&c, &ops[3..]);
        let mut live: Vec<(Ctx, Vec<Value>)> = vec![(c, init)];
        let mut iv = lb;
        while iv < ub {
            let mut next = Vec::new();
            for (mut b, iters) in live {
                b.values.insert(args[0], Value::Int(iv));
                self.bind(&mut b, &args[1..], &iters);
                for e in self.block(block, vec![b])? {
                    let vals = self.terminator_values(&e, block);
                    next.push((e, vals));
                }
            }
            if next.len() > MAX_BRANCHES {
                return Err(SimError::TooManyBranches(MAX_BRANCHES));
            }
            live = next;
            iv += step;
        }
        Ok(live
            .into_iter()
            .map(|(mut b, vals)| {
                self.bind(&mut b, m.results(op), &vals);
                b
            })
            .collect())
    }

    fn run_while(&self, op: OpId, c: Ctx) -> Result<Vec<Ctx>, SimError> {
        let m = self.m;
        let (cond, body) = (m.region_block(op, 0), m.region_block(op, 1));
        let init = self.values(&c, m.operands(op));
        let mut live: Vec<(Ctx, Vec<Value>)> = vec![(c, init)];
        let mut done = Vec::new();
        for _ in 0..=self.options.max_loop_iters {
            let mut next = Vec::new();
            for (mut b, iters) in live {
                self.bind(&mut b, m.block_args(cond), &iters);
                for e in self.block(cond, vec![b])? {
                    let vals = self.terminator_values(&e, cond);
                    let (flag, forwarded) = vals.split_first().expect("cf.condition has a flag");
                    if *flag == Value::Bit(true) {
                        let mut e = e;
                        self.bind(&mut e, m.block_args(body), forwarded);
                        for f in self.block(body, vec![e])? {
                            let vals = self.terminator_values(&f, body);
                            next.push((f, vals));
                        }
                    } else {
                        let mut e = e;
                        self.bind(&mut e, m.results(op), forwarded);
                        done.push(e);
                    }
                }
            }
            if next.len() + done.len() > MAX_BRANCHES {
                return Err(SimError::TooManyBranches(MAX_BRANCHES));
            }
            if next.is_empty() {
                return Ok(done);
            }
            live = next;
        }
        Err(SimError::UnboundedLoop(self.options.max_loop_iters, m.nearest_loc(op)))
    }
}

// ---- unitaries ---------------------------------------------------------------

/// Unitary of a measurement-free, straight-line program on `n` qubits.
/// Qubits the program does not allocate are left untouched.
pub fn circuit_unitary(m: &Module, n: usize) -> Result<Matrix, SimError> {
    if n > MAX_UNITARY_QUBITS {
        return Err(SimError::TooManyQubits {
            needed: n,
            limit: MAX_UNITARY_QUBITS,
        });
    }
    let m = as_imperative(m)?;
    let gates = ModuleGates::new(&m);
    let mut qubits: HashMap<ValueId, usize> = HashMap::new();
    let mut next = 0usize;
    let mut total = Matrix::identity(1 << n, 1 << n);
    let mut take = |count: usize| -> Result<usize, SimError> {
        let first = next;
        next += count;
        if next > n {
            return Err(SimError::TooManyQubits { needed: next, limit: n });
        }
        Ok(first)
    };
    for &op in m.block_ops(m.body()) {
        let name = m.op_name(op);
        match name {
            "qc.alloc" => {
                qubits.insert(m.results(op)[0], take(1)?);
            }
            "qc.alloc_reg" => {
                let size = m.attr(op, "size").and_then(Attribute::as_int).unwrap_or(0) as usize;
                qubits.insert(m.results(op)[0], take(size)?);
            }
            "qc.extract" => {
                let base = qubits[&m.operands(op)[0]];
                let index = m.attr(op, "index").and_then(Attribute::as_int).unwrap_or(0) as usize;
                qubits.insert(m.results(op)[0], base + index);
            }
            "qc.dealloc" | "qc.gate_def" => {}
            n if n.starts_with("arith.") => {}
            _ if is_unitary(name) => {
                let d = descriptor_with_env(&m, op, &HashMap::new())?;
                let u = descriptor_matrix_with(&d, &gates)?;
                let wires: Vec<usize> = qubit_operands(&m, op).iter().map(|q| qubits[q]).collect();
                total = embed(&u, &wires, n) * total;
            }
            _ => return Err(SimError::NonUnitaryOp(name.to_string())),
        }
    }
    Ok(total)
}

/// Number of qubits a program allocates (top level only).
pub fn qubit_count(m: &Module) -> usize {
    m.block_ops(m.body())
        .iter()
        .map(|op| match m.op_name(*op) {
            "qc.alloc" | "qco.alloc" => 1,
            "qc.alloc_reg" => m.attr(*op, "size").and_then(Attribute::as_int).unwrap_or(0) as usize,
            _ => 0,
        })
        .sum()
}

// ---- equivalence -------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquivalenceMode {
    /// Final states from |0…0⟩, up to global phase.
    State,
    /// Whole unitaries, up to global phase.
    Unitary,
    /// Probabilities of measurement records.
    Distribution,
}

/// How the wires of the second program relate to those of the first: wire
/// `i` of the first starts on wire `input[i]` and ends on wire `output[i]`.
/// The first program is padded with idle qubits up to the map's length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireMap {
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

impl From<&RouteReport> for WireMap {
    fn from(r: &RouteReport) -> Self {
        WireMap {
            input: r.initial_layout.clone(),
            output: r.final_layout.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Largest deviation found (column 2-norm for states and unitaries,
    /// absolute probability difference for distributions).
    pub deviation: f64,
}

impl Equivalence {
    fn from_deviation(deviation: f64) -> Self {
        Equivalence {
            equivalent: deviation <= EQUIVALENCE_TOLERANCE,
            deviation,
        }
    }
}

/// Largest column deviation between `a` and `b` after rotating `a` by the
/// global phase that best aligns it with `b`.
fn phase_aligned_deviation(a: &Matrix, b: &Matrix) -> f64 {
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 1e-300 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let diff = a * phase - b;
    diff.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Compares two programs under `mode`.
pub fn equivalent(
    a: &Module,
    b: &Module,
    mode: EquivalenceMode,
    wires: Option<&WireMap>,
) -> Result<Equivalence, SimError> {
    let (na, nb) = (qubit_count(&as_imperative(a)?), qubit_count(&as_imperative(b)?));
    let n = wires.map_or(na.max(nb), |w| w.input.len());
    if na > n || nb > n || wires.is_some_and(|w| w.output.len() != n) {
        return Err(SimError::ShapeMismatch(format!(
            "{na} and {nb} qubits under a {n}-wire map"
        )));
    }
    match mode {
        EquivalenceMode::Distribution => {
            let (pa, pb) = (simulate(a)?.probabilities(), simulate(b)?.probabilities());
            let deviation = pa
                .keys()
                .chain(pb.keys())
                .map(|k| (pa.get(k).unwrap_or(&0.0) - pb.get(k).unwrap_or(&0.0)).abs())
                .fold(0.0, f64::max);
            Ok(Equivalence::from_deviation(deviation))
        }
        EquivalenceMode::State => {
            let single = |m: &Module| -> Result<StateVector, SimError> {
                let d = simulate(m)?;
                match d.branches.as_slice() {
                    [b] => Ok(b.state.padded(n)),
                    _ => Err(SimError::ShapeMismatch(
                        "state mode needs a measurement-free program".into(),
                    )),
                }
            };
            let mut sa = single(a)?;
            if let Some(w) = wires {
                sa = sa.permuted(&w.output);
            }
            let sb = single(b)?;
            let col = |s: &StateVector| Matrix::from_column_slice(s.amps.len(), 1, &s.amps);
            Ok(Equivalence::from_deviation(phase_aligned_deviation(
                &col(&sa),
                &col(&sb),
            )))
        }
        EquivalenceMode::Unitary => {
            let mut ua = circuit_unitary(a, n)?;
            if let Some(w) = wires {
                let pin = permutation_matrix(&w.input);
                ua = permutation_matrix(&w.output) * ua * pin.adjoint();
            }
            let ub = circuit_unitary(b, n)?;
            Ok(Equivalence::from_deviation(phase_aligned_deviation(&ua, &ub)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialect::unitary::{descriptor_matrix, UnitaryDescriptor};
    use crate::dialect::GateKind;
    use crate::frontend::import_qasm;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn qc(src: &str) -> Module {
        import_qasm(src, "t.qasm").unwrap()
    }

    #[test]
    fn bell_distribution() {
        let d = simulate(&qc("OPENQASM 3; qubit[2] q; bit[2] c; h q[0]; cx q[0], q[1];
                              c[0] = measure q[0]; c[1] = measure q[1];"))
        .unwrap();
        let p = d.probabilities();
        assert_eq!(p.len(), 2);
        assert!((p["00"] - 0.5).abs() < 1e-12 && (p["11"] - 0.5).abs() < 1e-12);
        assert_eq!(d.to_string(), "00 0.5\n11 0.5\n");
    }

    #[test]
    fn reset_idiom_always_ends_in_zero() {
        let d = simulate(&qc("OPENQASM 3; qubit q; bit c; h q; c = measure q; if (c) { x q; }")).unwrap();
        assert_eq!(d.branches.len(), 2);
        assert!((d.total_probability() - 1.0).abs() < 1e-9);
        for b in &d.branches {
            assert!((b.state.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_program() {
        let d = simulate(&qc("OPENQASM 3; qubit q;")).unwrap();
        assert_eq!(d.branches.len(), 1);
        assert_eq!(d.branches[0].probability, 1.0);
        assert_eq!(d.branches[0].state, StateVector::zero(1));
        assert_eq!(d.to_string(), "- 1.0\n");
    }

    #[test]
    fn reset_is_not_recorded() {
        let d = simulate(&qc("OPENQASM 3; qubit q; h q; reset q;")).unwrap();
        assert_eq!(d.probabilities().len(), 1);
        assert!(d
            .branches
            .iter()
            .all(|b| (b.state.amplitudes()[0].norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn loops() {
        let d = simulate(&qc(
            "OPENQASM 3; qubit q; bit c; for uint i in [0:3] { x q; } c = measure q;",
        ))
        .unwrap();
        assert_eq!(d.probabilities()["1"], 1.0);
        let d = simulate(&qc(
            "OPENQASM 3; qubit q; bit c; h q; c = measure q; while (c) { h q; c = measure q; }",
        ))
        .unwrap();
        assert!((d.total_probability() - 1.0).abs() < 1e-9);
        assert!(d.branches.iter().all(|b| b.record.last() == Some(&false)));
        let err = simulate(&qc(
            "OPENQASM 3; qubit q; bit c; x q; c = measure q; while (c) { c = measure q; }",
        ));
        assert!(matches!(err, Err(SimError::UnboundedLoop(100, _))));
    }

    #[test]
    fn qubit_limit() {
        let err = simulate(&qc("OPENQASM 3; qubit[13] q;"));
        assert!(matches!(err, Err(SimError::TooManyQubits { needed: 13, limit: 12 })));
    }

    #[test]
    fn unitaries() {
        let x = circuit_unitary(&qc("OPENQASM 3; qubit q; x q;"), 1).unwrap();
        assert_eq!(
            x,
            descriptor_matrix(&UnitaryDescriptor::standard(GateKind::X, vec![])).unwrap()
        );
        let hh = circuit_unitary(&qc("OPENQASM 3; qubit q; h q; h q;"), 1).unwrap();
        assert!((hh - Matrix::identity(2, 2)).norm() < 1e-12);
        let bell = circuit_unitary(&qc("OPENQASM 3; qubit[2] q; h q[0]; cx q[0], q[1];"), 2).unwrap();
        let s = FRAC_1_SQRT_2;
        let expected = Matrix::from_row_slice(
            4,
            4,
            &[s, s, 0.0, 0.0, 0.0, 0.0, s, -s, 0.0, 0.0, s, s, s, -s, 0.0, 0.0].map(|v| Complex64::new(v, 0.0)),
        );
        assert!((bell - expected).norm() < 1e-12);
        assert!(matches!(
            circuit_unitary(&qc("OPENQASM 3; qubit q; bit c; c = measure q;"), 1),
            Err(SimError::NonUnitaryOp(_))
        ));
    }

    #[test]
    fn equivalence_modes() {
        let a = qc("OPENQASM 3; qubit q; h q; t q;");
        for mode in [
            EquivalenceMode::State,
            EquivalenceMode::Unitary,
            EquivalenceMode::Distribution,
        ] {
            let e = equivalent(&a, &a, mode, None).unwrap();
            assert!(e.equivalent && e.deviation == 0.0);
        }
        let rz = qc(&format!("OPENQASM 3; qubit q; rz({}) q;", 2.0 * PI));
        let empty = qc("OPENQASM 3; qubit q;");
        assert!(
            equivalent(&rz, &empty, EquivalenceMode::Unitary, None)
                .unwrap()
                .equivalent
        );
        let (x, z) = (qc("OPENQASM 3; qubit q; x q;"), qc("OPENQASM 3; qubit q; z q;"));
        for mode in [EquivalenceMode::State, EquivalenceMode::Unitary] {
            let e = equivalent(&x, &z, mode, None).unwrap();
            assert!(!e.equivalent);
            assert!((e.deviation - 2f64.sqrt()).abs() < 1e-12, "{}", e.deviation);
        }
    }

    #[test]
    fn wire_maps() {
        let a = qc("OPENQASM 3; qubit[2] q; x q[0];");
        let b = qc("OPENQASM 3; qubit[2] q; x q[1];");
        assert!(!equivalent(&a, &b, EquivalenceMode::Unitary, None).unwrap().equivalent);
        let swap = WireMap {
            input: vec![1, 0],
            output: vec![1, 0],
        };
        assert!(
            equivalent(&a, &b, EquivalenceMode::Unitary, Some(&swap))
                .unwrap()
                .equivalent
        );
        assert!(
            equivalent(&a, &b, EquivalenceMode::State, Some(&swap))
                .unwrap()
                .equivalent
        );
    }

    #[test]
    fn every_standard_gate_matches_its_descriptor() {
        for kind in GateKind::ALL {
            let angles: Vec<f64> = (0..kind.num_params()).map(|i| 0.3 + i as f64).collect();
            let args = if angles.is_empty() {
                String::new()
            } else {
                format!(
                    "({})",
                    angles.iter().map(|a| format!("{a:?}")).collect::<Vec<_>>().join(", ")
                )
            };
            let wires: Vec<String> = (0..kind.num_qubits()).map(|i| format!("q[{i}]")).collect();
            let name = match kind {
                GateKind::I => "id".to_string(),
                k => k.mnemonic().to_string(),
            };
            let src = format!(
                "OPENQASM 3; qubit[{}] q; {name}{args} {};",
                kind.num_qubits(),
                wires.join(", ")
            );
            let u = circuit_unitary(&qc(&src), kind.num_qubits()).unwrap();
            let d = descriptor_matrix(&UnitaryDescriptor::standard(kind, angles)).unwrap();
            assert!((u - d).norm() < 1e-12, "{kind}");
        }
    }

    proptest! {
        #[test]
        fn norm_is_preserved(theta in -7.0f64..7.0, phi in -7.0f64..7.0, lambda in -7.0f64..7.0) {
            let src = format!(
                "OPENQASM 3; qubit[3] q; u({theta:?}, {phi:?}, {lambda:?}) q[0]; cx q[0], q[2];
                 ry({phi:?}) q[1]; ctrl @ rz({lambda:?}) q[2], q[1]; swap q[0], q[1];"
            );
            let d = simulate(&qc(&src)).unwrap();
            prop_assert!((d.branches[0].state.norm() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn equivalence_is_symmetric(a in 0.0f64..6.3, b in 0.0f64..6.3) {
            let x = qc(&format!("OPENQASM 3; qubit[2] q; rx({a:?}) q[0]; cx q[0], q[1];"));
            let y = qc(&format!("OPENQASM 3; qubit[2] q; rx({b:?}) q[0]; cx q[0], q[1];"));
            let e1 = equivalent(&x, &y, EquivalenceMode::Unitary, None).unwrap();
            let e2 = equivalent(&y, &x, EquivalenceMode::Unitary, None).unwrap();
            prop_assert_eq!(e1.equivalent, e2.equivalent);
            prop_assert!((e1.deviation - e2.deviation).abs() < 1e-9);
        }
    }
}
