//! The shared unitary interface: every gate, gate call and modifier in either
//! quantum dialect can be described by a [`UnitaryDescriptor`], inverted, and
//! turned into a matrix.
//!
//! Matrix convention: operand `i` of an op is qubit `i` of its matrix, and
//! qubit 0 is the least significant bit of the basis index. A controlled op
//! lists its controls before its targets.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use super::registry::{gate_kind, split};
use super::GateKind;
use crate::ir::{Attribute, Module, OpId, Type, ValueDef, ValueId};

pub type Matrix = DMatrix<Complex64>;

/// Angle tolerance used by pattern matching.
pub const ANGLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DescriptorError {
    #[error("`{0}` is not a unitary operation")]
    NotUnitary(String),
    #[error("custom gate `{0}` cannot be resolved to a definition")]
    UnresolvedCustomGate(String),
    #[error("angle operand is not a compile-time constant")]
    SymbolicAngle,
    #[error("malformed modifier `{0}`: body must hold exactly one unitary op")]
    MalformedModifier(String),
    #[error("gate `{name}` expects {expected} parameters, got {found}")]
    ParameterCount {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("gate definition `{0}` is recursive")]
    Recursive(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaseGate {
    Standard(GateKind),
    Custom(String),
}

impl fmt::Display for BaseGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseGate::Standard(k) => write!(f, "{k}"),
            BaseGate::Custom(n) => f.write_str(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Modifier {
    /// One entry per control qubit; `true` means the control fires on |1⟩.
    Ctrl(Vec<bool>),
    Inv,
    Pow(i64),
}

/// Gate kind, angles (radians) and modifier stack (outermost first).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryDescriptor {
    pub base: BaseGate,
    pub angles: Vec<f64>,
    pub modifiers: Vec<Modifier>,
    /// Number of qubits the base gate acts on.
    pub targets: usize,
}

impl UnitaryDescriptor {
    pub fn standard(kind: GateKind, angles: Vec<f64>) -> Self {
        UnitaryDescriptor {
            base: BaseGate::Standard(kind),
            angles,
            modifiers: Vec::new(),
            targets: kind.num_qubits(),
        }
    }

    /// Wraps the descriptor in one more (outermost) modifier.
    pub fn wrap(mut self, m: Modifier) -> Self {
        self.modifiers.insert(0, m);
        self
    }

    pub fn controls(&self) -> usize {
        self.modifiers
            .iter()
            .map(|m| match m {
                Modifier::Ctrl(p) => p.len(),
                _ => 0,
            })
            .sum()
    }

    pub fn num_qubits(&self) -> usize {
        self.targets + self.controls()
    }

    pub fn is_controlled(&self) -> bool {
        self.modifiers.iter().any(|m| matches!(m, Modifier::Ctrl(_)))
    }

    pub fn kind(&self) -> Option<GateKind> {
        match self.base {
            BaseGate::Standard(k) => Some(k),
            BaseGate::Custom(_) => None,
        }
    }
}

// ---- reading descriptors off the IR ----------------------------------------

/// The single unitary op inside a modifier body (terminators excluded).
pub fn modifier_body_op(m: &Module, op: OpId) -> Option<OpId> {
    let block = m.regions(op).first()?.entry()?;
    let mut body = m
        .block_ops(block)
        .iter()
        .copied()
        .filter(|o| m.op_name(*o) != "cf.yield");
    let first = body.next()?;
    body.next().is_none().then_some(first)
}

/// Qubit operands of an op in matrix order. For imperative modifiers the body
/// qubits are appended after the modifier's own (control) operands.
pub fn qubit_operands(m: &Module, op: OpId) -> Vec<ValueId> {
    let name = m.op_name(op);
    match split(name) {
        ("qc", "ctrl" | "inv" | "pow") => {
            let mut qs = m.operands(op).to_vec();
            if let Some(body) = modifier_body_op(m, op) {
                qs.extend(qubit_operands(m, body));
            }
            qs
        }
        _ => m
            .operands(op)
            .iter()
            .copied()
            .filter(|v| m.value_type(*v).is_qubit())
            .collect(),
    }
}

/// Evaluates an f64 value built from constants and arithmetic, with block
/// arguments bound through `env`.
pub fn eval_f64(m: &Module, v: ValueId, env: &HashMap<ValueId, f64>) -> Result<f64, DescriptorError> {
    if let Some(x) = env.get(&v) {
        return Ok(*x);
    }
    let ValueDef::Result { op, .. } = m.value_def(v) else {
        return Err(DescriptorError::SymbolicAngle);
    };
    let args = m.operands(op);
    let arg = |i: usize| eval_f64(m, args[i], env);
    Ok(match m.op_name(op) {
        "arith.constant" => m
            .attr(op, "value")
            .and_then(Attribute::as_f64)
            .ok_or(DescriptorError::SymbolicAngle)?,
        "arith.addf" => arg(0)? + arg(1)?,
        "arith.subf" => arg(0)? - arg(1)?,
        "arith.mulf" => arg(0)? * arg(1)?,
        "arith.divf" => arg(0)? / arg(1)?,
        "arith.negf" => -arg(0)?,
        _ => return Err(DescriptorError::SymbolicAngle),
    })
}

/// Angles of a gate or gate call, from f64 operands or `angle`/`angles`.
pub fn op_angles(m: &Module, op: OpId, env: &HashMap<ValueId, f64>) -> Result<Vec<f64>, DescriptorError> {
    let floats: Vec<ValueId> = m
        .operands(op)
        .iter()
        .copied()
        .filter(|v| *m.value_type(*v) == Type::Float64)
        .collect();
    if !floats.is_empty() {
        return floats.iter().map(|v| eval_f64(m, *v, env)).collect();
    }
    Ok(angle_attrs(m, op))
}

/// Angles stored as attributes (empty if none).
pub fn angle_attrs(m: &Module, op: OpId) -> Vec<f64> {
    if let Some(a) = m.attr(op, "angle").and_then(Attribute::as_f64) {
        return vec![a];
    }
    m.attr(op, "angles")
        .and_then(Attribute::as_array)
        .map(|a| a.iter().filter_map(Attribute::as_f64).collect())
        .unwrap_or_default()
}

/// Attribute form of a list of angles.
pub fn angles_to_attrs(angles: &[f64]) -> Option<(&'static str, Attribute)> {
    match angles.len() {
        0 => None,
        1 => Some(("angle", Attribute::Float(angles[0]))),
        _ => Some((
            "angles",
            Attribute::Array(angles.iter().map(|a| Attribute::Float(*a)).collect()),
        )),
    }
}

/// Control polarities of a ctrl op given its control count.
pub fn ctrl_polarities(m: &Module, op: OpId, controls: usize) -> Vec<bool> {
    match m.attr(op, "polarities").and_then(Attribute::as_array) {
        Some(a) => a.iter().filter_map(Attribute::as_bool).collect(),
        None => vec![true; controls],
    }
}

/// Descriptor of a unitary op in either dialect.
pub fn unitary_descriptor(m: &Module, op: OpId) -> Result<UnitaryDescriptor, DescriptorError> {
    descriptor_with_env(m, op, &HashMap::new())
}

pub fn descriptor_with_env(
    m: &Module,
    op: OpId,
    env: &HashMap<ValueId, f64>,
) -> Result<UnitaryDescriptor, DescriptorError> {
    let name = m.op_name(op);
    if let Some(kind) = gate_kind(name) {
        return Ok(UnitaryDescriptor::standard(kind, op_angles(m, op, env)?));
    }
    let (dialect, mnemonic) = split(name);
    match (dialect, mnemonic) {
        ("qc" | "qco", "call_gate") => {
            let callee = m
                .attr(op, "callee")
                .and_then(Attribute::as_text)
                .unwrap_or_default()
                .to_string();
            Ok(UnitaryDescriptor {
                base: BaseGate::Custom(callee),
                angles: op_angles(m, op, env)?,
                modifiers: Vec::new(),
                targets: qubit_operands(m, op).len(),
            })
        }
        ("qc" | "qco", "ctrl" | "inv" | "pow") => {
            let body = modifier_body_op(m, op).ok_or_else(|| DescriptorError::MalformedModifier(name.into()))?;
            let inner = descriptor_with_env(m, body, env)?;
            let modifier = match mnemonic {
                "ctrl" => {
                    let controls = if dialect == "qc" {
                        m.operands(op).len()
                    } else {
                        m.operands(op)
                            .len()
                            .checked_sub(inner.num_qubits())
                            .ok_or_else(|| DescriptorError::MalformedModifier(name.into()))?
                    };
                    Modifier::Ctrl(ctrl_polarities(m, op, controls))
                }
                "inv" => Modifier::Inv,
                _ => Modifier::Pow(m.attr(op, "exponent").and_then(Attribute::as_int).unwrap_or(1)),
            };
            Ok(inner.wrap(modifier))
        }
        _ => Err(DescriptorError::NotUnitary(name.to_string())),
    }
}

// ---- inversion and comparison ----------------------------------------------

fn invert_base(base: &BaseGate, angles: &[f64]) -> Option<(BaseGate, Vec<f64>)> {
    let BaseGate::Standard(kind) = base else {
        return None;
    };
    if let Some(inv) = kind.named_inverse() {
        return Some((BaseGate::Standard(inv), angles.to_vec()));
    }
    match kind {
        k if k.is_rotation() => Some((base.clone(), angles.iter().map(|a| -a).collect())),
        GateKind::U => Some((base.clone(), vec![-angles[0], -angles[2], -angles[1]])),
        _ => None,
    }
}

/// Descriptor of the adjoint. Standard kinds are inverted through the inverse
/// table; custom gates toggle an `Inv` entry. Ctrl and Pow entries commute
/// with inversion and are kept as they are.
pub fn inverse_descriptor(d: &UnitaryDescriptor) -> UnitaryDescriptor {
    let mut out = d.clone();
    if let Some((base, angles)) = invert_base(&d.base, &d.angles) {
        out.base = base;
        out.angles = angles;
    } else if let Some(pos) = out.modifiers.iter().rposition(|m| *m == Modifier::Inv) {
        out.modifiers.remove(pos);
    } else {
        out.modifiers.push(Modifier::Inv);
    }
    out
}

/// Normal form used for comparisons: `Inv` entries are folded into the base
/// gate where the inverse table allows it, otherwise at most one innermost
/// `Inv` remains.
pub fn canonical_descriptor(d: &UnitaryDescriptor) -> UnitaryDescriptor {
    let invs = d.modifiers.iter().filter(|m| **m == Modifier::Inv).count();
    let mut out = d.clone();
    out.modifiers.retain(|m| *m != Modifier::Inv);
    if invs % 2 == 1 {
        match invert_base(&d.base, &d.angles) {
            Some((base, angles)) => {
                out.base = base;
                out.angles = angles;
            }
            None => out.modifiers.push(Modifier::Inv),
        }
    }
    out
}

fn angle_close(a: f64, b: f64, period: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d.min(period - d) <= ANGLE_EPS
}

/// True if two angle lists describe the same gate. Uncontrolled gates are
/// compared up to global phase; controlled ones only up to exact periodicity.
pub fn angles_equivalent(base: &BaseGate, a: &[f64], b: &[f64], controlled: bool) -> bool {
    if a.len() != b.len() {
        return false;
    }
    match base {
        BaseGate::Standard(kind) => a
            .iter()
            .zip(b)
            .zip(kind.angle_periods())
            .all(|((x, y), (exact, phase))| angle_close(*x, *y, if controlled { *exact } else { *phase })),
        BaseGate::Custom(_) => a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ANGLE_EPS),
    }
}

/// Structural equivalence of two descriptors (same canonical stack, same base,
/// angles within tolerance).
pub fn descriptors_equivalent(a: &UnitaryDescriptor, b: &UnitaryDescriptor) -> bool {
    let (a, b) = (canonical_descriptor(a), canonical_descriptor(b));
    a.base == b.base
        && a.targets == b.targets
        && a.modifiers == b.modifiers
        && angles_equivalent(&a.base, &a.angles, &b.angles, a.is_controlled())
}

/// True if `angle` is equivalent to zero for the given rotation kind.
pub fn angle_is_identity(kind: GateKind, angle: f64, controlled: bool) -> bool {
    match kind.angle_periods().first() {
        Some((exact, phase)) => angle_close(angle, 0.0, if controlled { *exact } else { *phase }),
        None => false,
    }
}

// ---- matrices ----------------------------------------------------------------

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2(a: Complex64, b: Complex64, cc: Complex64, d: Complex64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[a, b, cc, d])
}

/// Matrix of a standard gate.
pub fn standard_matrix(kind: GateKind, angles: &[f64]) -> Matrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let h = FRAC_1_SQRT_2;
    let angle = |i: usize| angles.get(i).copied().unwrap_or(0.0);
    match kind {
        GateKind::I => Matrix::identity(2, 2),
        GateKind::H => mat2(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
        GateKind::X => mat2(z, one, one, z),
        GateKind::Y => mat2(z, c(0.0, -1.0), c(0.0, 1.0), z),
        GateKind::Z => mat2(one, z, z, -one),
        GateKind::S => mat2(one, z, z, c(0.0, 1.0)),
        GateKind::Sdg => mat2(one, z, z, c(0.0, -1.0)),
        GateKind::T => mat2(one, z, z, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)),
        GateKind::Tdg => mat2(one, z, z, Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)),
        GateKind::Sx => mat2(c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)),
        GateKind::Sxdg => mat2(c(0.5, -0.5), c(0.5, 0.5), c(0.5, 0.5), c(0.5, -0.5)),
        GateKind::Swap => {
            let mut m = Matrix::zeros(4, 4);
            m[(0, 0)] = one;
            m[(1, 2)] = one;
            m[(2, 1)] = one;
            m[(3, 3)] = one;
            m
        }
        GateKind::Rx => {
            let (s, co) = (angle(0) / 2.0).sin_cos();
            mat2(c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0))
        }
        GateKind::Ry => {
            let (s, co) = (angle(0) / 2.0).sin_cos();
            mat2(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
        }
        GateKind::Rz => {
            let t = angle(0) / 2.0;
            mat2(Complex64::from_polar(1.0, -t), z, z, Complex64::from_polar(1.0, t))
        }
        GateKind::P => mat2(one, z, z, Complex64::from_polar(1.0, angle(0))),
        GateKind::U => {
            let (theta, phi, lambda) = (angle(0), angle(1), angle(2));
            let (s, co) = (theta / 2.0).sin_cos();
            mat2(
                c(co, 0.0),
                -Complex64::from_polar(s, lambda),
                Complex64::from_polar(s, phi),
                Complex64::from_polar(co, phi + lambda),
            )
        }
    }
}

/// Extends `u` with controls placed on the low qubits, in the given order.
pub fn controlled(u: &Matrix, polarities: &[bool]) -> Matrix {
    let nc = polarities.len();
    let tdim = u.nrows();
    let dim = tdim << nc;
    let mask = (1usize << nc) - 1;
    let pattern = polarities
        .iter()
        .enumerate()
        .fold(0usize, |acc, (i, p)| if *p { acc | (1 << i) } else { acc });
    let mut out = Matrix::zeros(dim, dim);
    for col in 0..dim {
        let ctl = col & mask;
        if ctl != pattern {
            out[(col, col)] = c(1.0, 0.0);
            continue;
        }
        let t = col >> nc;
        for r in 0..tdim {
            out[((r << nc) | ctl, col)] = u[(r, t)];
        }
    }
    out
}

fn matrix_pow(u: &Matrix, k: i64) -> Matrix {
    let base = if k < 0 { u.adjoint() } else { u.clone() };
    let mut out = Matrix::identity(u.nrows(), u.ncols());
    for _ in 0..k.unsigned_abs() {
        out = &out * &base;
    }
    out
}

/// Resolves custom gates to matrices.
pub trait GateResolver {
    fn resolve(&self, name: &str, angles: &[f64]) -> Result<Matrix, DescriptorError>;
}

/// Resolver that knows no custom gates.
pub struct NoCustomGates;

impl GateResolver for NoCustomGates {
    fn resolve(&self, name: &str, _angles: &[f64]) -> Result<Matrix, DescriptorError> {
        Err(DescriptorError::UnresolvedCustomGate(name.to_string()))
    }
}

/// Matrix of a descriptor without custom-gate resolution.
pub fn descriptor_matrix(d: &UnitaryDescriptor) -> Result<Matrix, DescriptorError> {
    descriptor_matrix_with(d, &NoCustomGates)
}

pub fn descriptor_matrix_with(d: &UnitaryDescriptor, resolver: &dyn GateResolver) -> Result<Matrix, DescriptorError> {
    let mut u = match &d.base {
        BaseGate::Standard(k) => standard_matrix(*k, &d.angles),
        BaseGate::Custom(name) => resolver.resolve(name, &d.angles)?,
    };
    for m in d.modifiers.iter().rev() {
        u = match m {
            Modifier::Ctrl(p) => controlled(&u, p),
            Modifier::Inv => u.adjoint(),
            Modifier::Pow(k) => matrix_pow(&u, *k),
        };
    }
    Ok(u)
}

/// Lifts a k-qubit matrix acting on `wires` to an n-qubit matrix.
pub fn embed(u: &Matrix, wires: &[usize], n: usize) -> Matrix {
    let dim = 1usize << n;
    let k = wires.len();
    let mut out = Matrix::zeros(dim, dim);
    for col in 0..dim {
        let sub_col = wires
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, w)| acc | (((col >> w) & 1) << i));
        let rest = wires.iter().fold(col, |acc, w| acc & !(1 << w));
        for sub_row in 0..(1usize << k) {
            let amp = u[(sub_row, sub_col)];
            if amp == c(0.0, 0.0) {
                continue;
            }
            let row = wires
                .iter()
                .enumerate()
                .fold(rest, |acc, (i, w)| acc | (((sub_row >> i) & 1) << w));
            out[(row, col)] = amp;
        }
    }
    out
}

/// Resolves custom gates from the `*.gate_def` ops of a module.
pub struct ModuleGates<'a> {
    module: &'a Module,
    depth: usize,
}

impl<'a> ModuleGates<'a> {
    pub fn new(module: &'a Module) -> Self {
        ModuleGates { module, depth: 0 }
    }
}

impl GateResolver for ModuleGates<'_> {
    fn resolve(&self, name: &str, angles: &[f64]) -> Result<Matrix, DescriptorError> {
        if self.depth > 32 {
            return Err(DescriptorError::Recursive(name.to_string()));
        }
        let m = self.module;
        let def = m
            .lookup_symbol(name)
            .ok_or_else(|| DescriptorError::UnresolvedCustomGate(name.to_string()))?;
        let block = m.region_block(def, 0);
        let args = m.block_args(block);
        let params: Vec<ValueId> = args
            .iter()
            .copied()
            .filter(|a| *m.value_type(*a) == Type::Float64)
            .collect();
        let qubits: Vec<ValueId> = args.iter().copied().filter(|a| m.value_type(*a).is_qubit()).collect();
        if params.len() != angles.len() {
            return Err(DescriptorError::ParameterCount {
                name: name.to_string(),
                expected: params.len(),
                found: angles.len(),
            });
        }
        let env: HashMap<ValueId, f64> = params.iter().copied().zip(angles.iter().copied()).collect();
        let mut wire: HashMap<ValueId, usize> = qubits.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let n = qubits.len();
        let nested = ModuleGates {
            module: m,
            depth: self.depth + 1,
        };
        let mut total = Matrix::identity(1 << n, 1 << n);
        for op in m.block_ops(block) {
            let opname = m.op_name(*op);
            if opname == "cf.yield" || opname.starts_with("arith.") {
                continue;
            }
            let d = descriptor_with_env(m, *op, &env)?;
            let u = descriptor_matrix_with(&d, &nested)?;
            let ws: Vec<usize> = qubit_operands(m, *op)
                .iter()
                .map(|q| {
                    wire.get(q)
                        .copied()
                        .ok_or(DescriptorError::UnresolvedCustomGate(name.to_string()))
                })
                .collect::<Result<_, _>>()?;
            for (r, w) in m
                .results(*op)
                .iter()
                .filter(|r| m.value_type(**r).is_qubit())
                .zip(ws.clone())
            {
                wire.insert(*r, w);
            }
            total = embed(&u, &ws, n) * total;
        }
        Ok(total)
    }
}

/// Matrix of a unitary op, resolving custom gates against the module.
pub fn op_matrix(m: &Module, op: OpId) -> Result<Matrix, DescriptorError> {
    let d = unitary_descriptor(m, op)?;
    descriptor_matrix_with(&d, &ModuleGates::new(m))
}
