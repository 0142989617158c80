//! Syntax tree of the supported OpenQASM 3 subset.

use crate::ir::Location;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub stmts: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Include(String),
    QubitDecl {
        name: String,
        size: Option<u64>,
    },
    BitDecl {
        name: String,
        size: Option<u64>,
        init: Option<BitValue>,
    },
    Gate(GateCall),
    /// `measure a -> b;`, `b = measure a;` or a bare `measure a;`.
    Measure {
        qubit: Operand,
        target: Option<Operand>,
    },
    Reset(Operand),
    /// `b = 0;` / `b = 1;`
    Assign {
        target: Operand,
        value: bool,
    },
    If {
        cond: Condition,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    For {
        var: String,
        start: Expr,
        step: Option<Expr>,
        end: Expr,
        body: Vec<Stmt>,
    },
    While {
        cond: Condition,
        body: Vec<Stmt>,
    },
    GateDef {
        name: String,
        params: Vec<String>,
        qubits: Vec<String>,
        body: Vec<Stmt>,
    },
}

/// Right-hand side of a bit initialiser.
#[derive(Clone, Debug, PartialEq)]
pub enum BitValue {
    Literal(bool),
    Measure(Operand),
}

/// `name` or `name[index]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operand {
    pub name: String,
    pub index: Option<Expr>,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateCall {
    pub modifiers: Vec<GateModifier>,
    pub name: String,
    pub params: Vec<Expr>,
    pub qubits: Vec<Operand>,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GateModifier {
    Ctrl(u64),
    NegCtrl(u64),
    Inv,
    Pow(Expr),
}

/// `b`, `b == 1` (positive) or `b == 0`, `!b` (negated).
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub bit: Operand,
    pub negated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(u64),
    Float(f64),
    Ident(String, Location),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Constant value, with `pi`, `tau` and `euler` bound.
    pub fn fold(&self) -> Option<f64> {
        match self {
            Expr::Int(i) => Some(*i as f64),
            Expr::Float(x) => Some(*x),
            Expr::Ident(name, _) => builtin_constant(name),
            Expr::Neg(e) => e.fold().map(|x| -x),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.fold()?, b.fold()?);
                Some(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                })
            }
        }
    }

    /// Constant integer value (only integer literals and integer arithmetic).
    pub fn fold_int(&self) -> Option<i64> {
        match self {
            Expr::Int(i) => i64::try_from(*i).ok(),
            Expr::Neg(e) => e.fold_int().and_then(i64::checked_neg),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.fold_int()?, b.fold_int()?);
                match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    BinOp::Div => (b != 0 && a % b == 0).then(|| a / b),
                }
            }
            _ => None,
        }
    }

    /// First identifier that is not a built-in constant.
    pub fn free_ident(&self) -> Option<(&str, &Location)> {
        match self {
            Expr::Ident(n, loc) if builtin_constant(n).is_none() => Some((n, loc)),
            Expr::Neg(e) => e.free_ident(),
            Expr::Binary(_, a, b) => a.free_ident().or_else(|| b.free_ident()),
            _ => None,
        }
    }
}

pub fn builtin_constant(name: &str) -> Option<f64> {
    match name {
        "pi" | "π" => Some(std::f64::consts::PI),
        "tau" | "τ" => Some(std::f64::consts::TAU),
        "euler" | "ℇ" => Some(std::f64::consts::E),
        _ => None,
    }
}
