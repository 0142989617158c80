//! Recursive-descent parser for the supported OpenQASM 3 subset.

use std::sync::Arc;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::{FrontendError, LocatedError};
use crate::ir::Location;

/// Keywords of OpenQASM 3 that this frontend rejects.
const UNSUPPORTED: &[&str] = &[
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
];

pub(super) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: Arc<str>,
}

type PResult<T> = Result<T, LocatedError>;

impl Parser {
    pub(super) fn new(src: &str, file: &str) -> PResult<Self> {
        let file: Arc<str> = Arc::from(file);
        let toks = lex(src).map_err(|(msg, line, col)| LocatedError {
            error: FrontendError::SyntaxError {
                expected: "a token".into(),
                found: msg,
            },
            loc: Location::new(file.clone(), line, col),
        })?;
        Ok(Parser { toks, pos: 0, file })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn loc(&self) -> Location {
        let t = &self.toks[self.pos];
        Location::new(self.file.clone(), t.line, t.col)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, error: FrontendError) -> PResult<T> {
        Err(LocatedError { error, loc: self.loc() })
    }

    fn expected<T>(&self, what: &str) -> PResult<T> {
        self.error(FrontendError::SyntaxError {
            expected: what.to_string(),
            found: self.peek().to_string(),
        })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(q) if q == s)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.expected(&format!("`{p}`"))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.expected("an identifier"),
        }
    }

    pub(super) fn program(&mut self) -> PResult<Program> {
        let mut stmts = Vec::new();
        if self.is_ident("OPENQASM") {
            self.bump();
            let t = self.bump();
            let version = match t.tok {
                Tok::Int(_) | Tok::Float(_) => t.text,
                _ => {
                    self.pos -= 1;
                    return self.expected("a version number");
                }
            };
            if version.starts_with('2') {
                return Err(LocatedError {
                    error: FrontendError::OpenQasm2,
                    loc: Location::new(self.file.clone(), t.line, t.col),
                });
            }
            if version != "3" && !version.starts_with("3.") {
                return Err(LocatedError {
                    error: FrontendError::UnsupportedFeature(format!("OpenQASM version {version}")),
                    loc: Location::new(self.file.clone(), t.line, t.col),
                });
            }
            self.expect_punct(";")?;
        }
        while *self.peek() != Tok::Eof {
            stmts.push(self.statement()?);
        }
        Ok(Program { stmts })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat_punct("{") {
            let mut body = Vec::new();
            while !self.is_punct("}") {
                if *self.peek() == Tok::Eof {
                    return self.expected("`}`");
                }
                body.push(self.statement()?);
            }
            self.bump();
            Ok(body)
        } else {
            Ok(vec![self.statement()?])
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return self.expected("a statement"),
        };
        let kind = match word.as_str() {
            "OPENQASM" => return self.expected("a statement (the version header must come first)"),
            "include" => {
                self.bump();
                let path = match self.bump().tok {
                    Tok::Str(s) => s,
                    _ => {
                        self.pos -= 1;
                        return self.expected("a file name");
                    }
                };
                self.expect_punct(";")?;
                if path != "stdgates.inc" {
                    return Err(LocatedError {
                        error: FrontendError::UnsupportedFeature(format!("include of \"{path}\"")),
                        loc,
                    });
                }
                StmtKind::Include(path)
            }
            "qubit" => {
                self.bump();
                let size = self.opt_size()?;
                let name = self.expect_ident()?;
                self.expect_punct(";")?;
                StmtKind::QubitDecl { name, size }
            }
            "qreg" => {
                self.bump();
                let name = self.expect_ident()?;
                let size = self.opt_size()?;
                self.expect_punct(";")?;
                StmtKind::QubitDecl { name, size }
            }
            "bit" => {
                self.bump();
                let size = self.opt_size()?;
                let name = self.expect_ident()?;
                let init = if self.eat_punct("=") {
                    Some(self.bit_value()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                StmtKind::BitDecl { name, size, init }
            }
            "creg" => {
                self.bump();
                let name = self.expect_ident()?;
                let size = self.opt_size()?;
                self.expect_punct(";")?;
                StmtKind::BitDecl { name, size, init: None }
            }
            "measure" => {
                self.bump();
                let qubit = self.operand()?;
                let target = if self.eat_punct("->") {
                    Some(self.operand()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                StmtKind::Measure { qubit, target }
            }
            "reset" => {
                self.bump();
                let q = self.operand()?;
                self.expect_punct(";")?;
                StmtKind::Reset(q)
            }
            "if" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.condition()?;
                self.expect_punct(")")?;
                let then_body = self.block()?;
                let else_body = if self.is_ident("else") {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                }
            }
            "for" => {
                self.bump();
                if self.is_ident("int") || self.is_ident("uint") {
                    self.bump();
                    self.opt_size()?;
                } else if matches!(self.peek_at(1), Tok::Ident(s) if s != "in") {
                    let ty = self.expect_ident()?;
                    return self.error(FrontendError::UnsupportedFeature(format!(
                        "loop variable of type `{ty}`"
                    )));
                }
                let var = self.expect_ident()?;
                if !self.is_ident("in") {
                    return self.expected("`in`");
                }
                self.bump();
                if !self.is_punct("[") {
                    return self.error(FrontendError::UnsupportedFeature("loop over a set or array".into()));
                }
                self.bump();
                let start = self.expr()?;
                self.expect_punct(":")?;
                let second = self.expr()?;
                let (step, end) = if self.eat_punct(":") {
                    (Some(second), self.expr()?)
                } else {
                    (None, second)
                };
                self.expect_punct("]")?;
                let body = self.block()?;
                StmtKind::For {
                    var,
                    start,
                    step,
                    end,
                    body,
                }
            }
            "while" => {
                self.bump();
                self.expect_punct("(")?;
                let cond = self.condition()?;
                self.expect_punct(")")?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            "gate" => {
                self.bump();
                let name = self.expect_ident()?;
                let mut params = Vec::new();
                if self.eat_punct("(") {
                    if !self.is_punct(")") {
                        params.push(self.expect_ident()?);
                        while self.eat_punct(",") {
                            params.push(self.expect_ident()?);
                        }
                    }
                    self.expect_punct(")")?;
                }
                let mut qubits = vec![self.expect_ident()?];
                while self.eat_punct(",") {
                    qubits.push(self.expect_ident()?);
                }
                if !self.is_punct("{") {
                    return self.expected("`{`");
                }
                let body = self.block()?;
                StmtKind::GateDef {
                    name,
                    params,
                    qubits,
                    body,
                }
            }
            w if UNSUPPORTED.contains(&w) => {
                return self.error(FrontendError::UnsupportedFeature(format!("`{w}`")));
            }
            _ => {
                if self.is_modifier_start() {
                    StmtKind::Gate(self.gate_call()?)
                } else {
                    let save = self.pos;
                    let target = self.operand()?;
                    if self.eat_punct("=") {
                        let value = self.bit_value()?;
                        self.expect_punct(";")?;
                        match value {
                            BitValue::Literal(value) => StmtKind::Assign { target, value },
                            BitValue::Measure(qubit) => StmtKind::Measure {
                                qubit,
                                target: Some(target),
                            },
                        }
                    } else if let Tok::Punct(p @ ("+=" | "-=" | "++")) = self.peek() {
                        return self.error(FrontendError::UnsupportedFeature(format!("`{p}` assignment")));
                    } else {
                        self.pos = save;
                        StmtKind::Gate(self.gate_call()?)
                    }
                }
            }
        };
        Ok(Stmt { kind, loc })
    }

    fn is_modifier_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) if s == "inv" => matches!(self.peek_at(1), Tok::Punct("@")),
            Tok::Ident(s) if s == "ctrl" || s == "negctrl" || s == "pow" => {
                matches!(self.peek_at(1), Tok::Punct("@" | "("))
            }
            _ => false,
        }
    }

    fn opt_size(&mut self) -> PResult<Option<u64>> {
        if !self.eat_punct("[") {
            return Ok(None);
        }
        let loc = self.loc();
        let e = self.expr()?;
        self.expect_punct("]")?;
        match e.fold_int() {
            Some(n) if n >= 1 => Ok(Some(n as u64)),
            _ => Err(LocatedError {
                error: FrontendError::Semantic("size must be a positive integer constant".into()),
                loc,
            }),
        }
    }

    fn bit_value(&mut self) -> PResult<BitValue> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Ident(s) if s == "measure" => {
                self.bump();
                Ok(BitValue::Measure(self.operand()?))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(BitValue::Literal(s == "true"))
            }
            Tok::Int(v @ (0 | 1)) => {
                self.bump();
                Ok(BitValue::Literal(v == 1))
            }
            _ => Err(LocatedError {
                error: FrontendError::UnsupportedFeature("classical expression on the right of `=`".into()),
                loc,
            }),
        }
    }

    fn operand(&mut self) -> PResult<Operand> {
        let loc = self.loc();
        let name = self.expect_ident()?;
        let index = if self.eat_punct("[") {
            let e = self.expr()?;
            if self.is_punct(":") || self.is_punct(",") {
                return self.error(FrontendError::UnsupportedFeature("register slicing".into()));
            }
            self.expect_punct("]")?;
            Some(e)
        } else {
            None
        };
        Ok(Operand { name, index, loc })
    }

    fn condition(&mut self) -> PResult<Condition> {
        let mut negated = self.eat_punct("!");
        let bit = self.operand()?;
        let cmp = if self.eat_punct("==") {
            Some(true)
        } else if self.eat_punct("!=") {
            Some(false)
        } else {
            None
        };
        if let Some(eq) = cmp {
            let value = match self.peek().clone() {
                Tok::Int(v @ (0 | 1)) => v == 1,
                Tok::Ident(s) if s == "true" || s == "false" => s == "true",
                Tok::Int(_) => {
                    return self.error(FrontendError::UnsupportedFeature(
                        "comparison of a register with an integer".into(),
                    ))
                }
                _ => return self.expected("`0` or `1`"),
            };
            self.bump();
            if value != eq {
                negated = !negated;
            }
        } else if let Tok::Punct(p @ ("<" | ">" | "<=" | ">=" | "&&" | "||")) = self.peek() {
            return self.error(FrontendError::UnsupportedFeature(format!("`{p}` in a condition")));
        }
        Ok(Condition { bit, negated })
    }

    fn gate_call(&mut self) -> PResult<GateCall> {
        let loc = self.loc();
        let mut modifiers = Vec::new();
        while self.is_modifier_start() {
            let word = self.expect_ident()?;
            let m = match word.as_str() {
                "inv" => GateModifier::Inv,
                "pow" => {
                    self.expect_punct("(")?;
                    let e = self.expr()?;
                    self.expect_punct(")")?;
                    GateModifier::Pow(e)
                }
                _ => {
                    let n = if self.eat_punct("(") {
                        let l = self.loc();
                        let e = self.expr()?;
                        self.expect_punct(")")?;
                        match e.fold_int() {
                            Some(n) if n >= 1 => n as u64,
                            _ => {
                                return Err(LocatedError {
                                    error: FrontendError::Semantic("control count must be a positive integer".into()),
                                    loc: l,
                                })
                            }
                        }
                    } else {
                        1
                    };
                    if word == "ctrl" {
                        GateModifier::Ctrl(n)
                    } else {
                        GateModifier::NegCtrl(n)
                    }
                }
            };
            self.expect_punct("@")?;
            modifiers.push(m);
        }
        let name = self.expect_ident()?;
        let mut params = Vec::new();
        if self.eat_punct("(") {
            if !self.is_punct(")") {
                params.push(self.expr()?);
                while self.eat_punct(",") {
                    params.push(self.expr()?);
                }
            }
            self.expect_punct(")")?;
        }
        let mut qubits = vec![self.operand()?];
        while self.eat_punct(",") {
            qubits.push(self.operand()?);
        }
        self.expect_punct(";")?;
        Ok(GateCall {
            modifiers,
            name,
            params,
            qubits,
            loc,
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat_punct("+") {
                BinOp::Add
            } else if self.eat_punct("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat_punct("*") {
                BinOp::Mul
            } else if self.eat_punct("/") {
                BinOp::Div
            } else if self.is_punct("**") || self.is_punct("%") {
                return self.error(FrontendError::UnsupportedFeature(format!("operator {}", self.peek())));
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_punct("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Float(x) => {
                self.bump();
                Ok(Expr::Float(x))
            }
            Tok::Ident(s) => {
                self.bump();
                if self.is_punct("(") {
                    return Err(LocatedError {
                        error: FrontendError::UnsupportedFeature(format!("function call `{s}(...)`")),
                        loc,
                    });
                }
                Ok(Expr::Ident(s, loc))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.expected("an expression"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::ast::*;
    use super::super::{parse_qasm, FrontendError};

    fn stmts(src: &str) -> Vec<StmtKind> {
        parse_qasm(src, "t.qasm")
            .unwrap()
            .stmts
            .into_iter()
            .map(|s| s.kind)
            .collect()
    }

    #[test]
    fn declarations_and_gate_calls() {
        let s =
            stmts("OPENQASM 3.0;\ninclude \"stdgates.inc\";\nqubit[2] q;\nbit c;\nctrl @ inv @ rz(pi/2) q[0], q[1];\n");
        assert_eq!(s[0], StmtKind::Include("stdgates.inc".into()));
        assert!(matches!(&s[1], StmtKind::QubitDecl { name, size: Some(2) } if name == "q"));
        assert!(matches!(
            &s[2],
            StmtKind::BitDecl {
                size: None,
                init: None,
                ..
            }
        ));
        let StmtKind::Gate(g) = &s[3] else { panic!("{:?}", s[3]) };
        assert_eq!(g.modifiers, vec![GateModifier::Ctrl(1), GateModifier::Inv]);
        assert_eq!(g.name, "rz");
        assert!((g.params[0].fold().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(g.qubits.len(), 2);
    }

    #[test]
    fn measurement_forms() {
        let s =
            stmts("OPENQASM 3;\nqubit q;\nbit b;\nmeasure q -> b;\nb = measure q;\nmeasure q;\nbit c = measure q;\n");
        assert!(matches!(&s[2], StmtKind::Measure { target: Some(_), .. }));
        assert!(matches!(&s[3], StmtKind::Measure { target: Some(_), .. }));
        assert!(matches!(&s[4], StmtKind::Measure { target: None, .. }));
        assert!(matches!(
            &s[5],
            StmtKind::BitDecl {
                init: Some(BitValue::Measure(_)),
                ..
            }
        ));
    }

    #[test]
    fn control_flow() {
        let s = stmts(
            "OPENQASM 3;\nqubit q;\nbit b;\nif (b == 0) { x q; } else { h q; }\n\
             for uint i in [0:2:6] { x q; }\nwhile (b) { b = measure q; }\n",
        );
        let StmtKind::If {
            cond,
            then_body,
            else_body,
        } = &s[2]
        else {
            panic!()
        };
        assert!(cond.negated);
        assert_eq!((then_body.len(), else_body.len()), (1, 1));
        let StmtKind::For { var, step, .. } = &s[3] else {
            panic!()
        };
        assert_eq!(var, "i");
        assert_eq!(step.as_ref().and_then(Expr::fold), Some(2.0));
        assert!(matches!(&s[4], StmtKind::While { .. }));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_qasm("OPENQASM 3;\nqubit q\nh q;\n", "t.qasm").unwrap_err();
        assert!(matches!(e.error, FrontendError::SyntaxError { .. }));
        assert_eq!((e.loc.line, e.loc.column), (3, 1));
        let e = parse_qasm("OPENQASM 2.0;\nqreg q[1];\n", "t.qasm").unwrap_err();
        assert_eq!(e.error, FrontendError::OpenQasm2);
    }
}
