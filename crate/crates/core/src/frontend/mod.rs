//! OpenQASM 3 subset frontend producing imperative-dialect IR.
//!
//! Supported: `qubit`/`qreg`, `bit`/`creg` declarations, the standard gate
//! library (with `cx`, `cz`, `ccx`, `cp`, ... desugared to controlled gates),
//! `ctrl`/`negctrl`/`inv`/`pow` modifiers, `measure`, `reset`, bit
//! assignments from `0`/`1`, `if`/`else` on a single bit, `for` over integer
//! ranges (half-open, `[a:b]` runs `a, a+1, ..., b-1`), `while` on a single
//! bit, and `gate` definitions. Angle expressions may use literals, `pi`,
//! `tau`, `euler`, unary minus, `+ - * /` and parentheses; they are folded to
//! constants except inside gate bodies, where they may mention parameters.

pub mod ast;
mod lexer;
mod lower;
mod parser;

use thiserror::Error;

use crate::ir::{Diagnostic, Location, Module};

pub use ast::Program;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("syntax error: expected {expected}, found {found}")]
    SyntaxError { expected: String, found: String },
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("OpenQASM 2 is not supported; only OpenQASM 3 input is accepted")]
    OpenQasm2,
    #[error("undeclared identifier `{0}`")]
    UndeclaredIdentifier(String),
    #[error("index into `{0}` is not a compile-time constant")]
    NonConstantIndex(String),
    #[error("gate `{0}` is used in its own definition")]
    RecursiveGateDefinition(String),
    #[error("{0}")]
    Semantic(String),
}

/// A frontend error with the source position it refers to.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{loc}: error: {error}")]
pub struct LocatedError {
    pub error: FrontendError,
    pub loc: Location,
}

impl From<LocatedError> for Diagnostic {
    fn from(e: LocatedError) -> Self {
        Diagnostic::error(e.error.to_string(), Some(e.loc))
    }
}

/// Parses OpenQASM 3 source. `file` is used for locations only.
pub fn parse_qasm(src: &str, file: &str) -> Result<Program, LocatedError> {
    parser::Parser::new(src, file)?.program()
}

/// Builds an imperative-dialect module from a parsed program.
pub fn lower_ast_to_qc(program: &Program) -> Result<Module, LocatedError> {
    lower::Lowerer::new().lower_program(program)
}

/// Parses and lowers in one step.
pub fn import_qasm(src: &str, file: &str) -> Result<Module, LocatedError> {
    lower_ast_to_qc(&parse_qasm(src, file)?)
}
