//! Generic multi-dialect SSA IR.
//!
//! Operations, blocks and values live in tables owned by a [`Module`] and are
//! addressed by integer ids. Regions nest blocks under operations; only
//! structured control flow exists, so every region has a single block.
//! Use lists are maintained eagerly on every mutation.

mod diag;
mod module;
pub mod rewrite;
pub mod structural;
mod types;
pub mod verify;

pub use diag::{has_errors, Diagnostic, Severity};
pub use module::{BlockTree, InsertPoint, Module, OpTree, Operation, OperationState};
pub use types::{format_f64, AttrMap, Attribute, BlockId, Location, OpId, Region, Type, Use, ValueDef, ValueId};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IrError {
    #[error("unknown opcode `{0}`")]
    UnknownOpcode(String),
    #[error("`{op}`: expected {expected} operands, found {found}")]
    ArityMismatch { op: String, expected: String, found: usize },
    #[error("`{op}`: operand #{index} has type {found}, expected {expected}")]
    TypeMismatch {
        op: String,
        index: usize,
        expected: String,
        found: Type,
    },
    #[error("`{op}`: {message}")]
    ResultMismatch { op: String, message: String },
    #[error("`{op}`: {message}")]
    InvalidAttribute { op: String, message: String },
    #[error("`{op}`: expected {expected} regions, found {found}")]
    RegionCountMismatch { op: String, expected: usize, found: usize },
    #[error("cannot erase `{op}`: a result is still used by `{user}`")]
    StillInUse { op: String, user: String },
    #[error("cannot replace a value of type {old} with a value of type {new}")]
    ReplaceTypeMismatch { old: Type, new: Type },
}
