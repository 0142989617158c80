//! A quantum-classical compiler built around two dialects: an imperative one
//! with reference semantics (`qc`) used for import, export and routing, and a
//! functional one with value semantics (`qco`) used for optimization.
//!
//! The usual flow is OpenQASM → `qc` → `qco` → optimize → `qc` → emit.

pub mod cli;
pub mod dialect;
pub mod emit;
pub mod frontend;
pub mod ir;
pub mod sim;
pub mod transforms;
