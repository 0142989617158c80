//! Output formats: the textual IR, OpenQASM 3 and flat QIR-style text.

pub mod qasm;
pub mod qir;
pub mod text;

pub use qasm::{emit_qasm, QasmEmitError};
pub use qir::{emit_qir_flat, QirEmitError};
pub use text::{parse_ir, print_ir, ParseError};
