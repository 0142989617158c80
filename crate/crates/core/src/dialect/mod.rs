//! The two quantum dialects (`qc`, reference semantics; `qco`, value
//! semantics) plus the dialect-neutral `cf` and `arith` opcodes.

mod gate;
pub mod qc;
pub mod qco;
pub mod registry;
pub mod unitary;

pub use gate::GateKind;
pub use unitary::{
    descriptor_matrix, inverse_descriptor, unitary_descriptor, BaseGate, DescriptorError, Matrix, Modifier,
    UnitaryDescriptor,
};

use crate::ir::Module;

/// Which quantum dialect a module uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DialectKind {
    /// No quantum ops at all.
    Classical,
    Qc,
    Qco,
    Mixed,
}

pub fn module_dialect(m: &Module) -> DialectKind {
    let (mut qc, mut qco) = (false, false);
    for op in m.walk() {
        match registry::split(m.op_name(op)).0 {
            "qc" => qc = true,
            "qco" => qco = true,
            _ => {}
        }
    }
    match (qc, qco) {
        (false, false) => DialectKind::Classical,
        (true, false) => DialectKind::Qc,
        (false, true) => DialectKind::Qco,
        (true, true) => DialectKind::Mixed,
    }
}
