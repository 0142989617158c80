//! Compiled-in opcode table with per-opcode signature checks.

use crate::ir::{AttrMap, Attribute, IrError, Type};

use super::GateKind;

const NAMES: &[&str] = &[
    // imperative dialect
    "qc.alloc",
    "qc.alloc_reg",
    "qc.extract",
    "qc.dealloc",
    "qc.measure",
    "qc.reset",
    "qc.ctrl",
    "qc.inv",
    "qc.pow",
    "qc.gate_def",
    "qc.call_gate",
    "qc.i",
    "qc.h",
    "qc.x",
    "qc.y",
    "qc.z",
    "qc.s",
    "qc.sdg",
    "qc.t",
    "qc.tdg",
    "qc.sx",
    "qc.sxdg",
    "qc.swap",
    "qc.rx",
    "qc.ry",
    "qc.rz",
    "qc.p",
    "qc.u",
    // functional dialect
    "qco.alloc",
    "qco.dealloc",
    "qco.measure",
    "qco.reset",
    "qco.ctrl",
    "qco.inv",
    "qco.pow",
    "qco.gate_def",
    "qco.call_gate",
    "qco.i",
    "qco.h",
    "qco.x",
    "qco.y",
    "qco.z",
    "qco.s",
    "qco.sdg",
    "qco.t",
    "qco.tdg",
    "qco.sx",
    "qco.sxdg",
    "qco.swap",
    "qco.rx",
    "qco.ry",
    "qco.rz",
    "qco.p",
    "qco.u",
    // structured control flow
    "cf.if",
    "cf.for",
    "cf.while",
    "cf.yield",
    "cf.condition",
    // scalar arithmetic
    "arith.constant",
    "arith.addf",
    "arith.subf",
    "arith.mulf",
    "arith.divf",
    "arith.negf",
];

/// Returns the canonical static name of a registered opcode.
pub fn intern(name: &str) -> Option<&'static str> {
    NAMES.iter().copied().find(|n| *n == name)
}

pub fn is_registered(name: &str) -> bool {
    intern(name).is_some()
}

/// Splits `qc.h` into (`qc`, `h`).
pub fn split(name: &str) -> (&str, &str) {
    name.split_once('.').unwrap_or(("", name))
}

/// Standard gate kind of a `qc.*`/`qco.*` gate opcode.
pub fn gate_kind(name: &str) -> Option<GateKind> {
    match split(name) {
        ("qc" | "qco", m) => GateKind::from_mnemonic(m),
        _ => None,
    }
}

pub fn is_modifier(name: &str) -> bool {
    matches!(split(name), ("qc" | "qco", "ctrl" | "inv" | "pow"))
}

pub fn is_region_bearing(name: &str) -> bool {
    is_modifier(name) || matches!(split(name), ("qc" | "qco", "gate_def") | ("cf", "if" | "for" | "while"))
}

pub fn is_terminator(name: &str) -> bool {
    matches!(name, "cf.yield" | "cf.condition")
}

/// Ops that are unitary in the sense of the shared unitary interface.
pub fn is_unitary(name: &str) -> bool {
    gate_kind(name).is_some() || is_modifier(name) || matches!(split(name), ("qc" | "qco", "call_gate"))
}

fn arity(op: &str, expected: impl ToString, found: usize) -> IrError {
    IrError::ArityMismatch {
        op: op.to_string(),
        expected: expected.to_string(),
        found,
    }
}

fn type_err(op: &str, index: usize, expected: impl ToString, found: &Type) -> IrError {
    IrError::TypeMismatch {
        op: op.to_string(),
        index,
        expected: expected.to_string(),
        found: found.clone(),
    }
}

fn result_err(op: &str, message: impl Into<String>) -> IrError {
    IrError::ResultMismatch {
        op: op.to_string(),
        message: message.into(),
    }
}

fn attr_err(op: &str, message: impl Into<String>) -> IrError {
    IrError::InvalidAttribute {
        op: op.to_string(),
        message: message.into(),
    }
}

fn expect_operands(op: &str, got: &[Type], want: &[Type]) -> Result<(), IrError> {
    if got.len() != want.len() {
        return Err(arity(op, want.len(), got.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g != w {
            return Err(type_err(op, i, w, g));
        }
    }
    Ok(())
}

fn expect_results(op: &str, got: &[Type], want: &[Type]) -> Result<(), IrError> {
    if got != want {
        let fmt = |ts: &[Type]| ts.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        return Err(result_err(
            op,
            format!("expected results ({}), found ({})", fmt(want), fmt(got)),
        ));
    }
    Ok(())
}

fn expect_all(op: &str, got: &[Type], offset: usize, want: &Type) -> Result<(), IrError> {
    for (i, g) in got.iter().enumerate() {
        if g != want {
            return Err(type_err(op, i + offset, want, g));
        }
    }
    Ok(())
}

fn int_attr(op: &str, attrs: &AttrMap, key: &str) -> Result<i64, IrError> {
    attrs
        .get(key)
        .and_then(Attribute::as_int)
        .ok_or_else(|| attr_err(op, format!("missing integer attribute `{key}`")))
}

/// Checks `angle` / `angles` attributes against the expected parameter count.
pub fn check_angle_attrs(op: &str, attrs: &AttrMap, count: usize) -> Result<(), IrError> {
    match count {
        0 => {
            if attrs.contains_key("angle") || attrs.contains_key("angles") {
                return Err(attr_err(op, "unexpected angle attribute"));
            }
        }
        1 => {
            if !matches!(attrs.get("angle"), Some(Attribute::Float(_))) {
                return Err(attr_err(op, "missing float attribute `angle`"));
            }
        }
        n => match attrs.get("angles").and_then(Attribute::as_array) {
            Some(a) if a.len() == n && a.iter().all(|x| matches!(x, Attribute::Float(_))) => {}
            _ => return Err(attr_err(op, format!("expected `angles` array of {n} floats"))),
        },
    }
    Ok(())
}

/// Checks an operation against its registered signature.
pub fn check_signature(
    name: &str,
    operands: &[Type],
    results: &[Type],
    attrs: &AttrMap,
    num_regions: usize,
) -> Result<(), IrError> {
    let regions = |expected: usize| {
        if num_regions != expected {
            Err(IrError::RegionCountMismatch {
                op: name.to_string(),
                expected,
                found: num_regions,
            })
        } else {
            Ok(())
        }
    };
    let (dialect, mnemonic) = split(name);
    let qubit = match dialect {
        "qc" => Type::QubitRef,
        _ => Type::QubitState,
    };
    let functional = dialect == "qco";

    if let Some(kind) = gate_kind(name) {
        regions(0)?;
        let (nq, np) = (kind.num_qubits(), kind.num_params());
        let nangle = if operands.len() == nq {
            check_angle_attrs(name, attrs, np)?;
            0
        } else if np > 0 && operands.len() == nq + np {
            expect_all(name, &operands[..np], 0, &Type::Float64)?;
            np
        } else if np > 0 {
            return Err(arity(name, format!("{nq} or {}", nq + np), operands.len()));
        } else {
            return Err(arity(name, nq, operands.len()));
        };
        expect_all(name, &operands[nangle..], nangle, &qubit)?;
        let want = if functional { vec![qubit; nq] } else { vec![] };
        return expect_results(name, results, &want);
    }

    match (dialect, mnemonic) {
        ("qc" | "qco", "alloc") => {
            regions(0)?;
            expect_operands(name, operands, &[])?;
            expect_results(name, results, &[qubit])
        }
        ("qc", "alloc_reg") => {
            regions(0)?;
            expect_operands(name, operands, &[])?;
            let size = int_attr(name, attrs, "size")?;
            if size < 1 || size > u32::MAX as i64 {
                return Err(attr_err(name, "register size must be positive"));
            }
            expect_results(name, results, &[Type::QubitRegister(size as u32)])
        }
        ("qc", "extract") => {
            regions(0)?;
            if operands.len() != 1 {
                return Err(arity(name, 1, operands.len()));
            }
            if !matches!(operands[0], Type::QubitRegister(_)) {
                return Err(type_err(name, 0, "!qc.qreg<N>", &operands[0]));
            }
            int_attr(name, attrs, "index")?;
            expect_results(name, results, &[Type::QubitRef])
        }
        ("qc" | "qco", "dealloc") => {
            regions(0)?;
            expect_operands(name, operands, &[qubit])?;
            expect_results(name, results, &[])
        }
        ("qc" | "qco", "measure") => {
            regions(0)?;
            expect_operands(name, operands, std::slice::from_ref(&qubit))?;
            if functional {
                expect_results(name, results, &[qubit, Type::Bit])
            } else {
                expect_results(name, results, &[Type::Bit])
            }
        }
        ("qc" | "qco", "reset") => {
            regions(0)?;
            expect_operands(name, operands, std::slice::from_ref(&qubit))?;
            let want = if functional { vec![qubit] } else { vec![] };
            expect_results(name, results, &want)
        }
        ("qc" | "qco", "ctrl") => {
            regions(1)?;
            expect_all(name, operands, 0, &qubit)?;
            if let Some(p) = attrs.get("polarities") {
                match p.as_array() {
                    Some(a) if a.iter().all(|x| matches!(x, Attribute::Bool(_))) => {
                        if !functional && a.len() != operands.len() {
                            return Err(attr_err(
                                name,
                                format!("{} polarities for {} controls", a.len(), operands.len()),
                            ));
                        }
                    }
                    _ => return Err(attr_err(name, "`polarities` must be an array of booleans")),
                }
            }
            let want = if functional {
                vec![qubit; operands.len()]
            } else {
                vec![]
            };
            expect_results(name, results, &want)
        }
        ("qc" | "qco", "inv" | "pow") => {
            regions(1)?;
            if mnemonic == "pow" {
                int_attr(name, attrs, "exponent")?;
            }
            if functional {
                expect_all(name, operands, 0, &qubit)?;
                expect_results(name, results, &vec![qubit; operands.len()])
            } else {
                expect_operands(name, operands, &[])?;
                expect_results(name, results, &[])
            }
        }
        ("qc" | "qco", "gate_def") => {
            regions(1)?;
            expect_operands(name, operands, &[])?;
            if attrs.get("sym_name").and_then(Attribute::as_text).is_none() {
                return Err(attr_err(name, "missing text attribute `sym_name`"));
            }
            expect_results(name, results, &[])
        }
        ("qc" | "qco", "call_gate") => {
            regions(0)?;
            if attrs.get("callee").and_then(Attribute::as_text).is_none() {
                return Err(attr_err(name, "missing text attribute `callee`"));
            }
            let nangle = operands.iter().take_while(|t| **t == Type::Float64).count();
            let nq = operands.len() - nangle;
            if nq == 0 {
                return Err(arity(name, "at least one qubit", operands.len()));
            }
            expect_all(name, &operands[nangle..], nangle, &qubit)?;
            if nangle > 0 && (attrs.contains_key("angle") || attrs.contains_key("angles")) {
                return Err(attr_err(name, "angles given both as operands and attributes"));
            }
            let want = if functional { vec![qubit; nq] } else { vec![] };
            expect_results(name, results, &want)
        }
        ("cf", "if") => {
            regions(2)?;
            expect_operands(name, operands, &[Type::Bit])
        }
        ("cf", "for") => {
            regions(1)?;
            if operands.len() < 3 {
                return Err(arity(name, "at least 3", operands.len()));
            }
            expect_all(name, &operands[..3], 0, &Type::Index)?;
            expect_results(name, results, &operands[3..])
        }
        ("cf", "while") => {
            regions(2)?;
            expect_results(name, results, operands)
        }
        ("cf", "yield") => {
            regions(0)?;
            expect_results(name, results, &[])
        }
        ("cf", "condition") => {
            regions(0)?;
            match operands.first() {
                Some(Type::Bit) => {}
                Some(t) => return Err(type_err(name, 0, Type::Bit, t)),
                None => return Err(arity(name, "at least 1", 0)),
            }
            expect_results(name, results, &[])
        }
        ("arith", "constant") => {
            regions(0)?;
            expect_operands(name, operands, &[])?;
            if results.len() != 1 {
                return Err(result_err(name, "expected exactly one result"));
            }
            let ok = matches!(
                (&results[0], attrs.get("value")),
                (Type::Float64, Some(Attribute::Float(_)))
                    | (Type::Index | Type::Integer(_), Some(Attribute::Int(_)))
                    | (Type::Bit, Some(Attribute::Bool(_)))
            );
            if !ok {
                return Err(attr_err(
                    name,
                    format!("`value` does not match result type {}", results[0]),
                ));
            }
            Ok(())
        }
        ("arith", "addf" | "subf" | "mulf" | "divf") => {
            regions(0)?;
            expect_operands(name, operands, &[Type::Float64, Type::Float64])?;
            expect_results(name, results, &[Type::Float64])
        }
        ("arith", "negf") => {
            regions(0)?;
            expect_operands(name, operands, &[Type::Float64])?;
            expect_results(name, results, &[Type::Float64])
        }
        _ => Err(IrError::UnknownOpcode(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(split("qco.rx"), ("qco", "rx"));
        assert_eq!(gate_kind("qco.sxdg"), Some(GateKind::Sxdg));
        assert_eq!(gate_kind("cf.if"), None);
        assert!(is_modifier("qc.pow") && !is_modifier("qc.h"));
        assert!(is_unitary("qc.call_gate") && !is_unitary("qc.measure"));
        assert!(is_terminator("cf.condition") && !is_terminator("cf.while"));
        assert!(is_region_bearing("cf.for") && !is_region_bearing("qc.x"));
        assert!(is_registered("qco.alloc") && !is_registered("qco.alloc_reg"));
    }

    #[test]
    fn angles_are_checked() {
        let mut attrs = AttrMap::new();
        assert!(check_angle_attrs("qc.rx", &attrs, 1).is_err());
        attrs.insert("angle".into(), Attribute::Float(0.5));
        assert!(check_angle_attrs("qc.rx", &attrs, 1).is_ok());
    }
}
