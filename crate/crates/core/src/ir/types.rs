use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Handle to an SSA value owned by a [`Module`](super::Module).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueId(pub(crate) u32);

/// Handle to an operation owned by a [`Module`](super::Module).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpId(pub(crate) u32);

/// Handle to a block owned by a [`Module`](super::Module).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub(crate) u32);

macro_rules! id_impl {
    ($t:ident, $prefix:literal) => {
        impl $t {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_impl!(ValueId, "%v");
id_impl!(OpId, "op");
id_impl!(BlockId, "^bb");

/// The type universe shared by every dialect.
///
/// `QubitRef` and `QubitState` are deliberately unrelated: a reference is a
/// mutable handle (imperative dialect), a state is a linear value
/// (functional dialect).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    QubitRef,
    QubitState,
    QubitRegister(u32),
    Bit,
    Integer(u32),
    Float64,
    Index,
    None,
}

impl Type {
    /// Integer type of the given width; width 1 is the bit type.
    pub fn integer(width: u32) -> Type {
        if width == 1 {
            Type::Bit
        } else {
            Type::Integer(width)
        }
    }

    pub fn is_qubit(&self) -> bool {
        matches!(self, Type::QubitRef | Type::QubitState)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::QubitRef => f.write_str("!qc.qubit"),
            Type::QubitState => f.write_str("!qco.qubit"),
            Type::QubitRegister(n) => write!(f, "!qc.qreg<{n}>"),
            Type::Bit => f.write_str("i1"),
            Type::Integer(w) => write!(f, "i{w}"),
            Type::Float64 => f.write_str("f64"),
            Type::Index => f.write_str("index"),
            Type::None => f.write_str("none"),
        }
    }
}

/// Constant data attached to an operation.
#[derive(Clone, Debug, PartialEq)]
pub enum Attribute {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Array(Vec<Attribute>),
}

impl Attribute {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Attribute::Float(x) => Some(*x),
            Attribute::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Attribute::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Attribute::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Attribute::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&[Attribute]> {
        match self {
            Attribute::Array(a) => Some(a),
            _ => None,
        }
    }
}

/// Formats a float so that it parses back to the identical value and always
/// reads as a float (`1.0`, never `1`).
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attribute::Float(x) => f.write_str(&format_f64(*x)),
            Attribute::Int(i) => write!(f, "{i}"),
            Attribute::Bool(b) => write!(f, "{b}"),
            Attribute::Text(s) => write!(f, "{s:?}"),
            Attribute::Array(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
        }
    }
}

pub type AttrMap = BTreeMap<String, Attribute>;

/// Source position of an operation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Location {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(file: impl Into<Arc<str>>, line: u32, column: u32) -> Self {
        Location {
            file: file.into(),
            line,
            column,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// An ordered list of blocks nested under an operation.
///
/// Only structured control flow exists, so every region built by this crate
/// holds exactly one block; the verifier enforces it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Region {
    pub blocks: Vec<BlockId>,
}

impl Region {
    pub fn new(block: BlockId) -> Self {
        Region { blocks: vec![block] }
    }

    pub fn entry(&self) -> Option<BlockId> {
        self.blocks.first().copied()
    }
}

/// Where a value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueDef {
    Result { op: OpId, index: usize },
    BlockArg { block: BlockId, index: usize },
}

/// One operand slot holding a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Use {
    pub op: OpId,
    pub operand: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_always_read_as_floats() {
        assert_eq!(format_f64(1.0), "1.0");
        assert_eq!(format_f64(-0.5), "-0.5");
        let x = std::f64::consts::PI / 3.0;
        assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn attribute_accessors() {
        assert_eq!(Attribute::Int(3).as_f64(), Some(3.0));
        assert_eq!(Attribute::Float(0.5).as_int(), None);
        assert_eq!(Attribute::Bool(true).as_bool(), Some(true));
        assert_eq!(Attribute::Text("g".into()).as_text(), Some("g"));
        let arr = Attribute::Array(vec![Attribute::Bool(false), Attribute::Int(2)]);
        assert_eq!(arr.to_string(), "[false, 2]");
        assert_eq!(arr.as_array().map(<[_]>::len), Some(2));
    }

    #[test]
    fn locations_render_as_file_line_column() {
        assert_eq!(Location::new("a.qasm", 3, 7).to_string(), "a.qasm:3:7");
        assert!(Type::QubitRef.is_qubit() && Type::QubitState.is_qubit() && !Type::integer(1).is_qubit());
    }
}
