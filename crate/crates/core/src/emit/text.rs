//! Textual IR: printer and parser.
//!
//! ```text
//! qcir.module
//! %q0 = qc.alloc : !qc.qubit
//! qc.rz(%q0) { angle = 1.5707963267948966 }
//! %c = qc.measure(%q0) : i1
//! cf.if(%c) { qc.x(%q0) } { cf.yield }
//! ```
//!
//! One op per line: results, opcode, operands in parentheses (omitted when
//! there are none), attributes in braces, regions in braces, then result
//! types after ` : `. A region holding a single argument-free op without
//! results or regions of its own is printed inline; other regions span
//! several lines indented by two spaces, with block arguments on the first
//! line as `^(%a: !qco.qubit, ...)`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::ir::{
    format_f64, AttrMap, Attribute, BlockId, Diagnostic, InsertPoint, Location, Module, OpId, OperationState, Region,
    Type, ValueId,
};

pub const HEADER: &str = "qcir.module";

// ---- printer -------------------------------------------------------------------

struct Namer {
    names: HashMap<ValueId, String>,
    used: HashSet<String>,
    next: usize,
}

impl Namer {
    fn name(&mut self, m: &Module, v: ValueId) -> String {
        if let Some(n) = self.names.get(&v) {
            return n.clone();
        }
        let hint: Option<String> = m
            .value_name(v)
            .map(|h| h.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect())
            .filter(|h: &String| !h.is_empty() && !h.chars().all(|c| c.is_ascii_digit()));
        let name = match hint {
            Some(h) if !self.used.contains(&h) => h,
            Some(h) => (1..)
                .map(|i| format!("{h}_{i}"))
                .find(|c| !self.used.contains(c))
                .expect("unbounded search"),
            None => loop {
                let c = self.next.to_string();
                self.next += 1;
                if !self.used.contains(&c) {
                    break c;
                }
            },
        };
        self.used.insert(name.clone());
        self.names.insert(v, name.clone());
        name
    }
}

/// Prints a module in the textual IR format.
pub fn print_ir(m: &Module) -> String {
    let mut namer = Namer {
        names: HashMap::new(),
        used: HashSet::new(),
        next: 0,
    };
    let mut out = String::from(HEADER);
    out.push('\n');
    for op in m.block_ops(m.body()) {
        print_op(m, *op, 0, &mut namer, &mut out);
    }
    out
}

/// Prints a single op (and its regions) without a trailing newline.
pub fn print_op_string(m: &Module, op: OpId) -> String {
    let mut namer = Namer {
        names: HashMap::new(),
        used: HashSet::new(),
        next: 0,
    };
    let mut out = String::new();
    print_op(m, op, 0, &mut namer, &mut out);
    out.trim_end().to_string()
}

fn print_attrs(attrs: &AttrMap, out: &mut String) {
    if attrs.is_empty() {
        return;
    }
    out.push_str(" { ");
    for (i, (k, v)) in attrs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{k} = {v}");
    }
    out.push_str(" }");
}

fn is_inline_region(m: &Module, region: &Region) -> bool {
    let [block] = region.blocks.as_slice() else {
        return false;
    };
    if !m.block_args(*block).is_empty() {
        return false;
    }
    match m.block_ops(*block) {
        [op] => m.regions(*op).is_empty() && m.results(*op).is_empty(),
        _ => false,
    }
}

fn print_op(m: &Module, op: OpId, indent: usize, namer: &mut Namer, out: &mut String) {
    let pad = "  ".repeat(indent);
    out.push_str(&pad);
    let o = m.op(op);
    if !o.results().is_empty() {
        let names: Vec<String> = o.results().iter().map(|r| format!("%{}", namer.name(m, *r))).collect();
        let _ = write!(out, "{} = ", names.join(", "));
    }
    out.push_str(o.name());
    if !o.operands().is_empty() {
        let names: Vec<String> = o.operands().iter().map(|v| format!("%{}", namer.name(m, *v))).collect();
        let _ = write!(out, "({})", names.join(", "));
    }
    print_attrs(o.attrs(), out);
    for region in o.regions() {
        if is_inline_region(m, region) {
            out.push_str(" { ");
            let mut inner = String::new();
            print_op(m, m.block_ops(region.blocks[0])[0], 0, namer, &mut inner);
            out.push_str(inner.trim_end());
            out.push_str(" }");
            continue;
        }
        out.push_str(" {\n");
        for block in &region.blocks {
            let args = m.block_args(*block);
            if !args.is_empty() {
                let items: Vec<String> = args
                    .iter()
                    .map(|a| format!("%{}: {}", namer.name(m, *a), m.value_type(*a)))
                    .collect();
                let _ = writeln!(out, "{pad}  ^({})", items.join(", "));
            }
            for inner in m.block_ops(*block) {
                print_op(m, *inner, indent + 1, namer, out);
            }
        }
        out.push_str(&pad);
        out.push('}');
    }
    if !o.results().is_empty() {
        let types: Vec<String> = o.results().iter().map(|r| m.value_type(*r).to_string()).collect();
        let _ = write!(out, " : {}", types.join(", "));
    }
    out.push('\n');
}

// ---- parser --------------------------------------------------------------------

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub fn to_diagnostic(&self, file: &str) -> Diagnostic {
        Diagnostic::error(self.message.clone(), Some(Location::new(file, self.line, self.column)))
    }
}

struct TextParser<'a> {
    src: &'a [u8],
    pos: usize,
    scopes: Vec<HashMap<String, ValueId>>,
    m: Module,
}

type PResult<T> = Result<T, ParseError>;

/// Parses the textual IR format.
pub fn parse_ir(text: &str) -> Result<Module, ParseError> {
    let mut p = TextParser {
        src: text.as_bytes(),
        pos: 0,
        scopes: vec![HashMap::new()],
        m: Module::new(),
    };
    p.skip_ws();
    if !p.eat_word(HEADER) {
        return p.err(format!("expected `{HEADER}` header"));
    }
    let body = p.m.body();
    loop {
        p.skip_ws();
        if p.pos >= p.src.len() {
            break;
        }
        p.op(body)?;
    }
    Ok(p.m)
}

impl TextParser<'_> {
    fn position(&self) -> (u32, u32) {
        let before = &self.src[..self.pos.min(self.src.len())];
        let line = before.iter().filter(|b| **b == b'\n').count() as u32 + 1;
        let col = before.iter().rev().take_while(|b| **b != b'\n').count() as u32 + 1;
        (line, col)
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let (line, column) = self.position();
        Err(ParseError {
            line,
            column,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        loop {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.src[self.pos.min(self.src.len())..].starts_with(b"//") {
                while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> PResult<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected `{}`", c as char))
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(w.as_bytes()) {
            let end = self.pos + w.len();
            let boundary = self.src.get(end).is_none_or(|c| !is_word(*c));
            if boundary {
                self.pos = end;
                return true;
            }
        }
        false
    }

    fn word(&mut self) -> PResult<String> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(is_word) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected an identifier");
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn value_name(&mut self) -> PResult<String> {
        self.skip_ws();
        if self.peek() != Some(b'%') {
            return self.err("expected a value name starting with `%`");
        }
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("empty value name");
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn lookup(&self, name: &str) -> PResult<ValueId> {
        match self.scopes.iter().rev().find_map(|s| s.get(name)) {
            Some(v) => Ok(*v),
            None => self.err(format!("use of undefined value `%{name}`")),
        }
    }

    fn define(&mut self, name: String, v: ValueId) -> PResult<()> {
        self.m.set_value_name(v, name.clone());
        let scope = self.scopes.last_mut().expect("scope stack is never empty");
        if scope.insert(name.clone(), v).is_some() {
            return self.err(format!("redefinition of `%{name}`"));
        }
        Ok(())
    }

    fn ty(&mut self) -> PResult<Type> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(b"!qc.qreg<") {
            self.pos += "!qc.qreg<".len();
            let n = self.word()?;
            self.expect(b'>')?;
            return match n.parse::<u32>() {
                Ok(n) if n > 0 => Ok(Type::QubitRegister(n)),
                _ => self.err("register size must be a positive integer"),
            };
        }
        for (text, ty) in [("!qco.qubit", Type::QubitState), ("!qc.qubit", Type::QubitRef)] {
            if self.eat_word(text) {
                return Ok(ty);
            }
        }
        let w = self.word()?;
        match w.as_str() {
            "f64" => Ok(Type::Float64),
            "index" => Ok(Type::Index),
            "none" => Ok(Type::None),
            _ => match w.strip_prefix('i').and_then(|n| n.parse::<u32>().ok()) {
                Some(width) if width > 0 => Ok(Type::integer(width)),
                _ => self.err(format!("unknown type `{w}`")),
            },
        }
    }

    fn attr_value(&mut self) -> PResult<Attribute> {
        self.skip_ws();
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.eat(b']') {
                    loop {
                        items.push(self.attr_value()?);
                        if self.eat(b']') {
                            break;
                        }
                        self.expect(b',')?;
                    }
                }
                Ok(Attribute::Array(items))
            }
            Some(b'"') => {
                let start = self.pos;
                self.pos += 1;
                let mut escaped = false;
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    match (escaped, c) {
                        (false, b'\\') => escaped = true,
                        (false, b'"') => break,
                        _ => escaped = false,
                    }
                }
                let raw = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                match unquote(&raw) {
                    Some(s) => Ok(Attribute::Text(s)),
                    None => self.err("malformed string attribute"),
                }
            }
            _ => {
                let start = self.pos;
                if self.peek() == Some(b'-') {
                    self.pos += 1;
                }
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, b'.' | b'_' | b'+' | b'-'))
                {
                    self.pos += 1;
                }
                let tok = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                match tok.as_str() {
                    "true" => return Ok(Attribute::Bool(true)),
                    "false" => return Ok(Attribute::Bool(false)),
                    _ => {}
                }
                if let Ok(i) = tok.parse::<i64>() {
                    return Ok(Attribute::Int(i));
                }
                match tok.parse::<f64>() {
                    Ok(x) => Ok(Attribute::Float(x)),
                    Err(_) => self.err(format!("malformed attribute value `{tok}`")),
                }
            }
        }
    }

    /// True if the upcoming `{` opens an attribute dictionary.
    fn at_attr_dict(&self) -> bool {
        let mut i = self.pos;
        let ws = |i: &mut usize| {
            while *i < self.src.len() && self.src[*i].is_ascii_whitespace() {
                *i += 1;
            }
        };
        ws(&mut i);
        if self.src.get(i) != Some(&b'{') {
            return false;
        }
        i += 1;
        ws(&mut i);
        let start = i;
        while i < self.src.len() && (self.src[i].is_ascii_alphanumeric() || self.src[i] == b'_') {
            i += 1;
        }
        if i == start {
            return false;
        }
        ws(&mut i);
        self.src.get(i) == Some(&b'=')
    }

    fn region(&mut self) -> PResult<Region> {
        self.expect(b'{')?;
        let block = self.m.create_block(&[]);
        self.scopes.push(HashMap::new());
        self.skip_ws();
        if self.src[self.pos..].starts_with(b"^(") {
            self.pos += 2;
            if !self.eat(b')') {
                loop {
                    let name = self.value_name()?;
                    self.expect(b':')?;
                    let ty = self.ty()?;
                    let v = self.m.add_block_arg(block, ty);
                    self.define(name, v)?;
                    if self.eat(b')') {
                        break;
                    }
                    self.expect(b',')?;
                }
            }
        }
        loop {
            if self.eat(b'}') {
                break;
            }
            if self.pos >= self.src.len() {
                return self.err("unterminated region");
            }
            self.op(block)?;
        }
        self.scopes.pop();
        Ok(Region::new(block))
    }

    fn op(&mut self, block: BlockId) -> PResult<OpId> {
        self.skip_ws();
        let mut results = Vec::new();
        if self.peek() == Some(b'%') {
            loop {
                results.push(self.value_name()?);
                if !self.eat(b',') {
                    break;
                }
            }
            self.expect(b'=')?;
        }
        self.skip_ws();
        let (line, column) = self.position();
        let name = self.word()?;
        let mut st = OperationState::new(name.clone());
        if self.eat(b'(') && !self.eat(b')') {
            loop {
                let v = self.value_name()?;
                let id = self.lookup(&v)?;
                st = st.operand(id);
                if self.eat(b')') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        if self.at_attr_dict() {
            self.expect(b'{')?;
            loop {
                let key = self.word()?;
                self.expect(b'=')?;
                let value = self.attr_value()?;
                st = st.attr(key, value);
                if self.eat(b'}') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        loop {
            self.skip_ws();
            if self.peek() != Some(b'{') {
                break;
            }
            let r = self.region()?;
            st = st.region(r);
        }
        if self.eat(b':') {
            loop {
                st = st.result(self.ty()?);
                if !self.eat(b',') {
                    break;
                }
            }
        }
        if st.result_types.len() != results.len() {
            return Err(ParseError {
                line,
                column,
                message: format!(
                    "`{name}` declares {} results but {} types",
                    results.len(),
                    st.result_types.len()
                ),
            });
        }
        let op = self.m.build_op(InsertPoint::End(block), st).map_err(|e| ParseError {
            line,
            column,
            message: e.to_string(),
        })?;
        for (n, v) in results.into_iter().zip(self.m.results(op).to_vec()) {
            self.define(n, v)?;
        }
        Ok(op)
    }
}

fn is_word(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'.'
}

fn unquote(raw: &str) -> Option<String> {
    let inner = raw.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            '0' => out.push('\0'),
            '\\' => out.push('\\'),
            '"' => out.push('"'),
            '\'' => out.push('\''),
            'u' => {
                if chars.next()? != '{' {
                    return None;
                }
                let hex: String = chars.by_ref().take_while(|c| *c != '}').collect();
                out.push(char::from_u32(u32::from_str_radix(&hex, 16).ok()?)?);
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Float formatting used for attributes (re-exported for emitters).
pub fn float_text(x: f64) -> String {
    format_f64(x)
}
