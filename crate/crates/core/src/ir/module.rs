use std::collections::HashMap;

use super::types::*;
use super::IrError;
use crate::dialect::registry;

/// Everything needed to create an operation.
#[derive(Clone, Debug)]
pub struct OperationState {
    pub name: String,
    pub operands: Vec<ValueId>,
    pub result_types: Vec<Type>,
    pub attrs: AttrMap,
    pub regions: Vec<Region>,
    pub loc: Option<Location>,
}

impl OperationState {
    pub fn new(name: impl Into<String>) -> Self {
        OperationState {
            name: name.into(),
            operands: Vec::new(),
            result_types: Vec::new(),
            attrs: AttrMap::new(),
            regions: Vec::new(),
            loc: None,
        }
    }

    pub fn operand(mut self, v: ValueId) -> Self {
        self.operands.push(v);
        self
    }

    pub fn operands(mut self, vs: impl IntoIterator<Item = ValueId>) -> Self {
        self.operands.extend(vs);
        self
    }

    pub fn result(mut self, ty: Type) -> Self {
        self.result_types.push(ty);
        self
    }

    pub fn results(mut self, tys: impl IntoIterator<Item = Type>) -> Self {
        self.result_types.extend(tys);
        self
    }

    pub fn attr(mut self, name: impl Into<String>, value: Attribute) -> Self {
        self.attrs.insert(name.into(), value);
        self
    }

    pub fn attrs(mut self, attrs: AttrMap) -> Self {
        self.attrs.extend(attrs);
        self
    }

    pub fn region(mut self, region: Region) -> Self {
        self.regions.push(region);
        self
    }

    pub fn loc(mut self, loc: Option<Location>) -> Self {
        self.loc = loc;
        self
    }
}

/// Cursor for inserting operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertPoint {
    Start(BlockId),
    End(BlockId),
    Before(OpId),
    After(OpId),
}

#[derive(Clone, Debug)]
pub struct Operation {
    pub(crate) name: &'static str,
    pub(crate) operands: Vec<ValueId>,
    pub(crate) results: Vec<ValueId>,
    pub(crate) attrs: AttrMap,
    pub(crate) regions: Vec<Region>,
    pub(crate) loc: Option<Location>,
    pub(crate) parent: Option<BlockId>,
}

impl Operation {
    pub fn name(&self) -> &'static str {
        self.name
    }
    pub fn operands(&self) -> &[ValueId] {
        &self.operands
    }
    pub fn results(&self) -> &[ValueId] {
        &self.results
    }
    pub fn attrs(&self) -> &AttrMap {
        &self.attrs
    }
    pub fn attr(&self, name: &str) -> Option<&Attribute> {
        self.attrs.get(name)
    }
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }
    pub fn loc(&self) -> Option<&Location> {
        self.loc.as_ref()
    }
    pub fn parent(&self) -> Option<BlockId> {
        self.parent
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct BlockData {
    pub(crate) args: Vec<ValueId>,
    pub(crate) ops: Vec<OpId>,
    pub(crate) parent: Option<OpId>,
}

#[derive(Clone, Debug)]
pub(crate) struct ValueData {
    pub(crate) ty: Type,
    pub(crate) def: ValueDef,
    pub(crate) uses: Vec<Use>,
    pub(crate) name: Option<String>,
}

/// A whole program: id-indexed tables of operations, blocks and values plus
/// one top-level body block.
///
/// Ids are never reused; erased operations leave a tombstone.
#[derive(Clone, Debug)]
pub struct Module {
    pub(crate) ops: Vec<Option<Operation>>,
    pub(crate) blocks: Vec<Option<BlockData>>,
    pub(crate) values: Vec<ValueData>,
    body: BlockId,
}

impl Default for Module {
    fn default() -> Self {
        Self::new()
    }
}

impl Module {
    pub fn new() -> Self {
        let mut m = Module {
            ops: Vec::new(),
            blocks: Vec::new(),
            values: Vec::new(),
            body: BlockId(0),
        };
        m.body = m.create_block(&[]);
        m
    }

    /// The top-level entry block.
    pub fn body(&self) -> BlockId {
        self.body
    }

    // ---- accessors ---------------------------------------------------------

    pub fn op(&self, op: OpId) -> &Operation {
        self.ops[op.index()]
            .as_ref()
            .unwrap_or_else(|| panic!("{op} was erased"))
    }

    pub fn is_live(&self, op: OpId) -> bool {
        self.ops.get(op.index()).is_some_and(Option::is_some)
    }

    pub fn op_name(&self, op: OpId) -> &'static str {
        self.op(op).name
    }

    pub fn operands(&self, op: OpId) -> &[ValueId] {
        &self.op(op).operands
    }

    pub fn results(&self, op: OpId) -> &[ValueId] {
        &self.op(op).results
    }

    pub fn attr(&self, op: OpId, name: &str) -> Option<&Attribute> {
        self.op(op).attrs.get(name)
    }

    pub fn regions(&self, op: OpId) -> &[Region] {
        &self.op(op).regions
    }

    /// Entry block of the `index`-th region of `op`.
    pub fn region_block(&self, op: OpId, index: usize) -> BlockId {
        self.op(op).regions[index].entry().expect("region without a block")
    }

    pub fn parent_block(&self, op: OpId) -> Option<BlockId> {
        self.op(op).parent
    }

    pub fn block_parent_op(&self, block: BlockId) -> Option<OpId> {
        self.block(block).parent
    }

    /// The operation whose region contains `op`.
    pub fn parent_op(&self, op: OpId) -> Option<OpId> {
        self.parent_block(op).and_then(|b| self.block_parent_op(b))
    }

    pub(crate) fn block(&self, block: BlockId) -> &BlockData {
        self.blocks[block.index()]
            .as_ref()
            .unwrap_or_else(|| panic!("{block} was erased"))
    }

    fn block_mut(&mut self, block: BlockId) -> &mut BlockData {
        self.blocks[block.index()]
            .as_mut()
            .unwrap_or_else(|| panic!("{block} was erased"))
    }

    fn op_mut(&mut self, op: OpId) -> &mut Operation {
        self.ops[op.index()]
            .as_mut()
            .unwrap_or_else(|| panic!("{op} was erased"))
    }

    pub fn block_args(&self, block: BlockId) -> &[ValueId] {
        &self.block(block).args
    }

    pub fn block_ops(&self, block: BlockId) -> &[OpId] {
        &self.block(block).ops
    }

    /// Last operation of a block, if any.
    pub fn terminator(&self, block: BlockId) -> Option<OpId> {
        self.block(block).ops.last().copied()
    }

    pub fn value_type(&self, v: ValueId) -> &Type {
        &self.values[v.index()].ty
    }

    pub fn value_def(&self, v: ValueId) -> ValueDef {
        self.values[v.index()].def
    }

    pub fn uses(&self, v: ValueId) -> &[Use] {
        &self.values[v.index()].uses
    }

    pub fn has_uses(&self, v: ValueId) -> bool {
        !self.values[v.index()].uses.is_empty()
    }

    pub fn value_name(&self, v: ValueId) -> Option<&str> {
        self.values[v.index()].name.as_deref()
    }

    pub fn set_value_name(&mut self, v: ValueId, name: impl Into<String>) {
        self.values[v.index()].name = Some(name.into());
    }

    /// Operation defining `v`, or `None` for block arguments.
    pub fn defining_op(&self, v: ValueId) -> Option<OpId> {
        match self.value_def(v) {
            ValueDef::Result { op, .. } => Some(op),
            ValueDef::BlockArg { .. } => None,
        }
    }

    /// Number of values ever minted (ids are dense).
    pub fn value_count(&self) -> usize {
        self.values.len()
    }

    /// Location of `op`, or of the nearest ancestor that has one.
    pub fn nearest_loc(&self, op: OpId) -> Option<Location> {
        let mut cur = Some(op);
        while let Some(o) = cur {
            if let Some(l) = &self.op(o).loc {
                return Some(l.clone());
            }
            cur = self.parent_op(o);
        }
        None
    }

    // ---- construction ------------------------------------------------------

    /// Creates a detached block with the given argument types.
    pub fn create_block(&mut self, arg_types: &[Type]) -> BlockId {
        let id = BlockId(self.blocks.len() as u32);
        self.blocks.push(Some(BlockData::default()));
        for ty in arg_types {
            self.add_block_arg(id, ty.clone());
        }
        id
    }

    pub fn add_block_arg(&mut self, block: BlockId, ty: Type) -> ValueId {
        let index = self.block(block).args.len();
        let v = self.mint_value(ty, ValueDef::BlockArg { block, index });
        self.block_mut(block).args.push(v);
        v
    }

    fn mint_value(&mut self, ty: Type, def: ValueDef) -> ValueId {
        let id = ValueId(self.values.len() as u32);
        self.values.push(ValueData {
            ty,
            def,
            uses: Vec::new(),
            name: None,
        });
        id
    }

    /// Creates an operation at `at` after checking it against the opcode
    /// registry. Fresh result values are minted and operand use lists updated.
    pub fn build_op(&mut self, at: InsertPoint, state: OperationState) -> Result<OpId, IrError> {
        let name = registry::intern(&state.name).ok_or_else(|| IrError::UnknownOpcode(state.name.clone()))?;
        let operand_types: Vec<Type> = state.operands.iter().map(|v| self.value_type(*v).clone()).collect();
        registry::check_signature(
            name,
            &operand_types,
            &state.result_types,
            &state.attrs,
            state.regions.len(),
        )?;
        let (block, index) = self.resolve(at);
        let id = OpId(self.ops.len() as u32);
        self.ops.push(Some(Operation {
            name,
            operands: state.operands.clone(),
            results: Vec::new(),
            attrs: state.attrs,
            regions: state.regions,
            loc: state.loc,
            parent: Some(block),
        }));
        for (i, v) in state.operands.iter().enumerate() {
            self.values[v.index()].uses.push(Use { op: id, operand: i });
        }
        let results: Vec<ValueId> = state
            .result_types
            .into_iter()
            .enumerate()
            .map(|(index, ty)| self.mint_value(ty, ValueDef::Result { op: id, index }))
            .collect();
        self.op_mut(id).results = results;
        let regions = self.op(id).regions.clone();
        for region in &regions {
            for b in &region.blocks {
                self.block_mut(*b).parent = Some(id);
            }
        }
        self.block_mut(block).ops.insert(index, id);
        Ok(id)
    }

    fn resolve(&self, at: InsertPoint) -> (BlockId, usize) {
        match at {
            InsertPoint::Start(b) => (b, 0),
            InsertPoint::End(b) => (b, self.block(b).ops.len()),
            InsertPoint::Before(op) => {
                let b = self.parent_block(op).expect("insert point op is detached");
                (b, self.position(op))
            }
            InsertPoint::After(op) => {
                let b = self.parent_block(op).expect("insert point op is detached");
                (b, self.position(op) + 1)
            }
        }
    }

    /// Index of `op` within its parent block.
    pub fn position(&self, op: OpId) -> usize {
        let b = self.parent_block(op).expect("op is detached");
        self.block(b)
            .ops
            .iter()
            .position(|o| *o == op)
            .expect("op missing from parent block")
    }

    // ---- mutation ----------------------------------------------------------

    /// Replaces the value in one operand slot.
    pub fn set_operand(&mut self, op: OpId, index: usize, new: ValueId) {
        let old = self.op(op).operands[index];
        if old == new {
            return;
        }
        let u = Use { op, operand: index };
        self.values[old.index()].uses.retain(|x| *x != u);
        self.values[new.index()].uses.push(u);
        self.op_mut(op).operands[index] = new;
    }

    /// Redirects every use of `old` to `new`.
    pub fn replace_all_uses(&mut self, old: ValueId, new: ValueId) -> Result<(), IrError> {
        if old == new {
            return Ok(());
        }
        let (old_ty, new_ty) = (self.value_type(old), self.value_type(new));
        if old_ty != new_ty {
            return Err(IrError::ReplaceTypeMismatch {
                old: old_ty.clone(),
                new: new_ty.clone(),
            });
        }
        let uses = std::mem::take(&mut self.values[old.index()].uses);
        for u in &uses {
            self.op_mut(u.op).operands[u.operand] = new;
        }
        self.values[new.index()].uses.extend(uses);
        Ok(())
    }

    /// Removes `op` (and everything nested in it). Fails if any result is
    /// still used outside of the op itself.
    pub fn erase_op(&mut self, op: OpId) -> Result<(), IrError> {
        for r in self.op(op).results.clone() {
            if let Some(u) = self.uses(r).first() {
                return Err(IrError::StillInUse {
                    op: self.op_name(op).to_string(),
                    user: self.op_name(u.op).to_string(),
                });
            }
        }
        self.detach_op(op);
        self.erase_recursive(op);
        Ok(())
    }

    fn erase_recursive(&mut self, op: OpId) {
        for region in self.op(op).regions.clone() {
            for b in region.blocks {
                for inner in self.block(b).ops.clone() {
                    self.erase_recursive(inner);
                }
                self.blocks[b.index()] = None;
            }
        }
        let operands = self.op(op).operands.clone();
        for (i, v) in operands.into_iter().enumerate() {
            let u = Use { op, operand: i };
            self.values[v.index()].uses.retain(|x| *x != u);
        }
        self.ops[op.index()] = None;
    }

    /// Unlinks `op` from its block without destroying it.
    pub fn detach_op(&mut self, op: OpId) {
        if let Some(b) = self.op(op).parent {
            self.block_mut(b).ops.retain(|o| *o != op);
            self.op_mut(op).parent = None;
        }
    }

    /// Moves `op` to a new position.
    pub fn move_op(&mut self, op: OpId, at: InsertPoint) {
        self.detach_op(op);
        let (block, index) = self.resolve(at);
        self.block_mut(block).ops.insert(index, op);
        self.op_mut(op).parent = Some(block);
    }

    /// Attaches a new attribute value (the previous one is dropped).
    pub fn set_attr(&mut self, op: OpId, name: impl Into<String>, value: Attribute) {
        self.op_mut(op).attrs.insert(name.into(), value);
    }

    pub fn remove_attr(&mut self, op: OpId, name: &str) -> Option<Attribute> {
        self.op_mut(op).attrs.remove(name)
    }

    /// Removes the block argument at `index`; it must be unused.
    pub fn remove_block_arg(&mut self, block: BlockId, index: usize) {
        let v = self.block_mut(block).args.remove(index);
        assert!(self.uses(v).is_empty(), "removing a used block argument");
        for (i, a) in self.block(block).args.clone().into_iter().enumerate() {
            self.values[a.index()].def = ValueDef::BlockArg { block, index: i };
        }
    }

    // ---- traversal ---------------------------------------------------------

    /// All live operations in pre-order: each op precedes the ops nested in its
    /// regions, blocks are visited top to bottom.
    pub fn walk(&self) -> Vec<OpId> {
        self.walk_block(self.body)
    }

    pub fn walk_block(&self, block: BlockId) -> Vec<OpId> {
        let mut out = Vec::new();
        self.walk_into(block, &mut out);
        out
    }

    pub fn walk_op(&self, op: OpId) -> Vec<OpId> {
        let mut out = vec![op];
        for region in &self.op(op).regions {
            for b in &region.blocks {
                self.walk_into(*b, &mut out);
            }
        }
        out
    }

    fn walk_into(&self, block: BlockId, out: &mut Vec<OpId>) {
        for op in &self.block(block).ops {
            out.push(*op);
            for region in &self.op(*op).regions {
                for b in &region.blocks {
                    self.walk_into(*b, out);
                }
            }
        }
    }

    /// True if `block` is `ancestor` or nested somewhere inside it.
    pub fn block_is_within(&self, mut block: BlockId, ancestor: BlockId) -> bool {
        loop {
            if block == ancestor {
                return true;
            }
            match self.block(block).parent.and_then(|op| self.op(op).parent) {
                Some(b) => block = b,
                None => return false,
            }
        }
    }

    /// The ancestor of `op` (possibly `op` itself) that sits directly in `block`.
    pub fn ancestor_in_block(&self, op: OpId, block: BlockId) -> Option<OpId> {
        let mut cur = op;
        loop {
            let parent = self.op(cur).parent?;
            if parent == block {
                return Some(cur);
            }
            cur = self.block(parent).parent?;
        }
    }

    /// The block that defines `v`.
    pub fn defining_block(&self, v: ValueId) -> Option<BlockId> {
        match self.value_def(v) {
            ValueDef::Result { op, .. } => self.op(op).parent,
            ValueDef::BlockArg { block, .. } => Some(block),
        }
    }

    /// Looks up a `*.gate_def` in the top-level block by symbol name.
    pub fn lookup_symbol(&self, name: &str) -> Option<OpId> {
        self.block_ops(self.body).iter().copied().find(|op| {
            self.op_name(*op).ends_with(".gate_def")
                && self.attr(*op, "sym_name").and_then(Attribute::as_text) == Some(name)
        })
    }

    /// True if the module contains no operations at all.
    pub fn is_empty(&self) -> bool {
        self.block_ops(self.body).is_empty()
    }

    // ---- cloning -----------------------------------------------------------

    /// Captures `op` and everything nested in it as an owned tree.
    pub fn snapshot(&self, op: OpId) -> OpTree {
        let o = self.op(op);
        OpTree {
            name: o.name,
            operands: o.operands.clone(),
            results: o
                .results
                .iter()
                .map(|r| (*r, self.value_type(*r).clone(), self.value_name(*r).map(str::to_string)))
                .collect(),
            attrs: o.attrs.clone(),
            loc: o.loc.clone(),
            regions: o
                .regions
                .iter()
                .map(|r| {
                    r.blocks
                        .iter()
                        .map(|b| BlockTree {
                            args: self
                                .block_args(*b)
                                .iter()
                                .map(|a| (*a, self.value_type(*a).clone(), self.value_name(*a).map(str::to_string)))
                                .collect(),
                            ops: self.block_ops(*b).iter().map(|i| self.snapshot(*i)).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Rebuilds a captured tree at `at`. Operands are translated through
    /// `map` (values not in the map are used as-is); every value defined by the
    /// tree is added to `map`.
    pub fn materialize(
        &mut self,
        tree: &OpTree,
        at: InsertPoint,
        map: &mut HashMap<ValueId, ValueId>,
    ) -> Result<OpId, IrError> {
        let mut regions = Vec::with_capacity(tree.regions.len());
        for blocks in &tree.regions {
            let mut region = Region::default();
            for bt in blocks {
                let b = self.create_block(&[]);
                for (old, ty, name) in &bt.args {
                    let new = self.add_block_arg(b, ty.clone());
                    if let Some(n) = name {
                        self.set_value_name(new, n.clone());
                    }
                    map.insert(*old, new);
                }
                for inner in &bt.ops {
                    self.materialize(inner, InsertPoint::End(b), map)?;
                }
                region.blocks.push(b);
            }
            regions.push(region);
        }
        let state = OperationState {
            name: tree.name.to_string(),
            operands: tree
                .operands
                .iter()
                .map(|v| map.get(v).copied().unwrap_or(*v))
                .collect(),
            result_types: tree.results.iter().map(|(_, t, _)| t.clone()).collect(),
            attrs: tree.attrs.clone(),
            regions,
            loc: tree.loc.clone(),
        };
        let id = self.build_op(at, state)?;
        for ((old, _, name), new) in tree.results.iter().zip(self.results(id).to_vec()) {
            if let Some(n) = name {
                self.set_value_name(new, n.clone());
            }
            map.insert(*old, new);
        }
        Ok(id)
    }

    /// Deep-copies `op` to `at` within the same module.
    pub fn clone_op(
        &mut self,
        op: OpId,
        at: InsertPoint,
        map: &mut HashMap<ValueId, ValueId>,
    ) -> Result<OpId, IrError> {
        let tree = self.snapshot(op);
        self.materialize(&tree, at, map)
    }
}

/// Owned copy of an operation subtree, used for cloning within or across
/// modules.
#[derive(Clone, Debug)]
pub struct OpTree {
    pub name: &'static str,
    pub operands: Vec<ValueId>,
    pub results: Vec<(ValueId, Type, Option<String>)>,
    pub attrs: AttrMap,
    pub loc: Option<Location>,
    pub regions: Vec<Vec<BlockTree>>,
}

#[derive(Clone, Debug)]
pub struct BlockTree {
    pub args: Vec<(ValueId, Type, Option<String>)>,
    pub ops: Vec<OpTree>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::{parse_ir, print_ir};

    fn bell() -> Module {
        parse_ir(
            "qcir.module\n%a = qc.alloc : !qc.qubit\n%b = qc.alloc : !qc.qubit\nqc.h(%a)\n\
             qc.ctrl(%a) { qc.x(%b) }\nqc.dealloc(%a)\nqc.dealloc(%b)\n",
        )
        .unwrap()
    }

    #[test]
    fn building_checks_signatures() {
        let mut m = Module::new();
        let body = m.body();
        let a = m
            .build_op(
                InsertPoint::End(body),
                OperationState::new("qc.alloc").result(Type::QubitRef),
            )
            .unwrap();
        let q = m.results(a)[0];
        assert!(matches!(
            m.build_op(InsertPoint::End(body), OperationState::new("qc.h")),
            Err(IrError::ArityMismatch { .. })
        ));
        assert!(matches!(
            m.build_op(InsertPoint::End(body), OperationState::new("qc.teleport").operand(q)),
            Err(IrError::UnknownOpcode(_))
        ));
        let h = m
            .build_op(InsertPoint::End(body), OperationState::new("qc.h").operand(q))
            .unwrap();
        let x = m
            .build_op(InsertPoint::Before(h), OperationState::new("qc.x").operand(q))
            .unwrap();
        assert_eq!(m.block_ops(body), &[a, x, h]);
        assert_eq!(m.uses(q).len(), 2);
        assert_eq!(m.defining_op(q), Some(a));
    }

    #[test]
    fn walking_and_parents() {
        let m = bell();
        let names: Vec<_> = m.walk().into_iter().map(|o| m.op_name(o)).collect();
        assert_eq!(
            names,
            [
                "qc.alloc",
                "qc.alloc",
                "qc.h",
                "qc.ctrl",
                "qc.x",
                "qc.dealloc",
                "qc.dealloc"
            ]
        );
        let ctrl = m.walk()[3];
        let x = m.walk()[4];
        assert_eq!(m.parent_op(x), Some(ctrl));
        assert_eq!(m.parent_op(ctrl), None);
        assert_eq!(m.walk_op(ctrl), vec![ctrl, x]);
        assert_eq!(m.ancestor_in_block(x, m.body()), Some(ctrl));
    }

    #[test]
    fn erasing_and_replacing() {
        let mut m = bell();
        let (a, b) = (m.walk()[0], m.walk()[1]);
        assert!(matches!(m.erase_op(a), Err(IrError::StillInUse { .. })));
        let (qa, qb) = (m.results(a)[0], m.results(b)[0]);
        let h = m.walk()[2];
        m.set_operand(h, 0, qb);
        assert_eq!(m.uses(qb).len(), 3);
        m.replace_all_uses(qb, qa).unwrap();
        assert!(!m.has_uses(qb));
        m.erase_op(b).unwrap();
        assert!(!m.is_live(b));
        assert!(print_ir(&m).contains("qc.ctrl(%a) { qc.x(%a) }"));
    }

    #[test]
    fn cloning_ops_with_regions() {
        let mut m = bell();
        let ctrl = m.walk()[3];
        let before = m.walk().len();
        let mut map = HashMap::new();
        let copy = m.clone_op(ctrl, InsertPoint::After(ctrl), &mut map).unwrap();
        assert_eq!(m.walk().len(), before + 2);
        assert_eq!(m.op_name(copy), "qc.ctrl");
        assert_eq!(m.position(copy), m.position(ctrl) + 1);
    }

    #[test]
    fn symbols_and_moves() {
        let mut m = parse_ir(
            "qcir.module\nqc.gate_def { sym_name = \"g\" } {\n  ^(%x: !qc.qubit)\n  qc.h(%x)\n}\n\
             %q = qc.alloc : !qc.qubit\nqc.call_gate(%q) { callee = \"g\" }\nqc.x(%q)\nqc.dealloc(%q)\n",
        )
        .unwrap();
        let def = m.lookup_symbol("g").unwrap();
        assert_eq!(m.op_name(def), "qc.gate_def");
        assert!(m.lookup_symbol("nope").is_none());
        let ops = m.block_ops(m.body()).to_vec();
        m.move_op(ops[3], InsertPoint::Before(ops[2]));
        assert_eq!(m.op_name(m.block_ops(m.body())[2]), "qc.x");
        assert!(!m.is_empty());
        assert!(Module::new().is_empty());
    }
}
