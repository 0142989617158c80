//! Qubit mapping onto a coupling-constrained device.
//!
//! The routed module owns one register `q` with one slot per physical qubit,
//! so wire `k` of the output is physical qubit `k`. Logical qubits are placed
//! by the initial layout; unused physical qubits carry ancillas in |0⟩.
//! Every two-qubit interaction on non-adjacent qubits is preceded by a chain
//! of `swap` gates (tagged `routing = true`) along a shortest path. At the end
//! of every control-flow region the entry layout is restored, so all paths
//! through the program agree on the layout.

use std::collections::{HashMap, VecDeque};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use super::convert::{bufferize, linearize};
use super::{dialect_name, Pass, PassError, PassOutcome};
use crate::dialect::registry::{is_modifier, is_unitary, split};
use crate::dialect::unitary::qubit_operands;
use crate::dialect::{module_dialect, DialectKind};
use crate::ir::{Attribute, BlockId, Diagnostic, InsertPoint, Module, OpId, OperationState, Region, Type, ValueId};

pub const DEFAULT_LOOKAHEAD: usize = 5;

/// Upper bound on shortest paths considered per routed gate.
const MAX_PATHS: usize = 256;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CouplingMapError {
    #[error("malformed coupling map: {0}")]
    Json(String),
    #[error("coupling map has no qubits")]
    Empty,
    #[error("edge ({0}, {1}) names a qubit outside the device")]
    OutOfRange(usize, usize),
    #[error("self-loop on qubit {0}")]
    SelfLoop(usize),
    #[error("coupling map is not connected")]
    Disconnected,
}

/// Undirected device connectivity with all-pairs distances.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingMap {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    dist: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct CouplingMapFile {
    qubits: usize,
    edges: Vec<(usize, usize)>,
}

impl CouplingMap {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, CouplingMapError> {
        if n == 0 {
            return Err(CouplingMapError::Empty);
        }
        let mut adj = vec![Vec::new(); n];
        let mut norm = Vec::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(CouplingMapError::OutOfRange(a, b));
            }
            if a == b {
                return Err(CouplingMapError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !norm.contains(&e) {
                norm.push(e);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        norm.sort_unstable();
        for l in &mut adj {
            l.sort_unstable();
        }
        let dist: Vec<Vec<usize>> = (0..n).map(|s| bfs(&adj, s)).collect();
        if dist[0].contains(&usize::MAX) {
            return Err(CouplingMapError::Disconnected);
        }
        Ok(CouplingMap {
            n,
            edges: norm,
            adj,
            dist,
        })
    }

    /// Parses `{"qubits": n, "edges": [[a, b], ...]}`.
    pub fn from_json(text: &str) -> Result<Self, CouplingMapError> {
        let f: CouplingMapFile = serde_json::from_str(text).map_err(|e| CouplingMapError::Json(e.to_string()))?;
        Self::new(f.qubits, &f.edges)
    }

    pub fn line(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges).expect("line is connected")
    }

    pub fn ring(n: usize) -> Self {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::new(n, &edges).expect("ring is connected")
    }

    /// Qubit 0 in the middle.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::new(n, &edges).expect("star is connected")
    }

    /// Row-major `rows × cols` grid.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                if c + 1 < cols {
                    edges.push((i, i + 1));
                }
                if r + 1 < rows {
                    edges.push((i, i + cols));
                }
            }
        }
        Self::new(rows * cols, &edges).expect("grid is connected")
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Edges as `(min, max)` pairs in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.dist[a][b]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.dist[a][b] == 1
    }

    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adj[a]
    }

    /// Shortest paths from `a` to `b` in lexicographic order (at most `limit`).
    pub fn shortest_paths(&self, a: usize, b: usize, limit: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![a];
        self.extend_paths(b, &mut path, &mut out, limit);
        out
    }

    fn extend_paths(&self, b: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) {
        if out.len() >= limit {
            return;
        }
        let cur = *path.last().expect("path is never empty");
        if cur == b {
            out.push(path.clone());
            return;
        }
        for &nb in &self.adj[cur] {
            if self.dist[nb][b] + 1 == self.dist[cur][b] {
                path.push(nb);
                self.extend_paths(b, path, out, limit);
                path.pop();
            }
        }
    }
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; adj.len()];
    d[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v] == usize::MAX {
                d[v] = d[u] + 1;
                q.push_back(v);
            }
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialLayout {
    Identity,
    Greedy,
}

impl FromStr for InitialLayout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(InitialLayout::Identity),
            "greedy" => Ok(InitialLayout::Greedy),
            _ => Err(format!("unknown layout `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RouteOptions {
    pub layout: InitialLayout,
    pub lookahead: usize,
}

impl Default for RouteOptions {
    fn default() -> Self {
        RouteOptions {
            layout: InitialLayout::Greedy,
            lookahead: DEFAULT_LOOKAHEAD,
        }
    }
}

/// Layouts at entry and exit of one control-flow region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionLayout {
    pub entry: Vec<usize>,
    pub exit: Vec<usize>,
}

/// What routing did. Layouts map virtual wires to physical qubits: wires
/// `0..logical_qubits` are the program's qubits in allocation order, the rest
/// are ancillas.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RouteReport {
    pub logical_qubits: usize,
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    pub swaps: usize,
    pub regions: Vec<RegionLayout>,
}

pub struct Route {
    pub coupling_map: Option<CouplingMap>,
    pub options: RouteOptions,
}

impl Pass for Route {
    fn name(&self) -> &'static str {
        "route"
    }

    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError> {
        let cm = self
            .coupling_map
            .as_ref()
            .ok_or(PassError::MissingCouplingMap("route"))?;
        let (routed, report) = route(m, cm, &self.options)?;
        *m = routed;
        Ok(PassOutcome {
            changed: true,
            diagnostics: Vec::new(),
            route: Some(report),
        })
    }
}

/// Routes a module in either dialect; the output is in the input's dialect.
pub fn route(m: &Module, cm: &CouplingMap, options: &RouteOptions) -> Result<(Module, RouteReport), PassError> {
    match module_dialect(m) {
        DialectKind::Qc | DialectKind::Classical => route_imperative(m, cm, options),
        DialectKind::Qco => {
            let (routed, report) = route_imperative(&bufferize(m)?, cm, options)?;
            Ok((linearize(&routed)?, report))
        }
        k => Err(PassError::UnknownDialectInput {
            expected: "qco",
            found: dialect_name(k),
        }),
    }
}

fn is_gate_like(m: &Module, op: OpId) -> bool {
    is_unitary(m.op_name(op)) && !m.op_name(op).ends_with(".gate_def")
}

/// Logical wires (allocations and register slots) in program order.
fn logical_wires(m: &Module) -> Result<HashMap<ValueId, usize>, PassError> {
    let mut wires = HashMap::new();
    for op in m.walk() {
        if matches!(m.op_name(op), "qc.alloc" | "qc.extract" | "qc.alloc_reg") {
            if m.parent_block(op) != Some(m.body()) {
                return Err(PassError::Unsupported {
                    message: "qubit allocation inside a region".into(),
                    location: m.nearest_loc(op),
                });
            }
            if m.op_name(op) != "qc.alloc_reg" {
                let n = wires.len();
                wires.insert(m.results(op)[0], n);
            }
        }
    }
    Ok(wires)
}

fn greedy_layout(m: &Module, wires: &HashMap<ValueId, usize>, cm: &CouplingMap) -> Vec<usize> {
    let n = cm.num_qubits();
    let first = m
        .walk()
        .into_iter()
        .filter(|o| is_gate_like(m, *o) && !m.parent_op(*o).is_some_and(|p| is_modifier(m.op_name(p))))
        .map(|o| qubit_operands(m, o))
        .find(|qs| qs.len() == 2 && qs.iter().all(|q| wires.contains_key(q)));
    let Some(qs) = first.filter(|_| !cm.edges().is_empty()) else {
        return (0..n).collect();
    };
    let (a, b) = (wires[&qs[0]], wires[&qs[1]]);
    let mut layout = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let e = cm.edges()[0];
    layout[a] = e.0;
    layout[b] = e.1;
    used[e.0] = true;
    used[e.1] = true;
    for w in 0..n {
        if layout[w] != usize::MAX {
            continue;
        }
        let next = (0..n)
            .find(|p| !used[*p] && cm.neighbors(*p).iter().any(|x| used[*x]))
            .or_else(|| (0..n).find(|p| !used[*p]))
            .expect("a free physical qubit exists");
        layout[w] = next;
        used[next] = true;
    }
    layout
}

fn route_imperative(
    src: &Module,
    cm: &CouplingMap,
    options: &RouteOptions,
) -> Result<(Module, RouteReport), PassError> {
    let wires = logical_wires(src)?;
    let n = cm.num_qubits();
    if wires.len() > n {
        return Err(PassError::TooManyQubits {
            needed: wires.len(),
            available: n,
        });
    }
    for op in src.walk() {
        if is_gate_like(src, op) && !src.parent_op(op).is_some_and(|p| split(src.op_name(p)).1 == "gate_def") {
            let arity = qubit_operands(src, op).len();
            if arity > 2 && !src.parent_op(op).is_some_and(|p| is_modifier(src.op_name(p))) {
                return Err(PassError::UnsupportedArity {
                    op: src.op_name(op).to_string(),
                    arity,
                    location: src.nearest_loc(op),
                });
            }
        }
    }
    let layout = match options.layout {
        InitialLayout::Identity => (0..n).collect(),
        InitialLayout::Greedy => greedy_layout(src, &wires, cm),
    };
    let mut out = Module::new();
    let body = out.body();
    let reg = out.build_op(
        InsertPoint::End(body),
        OperationState::new("qc.alloc_reg")
            .attr("size", Attribute::Int(n as i64))
            .result(Type::QubitRegister(n as u32)),
    )?;
    let regv = out.results(reg)[0];
    out.set_value_name(regv, "q");
    let mut phys = Vec::with_capacity(n);
    for k in 0..n {
        let e = out.build_op(
            InsertPoint::End(body),
            OperationState::new("qc.extract")
                .operand(regv)
                .attr("index", Attribute::Int(k as i64))
                .result(Type::QubitRef),
        )?;
        let r = out.results(e)[0];
        out.set_value_name(r, format!("q{k}"));
        phys.push(r);
    }
    let mut r = Router {
        src,
        out,
        cm,
        options: *options,
        wires,
        phys,
        layout: layout.clone(),
        vals: HashMap::new(),
        report: RouteReport {
            logical_qubits: 0,
            initial_layout: layout,
            ..Default::default()
        },
    };
    r.report.logical_qubits = r.wires.len();
    r.block(src.body(), body)?;
    for k in 0..n {
        let q = r.phys[k];
        r.out
            .build_op(InsertPoint::End(body), OperationState::new("qc.dealloc").operand(q))?;
    }
    r.report.final_layout = r.layout.clone();
    Ok((r.out, r.report))
}

struct Router<'a> {
    src: &'a Module,
    out: Module,
    cm: &'a CouplingMap,
    options: RouteOptions,
    wires: HashMap<ValueId, usize>,
    phys: Vec<ValueId>,
    /// Virtual wire → physical qubit.
    layout: Vec<usize>,
    vals: HashMap<ValueId, ValueId>,
    report: RouteReport,
}

impl Router<'_> {
    fn block(&mut self, from: BlockId, to: BlockId) -> Result<(), PassError> {
        let ops = self.src.block_ops(from).to_vec();
        for (i, &op) in ops.iter().enumerate() {
            let name = self.src.op_name(op);
            match name {
                "qc.alloc" | "qc.alloc_reg" | "qc.extract" | "qc.dealloc" => {}
                "cf.yield" | "cf.condition" => {}
                "cf.if" | "cf.for" | "cf.while" => self.region_op(op, to)?,
                "qc.gate_def" => {
                    let tree = self.src.snapshot(op);
                    self.out.materialize(&tree, InsertPoint::End(to), &mut HashMap::new())?;
                }
                _ => {
                    if is_gate_like(self.src, op) {
                        let qs = qubit_operands(self.src, op);
                        if qs.len() == 2 {
                            let (a, b) = (self.wires[&qs[0]], self.wires[&qs[1]]);
                            self.bring_together(a, b, &ops[i + 1..], to)?;
                        }
                    }
                    self.copy(op, to)?;
                }
            }
        }
        Ok(())
    }

    /// Copies `op` with qubit refs mapped to their current physical qubits.
    fn copy(&mut self, op: OpId, to: BlockId) -> Result<OpId, PassError> {
        for (r, w) in &self.wires {
            self.vals.insert(*r, self.phys[self.layout[*w]]);
        }
        let tree = self.src.snapshot(op);
        Ok(self.out.materialize(&tree, InsertPoint::End(to), &mut self.vals)?)
    }

    fn swap(&mut self, a: usize, b: usize, to: BlockId) -> Result<(), PassError> {
        self.out.build_op(
            InsertPoint::End(to),
            OperationState::new("qc.swap")
                .operand(self.phys[a])
                .operand(self.phys[b])
                .attr("routing", Attribute::Bool(true)),
        )?;
        for p in self.layout.iter_mut() {
            if *p == a {
                *p = b;
            } else if *p == b {
                *p = a;
            }
        }
        self.report.swaps += 1;
        Ok(())
    }

    /// Wire pairs of the next two-qubit ops in `rest` touching `a` or `b`.
    fn lookahead(&self, a: usize, b: usize, rest: &[OpId]) -> Vec<(usize, usize)> {
        let src = self.src;
        rest.iter()
            .filter(|o| is_gate_like(src, **o))
            .map(|o| qubit_operands(src, *o))
            .filter(|qs| qs.len() == 2)
            .map(|qs| (self.wires[&qs[0]], self.wires[&qs[1]]))
            .filter(|(x, y)| [a, b].contains(x) || [a, b].contains(y))
            .take(self.options.lookahead)
            .collect()
    }

    fn bring_together(&mut self, a: usize, b: usize, rest: &[OpId], to: BlockId) -> Result<(), PassError> {
        let (pa, pb) = (self.layout[a], self.layout[b]);
        let d = self.cm.distance(pa, pb);
        if d <= 1 {
            return Ok(());
        }
        let upcoming = self.lookahead(a, b, rest);
        let mut best: Option<(usize, Vec<(usize, usize)>)> = None;
        for path in self.cm.shortest_paths(pa, pb, MAX_PATHS) {
            for k in 0..d {
                // `a` walks k steps forward, `b` walks the rest backward.
                let mut chain: Vec<(usize, usize)> = (0..k).map(|i| (path[i], path[i + 1])).collect();
                chain.extend((k + 1..d).rev().map(|i| (path[i + 1], path[i])));
                let mut layout = self.layout.clone();
                for (x, y) in &chain {
                    for p in layout.iter_mut() {
                        if *p == *x {
                            *p = *y;
                        } else if *p == *y {
                            *p = *x;
                        }
                    }
                }
                let cost: usize = upcoming
                    .iter()
                    .map(|(x, y)| self.cm.distance(layout[*x], layout[*y]))
                    .sum();
                let key: Vec<(usize, usize)> = chain.iter().map(|(x, y)| (*x.min(y), *x.max(y))).collect();
                let better = match &best {
                    None => true,
                    Some((c, k)) => cost < *c || (cost == *c && key < *k),
                };
                if better {
                    best = Some((cost, key));
                }
            }
        }
        let (_, chain) = best.expect("a shortest path exists in a connected map");
        for (x, y) in chain {
            self.swap(x, y, to)?;
        }
        Ok(())
    }

    /// Swaps that move every wire back to `target`, leaf by leaf over a BFS
    /// spanning tree so that placed qubits are never disturbed.
    fn restore(&mut self, target: &[usize], to: BlockId) -> Result<(), PassError> {
        if self.layout == target {
            return Ok(());
        }
        let n = self.cm.num_qubits();
        let mut parent = vec![usize::MAX; n];
        let mut order = vec![0];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            for &v in self.cm.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    order.push(v);
                }
            }
            i += 1;
        }
        let mut wire_at = vec![0; n];
        for (w, p) in target.iter().enumerate() {
            wire_at[*p] = w;
        }
        for &t in order.iter().rev() {
            let w = wire_at[t];
            let c = self.layout[w];
            for (x, y) in tree_path(&parent, c, t).windows(2).map(|s| (s[0], s[1])) {
                self.swap(x, y, to)?;
            }
        }
        Ok(())
    }

    fn region_op(&mut self, op: OpId, to: BlockId) -> Result<(), PassError> {
        let src = self.src;
        let entry = self.layout.clone();
        let mut regions = Vec::new();
        for region in 0..src.regions(op).len() {
            let sblock = src.region_block(op, region);
            let types: Vec<Type> = src
                .block_args(sblock)
                .iter()
                .map(|a| src.value_type(*a).clone())
                .collect();
            let block = self.out.create_block(&types);
            for (a, n) in src.block_args(sblock).iter().zip(self.out.block_args(block).to_vec()) {
                self.vals.insert(*a, n);
                if let Some(name) = src.value_name(*a) {
                    self.out.set_value_name(n, name.to_string());
                }
            }
            self.block(sblock, block)?;
            self.restore(&entry, block)?;
            self.report.regions.push(RegionLayout {
                entry: entry.clone(),
                exit: self.layout.clone(),
            });
            if let Some(t) = src
                .terminator(sblock)
                .filter(|t| matches!(src.op_name(*t), "cf.yield" | "cf.condition"))
            {
                self.copy(t, block)?;
            }
            regions.push(Region::new(block));
        }
        let mut st = OperationState::new(src.op_name(op))
            .operands(src.operands(op).iter().map(|v| self.vals[v]).collect::<Vec<_>>())
            .results(
                src.results(op)
                    .iter()
                    .map(|r| src.value_type(*r).clone())
                    .collect::<Vec<_>>(),
            )
            .attrs(src.op(op).attrs().clone())
            .loc(src.op(op).loc().cloned());
        st.regions = regions;
        let id = self.out.build_op(InsertPoint::End(to), st)?;
        for (o, n) in src.results(op).iter().zip(self.out.results(id).to_vec()) {
            self.vals.insert(*o, n);
            if let Some(name) = src.value_name(*o) {
                self.out.set_value_name(n, name.to_string());
            }
        }
        Ok(())
    }
}

/// Path between two nodes of a rooted tree given by parent links.
fn tree_path(parent: &[usize], a: usize, b: usize) -> Vec<usize> {
    let ancestors = |mut x: usize| {
        let mut v = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            v.push(x);
        }
        v
    };
    let (pa, pb) = (ancestors(a), ancestors(b));
    let lca = *pa.iter().find(|x| pb.contains(x)).expect("tree is connected");
    let mut path: Vec<usize> = pa.iter().copied().take_while(|x| *x != lca).collect();
    path.push(lca);
    let tail: Vec<usize> = pb.iter().copied().take_while(|x| *x != lca).collect();
    path.extend(tail.into_iter().rev());
    path
}

// ---- conformance audit -------------------------------------------------------

/// Checks a routed module: every interaction acts on a coupling-map edge, the
/// routing swaps trace the reported layouts, and every control-flow region
/// leaves the layout as it found it.
pub fn check_conformance(m: &Module, cm: &CouplingMap, report: &RouteReport) -> Vec<Diagnostic> {
    let owned;
    let m = match module_dialect(m) {
        DialectKind::Qco => match bufferize(m) {
            Ok(b) => {
                owned = b;
                &owned
            }
            Err(e) => return vec![Diagnostic::error(e.to_string(), None)],
        },
        _ => m,
    };
    let mut diags = Vec::new();
    let phys: HashMap<ValueId, usize> = match logical_wires(m) {
        Ok(w) => w,
        Err(e) => return vec![Diagnostic::error(e.to_string(), None)],
    };
    if phys.len() > cm.num_qubits() {
        diags.push(Diagnostic::error(
            format!("{} wires on a {}-qubit device", phys.len(), cm.num_qubits()),
            None,
        ));
        return diags;
    }
    for op in m.walk() {
        let inside = m
            .parent_op(op)
            .is_some_and(|p| is_modifier(m.op_name(p)) || m.op_name(p).ends_with(".gate_def"));
        if !is_gate_like(m, op) || inside {
            continue;
        }
        let qs: Vec<usize> = qubit_operands(m, op)
            .iter()
            .filter_map(|q| phys.get(q).copied())
            .collect();
        let ok = match qs.as_slice() {
            [_] => true,
            [a, b] => cm.adjacent(*a, *b),
            _ => false,
        };
        if !ok {
            diags.push(Diagnostic::error(
                format!(
                    "`{}` on physical qubits {qs:?} is not on a coupling-map edge",
                    m.op_name(op)
                ),
                m.nearest_loc(op),
            ));
        }
    }
    let n = cm.num_qubits();
    let is_perm = |l: &[usize]| {
        let mut s = l.to_vec();
        s.sort_unstable();
        s == (0..n).collect::<Vec<_>>()
    };
    if !is_perm(&report.initial_layout) || !is_perm(&report.final_layout) {
        diags.push(Diagnostic::error(
            "reported layout is not a permutation of the device qubits",
            None,
        ));
        return diags;
    }
    let mut layout = report.initial_layout.clone();
    trace_layout(m, m.body(), &phys, &mut layout, &mut diags);
    if layout != report.final_layout {
        diags.push(Diagnostic::error(
            format!(
                "traced final layout {layout:?} differs from reported {:?}",
                report.final_layout
            ),
            None,
        ));
    }
    diags
}

fn trace_layout(
    m: &Module,
    block: BlockId,
    phys: &HashMap<ValueId, usize>,
    layout: &mut [usize],
    diags: &mut Vec<Diagnostic>,
) {
    for &op in m.block_ops(block) {
        if m.op_name(op) == "qc.swap" && m.attr(op, "routing").and_then(Attribute::as_bool) == Some(true) {
            let (a, b) = (phys[&m.operands(op)[0]], phys[&m.operands(op)[1]]);
            for p in layout.iter_mut() {
                if *p == a {
                    *p = b;
                } else if *p == b {
                    *p = a;
                }
            }
        }
        if split(m.op_name(op)).0 == "cf" && !m.regions(op).is_empty() {
            for region in 0..m.regions(op).len() {
                let mut inner = layout.to_vec();
                trace_layout(m, m.region_block(op, region), phys, &mut inner, diags);
                if inner != layout {
                    diags.push(Diagnostic::error(
                        format!("region {region} of `{}` exits with a different layout", m.op_name(op)),
                        m.nearest_loc(op),
                    ));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::import_qasm;
    use crate::ir::verify::verify;

    fn qc(src: &str) -> Module {
        import_qasm(src, "t.qasm").unwrap()
    }

    fn identity() -> RouteOptions {
        RouteOptions {
            layout: InitialLayout::Identity,
            lookahead: DEFAULT_LOOKAHEAD,
        }
    }

    #[test]
    fn coupling_maps() {
        let g = CouplingMap::grid(2, 3);
        assert_eq!(g.distance(0, 5), 3);
        assert_eq!(g.edges().len(), 7);
        assert_eq!(CouplingMap::ring(5).distance(0, 3), 2);
        assert_eq!(CouplingMap::star(5).distance(1, 4), 2);
        let j = CouplingMap::from_json(r#"{"qubits": 3, "edges": [[0, 1], [2, 1]]}"#).unwrap();
        assert_eq!(j, CouplingMap::line(3));
        assert_eq!(CouplingMap::new(3, &[(0, 1)]), Err(CouplingMapError::Disconnected));
        assert_eq!(CouplingMap::new(2, &[(1, 1)]), Err(CouplingMapError::SelfLoop(1)));
        assert!(matches!(CouplingMap::from_json("{"), Err(CouplingMapError::Json(_))));
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(g.distance(a, b), g.distance(b, a));
            }
            assert_eq!(g.distance(a, a), 0);
        }
        assert_eq!(g.shortest_paths(0, 4, 10), vec![vec![0, 1, 4], vec![0, 3, 4]]);
    }

    #[test]
    fn distant_cx_gets_one_swap() {
        let m = qc("OPENQASM 3; qubit[3] q; cx q[0], q[2];");
        let cm = CouplingMap::line(3);
        let (out, report) = route(&m, &cm, &identity()).unwrap();
        assert!(verify(&out).is_empty());
        assert_eq!(report.swaps, 1);
        assert!(check_conformance(&out, &cm, &report).is_empty());
        assert!(
            check_conformance(
                &m,
                &cm,
                &RouteReport {
                    initial_layout: vec![0, 1, 2],
                    final_layout: vec![0, 1, 2],
                    ..Default::default()
                }
            )
            .len()
                == 1
        );
    }

    #[test]
    fn conforming_circuit_is_left_alone() {
        let m = qc("OPENQASM 3; qubit[3] q; cx q[0], q[1]; cx q[1], q[2]; h q[2];");
        let (_, report) = route(&m, &CouplingMap::line(3), &identity()).unwrap();
        assert_eq!(report.swaps, 0);
        assert_eq!(report.final_layout, vec![0, 1, 2]);
    }

    #[test]
    fn regions_restore_their_entry_layout() {
        let m = qc("OPENQASM 3; qubit[4] q; bit c; c = measure q[3];
                    if (c) { cx q[0], q[3]; } else { cx q[1], q[3]; }
                    for uint i in [0:2] { cx q[0], q[2]; }");
        let cm = CouplingMap::line(4);
        let (out, report) = route(&m, &cm, &identity()).unwrap();
        assert!(verify(&out).is_empty());
        assert_eq!(report.regions.len(), 3);
        assert!(report.regions.iter().all(|r| r.entry == r.exit));
        assert!(check_conformance(&out, &cm, &report).is_empty());
    }

    #[test]
    fn deleting_a_swap_breaks_conformance() {
        let m = qc("OPENQASM 3; qubit[5] q; cx q[0], q[4]; cx q[1], q[3];");
        let cm = CouplingMap::line(5);
        let (mut out, report) = route(&m, &cm, &identity()).unwrap();
        let swap = out.walk().into_iter().find(|o| out.op_name(*o) == "qc.swap").unwrap();
        out.erase_op(swap).unwrap();
        assert!(!check_conformance(&out, &cm, &report).is_empty());
    }

    #[test]
    fn errors() {
        let cm = CouplingMap::line(2);
        let m = qc("OPENQASM 3; qubit[3] q;");
        assert!(matches!(
            route(&m, &cm, &identity()),
            Err(PassError::TooManyQubits {
                needed: 3,
                available: 2
            })
        ));
        let m = qc("OPENQASM 3; qubit[3] q; ccx q[0], q[1], q[2];");
        assert!(matches!(
            route(&m, &CouplingMap::line(3), &identity()),
            Err(PassError::UnsupportedArity { arity: 3, .. })
        ));
    }

    #[test]
    fn greedy_layout_starts_on_first_edge() {
        let m = qc("OPENQASM 3; qubit[3] q; cx q[2], q[0];");
        let (_, report) = route(&m, &CouplingMap::line(3), &RouteOptions::default()).unwrap();
        assert_eq!(report.initial_layout, vec![1, 2, 0]);
        assert_eq!(report.swaps, 0);
    }
}
