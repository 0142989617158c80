//! Shared fixtures: the hand-written corpus, a seeded random circuit
//! generator and one checker per property, used by both the integration
//! tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use qcc::dialect::qco::linearity_verify;
use qcc::emit::{emit_qasm, parse_ir, print_ir};
use qcc::frontend::import_qasm;
use qcc::ir::structural::structural_diff;
use qcc::ir::Module;
use qcc::sim::{circuit_unitary, equivalent, qubit_count, simulate, EquivalenceMode, WireMap};
use qcc::transforms::convert::{bufferize, linearize};
use qcc::transforms::route::check_conformance;
use qcc::transforms::{run_pipeline_str, CouplingMap, PassContext, PassError, PipelineError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RANDOM_CIRCUITS: u64 = 200;
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// `(file stem, source)` for every corpus program, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "qasm"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

pub fn import(src: &str) -> Module {
    import_qasm(src, "input.qasm").unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn coupling_maps() -> Vec<(&'static str, CouplingMap)> {
    vec![
        ("line-5", CouplingMap::line(5)),
        ("ring-5", CouplingMap::ring(5)),
        ("star-5", CouplingMap::star(5)),
        ("grid-2x3", CouplingMap::grid(2, 3)),
    ]
}

pub fn gate_count(m: &Module) -> usize {
    m.walk()
        .into_iter()
        .filter(|op| {
            let name = m.op_name(*op);
            qcc::dialect::registry::is_unitary(name)
                && !name.ends_with("gate_def")
                && !m
                    .parent_op(*op)
                    .is_some_and(|p| qcc::dialect::registry::is_modifier(m.op_name(p)))
        })
        .count()
}

// ---- random circuits ---------------------------------------------------------

const ANGLES: &[&str] = &["pi/4", "pi/2", "pi", "-pi/2", "0.3", "1.7", "-0.9", "2*pi", "-pi/4"];
const ONE_QUBIT: &[&str] = &["h", "x", "y", "z", "s", "sdg", "t", "tdg", "sx", "sxdg"];
const ROTATIONS: &[&str] = &["rx", "ry", "rz", "p"];
const TWO_QUBIT: &[&str] = &[
    "cx",
    "cz",
    "cy",
    "ch",
    "swap",
    "ctrl @ s",
    "negctrl @ x",
    "inv @ ctrl @ t",
    "ctrl @ pow(2) @ sx",
];
const CONTROLLED_ROTATIONS: &[&str] = &["crx", "cry", "crz", "cp", "negctrl @ rz"];

/// Which constructs the generator may use.
#[derive(Clone, Copy, Debug)]
pub struct Features {
    /// Measurements, resets, `if` and `for`.
    pub classical: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    n: usize,
    budget: usize,
    features: Features,
    out: String,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).unwrap()
    }

    fn qubit(&mut self) -> usize {
        self.rng.gen_range(0..self.n)
    }

    fn pair(&mut self) -> (usize, usize) {
        let a = self.qubit();
        let mut b = self.qubit();
        while b == a {
            b = self.qubit();
        }
        (a, b)
    }

    fn gate(&mut self) -> String {
        let two = self.n >= 2 && self.rng.gen_bool(0.45);
        let rotation = self.rng.gen_bool(0.35);
        match (two, rotation) {
            (false, false) => {
                let g = self.pick(ONE_QUBIT);
                format!("{g} q[{}];", self.qubit())
            }
            (false, true) => {
                let (g, a) = (self.pick(ROTATIONS), self.pick(ANGLES));
                format!("{g}({a}) q[{}];", self.qubit())
            }
            (true, false) => {
                let g = self.pick(TWO_QUBIT);
                let (a, b) = self.pair();
                format!("{g} q[{a}], q[{b}];")
            }
            (true, true) => {
                let (g, a) = (self.pick(CONTROLLED_ROTATIONS), self.pick(ANGLES));
                let (x, y) = self.pair();
                format!("{g}({a}) q[{x}], q[{y}];")
            }
        }
    }

    /// A gate followed by its inverse, so cancellation has work to do.
    fn inverse_pair(&mut self) -> Vec<String> {
        let q = self.qubit();
        let (g, h) = *[("h", "h"), ("s", "sdg"), ("t", "tdg"), ("x", "x"), ("sx", "sxdg")]
            .choose(&mut self.rng)
            .unwrap();
        vec![format!("{g} q[{q}];"), format!("{h} q[{q}];")]
    }

    fn block(&mut self, depth: usize, indent: &str) {
        let count = self.rng.gen_range(1..=3).min(self.budget);
        for _ in 0..count {
            self.statement(depth, indent);
        }
    }

    fn statement(&mut self, depth: usize, indent: &str) {
        if self.budget == 0 {
            return;
        }
        self.budget -= 1;
        let roll = self.rng.gen_range(0..100);
        let classical = self.features.classical;
        let line = match roll {
            0..=9 if classical => format!("b{} = measure q[{}];", self.rng.gen_range(0..2), self.qubit()),
            10..=13 if classical => format!("reset q[{}];", self.qubit()),
            14..=23 if classical && depth < 2 && self.budget > 0 => {
                let inner = format!("{indent}  ");
                self.out
                    .push_str(&format!("{indent}if (b{}) {{\n", self.rng.gen_range(0..2)));
                self.block(depth + 1, &inner);
                if self.rng.gen_bool(0.4) && self.budget > 0 {
                    self.out.push_str(&format!("{indent}}} else {{\n"));
                    self.block(depth + 1, &inner);
                }
                self.out.push_str(&format!("{indent}}}\n"));
                return;
            }
            24..=31 if classical && depth < 2 && self.budget > 0 => {
                let inner = format!("{indent}  ");
                let trips = self.rng.gen_range(0..=3);
                self.out.push_str(&format!("{indent}for uint i in [0:{trips}] {{\n"));
                self.block(depth + 1, &inner);
                self.out.push_str(&format!("{indent}}}\n"));
                return;
            }
            32..=41 if self.budget > 0 => {
                self.budget -= 1;
                let lines = self.inverse_pair();
                for l in lines {
                    self.out.push_str(&format!("{indent}{l}\n"));
                }
                return;
            }
            _ => self.gate(),
        };
        self.out.push_str(&format!("{indent}{line}\n"));
    }
}

/// A reproducible OpenQASM program on at most five qubits with at most
/// thirty operations (counting the ones nested in `if` and `for`).
pub fn random_circuit(seed: u64, features: Features) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=5);
    let measure_all = features.classical && rng.gen_bool(0.5);
    let drawn: usize = rng.gen_range(1..=30);
    let budget = if measure_all { drawn.saturating_sub(n) } else { drawn };
    let mut g = Gen {
        rng,
        n,
        budget: budget.max(1),
        features,
        out: format!("OPENQASM 3;\ninclude \"stdgates.inc\";\nqubit[{n}] q;\n"),
    };
    if features.classical {
        g.out.push_str("bit b0;\nbit b1;\n");
    }
    while g.budget > 0 {
        g.statement(0, "");
    }
    if measure_all {
        g.out.push_str(&format!("bit[{n}] m;\n"));
        for i in 0..n {
            g.out.push_str(&format!("m[{i}] = measure q[{i}];\n"));
        }
    }
    g.out
}

pub fn random_programs() -> Vec<String> {
    (0..RANDOM_CIRCUITS)
        .map(|s| random_circuit(s, Features { classical: true }))
        .collect()
}

pub fn random_unitary_programs() -> Vec<String> {
    (0..RANDOM_CIRCUITS)
        .map(|s| random_circuit(1_000_000 + s, Features { classical: false }))
        .collect()
}

// ---- checks ------------------------------------------------------------------

/// bufferize(linearize(p)) is structurally identical to p and the linearized
/// form passes the linearity checker.
pub fn check_round_trip(src: &str) -> Result<(), String> {
    let m = import(src);
    let f = linearize(&m).map_err(|e| format!("linearize: {e}"))?;
    let diags = linearity_verify(&f);
    if !diags.is_empty() {
        return Err(format!("linearity: {}", diags[0]));
    }
    let back = bufferize(&f).map_err(|e| format!("bufferize: {e}"))?;
    match structural_diff(&m, &back) {
        None => Ok(()),
        Some(d) => Err(format!("round trip differs: {d}")),
    }
}

/// Pipelines checked for soundness, each wrapped so its input has the
/// dialect it expects.
pub const SOUNDNESS_PIPELINES: &[(&str, &str)] = &[
    ("cancel-inverses", "linearize,cancel-inverses,bufferize"),
    ("merge-rotations", "linearize,merge-rotations,bufferize"),
    ("canonicalize-modifiers", "canonicalize-modifiers"),
    ("simplify-control-flow", "simplify-control-flow"),
    ("route", "linearize,route,bufferize"),
    ("remove-dead-alloc", "remove-dead-alloc"),
];

pub fn route_context() -> PassContext {
    PassContext {
        coupling_map: Some(CouplingMap::line(5)),
    }
}

/// Runs `pipeline` on `src` and compares the result with the original:
/// outcome distributions always, unitaries (through the reported layouts for
/// routing) when the program has no classical part.
pub fn check_pass_sound(src: &str, pipeline: &str) -> Result<(), String> {
    let m = import(src);
    let mut out = m.clone();
    let report = run_pipeline_str(&mut out, pipeline, &route_context()).map_err(|e| format!("{pipeline}: {e}"))?;
    let d = equivalent(&m, &out, EquivalenceMode::Distribution, None).map_err(|e| e.to_string())?;
    if d.deviation > PROBABILITY_TOLERANCE {
        return Err(format!("{pipeline}: distributions differ by {:e}", d.deviation));
    }
    if circuit_unitary(&m, qubit_count(&m)).is_ok() {
        let map = report.route.as_ref().map(WireMap::from);
        let u = equivalent(&m, &out, EquivalenceMode::Unitary, map.as_ref()).map_err(|e| e.to_string())?;
        if !u.equivalent {
            return Err(format!("{pipeline}: unitaries differ by {:e}", u.deviation));
        }
    }
    Ok(())
}

/// Outcome of routing one program on one coupling map.
pub enum RoutingCheck {
    Routed {
        swaps: usize,
    },
    /// Route declined the program (an interaction on more than two qubits).
    Declined,
}

/// Routes the linearized program and audits the result.
pub fn check_routing(src: &str, cm: &CouplingMap) -> Result<RoutingCheck, String> {
    let m = import(src);
    let mut f = linearize(&m).map_err(|e| e.to_string())?;
    let ctx = PassContext {
        coupling_map: Some(cm.clone()),
    };
    let report = match run_pipeline_str(&mut f, "route", &ctx) {
        Ok(r) => r.route.expect("route reports its layouts"),
        Err(PipelineError::PassFailed {
            error: PassError::UnsupportedArity { .. },
            ..
        }) => return Ok(RoutingCheck::Declined),
        Err(e) => return Err(e.to_string()),
    };
    let diags = check_conformance(&f, cm, &report);
    if let Some(d) = diags.first() {
        return Err(format!("conformance: {d}"));
    }
    if let Some(r) = report.regions.iter().find(|r| r.entry != r.exit) {
        return Err(format!("region layout {:?} != {:?}", r.entry, r.exit));
    }
    let d = equivalent(&m, &f, EquivalenceMode::Distribution, None).map_err(|e| e.to_string())?;
    if d.deviation > PROBABILITY_TOLERANCE {
        return Err(format!("routed distribution differs by {:e}", d.deviation));
    }
    Ok(RoutingCheck::Routed { swaps: report.swaps })
}

/// parse_ir(print_ir(m)) and import(emit_qasm(m)) are structurally identical to m.
pub fn check_text_round_trips(src: &str) -> Result<(), String> {
    let m = import(src);
    let text = print_ir(&m);
    let parsed = parse_ir(&text).map_err(|e| format!("parse_ir: {e}"))?;
    if let Some(d) = structural_diff(&m, &parsed) {
        return Err(format!("textual IR: {d}"));
    }
    let qasm = emit_qasm(&m).map_err(|e| format!("emit_qasm: {e}"))?;
    let back = import_qasm(&qasm, "emitted.qasm").map_err(|e| format!("re-import: {e}"))?;
    if let Some(d) = structural_diff(&m, &back) {
        return Err(format!("QASM: {d}"));
    }
    Ok(())
}

/// QIR text for a corpus program, after unrolling; `None` when control flow
/// remains and the emitter refuses the program.
pub fn qir_for(src: &str) -> Option<String> {
    let mut m = import(src);
    run_pipeline_str(&mut m, "simplify-control-flow", &PassContext::default()).ok()?;
    qcc::emit::emit_qir_flat(&m).ok()
}

/// Compares QIR output with the stored golden file. With `QCC_BLESS=1` the
/// golden file is (re)written instead.
pub fn check_qir_golden(name: &str, src: &str) -> Result<bool, String> {
    let Some(first) = qir_for(src) else {
        return Ok(false);
    };
    if qir_for(src).as_deref() != Some(first.as_str()) {
        return Err("two emissions differ".into());
    }
    let path = golden_dir().join(format!("{name}.ll"));
    if std::env::var("QCC_BLESS").is_ok_and(|v| v == "1") {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, &first).unwrap();
    }
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if golden != first {
        return Err(format!("{} differs from the emitted QIR", path.display()));
    }
    Ok(true)
}

/// Total probability and the largest distance from |0…0⟩ over all branches.
pub fn reset_program_summary(m: &Module) -> Result<(f64, f64), String> {
    let d = simulate(m).map_err(|e| e.to_string())?;
    let worst = d
        .branches
        .iter()
        .map(|b| 1.0 - b.state.amplitudes()[0].norm())
        .fold(0.0, f64::max);
    Ok((d.total_probability(), worst))
}

/// Random angles for the gate algebra property.
pub fn angle_draws(seed: u64, count: usize, params: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..params).map(|_| rng.gen_range(-2.0 * PI..2.0 * PI)).collect())
        .collect()
}
