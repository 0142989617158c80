//! Passes and the pipeline driver.
//!
//! A pipeline is written `name{key=value,...},name,...`. Passes run in order;
//! by default the module is verified after each one and the first failure
//! stops the pipeline.

pub mod convert;
pub mod opt;
pub mod route;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dialect::DialectKind;
use crate::ir::verify::verify;
use crate::ir::{has_errors, Diagnostic, IrError, Location, Module};

pub use route::{CouplingMap, RouteReport};

/// Failure of a single pass.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum PassError {
    #[error("expected a {expected} module, found {found}")]
    UnknownDialectInput { expected: &'static str, found: String },
    #[error("qubit is used after it was deallocated or was never allocated")]
    UnmappedQubit(Option<Location>),
    #[error("input is not linear:\n{}", render(.0))]
    LinearityViolation(Vec<Diagnostic>),
    #[error("branches leave wire states on different qubits")]
    WireMismatch(Option<Location>),
    #[error("the circuit uses {needed} qubits but the coupling map has {available}")]
    TooManyQubits { needed: usize, available: usize },
    #[error("`{op}` acts on {arity} qubits; route only handles one- and two-qubit interactions")]
    UnsupportedArity {
        op: String,
        arity: usize,
        location: Option<Location>,
    },
    #[error("{message}")]
    Unsupported {
        message: String,
        location: Option<Location>,
    },
    #[error("`{0}` requires a coupling map")]
    MissingCouplingMap(&'static str),
    #[error(transparent)]
    Ir(#[from] IrError),
}

fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

impl PassError {
    pub fn location(&self) -> Option<&Location> {
        match self {
            PassError::UnmappedQubit(l) | PassError::WireMismatch(l) => l.as_ref(),
            PassError::UnsupportedArity { location, .. } | PassError::Unsupported { location, .. } => location.as_ref(),
            _ => None,
        }
    }
}

pub(crate) fn dialect_name(k: DialectKind) -> String {
    match k {
        DialectKind::Classical => "classical-only".into(),
        DialectKind::Qc => "qc".into(),
        DialectKind::Qco => "qco".into(),
        DialectKind::Mixed => "mixed qc/qco".into(),
    }
}

/// What a pass did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PassOutcome {
    pub changed: bool,
    /// Warnings; the module is still valid.
    pub diagnostics: Vec<Diagnostic>,
    pub route: Option<RouteReport>,
}

impl PassOutcome {
    pub fn changed(changed: bool) -> Self {
        PassOutcome {
            changed,
            ..Default::default()
        }
    }
}

pub trait Pass {
    fn name(&self) -> &'static str;
    fn run(&self, m: &mut Module) -> Result<PassOutcome, PassError>;
}

/// One parsed pipeline element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassSpec {
    pub name: String,
    pub options: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PipelineError {
    #[error("malformed pipeline: {0}")]
    Syntax(String),
    #[error("unknown pass `{0}`")]
    UnknownPass(String),
    #[error("pass `{pass}`: {message}")]
    InvalidOption { pass: String, message: String },
    #[error("pass `{pass}` failed: {error}")]
    PassFailed { pass: String, error: PassError },
    #[error("verification failed after `{pass}`:\n{}", render(.diagnostics))]
    VerificationFailed { pass: String, diagnostics: Vec<Diagnostic> },
}

impl PipelineError {
    /// Diagnostics suitable for reporting.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            PipelineError::VerificationFailed { pass, diagnostics } => diagnostics
                .iter()
                .map(|d| Diagnostic {
                    message: format!("after `{pass}`: {}", d.message),
                    ..d.clone()
                })
                .collect(),
            PipelineError::PassFailed {
                error: PassError::LinearityViolation(ds),
                pass,
            } => ds
                .iter()
                .map(|d| Diagnostic {
                    message: format!("`{pass}`: {}", d.message),
                    ..d.clone()
                })
                .collect(),
            PipelineError::PassFailed { error, .. } => {
                vec![Diagnostic::error(self.to_string(), error.location().cloned())]
            }
            _ => vec![Diagnostic::error(self.to_string(), None)],
        }
    }
}

/// Splits `a{k=v,x=y},b` into pass specs.
pub fn parse_pipeline(text: &str) -> Result<Vec<PassSpec>, PipelineError> {
    let mut specs = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let end = rest.find([',', '{']).unwrap_or(rest.len());
        let name = rest[..end].trim();
        if name.is_empty() {
            return Err(PipelineError::Syntax(format!("empty pass name in `{text}`")));
        }
        rest = &rest[end..];
        let mut options = BTreeMap::new();
        if let Some(body) = rest.strip_prefix('{') {
            let close = body
                .find('}')
                .ok_or_else(|| PipelineError::Syntax(format!("missing `}}` after `{name}`")))?;
            for item in body[..close].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| PipelineError::Syntax(format!("option `{item}` is not `key=value`")))?;
                options.insert(k.trim().to_string(), v.trim().to_string());
            }
            rest = body[close + 1..].trim_start();
        }
        specs.push(PassSpec {
            name: name.to_string(),
            options,
        });
        rest = match rest.strip_prefix(',') {
            Some(r) => r.trim_start(),
            None if rest.is_empty() => rest,
            None => return Err(PipelineError::Syntax(format!("expected `,` before `{rest}`"))),
        };
    }
    Ok(specs)
}

pub const PASS_NAMES: &[&str] = &[
    "linearize",
    "bufferize",
    "remove-dead-alloc",
    "cancel-inverses",
    "merge-rotations",
    "canonicalize-modifiers",
    "simplify-control-flow",
    "route",
];

/// Inputs some passes need besides the module.
#[derive(Clone, Debug, Default)]
pub struct PassContext {
    pub coupling_map: Option<CouplingMap>,
}

struct Options<'a> {
    spec: &'a PassSpec,
    used: Vec<&'static str>,
}

impl<'a> Options<'a> {
    fn get<T: std::str::FromStr>(&mut self, key: &'static str, default: T) -> Result<T, PipelineError> {
        self.used.push(key);
        match self.spec.options.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| PipelineError::InvalidOption {
                pass: self.spec.name.clone(),
                message: format!("invalid value `{v}` for `{key}`"),
            }),
        }
    }

    fn finish(self) -> Result<(), PipelineError> {
        match self.spec.options.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(PipelineError::InvalidOption {
                pass: self.spec.name.clone(),
                message: format!("unknown option `{k}`"),
            }),
            None => Ok(()),
        }
    }
}

/// Instantiates a pass from its spec.
pub fn create_pass(spec: &PassSpec, ctx: &PassContext) -> Result<Box<dyn Pass>, PipelineError> {
    let mut o = Options { spec, used: Vec::new() };
    let max_iterations = o.get("max-iterations", crate::ir::rewrite::DEFAULT_MAX_ITERATIONS)?;
    let pass: Box<dyn Pass> = match spec.name.as_str() {
        "linearize" => Box::new(convert::Linearize),
        "bufferize" => Box::new(convert::Bufferize),
        "remove-dead-alloc" => Box::new(opt::RemoveDeadAlloc),
        "cancel-inverses" => Box::new(opt::CancelInverses { max_iterations }),
        "merge-rotations" => Box::new(opt::MergeRotations { max_iterations }),
        "canonicalize-modifiers" => Box::new(opt::CanonicalizeModifiers { max_iterations }),
        "simplify-control-flow" => Box::new(opt::SimplifyControlFlow {
            unroll_limit: o.get("unroll-limit", opt::DEFAULT_UNROLL_LIMIT)?,
        }),
        "route" => {
            let layout = o.get("layout", route::InitialLayout::Greedy)?;
            let lookahead = o.get("lookahead", route::DEFAULT_LOOKAHEAD)?;
            Box::new(route::Route {
                coupling_map: ctx.coupling_map.clone(),
                options: route::RouteOptions { layout, lookahead },
            })
        }
        other => return Err(PipelineError::UnknownPass(other.to_string())),
    };
    o.finish()?;
    Ok(pass)
}

/// Result of a successful pipeline run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PipelineReport {
    pub warnings: Vec<Diagnostic>,
    pub route: Option<RouteReport>,
}

/// Pipeline settings.
pub struct PipelineOptions<'a> {
    pub verify_each: bool,
    /// Called with the pass name and the module after each pass.
    pub after_pass: Option<&'a mut dyn FnMut(&str, &Module)>,
}

impl Default for PipelineOptions<'_> {
    fn default() -> Self {
        PipelineOptions {
            verify_each: true,
            after_pass: None,
        }
    }
}

/// Runs the passes in order, verifying after each one when requested.
pub fn run_pipeline(
    m: &mut Module,
    specs: &[PassSpec],
    ctx: &PassContext,
    mut options: PipelineOptions<'_>,
) -> Result<PipelineReport, PipelineError> {
    let passes: Vec<Box<dyn Pass>> = specs.iter().map(|s| create_pass(s, ctx)).collect::<Result<_, _>>()?;
    let mut report = PipelineReport::default();
    for pass in passes {
        let outcome = pass.run(m).map_err(|error| PipelineError::PassFailed {
            pass: pass.name().to_string(),
            error,
        })?;
        report.warnings.extend(outcome.diagnostics);
        if outcome.route.is_some() {
            report.route = outcome.route;
        }
        if let Some(cb) = options.after_pass.as_mut() {
            cb(pass.name(), m);
        }
        if options.verify_each {
            let diagnostics = verify(m);
            if has_errors(&diagnostics) {
                return Err(PipelineError::VerificationFailed {
                    pass: pass.name().to_string(),
                    diagnostics,
                });
            }
        }
    }
    Ok(report)
}

/// Parses and runs a pipeline string with default settings.
pub fn run_pipeline_str(m: &mut Module, pipeline: &str, ctx: &PassContext) -> Result<PipelineReport, PipelineError> {
    run_pipeline(m, &parse_pipeline(pipeline)?, ctx, PipelineOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_syntax() {
        let specs = parse_pipeline(
            "linearize, simplify-control-flow{unroll-limit=32}, route{layout=identity,lookahead=3},bufferize",
        )
        .unwrap();
        assert_eq!(specs.len(), 4);
        assert_eq!(specs[1].options["unroll-limit"], "32");
        assert_eq!(specs[2].options.len(), 2);
        assert_eq!(specs[3].name, "bufferize");
        assert!(parse_pipeline("").unwrap().is_empty());
        assert!(matches!(parse_pipeline("a{k}"), Err(PipelineError::Syntax(_))));
        assert!(matches!(parse_pipeline("a{k=1"), Err(PipelineError::Syntax(_))));
        assert!(matches!(parse_pipeline("a,,b"), Err(PipelineError::Syntax(_))));
    }

    #[test]
    fn unknown_pass_and_option() {
        let ctx = PassContext::default();
        let mut m = Module::new();
        assert_eq!(
            run_pipeline_str(&mut m, "fold-everything", &ctx).unwrap_err(),
            PipelineError::UnknownPass("fold-everything".into())
        );
        assert!(matches!(
            run_pipeline_str(&mut m, "cancel-inverses{depth=2}", &ctx),
            Err(PipelineError::InvalidOption { .. })
        ));
        assert!(matches!(
            run_pipeline_str(&mut m, "simplify-control-flow{unroll-limit=many}", &ctx),
            Err(PipelineError::InvalidOption { .. })
        ));
    }

    #[test]
    fn empty_pipeline_leaves_module_alone() {
        let mut m = crate::frontend::import_qasm("OPENQASM 3; qubit q; h q;", "t").unwrap();
        let before = crate::emit::print_ir(&m);
        run_pipeline_str(&mut m, "", &PassContext::default()).unwrap();
        assert_eq!(crate::emit::print_ir(&m), before);
    }
}
