//! The `qcc` command-line driver.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::dialect::{module_dialect, DialectKind};
use crate::emit::{emit_qasm, emit_qir_flat, parse_ir, print_ir};
use crate::frontend::import_qasm;
use crate::ir::verify::verify;
use crate::ir::{has_errors, Diagnostic, Location, Module, Severity};
use crate::sim::simulate;
use crate::transforms::convert::bufferize;
use crate::transforms::{
    parse_pipeline, run_pipeline, CouplingMap, PassContext, PassSpec, PipelineError, PipelineOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmitFormat {
    Qcir,
    Qasm,
    Qir,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorMode {
    Auto,
    Never,
    Always,
}

impl ColorMode {
    /// Reads `QCC_COLOR`; unknown values mean `auto`.
    pub fn from_env() -> Self {
        match std::env::var("QCC_COLOR").as_deref() {
            Ok("never") => ColorMode::Never,
            Ok("always") => ColorMode::Always,
            _ => ColorMode::Auto,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qcc",
    version,
    about = "Compile, optimize, route and simulate OpenQASM 3 programs"
)]
pub struct Args {
    /// Input program (`.qasm` or `.qcir`).
    pub input: PathBuf,
    /// Comma-separated pass pipeline, e.g. `linearize,cancel-inverses,bufferize`.
    #[arg(long, default_value = "")]
    pub passes: String,
    /// Output format.
    #[arg(long, value_enum)]
    pub emit: Option<EmitFormat>,
    /// JSON coupling map used by `route`.
    #[arg(long, value_name = "FILE")]
    pub coupling_map: Option<PathBuf>,
    /// Verify the module after every pass.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    pub verify_each: bool,
    /// Print the outcome distribution of the final program.
    #[arg(long)]
    pub simulate: bool,
    /// Reserved for sampling; the simulator is exact.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Dump the IR to stderr after every pass.
    #[arg(long)]
    pub print_ir_after_all: bool,
}

struct Reporter<'a> {
    err: &'a mut dyn Write,
    color: bool,
    file: String,
}

impl Reporter<'_> {
    fn diagnostic(&mut self, d: &Diagnostic) {
        let loc = d
            .location
            .clone()
            .unwrap_or_else(|| Location::new(self.file.as_str(), 1, 1));
        let severity = if self.color {
            match d.severity {
                Severity::Error => "\x1b[1;31merror\x1b[0m".to_string(),
                Severity::Warning => "\x1b[1;33mwarning\x1b[0m".to_string(),
                Severity::Note => "\x1b[1;36mnote\x1b[0m".to_string(),
            }
        } else {
            d.severity.to_string()
        };
        let _ = writeln!(self.err, "{loc}: {severity}: {}", d.message);
    }

    fn error(&mut self, message: impl Into<String>) -> i32 {
        self.diagnostic(&Diagnostic::error(message, None));
        EXIT_DIAGNOSTICS
    }

    fn usage(&mut self, message: impl std::fmt::Display) -> i32 {
        let _ = writeln!(self.err, "qcc: {message}");
        EXIT_USAGE
    }

    fn all(&mut self, diags: &[Diagnostic]) -> i32 {
        for d in diags {
            self.diagnostic(d);
        }
        EXIT_DIAGNOSTICS
    }
}

fn is_qcir(path: &Path, text: &str) -> bool {
    match path.extension().and_then(|e| e.to_str()) {
        Some("qcir") => true,
        Some("qasm") => false,
        _ => text.trim_start().starts_with("qcir.module"),
    }
}

fn imperative(m: &Module) -> Result<Module, Diagnostic> {
    match module_dialect(m) {
        DialectKind::Qco => bufferize(m).map_err(|e| Diagnostic::error(e.to_string(), e.location().cloned())),
        _ => Ok(m.clone()),
    }
}

/// Runs the driver with explicit streams and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, color: ColorMode) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let color = match color {
        ColorMode::Always => true,
        ColorMode::Never => false,
        ColorMode::Auto => false,
    };
    let file = args.input.display().to_string();
    let mut rep = Reporter { err, color, file };
    execute(&args, out, &mut rep)
}

fn execute(args: &Args, out: &mut dyn Write, rep: &mut Reporter<'_>) -> i32 {
    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => return rep.usage(format!("cannot read `{}`: {e}", rep.file)),
    };
    let mut module = if is_qcir(&args.input, &text) {
        match parse_ir(&text) {
            Ok(m) => m,
            Err(e) => return rep.all(&[e.to_diagnostic(&rep.file)]),
        }
    } else {
        match import_qasm(&text, &rep.file) {
            Ok(m) => m,
            Err(e) => return rep.all(&[e.into()]),
        }
    };
    let diags = verify(&module);
    if has_errors(&diags) {
        return rep.all(&diags);
    }

    let mut specs = match parse_pipeline(&args.passes) {
        Ok(s) => s,
        Err(e) => return rep.usage(e),
    };
    if args.emit == Some(EmitFormat::Qir) {
        specs.push(PassSpec {
            name: "simplify-control-flow".into(),
            options: Default::default(),
        });
    }
    let mut ctx = PassContext::default();
    if let Some(path) = &args.coupling_map {
        let json = match std::fs::read_to_string(path) {
            Ok(j) => j,
            Err(e) => return rep.usage(format!("cannot read `{}`: {e}", path.display())),
        };
        match CouplingMap::from_json(&json) {
            Ok(cm) => ctx.coupling_map = Some(cm),
            Err(e) => return rep.usage(format!("`{}`: {e}", path.display())),
        }
    } else if specs.iter().any(|s| s.name == "route") {
        return rep.usage("`route` requires --coupling-map");
    }

    let mut dumps = String::new();
    let mut dump = |name: &str, m: &Module| {
        dumps.push_str(&format!("// ----- IR after {name} -----\n{}", print_ir(m)));
    };
    let options = PipelineOptions {
        verify_each: args.verify_each,
        after_pass: if args.print_ir_after_all { Some(&mut dump) } else { None },
    };
    let result = run_pipeline(&mut module, &specs, &ctx, options);
    let _ = rep.err.write_all(dumps.as_bytes());
    match result {
        Ok(report) => {
            for w in &report.warnings {
                rep.diagnostic(w);
            }
        }
        Err(e @ (PipelineError::Syntax(_) | PipelineError::UnknownPass(_) | PipelineError::InvalidOption { .. })) => {
            return rep.usage(e)
        }
        Err(e) => return rep.all(&e.diagnostics()),
    }

    let mut output = String::new();
    let emit = args.emit.or(if args.simulate { None } else { Some(EmitFormat::Qcir) });
    match emit {
        Some(EmitFormat::Qcir) => output.push_str(&print_ir(&module)),
        Some(format) => {
            let m = match imperative(&module) {
                Ok(m) => m,
                Err(d) => return rep.all(&[d]),
            };
            let emitted = match format {
                EmitFormat::Qasm => emit_qasm(&m).map_err(|e| e.to_string()),
                _ => emit_qir_flat(&m).map_err(|e| e.to_string()),
            };
            match emitted {
                Ok(s) => output.push_str(&s),
                Err(e) => return rep.error(e),
            }
        }
        None => {}
    }
    if args.simulate {
        match simulate(&module) {
            Ok(d) => output.push_str(&d.to_string()),
            Err(e) => return rep.error(e.to_string()),
        }
    }

    let written = match &args.output {
        Some(path) => std::fs::write(path, output.as_bytes()),
        None => out.write_all(output.as_bytes()),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(e) => rep.usage(format!("cannot write output: {e}")),
    }
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    let color = match ColorMode::from_env() {
        ColorMode::Auto if std::io::stderr().is_terminal() => ColorMode::Always,
        ColorMode::Auto => ColorMode::Never,
        c => c,
    };
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run(std::env::args_os(), &mut out, &mut err, color)
}
