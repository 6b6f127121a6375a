use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use symtensor::error::Span;
use symtensor::loopgen::term_groups;
use symtensor::oracle::{verify_trials, VerifyReport};
use symtensor::symmetry::{gcs, output_symmetry};
use symtensor::{
    generate, parse_statement, parse_symmetries, registry, Error, PackedLayout, PackedTensor,
    Problem, ProblemSpec, TensorSignature, TensorStatement,
};

#[derive(Parser)]
#[command(
    name = "symtensor",
    version,
    about = "Loop-nest generation for tensor statements over partially symmetric tensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the generated loop nest as IR pseudocode or C source.
    Codegen {
        /// Statement, e.g. `C[i,j] = A[i,k] * B[k,j]`.
        #[arg(long)]
        expr: String,
        /// Symmetry declarations, e.g. `A: {i,k}; B: {k}{j}`.
        #[arg(long, default_value = "")]
        sym: String,
        /// Extents, e.g. `i=4,j=4,k=3`; checked for consistency when given.
        #[arg(long)]
        extents: Option<String>,
        /// Output format (`ir` or `c`).
        #[arg(long, default_value = "ir")]
        emit: String,
        /// Name of the generated C function.
        #[arg(long, default_value = "kernel")]
        kernel: String,
    },
    /// Execute a problem on packed input tensors.
    Run {
        /// Problem JSON: `{"expr": ..., "symmetries": ..., "extents": {...}}`.
        #[arg(long)]
        problem: PathBuf,
        /// Input tensor as `NAME=FILE.json`; repeat for each input.
        #[arg(long = "input", value_name = "NAME=FILE")]
        inputs: Vec<String>,
        /// Where to write the output tensor JSON.
        #[arg(long)]
        out: PathBuf,
        /// Execution backend (`interp` or `cc`).
        #[arg(long, default_value = "interp")]
        backend: String,
        #[arg(long, value_enum, default_value_t = Scalar::Int)]
        scalar: Scalar,
    },
    /// Compare generated code against the dense reference on random inputs.
    Verify {
        /// Problem JSON, either one problem or an array of them.
        #[arg(long)]
        problem: PathBuf,
        /// First random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds per problem.
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        #[arg(long, value_enum, default_value_t = Scalar::Int)]
        scalar: Scalar,
    },
    /// Show the symmetry analysis of a statement.
    Info {
        #[arg(long)]
        expr: String,
        #[arg(long, default_value = "")]
        sym: String,
        /// Extents for the packed-size table.
        #[arg(long)]
        extents: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scalar {
    Int,
    Float,
}

/// Bad input from the user: exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Verification ran but did not pass: exit code 1 without an error message.
#[derive(Debug)]
struct Failed;

impl fmt::Display for Failed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("verification failed")
    }
}

impl std::error::Error for Failed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Failed>() => ExitCode::from(1),
        Err(e) if e.is::<UsageError>() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Codegen {
            expr,
            sym,
            extents,
            emit,
            kernel,
        } => {
            let emitter = registry::emitter(&emit).map_err(usage)?;
            let (stmt, sigs) = analyse(&expr, &sym, extents.as_deref())?;
            let nest = generate(&stmt, &sigs).map_err(usage)?;
            let text = emitter.emit(&nest, &kernel).map_err(usage)?;
            output(&text)?;
            Ok(())
        }
        Command::Info { expr, sym, extents } => {
            let (stmt, sigs) = analyse(&expr, &sym, extents.as_deref())?;
            output(&info(&stmt, &sigs)?)?;
            Ok(())
        }
        Command::Run {
            problem,
            inputs,
            out,
            backend,
            scalar,
        } => {
            let backend = registry::backend(&backend).map_err(usage)?;
            let problem = match read_problems(&problem)?.as_slice() {
                [p] => p.clone(),
                _ => return Err(usage("`run` takes a file with a single problem")),
            };
            let nest = generate(&problem.stmt, &problem.inputs).map_err(usage)?;
            let text = match scalar {
                Scalar::Int => backend
                    .run_int(&nest, &read_inputs(&problem, &inputs)?, &problem.extents)?
                    .to_json(),
                Scalar::Float => backend
                    .run_float(&nest, &read_inputs(&problem, &inputs)?, &problem.extents)?
                    .to_json(),
            };
            fs::write(&out, text).with_context(|| format!("cannot write {}", out.display()))?;
            Ok(())
        }
        Command::Verify {
            problem,
            seed,
            trials,
            json,
            scalar,
        } => {
            let reports = read_problems(&problem)?
                .iter()
                .flat_map(|p| match scalar {
                    Scalar::Int => verify_trials::<i64>(p, seed, trials),
                    Scalar::Float => verify_trials::<f64>(p, seed, trials),
                })
                .collect::<Vec<_>>();
            print_reports(&reports, json)?;
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failed.into())
            }
        }
    }
}

/// Writes to stdout; a reader that went away early is not an error.
fn output(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    UsageError(format!("error: {e}")).into()
}

/// Renders `err` with a caret under its location in `source`, when it has one.
fn diagnostic(err: &Error, label: &str, source: &str) -> anyhow::Error {
    let span = match err {
        Error::Syntax { span, .. } | Error::RepeatedIndex { span, .. } => Some(*span),
        _ => None,
    };
    let Some(Span { line, column }) = span.filter(|s| s.line > 0) else {
        return usage(err);
    };
    let text = source.lines().nth(line - 1).unwrap_or("");
    let gutter = " ".repeat(line.to_string().len());
    UsageError(format!(
        "error: {err}\n{gutter}--> {label}:{line}:{column}\n{gutter} |\n{line} | {text}\n{gutter} | {}^",
        " ".repeat(column.saturating_sub(1))
    ))
    .into()
}

fn parse_extents(text: &str) -> anyhow::Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("extent `{item}` is not of the form NAME=SIZE")))?;
        let value = value.trim().parse::<usize>().map_err(|_| {
            usage(format!(
                "extent `{item}` does not have a non-negative integer size"
            ))
        })?;
        if out.insert(name.trim().to_string(), value).is_some() {
            return Err(usage(format!("extent for `{}` given twice", name.trim())));
        }
    }
    Ok(out)
}

/// Parses a statement and its symmetries, attaching extents when given.
fn analyse(
    expr: &str,
    sym: &str,
    extents: Option<&str>,
) -> anyhow::Result<(TensorStatement, Vec<TensorSignature>)> {
    let stmt = parse_statement(expr).map_err(|e| diagnostic(&e, "expr", expr))?;
    let sigs = parse_symmetries(sym, &stmt).map_err(|e| diagnostic(&e, "sym", sym))?;
    match extents {
        None => Ok((stmt, sigs)),
        Some(text) => {
            let problem = Problem::new(expr, sym, &parse_extents(text)?).map_err(usage)?;
            Ok((problem.stmt, problem.inputs))
        }
    }
}

fn problem_from_spec(spec: &ProblemSpec) -> anyhow::Result<Problem> {
    analyse(&spec.expr, &spec.symmetries, None)?;
    Problem::from_spec(spec).map_err(usage)
}

fn read_problems(path: &Path) -> anyhow::Result<Vec<Problem>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let specs: Vec<ProblemSpec> = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|s| vec![s])
    }
    .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    specs.iter().map(problem_from_spec).collect()
}

fn read_inputs<T: symtensor::Scalar>(
    problem: &Problem,
    args: &[String],
) -> anyhow::Result<BTreeMap<String, PackedTensor<T>>> {
    let mut out = BTreeMap::new();
    for arg in args {
        let (name, file) = arg
            .split_once('=')
            .ok_or_else(|| usage(format!("input `{arg}` is not of the form NAME=FILE")))?;
        if !problem.inputs.iter().any(|s| s.name == name) {
            return Err(usage(format!(
                "`{name}` is not an input of {}",
                problem.stmt
            )));
        }
        let t = PackedTensor::read_json(name, Path::new(file))
            .with_context(|| format!("cannot load input `{name}` from {file}"))?;
        out.insert(name.to_string(), t);
    }
    Ok(out)
}

fn info(stmt: &TensorStatement, sigs: &[TensorSignature]) -> anyhow::Result<String> {
    use std::fmt::Write as _;
    let g = gcs(stmt, sigs).map_err(usage)?;
    let groups = term_groups(stmt, sigs, &g).map_err(usage)?;
    let mut s = String::new();
    writeln!(s, "statement: {stmt}")?;
    writeln!(s, "gcs: {g}")?;
    writeln!(
        s,
        "output symmetry: {}{}",
        stmt.output.tensor,
        output_symmetry(stmt, &g)
    )?;
    for (n, group) in groups.iter().enumerate() {
        if groups.len() > 1 {
            let terms = group
                .terms
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>();
            writeln!(s, "term group {n} (terms {}):", terms.join(", "))?;
        }
        writeln!(s, "dependency graph:")?;
        for line in group.graph.to_string().lines() {
            writeln!(s, "  {line}")?;
        }
        writeln!(s, "ordering tree:")?;
        for line in group.tree.listing().lines() {
            writeln!(s, "  {line}")?;
        }
    }
    let sized = sigs.iter().all(|sig| sig.extents.is_some());
    if sized {
        writeln!(s, "packed sizes:")?;
        let nest = generate(stmt, sigs).map_err(usage)?;
        for sig in sigs.iter().chain(std::iter::once(&nest.output)) {
            let layout = PackedLayout::new(sig).map_err(usage)?;
            writeln!(
                s,
                "  {}{}: {} of {} dense",
                sig.name,
                sig.symmetry,
                layout.total_size(),
                layout.dense_size()
            )?;
        }
    }
    Ok(s)
}

fn print_reports(reports: &[VerifyReport], json: bool) -> anyhow::Result<()> {
    let passed = reports.iter().filter(|r| r.passed).count();
    if json {
        let doc = serde_json::json!({
            "passed": passed == reports.len(),
            "total": reports.len(),
            "failures": reports.len() - passed,
            "reports": reports,
        });
        output(&format!("{}\n", serde_json::to_string_pretty(&doc)?))
    } else {
        let mut text = String::new();
        for r in reports {
            text.push_str(&r.summary());
            text.push('\n');
        }
        text.push_str(&format!("{passed}/{} passed\n", reports.len()));
        output(&text)
    }
}
