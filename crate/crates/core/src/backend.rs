//! Execution backends and source emitters behind common traits.

use std::collections::BTreeMap;
use std::env;
use std::fmt::Write as _;
use std::fs;
use std::process::Command;

use crate::cemit::emit_c;
use crate::error::{Error, Result};
use crate::exec::{check_input, execute, output_layout};
use crate::ir::LoopNest;
use crate::storage::{PackedTensor, Scalar};
use crate::symmetry::IndexVar;

/// Something that can run a loop nest on packed inputs.
pub trait Backend {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    /// Whether the backend can run in this environment.
    fn available(&self) -> bool;
    fn run_int(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<i64>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<i64>>;
    fn run_float(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<f64>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<f64>>;
}

/// Something that renders a loop nest as text.
pub trait Emitter {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn emit(&self, nest: &LoopNest, kernel: &str) -> Result<String>;
}

pub struct Interpreter;

impl Backend for Interpreter {
    fn name(&self) -> &'static str {
        "interp"
    }

    fn describe(&self) -> &'static str {
        "built-in loop-nest interpreter"
    }

    fn available(&self) -> bool {
        true
    }

    fn run_int(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<i64>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<i64>> {
        execute(nest, inputs, extents)
    }

    fn run_float(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<f64>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<f64>> {
        execute(nest, inputs, extents)
    }
}

/// Emits C, compiles it with `$CC` (default `cc`) and runs it.
pub struct CompiledC;

impl CompiledC {
    fn compiler() -> String {
        env::var("CC").unwrap_or_else(|_| "cc".to_string())
    }

    fn run<T: Scalar>(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<T>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<T>> {
        let mut data = Vec::with_capacity(nest.inputs.len());
        for sig in &nest.inputs {
            let t = inputs
                .get(&sig.name)
                .ok_or_else(|| Error::MissingInput(sig.name.clone()))?;
            check_input(sig, t, extents)?;
            data.push(t.values());
        }
        let layout = output_layout(nest, extents)?;
        let sizes = nest
            .vars
            .iter()
            .map(|v| {
                extents
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::MissingExtent(v.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let source = harness(nest, &data, &sizes, layout.total_size())?;

        let dir = tempfile::tempdir()?;
        let src = dir.path().join("kernel.c");
        let bin = dir.path().join("kernel");
        fs::write(&src, source)?;
        let cc = Self::compiler();
        let built = Command::new(&cc)
            .args(["-std=c99", "-O1", "-o"])
            .arg(&bin)
            .arg(&src)
            .output()
            .map_err(|e| Error::Backend(format!("cannot start `{cc}`: {e}")))?;
        if !built.status.success() {
            return Err(Error::Backend(format!(
                "`{cc}` failed:\n{}",
                String::from_utf8_lossy(&built.stderr)
            )));
        }
        let ran = Command::new(&bin)
            .output()
            .map_err(|e| Error::Backend(format!("cannot run compiled kernel: {e}")))?;
        if !ran.status.success() {
            return Err(Error::Backend(format!(
                "compiled kernel exited with {}",
                ran.status
            )));
        }
        let values = String::from_utf8_lossy(&ran.stdout)
            .lines()
            .map(|line| {
                let v: f64 = line
                    .trim()
                    .parse()
                    .map_err(|_| Error::Backend(format!("unreadable kernel output `{line}`")))?;
                T::from_f64(v).ok_or_else(|| {
                    Error::Backend(format!("kernel output {v} is not a valid {:?}", T::KIND))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PackedTensor::new(layout, values)
    }
}

/// Kernel plus a `main` that embeds the inputs and prints every output
/// value with round-trip precision.
fn harness<T: Scalar>(
    nest: &LoopNest,
    data: &[&[T]],
    sizes: &[usize],
    out_size: usize,
) -> Result<String> {
    let mut src = String::from("#include <stdio.h>\n\n");
    src.push_str(&emit_c(nest, "symtensor_kernel")?);
    src.push('\n');
    let list = |values: &mut dyn Iterator<Item = String>| {
        let items = values.collect::<Vec<_>>();
        if items.is_empty() {
            "0".to_string()
        } else {
            items.join(", ")
        }
    };
    for (n, values) in data.iter().enumerate() {
        let mut items = values.iter().map(|v| {
            let x = v.to_f64();
            // Debug formatting of f64 round-trips and is valid C.
            format!("{x:?}")
        });
        if values.iter().any(|v| !v.to_f64().is_finite()) {
            return Err(Error::Backend("non-finite input values".into()));
        }
        let _ = writeln!(
            src,
            "static const double input_{n}[] = {{ {} }};",
            list(&mut items)
        );
    }
    let _ = writeln!(
        src,
        "static const int extents_v[] = {{ {} }};",
        list(&mut sizes.iter().map(|s| s.to_string()))
    );
    let _ = writeln!(src, "static double output_v[{}];", out_size.max(1));
    src.push_str("\nint main(void)\n{\n    symtensor_kernel(output_v, ");
    for n in 0..data.len() {
        let _ = write!(src, "input_{n}, ");
    }
    src.push_str("extents_v);\n");
    let _ = writeln!(
        src,
        "    for (long n = 0; n < {out_size}; n++) {{\n        printf(\"%.17g\\n\", output_v[n]);\n    }}"
    );
    src.push_str("    return 0;\n}\n");
    Ok(src)
}

impl Backend for CompiledC {
    fn name(&self) -> &'static str {
        "cc"
    }

    fn describe(&self) -> &'static str {
        "emitted C compiled with $CC (default cc)"
    }

    fn available(&self) -> bool {
        Command::new(Self::compiler())
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    }

    fn run_int(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<i64>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<i64>> {
        // Every value must survive the trip through double.
        const EXACT: i64 = 1 << 53;
        if inputs
            .values()
            .flat_map(|t| t.values())
            .any(|v| v.abs() > EXACT)
        {
            return Err(Error::Backend("integer inputs exceed 2^53".into()));
        }
        self.run(nest, inputs, extents)
    }

    fn run_float(
        &self,
        nest: &LoopNest,
        inputs: &BTreeMap<String, PackedTensor<f64>>,
        extents: &BTreeMap<IndexVar, usize>,
    ) -> Result<PackedTensor<f64>> {
        self.run(nest, inputs, extents)
    }
}

pub struct IrEmitter;

impl Emitter for IrEmitter {
    fn name(&self) -> &'static str {
        "ir"
    }

    fn describe(&self) -> &'static str {
        "loop-nest pseudocode"
    }

    fn emit(&self, nest: &LoopNest, _kernel: &str) -> Result<String> {
        Ok(nest.pseudocode())
    }
}

pub struct CEmitter;

impl Emitter for CEmitter {
    fn name(&self) -> &'static str {
        "c"
    }

    fn describe(&self) -> &'static str {
        "C99 function over packed arrays"
    }

    fn emit(&self, nest: &LoopNest, kernel: &str) -> Result<String> {
        emit_c(nest, kernel)
    }
}
