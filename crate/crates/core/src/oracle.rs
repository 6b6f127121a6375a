//! Brute-force reference evaluation and end-to-end verification.
//!
//! Nothing here knows about symmetry beyond packing and unpacking: the
//! reference evaluates every statement over the full index box.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::execute_instrumented;
use crate::expr::{Problem, TensorStatement};
use crate::loopgen::generate;
use crate::storage::{
    all_coords, canonical_coords_iter, pack, unpack, DenseTensor, PackedLayout, PackedTensor,
    Scalar, ScalarKind,
};
use crate::symmetry::{IndexVar, TensorSignature};

/// Evaluates `stmt` densely: each term is summed over every assignment of
/// its own variables.
pub fn dense_reference<T: Scalar>(
    stmt: &TensorStatement,
    dense_inputs: &BTreeMap<String, DenseTensor<T>>,
    extents: &BTreeMap<IndexVar, usize>,
) -> Result<DenseTensor<T>> {
    let size = |v: &IndexVar| {
        extents
            .get(v)
            .copied()
            .ok_or_else(|| Error::MissingExtent(v.to_string()))
    };
    for a in stmt.input_accesses() {
        let t = dense_inputs
            .get(&a.tensor)
            .ok_or_else(|| Error::MissingInput(a.tensor.clone()))?;
        let expected = a.vars.iter().map(size).collect::<Result<Vec<_>>>()?;
        if t.extents != expected {
            return Err(Error::InputMismatch {
                tensor: a.tensor.clone(),
                reason: format!("extents {:?}, expected {expected:?} for `{a}`", t.extents),
            });
        }
    }
    let out_extents = stmt
        .output
        .vars
        .iter()
        .map(size)
        .collect::<Result<Vec<_>>>()?;
    let mut out = DenseTensor::zeros(out_extents);
    for term in &stmt.terms {
        let vars = term.vars();
        let sizes = vars.iter().map(size).collect::<Result<Vec<_>>>()?;
        let pick = |access_vars: &[IndexVar], at: &[usize]| {
            access_vars
                .iter()
                .map(|v| at[vars.iter().position(|u| u == v).expect("term variable")])
                .collect::<Vec<_>>()
        };
        for at in all_coords(sizes) {
            let mut product: Option<T> = None;
            for a in &term.factors {
                let x = dense_inputs[&a.tensor].get(&pick(&a.vars, &at));
                product = Some(product.map_or(x, |p| p * x));
            }
            let c = pick(&stmt.output.vars, &at);
            let cur = out.get(&c);
            out.set(&c, cur + product.unwrap_or(T::ZERO));
        }
    }
    Ok(out)
}

/// 64-bit FNV-1a, used to give every tensor its own stream.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Random packed tensor for `sig` (which must carry extents).
///
/// The generator is ChaCha8 seeded with `seed ^ fnv1a(sig.name)`; canonical
/// slots are filled in storage order.
pub fn random_symmetric<T: Scalar>(sig: &TensorSignature, seed: u64) -> Result<PackedTensor<T>> {
    let layout = PackedLayout::new(sig)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&sig.name));
    let values = (0..layout.total_size())
        .map(|_| T::sample(&mut rng))
        .collect();
    PackedTensor::new(layout, values)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WriteAnomaly {
    pub coords: Vec<usize>,
    pub term: usize,
    pub expected: usize,
    pub found: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub expr: String,
    pub seed: u64,
    pub scalar: ScalarKind,
    pub passed: bool,
    pub max_abs_diff: f64,
    /// Output slots outside tolerance.
    pub mismatches: usize,
    pub output_symmetry: String,
    /// Whether the dense reference result has the derived output symmetry.
    pub output_symmetry_ok: bool,
    pub write_count_anomalies: Vec<WriteAnomaly>,
    pub error: Option<String>,
}

impl VerifyReport {
    fn new(problem: &Problem, seed: u64, kind: ScalarKind) -> Self {
        VerifyReport {
            expr: problem.stmt.to_string(),
            seed,
            scalar: kind,
            passed: false,
            max_abs_diff: 0.0,
            mismatches: 0,
            output_symmetry: String::new(),
            output_symmetry_ok: false,
            write_count_anomalies: Vec::new(),
            error: None,
        }
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{verdict} seed={} {}  max|diff|={} mismatches={} write-anomalies={} output-symmetry={}{}",
            self.seed,
            self.expr,
            self.max_abs_diff,
            self.mismatches,
            self.write_count_anomalies.len(),
            self.output_symmetry,
            if self.output_symmetry_ok { "" } else { " (VIOLATED)" },
        );
        if let Some(e) = &self.error {
            line.push_str(&format!("  error: {e}"));
        }
        line
    }
}

/// Relative tolerance for float comparisons, with an absolute floor of the
/// same size near zero.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

fn close<T: Scalar>(got: T, want: T) -> bool {
    match T::KIND {
        ScalarKind::Int => got == want,
        ScalarKind::Float => {
            let (g, w) = (got.to_f64(), want.to_f64());
            (g - w).abs() <= FLOAT_TOLERANCE * w.abs().max(1.0)
        }
    }
}

/// Generates, runs and checks `problem` on random inputs from `seed`.
pub fn verify<T: Scalar>(problem: &Problem, seed: u64) -> VerifyReport {
    let mut report = VerifyReport::new(problem, seed, T::KIND);
    if let Err(e) = verify_into::<T>(problem, seed, &mut report) {
        report.error = Some(e.to_string());
        report.passed = false;
    }
    report
}

/// `trials` consecutive seeds starting at `seed`.
pub fn verify_trials<T: Scalar>(problem: &Problem, seed: u64, trials: u64) -> Vec<VerifyReport> {
    (0..trials)
        .map(|t| verify::<T>(problem, seed.wrapping_add(t)))
        .collect()
}

fn verify_into<T: Scalar>(problem: &Problem, seed: u64, report: &mut VerifyReport) -> Result<()> {
    let nest = generate(&problem.stmt, &problem.inputs)?;
    report.output_symmetry = format!("{}{}", nest.output.name, nest.output.symmetry);
    let packed = problem
        .inputs
        .iter()
        .map(|s| Ok((s.name.clone(), random_symmetric::<T>(s, seed)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let (out, counts) = execute_instrumented(&nest, &packed, &problem.extents)?;

    let dense_inputs = packed
        .iter()
        .map(|(k, v)| (k.clone(), unpack(v)))
        .collect::<BTreeMap<_, _>>();
    let dense = dense_reference(&problem.stmt, &dense_inputs, &problem.extents)?;
    let out_sig = out.layout().signature(&nest.output.name);
    let reference = match pack(&dense, &out_sig) {
        Ok(r) => r,
        Err(e @ Error::SymmetryViolation { .. }) => {
            report.output_symmetry_ok = false;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    report.output_symmetry_ok = true;

    for (&got, &want) in out.values().iter().zip(reference.values()) {
        let diff = (got.to_f64() - want.to_f64()).abs();
        report.max_abs_diff = report.max_abs_diff.max(diff);
        if !close(got, want) {
            report.mismatches += 1;
        }
    }

    let expected = (0..problem.stmt.terms.len())
        .map(|t| {
            problem
                .stmt
                .reduction_vars(t)
                .iter()
                .map(|v| problem.extents[v])
                .product::<usize>()
        })
        .collect::<Vec<_>>();
    for coords in canonical_coords_iter(out.layout()) {
        let found = counts.get(&coords).cloned().unwrap_or_default();
        for (term, &want) in expected.iter().enumerate() {
            let got = found.get(term).copied().unwrap_or(0);
            if got != want {
                report.write_count_anomalies.push(WriteAnomaly {
                    coords: coords.clone(),
                    term,
                    expected: want,
                    found: got,
                });
            }
        }
    }

    report.passed = report.mismatches == 0 && report.write_count_anomalies.is_empty();
    Ok(())
}
