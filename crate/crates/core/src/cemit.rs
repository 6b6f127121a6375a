//! C99 source emission for loop nests over packed arrays.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ir::{Bound, BoundKind, LoopNest, LoopNode, Node, StatementNode};
use crate::offsets::{access_steps, hoisted, partial_key, Step};
use crate::symmetry::{find_signature, IndexVar, TensorSignature};

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "main",
];

/// Names the emitter introduces itself.
const GENERATED: &[&str] = &["out", "extents", "size_out", "pos", "simplicial"];

/// Emits `void name(double* out, const double* A, ..., const int* extents)`.
///
/// `extents` lists the statement variables in `nest.vars` order. Inputs
/// appear in the order of `nest.inputs`.
pub fn emit_c(nest: &LoopNest, name: &str) -> Result<String> {
    check_names(nest, name)?;
    let mut e = Emitter {
        nest,
        names: BTreeMap::new(),
        needs_helper: false,
        body: String::new(),
    };
    e.nodes(&nest.body, &mut Vec::new(), 1);

    let mut out = String::new();
    header(&mut out, nest);
    if e.needs_helper {
        out.push_str(HELPER);
    }
    let params = nest
        .inputs
        .iter()
        .map(|s| format!("const double* {}", s.name))
        .collect::<Vec<_>>();
    let _ = write!(out, "void {name}(double* out, ");
    for p in &params {
        let _ = write!(out, "{p}, ");
    }
    out.push_str("const int* extents)\n{\n");
    for (n, v) in nest.vars.iter().enumerate() {
        let _ = writeln!(out, "    const long N_{v} = extents[{n}];");
    }
    let size = e.size_expr(&nest.output);
    let _ = writeln!(out, "    const long size_out = {size};");
    out.push_str(
        "    for (long pos = 0; pos < size_out; pos++) {\n        out[pos] = 0.0;\n    }\n",
    );
    out.push_str(&e.body);
    out.push_str("}\n");
    Ok(out)
}

const HELPER: &str = "\
static long simplicial(long d, long n)
{
    long r = 1;
    for (long k = 1; k <= d; k++) {
        r = r * (n + k - 1) / k;
    }
    return d == 0 ? 1 : r;
}

";

fn check_names(nest: &LoopNest, name: &str) -> Result<()> {
    let valid = |s: &str| {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    };
    if !valid(name) || C_KEYWORDS.contains(&name) || GENERATED.contains(&name) {
        return Err(Error::Emit(format!(
            "`{name}` is not a usable function name"
        )));
    }
    let tensors = nest.inputs.iter().map(|s| s.name.as_str());
    let vars = nest.vars.iter().map(IndexVar::as_str);
    let mut seen = vec![name];
    for user in tensors.chain(vars) {
        let clash = C_KEYWORDS.contains(&user)
            || GENERATED.contains(&user)
            || user.starts_with("N_")
            || user.starts_with("p_")
            || seen.contains(&user);
        if clash {
            return Err(Error::Emit(format!(
                "identifier `{user}` collides with another name in the kernel"
            )));
        }
        seen.push(user);
    }
    Ok(())
}

fn header(out: &mut String, nest: &LoopNest) {
    let _ = writeln!(out, "/*");
    let _ = writeln!(out, " * {}", nest.stmt);
    let _ = writeln!(out, " * gcs: {}", nest.gcs);
    let _ = writeln!(out, " *");
    let _ = writeln!(
        out,
        " * Packed layouts: one double per canonical coordinate (non-increasing"
    );
    let _ = writeln!(
        out,
        " * within each symmetry part). `storage` lists the original dimensions"
    );
    let _ = writeln!(out, " * in the order their coordinates are flattened.");
    let describe = |param: &str, sig: &TensorSignature| {
        let perm = sig
            .dim_parts()
            .concat()
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let vars = sig
            .index_vars
            .iter()
            .map(IndexVar::as_str)
            .collect::<Vec<_>>()
            .join(",");
        format!(
            " *   {param:<6} {}[{vars}]  symmetry {}  storage ({perm})",
            sig.name, sig.symmetry
        )
    };
    let _ = writeln!(out, "{}", describe("out", &nest.output));
    for s in &nest.inputs {
        let _ = writeln!(out, "{}", describe(&s.name, s));
    }
    let _ = writeln!(out, " *");
    let order = nest
        .vars
        .iter()
        .map(IndexVar::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    let _ = writeln!(out, " * extents[] = {{ {order} }}");
    let _ = writeln!(out, " */");
    out.push('\n');
}

/// Text of `s_d(x)` for an identifier `x`, plus whether it is a single
/// operand.
fn simplicial_text(d: usize, x: &str, needs_helper: &mut bool) -> (String, bool) {
    match d {
        0 => ("1".to_string(), true),
        1 => (x.to_string(), true),
        2 => (format!("{x}*({x}+1)/2"), false),
        3 => (format!("(long){x}*({x}+1)*({x}+2)/6"), false),
        4 => (format!("(long){x}*({x}+1)*({x}+2)*({x}+3)/24"), false),
        _ => {
            *needs_helper = true;
            (format!("simplicial({d}, {x})"), true)
        }
    }
}

fn paren((text, atomic): (String, bool)) -> String {
    if atomic {
        text
    } else {
        format!("({text})")
    }
}

struct Emitter<'a> {
    nest: &'a LoopNest,
    /// Partial key to local name.
    names: BTreeMap<String, String>,
    needs_helper: bool,
    body: String,
}

impl<'a> Emitter<'a> {
    fn sig(&self, tensor: &str) -> &'a TensorSignature {
        let nest = self.nest;
        if tensor == nest.output.name {
            &nest.output
        } else {
            find_signature(&nest.inputs, tensor).expect("input signature")
        }
    }

    fn param(&self, tensor: &str) -> String {
        if tensor == self.nest.output.name {
            "out".to_string()
        } else {
            tensor.to_string()
        }
    }

    fn local_name(&mut self, tensor: &str, key: &str, prefix: &[Step]) -> String {
        if let Some(n) = self.names.get(key) {
            return n.clone();
        }
        let mut base = format!("p_{tensor}");
        for s in prefix {
            base.push('_');
            base.push_str(s.var.as_str());
        }
        let mut name = base.clone();
        let mut n = 2;
        while self.names.values().any(|v| v == &name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.names.insert(key.to_string(), name.clone());
        name
    }

    /// `s_p(N)` for the part of `sig` a step belongs to.
    fn part_count(&mut self, sig: &TensorSignature, step: &Step) -> (String, bool) {
        let dim = sig.dim_parts()[step.part][0];
        let n = format!("N_{}", sig.index_vars[dim]);
        simplicial_text(step.part_len, &n, &mut self.needs_helper)
    }

    fn size_expr(&mut self, sig: &TensorSignature) -> String {
        let parts = sig.dim_parts();
        if parts.is_empty() {
            return "1".to_string();
        }
        let factors = parts
            .iter()
            .map(|dims| {
                let n = format!("N_{}", sig.index_vars[dims[0]]);
                simplicial_text(dims.len(), &n, &mut self.needs_helper)
            })
            .collect::<Vec<_>>();
        if factors.len() == 1 {
            return factors.into_iter().next().unwrap().0;
        }
        factors.into_iter().map(paren).collect::<Vec<_>>().join("*")
    }

    /// Applies one recurrence step to `prev`.
    fn step_expr(
        &mut self,
        sig: &TensorSignature,
        prev: Option<(String, bool)>,
        step: &Step,
    ) -> (String, bool) {
        let d = step.part_len - step.within;
        let term = simplicial_text(d, step.var.as_str(), &mut self.needs_helper);
        match prev {
            None => term,
            Some(prev) if step.within == 0 => {
                let count = self.part_count(sig, step);
                (
                    format!("{}*{} + {}", paren(prev), paren(count), term.0),
                    false,
                )
            }
            Some(prev) => (format!("{} + {}", prev.0, term.0), false),
        }
    }

    /// Offset expression of an access at the statement, reusing hoisted
    /// partials.
    fn offset(&mut self, tensor: &str, vars: &[IndexVar]) -> String {
        let sig = self.sig(tensor);
        let steps = access_steps(sig, vars);
        if steps.is_empty() {
            return "0".to_string();
        }
        let last = steps.len() - 1;
        let prev = self.prefix_value(tensor, sig, &steps[..last]);
        self.step_expr(sig, prev, &steps[last]).0
    }

    /// Value of a prefix: a hoisted local for two or more steps, an inline
    /// expression for one.
    fn prefix_value(
        &mut self,
        tensor: &str,
        sig: &TensorSignature,
        prefix: &[Step],
    ) -> Option<(String, bool)> {
        match prefix.len() {
            0 => None,
            1 => Some(self.step_expr(sig, None, &prefix[0])),
            _ => {
                let key = partial_key(tensor, prefix);
                Some((self.local_name(tensor, &key, prefix), true))
            }
        }
    }

    fn nodes(&mut self, nodes: &[Node], bound: &mut Vec<IndexVar>, depth: usize) {
        for n in nodes {
            match n {
                Node::Loop(l) => self.loop_node(l, bound, depth),
                Node::Stmt(s) => self.statement(s, depth),
            }
        }
    }

    fn loop_node(&mut self, l: &LoopNode, bound: &mut Vec<IndexVar>, depth: usize) {
        let pad = "    ".repeat(depth);
        let v = &l.var;
        let lo = lower_text(&l.lower);
        let hi = upper_text(&l.upper);
        let _ = writeln!(self.body, "{pad}for (int {v} = {lo}; {v} {hi}; {v}++) {{");
        bound.push(v.clone());
        let nest = self.nest;
        let plan = hoisted(&l.body, bound, |t| {
            if t == nest.output.name {
                &nest.output
            } else {
                find_signature(&nest.inputs, t).expect("input signature")
            }
        });
        for p in plan {
            // Single steps are cheap enough to inline, and full offsets are
            // written at the statement itself.
            let len = p.prefix.len();
            if len < 2 || len == p.full {
                continue;
            }
            let sig = self.sig(&p.tensor);
            let prev = self.prefix_value(&p.tensor, sig, &p.prefix[..len - 1]);
            let value = self.step_expr(sig, prev, p.step()).0;
            let name = self.local_name(&p.tensor, &p.key, &p.prefix);
            let _ = writeln!(self.body, "{pad}    const long {name} = {value};");
        }
        self.nodes(&l.body, bound, depth + 1);
        bound.pop();
        let _ = writeln!(self.body, "{pad}}}");
    }

    fn statement(&mut self, s: &StatementNode, depth: usize) {
        let pad = "    ".repeat(depth);
        let out = self.offset(&s.output.tensor, &s.output.vars);
        let terms = s
            .terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .map(|a| {
                        let off = self.offset(&a.tensor, &a.vars);
                        format!("{}[{off}]", self.param(&a.tensor))
                    })
                    .collect::<Vec<_>>()
                    .join(" * ")
            })
            .collect::<Vec<_>>()
            .join(" + ");
        let op = if s.accumulate { "+=" } else { "=" };
        let _ = writeln!(self.body, "{pad}out[{out}] {op} {terms};");
    }
}

fn lower_text(b: &Bound) -> String {
    let base = match &b.kind {
        BoundKind::Zero => "0".to_string(),
        BoundKind::Extent(v) => format!("N_{v}"),
        BoundKind::Var(v) => v.to_string(),
    };
    match (&b.kind, b.strict) {
        (_, false) => base,
        (BoundKind::Zero, true) => "1".to_string(),
        (_, true) => format!("{base} + 1"),
    }
}

fn upper_text(b: &Bound) -> String {
    let base = match &b.kind {
        BoundKind::Zero => "0".to_string(),
        BoundKind::Extent(v) => format!("N_{v}"),
        BoundKind::Var(v) => v.to_string(),
    };
    if b.strict {
        format!("< {base}")
    } else {
        format!("<= {base}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Problem;
    use crate::loopgen::generate;

    fn emit(expr: &str, sym: &str) -> String {
        let p = Problem::uniform(expr, sym, 3).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        emit_c(&nest, "kernel").unwrap()
    }

    #[test]
    fn symmetric_add_uses_triangular_offsets() {
        let c = emit("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}; B: {i,j}");
        assert!(c.contains("for (int j = 0; j <= i; j++) {"), "{c}");
        assert!(c.contains("A[i*(i+1)/2 + j]"), "{c}");
        assert!(c.contains(
            "void kernel(double* out, const double* A, const double* B, const int* extents)"
        ));
    }

    #[test]
    fn non_symmetric_offsets_are_row_major() {
        let c = emit("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}");
        assert!(c.contains("B[i*N_j + j]"), "{c}");
        assert!(c.contains("B[j*N_i + i]") || c.contains("B[i*N_j + j]"));
        assert!(c.contains("for (int j = i + 1; j < N_j; j++) {"), "{c}");
    }

    #[test]
    fn partials_are_hoisted() {
        let c = emit("C[i,j,k] = A[i,j,k] + B[i,j,k]", "A: {i,j,k}");
        assert!(c.contains("const long p_B_i_j = i*N_j + j;"), "{c}");
        assert!(c.contains("B[p_B_i_j*N_k + k]"), "{c}");
        assert!(c.contains("i*(i+1)*(i+2)/6"), "{c}");
    }

    #[test]
    fn large_parts_use_the_helper() {
        let c = emit("C[i,j,k,l,m] = A[i,j,k,l,m]", "A: {i,j,k,l,m}");
        assert!(c.contains("static long simplicial(long d, long n)"));
        assert!(c.contains("simplicial(5, i)"));
    }

    #[test]
    fn deterministic() {
        let a = emit("C[i,l] = A[i,j,k] * B[k,j,l]", "A: {i,j}{k}; B: {k,j}{l}");
        let b = emit("C[i,l] = A[i,j,k] * B[k,j,l]", "A: {i,j}{k}; B: {k,j}{l}");
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_colliding_names() {
        let p = Problem::uniform("C[i,j] = out[i,j]", "", 2).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        assert!(matches!(emit_c(&nest, "kernel"), Err(Error::Emit(_))));
        let p = Problem::uniform("C[i] = A[i]", "", 2).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        assert!(matches!(emit_c(&nest, "for"), Err(Error::Emit(_))));
    }
}
