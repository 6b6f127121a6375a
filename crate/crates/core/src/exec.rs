//! Loop-nest interpreter over packed tensors.
//!
//! Offsets are evaluated with the incremental recurrence, each partial
//! computed once per iteration of the loop that binds its last variable.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ir::{Bound, BoundKind, LoopNest, Node, StatementNode};
use crate::offsets::{access_steps, hoisted, partial_key};
use crate::storage::{canonical_coords_iter, PackedLayout, PackedTensor, Scalar};
use crate::symmetry::{find_signature, IndexVar, TensorSignature};

/// Accumulations per canonical output coordinate, one count per term.
pub type WriteCounts = BTreeMap<Vec<usize>, Vec<usize>>;

pub fn execute<T: Scalar>(
    nest: &LoopNest,
    inputs: &BTreeMap<String, PackedTensor<T>>,
    extents: &BTreeMap<IndexVar, usize>,
) -> Result<PackedTensor<T>> {
    run(nest, inputs, extents, false).map(|(t, _)| t)
}

pub fn execute_instrumented<T: Scalar>(
    nest: &LoopNest,
    inputs: &BTreeMap<String, PackedTensor<T>>,
    extents: &BTreeMap<IndexVar, usize>,
) -> Result<(PackedTensor<T>, WriteCounts)> {
    let (out, counts) = run(nest, inputs, extents, true)?;
    let terms = nest.stmt.terms.len();
    let layout = out.layout();
    let map = canonical_coords_iter(layout)
        .enumerate()
        .map(|(pos, c)| (c, counts[pos * terms..(pos + 1) * terms].to_vec()))
        .collect();
    Ok((out, map))
}

/// Sized layout of the nest's output.
pub fn output_layout(nest: &LoopNest, extents: &BTreeMap<IndexVar, usize>) -> Result<PackedLayout> {
    let sizes = var_sizes(&nest.output.index_vars, extents)?;
    PackedLayout::new(&nest.output.clone().with_extents(sizes)?)
}

fn var_sizes(vars: &[IndexVar], extents: &BTreeMap<IndexVar, usize>) -> Result<Vec<usize>> {
    vars.iter()
        .map(|v| {
            extents
                .get(v)
                .copied()
                .ok_or_else(|| Error::MissingExtent(v.to_string()))
        })
        .collect()
}

/// Checks that a supplied input tensor has the shape and symmetry the nest
/// was generated for.
pub fn check_input<T: Scalar>(
    sig: &TensorSignature,
    tensor: &PackedTensor<T>,
    extents: &BTreeMap<IndexVar, usize>,
) -> Result<()> {
    let expected = var_sizes(&sig.index_vars, extents)?;
    let layout = tensor.layout();
    let mismatch = |reason: String| Error::InputMismatch {
        tensor: sig.name.clone(),
        reason,
    };
    if layout.extents() != expected.as_slice() {
        return Err(mismatch(format!(
            "extents {:?}, expected {expected:?}",
            layout.extents()
        )));
    }
    if layout.symmetry().position_parts() != sig.dim_parts() {
        return Err(mismatch(format!(
            "symmetry {} does not match declared {}",
            layout.symmetry(),
            sig.symmetry
        )));
    }
    Ok(())
}

struct Access {
    tensor: usize,
    slots: Vec<usize>,
    /// Partial holding the full offset; `None` for order-0 tensors.
    offset: Option<usize>,
    text: String,
}

struct Stmt {
    output: Access,
    accumulate: bool,
    terms: Vec<(usize, Vec<Access>)>,
}

/// One hoisted step of the offset recurrence.
struct PartialOp {
    dst: usize,
    prev: Option<usize>,
    layout: usize,
    slot: usize,
    part: usize,
    within: usize,
}

enum Compiled {
    Loop {
        slot: usize,
        lower: (Base, bool),
        upper: (Base, bool),
        partials: Vec<PartialOp>,
        body: Vec<Compiled>,
    },
    Stmt(Stmt),
}

#[derive(Clone, Copy)]
enum Base {
    Zero,
    Const(usize),
    Slot(usize),
}

struct Program {
    nodes: Vec<Compiled>,
    layouts: Vec<PackedLayout>,
    partial_count: usize,
}

fn slot_of(nest: &LoopNest, v: &IndexVar) -> usize {
    nest.vars
        .iter()
        .position(|u| u == v)
        .expect("loop variable")
}

struct Compiler<'a> {
    nest: &'a LoopNest,
    sizes: Vec<usize>,
    ids: BTreeMap<String, usize>,
}

impl<'a> Compiler<'a> {
    fn tensor_index(&self, name: &str) -> usize {
        if name == self.nest.output.name {
            return self.nest.inputs.len();
        }
        self.nest
            .inputs
            .iter()
            .position(|s| s.name == name)
            .expect("statement inputs have signatures")
    }

    fn sig(&self, name: &str) -> &'a TensorSignature {
        let nest = self.nest;
        if name == nest.output.name {
            &nest.output
        } else {
            &nest.inputs[self.tensor_index(name)]
        }
    }

    fn id(&mut self, name: String) -> usize {
        let next = self.ids.len();
        *self.ids.entry(name).or_insert(next)
    }

    fn base(&self, b: &Bound) -> Base {
        match &b.kind {
            BoundKind::Zero => Base::Zero,
            BoundKind::Extent(v) => Base::Const(self.sizes[slot_of(self.nest, v)]),
            BoundKind::Var(v) => Base::Slot(slot_of(self.nest, v)),
        }
    }

    fn access(&mut self, a: &crate::expr::Access) -> Access {
        let steps = access_steps(self.sig(&a.tensor), &a.vars);
        let offset = (!steps.is_empty()).then(|| self.id(partial_key(&a.tensor, &steps)));
        Access {
            tensor: self.tensor_index(&a.tensor),
            slots: a.vars.iter().map(|v| slot_of(self.nest, v)).collect(),
            offset,
            text: a.to_string(),
        }
    }

    fn statement(&mut self, s: &StatementNode) -> Stmt {
        Stmt {
            output: self.access(&s.output),
            accumulate: s.accumulate,
            terms: s
                .terms
                .iter()
                .map(|t| (t.index, t.factors.iter().map(|a| self.access(a)).collect()))
                .collect(),
        }
    }

    fn nodes(&mut self, nodes: &[Node], bound: &mut Vec<IndexVar>) -> Vec<Compiled> {
        nodes.iter().map(|n| self.node(n, bound)).collect()
    }

    fn node(&mut self, n: &Node, bound: &mut Vec<IndexVar>) -> Compiled {
        match n {
            Node::Loop(l) => {
                bound.push(l.var.clone());
                let nest = self.nest;
                let plan = hoisted(&l.body, bound, |name| {
                    if name == nest.output.name {
                        &nest.output
                    } else {
                        find_signature(&nest.inputs, name).expect("input signature")
                    }
                });
                let partials = plan
                    .into_iter()
                    .map(|p| PartialOp {
                        dst: self.id(p.key.clone()),
                        prev: p.prev.clone().map(|q| self.id(q)),
                        layout: self.tensor_index(&p.tensor),
                        slot: slot_of(nest, &p.step().var),
                        part: p.step().part,
                        within: p.step().within,
                    })
                    .collect();
                let body = self.nodes(&l.body, bound);
                bound.pop();
                Compiled::Loop {
                    slot: slot_of(nest, &l.var),
                    lower: (self.base(&l.lower), l.lower.strict),
                    upper: (self.base(&l.upper), l.upper.strict),
                    partials,
                    body,
                }
            }
            Node::Stmt(s) => Compiled::Stmt(self.statement(s)),
        }
    }
}

fn compile(
    nest: &LoopNest,
    extents: &BTreeMap<IndexVar, usize>,
    inputs: &[&PackedLayout],
) -> Result<Program> {
    let mut compiler = Compiler {
        nest,
        sizes: var_sizes(&nest.vars, extents)?,
        ids: BTreeMap::new(),
    };
    let nodes = compiler.nodes(&nest.body, &mut Vec::new());
    let mut layouts = inputs.iter().map(|l| (*l).clone()).collect::<Vec<_>>();
    layouts.push(output_layout(nest, extents)?);
    Ok(Program {
        nodes,
        layouts,
        partial_count: compiler.ids.len(),
    })
}

fn run<T: Scalar>(
    nest: &LoopNest,
    inputs: &BTreeMap<String, PackedTensor<T>>,
    extents: &BTreeMap<IndexVar, usize>,
    instrument: bool,
) -> Result<(PackedTensor<T>, Vec<usize>)> {
    let mut tensors = Vec::with_capacity(nest.inputs.len());
    for sig in &nest.inputs {
        let t = inputs
            .get(&sig.name)
            .ok_or_else(|| Error::MissingInput(sig.name.clone()))?;
        check_input(sig, t, extents)?;
        tensors.push(t);
    }
    let layouts = tensors.iter().map(|t| t.layout()).collect::<Vec<_>>();
    let program = compile(nest, extents, &layouts)?;
    let out_layout = program.layouts.last().unwrap().clone();
    let terms = nest.stmt.terms.len();
    let mut state = State {
        program: &program,
        inputs: tensors.iter().map(|t| t.values()).collect(),
        counts: if instrument {
            vec![0; out_layout.total_size() * terms]
        } else {
            Vec::new()
        },
        out: PackedTensor::zeros(out_layout),
        terms,
        env: vec![0; nest.vars.len()],
        partials: vec![0; program.partial_count],
        coords: Vec::new(),
    };
    for node in &program.nodes {
        state.exec(node)?;
    }
    Ok((state.out, state.counts))
}

struct State<'a, T> {
    program: &'a Program,
    inputs: Vec<&'a [T]>,
    out: PackedTensor<T>,
    counts: Vec<usize>,
    terms: usize,
    env: Vec<usize>,
    partials: Vec<usize>,
    coords: Vec<usize>,
}

impl<T: Scalar> State<'_, T> {
    fn base(&self, b: Base) -> usize {
        match b {
            Base::Zero => 0,
            Base::Const(n) => n,
            Base::Slot(s) => self.env[s],
        }
    }

    fn exec(&mut self, node: &Compiled) -> Result<()> {
        match node {
            Compiled::Loop {
                slot,
                lower,
                upper,
                partials,
                body,
            } => {
                let start = self.base(lower.0) + usize::from(lower.1);
                let end = self.base(upper.0) + usize::from(!upper.1);
                for value in start..end {
                    self.env[*slot] = value;
                    for op in partials {
                        self.partial(op);
                    }
                    for child in body {
                        self.exec(child)?;
                    }
                }
                Ok(())
            }
            Compiled::Stmt(s) => self.statement(s),
        }
    }

    fn partial(&mut self, op: &PartialOp) {
        let layout = &self.program.layouts[op.layout];
        let term = layout.step_term(op.part, op.within, self.env[op.slot]);
        let prev = op.prev.map_or(0, |p| self.partials[p]);
        self.partials[op.dst] = if op.within == 0 {
            prev * layout.part_count(op.part) + term
        } else {
            prev + term
        };
    }

    fn offset(&mut self, a: &Access) -> Result<usize> {
        let layout = &self.program.layouts[a.tensor];
        self.coords.clear();
        self.coords.extend(a.slots.iter().map(|&s| self.env[s]));
        if !layout.is_canonical(&self.coords) {
            return Err(Error::NonCanonicalRead {
                access: a.text.clone(),
                coords: self.coords.clone(),
            });
        }
        let at = a.offset.map_or(0, |id| self.partials[id]);
        debug_assert_eq!(at, layout.offset_unchecked(&self.coords));
        Ok(at)
    }

    fn statement(&mut self, s: &Stmt) -> Result<()> {
        let mut value = T::ZERO;
        for (_, factors) in &s.terms {
            let mut product: Option<T> = None;
            for a in factors {
                let at = self.offset(a)?;
                let x = self.inputs[a.tensor][at];
                product = Some(match product {
                    None => x,
                    Some(p) => p * x,
                });
            }
            value += product.unwrap_or(T::ZERO);
        }
        let at = self.offset(&s.output)?;
        let slot = &mut self.out.values_mut()[at];
        if s.accumulate {
            *slot += value;
        } else {
            *slot = value;
        }
        if !self.counts.is_empty() {
            for (term, _) in &s.terms {
                self.counts[at * self.terms + term] += 1;
            }
        }
        Ok(())
    }
}

/// Calls `f` with the loop-variable values (in `nest.vars` order) for every
/// statement execution, without touching any tensor data.
pub fn for_each_iteration(
    nest: &LoopNest,
    extents: &BTreeMap<IndexVar, usize>,
    mut f: impl FnMut(&StatementNode, &[usize]),
) -> Result<()> {
    let sizes = var_sizes(&nest.vars, extents)?;
    fn walk(
        nodes: &[Node],
        nest: &LoopNest,
        sizes: &[usize],
        env: &mut Vec<usize>,
        f: &mut dyn FnMut(&StatementNode, &[usize]),
    ) {
        for n in nodes {
            match n {
                Node::Loop(l) => {
                    let base = |b: &Bound, env: &[usize]| match &b.kind {
                        BoundKind::Zero => 0,
                        BoundKind::Extent(v) => sizes[slot_of(nest, v)],
                        BoundKind::Var(v) => env[slot_of(nest, v)],
                    };
                    let start = base(&l.lower, env) + usize::from(l.lower.strict);
                    let end = base(&l.upper, env) + usize::from(!l.upper.strict);
                    let slot = slot_of(nest, &l.var);
                    for value in start..end {
                        env[slot] = value;
                        walk(&l.body, nest, sizes, env, f);
                    }
                }
                Node::Stmt(s) => f(s, env),
            }
        }
    }
    let mut env = vec![0; nest.vars.len()];
    walk(&nest.body, nest, &sizes, &mut env, &mut f);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Problem;
    use crate::loopgen::generate;
    use crate::storage::{pack, DenseTensor};

    fn example_matrix() -> DenseTensor<i64> {
        DenseTensor::new(vec![3, 3], vec![1, 2, 4, 2, 3, 5, 4, 5, 6]).unwrap()
    }

    #[test]
    fn doubling_symmetric_matrix() {
        let p = Problem::uniform("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}; B: {i,j}", 3).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let m = pack(&example_matrix(), &p.inputs[0]).unwrap();
        let inputs = BTreeMap::from([("A".to_string(), m.clone()), ("B".to_string(), m)]);
        let (out, counts) = execute_instrumented(&nest, &inputs, &p.extents).unwrap();
        assert_eq!(out.values(), &[2, 4, 6, 8, 10, 12]);
        assert!(counts.values().all(|c| c == &vec![1, 1]));
        assert_eq!(counts.len(), 6);
    }

    #[test]
    fn symmetric_matvec_first_column() {
        let p = Problem::uniform("y[i] = A[i,j] * x[j]", "A: {i,j}", 3).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let a = pack(&example_matrix(), &p.inputs[0]).unwrap();
        let x = pack(
            &DenseTensor::new(vec![3], vec![1, 0, 0]).unwrap(),
            &p.inputs[1],
        )
        .unwrap();
        let inputs = BTreeMap::from([("A".to_string(), a), ("x".to_string(), x)]);
        let y = execute(&nest, &inputs, &p.extents).unwrap();
        assert_eq!(y.values(), &[1, 2, 4]);
    }

    #[test]
    fn contraction_write_counts() {
        let p = Problem::uniform("C[i,l] = A[i,j,k] * B[j,k,l]", "A: {i}{j,k}", 3).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let inputs = p
            .inputs
            .iter()
            .map(|s| {
                let layout = PackedLayout::new(s).unwrap();
                (s.name.clone(), PackedTensor::<i64>::zeros(layout))
            })
            .collect::<BTreeMap<_, _>>();
        let (out, counts) = execute_instrumented(&nest, &inputs, &p.extents).unwrap();
        assert!(out.values().iter().all(|&v| v == 0));
        assert_eq!(counts.len(), 9);
        assert!(counts.values().all(|c| c == &vec![9]));
    }

    #[test]
    fn zero_extent_runs_nothing() {
        let p = Problem::uniform("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}", 0).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let inputs = p
            .inputs
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    PackedTensor::<i64>::zeros(PackedLayout::new(s).unwrap()),
                )
            })
            .collect::<BTreeMap<_, _>>();
        let (out, counts) = execute_instrumented(&nest, &inputs, &p.extents).unwrap();
        assert!(out.values().is_empty());
        assert!(counts.is_empty());
    }

    #[test]
    fn missing_or_mismatched_inputs() {
        let p = Problem::uniform("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}", 2).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let a = PackedTensor::<i64>::zeros(PackedLayout::new(&p.inputs[0]).unwrap());
        let inputs = BTreeMap::from([("A".to_string(), a.clone())]);
        assert!(matches!(
            execute(&nest, &inputs, &p.extents),
            Err(Error::MissingInput(_))
        ));
        // A symmetric tensor supplied where B (non-symmetric) is expected.
        let inputs = BTreeMap::from([("A".to_string(), a.clone()), ("B".to_string(), a)]);
        assert!(matches!(
            execute(&nest, &inputs, &p.extents),
            Err(Error::InputMismatch { .. })
        ));
    }

    #[test]
    fn non_canonical_read_is_caught() {
        use crate::ir::Node;
        let p = Problem::uniform("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}", 3).unwrap();
        let mut nest = generate(&p.stmt, &p.inputs).unwrap();
        // Undo the rewrite in the j > i region.
        fn strip(nodes: &mut [Node]) {
            for n in nodes {
                match n {
                    Node::Loop(l) => strip(&mut l.body),
                    Node::Stmt(s) => {
                        for t in &mut s.terms {
                            for a in &mut t.factors {
                                a.vars.sort();
                            }
                        }
                    }
                }
            }
        }
        strip(&mut nest.body);
        let inputs = p
            .inputs
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    PackedTensor::<i64>::zeros(PackedLayout::new(s).unwrap()),
                )
            })
            .collect::<BTreeMap<_, _>>();
        match execute(&nest, &inputs, &p.extents) {
            Err(Error::NonCanonicalRead { access, coords }) => {
                assert_eq!(access, "A[i,j]");
                assert_eq!(coords, vec![0, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
