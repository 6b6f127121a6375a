//! Output-oriented loop generation.
//!
//! Pipeline: greatest common symmetry, dependency graph, ordering tree,
//! one loop per ordering node with bounds taken from the node's neighbours,
//! canonical rewriting of every access at the leaves, then fusion of
//! adjacent loops whose bodies coincide.

use std::collections::BTreeSet;

use crate::depgraph::{
    build_dependency_graph, check_symmetric_pairs_ordered, IndexDependencyGraph,
};
use crate::error::{Error, Result};
use crate::expr::{Access, TensorStatement};
use crate::ir::{Bound, BoundKind, LoopNest, LoopNode, Node, StatementNode, TermNode};
use crate::ordering::{build_ordering_tree, OrderingNode, OrderingTree, Region};
use crate::symmetry::{
    check_var_extents, find_signature, gcs, output_symmetry, IndexVar, SymmetryPartition,
    TensorSignature,
};

/// Builds the merged loop nest for `stmt`.
pub fn generate(stmt: &TensorStatement, sigs: &[TensorSignature]) -> Result<LoopNest> {
    let nest = generate_unmerged(stmt, sigs)?;
    Ok(merge_redundant(nest))
}

/// As [`generate`] but without the fusion pass.
pub fn generate_unmerged(stmt: &TensorStatement, sigs: &[TensorSignature]) -> Result<LoopNest> {
    let g = gcs(stmt, sigs)?;
    let out_sym = output_symmetry(stmt, &g);
    let var_extents = check_var_extents(stmt, sigs)?;
    let out_extents = stmt
        .output
        .vars
        .iter()
        .map(|v| var_extents.get(v).copied())
        .collect::<Option<Vec<_>>>();
    let output = TensorSignature {
        name: stmt.output.tensor.clone(),
        index_vars: stmt.output.vars.clone(),
        extents: out_extents,
        symmetry: out_sym,
    };

    let mut body = Vec::new();
    let groups = term_groups(stmt, sigs, &g)?;
    let multiple = groups.len() > 1;
    for group in &groups {
        let accumulate = multiple
            || group
                .terms
                .iter()
                .any(|&t| !stmt.reduction_vars(t).is_empty());
        let ctx = StatementContext {
            stmt,
            sigs,
            output: &output,
            members: &group.terms,
            accumulate,
        };
        let mut path = Vec::new();
        for root in &group.tree.roots {
            body.push(lower_node(root, &ctx, &mut path)?);
        }
    }

    Ok(LoopNest {
        stmt: stmt.clone(),
        inputs: sigs.to_vec(),
        output,
        gcs: g,
        vars: stmt.vars(),
        body,
    })
}

/// Terms sharing one variable set, with the dependency graph and ordering
/// tree their loops are generated from.
#[derive(Debug, Clone)]
pub struct TermGroup {
    pub terms: Vec<usize>,
    /// Variables of the group in iteration order.
    pub vars: Vec<IndexVar>,
    pub graph: IndexDependencyGraph,
    pub tree: OrderingTree,
}

/// Groups the terms of `stmt` by variable set. Each group gets its own
/// nest so a term sums over exactly its own reduction domain. Ordering
/// trees are pruned by the output-side parts of `g`.
pub fn term_groups(
    stmt: &TensorStatement,
    sigs: &[TensorSignature],
    g: &SymmetryPartition,
) -> Result<Vec<TermGroup>> {
    let vars = stmt.vars();
    let prune = g.restrict(&stmt.output.vars);
    let mut keys: Vec<(BTreeSet<IndexVar>, Vec<usize>)> = Vec::new();
    for (n, term) in stmt.terms.iter().enumerate() {
        let key = term.vars().into_iter().collect::<BTreeSet<_>>();
        match keys.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(n),
            None => keys.push((key, vec![n])),
        }
    }
    keys.into_iter()
        .map(|(key, terms)| {
            let group_vars = vars
                .iter()
                .filter(|v| key.contains(v))
                .cloned()
                .collect::<Vec<_>>();
            let input_syms = terms
                .iter()
                .flat_map(|&t| stmt.terms[t].factors.iter())
                .map(|a| Ok(find_signature(sigs, &a.tensor)?.access_symmetry(a)))
                .collect::<Result<Vec<_>>>()?;
            let graph = build_dependency_graph(&group_vars, &input_syms);
            check_symmetric_pairs_ordered(&graph, &input_syms)?;
            let tree = build_ordering_tree(&graph, &prune);
            Ok(TermGroup {
                terms,
                vars: group_vars,
                graph,
                tree,
            })
        })
        .collect()
}

struct StatementContext<'a> {
    stmt: &'a TensorStatement,
    sigs: &'a [TensorSignature],
    output: &'a TensorSignature,
    members: &'a [usize],
    accumulate: bool,
}

fn lower_node(
    node: &OrderingNode,
    ctx: &StatementContext<'_>,
    path: &mut Vec<crate::ordering::Ordering>,
) -> Result<Node> {
    let ordering = &node.ordering;
    let (pred, succ) = ordering.neighbours();
    let lower = pred.map_or_else(Bound::zero, Bound::above);
    let upper = succ.map_or_else(|| Bound::extent(&ordering.focus), Bound::at_most);
    path.push(ordering.clone());
    let body = if node.children.is_empty() {
        let region = Region {
            orderings: path.clone(),
        };
        vec![Node::Stmt(statement_for(&region, ctx)?)]
    } else {
        node.children
            .iter()
            .map(|c| lower_node(c, ctx, path))
            .collect::<Result<Vec<_>>>()?
    };
    path.pop();
    Ok(Node::Loop(LoopNode {
        var: ordering.focus.clone(),
        lower,
        upper,
        body,
    }))
}

fn statement_for(region: &Region, ctx: &StatementContext<'_>) -> Result<StatementNode> {
    let output = rewrite_access(&ctx.stmt.output, region, ctx.output)?;
    let terms = ctx
        .members
        .iter()
        .map(|&t| {
            let factors = ctx.stmt.terms[t]
                .factors
                .iter()
                .map(|a| rewrite_access(a, region, find_signature(ctx.sigs, &a.tensor)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(TermNode { index: t, factors })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StatementNode {
        output,
        accumulate: ctx.accumulate,
        terms,
        regions: vec![region.clone()],
    })
}

/// Permutes the variables inside each symmetry part of `access` so that
/// their values are non-increasing throughout `region`.
pub fn rewrite_access(access: &Access, region: &Region, sig: &TensorSignature) -> Result<Access> {
    let mut vars = access.vars.clone();
    for part in sig.dim_parts() {
        if part.len() < 2 {
            continue;
        }
        // Insertion sort, largest value first.
        let mut sorted: Vec<IndexVar> = Vec::with_capacity(part.len());
        for &d in &part {
            let v = &access.vars[d];
            let mut at = sorted.len();
            for (n, w) in sorted.iter().enumerate() {
                match region.at_least(v, w) {
                    Some(true) => {
                        at = n;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        return Err(Error::UnorderedPair {
                            access: access.to_string(),
                            a: v.to_string(),
                            b: w.to_string(),
                        })
                    }
                }
            }
            sorted.insert(at, v.clone());
        }
        for (&d, v) in part.iter().zip(sorted) {
            vars[d] = v;
        }
    }
    Ok(Access {
        tensor: access.tensor.clone(),
        vars,
        span: access.span,
    })
}

/// Fuses adjacent sibling loops over the same variable whose bodies are
/// identical and whose ranges touch, repeating until nothing changes.
pub fn merge_redundant(mut nest: LoopNest) -> LoopNest {
    loop {
        let (body, changed) = merge_nodes(std::mem::take(&mut nest.body));
        nest.body = body;
        if !changed {
            return nest;
        }
    }
}

fn merge_nodes(nodes: Vec<Node>) -> (Vec<Node>, bool) {
    let mut changed = false;
    let mut out: Vec<Node> = Vec::with_capacity(nodes.len());
    for node in nodes {
        let node = match node {
            Node::Loop(mut l) => {
                let (body, c) = merge_nodes(std::mem::take(&mut l.body));
                l.body = body;
                changed |= c;
                Node::Loop(l)
            }
            s => s,
        };
        if let (Some(Node::Loop(prev)), Node::Loop(next)) = (out.last_mut(), &node) {
            if prev.var == next.var
                && contiguous(&prev.upper, &next.lower)
                && prev.body == next.body
            {
                prev.upper = next.upper.clone();
                absorb_regions(&mut prev.body, &next.body);
                changed = true;
                continue;
            }
        }
        out.push(node);
    }
    (out, changed)
}

/// `..= x` followed by `x <..` (or `..< x` then `x ..`).
fn contiguous(upper: &Bound, lower: &Bound) -> bool {
    match (&upper.kind, &lower.kind) {
        (BoundKind::Var(a), BoundKind::Var(b)) => a == b && upper.strict != lower.strict,
        _ => false,
    }
}

fn absorb_regions(into: &mut [Node], from: &[Node]) {
    for (a, b) in into.iter_mut().zip(from) {
        match (a, b) {
            (Node::Loop(x), Node::Loop(y)) => absorb_regions(&mut x.body, &y.body),
            (Node::Stmt(x), Node::Stmt(y)) => x.regions.extend(y.regions.iter().cloned()),
            _ => unreachable!("bodies compared equal"),
        }
    }
}
