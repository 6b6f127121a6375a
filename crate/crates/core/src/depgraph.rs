//! Index dependency graph.
//!
//! Each edge `child -> parent` says that the loop for `child` must be split
//! according to its value relative to `parent`. Parents always precede
//! their children in iteration order, so the graph is a forest of in-trees
//! and every variable has at most one parent.

use std::fmt;

use crate::error::{Error, Result};
use crate::symmetry::{IndexVar, SymmetryPartition};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexDependencyGraph {
    vars: Vec<IndexVar>,
    parent: Vec<Option<usize>>,
}

impl IndexDependencyGraph {
    pub fn vars(&self) -> &[IndexVar] {
        &self.vars
    }

    fn index(&self, v: &IndexVar) -> usize {
        self.vars
            .iter()
            .position(|u| u == v)
            .unwrap_or_else(|| panic!("`{v}` is not a graph variable"))
    }

    pub fn parent(&self, v: &IndexVar) -> Option<&IndexVar> {
        self.parent[self.index(v)].map(|p| &self.vars[p])
    }

    /// `(child, parent)` pairs in child iteration order.
    pub fn edges(&self) -> Vec<(IndexVar, IndexVar)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (self.vars[c].clone(), self.vars[p].clone())))
            .collect()
    }

    /// Ancestors of `v`, nearest first.
    pub fn ancestors(&self, v: &IndexVar) -> Vec<IndexVar> {
        let mut out = Vec::new();
        let mut cur = self.parent[self.index(v)];
        while let Some(p) = cur {
            out.push(self.vars[p].clone());
            cur = self.parent[p];
        }
        out
    }

    fn is_ancestor(&self, anc: usize, of: usize) -> bool {
        let mut cur = self.parent[of];
        while let Some(p) = cur {
            if p == anc {
                return true;
            }
            cur = self.parent[p];
        }
        false
    }

    /// Links `a` and `b` onto one parent chain.
    ///
    /// If the later variable already has a different parent, it keeps the
    /// later of the two candidates and the earlier one is linked further up
    /// that chain, so the displaced ancestor ends up above the new parent.
    fn link(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (child, cand) = if a > b { (a, b) } else { (b, a) };
        if self.is_ancestor(cand, child) {
            return;
        }
        match self.parent[child] {
            None => self.parent[child] = Some(cand),
            Some(old) => {
                let (later, earlier) = if old > cand { (old, cand) } else { (cand, old) };
                self.parent[child] = Some(later);
                self.link(later, earlier);
            }
        }
    }
}

impl fmt::Display for IndexDependencyGraph {
    /// One `child -> parent` line per edge.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, p) in self.edges() {
            writeln!(f, "{c} -> {p}")?;
        }
        Ok(())
    }
}

/// Builds the graph from the input symmetries.
///
/// Every part (members sorted into iteration order) contributes an edge from
/// each member to its predecessor. Parts are processed in the order given,
/// tensor by tensor.
pub fn build_dependency_graph(
    vars: &[IndexVar],
    input_syms: &[SymmetryPartition],
) -> IndexDependencyGraph {
    let mut g = IndexDependencyGraph {
        vars: vars.to_vec(),
        parent: vec![None; vars.len()],
    };
    for sym in input_syms {
        for part in sym.parts() {
            let mut members = part.iter().map(|v| g.index(v)).collect::<Vec<_>>();
            members.sort_unstable();
            for w in members.windows(2) {
                g.link(w[1], w[0]);
            }
        }
    }
    g
}

/// True iff one of `a`, `b` is an ancestor of the other.
pub fn transitive_order_known(g: &IndexDependencyGraph, a: &IndexVar, b: &IndexVar) -> bool {
    let (ia, ib) = (g.index(a), g.index(b));
    g.is_ancestor(ia, ib) || g.is_ancestor(ib, ia)
}

/// Checks that every pair of variables sharing an input symmetry part ended
/// up on a common chain.
pub fn check_symmetric_pairs_ordered(
    g: &IndexDependencyGraph,
    input_syms: &[SymmetryPartition],
) -> Result<()> {
    for sym in input_syms {
        for part in sym.parts() {
            for (n, a) in part.iter().enumerate() {
                for b in &part[n + 1..] {
                    if !transitive_order_known(g, a, b) {
                        return Err(Error::GraphInvariant {
                            a: a.to_string(),
                            b: b.to_string(),
                        });
                    }
                }
            }
        }
    }
    Ok(())
}
