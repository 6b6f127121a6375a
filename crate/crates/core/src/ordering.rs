//! Ordering trees: the relative-order regions the loop nest must split on.
//!
//! Each level of the tree iterates one variable (in iteration order). A
//! node's ordering lists its variable together with the variable's
//! dependency-graph ancestors from smallest to largest value; `[j, i]`
//! is the region `j <= i` explored while iterating `j`.

use std::fmt::{self, Write as _};

use crate::depgraph::IndexDependencyGraph;
use crate::symmetry::{IndexVar, SymmetryPartition};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    /// Smallest value first.
    pub placed: Vec<IndexVar>,
    /// The variable this node iterates.
    pub focus: IndexVar,
}

impl Ordering {
    fn index(&self, v: &IndexVar) -> Option<usize> {
        self.placed.iter().position(|u| u == v)
    }

    /// Neighbours of the focus: `(predecessor, successor)`.
    pub fn neighbours(&self) -> (Option<&IndexVar>, Option<&IndexVar>) {
        let at = self.index(&self.focus).expect("focus is placed");
        let pred = at.checked_sub(1).map(|p| &self.placed[p]);
        (pred, self.placed.get(at + 1))
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (n, v) in self.placed.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingNode {
    pub ordering: Ordering,
    pub children: Vec<OrderingNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingTree {
    pub vars: Vec<IndexVar>,
    pub roots: Vec<OrderingNode>,
}

impl OrderingTree {
    pub fn node_count(&self) -> usize {
        fn count(n: &OrderingNode) -> usize {
            1 + n.children.iter().map(count).sum::<usize>()
        }
        self.roots.iter().map(count).sum()
    }

    /// Every root-to-leaf path.
    pub fn regions(&self) -> Vec<Region> {
        fn walk(n: &OrderingNode, path: &mut Vec<Ordering>, out: &mut Vec<Region>) {
            path.push(n.ordering.clone());
            if n.children.is_empty() {
                out.push(Region {
                    orderings: path.clone(),
                });
            }
            for c in &n.children {
                walk(c, path, out);
            }
            path.pop();
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut Vec::new(), &mut out);
        }
        out
    }

    /// Indented bracket listing, one node per line.
    pub fn listing(&self) -> String {
        fn walk(n: &OrderingNode, depth: usize, out: &mut String) {
            let _ = writeln!(out, "{}{}", "  ".repeat(depth), n.ordering);
            for c in &n.children {
                walk(c, depth + 1, out);
            }
        }
        let mut out = String::new();
        for r in &self.roots {
            walk(r, 0, &mut out);
        }
        out
    }
}

/// The orderings along one root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub orderings: Vec<Ordering>,
}

impl Region {
    fn ordering_of(&self, v: &IndexVar) -> Option<&Ordering> {
        self.orderings.iter().find(|o| &o.focus == v)
    }

    /// Whether `a` is known to be `>= b` throughout the region (`Some(true)`),
    /// `<= b` (`Some(false)`), or the two are unordered (`None`).
    pub fn at_least(&self, a: &IndexVar, b: &IndexVar) -> Option<bool> {
        if a == b {
            return Some(true);
        }
        for focus in [a, b] {
            if let Some(o) = self.ordering_of(focus) {
                if let (Some(x), Some(y)) = (o.index(a), o.index(b)) {
                    return Some(x > y);
                }
            }
        }
        None
    }

    /// Human-readable chain of the deepest ordering of each variable.
    pub fn describe(&self) -> String {
        self.orderings
            .iter()
            .map(|o| o.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Enumerates orderings level by level.
///
/// A variable with a parent is inserted at every position of the ordering
/// its parent has on the current path; a variable without a parent gets a
/// single unconstrained node. Orderings that put an earlier member of a
/// `prune` part strictly below a later member are skipped.
pub fn build_ordering_tree(g: &IndexDependencyGraph, prune: &SymmetryPartition) -> OrderingTree {
    let vars = g.vars().to_vec();
    let mut path = Vec::new();
    let roots = level(g, prune, &vars, 0, &mut path);
    OrderingTree { vars, roots }
}

fn level(
    g: &IndexDependencyGraph,
    prune: &SymmetryPartition,
    vars: &[IndexVar],
    m: usize,
    path: &mut Vec<Ordering>,
) -> Vec<OrderingNode> {
    let Some(v) = vars.get(m) else {
        return Vec::new();
    };
    let candidates = match g.parent(v) {
        None => vec![vec![v.clone()]],
        Some(p) => {
            let base = &path
                .iter()
                .find(|o| &o.focus == p)
                .expect("parent is iterated before its child")
                .placed;
            (0..=base.len())
                .map(|at| {
                    let mut placed = base.clone();
                    placed.insert(at, v.clone());
                    placed
                })
                .collect()
        }
    };
    let mut out = Vec::new();
    for placed in candidates {
        if !canonical_for(&placed, prune) {
            continue;
        }
        let ordering = Ordering {
            placed,
            focus: v.clone(),
        };
        path.push(ordering.clone());
        let children = level(g, prune, vars, m + 1, path);
        path.pop();
        out.push(OrderingNode { ordering, children });
    }
    out
}

fn canonical_for(placed: &[IndexVar], prune: &SymmetryPartition) -> bool {
    for (x, a) in placed.iter().enumerate() {
        for b in &placed[x + 1..] {
            // `a` sits strictly below `b`.
            if prune.same_part(a, b) && prune.position(a) < prune.position(b) {
                return false;
            }
        }
    }
    true
}
