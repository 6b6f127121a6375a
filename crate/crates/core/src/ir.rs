//! Loop-nest IR shared by the interpreter and the emitters.

use std::fmt::{self, Write as _};

use crate::expr::{Access, TensorStatement};
use crate::ordering::Region;
use crate::symmetry::{IndexVar, SymmetryPartition, TensorSignature};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Zero,
    /// Extent of the named variable.
    Extent(IndexVar),
    Var(IndexVar),
}

/// One side of a loop range. A strict bound excludes its value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bound {
    pub kind: BoundKind,
    pub strict: bool,
}

impl Bound {
    pub fn zero() -> Self {
        Bound {
            kind: BoundKind::Zero,
            strict: false,
        }
    }

    pub fn extent(v: &IndexVar) -> Self {
        Bound {
            kind: BoundKind::Extent(v.clone()),
            strict: true,
        }
    }

    /// `v > p`
    pub fn above(p: &IndexVar) -> Self {
        Bound {
            kind: BoundKind::Var(p.clone()),
            strict: true,
        }
    }

    /// `v <= s`
    pub fn at_most(s: &IndexVar) -> Self {
        Bound {
            kind: BoundKind::Var(s.clone()),
            strict: false,
        }
    }

    pub fn var(&self) -> Option<&IndexVar> {
        match &self.kind {
            BoundKind::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopNode {
    pub var: IndexVar,
    pub lower: Bound,
    pub upper: Bound,
    pub body: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Loop(LoopNode),
    Stmt(StatementNode),
}

/// One product inside a statement; `index` is the term's position in the
/// source statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermNode {
    pub index: usize,
    pub factors: Vec<Access>,
}

/// `out (+)= sum of products` with every access already canonical for the
/// enclosing region.
#[derive(Debug, Clone)]
pub struct StatementNode {
    pub output: Access,
    pub accumulate: bool,
    pub terms: Vec<TermNode>,
    /// Regions this statement was generated for (several after merging).
    pub regions: Vec<Region>,
}

// Regions are provenance; two statements are the same code if they read and
// write the same things.
impl PartialEq for StatementNode {
    fn eq(&self, other: &Self) -> bool {
        self.output == other.output
            && self.accumulate == other.accumulate
            && self.terms == other.terms
    }
}

impl Eq for StatementNode {}

impl fmt::Display for StatementNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.accumulate { "+=" } else { "=" };
        write!(f, "{} {op} ", self.output)?;
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                f.write_str(" + ")?;
            }
            for (m, a) in t.factors.iter().enumerate() {
                if m > 0 {
                    f.write_str(" * ")?;
                }
                write!(f, "{a}")?;
            }
        }
        Ok(())
    }
}

/// A complete generated kernel.
#[derive(Debug, Clone)]
pub struct LoopNest {
    pub stmt: TensorStatement,
    pub inputs: Vec<TensorSignature>,
    /// Output signature carrying the derived output symmetry.
    pub output: TensorSignature,
    pub gcs: SymmetryPartition,
    /// All statement variables in iteration order.
    pub vars: Vec<IndexVar>,
    pub body: Vec<Node>,
}

impl LoopNest {
    pub fn statements(&self) -> Vec<&StatementNode> {
        fn walk<'a>(nodes: &'a [Node], out: &mut Vec<&'a StatementNode>) {
            for n in nodes {
                match n {
                    Node::Loop(l) => walk(&l.body, out),
                    Node::Stmt(s) => out.push(s),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.body, &mut out);
        out
    }

    pub fn loop_count(&self) -> usize {
        fn walk(nodes: &[Node]) -> usize {
            nodes
                .iter()
                .map(|n| match n {
                    Node::Loop(l) => 1 + walk(&l.body),
                    Node::Stmt(_) => 0,
                })
                .sum()
        }
        walk(&self.body)
    }

    /// Pseudocode listing: one `for` line per loop, statements indented
    /// beneath.
    pub fn pseudocode(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.stmt);
        let _ = writeln!(out, "# gcs: {}", self.gcs);
        let _ = writeln!(
            out,
            "# output symmetry: {}{}",
            self.output.name, self.output.symmetry
        );
        let _ = writeln!(out, "{} = 0", self.output.name);
        write_nodes(&mut out, &self.body, 0);
        out
    }
}

impl fmt::Display for LoopNest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pseudocode())
    }
}

fn write_nodes(out: &mut String, nodes: &[Node], depth: usize) {
    let pad = "  ".repeat(depth);
    for n in nodes {
        match n {
            Node::Loop(l) => {
                let _ = writeln!(out, "{pad}for {}", range_text(l));
                write_nodes(out, &l.body, depth + 1);
            }
            Node::Stmt(s) => {
                let _ = writeln!(out, "{pad}{s}");
            }
        }
    }
}

/// `i`, `j <= i`, `k > j`, `j < k <= i`, ...
pub fn range_text(l: &LoopNode) -> String {
    let v = &l.var;
    let lower = match (&l.lower.kind, l.lower.strict) {
        (BoundKind::Zero, false) => None,
        (BoundKind::Zero, true) => Some("0 <".to_string()),
        (BoundKind::Var(p), true) => Some(format!("{p} <")),
        (BoundKind::Var(p), false) => Some(format!("{p} <=")),
        (BoundKind::Extent(e), s) => Some(format!("N_{e} {}", if s { "<" } else { "<=" })),
    };
    let upper = match (&l.upper.kind, l.upper.strict) {
        (BoundKind::Extent(e), true) if e == v => None,
        (BoundKind::Extent(e), s) => Some(format!("{} N_{e}", if s { "<" } else { "<=" })),
        (BoundKind::Var(s), false) => Some(format!("<= {s}")),
        (BoundKind::Var(s), true) => Some(format!("< {s}")),
        (BoundKind::Zero, s) => Some(format!("{} 0", if s { "<" } else { "<=" })),
    };
    match (lower, upper) {
        (None, None) => v.to_string(),
        (None, Some(u)) => format!("{v} {u}"),
        // Written from the variable's side: `k > j`.
        (Some(_), None) => {
            let p = l
                .lower
                .var()
                .map(|p| p.to_string())
                .unwrap_or_else(|| "0".into());
            let op = if l.lower.strict { ">" } else { ">=" };
            format!("{v} {op} {p}")
        }
        (Some(lo), Some(u)) => format!("{lo} {v} {u}"),
    }
}
