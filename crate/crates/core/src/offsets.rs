//! Packed-offset recurrences shared by the interpreter and the C emitter.
//!
//! An access is lowered to one step per dimension in storage order. Each
//! prefix of those steps is a partial offset; a partial is computed inside
//! the loop that binds the innermost of its variables and reused below it.

use crate::ir::{Node, StatementNode};
use crate::symmetry::{IndexVar, TensorSignature};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Step {
    pub var: IndexVar,
    /// Part index in storage order.
    pub part: usize,
    /// Position of the dimension inside its part.
    pub within: usize,
    pub part_len: usize,
}

pub(crate) fn access_steps(sig: &TensorSignature, vars: &[IndexVar]) -> Vec<Step> {
    sig.dim_parts()
        .iter()
        .enumerate()
        .flat_map(|(part, dims)| {
            let part_len = dims.len();
            dims.iter().enumerate().map(move |(within, &d)| Step {
                var: vars[d].clone(),
                part,
                within,
                part_len,
            })
        })
        .collect()
}

/// `A[i,j]` for the partial of `A` after the steps binding `i` then `j`.
pub(crate) fn partial_key(tensor: &str, prefix: &[Step]) -> String {
    let vars = prefix.iter().map(|s| s.var.as_str()).collect::<Vec<_>>();
    format!("{tensor}[{}]", vars.join(","))
}

#[derive(Debug, Clone)]
pub(crate) struct Partial {
    pub tensor: String,
    pub key: String,
    /// Key of the partial this one extends.
    pub prev: Option<String>,
    /// The covered steps; the last one is the step this partial adds.
    pub prefix: Vec<Step>,
    /// Total steps of the access.
    pub full: usize,
}

impl Partial {
    pub fn step(&self) -> &Step {
        self.prefix
            .last()
            .expect("partials cover at least one step")
    }
}

fn statements<'a>(nodes: &'a [Node], out: &mut Vec<&'a StatementNode>) {
    for n in nodes {
        match n {
            Node::Loop(l) => statements(&l.body, out),
            Node::Stmt(s) => out.push(s),
        }
    }
}

/// Partials that become computable once `bound.last()` is bound, for every
/// access of every statement in `body`. Listed so that each partial follows
/// the one it extends.
pub(crate) fn hoisted<'s>(
    body: &[Node],
    bound: &[IndexVar],
    sig_of: impl Fn(&str) -> &'s TensorSignature,
) -> Vec<Partial> {
    let Some(innermost) = bound.last() else {
        return Vec::new();
    };
    let mut stmts = Vec::new();
    statements(body, &mut stmts);
    let mut out: Vec<Partial> = Vec::new();
    for s in stmts {
        let accesses = std::iter::once(&s.output).chain(s.terms.iter().flat_map(|t| &t.factors));
        for a in accesses {
            let steps = access_steps(sig_of(&a.tensor), &a.vars);
            for len in 1..=steps.len() {
                let prefix = &steps[..len];
                if !prefix.iter().all(|st| bound.contains(&st.var)) {
                    break;
                }
                if !prefix.iter().any(|st| &st.var == innermost) {
                    continue;
                }
                let key = partial_key(&a.tensor, prefix);
                if out.iter().any(|p| p.key == key) {
                    continue;
                }
                out.push(Partial {
                    tensor: a.tensor.clone(),
                    prev: (len > 1).then(|| partial_key(&a.tensor, &prefix[..len - 1])),
                    prefix: prefix.to_vec(),
                    key,
                    full: steps.len(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Problem;
    use crate::loopgen::generate;
    use crate::symmetry::vars;

    #[test]
    fn steps_follow_storage_order() {
        let sig = TensorSignature::new("A", vars(&["i", "j", "k"]), None, vec![vars(&["i", "k"])])
            .unwrap();
        let steps = access_steps(&sig, &vars(&["a", "b", "c"]));
        let order = steps.iter().map(|s| s.var.as_str()).collect::<Vec<_>>();
        assert_eq!(order, ["a", "c", "b"]);
        assert_eq!(
            (steps[1].part, steps[1].within, steps[1].part_len),
            (0, 1, 2)
        );
        assert_eq!((steps[2].part, steps[2].within), (1, 0));
        assert_eq!(partial_key("A", &steps[..2]), "A[a,c]");
    }

    #[test]
    fn partials_wait_for_their_innermost_variable() {
        let p = Problem::uniform("C[i,j,k] = A[i,j,k] + B[i,j,k]", "A: {i,j,k}", 3).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let sig_of = |name: &str| {
            if name == "C" {
                &nest.output
            } else {
                p.inputs.iter().find(|s| s.name == name).unwrap()
            }
        };
        let at_i = hoisted(&nest.body, &vars(&["i"]), sig_of);
        assert!(at_i.iter().all(|p| p.prefix.len() == 1));
        let at_j = hoisted(&nest.body, &vars(&["i", "j"]), sig_of);
        assert!(at_j
            .iter()
            .all(|p| p.prefix.iter().any(|s| s.var.as_str() == "j")));
        assert!(at_j.iter().any(|p| p.key == "B[i,j]"));
    }
}
