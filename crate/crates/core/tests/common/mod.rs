//! Test-side oracles written without the library's indexing formulas.
#![allow(dead_code)]

use std::collections::BTreeMap;

use symtensor::exec::WriteCounts;
use symtensor::expr::TensorStatement;
use symtensor::{IndexVar, PackedTensor, Problem};

/// Pascal-triangle table of simplicial numbers: `t[d][n] = s_d(n)`.
pub fn simplicial_table(max_d: usize, max_n: usize) -> Vec<Vec<u128>> {
    let mut t = vec![vec![0u128; max_n + 1]; max_d + 1];
    t[0].iter_mut().for_each(|x| *x = 1);
    for d in 1..=max_d {
        for n in 1..=max_n {
            t[d][n] = t[d][n - 1] + t[d - 1][n];
        }
    }
    t
}

/// Every set partition of `0..n`, as lists of blocks.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn go(k: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if k == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(k);
            go(k + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![k]);
        go(k + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), &mut out);
    out
}

/// Every coordinate of the box, row-major.
pub fn box_coords(extents: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in extents {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..n).map(move |x| {
                    let mut c = c.clone();
                    c.push(x);
                    c
                })
            })
            .collect();
    }
    out
}

/// Dimension blocks of a tensor, each block sorted, blocks ordered by
/// their smallest dimension.
pub fn blocks_of(t: &PackedTensor<i64>) -> Vec<Vec<usize>> {
    let l = t.layout();
    let names = l.index_vars();
    let mut blocks = l
        .symmetry()
        .parts()
        .iter()
        .map(|p| {
            let mut b = p
                .iter()
                .map(|v| names.iter().position(|u| u == v).unwrap())
                .collect::<Vec<_>>();
            b.sort();
            b
        })
        .collect::<Vec<_>>();
    blocks.sort();
    blocks
}

pub fn is_canonical(c: &[usize], blocks: &[Vec<usize>]) -> bool {
    blocks
        .iter()
        .all(|b| b.windows(2).all(|w| c[w[0]] >= c[w[1]]))
}

/// Canonical coordinates in packed order: lexicographic over the
/// coordinates read block by block.
pub fn canonical_in_packed_order(extents: &[usize], blocks: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut all = box_coords(extents)
        .into_iter()
        .filter(|c| is_canonical(c, blocks))
        .collect::<Vec<_>>();
    let key = |c: &Vec<usize>| blocks.iter().flatten().map(|&d| c[d]).collect::<Vec<_>>();
    all.sort_by_key(key);
    all
}

/// Representative of `c`'s orbit: each block sorted non-increasing.
pub fn orbit_rep(c: &[usize], blocks: &[Vec<usize>]) -> Vec<usize> {
    let mut out = c.to_vec();
    for b in blocks {
        let mut vals = b.iter().map(|&d| c[d]).collect::<Vec<_>>();
        vals.sort_by(|a, b| b.cmp(a));
        for (&d, v) in b.iter().zip(vals) {
            out[d] = v;
        }
    }
    out
}

/// Full dense map of a packed tensor, computed by ranking.
pub fn expand(t: &PackedTensor<i64>) -> BTreeMap<Vec<usize>, i64> {
    let extents = t.layout().extents().to_vec();
    let blocks = blocks_of(t);
    let order = canonical_in_packed_order(&extents, &blocks);
    assert_eq!(order.len(), t.values().len(), "packed size");
    let rank = order
        .iter()
        .cloned()
        .zip(t.values().iter().copied())
        .collect::<BTreeMap<_, _>>();
    box_coords(&extents)
        .into_iter()
        .map(|c| {
            let v = rank[&orbit_rep(&c, &blocks)];
            (c, v)
        })
        .collect()
}

/// Naive evaluation over the full index box.
pub fn einsum(
    stmt: &TensorStatement,
    dense: &BTreeMap<String, BTreeMap<Vec<usize>, i64>>,
    extents: &BTreeMap<IndexVar, usize>,
) -> BTreeMap<Vec<usize>, i64> {
    let out_ext = stmt
        .output
        .vars
        .iter()
        .map(|v| extents[v])
        .collect::<Vec<_>>();
    let mut out = box_coords(&out_ext)
        .into_iter()
        .map(|c| (c, 0i64))
        .collect::<BTreeMap<_, _>>();
    for term in &stmt.terms {
        let mut vars: Vec<IndexVar> = Vec::new();
        for a in &term.factors {
            for v in &a.vars {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        let sizes = vars.iter().map(|v| extents[v]).collect::<Vec<_>>();
        for at in box_coords(&sizes) {
            let val = |vs: &[IndexVar]| {
                vs.iter()
                    .map(|v| at[vars.iter().position(|u| u == v).unwrap()])
                    .collect::<Vec<_>>()
            };
            let product = term
                .factors
                .iter()
                .map(|a| dense[&a.tensor][&val(&a.vars)])
                .product::<i64>();
            *out.get_mut(&val(&stmt.output.vars)).unwrap() += product;
        }
    }
    out
}

/// Number of assignments to the variables of term `t` that are not output
/// variables.
pub fn reduction_domain(p: &Problem, t: usize) -> usize {
    let out = &p.stmt.output.vars;
    let mut seen: Vec<&IndexVar> = Vec::new();
    for a in &p.stmt.terms[t].factors {
        for v in &a.vars {
            if !out.contains(v) && !seen.contains(&v) {
                seen.push(v);
            }
        }
    }
    seen.iter().map(|v| p.extents[*v]).product()
}

/// Checks pipeline output and write counts against the naive oracle.
/// Returns a description of the first problem found.
pub fn check_against_oracle(
    p: &Problem,
    inputs: &BTreeMap<String, PackedTensor<i64>>,
    out: &PackedTensor<i64>,
    counts: &WriteCounts,
) -> Result<(), String> {
    let dense = inputs
        .iter()
        .map(|(k, v)| (k.clone(), expand(v)))
        .collect::<BTreeMap<_, _>>();
    let want = einsum(&p.stmt, &dense, &p.extents);
    let got = expand(out);
    if got != want {
        let bad = want.iter().find(|(c, v)| got.get(*c) != Some(v)).unwrap();
        return Err(format!(
            "value mismatch at {:?}: pipeline {:?}, oracle {}",
            bad.0,
            got.get(bad.0),
            bad.1
        ));
    }
    let blocks = blocks_of(out);
    let canon = canonical_in_packed_order(out.layout().extents(), &blocks);
    if counts.len() != canon.len() {
        return Err(format!(
            "write counts cover {} coordinates, expected {}",
            counts.len(),
            canon.len()
        ));
    }
    for c in canon {
        for t in 0..p.stmt.terms.len() {
            let expected = reduction_domain(p, t);
            let found = counts.get(&c).map_or(0, |v| v[t]);
            if found != expected {
                return Err(format!(
                    "term {t} written {found} times at {c:?}, expected {expected}"
                ));
            }
        }
    }
    Ok(())
}

/// Whether a dense map is invariant under swapping any two output
/// variables that share a part.
pub fn has_symmetry(dense: &BTreeMap<Vec<usize>, i64>, blocks: &[Vec<usize>]) -> bool {
    dense
        .iter()
        .all(|(c, v)| dense[&orbit_rep(c, blocks)] == *v)
}
