mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use symtensor::exec::execute_instrumented;
use symtensor::loopgen::generate;
use symtensor::oracle::random_symmetric;
use symtensor::storage::{pack, position, unpack};
use symtensor::symmetry::{refine, vars};
use symtensor::{
    IndexVar, PackedLayout, PackedTensor, Problem, SymmetryPartition, TensorSignature,
};

use common::*;

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// A signature over up to four dimensions with a random symmetry.
fn signature() -> impl Strategy<Value = TensorSignature> {
    (1..=4usize).prop_flat_map(|order| {
        let partitions = set_partitions(order);
        (0..partitions.len(), 1..=4usize).prop_map(move |(k, n)| {
            let parts = partitions[k]
                .iter()
                .map(|b| b.iter().map(|&d| IndexVar::new(NAMES[d])).collect())
                .collect();
            TensorSignature::new("T", vars(&NAMES[..order]), Some(vec![n; order]), parts).unwrap()
        })
    })
}

fn partition_of(universe: &[IndexVar], labels: &[u8]) -> SymmetryPartition {
    let mut parts: BTreeMap<u8, Vec<IndexVar>> = BTreeMap::new();
    for (v, l) in universe.iter().zip(labels) {
        parts.entry(*l).or_default().push(v.clone());
    }
    SymmetryPartition::new(universe.to_vec(), parts.into_values().collect()).unwrap()
}

const FIXTURES: &[(&str, &str)] = &[
    ("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}"),
    ("C[i,k] = A[i,j] * B[j,k]", "A: {i,j}; B: {j,k}"),
    ("C[i,j,k] = A[i,j,k] + B[i,j,k]", "A: {i,j}{k}; B: {i,j,k}"),
    ("C[i,l] = A[i,j,k] * B[j,k,l]", "A: {i}{j,k}; B: {j,k}{l}"),
    ("C[i,l] = A[i,j,k] * B[k,j,l]", "A: {i,j}{k}; B: {k,j}{l}"),
    ("y[i] = A[i,j,k] * x[j] * x[k] + b[i]", "A: {i,j,k}"),
    ("C[i,j] = A[i,k] * A[j,k]", ""),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pack_unpack_round_trip(sig in signature(), seed in any::<u64>()) {
        let t = random_symmetric::<i64>(&sig, seed).unwrap();
        let dense = unpack(&t);
        let again = pack(&dense, &sig).unwrap();
        prop_assert_eq!(again.values(), t.values());
        prop_assert_eq!(expand(&t).into_values().collect::<Vec<_>>(), dense.values);
    }

    #[test]
    fn canonicalize_is_idempotent_and_orbit_invariant(sig in signature(), raw in prop::collection::vec(0..4usize, 4)) {
        let layout = PackedLayout::new(&sig).unwrap();
        let n = layout.extents()[0];
        let c = raw[..layout.order()].iter().map(|x| x % n).collect::<Vec<_>>();
        let canon = layout.canonicalize(&c);
        prop_assert!(layout.is_canonical(&canon));
        prop_assert_eq!(layout.canonicalize(&canon), canon.clone());
        let blocks = blocks_of(&PackedTensor::<i64>::zeros(layout.clone()));
        prop_assert_eq!(&canon, &orbit_rep(&c, &blocks));
        prop_assert!(position(&canon, &layout).unwrap() < layout.total_size());
    }

    #[test]
    fn refinement_laws(a in prop::collection::vec(0..3u8, 5), b in prop::collection::vec(0..3u8, 5)) {
        let u = vars(&["i", "j", "k", "l", "m"]);
        let s1 = partition_of(&u, &a);
        let s2 = partition_of(&u, &b);
        let r = refine(&s1, &s2);
        prop_assert!(r.is_refinement_of(&s1));
        prop_assert!(r.is_refinement_of(&s2));
        prop_assert_eq!(refine(&s1, &s1), s1.clone());
        prop_assert_eq!(refine(&s1, &SymmetryPartition::full(u.clone())), s1.clone());
        prop_assert_eq!(refine(&s2, &s1), r.clone());
        for x in &u {
            for y in &u {
                prop_assert_eq!(r.same_part(x, y), s1.same_part(x, y) && s2.same_part(x, y));
            }
        }
    }

    #[test]
    fn generated_code_matches_naive_evaluation(
        k in 0..FIXTURES.len(),
        extent in 1..=5usize,
        seed in any::<u64>(),
    ) {
        let (expr, sym) = FIXTURES[k];
        let p = Problem::uniform(expr, sym, extent).unwrap();
        let nest = generate(&p.stmt, &p.inputs).unwrap();
        let inputs = p
            .inputs
            .iter()
            .map(|s| (s.name.clone(), random_symmetric::<i64>(s, seed).unwrap()))
            .collect::<BTreeMap<_, _>>();
        let (out, counts) = execute_instrumented(&nest, &inputs, &p.extents).unwrap();
        if let Err(e) = check_against_oracle(&p, &inputs, &out, &counts) {
            return Err(TestCaseError::fail(format!("{expr} [{sym}] n={extent}: {e}")));
        }
    }
}
