//! Symmetry partitions and the partition algebra over index variables.
//!
//! A [`SymmetryPartition`] groups index variables into parts whose
//! coordinates may be permuted freely without changing a value. The same
//! type describes both a single tensor's declared symmetry and the symmetry
//! of a whole computation (its greatest common symmetry).

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Access, TensorStatement};

/// Name of an index variable (`i`, `j`, `l`, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexVar(String);

impl IndexVar {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(!name.is_empty());
        IndexVar(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IndexVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for IndexVar {
    fn from(s: &str) -> Self {
        IndexVar::new(s)
    }
}

/// Shorthand for building variable lists in tests and fixtures.
pub fn vars(names: &[&str]) -> Vec<IndexVar> {
    names.iter().map(|n| IndexVar::new(*n)).collect()
}

/// A partition of an ordered variable universe.
///
/// Normalized on construction: members of a part follow universe order and
/// parts are sorted by the position of their first member, so two
/// partitions over the same universe are equal iff they group the same
/// variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymmetryPartition {
    universe: Vec<IndexVar>,
    parts: Vec<Vec<IndexVar>>,
}

impl SymmetryPartition {
    /// Builds a partition from explicit parts. Variables of `universe` that
    /// are not mentioned become singleton parts.
    pub fn new(universe: Vec<IndexVar>, parts: Vec<Vec<IndexVar>>) -> Result<Self> {
        let position = positions(&universe);
        if position.len() != universe.len() {
            return Err(Error::InvalidLayout(format!(
                "duplicate variable in universe {universe:?}"
            )));
        }
        let mut owner: Vec<Option<usize>> = vec![None; universe.len()];
        for (p, part) in parts.iter().enumerate() {
            for v in part {
                let &pos = position.get(v).ok_or_else(|| {
                    Error::InvalidLayout(format!("`{v}` is not in the variable universe"))
                })?;
                if owner[pos].is_some() {
                    return Err(Error::InvalidLayout(format!(
                        "`{v}` appears in more than one part"
                    )));
                }
                owner[pos] = Some(p);
            }
        }
        let next = parts.len();
        let keys = owner
            .iter()
            .enumerate()
            .map(|(pos, o)| o.unwrap_or(next + pos))
            .collect::<Vec<_>>();
        Ok(Self::from_keys(universe, &keys))
    }

    /// Every variable in its own part.
    pub fn discrete(universe: Vec<IndexVar>) -> Self {
        let keys = (0..universe.len()).collect::<Vec<_>>();
        Self::from_keys(universe, &keys)
    }

    /// All variables in one part.
    pub fn full(universe: Vec<IndexVar>) -> Self {
        let keys = vec![0; universe.len()];
        Self::from_keys(universe, &keys)
    }

    /// Groups `universe[i]` by `keys[i]`; parts appear in first-member order.
    fn from_keys<K: Eq + std::hash::Hash + Clone>(universe: Vec<IndexVar>, keys: &[K]) -> Self {
        let mut slot: HashMap<K, usize> = HashMap::new();
        let mut parts: Vec<Vec<IndexVar>> = Vec::new();
        for (v, k) in universe.iter().zip(keys) {
            let idx = *slot.entry(k.clone()).or_insert_with(|| {
                parts.push(Vec::new());
                parts.len() - 1
            });
            parts[idx].push(v.clone());
        }
        SymmetryPartition { universe, parts }
    }

    pub fn universe(&self) -> &[IndexVar] {
        &self.universe
    }

    pub fn parts(&self) -> &[Vec<IndexVar>] {
        &self.parts
    }

    pub fn contains(&self, v: &IndexVar) -> bool {
        self.universe.contains(v)
    }

    /// Position of `v` in the universe order.
    pub fn position(&self, v: &IndexVar) -> Option<usize> {
        self.universe.iter().position(|u| u == v)
    }

    pub fn part_of(&self, v: &IndexVar) -> Option<usize> {
        self.parts.iter().position(|p| p.contains(v))
    }

    pub fn same_part(&self, a: &IndexVar, b: &IndexVar) -> bool {
        match (self.part_of(a), self.part_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// True if every part of `self` lies inside some part of `other`.
    pub fn is_refinement_of(&self, other: &SymmetryPartition) -> bool {
        self.parts.iter().all(|part| {
            let owner = other.part_of(&part[0]);
            owner.is_some() && part.iter().all(|v| other.part_of(v) == owner)
        })
    }

    /// Keeps only the variables in `keep`, preserving order and grouping.
    pub fn restrict(&self, keep: &[IndexVar]) -> SymmetryPartition {
        let universe = self
            .universe
            .iter()
            .filter(|v| keep.contains(v))
            .cloned()
            .collect::<Vec<_>>();
        let keys = universe
            .iter()
            .map(|v| self.part_of(v).unwrap())
            .collect::<Vec<_>>();
        Self::from_keys(universe, &keys)
    }

    /// Renames variables position-by-position (`from[i]` becomes `to[i]`).
    /// The universe order follows `to`.
    pub fn rename(&self, from: &[IndexVar], to: &[IndexVar]) -> SymmetryPartition {
        assert_eq!(from.len(), to.len());
        let keys = from
            .iter()
            .map(|v| self.part_of(v).expect("renamed variable outside universe"))
            .collect::<Vec<_>>();
        Self::from_keys(to.to_vec(), &keys)
    }

    /// Parts as lists of positions in the universe.
    pub fn position_parts(&self) -> Vec<Vec<usize>> {
        self.parts
            .iter()
            .map(|p| p.iter().map(|v| self.position(v).unwrap()).collect())
            .collect()
    }

    /// Number of parts.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl fmt::Display for SymmetryPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for part in &self.parts {
            f.write_str("{")?;
            for (n, v) in part.iter().enumerate() {
                if n > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

fn positions(universe: &[IndexVar]) -> HashMap<&IndexVar, usize> {
    universe.iter().enumerate().map(|(i, v)| (v, i)).collect()
}

/// `s1 / s2`: two variables of `s1` share a part iff they share a part of
/// `s1` and either share a part of `s2` or are both absent from it.
pub fn refine(s1: &SymmetryPartition, s2: &SymmetryPartition) -> SymmetryPartition {
    let keys = s1
        .universe
        .iter()
        .map(|v| (s1.part_of(v), s2.part_of(v)))
        .collect::<Vec<_>>();
    SymmetryPartition::from_keys(s1.universe.clone(), &keys)
}

/// A tensor's name, dimension variables, extents and declared symmetry.
///
/// Extents are optional so that symmetry-only analysis (`info`) works
/// before sizes are known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSignature {
    pub name: String,
    pub index_vars: Vec<IndexVar>,
    pub extents: Option<Vec<usize>>,
    pub symmetry: SymmetryPartition,
}

impl TensorSignature {
    pub fn new(
        name: impl Into<String>,
        index_vars: Vec<IndexVar>,
        extents: Option<Vec<usize>>,
        parts: Vec<Vec<IndexVar>>,
    ) -> Result<Self> {
        let name = name.into();
        for (n, v) in index_vars.iter().enumerate() {
            if index_vars[..n].contains(v) {
                return Err(Error::InvalidLayout(format!(
                    "`{v}` indexes tensor `{name}` twice"
                )));
            }
        }
        let mut listed: Vec<&IndexVar> = Vec::new();
        for v in parts.iter().flatten() {
            if !index_vars.contains(v) {
                return Err(Error::NotAnIndex {
                    tensor: name,
                    var: v.to_string(),
                });
            }
            if listed.contains(&v) {
                return Err(Error::DuplicatePartMember {
                    tensor: name,
                    var: v.to_string(),
                });
            }
            listed.push(v);
        }
        let symmetry = SymmetryPartition::new(index_vars.clone(), parts)?;
        let sig = TensorSignature {
            name,
            index_vars,
            extents,
            symmetry,
        };
        sig.check_extents()?;
        Ok(sig)
    }

    /// Signature with every dimension in its own part.
    pub fn non_symmetric(name: impl Into<String>, index_vars: Vec<IndexVar>) -> Self {
        TensorSignature {
            name: name.into(),
            symmetry: SymmetryPartition::discrete(index_vars.clone()),
            index_vars,
            extents: None,
        }
    }

    pub fn order(&self) -> usize {
        self.index_vars.len()
    }

    /// Attaches extents, checking that symmetric dimensions agree.
    pub fn with_extents(mut self, extents: Vec<usize>) -> Result<Self> {
        if extents.len() != self.order() {
            return Err(Error::CoordArity {
                expected: self.order(),
                found: extents.len(),
            });
        }
        self.extents = Some(extents);
        self.check_extents()?;
        Ok(self)
    }

    fn check_extents(&self) -> Result<()> {
        let Some(extents) = &self.extents else {
            return Ok(());
        };
        if extents.len() != self.order() {
            return Err(Error::CoordArity {
                expected: self.order(),
                found: extents.len(),
            });
        }
        for part in self.dim_parts() {
            let first = extents[part[0]];
            if let Some(&d) = part.iter().find(|&&d| extents[d] != first) {
                return Err(Error::UnequalPartExtents {
                    tensor: self.name.clone(),
                    first,
                    second: extents[d],
                });
            }
        }
        Ok(())
    }

    /// Symmetry parts as dimension positions.
    pub fn dim_parts(&self) -> Vec<Vec<usize>> {
        self.symmetry.position_parts()
    }

    /// The declared symmetry expressed over the variables of `access`.
    pub fn access_symmetry(&self, access: &Access) -> SymmetryPartition {
        self.symmetry.rename(&self.index_vars, &access.vars)
    }

    fn check_coords(&self, coords: &[usize]) -> Result<()> {
        if coords.len() != self.order() {
            return Err(Error::CoordArity {
                expected: self.order(),
                found: coords.len(),
            });
        }
        if let Some(extents) = &self.extents {
            for (dim, (&coord, &extent)) in coords.iter().zip(extents).enumerate() {
                if coord >= extent {
                    return Err(Error::OutOfBounds { dim, coord, extent });
                }
            }
        }
        Ok(())
    }
}

/// True iff coordinates are non-increasing within every symmetry part.
pub fn is_canonical(coords: &[usize], sig: &TensorSignature) -> Result<bool> {
    sig.check_coords(coords)?;
    Ok(first_non_canonical_part(coords, &sig.dim_parts()).is_none())
}

pub(crate) fn first_non_canonical_part(coords: &[usize], parts: &[Vec<usize>]) -> Option<usize> {
    parts
        .iter()
        .position(|part| part.windows(2).any(|w| coords[w[0]] < coords[w[1]]))
}

/// Sorts each part's coordinate values into non-increasing order.
pub fn canonicalize(coords: &[usize], sig: &TensorSignature) -> Result<Vec<usize>> {
    sig.check_coords(coords)?;
    Ok(canonicalize_parts(coords, &sig.dim_parts()))
}

pub(crate) fn canonicalize_parts(coords: &[usize], parts: &[Vec<usize>]) -> Vec<usize> {
    let mut out = coords.to_vec();
    for part in parts {
        let mut values = part.iter().map(|&d| coords[d]).collect::<Vec<_>>();
        values.sort_unstable_by(|a, b| b.cmp(a));
        for (&d, v) in part.iter().zip(values) {
            out[d] = v;
        }
    }
    out
}

/// Greatest common symmetry of a statement.
///
/// Starts from one part holding every statement variable and refines by
/// each input access's symmetry in statement order, then by the output
/// treated as fully symmetric over its own variables.
pub fn gcs(stmt: &TensorStatement, inputs: &[TensorSignature]) -> Result<SymmetryPartition> {
    let universe = stmt.vars();
    check_var_extents(stmt, inputs)?;
    let mut g = SymmetryPartition::full(universe);
    for access in stmt.input_accesses() {
        let sig = find_signature(inputs, &access.tensor)?;
        g = refine(&g, &sig.access_symmetry(access));
    }
    let out = SymmetryPartition::full(stmt.output.vars.clone());
    Ok(refine(&g, &out))
}

/// `{O} / gcs`, restricted to the output variables.
pub fn output_symmetry(stmt: &TensorStatement, g: &SymmetryPartition) -> SymmetryPartition {
    let out = SymmetryPartition::full(stmt.output.vars.clone());
    refine(&out, g)
}

pub(crate) fn find_signature<'a>(
    sigs: &'a [TensorSignature],
    name: &str,
) -> Result<&'a TensorSignature> {
    sigs.iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownTensor(name.to_string()))
}

/// Checks that every variable has one extent across all accesses.
pub fn check_var_extents(
    stmt: &TensorStatement,
    inputs: &[TensorSignature],
) -> Result<BTreeMap<IndexVar, usize>> {
    let mut seen: BTreeMap<IndexVar, usize> = BTreeMap::new();
    for access in stmt.input_accesses() {
        let sig = find_signature(inputs, &access.tensor)?;
        if sig.order() != access.vars.len() {
            return Err(Error::ArityMismatch {
                tensor: access.tensor.clone(),
                expected: sig.order(),
                found: access.vars.len(),
            });
        }
        let Some(extents) = &sig.extents else {
            continue;
        };
        for (v, &n) in access.vars.iter().zip(extents) {
            match seen.get(v) {
                Some(&prev) if prev != n => {
                    return Err(Error::InconsistentExtent {
                        var: v.to_string(),
                        first: prev,
                        second: n,
                    })
                }
                _ => {
                    seen.insert(v.clone(), n);
                }
            }
        }
    }
    Ok(seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_statement, parse_symmetries};

    fn partition(universe: &[&str], parts: &[&[&str]]) -> SymmetryPartition {
        SymmetryPartition::new(vars(universe), parts.iter().map(|p| vars(p)).collect()).unwrap()
    }

    fn sig3(parts: &[&[&str]]) -> TensorSignature {
        TensorSignature::new(
            "T",
            vars(&["i", "j", "k"]),
            Some(vec![4, 4, 4]),
            parts.iter().map(|p| vars(p)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn normalization_makes_equality_structural() {
        let a = partition(&["i", "j", "k"], &[&["k", "i"]]);
        let b = partition(&["i", "j", "k"], &[&["j"], &["i", "k"]]);
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "{i,k}{j}");
    }

    #[test]
    fn refinement_examples() {
        let u = ["i", "j", "k", "l", "m", "n"];
        let s1 = partition(&u, &[&["i", "j", "k", "l"], &["m", "n"]]);
        let s2 = partition(&["k", "l", "m", "n"], &[&["k", "l", "m", "n"]]);
        let expected = partition(&u, &[&["i", "j"], &["k", "l"], &["m", "n"]]);
        assert_eq!(refine(&s1, &s2), expected);
        assert_eq!(refine(&s1, &s1), s1);

        let sym = partition(&["i", "j"], &[&["i", "j"]]);
        let discrete = SymmetryPartition::discrete(vars(&["i", "j"]));
        assert_eq!(refine(&sym, &discrete), discrete);
    }

    #[test]
    fn canonical_predicate() {
        let t = sig3(&[&["j", "k"]]);
        assert!(is_canonical(&[3, 2, 1], &t).unwrap());
        assert!(is_canonical(&[1, 3, 2], &t).unwrap());
        assert!(!is_canonical(&[2, 1, 3], &t).unwrap());
        let m =
            TensorSignature::new("M", vars(&["i", "j"]), None, vec![vars(&["i", "j"])]).unwrap();
        assert!(is_canonical(&[5, 5], &m).unwrap());
    }

    #[test]
    fn canonicalize_examples() {
        let m =
            TensorSignature::new("M", vars(&["i", "j"]), None, vec![vars(&["i", "j"])]).unwrap();
        assert_eq!(canonicalize(&[1, 2], &m).unwrap(), vec![2, 1]);
        let t = sig3(&[&["j", "k"]]);
        assert_eq!(canonicalize(&[2, 1, 3], &t).unwrap(), vec![2, 3, 1]);
        assert_eq!(canonicalize(&[3, 2, 1], &t).unwrap(), vec![3, 2, 1]);
    }

    #[test]
    fn contract_violations() {
        let t = sig3(&[&["j", "k"]]);
        assert!(matches!(
            is_canonical(&[1, 2], &t),
            Err(Error::CoordArity { .. })
        ));
        assert!(matches!(
            canonicalize(&[0, 4, 0], &t),
            Err(Error::OutOfBounds { dim: 1, .. })
        ));
    }

    #[test]
    fn unequal_part_extents_rejected() {
        let err = TensorSignature::new(
            "A",
            vars(&["i", "j"]),
            Some(vec![3, 4]),
            vec![vars(&["i", "j"])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnequalPartExtents { .. }));
    }

    fn gcs_of(expr: &str, sym: &str) -> (TensorStatement, SymmetryPartition) {
        let stmt = parse_statement(expr).unwrap();
        let sigs = parse_symmetries(sym, &stmt).unwrap();
        let g = gcs(&stmt, &sigs).unwrap();
        (stmt, g)
    }

    #[test]
    fn gcs_examples() {
        let (stmt, g) = gcs_of("C[i,k] = A[i,j] * B[j,k]", "A: {i,j}; B: {j,k}");
        assert_eq!(g, SymmetryPartition::discrete(stmt.vars()));

        let (stmt, g) = gcs_of("C[i,l] = A[i,j,k] * B[j,k,l]", "A: {i}{j,k}; B: {j,k}{l}");
        assert_eq!(
            g,
            SymmetryPartition::new(stmt.vars(), vec![vars(&["j", "k"])]).unwrap()
        );
        assert_eq!(g.to_string(), "{i}{l}{j,k}");

        let (stmt, g) = gcs_of("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}; B: {i,j}");
        assert_eq!(g, SymmetryPartition::full(stmt.vars()));
        assert_eq!(output_symmetry(&stmt, &g).to_string(), "{i,j}");
    }

    #[test]
    fn output_symmetry_examples() {
        let (stmt, g) = gcs_of("y[i] = A[i,j] * x[j]", "A: {i,j}");
        assert_eq!(output_symmetry(&stmt, &g).to_string(), "{i}");

        let (stmt, g) = gcs_of("C[i,j] = A[i,j] + B[i,j]", "A: {i,j}");
        assert_eq!(output_symmetry(&stmt, &g).to_string(), "{i}{j}");
    }

    #[test]
    fn gcs_ignores_input_order() {
        let (_, a) = gcs_of("C[i,l] = A[i,j,k] * B[j,k,l]", "A: {i,j}{k}; B: {j,k}{l}");
        let (_, b) = gcs_of("C[i,l] = B[j,k,l] * A[i,j,k]", "A: {i,j}{k}; B: {j,k}{l}");
        assert_eq!(a.parts().len(), b.parts().len());
        for part in a.parts() {
            assert!(part.iter().all(|v| b.same_part(&part[0], v)));
        }
    }

    #[test]
    fn gcs_rejects_inconsistent_extents() {
        let stmt = parse_statement("y[i] = A[i,j] * x[j]").unwrap();
        let a = TensorSignature::non_symmetric("A", vars(&["i", "j"]))
            .with_extents(vec![3, 4])
            .unwrap();
        let x = TensorSignature::non_symmetric("x", vars(&["j"]))
            .with_extents(vec![5])
            .unwrap();
        assert!(matches!(
            gcs(&stmt, &[a, x]),
            Err(Error::InconsistentExtent { .. })
        ));
    }
}
