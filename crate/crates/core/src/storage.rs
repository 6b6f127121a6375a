//! Packed storage for partially symmetric tensors.
//!
//! Only canonical coordinates (non-increasing within each symmetry part)
//! are stored. A layout permutes dimensions so that every part is
//! contiguous; positions are then sums of simplicial numbers, one factor
//! block per part.

use std::fmt;
use std::fs;
use std::ops::{Add, AddAssign, Mul};
use std::path::Path;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplicial::simplicial_usize;
use crate::symmetry::{
    canonicalize_parts, first_non_canonical_part, IndexVar, SymmetryPartition, TensorSignature,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Int,
    Float,
}

/// Element type of packed and dense tensors.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Add<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const KIND: ScalarKind;

    /// Integers in [-9, 9], floats in [-1, 1].
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Option<Self>;
}

impl Scalar for i64 {
    const ZERO: Self = 0;
    const KIND: ScalarKind = ScalarKind::Int;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen_range(-9..=9)
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn from_f64(v: f64) -> Option<Self> {
        (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const KIND: ScalarKind = ScalarKind::Float;

    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen_range(-1.0..=1.0)
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn from_f64(v: f64) -> Option<Self> {
        Some(v)
    }
}

/// Storage layout of a packed tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedLayout {
    index_vars: Vec<IndexVar>,
    extents: Vec<usize>,
    symmetry: SymmetryPartition,
    /// Dimensions of each part, parts in storage order.
    dim_parts: Vec<Vec<usize>>,
    storage_perm: Vec<usize>,
    part_sizes: Vec<usize>,
    part_extents: Vec<usize>,
    /// `s_{p_i}(N_i)`: number of canonical tuples of each part.
    part_counts: Vec<usize>,
    /// `tables[i][j][c] = s_{p_i - j}(c)`.
    tables: Vec<Vec<Vec<usize>>>,
    total_size: usize,
}

impl PackedLayout {
    pub fn new(sig: &TensorSignature) -> Result<Self> {
        let extents = sig.extents.clone().ok_or_else(|| {
            Error::InvalidLayout(format!("extents of `{}` are unknown", sig.name))
        })?;
        let dim_parts = sig.dim_parts();
        let storage_perm = dim_parts.iter().flatten().copied().collect::<Vec<_>>();
        let part_sizes = dim_parts.iter().map(Vec::len).collect::<Vec<_>>();
        let part_extents = dim_parts.iter().map(|p| extents[p[0]]).collect::<Vec<_>>();
        let part_counts = part_sizes
            .iter()
            .zip(&part_extents)
            .map(|(&p, &n)| simplicial_usize(p, n))
            .collect::<Result<Vec<_>>>()?;
        let total_size = part_counts
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or(Error::SizeOverflow)?;
        let tables = part_sizes
            .iter()
            .zip(&part_extents)
            .map(|(&p, &n)| {
                (0..p)
                    .map(|j| (0..n).map(|c| simplicial_usize(p - j, c)).collect())
                    .collect::<Result<Vec<Vec<usize>>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PackedLayout {
            index_vars: sig.index_vars.clone(),
            extents,
            symmetry: sig.symmetry.clone(),
            dim_parts,
            storage_perm,
            part_sizes,
            part_extents,
            part_counts,
            tables,
            total_size,
        })
    }

    pub fn index_vars(&self) -> &[IndexVar] {
        &self.index_vars
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn symmetry(&self) -> &SymmetryPartition {
        &self.symmetry
    }

    pub fn dim_parts(&self) -> &[Vec<usize>] {
        &self.dim_parts
    }

    /// `storage_perm[s]` is the original dimension stored at slot `s`.
    pub fn storage_perm(&self) -> &[usize] {
        &self.storage_perm
    }

    pub fn part_sizes(&self) -> &[usize] {
        &self.part_sizes
    }

    pub fn part_extents(&self) -> &[usize] {
        &self.part_extents
    }

    pub fn total_size(&self) -> usize {
        self.total_size
    }

    pub fn order(&self) -> usize {
        self.extents.len()
    }

    /// Number of values a row-major dense array of the same shape holds.
    pub fn dense_size(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn signature(&self, name: &str) -> TensorSignature {
        TensorSignature {
            name: name.to_string(),
            index_vars: self.index_vars.clone(),
            extents: Some(self.extents.clone()),
            symmetry: self.symmetry.clone(),
        }
    }

    /// Validates arity, bounds and canonicity of `coords`.
    pub fn check(&self, coords: &[usize]) -> Result<()> {
        if coords.len() != self.order() {
            return Err(Error::CoordArity {
                expected: self.order(),
                found: coords.len(),
            });
        }
        for (dim, (&coord, &extent)) in coords.iter().zip(&self.extents).enumerate() {
            if coord >= extent {
                return Err(Error::OutOfBounds { dim, coord, extent });
            }
        }
        if let Some(p) = first_non_canonical_part(coords, &self.dim_parts) {
            return Err(Error::NonCanonical {
                coords: coords.to_vec(),
                part: self.dim_parts[p]
                    .iter()
                    .map(|&d| self.index_vars[d].to_string())
                    .collect(),
            });
        }
        Ok(())
    }

    pub fn is_canonical(&self, coords: &[usize]) -> bool {
        first_non_canonical_part(coords, &self.dim_parts).is_none()
    }

    pub fn canonicalize(&self, coords: &[usize]) -> Vec<usize> {
        canonicalize_parts(coords, &self.dim_parts)
    }

    /// `s_{p - within}(c)` for storage part `part` of size `p`.
    pub(crate) fn step_term(&self, part: usize, within: usize, c: usize) -> usize {
        self.tables[part][within][c]
    }

    /// `s_p(N)` for storage part `part`.
    pub(crate) fn part_count(&self, part: usize) -> usize {
        self.part_counts[part]
    }

    /// The incremental recurrence without validation; `coords` must be
    /// canonical and in bounds.
    pub(crate) fn offset_unchecked(&self, coords: &[usize]) -> usize {
        let mut acc = 0;
        for (i, part) in self.dim_parts.iter().enumerate() {
            let table = &self.tables[i];
            for (j, &d) in part.iter().enumerate() {
                if j == 0 {
                    acc = acc * self.part_counts[i] + table[0][coords[d]];
                } else {
                    acc += table[j][coords[d]];
                }
            }
        }
        acc
    }
}

/// Offset of canonical `coords` as the sum over parts of
/// `(sum_j s_{p_i - j}(c_{i,j})) * prod_{later parts} s_{p}(N)`.
pub fn position(coords: &[usize], layout: &PackedLayout) -> Result<usize> {
    layout.check(coords)?;
    let mut total = 0usize;
    for (i, part) in layout.dim_parts.iter().enumerate() {
        let p = part.len();
        let mut within = 0usize;
        for (j, &d) in part.iter().enumerate() {
            within = within
                .checked_add(simplicial_usize(p - j, coords[d])?)
                .ok_or(Error::SizeOverflow)?;
        }
        let stride = layout.part_counts[i + 1..]
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or(Error::SizeOverflow)?;
        total = within
            .checked_mul(stride)
            .and_then(|t| total.checked_add(t))
            .ok_or(Error::SizeOverflow)?;
    }
    Ok(total)
}

/// Offset of canonical `coords` by the running recurrence
/// `I(first of part) = I(prev) * s_p(N) + s_p(c)`,
/// `I(next in part) = I(prev) + s_{p-j}(c)`.
pub fn position_incremental(coords: &[usize], layout: &PackedLayout) -> Result<usize> {
    layout.check(coords)?;
    Ok(layout.offset_unchecked(coords))
}

/// Canonical coordinates in increasing position order.
pub fn canonical_coords_iter(layout: &PackedLayout) -> CanonicalCoords<'_> {
    let empty = layout.extents.contains(&0);
    CanonicalCoords {
        layout,
        slots: vec![0; layout.order()],
        done: empty,
    }
}

pub struct CanonicalCoords<'a> {
    layout: &'a PackedLayout,
    /// Coordinates in storage order.
    slots: Vec<usize>,
    done: bool,
}

impl CanonicalCoords<'_> {
    /// Largest value storage slot `s` may take given the slots before it.
    fn limit(&self, s: usize) -> usize {
        let mut slot = 0;
        for part in &self.layout.dim_parts {
            if s < slot + part.len() {
                return if s == slot {
                    self.layout.extents[part[0]] - 1
                } else {
                    self.slots[s - 1]
                };
            }
            slot += part.len();
        }
        unreachable!()
    }
}

impl Iterator for CanonicalCoords<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let perm = &self.layout.storage_perm;
        let mut coords = vec![0; perm.len()];
        for (s, &d) in perm.iter().enumerate() {
            coords[d] = self.slots[s];
        }
        // Odometer step: bump the last slot below its limit, zero the rest.
        let mut s = self.slots.len();
        loop {
            if s == 0 {
                self.done = true;
                break;
            }
            s -= 1;
            if self.slots[s] < self.limit(s) {
                self.slots[s] += 1;
                for t in &mut self.slots[s + 1..] {
                    *t = 0;
                }
                break;
            }
        }
        Some(coords)
    }
}

/// Row-major dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    pub extents: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(extents: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let size: usize = extents.iter().product();
        if values.len() != size {
            return Err(Error::InvalidLayout(format!(
                "dense tensor of shape {extents:?} needs {size} values, got {}",
                values.len()
            )));
        }
        Ok(DenseTensor { extents, values })
    }

    pub fn zeros(extents: Vec<usize>) -> Self {
        let size = extents.iter().product();
        DenseTensor {
            extents,
            values: vec![T::ZERO; size],
        }
    }

    pub fn offset(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.extents.len());
        coords
            .iter()
            .zip(&self.extents)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    pub fn get(&self, coords: &[usize]) -> T {
        self.values[self.offset(coords)]
    }

    pub fn set(&mut self, coords: &[usize], value: T) {
        let o = self.offset(coords);
        self.values[o] = value;
    }

    /// Every coordinate tuple in row-major order.
    pub fn coords(&self) -> impl Iterator<Item = Vec<usize>> {
        all_coords(self.extents.clone())
    }
}

/// Row-major enumeration of the full box `[0, e_0) x ... x [0, e_k)`.
pub fn all_coords(extents: Vec<usize>) -> impl Iterator<Item = Vec<usize>> {
    let mut next = if extents.contains(&0) {
        None
    } else {
        Some(vec![0; extents.len()])
    };
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut step = current.clone();
        for d in (0..step.len()).rev() {
            step[d] += 1;
            if step[d] < extents[d] {
                next = Some(step);
                break;
            }
            step[d] = 0;
        }
        Some(current)
    })
}

/// Flat array of canonical values plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedTensor<T> {
    layout: PackedLayout,
    values: Vec<T>,
}

impl<T: Scalar> PackedTensor<T> {
    pub fn new(layout: PackedLayout, values: Vec<T>) -> Result<Self> {
        if values.len() != layout.total_size() {
            return Err(Error::InvalidLayout(format!(
                "expected {} packed values, got {}",
                layout.total_size(),
                values.len()
            )));
        }
        Ok(PackedTensor { layout, values })
    }

    pub fn zeros(layout: PackedLayout) -> Self {
        let values = vec![T::ZERO; layout.total_size()];
        PackedTensor { layout, values }
    }

    pub fn layout(&self) -> &PackedLayout {
        &self.layout
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Reads a canonical coordinate. Non-canonical reads are rejected.
    pub fn get(&self, coords: &[usize]) -> Result<T> {
        Ok(self.values[position(coords, &self.layout)?])
    }

    /// Reads any coordinate by first mapping it to its orbit representative.
    pub fn get_any(&self, coords: &[usize]) -> Result<T> {
        self.get(&self.layout.canonicalize(coords))
    }

    pub fn to_file(&self) -> TensorFile<T> {
        let names = |vs: &[IndexVar]| vs.iter().map(|v| v.to_string()).collect::<Vec<_>>();
        TensorFile {
            extents: self.layout.extents.clone(),
            symmetry: self
                .layout
                .symmetry
                .parts()
                .iter()
                .map(|p| names(p))
                .collect(),
            index_vars: names(&self.layout.index_vars),
            storage_perm: self.layout.storage_perm.clone(),
            values: self.values.clone(),
        }
    }

    pub fn from_file(name: &str, file: TensorFile<T>) -> Result<Self> {
        let index_vars = file
            .index_vars
            .iter()
            .map(|v| IndexVar::new(v.clone()))
            .collect::<Vec<_>>();
        let parts = file
            .symmetry
            .iter()
            .map(|p| p.iter().map(|v| IndexVar::new(v.clone())).collect())
            .collect();
        let sig = TensorSignature::new(name, index_vars, Some(file.extents), parts)?;
        let layout = PackedLayout::new(&sig)?;
        if file.storage_perm != layout.storage_perm {
            return Err(Error::InvalidLayout(format!(
                "storage_perm {:?} does not match the symmetry (expected {:?})",
                file.storage_perm, layout.storage_perm
            )));
        }
        PackedTensor::new(layout, file.values)
    }

    pub fn read_json(name: &str, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(name, &text)
    }

    pub fn from_json(name: &str, text: &str) -> Result<Self> {
        let file: TensorFile<T> = serde_json::from_str(text)?;
        Self::from_file(name, file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("tensor serialization")
    }
}

/// On-disk JSON form of a packed tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile<T> {
    pub extents: Vec<usize>,
    pub symmetry: Vec<Vec<String>>,
    pub index_vars: Vec<String>,
    pub storage_perm: Vec<usize>,
    pub values: Vec<T>,
}

/// Packs `dense`, failing if it does not actually have `sig`'s symmetry.
pub fn pack<T: Scalar>(dense: &DenseTensor<T>, sig: &TensorSignature) -> Result<PackedTensor<T>> {
    let sig = match &sig.extents {
        Some(e) if *e != dense.extents => {
            return Err(Error::InputMismatch {
                tensor: sig.name.clone(),
                reason: format!("dense extents {:?} vs declared {e:?}", dense.extents),
            })
        }
        Some(_) => sig.clone(),
        None => sig.clone().with_extents(dense.extents.clone())?,
    };
    let layout = PackedLayout::new(&sig)?;
    for c in dense.coords() {
        let canon = layout.canonicalize(&c);
        let (a, b) = (dense.get(&canon), dense.get(&c));
        if a != b {
            return Err(Error::SymmetryViolation {
                first_coords: canon,
                first_value: a.to_string(),
                second_coords: c,
                second_value: b.to_string(),
            });
        }
    }
    let values = canonical_coords_iter(&layout)
        .map(|c| dense.get(&c))
        .collect();
    PackedTensor::new(layout, values)
}

pub fn unpack<T: Scalar>(t: &PackedTensor<T>) -> DenseTensor<T> {
    let layout = t.layout();
    let mut dense = DenseTensor::zeros(layout.extents.clone());
    for c in all_coords(layout.extents.clone()) {
        let value = t.values[layout.offset_unchecked(&layout.canonicalize(&c))];
        dense.set(&c, value);
    }
    dense
}
