//! Compiler toolkit for tensor-algebra statements over partially symmetric
//! tensors.
//!
//! Statements such as `C[i,l] = A[i,j,k] * B[j,k,l]` are analysed for the
//! symmetry they share with their inputs, lowered to loop nests that touch
//! only canonical (stored) coordinates of every packed tensor, and then
//! either interpreted or emitted as C.

pub mod backend;
pub mod cemit;
pub mod depgraph;
pub mod error;
pub mod exec;
pub mod expr;
pub mod ir;
pub mod loopgen;
mod offsets;
pub mod oracle;
pub mod ordering;
pub mod registry;
pub mod simplicial;
pub mod storage;
pub mod symmetry;

pub use error::{Error, Result};
pub use expr::{parse_statement, parse_symmetries, Problem, ProblemSpec, TensorStatement};
pub use ir::LoopNest;
pub use loopgen::generate;
pub use storage::{DenseTensor, PackedLayout, PackedTensor, Scalar, ScalarKind};
pub use symmetry::{IndexVar, SymmetryPartition, TensorSignature};
