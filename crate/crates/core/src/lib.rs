//! Shape identification of small conductivity inclusions from multistatic
//! response (MSR) data using contracted generalized polarization tensors
//! (CGPTs).
//!
//! The pipeline runs in four stages:
//!
//! 1. [`geometry`] builds inclusion boundaries and similarity transforms.
//! 2. [`potential`] solves the Neumann–Poincaré density equation with a
//!    Nyström discretization.
//! 3. [`cgpt`] computes complex CGPTs and applies the similarity transform
//!    law; [`msr`] simulates measurements and reconstructs CGPTs by least
//!    squares.
//! 4. [`matching`] estimates transforms, computes invariant descriptors, and
//!    ranks dictionary entries.
//!
//! Everything numerical is generic over [`Real`]; the aliases below fix the
//! scalar to `f64`, which is what the CLI and experiments use.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cgpt;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod msr;
pub mod potential;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type Boundary = geometry::Boundary<f64>;
pub type SimilarityTransform = geometry::SimilarityTransform<f64>;
pub type NpSystem = potential::NpSystem<f64>;
pub type Density = potential::Density<f64>;
pub type CgptPair = cgpt::CgptPair<f64>;
pub type RealCgptBlocks = cgpt::RealCgptBlocks<f64>;
pub type ArrayConfig = msr::ArrayConfig<f64>;
pub type MsrMatrix = msr::MsrMatrix<f64>;
pub type CoefficientMatrices = msr::CoefficientMatrices<f64>;
pub type DescriptorPair = matching::DescriptorPair<f64>;
pub type Dictionary = matching::Dictionary<f64>;
pub type DictionaryEntry = matching::DictionaryEntry<f64>;
pub type MatchReport = matching::MatchReport<f64>;
