//! Numerical laboratory for invariant foliations of normally hyperbolic maps
//! on tori: splittings and bunching rates, invariant sections of fiber
//! contractions, strong and center leaves, holonomy maps, leaf conjugacies
//! and empirical Hölder exponents.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bunching;
pub mod conjugacy;
pub mod error;
pub mod estimation;
pub mod foliations;
pub mod gallery;
pub mod phasespace;
pub mod sections;
pub mod systems;

pub use error::{LabError, Result};
pub use phasespace::{QuotientPoint, TorusPoint, Transversal, V3};
pub use systems::{SuspensionLoop, SystemKind, SystemSpec};
