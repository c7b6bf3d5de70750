//! A desk-scale laboratory for inductive limits of finite-dimensional
//! Hilbert spaces and the spectral theory of coherent operator nets.
//!
//! The crate builds strictly inductive systems of measure spaces and of
//! Hilbert spaces (including the three organisations of the Hata tree-like
//! set and the direct-sum construction over down-sets), represents locally
//! bounded operators as coherent matrix nets, and constructs multiplication
//! -operator spectral models with multiplicity bookkeeping, all verified at
//! finite dimension.

pub mod acceptance;
pub mod cnum;
pub mod hata;
pub mod hilbert;
pub mod linalg;
pub mod measure;
pub mod operator;
pub mod order;
pub mod spectral;
pub mod testkit;
pub mod tol;

pub use linalg::{CMat, C64};
