//! Numerical tolerances used across the crate.
//!
//! Thresholds are grouped by origin: geometry thresholds are set by f64
//! precision over the unit-box domain, operator thresholds allow for
//! accumulated rounding in dense decompositions, and model thresholds allow
//! for conjugation chains of unitaries.

/// Endpoint coincidence during segment dedup/adjacency (geometry over |z| <= 2).
pub const ENDPOINT: f64 = 1e-12;

/// Residual allowed for constructions that are exact up to f64 arithmetic
/// (isometry checks, transitivity of embeddings, unitarity of model frames).
pub const STRUCT_EXACT: f64 = 1e-12;

/// Coherence residual per constraint, spectral norm.
pub const COHERENCE: f64 = 1e-10;

/// Commutator norm threshold for the representing property.
pub const REPRESENTING: f64 = 1e-10;

/// Blockwise residual threshold for operator classification flags.
pub const CLASSIFY: f64 = 1e-10;

/// Absolute tolerance for clustering eigenvalues within and across nodes.
pub const EIGEN_CLUSTER: f64 = 1e-8;

/// Residual threshold for spectral-measure laws and integration round trips.
pub const SPECTRAL_LAWS: f64 = 1e-10;

/// Residual threshold for functional-model conjugation identities.
pub const MODEL_RESIDUAL: f64 = 1e-9;

/// Intertwining precondition threshold for the commutation-transfer check.
pub const FP_PRE: f64 = 1e-10;

/// Pass threshold for the adjoint intertwining residual.
pub const FP_PASS: f64 = 1e-9;

/// Relative slack for finite additivity checks of measures.
pub const SIGMA_ADD: f64 = 1e-12;

/// Agreement between word compositions and their closed forms.
pub const WORD_CLOSED_FORM: f64 = 1e-14;

/// Environment variable that overrides the default validation tolerance in
/// the command-line tools.
pub const TOLERANCE_ENV: &str = "LOCH_TOLERANCE";
