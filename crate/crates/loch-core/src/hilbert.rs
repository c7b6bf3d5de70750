//! Strictly inductive systems of finite-dimensional Hilbert spaces:
//! isometric embedding nets, the derived Hermitian projections, the
//! commuting-projections (representing) certificate, and the direct-sum
//! construction over down-sets.

use crate::linalg::{identity, spectral_norm, CMat, C64};
use crate::order::{DirectedSet, DirectedSetDoc, OrderError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HilbertError {
    #[error("order error: {0}")]
    Order(#[from] OrderError),
    #[error("node {node:?} has no declared dimension")]
    MissingDim { node: String },
    #[error("embedding for {lo:?} <= {hi:?} is missing and cannot be derived")]
    MissingEmbedding { lo: String, hi: String },
    #[error("embedding for {lo:?} <= {hi:?} has shape {got:?}, expected {expected:?}")]
    DimensionMismatch {
        lo: String,
        hi: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("dimensions decrease along {lo:?} <= {hi:?}: {dim_lo} > {dim_hi}")]
    DimsDecreasing {
        lo: String,
        hi: String,
        dim_lo: usize,
        dim_hi: usize,
    },
    #[error("embedding for {lo:?} <= {hi:?} is not isometric (residual {residual:.3e})")]
    NotIsometric {
        lo: String,
        hi: String,
        residual: f64,
    },
    #[error(
        "embeddings do not compose along {lo:?} <= {mid:?} <= {hi:?} (residual {residual:.3e})"
    )]
    NotTransitive {
        lo: String,
        mid: String,
        hi: String,
        residual: f64,
    },
    #[error("pair {lo:?}, {hi:?} is not comparable")]
    NotComparable { lo: String, hi: String },
    #[error(
        "projections onto {a:?} and {b:?} fail to commute inside {ambient:?} (commutator norm {norm:.3e})"
    )]
    NotRepresenting {
        a: String,
        b: String,
        ambient: String,
        norm: f64,
    },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

impl HilbertError {
    pub fn tag(&self) -> &'static str {
        match self {
            HilbertError::Order(e) => e.tag(),
            HilbertError::MissingDim { .. }
            | HilbertError::MissingEmbedding { .. }
            | HilbertError::DimensionMismatch { .. } => "malformed-witness",
            HilbertError::DimsDecreasing { .. } => "lhs3",
            HilbertError::NotIsometric { .. } => "lhs4",
            HilbertError::NotTransitive { .. } => "lhs3",
            HilbertError::NotComparable { .. } => "malformed-input",
            HilbertError::NotRepresenting { .. } => "e:pale",
            HilbertError::UnknownNode(_) => "malformed-input",
        }
    }
}

/// A validated strictly inductive system of finite-dimensional Hilbert
/// spaces: per-node dimensions and isometric embeddings for every
/// comparable pair, transitive up to 1e-12.
#[derive(Debug, Clone)]
pub struct InductiveHilbertSystem {
    index: DirectedSet,
    dims: BTreeMap<String, usize>,
    embeddings: BTreeMap<(String, String), CMat>,
}

impl PartialEq for InductiveHilbertSystem {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.dims == other.dims
            && self.embeddings.keys().eq(other.embeddings.keys())
            && self
                .embeddings
                .iter()
                .all(|(k, m)| other.embeddings[k] == *m)
    }
}

const VALIDATE_TOL: f64 = 1e-12;

impl InductiveHilbertSystem {
    /// Validates dimensions and embeddings. Embeddings may be given for a
    /// generating family of comparable pairs; missing ones are derived by
    /// composition along the order and checked for consistency.
    pub fn from_parts(
        index: DirectedSet,
        dims: BTreeMap<String, usize>,
        embeddings: BTreeMap<(String, String), CMat>,
    ) -> Result<Self, HilbertError> {
        for el in index.elements() {
            if !dims.contains_key(el) {
                return Err(HilbertError::MissingDim { node: el.clone() });
            }
        }
        for ((lo, hi), j) in &embeddings {
            let expected = (dims[hi], dims[lo]);
            if (j.nrows(), j.ncols()) != expected {
                return Err(HilbertError::DimensionMismatch {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    expected,
                    got: (j.nrows(), j.ncols()),
                });
            }
        }
        let mut sys = InductiveHilbertSystem {
            index,
            dims,
            embeddings,
        };
        sys.derive_missing()?;
        sys.check_axioms()?;
        Ok(sys)
    }

    fn derive_missing(&mut self) -> Result<(), HilbertError> {
        let pairs = self.index.comparable_pairs();
        loop {
            let missing: Vec<(String, String)> = pairs
                .iter()
                .filter(|p| !self.embeddings.contains_key(*p))
                .cloned()
                .collect();
            if missing.is_empty() {
                return Ok(());
            }
            let mut progressed = false;
            for (lo, hi) in &missing {
                for mid in self.index.elements() {
                    if mid == lo || mid == hi {
                        continue;
                    }
                    if self.index.leq(lo, mid)? && self.index.leq(mid, hi)? {
                        let first = self.embeddings.get(&(lo.clone(), mid.clone()));
                        let second = self.embeddings.get(&(mid.clone(), hi.clone()));
                        if let (Some(a), Some(b)) = (first, second) {
                            let j = b * a;
                            self.embeddings.insert((lo.clone(), hi.clone()), j);
                            progressed = true;
                            break;
                        }
                    }
                }
            }
            if !progressed {
                let (lo, hi) = missing.into_iter().next().unwrap();
                return Err(HilbertError::MissingEmbedding { lo, hi });
            }
        }
    }

    fn check_axioms(&self) -> Result<(), HilbertError> {
        for (lo, hi) in self.index.comparable_pairs() {
            if self.dims[&lo] > self.dims[&hi] {
                return Err(HilbertError::DimsDecreasing {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    dim_lo: self.dims[&lo],
                    dim_hi: self.dims[&hi],
                });
            }
            let j = &self.embeddings[&(lo.clone(), hi.clone())];
            let residual = spectral_norm(&(j.adjoint() * j - identity(j.ncols())));
            if residual > VALIDATE_TOL {
                return Err(HilbertError::NotIsometric { lo, hi, residual });
            }
        }
        let elements: Vec<String> = self.index.elements().to_vec();
        for lo in &elements {
            for mid in &elements {
                for hi in &elements {
                    if lo == mid || mid == hi || lo == hi {
                        continue;
                    }
                    if self.index.leq(lo, mid).unwrap() && self.index.leq(mid, hi).unwrap() {
                        let a = &self.embeddings[&(lo.clone(), mid.clone())];
                        let b = &self.embeddings[&(mid.clone(), hi.clone())];
                        let direct = &self.embeddings[&(lo.clone(), hi.clone())];
                        let residual = spectral_norm(&(b * a - direct));
                        if residual > VALIDATE_TOL {
                            return Err(HilbertError::NotTransitive {
                                lo: lo.clone(),
                                mid: mid.clone(),
                                hi: hi.clone(),
                                residual,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn index(&self) -> &DirectedSet {
        &self.index
    }

    pub fn dim(&self, node: &str) -> Result<usize, HilbertError> {
        self.dims
            .get(node)
            .copied()
            .ok_or_else(|| HilbertError::UnknownNode(node.into()))
    }

    pub fn dims(&self) -> &BTreeMap<String, usize> {
        &self.dims
    }

    /// The embedding J of the smaller space into the larger; identity when
    /// the nodes coincide.
    pub fn embedding(&self, lo: &str, hi: &str) -> Result<CMat, HilbertError> {
        if lo == hi {
            return Ok(identity(self.dim(lo)?));
        }
        if !self.index.leq(lo, hi)? {
            return Err(HilbertError::NotComparable {
                lo: lo.into(),
                hi: hi.into(),
            });
        }
        Ok(self.embeddings[&(lo.to_string(), hi.to_string())].clone())
    }

    /// The Hermitian projection of the ambient node onto the image of the
    /// smaller one, `J J*`.
    pub fn projection_onto(&self, lo: &str, ambient: &str) -> Result<CMat, HilbertError> {
        let j = self.embedding(lo, ambient)?;
        Ok(&j * j.adjoint())
    }

    /// Checks that projections onto all pairs of component spaces commute
    /// inside the canonical joint upper bound; returns per-pair commutator
    /// norms or the first violating triple.
    pub fn check_representing(&self, tol: f64) -> Result<RepresentingCertificate, HilbertError> {
        let mut entries = Vec::new();
        for (a, b) in self.index.unordered_pairs() {
            let ambient = self.index.upper_bound(&a, &b)?;
            let norm = self.projection_commutator_norm(&a, &b, &ambient)?;
            if norm > tol {
                return Err(HilbertError::NotRepresenting {
                    a,
                    b,
                    ambient,
                    norm,
                });
            }
            entries.push(RepresentingEntry {
                a,
                b,
                ambient,
                commutator_norm: norm,
            });
        }
        Ok(RepresentingCertificate { entries, tol })
    }

    /// Commutator norm of the two projections inside a given ambient node.
    pub fn projection_commutator_norm(
        &self,
        a: &str,
        b: &str,
        ambient: &str,
    ) -> Result<f64, HilbertError> {
        let pa = self.projection_onto(a, ambient)?;
        let pb = self.projection_onto(b, ambient)?;
        Ok(spectral_norm(&(&pa * &pb - &pb * &pa)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentingEntry {
    pub a: String,
    pub b: String,
    pub ambient: String,
    pub commutator_norm: f64,
}

/// Per-pair commutator norms, all below the stated tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentingCertificate {
    pub entries: Vec<RepresentingEntry>,
    pub tol: f64,
}

impl RepresentingCertificate {
    pub fn max_commutator(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.commutator_norm)
            .fold(0.0, f64::max)
    }
}

/// Builds the direct-sum system `H_λ = ⊕_{α <= λ} G_α` over a directed
/// index with per-element component dimensions. Coordinates are ordered by
/// the lexicographic enumeration of the index; embeddings are coordinate
/// injections with exact 0/1 entries, so projections commute exactly.
pub fn build_inoue_space(
    index: &DirectedSet,
    component_dims: &BTreeMap<String, usize>,
) -> Result<InductiveHilbertSystem, HilbertError> {
    for el in index.elements() {
        if !component_dims.contains_key(el) {
            return Err(HilbertError::MissingDim { node: el.clone() });
        }
    }
    // global coordinate layout: components in lexicographic element order
    let mut offsets = BTreeMap::new();
    let mut total = 0usize;
    for el in index.elements() {
        offsets.insert(el.clone(), total);
        total += component_dims[el];
    }
    // per node: coordinates of the components in its down-set
    let mut coords: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut dims = BTreeMap::new();
    for el in index.elements() {
        let mut cs = Vec::new();
        for alpha in index.down_set(el)? {
            let base = offsets[&alpha];
            cs.extend(base..base + component_dims[&alpha]);
        }
        cs.sort();
        dims.insert(el.clone(), cs.len());
        coords.insert(el.clone(), cs);
    }
    let mut embeddings = BTreeMap::new();
    for (lo, hi) in index.comparable_pairs() {
        let clo = &coords[&lo];
        let chi = &coords[&hi];
        let mut j = CMat::zeros(chi.len(), clo.len());
        for (col, c) in clo.iter().enumerate() {
            let row = chi
                .iter()
                .position(|x| x == c)
                .expect("down-sets are monotone along the order");
            j[(row, col)] = C64::new(1.0, 0.0);
        }
        embeddings.insert((lo, hi), j);
    }
    InductiveHilbertSystem::from_parts(index.clone(), dims, embeddings)
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

/// External form: dims per node and embeddings per comparable pair keyed
/// `"lo<=hi"`, complex entries as [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HilbertSystemDoc {
    pub index: DirectedSetDoc,
    pub dims: BTreeMap<String, usize>,
    pub embeddings: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

pub fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> CMat {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    CMat::from_fn(nr, nc, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
}

impl HilbertSystemDoc {
    pub fn from_system(sys: &InductiveHilbertSystem) -> Self {
        let mut embeddings = BTreeMap::new();
        for (lo, hi) in sys.index().comparable_pairs() {
            let j = sys.embedding(&lo, &hi).unwrap();
            embeddings.insert(format!("{lo}<={hi}"), matrix_to_rows(&j));
        }
        HilbertSystemDoc {
            index: DirectedSetDoc::from_set(sys.index(), None),
            dims: sys.dims().clone(),
            embeddings,
        }
    }

    pub fn build(&self) -> Result<InductiveHilbertSystem, HilbertError> {
        let index = self.index.build()?;
        let mut embeddings = BTreeMap::new();
        for (key, rows) in &self.embeddings {
            if let Some((lo, hi)) = key.split_once("<=") {
                embeddings.insert((lo.to_string(), hi.to_string()), matrix_from_rows(rows));
            }
        }
        InductiveHilbertSystem::from_parts(index, self.dims.clone(), embeddings)
    }
}
