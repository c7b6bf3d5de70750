//! Coherent operator nets over inductive Hilbert systems: validation via
//! the two equivalent block-matrix characterizations, the *-algebra
//! operations and seminorms, operator classification, node-union spectra,
//! multiplication operators on discretized L² systems, and the
//! commutation-transfer (adjoint intertwining) check.

use crate::hilbert::{
    matrix_from_rows, matrix_to_rows, HilbertError, HilbertSystemDoc, InductiveHilbertSystem,
};
use crate::linalg::{
    self, cluster_complex, general_eigenvalues, identity, min_singular_value, spectral_norm, CMat,
    C64,
};
use crate::measure::{DiscretizedL2System, LocFunction, MeasureError};
use crate::tol;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("hilbert system error: {0}")]
    Hilbert(#[from] HilbertError),
    #[error("measure error: {0}")]
    Measure(#[from] MeasureError),
    #[error("node {node:?} block has shape {got:?}, expected {expected:?}")]
    DimensionMismatch {
        node: String,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("node {node:?} has no block")]
    MissingBlock { node: String },
    #[error(
        "net is not coherent at pair ({lo:?}, {hi:?}): restriction residual {direct:.3e}, block-diagonality residual {block:.3e}"
    )]
    NotCoherent {
        lo: String,
        hi: String,
        direct: f64,
        block: f64,
    },
    #[error(
        "the two coherence characterizations disagree at pair ({lo:?}, {hi:?}): {direct:.3e} vs {block:.3e} around tolerance {tol:.1e}"
    )]
    InternalConsistency {
        lo: String,
        hi: String,
        direct: f64,
        block: f64,
        tol: f64,
    },
    #[error("operators live on different systems")]
    SystemMismatch,
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("block at node {node:?} is not normal (residual {residual:.3e})")]
    NonNormalBlock { node: String, residual: f64 },
    #[error("precondition {what} fails at node {node:?} (residual {residual:.3e})")]
    Precondition {
        what: String,
        node: String,
        residual: f64,
    },
}

impl OperatorError {
    pub fn tag(&self) -> &'static str {
        match self {
            OperatorError::Hilbert(e) => e.tag(),
            OperatorError::Measure(e) => e.tag(),
            OperatorError::DimensionMismatch { .. } | OperatorError::MissingBlock { .. } => {
                "malformed-input"
            }
            OperatorError::NotCoherent { .. } => "e:temuha",
            OperatorError::InternalConsistency { .. } => "e:temule",
            OperatorError::SystemMismatch | OperatorError::UnknownNode(_) => "malformed-input",
            OperatorError::NonNormalBlock { .. } => "t:fp",
            OperatorError::Precondition { .. } => "t:fp",
        }
    }
}

/// Residuals of the two coherence characterizations at one comparable pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherenceResiduals {
    /// max of `‖T_ν J − J T_λ‖` and `‖T_ν P − P T_ν‖`.
    pub direct: f64,
    /// max of the two off-diagonal block norms and `‖J* T_ν J − T_λ‖`.
    pub block: f64,
}

/// A coherent net of complex matrices over an inductive Hilbert system,
/// allowed to be rectangular between two systems sharing one index set.
#[derive(Debug, Clone)]
pub struct CoherentOperator {
    domain: Arc<InductiveHilbertSystem>,
    codomain: Arc<InductiveHilbertSystem>,
    blocks: BTreeMap<String, CMat>,
}

fn same_system(a: &Arc<InductiveHilbertSystem>, b: &Arc<InductiveHilbertSystem>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl CoherentOperator {
    /// Validates a candidate net against both characterizations: the
    /// restriction/commutation equations and block-diagonality with
    /// respect to each orthogonal decomposition. The verdicts must agree;
    /// a disagreement beyond tolerance signals numerical pathology.
    pub fn validate(
        blocks: BTreeMap<String, CMat>,
        domain: Arc<InductiveHilbertSystem>,
        codomain: Arc<InductiveHilbertSystem>,
        tolerance: f64,
    ) -> Result<CoherentOperator, OperatorError> {
        for el in domain.index().elements() {
            let b = blocks
                .get(el)
                .ok_or_else(|| OperatorError::MissingBlock { node: el.clone() })?;
            let expected = (codomain.dim(el)?, domain.dim(el)?);
            if (b.nrows(), b.ncols()) != expected {
                return Err(OperatorError::DimensionMismatch {
                    node: el.clone(),
                    expected,
                    got: (b.nrows(), b.ncols()),
                });
            }
        }
        let op = CoherentOperator {
            domain,
            codomain,
            blocks,
        };
        for (lo, hi) in op.domain.index().comparable_pairs() {
            let r = op.coherence_residuals(&lo, &hi)?;
            let ok_direct = r.direct <= tolerance;
            let ok_block = r.block <= tolerance;
            if ok_direct != ok_block {
                // the characterizations are equivalent; a split verdict can
                // only come from residuals straddling the tolerance
                let near = r.direct.max(r.block) <= 10.0 * tolerance;
                if !near {
                    return Err(OperatorError::InternalConsistency {
                        lo,
                        hi,
                        direct: r.direct,
                        block: r.block,
                        tol: tolerance,
                    });
                }
            }
            if !(ok_direct && ok_block) {
                return Err(OperatorError::NotCoherent {
                    lo,
                    hi,
                    direct: r.direct,
                    block: r.block,
                });
            }
        }
        Ok(op)
    }

    /// Builds an endomorphism net on one system.
    pub fn validate_endo(
        blocks: BTreeMap<String, CMat>,
        system: Arc<InductiveHilbertSystem>,
        tolerance: f64,
    ) -> Result<CoherentOperator, OperatorError> {
        CoherentOperator::validate(blocks, system.clone(), system, tolerance)
    }

    /// Residuals of both characterizations at one comparable pair.
    pub fn coherence_residuals(
        &self,
        lo: &str,
        hi: &str,
    ) -> Result<CoherenceResiduals, OperatorError> {
        let jd = self.domain.embedding(lo, hi)?;
        let jc = self.codomain.embedding(lo, hi)?;
        let t_lo = &self.blocks[lo];
        let t_hi = &self.blocks[hi];
        let pd = &jd * jd.adjoint();
        let pc = &jc * jc.adjoint();
        let restriction = spectral_norm(&(t_hi * &jd - &jc * t_lo));
        let commutation = spectral_norm(&(t_hi * &pd - &pc * t_hi));
        let direct = restriction.max(commutation);
        let dim_hi_c = self.codomain.dim(hi)?;
        let dim_hi_d = self.domain.dim(hi)?;
        let off_low = spectral_norm(&((identity(dim_hi_c) - &pc) * t_hi * &pd));
        let off_high = spectral_norm(&(&pc * t_hi * (identity(dim_hi_d) - &pd)));
        let compression = spectral_norm(&(jc.adjoint() * t_hi * &jd - t_lo));
        let block = off_low.max(off_high).max(compression);
        Ok(CoherenceResiduals { direct, block })
    }

    pub fn identity_on(system: Arc<InductiveHilbertSystem>) -> CoherentOperator {
        let blocks = system
            .index()
            .elements()
            .iter()
            .map(|el| (el.clone(), identity(system.dim(el).unwrap())))
            .collect();
        CoherentOperator {
            domain: system.clone(),
            codomain: system,
            blocks,
        }
    }

    /// Assembles a net from per-node blocks without re-validating; callers
    /// must guarantee coherence structurally.
    pub(crate) fn from_blocks_unchecked(
        domain: Arc<InductiveHilbertSystem>,
        codomain: Arc<InductiveHilbertSystem>,
        blocks: BTreeMap<String, CMat>,
    ) -> CoherentOperator {
        CoherentOperator {
            domain,
            codomain,
            blocks,
        }
    }

    pub fn domain(&self) -> &Arc<InductiveHilbertSystem> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<InductiveHilbertSystem> {
        &self.codomain
    }

    pub fn system(&self) -> &Arc<InductiveHilbertSystem> {
        debug_assert!(self.is_endo());
        &self.domain
    }

    pub fn is_endo(&self) -> bool {
        same_system(&self.domain, &self.codomain)
    }

    pub fn block(&self, node: &str) -> Result<&CMat, OperatorError> {
        self.blocks
            .get(node)
            .ok_or_else(|| OperatorError::UnknownNode(node.into()))
    }

    pub fn blocks(&self) -> &BTreeMap<String, CMat> {
        &self.blocks
    }

    /// Blockwise conjugate transpose; coherence of the result is implied
    /// by the commutation half of the validated conditions.
    pub fn adjoint(&self) -> CoherentOperator {
        CoherentOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), m.adjoint()))
                .collect(),
        }
    }

    pub fn compose(&self, rhs: &CoherentOperator) -> Result<CoherentOperator, OperatorError> {
        if !same_system(&rhs.codomain, &self.domain) {
            return Err(OperatorError::SystemMismatch);
        }
        Ok(CoherentOperator {
            domain: rhs.domain.clone(),
            codomain: self.codomain.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), m * &rhs.blocks[k]))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &CoherentOperator) -> Result<CoherentOperator, OperatorError> {
        if !same_system(&self.domain, &rhs.domain) || !same_system(&self.codomain, &rhs.codomain) {
            return Err(OperatorError::SystemMismatch);
        }
        Ok(CoherentOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), m + &rhs.blocks[k]))
                .collect(),
        })
    }

    pub fn sub(&self, rhs: &CoherentOperator) -> Result<CoherentOperator, OperatorError> {
        self.add(&rhs.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, z: C64) -> CoherentOperator {
        CoherentOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), m * z))
                .collect(),
        }
    }

    /// The seminorm `q_ν(T) = ‖T_ν‖` (spectral norm of the node block).
    pub fn seminorm(&self, node: &str) -> Result<f64, OperatorError> {
        Ok(spectral_norm(self.block(node)?))
    }

    /// Largest node seminorm.
    pub fn max_seminorm(&self) -> f64 {
        self.blocks.values().map(spectral_norm).fold(0.0, f64::max)
    }

    /// Blockwise classification flags with residuals, each holding iff it
    /// holds on every node within the tolerance.
    pub fn classify(&self, tolerance: f64) -> Classification {
        let mut normal: f64 = 0.0;
        let mut selfadj: f64 = 0.0;
        let mut positive: f64 = 0.0;
        let mut projection: f64 = 0.0;
        let mut isometric: f64 = 0.0;
        let mut co_isometric: f64 = 0.0;
        for m in self.blocks.values() {
            normal = normal.max(linalg::normality_residual(m));
            let ha = linalg::hermitian_residual(m);
            selfadj = selfadj.max(ha);
            let herm = (m + m.adjoint()).scale(0.5);
            let min_eig = if herm.nrows() == 0 {
                0.0
            } else {
                herm.symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min)
            };
            positive = positive.max(ha).max((-min_eig).max(0.0));
            projection = projection.max(ha).max(spectral_norm(&(m * m - m)));
            isometric = isometric.max(spectral_norm(&(m.adjoint() * m - identity(m.ncols()))));
            co_isometric =
                co_isometric.max(spectral_norm(&(m * m.adjoint() - identity(m.nrows()))));
        }
        let unitary = isometric.max(co_isometric);
        Classification {
            normal: Flag::new(normal, tolerance),
            selfadjoint: Flag::new(selfadj, tolerance),
            positive: Flag::new(positive, tolerance),
            projection: Flag::new(projection, tolerance),
            isometric: Flag::new(isometric, tolerance),
            unitary: Flag::new(unitary, tolerance),
        }
    }

    /// Union of the per-node eigenvalue sets, clustered across nodes.
    pub fn spectrum(&self, cluster_tol: f64) -> Result<SpectrumSet, OperatorError> {
        let mut values = Vec::new();
        let mut origins = Vec::new();
        for (node, m) in &self.blocks {
            let eigs = general_eigenvalues(m).ok_or_else(|| OperatorError::Precondition {
                what: "eigenvalue iteration converges".into(),
                node: node.clone(),
                residual: f64::NAN,
            })?;
            for z in eigs {
                values.push(z);
                origins.push(node.clone());
            }
        }
        let clusters = cluster_complex(&values, cluster_tol);
        let atoms = clusters
            .into_iter()
            .map(|(rep, members)| {
                let mut nodes: Vec<String> = members.iter().map(|&i| origins[i].clone()).collect();
                nodes.sort();
                nodes.dedup();
                SpectrumAtom { value: rep, nodes }
            })
            .collect();
        Ok(SpectrumSet { atoms })
    }

    /// Smallest singular value of `zI − T_λ` over all nodes; positive
    /// values certify blockwise invertibility of the shifted net.
    pub fn resolvent_gap(&self, z: C64) -> f64 {
        self.blocks
            .values()
            .map(|m| min_singular_value(&(identity(m.nrows()).scale(1.0) * z - m)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// One classification flag: whether the residual stayed below tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flag {
    pub holds: bool,
    pub residual: f64,
}

impl Flag {
    fn new(residual: f64, tolerance: f64) -> Flag {
        Flag {
            holds: residual <= tolerance,
            residual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub normal: Flag,
    pub selfadjoint: Flag,
    pub positive: Flag,
    pub projection: Flag,
    pub isometric: Flag,
    pub unitary: Flag,
}

/// A clustered eigenvalue with the nodes contributing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumAtom {
    pub value: C64,
    pub nodes: Vec<String>,
}

/// The spectrum as a finite clustered set, the union over node spectra.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSet {
    pub atoms: Vec<SpectrumAtom>,
}

impl SpectrumSet {
    pub fn values(&self) -> Vec<C64> {
        self.atoms.iter().map(|a| a.value).collect()
    }

    pub fn contains(&self, z: C64, tol: f64) -> bool {
        self.atoms.iter().any(|a| (a.value - z).norm() <= tol)
    }

    /// Set equality as clustered sets within a tolerance.
    pub fn same_as(&self, other: &SpectrumSet, tol: f64) -> bool {
        self.atoms.iter().all(|a| other.contains(a.value, tol))
            && other.atoms.iter().all(|a| self.contains(a.value, tol))
    }
}

/// The multiplication operator by a node-compatible function on a
/// discretized L² system: diagonal blocks with the sampled values, coherent
/// by construction.
pub fn multiplication_operator(
    phi: &LocFunction,
    l2: &DiscretizedL2System,
) -> Result<CoherentOperator, OperatorError> {
    phi.check_restriction_compatible(l2)?;
    let mut blocks = BTreeMap::new();
    for (node, carrier) in &l2.carriers {
        let vals = phi
            .values
            .get(node)
            .ok_or_else(|| OperatorError::UnknownNode(node.clone()))?;
        let mut m = CMat::zeros(carrier.dim(), carrier.dim());
        for (k, &v) in vals.iter().enumerate() {
            m[(k, k)] = v;
        }
        blocks.insert(node.clone(), m);
    }
    Ok(CoherentOperator::from_blocks_unchecked(
        l2.hilbert.clone(),
        l2.hilbert.clone(),
        blocks,
    ))
}

/// Values the function takes on positive-mass carrier points, as a
/// clustered set over all nodes; equals the spectrum of the multiplication
/// operator.
pub fn essential_range(
    phi: &LocFunction,
    l2: &DiscretizedL2System,
    cluster_tol: f64,
) -> SpectrumSet {
    let mut values = Vec::new();
    let mut origins = Vec::new();
    for (node, vals) in &phi.values {
        let carrier = &l2.carriers[node];
        for (p, &v) in carrier.points.iter().zip(vals.iter()) {
            if p.weight > 0.0 {
                values.push(v);
                origins.push(node.clone());
            }
        }
    }
    let clusters = cluster_complex(&values, cluster_tol);
    SpectrumSet {
        atoms: clusters
            .into_iter()
            .map(|(rep, members)| {
                let mut nodes: Vec<String> = members.iter().map(|&i| origins[i].clone()).collect();
                nodes.sort();
                nodes.dedup();
                SpectrumAtom { value: rep, nodes }
            })
            .collect(),
    }
}

/// Report of the commutation-transfer check: when two locally normal nets
/// are intertwined, the adjoints are intertwined as well.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntertwiningReport {
    pub max_premise_residual: f64,
    pub max_adjoint_residual: f64,
    pub pass: bool,
    pub per_node: BTreeMap<String, (f64, f64)>,
}

/// Verifies `N*B = BM*` given locally normal `N`, `M` and an intertwining
/// `NB = BM` within the premise tolerance.
pub fn fuglede_putnam_check(
    n: &CoherentOperator,
    m: &CoherentOperator,
    b: &CoherentOperator,
    premise_tol: f64,
    pass_tol: f64,
) -> Result<IntertwiningReport, OperatorError> {
    if !same_system(&b.codomain, &n.domain) || !same_system(&b.domain, &m.domain) {
        return Err(OperatorError::SystemMismatch);
    }
    for (node, block) in &n.blocks {
        let res = linalg::normality_residual(block);
        if res > tol::CLASSIFY {
            return Err(OperatorError::NonNormalBlock {
                node: node.clone(),
                residual: res,
            });
        }
    }
    for (node, block) in &m.blocks {
        let res = linalg::normality_residual(block);
        if res > tol::CLASSIFY {
            return Err(OperatorError::NonNormalBlock {
                node: node.clone(),
                residual: res,
            });
        }
    }
    let mut per_node = BTreeMap::new();
    let mut max_pre: f64 = 0.0;
    let mut max_post: f64 = 0.0;
    for (node, bb) in &b.blocks {
        let nn = &n.blocks[node];
        let mm = &m.blocks[node];
        let pre = spectral_norm(&(nn * bb - bb * mm));
        if pre > premise_tol {
            return Err(OperatorError::Precondition {
                what: "NB = BM".into(),
                node: node.clone(),
                residual: pre,
            });
        }
        let post = spectral_norm(&(nn.adjoint() * bb - bb * mm.adjoint()));
        max_pre = max_pre.max(pre);
        max_post = max_post.max(post);
        per_node.insert(node.clone(), (pre, post));
    }
    Ok(IntertwiningReport {
        max_premise_residual: max_pre,
        max_adjoint_residual: max_post,
        pass: max_post <= pass_tol,
        per_node,
    })
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

/// Operator file: the system inline and per-node blocks, complex entries
/// as [re, im] pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorDoc {
    pub system: HilbertSystemDoc,
    pub blocks: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

impl OperatorDoc {
    pub fn from_operator(op: &CoherentOperator) -> OperatorDoc {
        OperatorDoc {
            system: HilbertSystemDoc::from_system(op.domain()),
            blocks: op
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), matrix_to_rows(m)))
                .collect(),
        }
    }

    /// Rebuilds and validates the operator at the given tolerance.
    pub fn build(&self, tolerance: f64) -> Result<CoherentOperator, OperatorError> {
        let system = Arc::new(self.system.build()?);
        let blocks = self
            .blocks
            .iter()
            .map(|(k, rows)| (k.clone(), matrix_from_rows(rows)))
            .collect();
        CoherentOperator::validate_endo(blocks, system, tolerance)
    }

    /// Rebuilds the raw net without the coherence check (for verification
    /// commands that must report the violation themselves).
    pub fn build_unchecked(
        &self,
    ) -> Result<(Arc<InductiveHilbertSystem>, BTreeMap<String, CMat>), OperatorError> {
        let system = Arc::new(self.system.build()?);
        let blocks = self
            .blocks
            .iter()
            .map(|(k, rows)| (k.clone(), matrix_from_rows(rows)))
            .collect();
        Ok((system, blocks))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hata::{build_inductive_system, IfsParams, SystemVariant};
    use crate::linalg::{cone, czero, normal_eigen};
    use crate::measure::discretize_l2_system;
    use crate::order::DirectedSet;
    use crate::testkit;

    fn z(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn chain_system(dims: &[usize]) -> Arc<InductiveHilbertSystem> {
        let ids: Vec<String> = (0..dims.len()).map(|i| format!("c{i}")).collect();
        let ds = DirectedSet::chain(&ids).unwrap();
        let mut embeddings = BTreeMap::new();
        for i in 0..dims.len() {
            for j in i + 1..dims.len() {
                let mut m = CMat::zeros(dims[j], dims[i]);
                for k in 0..dims[i] {
                    m[(k, k)] = cone();
                }
                embeddings.insert((ids[i].clone(), ids[j].clone()), m);
            }
        }
        let dim_map: BTreeMap<String, usize> =
            ids.iter().cloned().zip(dims.iter().cloned()).collect();
        Arc::new(InductiveHilbertSystem::from_parts(ds, dim_map, embeddings).unwrap())
    }

    #[test]
    fn identity_blocks_are_coherent() {
        let sys = chain_system(&[1, 2, 3]);
        let id = CoherentOperator::identity_on(sys.clone());
        let revalidated = CoherentOperator::validate_endo(id.blocks().clone(), sys, tol::COHERENCE);
        assert!(revalidated.is_ok());
    }

    #[test]
    fn diagonal_extension_is_coherent() {
        let sys = chain_system(&[1, 2]);
        let mut blocks = BTreeMap::new();
        blocks.insert("c0".into(), CMat::from_row_slice(1, 1, &[z(2.0, 0.0)]));
        blocks.insert(
            "c1".into(),
            CMat::from_row_slice(2, 2, &[z(2.0, 0.0), czero(), czero(), z(5.0, 0.0)]),
        );
        assert!(CoherentOperator::validate_endo(blocks, sys, tol::COHERENCE).is_ok());
    }

    #[test]
    fn off_diagonal_entry_is_rejected_with_pair() {
        let sys = chain_system(&[1, 2]);
        let mut blocks = BTreeMap::new();
        blocks.insert("c0".into(), CMat::from_row_slice(1, 1, &[z(2.0, 0.0)]));
        blocks.insert(
            "c1".into(),
            CMat::from_row_slice(2, 2, &[z(2.0, 0.0), cone(), czero(), z(5.0, 0.0)]),
        );
        let err = CoherentOperator::validate_endo(blocks, sys, tol::COHERENCE).unwrap_err();
        match err {
            OperatorError::NotCoherent {
                lo,
                hi,
                direct,
                block,
            } => {
                assert_eq!((lo.as_str(), hi.as_str()), ("c0", "c1"));
                assert!((direct - 1.0).abs() < 1e-12);
                assert!((block - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn adjoint_of_hermitian_net_is_itself() {
        let mut r = testkit::rng(31);
        let sys = testkit::random_representing_system(&mut r, 4, 6);
        let t = testkit::random_coherent_net(&mut r, &sys, false);
        let h = t.add(&t.adjoint()).unwrap();
        let diff = h.adjoint().sub(&h).unwrap().max_seminorm();
        assert!(diff < 1e-12);
        let tstarstar = t.adjoint().adjoint();
        assert!(tstarstar.sub(&t).unwrap().max_seminorm() == 0.0);
    }

    #[test]
    fn product_adjoint_reverses_factors() {
        let mut r = testkit::rng(37);
        for _ in 0..10 {
            let sys = testkit::random_representing_system(&mut r, 4, 6);
            let s = testkit::random_coherent_net(&mut r, &sys, false);
            let t = testkit::random_coherent_net(&mut r, &sys, false);
            let lhs = s.compose(&t).unwrap().adjoint();
            let rhs = t.adjoint().compose(&s.adjoint()).unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_seminorm() < 1e-12);
        }
    }

    #[test]
    fn composition_is_blockwise_and_associative() {
        let mut r = testkit::rng(41);
        let sys = testkit::random_representing_system(&mut r, 4, 6);
        let a = testkit::random_coherent_net(&mut r, &sys, false);
        let b = testkit::random_coherent_net(&mut r, &sys, false);
        let c = testkit::random_coherent_net(&mut r, &sys, false);
        let id = CoherentOperator::identity_on(sys.clone());
        assert!(a.compose(&id).unwrap().sub(&a).unwrap().max_seminorm() == 0.0);
        for el in sys.index().elements() {
            let blockwise = a.block(el).unwrap() * b.block(el).unwrap();
            assert_eq!(&blockwise, a.compose(&b).unwrap().block(el).unwrap());
        }
        let lhs = a.compose(&b).unwrap().compose(&c).unwrap();
        let rhs = a.compose(&b.compose(&c).unwrap()).unwrap();
        let scale = a.max_seminorm() * b.max_seminorm() * c.max_seminorm();
        assert!(lhs.sub(&rhs).unwrap().max_seminorm() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn seminorm_examples_and_cstar_law() {
        let sys = chain_system(&[2]);
        let id = CoherentOperator::identity_on(sys.clone());
        assert!((id.seminorm("c0").unwrap() - 1.0).abs() < 1e-14);
        let mut blocks = BTreeMap::new();
        blocks.insert(
            "c0".into(),
            CMat::from_row_slice(2, 2, &[z(3.0, 0.0), czero(), czero(), z(0.0, -4.0)]),
        );
        let t = CoherentOperator::validate_endo(blocks, sys, tol::COHERENCE).unwrap();
        assert!((t.seminorm("c0").unwrap() - 4.0).abs() < 1e-12);
        let mut r = testkit::rng(43);
        for _ in 0..10 {
            let sys = testkit::random_representing_system(&mut r, 4, 6);
            let t = testkit::random_coherent_net(&mut r, &sys, false);
            for el in sys.index().elements() {
                let q = t.seminorm(el).unwrap();
                let qq = t.adjoint().compose(&t).unwrap().seminorm(el).unwrap();
                assert!((qq - q * q).abs() <= 1e-9 * (1.0 + q * q));
                assert!((t.adjoint().seminorm(el).unwrap() - q).abs() <= 1e-9 * (1.0 + q));
            }
        }
    }

    #[test]
    fn classification_examples() {
        let sys = chain_system(&[2]);
        let mk = |entries: &[C64]| {
            let mut blocks = BTreeMap::new();
            blocks.insert("c0".into(), CMat::from_row_slice(2, 2, entries));
            CoherentOperator::validate_endo(blocks, sys.clone(), tol::COHERENCE).unwrap()
        };
        let proj = mk(&[cone(), czero(), czero(), czero()]);
        let c = proj.classify(tol::CLASSIFY);
        assert!(c.projection.holds && c.selfadjoint.holds && c.positive.holds);
        assert!(!c.unitary.holds);

        let rot = mk(&[z(0.0, 1.0), czero(), czero(), z(0.0, -1.0)]);
        let c = rot.classify(tol::CLASSIFY);
        assert!(c.normal.holds && !c.selfadjoint.holds && c.unitary.holds);

        let shear = mk(&[cone(), cone(), czero(), cone()]);
        let c = shear.classify(tol::CLASSIFY);
        assert!(!c.normal.holds);
        assert!(c.normal.residual > 0.5);
    }

    #[test]
    fn spectrum_examples_and_blockwise_oracle() {
        let sys = chain_system(&[1, 2]);
        let mut blocks = BTreeMap::new();
        blocks.insert("c0".into(), CMat::from_row_slice(1, 1, &[cone()]));
        blocks.insert(
            "c1".into(),
            CMat::from_row_slice(2, 2, &[cone(), czero(), czero(), z(2.0, 0.0)]),
        );
        let t = CoherentOperator::validate_endo(blocks, sys.clone(), tol::COHERENCE).unwrap();
        let spec = t.spectrum(tol::EIGEN_CLUSTER).unwrap();
        assert_eq!(spec.atoms.len(), 2);
        assert!(spec.contains(cone(), 1e-9) && spec.contains(z(2.0, 0.0), 1e-9));
        // the smaller node contributes only the shared eigenvalue
        let one = spec
            .atoms
            .iter()
            .find(|a| (a.value - cone()).norm() < 1e-9)
            .unwrap();
        assert_eq!(one.nodes, vec!["c0".to_string(), "c1".to_string()]);

        let id = CoherentOperator::identity_on(sys);
        assert_eq!(id.spectrum(tol::EIGEN_CLUSTER).unwrap().atoms.len(), 1);

        // random normal nets: Schur route equals the Hermitian-pair route
        let mut r = testkit::rng(47);
        for _ in 0..10 {
            let sys = testkit::random_representing_system(&mut r, 4, 6);
            let n = testkit::random_coherent_net(&mut r, &sys, true);
            let spec = n.spectrum(tol::EIGEN_CLUSTER).unwrap();
            for el in sys.index().elements() {
                for (v, _) in normal_eigen(n.block(el).unwrap(), 1e-8, 1e-8).unwrap() {
                    assert!(spec.contains(v, 1e-7), "missing {v} at {el}");
                }
            }
        }
    }

    #[test]
    fn resolvent_probes_separate_spectrum() {
        let mut r = testkit::rng(53);
        let sys = testkit::random_representing_system(&mut r, 4, 6);
        let n = testkit::random_coherent_net(&mut r, &sys, true);
        let spec = n.spectrum(tol::EIGEN_CLUSTER).unwrap();
        for atom in &spec.atoms {
            assert!(n.resolvent_gap(atom.value) < 1e-8);
        }
        let mut found = 0;
        let mut k = 0;
        while found < 5 && k < 200 {
            let probe = testkit::random_complex(&mut r) * 4.0;
            k += 1;
            let dist = spec
                .values()
                .iter()
                .map(|v| (*v - probe).norm())
                .fold(f64::INFINITY, f64::min);
            if dist > 1e-3 {
                found += 1;
                assert!(n.resolvent_gap(probe) > 1e-6);
            }
        }
        assert!(found >= 5);
    }

    #[test]
    fn multiplication_operator_examples() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 1).unwrap();
        let l2 = discretize_l2_system(&hs.system, 2).unwrap();
        let one = LocFunction::constant(&l2, cone());
        let m1 = multiplication_operator(&one, &l2).unwrap();
        let id = CoherentOperator::identity_on(l2.hilbert.clone());
        assert!(m1.sub(&id).unwrap().max_seminorm() == 0.0);

        // real-part multiplier on the seed level: diagonal of midpoint abscissae
        let re = LocFunction::from_fn(&l2, |pt| pt.position.map(|q| z(q.re, 0.0))).unwrap();
        let m = multiplication_operator(&re, &l2).unwrap();
        let block = m.block("X0").unwrap();
        let mut expected: Vec<f64> = vec![0.25, 0.75, 0.075, 0.225];
        let mut got: Vec<f64> = (0..4).map(|k| block[(k, k)].re).collect();
        expected.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (e, g) in expected.iter().zip(got.iter()) {
            assert!((e - g).abs() < 1e-14);
        }
    }

    #[test]
    fn atomic_multiplier_and_star_morphism() {
        let index = DirectedSet::chain(&["n".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            "n".into(),
            crate::measure::MeasureSpaceNode {
                carrier: crate::measure::Carrier::atomic(
                    [("a".to_string(), 1.0), ("b".to_string(), 1.0)].into(),
                ),
            },
        );
        let sys =
            crate::measure::InductiveMeasureSystem::validate(index, nodes, None, None).unwrap();
        let l2 = discretize_l2_system(&sys, 1).unwrap();
        let phi = LocFunction::from_table(
            &l2,
            &[
                ("a".to_string(), z(2.0, 0.0)),
                ("b".to_string(), z(3.0, 0.0)),
            ]
            .into(),
        )
        .unwrap();
        let psi = LocFunction::from_table(
            &l2,
            &[
                ("a".to_string(), z(0.0, 1.0)),
                ("b".to_string(), z(-1.0, 0.0)),
            ]
            .into(),
        )
        .unwrap();
        let m_phi = multiplication_operator(&phi, &l2).unwrap();
        assert_eq!(m_phi.block("n").unwrap()[(0, 0)], z(2.0, 0.0));
        assert_eq!(m_phi.block("n").unwrap()[(1, 1)], z(3.0, 0.0));
        let m_psi = multiplication_operator(&psi, &l2).unwrap();
        // pointwise operations match operator operations exactly
        let prod = LocFunction {
            values: phi
                .values
                .iter()
                .map(|(k, v)| {
                    (
                        k.clone(),
                        v.iter().zip(&psi.values[k]).map(|(x, y)| x * y).collect(),
                    )
                })
                .collect(),
        };
        let m_prod = multiplication_operator(&prod, &l2).unwrap();
        assert!(
            m_prod
                .sub(&m_phi.compose(&m_psi).unwrap())
                .unwrap()
                .max_seminorm()
                == 0.0
        );
        let m_sum = multiplication_operator(
            &LocFunction {
                values: phi
                    .values
                    .iter()
                    .map(|(k, v)| {
                        (
                            k.clone(),
                            v.iter().zip(&psi.values[k]).map(|(x, y)| x + y).collect(),
                        )
                    })
                    .collect(),
            },
            &l2,
        )
        .unwrap();
        assert!(
            m_sum
                .sub(&m_phi.add(&m_psi).unwrap())
                .unwrap()
                .max_seminorm()
                == 0.0
        );
        let conj = phi.map(|v| v.conj());
        let m_conj = multiplication_operator(&conj, &l2).unwrap();
        assert!(m_conj.sub(&m_phi.adjoint()).unwrap().max_seminorm() == 0.0);
    }

    #[test]
    fn essential_range_excludes_null_atoms() {
        let index = DirectedSet::chain(&["n".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            "n".into(),
            crate::measure::MeasureSpaceNode {
                carrier: crate::measure::Carrier::Atomic {
                    atoms: [("null".to_string(), 0.0), ("a".to_string(), 1.0)].into(),
                    zero_flagged: ["null".to_string()].into(),
                },
            },
        );
        let sys =
            crate::measure::InductiveMeasureSystem::validate(index, nodes, None, None).unwrap();
        let l2 = discretize_l2_system(&sys, 1).unwrap();
        // the null atom never enters the carrier, so the function only needs a
        // value on the massive atom
        let phi = LocFunction::from_table(&l2, &[("a".to_string(), z(2.0, 0.0))].into()).unwrap();
        let range = essential_range(&phi, &l2, tol::EIGEN_CLUSTER);
        assert_eq!(range.atoms.len(), 1);
        assert!(range.contains(z(2.0, 0.0), 1e-12));
        let m = multiplication_operator(&phi, &l2).unwrap();
        assert!(range.same_as(&m.spectrum(tol::EIGEN_CLUSTER).unwrap(), 1e-8));
    }

    #[test]
    fn compression_recovers_the_smaller_block() {
        let mut r = testkit::rng(59);
        for _ in 0..10 {
            let sys = testkit::random_representing_system(&mut r, 5, 8);
            let t = testkit::random_coherent_net(&mut r, &sys, false);
            for (lo, hi) in sys.index().comparable_pairs() {
                let j = sys.embedding(&lo, &hi).unwrap();
                let compressed = j.adjoint() * t.block(&hi).unwrap() * &j;
                assert!(
                    spectral_norm(&(compressed - t.block(&lo).unwrap())) < 1e-12,
                    "pair ({lo}, {hi})"
                );
            }
        }
    }

    #[test]
    fn intertwining_check_trivial_cases() {
        let mut r = testkit::rng(61);
        let sys = testkit::random_representing_system(&mut r, 4, 6);
        let n = testkit::random_coherent_net(&mut r, &sys, true);
        let id = CoherentOperator::identity_on(sys.clone());
        let report = fuglede_putnam_check(&n, &n, &id, tol::FP_PRE, tol::FP_PASS).unwrap();
        assert!(report.pass);
        assert!(report.max_adjoint_residual < 1e-12);
    }

    #[test]
    fn intertwining_premise_violation_is_reported() {
        let sys = chain_system(&[2]);
        let mk = |entries: &[C64]| {
            let mut blocks = BTreeMap::new();
            blocks.insert("c0".into(), CMat::from_row_slice(2, 2, entries));
            CoherentOperator::validate_endo(blocks, sys.clone(), tol::COHERENCE).unwrap()
        };
        let n = mk(&[cone(), czero(), czero(), z(2.0, 0.0)]);
        let m = mk(&[z(3.0, 0.0), czero(), czero(), z(4.0, 0.0)]);
        let b = mk(&[cone(), cone(), cone(), cone()]);
        let err = fuglede_putnam_check(&n, &m, &b, tol::FP_PRE, tol::FP_PASS).unwrap_err();
        assert!(matches!(err, OperatorError::Precondition { .. }));
    }

    #[test]
    fn operator_json_round_trip() {
        let mut r = testkit::rng(67);
        let sys = testkit::random_representing_system(&mut r, 4, 6);
        let t = testkit::random_coherent_net(&mut r, &sys, true);
        let doc = OperatorDoc::from_operator(&t);
        let text = serde_json::to_string(&doc).unwrap();
        let doc2: OperatorDoc = serde_json::from_str(&text).unwrap();
        let rebuilt = doc2.build(tol::COHERENCE).unwrap();
        for el in sys.index().elements() {
            assert_eq!(rebuilt.block(el).unwrap(), t.block(el).unwrap());
        }
    }
}
