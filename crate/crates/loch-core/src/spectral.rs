//! Spectral models for locally normal coherent nets: projection-valued
//! measures assembled from per-node eigenprojections, integration and the
//! bounded functional calculus, and the constructive multiplicity and
//! multiplication-operator models obtained by joint diagonalization along
//! a witness chain.

use crate::hilbert::HilbertError;
use crate::linalg::orthonormal_complement;
use crate::linalg::{
    identity, phase_normalize_columns, refine_by_hermitian, reorthonormalize, spectral_norm, CMat,
    JointPiece, C64,
};
use crate::measure::{
    discretize_l2_system, Carrier, DiscretizedL2System, InductiveMeasureSystem, LocFunction,
    MeasureError, MeasureSpaceNode,
};
use crate::operator::{multiplication_operator, CoherentOperator, OperatorError};
use crate::order::{is_sequentially_finite, ChainWitness, OrderError};
use crate::tol;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("operator error: {0}")]
    Operator(#[from] OperatorError),
    #[error("hilbert error: {0}")]
    Hilbert(#[from] HilbertError),
    #[error("measure error: {0}")]
    Measure(#[from] MeasureError),
    #[error("witness error: {0}")]
    Witness(#[from] OrderError),
    #[error("operator is not locally normal (residual {residual:.3e} at node {node:?})")]
    NotNormal { node: String, residual: f64 },
    #[error("projection net for atom at {value} fails coherence between {lo:?} and {hi:?} (residual {residual:.3e})")]
    MeasureAssembly {
        value: C64,
        lo: String,
        hi: String,
        residual: f64,
    },
    #[error("no value supplied for spectrum atom at {value}")]
    MissingAtomValue { value: C64 },
    #[error("model bookkeeping failed at node {node:?}: selected dimensions {got} != {expected}")]
    Internal {
        node: String,
        got: usize,
        expected: usize,
    },
    #[error(
        "joint refinement is unstable: projection onto {node:?} takes label {label} on an eigenspace"
    )]
    UnstableRefinement { node: String, label: f64 },
}

impl SpectralError {
    pub fn tag(&self) -> &'static str {
        match self {
            SpectralError::Operator(e) => e.tag(),
            SpectralError::Hilbert(e) => e.tag(),
            SpectralError::Measure(e) => e.tag(),
            SpectralError::Witness(e) => e.tag(),
            SpectralError::NotNormal { .. } => "e:roteb",
            SpectralError::MeasureAssembly { .. } => "psm2",
            SpectralError::MissingAtomValue { .. } => "e:isin",
            SpectralError::Internal { .. } | SpectralError::UnstableRefinement { .. } => "t:st2",
        }
    }
}

fn require_locally_normal(op: &CoherentOperator) -> Result<(), SpectralError> {
    for (node, block) in op.blocks() {
        let r = crate::linalg::normality_residual(block);
        if r > tol::CLASSIFY {
            return Err(SpectralError::NotNormal {
                node: node.clone(),
                residual: r,
            });
        }
    }
    Ok(())
}

/// One atom of a locally spectral measure: a clustered eigenvalue with its
/// projection net.
#[derive(Debug, Clone)]
pub struct SpectralMeasureAtom {
    pub value: C64,
    pub nodes: Vec<String>,
    pub projection: CoherentOperator,
}

/// The projection-valued measure of a locally normal net, supported on its
/// clustered eigenvalues. Set operations are over atom subsets.
#[derive(Debug, Clone)]
pub struct LocalSpectralMeasure {
    source: CoherentOperator,
    atoms: Vec<SpectralMeasureAtom>,
}

/// Builds the spectral measure of a locally normal net: per-node
/// eigenprojections of the blocks, clustered across nodes and assembled
/// into coherent projection nets.
pub fn spectral_measure(n: &CoherentOperator) -> Result<LocalSpectralMeasure, SpectralError> {
    require_locally_normal(n)?;
    n.system().check_representing(tol::REPRESENTING)?;
    // per node eigen pieces
    let mut all_values: Vec<C64> = Vec::new();
    let mut piece_index: Vec<(String, CMat)> = Vec::new();
    for (node, block) in n.blocks() {
        let pieces = crate::linalg::normal_eigen(block, tol::EIGEN_CLUSTER, tol::CLASSIFY)
            .map_err(|r| SpectralError::NotNormal {
                node: node.clone(),
                residual: r,
            })?;
        for (value, basis) in pieces {
            all_values.push(value);
            piece_index.push((node.clone(), basis));
        }
    }
    let clusters = crate::linalg::cluster_complex(&all_values, tol::EIGEN_CLUSTER);
    let mut atoms = Vec::new();
    for (rep, members) in clusters {
        let mut nodes: Vec<String> = members.iter().map(|&i| piece_index[i].0.clone()).collect();
        nodes.sort();
        nodes.dedup();
        let mut blocks: BTreeMap<String, CMat> = n
            .blocks()
            .keys()
            .map(|k| {
                let d = n.system().dim(k).unwrap();
                (k.clone(), CMat::zeros(d, d))
            })
            .collect();
        for &i in &members {
            let (node, basis) = &piece_index[i];
            let p = basis * basis.adjoint();
            let entry = blocks.get_mut(node).unwrap();
            *entry += p;
        }
        let projection =
            CoherentOperator::validate_endo(blocks, n.system().clone(), tol::SPECTRAL_LAWS)
                .map_err(|e| match e {
                    OperatorError::NotCoherent { lo, hi, direct, .. } => {
                        SpectralError::MeasureAssembly {
                            value: rep,
                            lo,
                            hi,
                            residual: direct,
                        }
                    }
                    other => SpectralError::Operator(other),
                })?;
        atoms.push(SpectralMeasureAtom {
            value: rep,
            nodes,
            projection,
        });
    }
    Ok(LocalSpectralMeasure {
        source: n.clone(),
        atoms,
    })
}

impl LocalSpectralMeasure {
    pub fn atoms(&self) -> &[SpectralMeasureAtom] {
        &self.atoms
    }

    pub fn source(&self) -> &CoherentOperator {
        &self.source
    }

    /// E(A) for an atom subset, as a coherent projection net.
    pub fn projection_for(&self, subset: &BTreeSet<usize>) -> CoherentOperator {
        let sys = self.source.system().clone();
        let mut blocks: BTreeMap<String, CMat> = sys
            .index()
            .elements()
            .iter()
            .map(|el| {
                let d = sys.dim(el).unwrap();
                (el.clone(), CMat::zeros(d, d))
            })
            .collect();
        for &k in subset {
            for (node, b) in self.atoms[k].projection.blocks() {
                *blocks.get_mut(node).unwrap() += b;
            }
        }
        CoherentOperator::from_blocks_unchecked(sys.clone(), sys, blocks)
    }

    pub fn full_projection(&self) -> CoherentOperator {
        self.projection_for(&(0..self.atoms.len()).collect())
    }

    /// Statistics of the measure laws: Hermitian/idempotent atoms,
    /// unitality, multiplicativity `E(A∩B) = E(A)E(B)`, and additivity on
    /// disjoint unions. Subset pairs are exhaustive up to six atoms and
    /// pseudo-random (seed-driven) beyond.
    pub fn laws_report(&self, seed: u64) -> SpectralLawsReport {
        let k = self.atoms.len();
        let mut max_hermitian: f64 = 0.0;
        let mut max_projection: f64 = 0.0;
        for atom in &self.atoms {
            let c = atom.projection.classify(tol::SPECTRAL_LAWS);
            max_hermitian = max_hermitian.max(c.selfadjoint.residual);
            max_projection = max_projection.max(c.projection.residual);
        }
        let unital = {
            let total = self.full_projection();
            let ident = CoherentOperator::identity_on(self.source.system().clone());
            total.sub(&ident).expect("same system").max_seminorm()
        };
        // subset pairs
        let mut pairs: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
        if k <= 6 {
            let subsets: Vec<BTreeSet<usize>> = (0..(1usize << k))
                .map(|mask| (0..k).filter(|i| mask >> i & 1 == 1).collect())
                .collect();
            for a in &subsets {
                for b in &subsets {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        } else {
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            for _ in 0..64 {
                let ma = next() as usize;
                let mb = next() as usize;
                pairs.push((
                    (0..k).filter(|i| ma >> (i % 64) & 1 == 1).collect(),
                    (0..k).filter(|i| mb >> ((i + 17) % 64) & 1 == 1).collect(),
                ));
            }
        }
        let mut max_multiplicative: f64 = 0.0;
        let mut max_additive: f64 = 0.0;
        for (a, b) in &pairs {
            let ea = self.projection_for(a);
            let eb = self.projection_for(b);
            let inter: BTreeSet<usize> = a.intersection(b).cloned().collect();
            let e_inter = self.projection_for(&inter);
            let prod = ea.compose(&eb).expect("same system");
            max_multiplicative =
                max_multiplicative.max(prod.sub(&e_inter).expect("same system").max_seminorm());
            if a.is_disjoint(b) {
                let union: BTreeSet<usize> = a.union(b).cloned().collect();
                let e_union = self.projection_for(&union);
                let sum = ea.add(&eb).expect("same system");
                max_additive =
                    max_additive.max(sum.sub(&e_union).expect("same system").max_seminorm());
            }
        }
        SpectralLawsReport {
            atom_count: k,
            max_hermitian_residual: max_hermitian,
            max_projection_residual: max_projection,
            unital_residual: unital,
            max_multiplicativity_residual: max_multiplicative,
            max_additivity_residual: max_additive,
            pairs_checked: pairs.len(),
        }
    }

    /// Both sides of the commutant criterion for a test net: the residual
    /// of commuting with the source and the worst residual of commuting
    /// with the atom projections.
    pub fn commutant_check(&self, t: &CoherentOperator) -> Result<CommutantReport, SpectralError> {
        let n = &self.source;
        let tn = t.compose(n)?;
        let nt = n.compose(t)?;
        let with_source = tn.sub(&nt)?.max_seminorm();
        let mut with_atoms: f64 = 0.0;
        for atom in &self.atoms {
            let te = t.compose(&atom.projection)?;
            let et = atom.projection.compose(t)?;
            with_atoms = with_atoms.max(te.sub(&et)?.max_seminorm());
        }
        Ok(CommutantReport {
            with_source,
            with_atoms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralLawsReport {
    pub atom_count: usize,
    pub max_hermitian_residual: f64,
    pub max_projection_residual: f64,
    pub unital_residual: f64,
    pub max_multiplicativity_residual: f64,
    pub max_additivity_residual: f64,
    pub pairs_checked: usize,
}

impl SpectralLawsReport {
    pub fn max_residual(&self) -> f64 {
        self.max_hermitian_residual
            .max(self.max_projection_residual)
            .max(self.unital_residual)
            .max(self.max_multiplicativity_residual)
            .max(self.max_additivity_residual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutantReport {
    pub with_source: f64,
    pub with_atoms: f64,
}

/// Integrates a function of the spectrum atoms against the measure:
/// `N(f) = Σ f(z_k) E({z_k})`, a locally normal coherent net.
pub fn integrate(f: impl Fn(C64) -> C64, e: &LocalSpectralMeasure) -> CoherentOperator {
    let sys = e.source.system().clone();
    let mut blocks: BTreeMap<String, CMat> = sys
        .index()
        .elements()
        .iter()
        .map(|el| {
            let d = sys.dim(el).unwrap();
            (el.clone(), CMat::zeros(d, d))
        })
        .collect();
    for atom in &e.atoms {
        let w = f(atom.value);
        for (node, b) in atom.projection.blocks() {
            *blocks.get_mut(node).unwrap() += b * w;
        }
    }
    CoherentOperator::from_blocks_unchecked(sys.clone(), sys, blocks)
}

/// Integration with values supplied per atom; atoms without a matching
/// table entry (within the cluster tolerance) are a domain error.
pub fn integrate_table(
    table: &[(C64, C64)],
    e: &LocalSpectralMeasure,
) -> Result<CoherentOperator, SpectralError> {
    for atom in &e.atoms {
        if !table
            .iter()
            .any(|(z, _)| (*z - atom.value).norm() <= tol::EIGEN_CLUSTER)
        {
            return Err(SpectralError::MissingAtomValue { value: atom.value });
        }
    }
    Ok(integrate(
        |z| {
            table
                .iter()
                .find(|(x, _)| (*x - z).norm() <= tol::EIGEN_CLUSTER)
                .map(|(_, v)| *v)
                .unwrap()
        },
        e,
    ))
}

/// The bounded functional calculus `ψ(N) = ∫ ψ dE`; multiplicative,
/// involutive, and unital over the atoms.
pub fn borel_calculus(
    psi: impl Fn(C64) -> C64,
    n: &CoherentOperator,
) -> Result<CoherentOperator, SpectralError> {
    let e = spectral_measure(n)?;
    Ok(integrate(psi, &e))
}

/// One point of the multiplicity model: a maximal joint eigenspace of the
/// generating family, carrying its eigenvalue, dimension (the spectral
/// multiplicity), and per-node membership.
#[derive(Debug, Clone)]
pub struct ModelPoint {
    pub id: String,
    pub multiplicity: usize,
    pub value: C64,
    pub membership: BTreeMap<String, bool>,
    basis: CMat,
}

impl ModelPoint {
    pub fn basis(&self) -> &CMat {
        &self.basis
    }
}

/// The multiplicity-stratified model of a locally normal net: points with
/// counting measure per multiplicity layer, the scalar function per layer,
/// and per-node unitaries onto the layered coordinates. The
/// infinite-multiplicity layer is reserved and always empty at finite
/// dimension.
#[derive(Debug, Clone)]
pub struct MultiplicityModel {
    operator: CoherentOperator,
    witness: ChainWitness,
    top: String,
    points: Vec<ModelPoint>,
    unitaries: BTreeMap<String, CMat>,
    diagonals: BTreeMap<String, CMat>,
    residuals: BTreeMap<String, f64>,
    unitarity: BTreeMap<String, f64>,
}

struct TaggedPiece {
    tag: Option<String>,
    piece: JointPiece,
}

/// Constructs the multiplicity model by processing the witness chain in
/// order: at each chain element the commuting family consisting of the
/// block of the operator and the projections onto all spaces below is
/// jointly diagonalized by recursive eigenspace refinement; eigenspaces
/// carried over from earlier steps keep their point identities.
pub fn multiplicity_model(
    n: &CoherentOperator,
    witness: &ChainWitness,
) -> Result<MultiplicityModel, SpectralError> {
    require_locally_normal(n)?;
    let sys = n.system().clone();
    sys.check_representing(tol::REPRESENTING)?;
    is_sequentially_finite(sys.index(), witness)?;
    let mut chain: Vec<String> = Vec::new();
    for c in &witness.chain {
        if chain.last() != Some(c) {
            chain.push(c.clone());
        }
    }
    let mut counter = 0usize;
    let mut pieces: Vec<TaggedPiece> = Vec::new();
    let mut prev_top: Option<String> = None;
    let mut node_order: Vec<String> = Vec::new();
    for epsilon in &chain {
        let d = sys.dim(epsilon)?;
        // carry over the previous eigenspaces and open the complement
        let mut current: Vec<TaggedPiece> = Vec::new();
        match &prev_top {
            None => current.push(TaggedPiece {
                tag: None,
                piece: JointPiece {
                    basis: identity(d),
                    labels: Vec::new(),
                },
            }),
            Some(prev) => {
                let j = sys.embedding(prev, epsilon)?;
                for tp in &pieces {
                    current.push(TaggedPiece {
                        tag: tp.tag.clone(),
                        piece: JointPiece {
                            basis: reorthonormalize(&(&j * &tp.piece.basis)),
                            labels: Vec::new(),
                        },
                    });
                }
                let comp = orthonormal_complement(&j);
                if comp.ncols() > 0 {
                    current.push(TaggedPiece {
                        tag: None,
                        piece: JointPiece {
                            basis: comp,
                            labels: Vec::new(),
                        },
                    });
                }
            }
        }
        // generating family: the block first, then projections in index order
        let block = n.block(epsilon)?.clone();
        let herm_re = (&block + block.adjoint()).scale(0.5);
        let herm_im = ((&block - block.adjoint()) * C64::new(0.0, -0.5)).clone_owned();
        let mut generators = vec![herm_re, herm_im];
        node_order = sys.index().down_set(epsilon)?;
        for lambda in &node_order {
            generators.push(sys.projection_onto(lambda, epsilon)?);
        }
        let mut refined: Vec<TaggedPiece> = Vec::new();
        for tp in current {
            let mut subs = vec![tp.piece];
            for g in &generators {
                subs = refine_by_hermitian(subs, g, tol::EIGEN_CLUSTER);
            }
            if subs.len() == 1 {
                refined.push(TaggedPiece {
                    tag: tp.tag,
                    piece: subs.pop().unwrap(),
                });
            } else {
                // refinement split: keep deterministic derived identities
                for (k, p) in subs.into_iter().enumerate() {
                    let tag = tp.tag.as_ref().map(|t| format!("{t}.{}", k + 1));
                    refined.push(TaggedPiece { tag, piece: p });
                }
            }
        }
        // name fresh pieces in label order
        refined.sort_by(|a, b| {
            label_key(&a.piece)
                .partial_cmp(&label_key(&b.piece))
                .unwrap()
        });
        for tp in &mut refined {
            if tp.tag.is_none() {
                counter += 1;
                tp.tag = Some(format!("x{counter}"));
            }
        }
        pieces = refined;
        prev_top = Some(epsilon.clone());
    }
    let top = prev_top.expect("witness chain is nonempty");
    // assemble points: membership from the projection labels of the final
    // refinement (generators after the two Hermitian parts)
    let mut points = Vec::new();
    for tp in &pieces {
        let labels = &tp.piece.labels;
        let value = C64::new(labels[0], labels[1]);
        let mut membership = BTreeMap::new();
        for (i, lambda) in node_order.iter().enumerate() {
            let label = labels[i + 2];
            // projection labels must separate cleanly into 0 and 1
            if label.min(1.0 - label).abs() > 1e-6 {
                return Err(SpectralError::UnstableRefinement {
                    node: lambda.clone(),
                    label,
                });
            }
            membership.insert(lambda.clone(), label > 0.5);
        }
        let mut basis = tp.piece.basis.clone();
        phase_normalize_columns(&mut basis, 1e-8);
        points.push(ModelPoint {
            id: tp.tag.clone().unwrap(),
            multiplicity: basis.ncols(),
            value,
            membership,
            basis,
        });
    }
    points.sort_by(|a, b| point_key(a).partial_cmp(&point_key(b)).unwrap());
    // per-node unitaries and diagonals
    let mut unitaries = BTreeMap::new();
    let mut diagonals = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    let mut unitarity = BTreeMap::new();
    for lambda in sys.index().elements() {
        let d = sys.dim(lambda)?;
        let j = sys.embedding(lambda, &top)?;
        let selected: Vec<&ModelPoint> = points
            .iter()
            .filter(|p| p.membership.get(lambda).copied().unwrap_or(false))
            .collect();
        let total: usize = selected.iter().map(|p| p.multiplicity).sum();
        if total != d {
            return Err(SpectralError::Internal {
                node: lambda.clone(),
                got: total,
                expected: d,
            });
        }
        let mut u = CMat::zeros(d, d);
        let mut diag = CMat::zeros(d, d);
        let mut row = 0usize;
        for p in &selected {
            let coords = j.adjoint() * &p.basis;
            for k in 0..p.multiplicity {
                let r = coords.column(k).adjoint();
                u.row_mut(row).copy_from(&r);
                diag[(row, row)] = p.value;
                row += 1;
            }
        }
        let block = n.block(lambda)?;
        let conj = &u * block * u.adjoint();
        residuals.insert(lambda.clone(), spectral_norm(&(conj - &diag)));
        unitarity.insert(
            lambda.clone(),
            spectral_norm(&(&u * u.adjoint() - identity(d)))
                .max(spectral_norm(&(u.adjoint() * &u - identity(d)))),
        );
        unitaries.insert(lambda.clone(), u);
        diagonals.insert(lambda.clone(), diag);
    }
    Ok(MultiplicityModel {
        operator: n.clone(),
        witness: witness.clone(),
        top,
        points,
        unitaries,
        diagonals,
        residuals,
        unitarity,
    })
}

fn label_key(p: &JointPiece) -> Vec<f64> {
    let mut key: Vec<f64> = p.labels.iter().take(2).cloned().collect();
    for l in p.labels.iter().skip(2) {
        key.push(if *l > 0.5 { 1.0 } else { 0.0 });
    }
    key
}

fn point_key(p: &ModelPoint) -> (usize, f64, f64, Vec<bool>, String) {
    (
        p.multiplicity,
        p.value.re,
        p.value.im,
        p.membership.values().cloned().collect(),
        p.id.clone(),
    )
}

impl MultiplicityModel {
    pub fn operator(&self) -> &CoherentOperator {
        &self.operator
    }

    pub fn witness(&self) -> &ChainWitness {
        &self.witness
    }

    pub fn top(&self) -> &str {
        &self.top
    }

    pub fn points(&self) -> &[ModelPoint] {
        &self.points
    }

    pub fn unitary(&self, node: &str) -> Option<&CMat> {
        self.unitaries.get(node)
    }

    pub fn diagonal(&self, node: &str) -> Option<&CMat> {
        self.diagonals.get(node)
    }

    pub fn residuals(&self) -> &BTreeMap<String, f64> {
        &self.residuals
    }

    pub fn unitarity_residuals(&self) -> &BTreeMap<String, f64> {
        &self.unitarity
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().cloned().fold(0.0, f64::max)
    }

    /// Multiplicities occurring in the model; the infinite layer is
    /// reserved but empty at finite dimension.
    pub fn multiplicities(&self) -> BTreeSet<usize> {
        self.points.iter().map(|p| p.multiplicity).collect()
    }

    pub fn infinite_layer_empty(&self) -> bool {
        true
    }

    /// Points of one multiplicity layer visible at one node.
    pub fn layer_points(&self, node: &str, multiplicity: usize) -> Vec<&ModelPoint> {
        self.points
            .iter()
            .filter(|p| {
                p.multiplicity == multiplicity && p.membership.get(node).copied().unwrap_or(false)
            })
            .collect()
    }

    /// The measure system of one multiplicity layer: atomic nodes with
    /// counting measure on the layer points.
    pub fn measure_system(
        &self,
        multiplicity: usize,
    ) -> Result<InductiveMeasureSystem, MeasureError> {
        let index = self.operator.system().index().clone();
        let mut nodes = BTreeMap::new();
        for el in index.elements() {
            let atoms: BTreeMap<String, f64> = self
                .layer_points(el, multiplicity)
                .iter()
                .map(|p| (p.id.clone(), 1.0))
                .collect();
            nodes.insert(
                el.clone(),
                MeasureSpaceNode {
                    carrier: Carrier::atomic(atoms),
                },
            );
        }
        InductiveMeasureSystem::validate(index, nodes, None, None)
    }

    /// The scalar function of one layer: point id to eigenvalue.
    pub fn phi_table(&self, multiplicity: usize) -> BTreeMap<String, C64> {
        self.points
            .iter()
            .filter(|p| p.multiplicity == multiplicity)
            .map(|p| (p.id.clone(), p.value))
            .collect()
    }

    /// Per node: sum of multiplicity times layer size, which must equal the
    /// node dimension.
    pub fn dimension_bookkeeping(&self, node: &str) -> (usize, usize) {
        let total: usize = self
            .points
            .iter()
            .filter(|p| p.membership.get(node).copied().unwrap_or(false))
            .map(|p| p.multiplicity)
            .sum();
        (total, self.operator.system().dim(node).unwrap_or(0))
    }

    /// Largest eigenvalue magnitude per node over the member points; bounded
    /// by the node seminorm of the source.
    pub fn sup_phi(&self, node: &str) -> f64 {
        self.points
            .iter()
            .filter(|p| p.membership.get(node).copied().unwrap_or(false))
            .map(|p| p.value.norm())
            .fold(0.0, f64::max)
    }
}

/// The flattened multiplication-operator model: each multiplicity-n point
/// replicated into n copies, one atomic measure system with counting
/// measure, the function on it, and the conjugating locally unitary net.
#[derive(Debug, Clone)]
pub struct FunctionalModel {
    pub model: MultiplicityModel,
    pub l2: DiscretizedL2System,
    pub phi: LocFunction,
    pub v: CoherentOperator,
    pub residuals: BTreeMap<String, f64>,
}

/// Flattens the multiplicity model into a single multiplication-operator
/// model `N = V* M_φ V`.
pub fn functional_model(
    n: &CoherentOperator,
    witness: &ChainWitness,
) -> Result<FunctionalModel, SpectralError> {
    let model = multiplicity_model(n, witness)?;
    let sys = n.system().clone();
    // copy ids ordered like the model rows: points in canonical order, each
    // with `multiplicity` copies
    let mut copy_ids: Vec<(String, C64, String)> = Vec::new(); // (copy id, value, point id)
    for (ord, p) in model.points().iter().enumerate() {
        for k in 0..p.multiplicity {
            copy_ids.push((format!("{ord:04}-{}#{k:02}", p.id), p.value, p.id.clone()));
        }
    }
    let index = sys.index().clone();
    let mut nodes = BTreeMap::new();
    for el in index.elements() {
        let mut atoms = BTreeMap::new();
        for (ord, p) in model.points().iter().enumerate() {
            if p.membership.get(el).copied().unwrap_or(false) {
                for k in 0..p.multiplicity {
                    atoms.insert(format!("{ord:04}-{}#{k:02}", p.id), 1.0);
                }
            }
        }
        nodes.insert(
            el.clone(),
            MeasureSpaceNode {
                carrier: Carrier::atomic(atoms),
            },
        );
    }
    let measure = InductiveMeasureSystem::validate(index, nodes, None, None)?;
    let l2 = discretize_l2_system(&measure, 1)?;
    let table: BTreeMap<String, C64> = copy_ids
        .iter()
        .map(|(cid, v, _)| (cid.clone(), *v))
        .collect();
    let phi = LocFunction::from_table(&l2, &table)?;
    // V per node is the model unitary; the flat coordinates list the same
    // (point, copy) rows in the same order
    let mut blocks = BTreeMap::new();
    for el in sys.index().elements() {
        blocks.insert(el.clone(), model.unitary(el).unwrap().clone());
    }
    let v = CoherentOperator::validate(blocks, sys.clone(), l2.hilbert.clone(), tol::COHERENCE)?;
    let m_phi = multiplication_operator(&phi, &l2)?;
    let mut residuals = BTreeMap::new();
    for el in sys.index().elements() {
        let vb = v.block(el)?;
        let nb = n.block(el)?;
        let mb = m_phi.block(el)?;
        residuals.insert(el.clone(), spectral_norm(&(vb * nb * vb.adjoint() - mb)));
    }
    Ok(FunctionalModel {
        model,
        l2,
        phi,
        v,
        residuals,
    })
}

impl FunctionalModel {
    pub fn max_residual(&self) -> f64 {
        self.residuals.values().cloned().fold(0.0, f64::max)
    }

    pub fn multiplication_operator(&self) -> Result<CoherentOperator, SpectralError> {
        Ok(multiplication_operator(&self.phi, &self.l2)?)
    }
}

/// One fiber of the direct-integral view: a model point with its fiber
/// dimension and scalar value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fiber {
    pub point: String,
    pub dim: usize,
    pub scalar: [f64; 2],
}

/// Re-indexed view of the multiplicity model as a field of fibers per
/// node; purely a serialization of existing data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectIntegralView {
    pub fibers: BTreeMap<String, Vec<Fiber>>,
}

pub fn direct_integral_view(model: &MultiplicityModel) -> DirectIntegralView {
    let sys = model.operator().system().clone();
    let mut fibers = BTreeMap::new();
    for el in sys.index().elements() {
        let mut fs = Vec::new();
        for p in model.points() {
            if p.membership.get(el).copied().unwrap_or(false) {
                fs.push(Fiber {
                    point: p.id.clone(),
                    dim: p.multiplicity,
                    scalar: [p.value.re, p.value.im],
                });
            }
        }
        fibers.insert(el.clone(), fs);
    }
    DirectIntegralView { fibers }
}

impl DirectIntegralView {
    /// Expands the fibers back into the block-diagonal matrix; identical to
    /// the model diagonal by construction.
    pub fn reassembled_diagonal(&self, node: &str) -> Option<CMat> {
        let fs = self.fibers.get(node)?;
        let d: usize = fs.iter().map(|f| f.dim).sum();
        let mut m = CMat::zeros(d, d);
        let mut row = 0;
        for f in fs {
            for _ in 0..f.dim {
                m[(row, row)] = C64::new(f.scalar[0], f.scalar[1]);
                row += 1;
            }
        }
        Some(m)
    }
}


// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

use crate::hilbert::{matrix_from_rows, matrix_to_rows};
use crate::operator::OperatorDoc;
use serde::Deserialize;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelPointDoc {
    pub id: String,
    pub multiplicity: usize,
    pub value: [f64; 2],
    pub membership: BTreeMap<String, bool>,
}

/// Serialized multiplicity model: the source operator, the witness chain,
/// the points in canonical order, and the per-node unitaries with their
/// conjugation residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub operator: OperatorDoc,
    pub witness: Vec<String>,
    pub points: Vec<ModelPointDoc>,
    pub unitaries: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
    pub residuals: BTreeMap<String, f64>,
}

impl ModelDoc {
    pub fn from_model(model: &MultiplicityModel) -> ModelDoc {
        ModelDoc {
            operator: OperatorDoc::from_operator(model.operator()),
            witness: model.witness().chain.clone(),
            points: model
                .points()
                .iter()
                .map(|p| ModelPointDoc {
                    id: p.id.clone(),
                    multiplicity: p.multiplicity,
                    value: [p.value.re, p.value.im],
                    membership: p.membership.clone(),
                })
                .collect(),
            unitaries: model
                .operator()
                .system()
                .index()
                .elements()
                .iter()
                .map(|el| (el.clone(), matrix_to_rows(model.unitary(el).unwrap())))
                .collect(),
            residuals: model.residuals().clone(),
        }
    }

    /// Recomputes the conjugation and unitarity residuals from the stored
    /// data. Returns per-node (conjugation, unitarity) residual pairs.
    pub fn verify(&self, tolerance: f64) -> Result<BTreeMap<String, (f64, f64)>, String> {
        let op = self
            .operator
            .build(crate::tol::COHERENCE)
            .map_err(|e| format!("operator: {e}"))?;
        let mut out = BTreeMap::new();
        for el in op.system().index().elements() {
            let rows = self
                .unitaries
                .get(el)
                .ok_or_else(|| format!("missing unitary for node {el}"))?;
            let u = matrix_from_rows(rows);
            let d = op.system().dim(el).map_err(|e| e.to_string())?;
            if u.nrows() != d || u.ncols() != d {
                return Err(format!("unitary for {el} has the wrong shape"));
            }
            // diagonal from the member points in stored order
            let mut diag = CMat::zeros(d, d);
            let mut row = 0usize;
            for p in &self.points {
                if p.membership.get(el).copied().unwrap_or(false) {
                    for _ in 0..p.multiplicity {
                        if row >= d {
                            return Err(format!("membership rows overflow at {el}"));
                        }
                        diag[(row, row)] = C64::new(p.value[0], p.value[1]);
                        row += 1;
                    }
                }
            }
            if row != d {
                return Err(format!("membership rows underflow at {el}: {row} != {d}"));
            }
            let block = op.block(el).map_err(|e| e.to_string())?;
            let conj = spectral_norm(&(&u * block * u.adjoint() - &diag));
            let unit = spectral_norm(&(&u * u.adjoint() - identity(d)))
                .max(spectral_norm(&(u.adjoint() * &u - identity(d))));
            if conj > tolerance {
                return Err(format!("conjugation residual {conj:.3e} at {el}"));
            }
            if unit > crate::tol::STRUCT_EXACT {
                return Err(format!("unitarity residual {unit:.3e} at {el}"));
            }
            out.insert(el.clone(), (conj, unit));
        }
        Ok(out)
    }
}
