//! Strictly inductive systems of measure spaces: validation of the
//! inclusion/trace/compatibility axioms, the inductive-limit ring and its
//! σ-algebra extension, the extended measure as a supremum over nodes, and
//! midpoint-rule L² discretizations of the carriers.

use crate::hata::Segment;
use crate::hilbert::InductiveHilbertSystem;
use crate::linalg::{CMat, C64};
use crate::order::{DirectedSet, DirectedSetDoc, OrderError};
use crate::tol;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("order error: {0}")]
    Order(#[from] OrderError),
    #[error("index element {node:?} has no measure-space node")]
    MissingNode { node: String },
    #[error("atom {atom:?} of node {node:?} has negative weight {weight}")]
    NegativeWeight {
        node: String,
        atom: String,
        weight: f64,
    },
    #[error("atom {atom:?} of node {node:?} has zero mass but is not flagged")]
    UnflaggedZeroMass { node: String, atom: String },
    #[error("branches {a:?} and {b:?} of node {node:?} overlap with positive length {overlap}")]
    OverlappingBranches {
        node: String,
        a: String,
        b: String,
        overlap: f64,
    },
    #[error(
        "witness for {lo:?} <= {hi:?} is not injective: {a:?} and {b:?} both map to {target:?}"
    )]
    WitnessNotInjective {
        lo: String,
        hi: String,
        a: String,
        b: String,
        target: String,
    },
    #[error("witness for {lo:?} <= {hi:?} misses carrier object {id:?}")]
    WitnessNotTotal { lo: String, hi: String, id: String },
    #[error("witnesses do not compose along {lo:?} <= {mid:?} <= {hi:?} at {id:?}")]
    WitnessNotTransitive {
        lo: String,
        mid: String,
        hi: String,
        id: String,
    },
    #[error("carrier kinds differ between nodes {lo:?} and {hi:?}")]
    CarrierKindMismatch { lo: String, hi: String },
    #[error(
        "inclusion fails for {lo:?} <= {hi:?}: object {id:?} of the smaller node is missing above"
    )]
    InclusionViolation { lo: String, hi: String, id: String },
    #[error("trace condition fails for {lo:?} <= {hi:?}: branch {id:?} cuts the smaller carrier with length {overlap}")]
    TraceViolation {
        lo: String,
        hi: String,
        id: String,
        overlap: f64,
    },
    #[error("measures disagree between {lo:?} and {hi:?} on {id:?}: {below} vs {above}")]
    MeasureMismatch {
        lo: String,
        hi: String,
        id: String,
        below: f64,
        above: f64,
    },
    #[error("set is not in the inductive-limit ring (only in the extension); node evaluation is not constant")]
    WrongClassification,
    #[error("set is not measurable: {reason}")]
    NotMeasurable { reason: String },
    #[error("family members {a} and {b} are not disjoint (common object {id:?})")]
    NotDisjoint { a: usize, b: usize, id: String },
    #[error("family member {member} is not contained in node {node:?}")]
    NotInNode { member: usize, node: String },
    #[error("zero-length segment {branch:?} in node {node:?} cannot carry an L2 sample")]
    DegenerateCarrier { node: String, branch: String },
    #[error("function undefined at point {point:?} of node {node:?}")]
    UndefinedValue { node: String, point: String },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

impl MeasureError {
    pub fn tag(&self) -> &'static str {
        match self {
            MeasureError::Order(e) => e.tag(),
            MeasureError::MissingNode { .. }
            | MeasureError::NegativeWeight { .. }
            | MeasureError::UnflaggedZeroMass { .. }
            | MeasureError::OverlappingBranches { .. } => "sim1",
            MeasureError::WitnessNotInjective { .. }
            | MeasureError::WitnessNotTotal { .. }
            | MeasureError::WitnessNotTransitive { .. } => "malformed-witness",
            MeasureError::CarrierKindMismatch { .. }
            | MeasureError::InclusionViolation { .. }
            | MeasureError::TraceViolation { .. } => "sim2",
            MeasureError::MeasureMismatch { .. } => "sim3",
            MeasureError::WrongClassification => "e:lmsa",
            MeasureError::NotMeasurable { .. } => "e:tomega",
            MeasureError::NotDisjoint { .. } | MeasureError::NotInNode { .. } => "e:sap",
            MeasureError::DegenerateCarrier { .. } | MeasureError::UndefinedValue { .. } => {
                "l:letexem"
            }
            MeasureError::UnknownNode(_) => "malformed-input",
        }
    }
}

/// Carrier of one measure-space node: finitely many weighted atoms, or a
/// finite union of oriented segments with length measure. Objects are keyed
/// by identifiers shared across nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Carrier {
    Atomic {
        atoms: BTreeMap<String, f64>,
        zero_flagged: BTreeSet<String>,
    },
    Segments {
        branches: BTreeMap<String, Segment>,
    },
}

impl Carrier {
    pub fn atomic(atoms: BTreeMap<String, f64>) -> Carrier {
        Carrier::Atomic {
            atoms,
            zero_flagged: BTreeSet::new(),
        }
    }

    pub fn ids(&self) -> BTreeSet<String> {
        match self {
            Carrier::Atomic { atoms, .. } => atoms.keys().cloned().collect(),
            Carrier::Segments { branches } => branches.keys().cloned().collect(),
        }
    }

    pub fn weight_of(&self, id: &str) -> Option<f64> {
        match self {
            Carrier::Atomic { atoms, .. } => atoms.get(id).copied(),
            Carrier::Segments { branches } => branches.get(id).map(Segment::length),
        }
    }

    pub fn total_measure(&self) -> f64 {
        match self {
            Carrier::Atomic { atoms, .. } => atoms.values().sum(),
            Carrier::Segments { branches } => branches.values().map(Segment::length).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpaceNode {
    pub carrier: Carrier,
}

impl MeasureSpaceNode {
    fn check_well_formed(&self, node: &str) -> Result<(), MeasureError> {
        match &self.carrier {
            Carrier::Atomic {
                atoms,
                zero_flagged,
            } => {
                for (a, &w) in atoms {
                    if w < 0.0 {
                        return Err(MeasureError::NegativeWeight {
                            node: node.into(),
                            atom: a.clone(),
                            weight: w,
                        });
                    }
                    if w == 0.0 && !zero_flagged.contains(a) {
                        return Err(MeasureError::UnflaggedZeroMass {
                            node: node.into(),
                            atom: a.clone(),
                        });
                    }
                }
            }
            Carrier::Segments { branches } => {
                let items: Vec<(&String, &Segment)> = branches.iter().collect();
                for i in 0..items.len() {
                    for j in i + 1..items.len() {
                        let overlap = items[i].1.collinear_overlap(items[j].1, tol::ENDPOINT);
                        if overlap > tol::ENDPOINT {
                            return Err(MeasureError::OverlappingBranches {
                                node: node.into(),
                                a: items[i].0.clone(),
                                b: items[j].0.clone(),
                                overlap,
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Declared growth of the total measure per level beyond the stored
/// truncation: the added measure at the k-th further level is
/// `base * ratio^k`. A ratio of at least one certifies divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailGrowth {
    pub base: f64,
    pub ratio: f64,
}

/// A validated strictly inductive system of measure spaces over a finite
/// directed index. Identifiers of carrier objects are global: the same id
/// in two nodes denotes the same point/branch of the limit set.
#[derive(Debug, Clone)]
pub struct InductiveMeasureSystem {
    index: DirectedSet,
    nodes: BTreeMap<String, MeasureSpaceNode>,
    tail: Option<TailGrowth>,
}

pub type WitnessMaps = BTreeMap<(String, String), BTreeMap<String, String>>;

impl InductiveMeasureSystem {
    /// Checks (sim1) well-formed nodes, (sim2) inclusion and trace
    /// conditions, and (sim3) measure compatibility on all comparable
    /// pairs; names the first violated axiom with witnesses. Explicit
    /// witness maps, when given, are validated for injectivity and
    /// transitivity and used to rename carriers into one namespace.
    pub fn validate(
        index: DirectedSet,
        nodes: BTreeMap<String, MeasureSpaceNode>,
        witnesses: Option<WitnessMaps>,
        tail: Option<TailGrowth>,
    ) -> Result<Self, MeasureError> {
        for el in index.elements() {
            if !nodes.contains_key(el) {
                return Err(MeasureError::MissingNode { node: el.clone() });
            }
        }
        for (name, node) in &nodes {
            node.check_well_formed(name)?;
        }
        let nodes = match witnesses {
            Some(w) => canonicalize_with_witnesses(&index, nodes, &w)?,
            None => nodes,
        };
        let sys = InductiveMeasureSystem { index, nodes, tail };
        sys.check_axioms()?;
        Ok(sys)
    }

    fn check_axioms(&self) -> Result<(), MeasureError> {
        for (lo, hi) in self.index.comparable_pairs() {
            let a = &self.nodes[&lo].carrier;
            let b = &self.nodes[&hi].carrier;
            match (a, b) {
                (Carrier::Atomic { atoms: wa, .. }, Carrier::Atomic { atoms: wb, .. }) => {
                    for (id, &w) in wa {
                        match wb.get(id) {
                            None => {
                                return Err(MeasureError::InclusionViolation {
                                    lo,
                                    hi,
                                    id: id.clone(),
                                })
                            }
                            Some(&v) if (v - w).abs() > tol::ENDPOINT => {
                                return Err(MeasureError::MeasureMismatch {
                                    lo,
                                    hi,
                                    id: id.clone(),
                                    below: w,
                                    above: v,
                                })
                            }
                            _ => {}
                        }
                    }
                }
                (Carrier::Segments { branches: sa }, Carrier::Segments { branches: sb }) => {
                    for (id, seg) in sa {
                        match sb.get(id) {
                            None => {
                                return Err(MeasureError::InclusionViolation {
                                    lo,
                                    hi,
                                    id: id.clone(),
                                })
                            }
                            Some(other) => {
                                if !seg.same_up_to_orientation(other, tol::ENDPOINT) {
                                    return Err(MeasureError::InclusionViolation {
                                        lo,
                                        hi,
                                        id: id.clone(),
                                    });
                                }
                                if (seg.length() - other.length()).abs() > tol::ENDPOINT {
                                    return Err(MeasureError::MeasureMismatch {
                                        lo,
                                        hi,
                                        id: id.clone(),
                                        below: seg.length(),
                                        above: other.length(),
                                    });
                                }
                            }
                        }
                    }
                    // branches only above must not cut the smaller carrier
                    for (id, seg) in sb {
                        if sa.contains_key(id) {
                            continue;
                        }
                        for lower in sa.values() {
                            let overlap = seg.collinear_overlap(lower, tol::ENDPOINT);
                            if overlap > tol::ENDPOINT {
                                return Err(MeasureError::TraceViolation {
                                    lo,
                                    hi,
                                    id: id.clone(),
                                    overlap,
                                });
                            }
                        }
                    }
                }
                _ => return Err(MeasureError::CarrierKindMismatch { lo, hi }),
            }
        }
        Ok(())
    }

    pub fn index(&self) -> &DirectedSet {
        &self.index
    }

    pub fn node(&self, id: &str) -> Result<&MeasureSpaceNode, MeasureError> {
        self.nodes
            .get(id)
            .ok_or_else(|| MeasureError::UnknownNode(id.into()))
    }

    pub fn nodes(&self) -> &BTreeMap<String, MeasureSpaceNode> {
        &self.nodes
    }

    pub fn tail(&self) -> Option<TailGrowth> {
        self.tail
    }

    pub fn node_measure(&self, id: &str) -> Result<f64, MeasureError> {
        Ok(self.node(id)?.carrier.total_measure())
    }

    fn measure_of_ids(&self, node: &str, ids: &BTreeSet<String>) -> Result<f64, MeasureError> {
        let carrier = &self.node(node)?.carrier;
        Ok(ids.iter().filter_map(|id| carrier.weight_of(id)).sum())
    }

    /// Trace of a set expression on one node, as the set of carrier object
    /// ids present there.
    pub fn trace(&self, expr: &SetExpr, node: &str) -> Result<BTreeSet<String>, MeasureError> {
        let all = self.node(node)?.carrier.ids();
        Ok(match expr {
            SetExpr::Empty => BTreeSet::new(),
            SetExpr::Full => all,
            SetExpr::Members(ids) => ids.intersection(&all).cloned().collect(),
            SetExpr::NodeSet(other) => {
                let other_ids = self.node(other)?.carrier.ids();
                other_ids.intersection(&all).cloned().collect()
            }
            SetExpr::Union(x, y) => {
                let a = self.trace(x, node)?;
                let b = self.trace(y, node)?;
                a.union(&b).cloned().collect()
            }
            SetExpr::Intersect(x, y) => {
                let a = self.trace(x, node)?;
                let b = self.trace(y, node)?;
                a.intersection(&b).cloned().collect()
            }
            SetExpr::Diff(x, y) => {
                let a = self.trace(x, node)?;
                let b = self.trace(y, node)?;
                a.difference(&b).cloned().collect()
            }
            SetExpr::Unbounded(inner) => self.trace(inner, node)?,
        })
    }

    /// Classifies a set description against the limit ring and its
    /// σ-algebra extension.
    pub fn classify_set(&self, expr: &SetExpr) -> Result<OmegaClass, MeasureError> {
        if let Some(reason) = self.undefined_reference(expr) {
            return Ok(OmegaClass::NotMeasurable { reason });
        }
        if matches!(expr, SetExpr::Unbounded(_)) {
            return Ok(OmegaClass::InOmegaTildeOnly);
        }
        let top = self
            .index
            .top()
            .expect("finite directed sets have a top element");
        let top_trace = self.trace(expr, &top)?;
        // smallest node whose trace already carries the whole set
        let mut best: Option<(usize, String)> = None;
        for el in self.index.elements() {
            let tr = self.trace(expr, el)?;
            if tr == top_trace {
                let key = (self.index.down_set(el)?.len(), el.clone());
                if best.as_ref().is_none_or(|b| key < *b) {
                    best = Some(key);
                }
            }
        }
        Ok(OmegaClass::InOmega {
            node: best.expect("top node always contains the set").1,
        })
    }

    fn undefined_reference(&self, expr: &SetExpr) -> Option<String> {
        match expr {
            SetExpr::Empty | SetExpr::Full => None,
            SetExpr::Members(ids) => {
                let known: BTreeSet<String> =
                    self.nodes.values().flat_map(|n| n.carrier.ids()).collect();
                ids.iter()
                    .find(|id| !known.contains(*id))
                    .map(|id| format!("unknown carrier object {id:?}"))
            }
            SetExpr::NodeSet(n) => {
                (!self.nodes.contains_key(n)).then(|| format!("unknown node {n:?}"))
            }
            SetExpr::Union(a, b) | SetExpr::Intersect(a, b) | SetExpr::Diff(a, b) => self
                .undefined_reference(a)
                .or_else(|| self.undefined_reference(b)),
            SetExpr::Unbounded(a) => self.undefined_reference(a),
        }
    }

    /// Measure of a set in the limit ring; the value is evaluated at the
    /// containing node and re-evaluated at a strictly larger node when one
    /// exists.
    pub fn limit_measure(&self, expr: &SetExpr) -> Result<f64, MeasureError> {
        match self.classify_set(expr)? {
            OmegaClass::InOmega { node } => {
                let tr = self.trace(expr, &node)?;
                let v = self.measure_of_ids(&node, &tr)?;
                for el in self.index.elements() {
                    if el != &node && self.index.leq(&node, el)? {
                        let tr2 = self.trace(expr, el)?;
                        let v2 = self.measure_of_ids(el, &tr2)?;
                        if (v - v2).abs() > tol::SIGMA_ADD * (1.0 + v.abs()) {
                            return Err(MeasureError::MeasureMismatch {
                                lo: node.clone(),
                                hi: el.clone(),
                                id: format!("{expr:?}"),
                                below: v,
                                above: v2,
                            });
                        }
                        break;
                    }
                }
                Ok(v)
            }
            OmegaClass::InOmegaTildeOnly => Err(MeasureError::WrongClassification),
            OmegaClass::NotMeasurable { reason } => Err(MeasureError::NotMeasurable { reason }),
        }
    }

    /// The extended measure: supremum of the node values of the trace,
    /// realized as the last value of the nondecreasing net. Declared
    /// unbounded sets consult the growth declaration and may be infinite.
    pub fn extended_measure(&self, expr: &SetExpr) -> Result<ExtendedMeasure, MeasureError> {
        match self.classify_set(expr)? {
            OmegaClass::NotMeasurable { reason } => Err(MeasureError::NotMeasurable { reason }),
            OmegaClass::InOmega { .. } => {
                let mut sup: f64 = 0.0;
                for el in self.index.elements() {
                    let tr = self.trace(expr, el)?;
                    sup = sup.max(self.measure_of_ids(el, &tr)?);
                }
                Ok(ExtendedMeasure::Finite(sup))
            }
            OmegaClass::InOmegaTildeOnly => {
                let mut sup: f64 = 0.0;
                for el in self.index.elements() {
                    let tr = self.trace(expr, el)?;
                    sup = sup.max(self.measure_of_ids(el, &tr)?);
                }
                match self.tail {
                    Some(t) if t.ratio >= 1.0 => Ok(ExtendedMeasure::Infinite {
                        growth_ratio: t.ratio,
                    }),
                    Some(t) => Ok(ExtendedMeasure::Finite(sup + t.base / (1.0 - t.ratio))),
                    None => Ok(ExtendedMeasure::Finite(sup)),
                }
            }
        }
    }

    /// Verifies finite additivity of the node measure on a pairwise
    /// disjoint family inside one node.
    pub fn check_local_sigma_additivity(
        &self,
        node: &str,
        family: &[SetExpr],
    ) -> Result<SigmaAdditivityCertificate, MeasureError> {
        let top = self
            .index
            .top()
            .expect("finite directed sets have a top element");
        let mut traces = Vec::with_capacity(family.len());
        for (k, expr) in family.iter().enumerate() {
            let tr = self.trace(expr, node)?;
            let full = self.classify_set(expr)?;
            if let OmegaClass::NotMeasurable { reason } = full {
                return Err(MeasureError::NotMeasurable { reason });
            }
            // every member must lie entirely inside the chosen node
            if tr != self.trace(expr, &top)? {
                return Err(MeasureError::NotInNode {
                    member: k,
                    node: node.into(),
                });
            }
            traces.push((k, tr));
        }
        for i in 0..traces.len() {
            for j in i + 1..traces.len() {
                if let Some(common) = traces[i].1.intersection(&traces[j].1).next() {
                    return Err(MeasureError::NotDisjoint {
                        a: i,
                        b: j,
                        id: common.clone(),
                    });
                }
            }
        }
        let mut union = BTreeSet::new();
        let mut sum = 0.0;
        for (_, tr) in &traces {
            sum += self.measure_of_ids(node, tr)?;
            union.extend(tr.iter().cloned());
        }
        let union_measure = self.measure_of_ids(node, &union)?;
        let residual = (union_measure - sum).abs();
        if residual > tol::SIGMA_ADD * (1.0 + sum.abs()) {
            return Err(MeasureError::MeasureMismatch {
                lo: node.into(),
                hi: node.into(),
                id: "family union".into(),
                below: sum,
                above: union_measure,
            });
        }
        Ok(SigmaAdditivityCertificate {
            node: node.into(),
            members: family.len(),
            union_measure,
            sum,
            residual,
        })
    }
}

fn canonicalize_with_witnesses(
    index: &DirectedSet,
    nodes: BTreeMap<String, MeasureSpaceNode>,
    witnesses: &WitnessMaps,
) -> Result<BTreeMap<String, MeasureSpaceNode>, MeasureError> {
    for ((lo, hi), map) in witnesses {
        let mut seen: BTreeMap<&String, &String> = BTreeMap::new();
        for (src, dst) in map {
            if let Some(prev) = seen.insert(dst, src) {
                return Err(MeasureError::WitnessNotInjective {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    a: prev.clone(),
                    b: src.clone(),
                    target: dst.clone(),
                });
            }
        }
    }
    // transitivity on triples that all carry explicit maps
    for ((lo, mid), w1) in witnesses {
        for ((mid2, hi), w2) in witnesses {
            if mid != mid2 {
                continue;
            }
            if let Some(w13) = witnesses.get(&(lo.clone(), hi.clone())) {
                for (src, m) in w1 {
                    let via = w2.get(m);
                    let direct = w13.get(src);
                    if via != direct {
                        return Err(MeasureError::WitnessNotTransitive {
                            lo: lo.clone(),
                            mid: mid.clone(),
                            hi: hi.clone(),
                            id: src.clone(),
                        });
                    }
                }
            }
        }
    }
    let top = index
        .top()
        .expect("finite directed sets have a top element");
    let mut out = BTreeMap::new();
    for (name, node) in nodes {
        if name == top {
            out.insert(name, node);
            continue;
        }
        let rename = witnesses.get(&(name.clone(), top.clone()));
        match rename {
            None => {
                out.insert(name, node);
            }
            Some(map) => {
                let carrier = match node.carrier {
                    Carrier::Atomic {
                        atoms,
                        zero_flagged,
                    } => {
                        let mut renamed = BTreeMap::new();
                        let mut flags = BTreeSet::new();
                        for (id, w) in atoms {
                            let new = map.get(&id).cloned().ok_or_else(|| {
                                MeasureError::WitnessNotTotal {
                                    lo: name.clone(),
                                    hi: top.clone(),
                                    id: id.clone(),
                                }
                            })?;
                            if zero_flagged.contains(&id) {
                                flags.insert(new.clone());
                            }
                            renamed.insert(new, w);
                        }
                        Carrier::Atomic {
                            atoms: renamed,
                            zero_flagged: flags,
                        }
                    }
                    Carrier::Segments { branches } => {
                        let mut renamed = BTreeMap::new();
                        for (id, seg) in branches {
                            let new = map.get(&id).cloned().ok_or_else(|| {
                                MeasureError::WitnessNotTotal {
                                    lo: name.clone(),
                                    hi: top.clone(),
                                    id: id.clone(),
                                }
                            })?;
                            renamed.insert(new, seg);
                        }
                        Carrier::Segments { branches: renamed }
                    }
                };
                out.insert(name, MeasureSpaceNode { carrier });
            }
        }
    }
    Ok(out)
}

/// Intensional description of a measurable set: a finite boolean tree over
/// carrier-object selectors, evaluated nodewise. `Unbounded` marks a set
/// declared to extend across all levels beyond the stored truncation.
#[derive(Debug, Clone, PartialEq)]
pub enum SetExpr {
    Empty,
    Full,
    /// Selected carrier objects (atoms or branches) by id.
    Members(BTreeSet<String>),
    /// The carrier of one node viewed as a subset of the limit set.
    NodeSet(String),
    Union(Box<SetExpr>, Box<SetExpr>),
    Intersect(Box<SetExpr>, Box<SetExpr>),
    Diff(Box<SetExpr>, Box<SetExpr>),
    Unbounded(Box<SetExpr>),
}

impl SetExpr {
    pub fn members<I: Into<String>>(ids: Vec<I>) -> SetExpr {
        SetExpr::Members(ids.into_iter().map(Into::into).collect())
    }
}

/// Where a set description sits relative to the limit ring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OmegaClass {
    InOmega { node: String },
    InOmegaTildeOnly,
    NotMeasurable { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedMeasure {
    Finite(f64),
    Infinite { growth_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaAdditivityCertificate {
    pub node: String,
    pub members: usize,
    pub union_measure: f64,
    pub sum: f64,
    pub residual: f64,
}

/// One sample point of a discretized L² carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Point {
    /// Point id, globally shared across nodes.
    pub id: String,
    /// Quadrature weight: atom mass, or segment length / samples.
    pub weight: f64,
    /// Position in the plane for segment samples.
    pub position: Option<C64>,
}

/// Finite-dimensional stand-in for the L² space of one node, in the
/// orthonormal coordinates where the weighted inner product becomes the
/// standard one.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Carrier {
    pub points: Vec<L2Point>,
}

impl L2Carrier {
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn point_index(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }
}

/// Midpoint-rule discretization of one node: atoms map to themselves,
/// segments get `s` midpoint samples of weight length/s each.
pub fn discretize_l2(
    node_name: &str,
    node: &MeasureSpaceNode,
    s: usize,
) -> Result<L2Carrier, MeasureError> {
    let mut points = Vec::new();
    match &node.carrier {
        Carrier::Atomic { atoms, .. } => {
            for (id, &w) in atoms {
                if w > 0.0 {
                    points.push(L2Point {
                        id: id.clone(),
                        weight: w,
                        position: None,
                    });
                }
            }
        }
        Carrier::Segments { branches } => {
            assert!(s >= 1, "segment carriers need at least one sample");
            for (id, seg) in branches {
                if seg.is_degenerate() {
                    return Err(MeasureError::DegenerateCarrier {
                        node: node_name.into(),
                        branch: id.clone(),
                    });
                }
                let w = seg.length() / s as f64;
                for k in 0..s {
                    points.push(L2Point {
                        id: format!("{id}#{k}"),
                        weight: w,
                        position: Some(seg.midpoint(k, s)),
                    });
                }
            }
        }
    }
    Ok(L2Carrier { points })
}

/// The discretized L² spaces of a whole system, with zero-extension
/// embeddings assembled into a strictly inductive system of
/// finite-dimensional Hilbert spaces.
#[derive(Debug, Clone)]
pub struct DiscretizedL2System {
    pub measure: InductiveMeasureSystem,
    pub samples_per_segment: usize,
    pub carriers: BTreeMap<String, L2Carrier>,
    pub hilbert: Arc<InductiveHilbertSystem>,
}

pub fn discretize_l2_system(
    measure: &InductiveMeasureSystem,
    s: usize,
) -> Result<DiscretizedL2System, MeasureError> {
    let mut carriers = BTreeMap::new();
    for (name, node) in measure.nodes() {
        carriers.insert(name.clone(), discretize_l2(name, node, s)?);
    }
    let mut dims = BTreeMap::new();
    for (name, c) in &carriers {
        dims.insert(name.clone(), c.dim());
    }
    let mut embeddings = BTreeMap::new();
    for (lo, hi) in measure.index().comparable_pairs() {
        let a = &carriers[&lo];
        let b = &carriers[&hi];
        let mut j = CMat::zeros(b.dim(), a.dim());
        for (col, p) in a.points.iter().enumerate() {
            let row = b
                .point_index(&p.id)
                .ok_or_else(|| MeasureError::InclusionViolation {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    id: p.id.clone(),
                })?;
            j[(row, col)] = C64::new(1.0, 0.0);
        }
        embeddings.insert((lo, hi), j);
    }
    let hilbert = InductiveHilbertSystem::from_parts(measure.index().clone(), dims, embeddings)
        .expect("zero-extension embeddings form a strictly inductive Hilbert system");
    Ok(DiscretizedL2System {
        measure: measure.clone(),
        samples_per_segment: s,
        carriers,
        hilbert: Arc::new(hilbert),
    })
}

/// A function given by its values on every carrier point of every node,
/// restriction-compatible across nodes by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LocFunction {
    pub values: BTreeMap<String, Vec<C64>>,
}

impl LocFunction {
    pub fn from_fn(
        l2: &DiscretizedL2System,
        f: impl Fn(&L2Point) -> Option<C64>,
    ) -> Result<LocFunction, MeasureError> {
        let mut values = BTreeMap::new();
        for (name, carrier) in &l2.carriers {
            let mut v = Vec::with_capacity(carrier.dim());
            for p in &carrier.points {
                match f(p) {
                    Some(z) => v.push(z),
                    None => {
                        return Err(MeasureError::UndefinedValue {
                            node: name.clone(),
                            point: p.id.clone(),
                        })
                    }
                }
            }
            values.insert(name.clone(), v);
        }
        Ok(LocFunction { values })
    }

    /// Values looked up by carrier-point id (atom name for atomic nodes).
    pub fn from_table(
        l2: &DiscretizedL2System,
        table: &BTreeMap<String, C64>,
    ) -> Result<LocFunction, MeasureError> {
        LocFunction::from_fn(l2, |p| table.get(&p.id).copied())
    }

    pub fn constant(l2: &DiscretizedL2System, z: C64) -> LocFunction {
        LocFunction::from_fn(l2, |_| Some(z)).expect("constant functions are total")
    }

    /// Per-node sup seminorm of the values.
    pub fn sup_seminorm(&self, node: &str) -> Result<f64, MeasureError> {
        self.values
            .get(node)
            .map(|v| v.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .ok_or_else(|| MeasureError::UnknownNode(node.into()))
    }

    /// Pointwise map of the values.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> LocFunction {
        LocFunction {
            values: self
                .values
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|&z| f(z)).collect()))
                .collect(),
        }
    }

    /// Checks restriction compatibility against the carrier layout: shared
    /// point ids must carry identical values.
    pub fn check_restriction_compatible(
        &self,
        l2: &DiscretizedL2System,
    ) -> Result<(), MeasureError> {
        let mut seen: BTreeMap<String, C64> = BTreeMap::new();
        for (name, carrier) in &l2.carriers {
            let vals = self
                .values
                .get(name)
                .ok_or_else(|| MeasureError::UnknownNode(name.clone()))?;
            for (p, &v) in carrier.points.iter().zip(vals.iter()) {
                if let Some(&prev) = seen.get(&p.id) {
                    if (prev - v).norm() > 0.0 {
                        return Err(MeasureError::UndefinedValue {
                            node: name.clone(),
                            point: p.id.clone(),
                        });
                    }
                } else {
                    seen.insert(p.id.clone(), v);
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CarrierDoc {
    Atomic {
        atoms: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        zero_flagged: Vec<String>,
    },
    Segments {
        segments: Vec<[[f64; 2]; 2]>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSystemDoc {
    pub index: DirectedSetDoc,
    pub nodes: BTreeMap<String, CarrierDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<BTreeMap<String, BTreeMap<String, String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailGrowth>,
}

impl MeasureSystemDoc {
    pub fn from_system(sys: &InductiveMeasureSystem) -> Self {
        let chain = None;
        let mut nodes = BTreeMap::new();
        for (name, node) in sys.nodes() {
            let doc = match &node.carrier {
                Carrier::Atomic {
                    atoms,
                    zero_flagged,
                } => CarrierDoc::Atomic {
                    atoms: atoms.clone(),
                    zero_flagged: zero_flagged.iter().cloned().collect(),
                },
                Carrier::Segments { branches } => CarrierDoc::Segments {
                    segments: branches
                        .values()
                        .map(|s| [[s.start.re, s.start.im], [s.end.re, s.end.im]])
                        .collect(),
                },
            };
            nodes.insert(name.clone(), doc);
        }
        MeasureSystemDoc {
            index: DirectedSetDoc::from_set(sys.index(), chain),
            nodes,
            witnesses: None,
            tail: sys.tail(),
        }
    }

    /// Builds and validates the system. Segment carriers listed without ids
    /// are matched geometrically across nodes to recover shared identities.
    pub fn build(&self) -> Result<InductiveMeasureSystem, MeasureError> {
        let index = self.index.build()?;
        // geometric registry for id-less segment lists
        let mut registry: Vec<(Segment, String)> = Vec::new();
        let mut counter = 0usize;
        let mut order: Vec<&String> = self.nodes.keys().collect();
        order.sort_by_key(|name| {
            (
                index.down_set(name).map(|d| d.len()).unwrap_or(usize::MAX),
                (*name).clone(),
            )
        });
        let mut nodes = BTreeMap::new();
        for name in order {
            let doc = &self.nodes[name];
            let carrier = match doc {
                CarrierDoc::Atomic {
                    atoms,
                    zero_flagged,
                } => Carrier::Atomic {
                    atoms: atoms.clone(),
                    zero_flagged: zero_flagged.iter().cloned().collect(),
                },
                CarrierDoc::Segments { segments } => {
                    let mut branches = BTreeMap::new();
                    for raw in segments {
                        let seg = Segment::new(
                            C64::new(raw[0][0], raw[0][1]),
                            C64::new(raw[1][0], raw[1][1]),
                        );
                        let id = registry
                            .iter()
                            .find(|(s, _)| s.same_up_to_orientation(&seg, tol::ENDPOINT))
                            .map(|(_, id)| id.clone())
                            .unwrap_or_else(|| {
                                let id = format!("s{counter:04}");
                                counter += 1;
                                registry.push((seg, id.clone()));
                                id
                            });
                        branches.insert(id, seg);
                    }
                    Carrier::Segments { branches }
                }
            };
            nodes.insert(name.clone(), MeasureSpaceNode { carrier });
        }
        let witnesses = self.witnesses.as_ref().map(|w| {
            w.iter()
                .filter_map(|(key, map)| {
                    key.split_once("<=")
                        .map(|(a, b)| ((a.to_string(), b.to_string()), map.clone()))
                })
                .collect::<WitnessMaps>()
        });
        InductiveMeasureSystem::validate(index, nodes, witnesses, self.tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hata::{build_inductive_system, enumerate_branches, IfsParams, SystemVariant};
    use crate::linalg::spectral_norm;

    fn z(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn atomic_node(pairs: &[(&str, f64)]) -> MeasureSpaceNode {
        MeasureSpaceNode {
            carrier: Carrier::atomic(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()),
        }
    }

    fn two_node_chain(w_lo: f64, w_hi: f64) -> Result<InductiveMeasureSystem, MeasureError> {
        let index = DirectedSet::chain(&["lo".into(), "hi".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert("lo".into(), atomic_node(&[("a", w_lo)]));
        nodes.insert("hi".into(), atomic_node(&[("a", w_hi), ("b", 2.0)]));
        InductiveMeasureSystem::validate(index, nodes, None, None)
    }

    #[test]
    fn nested_atomic_nodes_validate() {
        assert!(two_node_chain(1.0, 1.0).is_ok());
    }

    #[test]
    fn weight_change_is_a_compatibility_violation() {
        let err = two_node_chain(1.0, 1.5).unwrap_err();
        assert!(matches!(err, MeasureError::MeasureMismatch { .. }));
        assert_eq!(err.tag(), "sim3");
    }

    #[test]
    fn hata_linear_depth_three_validates() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 3).unwrap();
        assert_eq!(hs.system.nodes().len(), 4);
    }

    #[test]
    fn limit_measure_basics() {
        let sys = two_node_chain(1.0, 1.0).unwrap();
        assert_eq!(sys.limit_measure(&SetExpr::Empty).unwrap(), 0.0);
        let a = SetExpr::members(vec!["a"]);
        let b = SetExpr::members(vec!["b"]);
        let both = SetExpr::Union(Box::new(a.clone()), Box::new(b.clone()));
        let ma = sys.limit_measure(&a).unwrap();
        let mb = sys.limit_measure(&b).unwrap();
        let mu = sys.limit_measure(&both).unwrap();
        assert!((mu - (ma + mb)).abs() < 1e-15);
    }

    #[test]
    fn classification_examples() {
        let sys = two_node_chain(1.0, 1.0).unwrap();
        match sys.classify_set(&SetExpr::Full).unwrap() {
            OmegaClass::InOmega { node } => assert_eq!(node, "hi"),
            other => panic!("unexpected {other:?}"),
        }
        match sys.classify_set(&SetExpr::members(vec!["a"])).unwrap() {
            OmegaClass::InOmega { node } => assert_eq!(node, "lo"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            sys.classify_set(&SetExpr::Unbounded(Box::new(SetExpr::Full)))
                .unwrap(),
            OmegaClass::InOmegaTildeOnly
        );
        match sys.classify_set(&SetExpr::members(vec!["nope"])).unwrap() {
            OmegaClass::NotMeasurable { .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn new_branch_union_in_omega_at_finite_truncation() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 3).unwrap();
        // one added branch per level
        let levels = SetExpr::Union(
            Box::new(SetExpr::members(vec!["b"])),
            Box::new(SetExpr::Union(
                Box::new(SetExpr::members(vec!["b1"])),
                Box::new(SetExpr::members(vec!["b11"])),
            )),
        );
        assert!(matches!(
            hs.system.classify_set(&levels).unwrap(),
            OmegaClass::InOmega { .. }
        ));
        assert_eq!(
            hs.system
                .classify_set(&SetExpr::Unbounded(Box::new(levels)))
                .unwrap(),
            OmegaClass::InOmegaTildeOnly
        );
    }

    #[test]
    fn extended_measure_agrees_on_ring_sets_and_diverges_on_declared_tail() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 3).unwrap();
        let x0 = SetExpr::NodeSet("X0".into());
        match hs.system.extended_measure(&x0).unwrap() {
            ExtendedMeasure::Finite(v) => {
                assert!((v - hs.system.limit_measure(&x0).unwrap()).abs() < 1e-14)
            }
            _ => panic!("finite expected"),
        }
        match hs
            .system
            .extended_measure(&SetExpr::Unbounded(Box::new(SetExpr::Full)))
            .unwrap()
        {
            ExtendedMeasure::Infinite { growth_ratio } => {
                assert!((growth_ratio - 1.25).abs() < 1e-14)
            }
            _ => panic!("divergence expected"),
        }
        assert_eq!(
            hs.system.extended_measure(&SetExpr::Empty).unwrap(),
            ExtendedMeasure::Finite(0.0)
        );
    }

    #[test]
    fn monotonicity_of_extended_measure() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 3).unwrap();
        let small = SetExpr::members(vec!["b-", "b"]);
        let big = SetExpr::Union(
            Box::new(small.clone()),
            Box::new(SetExpr::members(vec!["bc"])),
        );
        let (ExtendedMeasure::Finite(s), ExtendedMeasure::Finite(b)) = (
            hs.system.extended_measure(&small).unwrap(),
            hs.system.extended_measure(&big).unwrap(),
        ) else {
            panic!("finite expected")
        };
        assert!(s <= b);
    }

    #[test]
    fn sigma_additivity_on_branch_partition() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 3).unwrap();
        let family: Vec<SetExpr> = enumerate_branches(&p, 2)
            .iter()
            .map(|b| SetExpr::members(vec![b.id()]))
            .collect();
        assert_eq!(family.len(), 5);
        let cert = hs
            .system
            .check_local_sigma_additivity("X2", &family)
            .unwrap();
        let expected = crate::hata::branch_measure(&enumerate_branches(&p, 2));
        assert!((cert.union_measure - expected).abs() < 1e-12);
        assert!(cert.residual <= tol::SIGMA_ADD * (1.0 + cert.sum));
    }

    #[test]
    fn sigma_additivity_requires_containment() {
        let sys = two_node_chain(1.0, 1.0).unwrap();
        // the atom b lives only in the larger node
        let family = vec![SetExpr::members(vec!["b"])];
        let err = sys.check_local_sigma_additivity("lo", &family).unwrap_err();
        assert!(matches!(err, MeasureError::NotInNode { member: 0, .. }));
    }

    #[test]
    fn sigma_additivity_rejects_overlap() {
        let sys = two_node_chain(1.0, 1.0).unwrap();
        let family = vec![
            SetExpr::members(vec!["a", "b"]),
            SetExpr::members(vec!["b"]),
        ];
        let err = sys.check_local_sigma_additivity("hi", &family).unwrap_err();
        assert!(matches!(err, MeasureError::NotDisjoint { a: 0, b: 1, .. }));
    }

    #[test]
    fn zero_mass_atoms_must_be_flagged() {
        let index = DirectedSet::chain(&["n".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert("n".into(), atomic_node(&[("a", 0.0)]));
        let err = InductiveMeasureSystem::validate(index.clone(), nodes, None, None).unwrap_err();
        assert!(matches!(err, MeasureError::UnflaggedZeroMass { .. }));
        let mut nodes = BTreeMap::new();
        nodes.insert(
            "n".into(),
            MeasureSpaceNode {
                carrier: Carrier::Atomic {
                    atoms: [("a".to_string(), 0.0), ("b".to_string(), 2.0)].into(),
                    zero_flagged: ["a".to_string()].into(),
                },
            },
        );
        assert!(InductiveMeasureSystem::validate(index, nodes, None, None).is_ok());
    }

    #[test]
    fn renaming_witnesses_canonicalize() {
        let index = DirectedSet::chain(&["lo".into(), "hi".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert("lo".into(), atomic_node(&[("x", 1.0)]));
        nodes.insert("hi".into(), atomic_node(&[("y", 1.0), ("z", 2.0)]));
        let mut w: WitnessMaps = BTreeMap::new();
        w.insert(
            ("lo".into(), "hi".into()),
            [("x".to_string(), "y".to_string())].into(),
        );
        let sys = InductiveMeasureSystem::validate(index, nodes, Some(w), None).unwrap();
        assert!(sys.node("lo").unwrap().carrier.ids().contains("y"));
    }

    #[test]
    fn non_injective_witness_is_malformed() {
        let index = DirectedSet::chain(&["lo".into(), "hi".into()]).unwrap();
        let mut nodes = BTreeMap::new();
        nodes.insert("lo".into(), atomic_node(&[("x", 1.0), ("w", 1.0)]));
        nodes.insert("hi".into(), atomic_node(&[("y", 1.0), ("z", 2.0)]));
        let mut w: WitnessMaps = BTreeMap::new();
        w.insert(
            ("lo".into(), "hi".into()),
            [
                ("x".to_string(), "y".to_string()),
                ("w".to_string(), "y".to_string()),
            ]
            .into(),
        );
        let err = InductiveMeasureSystem::validate(index, nodes, Some(w), None).unwrap_err();
        assert_eq!(err.tag(), "malformed-witness");
    }

    #[test]
    fn atomic_discretization_weights() {
        let node = atomic_node(&[("a", 1.0), ("b", 4.0)]);
        let carrier = discretize_l2("n", &node, 1).unwrap();
        assert_eq!(carrier.dim(), 2);
        // squared norm of the indicator of b in the weighted inner product
        assert_eq!(carrier.points[1].weight, 4.0);
    }

    #[test]
    fn segment_discretization_midpoint_rule() {
        let node = MeasureSpaceNode {
            carrier: Carrier::Segments {
                branches: [(
                    "seg".to_string(),
                    crate::hata::Segment::new(z(0.0, 0.0), z(1.0, 0.0)),
                )]
                .into(),
            },
        };
        let carrier = discretize_l2("n", &node, 4).unwrap();
        assert_eq!(carrier.dim(), 4);
        for (k, p) in carrier.points.iter().enumerate() {
            assert!((p.weight - 0.25).abs() < 1e-15);
            let expected = (k as f64 + 0.5) / 4.0;
            assert!((p.position.unwrap() - z(expected, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn degenerate_segment_rejected() {
        let node = MeasureSpaceNode {
            carrier: Carrier::Segments {
                branches: [(
                    "seg".to_string(),
                    crate::hata::Segment::new(z(0.5, 0.5), z(0.5, 0.5)),
                )]
                .into(),
            },
        };
        assert!(matches!(
            discretize_l2("n", &node, 2),
            Err(MeasureError::DegenerateCarrier { .. })
        ));
    }

    #[test]
    fn hata_l2_embeddings_are_isometric_coordinate_injections() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 1).unwrap();
        let l2 = discretize_l2_system(&hs.system, 2).unwrap();
        assert_eq!(l2.hilbert.dim("X0").unwrap(), 4);
        assert_eq!(l2.hilbert.dim("X1").unwrap(), 6);
        let j = l2.hilbert.embedding("X0", "X1").unwrap();
        let gram = j.adjoint() * &j;
        assert!(spectral_norm(&(gram - crate::linalg::identity(4))) == 0.0);
    }

    #[test]
    fn loc_function_from_positions() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 1).unwrap();
        let l2 = discretize_l2_system(&hs.system, 2).unwrap();
        let re_part = LocFunction::from_fn(&l2, |pt| pt.position.map(|q| z(q.re, 0.0))).unwrap();
        re_part.check_restriction_compatible(&l2).unwrap();
        let sup0 = re_part.sup_seminorm("X0").unwrap();
        assert!(sup0 <= 1.0);
        let undefined = LocFunction::from_fn(&l2, |pt| {
            if pt.id.starts_with("b-") {
                None
            } else {
                pt.position.map(|q| z(q.re, 0.0))
            }
        });
        assert!(matches!(
            undefined,
            Err(MeasureError::UndefinedValue { .. })
        ));
    }

    #[test]
    fn json_round_trip_with_geometric_matching() {
        let p = IfsParams::default_figure();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 2).unwrap();
        let doc = MeasureSystemDoc::from_system(&hs.system);
        let text = serde_json::to_string(&doc).unwrap();
        let doc2: MeasureSystemDoc = serde_json::from_str(&text).unwrap();
        let rebuilt = doc2.build().unwrap();
        for el in rebuilt.index().elements() {
            assert!(
                (rebuilt.node_measure(el).unwrap() - hs.system.node_measure(el).unwrap()).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn atomic_json_example_parses() {
        let text = r#"{"index":{"elements":["n"],"leq":[["n","n"]]},
                       "nodes":{"n":{"kind":"atomic","atoms":{"a":1.0}}}}"#;
        let doc: MeasureSystemDoc = serde_json::from_str(text).unwrap();
        let sys = doc.build().unwrap();
        assert_eq!(sys.node_measure("n").unwrap(), 1.0);
    }

    #[test]
    fn witness_maps_parse_from_json() {
        let text = r#"{
            "index": {"elements": ["lo", "hi"],
                      "leq": [["lo","lo"],["lo","hi"],["hi","hi"]]},
            "nodes": {"lo": {"kind":"atomic","atoms":{"x":1.0}},
                      "hi": {"kind":"atomic","atoms":{"y":1.0,"z":2.0}}},
            "witnesses": {"lo<=hi": {"x": "y"}}
        }"#;
        let doc: MeasureSystemDoc = serde_json::from_str(text).unwrap();
        let sys = doc.build().unwrap();
        assert!(sys.node("lo").unwrap().carrier.ids().contains("y"));
        assert_eq!(sys.node_measure("lo").unwrap(), 1.0);
    }
}
