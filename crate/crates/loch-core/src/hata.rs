//! Exact generator and analyzer of the two-map conjugate-affine IFS whose
//! attractor is the Hata tree-like set: level sets as oriented segment
//! lists, branch/binary-tree structure, connectivity certificates, and the
//! three strictly inductive measure-space organisations built from them.

use crate::cnum::fmt_f64;
use crate::linalg::C64;
use crate::measure::{Carrier, InductiveMeasureSystem, MeasureSpaceNode, TailGrowth};
use crate::order::{ChainWitness, DirectedSet};
use crate::tol;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HataError {
    #[error("invalid parameters: require 0 < |c| < 1, 0 < |1-c| < 1, Im(c) != 0; got c = {c}")]
    InvalidParams { c: C64 },
    #[error("word may contain only letters 1 and 2, got {0:?}")]
    BadWord(String),
    #[error("approximation at level {level} is disconnected: {components} components")]
    Disconnected { level: usize, components: usize },
    #[error("junction |c|^2 = {junction} does not lie on both image families")]
    JunctionMissing { junction: f64 },
    #[error(
        "branch union is disconnected: branch {branch:?} has no attachment point in the union"
    )]
    DisconnectedUnion { branch: String },
    #[error("unknown branch {0:?}")]
    UnknownBranch(String),
    #[error("branch-union index at depth {depth} would have {nodes} nodes (cap {cap})")]
    IndexTooLarge {
        depth: usize,
        nodes: usize,
        cap: usize,
    },
}

impl HataError {
    pub fn tag(&self) -> &'static str {
        match self {
            HataError::InvalidParams { .. } => "e:fef",
            HataError::BadWord(_) => "e:fewe",
            HataError::Disconnected { .. } | HataError::JunctionMissing { .. } => "l:hatacon",
            HataError::DisconnectedUnion { .. } | HataError::UnknownBranch(_) => "x1",
            HataError::IndexTooLarge { .. } => "malformed-input",
        }
    }
}

/// Parameters of the iterated function system `f_1(z) = c·conj(z)`,
/// `f_2(z) = (1-|c|²)·conj(z) + |c|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfsParams {
    c: C64,
}

impl IfsParams {
    pub fn new(c: C64) -> Result<Self, HataError> {
        let ok = c.norm() > 0.0
            && c.norm() < 1.0
            && (C64::new(1.0, 0.0) - c).norm() > 0.0
            && (C64::new(1.0, 0.0) - c).norm() < 1.0
            && c.im != 0.0;
        if ok {
            Ok(IfsParams { c })
        } else {
            Err(HataError::InvalidParams { c })
        }
    }

    /// The figure-caption default `c = 0.3 + 0.4i`.
    pub fn default_figure() -> Self {
        IfsParams {
            c: C64::new(0.3, 0.4),
        }
    }

    pub fn c(&self) -> C64 {
        self.c
    }

    pub fn c_norm_sq(&self) -> f64 {
        self.c.norm_sqr()
    }
}

/// Applies one of the two generating maps.
pub fn apply_map(j: u8, z: C64, params: &IfsParams) -> C64 {
    let c = params.c;
    match j {
        1 => c * z.conj(),
        2 => (C64::new(1.0 - c.norm_sqr(), 0.0)) * z.conj() + C64::new(c.norm_sqr(), 0.0),
        _ => panic!("map index must be 1 or 2"),
    }
}

/// A finite word over the alphabet {1, 2}; the empty word is allowed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn parse(s: &str) -> Result<Self, HataError> {
        let mut letters = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '1' => letters.push(1),
                '2' => letters.push(2),
                _ => return Err(HataError::BadWord(s.into())),
            }
        }
        Ok(Word(letters))
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends a letter, as in forming `w2` from `w`.
    pub fn push(&self, letter: u8) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    /// All words of the given length in lexicographic order (1 < 2).
    pub fn all_of_length(m: usize) -> Vec<Word> {
        let mut out = vec![Word::empty()];
        for _ in 0..m {
            let mut next = Vec::with_capacity(out.len() * 2);
            for w in &out {
                next.push(w.push(1));
                next.push(w.push(2));
            }
            out = next;
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// Evaluates the composition `f_w = f_{w_1} ∘ f_{w_2} ∘ … ∘ f_{w_m}`;
/// the empty word is the identity.
pub fn compose_word(w: &Word, z: C64, params: &IfsParams) -> C64 {
    let mut acc = z;
    for &letter in w.letters().iter().rev() {
        acc = apply_map(letter, acc, params);
    }
    acc
}

/// An oriented straight segment in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: C64,
    pub end: C64,
}

impl Segment {
    pub fn new(start: C64, end: C64) -> Self {
        Segment { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn is_degenerate(&self) -> bool {
        self.length() <= tol::ENDPOINT
    }

    /// `s` evenly spaced sample points including both endpoints (s >= 2),
    /// or the midpoint alone for s = 1.
    pub fn sample(&self, s: usize) -> Vec<C64> {
        assert!(s >= 1);
        if s == 1 {
            return vec![self.midpoint(0, 1)];
        }
        (0..s)
            .map(|k| {
                let t = k as f64 / (s - 1) as f64;
                self.start + (self.end - self.start) * C64::new(t, 0.0)
            })
            .collect()
    }

    /// Midpoint of the k-th of `s` equal cells, used by the midpoint rule.
    pub fn midpoint(&self, k: usize, s: usize) -> C64 {
        let t = (k as f64 + 0.5) / s as f64;
        self.start + (self.end - self.start) * C64::new(t, 0.0)
    }

    /// Image under one generating map; affine in conj(z), so segments map
    /// to segments endpoint-wise.
    pub fn image(&self, j: u8, params: &IfsParams) -> Segment {
        Segment {
            start: apply_map(j, self.start, params),
            end: apply_map(j, self.end, params),
        }
    }

    /// Euclidean distance from a point to this segment.
    pub fn distance_to(&self, z: C64) -> f64 {
        let d = self.end - self.start;
        let len2 = d.norm_sqr();
        if len2 == 0.0 {
            return (z - self.start).norm();
        }
        let t = ((z - self.start) * d.conj()).re / len2;
        let t = t.clamp(0.0, 1.0);
        (z - (self.start + d * C64::new(t, 0.0))).norm()
    }

    /// Whether two segments coincide up to orientation within `eps`.
    pub fn same_up_to_orientation(&self, other: &Segment, eps: f64) -> bool {
        ((self.start - other.start).norm() <= eps && (self.end - other.end).norm() <= eps)
            || ((self.start - other.end).norm() <= eps && (self.end - other.start).norm() <= eps)
    }

    /// Length of the overlap of two collinear segments; zero when they are
    /// not collinear or only touch.
    pub fn collinear_overlap(&self, other: &Segment, eps: f64) -> f64 {
        let d = self.end - self.start;
        let len = d.norm();
        if len <= eps {
            return 0.0;
        }
        let u = d / C64::new(len, 0.0);
        // other's endpoints must sit on this segment's line
        let off = |z: C64| ((z - self.start) * u.conj()).im.abs();
        if off(other.start) > eps || off(other.end) > eps {
            return 0.0;
        }
        let proj = |z: C64| ((z - self.start) * u.conj()).re;
        let (a, b) = (0.0, len);
        let (mut c, mut d2) = (proj(other.start), proj(other.end));
        if c > d2 {
            std::mem::swap(&mut c, &mut d2);
        }
        (d2.min(b) - c.max(a)).max(0.0)
    }
}

/// One level set of the approximating sequence, stored as exact oriented
/// endpoints in the generation row order: level n holds 2^(n+1) segments,
/// the images under the first map of the previous level followed by the
/// images under the second map.
#[derive(Debug, Clone)]
pub struct Approximation {
    pub level: usize,
    pub segments: Vec<Segment>,
    pub params: IfsParams,
}

/// Builds the level-`n` approximation. The seed consists of the arm
/// `c[0,1]` followed by the base `[0,1]`, matching the generation row
/// layout.
pub fn generate_approximation(params: &IfsParams, n: usize) -> Approximation {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut rows = vec![Segment::new(zero, params.c()), Segment::new(zero, one)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(rows.len() * 2);
        for seg in &rows {
            next.push(seg.image(1, params));
        }
        for seg in &rows {
            next.push(seg.image(2, params));
        }
        rows = next;
    }
    Approximation {
        level: n,
        segments: rows,
        params: *params,
    }
}

impl Approximation {
    /// Sampled polyline (s >= 2 points) per segment, in row order.
    pub fn sample_polylines(&self, s: usize) -> Vec<Vec<C64>> {
        self.segments
            .iter()
            .map(|seg| seg.sample(s.max(2)))
            .collect()
    }

    pub fn total_segment_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Minimal distance from `z` to the level set.
    pub fn distance_to(&self, z: C64) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to(z))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Identity of a branch: the base segment, the arm, or the image of the arm
/// under `f_{w2}` for a word `w`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum BranchKind {
    Trunk,
    Arm,
    New(Word),
}

impl BranchKind {
    /// Stable identifier used as carrier id in measure-space nodes.
    pub fn id(&self) -> String {
        match self {
            BranchKind::Trunk => "b-".into(),
            BranchKind::Arm => "bc".into(),
            BranchKind::New(w) => format!("b{w}"),
        }
    }

    /// The word column of the CSV table.
    pub fn word_column(&self) -> String {
        match self {
            BranchKind::Trunk => "-".into(),
            BranchKind::Arm => "c".into(),
            BranchKind::New(w) => w.to_string(),
        }
    }

    /// Level at which the branch first appears.
    pub fn level(&self) -> usize {
        match self {
            BranchKind::Trunk | BranchKind::Arm => 0,
            BranchKind::New(w) => w.len() + 1,
        }
    }
}

/// A maximal straight piece of a level set, with its provenance word and
/// starting node.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub kind: BranchKind,
    pub segment: Segment,
    pub start_node: C64,
}

impl Branch {
    pub fn id(&self) -> String {
        self.kind.id()
    }

    pub fn length(&self) -> f64 {
        self.segment.length()
    }
}

/// Enumerates the 2^n + 1 branches of the level-`n` set: the base `[0,1]`,
/// the arm `c(0,1]`, and one branch per word of length < n.
pub fn enumerate_branches(params: &IfsParams, n: usize) -> Vec<Branch> {
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut out = vec![
        Branch {
            kind: BranchKind::Trunk,
            segment: Segment::new(zero, one),
            start_node: zero,
        },
        Branch {
            kind: BranchKind::Arm,
            segment: Segment::new(zero, params.c()),
            start_node: zero,
        },
    ];
    for k in 0..n {
        for w in Word::all_of_length(k) {
            let u = w.push(2);
            let start = compose_word(&u, zero, params);
            let end = compose_word(&u, params.c(), params);
            out.push(Branch {
                kind: BranchKind::New(w),
                segment: Segment::new(start, end),
                start_node: start,
            });
        }
    }
    out
}

/// Sum of Euclidean branch lengths.
pub fn branch_measure(branches: &[Branch]) -> f64 {
    branches.iter().map(Branch::length).sum()
}

/// Certificate that a level set is connected and that the two image
/// families meet at the junction value |c|².
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityCertificate {
    pub level: usize,
    pub segment_count: usize,
    pub components: usize,
    pub junction: f64,
}

/// Builds the endpoint-sharing graph of the segments (tolerance 1e-12) and
/// certifies connectivity, together with the junction membership
/// `|c|² ∈ f_1(X_m) ∩ f_2(X_m)`.
pub fn check_connectivity(approx: &Approximation) -> Result<ConnectivityCertificate, HataError> {
    let n = approx.segments.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            let a = approx.segments[i];
            let b = approx.segments[j];
            let touch = (a.start - b.start).norm() <= tol::ENDPOINT
                || (a.start - b.end).norm() <= tol::ENDPOINT
                || (a.end - b.start).norm() <= tol::ENDPOINT
                || (a.end - b.end).norm() <= tol::ENDPOINT;
            if touch {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    roots.sort();
    roots.dedup();
    let components = roots.len();
    if components != 1 {
        return Err(HataError::Disconnected {
            level: approx.level,
            components,
        });
    }
    let junction = approx.params.c_norm_sq();
    let jz = C64::new(junction, 0.0);
    let on_family = |j: u8| {
        approx
            .segments
            .iter()
            .any(|s| s.image(j, &approx.params).distance_to(jz) <= tol::ENDPOINT)
    };
    if !(on_family(1) && on_family(2)) {
        return Err(HataError::JunctionMissing { junction });
    }
    Ok(ConnectivityCertificate {
        level: approx.level,
        segment_count: n,
        components,
        junction,
    })
}

/// The three strictly inductive organisations of the approximating sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemVariant {
    /// Linearly ordered levels `X_0 ⊆ X_1 ⊆ …`.
    Linear,
    /// Index `(n, k)` singling out each added branch, with `(n,k) <= (m,l)`
    /// iff `n < m` or (`n = m` and `k = 0`); a closing top is appended so
    /// the finite truncation stays directed.
    BranchIndexed,
    /// Connected finite unions of branches containing the base segment,
    /// ordered by inclusion.
    BranchUnion,
}

impl SystemVariant {
    pub fn parse(s: &str) -> Option<SystemVariant> {
        match s {
            "linear" => Some(SystemVariant::Linear),
            "branch-indexed" => Some(SystemVariant::BranchIndexed),
            "branch-union" => Some(SystemVariant::BranchUnion),
            _ => None,
        }
    }
}

/// Default cap for the branch-union variant; the index grows exponentially
/// with depth.
pub const BRANCH_UNION_DEPTH_CAP: usize = 4;
const BRANCH_UNION_NODE_CAP: usize = 100_000;

fn branch_node(branches: &[&Branch]) -> MeasureSpaceNode {
    let mut map = BTreeMap::new();
    for b in branches {
        map.insert(b.id(), b.segment);
    }
    MeasureSpaceNode {
        carrier: Carrier::Segments { branches: map },
    }
}

fn tail_growth(params: &IfsParams, depth: usize) -> TailGrowth {
    let ratio = params.c().norm() + 1.0 - params.c_norm_sq();
    let base = params.c().norm() * (1.0 - params.c_norm_sq()) * ratio.powi(depth as i32);
    TailGrowth { base, ratio }
}

/// The `(n,k)` identifier format of the branch-indexed order.
pub fn nk_id(n: usize, k: usize) -> String {
    format!("({n},{k})")
}

/// Builds the branch-indexed order on `{(n,k) : n <= depth, 0 <= k <= 2^n}`
/// together with the closing top `(depth+1, 0)` and the witness chain
/// `(m, 0)`. Without the closing top the finite truncation is not directed.
pub fn branch_indexed_order(depth: usize) -> (DirectedSet, ChainWitness) {
    let mut elements: Vec<(usize, usize)> = Vec::new();
    for n in 0..=depth {
        for k in 0..=(1usize << n) {
            elements.push((n, k));
        }
    }
    elements.push((depth + 1, 0));
    let ids: Vec<String> = elements.iter().map(|&(n, k)| nk_id(n, k)).collect();
    let mut pairs = Vec::new();
    for &(n, k) in &elements {
        for &(m, l) in &elements {
            let le = n < m || (n == m && k == 0) || (n == m && k == l);
            if le {
                pairs.push((nk_id(n, k), nk_id(m, l)));
            }
        }
    }
    let ds = DirectedSet::validate(&ids, &pairs).expect("branch-indexed order is directed");
    let chain = (0..=depth + 1).map(|m| nk_id(m, 0)).collect();
    (ds, ChainWitness { chain })
}

/// Attachment parent of each branch: the earlier branch its start node lies
/// on. The base segment has no parent.
pub fn branch_parents(branches: &[Branch]) -> BTreeMap<String, Option<String>> {
    let mut out = BTreeMap::new();
    for (i, b) in branches.iter().enumerate() {
        if matches!(b.kind, BranchKind::Trunk) {
            out.insert(b.id(), None);
            continue;
        }
        let mut parent: Option<(usize, String)> = None;
        for (j, p) in branches.iter().enumerate() {
            if i == j || p.id() == b.id() {
                continue;
            }
            if p.kind.level() <= b.kind.level()
                && p.segment.distance_to(b.start_node) <= tol::ENDPOINT
            {
                // prefer the lowest-level carrier of the attachment point
                let key = (p.kind.level(), p.id());
                if parent.as_ref().is_none_or(|prev| key < *prev) {
                    parent = Some(key);
                }
            }
        }
        out.insert(b.id(), parent.map(|(_, id)| id));
    }
    out
}

/// Validates that a set of branch ids forms a connected union containing
/// the base segment.
pub fn validate_branch_union(branches: &[Branch], chosen: &[String]) -> Result<(), HataError> {
    let ids: Vec<String> = branches.iter().map(Branch::id).collect();
    for c in chosen {
        if !ids.contains(c) {
            return Err(HataError::UnknownBranch(c.clone()));
        }
    }
    if !chosen.iter().any(|c| c == "b-") {
        return Err(HataError::DisconnectedUnion {
            branch: "b-".into(),
        });
    }
    let parents = branch_parents(branches);
    for c in chosen {
        if let Some(Some(p)) = parents.get(c) {
            if !chosen.contains(p) {
                return Err(HataError::DisconnectedUnion { branch: c.clone() });
            }
        }
    }
    Ok(())
}

/// Result of building one of the three inductive organisations.
#[derive(Debug, Clone)]
pub struct HataSystem {
    pub system: InductiveMeasureSystem,
    pub index: DirectedSet,
    pub witness: ChainWitness,
}

/// Builds the chosen strictly inductive system of measure spaces at the
/// given depth, with its index set and witness chain.
pub fn build_inductive_system(
    variant: SystemVariant,
    params: &IfsParams,
    depth: usize,
) -> Result<HataSystem, HataError> {
    let branches = enumerate_branches(params, depth + 1);
    match variant {
        SystemVariant::Linear => {
            let ids: Vec<String> = (0..=depth).map(|m| format!("X{m}")).collect();
            let index = DirectedSet::chain(&ids).expect("chain order is directed");
            let mut nodes = BTreeMap::new();
            for m in 0..=depth {
                let level: Vec<&Branch> = branches.iter().filter(|b| b.kind.level() <= m).collect();
                nodes.insert(format!("X{m}"), branch_node(&level));
            }
            let system = InductiveMeasureSystem::validate(
                index.clone(),
                nodes,
                None,
                Some(tail_growth(params, depth)),
            )
            .expect("level sets form a strictly inductive system");
            let witness = ChainWitness { chain: ids };
            Ok(HataSystem {
                system,
                index,
                witness,
            })
        }
        SystemVariant::BranchIndexed => {
            let (index, witness) = branch_indexed_order(depth);
            let mut nodes = BTreeMap::new();
            for n in 0..=depth {
                let level: Vec<&Branch> = branches.iter().filter(|b| b.kind.level() <= n).collect();
                nodes.insert(nk_id(n, 0), branch_node(&level));
                let words = Word::all_of_length(n);
                for (k, w) in words.iter().enumerate() {
                    let new_id = BranchKind::New(w.clone()).id();
                    let mut with_extra = level.clone();
                    with_extra.extend(branches.iter().filter(|b| b.id() == new_id));
                    nodes.insert(nk_id(n, k + 1), branch_node(&with_extra));
                }
            }
            let top_level: Vec<&Branch> = branches
                .iter()
                .filter(|b| b.kind.level() <= depth + 1)
                .collect();
            nodes.insert(nk_id(depth + 1, 0), branch_node(&top_level));
            let system = InductiveMeasureSystem::validate(
                index.clone(),
                nodes,
                None,
                Some(tail_growth(params, depth + 1)),
            )
            .expect("branch-indexed nodes form a strictly inductive system");
            Ok(HataSystem {
                system,
                index,
                witness,
            })
        }
        SystemVariant::BranchUnion => {
            if depth > BRANCH_UNION_DEPTH_CAP {
                return Err(HataError::IndexTooLarge {
                    depth,
                    nodes: 0,
                    cap: BRANCH_UNION_DEPTH_CAP,
                });
            }
            let level: Vec<&Branch> = branches
                .iter()
                .filter(|b| b.kind.level() <= depth)
                .collect();
            let owned: Vec<Branch> = level.iter().map(|b| (*b).clone()).collect();
            let parents = branch_parents(&owned);
            // children lists in id order
            let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for b in &owned {
                children.entry(b.id()).or_default();
            }
            for b in &owned {
                if let Some(Some(p)) = parents.get(&b.id()) {
                    children.get_mut(p).unwrap().push(b.id());
                }
            }
            // enumerate connected down-closed unions containing the trunk:
            // per subtree, an ideal containing the root is any choice, for
            // each child, of either nothing or an ideal of that child
            fn count_ideals(children: &BTreeMap<String, Vec<String>>, at: &str) -> u128 {
                children[at]
                    .iter()
                    .map(|ch| 1 + count_ideals(children, ch))
                    .product()
            }
            fn ideals(children: &BTreeMap<String, Vec<String>>, at: &str) -> Vec<Vec<String>> {
                let mut acc: Vec<Vec<String>> = vec![vec![at.to_string()]];
                for ch in &children[at] {
                    let sub = ideals(children, ch);
                    let mut next = Vec::with_capacity(acc.len() * (1 + sub.len()));
                    for base in &acc {
                        next.push(base.clone());
                        for ext in &sub {
                            let mut u = base.clone();
                            u.extend(ext.iter().cloned());
                            next.push(u);
                        }
                    }
                    acc = next;
                }
                acc
            }
            let expected = count_ideals(&children, "b-");
            if expected > BRANCH_UNION_NODE_CAP as u128 {
                return Err(HataError::IndexTooLarge {
                    depth,
                    nodes: expected as usize,
                    cap: BRANCH_UNION_NODE_CAP,
                });
            }
            let mut unions = ideals(&children, "b-");
            for u in &mut unions {
                u.sort();
            }
            for u in &unions {
                debug_assert!(validate_branch_union(&owned, u).is_ok());
            }
            let id_of = |u: &[String]| u.join("+");
            let ids: Vec<String> = unions.iter().map(|u| id_of(u)).collect();
            let mut pairs = Vec::new();
            for a in &unions {
                for b in &unions {
                    if a.iter().all(|x| b.contains(x)) {
                        pairs.push((id_of(a), id_of(b)));
                    }
                }
            }
            let index = DirectedSet::validate(&ids, &pairs).expect("inclusion order is directed");
            let mut nodes = BTreeMap::new();
            for u in &unions {
                let chosen: Vec<&Branch> = owned.iter().filter(|b| u.contains(&b.id())).collect();
                nodes.insert(id_of(u), branch_node(&chosen));
            }
            let system = InductiveMeasureSystem::validate(
                index.clone(),
                nodes,
                None,
                Some(tail_growth(params, depth)),
            )
            .expect("branch unions form a strictly inductive system");
            // witness chain: the full level sets X_0 ⊆ … ⊆ X_depth
            let mut chain = Vec::new();
            for m in 0..=depth {
                let mut u: Vec<String> = owned
                    .iter()
                    .filter(|b| b.kind.level() <= m)
                    .map(Branch::id)
                    .collect();
                u.sort();
                chain.push(u.join("+"));
            }
            let witness = ChainWitness { chain };
            Ok(HataSystem {
                system,
                index,
                witness,
            })
        }
    }
}

/// Styling knobs for the SVG emitter.
#[derive(Debug, Clone)]
pub struct SvgStyle {
    pub width: f64,
    pub stroke: String,
    pub samples_per_segment: usize,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            width: 640.0,
            stroke: "#004488".into(),
            samples_per_segment: 2,
        }
    }
}

/// Deterministic SVG document with one polyline per segment; the viewport
/// is the bounding box padded by 5%.
pub fn render_svg(approx: &Approximation, style: &SvgStyle) -> String {
    let mut min_re = f64::INFINITY;
    let mut max_re = f64::NEG_INFINITY;
    let mut min_im = f64::INFINITY;
    let mut max_im = f64::NEG_INFINITY;
    for s in &approx.segments {
        for z in [s.start, s.end] {
            min_re = min_re.min(z.re);
            max_re = max_re.max(z.re);
            min_im = min_im.min(z.im);
            max_im = max_im.max(z.im);
        }
    }
    let pad_re = 0.05 * (max_re - min_re).max(f64::MIN_POSITIVE);
    let pad_im = 0.05 * (max_im - min_im).max(f64::MIN_POSITIVE);
    let (x0, y0) = (min_re - pad_re, min_im - pad_im);
    let (w, h) = (
        max_re - min_re + 2.0 * pad_re,
        max_im - min_im + 2.0 * pad_im,
    );
    let scale = style.width / w;
    let height = h * scale;
    let fx = |re: f64| (re - x0) * scale;
    let fy = |im: f64| height - (im - y0) * scale;
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.6}\" height=\"{:.6}\" viewBox=\"0 0 {:.6} {:.6}\">\n",
        style.width, height, style.width, height
    ));
    let stroke_width = style.width / 800.0;
    for seg in &approx.segments {
        let pts = seg.sample(style.samples_per_segment.max(2));
        let coords: Vec<String> = pts
            .iter()
            .map(|z| format!("{:.6},{:.6}", fx(z.re), fy(z.im)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{:.6}\"/>\n",
            coords.join(" "),
            style.stroke,
            stroke_width
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// CSV table of branches: `word,start_re,start_im,end_re,end_im,length`,
/// all reals with 17 significant digits.
pub fn branch_table_csv(branches: &[Branch]) -> String {
    let mut out = String::from("word,start_re,start_im,end_re,end_im,length\n");
    for b in branches {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.kind.word_column(),
            fmt_f64(b.segment.start.re),
            fmt_f64(b.segment.start.im),
            fmt_f64(b.segment.end.re),
            fmt_f64(b.segment.end.im),
            fmt_f64(b.length())
        ));
    }
    out
}

/// Per-level added branch length `|c|(1-|c|²)(|c|+1-|c|²)^k`; the measure of
/// the level sets grows by this amount from level k to k+1.
pub fn added_length_at_level(params: &IfsParams, k: usize) -> f64 {
    let r = params.c().norm() + 1.0 - params.c_norm_sq();
    params.c().norm() * (1.0 - params.c_norm_sq()) * r.powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SetExpr;

    fn c34() -> IfsParams {
        IfsParams::new(C64::new(0.3, 0.4)).unwrap()
    }

    fn z(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Affine form a·z + b or a·conj(z) + b; composed symbolically, this is
    /// an oracle for word compositions independent of pointwise evaluation.
    #[derive(Clone, Copy)]
    struct Affine {
        a: C64,
        b: C64,
        conj: bool,
    }

    impl Affine {
        fn eval(&self, w: C64) -> C64 {
            if self.conj {
                self.a * w.conj() + self.b
            } else {
                self.a * w + self.b
            }
        }

        fn after(&self, inner: &Affine) -> Affine {
            // self(inner(z))
            if self.conj {
                Affine {
                    a: self.a * inner.a.conj(),
                    b: self.a * inner.b.conj() + self.b,
                    conj: !inner.conj,
                }
            } else {
                Affine {
                    a: self.a * inner.a,
                    b: self.a * inner.b + self.b,
                    conj: inner.conj,
                }
            }
        }
    }

    fn affine_of(letter: u8, p: &IfsParams) -> Affine {
        let q = p.c_norm_sq();
        match letter {
            1 => Affine {
                a: p.c(),
                b: z(0.0, 0.0),
                conj: true,
            },
            _ => Affine {
                a: z(1.0 - q, 0.0),
                b: z(q, 0.0),
                conj: true,
            },
        }
    }

    fn affine_word(w: &Word, p: &IfsParams) -> Affine {
        let mut acc = Affine {
            a: z(1.0, 0.0),
            b: z(0.0, 0.0),
            conj: false,
        };
        for &l in w.letters().iter().rev() {
            acc = affine_of(l, p).after(&acc);
        }
        acc
    }

    #[test]
    fn params_invariants_enforced() {
        assert!(IfsParams::new(z(0.3, 0.4)).is_ok());
        assert!(IfsParams::new(z(0.3, 0.0)).is_err()); // real
        assert!(IfsParams::new(z(0.9, 0.9)).is_err()); // |c| > 1
        assert!(IfsParams::new(z(0.0, 0.0)).is_err());
        assert!(IfsParams::new(z(-0.4, 0.4)).is_err()); // |1-c| > 1
    }

    #[test]
    fn apply_map_examples() {
        let p = c34();
        assert!((apply_map(1, z(1.0, 0.0), &p) - p.c()).norm() < 1e-15);
        assert!((apply_map(2, z(0.0, 0.0), &p) - z(0.25, 0.0)).norm() < 1e-15);
        assert!((apply_map(2, z(1.0, 0.0), &p) - z(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn compose_word_examples() {
        let p = c34();
        let q = p.c_norm_sq();
        for w in [z(0.7, -0.2), z(-1.0, 0.3), z(0.0, 0.0)] {
            let got = compose_word(&Word::parse("11").unwrap(), w, &p);
            assert!((got - w * q).norm() < 1e-15);
            assert!((compose_word(&Word::empty(), w, &p) - w).norm() == 0.0);
        }
        let got = compose_word(&Word::parse("12").unwrap(), z(0.0, 0.0), &p);
        assert!((got - z(0.075, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn length_two_closed_forms() {
        let p = c34();
        let c = p.c();
        let q = p.c_norm_sq();
        let table: Vec<(&str, Affine)> = vec![
            (
                "11",
                Affine {
                    a: z(q, 0.0),
                    b: z(0.0, 0.0),
                    conj: false,
                },
            ),
            (
                "12",
                Affine {
                    a: c * (1.0 - q),
                    b: c * q,
                    conj: false,
                },
            ),
            (
                "21",
                Affine {
                    a: c.conj() * (1.0 - q),
                    b: z(q, 0.0),
                    conj: false,
                },
            ),
            (
                "22",
                Affine {
                    a: z((1.0 - q) * (1.0 - q), 0.0),
                    b: z(q * (2.0 - q), 0.0),
                    conj: false,
                },
            ),
        ];
        for (ws, form) in table {
            let w = Word::parse(ws).unwrap();
            for k in 0..100 {
                let t = k as f64 / 37.0;
                let pt = z(t.cos(), t.sin() * 0.5);
                let got = compose_word(&w, pt, &p);
                assert!(
                    (got - form.eval(pt)).norm() < tol::WORD_CLOSED_FORM,
                    "word {ws} at {pt}"
                );
            }
        }
    }

    #[test]
    fn length_three_closed_forms() {
        let p = c34();
        let c = p.c();
        let q = p.c_norm_sq();
        let r = 1.0 - q;
        // conjugate-affine forms obtained by composing the generator forms
        let table: Vec<(&str, Affine)> = vec![
            (
                "111",
                Affine {
                    a: c * q,
                    b: z(0.0, 0.0),
                    conj: true,
                },
            ),
            (
                "112",
                Affine {
                    a: z(q * r, 0.0) * 1.0,
                    b: z(q * q, 0.0),
                    conj: true,
                },
            ),
            (
                "121",
                Affine {
                    a: c * c * r,
                    b: c * q,
                    conj: true,
                },
            ),
            (
                "122",
                Affine {
                    a: c * r * r,
                    b: c * q * (2.0 - q),
                    conj: true,
                },
            ),
            (
                "211",
                Affine {
                    a: z(q * r, 0.0),
                    b: z(q, 0.0),
                    conj: true,
                },
            ),
            (
                "212",
                Affine {
                    a: c.conj() * r * r,
                    b: c.conj() * q * r + q,
                    conj: true,
                },
            ),
            (
                "221",
                Affine {
                    a: c * r * r,
                    b: z(q * (2.0 - q), 0.0),
                    conj: true,
                },
            ),
            (
                "222",
                Affine {
                    a: z(r * r * r, 0.0),
                    b: z(q * (3.0 - 3.0 * q + q * q), 0.0),
                    conj: true,
                },
            ),
        ];
        for (ws, form) in table {
            let w = Word::parse(ws).unwrap();
            // closed form and independent symbolic composition must agree
            let oracle = affine_word(&w, &p);
            assert!((oracle.a - form.a).norm() < 1e-15, "coef of {ws}");
            assert!((oracle.b - form.b).norm() < 1e-15, "const of {ws}");
            assert_eq!(oracle.conj, form.conj, "parity of {ws}");
            for k in 0..100 {
                let t = k as f64 / 19.0;
                let pt = z(t.sin(), t.cos() * 0.7);
                let got = compose_word(&w, pt, &p);
                assert!(
                    (got - form.eval(pt)).norm() < tol::WORD_CLOSED_FORM,
                    "word {ws} at {pt}"
                );
            }
        }
    }

    #[test]
    fn word_parity_matches_length() {
        let p = c34();
        for m in 0..=4 {
            for w in Word::all_of_length(m) {
                assert_eq!(affine_word(&w, &p).conj, m % 2 == 1);
            }
        }
    }

    #[test]
    fn level_zero_segments() {
        let p = c34();
        let a = generate_approximation(&p, 0);
        assert_eq!(a.segments.len(), 2);
        assert!(a.segments[0].same_up_to_orientation(&Segment::new(z(0.0, 0.0), p.c()), 1e-15));
        assert!(
            a.segments[1].same_up_to_orientation(&Segment::new(z(0.0, 0.0), z(1.0, 0.0)), 1e-15)
        );
    }

    #[test]
    fn level_one_segments() {
        let p = c34();
        let q = p.c_norm_sq();
        let a = generate_approximation(&p, 1);
        assert_eq!(a.segments.len(), 4);
        let expect = [
            Segment::new(z(0.0, 0.0), z(q, 0.0)),
            Segment::new(z(0.0, 0.0), p.c()),
            Segment::new(z(q, 0.0), p.c().conj() * (1.0 - q) + q),
            Segment::new(z(q, 0.0), z(1.0, 0.0)),
        ];
        for e in &expect {
            assert!(
                a.segments
                    .iter()
                    .any(|s| s.same_up_to_orientation(e, 1e-14)),
                "missing {e:?}"
            );
        }
    }

    #[test]
    fn level_two_contains_frozen_endpoint() {
        // the image of the base under the doubled second map is [0.4375, 1]
        let p = c34();
        let a = generate_approximation(&p, 2);
        assert_eq!(a.segments.len(), 8);
        let frozen = Segment::new(z(0.4375, 0.0), z(1.0, 0.0));
        assert!(a
            .segments
            .iter()
            .any(|s| s.same_up_to_orientation(&frozen, 1e-14)));
    }

    #[test]
    fn branch_counts_match_levels() {
        let p = c34();
        for (n, count) in [(0, 2), (1, 3), (2, 5), (3, 9), (4, 17), (5, 33)] {
            assert_eq!(enumerate_branches(&p, n).len(), count, "level {n}");
        }
        for n in 6..=12 {
            assert_eq!(enumerate_branches(&p, n).len(), (1 << n) + 1);
        }
    }

    #[test]
    fn branch_measures_frozen() {
        let p = c34();
        assert!((branch_measure(&enumerate_branches(&p, 0)) - 1.5).abs() < 1e-14);
        assert!((branch_measure(&enumerate_branches(&p, 1)) - 1.875).abs() < 1e-14);
        assert_eq!(branch_measure(&[]), 0.0);
    }

    #[test]
    fn branch_measure_recursion_formula() {
        let p = c34();
        for n in 0..=8 {
            let direct = branch_measure(&enumerate_branches(&p, n));
            let mut formula = branch_measure(&enumerate_branches(&p, 0));
            for k in 0..n {
                formula += added_length_at_level(&p, k);
            }
            assert!((direct - formula).abs() < 1e-12, "level {n}");
        }
    }

    #[test]
    fn segment_rows_tile_the_branches() {
        let p = c34();
        for n in 0..=8 {
            let rows = generate_approximation(&p, n).total_segment_length();
            let branches = branch_measure(&enumerate_branches(&p, n));
            assert!((rows - branches).abs() < 1e-11, "level {n}");
        }
    }

    #[test]
    fn images_union_over_words_recovers_level() {
        let p = c34();
        let seed = generate_approximation(&p, 0);
        for m in 0..=5 {
            let level = generate_approximation(&p, m);
            let mut images: Vec<Segment> = Vec::new();
            for w in Word::all_of_length(m) {
                for s in &seed.segments {
                    images.push(Segment::new(
                        compose_word(&w, s.start, &p),
                        compose_word(&w, s.end, &p),
                    ));
                }
            }
            assert_eq!(images.len(), level.segments.len());
            let mut used = vec![false; level.segments.len()];
            for img in &images {
                let hit = level
                    .segments
                    .iter()
                    .enumerate()
                    .find(|(k, s)| !used[*k] && s.same_up_to_orientation(img, 1e-12));
                assert!(hit.is_some(), "level {m} misses {img:?}");
                used[hit.unwrap().0] = true;
            }
        }
    }

    #[test]
    fn connectivity_small_levels() {
        let p = c34();
        for n in 0..=6 {
            let cert = check_connectivity(&generate_approximation(&p, n)).unwrap();
            assert_eq!(cert.components, 1);
            assert!((cert.junction - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn connectivity_detects_separated_pieces() {
        let p = c34();
        let approx = Approximation {
            level: 0,
            segments: vec![
                Segment::new(z(0.0, 0.0), z(1.0, 0.0)),
                Segment::new(z(5.0, 5.0), z(6.0, 5.0)),
            ],
            params: p,
        };
        assert!(matches!(
            check_connectivity(&approx),
            Err(HataError::Disconnected { components: 2, .. })
        ));
    }

    #[test]
    fn branch_parent_map_matches_hand_computation() {
        let p = c34();
        let branches = enumerate_branches(&p, 3);
        let parents = branch_parents(&branches);
        assert_eq!(parents["b-"], None);
        assert_eq!(parents["bc"].as_deref(), Some("b-"));
        assert_eq!(parents["b"].as_deref(), Some("b-")); // starts at 0.25
        assert_eq!(parents["b1"].as_deref(), Some("bc")); // starts at 0.25c
        assert_eq!(parents["b2"].as_deref(), Some("b-")); // starts at 0.4375
        assert_eq!(parents["b11"].as_deref(), Some("b-")); // starts at 0.0625
        assert_eq!(parents["b21"].as_deref(), Some("b")); // starts on the first added branch
    }

    #[test]
    fn branch_union_validation() {
        let p = c34();
        let branches = enumerate_branches(&p, 2);
        assert!(validate_branch_union(&branches, &["b-".into(), "bc".into()]).is_ok());
        // the added branch hanging on the arm needs the arm present
        let err = validate_branch_union(&branches, &["b-".into(), "b1".into()]).unwrap_err();
        assert!(matches!(err, HataError::DisconnectedUnion { .. }));
        assert!(validate_branch_union(&branches, &["zzz".into()]).is_err());
    }

    #[test]
    fn branch_indexed_order_examples() {
        let (ds, witness) = branch_indexed_order(2);
        // levels 0..=2 plus the closing top
        assert_eq!(ds.len(), 2 + 3 + 5 + 1);
        let down = ds.down_set(&nk_id(2, 1)).unwrap();
        let expect: Vec<String> = vec![
            nk_id(0, 0),
            nk_id(0, 1),
            nk_id(1, 0),
            nk_id(1, 1),
            nk_id(1, 2),
            nk_id(2, 0),
            nk_id(2, 1),
        ];
        assert_eq!(down, expect);
        assert_eq!(
            ds.upper_bound(&nk_id(1, 1), &nk_id(1, 2)).unwrap(),
            nk_id(2, 0)
        );
        assert!(crate::order::is_sequentially_finite(&ds, &witness).is_ok());
    }

    #[test]
    fn raw_branch_indexed_truncation_is_not_directed() {
        // without the closing top, the two maximal-level branch entries
        // admit no joint upper bound
        let mut elements = Vec::new();
        let mut pairs = Vec::new();
        for n in 0..=3usize {
            for k in 0..=(1usize << n) {
                elements.push(nk_id(n, k));
            }
        }
        for n in 0..=3usize {
            for k in 0..=(1usize << n) {
                for m in 0..=3usize {
                    for l in 0..=(1usize << m) {
                        if n < m || (n == m && k == 0) || (n == m && k == l) {
                            pairs.push((nk_id(n, k), nk_id(m, l)));
                        }
                    }
                }
            }
        }
        let err = DirectedSet::validate(&elements, &pairs).unwrap_err();
        assert!(matches!(err, crate::order::OrderError::NoUpperBound { .. }));
    }

    #[test]
    fn linear_system_depth_three() {
        let p = c34();
        let hs = build_inductive_system(SystemVariant::Linear, &p, 3).unwrap();
        assert_eq!(hs.index.elements(), &["X0", "X1", "X2", "X3"]);
        assert_eq!(hs.witness.chain, vec!["X0", "X1", "X2", "X3"]);
        let m = hs
            .system
            .limit_measure(&SetExpr::NodeSet("X0".into()))
            .unwrap();
        assert!((m - 1.5).abs() < 1e-14);
    }

    #[test]
    fn branch_indexed_system_depth_two() {
        let p = c34();
        let hs = build_inductive_system(SystemVariant::BranchIndexed, &p, 2).unwrap();
        assert_eq!(hs.index.len(), 11);
        // the (1,1) node carries the three level-1 branches plus one more
        let node = hs.system.node(&nk_id(1, 1)).unwrap();
        assert_eq!(node.carrier.ids().len(), 4);
    }

    #[test]
    fn branch_union_system_depth_one() {
        let p = c34();
        let hs = build_inductive_system(SystemVariant::BranchUnion, &p, 1).unwrap();
        // ideals of {base, arm, first branch} containing the base
        assert_eq!(hs.index.len(), 4);
        assert!(crate::order::is_sequentially_finite(&hs.index, &hs.witness).is_ok());
        assert!(build_inductive_system(SystemVariant::BranchUnion, &p, 5).is_err());
    }

    #[test]
    fn svg_polyline_counts() {
        let p = c34();
        let style = SvgStyle::default();
        let svg0 = render_svg(&generate_approximation(&p, 0), &style);
        assert_eq!(svg0.matches("<polyline").count(), 2);
        let svg5 = render_svg(&generate_approximation(&p, 5), &style);
        assert_eq!(svg5.matches("<polyline").count(), 64);
        assert!(svg5.starts_with("<svg "));
        assert!(svg5.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn svg_level_fourteen_structure() {
        let p = c34();
        let svg = render_svg(&generate_approximation(&p, 14), &SvgStyle::default());
        assert_eq!(svg.matches("<polyline").count(), 32768);
        // every opened angle bracket closes before the next opens
        let mut depth = 0i64;
        for ch in svg.chars() {
            match ch {
                '<' => {
                    depth += 1;
                    assert_eq!(depth, 1);
                }
                '>' => {
                    depth -= 1;
                    assert_eq!(depth, 0);
                }
                _ => {}
            }
        }
        assert_eq!(depth, 0);
    }

    #[test]
    fn csv_table_shape() {
        let p = c34();
        let branches = enumerate_branches(&p, 2);
        let csv = branch_table_csv(&branches);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "word,start_re,start_im,end_re,end_im,length");
        assert_eq!(lines.len(), 1 + 5);
        assert!(lines[1].starts_with("-,"));
        assert!(lines[2].starts_with("c,"));
    }

    #[test]
    fn growth_ratio_for_default_parameters() {
        let p = c34();
        assert!((added_length_at_level(&p, 0) - 0.375).abs() < 1e-15);
        let ratio = p.c().norm() + 1.0 - p.c_norm_sq();
        assert!((ratio - 1.25).abs() < 1e-15);
    }
}
