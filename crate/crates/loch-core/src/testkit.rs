//! Seeded generators of random index sets, inductive Hilbert systems,
//! coherent nets, and intertwining triples. Deterministic for a fixed seed;
//! the verification suites and the command-line `suite` runner are built on
//! top of these.

use crate::hilbert::{build_inoue_space, InductiveHilbertSystem};
use crate::linalg::{joint_eigen_hermitian, reorthonormalize, CMat, JointPiece, C64};
use crate::operator::CoherentOperator;
use crate::order::{ChainWitness, DirectedSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

/// Eigenvalue on a coarse grid: multiples of 1/4 in a box, so random draws
/// are either exactly equal or separated well above the cluster tolerance.
pub fn grid_value(r: &mut ChaCha8Rng) -> C64 {
    C64::new(
        r.gen_range(-8i32..=8) as f64 / 4.0,
        r.gen_range(-8i32..=8) as f64 / 4.0,
    )
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| random_complex(r))
}

/// Haar-ish random unitary from the QR factor of a complex Gaussian.
pub fn random_unitary(r: &mut ChaCha8Rng, n: usize) -> CMat {
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    reorthonormalize(&random_matrix(r, n, n))
}

/// Random normal matrix with grid eigenvalues.
pub fn random_normal_matrix(r: &mut ChaCha8Rng, n: usize) -> CMat {
    let q = random_unitary(r, n);
    let d = CMat::from_fn(n, n, |i, j| {
        if i == j {
            grid_value(r)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    &q * d * q.adjoint()
}

/// Random directed set with at most `max_elements` entries; a closing top
/// element guarantees directedness.
pub fn random_directed_set(r: &mut ChaCha8Rng, max_elements: usize) -> DirectedSet {
    let k = r.gen_range(1..=max_elements.saturating_sub(1).max(1));
    let mut ids: Vec<String> = (0..k).map(|i| format!("n{i}")).collect();
    let mut rel: Vec<(usize, usize)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if r.gen_bool(0.4) {
                rel.push((i, j));
            }
        }
    }
    // transitive closure over the generated edges
    loop {
        let mut added = Vec::new();
        for &(a, b) in &rel {
            for &(c, d) in &rel {
                if b == c && !rel.contains(&(a, d)) && !added.contains(&(a, d)) {
                    added.push((a, d));
                }
            }
        }
        if added.is_empty() {
            break;
        }
        rel.extend(added);
    }
    let top = "nt".to_string();
    ids.push(top.clone());
    let mut all_pairs: Vec<(String, String)> = rel
        .into_iter()
        .map(|(a, b)| (ids[a].clone(), ids[b].clone()))
        .collect();
    for id in &ids {
        all_pairs.push((id.clone(), id.clone()));
        all_pairs.push((id.clone(), top.clone()));
    }
    DirectedSet::validate(&ids, &all_pairs).expect("closure plus top is directed")
}

/// Component dimensions for a direct-sum system, adjusted so every node
/// dimension stays within the cap and no node is zero-dimensional.
pub fn random_component_dims(
    r: &mut ChaCha8Rng,
    index: &DirectedSet,
    max_node_dim: usize,
) -> BTreeMap<String, usize> {
    let mut dims: BTreeMap<String, usize> = index
        .elements()
        .iter()
        .map(|e| (e.clone(), r.gen_range(0..=2usize)))
        .collect();
    fn node_dim(dims: &BTreeMap<String, usize>, el: &str, index: &DirectedSet) -> usize {
        index.down_set(el).unwrap().iter().map(|a| dims[a]).sum()
    }
    for el in index.elements() {
        if node_dim(&dims, el, index) == 0 {
            *dims.get_mut(el).unwrap() = 1;
        }
    }
    loop {
        let worst = index
            .elements()
            .iter()
            .map(|el| (node_dim(&dims, el, index), el.clone()))
            .max()
            .unwrap();
        if worst.0 <= max_node_dim {
            break;
        }
        let down = index.down_set(&worst.1).unwrap();
        let candidates: Vec<&String> = down.iter().filter(|a| dims[*a] > 0).collect();
        let pick = candidates[r.gen_range(0..candidates.len())].clone();
        *dims.get_mut(&pick).unwrap() -= 1;
        for el in index.elements() {
            if node_dim(&dims, el, index) == 0 {
                *dims.get_mut(el).unwrap() = 1;
            }
        }
    }
    dims
}

/// Plain direct-sum system with exact 0/1 embeddings.
pub fn random_inoue_system(
    r: &mut ChaCha8Rng,
    max_elements: usize,
    max_node_dim: usize,
) -> Arc<InductiveHilbertSystem> {
    let index = random_directed_set(r, max_elements);
    let dims = random_component_dims(r, &index, max_node_dim);
    Arc::new(build_inoue_space(&index, &dims).expect("direct-sum system validates"))
}

/// Representing system with dense float embeddings: a direct-sum skeleton
/// conjugated by one random unitary per node.
pub fn random_representing_system(
    r: &mut ChaCha8Rng,
    max_elements: usize,
    max_node_dim: usize,
) -> Arc<InductiveHilbertSystem> {
    let skeleton = random_inoue_system(r, max_elements, max_node_dim);
    Arc::new(rotate_system(r, &skeleton))
}

/// Conjugates every node of a system by a fresh random unitary, preserving
/// the representing property.
pub fn rotate_system(r: &mut ChaCha8Rng, sys: &InductiveHilbertSystem) -> InductiveHilbertSystem {
    let rotations: BTreeMap<String, CMat> = sys
        .index()
        .elements()
        .iter()
        .map(|el| (el.clone(), random_unitary(r, sys.dim(el).unwrap())))
        .collect();
    let mut embeddings = BTreeMap::new();
    for (lo, hi) in sys.index().comparable_pairs() {
        let j = sys.embedding(&lo, &hi).unwrap();
        embeddings.insert(
            (lo.clone(), hi.clone()),
            rotations[&hi].adjoint() * j * &rotations[&lo],
        );
    }
    InductiveHilbertSystem::from_parts(sys.index().clone(), sys.dims().clone(), embeddings)
        .expect("rotation preserves the axioms")
}

/// The joint invariant pieces of the projection family at the top node.
pub fn top_pieces(sys: &InductiveHilbertSystem) -> (String, Vec<JointPiece>) {
    let top = sys.index().top().expect("finite directed sets have a top");
    let d = sys.dim(&top).unwrap();
    let mut generators = Vec::new();
    for el in sys.index().elements() {
        generators.push(sys.projection_onto(el, &top).unwrap());
    }
    (top, joint_eigen_hermitian(&generators, d, 1e-9))
}

/// A coherent net assembled from one block per invariant piece of the top
/// node, compressed to every node.
pub fn random_coherent_net(
    r: &mut ChaCha8Rng,
    sys: &Arc<InductiveHilbertSystem>,
    normal: bool,
) -> CoherentOperator {
    let (top, pieces) = top_pieces(sys);
    let d = sys.dim(&top).unwrap();
    let mut t_top = CMat::zeros(d, d);
    for p in &pieces {
        let k = p.basis.ncols();
        let block = if normal {
            random_normal_matrix(r, k)
        } else {
            random_matrix(r, k, k)
        };
        t_top += &p.basis * block * p.basis.adjoint();
    }
    let blocks: BTreeMap<String, CMat> = sys
        .index()
        .elements()
        .iter()
        .map(|el| {
            let j = sys.embedding(el, &top).unwrap();
            (el.clone(), j.adjoint() * &t_top * &j)
        })
        .collect();
    CoherentOperator::validate_endo(blocks, sys.clone(), crate::tol::COHERENCE)
        .expect("piece-diagonal nets are coherent")
}

/// A scalar-per-piece locally normal net: each invariant piece carries one
/// grid eigenvalue. Returns the net and the per-piece values.
pub fn random_piece_scalar_net(
    r: &mut ChaCha8Rng,
    sys: &Arc<InductiveHilbertSystem>,
    values: Option<&[C64]>,
) -> (CoherentOperator, Vec<C64>) {
    let (top, pieces) = top_pieces(sys);
    let d = sys.dim(&top).unwrap();
    let vals: Vec<C64> = match values {
        Some(v) => v.to_vec(),
        None => (0..pieces.len()).map(|_| grid_value(r)).collect(),
    };
    let mut t_top = CMat::zeros(d, d);
    for (p, v) in pieces.iter().zip(vals.iter()) {
        t_top += (&p.basis * p.basis.adjoint()) * *v;
    }
    let blocks: BTreeMap<String, CMat> = sys
        .index()
        .elements()
        .iter()
        .map(|el| {
            let j = sys.embedding(el, &top).unwrap();
            (el.clone(), j.adjoint() * &t_top * &j)
        })
        .collect();
    (
        CoherentOperator::validate_endo(blocks, sys.clone(), crate::tol::COHERENCE)
            .expect("piece-scalar nets are coherent"),
        vals,
    )
}

/// Breaks coherence of a net: perturbs the block of one non-maximal node
/// with a dense matrix of norm about one half, leaving the larger blocks
/// untouched.
pub fn mutate_incoherent(r: &mut ChaCha8Rng, op: &CoherentOperator) -> BTreeMap<String, CMat> {
    let sys = op.system().clone();
    let pairs = sys.index().comparable_pairs();
    let (lo, _hi) = pairs[r.gen_range(0..pairs.len())].clone();
    let mut blocks = op.blocks().clone();
    let d = sys.dim(&lo).unwrap();
    let g = random_matrix(r, d, d);
    let g = &g * C64::new(0.5 / crate::linalg::spectral_norm(&g).max(1e-9), 0.0);
    *blocks.get_mut(&lo).unwrap() += g;
    blocks
}

/// An increasing witness chain ending at the top element.
pub fn random_witness(r: &mut ChaCha8Rng, index: &DirectedSet) -> ChainWitness {
    let top = index.top().expect("finite directed sets have a top");
    let mut chain = vec![top.clone()];
    let mut current = top;
    for _ in 0..3 {
        let below: Vec<String> = index
            .elements()
            .iter()
            .filter(|e| **e != current && index.leq(e, &current).unwrap())
            .cloned()
            .collect();
        if below.is_empty() || r.gen_bool(0.3) {
            break;
        }
        current = below[r.gen_range(0..below.len())].clone();
        chain.insert(0, current.clone());
    }
    ChainWitness { chain }
}

/// An intertwining triple: locally normal nets on two systems over one
/// index, and a coherent map with `NB = BM` exactly by construction. The
/// map is a locally unitary change of frame composed with a polynomial in
/// the source.
pub fn random_intertwining_triple(
    r: &mut ChaCha8Rng,
    max_elements: usize,
    max_node_dim: usize,
) -> (CoherentOperator, CoherentOperator, CoherentOperator) {
    let skeleton = random_inoue_system(r, max_elements, max_node_dim);
    let h = Arc::new(rotate_system(r, &skeleton));
    let k = Arc::new(rotate_system(r, &skeleton));
    // same scalar pattern on both systems: the piece label structure is
    // shared through the common skeleton
    let (top_h, pieces_h) = top_pieces(&h);
    let (_, pieces_k) = top_pieces(&k);
    let vals: Vec<C64> = (0..pieces_h.len()).map(|_| grid_value(r)).collect();
    let (n, _) = random_piece_scalar_net(r, &h, Some(&vals));
    let (m, _) = random_piece_scalar_net(r, &k, Some(&vals));
    // frame change W: K -> H built piecewise; with matching scalars it
    // intertwines exactly
    let dh = h.dim(&top_h).unwrap();
    let dk = k.dim(&top_h).unwrap();
    let mut w_top = CMat::zeros(dh, dk);
    for (a, b) in pieces_h.iter().zip(pieces_k.iter()) {
        debug_assert_eq!(a.basis.ncols(), b.basis.ncols());
        let mix = random_unitary(r, a.basis.ncols());
        w_top += &a.basis * mix * b.basis.adjoint();
    }
    let blocks: BTreeMap<String, CMat> = h
        .index()
        .elements()
        .iter()
        .map(|el| {
            let jh = h.embedding(el, &top_h).unwrap();
            let jk = k.embedding(el, &top_h).unwrap();
            (el.clone(), jh.adjoint() * &w_top * &jk)
        })
        .collect();
    let w = CoherentOperator::validate(blocks, k.clone(), h.clone(), crate::tol::COHERENCE)
        .expect("piecewise frame changes are coherent");
    // compose with a polynomial in M to leave the unitary class
    let c0 = random_complex(r);
    let c1 = random_complex(r);
    let poly = CoherentOperator::identity_on(k.clone())
        .scale(c0)
        .add(&m.scale(c1))
        .unwrap();
    let b = w.compose(&poly).unwrap();
    (n, m, b)
}

/// A net commuting with the given source: a quadratic polynomial in it.
pub fn random_commuting_net(r: &mut ChaCha8Rng, n: &CoherentOperator) -> CoherentOperator {
    let c0 = random_complex(r);
    let c1 = random_complex(r);
    let c2 = random_complex(r);
    let n2 = n.compose(n).unwrap();
    CoherentOperator::identity_on(n.system().clone())
        .scale(c0)
        .add(&n.scale(c1))
        .unwrap()
        .add(&n2.scale(c2))
        .unwrap()
}
