//! Dense complex linear algebra helpers shared by the operator and model
//! layers: spectral norms, eigensolvers for normal matrices, joint
//! diagonalization of commuting Hermitian families, and small utilities for
//! orthonormal frames.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn czero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn cone() -> C64 {
    C64::new(1.0, 0.0)
}

/// Spectral norm (largest singular value). Empty matrices have norm zero.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Smallest singular value; zero for empty matrices.
pub fn min_singular_value(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Hermitian residual `‖M − M*‖`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    spectral_norm(&(m - m.adjoint()))
}

/// Normality residual `‖MM* − M*M‖`.
pub fn normality_residual(m: &CMat) -> f64 {
    spectral_norm(&(m * m.adjoint() - m.adjoint() * m))
}

/// Eigenvalues of a general complex matrix via the Schur form.
pub fn general_eigenvalues(m: &CMat) -> Option<Vec<C64>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    let schur = m.clone().try_schur(f64::EPSILON, 100_000)?;
    let vals = schur.eigenvalues()?;
    let mut out: Vec<C64> = vals.iter().cloned().collect();
    sort_complex(&mut out);
    Some(out)
}

/// Sorts complex values by (Re, Im) lexicographically.
pub fn sort_complex(vals: &mut [C64]) {
    vals.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

/// Clusters a list of complex values with an absolute tolerance. Returns the
/// representative of each cluster (the (Re, Im)-smallest member) together
/// with the indices of its members. Input order is not assumed.
pub fn cluster_complex(vals: &[C64], tol: f64) -> Vec<(C64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[a]
            .re
            .partial_cmp(&vals[b].re)
            .unwrap()
            .then(vals[a].im.partial_cmp(&vals[b].im).unwrap())
    });
    let mut clusters: Vec<(C64, Vec<usize>)> = Vec::new();
    for idx in order {
        let v = vals[idx];
        match clusters
            .iter_mut()
            .find(|(rep, _)| (v - *rep).norm() <= tol)
        {
            Some((_, members)) => members.push(idx),
            None => clusters.push((v, vec![idx])),
        }
    }
    clusters
}

/// One orthonormal invariant piece produced by joint refinement: an
/// orthonormal basis (columns) together with the label each generator takes
/// on the piece.
#[derive(Debug, Clone)]
pub struct JointPiece {
    pub basis: CMat,
    pub labels: Vec<f64>,
}

/// Jointly diagonalizes a family of commuting Hermitian matrices by
/// recursive eigenspace refinement. Eigenvalues closer than `tol` are
/// merged. Pieces are returned sorted by their label vectors.
pub fn joint_eigen_hermitian(generators: &[CMat], dim: usize, tol: f64) -> Vec<JointPiece> {
    let mut pieces = vec![JointPiece {
        basis: identity(dim),
        labels: Vec::new(),
    }];
    for g in generators {
        pieces = refine_by_hermitian(pieces, g, tol);
    }
    sort_pieces(&mut pieces);
    pieces
}

/// Refines existing invariant pieces by one further commuting Hermitian
/// generator. Each piece must already be invariant under `g`.
pub fn refine_by_hermitian(pieces: Vec<JointPiece>, g: &CMat, tol: f64) -> Vec<JointPiece> {
    let mut out = Vec::new();
    for piece in pieces {
        let k = piece.basis.ncols();
        if k == 0 {
            continue;
        }
        let compressed = piece.basis.adjoint() * g * &piece.basis;
        let se = compressed.symmetric_eigen();
        let vals: Vec<C64> = se.eigenvalues.iter().map(|&x| C64::new(x, 0.0)).collect();
        for (rep, members) in cluster_complex(&vals, tol) {
            let mut sub = CMat::zeros(piece.basis.nrows(), members.len());
            for (j, &col) in members.iter().enumerate() {
                let v = &piece.basis * se.eigenvectors.column(col);
                sub.set_column(j, &v);
            }
            let sub = reorthonormalize(&sub);
            let mut labels = piece.labels.clone();
            labels.push(rep.re);
            out.push(JointPiece { basis: sub, labels });
        }
    }
    out
}

fn sort_pieces(pieces: &mut [JointPiece]) {
    pieces.sort_by(|a, b| {
        for (x, y) in a.labels.iter().zip(b.labels.iter()) {
            match x.partial_cmp(y).unwrap() {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
}

/// Thin QR re-orthonormalization of a full-column-rank matrix.
pub fn reorthonormalize(m: &CMat) -> CMat {
    if m.ncols() == 0 {
        return m.clone();
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix sign so the factorization is unique: force positive real diagonal of R
    for j in 0..q.ncols() {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let col = q.column(j) * phase;
            q.set_column(j, &col);
        }
    }
    q
}

/// Eigendecomposition of a normal matrix through its commuting Hermitian
/// real and imaginary parts. Returns pieces labelled by the complex
/// eigenvalue; fails if the matrix is not normal within `normal_tol`.
pub fn normal_eigen(m: &CMat, cluster_tol: f64, normal_tol: f64) -> Result<Vec<(C64, CMat)>, f64> {
    let res = normality_residual(m);
    if res > normal_tol {
        return Err(res);
    }
    let re = (m + m.adjoint()).scale(0.5);
    let im = ((m - m.adjoint()) * C64::new(0.0, -0.5)).clone_owned();
    let pieces = joint_eigen_hermitian(&[re, im], m.nrows(), cluster_tol);
    Ok(pieces
        .into_iter()
        .map(|p| (C64::new(p.labels[0], p.labels[1]), p.basis))
        .collect())
}

/// Normalizes the phase of each column: the first coordinate of modulus
/// above `thresh * column_norm` is made real positive.
pub fn phase_normalize_columns(m: &mut CMat, thresh: f64) {
    for j in 0..m.ncols() {
        let norm = m.column(j).norm();
        if norm == 0.0 {
            continue;
        }
        let mut phase = None;
        for i in 0..m.nrows() {
            let e = m[(i, j)];
            if e.norm() > thresh * norm {
                phase = Some(e / e.norm());
                break;
            }
        }
        if let Some(p) = phase {
            let col = m.column(j) * p.conj();
            m.set_column(j, &col);
        }
    }
}

/// Orthonormal basis of the orthogonal complement of the range of an
/// isometry `j` (columns orthonormal) inside its ambient space.
pub fn orthonormal_complement(j: &CMat) -> CMat {
    let d = j.nrows();
    let proj = identity(d) - j * j.adjoint();
    let se = proj.symmetric_eigen();
    let mut cols: Vec<usize> = (0..d).filter(|&k| se.eigenvalues[k] > 0.5).collect();
    cols.sort();
    let mut out = CMat::zeros(d, cols.len());
    for (t, &k) in cols.iter().enumerate() {
        out.set_column(t, &se.eigenvectors.column(k));
    }
    reorthonormalize(&out)
}

/// Random-free deterministic check that columns are orthonormal.
pub fn isometry_residual(m: &CMat) -> f64 {
    spectral_norm(&(m.adjoint() * m - identity(m.ncols())))
}
