//! Small dense linear-algebra helpers shared by the engines: Hermitian
//! eigendecompositions, matrix exponentials, truncated SVD, Pauli matrices.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};

use crate::C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub const I2: Matrix2<C64> = Matrix2::new(
    C64::new(1.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(0.0, 0.0),
    C64::new(1.0, 0.0),
);

pub fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(cr(0.0), cr(1.0), cr(1.0), cr(0.0))
}

pub fn sigma_y() -> Matrix2<C64> {
    Matrix2::new(cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0))
}

pub fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(cr(1.0), cr(0.0), cr(0.0), cr(-1.0))
}

/// Kronecker product of two 2×2 matrices, qubit-1 factor first.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// σz¹ + σz² as a 4×4 matrix in the computational basis.
pub fn sz_total() -> Matrix4<C64> {
    kron2(&sigma_z(), &I2) + kron2(&I2, &sigma_z())
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
/// Returns (eigenvalues, eigenvector columns).
pub fn eigh(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let se = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = DVector::from_iterator(n, order.iter().map(|&i| se.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Hermitian eigendecomposition of a 4×4 matrix, ascending eigenvalues.
pub fn eigh4(m: &Matrix4<C64>) -> ([f64; 4], Matrix4<C64>) {
    let dm = DMatrix::from_fn(4, 4, |i, j| m[(i, j)]);
    let (vals, vecs) = eigh(&dm);
    let mut out_vals = [0.0; 4];
    let mut out_vecs = Matrix4::zeros();
    for i in 0..4 {
        out_vals[i] = vals[i];
        for j in 0..4 {
            out_vecs[(j, i)] = vecs[(j, i)];
        }
    }
    (out_vals, out_vecs)
}

/// exp(scale · H) for Hermitian H via eigendecomposition; `scale` may be
/// complex (e.g. −i·dt for unitary evolution).
pub fn expm_hermitian(h: &DMatrix<C64>, scale: C64) -> DMatrix<C64> {
    let (vals, vecs) = eigh(h);
    let n = h.nrows();
    let mut phase = DMatrix::zeros(n, n);
    for i in 0..n {
        phase[(i, i)] = (scale * vals[i]).exp();
    }
    &vecs * phase * vecs.adjoint()
}

/// exp(i · G) for a Hermitian 4×4 generator G.
pub fn expi_hermitian4(g: &Matrix4<C64>) -> Matrix4<C64> {
    let (vals, vecs) = eigh4(g);
    let mut phase = Matrix4::zeros();
    for i in 0..4 {
        phase[(i, i)] = (c(0.0, 1.0) * vals[i]).exp();
    }
    vecs * phase * vecs.adjoint()
}

/// Truncated SVD of a complex matrix.
///
/// Keeps at most `max_rank` singular values and discards trailing squared
/// weight below `disc_threshold` (relative to the total squared weight).
/// Returns (U, singular values, V†, discarded weight).
pub struct TruncatedSvd {
    pub u: DMatrix<C64>,
    pub singular_values: Vec<f64>,
    pub vt: DMatrix<C64>,
    pub discarded_weight: f64,
}

pub fn svd_truncated(m: &DMatrix<C64>, max_rank: usize, disc_threshold: f64) -> TruncatedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut sv: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .cloned()
        .enumerate()
        .collect();
    sv.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let total: f64 = sv.iter().map(|(_, s)| s * s).sum();

    // Keep the largest values until both the rank cap and the discarded-weight
    // budget are honored.
    let mut keep = sv.len().min(max_rank).max(1);
    if total > 0.0 {
        while keep > 1 {
            let tail: f64 = sv[keep - 1..].iter().map(|(_, s)| s * s).sum();
            let with_prev: f64 = tail / total;
            if with_prev > disc_threshold {
                break;
            }
            // Dropping index keep-1 keeps discarded weight within budget.
            let without: f64 = sv[keep - 1..].iter().map(|(_, s)| s * s).sum::<f64>() / total;
            if without <= disc_threshold {
                keep -= 1;
            } else {
                break;
            }
        }
    }
    let kept: Vec<(usize, f64)> = sv[..keep].to_vec();
    let discarded: f64 = if total > 0.0 {
        sv[keep..].iter().map(|(_, s)| s * s).sum::<f64>() / total
    } else {
        0.0
    };

    let mut u_out = DMatrix::zeros(m.nrows(), keep);
    let mut vt_out = DMatrix::zeros(keep, m.ncols());
    let mut s_out = Vec::with_capacity(keep);
    for (k, (idx, s)) in kept.iter().enumerate() {
        u_out.set_column(k, &u.column(*idx));
        vt_out.set_row(k, &vt.row(*idx));
        s_out.push(*s);
    }
    TruncatedSvd {
        u: u_out,
        singular_values: s_out,
        vt: vt_out,
        discarded_weight: discarded,
    }
}

/// Frobenius distance between two 4×4 matrices up to a global phase.
pub fn dist_up_to_phase(a: &Matrix4<C64>, b: &Matrix4<C64>) -> f64 {
    let overlap = (a.adjoint() * b).trace();
    let phase = if overlap.norm() > 1e-14 {
        overlap / overlap.norm()
    } else {
        cr(1.0)
    };
    (b - a.map(|x| x * phase)).norm()
}

/// Largest |U†U − I| entry, as a unitarity defect.
pub fn unitarity_defect(u: &Matrix4<C64>) -> f64 {
    let d = u.adjoint() * u - Matrix4::identity();
    d.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
