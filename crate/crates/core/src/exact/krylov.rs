//! Lanczos iteration and Krylov propagation for Hermitian operators given as
//! matrix-vector closures. Shared by the exact engine, the DMRG local
//! eigensolver and the TDVP local integrator.

use nalgebra::DMatrix;

use crate::{C64, Error, Result};

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], alpha: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Result of a Lanczos run: tridiagonal coefficients and the orthonormal
/// basis. `betas[j]` couples basis vectors j and j+1.
pub struct LanczosFactorization {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub basis: Vec<Vec<C64>>,
}

/// Lanczos with full reorthogonalization, up to `m` basis vectors; stops
/// early on breakdown (invariant subspace found).
pub fn lanczos<F>(apply: F, v0: &[C64], m: usize) -> LanczosFactorization
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);

    let n0 = norm(v0);
    let mut v: Vec<C64> = v0.iter().map(|x| x / n0).collect();
    basis.push(v.clone());

    for j in 0..m {
        let mut w = apply(&v);
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);
        axpy(&mut w, C64::new(-alpha, 0.0), &basis[j]);
        if j > 0 {
            let b: f64 = betas[j - 1];
            axpy(&mut w, C64::new(-b, 0.0), &basis[j - 1]);
        }
        // Full reorthogonalization keeps the basis clean for small m.
        for prev in &basis {
            let c = dot(prev, &w);
            axpy(&mut w, -c, prev);
        }
        let beta = norm(&w);
        if j + 1 == m || beta < 1e-13 {
            break;
        }
        betas.push(beta);
        for x in &mut w {
            *x /= beta;
        }
        v = w.clone();
        basis.push(w);
    }
    LanczosFactorization { alphas, betas, basis }
}

/// Eigendecomposition of the symmetric tridiagonal matrix (ascending).
fn tridiag_eigh(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let se = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(m, m);
    for (k, &i) in order.iter().enumerate() {
        vecs.set_column(k, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// One Ritz step toward the lowest eigenpair: returns (theta, x) where x is
/// the normalized Ritz vector from an m-step Lanczos run started at v0.
pub fn lowest_ritz_pair<F>(apply: F, v0: &[C64], m: usize) -> (f64, Vec<C64>)
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let fact = lanczos(&apply, v0, m);
    let k = fact.alphas.len();
    let (vals, vecs) = tridiag_eigh(&fact.alphas, &fact.betas);
    let mut x = vec![C64::new(0.0, 0.0); v0.len()];
    for j in 0..k {
        axpy(&mut x, C64::new(vecs[(j, 0)], 0.0), &fact.basis[j]);
    }
    let nx = norm(&x);
    for xi in &mut x {
        *xi /= nx;
    }
    (vals[0], x)
}

/// Restarted Lanczos for the lowest eigenpair of a Hermitian operator.
///
/// Iterates m-step Ritz extractions until ‖Hx − θx‖ ≤ `residual_tol`.
pub fn ground_state<F>(
    apply: F,
    v0: &[C64],
    m: usize,
    residual_tol: f64,
    max_restarts: usize,
) -> Result<(f64, Vec<C64>)>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let mut x: Vec<C64> = v0.to_vec();
    let mut last_resid = f64::INFINITY;
    for _ in 0..max_restarts {
        let (theta, xr) = lowest_ritz_pair(&apply, &x, m);
        x = xr;
        let hx = apply(&x);
        let mut r = hx;
        axpy(&mut r, C64::new(-theta, 0.0), &x);
        last_resid = norm(&r);
        if last_resid <= residual_tol {
            return Ok((theta, x));
        }
    }
    Err(Error::Convergence(
        "Lanczos ground state did not reach the residual target".into(),
        last_resid,
    ))
}

/// exp(−i·dt·H)·v via Krylov projection, with an a-posteriori error estimate.
///
/// Returns the propagated vector; errors out if the subspace cannot represent
/// the step to within `tol` (suggesting a smaller dt or larger m).
pub fn expm_multiply<F>(apply: F, v: &[C64], dt: f64, m: usize, tol: f64) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let v_norm = norm(v);
    if v_norm == 0.0 {
        return Ok(v.to_vec());
    }
    let fact = lanczos(&apply, v, m);
    let k = fact.alphas.len();
    let (vals, vecs) = tridiag_eigh(&fact.alphas, &fact.betas);
    // u = exp(−i dt T) e1 in the Krylov basis.
    let mut u = vec![C64::new(0.0, 0.0); k];
    for col in 0..k {
        let phase = (C64::new(0.0, -dt) * vals[col]).exp();
        let w = vecs[(0, col)];
        for row in 0..k {
            u[row] += phase * (w * vecs[(row, col)]);
        }
    }
    // Breakdown (betas ran out) means the subspace is invariant and the
    // result exact; otherwise estimate the residual from the last component.
    if fact.betas.len() == k.saturating_sub(1) && k == m {
        let beta_last = fact
            .betas
            .last()
            .copied()
            .unwrap_or(0.0);
        let err = (beta_last * u[k - 1].norm() * dt.abs()).abs();
        if err > tol {
            return Err(Error::StepSize(format!(
                "Krylov step error estimate {err:.3e} exceeds tolerance {tol:.3e}"
            )));
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for j in 0..k {
        axpy(&mut out, u[j] * v_norm, &fact.basis[j]);
    }
    Ok(out)
}
