//! Environment tensors and effective-operator contractions shared by DMRG and
//! TDVP, plus exact MPO application and expectation values.

use nalgebra::DMatrix;

use super::mpo::{MatrixProductOperator, MpoSite};
use super::tensor::{MatrixProductState, SiteTensor};
use crate::{C64, Error, Result};

/// Environment at an MPO bond: one (bra-bond × ket-bond) matrix per MPO
/// channel.
pub type Env = Vec<DMatrix<C64>>;

/// Boundary environment (1-dim MPO bond, 1-dim MPS bonds).
pub fn boundary_env() -> Env {
    vec![DMatrix::identity(1, 1)]
}

/// Grow a left environment through one site:
/// L'[wr] = Σ_{wl,p,p'} W[wl][wr](p,p') · A[p]† L[wl] A[p'].
pub fn contract_left(env: &Env, site: &SiteTensor, w: &MpoSite) -> Env {
    let dr = site.right_dim();
    let mut out = vec![DMatrix::<C64>::zeros(dr, dr); w.bond_right()];
    for wl in 0..w.bond_left() {
        // Hoist L[wl]·A[p'] which is independent of (wr, p).
        let la: Vec<DMatrix<C64>> = site.mats.iter().map(|m| &env[wl] * m).collect();
        for wr in 0..w.bond_right() {
            if let Some(op) = &w.ops[wl][wr] {
                for (p, mp) in site.mats.iter().enumerate() {
                    for (pp, lap) in la.iter().enumerate() {
                        let coeff = op[(p, pp)];
                        if coeff != C64::new(0.0, 0.0) {
                            out[wr] += (mp.adjoint() * lap) * coeff;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Grow a right environment through one site:
/// R'[wl] = Σ_{wr,p,p'} W[wl][wr](p,p') · conj(A[p]) R[wr] A[p']ᵀ.
pub fn contract_right(env: &Env, site: &SiteTensor, w: &MpoSite) -> Env {
    let dl = site.left_dim();
    let mut out = vec![DMatrix::<C64>::zeros(dl, dl); w.bond_left()];
    for wr in 0..w.bond_right() {
        let ra: Vec<DMatrix<C64>> = site.mats.iter().map(|m| &env[wr] * m.transpose()).collect();
        for wl in 0..w.bond_left() {
            if let Some(op) = &w.ops[wl][wr] {
                for (p, mp) in site.mats.iter().enumerate() {
                    for (pp, rap) in ra.iter().enumerate() {
                        let coeff = op[(p, pp)];
                        if coeff != C64::new(0.0, 0.0) {
                            out[wl] += (mp.conjugate() * rap) * coeff;
                        }
                    }
                }
            }
        }
    }
    out
}

/// ⟨ψ|O|ψ⟩ for an MPO observable.
pub fn expectation_mpo(mps: &MatrixProductState, mpo: &MatrixProductOperator) -> Result<C64> {
    if mps.len() != mpo.len() {
        return Err(Error::Shape(format!(
            "MPS has {} sites, MPO has {}",
            mps.len(),
            mpo.len()
        )));
    }
    let mut env = boundary_env();
    for (site, w) in mps.sites.iter().zip(&mpo.sites) {
        if site.phys_dim() != w.phys_dim() {
            return Err(Error::Shape("physical dimension mismatch between MPS and MPO".into()));
        }
        env = contract_left(&env, site, w);
    }
    Ok(env[0][(0, 0)])
}

/// Exact MPO application |φ⟩ = O|ψ⟩; bond dimensions multiply by the MPO's.
pub fn apply_mpo(mpo: &MatrixProductOperator, mps: &MatrixProductState) -> Result<MatrixProductState> {
    if mps.len() != mpo.len() {
        return Err(Error::Shape(format!(
            "MPS has {} sites, MPO has {}",
            mps.len(),
            mpo.len()
        )));
    }
    let mut sites = Vec::with_capacity(mps.len());
    for (a, w) in mps.sites.iter().zip(&mpo.sites) {
        let (dl, dr, d) = (a.left_dim(), a.right_dim(), a.phys_dim());
        let (wl_dim, wr_dim) = (w.bond_left(), w.bond_right());
        // New bond index (w, a), a fastest.
        let mats = (0..d)
            .map(|p| {
                let mut m = DMatrix::<C64>::zeros(wl_dim * dl, wr_dim * dr);
                for wl in 0..wl_dim {
                    for wr in 0..wr_dim {
                        if let Some(op) = &w.ops[wl][wr] {
                            for pp in 0..d {
                                let coeff = op[(p, pp)];
                                if coeff != C64::new(0.0, 0.0) {
                                    for aa in 0..dl {
                                        for bb in 0..dr {
                                            m[(wl * dl + aa, wr * dr + bb)] +=
                                                coeff * a.mats[pp][(aa, bb)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                m
            })
            .collect();
        sites.push(SiteTensor { mats });
    }
    Ok(MatrixProductState { sites, fock_cutoff: mps.fock_cutoff })
}

/// Effective one-site operator: y[p] = Σ W[wl][wr](p,p') L[wl] x[p'] R[wr]ᵀ.
pub fn apply_heff1(l: &Env, w: &MpoSite, r: &Env, x: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
    let d = w.phys_dim();
    let (dl, dr) = (x[0].nrows(), x[0].ncols());
    let mut y = vec![DMatrix::<C64>::zeros(dl, dr); d];
    for wl in 0..w.bond_left() {
        let lx: Vec<DMatrix<C64>> = x.iter().map(|m| &l[wl] * m).collect();
        for wr in 0..w.bond_right() {
            if let Some(op) = &w.ops[wl][wr] {
                let rt = r[wr].transpose();
                for p in 0..d {
                    for pp in 0..d {
                        let coeff = op[(p, pp)];
                        if coeff != C64::new(0.0, 0.0) {
                            y[p] += (&lx[pp] * &rt) * coeff;
                        }
                    }
                }
            }
        }
    }
    y
}

/// Effective zero-site (bond) operator: y = Σ_w L[w] C R[w]ᵀ.
pub fn apply_heff0(l: &Env, r: &Env, c: &DMatrix<C64>) -> DMatrix<C64> {
    let mut y = DMatrix::zeros(c.nrows(), c.ncols());
    for (lw, rw) in l.iter().zip(r) {
        y += lw * c * rw.transpose();
    }
    y
}

/// Effective two-site operator on blocks x[p1·d2+p2].
pub fn apply_heff2(
    l: &Env,
    w1: &MpoSite,
    w2: &MpoSite,
    r: &Env,
    x: &[DMatrix<C64>],
) -> Vec<DMatrix<C64>> {
    let (d1, d2) = (w1.phys_dim(), w2.phys_dim());
    let (dl, dr) = (x[0].nrows(), x[0].ncols());
    let wm_dim = w1.bond_right();
    // Stage 1: tmp[wm][p1·d2+p2'] = Σ_{wl,p1'} W1[wl][wm](p1,p1') L[wl] x[p1'·d2+p2'].
    let mut tmp = vec![vec![DMatrix::<C64>::zeros(dl, dr); d1 * d2]; wm_dim];
    for wl in 0..w1.bond_left() {
        let lx: Vec<DMatrix<C64>> = x.iter().map(|m| &l[wl] * m).collect();
        for (wm, tslot) in tmp.iter_mut().enumerate() {
            if let Some(op) = &w1.ops[wl][wm] {
                for p1 in 0..d1 {
                    for p1p in 0..d1 {
                        let coeff = op[(p1, p1p)];
                        if coeff != C64::new(0.0, 0.0) {
                            for p2p in 0..d2 {
                                tslot[p1 * d2 + p2p] += &lx[p1p * d2 + p2p] * coeff;
                            }
                        }
                    }
                }
            }
        }
    }
    // Stage 2: y[p1·d2+p2] = Σ_{wm,wr,p2'} W2[wm][wr](p2,p2') tmp[wm][p1·d2+p2'] R[wr]ᵀ.
    let mut y = vec![DMatrix::<C64>::zeros(dl, dr); d1 * d2];
    for (wm, tslot) in tmp.iter().enumerate() {
        for wr in 0..w2.bond_right() {
            if let Some(op) = &w2.ops[wm][wr] {
                let rt = r[wr].transpose();
                for p2 in 0..d2 {
                    for p2p in 0..d2 {
                        let coeff = op[(p2, p2p)];
                        if coeff != C64::new(0.0, 0.0) {
                            for p1 in 0..d1 {
                                y[p1 * d2 + p2] += (&tslot[p1 * d2 + p2p] * &rt) * coeff;
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

/// Flatten per-phys matrices into a Lanczos vector; index ((p·Dl)+a)·Dr+b.
pub fn flatten(mats: &[DMatrix<C64>]) -> Vec<C64> {
    let (dl, dr) = (mats[0].nrows(), mats[0].ncols());
    let mut v = Vec::with_capacity(mats.len() * dl * dr);
    for m in mats {
        for a in 0..dl {
            for b in 0..dr {
                v.push(m[(a, b)]);
            }
        }
    }
    v
}

pub fn unflatten(v: &[C64], phys: usize, dl: usize, dr: usize) -> Vec<DMatrix<C64>> {
    (0..phys)
        .map(|p| DMatrix::from_fn(dl, dr, |a, b| v[(p * dl + a) * dr + b]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{assemble_hamiltonian, Part};
    use crate::model::{discretize_bath, ModelParams};

    fn setup() -> (ModelParams, MatrixProductOperator, MatrixProductState) {
        let p = ModelParams { n_modes: 3, fock_cutoff: 3, ..Default::default() };
        let bath = discretize_bath(&p).unwrap();
        let mpo = super::super::mpo::build_mpo(&p, &bath, 0.0).unwrap();
        let mps = MatrixProductState::random(3, 3, 4, 21).unwrap();
        (p, mpo, mps)
    }

    #[test]
    fn expectation_matches_exact_engine() {
        let (p, mpo, mps) = setup();
        let v = expectation_mpo(&mps, &mpo).unwrap();
        let dense = mps.to_dense().unwrap();
        let bath = discretize_bath(&p).unwrap();
        let h = assemble_hamiltonian(&p, &bath).unwrap().with_bias(false);
        let oracle = h.expectation(&dense);
        assert!((v.re - oracle).abs() < 1e-10, "{} vs {oracle}", v.re);
        assert!(v.im.abs() < 1e-10);
    }

    #[test]
    fn apply_mpo_matches_exact_matvec() {
        let (p, mpo, mps) = setup();
        let hpsi = apply_mpo(&mpo, &mps).unwrap();
        let dense = hpsi.to_dense().unwrap();
        let bath = discretize_bath(&p).unwrap();
        let h = assemble_hamiltonian(&p, &bath).unwrap().with_bias(false);
        let oracle = h.apply(&mps.to_dense().unwrap().amplitudes);
        for (a, b) in dense.amplitudes.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-10);
        }
        // ⟨H²⟩ route: ‖Hψ‖² vs dense.
        let h2 = hpsi.inner(&hpsi).re;
        let h2_oracle: f64 = oracle.iter().map(|x| x.norm_sqr()).sum();
        assert!((h2 - h2_oracle).abs() < 1e-9);
        let _ = Part::Full;
    }

    #[test]
    fn heff_contractions_match_full_expectation() {
        // Contract environments around each site and check
        // ⟨A_i|H_eff1|A_i⟩ = ⟨ψ|H|ψ⟩ when the rest of the state is fixed.
        let (_, mpo, mps) = setup();
        let energy = expectation_mpo(&mps, &mpo).unwrap().re;
        let l_envs = {
            let mut envs = vec![boundary_env()];
            for i in 0..mps.len() {
                let e = contract_left(envs.last().unwrap(), &mps.sites[i], &mpo.sites[i]);
                envs.push(e);
            }
            envs
        };
        let r_envs = {
            let mut envs = vec![boundary_env()];
            for i in (0..mps.len()).rev() {
                let e = contract_right(envs.last().unwrap(), &mps.sites[i], &mpo.sites[i]);
                envs.push(e);
            }
            envs.reverse();
            envs
        };
        for i in 0..mps.len() {
            let y = apply_heff1(&l_envs[i], &mpo.sites[i], &r_envs[i + 1], &mps.sites[i].mats);
            let mut val = C64::new(0.0, 0.0);
            for (m, ym) in mps.sites[i].mats.iter().zip(&y) {
                val += m.iter().zip(ym.iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
            }
            assert!((val.re - energy).abs() < 1e-9, "site {i}: {} vs {energy}", val.re);
        }
        // Two-site check on the qubit pair.
        let block: Vec<DMatrix<C64>> =
            (0..4).map(|q| &mps.sites[0].mats[q / 2] * &mps.sites[1].mats[q % 2]).collect();
        let y = apply_heff2(&l_envs[0], &mpo.sites[0], &mpo.sites[1], &r_envs[2], &block);
        let mut val = C64::new(0.0, 0.0);
        for (m, ym) in block.iter().zip(&y) {
            val += m.iter().zip(ym.iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
        }
        assert!((val.re - energy).abs() < 1e-9, "{} vs {energy}", val.re);
    }

    #[test]
    fn flatten_round_trip() {
        let mats = vec![
            DMatrix::from_fn(3, 2, |a, b| C64::new(a as f64, b as f64)),
            DMatrix::from_fn(3, 2, |a, b| C64::new(b as f64, -(a as f64))),
        ];
        let v = flatten(&mats);
        let back = unflatten(&v, 2, 3, 2);
        assert_eq!(mats, back);
    }
}
