//! Site tensors and the matrix-product state with its canonical-form
//! operations.

use nalgebra::{DMatrix, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ergotropy::validate_unitary;
use crate::exact::{state_dim, PureStateVector};
use crate::linalg::svd_truncated;
use crate::{C64, Error, Result};

/// Truncation budget for SVD splits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub max_bond: usize,
    pub disc_weight: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { max_bond: 64, disc_weight: 1e-9 }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_bond == 0 || !(self.disc_weight > 0.0) {
            return Err(Error::InvalidParams(
                "truncation policy needs max_bond ≥ 1 and disc_weight > 0".into(),
            ));
        }
        Ok(())
    }

    /// Loss-free policy for exact splits (gates, MPO application).
    pub fn exact() -> Self {
        Self { max_bond: usize::MAX, disc_weight: 1e-14 }
    }
}

/// Rank-3 tensor A[p] ∈ C^{Dl×Dr}, one matrix per physical index.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTensor {
    pub mats: Vec<DMatrix<C64>>,
}

impl SiteTensor {
    pub fn phys_dim(&self) -> usize {
        self.mats.len()
    }

    pub fn left_dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn right_dim(&self) -> usize {
        self.mats[0].ncols()
    }

    /// Merge (left, phys) into rows: index a·d + p.
    pub fn merged_lp_r(&self) -> DMatrix<C64> {
        let (dl, d, dr) = (self.left_dim(), self.phys_dim(), self.right_dim());
        DMatrix::from_fn(dl * d, dr, |row, col| self.mats[row % d][(row / d, col)])
    }

    pub fn from_merged_lp_r(m: &DMatrix<C64>, phys: usize) -> Self {
        let dl = m.nrows() / phys;
        let dr = m.ncols();
        let mats = (0..phys)
            .map(|p| DMatrix::from_fn(dl, dr, |a, b| m[(a * phys + p, b)]))
            .collect();
        Self { mats }
    }

    /// Merge (phys, right) into columns: index p·Dr + b.
    pub fn merged_l_pr(&self) -> DMatrix<C64> {
        let (dl, d, dr) = (self.left_dim(), self.phys_dim(), self.right_dim());
        DMatrix::from_fn(dl, d * dr, |row, col| self.mats[col / dr][(row, col % dr)])
    }

    pub fn from_merged_l_pr(m: &DMatrix<C64>, phys: usize) -> Self {
        let dl = m.nrows();
        let dr = m.ncols() / phys;
        let mats = (0..phys)
            .map(|p| DMatrix::from_fn(dl, dr, |a, b| m[(a, p * dr + b)]))
            .collect();
        Self { mats }
    }

    /// ‖Σ_p A[p]†A[p] − I‖, zero for a left-orthonormal tensor.
    pub fn left_orth_defect(&self) -> f64 {
        let dr = self.right_dim();
        let mut acc = DMatrix::<C64>::zeros(dr, dr);
        for m in &self.mats {
            acc += m.adjoint() * m;
        }
        (acc - DMatrix::identity(dr, dr)).norm()
    }

    /// ‖Σ_p A[p]A[p]† − I‖, zero for a right-orthonormal tensor.
    pub fn right_orth_defect(&self) -> f64 {
        let dl = self.left_dim();
        let mut acc = DMatrix::<C64>::zeros(dl, dl);
        for m in &self.mats {
            acc += m * m.adjoint();
        }
        (acc - DMatrix::identity(dl, dl)).norm()
    }
}

/// Matrix-product state over (qubit 1, qubit 2, mode 1, …, mode N).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProductState {
    pub sites: Vec<SiteTensor>,
    /// Fock cutoff n of the bath sites; kept for dense conversion.
    pub fock_cutoff: usize,
}

impl MatrixProductState {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.sites.len() - 2
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.phys_dim()).collect()
    }

    /// Internal bond dimensions, length L−1.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites.iter().skip(1).map(|s| s.left_dim()).collect()
    }

    /// Product state: arbitrary two-qubit vector ⊗ bath vacuum.
    pub fn product_with_vacuum(qubits: &[C64; 4], n_modes: usize, fock_cutoff: usize) -> Result<Self> {
        if n_modes == 0 || fock_cutoff < 2 {
            return Err(Error::InvalidParams("need n_modes ≥ 1, fock_cutoff ≥ 2".into()));
        }
        // Split the 4-vector across the two qubit sites by SVD of the 2×2
        // coefficient matrix ψ(s1, s2).
        let m = DMatrix::from_fn(2, 2, |s1, s2| qubits[2 * s1 + s2]);
        let svd = svd_truncated(&m, 2, 1e-16);
        let k = svd.singular_values.len();
        let a1 = SiteTensor {
            mats: (0..2)
                .map(|p| DMatrix::from_fn(1, k, |_, j| svd.u[(p, j)] * svd.singular_values[j]))
                .collect(),
        };
        let a2 = SiteTensor {
            mats: (0..2).map(|p| DMatrix::from_fn(k, 1, |j, _| svd.vt[(j, p)])).collect(),
        };
        let mut sites = vec![a1, a2];
        for _ in 0..n_modes {
            sites.push(SiteTensor {
                mats: (0..fock_cutoff)
                    .map(|p| DMatrix::from_element(1, 1, if p == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
                    .collect(),
            });
        }
        Ok(Self { sites, fock_cutoff })
    }

    /// Random MPS with the given internal bond dimension, normalized;
    /// deterministic under the seed.
    pub fn random(n_modes: usize, fock_cutoff: usize, bond: usize, seed: u64) -> Result<Self> {
        if n_modes == 0 || fock_cutoff < 2 || bond == 0 {
            return Err(Error::InvalidParams("need n_modes ≥ 1, fock_cutoff ≥ 2, bond ≥ 1".into()));
        }
        let dims: Vec<usize> =
            [2usize, 2].into_iter().chain(std::iter::repeat_n(fock_cutoff, n_modes)).collect();
        let l = dims.len();
        // Bond b sits between sites b-1 and b; cap by representable rank.
        let mut bonds = vec![1usize; l + 1];
        for b in 1..l {
            let left: usize = dims[..b].iter().product::<usize>().min(4096);
            let right: usize = dims[b..].iter().take(8).product::<usize>().min(4096);
            bonds[b] = bond.min(left).min(right);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = (0..l)
            .map(|i| SiteTensor {
                mats: (0..dims[i])
                    .map(|_| {
                        DMatrix::from_fn(bonds[i], bonds[i + 1], |_, _| {
                            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        })
                    })
                    .collect(),
            })
            .collect();
        let mut mps = Self { sites, fock_cutoff };
        mps.canonicalize_right();
        Ok(mps)
    }

    /// ⟨self|other⟩ by a left-to-right transfer contraction.
    pub fn inner(&self, other: &Self) -> C64 {
        let mut e = DMatrix::<C64>::identity(1, 1);
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let mut next = DMatrix::zeros(a.right_dim(), b.right_dim());
            for p in 0..a.phys_dim() {
                next += a.mats[p].adjoint() * &e * &b.mats[p];
            }
            e = next;
        }
        e[(0, 0)]
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// |⟨self|other⟩|² for normalized states.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Left-orthonormalize site i by QR, absorbing the triangular factor into
    /// site i+1 (or returning it for the last site).
    pub fn left_normalize_site(&mut self, i: usize) -> Option<DMatrix<C64>> {
        let d = self.sites[i].phys_dim();
        let qr = self.sites[i].merged_lp_r().qr();
        let q = qr.q();
        let r = qr.r();
        self.sites[i] = SiteTensor::from_merged_lp_r(&q, d);
        if i + 1 < self.sites.len() {
            for m in &mut self.sites[i + 1].mats {
                *m = &r * &*m;
            }
            None
        } else {
            Some(r)
        }
    }

    /// Right-orthonormalize site i, absorbing the factor into site i−1 (or
    /// returning it for the first site).
    pub fn right_normalize_site(&mut self, i: usize) -> Option<DMatrix<C64>> {
        let d = self.sites[i].phys_dim();
        let m = self.sites[i].merged_l_pr();
        // M = L·Q with Q row-orthonormal, via QR of M†.
        let qr = m.adjoint().qr();
        let q = qr.q().adjoint();
        let l = qr.r().adjoint();
        self.sites[i] = SiteTensor::from_merged_l_pr(&q, d);
        if i > 0 {
            for mm in &mut self.sites[i - 1].mats {
                *mm = &*mm * &l;
            }
            None
        } else {
            Some(l)
        }
    }

    /// Bring to right-canonical form (center at site 0) and normalize.
    pub fn canonicalize_right(&mut self) {
        for i in (1..self.sites.len()).rev() {
            self.right_normalize_site(i);
        }
        let n = {
            let mut sq = 0.0;
            for m in &self.sites[0].mats {
                sq += m.iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
            sq.sqrt()
        };
        if n > 0.0 {
            for m in &mut self.sites[0].mats {
                *m /= C64::new(n, 0.0);
            }
        }
    }

    /// Apply a unitary on the qubit pair (sites 0–1); exact split, no
    /// truncation beyond numerical rank.
    pub fn apply_two_site_gate(&self, u: &Matrix4<C64>) -> Result<Self> {
        validate_unitary(u)?;
        let mut out = self.clone();
        let (a1, a2) = (&self.sites[0], &self.sites[1]);
        let (dl, dr) = (a1.left_dim(), a2.right_dim());
        // Block B[q] = Σ_c A1[p1]·A2[p2], q = 2p1+p2.
        let mut block: Vec<DMatrix<C64>> = (0..4).map(|q| &a1.mats[q / 2] * &a2.mats[q % 2]).collect();
        let rotated: Vec<DMatrix<C64>> = (0..4)
            .map(|q| {
                let mut acc = DMatrix::zeros(dl, dr);
                for (qp, b) in block.iter().enumerate() {
                    acc += b * u[(q, qp)];
                }
                acc
            })
            .collect();
        block = rotated;
        // Split back: rows (a, p1), cols (p2, b).
        let merged = DMatrix::from_fn(dl * 2, 2 * dr, |row, col| {
            let (a, p1) = (row / 2, row % 2);
            let (p2, b) = (col / dr, col % dr);
            block[2 * p1 + p2][(a, b)]
        });
        let svd = svd_truncated(&merged, 4 * dl.min(dr).max(1), 1e-14);
        let k = svd.singular_values.len();
        let mut right = DMatrix::<C64>::zeros(k, 2 * dr);
        for i in 0..k {
            for j in 0..2 * dr {
                right[(i, j)] = svd.vt[(i, j)] * svd.singular_values[i];
            }
        }
        out.sites[0] = SiteTensor::from_merged_lp_r(&svd.u, 2);
        out.sites[1] = SiteTensor::from_merged_l_pr(&right, 2);
        Ok(out)
    }

    /// Reduced qubit density matrix, computational ordering (↑↑, ↑↓, ↓↑, ↓↓).
    pub fn reduce_to_qubits(&self) -> Matrix4<C64> {
        // Identity right environment over sites 2..L.
        let mut r = DMatrix::<C64>::identity(1, 1);
        for site in self.sites.iter().skip(2).rev() {
            let mut next = DMatrix::zeros(site.left_dim(), site.left_dim());
            for m in &site.mats {
                next += m.conjugate() * &r * m.transpose();
            }
            r = next;
        }
        // Row vectors v[q] over the bond right of site 1 (left boundary is 1).
        let v: Vec<DMatrix<C64>> =
            (0..4).map(|q| &self.sites[0].mats[q / 2] * &self.sites[1].mats[q % 2]).collect();
        Matrix4::from_fn(|q, qp| (v[qp].conjugate() * &r * v[q].transpose())[(0, 0)])
    }

    /// ⟨ψ|O_i|ψ⟩ for a single-site operator.
    pub fn expect_site_op(&self, i: usize, op: &DMatrix<C64>) -> Result<C64> {
        let d = self.sites[i].phys_dim();
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::Shape(format!(
                "operator is {}×{} but site {i} has physical dimension {d}",
                op.nrows(),
                op.ncols()
            )));
        }
        let mut e = DMatrix::<C64>::identity(1, 1);
        for (j, site) in self.sites.iter().enumerate() {
            let (dr_bra, dr_ket) = (site.right_dim(), site.right_dim());
            let mut next = DMatrix::zeros(dr_bra, dr_ket);
            if j == i {
                for p in 0..d {
                    for pp in 0..d {
                        if op[(p, pp)] != C64::new(0.0, 0.0) {
                            next += (site.mats[p].adjoint() * &e * &site.mats[pp]) * op[(p, pp)];
                        }
                    }
                }
            } else {
                for m in &site.mats {
                    next += m.adjoint() * &e * m;
                }
            }
            e = next;
        }
        Ok(e[(0, 0)])
    }

    /// Contract to a dense state vector in the exact engine's basis ordering.
    pub fn to_dense(&self) -> Result<PureStateVector> {
        let n_modes = self.n_modes();
        let n = self.fock_cutoff;
        let dim = state_dim(n_modes, n)?;
        if dim > 10_000_000 {
            return Err(Error::Capacity(format!("dense conversion of dimension {dim} refused")));
        }
        // Site strides in the exact index q + 4·(m₁ + n·m₂ + …), q = 2s₁+s₂.
        let mut strides = vec![2usize, 1];
        let mut s = 4usize;
        for _ in 0..n_modes {
            strides.push(s);
            s *= n;
        }
        let mut partial: Vec<(usize, DMatrix<C64>)> = vec![(0, DMatrix::identity(1, 1))];
        for (site, stride) in self.sites.iter().zip(&strides) {
            let mut next = Vec::with_capacity(partial.len() * site.phys_dim());
            for (idx, v) in &partial {
                for (p, m) in site.mats.iter().enumerate() {
                    next.push((idx + p * stride, v * m));
                }
            }
            partial = next;
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        for (idx, v) in partial {
            amplitudes[idx] = v[(0, 0)];
        }
        Ok(PureStateVector { amplitudes, n_modes, fock_cutoff: n })
    }

    /// Largest canonical-form defect with center at `center`: left tensors
    /// must be left-orthonormal, right tensors right-orthonormal.
    pub fn canonical_defect(&self, center: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, site) in self.sites.iter().enumerate() {
            if i < center {
                worst = worst.max(site.left_orth_defect());
            } else if i > center {
                worst = worst.max(site.right_orth_defect());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr};

    fn random_state(seed: u64) -> MatrixProductState {
        MatrixProductState::random(3, 3, 4, seed).unwrap()
    }

    #[test]
    fn product_state_matches_dense_kron() {
        let q = [cr(0.5), c(0.0, 0.5), cr(-0.5), c(0.5, 0.0)];
        let mps = MatrixProductState::product_with_vacuum(&q, 2, 3).unwrap();
        let dense = mps.to_dense().unwrap();
        let oracle = PureStateVector::product_with_vacuum(&q, 2, 3).unwrap();
        for (a, b) in dense.amplitudes.iter().zip(&oracle.amplitudes) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!((mps.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_is_normalized_canonical_and_deterministic() {
        let a = random_state(11);
        let b = random_state(11);
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-10);
        assert!(a.canonical_defect(0) < 1e-10);
    }

    #[test]
    fn canonicalization_preserves_the_state() {
        let a = random_state(3);
        let mut b = a.clone();
        for i in 0..b.len() - 1 {
            b.left_normalize_site(i);
        }
        let overlap = a.inner(&b).norm();
        assert!((overlap - 1.0).abs() < 1e-10, "{overlap}");
        b.canonicalize_right();
        assert!((a.inner(&b).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dense_round_trip_through_gate() {
        let a = random_state(7);
        let dense = a.to_dense().unwrap();
        assert!((dense.norm() - 1.0).abs() < 1e-10);
        // Identity gate leaves the state unchanged.
        let b = a.apply_two_site_gate(&Matrix4::identity()).unwrap();
        assert!((a.fidelity(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_matches_dense_oracle_and_inverts() {
        use crate::linalg::expi_hermitian4;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let g = Matrix4::from_fn(|_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let u = expi_hermitian4(&((g + g.adjoint()) * cr(0.5)));

        let a = random_state(9);
        let gated = a.apply_two_site_gate(&u).unwrap();
        assert!((gated.norm() - 1.0).abs() < 1e-12);
        let dense_gate = gated.to_dense().unwrap();
        let dense_oracle = a.to_dense().unwrap().apply_local_unitary(&u);
        for (x, y) in dense_gate.amplitudes.iter().zip(&dense_oracle.amplitudes) {
            assert!((x - y).norm() < 1e-12);
        }
        // u then u† restores the original.
        let back = gated.apply_two_site_gate(&u.adjoint()).unwrap();
        assert!(a.fidelity(&back) >= 1.0 - 1e-10);
    }

    #[test]
    fn rejects_non_unitary_gate() {
        let a = random_state(1);
        let not_u = Matrix4::identity() * cr(1.5);
        assert!(a.apply_two_site_gate(&not_u).is_err());
    }

    #[test]
    fn reduction_matches_dense() {
        let a = random_state(13);
        let rho = a.reduce_to_qubits();
        let rho_oracle = a.to_dense().unwrap().reduce_to_qubits();
        assert!((rho - rho_oracle).norm() < 1e-11);
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn site_expectation_matches_dense() {
        let a = random_state(17);
        // σz on qubit 2 = diag(1,-1).
        let sz = DMatrix::from_fn(2, 2, |i, j| if i == j { cr(1.0 - 2.0 * i as f64) } else { cr(0.0) });
        let v = a.expect_site_op(1, &sz).unwrap();
        // Dense oracle.
        let dense = a.to_dense().unwrap();
        let mut acc = 0.0;
        for (i, amp) in dense.amplitudes.iter().enumerate() {
            let s2 = (i % 4) % 2;
            acc += amp.norm_sqr() * (1.0 - 2.0 * s2 as f64);
        }
        assert!((v.re - acc).abs() < 1e-11, "{} vs {acc}", v.re);
        assert!(v.im.abs() < 1e-12);
        // Shape validation.
        assert!(a.expect_site_op(2, &sz).is_err());
    }

    #[test]
    fn number_operator_on_vacuum_is_zero() {
        let q = [cr(1.0), cr(0.0), cr(0.0), cr(0.0)];
        let mps = MatrixProductState::product_with_vacuum(&q, 3, 4).unwrap();
        let nop = DMatrix::from_fn(4, 4, |i, j| if i == j { cr(i as f64) } else { cr(0.0) });
        for site in 2..5 {
            assert!(mps.expect_site_op(site, &nop).unwrap().norm() < 1e-14);
        }
    }
}
