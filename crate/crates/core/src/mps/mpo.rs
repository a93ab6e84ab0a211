//! Matrix-product operator for the open-battery Hamiltonian.
//!
//! The star coupling (σz¹+σz²)⊗Σλᵢ(bᵢ+bᵢ†) is encoded with a single
//! accumulator channel carrying σz¹+σz² across the bath region, giving bond
//! dimension 3 (< the 5 allowed): channels F (finished), S (σz accumulator),
//! P (pending).

use nalgebra::DMatrix;

use crate::model::{DiscretizedBath, ModelParams};
use crate::{C64, Error, Result};

/// One MPO site: `ops[wl][wr]` is the d×d operator block, `None` = zero.
#[derive(Debug, Clone)]
pub struct MpoSite {
    pub ops: Vec<Vec<Option<DMatrix<C64>>>>,
}

impl MpoSite {
    pub fn bond_left(&self) -> usize {
        self.ops.len()
    }

    pub fn bond_right(&self) -> usize {
        self.ops[0].len()
    }

    pub fn phys_dim(&self) -> usize {
        self.ops
            .iter()
            .flatten()
            .flatten()
            .map(|m| m.nrows())
            .next()
            .unwrap_or(0)
    }
}

/// MPO over (qubit 1, qubit 2, mode 1, …, mode N).
#[derive(Debug, Clone)]
pub struct MatrixProductOperator {
    pub sites: Vec<MpoSite>,
}

fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn id(d: usize) -> DMatrix<C64> {
    DMatrix::identity(d, d)
}

fn sx2() -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| if i != j { cr(1.0) } else { cr(0.0) })
}

fn sz2() -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |i, j| if i == j { cr(1.0 - 2.0 * i as f64) } else { cr(0.0) })
}

/// b + b† at Fock cutoff n.
pub fn displacement_op(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            cr((j as f64).sqrt())
        } else if j + 1 == i {
            cr((i as f64).sqrt())
        } else {
            cr(0.0)
        }
    })
}

/// b†b at Fock cutoff n.
pub fn number_op(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { cr(i as f64) } else { cr(0.0) })
}

/// Hamiltonian MPO; `bias_epsilon` ≠ 0 adds −ε(σz¹+σz²) to the qubit local
/// fields.
pub fn build_mpo(
    params: &ModelParams,
    bath: &DiscretizedBath,
    bias_epsilon: f64,
) -> Result<MatrixProductOperator> {
    params.validate()?;
    if bath.is_empty() {
        return Err(Error::InvalidParams("bath must have at least one mode".into()));
    }
    let n = params.fock_cutoff;
    let h_local = sx2() * cr(-params.delta / 2.0) + sz2() * cr(-bias_epsilon);

    // Qubit 1, 1×3 row: [h1, σz, I].
    let q1 = MpoSite {
        ops: vec![vec![Some(h_local.clone()), Some(sz2()), Some(id(2))]],
    };
    // Qubit 2, 3×3; rows = incoming {F, S, P}.
    let q2 = MpoSite {
        ops: vec![
            vec![Some(id(2)), None, None],
            vec![Some(sz2() * cr(params.j_coupling / 4.0)), Some(id(2)), None],
            vec![Some(h_local), Some(sz2()), Some(id(2))],
        ],
    };
    let mut sites = vec![q1, q2];
    let last = bath.len() - 1;
    for (k, (&omega, &lambda)) in bath.frequencies.iter().zip(&bath.couplings).enumerate() {
        let x = displacement_op(n) * cr(lambda);
        let e = number_op(n) * cr(omega);
        if k < last {
            sites.push(MpoSite {
                ops: vec![
                    vec![Some(id(n)), None, None],
                    vec![Some(x), Some(id(n)), None],
                    vec![Some(e), None, Some(id(n))],
                ],
            });
        } else {
            sites.push(MpoSite {
                ops: vec![vec![Some(id(n))], vec![Some(x)], vec![Some(e)]],
            });
        }
    }
    Ok(MatrixProductOperator { sites })
}

impl MatrixProductOperator {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_bond(&self) -> usize {
        self.sites.iter().map(|s| s.bond_right()).max().unwrap_or(0)
    }

    /// Dense contraction in the exact engine's basis ordering; test oracle
    /// bridge for small instances.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        // Accumulate per-channel dense operators. Qubit 2 joins as the faster
        // index of the qubit block; every mode joins as a new slowest index.
        let mut acc: Vec<DMatrix<C64>> = vec![DMatrix::identity(1, 1)];
        for (i, site) in self.sites.iter().enumerate() {
            let qubit_side = i < 2;
            let mut next: Vec<DMatrix<C64>> = Vec::with_capacity(site.bond_right());
            for wr in 0..site.bond_right() {
                let mut sum: Option<DMatrix<C64>> = None;
                for wl in 0..site.bond_left() {
                    if let Some(op) = &site.ops[wl][wr] {
                        let term = if qubit_side {
                            kron(&acc[wl], op)
                        } else {
                            kron(op, &acc[wl])
                        };
                        sum = Some(match sum {
                            Some(s) => s + term,
                            None => term,
                        });
                    }
                }
                let dim = acc[0].nrows() * site.phys_dim();
                if dim > 20_000 {
                    return Err(Error::Capacity(format!("dense MPO contraction of dimension {dim} refused")));
                }
                next.push(sum.unwrap_or_else(|| DMatrix::zeros(dim, dim)));
            }
            acc = next;
        }
        if acc.len() != 1 {
            return Err(Error::Shape("MPO does not terminate in a 1-dim bond".into()));
        }
        Ok(acc.pop().unwrap())
    }
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::discretize_bath;

    fn small_params() -> ModelParams {
        ModelParams { n_modes: 3, fock_cutoff: 3, ..Default::default() }
    }

    #[test]
    fn bond_dimension_is_three() {
        let p = small_params();
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        assert_eq!(mpo.max_bond(), 3);
        assert!(mpo.max_bond() <= 5);
    }

    #[test]
    fn dense_contraction_matches_assembly_oracle() {
        for (bias, eps) in [(false, 0.0), (true, 1e-3)] {
            let p = small_params();
            let bath = discretize_bath(&p).unwrap();
            let mpo = build_mpo(&p, &bath, eps).unwrap();
            let dense = mpo.to_dense().unwrap();
            let oracle = crate::exact::hamiltonian::tests::dense_hamiltonian(&p, &bath, bias);
            let diff = (&dense - &oracle).norm();
            assert!(diff < 1e-10, "bias={bias}: diff {diff}");
        }
    }

    #[test]
    fn dense_contraction_is_hermitian() {
        let p = ModelParams { n_modes: 2, fock_cutoff: 4, g: 0.3, ..Default::default() };
        let bath = discretize_bath(&p).unwrap();
        let dense = build_mpo(&p, &bath, 0.0).unwrap().to_dense().unwrap();
        assert!((&dense - dense.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn zero_coupling_kills_interaction_channel() {
        let p = ModelParams { g: 0.0, ..small_params() };
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        for site in mpo.sites.iter().skip(2) {
            // Channel S closes with λ(b+b†); at g=0 all λ vanish.
            if let Some(op) = &site.ops[1][0] {
                assert!(op.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn single_mode_instance() {
        let p = ModelParams { n_modes: 1, fock_cutoff: 4, ..Default::default() };
        let bath = discretize_bath(&p).unwrap();
        let mpo = build_mpo(&p, &bath, 0.0).unwrap();
        let dense = mpo.to_dense().unwrap();
        let oracle = crate::exact::hamiltonian::tests::dense_hamiltonian(&p, &bath, false);
        assert!((&dense - &oracle).norm() < 1e-10);
    }
}
