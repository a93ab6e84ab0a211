//! Cartan (KAK) decomposition of two-qubit gates into three controlled-X
//! gates and single-qubit ZYZ Euler rotations.
//!
//! The canonical interaction N(a,b,c) = exp(i(a XX + b YY + c ZZ)) is realized
//! by the exact three-CX identity
//!   N = (S⊗S)·CX·(Rx(−2b)Z ⊗ S†H)·CX·(Rx(−2a) ⊗ H·Rz(−2c))·CX,
//! which follows from CX(X⊗I)CX = X⊗X, CX(I⊗Z)CX = Z⊗Z and
//! CX(S†⊗S†)CX = (Z⊗S†)·CZ. All contracts hold up to a global phase.

use nalgebra::{Matrix2, Matrix4};
use rand::{Rng, SeedableRng};

use crate::ergotropy::validate_unitary;
use crate::linalg::{c, cr, dist_up_to_phase, expi_hermitian4, kron2, sigma_x, sigma_y, sigma_z, I2};
use crate::optimize::TwoQubitUnitary;
use crate::{C64, Error, Result};

/// Reconstruction tolerance of the export contract.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

// --- Single-qubit building blocks -------------------------------------------

fn rz2(theta: f64) -> Matrix2<C64> {
    let h = theta / 2.0;
    Matrix2::new(c(h.cos(), -h.sin()), cr(0.0), cr(0.0), c(h.cos(), h.sin()))
}

fn ry2(theta: f64) -> Matrix2<C64> {
    let h = theta / 2.0;
    Matrix2::new(cr(h.cos()), cr(-h.sin()), cr(h.sin()), cr(h.cos()))
}

fn rx2(theta: f64) -> Matrix2<C64> {
    let h = theta / 2.0;
    Matrix2::new(c(h.cos(), 0.0), c(0.0, -h.sin()), c(0.0, -h.sin()), c(h.cos(), 0.0))
}

fn hadamard2() -> Matrix2<C64> {
    let s = 1.0 / 2.0_f64.sqrt();
    Matrix2::new(cr(s), cr(s), cr(s), cr(-s))
}

fn s2() -> Matrix2<C64> {
    Matrix2::new(cr(1.0), cr(0.0), cr(0.0), c(0.0, 1.0))
}

fn sdg2() -> Matrix2<C64> {
    Matrix2::new(cr(1.0), cr(0.0), cr(0.0), c(0.0, -1.0))
}

fn z2() -> Matrix2<C64> {
    Matrix2::new(cr(1.0), cr(0.0), cr(0.0), cr(-1.0))
}

/// ZYZ Euler angles (β, γ, δ) with u ∝ Rz(β)·Ry(γ)·Rz(δ) up to phase.
pub fn euler_zyz(u: &Matrix2<C64>) -> [f64; 3] {
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let phase = det.sqrt();
    let su = u.map(|x| x / phase);
    let cos = su[(0, 0)].norm();
    let sin = su[(1, 0)].norm();
    let gamma = 2.0 * sin.atan2(cos);
    if sin < 1e-12 {
        [2.0 * su[(1, 1)].arg(), gamma, 0.0]
    } else if cos < 1e-12 {
        [2.0 * su[(1, 0)].arg(), gamma, 0.0]
    } else {
        let bpd = 2.0 * su[(1, 1)].arg();
        let bmd = 2.0 * su[(1, 0)].arg();
        [(bpd + bmd) / 2.0, gamma, (bpd - bmd) / 2.0]
    }
}

pub fn from_euler_zyz(angles: &[f64; 3]) -> Matrix2<C64> {
    rz2(angles[0]) * ry2(angles[1]) * rz2(angles[2])
}

// --- Gate sequence ----------------------------------------------------------

/// One circuit element; qubits are indexed 0 (first) and 1 (second).
#[derive(Debug, Clone, PartialEq)]
pub enum GateElement {
    /// Single-qubit rotation Rz(β)·Ry(γ)·Rz(δ) on `target`.
    Rotation { target: u8, euler_zyz: [f64; 3] },
    ControlledX { control: u8, target: u8 },
}

/// Ordered gate list in application order (first element acts first).
#[derive(Debug, Clone, Default)]
pub struct GateSequence {
    pub elements: Vec<GateElement>,
}

fn cx_matrix(control: u8, target: u8) -> Matrix4<C64> {
    Matrix4::from_fn(|row, col| {
        let (r0, r1) = (row / 2, row % 2);
        let (c0, c1) = (col / 2, col % 2);
        let flipped = match (control, target) {
            (0, 1) => (c0, c0 ^ c1),
            (1, 0) => (c0 ^ c1, c1),
            _ => unreachable!("two-qubit circuit"),
        };
        if (r0, r1) == flipped {
            cr(1.0)
        } else {
            cr(0.0)
        }
    })
}

impl GateSequence {
    pub fn reconstruct(&self) -> Matrix4<C64> {
        let mut u = Matrix4::identity();
        for el in &self.elements {
            let g = match el {
                GateElement::Rotation { target, euler_zyz } => {
                    let m = from_euler_zyz(euler_zyz);
                    if *target == 0 {
                        kron2(&m, &I2)
                    } else {
                        kron2(&I2, &m)
                    }
                }
                GateElement::ControlledX { control, target } => cx_matrix(*control, *target),
            };
            u = g * u;
        }
        u
    }

    pub fn cx_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| matches!(e, GateElement::ControlledX { .. }))
            .count()
    }

    fn push_rotation(&mut self, target: u8, m: &Matrix2<C64>) {
        self.elements.push(GateElement::Rotation { target, euler_zyz: euler_zyz(m) });
    }
}

// --- Weyl (KAK) decomposition -----------------------------------------------

fn magic_basis() -> Matrix4<C64> {
    let s = 1.0 / 2.0_f64.sqrt();
    Matrix4::new(
        cr(1.0), cr(0.0), cr(0.0), c(0.0, 1.0),
        cr(0.0), c(0.0, 1.0), cr(1.0), cr(0.0),
        cr(0.0), c(0.0, 1.0), cr(-1.0), cr(0.0),
        cr(1.0), cr(0.0), cr(0.0), c(0.0, -1.0),
    ) * cr(s)
}

/// U = phase · (k1l⊗k1r) · exp(i(a XX + b YY + c ZZ)) · (k2l⊗k2r).
#[derive(Debug, Clone)]
pub struct WeylDecomposition {
    pub k1l: Matrix2<C64>,
    pub k1r: Matrix2<C64>,
    pub k2l: Matrix2<C64>,
    pub k2r: Matrix2<C64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn canonical_gate(a: f64, b: f64, c: f64) -> Matrix4<C64> {
    let gen = kron2(&sigma_x(), &sigma_x()) * cr(a)
        + kron2(&sigma_y(), &sigma_y()) * cr(b)
        + kron2(&sigma_z(), &sigma_z()) * cr(c);
    expi_hermitian4(&gen)
}

/// Diagonalize a complex-symmetric unitary as M = P D Pᵀ with real orthogonal
/// P. Real and imaginary parts commute, so a random real mixture is
/// diagonalized and checked; degenerate mixtures are retried.
fn diag_complex_symmetric(m2: &Matrix4<C64>) -> Result<(Matrix4<f64>, [C64; 4])> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6b61_6b00);
    for trial in 0..100 {
        let (wa, wb) = if trial == 0 {
            (1.0, 0.3)
        } else {
            (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        };
        let mixed = Matrix4::from_fn(|i, j| wa * m2[(i, j)].re + wb * m2[(i, j)].im);
        let sym = (mixed + mixed.transpose()) * 0.5;
        let p = sym.symmetric_eigen().eigenvectors;
        let pc = p.map(cr);
        let d_full = pc.transpose() * m2 * pc;
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| d_full[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off < 1e-11 {
            let d = [d_full[(0, 0)], d_full[(1, 1)], d_full[(2, 2)], d_full[(3, 3)]];
            return Ok((p, d));
        }
    }
    Err(Error::Convergence(
        "failed to diagonalize the magic-basis Gram matrix".into(),
        f64::NAN,
    ))
}

/// Nearest Kronecker factorization of a (phase times) product gate k = a ⊗ b.
fn kron_factor(k: &Matrix4<C64>) -> Result<(Matrix2<C64>, Matrix2<C64>)> {
    // Rearrangement r[(2i+k),(2j+l)] = K[(2i+j),(2k+l)] equals vec(a)·vec(b)ᵀ
    // on products, so the factors can be read straight off the row and column
    // through the largest entry. For unitary inputs ‖r‖_F = 2, hence that
    // entry has modulus ≥ 1/2 and the division below is well conditioned.
    let r = Matrix4::from_fn(|row, col| {
        let (i, kk) = (row / 2, row % 2);
        let (j, l) = (col / 2, col % 2);
        k[(2 * i + j, 2 * kk + l)]
    });
    let (mut best, mut at) = (0.0, (0, 0));
    for m in 0..4 {
        for n in 0..4 {
            if r[(m, n)].norm() > best {
                best = r[(m, n)].norm();
                at = (m, n);
            }
        }
    }
    if best < 1e-12 {
        return Err(Error::Convergence("Kronecker factor is singular".into(), 0.0));
    }
    let (m0, n0) = at;
    let a_vec = [r[(0, n0)], r[(1, n0)], r[(2, n0)], r[(3, n0)]];
    let pivot = r[(m0, n0)];
    let b_vec = [r[(m0, 0)] / pivot, r[(m0, 1)] / pivot, r[(m0, 2)] / pivot, r[(m0, 3)] / pivot];
    let mut a = Matrix2::new(a_vec[0], a_vec[1], a_vec[2], a_vec[3]);
    let mut b = Matrix2::new(b_vec[0], b_vec[1], b_vec[2], b_vec[3]);
    let det_a = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let det_b = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
    if det_a.norm() < 1e-12 || det_b.norm() < 1e-12 {
        return Err(Error::Convergence("Kronecker factor is singular".into(), 0.0));
    }
    a /= det_a.sqrt();
    b /= det_b.sqrt();
    // Align the product with k at its largest entry (fixes the shared phase).
    let (mut best, mut idx) = (0.0, (0, 0));
    for i in 0..4 {
        for j in 0..4 {
            if k[(i, j)].norm() > best {
                best = k[(i, j)].norm();
                idx = (i, j);
            }
        }
    }
    let prod = kron2(&a, &b);
    a *= k[idx] / prod[idx];
    let err = (kron2(&a, &b) - k).norm();
    if err > 1e-8 {
        return Err(Error::Convergence("matrix is not a product gate".into(), err));
    }
    Ok((a, b))
}

pub fn weyl_decompose(u: &TwoQubitUnitary) -> Result<WeylDecomposition> {
    validate_unitary(u)?;
    let det = u.determinant();
    let su = u.map(|x| x * det.powf(-0.25));
    let b = magic_basis();
    let up = b.adjoint() * su * b;
    let m2 = up.transpose() * up;
    let (mut p, _) = diag_complex_symmetric(&m2)?;
    if p.determinant() < 0.0 {
        for i in 0..4 {
            p[(i, 3)] = -p[(i, 3)];
        }
    }
    let pc = p.map(cr);
    let d_full = pc.transpose() * m2 * &pc;
    // Δ² = D; pick the branch with det Δ = +1 so K1 lands in SO(4).
    let mut theta = [0.0; 4];
    for k in 0..4 {
        theta[k] = d_full[(k, k)].arg() / 2.0;
    }
    let sum: f64 = theta.iter().sum();
    if (sum.rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 0.5 {
        theta[0] += std::f64::consts::PI;
    }
    let delta_inv = Matrix4::from_fn(|i, j| if i == j { c(theta[i].cos(), -theta[i].sin()) } else { cr(0.0) });
    let k1 = up * &pc * delta_inv;
    let k2 = pc.transpose();

    let (k1l, k1r) = kron_factor(&(b * k1 * b.adjoint()))?;
    let (k2l, k2r) = kron_factor(&(b * k2 * b.adjoint()))?;

    // Any diagonal-in-magic-basis unitary is exp(i(δI + a XX + b YY + c ZZ)):
    // the four Pauli diagonals span R⁴, so solve exactly by orthogonality.
    let dx = pauli_diag(&b, &kron2(&sigma_x(), &sigma_x()));
    let dy = pauli_diag(&b, &kron2(&sigma_y(), &sigma_y()));
    let dz = pauli_diag(&b, &kron2(&sigma_z(), &sigma_z()));
    let dot = |v: &[f64; 4]| -> f64 { v.iter().zip(&theta).map(|(x, t)| x * t).sum::<f64>() / 4.0 };
    Ok(WeylDecomposition { k1l, k1r, k2l, k2r, a: dot(&dx), b: dot(&dy), c: dot(&dz) })
}

fn pauli_diag(b: &Matrix4<C64>, pauli: &Matrix4<C64>) -> [f64; 4] {
    let d = b.adjoint() * pauli * b;
    [d[(0, 0)].re, d[(1, 1)].re, d[(2, 2)].re, d[(3, 3)].re]
}

// --- Export ----------------------------------------------------------------

/// Decompose `u` into three controlled-X gates plus single-qubit Euler
/// rotations; identity and bare controlled-X inputs short-circuit to their
/// minimal sequences. Reconstruction matches `u` up to a global phase within
/// `RECONSTRUCTION_TOL`; a local residual triggers one extra rotation layer.
pub fn circuit_export(u: &TwoQubitUnitary) -> Result<GateSequence> {
    validate_unitary(u)?;
    if dist_up_to_phase(u, &Matrix4::identity()) < 1e-12 {
        return Ok(GateSequence::default());
    }
    for (control, target) in [(0u8, 1u8), (1, 0)] {
        if dist_up_to_phase(u, &cx_matrix(control, target)) < 1e-12 {
            return Ok(GateSequence {
                elements: vec![GateElement::ControlledX { control, target }],
            });
        }
    }

    let w = weyl_decompose(u)?;
    let mut seq = GateSequence::default();
    let cx = GateElement::ControlledX { control: 0, target: 1 };
    seq.push_rotation(0, &w.k2l);
    seq.push_rotation(1, &w.k2r);
    seq.elements.push(cx.clone());
    seq.push_rotation(0, &rx2(-2.0 * w.a));
    seq.push_rotation(1, &(hadamard2() * rz2(-2.0 * w.c)));
    seq.elements.push(cx.clone());
    seq.push_rotation(0, &(rx2(-2.0 * w.b) * z2()));
    seq.push_rotation(1, &(sdg2() * hadamard2()));
    seq.elements.push(cx);
    seq.push_rotation(0, &(w.k1l * s2()));
    seq.push_rotation(1, &(w.k1r * s2()));

    let dist = dist_up_to_phase(&seq.reconstruct(), u);
    if dist > RECONSTRUCTION_TOL {
        // Fallback: absorb a purely local residual into one extra layer.
        let resid = u * seq.reconstruct().adjoint();
        let (ra, rb) = kron_factor(&resid)?;
        seq.push_rotation(0, &ra);
        seq.push_rotation(1, &rb);
        let dist = dist_up_to_phase(&seq.reconstruct(), u);
        if dist > RECONSTRUCTION_TOL {
            return Err(Error::Convergence("circuit export reconstruction".into(), dist));
        }
    }
    Ok(seq)
}
