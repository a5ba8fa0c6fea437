//! Ground-state energy of a qubit Hamiltonian.
//!
//! Two routes: dense diagonalization of the full 2^n matrix (small systems),
//! and a matrix-free Lanczos iteration with full reorthogonalization for
//! larger ones. The dense route embeds the complex Hermitian matrix as the
//! real symmetric [[Re, −Im], [Im, Re]] block matrix, whose spectrum is the
//! doubled spectrum of the original.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pauli::Hamiltonian;
use crate::statevector::{accumulate_string, StringAction};

/// Dense route precondition from the module contract.
pub const DENSE_QUBIT_LIMIT: usize = 14;
/// Iterative route precondition.
pub const LANCZOS_QUBIT_LIMIT: usize = 20;
/// Dense is preferred up to this size; beyond it Lanczos is cheaper.
const DENSE_PREFERRED: usize = 10;

const LANCZOS_RITZ_TOL: f64 = 1e-10;
const LANCZOS_MAX_ITER: usize = 400;

struct HamiltonianAction {
    terms: Vec<(Complex64, StringAction)>,
    dim: usize,
}

impl HamiltonianAction {
    fn new(h: &Hamiltonian) -> HamiltonianAction {
        HamiltonianAction {
            terms: h
                .terms()
                .iter()
                .map(|t| {
                    (
                        Complex64::new(t.coefficient, 0.0),
                        StringAction::new(&t.string),
                    )
                })
                .collect(),
            dim: 1 << h.n_qubits(),
        }
    }

    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (coeff, action) in &self.terms {
            accumulate_string(action, *coeff, v, &mut out);
        }
        out
    }
}

/// Minimum eigenvalue by dense diagonalization.
pub fn dense_ground_energy(h: &Hamiltonian) -> Result<f64> {
    let n = h.n_qubits();
    if n > DENSE_QUBIT_LIMIT {
        return Err(Error::DimensionTooLarge {
            n_qubits: n,
            method: "dense",
            limit: DENSE_QUBIT_LIMIT,
        });
    }
    let action = HamiltonianAction::new(h);
    let dim = action.dim;
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    let mut basis = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..dim {
        basis[j] = Complex64::new(1.0, 0.0);
        columns.push(action.apply(&basis));
        basis[j] = Complex64::new(0.0, 0.0);
    }
    let embedded = DMatrix::<f64>::from_fn(2 * dim, 2 * dim, |r, c| {
        let (i, j) = (r % dim, c % dim);
        let entry = columns[j][i];
        match (r >= dim, c >= dim) {
            (false, false) | (true, true) => entry.re,
            (false, true) => -entry.im,
            (true, false) => entry.im,
        }
    });
    let eigenvalues = embedded.symmetric_eigen().eigenvalues;
    Ok(eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Minimum eigenvalue by Lanczos with full reorthogonalization and a seeded
/// random start; converges when the lowest Ritz value moves less than the
/// tolerance between iterations.
pub fn lanczos_ground_energy(h: &Hamiltonian, seed: u64) -> Result<f64> {
    let n = h.n_qubits();
    if n > LANCZOS_QUBIT_LIMIT {
        return Err(Error::DimensionTooLarge {
            n_qubits: n,
            method: "lanczos",
            limit: LANCZOS_QUBIT_LIMIT,
        });
    }
    let action = HamiltonianAction::new(h);
    let dim = action.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    normalize(&mut v);

    let max_iter = LANCZOS_MAX_ITER.min(dim);
    let mut basis: Vec<Vec<Complex64>> = vec![v.clone()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev_ritz = f64::INFINITY;

    for k in 0..max_iter {
        let mut w = action.apply(&basis[k]);
        let alpha = dot(&basis[k], &w).re;
        alphas.push(alpha);
        // Three-term recurrence plus full reorthogonalization against every
        // previous Lanczos vector.
        for (j, vj) in basis.iter().enumerate() {
            let overlap = if j == k {
                Complex64::new(alpha, 0.0)
            } else if j + 1 == k {
                Complex64::new(betas[k - 1], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            axpy(&mut w, -overlap, vj);
        }
        for vj in &basis {
            let overlap = dot(vj, &w);
            axpy(&mut w, -overlap, vj);
        }

        let ritz = tridiag_min_eigenvalue(&alphas, &betas);
        let converged = (ritz - prev_ritz).abs() <= LANCZOS_RITZ_TOL * ritz.abs().max(1.0);
        prev_ritz = ritz;

        let beta = norm(&w);
        if converged || beta < 1e-13 || k + 1 == max_iter {
            if converged || beta < 1e-13 || k + 1 == dim {
                return Ok(ritz);
            }
            return Err(Error::NoConvergence { iterations: k + 1 });
        }
        betas.push(beta);
        let inv = Complex64::new(1.0 / beta, 0.0);
        for a in &mut w {
            *a *= inv;
        }
        basis.push(w);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
    })
}

/// Minimum eigenvalue, routed by system size.
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64> {
    if h.n_qubits() <= DENSE_PREFERRED {
        dense_ground_energy(h)
    } else {
        lanczos_ground_energy(h, 0x1a5c_205e)
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    let inv = Complex64::new(1.0 / n, 0.0);
    for a in v {
        *a *= inv;
    }
}

fn axpy(v: &mut [Complex64], scale: Complex64, other: &[Complex64]) {
    for (a, b) in v.iter_mut().zip(other) {
        *a += scale * b;
    }
}

fn tridiag_min_eigenvalue(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 1 {
        return alphas[0];
    }
    let t = DMatrix::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i == j + 1 {
            betas[j]
        } else if j == i + 1 {
            betas[i]
        } else {
            0.0
        }
    });
    t.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
