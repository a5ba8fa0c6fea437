//! Reference oracles for tests: dense matrices built by Kronecker products,
//! a Taylor-series matrix exponential, chi-square critical values, and
//! bundled-fixture helpers. Kept independent of the simulator's index-pairing
//! kernels so the two paths can check each other.

use num_complex::Complex64;

use gqe_core::pauli::{Hamiltonian, Pauli, PauliString};

pub type CMat = Vec<Vec<Complex64>>;

pub fn pauli_matrix(p: Pauli) -> CMat {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match p {
        Pauli::I => vec![vec![one, z], vec![z, one]],
        Pauli::X => vec![vec![z, one], vec![one, z]],
        Pauli::Y => vec![vec![z, -i], vec![i, z]],
        Pauli::Z => vec![vec![one, z], vec![z, -one]],
    }
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = (a.len(), a[0].len());
    let (br, bc) = (b.len(), b[0].len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Qubit 0 is the leftmost letter and the most significant Kronecker factor.
pub fn string_matrix(s: &PauliString) -> CMat {
    let mut m = vec![vec![Complex64::new(1.0, 0.0)]];
    for &p in s.letters() {
        m = kron(&m, &pauli_matrix(p));
    }
    m
}

pub fn hamiltonian_matrix(h: &Hamiltonian) -> CMat {
    let dim = 1usize << h.n_qubits();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for term in h.terms() {
        let m = string_matrix(&term.string);
        for (row_out, row_m) in out.iter_mut().zip(&m) {
            for (o, v) in row_out.iter_mut().zip(row_m) {
                *o += term.coefficient * v;
            }
        }
    }
    out
}

pub fn mat_vec(m: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mat_mul(a: &CMat, b: &CMat) -> CMat {
    let n = a.len();
    let p = b[0].len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); p]; n];
    for i in 0..n {
        for (k, &aik) in a[i].iter().enumerate() {
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..p {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn identity(n: usize) -> CMat {
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    out
}

/// exp(scale·M) by scaling-and-squaring with a 24-term Taylor series.
pub fn expm(m: &CMat, scale: Complex64) -> CMat {
    let n = m.len();
    let norm: f64 = m
        .iter()
        .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * scale.norm();
    let mut squarings = 0u32;
    while norm / 2f64.powi(squarings as i32) > 0.25 {
        squarings += 1;
    }
    let small = scale / 2f64.powi(squarings as i32);
    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..=24 {
        // term <- term · (small·M) / k
        let mut next = mat_mul(&term, m);
        for row in &mut next {
            for v in row.iter_mut() {
                *v *= small / k as f64;
            }
        }
        term = next;
        for (rs, rt) in sum.iter_mut().zip(&term) {
            for (s, t) in rs.iter_mut().zip(rt) {
                *s += t;
            }
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum);
    }
    sum
}

/// e^{iPt}|ψ⟩ through the dense matrix exponential.
pub fn dense_rotation(amps: &[Complex64], s: &PauliString, t: f64) -> Vec<Complex64> {
    let m = string_matrix(s);
    let u = expm(&m, Complex64::new(0.0, t));
    mat_vec(&u, amps)
}

pub fn dense_expectation(amps: &[Complex64], s: &PauliString) -> f64 {
    let m = string_matrix(s);
    let mv = mat_vec(&m, amps);
    let val: Complex64 = amps.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum();
    assert!(val.im.abs() < 1e-9);
    val.re
}

/// Upper-tail chi-square critical values at significance 0.001.
pub fn chi2_crit_999(df: usize) -> f64 {
    match df {
        1 => 10.828,
        2 => 13.816,
        3 => 16.266,
        4 => 18.467,
        5 => 20.515,
        6 => 22.458,
        7 => 24.322,
        8 => 26.124,
        9 => 27.877,
        10 => 29.588,
        _ => panic!("no tabulated chi-square critical value for df {df}"),
    }
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn load_fixture(name: &str) -> Hamiltonian {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    gqe_core::pauli::parse_hamiltonian(&text).unwrap()
}

pub fn fixture_header_f64(h: &Hamiltonian, key: &str) -> f64 {
    h.header(key)
        .unwrap_or_else(|| panic!("fixture missing header {key}"))
        .parse()
        .unwrap()
}
