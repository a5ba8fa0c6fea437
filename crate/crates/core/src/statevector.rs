//! Exact complex statevector simulation.
//!
//! Pauli-rotation application uses the identity e^{iPt} = cos(t)·I + i·sin(t)·P
//! together with the fact that a Pauli string maps each computational basis
//! state to exactly one basis state with a ±1/±i phase, giving an O(2^n)
//! index-pairing kernel per gate.
//!
//! Basis convention: qubit q is bit (n_qubits − 1 − q) of the index, i.e.
//! qubit 0 is the leftmost letter of a Pauli string and the most significant
//! bit, so |1100⟩ on four qubits is index 12.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Hamiltonian, Pauli, PauliString};

/// Decomposition of a Pauli string's basis action: P|x⟩ = phase(x)·|x ^ flip⟩
/// with phase(x) = i^{n_y} · (−1)^{popcount(x & sign)}.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StringAction {
    pub flip: usize,
    pub sign: usize,
    pub unit: Complex64,
}

impl StringAction {
    pub fn new(p: &PauliString) -> StringAction {
        let n = p.n_qubits();
        let mut flip = 0usize;
        let mut sign = 0usize;
        let mut n_y = 0u32;
        for (q, &letter) in p.letters().iter().enumerate() {
            let bit = 1usize << (n - 1 - q);
            match letter {
                Pauli::I => {}
                Pauli::X => flip |= bit,
                Pauli::Y => {
                    flip |= bit;
                    sign |= bit;
                    n_y += 1;
                }
                Pauli::Z => sign |= bit,
            }
        }
        let unit = match n_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        StringAction { flip, sign, unit }
    }

    #[inline]
    pub fn phase(&self, x: usize) -> Complex64 {
        if (x & self.sign).count_ones().is_multiple_of(2) {
            self.unit
        } else {
            -self.unit
        }
    }
}

/// Accumulate `out += scale · P · v` for a Pauli string action.
pub(crate) fn accumulate_string(
    action: &StringAction,
    scale: Complex64,
    v: &[Complex64],
    out: &mut [Complex64],
) {
    for (x, &a) in v.iter().enumerate() {
        out[x ^ action.flip] += scale * action.phase(x) * a;
    }
}

/// Pure state on `n_qubits` qubits: 2^n complex amplitudes with unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state |index⟩.
    pub fn basis(n_qubits: usize, index: usize) -> StateVector {
        assert!(n_qubits > 0 && index < (1 << n_qubits));
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> StateVector {
        assert_eq!(amps.len(), 1 << n_qubits);
        StateVector { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_size(&self, p: &PauliString) -> Result<()> {
        if p.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: p.n_qubits(),
            });
        }
        Ok(())
    }

    /// In-place e^{iPt}: |ψ⟩ ← cos(t)|ψ⟩ + i·sin(t)·P|ψ⟩.
    pub fn rotate(&mut self, p: &PauliString, t: f64) -> Result<()> {
        self.check_size(p)?;
        assert!(t.is_finite(), "rotation angle must be finite");
        let action = StringAction::new(p);
        let (c, s) = (t.cos(), t.sin());
        let is = Complex64::new(0.0, s);
        if action.flip == 0 {
            // Diagonal string: per-amplitude phase cos(t) ± i·sin(t).
            for (x, a) in self.amps.iter_mut().enumerate() {
                *a *= Complex64::new(c, 0.0) + is * action.phase(x);
            }
            return Ok(());
        }
        // Visit each (x, x^flip) pair once via the highest flipped bit.
        let hb = 1usize << (usize::BITS - 1 - action.flip.leading_zeros());
        for x in 0..self.amps.len() {
            if x & hb != 0 {
                continue;
            }
            let y = x ^ action.flip;
            let a = self.amps[x];
            let b = self.amps[y];
            self.amps[x] = c * a + is * action.phase(y) * b;
            self.amps[y] = c * b + is * action.phase(x) * a;
        }
        Ok(())
    }

    /// ⟨ψ|P|ψ⟩; real because P is Hermitian and |ψ⟩ is normalized.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        self.check_size(p)?;
        let action = StringAction::new(p);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, &a) in self.amps.iter().enumerate() {
            acc += self.amps[x ^ action.flip].conj() * action.phase(x) * a;
        }
        debug_assert!(acc.im.abs() < 1e-9, "imaginary residue {}", acc.im);
        Ok(acc.re)
    }

    /// Finite-shot estimate of ⟨P⟩: `shots` Bernoulli draws of the ±1 outcome.
    pub fn expectation_sampled<R: Rng>(
        &self,
        p: &PauliString,
        shots: u64,
        rng: &mut R,
    ) -> Result<f64> {
        let exact = self.expectation(p)?;
        let p_plus = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
        let binom = Binomial::new(shots, p_plus).expect("valid Bernoulli probability");
        let k = binom.sample(rng);
        Ok(2.0 * k as f64 / shots as f64 - 1.0)
    }
}

/// Hartree–Fock reference: first `n_electrons` qubits occupied.
pub fn hartree_fock_state(n_qubits: usize, n_electrons: usize) -> Result<StateVector> {
    if n_electrons > n_qubits {
        return Err(Error::InvalidElectronCount {
            n_electrons,
            n_qubits,
            msg: "more electrons than spin-orbitals",
        });
    }
    let mut index = 0usize;
    for q in 0..n_electrons {
        index |= 1 << (n_qubits - 1 - q);
    }
    Ok(StateVector::basis(n_qubits, index))
}

/// Per-string expectation values cached from an energy evaluation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpectationCache {
    values: BTreeMap<PauliString, f64>,
}

impl ExpectationCache {
    pub fn get(&self, p: &PauliString) -> Option<f64> {
        self.values.get(p).copied()
    }

    pub fn insert(&mut self, p: PauliString, value: f64) {
        self.values.insert(p, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.values.iter().map(|(k, &v)| (k, v))
    }
}

/// Energy ⟨ψ|Ĥ|ψ⟩ = Σ_a h_a ⟨P̂_a⟩ plus the per-string expectation cache.
/// Terms are summed in Hamiltonian order, so the reduction is deterministic.
pub fn energy(state: &StateVector, h: &Hamiltonian) -> Result<(f64, ExpectationCache)> {
    if state.n_qubits() != h.n_qubits() {
        return Err(Error::SizeMismatch {
            left: state.n_qubits(),
            right: h.n_qubits(),
        });
    }
    let mut cache = ExpectationCache::default();
    let mut e = 0.0;
    for term in h.terms() {
        let q = state.expectation(&term.string)?;
        cache.insert(term.string.clone(), q);
        e += term.coefficient * q;
    }
    Ok((e, cache))
}

/// Finite-shot variant of [`energy`]; one Bernoulli estimate per term.
pub fn energy_sampled<R: Rng>(
    state: &StateVector,
    h: &Hamiltonian,
    shots: u64,
    rng: &mut R,
) -> Result<(f64, ExpectationCache)> {
    if state.n_qubits() != h.n_qubits() {
        return Err(Error::SizeMismatch {
            left: state.n_qubits(),
            right: h.n_qubits(),
        });
    }
    let mut cache = ExpectationCache::default();
    let mut e = 0.0;
    for term in h.terms() {
        let q = state.expectation_sampled(&term.string, shots, rng)?;
        cache.insert(term.string.clone(), q);
        e += term.coefficient * q;
    }
    Ok((e, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{parse_hamiltonian, PauliTerm};

    fn ps(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    #[test]
    fn hartree_fock_occupies_leading_qubits() {
        let hf = hartree_fock_state(4, 2).unwrap();
        assert_eq!(hf, StateVector::basis(4, 0b1100));
        let vacuum = hartree_fock_state(2, 0).unwrap();
        assert_eq!(vacuum, StateVector::basis(2, 0));
        assert!(hartree_fock_state(2, 3).is_err());
    }

    #[test]
    fn hartree_fock_z_expectations() {
        let hf = hartree_fock_state(4, 2).unwrap();
        assert_eq!(hf.expectation(&ps("ZIII")).unwrap(), -1.0);
        assert_eq!(hf.expectation(&ps("IIIZ")).unwrap(), 1.0);
    }

    #[test]
    fn identity_rotation_is_global_phase() {
        let mut state = StateVector::basis(2, 1);
        state.rotate(&ps("XI"), 0.3).unwrap();
        let before = state.clone();
        state.rotate(&ps("II"), 0.7).unwrap();
        for (a, b) in state.amplitudes().iter().zip(before.amplitudes()) {
            let ratio = a / b;
            if b.norm() > 1e-12 {
                assert!((ratio - Complex64::from_polar(1.0, 0.7)).norm() < 1e-12);
            }
        }
        assert!(
            (state.expectation(&ps("ZI")).unwrap() - before.expectation(&ps("ZI")).unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn x_rotation_half_pi_flips() {
        let mut state = StateVector::basis(1, 0);
        state.rotate(&ps("X"), std::f64::consts::FRAC_PI_2).unwrap();
        // e^{iX π/2}|0⟩ = i|1⟩
        assert!((state.amplitudes()[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        assert!((state.expectation(&ps("Z")).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn xx_rotation_quarter_pi_entangles() {
        let mut state = StateVector::basis(2, 0);
        state
            .rotate(&ps("XX"), std::f64::consts::FRAC_PI_4)
            .unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((state.amplitudes()[0] - Complex64::new(r, 0.0)).norm() < 1e-12);
        assert!((state.amplitudes()[3] - Complex64::new(0.0, r)).norm() < 1e-12);
        // Both components have even parity, single-qubit Z averages out.
        assert!((state.expectation(&ps("ZZ")).unwrap() - 1.0).abs() < 1e-12);
        assert!(state.expectation(&ps("ZI")).unwrap().abs() < 1e-12);
    }

    #[test]
    fn plus_state_x_expectation() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let state =
            StateVector::from_amplitudes(1, vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
        assert!((state.expectation(&ps("X")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_composes_and_inverts() {
        let mut a = StateVector::basis(3, 5);
        a.rotate(&ps("XYZ"), 0.31).unwrap();
        a.rotate(&ps("XYZ"), 0.17).unwrap();
        let mut b = StateVector::basis(3, 5);
        b.rotate(&ps("XYZ"), 0.48).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-10);
        }
        a.rotate(&ps("XYZ"), -0.48).unwrap();
        let init = StateVector::basis(3, 5);
        for (x, y) in a.amplitudes().iter().zip(init.amplitudes()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn identity_hamiltonian_energy_is_constant() {
        let h = parse_hamiltonian("0.75 II").unwrap();
        let mut state = StateVector::basis(2, 0);
        state.rotate(&ps("XY"), 0.4).unwrap();
        let (e, cache) = energy(&state, &h).unwrap();
        assert!((e - 0.75).abs() < 1e-12);
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn energy_matches_cache_recombination() {
        let h = parse_hamiltonian("0.5 ZZ\n-0.25 XX\n0.125 YI").unwrap();
        let mut state = StateVector::basis(2, 2);
        state.rotate(&ps("XY"), 0.37).unwrap();
        state.rotate(&ps("ZX"), -0.8).unwrap();
        let (e, cache) = energy(&state, &h).unwrap();
        let recombined: f64 = h
            .terms()
            .iter()
            .map(|t| t.coefficient * cache.get(&t.string).unwrap())
            .sum();
        assert!((e - recombined).abs() < 1e-12);
    }

    #[test]
    fn energy_is_linear_in_terms() {
        let h1 = parse_hamiltonian("0.5 ZZ\n0.1 XY").unwrap();
        let h2 = parse_hamiltonian("-0.3 YX\n0.2 ZZ").unwrap();
        let sum = h1.sum(&h2).unwrap();
        let mut state = StateVector::basis(2, 1);
        state.rotate(&ps("XX"), 0.23).unwrap();
        let e1 = energy(&state, &h1).unwrap().0;
        let e2 = energy(&state, &h2).unwrap().0;
        let es = energy(&state, &sum).unwrap().0;
        assert!((es - (e1 + e2)).abs() < 1e-10);
    }

    #[test]
    fn norm_preserved_under_rotations() {
        let mut state = hartree_fock_state(4, 2).unwrap();
        for (i, s) in ["XXYX", "YZXI", "IZZY", "XIXI"].iter().enumerate() {
            state.rotate(&ps(s), 0.1 * (i as f64 + 1.0)).unwrap();
        }
        assert!((state.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampled_expectation_is_deterministic_and_bounded() {
        use rand::SeedableRng;
        let mut state = StateVector::basis(2, 0);
        state.rotate(&ps("XY"), 0.4).unwrap();
        let mut rng1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = state
            .expectation_sampled(&ps("ZZ"), 8192, &mut rng1)
            .unwrap();
        let b = state
            .expectation_sampled(&ps("ZZ"), 8192, &mut rng2)
            .unwrap();
        assert_eq!(a, b);
        assert!((-1.0..=1.0).contains(&a));
        let exact = state.expectation(&ps("ZZ")).unwrap();
        assert!((a - exact).abs() < 0.1);
    }

    #[test]
    fn expectation_cache_serializes_with_string_keys() {
        let mut cache = ExpectationCache::default();
        cache.insert(ps("XZ"), -0.5);
        cache.insert(ps("II"), 1.0);
        let json = serde_json::to_string(&cache).unwrap();
        assert_eq!(json, r#"{"II":1.0,"XZ":-0.5}"#);
        let back: ExpectationCache = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cache);
    }

    #[test]
    fn size_mismatch_rejected() {
        let state = StateVector::basis(2, 0);
        assert!(state.expectation(&ps("XXX")).is_err());
        let h = Hamiltonian::new(3, vec![PauliTerm::new(1.0, ps("ZZZ"))], vec![]).unwrap();
        assert!(energy(&state, &h).is_err());
    }
}
