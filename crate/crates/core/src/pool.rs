//! Operator pool: the token vocabulary of identity plus Pauli time evolutions.
//!
//! Generators come from UCCSD singles and doubles excitations mapped through
//! Jordan–Wigner and split term-wise (first-order Trotter): the pool keeps the
//! set of distinct Pauli strings, and all angle structure lives in the angle
//! set 𝒯 = {±2^k / 320}.
//!
//! Conventions: spin-orbital index = 2·spatial + spin (even = α, odd = β), so
//! the Hartree–Fock determinant occupies the first n_electrons qubits;
//! a†_p = (X_p − iY_p)/2 ⊗ Z_{q<p}.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{multiply_pauli, Pauli, PauliString};

/// Denominator of the default angle set.
pub const ANGLE_BASE: f64 = 320.0;
/// Appendix text uses k = 0..=5; the code-listing variant is k = 0..=4.
pub const DEFAULT_K_MAX: u32 = 5;

/// One vocabulary element.
#[derive(Debug, Clone, PartialEq)]
pub enum PoolOperator {
    Identity,
    PauliEvolution { string: PauliString, angle: f64 },
}

impl fmt::Display for PoolOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoolOperator::Identity => write!(f, "I"),
            PoolOperator::PauliEvolution { string, angle } => write!(f, "{angle} {string}"),
        }
    }
}

/// Ordered operator vocabulary 𝒢; token j (1-based) is `operators[j − 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPool {
    n_qubits: usize,
    operators: Vec<PoolOperator>,
}

impl OperatorPool {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PoolOperator> {
        self.operators.get(index)
    }

    pub fn operators(&self) -> &[PoolOperator] {
        &self.operators
    }

    fn validate(n_qubits: usize, operators: &[PoolOperator]) -> Result<()> {
        if !operators
            .iter()
            .any(|op| matches!(op, PoolOperator::Identity))
        {
            return Err(Error::Config(
                "operator pool must contain the identity token".into(),
            ));
        }
        let mut seen: HashSet<(String, u64)> = HashSet::new();
        for op in operators {
            match op {
                PoolOperator::Identity => {
                    if !seen.insert((String::new(), 0)) {
                        return Err(Error::Config("duplicate identity token".into()));
                    }
                }
                PoolOperator::PauliEvolution { string, angle } => {
                    if string.n_qubits() != n_qubits {
                        return Err(Error::SizeMismatch {
                            left: n_qubits,
                            right: string.n_qubits(),
                        });
                    }
                    if string.is_identity() {
                        return Err(Error::Config(
                            "all-identity evolution string: use the identity token".into(),
                        ));
                    }
                    if !seen.insert((string.to_string(), angle.to_bits())) {
                        return Err(Error::Config(format!(
                            "duplicate pool entry {angle} {string}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn new(n_qubits: usize, operators: Vec<PoolOperator>) -> Result<OperatorPool> {
        Self::validate(n_qubits, &operators)?;
        Ok(OperatorPool {
            n_qubits,
            operators,
        })
    }
}

/// Default 𝒯 = {+2^k/320} ∪ {−2^k/320} for k = 0..=k_max.
pub fn default_angle_set(k_max: u32) -> Vec<f64> {
    let positives: Vec<f64> = (0..=k_max)
        .map(|k| (1u64 << k) as f64 / ANGLE_BASE)
        .collect();
    let mut set = positives.clone();
    set.extend(positives.iter().map(|t| -t));
    set
}

// --- Jordan-Wigner expansion -------------------------------------------------

type OpSum = Vec<(Complex64, PauliString)>;

fn ladder(p: usize, n: usize, dagger: bool) -> OpSum {
    let mut x_letters = vec![Pauli::I; n];
    let mut y_letters = vec![Pauli::I; n];
    for q in 0..p {
        x_letters[q] = Pauli::Z;
        y_letters[q] = Pauli::Z;
    }
    x_letters[p] = Pauli::X;
    y_letters[p] = Pauli::Y;
    let y_coeff = if dagger {
        Complex64::new(0.0, -0.5)
    } else {
        Complex64::new(0.0, 0.5)
    };
    vec![
        (Complex64::new(0.5, 0.0), PauliString::new(x_letters)),
        (y_coeff, PauliString::new(y_letters)),
    ]
}

fn op_mul(a: &OpSum, b: &OpSum) -> OpSum {
    let mut out: OpSum = Vec::with_capacity(a.len() * b.len());
    for (ca, sa) in a {
        for (cb, sb) in b {
            let (phase, s) = multiply_pauli(sa, sb).expect("uniform qubit count");
            let c = ca * cb * phase.as_complex();
            if let Some(entry) = out.iter_mut().find(|(_, es)| *es == s) {
                entry.0 += c;
            } else {
                out.push((c, s));
            }
        }
    }
    out
}

fn op_add_scaled(acc: &mut OpSum, other: OpSum, scale: f64) {
    for (c, s) in other {
        if let Some(entry) = acc.iter_mut().find(|(_, es)| *es == s) {
            entry.0 += scale * c;
        } else {
            acc.push((scale * c, s));
        }
    }
}

fn product(ops: &[(usize, bool)], n: usize) -> OpSum {
    let mut acc: Option<OpSum> = None;
    for &(p, dagger) in ops {
        let l = ladder(p, n, dagger);
        acc = Some(match acc {
            None => l,
            Some(prev) => op_mul(&prev, &l),
        });
    }
    acc.expect("nonempty operator product")
}

/// Strings of the anti-Hermitian generator `ops − ops†`.
fn generator_strings(ops: &[(usize, bool)], n: usize) -> Vec<PauliString> {
    let mut acc = product(ops, n);
    let conj: Vec<(usize, bool)> = ops.iter().rev().map(|&(p, d)| (p, !d)).collect();
    op_add_scaled(&mut acc, product(&conj, n), -1.0);
    acc.retain(|(c, _)| c.norm() > 1e-12);
    for (c, s) in &acc {
        debug_assert!(
            c.re.abs() < 1e-12,
            "generator not anti-Hermitian at {s}: {c}"
        );
    }
    acc.into_iter().map(|(_, s)| s).collect()
}

fn spin(p: usize) -> usize {
    p % 2
}

/// The set 𝒫 of distinct Pauli strings from spin- and particle-conserving
/// UCCSD singles and doubles: singles before doubles, lexicographic within.
pub fn uccsd_pauli_generators(n_qubits: usize, n_electrons: usize) -> Result<Vec<PauliString>> {
    if n_qubits == 0 || !n_qubits.is_multiple_of(2) {
        return Err(Error::InvalidElectronCount {
            n_electrons,
            n_qubits,
            msg: "qubit count must be a positive even spin-orbital count",
        });
    }
    if !n_electrons.is_multiple_of(2) || n_electrons > n_qubits {
        return Err(Error::InvalidElectronCount {
            n_electrons,
            n_qubits,
            msg: "electron count must be even and at most the qubit count",
        });
    }
    let occ: Vec<usize> = (0..n_electrons).collect();
    let virt: Vec<usize> = (n_electrons..n_qubits).collect();

    let mut singles: BTreeSet<PauliString> = BTreeSet::new();
    for &i in &occ {
        for &a in &virt {
            if spin(i) != spin(a) {
                continue;
            }
            for s in generator_strings(&[(a, true), (i, false)], n_qubits) {
                singles.insert(s);
            }
        }
    }

    let mut doubles: BTreeSet<PauliString> = BTreeSet::new();
    for (ii, &i) in occ.iter().enumerate() {
        for &j in occ.iter().skip(ii + 1) {
            for (ai, &a) in virt.iter().enumerate() {
                for &b in virt.iter().skip(ai + 1) {
                    if spin(i) + spin(j) != spin(a) + spin(b) {
                        continue;
                    }
                    for s in
                        generator_strings(&[(a, true), (b, true), (j, false), (i, false)], n_qubits)
                    {
                        doubles.insert(s);
                    }
                }
            }
        }
    }

    let mut out: Vec<PauliString> = singles.iter().cloned().collect();
    out.extend(doubles.into_iter().filter(|s| !singles.contains(s)));
    Ok(out)
}

/// Pool layout: identity at index 0, then one operator per (string, angle) in
/// generator order × angle-set order; L = |𝒫|·|𝒯| + 1.
pub fn build_pool(n_qubits: usize, n_electrons: usize, angle_set: &[f64]) -> Result<OperatorPool> {
    if angle_set.is_empty() {
        return Err(Error::Config("angle set must be nonempty".into()));
    }
    let mut seen = HashSet::new();
    for &t in angle_set {
        if !t.is_finite() {
            return Err(Error::Config(format!("non-finite angle {t}")));
        }
        if !seen.insert(t.to_bits()) {
            return Err(Error::Config(format!("duplicate angle {t}")));
        }
    }
    let generators = uccsd_pauli_generators(n_qubits, n_electrons)?;
    let mut operators = vec![PoolOperator::Identity];
    for string in &generators {
        for &angle in angle_set {
            operators.push(PoolOperator::PauliEvolution {
                string: string.clone(),
                angle,
            });
        }
    }
    OperatorPool::new(n_qubits, operators)
}

/// Parse the pool text format: `# key: value` headers, then one line per
/// operator (`I`, or `<angle> <letters>`), in pool order.
pub fn load_pool(text: &str) -> Result<OperatorPool> {
    let kind = "pool";
    let mut n_qubits: Option<usize> = None;
    let mut operators: Vec<PoolOperator> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.trim().split_once(':') {
                if key.trim() == "qubits" {
                    let n: usize = value.trim().parse().map_err(|_| Error::Parse {
                        kind,
                        line: lineno,
                        msg: format!("invalid qubit count {:?}", value.trim()),
                    })?;
                    n_qubits = Some(n);
                }
            }
            continue;
        }
        if line == "I" {
            operators.push(PoolOperator::Identity);
            continue;
        }
        let mut parts = line.split_whitespace();
        let (angle_str, letters_str) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(l), None) => (a, l),
            _ => {
                return Err(Error::Parse {
                    kind,
                    line: lineno,
                    msg: format!("expected `I` or `<angle> <letters>`, got {line:?}"),
                })
            }
        };
        let angle: f64 = angle_str.parse().map_err(|_| Error::Parse {
            kind,
            line: lineno,
            msg: format!("invalid angle {angle_str:?}"),
        })?;
        if !angle.is_finite() {
            return Err(Error::Parse {
                kind,
                line: lineno,
                msg: format!("non-finite angle {angle_str:?}"),
            });
        }
        let string = PauliString::parse(letters_str).ok_or_else(|| Error::Parse {
            kind,
            line: lineno,
            msg: format!("invalid Pauli letters {letters_str:?}"),
        })?;
        match n_qubits {
            Some(n) if n != string.n_qubits() => {
                return Err(Error::Parse {
                    kind,
                    line: lineno,
                    msg: format!("string has {} letters, expected {n}", string.n_qubits()),
                })
            }
            None => n_qubits = Some(string.n_qubits()),
            _ => {}
        }
        operators.push(PoolOperator::PauliEvolution { string, angle });
    }
    let n_qubits = n_qubits.ok_or(Error::Parse {
        kind,
        line: 0,
        msg: "cannot determine qubit count (no strings, no `# qubits:` header)".into(),
    })?;
    OperatorPool::new(n_qubits, operators)
}

/// Inverse of [`load_pool`]: `load_pool(serialize_pool(p)) == p`.
pub fn serialize_pool(pool: &OperatorPool) -> String {
    let mut out = format!("# qubits: {}\n", pool.n_qubits());
    for op in pool.operators() {
        out.push_str(&format!("{op}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(s: &str) -> PauliString {
        PauliString::parse(s).unwrap()
    }

    #[test]
    fn h2_generators_match_symbolic_oracle() {
        // Frozen from an independent symbolic Jordan-Wigner expansion.
        let gens = uccsd_pauli_generators(4, 2).unwrap();
        let expected: Vec<PauliString> = [
            "IXZY", "IYZX", "XZYI", "YZXI", // singles, lexicographic
            "XXXY", "XXYX", "XYXX", "XYYY", "YXXX", "YXYY", "YYXY", "YYYX", // doubles
        ]
        .iter()
        .map(|s| ps(s))
        .collect();
        assert_eq!(gens, expected);
    }

    #[test]
    fn no_virtuals_means_no_generators() {
        assert!(uccsd_pauli_generators(2, 2).unwrap().is_empty());
    }

    #[test]
    fn odd_electron_count_rejected() {
        assert!(uccsd_pauli_generators(4, 1).is_err());
        assert!(uccsd_pauli_generators(4, 6).is_err());
        assert!(uccsd_pauli_generators(3, 2).is_err());
    }

    #[test]
    fn generators_have_even_flip_weight() {
        for (n, e) in [(4, 2), (6, 2), (6, 4)] {
            for s in uccsd_pauli_generators(n, e).unwrap() {
                assert_eq!(s.flip_weight() % 2, 0, "odd X/Y count in {s}");
            }
        }
    }

    #[test]
    fn default_angles_text_and_listing_variants() {
        let t5 = default_angle_set(5);
        assert_eq!(t5.len(), 12);
        assert_eq!(t5[0], 1.0 / 320.0);
        assert_eq!(t5[5], 32.0 / 320.0);
        assert_eq!(t5[6], -1.0 / 320.0);
        assert_eq!(default_angle_set(4).len(), 10);
    }

    #[test]
    fn pool_size_law() {
        let pool = build_pool(4, 2, &default_angle_set(5)).unwrap();
        assert_eq!(pool.len(), 12 * 12 + 1);
        assert_eq!(pool.get(0), Some(&PoolOperator::Identity));
        let pool10 = build_pool(4, 2, &default_angle_set(4)).unwrap();
        assert_eq!(pool10.len(), 12 * 10 + 1);
    }

    #[test]
    fn pool_build_is_deterministic() {
        let a = build_pool(6, 2, &default_angle_set(5)).unwrap();
        let b = build_pool(6, 2, &default_angle_set(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_generator_set_gives_identity_only_pool() {
        let pool = build_pool(2, 2, &default_angle_set(5)).unwrap();
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn load_pool_round_trip_and_errors() {
        let pool = load_pool("I\n0.1 XY\n-0.1 XY\n").unwrap();
        assert_eq!(pool.len(), 3);
        assert_eq!(load_pool(&serialize_pool(&pool)).unwrap(), pool);

        // identity token mandatory
        assert!(load_pool("0.1 XY\n").is_err());
        // duplicates rejected
        assert!(load_pool("I\n0.1 XY\n0.1 XY\n").is_err());
        // all-identity evolution rejected
        assert!(load_pool("I\n0.1 II\n").is_err());
        // line numbers reported
        match load_pool("I\n0.1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn built_pool_round_trips_through_text() {
        let pool = build_pool(4, 2, &default_angle_set(4)).unwrap();
        assert_eq!(load_pool(&serialize_pool(&pool)).unwrap(), pool);
    }
}
