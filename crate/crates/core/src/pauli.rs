//! Pauli strings, weighted Pauli terms, and qubit Hamiltonians.
//!
//! A Hamiltonian is a real-weighted sum of tensor products of single-qubit
//! Pauli operators. The text format is line-oriented: optional `# key: value`
//! header lines, then one `<coefficient> <letters>` term per line with letters
//! over IXYZ. Qubit 0 is the leftmost letter and the most significant bit of
//! a computational-basis index; every module in this crate shares that
//! convention.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped when merging terms.
pub const COEFF_EPS: f64 = 1e-12;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit product a·b as (power of i, resulting Pauli).
    fn mul(a: Pauli, b: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (a, b) {
            (I, p) | (p, I) => (0, p),
            (X, X) | (Y, Y) | (Z, Z) => (0, I),
            (X, Y) => (1, Z),
            (Y, X) => (3, Z),
            (Y, Z) => (1, X),
            (Z, Y) => (3, X),
            (Z, X) => (1, Y),
            (X, Z) => (3, Y),
        }
    }
}

/// Phase from Pauli multiplication: one of {+1, +i, −1, −i}, stored as the
/// exponent k in i^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);

    pub fn from_i_power(k: u8) -> Phase {
        Phase(k % 4)
    }

    pub fn i_power(self) -> u8 {
        self.0
    }

    pub fn times(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn as_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => write!(f, "+1"),
            1 => write!(f, "+i"),
            2 => write!(f, "-1"),
            _ => write!(f, "-i"),
        }
    }
}

/// Tensor product of single-qubit Paulis; qubit 0 is the leftmost letter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> PauliString {
        assert!(!letters.is_empty(), "PauliString needs at least one qubit");
        PauliString { letters }
    }

    pub fn identity(n_qubits: usize) -> PauliString {
        PauliString::new(vec![Pauli::I; n_qubits])
    }

    pub fn parse(s: &str) -> Option<PauliString> {
        if s.is_empty() {
            return None;
        }
        let letters: Option<Vec<Pauli>> = s.chars().map(Pauli::from_char).collect();
        letters.map(PauliString::new)
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        self.letters[qubit]
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Count of X and Y letters (basis-state bit flips under this operator).
    pub fn flip_weight(&self) -> usize {
        self.letters
            .iter()
            .filter(|&&p| p == Pauli::X || p == Pauli::Y)
            .count()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl Serialize for PauliString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PauliString::parse(&s)
            .ok_or_else(|| D::Error::custom(format!("invalid Pauli string {s:?}")))
    }
}

/// Letter-wise Pauli group product: a·b = phase · product.
pub fn multiply_pauli(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::SizeMismatch {
            left: a.n_qubits(),
            right: b.n_qubits(),
        });
    }
    let mut k = 0u8;
    let mut letters = Vec::with_capacity(a.n_qubits());
    for (&x, &y) in a.letters.iter().zip(&b.letters) {
        let (dk, p) = Pauli::mul(x, y);
        k = (k + dk) % 4;
        letters.push(p);
    }
    Ok((Phase::from_i_power(k), PauliString::new(letters)))
}

/// One weighted Pauli string; coefficients are Hartree for Hamiltonian terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

impl PauliTerm {
    pub fn new(coefficient: f64, string: PauliString) -> PauliTerm {
        assert!(coefficient.is_finite(), "non-finite coefficient");
        PauliTerm {
            coefficient,
            string,
        }
    }
}

/// Real-weighted sum of Pauli strings with ordered header metadata.
///
/// Invariants: all terms share `n_qubits`; no two terms carry the same
/// string (duplicates merge at construction); a `qubits` header is always
/// present so that term-less Hamiltonians round-trip through text.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
    headers: Vec<(String, String)>,
}

impl Hamiltonian {
    /// Build from terms, merging duplicate strings in first-seen order and
    /// dropping merged coefficients below [`COEFF_EPS`].
    pub fn new(
        n_qubits: usize,
        terms: Vec<PauliTerm>,
        mut headers: Vec<(String, String)>,
    ) -> Result<Hamiltonian> {
        assert!(n_qubits > 0, "Hamiltonian needs at least one qubit");
        for t in &terms {
            if t.string.n_qubits() != n_qubits {
                return Err(Error::SizeMismatch {
                    left: n_qubits,
                    right: t.string.n_qubits(),
                });
            }
        }
        if !headers.iter().any(|(k, _)| k == "qubits") {
            headers.insert(0, ("qubits".to_string(), n_qubits.to_string()));
        }
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut merged: Vec<PauliTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            if let Some(&i) = index.get(&t.string) {
                merged[i].coefficient += t.coefficient;
            } else {
                index.insert(t.string.clone(), merged.len());
                merged.push(t);
            }
        }
        merged.retain(|t| t.coefficient.abs() >= COEFF_EPS);
        Ok(Hamiltonian {
            n_qubits,
            terms: merged,
            headers,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn headers(&self) -> &[(String, String)] {
        &self.headers
    }

    pub fn header(&self, key: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn geometry_label(&self) -> Option<&str> {
        self.header("geometry")
    }

    /// Concatenate term lists (merging duplicates); headers from `self`.
    pub fn sum(&self, other: &Hamiltonian) -> Result<Hamiltonian> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::SizeMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Hamiltonian::new(self.n_qubits, terms, self.headers.clone())
    }
}

fn header_line(line: &str) -> Option<(String, String)> {
    let body = line.strip_prefix('#')?.trim();
    let (key, value) = body.split_once(':')?;
    Some((key.trim().to_string(), value.trim().to_string()))
}

/// Parse the Hamiltonian text format.
pub fn parse_hamiltonian(text: &str) -> Result<Hamiltonian> {
    let kind = "hamiltonian";
    let mut headers: Vec<(String, String)> = Vec::new();
    let mut terms: Vec<PauliTerm> = Vec::new();
    let mut n_qubits: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some((key, value)) = header_line(line) {
                if key == "qubits" {
                    let n: usize = value.parse().map_err(|_| Error::Parse {
                        kind,
                        line: lineno,
                        msg: format!("invalid qubit count {value:?}"),
                    })?;
                    if n == 0 {
                        return Err(Error::Parse {
                            kind,
                            line: lineno,
                            msg: "qubit count must be positive".into(),
                        });
                    }
                    if let Some(seen) = n_qubits {
                        if seen != n {
                            return Err(Error::Parse {
                                kind,
                                line: lineno,
                                msg: format!("qubit count {n} conflicts with {seen}"),
                            });
                        }
                    }
                    n_qubits = Some(n);
                }
                headers.push((key, value));
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let (coeff_str, letters_str) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(l), None) => (c, l),
            _ => {
                return Err(Error::Parse {
                    kind,
                    line: lineno,
                    msg: format!("expected `<coefficient> <letters>`, got {line:?}"),
                })
            }
        };
        let coefficient: f64 = coeff_str.parse().map_err(|_| Error::Parse {
            kind,
            line: lineno,
            msg: format!("invalid coefficient {coeff_str:?}"),
        })?;
        if !coefficient.is_finite() {
            return Err(Error::Parse {
                kind,
                line: lineno,
                msg: format!("non-finite coefficient {coeff_str:?}"),
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
        terms.push(PauliTerm {
            coefficient,
            string,
        });
    }
    let n_qubits = n_qubits.ok_or(Error::Parse {
        kind,
        line: 0,
        msg: "no terms and no `# qubits:` header".into(),
    })?;
    Hamiltonian::new(n_qubits, terms, headers)
}

/// Serialize to the text format; `parse_hamiltonian(serialize_hamiltonian(h)) == h`.
pub fn serialize_hamiltonian(h: &Hamiltonian) -> String {
    let mut out = String::new();
    for (key, value) in &h.headers {
        out.push_str(&format!("# {key}: {value}\n"));
    }
    for t in &h.terms {
        out.push_str(&format!("{} {}\n", t.coefficient, t.string));
    }
    out
}
