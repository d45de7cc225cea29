//! Signed Pauli strings in symplectic form and stabilizer-group helpers.
//!
//! Internally qubits are 0-based. The sparse text form (`Z3.Z6.Z8`) is 1-based.

use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Largest register a `PauliString` can describe (one bit per qubit in a u64).
pub const MAX_PAULI_QUBITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("qubit index {index} out of range for {n} qubits")]
    OutOfRange { index: usize, n: usize },
    #[error("at most {MAX_PAULI_QUBITS} qubits supported, got {0}")]
    TooManyQubits(usize),
    #[error("cannot parse Pauli string `{0}`")]
    Parse(String),
    #[error("gate `{0}` is not Clifford; Pauli conjugation undefined")]
    NonClifford(String),
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    fn from_letter(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Phase `i^k`, stored as `k mod 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Phase(pub u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn mul(self, other: Phase) -> Phase {
        Phase((self.0 + other.0) % 4)
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    fn prefix(self) -> &'static str {
        ["+", "+i", "-", "-i"][self.0 as usize]
    }
}

/// `i^phase * P_1 ⊗ ... ⊗ P_n` where `P_q` is determined by the q-th x and z bits
/// (both set means Y).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    phase: Phase,
}

fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> PauliString {
        assert!(n <= MAX_PAULI_QUBITS, "too many qubits for PauliString");
        PauliString { n, x: 0, z: 0, phase: Phase::ONE }
    }

    pub fn from_bits(n: usize, x: u64, z: u64, phase: Phase) -> Result<PauliString, PauliError> {
        if n > MAX_PAULI_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        if (x | z) & !mask(n) != 0 {
            let hi = 63 - (x | z).leading_zeros() as usize;
            return Err(PauliError::OutOfRange { index: hi, n });
        }
        Ok(PauliString { n, x, z, phase })
    }

    pub fn single(n: usize, q: usize, p: Pauli) -> Result<PauliString, PauliError> {
        let mut s = PauliString::identity(n);
        s.set(q, p)?;
        Ok(s)
    }

    /// Uniform Pauli on the listed 0-based qubits, e.g. `of_kind(10, Pauli::Z, &[2, 5, 7])`.
    pub fn of_kind(n: usize, p: Pauli, qubits: &[usize]) -> Result<PauliString, PauliError> {
        let mut s = PauliString::identity(n);
        for &q in qubits {
            s.set(q, p)?;
        }
        Ok(s)
    }

    pub fn x_on(n: usize, qubits: &[usize]) -> PauliString {
        PauliString::of_kind(n, Pauli::X, qubits).expect("qubit in range")
    }

    pub fn z_on(n: usize, qubits: &[usize]) -> PauliString {
        PauliString::of_kind(n, Pauli::Z, qubits).expect("qubit in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn x_bits(&self) -> u64 {
        self.x
    }
    pub fn z_bits(&self) -> u64 {
        self.z
    }
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn with_phase(mut self, phase: Phase) -> PauliString {
        self.phase = phase;
        self
    }

    /// Set the letter on qubit `q`, leaving the phase unchanged.
    pub fn set(&mut self, q: usize, p: Pauli) -> Result<(), PauliError> {
        if q >= self.n {
            return Err(PauliError::OutOfRange { index: q, n: self.n });
        }
        let (bx, bz) = p.bits();
        let b = 1u64 << q;
        self.x = if bx { self.x | b } else { self.x & !b };
        self.z = if bz { self.z | b } else { self.z & !b };
        Ok(())
    }

    pub fn get(&self, q: usize) -> Pauli {
        Pauli::from_bits((self.x >> q) & 1 == 1, (self.z >> q) & 1 == 1)
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| (self.x | self.z) >> q & 1 == 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn is_x_type(&self) -> bool {
        self.z == 0
    }

    pub fn is_z_type(&self) -> bool {
        self.x == 0
    }

    /// Product `self * other` with exact phase.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString, PauliError> {
        self.check_dim(other)?;
        // letter products: XY = iZ, YZ = iX, ZX = iY and the reversed order gives -i.
        let mut k = self.phase.0 as u32 + other.phase.0 as u32;
        let both = (self.x | self.z) & (other.x | other.z);
        let mut rest = both;
        while rest != 0 {
            let q = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let a = self.get(q);
            let b = other.get(q);
            k += match (a, b) {
                (Pauli::X, Pauli::Y) | (Pauli::Y, Pauli::Z) | (Pauli::Z, Pauli::X) => 1,
                (Pauli::Y, Pauli::X) | (Pauli::Z, Pauli::Y) | (Pauli::X, Pauli::Z) => 3,
                _ => 0,
            };
        }
        Ok(PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            phase: Phase((k % 4) as u8),
        })
    }

    pub fn commutes(&self, other: &PauliString) -> Result<bool, PauliError> {
        self.check_dim(other)?;
        Ok(self.commutes_unchecked(other))
    }

    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Hermitian conjugate; for Paulis this only negates an imaginary phase.
    pub fn dagger(&self) -> PauliString {
        let mut p = self.clone();
        p.phase = Phase((4 - self.phase.0) % 4);
        p
    }

    /// Place this string on qubits `offset..offset+self.n` of an `n`-qubit register.
    pub fn embed(&self, n: usize, offset: usize) -> Result<PauliString, PauliError> {
        let mut map = Vec::with_capacity(self.n);
        for q in 0..self.n {
            map.push(offset + q);
        }
        self.remap(n, &map)
    }

    /// Relabel qubit `q` to `map[q]` in an `n`-qubit register.
    pub fn remap(&self, n: usize, map: &[usize]) -> Result<PauliString, PauliError> {
        if map.len() != self.n {
            return Err(PauliError::DimensionMismatch { left: map.len(), right: self.n });
        }
        let mut out = PauliString::identity(n).with_phase(self.phase);
        for q in self.support() {
            out.set(map[q], self.get(q))?;
        }
        Ok(out)
    }

    /// Conjugate through a Clifford gate: returns `U P U†`.
    pub fn conjugate_by(&self, gate: &crate::statevec::Gate) -> Result<PauliString, PauliError> {
        use crate::statevec::GateKind as G;
        for &t in gate.targets() {
            if t >= self.n {
                return Err(PauliError::OutOfRange { index: t, n: self.n });
            }
        }
        let t = gate.targets();
        let mut out = self.clone();
        match gate.kind() {
            G::X | G::Y | G::Z => {
                // P Q P = ±Q: sign flips when the letters anticommute.
                let g = PauliString::single(self.n, t[0], gate_letter(gate.kind()))?;
                if !self.commutes_unchecked(&g) {
                    out.phase = out.phase.mul(Phase::MINUS_ONE);
                }
            }
            G::H => {
                let q = t[0];
                let p = self.get(q);
                let (img, neg) = match p {
                    Pauli::X => (Pauli::Z, false),
                    Pauli::Z => (Pauli::X, false),
                    Pauli::Y => (Pauli::Y, true),
                    Pauli::I => (Pauli::I, false),
                };
                out.set(q, img)?;
                if neg {
                    out.phase = out.phase.mul(Phase::MINUS_ONE);
                }
            }
            G::S | G::Sdag => {
                let q = t[0];
                let p = self.get(q);
                let s = matches!(gate.kind(), G::S);
                // S X S† = Y, S Y S† = -X; S† X S = -Y, S† Y S = X.
                let (img, neg) = match (p, s) {
                    (Pauli::X, true) => (Pauli::Y, false),
                    (Pauli::Y, true) => (Pauli::X, true),
                    (Pauli::X, false) => (Pauli::Y, true),
                    (Pauli::Y, false) => (Pauli::X, false),
                    (other, _) => (other, false),
                };
                out.set(q, img)?;
                if neg {
                    out.phase = out.phase.mul(Phase::MINUS_ONE);
                }
            }
            G::Cnot | G::Cz => {
                // Multiply the images of each single-qubit factor on (c, t).
                let (c, tq) = (t[0], t[1]);
                let pc = self.get(c);
                let pt = self.get(tq);
                let mut rest = self.clone();
                rest.set(c, Pauli::I)?;
                rest.set(tq, Pauli::I)?;
                let cz = matches!(gate.kind(), G::Cz);
                let ic = two_qubit_image(self.n, c, tq, pc, true, cz)?;
                let it = two_qubit_image(self.n, c, tq, pt, false, cz)?;
                // self = phase * rest * pc * pt with pc, pt on distinct qubits and
                // disjoint from rest, so the product order below is exact.
                out = rest.multiply(&ic)?.multiply(&it)?;
            }
            other => return Err(PauliError::NonClifford(format!("{other:?}"))),
        }
        Ok(out)
    }

    fn check_dim(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n != other.n {
            Err(PauliError::DimensionMismatch { left: self.n, right: other.n })
        } else {
            Ok(())
        }
    }

    /// Sparse 1-based form such as `Z3.Z6.Z8`; identity prints as `I`.
    /// A non-trivial phase is prefixed (`-X1`, `+iY2`).
    pub fn to_sparse(&self) -> String {
        let body: Vec<String> = self
            .support()
            .iter()
            .map(|&q| format!("{}{}", self.get(q).letter(), q + 1))
            .collect();
        let body = if body.is_empty() { "I".to_string() } else { body.join(".") };
        if self.phase == Phase::ONE {
            body
        } else {
            format!("{}{}", self.phase.prefix(), body)
        }
    }

    /// Parse the sparse form for an `n`-qubit register.
    pub fn from_sparse(s: &str, n: usize) -> Result<PauliString, PauliError> {
        let err = || PauliError::Parse(s.to_string());
        let (phase, body) = split_phase(s.trim());
        let mut out = PauliString::identity(n).with_phase(phase);
        if body == "I" || body.is_empty() {
            return Ok(out);
        }
        for tok in body.split('.') {
            let mut chars = tok.chars();
            let letter = chars.next().and_then(Pauli::from_letter).ok_or_else(err)?;
            let idx: usize = chars.as_str().parse().map_err(|_| err())?;
            if idx == 0 || idx > n {
                return Err(PauliError::OutOfRange { index: idx, n });
            }
            if out.get(idx - 1) != Pauli::I {
                return Err(err());
            }
            out.set(idx - 1, letter)?;
        }
        Ok(out)
    }
}

fn gate_letter(kind: &crate::statevec::GateKind) -> Pauli {
    use crate::statevec::GateKind as G;
    match kind {
        G::X => Pauli::X,
        G::Y => Pauli::Y,
        _ => Pauli::Z,
    }
}

/// Image of a single letter `p` sitting on the control (or target) of CNOT/CZ.
fn two_qubit_image(
    n: usize,
    c: usize,
    t: usize,
    p: Pauli,
    on_control: bool,
    cz: bool,
) -> Result<PauliString, PauliError> {
    let mut out = PauliString::identity(n);
    let (me, other) = if on_control { (c, t) } else { (t, c) };
    match (p, on_control, cz) {
        (Pauli::I, _, _) => {}
        // CNOT: X_c -> X_c X_t, Y_c -> Y_c X_t, Z_c fixed.
        (Pauli::X, true, false) | (Pauli::Y, true, false) => {
            out.set(me, p)?;
            out.set(other, Pauli::X)?;
        }
        (Pauli::Z, true, false) => out.set(me, Pauli::Z)?,
        // CNOT: Z_t -> Z_c Z_t, Y_t -> Z_c Y_t, X_t fixed.
        (Pauli::Z, false, false) | (Pauli::Y, false, false) => {
            out.set(me, p)?;
            out.set(other, Pauli::Z)?;
        }
        (Pauli::X, false, false) => out.set(me, Pauli::X)?,
        // CZ is symmetric: X -> X Z_other, Y -> Y Z_other.
        (Pauli::X, _, true) | (Pauli::Y, _, true) => {
            out.set(me, p)?;
            out.set(other, Pauli::Z)?;
        }
        (Pauli::Z, _, true) => out.set(me, Pauli::Z)?,
    }
    Ok(out)
}

fn split_phase(s: &str) -> (Phase, &str) {
    for (pre, ph) in [("+i", Phase::I), ("-i", Phase::MINUS_I), ("+", Phase::ONE), ("-", Phase::MINUS_ONE)] {
        if let Some(rest) = s.strip_prefix(pre) {
            return (ph, rest);
        }
    }
    (Phase::ONE, s)
}

/// Dense form `±{I,X,Y,Z}^n`, e.g. `+XIZ` or `-iYY`.
impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.phase.prefix())?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q).letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = PauliError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (phase, body) = split_phase(s.trim());
        let n = body.chars().count();
        let mut out = PauliString::identity(n.min(MAX_PAULI_QUBITS)).with_phase(phase);
        if n > MAX_PAULI_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        for (q, c) in body.chars().enumerate() {
            let p = Pauli::from_letter(c).ok_or_else(|| PauliError::Parse(s.to_string()))?;
            out.set(q, p)?;
        }
        Ok(out)
    }
}

/// Bit i set iff `error` anticommutes with generator i.
pub fn syndrome_of(error: &PauliString, generators: &[PauliString]) -> Result<Vec<bool>, PauliError> {
    generators.iter().map(|g| error.commutes(g).map(|c| !c)).collect()
}

/// A list of Pauli generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliGroup {
    pub generators: Vec<PauliString>,
}

impl PauliGroup {
    pub fn new(generators: Vec<PauliString>) -> Result<PauliGroup, PauliError> {
        if let Some(g0) = generators.first() {
            for g in &generators {
                g0.check_dim(g)?;
            }
        }
        Ok(PauliGroup { generators })
    }

    pub fn all_commute(&self) -> bool {
        self.generators
            .iter()
            .enumerate()
            .all(|(i, a)| self.generators[i + 1..].iter().all(|b| a.commutes_unchecked(b)))
    }

    /// Valid stabilizer group: Hermitian commuting generators with −I not generated.
    pub fn is_valid_stabilizer_group(&self) -> bool {
        if !self.all_commute() || self.generators.iter().any(|g| !g.phase.is_real()) {
            return false;
        }
        // With commuting Hermitian generators, −I is generated iff some product of
        // generators has trivial Pauli part and phase −1. Reduce the generators and
        // check each dependency.
        match self.reduce() {
            Some(_) => true,
            None => false,
        }
    }

    /// Gaussian elimination over the symplectic bits, carrying phases. Returns the
    /// independent reduced rows, or `None` when a dependent product equals −I.
    fn reduce(&self) -> Option<Vec<PauliString>> {
        let mut rows: Vec<PauliString> = Vec::new();
        for g in &self.generators {
            let mut v = g.clone();
            for r in &rows {
                let pivot = pivot_of(r);
                if bit_at(&v, pivot) {
                    v = r.multiply(&v).ok()?;
                }
            }
            if v.is_identity() {
                if v.phase != Phase::ONE {
                    return None;
                }
                continue;
            }
            // Keep rows fully reduced against the new pivot.
            let pv = pivot_of(&v);
            for r in rows.iter_mut() {
                if bit_at(r, pv) {
                    *r = v.multiply(r).ok()?;
                }
            }
            rows.push(v);
        }
        Some(rows)
    }

    pub fn rank(&self) -> usize {
        self.reduce().map(|r| r.len()).unwrap_or(0)
    }

    /// Whether `p` (ignoring phase) lies in the generated group.
    pub fn contains_up_to_phase(&self, p: &PauliString) -> bool {
        let rows = match self.reduce() {
            Some(r) => r,
            None => return false,
        };
        let mut v = p.clone();
        for r in &rows {
            if bit_at(&v, pivot_of(r)) {
                match r.multiply(&v) {
                    Ok(m) => v = m,
                    Err(_) => return false,
                }
            }
        }
        v.is_identity()
    }
}

// Symplectic coordinate index: x bits first, then z bits.
fn pivot_of(p: &PauliString) -> usize {
    if p.x != 0 {
        p.x.trailing_zeros() as usize
    } else {
        64 + p.z.trailing_zeros() as usize
    }
}

fn bit_at(p: &PauliString, idx: usize) -> bool {
    if idx < 64 {
        (p.x >> idx) & 1 == 1
    } else {
        (p.z >> (idx - 64)) & 1 == 1
    }
}
