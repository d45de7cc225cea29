//! Dense state-vector kernel. Qubit q is bit q of the basis index.

use crate::pauli::{PauliError, PauliString};
use crate::scalar::Real;
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("qubit {index} out of range for {n} qubits")]
    OutOfRange { index: usize, n: usize },
    #[error("duplicate gate targets {0:?}")]
    DuplicateTargets(Vec<usize>),
    #[error("gate {kind} expects {expected} targets, got {got}")]
    Arity { kind: String, expected: usize, got: usize },
    #[error("at most {MAX_QUBITS} qubits supported, got {0}")]
    TooManyQubits(usize),
    #[error("forced measurement outcome {bit} on qubit {qubit} has zero probability")]
    ZeroProbabilityBranch { qubit: usize, bit: u8 },
    #[error("qubit {0} is entangled or in superposition; cannot reset without measuring")]
    NotClassical(usize),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    X,
    Y,
    Z,
    H,
    S,
    Sdag,
    T,
    Tdag,
    Cnot,
    Cz,
    Ccz,
    Rx(f64),
    Ry(f64),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Cz => 2,
            GateKind::Ccz => 3,
            _ => 1,
        }
    }

    pub fn is_clifford(&self) -> bool {
        !matches!(self, GateKind::T | GateKind::Tdag | GateKind::Ccz | GateKind::Rx(_) | GateKind::Ry(_))
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(
            self,
            GateKind::Z | GateKind::S | GateKind::Sdag | GateKind::T | GateKind::Tdag | GateKind::Cz | GateKind::Ccz
        )
    }

    pub fn inverse(&self) -> GateKind {
        match *self {
            GateKind::S => GateKind::Sdag,
            GateKind::Sdag => GateKind::S,
            GateKind::T => GateKind::Tdag,
            GateKind::Tdag => GateKind::T,
            GateKind::Rx(t) => GateKind::Rx(-t),
            GateKind::Ry(t) => GateKind::Ry(-t),
            g => g,
        }
    }

    pub fn name(&self) -> String {
        match self {
            GateKind::X => "X".into(),
            GateKind::Y => "Y".into(),
            GateKind::Z => "Z".into(),
            GateKind::H => "H".into(),
            GateKind::S => "S".into(),
            GateKind::Sdag => "SDG".into(),
            GateKind::T => "T".into(),
            GateKind::Tdag => "TDG".into(),
            GateKind::Cnot => "CNOT".into(),
            GateKind::Cz => "CZ".into(),
            GateKind::Ccz => "CCZ".into(),
            GateKind::Rx(t) => format!("RX({t})"),
            GateKind::Ry(t) => format!("RY({t})"),
        }
    }

    pub fn parse(s: &str) -> Option<GateKind> {
        let angle = |rest: &str| -> Option<f64> { rest.strip_prefix('(')?.strip_suffix(')')?.parse().ok() };
        Some(match s {
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "H" => GateKind::H,
            "S" => GateKind::S,
            "SDG" => GateKind::Sdag,
            "T" => GateKind::T,
            "TDG" => GateKind::Tdag,
            "CNOT" => GateKind::Cnot,
            "CZ" => GateKind::Cz,
            "CCZ" => GateKind::Ccz,
            _ => {
                if let Some(r) = s.strip_prefix("RX") {
                    GateKind::Rx(angle(r)?)
                } else if let Some(r) = s.strip_prefix("RY") {
                    GateKind::Ry(angle(r)?)
                } else {
                    return None;
                }
            }
        })
    }
}

/// A gate with its 0-based targets. For CNOT the first target is the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    kind: GateKind,
    targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: &[usize]) -> Result<Gate, StateError> {
        if targets.len() != kind.arity() {
            return Err(StateError::Arity { kind: kind.name(), expected: kind.arity(), got: targets.len() });
        }
        for (i, a) in targets.iter().enumerate() {
            if targets[i + 1..].contains(a) {
                return Err(StateError::DuplicateTargets(targets.to_vec()));
            }
        }
        Ok(Gate { kind, targets: targets.to_vec() })
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn inverse(&self) -> Gate {
        Gate { kind: self.kind.inverse(), targets: self.targets.clone() }
    }

    pub fn remapped(&self, map: &[usize]) -> Gate {
        Gate { kind: self.kind, targets: self.targets.iter().map(|&t| map[t]).collect() }
    }
}

pub fn gate(kind: GateKind, targets: &[usize]) -> Gate {
    Gate::new(kind, targets).expect("valid gate")
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self, StateError> {
        if n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(StateVector { n, amps })
    }

    /// Computational basis state; bit q of `index` is qubit q.
    pub fn basis(n: usize, index: usize) -> Result<Self, StateError> {
        let mut s = Self::zero(n)?;
        s.amps[0] = Complex::new(T::zero(), T::zero());
        s.amps[index] = Complex::new(T::one(), T::zero());
        Ok(s)
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self, StateError> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n || n > MAX_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let mut s = StateVector { n, amps };
        s.normalize();
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt();
        if s > T::zero() {
            let inv = T::one() / s;
            for a in self.amps.iter_mut() {
                *a = *a * inv;
            }
        }
    }

    fn check(&self, q: usize) -> Result<(), StateError> {
        if q >= self.n {
            Err(StateError::OutOfRange { index: q, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<(), StateError> {
        for &t in g.targets() {
            self.check(t)?;
        }
        let t = g.targets();
        let zero = T::zero();
        let one = T::one();
        let h = T::FRAC_1_SQRT_2();
        let c = |re: T, im: T| Complex::new(re, im);
        match *g.kind() {
            GateKind::X => self.apply_x(t[0]),
            GateKind::Y => self.apply_1q(t[0], [[c(zero, zero), c(zero, -one)], [c(zero, one), c(zero, zero)]]),
            GateKind::Z => self.apply_phase(t[0], c(-one, zero)),
            GateKind::H => self.apply_1q(t[0], [[c(h, zero), c(h, zero)], [c(h, zero), c(-h, zero)]]),
            GateKind::S => self.apply_phase(t[0], c(zero, one)),
            GateKind::Sdag => self.apply_phase(t[0], c(zero, -one)),
            GateKind::T => self.apply_phase(t[0], c(h, h)),
            GateKind::Tdag => self.apply_phase(t[0], c(h, -h)),
            GateKind::Rx(theta) => {
                let (s, co) = (T::of(theta / 2.0).sin(), T::of(theta / 2.0).cos());
                self.apply_1q(t[0], [[c(co, zero), c(zero, -s)], [c(zero, -s), c(co, zero)]])
            }
            GateKind::Ry(theta) => {
                let (s, co) = (T::of(theta / 2.0).sin(), T::of(theta / 2.0).cos());
                self.apply_1q(t[0], [[c(co, zero), c(-s, zero)], [c(s, zero), c(co, zero)]])
            }
            GateKind::Cnot => {
                let (cb, tb) = (1usize << t[0], 1usize << t[1]);
                for i in 0..self.amps.len() {
                    if i & cb != 0 && i & tb == 0 {
                        self.amps.swap(i, i | tb);
                    }
                }
            }
            GateKind::Cz => {
                let m = (1usize << t[0]) | (1usize << t[1]);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *a = -*a;
                    }
                }
            }
            GateKind::Ccz => {
                let m = (1usize << t[0]) | (1usize << t[1]) | (1usize << t[2]);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *a = -*a;
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_x(&mut self, q: usize) {
        let b = 1usize << q;
        for i in 0..self.amps.len() {
            if i & b == 0 {
                self.amps.swap(i, i | b);
            }
        }
    }

    fn apply_phase(&mut self, q: usize, ph: Complex<T>) {
        let b = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & b != 0 {
                *a = *a * ph;
            }
        }
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex<T>; 2]; 2]) {
        let b = 1usize << q;
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + b {
                let a0 = self.amps[i];
                let a1 = self.amps[i | b];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | b] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * b;
        }
    }

    /// Multiply by the Pauli operator, phase included.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<(), StateError> {
        if p.n() != self.n {
            return Err(PauliError::DimensionMismatch { left: p.n(), right: self.n }.into());
        }
        if p.is_identity() && p.phase().0 == 0 {
            return Ok(());
        }
        let x = p.x_bits() as usize;
        let z = p.z_bits() as usize;
        let ny = (x & z).count_ones() as u8;
        let base = i_power::<T>(p.phase().0 + ny);
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let v = if (i & z).count_ones() % 2 == 1 { -*a } else { *a };
            out[i ^ x] = v * base;
        }
        self.amps = out;
        Ok(())
    }

    /// `<psi| P |psi>`.
    pub fn expectation_pauli(&self, p: &PauliString) -> Result<Complex<T>, StateError> {
        let mut tmp = self.clone();
        tmp.apply_pauli(p)?;
        Ok(self.inner(&tmp))
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector<T>) -> Complex<T> {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    /// `|<self|other>|^2` for normalized states.
    pub fn overlap_fidelity(&self, other: &StateVector<T>) -> T {
        self.inner(other).norm_sqr()
    }

    pub fn prob_one(&self, q: usize) -> Result<T, StateError> {
        self.check(q)?;
        let b = 1usize << q;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & b != 0)
            .fold(T::zero(), |acc, (_, a)| acc + a.norm_sqr()))
    }

    /// Project qubit `q` onto `bit` and renormalize; returns the branch probability.
    pub fn project(&mut self, q: usize, bit: u8) -> Result<T, StateError> {
        let p1 = self.prob_one(q)?;
        let p = if bit == 1 { p1 } else { T::one() - p1 };
        if p <= T::norm_tol() {
            return Err(StateError::ZeroProbabilityBranch { qubit: q, bit });
        }
        let b = 1usize << q;
        let keep_one = bit == 1;
        let inv = T::one() / p.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & b != 0) == keep_one {
                *a = *a * inv;
            } else {
                *a = Complex::new(T::zero(), T::zero());
            }
        }
        Ok(p)
    }

    /// Z-basis measurement of each listed qubit in order, Born-rule sampled.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, qubits: &[usize], rng: &mut R) -> Result<Vec<u8>, StateError> {
        for (i, a) in qubits.iter().enumerate() {
            self.check(*a)?;
            if qubits[i + 1..].contains(a) {
                return Err(StateError::DuplicateTargets(qubits.to_vec()));
            }
        }
        let mut bits = Vec::with_capacity(qubits.len());
        for &q in qubits {
            let p1 = self.prob_one(q)?.to_f64().unwrap_or(0.0);
            let r: f64 = rng.random();
            let bit = if r < p1 { 1 } else { 0 };
            self.project(q, bit)?;
            bits.push(bit);
        }
        Ok(bits)
    }

    /// Branch-forcing measurement: project onto the given bits and return the joint
    /// probability of that outcome.
    pub fn measure_z_forced(&mut self, qubits: &[usize], bits: &[u8]) -> Result<T, StateError> {
        let mut p = T::one();
        for (&q, &b) in qubits.iter().zip(bits) {
            p = p * self.project(q, b)?;
        }
        Ok(p)
    }

    /// Return measured qubits to |0>. Each qubit must be in a definite Z state.
    pub fn reset_to_zero(&mut self, qubits: &[usize]) -> Result<(), StateError> {
        for &q in qubits {
            let p1 = self.prob_one(q)?;
            if p1 > T::one() - T::norm_tol() {
                self.apply_x(q);
            } else if p1 > T::norm_tol() {
                return Err(StateError::NotClassical(q));
            }
        }
        Ok(())
    }

    /// Drop qubit `q`, which must be in the definite state `bit`. Higher qubits
    /// shift down by one.
    pub fn remove_qubit(&mut self, q: usize, bit: u8) -> Result<(), StateError> {
        self.check(q)?;
        let b = 1usize << q;
        let low = b - 1;
        let half = self.amps.len() / 2;
        let mut out = Vec::with_capacity(half);
        for j in 0..half {
            let i = (j & low) | ((j & !low) << 1) | if bit == 1 { b } else { 0 };
            out.push(self.amps[i]);
        }
        self.amps = out;
        self.n -= 1;
        Ok(())
    }

    /// Append a new highest qubit in state `|bit>`.
    pub fn push_qubit(&mut self, bit: u8) -> Result<(), StateError> {
        if self.n + 1 > MAX_QUBITS {
            return Err(StateError::TooManyQubits(self.n + 1));
        }
        let len = self.amps.len();
        let zero = Complex::new(T::zero(), T::zero());
        if bit == 0 {
            self.amps.resize(2 * len, zero);
        } else {
            let mut out = vec![zero; len];
            out.extend_from_slice(&self.amps);
            self.amps = out;
        }
        self.n += 1;
        Ok(())
    }

    /// Reduced density matrix over the listed qubits (in the given order).
    pub fn reduced_density(&self, keep: &[usize]) -> Result<crate::linalg::CMatrix<T>, StateError> {
        for &q in keep {
            self.check(q)?;
        }
        let k = keep.len();
        let dim = 1usize << k;
        let mut rho = crate::linalg::CMatrix::zeros(dim);
        let keep_mask: usize = keep.iter().map(|&q| 1usize << q).sum();
        let local = |i: usize| -> usize { keep.iter().enumerate().map(|(j, &q)| ((i >> q) & 1) << j).sum() };
        // group amplitudes by the environment bits
        let mut groups: std::collections::BTreeMap<usize, Vec<(usize, Complex<T>)>> = Default::default();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() > T::zero() {
                groups.entry(i & !keep_mask).or_default().push((local(i), *a));
            }
        }
        for g in groups.values() {
            for &(r, a) in g {
                for &(c, b) in g {
                    let v = rho.get(r, c) + a * b.conj();
                    rho.set(r, c, v);
                }
            }
        }
        Ok(rho)
    }
}

pub(crate) fn i_power<T: Real>(k: u8) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    type S = StateVector<f64>;

    #[test]
    fn hadamard_on_zero() {
        let mut s = S::zero(1).unwrap();
        s.apply_gate(&gate(GateKind::H, &[0])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - h).abs() < 1e-12);
        assert!((s.amplitudes()[1].re - h).abs() < 1e-12);
    }

    #[test]
    fn ccz_phases() {
        let mut s = S::basis(3, 0b011).unwrap();
        s.apply_gate(&gate(GateKind::Ccz, &[0, 1, 2])).unwrap();
        assert_eq!(s.amplitudes()[0b011].re, 1.0);
        let mut s = S::basis(3, 0b111).unwrap();
        s.apply_gate(&gate(GateKind::Ccz, &[0, 1, 2])).unwrap();
        assert_eq!(s.amplitudes()[0b111].re, -1.0);
    }

    #[test]
    fn gate_validation() {
        assert!(matches!(Gate::new(GateKind::Cnot, &[1, 1]), Err(StateError::DuplicateTargets(_))));
        assert!(matches!(Gate::new(GateKind::Ccz, &[0, 1]), Err(StateError::Arity { .. })));
        let mut s = S::zero(2).unwrap();
        assert!(matches!(s.apply_gate(&gate(GateKind::H, &[2])), Err(StateError::OutOfRange { .. })));
    }

    #[test]
    fn forced_zero_branch_errors() {
        let mut s = S::zero(1).unwrap();
        assert!(matches!(s.measure_z_forced(&[0], &[1]), Err(StateError::ZeroProbabilityBranch { .. })));
    }

    #[test]
    fn bell_half_measurement_statistics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut ones = 0;
        for _ in 0..10_000 {
            let mut s = S::zero(2).unwrap();
            s.apply_gate(&gate(GateKind::H, &[0])).unwrap();
            s.apply_gate(&gate(GateKind::Cnot, &[0, 1])).unwrap();
            ones += s.measure_z(&[0], &mut rng).unwrap()[0] as usize;
        }
        assert!((ones as f64 / 1e4 - 0.5).abs() < 0.02);
    }

    #[test]
    fn remove_and_push_roundtrip() {
        let mut s = S::zero(3).unwrap();
        s.apply_gate(&gate(GateKind::H, &[0])).unwrap();
        s.apply_gate(&gate(GateKind::X, &[1])).unwrap();
        s.apply_gate(&gate(GateKind::Cnot, &[0, 2])).unwrap();
        let before = s.clone();
        s.remove_qubit(1, 1).unwrap();
        assert_eq!(s.n(), 2);
        s.push_qubit(1).unwrap();
        // qubit order now (0, 2, 1): compare via the swapped layout
        for i in 0..8usize {
            let j = (i & 1) | (((i >> 2) & 1) << 1) | (((i >> 1) & 1) << 2);
            assert!((before.amplitudes()[i] - s.amplitudes()[j]).norm() < 1e-12);
        }
    }
}
