//! Stochastic Pauli noise attached to a serially scheduled circuit.

use crate::circuit::{Circuit, EventKind};
use crate::pauli::{Pauli, PauliString};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("parameter {name} = {value} outside [0, 1]")]
    BadProbability { name: &'static str, value: f64 },
    #[error("T2 must be positive, got {0}")]
    BadT2(f64),
    #[error("durations must be nonnegative")]
    BadDuration,
}

/// Error rates and durations. `T2` is in milliseconds, durations in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub p1: f64,
    pub p2: f64,
    pub p_init: f64,
    pub p_meas: f64,
    pub p_midcirc_x: f64,
    pub p_midcirc_y: f64,
    pub p_midcirc_z: f64,
    #[serde(rename = "T2", serialize_with = "ser_t2", deserialize_with = "de_t2")]
    pub t2_ms: f64,
    pub dur_1q: f64,
    pub dur_2q: f64,
}

// Infinite T2 (no dephasing) is written as JSON null.
fn ser_t2<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_t2<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            p1: 0.0036,
            p2: 0.027,
            p_init: 0.003,
            p_meas: 0.003,
            p_midcirc_x: 0.011,
            p_midcirc_y: 0.024,
            p_midcirc_z: 0.035,
            t2_ms: 50.0,
            dur_1q: 25.0,
            dur_2q: 322.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultSource {
    Gate1q,
    Gate2q,
    Init,
    Meas,
    Idle,
    Midcirc,
}

impl FaultSource {
    pub const ALL: [FaultSource; 6] =
        [FaultSource::Gate1q, FaultSource::Gate2q, FaultSource::Init, FaultSource::Meas, FaultSource::Idle, FaultSource::Midcirc];

    pub fn parse(s: &str) -> Option<FaultSource> {
        FaultSource::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            FaultSource::Gate1q => "gate1q",
            FaultSource::Gate2q => "gate2q",
            FaultSource::Init => "init",
            FaultSource::Meas => "meas",
            FaultSource::Idle => "idle",
            FaultSource::Midcirc => "midcirc",
        }
    }

    /// Measurement faults act before their event; everything else after.
    pub fn acts_before(&self) -> bool {
        matches!(self, FaultSource::Meas)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FaultEvent {
    pub position: usize,
    pub pauli: PauliString,
    pub source: FaultSource,
}

/// `(1 - exp(-t/T2)) / 2` with `t` in microseconds and `T2` in milliseconds.
pub fn idle_dephasing_prob(t_us: f64, t2_ms: f64) -> f64 {
    if t2_ms.is_infinite() {
        return 0.0;
    }
    0.5 * (1.0 - (-(t_us / 1000.0) / t2_ms).exp())
}

impl NoiseParams {
    pub fn ideal() -> NoiseParams {
        reduce_model(&NoiseParams::default(), &[])
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, value) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("p_init", self.p_init),
            ("p_meas", self.p_meas),
            ("p_midcirc_x", self.p_midcirc_x),
            ("p_midcirc_y", self.p_midcirc_y),
            ("p_midcirc_z", self.p_midcirc_z),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::BadProbability { name, value });
            }
        }
        if self.t2_ms.is_nan() || self.t2_ms <= 0.0 {
            return Err(NoiseError::BadT2(self.t2_ms));
        }
        if !(self.dur_1q >= 0.0 && self.dur_2q >= 0.0) {
            return Err(NoiseError::BadDuration);
        }
        Ok(())
    }

    pub fn is_ideal(&self) -> bool {
        self.p1 == 0.0
            && self.p2 == 0.0
            && self.p_init == 0.0
            && self.p_meas == 0.0
            && self.p_midcirc_x == 0.0
            && self.p_midcirc_y == 0.0
            && self.p_midcirc_z == 0.0
            && self.t2_ms.is_infinite()
    }

    /// Duration charged to idle qubits for a gate acting on `arity` qubits.
    pub fn duration_for(&self, arity: usize) -> f64 {
        if arity == 1 {
            self.dur_1q
        } else {
            self.dur_2q
        }
    }

    /// Multiply the rates of the given sources by `factor`. Idle scaling divides T2,
    /// which scales the dephasing probability to first order.
    pub fn scaled(&self, sources: &[FaultSource], factor: f64) -> NoiseParams {
        let mut p = self.clone();
        for s in sources {
            match s {
                FaultSource::Gate1q => p.p1 *= factor,
                FaultSource::Gate2q => p.p2 *= factor,
                FaultSource::Init => p.p_init *= factor,
                FaultSource::Meas => p.p_meas *= factor,
                FaultSource::Idle => p.t2_ms /= factor,
                FaultSource::Midcirc => {
                    p.p_midcirc_x *= factor;
                    p.p_midcirc_y *= factor;
                    p.p_midcirc_z *= factor;
                }
            }
        }
        p
    }
}

/// Zero every source not in `keep`; T2 becomes infinite when idle noise is dropped.
pub fn reduce_model(params: &NoiseParams, keep: &[FaultSource]) -> NoiseParams {
    let k = |s: FaultSource| keep.contains(&s);
    let mut p = params.clone();
    if !k(FaultSource::Gate1q) {
        p.p1 = 0.0;
    }
    if !k(FaultSource::Gate2q) {
        p.p2 = 0.0;
    }
    if !k(FaultSource::Init) {
        p.p_init = 0.0;
    }
    if !k(FaultSource::Meas) {
        p.p_meas = 0.0;
    }
    if !k(FaultSource::Idle) {
        p.t2_ms = f64::INFINITY;
    }
    if !k(FaultSource::Midcirc) {
        p.p_midcirc_x = 0.0;
        p.p_midcirc_y = 0.0;
        p.p_midcirc_z = 0.0;
    }
    p
}

const LETTERS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

/// The `4^k - 1` non-identity Paulis on `qubits`, in lexicographic letter order.
pub fn nontrivial_paulis(n: usize, qubits: &[usize]) -> Vec<PauliString> {
    let k = qubits.len();
    (1..(1usize << (2 * k)))
        .map(|code| {
            let mut p = PauliString::identity(n);
            for (j, &q) in qubits.iter().enumerate() {
                let letter = LETTERS[(code >> (2 * (k - 1 - j))) & 3];
                p.set(q, letter).expect("qubit in range");
            }
            p
        })
        .collect()
}

/// One possible fault with its probability. Enumerates exactly the locations the
/// sampler can populate.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultSite {
    pub fault: FaultEvent,
    pub probability: f64,
}

/// Every single-fault location with nonzero probability, in circuit order.
pub fn fault_sites(circuit: &Circuit, params: &NoiseParams) -> Vec<FaultSite> {
    let n = circuit.n_qubits;
    let mut out = Vec::new();
    let mut push = |position, pauli, source, probability: f64| {
        if probability > 0.0 {
            out.push(FaultSite { fault: FaultEvent { position, pauli, source }, probability });
        }
    };
    for (i, ev) in circuit.events.iter().enumerate() {
        match &ev.kind {
            EventKind::Gate(g) => {
                let arity = g.targets().len();
                let (src, p) = if arity == 1 { (FaultSource::Gate1q, params.p1) } else { (FaultSource::Gate2q, params.p2) };
                let set = nontrivial_paulis(n, g.targets());
                let m = set.len() as f64;
                for pauli in set {
                    push(i, pauli, src, p / m);
                }
                let pi = idle_dephasing_prob(params.duration_for(arity), params.t2_ms);
                for q in (0..n).filter(|q| !g.targets().contains(q)) {
                    push(i, PauliString::z_on(n, &[q]), FaultSource::Idle, pi);
                }
            }
            EventKind::Reset => {
                for &q in &ev.targets {
                    push(i, PauliString::x_on(n, &[q]), FaultSource::Init, params.p_init);
                }
            }
            EventKind::MeasureDetect => {
                for &q in &ev.targets {
                    push(i, PauliString::x_on(n, &[q]), FaultSource::Meas, params.p_meas);
                }
                if circuit.is_midcirc_event(i) {
                    for q in circuit.hidden_qubits(i) {
                        for (l, p) in [(Pauli::X, params.p_midcirc_x), (Pauli::Y, params.p_midcirc_y), (Pauli::Z, params.p_midcirc_z)] {
                            push(i, PauliString::single(n, q, l).expect("in range"), FaultSource::Midcirc, p);
                        }
                    }
                }
            }
            EventKind::ClassicalNote => {}
        }
    }
    out
}

/// Sample the faults for events in `range`. The draw order is fixed, so a fixed
/// stream reproduces the same list on every platform.
pub fn sample_faults<R: Rng + ?Sized>(
    circuit: &Circuit,
    params: &NoiseParams,
    rng: &mut R,
    range: Range<usize>,
) -> Vec<FaultEvent> {
    let n = circuit.n_qubits;
    let mut out = Vec::new();
    let p_idle_1 = idle_dephasing_prob(params.dur_1q, params.t2_ms);
    let p_idle_2 = idle_dephasing_prob(params.dur_2q, params.t2_ms);
    for i in range {
        let ev = &circuit.events[i];
        match &ev.kind {
            EventKind::Gate(g) => {
                let t = g.targets();
                let (p, src) = if t.len() == 1 { (params.p1, FaultSource::Gate1q) } else { (params.p2, FaultSource::Gate2q) };
                if p > 0.0 && rng.random::<f64>() < p {
                    let m = (1usize << (2 * t.len())) - 1;
                    let code = 1 + rng.random_range(0..m);
                    let mut pauli = PauliString::identity(n);
                    for (j, &q) in t.iter().enumerate() {
                        pauli.set(q, LETTERS[(code >> (2 * (t.len() - 1 - j))) & 3]).expect("in range");
                    }
                    out.push(FaultEvent { position: i, pauli, source: src });
                }
                let pi = if t.len() == 1 { p_idle_1 } else { p_idle_2 };
                if pi > 0.0 {
                    let mut z = 0u64;
                    for q in 0..n {
                        if !t.contains(&q) && rng.random::<f64>() < pi {
                            z |= 1 << q;
                        }
                    }
                    if z != 0 {
                        let pauli = PauliString::from_bits(n, 0, z, Default::default()).expect("in range");
                        out.push(FaultEvent { position: i, pauli, source: FaultSource::Idle });
                    }
                }
            }
            EventKind::Reset => {
                if params.p_init > 0.0 {
                    let mut x = 0u64;
                    for &q in &ev.targets {
                        if rng.random::<f64>() < params.p_init {
                            x |= 1 << q;
                        }
                    }
                    if x != 0 {
                        let pauli = PauliString::from_bits(n, x, 0, Default::default()).expect("in range");
                        out.push(FaultEvent { position: i, pauli, source: FaultSource::Init });
                    }
                }
            }
            EventKind::MeasureDetect => {
                if params.p_meas > 0.0 {
                    let mut x = 0u64;
                    for &q in &ev.targets {
                        if rng.random::<f64>() < params.p_meas {
                            x |= 1 << q;
                        }
                    }
                    if x != 0 {
                        let pauli = PauliString::from_bits(n, x, 0, Default::default()).expect("in range");
                        out.push(FaultEvent { position: i, pauli, source: FaultSource::Meas });
                    }
                }
                if circuit.is_midcirc_event(i) {
                    // Three independent flips per hidden qubit, in X, Y, Z order.
                    let mut pauli = PauliString::identity(n);
                    let mut any = false;
                    for q in circuit.hidden_qubits(i) {
                        for (l, p) in [(Pauli::X, params.p_midcirc_x), (Pauli::Y, params.p_midcirc_y), (Pauli::Z, params.p_midcirc_z)] {
                            if p > 0.0 && rng.random::<f64>() < p {
                                let f = PauliString::single(n, q, l).expect("in range");
                                pauli = pauli.multiply(&f).expect("same size");
                                any = true;
                            }
                        }
                    }
                    if any && !pauli.is_identity() {
                        out.push(FaultEvent { position: i, pauli, source: FaultSource::Midcirc });
                    }
                }
            }
            EventKind::ClassicalNote => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_prob_examples() {
        assert_eq!(idle_dephasing_prob(0.0, 50.0), 0.0);
        assert!((idle_dephasing_prob(322.5, 50.0) - 0.0032146).abs() < 1e-7);
        assert!((idle_dephasing_prob(1e12, 50.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn json_field_names() {
        let p = NoiseParams::default();
        let s = serde_json::to_string(&p).unwrap();
        for f in ["\"p1\"", "\"p2\"", "\"p_init\"", "\"p_meas\"", "\"p_midcirc_x\"", "\"p_midcirc_y\"", "\"p_midcirc_z\"", "\"T2\"", "\"dur_1q\"", "\"dur_2q\""] {
            assert!(s.contains(f), "{f}");
        }
        let ideal = NoiseParams::ideal();
        let back: NoiseParams = serde_json::from_str(&serde_json::to_string(&ideal).unwrap()).unwrap();
        assert_eq!(back, ideal);
        assert!(back.is_ideal());
    }

    #[test]
    fn reduce_keeps_only_selected() {
        let p = reduce_model(&NoiseParams::default(), &[FaultSource::Gate2q]);
        assert_eq!(p.p2, 0.027);
        assert_eq!(p.p1 + p.p_init + p.p_meas + p.p_midcirc_x + p.p_midcirc_y + p.p_midcirc_z, 0.0);
        assert!(p.t2_ms.is_infinite());
    }

    #[test]
    fn validation() {
        let mut p = NoiseParams::default();
        p.p2 = 1.5;
        assert!(p.validate().is_err());
        let mut p = NoiseParams::default();
        p.t2_ms = 0.0;
        assert!(p.validate().is_err());
    }
}
