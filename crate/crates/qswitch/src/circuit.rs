//! Timed circuit representation with a strictly serial execution model.
//!
//! Label prefixes are part of the contract: `flag:`, `stab:`, `midcirc:`,
//! `verify:` and `frame:`. Post-selection and reporting key off them.

use crate::statevec::{Gate, GateKind, StateError};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

pub const DUR_1Q_US: f64 = 25.0;
pub const DUR_2Q_US: f64 = 322.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("qubit {index} out of range for {n} qubits")]
    OutOfRange { index: usize, n: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Gate(#[from] StateError),
    #[error("stored counts ({stored_2q}, {stored_mc}) do not match events ({actual_2q}, {actual_mc})")]
    CountMismatch { stored_2q: usize, stored_mc: usize, actual_2q: usize, actual_mc: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    Gate(Gate),
    MeasureDetect,
    Reset,
    ClassicalNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitEvent {
    pub kind: EventKind,
    pub targets: Vec<usize>,
    pub duration_us: f64,
    pub label: String,
}

impl CircuitEvent {
    pub fn gate(g: Gate, label: &str) -> CircuitEvent {
        let duration_us = match g.targets().len() {
            1 => DUR_1Q_US,
            _ => DUR_2Q_US,
        };
        CircuitEvent { targets: g.targets().to_vec(), kind: EventKind::Gate(g), duration_us, label: label.to_string() }
    }

    pub fn measure(targets: &[usize], label: &str) -> CircuitEvent {
        CircuitEvent { kind: EventKind::MeasureDetect, targets: targets.to_vec(), duration_us: 0.0, label: label.to_string() }
    }

    pub fn reset(targets: &[usize], label: &str) -> CircuitEvent {
        CircuitEvent { kind: EventKind::Reset, targets: targets.to_vec(), duration_us: 0.0, label: label.to_string() }
    }

    pub fn note(label: &str) -> CircuitEvent {
        CircuitEvent { kind: EventKind::ClassicalNote, targets: vec![], duration_us: 0.0, label: label.to_string() }
    }

    pub fn as_gate(&self) -> Option<&Gate> {
        match &self.kind {
            EventKind::Gate(g) => Some(g),
            _ => None,
        }
    }

    pub fn is_two_qubit_gate(&self) -> bool {
        matches!(&self.kind, EventKind::Gate(g) if g.targets().len() == 2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub name: String,
    pub n_qubits: usize,
    pub events: Vec<CircuitEvent>,
    pub two_qubit_count: usize,
    pub midcirc_count: usize,
}

/// One serial time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub event: usize,
    pub active: Vec<usize>,
    pub idle: Vec<usize>,
    pub duration_us: f64,
}

impl Circuit {
    pub fn new(name: &str, n_qubits: usize) -> Circuit {
        Circuit { name: name.to_string(), n_qubits, events: Vec::new(), two_qubit_count: 0, midcirc_count: 0 }
    }

    pub fn push(&mut self, ev: CircuitEvent) -> Result<(), CircuitError> {
        for &t in &ev.targets {
            if t >= self.n_qubits {
                return Err(CircuitError::OutOfRange { index: t, n: self.n_qubits });
            }
        }
        if ev.is_two_qubit_gate() {
            self.two_qubit_count += 1;
        }
        if self.is_midcirc(&ev) {
            self.midcirc_count += 1;
        }
        self.events.push(ev);
        Ok(())
    }

    pub fn gate(&mut self, kind: GateKind, targets: &[usize], label: &str) -> Result<(), CircuitError> {
        self.push(CircuitEvent::gate(Gate::new(kind, targets)?, label))
    }

    fn is_midcirc(&self, ev: &CircuitEvent) -> bool {
        matches!(ev.kind, EventKind::MeasureDetect) && ev.targets.len() < self.n_qubits
    }

    pub fn is_midcirc_event(&self, idx: usize) -> bool {
        self.is_midcirc(&self.events[idx])
    }

    /// Qubits not detected by the detection event at `idx`.
    pub fn hidden_qubits(&self, idx: usize) -> Vec<usize> {
        let ev = &self.events[idx];
        (0..self.n_qubits).filter(|q| !ev.targets.contains(q)).collect()
    }

    /// Recomputed (two-qubit gates, mid-circuit detections).
    pub fn count_resources(&self) -> (usize, usize) {
        let tq = self.events.iter().filter(|e| e.is_two_qubit_gate()).count();
        let mc = self.events.iter().filter(|e| self.is_midcirc(e)).count();
        (tq, mc)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let (a, b) = self.count_resources();
        if (a, b) != (self.two_qubit_count, self.midcirc_count) {
            return Err(CircuitError::CountMismatch {
                stored_2q: self.two_qubit_count,
                stored_mc: self.midcirc_count,
                actual_2q: a,
                actual_mc: b,
            });
        }
        Ok(())
    }

    /// Serial timeline: one slot per event; every other qubit idles for its duration.
    pub fn schedule(&self) -> Vec<Slot> {
        self.events
            .iter()
            .enumerate()
            .map(|(i, e)| Slot {
                event: i,
                active: e.targets.clone(),
                idle: (0..self.n_qubits).filter(|q| !e.targets.contains(q)).collect(),
                duration_us: e.duration_us,
            })
            .collect()
    }

    /// Append `other` (same register).
    pub fn extend(&mut self, other: &Circuit) -> Result<(), CircuitError> {
        for e in &other.events {
            self.push(e.clone())?;
        }
        Ok(())
    }

    /// Line-oriented text form with 1-based qubit indices.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NAME {}", self.name);
        let _ = writeln!(s, "QUBITS {}", self.n_qubits);
        for e in &self.events {
            let t: Vec<String> = e.targets.iter().map(|q| (q + 1).to_string()).collect();
            let head = match &e.kind {
                EventKind::Gate(g) => format!("GATE {} {}", g.kind().name(), t.join(" ")),
                EventKind::MeasureDetect => format!("MDETECT {}", t.join(" ")),
                EventKind::Reset => format!("RESET {}", t.join(" ")),
                EventKind::ClassicalNote => "NOTE".to_string(),
            };
            if e.label.is_empty() {
                let _ = writeln!(s, "{head}");
            } else {
                let _ = writeln!(s, "{head} ; {}", e.label);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit, CircuitError> {
        let mut name = String::new();
        let mut circ: Option<Circuit> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let perr = |msg: &str| CircuitError::Parse { line, msg: msg.to_string() };
            let (body, label) = match raw.split_once(';') {
                Some((b, l)) => (b.trim(), l.trim()),
                None => (raw.trim(), ""),
            };
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let mut toks = body.split_whitespace();
            let head = toks.next().unwrap_or_default();
            match head {
                "NAME" => name = toks.collect::<Vec<_>>().join(" "),
                "QUBITS" => {
                    let n: usize = toks.next().and_then(|t| t.parse().ok()).ok_or_else(|| perr("bad qubit count"))?;
                    circ = Some(Circuit::new(&name, n));
                }
                _ => {
                    let c = circ.as_mut().ok_or_else(|| perr("QUBITS must precede events"))?;
                    let kind_tok = if head == "GATE" { Some(toks.next().ok_or_else(|| perr("missing gate kind"))?) } else { None };
                    let targets = toks
                        .map(|t| t.parse::<usize>().ok().filter(|&q| q >= 1).map(|q| q - 1))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| perr("bad qubit index"))?;
                    let ev = match head {
                        "GATE" => {
                            let k = GateKind::parse(kind_tok.unwrap_or_default()).ok_or_else(|| perr("unknown gate"))?;
                            CircuitEvent::gate(Gate::new(k, &targets)?, label)
                        }
                        "MDETECT" => CircuitEvent::measure(&targets, label),
                        "RESET" => CircuitEvent::reset(&targets, label),
                        "NOTE" => CircuitEvent::note(label),
                        _ => return Err(perr("unknown event")),
                    };
                    c.push(ev).map_err(|e| match e {
                        CircuitError::OutOfRange { .. } => perr("qubit out of range"),
                        other => other,
                    })?;
                }
            }
        }
        circ.ok_or(CircuitError::Parse { line: 0, msg: "missing QUBITS line".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cnot_slot() {
        let mut c = Circuit::new("t", 3);
        c.gate(GateKind::Cnot, &[0, 1], "").unwrap();
        let s = c.schedule();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].idle, vec![2]);
        assert_eq!(s[0].duration_us, 322.5);
        assert_eq!(c.count_resources(), (1, 0));
        assert!(Circuit::new("e", 2).schedule().is_empty());
    }

    #[test]
    fn text_roundtrip() {
        let mut c = Circuit::new("demo", 4);
        c.push(CircuitEvent::reset(&[0, 1, 2, 3], "")).unwrap();
        c.gate(GateKind::H, &[0], "").unwrap();
        c.gate(GateKind::Cnot, &[0, 3], "stab:B_Z4").unwrap();
        c.push(CircuitEvent::measure(&[3], "midcirc:1")).unwrap();
        c.gate(GateKind::Rx(0.5), &[1], "").unwrap();
        c.push(CircuitEvent::note("frame:x")).unwrap();
        let t = c.to_text();
        assert!(t.contains("GATE CNOT 1 4 ; stab:B_Z4"));
        let back = Circuit::from_text(&t).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.count_resources(), (1, 1));
    }

    #[test]
    fn parse_errors() {
        assert!(Circuit::from_text("QUBITS 2\nGATE CNOT 1 3").is_err());
        assert!(Circuit::from_text("QUBITS 2\nGATE FOO 1").is_err());
        assert!(Circuit::from_text("GATE H 1").is_err());
        assert!(Circuit::from_text("QUBITS 2\nMDETECT 0").is_err());
    }
}
