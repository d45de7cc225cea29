//! Trajectory executor.
//!
//! Only qubits that are actually in superposition live in the state vector.
//! Everything else is a classical bit: diagonal gates on it are global phases,
//! X-type faults flip it and classical controls reduce multi-qubit gates. A qubit
//! whose next event is a detection is measured right after its last gate, which
//! keeps the vector small; later Pauli faults on it just flip the stored bit.
//!
//! Execution is resumable. In forced mode a random measurement stops with
//! [`Step::Branch`] so a caller can clone the trajectory and follow both outcomes.

use crate::circuit::EventKind;
use crate::noise::{sample_faults, FaultEvent, NoiseParams};
use crate::program::{Program, Protocol};
use crate::scalar::Real;
use crate::statevec::{gate, GateKind, StateError, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("forced outcome {bit} has zero probability")]
    ImpossibleBranch { bit: u8 },
}

/// Precomputed per-program tables.
#[derive(Debug, Clone)]
pub struct ExecPlan {
    /// Qubits to measure right after gate event i.
    pub collapse_after: Vec<Vec<usize>>,
    /// Bit id of each target of detection event i.
    pub detect_bits: Vec<Vec<usize>>,
}

impl ExecPlan {
    pub fn new(p: &Program) -> ExecPlan {
        let evs = &p.circuit.events;
        let n = p.circuit.n_qubits;
        let mut collapse_after = vec![Vec::new(); evs.len()];
        // next[q]: kind of the next event touching q, scanning backwards
        let mut next_is_detect = vec![false; n];
        for (i, ev) in evs.iter().enumerate().rev() {
            match &ev.kind {
                EventKind::Gate(_) => {
                    for &q in &ev.targets {
                        if next_is_detect[q] {
                            collapse_after[i].push(q);
                        }
                        next_is_detect[q] = false;
                    }
                }
                EventKind::MeasureDetect => {
                    for &q in &ev.targets {
                        next_is_detect[q] = true;
                    }
                }
                EventKind::Reset => {
                    for &q in &ev.targets {
                        next_is_detect[q] = false;
                    }
                }
                EventKind::ClassicalNote => {}
            }
        }
        let mut detect_bits = vec![Vec::new(); evs.len()];
        for (b, src) in p.bits.iter().enumerate() {
            detect_bits[src.event].push(b);
        }
        ExecPlan { collapse_after, detect_bits }
    }

    /// Like [`ExecPlan::new`] but qubits read by the final detection stay coherent,
    /// so the final outcome distribution can be read off the amplitudes.
    pub fn keep_final_coherent(p: &Program) -> ExecPlan {
        let mut plan = ExecPlan::new(p);
        let fin = p.final_event();
        let evs = &p.circuit.events;
        let mut next_final = vec![false; p.circuit.n_qubits];
        for q in &evs[fin].targets {
            next_final[*q] = true;
        }
        for i in (0..fin).rev() {
            let ev = &evs[i];
            if matches!(ev.kind, EventKind::Gate(_)) {
                plan.collapse_after[i].retain(|q| !next_final[*q]);
            }
            if !matches!(ev.kind, EventKind::ClassicalNote) {
                for &q in &ev.targets {
                    next_final[q] = false;
                }
            }
        }
        plan
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// Reached the requested stop position.
    Done,
    /// A measurement needs an outcome: call [`Trajectory::force`] and resume.
    Branch { qubit: usize, p1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Before,
    Body,
    After,
    Collapse,
}

/// Where measurement outcomes come from.
pub enum Outcomes<'r> {
    Sample(&'r mut ChaCha8Rng),
    Forced,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    n: usize,
    sv: StateVector<T>,
    slot: Vec<Option<usize>>,
    owner: Vec<usize>,
    val: Vec<u8>,
    pub bits: Vec<u8>,
    pos: usize,
    phase: Phase,
    sub: usize,
    faults: Vec<FaultEvent>,
    fcur: usize,
    forced: Option<u8>,
    /// Product of forced branch probabilities.
    pub weight: f64,
    /// Measure qubits early after their last gate.
    pub early_collapse: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn new(p: &Program) -> Trajectory<T> {
        let n = p.circuit.n_qubits;
        Trajectory {
            n,
            sv: StateVector::zero(0).expect("empty register"),
            slot: vec![None; n],
            owner: Vec::new(),
            val: vec![0; n],
            bits: vec![0; p.bits.len()],
            pos: 0,
            phase: Phase::Before,
            sub: 0,
            faults: Vec::new(),
            fcur: 0,
            forced: None,
            weight: 1.0,
            early_collapse: true,
        }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn active_qubits(&self) -> usize {
        self.sv.n()
    }

    /// Queue faults; they must be sorted by position and not precede the cursor.
    pub fn add_faults(&mut self, mut f: Vec<FaultEvent>) {
        self.faults.append(&mut f);
    }

    /// Continue on another program with an identical prefix (live branching).
    pub fn switch_program(&mut self, p: &Program) {
        self.bits.resize(p.bits.len(), 0);
    }

    pub fn force(&mut self, bit: u8) {
        self.forced = Some(bit);
    }

    fn activate(&mut self, q: usize) -> Result<usize, ExecError> {
        if let Some(k) = self.slot[q] {
            return Ok(k);
        }
        self.sv.push_qubit(self.val[q])?;
        let k = self.sv.n() - 1;
        self.slot[q] = Some(k);
        self.owner.push(q);
        Ok(k)
    }

    fn apply1(&mut self, kind: GateKind, q: usize) -> Result<(), ExecError> {
        match self.slot[q] {
            None if kind.is_diagonal() => Ok(()),
            None if matches!(kind, GateKind::X | GateKind::Y) => {
                self.val[q] ^= 1;
                Ok(())
            }
            _ => {
                let k = self.activate(q)?;
                self.sv.apply_gate(&gate(kind, &[k]))?;
                Ok(())
            }
        }
    }

    fn apply_gate(&mut self, kind: GateKind, t: &[usize]) -> Result<(), ExecError> {
        match kind {
            GateKind::Cnot => {
                let (c, x) = (t[0], t[1]);
                match self.slot[c] {
                    None => {
                        if self.val[c] == 1 {
                            self.apply1(GateKind::X, x)?;
                        }
                        Ok(())
                    }
                    Some(kc) => {
                        let kx = self.activate(x)?;
                        self.sv.apply_gate(&gate(GateKind::Cnot, &[kc, kx]))?;
                        Ok(())
                    }
                }
            }
            GateKind::Cz | GateKind::Ccz => {
                let mut quantum = Vec::new();
                for &q in t {
                    match self.slot[q] {
                        None if self.val[q] == 0 => return Ok(()),
                        None => {}
                        Some(k) => quantum.push(k),
                    }
                }
                let reduced = match quantum.len() {
                    0 => return Ok(()),
                    1 => GateKind::Z,
                    2 => GateKind::Cz,
                    _ => GateKind::Ccz,
                };
                self.sv.apply_gate(&gate(reduced, &quantum))?;
                Ok(())
            }
            k => self.apply1(k, t[0]),
        }
    }

    fn apply_fault(&mut self, f: &FaultEvent) -> Result<(), ExecError> {
        let (x, z) = (f.pauli.x_bits(), f.pauli.z_bits());
        for q in 0..self.n {
            let (xb, zb) = (x >> q & 1 == 1, z >> q & 1 == 1);
            let kind = match (xb, zb) {
                (false, false) => continue,
                (true, false) => GateKind::X,
                (true, true) => GateKind::Y,
                (false, true) => GateKind::Z,
            };
            self.apply1(kind, q)?;
        }
        Ok(())
    }

    /// Measure an active qubit (or read a classical one) and leave it classical.
    fn measure(&mut self, q: usize, out: &mut Outcomes<'_>) -> Result<Option<u8>, ExecError> {
        let Some(k) = self.slot[q] else { return Ok(Some(self.val[q])) };
        let p1 = self.sv.prob_one(k)?.to_f64().unwrap_or(0.0);
        let tol = T::norm_tol().to_f64().unwrap_or(1e-10);
        let bit = if p1 <= tol {
            0
        } else if p1 >= 1.0 - tol {
            1
        } else {
            match out {
                Outcomes::Sample(rng) => (rng.random::<f64>() < p1) as u8,
                Outcomes::Forced => match self.forced.take() {
                    Some(b) => {
                        self.weight *= if b == 1 { p1 } else { 1.0 - p1 };
                        b
                    }
                    None => return Ok(None),
                },
            }
        };
        self.sv.project(k, bit).map_err(|_| ExecError::ImpossibleBranch { bit })?;
        self.sv.remove_qubit(k, bit)?;
        self.owner.remove(k);
        self.slot[q] = None;
        for (j, &o) in self.owner.iter().enumerate().skip(k) {
            self.slot[o] = Some(j);
        }
        self.val[q] = bit;
        Ok(Some(bit))
    }

    fn branch_at(&self, q: usize) -> Step {
        let k = self.slot[q].expect("active");
        let p1 = self.sv.prob_one(k).ok().and_then(|p| p.to_f64()).unwrap_or(0.5);
        Step::Branch { qubit: q, p1 }
    }

    fn faults_here(&mut self, before: bool) -> Result<(), ExecError> {
        let mut i = self.fcur;
        while i < self.faults.len() && self.faults[i].position == self.pos {
            if self.faults[i].source.acts_before() == before {
                let f = self.faults[i].clone();
                self.apply_fault(&f)?;
            }
            i += 1;
        }
        if !before {
            self.fcur = i;
        }
        Ok(())
    }

    /// Run events until position `stop` (exclusive).
    pub fn run(&mut self, p: &Program, plan: &ExecPlan, stop: usize, mut out: Outcomes<'_>) -> Result<Step, ExecError> {
        while self.pos < stop {
            let ev = &p.circuit.events[self.pos];
            match self.phase {
                Phase::Before => {
                    self.faults_here(true)?;
                    self.phase = Phase::Body;
                    self.sub = 0;
                }
                Phase::Body => {
                    match &ev.kind {
                        EventKind::Gate(g) => self.apply_gate(*g.kind(), g.targets())?,
                        EventKind::MeasureDetect => {
                            while self.sub < ev.targets.len() {
                                let q = ev.targets[self.sub];
                                match self.measure(q, &mut out)? {
                                    Some(b) => self.bits[plan.detect_bits[self.pos][self.sub]] = b,
                                    None => return Ok(self.branch_at(q)),
                                }
                                self.sub += 1;
                            }
                        }
                        EventKind::Reset => {
                            while self.sub < ev.targets.len() {
                                let q = ev.targets[self.sub];
                                if self.measure(q, &mut out)?.is_none() {
                                    return Ok(self.branch_at(q));
                                }
                                self.val[q] = 0;
                                self.sub += 1;
                            }
                        }
                        EventKind::ClassicalNote => {}
                    }
                    self.phase = Phase::After;
                }
                Phase::After => {
                    self.faults_here(false)?;
                    self.phase = Phase::Collapse;
                    self.sub = 0;
                }
                Phase::Collapse => {
                    if self.early_collapse {
                        let list = &plan.collapse_after[self.pos];
                        while self.sub < list.len() {
                            let q = list[self.sub];
                            if self.measure(q, &mut out)?.is_none() {
                                return Ok(self.branch_at(q));
                            }
                            self.sub += 1;
                        }
                    }
                    self.pos += 1;
                    self.phase = Phase::Before;
                }
            }
        }
        Ok(Step::Done)
    }

    /// Apply pending faults at the current position that act before its event.
    pub fn apply_before_faults(&mut self) -> Result<(), ExecError> {
        if self.phase == Phase::Before {
            self.faults_here(true)?;
            self.phase = Phase::Body;
            self.sub = 0;
        }
        Ok(())
    }

    /// Measure `q` now (forced mode branches like a detection).
    pub fn measure_now(&mut self, q: usize) -> Result<Option<u8>, ExecError> {
        self.measure(q, &mut Outcomes::Forced)
    }

    pub fn classical_value(&self, q: usize) -> Option<u8> {
        match self.slot[q] {
            None => Some(self.val[q]),
            Some(_) => None,
        }
    }

    /// Apply a Pauli (register indexing) to the current state.
    pub fn apply_pauli(&mut self, p: &crate::pauli::PauliString) -> Result<(), ExecError> {
        self.apply_fault(&FaultEvent { position: self.pos, pauli: p.clone(), source: crate::noise::FaultSource::Gate1q })
    }

    /// Joint distribution of the computational-basis values of `qubits`, summed
    /// over everything else. Outcomes below `tol` are dropped.
    pub fn outcome_distribution(&self, qubits: &[usize], tol: f64) -> Vec<(Vec<u8>, f64)> {
        let mut acc: std::collections::BTreeMap<Vec<u8>, f64> = std::collections::BTreeMap::new();
        for (i, a) in self.sv.amplitudes().iter().enumerate() {
            let p = a.norm_sqr().to_f64().unwrap_or(0.0);
            if p <= tol {
                continue;
            }
            let vals: Vec<u8> = qubits
                .iter()
                .map(|&q| match self.slot[q] {
                    Some(k) => (i >> k & 1) as u8,
                    None => self.val[q],
                })
                .collect();
            *acc.entry(vals).or_insert(0.0) += p;
        }
        acc.into_iter().collect()
    }

    /// State of `qubits` (in the given order) when every other qubit is classical.
    pub fn extract(&self, qubits: &[usize]) -> Result<StateVector<T>, ExecError> {
        let mut local: Vec<Option<usize>> = vec![None; self.sv.n()];
        for (j, &q) in qubits.iter().enumerate() {
            if let Some(k) = self.slot[q] {
                local[k] = Some(j);
            }
        }
        if local.iter().any(|l| l.is_none()) {
            return Err(ExecError::State(StateError::NotClassical(usize::MAX)));
        }
        let mut base = 0usize;
        for (j, &q) in qubits.iter().enumerate() {
            if self.slot[q].is_none() && self.val[q] == 1 {
                base |= 1 << j;
            }
        }
        let zero = num_complex::Complex::new(T::zero(), T::zero());
        let mut amps = vec![zero; 1 << qubits.len()];
        for (i, a) in self.sv.amplitudes().iter().enumerate() {
            let mut idx = base;
            for (k, l) in local.iter().enumerate() {
                if i >> k & 1 == 1 {
                    idx |= 1 << l.expect("mapped");
                }
            }
            amps[idx] = *a;
        }
        Ok(StateVector::from_amplitudes(amps)?)
    }
}

/// How a branching protocol is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMode {
    /// Decide at the branch point from the measured bits.
    Live,
    /// Run one branch throughout and reject shots whose bits contradict it.
    Emulated(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotOutcome {
    pub program: usize,
    pub bits: Vec<u8>,
    pub n_faults: usize,
    /// False when an emulated branch assumption was contradicted.
    pub branch_ok: bool,
}

/// Per-protocol execution tables.
#[derive(Debug, Clone)]
pub struct PreparedProtocol {
    pub protocol: Protocol,
    pub plans: Vec<ExecPlan>,
}

impl PreparedProtocol {
    pub fn new(protocol: Protocol) -> PreparedProtocol {
        let plans = protocol.programs.iter().map(ExecPlan::new).collect();
        PreparedProtocol { protocol, plans }
    }
}

/// Seed one reproducible stream: stream `2i` for faults and `2i+1` for measurements.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// One noisy shot.
pub fn run_shot<T: Real>(
    pp: &PreparedProtocol,
    noise: &NoiseParams,
    mode: BranchMode,
    fault_rng: &mut ChaCha8Rng,
    meas_rng: &mut ChaCha8Rng,
) -> Result<ShotOutcome, ExecError> {
    let proto = &pp.protocol;
    let (first, branch_at) = match (&proto.branch, mode) {
        (Some(b), BranchMode::Live) => (0, Some(b.at)),
        (Some(_), BranchMode::Emulated(k)) => (k.min(proto.programs.len() - 1), None),
        (None, _) => (0, None),
    };
    let p0 = &proto.programs[first];
    let mut traj = Trajectory::<T>::new(p0);
    let fs = p0.fault_start;
    let stop0 = branch_at.unwrap_or(p0.circuit.events.len());
    let f = sample_faults(&p0.circuit, noise, fault_rng, fs.min(stop0)..stop0);
    let mut n_faults = f.len();
    traj.add_faults(f);
    traj.run(p0, &pp.plans[first], stop0, Outcomes::Sample(meas_rng))?;
    let mut program = first;
    if let Some(at) = branch_at {
        let b = proto.branch.as_ref().expect("branch");
        program = b.choose(&traj.bits);
        let p = &proto.programs[program];
        traj.switch_program(p);
        let f = sample_faults(&p.circuit, noise, fault_rng, at.max(p.fault_start)..p.circuit.events.len());
        n_faults += f.len();
        traj.add_faults(f);
        traj.run(p, &pp.plans[program], p.circuit.events.len(), Outcomes::Sample(meas_rng))?;
    }
    let branch_ok = match (&proto.branch, mode) {
        (Some(b), BranchMode::Emulated(k)) => b.choose(&traj.bits) == k.min(proto.programs.len() - 1),
        _ => true,
    };
    Ok(ShotOutcome { program, bits: traj.bits, n_faults, branch_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitEvent;
    use crate::program::{BitSource, Program};

    fn bell_program() -> Program {
        let mut c = crate::circuit::Circuit::new("bell", 3);
        c.push(CircuitEvent::reset(&[0, 1, 2], "")).unwrap();
        c.gate(GateKind::H, &[0], "").unwrap();
        c.gate(GateKind::Cnot, &[0, 1], "").unwrap();
        c.gate(GateKind::X, &[2], "").unwrap();
        c.push(CircuitEvent::measure(&[0, 1, 2], "final")).unwrap();
        Program {
            circuit: c,
            bits: (0..3).map(|q| BitSource { event: 4, qubit: q }).collect(),
            checks: vec![],
            frames: vec![],
            outputs: vec![],
            segments: vec![],
            fault_start: 0,
            rotated: false,
        }
    }

    #[test]
    fn bell_correlated_and_classical_x() {
        let pp = PreparedProtocol::new(Protocol::single("bell", bell_program()));
        let mut ones = 0;
        for i in 0..200 {
            let (mut fr, mut mr) = (stream(7, 2 * i), stream(7, 2 * i + 1));
            let s = run_shot::<f64>(&pp, &NoiseParams::ideal(), BranchMode::Live, &mut fr, &mut mr).unwrap();
            assert_eq!(s.bits[0], s.bits[1]);
            assert_eq!(s.bits[2], 1);
            ones += s.bits[0] as usize;
        }
        assert!(ones > 60 && ones < 140, "{ones}");
    }

    #[test]
    fn forced_branches_cover_both_outcomes() {
        let p = bell_program();
        let plan = ExecPlan::new(&p);
        let mut t = Trajectory::<f64>::new(&p);
        let end = p.circuit.events.len();
        let st = t.run(&p, &plan, end, Outcomes::Forced).unwrap();
        let Step::Branch { p1, .. } = st else { panic!("expected a branch") };
        assert!((p1 - 0.5).abs() < 1e-12);
        for b in [0u8, 1] {
            let mut u = t.clone();
            u.force(b);
            assert_eq!(u.run(&p, &plan, end, Outcomes::Forced).unwrap(), Step::Done);
            assert_eq!(u.bits, vec![b, b, 1]);
            assert!((u.weight - 0.5).abs() < 1e-12);
        }
    }
}
