//! A circuit plus its classical program: measurement bit bookkeeping, parity
//! checks, deferred Pauli frames and output blocks.
//!
//! Protocols are assembled with [`Builder`], which owns a fixed register, hands out
//! ancillas under a cap, merges pending measurements greedily into detection
//! events and resolves everything into an immutable [`Program`] at the end.

use crate::circuit::{Circuit, CircuitError, CircuitEvent, EventKind};
use crate::codes::{AncRole, Basis, CodeKind, Fragment, QRef, ReadoutPlan};
use crate::pauli::{Pauli, PauliString};
use crate::statevec::{Gate, GateKind};
use std::ops::Range;
use thiserror::Error;

pub const REGISTER: usize = 16;
pub const MAX_ANCILLAS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("ancilla budget of {MAX_ANCILLAS} exceeded")]
    AncillaBudget,
    #[error("register exhausted: no free qubit")]
    RegisterFull,
    #[error("non-Clifford gate {gate} at event {event} follows a deferred Pauli frame")]
    NonCliffordAfterFrame { gate: String, event: usize },
    #[error("qubit {0} is not free")]
    QubitBusy(usize),
    #[error("handle {0} was already measured")]
    HandleMeasured(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Where a measurement bit comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitSource {
    pub event: usize,
    pub qubit: usize,
}

/// Reject unless the parity of `bits` equals `expect`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub bits: Vec<usize>,
    pub expect: u8,
}

/// A deferred switching operation. Component i is active when the parity of
/// `syndrome[i]` is 1; the table is linear so the applied Pauli is the product of
/// the active components.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub label: String,
    pub position: usize,
    pub syndrome: Vec<Vec<usize>>,
    /// Components at the frame position.
    pub entries: Vec<PauliString>,
    /// Components conjugated to just before the final detection.
    pub end_images: Vec<PauliString>,
    /// Later bits whose value each component flips.
    pub flips: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub code: CodeKind,
    pub qubits: Vec<usize>,
    pub basis: Option<Basis>,
    /// Readout bit per code qubit (final detection); empty without a basis.
    pub bits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub circuit: Circuit,
    pub bits: Vec<BitSource>,
    pub checks: Vec<Check>,
    pub frames: Vec<Frame>,
    pub outputs: Vec<OutputBlock>,
    pub segments: Vec<Segment>,
    /// Events before this index are noiseless input preparation.
    pub fault_start: usize,
    /// Built as the H dual of a program written for the unrotated code.
    pub rotated: bool,
}

/// Live-branching decision: branch 0 when every listed parity is 0, else branch 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub at: usize,
    pub parities: Vec<Vec<usize>>,
}

impl BranchSpec {
    pub fn choose(&self, bits: &[u8]) -> usize {
        let any = self.parities.iter().any(|p| p.iter().fold(0u8, |a, &b| a ^ bits[b]) == 1);
        any as usize
    }
}

/// One or two programs sharing a prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub name: String,
    pub programs: Vec<Program>,
    pub branch: Option<BranchSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReadout {
    pub code: CodeKind,
    pub basis: Basis,
    /// Frame-corrected readout bits in code-qubit order (bit q = code qubit q).
    pub bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub accepted: bool,
    pub reject_reason: Option<String>,
    pub bits: Vec<u8>,
    /// Active frame components, one u8 per component, per frame.
    pub frame_syndromes: Vec<Vec<u8>>,
    pub blocks: Vec<BlockReadout>,
}

impl Program {
    pub fn count_resources(&self) -> (usize, usize) {
        self.circuit.count_resources()
    }

    pub fn count_segment(&self, name: &str) -> Option<(usize, usize)> {
        let s = self.segments.iter().find(|s| s.name == name)?;
        let ev = &self.circuit.events[s.range.clone()];
        let tq = ev.iter().filter(|e| e.is_two_qubit_gate()).count();
        let mc = s.range.clone().filter(|&i| self.circuit.is_midcirc_event(i)).count();
        Some((tq, mc))
    }

    /// Apply frames in order, then evaluate checks and collect block readouts.
    pub fn interpret(&self, raw: &[u8]) -> Interpretation {
        let mut bits = raw.to_vec();
        let mut frame_syndromes = Vec::with_capacity(self.frames.len());
        for f in &self.frames {
            let mut active = Vec::with_capacity(f.syndrome.len());
            for (i, s) in f.syndrome.iter().enumerate() {
                let a = s.iter().fold(0u8, |acc, &b| acc ^ bits[b]);
                if a == 1 {
                    for &b in &f.flips[i] {
                        bits[b] ^= 1;
                    }
                }
                active.push(a);
            }
            frame_syndromes.push(active);
        }
        let mut reject_reason = None;
        for c in &self.checks {
            let p = c.bits.iter().fold(0u8, |acc, &b| acc ^ bits[b]);
            if p != c.expect {
                reject_reason = Some(c.label.clone());
                break;
            }
        }
        let blocks = self
            .outputs
            .iter()
            .filter_map(|o| {
                let basis = o.basis?;
                let v = o.bits.iter().enumerate().fold(0u64, |acc, (q, &b)| acc | ((bits[b] as u64) << q));
                Some(BlockReadout { code: o.code, basis, bits: v })
            })
            .collect();
        Interpretation { accepted: reject_reason.is_none(), reject_reason, bits, frame_syndromes, blocks }
    }

    /// Index of the final detection event.
    pub fn final_event(&self) -> usize {
        self.circuit.events.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Free,
    Data(usize),
    Busy(usize),
}

#[derive(Debug, Clone)]
struct HandleState {
    qubit: usize,
    bit: Option<usize>,
}

#[derive(Debug, Clone)]
struct BlockState {
    code: CodeKind,
    qubits: Vec<usize>,
}

#[derive(Debug, Clone)]
struct FrameDraft {
    label: String,
    position: usize,
    syndrome: Vec<Vec<Handle>>,
    entries: Vec<PauliString>,
}

/// Reference to a future measurement bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone)]
pub struct Builder {
    n: usize,
    circ: Circuit,
    roles: Vec<Role>,
    blocks: Vec<BlockState>,
    handles: Vec<HandleState>,
    bits: Vec<BitSource>,
    checks: Vec<(String, Vec<Handle>, u8)>,
    frames: Vec<FrameDraft>,
    segments: Vec<Segment>,
    open_segment: Option<(String, usize)>,
    midcirc_label: usize,
    fault_start: usize,
}

impl Builder {
    pub fn new(name: &str) -> Builder {
        Builder::with_register(name, REGISTER)
    }

    pub fn with_register(name: &str, n: usize) -> Builder {
        let mut circ = Circuit::new(name, n);
        let all: Vec<usize> = (0..n).collect();
        circ.push(CircuitEvent::reset(&all, "init")).expect("in range");
        Builder {
            n,
            circ,
            roles: vec![Role::Free; n],
            blocks: Vec::new(),
            handles: Vec::new(),
            bits: Vec::new(),
            checks: Vec::new(),
            frames: Vec::new(),
            segments: Vec::new(),
            open_segment: None,
            midcirc_label: 0,
            fault_start: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn position(&self) -> usize {
        self.circ.events.len()
    }

    /// Everything emitted so far is treated as noiseless input preparation.
    pub fn mark_fault_start(&mut self) {
        self.fault_start = self.position();
    }

    pub fn begin_segment(&mut self, name: &str) {
        self.open_segment = Some((name.to_string(), self.position()));
    }

    pub fn end_segment(&mut self) {
        if let Some((name, start)) = self.open_segment.take() {
            self.segments.push(Segment { name, range: start..self.position() });
        }
    }

    fn ancillas_in_use(&self) -> usize {
        self.roles.iter().filter(|r| matches!(r, Role::Busy(_))).count()
    }

    fn lowest_free(&self) -> Option<usize> {
        self.roles.iter().position(|r| *r == Role::Free)
    }

    /// Claim qubits for a new code block (lowest free qubits when `at` is None).
    pub fn alloc_block(&mut self, code: CodeKind, at: Option<&[usize]>) -> Result<BlockId, BuildError> {
        let id = self.blocks.len();
        let qubits: Vec<usize> = match at {
            Some(q) => q.to_vec(),
            None => {
                if self.roles.iter().filter(|r| **r == Role::Free).count() < code.n() {
                    self.flush()?;
                }
                let free: Vec<usize> = (0..self.n).filter(|&q| self.roles[q] == Role::Free).take(code.n()).collect();
                if free.len() < code.n() {
                    return Err(BuildError::RegisterFull);
                }
                free
            }
        };
        for &q in &qubits {
            if self.roles[q] != Role::Free {
                return Err(BuildError::QubitBusy(q));
            }
            self.roles[q] = Role::Data(id);
        }
        self.blocks.push(BlockState { code, qubits });
        Ok(BlockId(id))
    }

    pub fn block_qubits(&self, b: BlockId) -> &[usize] {
        &self.blocks[b.0].qubits
    }

    pub fn block_code(&self, b: BlockId) -> CodeKind {
        self.blocks[b.0].code
    }

    /// Reinterpret a block as a different code on the first `code.n()` qubits,
    /// releasing nothing (the caller measures the rest).
    pub fn retarget_block(&mut self, b: BlockId, code: CodeKind) {
        let st = &mut self.blocks[b.0];
        st.code = code;
        st.qubits.truncate(code.n());
    }

    /// Grow a block by claiming extra qubits (e.g. the bulk qubits for A -> B).
    pub fn extend_block(&mut self, b: BlockId, code: CodeKind, extra: usize) -> Result<Vec<usize>, BuildError> {
        let mut got = Vec::new();
        for _ in 0..extra {
            let q = self.lowest_free().ok_or(BuildError::RegisterFull)?;
            self.roles[q] = Role::Data(b.0);
            got.push(q);
        }
        let st = &mut self.blocks[b.0];
        st.qubits.extend(got.iter().copied());
        st.code = code;
        Ok(got)
    }

    fn alloc_ancilla(&mut self) -> Result<Handle, BuildError> {
        if self.ancillas_in_use() >= MAX_ANCILLAS {
            return Err(BuildError::AncillaBudget);
        }
        let q = self.lowest_free().ok_or(BuildError::RegisterFull)?;
        let h = Handle(self.handles.len());
        self.handles.push(HandleState { qubit: q, bit: None });
        self.roles[q] = Role::Busy(h.0);
        Ok(h)
    }

    /// Allocate `k` fresh ancillas, flushing pending measurements first when the
    /// budget would otherwise be exceeded.
    fn reserve(&mut self, k: usize) -> Result<(), BuildError> {
        if k > MAX_ANCILLAS {
            return Err(BuildError::AncillaBudget);
        }
        if self.ancillas_in_use() + k > MAX_ANCILLAS || self.roles.iter().filter(|r| **r == Role::Free).count() < k {
            self.flush()?;
        }
        if self.roles.iter().filter(|r| **r == Role::Free).count() < k {
            return Err(BuildError::RegisterFull);
        }
        Ok(())
    }

    pub fn gate(&mut self, kind: GateKind, qubits: &[usize], label: &str) -> Result<(), BuildError> {
        self.circ.push(CircuitEvent::gate(Gate::new(kind, qubits).map_err(CircuitError::from)?, label))?;
        Ok(())
    }

    pub fn block_gate(&mut self, b: BlockId, kind: GateKind, code_qubits: &[usize], label: &str) -> Result<(), BuildError> {
        let q: Vec<usize> = code_qubits.iter().map(|&i| self.blocks[b.0].qubits[i]).collect();
        self.gate(kind, &q, label)
    }

    pub fn note(&mut self, label: &str) -> Result<(), BuildError> {
        self.circ.push(CircuitEvent::note(label))?;
        Ok(())
    }

    /// Emit a fragment on a block. `bind[k] = Some(h)` places fragment ancilla k on
    /// the qubit of an existing unmeasured handle. Flag ancillas get a reject check.
    pub fn apply_fragment(&mut self, b: BlockId, frag: &Fragment, bind: &[Option<Handle>]) -> Result<Vec<Handle>, BuildError> {
        let fresh = (0..frag.ancillas.len()).filter(|&k| bind.get(k).copied().flatten().is_none()).count();
        self.reserve(fresh)?;
        let mut hs = Vec::with_capacity(frag.ancillas.len());
        for k in 0..frag.ancillas.len() {
            match bind.get(k).copied().flatten() {
                Some(h) => {
                    if self.handles[h.0].bit.is_some() {
                        return Err(BuildError::HandleMeasured(h.0));
                    }
                    hs.push(h)
                }
                None => hs.push(self.alloc_ancilla()?),
            }
        }
        let data = self.blocks[b.0].qubits.clone();
        for op in &frag.ops {
            let q: Vec<usize> = op
                .qubits
                .iter()
                .map(|r| match r {
                    QRef::D(i) => data[*i],
                    QRef::A(a) => self.handles[hs[*a].0].qubit,
                })
                .collect();
            self.gate(op.kind, &q, &op.label)?;
        }
        for (k, a) in frag.ancillas.iter().enumerate() {
            if a.role == AncRole::Flag && !self.checks.iter().any(|(_, h, _)| h.len() == 1 && h[0] == hs[k]) {
                self.checks.push((a.label.clone(), vec![hs[k]], 0));
            }
        }
        Ok(hs)
    }

    /// Measure data qubits of a block in the X or Z basis; the qubits leave the block.
    pub fn measure_block_qubits(&mut self, b: BlockId, code_qubits: &[usize], basis: Basis, label: &str) -> Result<Vec<Handle>, BuildError> {
        let phys: Vec<usize> = code_qubits.iter().map(|&i| self.blocks[b.0].qubits[i]).collect();
        let mut hs = Vec::new();
        for &q in &phys {
            match basis {
                Basis::X => self.gate(GateKind::H, &[q], label)?,
                Basis::Y => {
                    self.gate(GateKind::Sdag, &[q], label)?;
                    self.gate(GateKind::H, &[q], label)?;
                }
                Basis::Z => {}
            }
            let h = Handle(self.handles.len());
            self.handles.push(HandleState { qubit: q, bit: None });
            self.roles[q] = Role::Busy(h.0);
            hs.push(h);
        }
        let st = &mut self.blocks[b.0];
        st.qubits.retain(|q| !phys.contains(q));
        Ok(hs)
    }

    /// Detect every non-data qubit (pending and free) in one event and reset them.
    pub fn flush(&mut self) -> Result<(), BuildError> {
        let targets: Vec<usize> = (0..self.n).filter(|&q| !matches!(self.roles[q], Role::Data(_))).collect();
        if !self.roles.iter().any(|r| matches!(r, Role::Busy(_))) {
            return Ok(());
        }
        self.midcirc_label += 1;
        let label = format!("midcirc:{}", self.midcirc_label);
        let ev = self.position();
        self.circ.push(CircuitEvent::measure(&targets, &label))?;
        self.record_bits(ev, &targets);
        self.circ.push(CircuitEvent::reset(&targets, &label))?;
        for q in targets {
            self.roles[q] = Role::Free;
        }
        Ok(())
    }

    fn record_bits(&mut self, event: usize, targets: &[usize]) {
        for &q in targets {
            let bit = self.bits.len();
            self.bits.push(BitSource { event, qubit: q });
            if let Role::Busy(h) = self.roles[q] {
                self.handles[h].bit = Some(bit);
            }
        }
    }

    /// Bit id of a handle once its detection has been emitted.
    pub fn bit_of(&self, h: Handle) -> Option<usize> {
        self.handles[h.0].bit
    }

    pub fn is_pending(&self, h: Handle) -> bool {
        self.handles[h.0].bit.is_none()
    }

    pub fn check(&mut self, label: &str, handles: &[Handle], expect: u8) {
        self.checks.push((label.to_string(), handles.to_vec(), expect));
    }

    /// Defer a switching operation: component i (a Pauli on register qubits) is
    /// applied when the parity of `syndrome[i]` is 1.
    pub fn frame(&mut self, label: &str, syndrome: Vec<Vec<Handle>>, entries: Vec<PauliString>) -> Result<(), BuildError> {
        self.note(&format!("frame:{label}"))?;
        self.frames.push(FrameDraft { label: label.to_string(), position: self.position(), syndrome, entries });
        Ok(())
    }

    /// Register-sized Pauli from code-qubit letters of a block.
    pub fn block_pauli(&self, b: BlockId, p: &PauliString) -> PauliString {
        let map = &self.blocks[b.0].qubits;
        let mut out = PauliString::identity(self.n);
        for q in p.support() {
            out.set(map[q], p.get(q)).expect("in range");
        }
        out
    }

    /// Emit readout rotations and the final detection, then resolve the program.
    pub fn finish(mut self, outputs: &[(BlockId, Option<Basis>)]) -> Result<Program, BuildError> {
        let mut blocks = Vec::new();
        for &(b, basis) in outputs {
            let st = self.blocks[b.0].clone();
            if let Some(basis) = basis {
                let plan: ReadoutPlan = st.code.spec().readout_plan(basis);
                for (i, &q) in st.qubits.iter().enumerate() {
                    match plan.letters[i] {
                        Pauli::X => self.gate(GateKind::H, &[q], "readout")?,
                        Pauli::Y => {
                            self.gate(GateKind::Sdag, &[q], "readout")?;
                            self.gate(GateKind::H, &[q], "readout")?;
                        }
                        _ => {}
                    }
                }
            }
            blocks.push((st, basis));
        }
        let all: Vec<usize> = (0..self.n).collect();
        let ev = self.position();
        self.circ.push(CircuitEvent::measure(&all, "final"))?;
        self.record_bits(ev, &all);
        let bit_of = |q: usize| -> usize { self.bits.iter().rposition(|b| b.qubit == q && b.event == ev).expect("final bit") };
        let outputs = blocks
            .into_iter()
            .map(|(st, basis)| OutputBlock {
                code: st.code,
                bits: if basis.is_some() { st.qubits.iter().map(|&q| bit_of(q)).collect() } else { Vec::new() },
                qubits: st.qubits,
                basis,
            })
            .collect();
        let resolve = |h: &Handle| self.handles[h.0].bit.expect("handle measured by the end");
        let checks = self
            .checks
            .iter()
            .map(|(label, hs, e)| Check { label: label.clone(), bits: hs.iter().map(resolve).collect(), expect: *e })
            .collect();
        let mut frames = Vec::new();
        for f in &self.frames {
            let syndrome = f.syndrome.iter().map(|s| s.iter().map(resolve).collect()).collect();
            let mut end_images = Vec::new();
            let mut flips = Vec::new();
            for e in &f.entries {
                let (img, fl) = propagate_frame(&self.circ, &self.bits, f.position, e)?;
                end_images.push(img);
                flips.push(fl);
            }
            frames.push(Frame { label: f.label.clone(), position: f.position, syndrome, entries: f.entries.clone(), end_images, flips });
        }
        Ok(Program {
            circuit: self.circ,
            bits: self.bits,
            checks,
            frames,
            outputs,
            segments: self.segments,
            fault_start: self.fault_start,
            rotated: false,
        })
    }
}

/// Conjugate a frame component through every later event. Returns its image just
/// before the final detection and the bits it flips.
fn propagate_frame(circ: &Circuit, bits: &[BitSource], from: usize, entry: &PauliString) -> Result<(PauliString, Vec<usize>), BuildError> {
    let mut p = entry.clone();
    let mut flips = Vec::new();
    let last = circ.events.len() - 1;
    for (i, ev) in circ.events.iter().enumerate().skip(from) {
        match &ev.kind {
            EventKind::Gate(g) => {
                if !g.kind().is_clifford() {
                    if p.is_identity() {
                        continue;
                    }
                    return Err(BuildError::NonCliffordAfterFrame { gate: g.kind().name(), event: i });
                }
                p = p.conjugate_by(g).expect("Clifford gate in range");
            }
            EventKind::MeasureDetect => {
                if i == last {
                    let img = p.clone();
                    for (b, src) in bits.iter().enumerate() {
                        if src.event == i && (p.x_bits() >> src.qubit) & 1 == 1 {
                            flips.push(b);
                        }
                    }
                    return Ok((img, flips));
                }
                for (b, src) in bits.iter().enumerate() {
                    if src.event == i && (p.x_bits() >> src.qubit) & 1 == 1 {
                        flips.push(b);
                    }
                }
            }
            EventKind::Reset => {
                for &q in &ev.targets {
                    p.set(q, Pauli::I).expect("in range");
                }
            }
            EventKind::ClassicalNote => {}
        }
    }
    Ok((p, flips))
}

impl Protocol {
    pub fn single(name: &str, p: Program) -> Protocol {
        Protocol { name: name.to_string(), programs: vec![p], branch: None }
    }

    pub fn main(&self) -> &Program {
        &self.programs[0]
    }
}

/// Rotate a whole program into the H-conjugated frame: each gate is conjugated by
/// H on all qubits, qubits start in |+> and are measured in X. Measurement records
/// and the classical program are unchanged, so noiseless statistics are identical
/// while Pauli noise acts with X and Z interchanged relative to the logic.
pub fn h_dual(p: &Program) -> Program {
    h_dual_mapped(p).0
}

/// H dual of every program of a protocol; the branch point moves with the map.
pub fn h_dual_protocol(p: &Protocol) -> Protocol {
    let mapped: Vec<(Program, Vec<usize>)> = p.programs.iter().map(h_dual_mapped).collect();
    let branch = p.branch.as_ref().map(|b| {
        let at = mapped[0].1[b.at];
        debug_assert!(mapped.iter().all(|(q, _)| q.circuit.events[..at] == mapped[0].0.circuit.events[..at]));
        BranchSpec { at, parities: b.parities.clone() }
    });
    Protocol { name: p.name.clone(), programs: mapped.into_iter().map(|m| m.0).collect(), branch }
}

fn h_dual_mapped(p: &Program) -> (Program, Vec<usize>) {
    let n = p.circuit.n_qubits;
    let mut evs: Vec<CircuitEvent> = Vec::new();
    // index map from old event to new event (for bits, frames, segments)
    // map[i]: first dual event of the unit for old event i; detect_at: the detection itself
    let mut map = vec![0usize; p.circuit.events.len() + 1];
    let mut detect_at = vec![0usize; p.circuit.events.len()];
    for (i, ev) in p.circuit.events.iter().enumerate() {
        match &ev.kind {
            EventKind::Gate(g) => {
                map[i] = evs.len();
                for (k, t) in dual_gate(g) {
                    evs.push(CircuitEvent::gate(Gate::new(k, &t).expect("valid"), &ev.label));
                }
            }
            EventKind::Reset => {
                evs.push(ev.clone());
                map[i] = evs.len() - 1;
                for &q in &ev.targets {
                    evs.push(CircuitEvent::gate(Gate::new(GateKind::H, &[q]).expect("valid"), "dual"));
                }
            }
            EventKind::MeasureDetect => {
                map[i] = evs.len();
                for &q in &ev.targets {
                    evs.push(CircuitEvent::gate(Gate::new(GateKind::H, &[q]).expect("valid"), "dual"));
                }
                detect_at[i] = evs.len();
                evs.push(ev.clone());
            }
            EventKind::ClassicalNote => {
                map[i] = evs.len();
                evs.push(ev.clone());
            }
        }
    }
    map[p.circuit.events.len()] = evs.len();
    let (evs, remap) = cancel_h_pairs(evs);
    let map: Vec<usize> = map.iter().map(|&i| remap[i]).collect();
    let detect_at: Vec<usize> = detect_at.iter().map(|&i| remap[i]).collect();
    let mut circ = Circuit::new(&format!("{}_dual", p.circuit.name), n);
    for e in evs {
        circ.push(e).expect("in range");
    }
    let hconj = |e: &PauliString| -> PauliString {
        PauliString::from_bits(e.n(), e.z_bits(), e.x_bits(), e.phase()).expect("same size")
    };
    let bits = p.bits.iter().map(|b| BitSource { event: detect_at[b.event], qubit: b.qubit }).collect::<Vec<_>>();
    let frames = p
        .frames
        .iter()
        .map(|f| {
            let entries: Vec<PauliString> = f.entries.iter().map(hconj).collect();
            let mut end_images = Vec::new();
            let mut flips = Vec::new();
            for e in &entries {
                let (img, fl) = propagate_frame(&circ, &bits, map[f.position], e).expect("dual stays Clifford after frames");
                end_images.push(img);
                flips.push(fl);
            }
            Frame { label: f.label.clone(), position: map[f.position], syndrome: f.syndrome.clone(), entries, end_images, flips }
        })
        .collect();
    let prog = Program {
        circuit: circ,
        bits,
        checks: p.checks.clone(),
        frames,
        outputs: p.outputs.clone(),
        segments: p.segments.iter().map(|s| Segment { name: s.name.clone(), range: map[s.range.start]..map[s.range.end] }).collect(),
        fault_start: map[p.fault_start],
        rotated: !p.rotated,
    };
    (prog, map)
}

/// H-conjugate of one gate as native gates.
fn dual_gate(g: &Gate) -> Vec<(GateKind, Vec<usize>)> {
    let t = g.targets().to_vec();
    use GateKind::*;
    match *g.kind() {
        H => vec![(H, t)],
        X => vec![(Z, t)],
        Z => vec![(X, t)],
        Y => vec![(Y, t)],
        Cnot => vec![(Cnot, vec![t[1], t[0]])],
        Rx(a) => vec![(H, t.clone()), (Rx(a), t.clone()), (H, t)],
        Ry(a) => vec![(Ry(-a), t)],
        k @ (S | Sdag | T | Tdag) => vec![(H, t.clone()), (k, t.clone()), (H, t)],
        Cz => vec![(H, vec![t[0]]), (H, vec![t[1]]), (Cz, t.clone()), (H, vec![t[0]]), (H, vec![t[1]])],
        Ccz => {
            let mut v: Vec<(GateKind, Vec<usize>)> = t.iter().map(|&q| (H, vec![q])).collect();
            v.push((Ccz, t.clone()));
            v.extend(t.iter().map(|&q| (H, vec![q])));
            v
        }
    }
}

/// Remove adjacent H·H pairs on the same qubit (no intervening event on it and no
/// classical note in between).
/// Returns the new list and a map from old positions to new ones.
fn cancel_h_pairs(evs: Vec<CircuitEvent>) -> (Vec<CircuitEvent>, Vec<usize>) {
    let len = evs.len();
    let mut keep = vec![true; len];
    let mut last_on: Vec<Option<usize>> = vec![None; 64];
    for (i, e) in evs.iter().enumerate() {
        let is_h = matches!(&e.kind, EventKind::Gate(g) if *g.kind() == GateKind::H);
        if is_h {
            let q = e.targets[0];
            if let Some(j) = last_on[q] {
                let prev_h = keep[j] && matches!(&evs[j].kind, EventKind::Gate(g) if *g.kind() == GateKind::H);
                if prev_h {
                    keep[j] = false;
                    keep[i] = false;
                    last_on[q] = None;
                    continue;
                }
            }
            last_on[q] = Some(i);
        } else {
            for &q in &e.targets {
                last_on[q] = Some(i);
            }
        }
        if matches!(e.kind, EventKind::ClassicalNote) {
            // frames sit at notes: never cancel across them
            last_on.iter_mut().for_each(|l| *l = None);
        }
        if matches!(e.kind, EventKind::MeasureDetect | EventKind::Reset) {
            for &q in &e.targets {
                last_on[q] = Some(i);
            }
        }
    }
    let mut remap = vec![0usize; len + 1];
    let mut out = Vec::new();
    for (i, e) in evs.into_iter().enumerate() {
        remap[i] = out.len();
        if keep[i] {
            out.push(e);
        }
    }
    remap[len] = out.len();
    (out, remap)
}
