//! Code-switching gadgets between the Steane code (A) and the [[10,1,2]] code (B),
//! the fault-tolerant T gadget, and the composite protocols built from them.

use crate::codes::{
    encode_fragment, logical_t_fragment, transversal_gate, AncRole, Basis, CodeError, CodeKind, EncodeTarget, Fragment,
    LogicalGate, QRef, PLAQUETTES, TEN_X_SUPPORTS, TEN_Z_SMALL,
};
use crate::pauli::{Pauli, PauliString};
use crate::program::{h_dual_protocol, BlockId, BranchSpec, BuildError, Builder, Handle, Protocol};
use crate::statevec::{GateKind, StateVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown level `{0}` (expected nft, pft or ft)")]
    UnknownLevel(String),
    #[error("bad Bloch spec `{0}`")]
    BadBloch(String),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nft,
    Pft,
    Ft,
}

impl Level {
    pub fn parse(s: &str) -> Result<Level, ProtocolError> {
        match s.to_ascii_lowercase().as_str() {
            "nft" => Ok(Level::Nft),
            "pft" => Ok(Level::Pft),
            "ft" => Ok(Level::Ft),
            _ => Err(ProtocolError::UnknownLevel(s.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Level::Nft => "nft",
            Level::Pft => "pft",
            Level::Ft => "ft",
        }
    }
}

/// Error-detection block run before the CCZ of the fault-tolerant T gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdBlock {
    /// One weight-6 X-type check, B_X1 B_X2 on {1,4,5,6,8,9}.
    XCheck,
    /// The weight-3 Z checks B_Z4 and B_Z5.
    ZChecks,
    /// All six weight-4/5 generators, unflagged (27 two-qubit gates).
    Full,
}

impl EdBlock {
    pub fn parse(s: &str) -> Option<EdBlock> {
        match s {
            "x_check" | "xcheck" => Some(EdBlock::XCheck),
            "z_checks" | "zchecks" => Some(EdBlock::ZChecks),
            "full" => Some(EdBlock::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantOptions {
    /// Reuse the preparation flag as the first gadget flag (one check for both).
    pub flag_bunching: bool,
    /// A -> B: reject on disagreement instead of running a third round.
    pub branching_postselect: bool,
    pub ed_block: EdBlock,
}

impl Default for VariantOptions {
    fn default() -> Self {
        VariantOptions { flag_bunching: true, branching_postselect: false, ed_block: EdBlock::XCheck }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    BToA,
    AToB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolVariant {
    pub direction: Direction,
    pub level: Level,
    pub options: VariantOptions,
}

/// Syndrome-indexed switching operations (3 bits, 8 entries, linear in the bits).
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingLookupTable {
    pub direction: Direction,
    pub entries: Vec<PauliString>,
}

impl SwitchingLookupTable {
    pub fn new(direction: Direction) -> SwitchingLookupTable {
        let comps: Vec<PauliString> = (0..3)
            .map(|i| match direction {
                Direction::BToA => PauliString::z_on(10, &TEN_Z_SMALL[i]),
                Direction::AToB => PauliString::x_on(10, &PLAQUETTES[i]),
            })
            .collect();
        let entries = (0..8u8)
            .map(|s| {
                let mut p = PauliString::identity(10);
                for (i, c) in comps.iter().enumerate() {
                    if s >> (2 - i) & 1 == 1 {
                        p = p.multiply(c).expect("same size");
                    }
                }
                p
            })
            .collect();
        SwitchingLookupTable { direction, entries }
    }

    /// Entry for a syndrome written as bits (σ1, σ2, σ3), σ1 the most significant.
    pub fn lookup(&self, sigma: u8) -> &PauliString {
        &self.entries[(sigma & 7) as usize]
    }

    pub fn component(&self, i: usize) -> &PauliString {
        self.lookup(1 << (2 - i))
    }
}

/// Logical single-qubit input states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalInput {
    Zero,
    One,
    Plus,
    PlusI,
}

impl LogicalInput {
    pub const TOMOGRAPHY: [LogicalInput; 4] = [LogicalInput::Zero, LogicalInput::One, LogicalInput::Plus, LogicalInput::PlusI];

    pub fn name(&self) -> &'static str {
        match self {
            LogicalInput::Zero => "0",
            LogicalInput::One => "1",
            LogicalInput::Plus => "+",
            LogicalInput::PlusI => "+i",
        }
    }

    pub fn parse(s: &str) -> Option<LogicalInput> {
        LogicalInput::TOMOGRAPHY.into_iter().find(|i| i.name() == s)
    }

    pub fn state(&self) -> [Complex64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            LogicalInput::Zero => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            LogicalInput::One => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            LogicalInput::Plus => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            LogicalInput::PlusI => [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
        }
    }
}

/// Final rotation applied on the Steane block in Bloch-sphere protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlochRotation {
    None,
    /// Quarter turn about x (+y to +z), as H S H.
    Rx,
    /// Quarter turn about y taking +x to +z, as X then H.
    Ry,
}

/// A Bloch-sphere target: gates on |+> in the [[10,1,2]] code (left to right),
/// a switch to the Steane code and an optional final rotation there.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlochSpec {
    pub gates: String,
    pub rotation: BlochRotation,
}

impl BlochSpec {
    /// `"TS"`, `"T+RX"`, `"+RY"`, `"I+RY"`.
    pub fn parse(s: &str) -> Result<BlochSpec, ProtocolError> {
        let (g, r) = match s.split_once('+') {
            Some((g, r)) => (g, Some(r)),
            None => (s, None),
        };
        let gates = if g == "I" { String::new() } else { g.to_string() };
        if !gates.chars().all(|c| matches!(c, 'S' | 'T' | 'Z')) {
            return Err(ProtocolError::BadBloch(s.to_string()));
        }
        let rotation = match r {
            None => BlochRotation::None,
            Some("RX") => BlochRotation::Rx,
            Some("RY") => BlochRotation::Ry,
            Some(_) => return Err(ProtocolError::BadBloch(s.to_string())),
        };
        Ok(BlochSpec { gates, rotation })
    }

    /// The twelve targets: eight on the equator, both poles and two at ±45° latitude.
    pub fn all() -> Vec<BlochSpec> {
        let mut v: Vec<BlochSpec> = ["", "S", "Z", "SZ", "T", "TS", "TZ", "TSZ"]
            .iter()
            .map(|g| BlochSpec { gates: g.to_string(), rotation: BlochRotation::None })
            .collect();
        v.push(BlochSpec { gates: String::new(), rotation: BlochRotation::Ry });
        v.push(BlochSpec { gates: "Z".into(), rotation: BlochRotation::Ry });
        v.push(BlochSpec { gates: "T".into(), rotation: BlochRotation::Rx });
        v.push(BlochSpec { gates: "TZ".into(), rotation: BlochRotation::Rx });
        v
    }

    /// Group of states sharing the same number of logical operations: the
    /// equator cardinals, the equator states at 45 degrees, the poles and the
    /// states on the 45th parallels.
    pub fn group(&self) -> &'static str {
        match (self.rotation, self.gates.contains('T')) {
            (BlochRotation::None, false) => "equator",
            (BlochRotation::None, true) => "equator_t",
            (_, false) => "pole",
            (_, true) => "parallel",
        }
    }

    pub fn logical_gates(&self) -> Vec<LogicalOp> {
        let mut v: Vec<LogicalOp> = self
            .gates
            .chars()
            .map(|c| match c {
                'S' => LogicalOp::S,
                'T' => LogicalOp::T,
                _ => LogicalOp::Z,
            })
            .collect();
        v.extend(self.rotation_ops());
        v
    }

    fn rotation_ops(&self) -> Vec<LogicalOp> {
        match self.rotation {
            BlochRotation::None => vec![],
            BlochRotation::Rx => vec![LogicalOp::H, LogicalOp::S, LogicalOp::H],
            BlochRotation::Ry => vec![LogicalOp::X, LogicalOp::H],
        }
    }

    pub fn ideal_state(&self) -> [Complex64; 2] {
        let mut sv = StateVector::<f64>::from_amplitudes(LogicalInput::Plus.state().to_vec()).expect("normalized");
        for op in self.logical_gates() {
            sv.apply_gate(&crate::statevec::gate(op.gate_kind(), &[0])).expect("1 qubit");
        }
        let a = sv.amplitudes();
        [a[0], a[1]]
    }
}

impl fmt::Display for BlochSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = if self.gates.is_empty() { "I" } else { &self.gates };
        match self.rotation {
            BlochRotation::None => write!(f, "{g}"),
            BlochRotation::Rx => write!(f, "{g}+RX"),
            BlochRotation::Ry => write!(f, "{g}+RY"),
        }
    }
}

/// Logical single-qubit gate as it appears in ideal reference computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicalOp {
    H,
    S,
    T,
    X,
    Z,
}

impl LogicalOp {
    pub fn gate_kind(&self) -> GateKind {
        match self {
            LogicalOp::H => GateKind::H,
            LogicalOp::S => GateKind::S,
            LogicalOp::T => GateKind::T,
            LogicalOp::X => GateKind::X,
            LogicalOp::Z => GateKind::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnotKind {
    /// |+> in B, switch, CNOT onto a fresh |0> in A.
    Clifford,
    /// As Clifford with a T gate on the control before switching.
    T,
    /// T on the control, then H after switching.
    Ht,
}

impl CnotKind {
    pub fn parse(s: &str) -> Option<CnotKind> {
        match s {
            "clifford" => Some(CnotKind::Clifford),
            "t" => Some(CnotKind::T),
            "ht" => Some(CnotKind::Ht),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CnotKind::Clifford => "clifford",
            CnotKind::T => "t",
            CnotKind::Ht => "ht",
        }
    }

    pub fn ideal_state(&self) -> [Complex64; 4] {
        let mut sv = StateVector::<f64>::zero(2).expect("2 qubits");
        let g = crate::statevec::gate;
        sv.apply_gate(&g(GateKind::H, &[0])).expect("ok");
        if *self != CnotKind::Clifford {
            sv.apply_gate(&g(GateKind::T, &[0])).expect("ok");
        }
        if *self == CnotKind::Ht {
            sv.apply_gate(&g(GateKind::H, &[0])).expect("ok");
        }
        sv.apply_gate(&g(GateKind::Cnot, &[0, 1])).expect("ok");
        let a = sv.amplitudes();
        [a[0], a[1], a[2], a[3]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    InitB,
    TGate,
    SwitchBToA,
    SwitchAToB,
    Bloch(BlochSpec),
    Cnot(CnotKind),
}

/// What the shots of a preset reconstruct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TomographyKind {
    /// Four logical inputs, one output block: a single-qubit channel.
    Process,
    /// One output block, fixed input.
    State1,
    /// Two output blocks, fixed input.
    State2,
}

impl Preset {
    pub const BASE: [&'static str; 4] = ["init_b", "t_gate", "switch_b_to_a", "switch_a_to_b"];

    pub fn parse(s: &str) -> Result<Preset, ProtocolError> {
        match s {
            "init_b" => Ok(Preset::InitB),
            "t_gate" | "t_gadget" => Ok(Preset::TGate),
            "switch_b_to_a" => Ok(Preset::SwitchBToA),
            "switch_a_to_b" => Ok(Preset::SwitchAToB),
            _ => {
                if let Some(b) = s.strip_prefix("bloch:") {
                    Ok(Preset::Bloch(BlochSpec::parse(b)?))
                } else if let Some(c) = s.strip_prefix("cnot:").or_else(|| s.strip_prefix("cnot_")) {
                    CnotKind::parse(c).map(Preset::Cnot).ok_or_else(|| ProtocolError::UnknownPreset(s.to_string()))
                } else {
                    Err(ProtocolError::UnknownPreset(s.to_string()))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Preset::InitB => "init_b".into(),
            Preset::TGate => "t_gate".into(),
            Preset::SwitchBToA => "switch_b_to_a".into(),
            Preset::SwitchAToB => "switch_a_to_b".into(),
            Preset::Bloch(b) => format!("bloch:{b}"),
            Preset::Cnot(c) => format!("cnot:{}", c.name()),
        }
    }

    pub fn tomography(&self) -> TomographyKind {
        match self {
            Preset::Bloch(_) => TomographyKind::State1,
            Preset::Cnot(_) => TomographyKind::State2,
            _ => TomographyKind::Process,
        }
    }

    /// Ideal logical channel of a process preset (as a 2x2 unitary, row major).
    pub fn ideal_unitary(&self) -> Option<[Complex64; 4]> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Preset::TGate => Some([one, zero, zero, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]),
            Preset::InitB | Preset::SwitchBToA | Preset::SwitchAToB => Some([one, zero, zero, one]),
            _ => None,
        }
    }

    pub fn all_names() -> Vec<String> {
        let mut v: Vec<String> = Preset::BASE.iter().map(|s| s.to_string()).collect();
        v.extend(BlochSpec::all().iter().map(|b| format!("bloch:{b}")));
        v.extend(["cnot:clifford", "cnot:t", "cnot:ht"].iter().map(|s| s.to_string()));
        v
    }
}

/// A fully specified protocol family member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub preset: Preset,
    pub level: Level,
    pub options: VariantOptions,
    /// Build in the rotated [[10,1,2]] code (H dual of the whole program).
    pub rotated: bool,
}

impl PresetSpec {
    pub fn new(preset: Preset, level: Level) -> PresetSpec {
        PresetSpec { preset, level, options: VariantOptions::default(), rotated: false }
    }

    pub fn b_code(&self) -> CodeKind {
        if self.rotated {
            CodeKind::TenX
        } else {
            CodeKind::TenZ
        }
    }
}

/// One circuit configuration: the logical input (process presets) and readout bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub input: Option<LogicalInput>,
    pub bases: Vec<Basis>,
}

impl Setting {
    pub fn label(&self) -> String {
        let b: String = self.bases.iter().map(|b| b.letter()).collect();
        match self.input {
            Some(i) => format!("in={} basis={b}", i.name()),
            None => format!("basis={b}"),
        }
    }
}

/// All tomography settings of a preset.
pub fn settings(preset: &Preset) -> Vec<Setting> {
    match preset.tomography() {
        TomographyKind::Process => LogicalInput::TOMOGRAPHY
            .iter()
            .flat_map(|&i| Basis::ALL.iter().map(move |&b| Setting { input: Some(i), bases: vec![b] }))
            .collect(),
        TomographyKind::State1 => Basis::ALL.iter().map(|&b| Setting { input: None, bases: vec![b] }).collect(),
        TomographyKind::State2 => Basis::ALL
            .iter()
            .flat_map(|&a| Basis::ALL.iter().map(move |&b| Setting { input: None, bases: vec![a, b] }))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// gadgets

/// Fragment measuring one Pauli-type stabilizer with an ancilla, optionally with a
/// flag that catches the hook error of the middle CNOTs.
pub fn stabilizer_fragment(support: &[usize], kind: Pauli, flagged: bool, label: &str) -> Fragment {
    let mut f = Fragment::new(label, 10);
    let a = f.add_ancilla(AncRole::Syndrome, &format!("stab:{label}"));
    let fl = if flagged { Some(f.add_ancilla(AncRole::Flag, &format!("flag:{label}"))) } else { None };
    let lab = format!("stab:{label}");
    let w = support.len();
    match kind {
        Pauli::X => {
            f.op(GateKind::H, &[QRef::A(a)], &lab);
            for (k, &d) in support.iter().enumerate() {
                f.op(GateKind::Cnot, &[QRef::A(a), QRef::D(d)], &lab);
                if let Some(fl) = fl {
                    if k == 0 || k + 2 == w {
                        f.op(GateKind::Cnot, &[QRef::A(a), QRef::A(fl)], &format!("flag:{label}"));
                    }
                }
            }
            f.op(GateKind::H, &[QRef::A(a)], &lab);
        }
        _ => {
            for (k, &d) in support.iter().enumerate() {
                f.op(GateKind::Cnot, &[QRef::D(d), QRef::A(a)], &lab);
                if let Some(fl) = fl {
                    if k == 0 || k + 2 == w {
                        f.op(GateKind::Cnot, &[QRef::A(fl), QRef::A(a)], &format!("flag:{label}"));
                    }
                }
            }
        }
    }
    if let (Some(fl), Pauli::Z) = (fl, kind) {
        // Z-type flags watch for X on the syndrome qubit: prepare |+>, read in X.
        let mut g = Fragment::new(label, 10);
        g.ancillas = f.ancillas.clone();
        g.op(GateKind::H, &[QRef::A(fl)], &format!("flag:{label}"));
        g.ops.extend(f.ops.iter().cloned());
        g.op(GateKind::H, &[QRef::A(fl)], &format!("flag:{label}"));
        return g;
    }
    f
}

/// Measure a stabilizer on a block; returns (syndrome handle, flag handle).
pub fn measure_stabilizer_flagged(
    b: &mut Builder,
    block: BlockId,
    support: &[usize],
    kind: Pauli,
    flagged: bool,
    flag_bind: Option<Handle>,
    label: &str,
) -> Result<(Handle, Option<Handle>), ProtocolError> {
    let f = stabilizer_fragment(support, kind, flagged, label);
    let bind: Vec<Option<Handle>> = if flagged { vec![None, flag_bind] } else { vec![None] };
    let hs = b.apply_fragment(block, &f, &bind)?;
    Ok((hs[0], hs.get(1).copied()))
}

/// Encode a logical input into a fresh block. Returns the block and the
/// preparation flag handle (FT |0>-type preparations only).
pub fn prepare_input(
    b: &mut Builder,
    code: CodeKind,
    input: LogicalInput,
    ft: bool,
) -> Result<(BlockId, Option<Handle>), ProtocolError> {
    let code_z = if code == CodeKind::TenX { CodeKind::TenZ } else { code };
    let block = b.alloc_block(code_z, None)?;
    let target = match input {
        LogicalInput::Zero | LogicalInput::One => EncodeTarget::Zero,
        _ => EncodeTarget::Plus,
    };
    let frag = encode_fragment(code_z, target, ft)?;
    let hs = b.apply_fragment(block, &frag, &vec![None; frag.ancillas.len()])?;
    let flag = frag.ancillas.iter().position(|a| a.role == AncRole::Flag).map(|k| hs[k]);
    match input {
        LogicalInput::One => logical_gate(b, block, LogicalGate::X)?,
        LogicalInput::PlusI => logical_gate(b, block, LogicalGate::S)?,
        _ => {}
    }
    Ok((block, flag))
}

pub fn logical_gate(b: &mut Builder, block: BlockId, g: LogicalGate) -> Result<(), ProtocolError> {
    let imp = transversal_gate(b.block_code(block), g)?;
    for (k, q) in imp.ops {
        b.block_gate(block, k, &q, &format!("logical:{g:?}"))?;
    }
    Ok(())
}

/// Logical H on a Steane block; S and Z where transversal.
pub fn logical_op(b: &mut Builder, block: BlockId, op: LogicalOp, level: Level, opts: &VariantOptions) -> Result<(), ProtocolError> {
    match op {
        LogicalOp::H => logical_gate(b, block, LogicalGate::H),
        LogicalOp::S => logical_gate(b, block, LogicalGate::S),
        LogicalOp::X => logical_gate(b, block, LogicalGate::X),
        LogicalOp::Z => logical_gate(b, block, LogicalGate::Z),
        LogicalOp::T => ft_t_gadget(b, block, level, opts),
    }
}

/// B -> A. Measures σ = (A_X1, A_X2, A_X3) (flagged at FT), reads 8, 9, 10 in X,
/// rejects on disagreement (pFT and FT) and defers the lookup correction.
pub fn switch_b_to_a(
    b: &mut Builder,
    block: BlockId,
    level: Level,
    opts: &VariantOptions,
    prep_flag: Option<Handle>,
) -> Result<(), ProtocolError> {
    b.begin_segment("switch_b_to_a");
    let flagged = level == Level::Ft;
    let mut sigma = Vec::new();
    // With bunching every gadget flag (and the preparation flag, if still
    // unmeasured) shares one qubit: a single fault raises it at most once.
    let mut shared = if opts.flag_bunching { prep_flag.filter(|&h| b.is_pending(h)) } else { None };
    for (i, p) in PLAQUETTES.iter().enumerate() {
        let (s, fl) = measure_stabilizer_flagged(b, block, p, Pauli::X, flagged, shared, &format!("A_X{}", i + 1))?;
        sigma.push(s);
        if opts.flag_bunching {
            shared = fl;
        }
    }
    let bulk = b.measure_block_qubits(block, &[7, 8, 9], Basis::X, "switch:bulk")?;
    if level != Level::Nft {
        for i in 0..3 {
            b.check(&format!("verify:agree{}", i + 1), &[sigma[i], bulk[i]], 0);
        }
    }
    b.retarget_block(block, CodeKind::Steane);
    let table = SwitchingLookupTable::new(Direction::BToA);
    let entries: Vec<PauliString> = (0..3)
        .map(|i| {
            // The bulk part acts on qubits already measured; keep the Steane part.
            let c = table.component(i);
            let steane = PauliString::from_bits(7, c.x_bits() & 0x7f, c.z_bits() & 0x7f, c.phase()).expect("7 qubits");
            b.block_pauli(block, &steane)
        })
        .collect();
    b.frame("b_to_a", sigma.iter().map(|&s| vec![s]).collect(), entries)?;
    b.end_segment();
    Ok(())
}

/// Z-type measurement of B_Z4..6 on the extended block.
fn small_round(b: &mut Builder, block: BlockId, round: usize) -> Result<Vec<Handle>, ProtocolError> {
    let mut v = Vec::new();
    for (i, s) in TEN_Z_SMALL.iter().enumerate() {
        let (h, _) = measure_stabilizer_flagged(b, block, s, Pauli::Z, false, None, &format!("B_Z{}#{round}", i + 4))?;
        v.push(h);
    }
    Ok(v)
}

fn plaquette_checks(b: &mut Builder, block: BlockId) -> Result<(), ProtocolError> {
    for i in [1, 2] {
        let (h, _) = measure_stabilizer_flagged(b, block, &PLAQUETTES[i], Pauli::Z, false, None, &format!("B_Z{}", i + 1))?;
        b.check(&format!("verify:B_Z{}", i + 1), &[h], 0);
    }
    Ok(())
}

fn a_to_b_frame(b: &mut Builder, block: BlockId, sigma: &[Handle]) -> Result<(), ProtocolError> {
    let table = SwitchingLookupTable::new(Direction::AToB);
    let entries = (0..3).map(|i| b.block_pauli(block, table.component(i))).collect();
    b.frame("a_to_b", sigma.iter().map(|&s| vec![s]).collect(), entries)?;
    Ok(())
}

/// A -> B. Returns one builder (no branching) or two (agree, disagree) plus the
/// branch parities, which are already resolved to bits.
pub fn switch_a_to_b(
    mut b: Builder,
    block: BlockId,
    level: Level,
    opts: &VariantOptions,
) -> Result<(Vec<Builder>, Option<BranchSpec>), ProtocolError> {
    if level == Level::Pft {
        return Err(ProtocolError::Unsupported("pft is defined only for switching from [[10,1,2]] to [[7,1,3]]".into()));
    }
    b.begin_segment("switch_a_to_b");
    // Bulk qubits start in |+> so that B_X = A_X X_bulk holds from the outset.
    let bulk = b.extend_block(block, CodeKind::TenZ, 3)?;
    for q in bulk {
        b.gate(GateKind::H, &[q], "switch:bulk")?;
    }
    let s1 = small_round(&mut b, block, 1)?;
    if level == Level::Nft {
        a_to_b_frame(&mut b, block, &s1)?;
        b.end_segment();
        return Ok((vec![b], None));
    }
    let s2 = small_round(&mut b, block, 2)?;
    if opts.branching_postselect {
        for i in 0..3 {
            b.check(&format!("verify:repeat{}", i + 4), &[s1[i], s2[i]], 0);
        }
        plaquette_checks(&mut b, block)?;
        a_to_b_frame(&mut b, block, &s2)?;
        b.end_segment();
        return Ok((vec![b], None));
    }
    b.flush()?;
    // the note keeps the shared prefix identical under the H dual
    b.note("branch")?;
    let at = b.position();
    let parities = (0..3)
        .map(|i| vec![b.bit_of(s1[i]).expect("flushed"), b.bit_of(s2[i]).expect("flushed")])
        .collect();
    let mut agree = b.clone();
    plaquette_checks(&mut agree, block)?;
    a_to_b_frame(&mut agree, block, &s2)?;
    agree.end_segment();
    let mut disagree = b;
    let s3 = small_round(&mut disagree, block, 3)?;
    plaquette_checks(&mut disagree, block)?;
    disagree.flush()?;
    a_to_b_frame(&mut disagree, block, &s3)?;
    disagree.end_segment();
    Ok((vec![agree, disagree], Some(BranchSpec { at, parities })))
}

/// Error detection on a [[10,1,2]] block before the non-Clifford part.
pub fn error_detection(b: &mut Builder, block: BlockId, ed: EdBlock) -> Result<(), ProtocolError> {
    let checks: Vec<(Vec<usize>, Pauli, String)> = match ed {
        EdBlock::XCheck => vec![(vec![0, 3, 4, 5, 7, 8], Pauli::X, "ed:X".into())],
        EdBlock::ZChecks => (0..2).map(|i| (TEN_Z_SMALL[i].to_vec(), Pauli::Z, format!("ed:B_Z{}", i + 4))).collect(),
        EdBlock::Full => {
            let mut v: Vec<(Vec<usize>, Pauli, String)> =
                PLAQUETTES.iter().enumerate().map(|(i, p)| (p.to_vec(), Pauli::Z, format!("ed:B_Z{}", i + 1))).collect();
            v.extend(TEN_X_SUPPORTS.iter().enumerate().map(|(i, s)| (s.to_vec(), Pauli::X, format!("ed:B_X{}", i + 1))));
            v
        }
    };
    for (sup, kind, label) in checks {
        let (h, _) = measure_stabilizer_flagged(b, block, &sup, kind, false, None, &label)?;
        b.check(&format!("verify:{label}"), &[h], 0);
    }
    Ok(())
}

/// Logical T on a [[10,1,2]] block, preceded by error detection at FT.
pub fn ft_t_gadget(b: &mut Builder, block: BlockId, level: Level, opts: &VariantOptions) -> Result<(), ProtocolError> {
    b.begin_segment("t_gadget");
    if level == Level::Ft {
        error_detection(b, block, opts.ed_block)?;
    }
    let f = logical_t_fragment(CodeKind::TenZ)?;
    b.apply_fragment(block, &f, &[])?;
    b.end_segment();
    Ok(())
}

/// Register-sized program and its ideal logical output for one setting.
#[derive(Debug, Clone)]
pub struct BuiltProtocol {
    pub spec: PresetSpec,
    pub setting: Setting,
    pub protocol: Protocol,
    /// Ideal logical output state (2 or 4 amplitudes).
    pub ideal: Vec<Complex64>,
}

/// Build one setting of a preset. With `noiseless_input` the input preparation is
/// excluded from the fault window (used by the verifier).
pub fn build(spec: &PresetSpec, setting: &Setting, noiseless_input: bool) -> Result<BuiltProtocol, ProtocolError> {
    let level = spec.level;
    let opts = spec.options;
    let name = format!("{}_{}", spec.preset.name(), level.name());
    let mut b = Builder::new(&name);
    let input = setting.input.unwrap_or(LogicalInput::Plus);
    // input preparations share the protocol's level; pFT adds only classical checks
    let ft_prep = level == Level::Ft;
    let (programs, branch, ideal) = match &spec.preset {
        Preset::InitB => {
            b.begin_segment("init");
            let (blk, _) = prepare_input(&mut b, CodeKind::TenZ, input, ft_prep)?;
            b.end_segment();
            let p = b.finish(&[(blk, Some(setting.bases[0]))])?;
            (vec![p], None, process_ideal(&spec.preset, input))
        }
        Preset::TGate => {
            let (blk, _) = prepare_input(&mut b, CodeKind::TenZ, input, ft_prep)?;
            if noiseless_input {
                b.mark_fault_start();
            }
            ft_t_gadget(&mut b, blk, level, &opts)?;
            let p = b.finish(&[(blk, Some(setting.bases[0]))])?;
            (vec![p], None, process_ideal(&spec.preset, input))
        }
        Preset::SwitchBToA => {
            let (blk, flag) = prepare_input(&mut b, CodeKind::TenZ, input, ft_prep)?;
            if noiseless_input {
                b.mark_fault_start();
            }
            switch_b_to_a(&mut b, blk, level, &opts, if noiseless_input { None } else { flag })?;
            let p = b.finish(&[(blk, Some(setting.bases[0]))])?;
            (vec![p], None, process_ideal(&spec.preset, input))
        }
        Preset::SwitchAToB => {
            let (blk, _) = prepare_input(&mut b, CodeKind::Steane, input, ft_prep)?;
            // the input's flag is read out before the switch starts
            b.flush()?;
            if noiseless_input {
                b.mark_fault_start();
            }
            let (builders, branch) = switch_a_to_b(b, blk, level, &opts)?;
            let progs = builders.into_iter().map(|bb| bb.finish(&[(blk, Some(setting.bases[0]))])).collect::<Result<Vec<_>, _>>()?;
            (progs, branch, process_ideal(&spec.preset, input))
        }
        Preset::Bloch(bs) => {
            b.begin_segment("init");
            let (blk, flag) = prepare_input(&mut b, CodeKind::TenZ, LogicalInput::Plus, ft_prep)?;
            b.end_segment();
            if noiseless_input {
                b.mark_fault_start();
            }
            for c in bs.gates.chars() {
                let op = match c {
                    'S' => LogicalOp::S,
                    'T' => LogicalOp::T,
                    _ => LogicalOp::Z,
                };
                logical_op(&mut b, blk, op, level, &opts)?;
            }
            if bs.gates.contains('T') {
                b.flush()?;
            }
            switch_b_to_a(&mut b, blk, level, &opts, flag)?;
            for op in bs.logical_gates().into_iter().skip(bs.gates.len()) {
                logical_op(&mut b, blk, op, level, &opts)?;
            }
            let p = b.finish(&[(blk, Some(setting.bases[0]))])?;
            (vec![p], None, bs.ideal_state().to_vec())
        }
        Preset::Cnot(kind) => {
            b.begin_segment("init");
            let (ctl, flag) = prepare_input(&mut b, CodeKind::TenZ, LogicalInput::Plus, ft_prep)?;
            b.end_segment();
            if noiseless_input {
                b.mark_fault_start();
            }
            if *kind != CnotKind::Clifford {
                ft_t_gadget(&mut b, ctl, level, &opts)?;
                b.flush()?;
            }
            switch_b_to_a(&mut b, ctl, level, &opts, flag)?;
            if *kind == CnotKind::Ht {
                logical_gate(&mut b, ctl, LogicalGate::H)?;
            }
            b.begin_segment("target_prep");
            let (tgt, _) = prepare_input(&mut b, CodeKind::Steane, LogicalInput::Zero, ft_prep)?;
            b.end_segment();
            b.begin_segment("transversal_cnot");
            let (cq, tq) = (b.block_qubits(ctl).to_vec(), b.block_qubits(tgt).to_vec());
            for q in 0..7 {
                b.gate(GateKind::Cnot, &[cq[q], tq[q]], "logical:CNOT")?;
            }
            b.end_segment();
            let p = b.finish(&[(ctl, Some(setting.bases[0])), (tgt, Some(setting.bases[1]))])?;
            (vec![p], None, kind.ideal_state().to_vec())
        }
    };
    let mut protocol = Protocol { name, programs, branch };
    if spec.rotated {
        protocol = h_dual_protocol(&protocol);
    }
    Ok(BuiltProtocol { spec: spec.clone(), setting: setting.clone(), protocol, ideal })
}

fn process_ideal(preset: &Preset, input: LogicalInput) -> Vec<Complex64> {
    let u = preset.ideal_unitary().expect("process preset");
    let s = input.state();
    vec![u[0] * s[0] + u[1] * s[1], u[2] * s[0] + u[3] * s[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_linear() {
        let t = SwitchingLookupTable::new(Direction::BToA);
        assert_eq!(t.lookup(0b100).to_sparse(), "Z3.Z6.Z8");
        assert_eq!(t.lookup(0b001).to_sparse(), "Z2.Z3.Z10");
        let u = SwitchingLookupTable::new(Direction::AToB);
        assert_eq!(u.lookup(0b011).to_sparse(), "X2.X4.X5.X7");
        assert!(u.lookup(0).is_identity());
    }

    #[test]
    fn bloch_parse_roundtrip() {
        for b in BlochSpec::all() {
            assert_eq!(BlochSpec::parse(&b.to_string()).unwrap(), b);
        }
        assert!(BlochSpec::parse("Q").is_err());
        assert_eq!(BlochSpec::all().len(), 12);
    }

    #[test]
    fn preset_names_parse() {
        for n in Preset::all_names() {
            assert_eq!(Preset::parse(&n).unwrap().name(), n);
        }
        assert!(Preset::parse("nope").is_err());
    }
}
