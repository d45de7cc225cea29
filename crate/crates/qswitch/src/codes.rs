//! The [[7,1,3]] color code, the [[10,1,2]] code and its rotated variant, with
//! encoders, logical gates and readout decoding.
//!
//! Code qubits are 0-based here; the docs use the 1-based labels 1..10.

use crate::pauli::{Pauli, PauliError, PauliGroup, PauliString, Phase};
use crate::statevec::GateKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("unknown code `{0}`")]
    UnknownCode(String),
    #[error("gate {gate} is not transversal for {code}")]
    NotTransversal { gate: String, code: String },
    #[error("{what} unsupported for {code}")]
    Unsupported { what: String, code: String },
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeKind {
    #[serde(rename = "steane713")]
    Steane,
    #[serde(rename = "code1012z")]
    TenZ,
    #[serde(rename = "code1012x")]
    TenX,
}

impl CodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            CodeKind::Steane => "steane713",
            CodeKind::TenZ => "code1012z",
            CodeKind::TenX => "code1012x",
        }
    }

    pub fn parse(s: &str) -> Result<CodeKind, CodeError> {
        match s {
            "steane713" => Ok(CodeKind::Steane),
            "code1012z" => Ok(CodeKind::TenZ),
            "code1012x" => Ok(CodeKind::TenX),
            _ => Err(CodeError::UnknownCode(s.to_string())),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            CodeKind::Steane => 7,
            _ => 10,
        }
    }

    pub fn spec(&self) -> CodeSpec {
        match self {
            CodeKind::Steane => CodeSpec::steane(),
            CodeKind::TenZ => CodeSpec::ten_z(),
            CodeKind::TenX => CodeSpec::ten_x(),
        }
    }
}

/// Color-code plaquettes on qubits 1..7 (0-based).
pub const PLAQUETTES: [[usize; 4]; 3] = [[0, 1, 2, 3], [1, 2, 4, 5], [2, 3, 5, 6]];
/// Supports of the X-type generators of [[10,1,2]]: plaquette plus one bulk qubit.
pub const TEN_X_SUPPORTS: [[usize; 5]; 3] = [[0, 1, 2, 3, 7], [1, 2, 4, 5, 8], [2, 3, 5, 6, 9]];
/// Weight-3 Z-type generators of [[10,1,2]] (labels {3,6,8}, {3,4,9}, {2,3,10}).
pub const TEN_Z_SMALL: [[usize; 3]; 3] = [[2, 5, 7], [2, 3, 8], [1, 2, 9]];
pub const LOGICAL_SUPPORT: [usize; 7] = [0, 1, 2, 3, 4, 5, 6];

#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub kind: CodeKind,
    pub n: usize,
    pub generators: Vec<PauliString>,
    pub generator_labels: Vec<String>,
    pub logical_x: PauliString,
    pub logical_z: PauliString,
    /// Minimum weight of an undetectable logical X-type (resp. Z-type) error.
    pub d_x: usize,
    pub d_z: usize,
    pub notes: &'static str,
}

impl CodeSpec {
    pub fn steane() -> CodeSpec {
        let n = 7;
        let mut generators = Vec::new();
        let mut labels = Vec::new();
        for (i, p) in PLAQUETTES.iter().enumerate() {
            generators.push(PauliString::x_on(n, p));
            labels.push(format!("A_X{}", i + 1));
        }
        for (i, p) in PLAQUETTES.iter().enumerate() {
            generators.push(PauliString::z_on(n, p));
            labels.push(format!("A_Z{}", i + 1));
        }
        CodeSpec {
            kind: CodeKind::Steane,
            n,
            generators,
            generator_labels: labels,
            logical_x: PauliString::x_on(n, &LOGICAL_SUPPORT),
            logical_z: PauliString::z_on(n, &LOGICAL_SUPPORT),
            d_x: 3,
            d_z: 3,
            notes: "corrects any single-qubit error; all single-qubit Cliffords transversal",
        }
    }

    pub fn ten_z() -> CodeSpec {
        let n = 10;
        let mut generators = Vec::new();
        let mut labels = Vec::new();
        for (i, s) in TEN_X_SUPPORTS.iter().enumerate() {
            generators.push(PauliString::x_on(n, s));
            labels.push(format!("B_X{}", i + 1));
        }
        for (i, p) in PLAQUETTES.iter().enumerate() {
            generators.push(PauliString::z_on(n, p));
            labels.push(format!("B_Z{}", i + 1));
        }
        for (i, s) in TEN_Z_SMALL.iter().enumerate() {
            generators.push(PauliString::z_on(n, s));
            labels.push(format!("B_Z{}", i + 4));
        }
        CodeSpec {
            kind: CodeKind::TenZ,
            n,
            generators,
            generator_labels: labels,
            logical_x: PauliString::x_on(n, &LOGICAL_SUPPORT),
            logical_z: PauliString::z_on(n, &LOGICAL_SUPPORT),
            d_x: 4,
            d_z: 2,
            notes: "corrects a single X error (detects up to three); detects a single Z error; transversal T via CCZ on 8,9,10",
        }
    }

    /// [[10,1,2]] with X and Z interchanged on every generator; logicals are the
    /// H-conjugates of the unrotated ones.
    pub fn ten_x() -> CodeSpec {
        let z = CodeSpec::ten_z();
        let swap = |p: &PauliString| PauliString::from_bits(p.n(), p.z_bits(), p.x_bits(), Phase::ONE).expect("same size");
        CodeSpec {
            kind: CodeKind::TenX,
            n: 10,
            generators: z.generators.iter().map(swap).collect(),
            generator_labels: z.generator_labels.iter().map(|l| format!("{l}^X")).collect(),
            logical_x: swap(&z.logical_x),
            logical_z: swap(&z.logical_z),
            d_x: 2,
            d_z: 4,
            notes: "rotated [[10,1,2]]: corrects a single Z error, detects a single X error",
        }
    }

    /// `Y_L = i X_L Z_L`, Hermitian with a real sign.
    pub fn logical_y(&self) -> PauliString {
        let p = self.logical_x.multiply(&self.logical_z).expect("same size");
        p.clone().with_phase(p.phase().mul(Phase::I))
    }

    pub fn logical(&self, basis: Basis) -> PauliString {
        match basis {
            Basis::X => self.logical_x.clone(),
            Basis::Y => self.logical_y(),
            Basis::Z => self.logical_z.clone(),
        }
    }

    pub fn syndrome(&self, error: &PauliString) -> Result<Vec<bool>, CodeError> {
        Ok(crate::pauli::syndrome_of(error, &self.generators)?)
    }

    pub fn group(&self) -> PauliGroup {
        PauliGroup::new(self.generators.clone()).expect("same size")
    }

    /// Indices of X-type and Z-type generators.
    pub fn x_generators(&self) -> Vec<usize> {
        (0..self.generators.len()).filter(|&i| self.generators[i].is_x_type()).collect()
    }

    pub fn z_generators(&self) -> Vec<usize> {
        (0..self.generators.len()).filter(|&i| self.generators[i].is_z_type()).collect()
    }

    /// Every element of the stabilizer group (2^g of them), with exact signs.
    pub fn stabilizer_elements(&self) -> Vec<PauliString> {
        let g = self.generators.len();
        (0..1usize << g)
            .map(|m| {
                let mut p = PauliString::identity(self.n);
                for i in 0..g {
                    if m >> i & 1 == 1 {
                        p = p.multiply(&self.generators[i]).expect("same size");
                    }
                }
                p
            })
            .collect()
    }

    /// Readout plan for measuring the logical operator of `basis` destructively.
    pub fn readout_plan(&self, basis: Basis) -> ReadoutPlan {
        let logical = self.logical(basis);
        let mut best: Option<ReadoutPlan> = None;
        for bulk in [Pauli::X, Pauli::Z, Pauli::Y] {
            let mut letters = vec![bulk; self.n];
            for q in logical.support() {
                letters[q] = logical.get(q);
            }
            let plan = ReadoutPlan::build(self, basis, &letters, &logical);
            let better = match &best {
                None => true,
                Some(b) => plan.checks.len() > b.checks.len(),
            };
            if better {
                best = Some(plan);
            }
        }
        best.expect("at least one candidate")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn letter(&self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }

    pub fn pauli(&self) -> Pauli {
        match self {
            Basis::X => Pauli::X,
            Basis::Y => Pauli::Y,
            Basis::Z => Pauli::Z,
        }
    }

    pub fn from_pauli(p: Pauli) -> Option<Basis> {
        match p {
            Pauli::X => Some(Basis::X),
            Pauli::Y => Some(Basis::Y),
            Pauli::Z => Some(Basis::Z),
            Pauli::I => None,
        }
    }
}

/// How one code block is read out: a measurement letter per code qubit, the
/// logical parity, the parity checks implied by readable stabilizer elements, and a
/// minimum-weight lookup decoder over those checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutPlan {
    pub basis: Basis,
    pub letters: Vec<Pauli>,
    pub logical_mask: u64,
    /// Logical eigenvalue is `(-1)^(parity ^ logical_flip)`.
    pub logical_flip: bool,
    /// (mask, expected parity) for each independent readable stabilizer element.
    pub checks: Vec<(u64, bool)>,
    /// Classical distance of the readout code against bit flips.
    pub distance: usize,
    /// Per syndrome: a minimum-weight flip pattern, or `None` when two such patterns
    /// disagree on the logical parity.
    pub table: Vec<Option<u64>>,
}

fn readable(p: &PauliString, letters: &[Pauli]) -> bool {
    p.support().iter().all(|&q| p.get(q) == letters[q])
}

impl ReadoutPlan {
    fn build(code: &CodeSpec, basis: Basis, letters: &[Pauli], logical: &PauliString) -> ReadoutPlan {
        let mut checks: Vec<(u64, bool)> = Vec::new();
        let mut rows: Vec<u64> = Vec::new();
        for s in code.stabilizer_elements() {
            if s.is_identity() || !readable(&s, letters) {
                continue;
            }
            let mask = s.x_bits() | s.z_bits();
            if !insert_row(&mut rows, mask) {
                continue;
            }
            let flip = sign_flip(&s);
            checks.push((mask, flip));
        }
        let logical_mask = logical.x_bits() | logical.z_bits();
        let logical_flip = sign_flip(logical);
        let n = code.n;
        let table = decoder_table(n, &checks, logical_mask);
        let distance = classical_distance(n, &checks, logical_mask);
        ReadoutPlan { basis, letters: letters.to_vec(), logical_mask, logical_flip, checks, distance, table }
    }

    pub fn syndrome(&self, bits: u64) -> usize {
        self.checks
            .iter()
            .enumerate()
            .map(|(i, &(m, f))| ((((bits & m).count_ones() % 2 == 1) != f) as usize) << i)
            .sum()
    }

    pub fn raw_logical(&self, bits: u64) -> u8 {
        (((bits & self.logical_mask).count_ones() % 2 == 1) != self.logical_flip) as u8
    }

    /// A distance-3 readout code corrects single flips; weaker ones only detect.
    pub fn correctable(&self) -> bool {
        self.distance >= 3
    }
}

// Phase of a Hermitian Pauli: +1 or -1 maps to false/true.
fn sign_flip(p: &PauliString) -> bool {
    p.phase() == Phase::MINUS_ONE
}

fn insert_row(rows: &mut Vec<u64>, mut v: u64) -> bool {
    for &r in rows.iter() {
        let top = 63 - r.leading_zeros();
        if v >> top & 1 == 1 {
            v ^= r;
        }
    }
    if v == 0 {
        return false;
    }
    rows.push(v);
    rows.sort_by(|a, b| b.cmp(a));
    // keep reduced echelon order by leading bit
    let mut out: Vec<u64> = Vec::new();
    for mut r in rows.drain(..) {
        for &o in &out {
            let top = 63 - o.leading_zeros();
            if r >> top & 1 == 1 {
                r ^= o;
            }
        }
        if r != 0 {
            out.push(r);
            out.sort_by(|a, b| b.cmp(a));
        }
    }
    *rows = out;
    true
}

fn syndrome_of_flips(flips: u64, checks: &[(u64, bool)]) -> usize {
    checks.iter().enumerate().map(|(i, &(m, _))| (((flips & m).count_ones() % 2) as usize) << i).sum()
}

fn decoder_table(n: usize, checks: &[(u64, bool)], logical: u64) -> Vec<Option<u64>> {
    let size = 1usize << checks.len();
    let mut best: Vec<Option<(u32, u64, bool)>> = vec![None; size];
    // patterns in order of weight, then value
    let mut patterns: Vec<u64> = (0..1u64 << n).collect();
    patterns.sort_by_key(|p| (p.count_ones(), *p));
    for e in patterns {
        let s = syndrome_of_flips(e, checks);
        let w = e.count_ones();
        let lf = (e & logical).count_ones() % 2 == 1;
        match &mut best[s] {
            None => best[s] = Some((w, e, false)),
            Some((bw, be, amb)) => {
                if *bw == w && ((*be & logical).count_ones() % 2 == 1) != lf {
                    *amb = true;
                }
            }
        }
    }
    best.into_iter().map(|b| b.and_then(|(_, e, amb)| if amb { None } else { Some(e) })).collect()
}

fn classical_distance(n: usize, checks: &[(u64, bool)], logical: u64) -> usize {
    (1u64..1u64 << n)
        .filter(|&e| syndrome_of_flips(e, checks) == 0 && (e & logical).count_ones() % 2 == 1)
        .map(|e| e.count_ones() as usize)
        .min()
        .unwrap_or(n + 1)
}

/// Qubit reference inside a fragment: code data qubit or fragment-local ancilla.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QRef {
    D(usize),
    A(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragOp {
    pub kind: GateKind,
    pub qubits: Vec<QRef>,
    pub label: String,
}

/// What the Z-measurement of an ancilla means once the fragment has run.
#[derive(Debug, Clone, PartialEq)]
pub enum AncRole {
    /// Reject the shot when the bit is 1.
    Flag,
    /// Syndrome bit consumed by the protocol.
    Syndrome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ancilla {
    pub role: AncRole,
    pub label: String,
}

/// A circuit piece over one code block plus fresh ancillas (starting in |0> and
/// measured in Z after the piece).
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub name: String,
    pub n_data: usize,
    pub ancillas: Vec<Ancilla>,
    pub ops: Vec<FragOp>,
}

impl Fragment {
    pub fn new(name: &str, n_data: usize) -> Fragment {
        Fragment { name: name.to_string(), n_data, ancillas: Vec::new(), ops: Vec::new() }
    }

    pub fn add_ancilla(&mut self, role: AncRole, label: &str) -> usize {
        self.ancillas.push(Ancilla { role, label: label.to_string() });
        self.ancillas.len() - 1
    }

    pub fn op(&mut self, kind: GateKind, qubits: &[QRef], label: &str) {
        self.ops.push(FragOp { kind, qubits: qubits.to_vec(), label: label.to_string() });
    }

    pub fn d(&mut self, kind: GateKind, qubits: &[usize]) {
        let q: Vec<QRef> = qubits.iter().map(|&i| QRef::D(i)).collect();
        self.op(kind, &q, "");
    }

    pub fn cnot_dd(&mut self, c: usize, t: usize) {
        self.op(GateKind::Cnot, &[QRef::D(c), QRef::D(t)], "");
    }

    pub fn two_qubit_count(&self) -> usize {
        self.ops.iter().filter(|o| o.qubits.len() == 2).count()
    }

    pub fn append(&mut self, other: &Fragment) {
        let off = self.ancillas.len();
        self.ancillas.extend(other.ancillas.iter().cloned());
        for o in &other.ops {
            let qubits = o
                .qubits
                .iter()
                .map(|q| match q {
                    QRef::A(a) => QRef::A(a + off),
                    d => *d,
                })
                .collect();
            self.ops.push(FragOp { kind: o.kind, qubits, label: o.label.clone() });
        }
    }

    /// Lay the fragment out as a standalone circuit: data on 0..n_data, ancillas
    /// after, an initial reset and one final detection of everything.
    pub fn to_circuit(&self) -> crate::circuit::Circuit {
        use crate::circuit::{Circuit, CircuitEvent};
        let n = self.n_data + self.ancillas.len();
        let mut c = Circuit::new(&self.name, n);
        let all: Vec<usize> = (0..n).collect();
        c.push(CircuitEvent::reset(&all, "")).expect("in range");
        for o in &self.ops {
            let t: Vec<usize> = o
                .qubits
                .iter()
                .map(|q| match q {
                    QRef::D(i) => *i,
                    QRef::A(a) => self.n_data + a,
                })
                .collect();
            c.gate(o.kind, &t, &o.label).expect("valid fragment gate");
        }
        c.push(CircuitEvent::measure(&all, "final")).expect("in range");
        c
    }
}

/// Logical states an encoder can prepare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodeTarget {
    Zero,
    Plus,
}

/// Encoding circuit for `target`. With `ft`, a flag check rejects faults that leave
/// dangerous correlated errors (only needed for |0> of the [[10,1,2]] code and the
/// Steane |0>; the [[10,1,2]] |+> circuit is fault tolerant without a flag).
pub fn encode_fragment(code: CodeKind, target: EncodeTarget, ft: bool) -> Result<Fragment, CodeError> {
    match (code, target) {
        (CodeKind::TenZ, EncodeTarget::Zero) => Ok(ten_zero(ft)),
        (CodeKind::TenZ, EncodeTarget::Plus) => Ok(ten_plus()),
        (CodeKind::Steane, EncodeTarget::Zero) => Ok(steane_zero(ft)),
        (CodeKind::Steane, EncodeTarget::Plus) => {
            let mut f = steane_zero(ft);
            f.name = format!("steane_plus{}", if ft { "_ft" } else { "" });
            for q in 0..7 {
                f.d(GateKind::H, &[q]);
            }
            Ok(f)
        }
        (CodeKind::TenX, _) => Err(CodeError::Unsupported {
            what: "direct encoder (build the unrotated protocol and apply the H dual)".into(),
            code: code.name().into(),
        }),
    }
}

/// Standalone encoder circuit with the flag (if any) measured in the final detection.
pub fn encode_circuit(code: CodeKind, target: EncodeTarget, ft: bool) -> Result<crate::circuit::Circuit, CodeError> {
    Ok(encode_fragment(code, target, ft)?.to_circuit())
}

fn ten_zero(ft: bool) -> Fragment {
    let mut f = Fragment::new(if ft { "ten_zero_ft" } else { "ten_zero" }, 10);
    // pivots 8, 9, 10 spread the three X-type generators
    f.d(GateKind::H, &[7]);
    f.d(GateKind::H, &[8]);
    f.d(GateKind::H, &[9]);
    for (p, ts) in [(7, [2, 0, 1, 3]), (8, [2, 4, 1, 5]), (9, [5, 3, 6, 2])] {
        for t in ts {
            f.cnot_dd(p, t);
        }
    }
    if ft {
        // Z3 Z6 Z8 (a weight-3 generator) catches the correlated X errors.
        let a = f.add_ancilla(AncRole::Flag, "flag:prep");
        for d in [2, 5, 7] {
            f.op(GateKind::Cnot, &[QRef::D(d), QRef::A(a)], "flag:prep");
        }
    }
    f
}

fn ten_plus() -> Fragment {
    let mut f = Fragment::new("ten_plus", 10);
    for p in [2, 7, 8, 9] {
        f.d(GateKind::H, &[p]);
    }
    for (c, t) in [(2, 5), (7, 5), (2, 1), (9, 1), (2, 3), (8, 3), (2, 0), (8, 0), (9, 0), (5, 4), (9, 4), (3, 6), (7, 6)] {
        f.cnot_dd(c, t);
    }
    f
}

fn steane_zero(ft: bool) -> Fragment {
    let mut f = Fragment::new(if ft { "steane_zero_ft" } else { "steane_zero" }, 7);
    for p in [0, 4, 6] {
        f.d(GateKind::H, &[p]);
    }
    for (c, t) in [(0, 1), (4, 1), (0, 3), (6, 3), (4, 5), (6, 5), (1, 2), (6, 2)] {
        f.cnot_dd(c, t);
    }
    if ft {
        // Z3 Z4 Z5 is a weight-3 stabilizer of |0>_L.
        let a = f.add_ancilla(AncRole::Flag, "flag:prep");
        for d in [2, 3, 4] {
            f.op(GateKind::Cnot, &[QRef::D(d), QRef::A(a)], "flag:prep");
        }
    }
    f
}

/// Fixed 6-CNOT CCZ template on (a, b, c).
pub fn ccz_template(a: QRef, b: QRef, c: QRef) -> Vec<(GateKind, Vec<QRef>)> {
    use GateKind::*;
    vec![
        (Cnot, vec![b, c]),
        (Tdag, vec![c]),
        (Cnot, vec![a, c]),
        (T, vec![c]),
        (Cnot, vec![b, c]),
        (Tdag, vec![c]),
        (Cnot, vec![a, c]),
        (T, vec![b]),
        (T, vec![c]),
        (Cnot, vec![a, b]),
        (T, vec![a]),
        (Tdag, vec![b]),
        (Cnot, vec![a, b]),
    ]
}

/// Transversal logical T of [[10,1,2]]: alternating T / T† on 1..7 and CCZ on 8,9,10.
pub fn logical_t_fragment(code: CodeKind) -> Result<Fragment, CodeError> {
    if code != CodeKind::TenZ {
        return Err(CodeError::Unsupported { what: "T_L fragment (rotated T is the H dual)".into(), code: code.name().into() });
    }
    let mut f = Fragment::new("t_logical", 10);
    for q in 0..7 {
        f.d(if q % 2 == 0 { GateKind::T } else { GateKind::Tdag }, &[q]);
    }
    for (k, q) in ccz_template(QRef::D(7), QRef::D(8), QRef::D(9)) {
        f.op(k, &q, "ccz");
    }
    Ok(f)
}

/// Standalone T_L circuit on a bare 10-qubit register.
pub fn logical_t_gate(code: CodeKind) -> Result<crate::circuit::Circuit, CodeError> {
    match code {
        CodeKind::TenZ => {
            let f = logical_t_fragment(code)?;
            let mut c = crate::circuit::Circuit::new("t_logical", 10);
            for o in &f.ops {
                let t: Vec<usize> = o.qubits.iter().map(|q| if let QRef::D(i) = q { *i } else { unreachable!() }).collect();
                c.gate(o.kind, &t, &o.label).expect("valid");
            }
            Ok(c)
        }
        CodeKind::TenX => {
            let inner = logical_t_gate(CodeKind::TenZ)?;
            let mut c = crate::circuit::Circuit::new("t_logical_x", 10);
            for q in 0..10 {
                c.gate(GateKind::H, &[q], "").expect("valid");
            }
            c.extend(&inner).expect("same size");
            for q in 0..10 {
                c.gate(GateKind::H, &[q], "").expect("valid");
            }
            Ok(c)
        }
        CodeKind::Steane => Err(CodeError::Unsupported { what: "T_L".into(), code: code.name().into() }),
    }
}

/// Logical gates with a transversal implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogicalGate {
    H,
    S,
    Sdag,
    X,
    Z,
    Cnot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalGateImpl {
    pub gate: String,
    pub code: CodeKind,
    pub transversal: bool,
    /// Physical gates on code qubits; for CNOT the second block is offset by `n`.
    pub ops: Vec<(GateKind, Vec<usize>)>,
}

pub fn transversal_gate(code: CodeKind, gate: LogicalGate) -> Result<LogicalGateImpl, CodeError> {
    use GateKind as G;
    let n = code.n();
    let per_qubit = |k: G, qs: &[usize]| -> Vec<(G, Vec<usize>)> { qs.iter().map(|&q| (k, vec![q])).collect() };
    let not_transversal = || CodeError::NotTransversal { gate: format!("{gate:?}"), code: code.name().into() };
    let ops = match (code, gate) {
        (_, LogicalGate::Cnot) => (0..n).map(|q| (G::Cnot, vec![q, q + n])).collect(),
        (CodeKind::Steane, LogicalGate::H) => per_qubit(G::H, &LOGICAL_SUPPORT),
        (CodeKind::Steane, LogicalGate::S) => per_qubit(G::Sdag, &LOGICAL_SUPPORT),
        (CodeKind::Steane, LogicalGate::Sdag) => per_qubit(G::S, &LOGICAL_SUPPORT),
        (CodeKind::Steane, LogicalGate::X) | (CodeKind::TenZ, LogicalGate::X) => per_qubit(G::X, &LOGICAL_SUPPORT),
        (CodeKind::Steane, LogicalGate::Z) | (CodeKind::TenZ, LogicalGate::Z) => per_qubit(G::Z, &LOGICAL_SUPPORT),
        (CodeKind::TenZ, LogicalGate::S) | (CodeKind::TenZ, LogicalGate::Sdag) => {
            // T_L squared: the CCZ part squares to the identity.
            let (even, odd) = if gate == LogicalGate::S { (G::S, G::Sdag) } else { (G::Sdag, G::S) };
            (0..7).map(|q| (if q % 2 == 0 { even } else { odd }, vec![q])).collect()
        }
        (CodeKind::TenX, LogicalGate::X) => per_qubit(G::Z, &LOGICAL_SUPPORT),
        (CodeKind::TenX, LogicalGate::Z) => per_qubit(G::X, &LOGICAL_SUPPORT),
        (CodeKind::TenZ, LogicalGate::H) | (CodeKind::TenX, _) => return Err(not_transversal()),
    };
    Ok(LogicalGateImpl { gate: format!("{gate:?}"), code, transversal: true, ops })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_counts() {
        assert_eq!(CodeSpec::steane().generators.len(), 6);
        assert_eq!(CodeSpec::ten_z().generators.len(), 9);
        assert!(CodeSpec::ten_z().group().is_valid_stabilizer_group());
        assert_eq!(CodeSpec::ten_z().generators[8].to_sparse(), "Z2.Z3.Z10");
    }

    #[test]
    fn readout_distances() {
        let a = CodeSpec::steane();
        for b in Basis::ALL {
            let p = a.readout_plan(b);
            assert_eq!(p.checks.len(), 3, "{b:?}");
            assert_eq!(p.distance, 3);
        }
        let t = CodeSpec::ten_z();
        assert_eq!(t.readout_plan(Basis::Z).checks.len(), 6);
        assert_eq!(t.readout_plan(Basis::Z).distance, 4);
        assert_eq!(t.readout_plan(Basis::X).distance, 2);
        assert_eq!(t.readout_plan(Basis::Y).checks.len(), 3);
    }

    #[test]
    fn steane_y_logical_sign() {
        // i (XZ)^7 = i (-iY)^7 = -Y^7
        let y = CodeSpec::steane().logical_y();
        assert_eq!(y.phase(), Phase::MINUS_ONE);
        assert_eq!(CodeSpec::steane().readout_plan(Basis::Y).logical_flip, true);
    }

    #[test]
    fn h_not_transversal_on_ten() {
        assert!(matches!(transversal_gate(CodeKind::TenZ, LogicalGate::H), Err(CodeError::NotTransversal { .. })));
        assert_eq!(encode_fragment(CodeKind::TenZ, EncodeTarget::Zero, true).unwrap().two_qubit_count(), 15);
        assert_eq!(encode_fragment(CodeKind::TenZ, EncodeTarget::Plus, false).unwrap().two_qubit_count(), 13);
        assert_eq!(logical_t_fragment(CodeKind::TenZ).unwrap().two_qubit_count(), 6);
    }
}
