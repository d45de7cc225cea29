//! Logical readout decoding, shot records and linear-inversion tomography.

use crate::codes::{Basis, CodeKind, ReadoutPlan};
use crate::linalg::{fidelity, CMatrix, LinalgError};
use crate::program::{BlockReadout, Interpretation};
use crate::scalar::Real;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("no accepted shots for setting {0}")]
    NoShots(String),
    #[error("missing setting {0}")]
    MissingSetting(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// What a logical readout does with the syndrome of its classical checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutPolicy {
    /// Logical parity of the raw bits; checks ignored.
    Raw,
    /// Correct with the lookup decoder when the readout code has distance 3 or
    /// more; otherwise reject on a nonzero syndrome.
    Decode,
    /// Reject on any nonzero syndrome.
    Detect,
    /// Apply the minimum-weight lookup correction whenever it is unambiguous,
    /// whatever the distance; reject only ambiguous syndromes.
    Lookup,
}

impl ReadoutPolicy {
    pub fn parse(s: &str) -> Option<ReadoutPolicy> {
        match s {
            "raw" => Some(ReadoutPolicy::Raw),
            "decode" => Some(ReadoutPolicy::Decode),
            "detect" => Some(ReadoutPolicy::Detect),
            "lookup" => Some(ReadoutPolicy::Lookup),
            _ => None,
        }
    }
}

/// Readout plans are costly to derive (they enumerate the stabilizer group).
pub fn cached_plan(code: CodeKind, basis: Basis) -> &'static ReadoutPlan {
    static PLANS: OnceLock<HashMap<(CodeKind, Basis), ReadoutPlan>> = OnceLock::new();
    let m = PLANS.get_or_init(|| {
        let mut m = HashMap::new();
        for c in [CodeKind::Steane, CodeKind::TenZ, CodeKind::TenX] {
            let spec = c.spec();
            for b in Basis::ALL {
                m.insert((c, b), spec.readout_plan(b));
            }
        }
        m
    });
    &m[&(code, basis)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalOutcome {
    /// Logical bit (eigenvalue `(-1)^bit`), `None` when the readout rejects.
    pub value: Option<u8>,
    pub syndrome: usize,
}

pub fn logical_readout(r: &BlockReadout, policy: ReadoutPolicy) -> LogicalOutcome {
    let plan = cached_plan(r.code, r.basis);
    let raw = plan.raw_logical(r.bits);
    let syndrome = plan.syndrome(r.bits);
    let value = match policy {
        ReadoutPolicy::Raw => Some(raw),
        _ if syndrome == 0 => Some(raw),
        ReadoutPolicy::Detect => None,
        ReadoutPolicy::Lookup => plan.table[syndrome].map(|fix| raw ^ (((fix & plan.logical_mask).count_ones() % 2) as u8)),
        ReadoutPolicy::Decode => {
            if plan.correctable() {
                plan.table[syndrome].map(|fix| raw ^ (((fix & plan.logical_mask).count_ones() % 2) as u8))
            } else {
                None
            }
        }
    };
    LogicalOutcome { value, syndrome }
}

/// One shot after classical processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub setting: usize,
    pub program: usize,
    /// Passed every protocol check (flags, verifications, branch consistency).
    pub protocol_ok: bool,
    pub reject_reason: Option<String>,
    pub outcomes: Vec<LogicalOutcome>,
    pub n_faults: usize,
}

impl ShotRecord {
    pub fn from_interpretation(setting: usize, program: usize, it: &Interpretation, branch_ok: bool, n_faults: usize, policy: ReadoutPolicy) -> ShotRecord {
        let outcomes: Vec<LogicalOutcome> = it.blocks.iter().map(|b| logical_readout(b, policy)).collect();
        let reject_reason = if !branch_ok {
            Some("branch".to_string())
        } else if let Some(r) = &it.reject_reason {
            Some(r.clone())
        } else if outcomes.iter().any(|o| o.value.is_none()) {
            Some("readout".to_string())
        } else {
            None
        };
        ShotRecord { setting, program, protocol_ok: branch_ok && it.accepted, reject_reason, outcomes, n_faults }
    }

    pub fn accepted(&self) -> bool {
        self.reject_reason.is_none()
    }

    /// Accepted with a trivial readout syndrome on every block.
    pub fn accepted_trivial(&self) -> bool {
        self.protocol_ok && self.outcomes.iter().all(|o| o.syndrome == 0 && o.value.is_some())
    }
}

/// Keep records whose readout syndromes are all trivial.
pub fn trivial_syndrome_filter(records: &[ShotRecord]) -> Vec<ShotRecord> {
    records.iter().filter(|r| r.accepted_trivial()).cloned().collect()
}

/// Outcome histogram for one setting: index = joint logical bits (block 0 is the
/// most significant).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub accepted: usize,
    pub hist: Vec<usize>,
}

impl Counts {
    pub fn new(blocks: usize) -> Counts {
        Counts { total: 0, accepted: 0, hist: vec![0; 1 << blocks] }
    }

    pub fn add(&mut self, r: &ShotRecord, trivial_only: bool) {
        self.total += 1;
        let ok = if trivial_only { r.accepted_trivial() } else { r.accepted() };
        if ok {
            self.accepted += 1;
            let idx = r.outcomes.iter().fold(0usize, |acc, o| (acc << 1) | o.value.unwrap_or(0) as usize);
            self.hist[idx] += 1;
        }
    }

    pub fn merge(&mut self, other: &Counts) {
        self.total += other.total;
        self.accepted += other.accepted;
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
    }

}

/// Accepted outcome statistics of one setting, sampled or exact.
pub trait ParityData {
    /// Accepted weight (shot count or probability mass).
    fn weight(&self) -> f64;
    /// Unnormalized weight of joint outcome `i`.
    fn outcome(&self, i: usize) -> f64;
    fn outcomes(&self) -> usize;

    /// `<Z...Z>` over the listed blocks (mask, block 0 = highest bit).
    fn parity_expectation(&self, mask: usize) -> Option<f64> {
        let w = self.weight();
        if w <= 0.0 {
            return None;
        }
        let s: f64 = (0..self.outcomes())
            .map(|i| if (i & mask).count_ones() % 2 == 0 { self.outcome(i) } else { -self.outcome(i) })
            .sum();
        Some(s / w)
    }
}

impl ParityData for Counts {
    fn weight(&self) -> f64 {
        self.accepted as f64
    }
    fn outcome(&self, i: usize) -> f64 {
        self.hist[i] as f64
    }
    fn outcomes(&self) -> usize {
        self.hist.len()
    }
}

/// Exact accepted probability mass per joint outcome.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Distribution {
    pub total: f64,
    pub hist: Vec<f64>,
}

impl Distribution {
    pub fn new(blocks: usize) -> Distribution {
        Distribution { total: 0.0, hist: vec![0.0; 1 << blocks] }
    }

    pub fn accepted(&self) -> f64 {
        self.hist.iter().sum()
    }
}

impl ParityData for Distribution {
    fn weight(&self) -> f64 {
        self.accepted()
    }
    fn outcome(&self, i: usize) -> f64 {
        self.hist[i]
    }
    fn outcomes(&self) -> usize {
        self.hist.len()
    }
}

fn pauli_matrix<T: Real>(b: Option<Basis>) -> CMatrix<T> {
    let z = Complex::new(T::zero(), T::zero());
    let o = Complex::new(T::one(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let rows = match b {
        None => vec![vec![o, z], vec![z, o]],
        Some(Basis::X) => vec![vec![z, o], vec![o, z]],
        Some(Basis::Y) => vec![vec![z, -i], vec![i, z]],
        Some(Basis::Z) => vec![vec![o, z], vec![z, -o]],
    };
    CMatrix::from_rows(rows).expect("2x2")
}

/// Single-qubit state from X, Y, Z expectations (linear inversion, then clipped).
pub fn state_from_expectations<T: Real>(e: [f64; 3]) -> Result<CMatrix<T>, TomographyError> {
    let mut m = pauli_matrix::<T>(None);
    for (k, b) in Basis::ALL.iter().enumerate() {
        m = m.add(&pauli_matrix::<T>(Some(*b)).scale(Complex::new(T::of(e[k]), T::zero())))?;
    }
    Ok(m.scale(Complex::new(T::of(0.5), T::zero())).clip_to_density()?)
}

/// Single-qubit tomography: counts per basis X, Y, Z.
pub fn single_qubit_state<T: Real, D: ParityData>(per_basis: &[D; 3]) -> Result<CMatrix<T>, TomographyError> {
    let mut e = [0.0; 3];
    for k in 0..3 {
        e[k] = per_basis[k].parity_expectation(1).ok_or_else(|| TomographyError::NoShots(Basis::ALL[k].letter().to_string()))?;
    }
    state_from_expectations(e)
}

/// Two-qubit tomography from the nine basis settings `(a, b)` in X, Y, Z order
/// (index `3a + b`). Marginals average over the settings that contain them.
pub fn two_qubit_state<T: Real, D: ParityData>(settings: &[D]) -> Result<CMatrix<T>, TomographyError> {
    let mut rho = CMatrix::<T>::zeros(4);
    let ops: [Option<Basis>; 4] = [None, Some(Basis::X), Some(Basis::Y), Some(Basis::Z)];
    for (ia, a) in ops.iter().enumerate() {
        for (ib, b) in ops.iter().enumerate() {
            let coeff = if ia == 0 && ib == 0 {
                1.0
            } else {
                let mut acc = 0.0;
                let mut n = 0.0;
                for sa in 0..3 {
                    for sb in 0..3 {
                        let ok_a = ia == 0 || ia - 1 == sa;
                        let ok_b = ib == 0 || ib - 1 == sb;
                        if !(ok_a && ok_b) {
                            continue;
                        }
                        let mask = (if ia > 0 { 2 } else { 0 }) | (if ib > 0 { 1 } else { 0 });
                        let c = &settings[3 * sa + sb];
                        let e = c.parity_expectation(mask).ok_or_else(|| TomographyError::NoShots(format!("{sa}{sb}")))?;
                        acc += e * c.weight();
                        n += c.weight();
                    }
                }
                acc / n
            };
            let p = pauli_matrix::<T>(*a).kron(&pauli_matrix::<T>(*b));
            rho = rho.add(&p.scale(Complex::new(T::of(coeff / 4.0), T::zero())))?;
        }
    }
    Ok(rho.clip_to_density()?)
}

pub fn pure<T: Real>(v: &[Complex64]) -> CMatrix<T> {
    let c: Vec<Complex<T>> = v.iter().map(|a| Complex::new(T::of(a.re), T::of(a.im))).collect();
    CMatrix::outer(&c)
}

pub fn state_fidelity<T: Real>(rho: &CMatrix<T>, ideal: &[Complex64]) -> Result<T, TomographyError> {
    Ok(fidelity(rho, &pure::<T>(ideal))?)
}

/// Normalized Choi matrix `(1/2) Σ |i><j| ⊗ E(|i><j|)` from the outputs of the
/// inputs |0>, |1>, |+>, |+i>.
pub fn choi_from_outputs<T: Real>(out: &[CMatrix<T>; 4]) -> Result<CMatrix<T>, TomographyError> {
    let c = |v: f64| Complex::new(T::of(v), T::zero());
    let e_i = out[0].add(&out[1])?;
    let e_x = out[2].scale(c(2.0)).sub(&e_i)?;
    let e_y = out[3].scale(c(2.0)).sub(&e_i)?;
    let iy = e_y.scale(Complex::new(T::zero(), T::one()));
    let e01 = e_x.add(&iy)?.scale(c(0.5));
    let e10 = e_x.sub(&iy)?.scale(c(0.5));
    let blocks = [[&out[0], &e01], [&e10, &out[1]]];
    let mut j = CMatrix::<T>::zeros(4);
    for i in 0..2 {
        for k in 0..2 {
            for r in 0..2 {
                for s in 0..2 {
                    j.set(2 * i + r, 2 * k + s, blocks[i][k].get(r, s) * c(0.5));
                }
            }
        }
    }
    Ok(j.clip_to_density()?)
}

/// Choi state of a unitary: `(1/√2) Σ |i> ⊗ U|i>`.
pub fn unitary_choi_vector(u: &[Complex64; 4]) -> Vec<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // |i>|j> index 2i + j; U|i> = column i
    vec![u[0] * h, u[2] * h, u[1] * h, u[3] * h]
}

pub fn process_fidelity<T: Real>(choi: &CMatrix<T>, u: &[Complex64; 4]) -> Result<T, TomographyError> {
    Ok(fidelity(choi, &pure::<T>(&unitary_choi_vector(u)))?)
}

/// Partial-transpose test of a two-qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness<T> {
    pub entangled: bool,
    /// Smallest eigenvalue of the partial transpose; negative certifies entanglement.
    pub negativity: T,
    pub margin: T,
}

pub fn entanglement_witness<T: Real>(rho: &CMatrix<T>) -> Result<Witness<T>, TomographyError> {
    let pt = rho.partial_transpose(2, 2)?;
    let min = pt.hermitize().eigenvalues().into_iter().fold(T::infinity(), T::min);
    Ok(Witness { entangled: min < T::zero(), negativity: min, margin: min.abs() })
}

/// Write shot records as CSV (one row per shot, outcomes as `value:syndrome`).
pub fn write_records_csv<W: Write>(w: W, records: &[ShotRecord]) -> Result<(), TomographyError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["setting", "program", "protocol_ok", "reject_reason", "outcomes", "n_faults"])?;
    for r in records {
        let outs: Vec<String> = r
            .outcomes
            .iter()
            .map(|o| format!("{}:{}", o.value.map(|v| v.to_string()).unwrap_or_else(|| "-".into()), o.syndrome))
            .collect();
        wr.write_record([
            r.setting.to_string(),
            r.program.to_string(),
            r.protocol_ok.to_string(),
            r.reject_reason.clone().unwrap_or_default(),
            outs.join(" "),
            r.n_faults.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn matrix_to_json<T: Real>(m: &CMatrix<T>) -> serde_json::Value {
    let d = m.dim();
    let rows: Vec<Vec<[f64; 2]>> = (0..d)
        .map(|r| (0..d).map(|c| [m.get(r, c).re.to_f64().unwrap_or(f64::NAN), m.get(r, c).im.to_f64().unwrap_or(f64::NAN)]).collect())
        .collect();
    serde_json::json!(rows)
}
