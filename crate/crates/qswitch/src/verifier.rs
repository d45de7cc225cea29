//! Deterministic fault-tolerance certification.
//!
//! Every single fault the noise model can produce is injected in turn and every
//! measurement branch with nonzero probability is followed. At each leaf the final
//! readout distribution is read exactly from the amplitudes, in all three logical
//! bases, and compared with the ideal output after readout filtering. The default
//! filter decodes readouts of distance three or more and otherwise keeps only the
//! trivial syndrome, so an error the output code would miscorrect counts as a failure.
//!
//! The same exploration without faults gives exact noiseless fidelities.

use crate::codes::Basis;
use crate::engine::fidelity_from_counts;
use crate::exec::{ExecError, ExecPlan, Outcomes, Step, Trajectory};
use crate::noise::{fault_sites, FaultEvent, NoiseParams};
use crate::program::{BlockReadout, Program, Protocol};
use crate::protocols::{build, settings, LogicalInput, Preset, PresetSpec, ProtocolError, Setting, TomographyKind};
use crate::scalar::Real;
use crate::tomography::{entanglement_witness, logical_readout, two_qubit_state, Distribution, ReadoutPolicy, TomographyError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Leaves explored per fault before giving up.
pub const MAX_LEAVES: usize = 1 << 20;
const PROB_TOL: f64 = 1e-14;
const FID_TOL: f64 = 1e-9;
/// Readout filter used for certification.
pub const CERTIFY_POLICY: ReadoutPolicy = ReadoutPolicy::Decode;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("branch tree exceeds {0} leaves")]
    Capacity(usize),
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
}

/// One branch of a protocol run: the forced outcomes on the way and the exact
/// distribution of the final detection.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub path: Vec<u8>,
    pub weight: f64,
    pub program: usize,
    pub outcomes: Vec<LeafOutcome>,
}

#[derive(Debug, Clone)]
pub struct LeafOutcome {
    pub prob: f64,
    pub protocol_ok: bool,
    pub blocks: Vec<BlockReadout>,
}

/// A fault restricted to the program (live branch) and readout basis it exists in.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteRef {
    pub fault: FaultEvent,
    pub program: Option<usize>,
    pub basis: Option<Basis>,
}

impl SiteRef {
    fn applies(&self, program: usize, basis: Basis) -> bool {
        self.program.is_none_or(|k| k == program) && self.basis.is_none_or(|b| b == basis)
    }

    pub fn describe(&self) -> String {
        let mut s = format!("{}@{} {}", self.fault.source.name(), self.fault.position, self.fault.pauli.to_sparse());
        if let Some(k) = self.program {
            s.push_str(&format!(" branch={k}"));
        }
        if let Some(b) = self.basis {
            s.push_str(&format!(" basis={}", b.letter()));
        }
        s
    }
}

/// Plans that keep final-readout qubits coherent.
pub fn exact_plans(p: &Protocol) -> Vec<ExecPlan> {
    p.programs.iter().map(ExecPlan::keep_final_coherent).collect()
}

fn leaf_of<T: Real>(t: &mut Trajectory<T>, p: &Program, plan: &ExecPlan, program: usize, path: Vec<u8>) -> Result<Leaf, ExecError> {
    t.apply_before_faults()?;
    let fin = p.final_event();
    let targets = &p.circuit.events[fin].targets;
    let mut outcomes = Vec::new();
    for (vals, prob) in t.outcome_distribution(targets, PROB_TOL) {
        let mut raw = t.bits.clone();
        for (j, v) in vals.iter().enumerate() {
            raw[plan.detect_bits[fin][j]] = *v;
        }
        let it = p.interpret(&raw);
        outcomes.push(LeafOutcome { prob, protocol_ok: it.accepted, blocks: it.blocks });
    }
    Ok(Leaf { path, weight: t.weight, program, outcomes })
}

/// Depth-first exploration of every measurement branch with the given faults,
/// where `faults(k)` lists the faults of live program `k` (prefix faults belong
/// to every program).
pub fn explore<T: Real>(
    proto: &Protocol,
    plans: &[ExecPlan],
    faults: &dyn Fn(usize) -> Vec<FaultEvent>,
    max_leaves: usize,
) -> Result<Vec<Leaf>, VerifyError> {
    let branch_at = proto.branch.as_ref().map(|b| b.at);
    let p0 = &proto.programs[0];
    let mut t0 = Trajectory::<T>::new(p0);
    let mut first = faults(0);
    if let Some(at) = branch_at {
        first.retain(|f| f.position < at);
    }
    t0.add_faults(first);
    let mut stack: Vec<(Trajectory<T>, usize, bool, Vec<u8>)> = vec![(t0, 0, branch_at.is_some(), Vec::new())];
    let mut leaves = Vec::new();
    while let Some((mut t, k, in_prefix, path)) = stack.pop() {
        let p = &proto.programs[k];
        let stop = if in_prefix { branch_at.expect("branch") } else { p.final_event() };
        match t.run(p, &plans[k], stop, Outcomes::Forced)? {
            Step::Branch { .. } => {
                for bit in [1u8, 0] {
                    let mut u = t.clone();
                    u.force(bit);
                    let mut q = path.clone();
                    q.push(bit);
                    stack.push((u, k, in_prefix, q));
                }
            }
            Step::Done if in_prefix => {
                let b = proto.branch.as_ref().expect("branch");
                let k = b.choose(&t.bits);
                t.switch_program(&proto.programs[k]);
                t.add_faults(faults(k).into_iter().filter(|f| f.position >= b.at).collect());
                stack.push((t, k, false, path));
            }
            Step::Done => {
                leaves.push(leaf_of(&mut t, p, &plans[k], k, path)?);
                if leaves.len() > max_leaves {
                    return Err(VerifyError::Capacity(max_leaves));
                }
            }
        }
    }
    Ok(leaves)
}

/// Accepted logical-outcome mass of one leaf (single output block).
#[derive(Debug, Clone, Copy, Default)]
struct BasisStats {
    protocol_ok: f64,
    /// Accepted by the readout policy: total mass and mass of logical value 0.
    trivial: f64,
    trivial0: f64,
    nontrivial: f64,
    /// Accepted mass whose syndrome was nonzero but corrected by the readout.
    corrected: f64,
    syndrome: usize,
}

fn basis_stats(leaf: &Leaf, policy: ReadoutPolicy) -> BasisStats {
    let mut s = BasisStats::default();
    let mut best = 0.0;
    for o in &leaf.outcomes {
        if !o.protocol_ok {
            continue;
        }
        s.protocol_ok += o.prob;
        let r = logical_readout(&o.blocks[0], policy);
        match r.value {
            Some(v) => {
                if r.syndrome != 0 {
                    s.corrected += o.prob;
                }
                s.trivial += o.prob;
                if v == 0 {
                    s.trivial0 += o.prob;
                }
            }
            None => {
                s.nontrivial += o.prob;
                if o.prob > best {
                    best = o.prob;
                    s.syndrome = r.syndrome;
                }
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Rejected,
    AcceptedClean,
    AcceptedDetectable,
    FtViolation,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Rejected, Outcome::AcceptedClean, Outcome::AcceptedDetectable, Outcome::FtViolation];

    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Rejected => "rejected",
            Outcome::AcceptedClean => "accepted_clean",
            Outcome::AcceptedDetectable => "accepted_detectable",
            Outcome::FtViolation => "FT_VIOLATION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub site: String,
    pub input: LogicalInput,
    pub branch_bits: Vec<u8>,
    pub program: usize,
    pub outcome: Outcome,
    /// Smallest classical fidelity of the filtered logical outcome distribution
    /// with the ideal one, over the bases in which something was accepted.
    pub fidelity: f64,
    /// Most likely nontrivial readout syndrome among accepted outcomes (0 if none).
    pub syndrome: usize,
}

/// Per-input programs in the three readout bases.
#[derive(Debug, Clone)]
pub struct Case {
    pub input: LogicalInput,
    pub ideal: Vec<Complex64>,
    pub protocols: Vec<Protocol>,
    pub plans: Vec<Vec<ExecPlan>>,
    /// P(logical value 0) of the ideal output per basis.
    ideal_p0: [f64; 3],
    clean: Vec<BTreeMap<Vec<u8>, (usize, BasisStats)>>,
    policy: ReadoutPolicy,
}

fn ideal_p0(ideal: &[Complex64]) -> [f64; 3] {
    let (a, b) = (ideal[0], ideal[1]);
    let x = 2.0 * (a.conj() * b).re;
    let y = 2.0 * (a.conj() * b).im;
    let z = a.norm_sqr() - b.norm_sqr();
    [(1.0 + x) / 2.0, (1.0 + y) / 2.0, (1.0 + z) / 2.0]
}

fn classical_fidelity(p: f64, q: f64) -> f64 {
    let f = (p * q).max(0.0).sqrt() + ((1.0 - p) * (1.0 - q)).max(0.0).sqrt();
    (f * f).min(1.0)
}

fn index_leaves(leaves: Vec<Leaf>, policy: ReadoutPolicy) -> BTreeMap<Vec<u8>, (usize, BasisStats)> {
    leaves.into_iter().map(|l| (l.path.clone(), (l.program, basis_stats(&l, policy)))).collect()
}

impl Case {
    pub fn new(spec: &PresetSpec, input: LogicalInput, policy: ReadoutPolicy) -> Result<Case, VerifyError> {
        if spec.preset.tomography() != TomographyKind::Process {
            return Err(VerifyError::Unsupported(format!("verifier needs a single-block process preset, got {}", spec.preset.name())));
        }
        let mut protocols = Vec::new();
        let mut ideal = Vec::new();
        for b in Basis::ALL {
            let bp = build(spec, &Setting { input: Some(input), bases: vec![b] }, true)?;
            ideal = bp.ideal.clone();
            protocols.push(bp.protocol);
        }
        let plans: Vec<Vec<ExecPlan>> = protocols.iter().map(exact_plans).collect();
        let mut case = Case { input, policy, ideal_p0: ideal_p0(&ideal), ideal, protocols, plans, clean: Vec::new() };
        for b in 0..3 {
            let leaves = explore::<f64>(&case.protocols[b], &case.plans[b], &|_| Vec::new(), MAX_LEAVES)?;
            case.clean.push(index_leaves(leaves, policy));
        }
        Ok(case)
    }

    /// Every fault site of the noise model after the fault window opens.
    pub fn sites(&self, params: &NoiseParams) -> Vec<SiteRef> {
        let branch_at = self.protocols[0].branch.as_ref().map(|b| b.at);
        let nprog = self.protocols[0].programs.len();
        // common prefix of each program across the three bases
        let common: Vec<usize> = (0..nprog)
            .map(|k| {
                let ev0 = &self.protocols[0].programs[k].circuit.events;
                self.protocols
                    .iter()
                    .map(|p| ev0.iter().zip(&p.programs[k].circuit.events).take_while(|(a, b)| a == b).count())
                    .min()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = Vec::new();
        let tag = |k: usize| if branch_at.is_some() { Some(k) } else { None };
        for k in 0..nprog {
            let p = &self.protocols[0].programs[k];
            let lo = p.fault_start.max(if k > 0 || branch_at.is_some() { branch_at.unwrap_or(0) } else { 0 });
            for s in fault_sites(&p.circuit, params) {
                let pos = s.fault.position;
                if pos >= lo && pos < common[k] {
                    out.push(SiteRef { fault: s.fault, program: tag(k), basis: None });
                }
            }
            if k == 0 {
                if let Some(at) = branch_at {
                    for s in fault_sites(&p.circuit, params) {
                        let pos = s.fault.position;
                        if pos >= p.fault_start && pos < at {
                            out.push(SiteRef { fault: s.fault, program: None, basis: None });
                        }
                    }
                }
            }
            for (bi, proto) in self.protocols.iter().enumerate() {
                let pb = &proto.programs[k];
                for s in fault_sites(&pb.circuit, params) {
                    if s.fault.position >= common[k].max(pb.fault_start) {
                        out.push(SiteRef { fault: s.fault, program: tag(k), basis: Some(Basis::ALL[bi]) });
                    }
                }
            }
        }
        out
    }

    /// Classify every leaf reached with `site` injected (`None`: fault free).
    pub fn evaluate(&self, site: Option<&SiteRef>) -> Result<Vec<Verdict>, VerifyError> {
        let mut per_basis: Vec<std::borrow::Cow<'_, BTreeMap<Vec<u8>, (usize, BasisStats)>>> = Vec::new();
        for (bi, b) in Basis::ALL.iter().enumerate() {
            let touched = site.is_some_and(|s| s.basis.is_none_or(|x| x == *b));
            if touched {
                let s = site.expect("site");
                let f = |k: usize| if s.applies(k, *b) { vec![s.fault.clone()] } else { Vec::new() };
                let leaves = explore::<f64>(&self.protocols[bi], &self.plans[bi], &f, MAX_LEAVES)?;
                per_basis.push(std::borrow::Cow::Owned(index_leaves(leaves, self.policy)));
            } else {
                per_basis.push(std::borrow::Cow::Borrowed(&self.clean[bi]));
            }
        }
        let mut paths: Vec<&Vec<u8>> = per_basis.iter().flat_map(|m| m.keys()).collect();
        paths.sort();
        paths.dedup();
        let label = site.map(|s| s.describe()).unwrap_or_else(|| "none".into());
        let mut out = Vec::new();
        for path in paths {
            let stats: Vec<Option<&(usize, BasisStats)>> = per_basis.iter().map(|m| m.get(path)).collect();
            let program = stats.iter().flatten().map(|s| s.0).next().unwrap_or(0);
            let protocol_ok: f64 = stats.iter().flatten().map(|s| s.1.protocol_ok).sum();
            let (outcome, fidelity, syndrome) = if protocol_ok <= PROB_TOL {
                (Outcome::Rejected, 1.0, 0)
            } else {
                let mut fid: f64 = 1.0;
                let mut detectable = false;
                let mut syndrome = 0;
                for (bi, s) in stats.iter().enumerate() {
                    let Some((_, s)) = s else { continue };
                    if s.nontrivial + s.corrected > PROB_TOL {
                        detectable = true;
                        syndrome = syndrome.max(s.syndrome);
                    }
                    if s.trivial > PROB_TOL {
                        fid = fid.min(classical_fidelity(self.ideal_p0[bi], s.trivial0 / s.trivial));
                    }
                }
                let o = if fid < 1.0 - FID_TOL {
                    Outcome::FtViolation
                } else if detectable {
                    Outcome::AcceptedDetectable
                } else {
                    Outcome::AcceptedClean
                };
                (o, fid, syndrome)
            };
            out.push(Verdict { site: label.clone(), input: self.input, branch_bits: path.clone(), program, outcome, fidelity, syndrome });
        }
        Ok(out)
    }

    /// Sum of leaf weights of the fault-free tree in each basis.
    pub fn branch_weight_sums(&self) -> Result<Vec<f64>, VerifyError> {
        (0..3)
            .map(|b| Ok(explore::<f64>(&self.protocols[b], &self.plans[b], &|_| Vec::new(), MAX_LEAVES)?.iter().map(|l| l.weight).sum()))
            .collect()
    }
}

/// Inputs used for certification: one eigenstate per logical axis.
pub const VERIFY_INPUTS: [LogicalInput; 3] = [LogicalInput::Zero, LogicalInput::Plus, LogicalInput::PlusI];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteSummary {
    pub site: String,
    pub counts: BTreeMap<Outcome, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub preset: String,
    pub level: String,
    pub rotated: bool,
    pub sites: usize,
    pub leaves: usize,
    pub counts: BTreeMap<Outcome, usize>,
    pub violations: usize,
    /// Violating leaves (at most [`MAX_WITNESSES`]).
    pub witnesses: Vec<Verdict>,
    /// Largest deviation of a fault-free branch-weight sum from 1.
    pub max_weight_error: f64,
    pub per_site: Vec<SiteSummary>,
}

pub const MAX_WITNESSES: usize = 64;

impl VerifyReport {
    pub fn summary_table(&self) -> String {
        let mut s = format!("{} {}{}: {} sites, {} leaves\n", self.preset, self.level, if self.rotated { " (rotated)" } else { "" }, self.sites, self.leaves);
        for o in Outcome::ALL {
            s.push_str(&format!("  {:<20} {}\n", o.name(), self.counts.get(&o).copied().unwrap_or(0)));
        }
        s.push_str(&format!("  {} violations\n", self.violations));
        for w in self.witnesses.iter().take(10) {
            s.push_str(&format!("  witness: {} input={} bits={:?} fidelity={:.6}\n", w.site, w.input.name(), w.branch_bits, w.fidelity));
        }
        s
    }
}

/// Exhaustive single-fault check of one preset.
pub fn certify_ft(spec: &PresetSpec, policy: ReadoutPolicy) -> Result<VerifyReport, VerifyError> {
    let params = NoiseParams::default();
    let cases: Vec<Case> = VERIFY_INPUTS.iter().map(|&i| Case::new(spec, i, policy)).collect::<Result<_, _>>()?;
    let mut max_weight_error: f64 = 0.0;
    for c in &cases {
        for w in c.branch_weight_sums()? {
            max_weight_error = max_weight_error.max((w - 1.0).abs());
        }
    }
    let sites = cases[0].sites(&params);
    let results: Vec<Vec<Verdict>> = sites
        .par_iter()
        .map(|s| {
            let mut v = Vec::new();
            for c in &cases {
                v.extend(c.evaluate(Some(s))?);
            }
            Ok(v)
        })
        .collect::<Result<_, VerifyError>>()?;
    let mut counts = BTreeMap::new();
    let mut witnesses = Vec::new();
    let mut per_site = Vec::new();
    let mut leaves = 0;
    let mut violations = 0;
    for (s, vs) in sites.iter().zip(results) {
        let mut c = BTreeMap::new();
        for v in vs {
            leaves += 1;
            *c.entry(v.outcome).or_insert(0) += 1;
            *counts.entry(v.outcome).or_insert(0) += 1;
            if v.outcome == Outcome::FtViolation {
                violations += 1;
                if witnesses.len() < MAX_WITNESSES {
                    witnesses.push(v);
                }
            }
        }
        per_site.push(SiteSummary { site: s.describe(), counts: c });
    }
    Ok(VerifyReport {
        preset: spec.preset.name(),
        level: spec.level.name().into(),
        rotated: spec.rotated,
        sites: sites.len(),
        leaves,
        counts,
        violations,
        witnesses,
        max_weight_error,
        per_site,
    })
}

/// Exact noiseless figures of merit of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub fidelity: f64,
    pub acceptance_rate: f64,
    /// Smallest partial-transpose eigenvalue of the two-qubit output.
    pub negativity: Option<f64>,
}

/// Exact fault-free fidelity and acceptance, by branch enumeration.
pub fn exact_noiseless(spec: &PresetSpec, policy: ReadoutPolicy) -> Result<ExactResult, VerifyError> {
    let sets: Vec<Setting> = settings(&spec.preset);
    let mut dists = Vec::new();
    let mut ideals = Vec::new();
    let mut accepted = 0.0;
    for st in &sets {
        let bp = build(spec, st, false)?;
        ideals.push(bp.ideal.clone());
        let plans = exact_plans(&bp.protocol);
        let leaves = explore::<f64>(&bp.protocol, &plans, &|_| Vec::new(), MAX_LEAVES)?;
        let mut d = Distribution::new(st.bases.len());
        for l in &leaves {
            for o in &l.outcomes {
                let w = l.weight * o.prob;
                d.total += w;
                if !o.protocol_ok {
                    continue;
                }
                let vals: Option<Vec<u8>> = o.blocks.iter().map(|b| logical_readout(b, policy).value).collect();
                if let Some(vals) = vals {
                    let idx = vals.iter().fold(0usize, |a, &v| (a << 1) | v as usize);
                    d.hist[idx] += w;
                }
            }
        }
        accepted += d.accepted() / d.total;
        dists.push(d);
    }
    let fidelity = fidelity_from_counts::<f64, _>(&spec.preset, &ideals, &dists)?;
    let negativity = if spec.preset.tomography() == TomographyKind::State2 {
        Some(entanglement_witness(&two_qubit_state::<f64, _>(&dists)?)?.negativity)
    } else {
        None
    };
    Ok(ExactResult { fidelity, acceptance_rate: accepted / sets.len() as f64, negativity })
}

/// Presets that must certify.
pub fn ft_presets() -> Vec<Preset> {
    vec![Preset::InitB, Preset::TGate, Preset::SwitchBToA, Preset::SwitchAToB]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Level;

    #[test]
    fn classical_fidelity_limits() {
        assert!((classical_fidelity(0.5, 0.5) - 1.0).abs() < 1e-12);
        assert!(classical_fidelity(1.0, 0.0) < 1e-12);
        assert!((classical_fidelity(1.0, 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_leaves_are_clean() {
        let spec = PresetSpec::new(Preset::SwitchBToA, Level::Ft);
        let c = Case::new(&spec, LogicalInput::Plus, ReadoutPolicy::Detect).unwrap();
        for v in c.evaluate(None).unwrap() {
            assert_eq!(v.outcome, Outcome::AcceptedClean);
        }
        for w in c.branch_weight_sums().unwrap() {
            assert!((w - 1.0).abs() < 1e-10);
        }
    }
}
