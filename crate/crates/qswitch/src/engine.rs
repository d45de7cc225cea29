//! Monte Carlo orchestration: shots, batching, acceptance accounting and the
//! derived experiments (p2 sweeps, error budgets).

use crate::exec::{run_shot, stream, BranchMode, ExecError, PreparedProtocol};
use crate::noise::{reduce_model, FaultSource, NoiseError, NoiseParams};
use crate::protocols::{build, settings, Level, Preset, PresetSpec, ProtocolError, Setting, TomographyKind, VariantOptions};
use crate::scalar::Real;
use crate::tomography::{
    choi_from_outputs, entanglement_witness, process_fidelity, single_qubit_state, state_fidelity, two_qubit_state, Counts,
    ParityData, ReadoutPolicy, ShotRecord, TomographyError,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
}

fn default_batches() -> usize {
    5
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

/// One experiment: a preset at one level, run for `shots` shots per setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub preset: String,
    pub level: Level,
    #[serde(default)]
    pub options: VariantOptions,
    #[serde(default)]
    pub rotated: bool,
    #[serde(default)]
    pub noise: NoiseParams,
    pub shots: usize,
    pub seed: u64,
    #[serde(default = "default_policy")]
    pub policy: ReadoutPolicy,
    #[serde(default = "default_branch")]
    pub branch_mode: BranchMode,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_policy() -> ReadoutPolicy {
    ReadoutPolicy::Lookup
}

fn default_branch() -> BranchMode {
    BranchMode::Live
}

impl ExperimentConfig {
    pub fn new(preset: &str, level: Level, shots: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            preset: preset.to_string(),
            level,
            options: VariantOptions::default(),
            rotated: false,
            noise: NoiseParams::default(),
            shots,
            seed,
            policy: default_policy(),
            branch_mode: default_branch(),
            batches: default_batches(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.shots == 0 {
            return Err(EngineError::Config("shots must be at least 1".into()));
        }
        if self.batches == 0 {
            return Err(EngineError::Config("batches must be at least 1".into()));
        }
        if self.schema_version != SCHEMA_VERSION {
            return Err(EngineError::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.noise.validate()?;
        Preset::parse(&self.preset)?;
        Ok(())
    }

    pub fn spec(&self) -> Result<PresetSpec, EngineError> {
        Ok(PresetSpec { preset: Preset::parse(&self.preset)?, level: self.level, options: self.options, rotated: self.rotated })
    }
}

/// Per-setting tallies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub label: String,
    pub counts: Counts,
    /// Counts under trivial-syndrome post-selection.
    pub counts_trivial: Counts,
    pub two_qubit_gates: usize,
    pub midcirc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub preset: String,
    pub level: Level,
    pub rotated: bool,
    pub shots_per_setting: usize,
    pub total_shots: usize,
    pub accepted: usize,
    /// `None` when some setting had no accepted shot.
    pub fidelity: Option<f64>,
    pub fidelity_std: Option<f64>,
    pub acceptance_rate: f64,
    pub acceptance_std: f64,
    /// Acceptance when the branch point is emulated by committing to one branch
    /// in advance (half the live rate); equal to the live rate otherwise.
    pub acceptance_rate_emulated: f64,
    pub fidelity_trivial: Option<f64>,
    pub acceptance_rate_trivial: f64,
    /// Smallest partial-transpose eigenvalue of the two-qubit output.
    pub negativity: Option<f64>,
    pub entangled: Option<bool>,
    /// Resource counts `(two-qubit gates, mid-circuit detections)` per program.
    pub resources: Vec<(usize, usize)>,
    pub reject_reasons: BTreeMap<String, usize>,
    pub settings: Vec<SettingResult>,
}

impl ExperimentResult {
    pub fn degenerate(&self) -> bool {
        self.fidelity.is_none()
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    counts: Counts,
    trivial: Counts,
    rejects: BTreeMap<String, usize>,
}

impl Tally {
    fn new(blocks: usize) -> Tally {
        Tally { counts: Counts::new(blocks), trivial: Counts::new(blocks), rejects: BTreeMap::new() }
    }

    fn add(&mut self, r: &ShotRecord) {
        self.counts.add(r, false);
        self.trivial.add(r, true);
        if let Some(why) = &r.reject_reason {
            *self.rejects.entry(why.clone()).or_default() += 1;
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.counts.merge(&o.counts);
        self.trivial.merge(&o.trivial);
        for (k, v) in o.rejects {
            *self.rejects.entry(k).or_default() += v;
        }
        self
    }
}

/// Logical fidelity of a preset from per-setting counts (ordered as `settings`).
pub fn fidelity_from_counts<T: Real, D: ParityData + Clone>(preset: &Preset, ideal: &[Vec<Complex64>], counts: &[D]) -> Result<T, TomographyError> {
    match preset.tomography() {
        TomographyKind::Process => {
            let mut outs = Vec::with_capacity(4);
            for k in 0..4 {
                let c = [counts[3 * k].clone(), counts[3 * k + 1].clone(), counts[3 * k + 2].clone()];
                outs.push(single_qubit_state::<T, _>(&c)?);
            }
            let outs: [_; 4] = outs.try_into().map_err(|_| TomographyError::MissingSetting("process input".into()))?;
            let choi = choi_from_outputs(&outs)?;
            let u = preset.ideal_unitary().ok_or_else(|| TomographyError::MissingSetting("unitary".into()))?;
            process_fidelity(&choi, &u)
        }
        TomographyKind::State1 => {
            let c = [counts[0].clone(), counts[1].clone(), counts[2].clone()];
            state_fidelity(&single_qubit_state::<T, _>(&c)?, &ideal[0])
        }
        TomographyKind::State2 => state_fidelity(&two_qubit_state::<T, _>(counts)?, &ideal[0]),
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Shot index `i` of setting `s` uses streams `2g` and `2g + 1`, `g = s * shots + i`,
/// so results do not depend on how shots are scheduled.
fn run_setting<T: Real>(
    pp: &PreparedProtocol,
    cfg: &ExperimentConfig,
    setting: usize,
    range: std::ops::Range<usize>,
    blocks: usize,
) -> Result<Tally, EngineError> {
    range
        .into_par_iter()
        .map(|i| {
            let g = (setting * cfg.shots + i) as u64;
            let (mut fr, mut mr) = (stream(cfg.seed, 2 * g), stream(cfg.seed, 2 * g + 1));
            let o = run_shot::<T>(pp, &cfg.noise, cfg.branch_mode, &mut fr, &mut mr)?;
            let it = pp.protocol.programs[o.program].interpret(&o.bits);
            Ok(ShotRecord::from_interpretation(setting, o.program, &it, o.branch_ok, o.n_faults, cfg.policy))
        })
        .try_fold(
            || Tally::new(blocks),
            |mut t, r: Result<ShotRecord, EngineError>| {
                t.add(&r?);
                Ok(t)
            },
        )
        .try_reduce(|| Tally::new(blocks), |a, b| Ok(a.merge(b)))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, EngineError> {
    run_experiment_with::<f64>(cfg)
}

/// Same as [`run_experiment`] with an explicit scalar type for the state vector.
pub fn run_experiment_with<T: Real>(cfg: &ExperimentConfig) -> Result<ExperimentResult, EngineError> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let sets: Vec<Setting> = settings(&spec.preset);
    let batches = cfg.batches.min(cfg.shots);
    let mut per_batch: Vec<Vec<Tally>> = vec![Vec::new(); batches];
    let mut setting_results = Vec::new();
    let mut ideals = Vec::new();
    let mut resources = Vec::new();
    for (s, st) in sets.iter().enumerate() {
        let bp = build(&spec, st, false)?;
        let blocks = st.bases.len();
        ideals.push(bp.ideal.clone());
        let main = bp.protocol.main().count_resources();
        if s == 0 {
            resources = bp.protocol.programs.iter().map(|p| p.count_resources()).collect();
        }
        let pp = PreparedProtocol::new(bp.protocol);
        let mut total = Tally::new(blocks);
        for b in 0..batches {
            let lo = cfg.shots * b / batches;
            let hi = cfg.shots * (b + 1) / batches;
            let t = run_setting::<T>(&pp, cfg, s, lo..hi, blocks)?;
            total = total.merge(t.clone());
            per_batch[b].push(t);
        }
        setting_results.push((st.label(), total, main));
    }

    let all_counts: Vec<Counts> = setting_results.iter().map(|(_, t, _)| t.counts.clone()).collect();
    let all_trivial: Vec<Counts> = setting_results.iter().map(|(_, t, _)| t.trivial.clone()).collect();
    let fid = |c: &[Counts]| fidelity_from_counts::<T, _>(&spec.preset, &ideals, c).ok().map(|f| f.to_f64().unwrap_or(f64::NAN));
    let fidelity = fid(&all_counts);
    let fidelity_trivial = fid(&all_trivial);
    let batch_f: Option<Vec<f64>> = per_batch
        .iter()
        .map(|ts| fid(&ts.iter().map(|t| t.counts.clone()).collect::<Vec<_>>()))
        .collect();
    let batch_ar: Vec<f64> = per_batch
        .iter()
        .map(|ts| {
            let (a, n) = ts.iter().fold((0, 0), |(a, n), t| (a + t.counts.accepted, n + t.counts.total));
            a as f64 / n as f64
        })
        .collect();
    let fidelity_std = batch_f.map(|v: Vec<f64>| mean_std(&v).1);
    let (_, acceptance_std) = mean_std(&batch_ar);

    let total_shots: usize = all_counts.iter().map(|c| c.total).sum();
    let accepted: usize = all_counts.iter().map(|c| c.accepted).sum();
    let accepted_trivial: usize = all_trivial.iter().map(|c| c.accepted).sum();
    let acceptance_rate = accepted as f64 / total_shots as f64;
    let branching = build(&spec, &sets[0], false)?.protocol.branch.is_some();
    let acceptance_rate_emulated = if branching && cfg.branch_mode == BranchMode::Live { acceptance_rate / 2.0 } else { acceptance_rate };

    let (negativity, entangled) = if spec.preset.tomography() == TomographyKind::State2 {
        match two_qubit_state::<T, _>(&all_counts).and_then(|r| entanglement_witness(&r)) {
            Ok(w) => (w.negativity.to_f64(), Some(w.entangled)),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };

    let mut reject_reasons = BTreeMap::new();
    let settings_out = setting_results
        .into_iter()
        .map(|(label, t, (g2, mc))| {
            for (k, v) in &t.rejects {
                *reject_reasons.entry(k.clone()).or_insert(0) += v;
            }
            SettingResult { label, counts: t.counts, counts_trivial: t.trivial, two_qubit_gates: g2, midcirc: mc }
        })
        .collect();

    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        preset: spec.preset.name(),
        level: cfg.level,
        rotated: cfg.rotated,
        shots_per_setting: cfg.shots,
        total_shots,
        accepted,
        fidelity,
        fidelity_std,
        acceptance_rate,
        acceptance_std,
        acceptance_rate_emulated,
        fidelity_trivial,
        acceptance_rate_trivial: accepted_trivial as f64 / total_shots as f64,
        negativity,
        entangled,
        resources,
        reject_reasons,
        settings: settings_out,
    })
}

/// Noise scenarios of the p2 sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// The configured parameters with p2 replaced.
    Current,
    /// Idle dephasing and mid-circuit rates divided by ten.
    Reduced,
    /// Two-qubit depolarizing only.
    P2Only,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Current, Scenario::Reduced, Scenario::P2Only];

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Current => "current",
            Scenario::Reduced => "reduced",
            Scenario::P2Only => "p2_only",
        }
    }

    pub fn params(&self, base: &NoiseParams, p2: f64) -> NoiseParams {
        let mut p = match self {
            Scenario::Current => base.clone(),
            Scenario::Reduced => base.scaled(&[FaultSource::Idle, FaultSource::Midcirc], 0.1),
            Scenario::P2Only => reduce_model(base, &[FaultSource::Gate2q]),
        };
        p.p2 = p2;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scenario: Scenario,
    pub level: Level,
    pub p2: f64,
    pub fidelity: Option<f64>,
    pub infidelity: Option<f64>,
    pub acceptance_rate: f64,
}

/// Infidelity against p2 for the configured preset at each of `levels`.
pub fn sweep_p2(cfg: &ExperimentConfig, scenarios: &[Scenario], levels: &[Level], p2_values: &[f64]) -> Result<Vec<SweepPoint>, EngineError> {
    if p2_values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(EngineError::Config("sweep values must be finite and nonnegative".into()));
    }
    let mut out = Vec::new();
    for &sc in scenarios {
        for &level in levels {
            for &p2 in p2_values {
                let mut c = cfg.clone();
                c.level = level;
                c.noise = sc.params(&cfg.noise, p2);
                let r = run_experiment(&c)?;
                out.push(SweepPoint {
                    scenario: sc,
                    level,
                    p2,
                    fidelity: r.fidelity,
                    infidelity: r.fidelity.map(|f| 1.0 - f),
                    acceptance_rate: r.acceptance_rate,
                });
            }
        }
    }
    Ok(out)
}

/// Reduced models of the error budget: one source family kept at a time.
pub fn budget_scenarios() -> Vec<(&'static str, Vec<FaultSource>)> {
    vec![
        ("all", FaultSource::ALL.to_vec()),
        ("decoherence", vec![FaultSource::Idle]),
        ("two_qubit", vec![FaultSource::Gate2q]),
        ("midcirc", vec![FaultSource::Midcirc]),
        ("single_qubit", vec![FaultSource::Gate1q, FaultSource::Init, FaultSource::Meas]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub scenario: String,
    pub keep: Vec<FaultSource>,
    pub fidelity: Option<f64>,
    pub fidelity_std: Option<f64>,
    pub acceptance_rate: f64,
}

pub fn error_budget(cfg: &ExperimentConfig) -> Result<Vec<BudgetRow>, EngineError> {
    budget_scenarios()
        .into_iter()
        .map(|(name, keep)| {
            let mut c = cfg.clone();
            c.noise = reduce_model(&cfg.noise, &keep);
            let r = run_experiment(&c)?;
            Ok(BudgetRow { scenario: name.into(), keep, fidelity: r.fidelity, fidelity_std: r.fidelity_std, acceptance_rate: r.acceptance_rate })
        })
        .collect()
}
