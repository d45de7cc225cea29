mod output;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use output::{num, opt, Output, Table};
use qswitch::engine::{error_budget, run_experiment, sweep_p2, ExperimentConfig, ExperimentResult, Scenario};
use qswitch::protocols::{BlochSpec, Level, Preset, PresetSpec};
use qswitch::tomography::ReadoutPolicy;
use qswitch::verifier::{certify_ft, VerifyReport};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Noisy trajectory simulation and fault-tolerance checks of code switching.
#[derive(Parser)]
#[command(name = "qswitch", version)]
struct Cli {
    /// Worker threads (default: QSWITCH_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its summary and per-setting tables.
    Run(ExpArgs),
    /// Infidelity against the two-qubit error rate.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma-separated scenarios: current, reduced, p2_only.
        #[arg(long, default_value = "current,reduced,p2_only")]
        scenarios: String,
        #[arg(long, default_value = "nft,ft")]
        levels: String,
        #[arg(long, default_value = "0.027,0.01,0.003,0.001")]
        p2: String,
    },
    /// Fidelity with each error source acting alone.
    Budget(ExpArgs),
    /// Exhaustive single-fault certification.
    Verify {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = "ft")]
        level: String,
        #[arg(long)]
        rotated: bool,
        /// Readout filter applied at the leaves.
        #[arg(long, default_value = "decode")]
        policy: String,
        /// Exit with status 2 if any violation is found.
        #[arg(long)]
        expect_ft: bool,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// All Bloch-sphere presets, in the Z and X variants of the target code.
    Bloch {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma-separated code variants: z, x.
        #[arg(long, default_value = "z,x")]
        codes: String,
    },
    /// The three two-block CNOT protocols.
    Cnot(ExpArgs),
    /// Print the preset names.
    ListPresets,
}

#[derive(Args, Clone)]
struct ExpArgs {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    level: Option<String>,
    /// Shots per tomography setting.
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rotated: bool,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    batches: Option<usize>,
    /// Noise field override, `name=value` (repeatable).
    #[arg(long = "noise", value_name = "NAME=VALUE")]
    noise: Vec<String>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

/// Bad input, reported with exit status 1.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

fn parse_value(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

impl ExpArgs {
    /// Config file (or defaults) with flag overrides, checked against the schema
    /// by a round trip through the typed config.
    fn config(&self, default_preset: &str, default_level: Level) -> Result<ExperimentConfig> {
        let mut v = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("reading {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text).map_err(|e| config_err(format!("parsing {}: {e}", p.display())))?
            }
            None => serde_json::to_value(ExperimentConfig::new(default_preset, default_level, 1000, 1))?,
        };
        let obj = v.as_object_mut().ok_or_else(|| config_err("config must be a JSON object"))?;
        for (k, val) in [
            ("preset", self.preset.clone().map(Value::String)),
            ("level", self.level.as_ref().map(|l| Value::String(l.to_ascii_lowercase()))),
            ("shots", self.shots.map(Value::from)),
            ("seed", self.seed.map(Value::from)),
            ("policy", self.policy.clone().map(Value::String)),
            ("batches", self.batches.map(Value::from)),
        ] {
            if let Some(val) = val {
                obj.insert(k.into(), val);
            }
        }
        if self.rotated {
            obj.insert("rotated".into(), Value::Bool(true));
        }
        if !self.noise.is_empty() {
            let noise = obj
                .entry("noise")
                .or_insert_with(|| serde_json::to_value(qswitch::noise::NoiseParams::default()).expect("serializable"));
            let nobj = noise.as_object_mut().ok_or_else(|| config_err("noise must be an object"))?;
            for kv in &self.noise {
                let (k, val) = kv.split_once('=').ok_or_else(|| config_err(format!("noise override {kv:?} is not NAME=VALUE")))?;
                nobj.insert(k.trim().to_string(), parse_value(val.trim()));
            }
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| config_err(format!("config: {e}")))?;
        cfg.preset = Preset::parse(&cfg.preset).map_err(|e| config_err(e.to_string()))?.name();
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_level(s: &str) -> Result<Level> {
    Level::parse(s).map_err(|e| config_err(e.to_string()))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(f).collect()
}

const SUMMARY_HEADER: [&str; 17] = [
    "preset",
    "level",
    "rotated",
    "shots_per_setting",
    "total_shots",
    "accepted",
    "fidelity",
    "fidelity_std",
    "acceptance_rate",
    "acceptance_std",
    "acceptance_rate_emulated",
    "fidelity_trivial",
    "acceptance_rate_trivial",
    "negativity",
    "two_qubit_gates",
    "midcirc",
    "seed",
];

fn summary_row(r: &ExperimentResult, seed: u64) -> Vec<String> {
    let res = |f: fn(&(usize, usize)) -> usize| r.resources.iter().map(|x| f(x).to_string()).collect::<Vec<_>>().join(";");
    vec![
        r.preset.clone(),
        r.level.name().into(),
        r.rotated.to_string(),
        r.shots_per_setting.to_string(),
        r.total_shots.to_string(),
        r.accepted.to_string(),
        opt(r.fidelity),
        opt(r.fidelity_std),
        num(r.acceptance_rate),
        num(r.acceptance_std),
        num(r.acceptance_rate_emulated),
        opt(r.fidelity_trivial),
        num(r.acceptance_rate_trivial),
        opt(r.negativity),
        res(|x| x.0),
        res(|x| x.1),
        seed.to_string(),
    ]
}

fn settings_table(results: &[&ExperimentResult]) -> Result<Vec<u8>> {
    let mut t = Table::new(&["preset", "level", "rotated", "setting", "total", "accepted", "hist", "accepted_trivial", "hist_trivial", "two_qubit_gates", "midcirc"])?;
    let join = |h: &[usize]| h.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    for r in results {
        for s in &r.settings {
            t.row(&[
                r.preset.clone(),
                r.level.name().into(),
                r.rotated.to_string(),
                s.label.clone(),
                s.counts.total.to_string(),
                s.counts.accepted.to_string(),
                join(&s.counts.hist),
                s.counts_trivial.accepted.to_string(),
                join(&s.counts_trivial.hist),
                s.two_qubit_gates.to_string(),
                s.midcirc.to_string(),
            ])?;
        }
    }
    t.into_bytes()
}

fn cmd_run(a: &ExpArgs) -> Result<()> {
    let cfg = a.config("switch_b_to_a", Level::Ft)?;
    log::info!("run {} {} shots={} seed={}", cfg.preset, cfg.level.name(), cfg.shots, cfg.seed);
    let r = run_experiment(&cfg)?;
    let mut t = Table::new(&SUMMARY_HEADER)?;
    t.row(&summary_row(&r, cfg.seed))?;
    let summary = t.into_bytes()?;
    let mut out = Output::new(&a.out);
    out.write("results.csv", &summary)?;
    out.write("settings.csv", &settings_table(&[&r])?)?;
    out.write_json("result.json", &r)?;
    out.finish("run", &cfg, Some(cfg.seed))?;
    print!("{}", String::from_utf8_lossy(&summary));
    Ok(())
}

fn cmd_sweep(exp: &ExpArgs, scenarios: &str, levels: &str, p2: &str) -> Result<()> {
    let cfg = exp.config("switch_a_to_b", Level::Ft)?;
    let scenarios = parse_list(scenarios, |s| Scenario::parse(s).ok_or_else(|| config_err(format!("unknown scenario {s:?}"))))?;
    let levels = parse_list(levels, parse_level)?;
    let p2 = parse_list(p2, |s| s.parse::<f64>().map_err(|e| config_err(format!("p2 value {s:?}: {e}"))))?;
    let pts = sweep_p2(&cfg, &scenarios, &levels, &p2).map_err(|e| match e {
        qswitch::engine::EngineError::Config(m) => config_err(m),
        e => e.into(),
    })?;
    let mut t = Table::new(&["preset", "scenario", "level", "p2", "fidelity", "infidelity", "acceptance_rate"])?;
    for p in &pts {
        t.row(&[cfg.preset.clone(), p.scenario.name().into(), p.level.name().into(), num(p.p2), opt(p.fidelity), opt(p.infidelity), num(p.acceptance_rate)])?;
    }
    let bytes = t.into_bytes()?;
    let mut out = Output::new(&exp.out);
    out.write("sweep.csv", &bytes)?;
    out.finish("sweep", &cfg, Some(cfg.seed))?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn cmd_budget(a: &ExpArgs) -> Result<()> {
    let cfg = a.config("cnot:t", Level::Ft)?;
    let rows = error_budget(&cfg)?;
    let mut t = Table::new(&["preset", "level", "scenario", "sources", "fidelity", "fidelity_std", "acceptance_rate"])?;
    for r in &rows {
        let sources = r.keep.iter().map(|s| s.name()).collect::<Vec<_>>().join(";");
        t.row(&[cfg.preset.clone(), cfg.level.name().into(), r.scenario.clone(), sources, opt(r.fidelity), opt(r.fidelity_std), num(r.acceptance_rate)])?;
    }
    let bytes = t.into_bytes()?;
    let mut out = Output::new(&a.out);
    out.write("budget.csv", &bytes)?;
    out.finish("budget", &cfg, Some(cfg.seed))?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

/// Runs `presets` with the shared config and writes one summary table.
fn run_family(a: &ExpArgs, command: &str, file: &str, presets: &[(String, bool)], group: impl Fn(&str) -> String) -> Result<()> {
    let base = a.config(&presets[0].0, Level::Ft)?;
    let mut results = Vec::new();
    for (p, rotated) in presets {
        let mut c = base.clone();
        c.preset = p.clone();
        c.rotated = *rotated;
        log::info!("{command} {p} rotated={rotated}");
        results.push(run_experiment(&c)?);
    }
    let mut header: Vec<&str> = vec!["group"];
    header.extend(SUMMARY_HEADER);
    let mut t = Table::new(&header)?;
    for r in &results {
        let mut row = vec![group(&r.preset)];
        row.extend(summary_row(r, base.seed));
        t.row(&row)?;
    }
    let bytes = t.into_bytes()?;
    let mut out = Output::new(&a.out);
    out.write(file, &bytes)?;
    out.write("settings.csv", &settings_table(&results.iter().collect::<Vec<_>>())?)?;
    out.finish(command, &base, Some(base.seed))?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn bloch_group(preset: &str) -> String {
    match preset.strip_prefix("bloch:").map(BlochSpec::parse) {
        Some(Ok(b)) => b.group().into(),
        _ => String::new(),
    }
}

fn cmd_bloch(exp: &ExpArgs, codes: &str) -> Result<()> {
    let codes = parse_list(codes, |c| match c {
        "z" => Ok(false),
        "x" => Ok(true),
        _ => Err(config_err(format!("unknown code variant {c:?}"))),
    })?;
    let mut presets = Vec::new();
    for &rot in &codes {
        for b in BlochSpec::all() {
            presets.push((format!("bloch:{b}"), rot || exp.rotated));
        }
    }
    run_family(exp, "bloch", "bloch.csv", &presets, bloch_group)
}

fn cmd_cnot(exp: &ExpArgs) -> Result<()> {
    let presets: Vec<(String, bool)> = ["cnot:clifford", "cnot:t", "cnot:ht"].iter().map(|p| (p.to_string(), exp.rotated)).collect();
    run_family(exp, "cnot", "cnot.csv", &presets, |_| String::new())
}

fn cmd_verify(preset: &str, level: &str, rotated: bool, policy: &str, out_dir: &Path) -> Result<VerifyReport> {
    let mut spec = PresetSpec::new(Preset::parse(preset).map_err(|e| config_err(e.to_string()))?, parse_level(level)?);
    spec.rotated = rotated;
    let policy = ReadoutPolicy::parse(policy).ok_or_else(|| config_err(format!("unknown readout policy {policy:?}")))?;
    let report = certify_ft(&spec, policy).map_err(|e| match e {
        qswitch::verifier::VerifyError::Unsupported(m) => config_err(m),
        qswitch::verifier::VerifyError::Protocol(p) => config_err(p.to_string()),
        e => e.into(),
    })?;
    let mut out = Output::new(out_dir);
    out.write_json("verify.json", &report)?;
    out.finish("verify", &spec, None)?;
    print!("{}", report.summary_table());
    Ok(report)
}

fn workers(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("QSWITCH_WORKERS") {
        Ok(s) => s.parse().map_err(|_| config_err(format!("QSWITCH_WORKERS={s:?} is not a count"))),
        Err(_) => Ok(0),
    }
}

fn real_main() -> Result<ExitCode> {
    // clap exits with 2 on usage errors, which would read as a verifier failure
    let cli = Cli::try_parse().unwrap_or_else(|e| {
        let code = if e.use_stderr() { 1 } else { 0 };
        let _ = e.print();
        std::process::exit(code)
    });
    let n = workers(cli.workers)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().context("starting worker pool")?;
    pool.install(|| match &cli.cmd {
        Cmd::Run(a) => cmd_run(a).map(|_| ExitCode::SUCCESS),
        Cmd::Sweep { exp, scenarios, levels, p2 } => cmd_sweep(exp, scenarios, levels, p2).map(|_| ExitCode::SUCCESS),
        Cmd::Budget(a) => cmd_budget(a).map(|_| ExitCode::SUCCESS),
        Cmd::Verify { preset, level, rotated, policy, expect_ft, out } => {
            let r = cmd_verify(preset, level, *rotated, policy, out)?;
            Ok(if *expect_ft && r.violations > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Cmd::Bloch { exp, codes } => cmd_bloch(exp, codes).map(|_| ExitCode::SUCCESS),
        Cmd::Cnot(a) => cmd_cnot(a).map(|_| ExitCode::SUCCESS),
        Cmd::ListPresets => {
            for p in Preset::all_names() {
                println!("{p}");
            }
            Ok(ExitCode::SUCCESS)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QSWITCH_LOG", "warn")).init();
    match real_main() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            // 2 is reserved for violations found by `verify --expect-ft`
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
