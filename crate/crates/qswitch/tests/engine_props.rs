use qswitch::codes::{Basis, CodeKind};
use qswitch::engine::{run_experiment, ExperimentConfig, ExperimentResult};
use qswitch::exec::{run_shot, stream, BranchMode, PreparedProtocol};
use qswitch::noise::NoiseParams;
use qswitch::program::{Builder, Protocol};
use qswitch::protocols::{prepare_input, Level, LogicalInput};

fn run(cfg: &ExperimentConfig) -> ExperimentResult {
    run_experiment(cfg).unwrap()
}

#[test]
fn identical_across_thread_counts() {
    let cfg = ExperimentConfig::new("switch_a_to_b", Level::Ft, 300, 99);
    let results: Vec<ExperimentResult> = [1, 3]
        .iter()
        .map(|&n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| run(&cfg)))
        .collect();
    assert_eq!(results[0], results[1]);
    assert_eq!(run(&cfg), results[0]);
}

#[test]
fn acceptance_rate_is_accepted_over_total() {
    let r = run(&ExperimentConfig::new("init_b", Level::Ft, 400, 3));
    let (a, n) = r.settings.iter().fold((0, 0), |(a, n), s| (a + s.counts.accepted, n + s.counts.total));
    assert_eq!((a, n), (r.accepted, r.total_shots));
    assert_eq!(r.acceptance_rate, a as f64 / n as f64);
    for s in &r.settings {
        assert_eq!(s.counts.hist.iter().sum::<usize>(), s.counts.accepted);
    }
}

fn flag_acceptance(blocks: &[CodeKind], shots: u64) -> f64 {
    let mut b = Builder::new("preps");
    let mut outs = Vec::new();
    for &code in blocks {
        let (blk, _) = prepare_input(&mut b, code, LogicalInput::Zero, true).unwrap();
        outs.push((blk, Some(Basis::Z)));
    }
    let prog = b.finish(&outs).unwrap();
    let pp = PreparedProtocol::new(Protocol::single("preps", prog));
    let noise = NoiseParams::default();
    let ok = (0..shots)
        .filter(|&i| {
            let s = run_shot::<f64>(&pp, &noise, BranchMode::Live, &mut stream(8, 2 * i), &mut stream(8, 2 * i + 1)).unwrap();
            pp.protocol.programs[0].interpret(&s.bits).accepted
        })
        .count();
    ok as f64 / shots as f64
}

// Two flagged preparations share nothing but the register, so the joint flag
// acceptance is the product of the separate ones.
#[test]
fn independent_stages_multiply() {
    let n = 20_000;
    let a = flag_acceptance(&[CodeKind::Steane], n);
    let ab = flag_acceptance(&[CodeKind::Steane, CodeKind::Steane], n);
    let prod = a * a;
    let var_a = a * (1.0 - a) / n as f64;
    let sigma = (prod * (1.0 - prod) / n as f64 + 4.0 * a * a * var_a).sqrt();
    assert!(a < 1.0);
    assert!((ab - prod).abs() < 3.0 * sigma + 1e-9, "{ab} vs {a}^2");
}

fn fidelity_at(preset: &str, level: Level, noise: NoiseParams) -> (f64, f64) {
    let mut cfg = ExperimentConfig::new(preset, level, 834, 41);
    cfg.noise = noise;
    let r = run(&cfg);
    (r.fidelity.unwrap(), r.fidelity_std.unwrap() / (cfg.batches as f64).sqrt())
}

fn non_increasing(points: &[(f64, f64)]) {
    for w in points.windows(2) {
        let ((f0, s0), (f1, s1)) = (w[0], w[1]);
        assert!(f1 <= f0 + 3.0 * (s0 * s0 + s1 * s1).sqrt() + 1e-9, "{points:?}");
    }
}

#[test]
fn fidelity_monotone_in_error_rates() {
    let base = NoiseParams::default();
    let p2: Vec<(f64, f64)> =
        [0.003, 0.01, 0.027].iter().map(|&p| fidelity_at("switch_b_to_a", Level::Nft, NoiseParams { p2: p, ..base.clone() })).collect();
    non_increasing(&p2);
    let p1: Vec<(f64, f64)> =
        [0.0, 0.0036, 0.02].iter().map(|&p| fidelity_at("switch_b_to_a", Level::Nft, NoiseParams { p1: p, ..base.clone() })).collect();
    non_increasing(&p1);
    let mc: Vec<(f64, f64)> = [0.0, 1.0, 3.0]
        .iter()
        .map(|&k| {
            let n = NoiseParams {
                p_midcirc_x: base.p_midcirc_x * k,
                p_midcirc_y: base.p_midcirc_y * k,
                p_midcirc_z: base.p_midcirc_z * k,
                ..base.clone()
            };
            fidelity_at("switch_a_to_b", Level::Ft, n)
        })
        .collect();
    non_increasing(&mc);
}

#[test]
fn trivial_syndrome_filter_never_hurts() {
    for (preset, level) in [("init_b", Level::Nft), ("switch_b_to_a", Level::Ft)] {
        let shots = 100_000 / 12 + 1;
        let cfg = ExperimentConfig::new(preset, level, shots, 12);
        let r = run(&cfg);
        let (f, ft) = (r.fidelity.unwrap(), r.fidelity_trivial.unwrap());
        let sigma = r.fidelity_std.unwrap() / (cfg.batches as f64).sqrt();
        assert!(ft >= f - 3.0 * sigma, "{preset} {level:?}: {ft} < {f}");
    }
}
