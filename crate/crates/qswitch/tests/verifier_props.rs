use qswitch::noise::{FaultEvent, FaultSource, NoiseParams};
use qswitch::pauli::PauliString;
use qswitch::protocols::{Level, Preset, PresetSpec};
use qswitch::verifier::{certify_ft, Case, Outcome, SiteRef, Verdict, CERTIFY_POLICY, VERIFY_INPUTS};

fn spec(name: &str, level: Level) -> PresetSpec {
    PresetSpec::new(Preset::parse(name).unwrap(), level)
}

fn sorted(mut v: Vec<Verdict>) -> Vec<String> {
    let mut out: Vec<String> = v.drain(..).map(|x| serde_json::to_string(&x).unwrap()).collect();
    out.sort();
    out
}

#[test]
fn verdicts_ignore_site_order() {
    let case = Case::new(&spec("switch_b_to_a", Level::Nft), VERIFY_INPUTS[1], CERTIFY_POLICY).unwrap();
    let sites = case.sites(&NoiseParams::default());
    let forward: Vec<Verdict> = sites.iter().flat_map(|s| case.evaluate(Some(s)).unwrap()).collect();
    // interleave from both ends
    let mut order: Vec<usize> = Vec::new();
    let (mut lo, mut hi) = (0, sites.len());
    while lo < hi {
        hi -= 1;
        order.push(hi);
        if lo < hi {
            order.push(lo);
            lo += 1;
        }
    }
    let shuffled: Vec<Verdict> = order.iter().flat_map(|&i| case.evaluate(Some(&sites[i])).unwrap()).collect();
    assert_eq!(sorted(forward), sorted(shuffled));
}

#[test]
fn branch_weights_sum_to_one() {
    for (name, level) in [("switch_a_to_b", Level::Ft), ("switch_b_to_a", Level::Ft), ("t_gate", Level::Ft)] {
        for input in VERIFY_INPUTS {
            let case = Case::new(&spec(name, level), input, CERTIFY_POLICY).unwrap();
            for w in case.branch_weight_sums().unwrap() {
                assert!((w - 1.0).abs() < 1e-10, "{name} {input:?}: {w}");
            }
        }
    }
}

fn z_on_first_data_qubit(level: Level) -> Vec<Verdict> {
    let s = spec("switch_b_to_a", level);
    let mut all = Vec::new();
    for input in VERIFY_INPUTS {
        let case = Case::new(&s, input, CERTIFY_POLICY).unwrap();
        let prog = &case.protocols[0].programs[0];
        let n = prog.circuit.n_qubits;
        let site = SiteRef {
            fault: FaultEvent { position: prog.fault_start, pauli: PauliString::z_on(n, &[0]), source: FaultSource::Idle },
            program: None,
            basis: None,
        };
        all.extend(case.evaluate(Some(&site)).unwrap());
    }
    all
}

#[test]
fn z_error_before_unflagged_switch_is_dangerous() {
    assert!(z_on_first_data_qubit(Level::Nft).iter().any(|v| v.outcome == Outcome::FtViolation));
    assert!(z_on_first_data_qubit(Level::Ft).iter().all(|v| v.outcome != Outcome::FtViolation));
}

#[test]
fn no_fault_means_no_violation() {
    for name in ["init_b", "t_gate", "switch_b_to_a", "switch_a_to_b"] {
        for level in [Level::Nft, Level::Ft] {
            for input in VERIFY_INPUTS {
                let case = Case::new(&spec(name, level), input, CERTIFY_POLICY).unwrap();
                assert!(case.evaluate(None).unwrap().iter().all(|v| v.outcome == Outcome::AcceptedClean), "{name} {level:?}");
            }
        }
    }
}

// The central regression check: single faults never break the FT presets, while
// both unprotected switches have dangerous faults.
#[test]
fn ft_presets_certify_and_nft_switches_fail() {
    for p in qswitch::verifier::ft_presets() {
        let r = certify_ft(&PresetSpec::new(p.clone(), Level::Ft), CERTIFY_POLICY).unwrap();
        assert_eq!(r.violations, 0, "{}: {:?}", p.name(), r.witnesses.first());
        assert!(r.max_weight_error < 1e-10);
    }
    for name in ["switch_b_to_a", "switch_a_to_b"] {
        let r = certify_ft(&spec(name, Level::Nft), CERTIFY_POLICY).unwrap();
        assert!(r.violations > 0, "{name}");
        assert!(!r.witnesses.is_empty());
    }
}

#[test]
fn bunched_and_separate_flags_both_certify() {
    for bunching in [true, false] {
        let mut s = spec("switch_b_to_a", Level::Ft);
        s.options.flag_bunching = bunching;
        assert_eq!(certify_ft(&s, CERTIFY_POLICY).unwrap().violations, 0, "bunching {bunching}");
    }
}
