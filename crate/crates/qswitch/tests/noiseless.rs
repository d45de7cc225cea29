use qswitch::codes::Basis;
use qswitch::exec::{run_shot, stream, BranchMode, PreparedProtocol};
use qswitch::noise::NoiseParams;
use qswitch::protocols::{build, settings, Level, Preset, PresetSpec};
use qswitch::tomography::{ReadoutPolicy, ShotRecord};
use num_complex::Complex64;

fn expectation(state: &[Complex64], bases: &[Basis]) -> f64 {
    let mut sv = qswitch::StateVectorF64::from_amplitudes(state.to_vec()).unwrap();
    let k = bases.len();
    let mut p = qswitch::pauli::PauliString::identity(k);
    for (i, b) in bases.iter().enumerate() {
        // block 0 is the highest bit in histograms; qubit 0 of the reference is block 0
        p.set(i, b.pauli()).unwrap();
    }
    let _ = &mut sv;
    sv.expectation_pauli(&p).unwrap().re
}

#[test]
fn all_presets_noiseless() {
    let mut fails: Vec<String> = Vec::new();
    let mut names = Preset::all_names();
    names.sort();
    for name in names {
        for level in [Level::Nft, Level::Pft, Level::Ft] {
            for rotated in [false, true] {
                let preset = Preset::parse(&name).unwrap();
                let mut spec = PresetSpec::new(preset.clone(), level);
                spec.rotated = rotated;
                for (si, st) in settings(&preset).iter().enumerate() {
                    let bp = match build(&spec, st, false) {
                        Ok(bp) => bp,
                        Err(qswitch::protocols::ProtocolError::Unsupported(_)) => continue,
                        Err(e) => panic!("{e}"),
                    };
                    let pp = PreparedProtocol::new(bp.protocol.clone());
                    let e = expectation(&bp.ideal, &st.bases);
                    for shot in 0..16u64 {
                        let (mut fr, mut mr) = (stream(1, 2 * shot), stream(1, 2 * shot + 1));
                        let o = run_shot::<f64>(&pp, &NoiseParams::ideal(), BranchMode::Live, &mut fr, &mut mr).unwrap();
                        let prog = &pp.protocol.programs[o.program];
                        let it = prog.interpret(&o.bits);
                        let r = ShotRecord::from_interpretation(si, o.program, &it, o.branch_ok, 0, ReadoutPolicy::Detect);
                        if !r.accepted() { fails.push(format!("{name} {level:?} rot={rotated} {} rejected: {:?}", st.label(), r.reject_reason)); break; }
                        if e.abs() > 0.999 {
                            let parity = r.outcomes.iter().fold(0u8, |a, o| a ^ o.value.unwrap());
                            let got = if parity == 0 { 1.0 } else { -1.0 };
                            if (got - e).abs() > 1e-6 { fails.push(format!("{name} {level:?} rot={rotated} {}: got {got}, want {e}", st.label())); break; }
                        }
                    }
                }
            }
        }
    }
    assert!(fails.is_empty(), "{}", fails.join("\n"));
}
