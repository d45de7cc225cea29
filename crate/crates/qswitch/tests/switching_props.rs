use num_complex::Complex64;
use qswitch::codes::{encode_fragment, transversal_gate, Basis, CodeKind, CodeSpec, EncodeTarget, LogicalGate, QRef, PLAQUETTES, TEN_Z_SMALL};
use qswitch::exec::{stream, ExecPlan, Outcomes, Trajectory};
use qswitch::pauli::PauliString;
use qswitch::protocols::{build, settings, Direction, Level, Preset, PresetSpec, SwitchingLookupTable};
use qswitch::statevec::{gate, StateVector};

type Sv = StateVector<f64>;

fn encoded(code: CodeKind, target: EncodeTarget) -> Sv {
    let f = encode_fragment(code, target, false).unwrap();
    let mut sv = Sv::zero(code.n()).unwrap();
    for op in &f.ops {
        let t: Vec<usize> = op.qubits.iter().map(|q| if let QRef::D(i) = q { *i } else { unreachable!() }).collect();
        sv.apply_gate(&gate(op.kind, &t)).unwrap();
    }
    sv
}

// the six cardinal logical states of a code with transversal X, Z, S and S†
fn cardinal_inputs(code: CodeKind) -> Vec<Sv> {
    let with = |mut sv: Sv, g: LogicalGate| {
        for (k, t) in transversal_gate(code, g).unwrap().ops {
            sv.apply_gate(&gate(k, &t)).unwrap();
        }
        sv
    };
    let zero = encoded(code, EncodeTarget::Zero);
    let plus = encoded(code, EncodeTarget::Plus);
    vec![
        zero.clone(),
        with(zero, LogicalGate::X),
        plus.clone(),
        with(plus.clone(), LogicalGate::Z),
        with(plus.clone(), LogicalGate::S),
        with(plus, LogicalGate::Sdag),
    ]
}

fn expect(sv: &Sv, p: &PauliString) -> f64 {
    sv.expectation_pauli(p).unwrap().re
}

fn project(sv: &Sv, g: &PauliString, bit: u8) -> Option<Sv> {
    let mut img = sv.clone();
    img.apply_pauli(g).unwrap();
    let s = if bit == 1 { -1.0 } else { 1.0 };
    let amps: Vec<Complex64> = sv.amplitudes().iter().zip(img.amplitudes()).map(|(a, b)| (a + b * s) * 0.5).collect();
    if amps.iter().map(|a| a.norm_sqr()).sum::<f64>() < 1e-9 {
        return None;
    }
    Some(Sv::from_amplitudes(amps).unwrap())
}

// operators whose outcomes form the switching syndrome, and the target code
fn switching_setup(d: Direction) -> (Vec<PauliString>, CodeSpec) {
    match d {
        Direction::BToA => {
            (PLAQUETTES.iter().map(|s| PauliString::x_on(10, s)).collect(), CodeSpec::steane())
        }
        Direction::AToB => (TEN_Z_SMALL.iter().map(|s| PauliString::z_on(10, s)).collect(), CodeSpec::ten_z()),
    }
}

fn inputs(d: Direction) -> Vec<Sv> {
    match d {
        Direction::BToA => cardinal_inputs(CodeKind::TenZ),
        // Steane block with the bulk qubits in |+>
        Direction::AToB => cardinal_inputs(CodeKind::Steane)
            .into_iter()
            .map(|s| {
                let amps = (0..1usize << 10).map(|i| s.amplitudes()[i & 127] * (1.0 / 8f64.sqrt())).collect();
                Sv::from_amplitudes(amps).unwrap()
            })
            .collect(),
    }
}

#[test]
fn lookup_tables_restore_target_codespace() {
    for d in [Direction::BToA, Direction::AToB] {
        let table = SwitchingLookupTable::new(d);
        let (measured, target) = switching_setup(d);
        let gens: Vec<PauliString> = target.generators.iter().map(|g| g.embed(10, 0).unwrap()).collect();
        let logicals: Vec<PauliString> = [Basis::X, Basis::Y, Basis::Z].iter().map(|&b| target.logical(b).embed(10, 0).unwrap()).collect();
        for (k, input) in inputs(d).iter().enumerate() {
            let want: Vec<f64> = logicals.iter().map(|l| expect(input, l)).collect();
            for sigma in 0..8u8 {
                let mut sv = input.clone();
                for (i, m) in measured.iter().enumerate() {
                    sv = project(&sv, m, sigma >> (2 - i) & 1).unwrap_or_else(|| panic!("{d:?} syndrome {sigma} unreachable"));
                }
                sv.apply_pauli(table.lookup(sigma)).unwrap();
                for g in &gens {
                    assert!((expect(&sv, g) - 1.0).abs() < 1e-9, "{d:?} input {k} syndrome {sigma:03b}: {}", g.to_sparse());
                }
                for (l, w) in logicals.iter().zip(&want) {
                    assert!((expect(&sv, l) - w).abs() < 1e-9, "{d:?} input {k} syndrome {sigma:03b}: logical moved");
                }
            }
        }
    }
}

#[test]
fn table_entries_have_gauge_consistent_syndromes() {
    for d in [Direction::BToA, Direction::AToB] {
        let table = SwitchingLookupTable::new(d);
        let (measured, target) = switching_setup(d);
        assert!(table.lookup(0).is_identity());
        for sigma in 0..8u8 {
            let e = table.lookup(sigma);
            match d {
                Direction::BToA => assert!(e.is_z_type()),
                Direction::AToB => assert!(e.is_x_type()),
            }
            for (i, m) in measured.iter().enumerate() {
                assert_eq!(!e.commutes(m).unwrap(), sigma >> (2 - i) & 1 == 1, "{d:?} {sigma:03b} vs measured {i}");
            }
            for g in &target.generators {
                let g = g.embed(10, 0).unwrap();
                // a target generator that is itself a measured operator is handled above
                if !measured.iter().any(|m| m.x_bits() == g.x_bits() && m.z_bits() == g.z_bits()) {
                    assert!(e.commutes(&g).unwrap(), "{d:?} {sigma:03b} vs {}", g.to_sparse());
                }
            }
        }
    }
}

// Applying each frame physically at its position gives the same final outcome
// distribution as the deferred end-of-circuit image.
#[test]
fn deferred_frames_match_physical_application() {
    let mut frames_seen = 0;
    let presets = ["t_gate", "switch_b_to_a", "switch_a_to_b", "bloch:T", "bloch:TS+RX", "cnot:clifford", "cnot:t"];
    for name in presets {
        let preset = Preset::parse(name).unwrap();
        for level in [Level::Nft, Level::Ft] {
            let spec = PresetSpec::new(preset.clone(), level);
            for setting in settings(&preset) {
                let bp = build(&spec, &setting, false).unwrap();
                if bp.protocol.branch.is_some() {
                    continue;
                }
                let prog = &bp.protocol.programs[0];
                if prog.frames.iter().any(|f| f.flips.iter().any(|fl| !fl.is_empty())) {
                    continue;
                }
                frames_seen += prog.frames.len();
                let plan = ExecPlan::new(prog);
                let end = prog.final_event();
                let active = |t: &Trajectory<f64>, s: &[Vec<usize>]| -> Vec<bool> {
                    s.iter().map(|p| p.iter().fold(0u8, |a, &b| a ^ t.bits[b]) == 1).collect()
                };
                for seed in 0..3u64 {
                    let mut deferred = Trajectory::<f64>::new(prog);
                    let mut rng = stream(seed, 0);
                    deferred.run(prog, &plan, end, Outcomes::Sample(&mut rng)).unwrap();
                    for f in &prog.frames {
                        for (on, img) in active(&deferred, &f.syndrome).into_iter().zip(&f.end_images) {
                            if on {
                                deferred.apply_pauli(img).unwrap();
                            }
                        }
                    }

                    let mut physical = Trajectory::<f64>::new(prog);
                    let mut rng = stream(seed, 0);
                    for f in &prog.frames {
                        physical.run(prog, &plan, f.position, Outcomes::Sample(&mut rng)).unwrap();
                        for (on, e) in active(&physical, &f.syndrome).into_iter().zip(&f.entries) {
                            if on {
                                physical.apply_pauli(e).unwrap();
                            }
                        }
                    }
                    physical.run(prog, &plan, end, Outcomes::Sample(&mut rng)).unwrap();
                    assert_eq!(deferred.bits, physical.bits);

                    let all: Vec<usize> = (0..prog.circuit.n_qubits).collect();
                    let a = deferred.outcome_distribution(&all, 1e-14);
                    let b = physical.outcome_distribution(&all, 1e-14);
                    assert_eq!(a.len(), b.len(), "{name} {level:?}");
                    for ((ka, pa), (kb, pb)) in a.iter().zip(&b) {
                        assert_eq!(ka, kb, "{name} {level:?}");
                        assert!((pa - pb).abs() < 1e-9, "{name} {level:?}");
                    }
                }
            }
        }
    }
    assert!(frames_seen > 0);
}
