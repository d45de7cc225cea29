use num_complex::Complex64;
use proptest::prelude::*;
use qswitch::circuit::EventKind;
use qswitch::codes::{encode_fragment, logical_t_fragment, transversal_gate, Basis, CodeKind, CodeSpec, EncodeTarget, Fragment, LogicalGate, QRef};
use qswitch::pauli::{Pauli, PauliString};
use qswitch::program::{h_dual, Builder};
use qswitch::statevec::{gate, GateKind, StateVector};

type Sv = StateVector<f64>;
type M2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn run_fragment(sv: &mut Sv, f: &Fragment) {
    assert!(f.ancillas.is_empty());
    for op in &f.ops {
        let t: Vec<usize> = op.qubits.iter().map(|q| if let QRef::D(i) = q { *i } else { unreachable!() }).collect();
        sv.apply_gate(&gate(op.kind, &t)).unwrap();
    }
}

fn expect(sv: &Sv, p: &PauliString) -> f64 {
    sv.expectation_pauli(p).unwrap().re
}

// encoded |0>_L or |+>_L; the rotated code is the H image of the unrotated one
fn encoded(code: CodeKind, target: EncodeTarget) -> Sv {
    let base = if code == CodeKind::TenX { CodeKind::TenZ } else { code };
    let mut sv = Sv::zero(code.n()).unwrap();
    run_fragment(&mut sv, &encode_fragment(base, target, false).unwrap());
    if code == CodeKind::TenX {
        for q in 0..10 {
            sv.apply_gate(&gate(GateKind::H, &[q])).unwrap();
        }
    }
    sv
}

fn bloch(spec: &CodeSpec, sv: &Sv) -> [f64; 3] {
    [Basis::X, Basis::Y, Basis::Z].map(|b| expect(sv, &spec.logical(b)))
}

fn pauli2(b: usize) -> M2 {
    let (o, l) = (c(0.0, 0.0), c(1.0, 0.0));
    [[[o, l], [l, o]], [[o, c(0.0, -1.0)], [c(0.0, 1.0), o]], [[l, o], [o, -l]]][b]
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut r = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

fn dag(a: &M2) -> M2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

// Bloch vector after U from the one before it
fn rotate(u: &M2, v: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            let m = mul(&mul(&pauli2(i), u), &mul(&pauli2(j), &dag(u)));
            *o += 0.5 * (m[0][0] + m[1][1]).re * vj;
        }
    }
    out
}

fn unitary(g: &str) -> M2 {
    let (o, l) = (c(0.0, 0.0), c(1.0, 0.0));
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let t = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    match g {
        "H" => [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]],
        "S" => [[l, o], [o, c(0.0, 1.0)]],
        "Sdag" => [[l, o], [o, c(0.0, -1.0)]],
        "X" => pauli2(0),
        "Z" => pauli2(2),
        "T" => [[l, o], [o, t]],
        _ => unreachable!(),
    }
}

fn check_logical_action(code: CodeKind, name: &str, apply: &dyn Fn(&mut Sv)) {
    let spec = code.spec();
    for target in [EncodeTarget::Zero, EncodeTarget::Plus] {
        let mut sv = encoded(code, target);
        let before = bloch(&spec, &sv);
        apply(&mut sv);
        for g in &spec.generators {
            assert!((expect(&sv, g) - 1.0).abs() < 1e-9, "{code:?} {name}: stabilizer {} lost", g.to_sparse());
        }
        let want = rotate(&unitary(name), before);
        let got = bloch(&spec, &sv);
        for k in 0..3 {
            assert!((want[k] - got[k]).abs() < 1e-9, "{code:?} {name} {target:?}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn encoders_reach_the_codespace() {
    for code in [CodeKind::Steane, CodeKind::TenZ, CodeKind::TenX] {
        let spec = code.spec();
        for (target, basis) in [(EncodeTarget::Zero, Basis::Z), (EncodeTarget::Plus, Basis::X)] {
            let sv = encoded(code, target);
            for g in &spec.generators {
                assert!((expect(&sv, g) - 1.0).abs() < 1e-9);
            }
            assert!((expect(&sv, &spec.logical(basis)) - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn transversal_gates_act_logically() {
    let cases: [(CodeKind, LogicalGate, &str); 10] = [
        (CodeKind::Steane, LogicalGate::H, "H"),
        (CodeKind::Steane, LogicalGate::S, "S"),
        (CodeKind::Steane, LogicalGate::Sdag, "Sdag"),
        (CodeKind::Steane, LogicalGate::X, "X"),
        (CodeKind::Steane, LogicalGate::Z, "Z"),
        (CodeKind::TenZ, LogicalGate::S, "S"),
        (CodeKind::TenZ, LogicalGate::Sdag, "Sdag"),
        (CodeKind::TenZ, LogicalGate::X, "X"),
        (CodeKind::TenZ, LogicalGate::Z, "Z"),
        (CodeKind::TenX, LogicalGate::X, "X"),
    ];
    for (code, g, name) in cases {
        let imp = transversal_gate(code, g).unwrap();
        check_logical_action(code, name, &|sv: &mut Sv| {
            for (k, t) in &imp.ops {
                sv.apply_gate(&gate(*k, t)).unwrap();
            }
        });
    }
    assert!(transversal_gate(CodeKind::TenZ, LogicalGate::H).is_err());
}

#[test]
fn logical_t_acts_logically() {
    let f = logical_t_fragment(CodeKind::TenZ).unwrap();
    check_logical_action(CodeKind::TenZ, "T", &|sv: &mut Sv| run_fragment(sv, &f));
}

#[test]
fn steane_cnot_makes_bell_pair() {
    let spec = CodeSpec::steane();
    let a = encoded(CodeKind::Steane, EncodeTarget::Plus);
    let b = encoded(CodeKind::Steane, EncodeTarget::Zero);
    let amps: Vec<Complex64> = (0..1usize << 14).map(|i| a.amplitudes()[i & 127] * b.amplitudes()[i >> 7]).collect();
    let mut sv = Sv::from_amplitudes(amps).unwrap();
    for (k, t) in transversal_gate(CodeKind::Steane, LogicalGate::Cnot).unwrap().ops {
        sv.apply_gate(&gate(k, &t)).unwrap();
    }
    let both = |p: &PauliString| p.embed(14, 0).unwrap().multiply(&p.embed(14, 7).unwrap()).unwrap();
    assert!((expect(&sv, &both(&spec.logical_x)) - 1.0).abs() < 1e-9);
    assert!((expect(&sv, &both(&spec.logical_z)) - 1.0).abs() < 1e-9);
}

fn project(sv: &Sv, spec: &CodeSpec) -> Option<Sv> {
    let mut cur = sv.clone();
    for g in &spec.generators {
        let mut img = cur.clone();
        img.apply_pauli(g).unwrap();
        let sum: Vec<Complex64> = cur.amplitudes().iter().zip(img.amplitudes()).map(|(a, b)| (a + b) * 0.5).collect();
        if sum.iter().map(|a| a.norm_sqr()).sum::<f64>() < 1e-8 {
            return None;
        }
        cur = Sv::from_amplitudes(sum).unwrap();
    }
    Some(cur)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn codespace_projection_idempotent(code in 0usize..3, amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1024)) {
        let kind = [CodeKind::Steane, CodeKind::TenZ, CodeKind::TenX][code];
        let spec = kind.spec();
        let dim = 1usize << spec.n;
        let sv = Sv::from_amplitudes(amps[..dim].iter().map(|&(a, b)| c(a, b)).collect()).unwrap();
        if let Some(p) = project(&sv, &spec) {
            for g in &spec.generators {
                prop_assert!((expect(&p, g) - 1.0).abs() < 1e-9);
            }
            let again = project(&p, &spec).unwrap();
            prop_assert!((again.inner(&p).norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    // A fault in a [[10,1,2]]_Z circuit and its H image in the dual circuit lead to the
    // same final state (the dual's leading and trailing Hadamards cancel).
    #[test]
    fn rotated_dual_matches_swapped_fault(target in 0usize..2, which in any::<prop::sample::Index>(), letters in prop::collection::vec(1u8..4, 2)) {
        let frag = encode_fragment(CodeKind::TenZ, [EncodeTarget::Zero, EncodeTarget::Plus][target], false).unwrap();
        let mut b = Builder::with_register("frag", 10);
        let blk = b.alloc_block(CodeKind::TenZ, None).unwrap();
        for (i, op) in frag.ops.iter().enumerate() {
            let t: Vec<usize> = op.qubits.iter().map(|q| if let QRef::D(i) = q { *i } else { unreachable!() }).collect();
            b.block_gate(blk, op.kind, &t, &format!("g{i}")).unwrap();
        }
        let prog = b.finish(&[(blk, None)]).unwrap();
        let dual = h_dual(&prog);

        let cnots: Vec<usize> = frag.ops.iter().enumerate().filter(|(_, o)| o.kind == GateKind::Cnot).map(|(i, _)| i).collect();
        let k = cnots[which.index(cnots.len())];
        let label = format!("g{k}");
        let t: Vec<usize> = frag.ops[k].qubits.iter().map(|q| if let QRef::D(i) = q { *i } else { unreachable!() }).collect();
        let letter = |l: u8| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][l as usize];
        let mut fault = PauliString::identity(10);
        fault.set(t[0], letter(letters[0])).unwrap();
        fault.set(t[1], letter(letters[1])).unwrap();
        let swapped = PauliString::from_bits(10, fault.z_bits(), fault.x_bits(), fault.phase()).unwrap();

        let run = |circ: &qswitch::circuit::Circuit, p: &PauliString| -> Sv {
            let last = circ.events.iter().rposition(|e| e.label == label && e.as_gate().is_some()).unwrap();
            let mut sv = Sv::zero(10).unwrap();
            for (i, e) in circ.events.iter().enumerate() {
                if let EventKind::Gate(g) = &e.kind {
                    sv.apply_gate(g).unwrap();
                }
                if i == last {
                    sv.apply_pauli(p).unwrap();
                }
            }
            sv
        };
        let a = run(&prog.circuit, &fault);
        let d = run(&dual.circuit, &swapped);
        prop_assert!((a.inner(&d).norm_sqr() - 1.0).abs() < 1e-9);
    }
}
