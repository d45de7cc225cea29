use num_complex::Complex64;
use proptest::prelude::*;
use qswitch::exec::stream;
use qswitch::pauli::{Pauli, PauliString, Phase};
use qswitch::statevec::{gate, Gate, GateKind, StateVector};

const N: usize = 4;

fn state() -> impl Strategy<Value = StateVector<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << N).prop_filter_map("nonzero", |v| {
        let amps: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        if amps.iter().map(|a| a.norm_sqr()).sum::<f64>() < 1e-3 {
            return None;
        }
        StateVector::from_amplitudes(amps).ok()
    })
}

fn gate_strategy() -> impl Strategy<Value = Gate> {
    let one = prop_oneof![
        Just(GateKind::X),
        Just(GateKind::Y),
        Just(GateKind::Z),
        Just(GateKind::H),
        Just(GateKind::S),
        Just(GateKind::Sdag),
        Just(GateKind::T),
        Just(GateKind::Tdag),
        (-3.2f64..3.2).prop_map(GateKind::Rx),
        (-3.2f64..3.2).prop_map(GateKind::Ry),
    ];
    let two = prop_oneof![Just(GateKind::Cnot), Just(GateKind::Cz)];
    prop_oneof![
        (one, 0..N).prop_map(|(k, q)| gate(k, &[q])),
        (two, Just((0..N).collect::<Vec<_>>()).prop_shuffle()).prop_map(|(k, q)| gate(k, &q[..2])),
        Just((0..N).collect::<Vec<_>>()).prop_shuffle().prop_map(|q| gate(GateKind::Ccz, &q[..3])),
    ]
}

fn max_diff(a: &StateVector<f64>, b: &StateVector<f64>) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn gates_preserve_norm_and_invert(s in state(), gates in prop::collection::vec(gate_strategy(), 1..12)) {
        let mut t = s.clone();
        for g in &gates {
            t.apply_gate(g).unwrap();
            prop_assert!((t.norm_sqr() - 1.0).abs() < 1e-10);
        }
        for g in gates.iter().rev() {
            t.apply_gate(&g.inverse()).unwrap();
        }
        prop_assert!(max_diff(&s, &t) < 1e-10);
    }

    #[test]
    fn pauli_matches_gate_decomposition(s in state(), x in 0u64..16, z in 0u64..16, k in 0u8..4) {
        let p = PauliString::from_bits(N, x, z, Phase(k)).unwrap();
        let mut a = s.clone();
        a.apply_pauli(&p).unwrap();
        // Y = iXZ: apply Z then X letter by letter and collect i per Y
        let mut b = s.clone();
        let mut phase = k as u32;
        for q in 0..N {
            match p.get(q) {
                Pauli::I => {}
                Pauli::X => b.apply_gate(&gate(GateKind::X, &[q])).unwrap(),
                Pauli::Z => b.apply_gate(&gate(GateKind::Z, &[q])).unwrap(),
                Pauli::Y => {
                    b.apply_gate(&gate(GateKind::Z, &[q])).unwrap();
                    b.apply_gate(&gate(GateKind::X, &[q])).unwrap();
                    phase += 1;
                }
            }
        }
        let f = Complex64::new(0.0, 1.0).powu(phase % 4);
        let scaled: Vec<Complex64> = b.amplitudes().iter().map(|a| a * f).collect();
        let diff = a.amplitudes().iter().zip(&scaled).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
    }

    #[test]
    fn branch_probabilities_sum_to_one(s in state(), q in 0..N) {
        let (mut a, mut b) = (s.clone(), s.clone());
        let p0 = a.measure_z_forced(&[q], &[0]).unwrap_or(0.0);
        let p1 = b.measure_z_forced(&[q], &[1]).unwrap_or(0.0);
        prop_assert!((p0 + p1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn forced_reproduces_sampled(s in state(), seed in any::<u64>(), qs in Just((0..N).collect::<Vec<_>>()).prop_shuffle()) {
        let mut sampled = s.clone();
        let bits = sampled.measure_z(&qs[..2], &mut stream(seed, 0)).unwrap();
        prop_assert!((sampled.norm_sqr() - 1.0).abs() < 1e-10);
        let mut forced = s.clone();
        forced.measure_z_forced(&qs[..2], &bits).unwrap();
        prop_assert!(max_diff(&sampled, &forced) < 1e-12);
    }
}

#[test]
fn gate_arity_enforced() {
    assert!(Gate::new(GateKind::Ccz, &[0, 1]).is_err());
    assert!(Gate::new(GateKind::Ccz, &[0, 1, 1]).is_err());
    assert!(Gate::new(GateKind::Cnot, &[2, 2]).is_err());
    assert!(StateVector::<f64>::zero(18).is_err());
}
