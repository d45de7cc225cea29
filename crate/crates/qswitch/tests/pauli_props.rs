use num_complex::Complex64;
use proptest::prelude::*;
use qswitch::codes::{CodeKind, CodeSpec};
use qswitch::pauli::{Pauli, PauliString, Phase};

type Dense = Vec<Vec<Complex64>>;

fn letter(p: Pauli) -> [[Complex64; 2]; 2] {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match p {
        Pauli::I => [[l, o], [o, l]],
        Pauli::X => [[o, l], [l, o]],
        Pauli::Y => [[o, -i], [i, o]],
        Pauli::Z => [[l, o], [o, -l]],
    }
}

// qubit q is bit q of the row index
fn dense(p: &PauliString) -> Dense {
    let n = p.n();
    let dim = 1usize << n;
    let ph = Complex64::new(0.0, 1.0).powu(p.phase().0 as u32);
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let mut a = ph;
            for q in 0..n {
                a *= letter(p.get(q))[(r >> q) & 1][(c >> q) & 1];
            }
            *v = a;
        }
    }
    m
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let d = a.len();
    (0..d).map(|r| (0..d).map(|c| (0..d).map(|k| a[r][k] * b[k][c]).sum()).collect()).collect()
}

fn close(a: &Dense, b: &Dense) -> bool {
    a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() < 1e-12)
}

fn pauli_string(max_n: usize) -> impl Strategy<Value = PauliString> {
    (1..=max_n).prop_flat_map(|n| {
        let m = (1u64 << n) - 1;
        (Just(n), 0..=m, 0..=m, 0u8..4).prop_map(|(n, x, z, k)| PauliString::from_bits(n, x, z, Phase(k)).unwrap())
    })
}

fn pair(max_n: usize) -> impl Strategy<Value = (PauliString, PauliString)> {
    (1..=max_n).prop_flat_map(|n| {
        let m = (1u64 << n) - 1;
        (0..=m, 0..=m, 0u8..4, 0..=m, 0..=m, 0u8..4).prop_map(move |(x1, z1, k1, x2, z2, k2)| {
            (PauliString::from_bits(n, x1, z1, Phase(k1)).unwrap(), PauliString::from_bits(n, x2, z2, Phase(k2)).unwrap())
        })
    })
}

proptest! {
    #[test]
    fn product_matches_dense_oracle((p, q) in pair(4)) {
        let pq = p.multiply(&q).unwrap();
        prop_assert!(close(&dense(&pq), &matmul(&dense(&p), &dense(&q))));
    }

    #[test]
    fn commutation_matches_dense_oracle((p, q) in pair(4)) {
        let (a, b) = (dense(&p), dense(&q));
        let dense_commute = close(&matmul(&a, &b), &matmul(&b, &a));
        prop_assert_eq!(p.commutes(&q).unwrap(), dense_commute);
        let symplectic = ((p.x_bits() & q.z_bits()).count_ones() + (p.z_bits() & q.x_bits()).count_ones()) % 2 == 0;
        prop_assert_eq!(dense_commute, symplectic);
    }

    #[test]
    fn squares_to_plus_minus_identity(p in pauli_string(12)) {
        let sq = p.multiply(&p).unwrap();
        prop_assert!(sq.is_identity());
        prop_assert!(sq.phase().is_real());
    }

    #[test]
    fn multiplication_associative(n in 1usize..12, seeds in prop::array::uniform9(any::<u64>())) {
        let m = (1u64 << n) - 1;
        let mk = |i: usize| PauliString::from_bits(n, seeds[i] & m, seeds[i + 1] & m, Phase((seeds[i + 2] % 4) as u8)).unwrap();
        let (a, b, c) = (mk(0), mk(3), mk(6));
        let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
        let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn stabilizers_are_transparent_to_syndromes(code in 0usize..3, x in any::<u16>(), z in any::<u16>(), pick in any::<u64>()) {
        let spec = [CodeKind::Steane, CodeKind::TenZ, CodeKind::TenX][code].spec();
        let m = (1u64 << spec.n) - 1;
        let err = PauliString::from_bits(spec.n, x as u64 & m, z as u64 & m, Phase::ONE).unwrap();
        let elems = spec.stabilizer_elements();
        let s = &elems[(pick % elems.len() as u64) as usize];
        let moved = err.multiply(s).unwrap();
        prop_assert_eq!(spec.syndrome(&moved).unwrap(), spec.syndrome(&err).unwrap());
    }
}

fn check_code(spec: &CodeSpec) {
    assert!(spec.group().is_valid_stabilizer_group(), "{:?}", spec.kind);
    for g in &spec.generators {
        assert!(g.commutes(&spec.logical_x).unwrap());
        assert!(g.commutes(&spec.logical_z).unwrap());
    }
    assert!(!spec.logical_x.commutes(&spec.logical_z).unwrap());
}

#[test]
fn shipped_codes_commute() {
    for k in [CodeKind::Steane, CodeKind::TenZ, CodeKind::TenX] {
        check_code(&k.spec());
    }
}

#[test]
fn rotated_generators_swap_x_and_z() {
    let z = CodeSpec::ten_z();
    let x = CodeSpec::ten_x();
    let swap = |p: &PauliString| PauliString::from_bits(p.n(), p.z_bits(), p.x_bits(), p.phase()).unwrap();
    let mut a: Vec<_> = z.generators.iter().map(swap).collect();
    let mut b = x.generators.clone();
    a.sort_by_key(|p| (p.x_bits(), p.z_bits()));
    b.sort_by_key(|p| (p.x_bits(), p.z_bits()));
    assert_eq!(a, b);
}
