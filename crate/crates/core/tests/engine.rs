mod common;

use common::dense::{self, Mat, P};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use siavqe::ansatz::{AnsatzKind, AnsatzSpec, Circuit, EdgeOrder, GateKind};
use siavqe::qubo::{brute_force_solve, generate_instance, OptimalSet};
use siavqe::statevector::{Axis, PauliString, State};

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> State {
    State::from_amplitudes((0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn check_gate(state: &State, after: &State, m: &Mat, tol: f64) {
    let expect = m.apply(&dense::complexify(state.amplitudes()));
    let diff = dense::max_diff(&expect, after.amplitudes());
    assert!(diff <= tol, "gate differs from dense oracle by {diff:e}");
}

#[test]
fn every_gate_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=4 {
        for _ in 0..20 {
            let s = random_state(n, &mut rng);
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let t0 = rng.random_range(-7.0..7.0);
            let t1 = rng.random_range(-7.0..7.0);

            let mut a = s.clone();
            a.apply_ry(i, t0).unwrap();
            check_gate(&s, &a, &dense::ry(n, i, t0), 1e-12);

            let mut a = s.clone();
            a.apply_h(i).unwrap();
            check_gate(&s, &a, &dense::h(n, i), 1e-12);

            let mut a = s.clone();
            a.apply_cnot(i, j).unwrap();
            check_gate(&s, &a, &dense::cnot(n, i, j), 1e-12);

            let mut a = s.clone();
            a.apply_cz(i, j).unwrap();
            check_gate(&s, &a, &dense::cz(n, i, j), 1e-12);

            let mut a = s.clone();
            a.apply_yz_pair(i, j, t0, t1).unwrap();
            check_gate(&s, &a, &dense::yz(n, i, j, t0, t1), 1e-12);

            let mut b = s.clone();
            b.apply_yz_pair_reversed(i, j, t0, t1).unwrap();
            let gap = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(gap <= 1e-12, "factor order changed the state by {gap:e}");

            let tau = rng.random_range(0.0..1.5);
            let mut a = s.clone();
            a.apply_ite_zz(i, j, tau).unwrap();
            let raw = dense::ite_zz(n, i, j, tau).apply(&dense::complexify(s.amplitudes()));
            assert!(dense::max_diff(&dense::normalize(&raw), a.amplitudes()) <= 1e-12);

            let mut a = s.clone();
            a.apply_ite_z(i, tau).unwrap();
            let raw = dense::ite_z(n, i, tau).apply(&dense::complexify(s.amplitudes()));
            assert!(dense::max_diff(&dense::normalize(&raw), a.amplitudes()) <= 1e-12);
        }
    }
}

#[test]
fn yz_pair_is_special_orthogonal() {
    let m = dense::yz(2, 0, 1, 0.83, -2.1);
    assert!(m.data.iter().all(|v| v.im.abs() < 1e-15));
    let gram = m.adjoint().mul(&m);
    for r in 0..4 {
        for c in 0..4 {
            let want = if r == c { 1.0 } else { 0.0 };
            assert!((gram.at(r, c).re - want).abs() < 1e-12);
        }
    }
    // 4x4 determinant by cofactor expansion over the real part
    let a: Vec<Vec<f64>> = (0..4).map(|r| (0..4).map(|c| m.at(r, c).re).collect()).collect();
    fn det(a: &[Vec<f64>]) -> f64 {
        if a.len() == 1 {
            return a[0][0];
        }
        (0..a.len())
            .map(|c| {
                let minor: Vec<Vec<f64>> = a[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(k, _)| k != c).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][c] * det(&minor)
            })
            .sum()
    }
    assert!((det(&a) - 1.0).abs() < 1e-12);
}

#[test]
fn trivial_gate_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_state(3, &mut rng);
    let mut a = s.clone();
    a.apply_ry(1, 0.0).unwrap();
    a.apply_yz_pair(0, 2, 0.0, 0.0).unwrap();
    a.apply_ite_zz(0, 1, 0.0).unwrap();
    a.apply_cnot(0, 2).unwrap();
    a.apply_cnot(0, 2).unwrap();
    a.apply_cz(1, 2).unwrap();
    a.apply_cz(1, 2).unwrap();
    for (x, y) in a.amplitudes().iter().zip(s.amplitudes()) {
        assert!((x - y).abs() < 1e-12);
    }

    let mut z = State::basis(2, 0).unwrap();
    z.apply_ry(0, std::f64::consts::PI).unwrap();
    assert!((z.amplitudes()[1] - 1.0).abs() < 1e-15);

    let mut hh = State::basis(4, 0).unwrap();
    for q in 0..4 {
        hh.apply_h(q).unwrap();
    }
    let plus = State::plus(4).unwrap();
    for (x, y) in hh.amplitudes().iter().zip(plus.amplitudes()) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn plus_state_probabilities() {
    let s = State::plus(20).unwrap();
    let p = 1.0 / (1u64 << 20) as f64;
    assert!(s.probabilities().iter().all(|&x| (x - p).abs() < 1e-22));
    assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
}

#[test]
fn random_gate_circuit_matches_dense_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 4;
    let mut s = State::plus(n).unwrap();
    let mut u = Mat::identity(n);
    for _ in 0..60 {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let t = rng.random_range(-3.0..3.0);
        let g = match rng.random_range(0..5) {
            0 => {
                s.apply_ry(i, t).unwrap();
                dense::ry(n, i, t)
            }
            1 => {
                s.apply_h(i).unwrap();
                dense::h(n, i)
            }
            2 => {
                s.apply_cnot(i, j).unwrap();
                dense::cnot(n, i, j)
            }
            3 => {
                s.apply_cz(i, j).unwrap();
                dense::cz(n, i, j)
            }
            _ => {
                s.apply_yz_pair(i, j, t, -0.5 * t).unwrap();
                dense::yz(n, i, j, t, -0.5 * t)
            }
        };
        u = g.mul(&u);
    }
    let start = dense::complexify(State::plus(n).unwrap().amplitudes());
    assert!(dense::max_diff(&u.apply(&start), s.amplitudes()) <= 1e-12);
}

fn dense_circuit(c: &Circuit, params: &[f64]) -> Mat {
    let n = c.n;
    c.gates.iter().fold(Mat::identity(n), |acc, g| {
        let q = &g.qubits;
        let m = match g.kind {
            GateKind::H => dense::h(n, q[0]),
            GateKind::Ry => dense::ry(n, q[0], params[g.slots[0]]),
            GateKind::YzPair => dense::yz(n, q[0], q[1], params[g.slots[0]], params[g.slots[1]]),
            GateKind::Cnot => dense::cnot(n, q[0], q[1]),
            GateKind::Cz => dense::cz(n, q[0], q[1]),
        };
        m.mul(&acc)
    })
}

#[test]
fn ansatz_circuits_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let instance = generate_instance(4, 9).unwrap();
    for kind in AnsatzKind::ALL {
        for layers in 1..=2 {
            let spec = AnsatzSpec { kind, layers, edge_order: EdgeOrder::Lexicographic };
            let c = spec.build(&instance).unwrap();
            let params: Vec<f64> = (0..c.param_count).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = c.prepare(&params).unwrap();
            let zero = dense::complexify(State::basis(4, 0).unwrap().amplitudes());
            let want = dense_circuit(&c, &params).apply(&zero);
            assert!(dense::max_diff(&want, s.amplitudes()) <= 1e-12, "{kind} L={layers}");
        }
    }
}

#[test]
fn zero_parameter_states() {
    let instance = generate_instance(4, 2).unwrap();
    let plus = State::plus(4).unwrap();
    let zero = dense::complexify(State::basis(4, 0).unwrap().amplitudes());
    for kind in AnsatzKind::ALL {
        // one layer: an odd number of identical CZ bricks, which do not cancel
        let c = AnsatzSpec { kind, layers: 1, edge_order: EdgeOrder::Lexicographic }.build(&instance).unwrap();
        let params = vec![0.0; c.param_count];
        let s = c.prepare(&params).unwrap();
        let want = dense_circuit(&c, &params).apply(&zero);
        assert!(dense::max_diff(&want, s.amplitudes()) <= 1e-12);
        let gap = s.amplitudes().iter().zip(plus.amplitudes()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        match kind {
            // CZ|++> is not |++>
            AnsatzKind::HeaParallelCz => assert!(gap > 0.1),
            _ => assert!(gap <= 1e-12, "{kind}"),
        }
    }
}

#[test]
fn expectations_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let axes = [(Axis::X, P::X), (Axis::Y, P::Y), (Axis::Z, P::Z)];
    for _ in 0..10 {
        let s = random_state(3, &mut rng);
        let v = dense::complexify(s.amplitudes());
        for &(a, pa) in &axes {
            for q in 0..3 {
                let got = s.expect_pauli(&PauliString::single(q, a)).unwrap();
                let want = dense::expectation(&dense::pauli(3, &[(q, pa)]), &v);
                assert!((got - want.re).abs() < 1e-12 && want.im.abs() < 1e-12);
            }
            for &(b, pb) in &axes {
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let got = s.expect_pauli(&PauliString::pair(i, a, j, b).unwrap()).unwrap();
                    let want = dense::expectation(&dense::pauli(3, &[(i, pa), (j, pb)]), &v);
                    assert!((got - want.re).abs() < 1e-12, "{a:?}{b:?} on {i},{j}");
                }
            }
        }
        // odd-Y strings vanish on real states
        let zy = PauliString::pair(0, Axis::Z, 1, Axis::Y).unwrap();
        assert_eq!(s.expect_pauli(&zy).unwrap(), 0.0);
    }
    let plus = State::plus(5).unwrap();
    let e = |p: PauliString| plus.expect_pauli(&p).unwrap();
    assert!((e(PauliString::single(2, Axis::X)) - 1.0).abs() < 1e-12);
    assert!((e(PauliString::pair(1, Axis::X, 3, Axis::X).unwrap()) - 1.0).abs() < 1e-12);
    assert!(e(PauliString::pair(1, Axis::Z, 3, Axis::Z).unwrap()).abs() < 1e-12);
    assert!(e(PauliString::pair(1, Axis::Y, 3, Axis::Y).unwrap()).abs() < 1e-12);
}

#[test]
fn sampling_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let basis = State::basis(3, 5).unwrap();
    let counts = basis.sample_counts(1000, &mut rng).unwrap();
    assert_eq!(counts.len(), 1);
    assert_eq!(counts[&5], 1000);

    let s = 1_000_000u64;
    let plus = State::plus(2).unwrap();
    let counts = plus.sample_counts(s, &mut rng).unwrap();
    let sd = (s as f64 * 0.25 * 0.75).sqrt();
    for k in 0..4 {
        let c = *counts.get(&k).unwrap_or(&0) as f64;
        assert!((c - s as f64 / 4.0).abs() <= 5.0 * sd, "outcome {k}: {c}");
    }

    let mut a = ChaCha8Rng::seed_from_u64(99);
    let mut b = ChaCha8Rng::seed_from_u64(99);
    let st = random_state(6, &mut rng);
    assert_eq!(st.sample_counts(5000, &mut a).unwrap(), st.sample_counts(5000, &mut b).unwrap());
}

#[test]
fn shot_pauli_estimates() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let plus = State::plus(3).unwrap();
    let xx = PauliString::pair(0, Axis::X, 2, Axis::X).unwrap();
    assert_eq!(plus.shot_pauli_estimate(&xx, 7, &mut rng).unwrap(), 1.0);
    let one = State::basis(3, 1).unwrap();
    assert_eq!(one.shot_pauli_estimate(&PauliString::single(0, Axis::Z), 3, &mut rng).unwrap(), -1.0);

    let shots = 200_000u64;
    let bound = 4.0 / (shots as f64).sqrt();
    for _ in 0..5 {
        let s = random_state(3, &mut rng);
        let zz = PauliString::pair(0, Axis::Z, 1, Axis::Z).unwrap();
        let exact = s.expect_pauli(&zz).unwrap();
        assert!((s.shot_pauli_estimate(&zz, shots, &mut rng).unwrap() - exact).abs() <= bound);
        let zy = PauliString::pair(1, Axis::Z, 2, Axis::Y).unwrap();
        assert!(s.shot_pauli_estimate(&zy, shots, &mut rng).unwrap().abs() <= bound);
    }
}

#[test]
fn fidelity_cases() {
    let instance = generate_instance(6, 1).unwrap();
    let opt = brute_force_solve(&instance).unwrap();
    let plus = State::plus(6).unwrap();
    if opt.states.len() == 1 {
        assert!((plus.fidelity(&opt).unwrap() - 1.0 / 64.0).abs() < 1e-15);
    }
    let on = State::basis(6, opt.states[0]).unwrap();
    assert!((on.fidelity(&opt).unwrap() - 1.0).abs() < 1e-15);
    let all = OptimalSet { n: 6, min_energy: 0.0, states: (0..64).collect() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert!((random_state(6, &mut rng).fidelity(&all).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn long_ite_reaches_ground_state() {
    for seed in 0..3 {
        let instance = generate_instance(6, seed).unwrap();
        let opt = brute_force_solve(&instance).unwrap();
        let mut s = State::plus(6).unwrap();
        for _ in 0..40 {
            for c in instance.couplings() {
                s.apply_ite_zz(c.i, c.j, c.value).unwrap();
            }
            for (q, &h) in instance.h().iter().enumerate() {
                s.apply_ite_z(q, h).unwrap();
            }
        }
        assert!(s.fidelity(&opt).unwrap() > 0.999, "seed {seed}");
    }
}

#[test]
fn norm_drift_after_many_gates() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 12;
    let mut s = random_state(n, &mut rng);
    for _ in 0..10_000 {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let t = rng.random_range(-3.0..3.0);
        match rng.random_range(0..5) {
            0 => s.apply_ry(i, t),
            1 => s.apply_h(i),
            2 => s.apply_cnot(i, j),
            3 => s.apply_cz(i, j),
            _ => s.apply_yz_pair(i, j, t, 0.7 * t),
        }
        .unwrap();
    }
    assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
}

#[test]
fn binary_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let s = random_state(5, &mut rng);
    let mut buf = Vec::new();
    s.write_le(&mut buf).unwrap();
    assert_eq!(State::read_le(&buf[..]).unwrap(), s);
}

#[test]
fn rejects_bad_inputs() {
    let mut s = State::plus(3).unwrap();
    assert!(s.apply_ry(3, 0.1).is_err());
    assert!(s.apply_cnot(1, 1).is_err());
    assert!(State::from_amplitudes(vec![1.0, 0.0, 0.0]).is_err());
    assert!(State::from_amplitudes(vec![0.0; 4]).is_err());
    assert!(matches!(State::plus(27), Err(siavqe::Error::ResourceLimit { .. })));
    assert!(PauliString::pair(1, Axis::X, 1, Axis::Z).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unitary_gates_preserve_norm(
        seed in any::<u64>(),
        ops in prop::collection::vec((0usize..5, 0usize..5, 1usize..5, -7.0f64..7.0), 1..60),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 5;
        let mut s = random_state(n, &mut rng);
        for (kind, i, off, t) in ops {
            let j = (i + off) % n;
            match kind {
                0 => s.apply_ry(i, t),
                1 => s.apply_h(i),
                2 => s.apply_cnot(i, j),
                3 => s.apply_cz(i, j),
                _ => s.apply_yz_pair(i, j, t, -t),
            }.unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn ite_keeps_unit_norm(seed in any::<u64>(), tau in 0.0f64..3.0, i in 0usize..4, off in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = random_state(4, &mut rng);
        s.apply_ite_zz(i, (i + off) % 4, tau).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn ry_angles_add(a in -6.0f64..6.0, b in -6.0f64..6.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(3, &mut rng);
        let mut x = s.clone();
        x.apply_ry(1, a).unwrap();
        x.apply_ry(1, b).unwrap();
        let mut y = s;
        y.apply_ry(1, a + b).unwrap();
        for (p, q) in x.amplitudes().iter().zip(y.amplitudes()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_complete(seed in any::<u64>(), shots in 1u64..3000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(4, &mut rng);
        let a = s.sample_counts(shots, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = s.sample_counts(shots, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.values().sum::<u64>(), shots);
        prop_assert!(a.keys().all(|&k| k < 16));
    }
}
