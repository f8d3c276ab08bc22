use num_complex::Complex64 as C;
use proptest::prelude::*;
use qfhe_lab::acceptance::chi2_uniform;
use qfhe_lab::qfhe_scheme::*;
use qfhe_lab::quantum_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn gate() -> impl Strategy<Value = Gate> {
    prop::sample::select(vec![Gate::X, Gate::Y, Gate::Z, Gate::H, Gate::S, Gate::Sdg, Gate::T, Gate::Tdg, Gate::Cnot])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), n in 2usize..5, gates in prop::collection::vec((gate(), 0usize..4, 1usize..4), 1..20)) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut s = random_state(n, &mut rng).unwrap();
        for (g, a, d) in gates {
            let a = a % n;
            let targets = if g == Gate::Cnot { vec![a, (a + d % (n - 1) + 1) % n] } else { vec![a] };
            s.apply(g, &targets).unwrap();
        }
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn teleportation_carries_pauli_frame(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_qubit(&mut rng);
        let mut s = StateVector::from_qubit(psi).tensor(&StateVector::zero(2).unwrap()).unwrap();
        s.apply(Gate::H, &[1]).unwrap();
        s.apply(Gate::Cnot, &[1, 2]).unwrap();
        let (m1, m2, collapsed) = sv_bell_measure(&s, 0, 1, &mut rng, None).unwrap();
        let rho = reduced_density(&collapsed, 2).unwrap();
        let expect = apply2(&pauli(m1, m2), psi);
        prop_assert!(fidelity_with_density(expect, &rho) > 1.0 - 1e-10);
    }

    #[test]
    fn chain_frame_corrects_to_data(seed in any::<u64>(), steps in prop::collection::vec(any::<bool>(), 0..12)) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_qubit(&mut rng);
        let mut chain = ChainSim::new(psi, seed).unwrap();
        for (i, pdg) in steps.iter().enumerate() {
            let deco = if *pdg { Decoration::Pdg } else { Decoration::None };
            chain = chain_teleport(&chain, deco, i as u64);
        }
        let fixed = correct(chain.physical_state(), chain.frame);
        prop_assert!(fidelity2(fixed, chain.data) > 1.0 - 1e-12);
        let k = steps.iter().filter(|&&p| p).count();
        let sdg = Gate::Sdg.matrix().unwrap();
        let expect = (0..k).fold(psi, |v, _| apply2(&sdg, v));
        prop_assert!(fidelity2(chain.data, expect) > 1.0 - 1e-12);
    }

    #[test]
    fn qotp_round_trip(seed in any::<u64>(), a in 0u8..2, b in 0u8..2, n in 1usize..4) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let s = random_state(n, &mut rng).unwrap();
        let t = n - 1;
        let enc = qotp(&s, a, b, Direction::Enc, t).unwrap();
        let dec = qotp(&enc, a, b, Direction::Dec, t).unwrap();
        prop_assert!(fidelity(&s, &dec) > 1.0 - 1e-12);
    }

    /// Single gates: the decrypted pads follow the update rules and the plaintext is right.
    #[test]
    fn pad_rules_per_gate(seed in any::<u64>(), g in prop::sample::select(vec![Gate::X, Gate::Z, Gate::H, Gate::S, Gate::Cnot])) {
        let keys = qfhe_keygen(&QfheParams::t1(1), seed % 4).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let psi = random_state(2, &mut rng).unwrap();
        let (ct, pads) = qfhe_encrypt_with_pads(&keys, &psi, seed).unwrap();
        let q = if g == Gate::Cnot { vec![0, 1] } else { vec![0] };
        let c = Circuit { qubit_count: 2, gates: vec![CircuitGate { g, q }] };
        let out = qfhe_eval(&keys, &c, &ct, seed).unwrap();
        let [(a0, b0), (a1, b1)] = [pads[0], pads[1]];
        let expect = match g {
            Gate::X => [(a0 ^ 1, b0), (a1, b1)],
            Gate::Z => [(a0, b0 ^ 1), (a1, b1)],
            Gate::H => [(b0, a0), (a1, b1)],
            Gate::S => [(a0, a0 ^ b0), (a1, b1)],
            _ => [(a0, b0 ^ b1), (a0 ^ a1, b1)],
        };
        prop_assert_eq!(decrypt_pads(&keys, &out).unwrap(), expect.to_vec());
        let (plain, _) = qfhe_decrypt(&keys, &out).unwrap();
        prop_assert!(fidelity(&plain, &c.simulate(&psi).unwrap()) > 1.0 - 1e-9);
    }
}

#[test]
fn bell_outcomes_are_uniform() {
    let mut rng = ChaCha20Rng::seed_from_u64(17);
    let mut counts = [0u64; 4];
    for _ in 0..4000 {
        let psi = random_qubit(&mut rng);
        let mut s = StateVector::from_qubit(psi).tensor(&StateVector::zero(2).unwrap()).unwrap();
        s.apply(Gate::H, &[1]).unwrap();
        s.apply(Gate::Cnot, &[1, 2]).unwrap();
        let (m1, m2, _) = sv_bell_measure(&s, 0, 1, &mut rng, None).unwrap();
        counts[usize::from(2 * m1 + m2)] += 1;
    }
    assert!(chi2_uniform(&counts) > 0.001, "{counts:?}");
}

#[test]
fn forced_zero_probability_branch_is_an_error() {
    let mut s = StateVector::zero(2).unwrap();
    s.apply(Gate::H, &[0]).unwrap();
    s.apply(Gate::Cnot, &[0, 1]).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    assert!(sv_bell_measure(&s, 0, 1, &mut rng, Some((1, 0))).is_err());
}

#[test]
fn t_x_on_zero_matches_x_s_t() {
    let mut lhs = StateVector::zero(1).unwrap();
    lhs.apply(Gate::X, &[0]).unwrap();
    lhs.apply(Gate::T, &[0]).unwrap();
    let mut rhs = StateVector::zero(1).unwrap();
    for g in [Gate::T, Gate::S, Gate::X] {
        rhs.apply(g, &[0]).unwrap();
    }
    assert!(fidelity(&lhs, &rhs) > 1.0 - 1e-12);
}

#[test]
fn s_then_sdg_is_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..20 {
        let s0 = random_state(2, &mut rng).unwrap();
        let s1 = sv_apply(&sv_apply(&s0, Gate::S, &[1]).unwrap(), Gate::Sdg, &[1]).unwrap();
        let diff: f64 = s0.amplitudes.iter().zip(&s1.amplitudes).map(|(a, b)| (a - b).norm()).sum();
        assert!(diff < 1e-12);
    }
}

#[test]
fn too_many_qubits_is_a_size_error() {
    assert!(StateVector::zero(40).is_err());
    let amps = vec![C::new(0.0, 0.0); 3];
    assert!(StateVector::from_amplitudes(amps).is_err());
}

#[test]
fn circuit_json_round_trip_and_gate_set() {
    let c: Circuit = serde_json::from_str(r#"{"qubit_count": 2, "gates": [{"g": "H", "q": [0]}, {"g": "CNOT", "q": [0, 1]}, {"g": "T", "q": [1]}]}"#).unwrap();
    assert_eq!(c.t_depth(), 1);
    c.validate().unwrap();
    let back: Circuit = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
    let bad = Circuit { qubit_count: 1, gates: vec![CircuitGate { g: Gate::Y, q: vec![0] }] };
    assert!(bad.validate().is_err());
}
