use proptest::prelude::*;
use qfhe_lab::branching_program::*;
use qfhe_lab::garden_hose::*;
use qfhe_lab::ma_program::*;
use std::collections::BTreeSet;

fn program() -> impl Strategy<Value = MaProgram> {
    (2u64..8, 1usize..5)
        .prop_flat_map(|(m, arity)| {
            (
                Just(m),
                Just(arity),
                0..m,
                prop::collection::vec((1..=arity, 0..m, 0..m), 1..7),
                prop::collection::btree_set(0..m, 0..m as usize),
            )
        })
        .prop_map(|(modulus, arity, start, ins, accept)| MaProgram {
            modulus,
            start,
            instructions: ins.into_iter().map(|(var, a, b)| Instruction { var, a, b }).collect(),
            accept,
            arity,
        })
}

fn with_input() -> impl Strategy<Value = (MaProgram, Vec<u8>)> {
    program().prop_flat_map(|p| {
        let n = p.arity;
        (Just(p), prop::collection::vec(0u8..2, n))
    })
}

/// Direct evaluation, independent of the library.
fn oracle(p: &MaProgram, x: &[u8]) -> (u64, u8) {
    let s = p.instructions.iter().fold(p.start, |s, i| {
        (s + if x[i.var - 1] == 1 { i.b } else { i.a }) % p.modulus
    });
    (s, u8::from(p.accept.contains(&s)))
}

proptest! {
    #[test]
    fn every_stage_agrees_with_the_oracle((p, x) in with_input()) {
        let (state, out) = oracle(&p, &x);
        let trace = ma_evaluate(&p, &x).unwrap();
        prop_assert_eq!(*trace.states.last().unwrap(), state);
        prop_assert_eq!(trace.output, out);
        let bp = bp_from_ma_alice(&p).unwrap();
        let (bp_out, bp_states) = bp_evaluate(&bp, &x).unwrap();
        prop_assert_eq!(bp_out, out);
        prop_assert_eq!(*bp_states.last().unwrap(), state);
        prop_assert_eq!(bp_evaluate(&bp_to_bit_level(&bp).unwrap(), &x).unwrap().0, out);
        let net = gh_build(&bp).unwrap();
        let alice = gh_wire_alice(&net, &x).unwrap();
        let bob = gh_wire_bob(&net, &bob_symbols(&bp).unwrap()).unwrap();
        let water = gh_flow(&net, &alice, &bob).unwrap();
        prop_assert_eq!(water.output, out);
        prop_assert_eq!(water.exit_state, state);
    }

    #[test]
    fn decoration_law((p, x) in with_input()) {
        let bp = bp_from_ma_alice(&p).unwrap();
        let net = gh_build(&bp).unwrap();
        let water = gh_flow(&net, &gh_wire_alice(&net, &x).unwrap(), &gh_wire_bob(&net, &bob_symbols(&bp).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(water.traversed_decorations, usize::from(water.output));
        prop_assert!(water.traversed_decorations <= 1);
    }

    #[test]
    fn pipe_count_law(p in program()) {
        let net = gh_build(&bp_from_ma_alice(&p).unwrap()).unwrap();
        let (s, l) = (p.modulus as usize, p.instructions.len());
        prop_assert_eq!(net.pipe_count, 2 * s * l + s + 1);
        prop_assert_eq!(net.pipes.len(), net.pipe_count);
        prop_assert_eq!(net.decorated.len(), p.accept.len());
    }

    /// Alice's wiring depends only on her bits and the shape; Bob's only on his symbols.
    #[test]
    fn party_locality((p, x) in with_input(), shift in 1u64..8) {
        let bp = bp_from_ma_alice(&p).unwrap();
        let net = gh_build(&bp).unwrap();
        let mut q = p.clone();
        for ins in &mut q.instructions {
            ins.a = (ins.a + shift) % q.modulus;
            ins.b = (ins.b + 2 * shift) % q.modulus;
        }
        q.start = (q.start + shift) % q.modulus;
        let bp2 = bp_from_ma_alice(&q).unwrap();
        let net2 = gh_build(&bp2).unwrap();
        let alice = gh_wire_alice(&net, &x).unwrap();
        prop_assert_eq!(&alice, &gh_wire_alice(&net2, &x).unwrap());
        prop_assert!(alice.pairs.iter().all(|(a, b)| a.side == Side::Alice && b.side == Side::Alice));
        let bob = gh_wire_bob(&net, &bob_symbols(&bp).unwrap()).unwrap();
        prop_assert!(bob.pairs.iter().all(|(a, b)| a.side == Side::Bob && b.side == Side::Bob));
        alice.validate(&net, Side::Alice).unwrap();
        bob.validate(&net, Side::Bob).unwrap();
    }

    #[test]
    fn bp_layers_are_permutations(p in program()) {
        let bp = bp_from_ma_alice(&p).unwrap();
        for layer in &bp.layers {
            prop_assert!(is_permutation(&layer.map0) && is_permutation(&layer.map1));
        }
        let m = bp_metrics(&bp);
        prop_assert_eq!(m.width_states, p.modulus);
        prop_assert_eq!(m.length, p.instructions.len());
    }

    #[test]
    fn counters_are_symmetric(n in 1usize..7) {
        let p = compile_counter(n, &majority_weights(n)).unwrap();
        prop_assert!(matches!(symmetry_witness(&p).unwrap(), Symmetry::Symmetric));
    }
}

#[test]
fn parity_network_computes_parity() {
    let p = compile_parity(3).unwrap();
    let bp = bp_from_ma_alice(&p).unwrap();
    let net = gh_build(&bp).unwrap();
    let bob = gh_wire_bob(&net, &bob_symbols(&bp).unwrap()).unwrap();
    for v in 0..8u8 {
        let x: Vec<u8> = (0..3).map(|i| (v >> i) & 1).collect();
        let w = gh_flow(&net, &gh_wire_alice(&net, &x).unwrap(), &bob).unwrap();
        assert_eq!(w.output, (v.count_ones() % 2) as u8);
    }
}

#[test]
fn bob_read_layers_are_rejected() {
    let p = compile_parity(2).unwrap();
    let bp = bp_from_ma(&p, &[Reader::Alice, Reader::Bob]).unwrap();
    assert!(gh_build(&bp).is_err());
}

#[test]
fn empty_accept_set_never_decorates() {
    let p = MaProgram {
        modulus: 3,
        start: 1,
        instructions: vec![Instruction { var: 1, a: 1, b: 2 }],
        accept: BTreeSet::new(),
        arity: 1,
    };
    let net = gh_build(&bp_from_ma_alice(&p).unwrap()).unwrap();
    assert!(net.decorated.is_empty());
}
