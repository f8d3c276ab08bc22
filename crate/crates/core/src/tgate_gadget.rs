//! Conditional-P† gadget: a garden-hose network for LWE decryption run as a
//! teleportation chain. The data qubit picks up P† iff the control
//! ciphertext decrypts to 1.
//!
//! Alice's half (wiring and Bell outcomes) is fixed at generation time from
//! `sk_i`. The evaluator wires Bob's half from the control ciphertext, routes
//! the data along the water path, and emits two ledgers under `sk_{i+1}`:
//! the exit location (`loc_ct`, read with [`he_phase`]) and the frame bits
//! (`corr_cts`).
//!
//! The simulator routes in transparent mode: it knows the water path and the
//! firing bit, and uses them to select which outcome ciphertexts enter
//! `corr_cts`. What the server would actually observe is recorded separately
//! in [`ServerView`].

use crate::branching_program::bp_from_ma_alice;
use crate::garden_hose::{bob_symbols, gh_build, gh_flow, gh_wire_alice, gh_wire_bob, BobSymbols, End, Matching, PipeNetwork, Side, WaterTrace};
use crate::lwe_he::{
    encrypt_with_error, encrypt_with_rng, he_decrypt, he_eval_affine, he_eval_linear, he_phase, LweCiphertext, PublicKey,
    SecretKey,
};
use crate::ma_program::{compile_lwe_dec, Instruction, MaProgram, rounding_accept_set};
use crate::quantum_core::{chain_step, correct, outcome_for, Amp2, ChainSim, Decoration, PauliFrame};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Stream used for the key's own encryption randomness, clear of all pipe-end streams.
const KEY_RNG_STREAM: u64 = 1 << 48;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellRecord {
    pub ends: (End, End),
    pub stream: u64,
    pub m1: u8,
    pub m2: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetKey {
    pub network: PipeNetwork,
    pub alice_matching: Matching,
    /// One record per pair of `alice_matching`, same order.
    pub alice_outcomes: Vec<BellRecord>,
    /// `(Enc(m1), Enc(m2))` per Alice record under the pad key of level `i + 1`.
    pub outcome_cts: Vec<(LweCiphertext, LweCiphertext)>,
    pub zero_ct: LweCiphertext,
    /// Noise-free encryptions of `sk_i` under `sk_{i+1}` at the control modulus.
    pub selection_cts: Vec<LweCiphertext>,
    pub level: usize,
    pub seed: u64,
}

impl GadgetKey {
    pub fn epr_pairs(&self) -> usize {
        self.network.pipe_count
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerView {
    pub bob_matching: Matching,
    /// Input measurement first, then every Bob connection.
    pub bob_outcomes: Vec<BellRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GadgetOutput {
    pub data: ChainSim,
    pub candidate_exits: Vec<End>,
    /// Simulator-internal: where the data actually left.
    pub exit_end: End,
    pub loc_ct: LweCiphertext,
    pub corr_cts: (LweCiphertext, LweCiphertext),
    pub server_view: ServerView,
    pub fired: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasKind {
    Input,
    Alice(usize),
    Bob,
}

/// Measurement that teleports the data into `pipe`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStep {
    pub pipe: usize,
    pub kind: MeasKind,
    pub stream: u64,
    pub decoration: Decoration,
}

/// Evaluation-time wiring for one control ciphertext.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetRun {
    pub symbols: BobSymbols,
    pub bob: Matching,
    pub trace: WaterTrace,
    pub steps: Vec<PathStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub state: Amp2,
    pub new_pauli: PauliFrame,
    pub exit_state: u64,
}

pub fn pair_stream(a: End, b: End) -> u64 {
    a.id().min(b.id())
}

/// Network shape of decryption for modulus `q` and dimension `n`; independent of any ciphertext.
pub fn decryption_network(q: u64, n: usize) -> Result<PipeNetwork> {
    let shape = MaProgram {
        modulus: q,
        start: 0,
        instructions: (1..=n).map(|var| Instruction { var, a: 0, b: 0 }).collect(),
        accept: rounding_accept_set(q),
        arity: n,
    };
    gh_build(&bp_from_ma_alice(&shape)?)
}

/// `pk_next` carries the control parameters, `pad_pk_next` the pad parameters; both at level `i + 1`.
pub fn gadget_gen(sk_i: &SecretKey, pk_next: &PublicKey, pad_pk_next: &PublicKey, seed: u64) -> Result<GadgetKey> {
    for pk in [pk_next, pad_pk_next] {
        if pk.level != sk_i.level + 1 {
            return Err(Error::KeyLevel { expected: sk_i.level + 1, found: pk.level });
        }
    }
    let params = &pk_next.params;
    if sk_i.bits.len() != params.n {
        return Err(Error::Parameter(format!("secret of length {} for n = {}", sk_i.bits.len(), params.n)));
    }
    let network = decryption_network(params.q, params.n)?;
    let alice_matching = gh_wire_alice(&network, &sk_i.bits)?;
    let alice_outcomes: Vec<BellRecord> = alice_matching
        .pairs
        .iter()
        .map(|&(a, b)| {
            let stream = pair_stream(a, b);
            let (m1, m2) = outcome_for(seed, stream);
            BellRecord { ends: (a, b), stream, m1, m2 }
        })
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(KEY_RNG_STREAM);
    let outcome_cts = alice_outcomes
        .iter()
        .map(|r| Ok((encrypt_with_rng(pad_pk_next, r.m1, &mut rng)?, encrypt_with_rng(pad_pk_next, r.m2, &mut rng)?)))
        .collect::<Result<_>>()?;
    let zero_ct = encrypt_with_error(pad_pk_next, 0, 0, &mut rng)?;
    let selection_cts = sk_i
        .bits
        .iter()
        .map(|&b| encrypt_with_error(pk_next, b, 0, &mut rng))
        .collect::<Result<_>>()?;
    Ok(GadgetKey {
        network,
        alice_matching,
        alice_outcomes,
        outcome_cts,
        zero_ct,
        selection_cts,
        level: sk_i.level,
        seed,
    })
}

/// Bob's wiring and the water path for `control_ct`.
pub fn gadget_prepare(key: &GadgetKey, control_ct: &LweCiphertext) -> Result<GadgetRun> {
    if control_ct.level != key.level {
        return Err(Error::KeyLevel { expected: key.level, found: control_ct.level });
    }
    let net = &key.network;
    if control_ct.params.q != net.states || control_ct.mask.len() != net.layers {
        return Err(Error::Parameter("control ciphertext does not match the gadget's shape".into()));
    }
    let symbols = bob_symbols(&bp_from_ma_alice(&compile_lwe_dec(control_ct))?)?;
    let bob = gh_wire_bob(net, &symbols)?;
    let trace = gh_flow(net, &key.alice_matching, &bob)?;
    let alice_index: std::collections::HashMap<End, usize> = key
        .alice_matching
        .pairs
        .iter()
        .enumerate()
        .flat_map(|(i, &(a, b))| [(a, i), (b, i)])
        .collect();
    let mut steps = Vec::with_capacity(trace.pipes.len());
    for (i, &pipe) in trace.pipes.iter().enumerate() {
        let (kind, stream) = if i == 0 {
            (MeasKind::Input, net.entry_end.id())
        } else {
            let (from, to) = (trace.visited_ends[2 * i - 1], trace.visited_ends[2 * i]);
            match from.side {
                Side::Alice => (MeasKind::Alice(alice_index[&from]), pair_stream(from, to)),
                Side::Bob => (MeasKind::Bob, pair_stream(from, to)),
            }
        };
        let decoration = if net.decorated.contains(&pipe) { Decoration::Pdg } else { Decoration::None };
        steps.push(PathStep { pipe, kind, stream, decoration });
    }
    Ok(GadgetRun { symbols, bob, trace, steps })
}

pub fn step_outcome(key: &GadgetKey, step: &PathStep, seed: u64) -> (u8, u8) {
    match step.kind {
        MeasKind::Alice(i) => (key.alice_outcomes[i].m1, key.alice_outcomes[i].m2),
        MeasKind::Input | MeasKind::Bob => outcome_for(seed, step.stream),
    }
}

pub fn gadget_apply(key: &GadgetKey, data_in: Amp2, control_ct: &LweCiphertext, seed: u64) -> Result<GadgetOutput> {
    let run = gadget_prepare(key, control_ct)?;
    let mut chain = ChainSim::new(data_in, seed)?;
    for step in &run.steps {
        chain = chain_step(&chain, step_outcome(key, step, seed), step.decoration);
    }
    gadget_assemble(key, &run, chain, seed)
}

/// Builds the output ledgers once the chain has walked the whole path.
pub fn gadget_assemble(key: &GadgetKey, run: &GadgetRun, chain: ChainSim, seed: u64) -> Result<GadgetOutput> {
    if chain.transcript.len() != run.steps.len() {
        return Err(Error::Schedule(format!(
            "chain executed {} of {} path measurements",
            chain.transcript.len(),
            run.steps.len()
        )));
    }
    let fired = chain.pdg_applied > 0;
    let mut x_cts = vec![key.zero_ct.clone()];
    let mut z_cts = vec![key.zero_ct.clone()];
    let (mut x_bits, mut z_bits) = (Vec::new(), Vec::new());
    let mut fire_cts = Vec::new();
    let mut fire_bits = Vec::new();
    for (step, &(m1, m2)) in run.steps.iter().zip(&chain.transcript) {
        match step.kind {
            MeasKind::Alice(i) => {
                x_cts.push(key.outcome_cts[i].0.clone());
                z_cts.push(key.outcome_cts[i].1.clone());
            }
            _ => {
                x_bits.push(m1);
                z_bits.push(m2);
            }
        }
        if step.decoration == Decoration::Pdg {
            // z ^= x: fold every x contribution so far into z
            fire_cts.extend(x_cts[1..].iter().cloned());
            fire_bits.extend(x_bits.iter().copied());
        }
    }
    if fired {
        z_cts.extend(fire_cts);
        z_bits.extend(fire_bits);
    }
    let corr_x = he_eval_linear(&x_cts, &x_bits)?;
    let corr_z = he_eval_linear(&z_cts, &z_bits)?;
    let q = key.network.states;
    let terms: Vec<(u64, &LweCiphertext)> = run
        .symbols
        .shifts
        .iter()
        .zip(&key.selection_cts)
        .map(|(&c, sel)| ((q - (2 * c) % q) % q, sel))
        .collect();
    let loc_ct = he_eval_affine(run.symbols.start, &terms)?;
    let mut bob_outcomes = vec![{
        let (m1, m2) = outcome_for(seed, key.network.entry_end.id());
        let e = key.network.entry_end;
        BellRecord { ends: (e, e), stream: e.id(), m1, m2 }
    }];
    bob_outcomes.extend(run.bob.pairs.iter().map(|&(a, b)| {
        let stream = pair_stream(a, b);
        let (m1, m2) = outcome_for(seed, stream);
        BellRecord { ends: (a, b), stream, m1, m2 }
    }));
    Ok(GadgetOutput {
        data: chain,
        candidate_exits: key.network.outputs.clone(),
        exit_end: run.trace.exit_end,
        loc_ct,
        corr_cts: (corr_x, corr_z),
        server_view: ServerView { bob_matching: run.bob.clone(), bob_outcomes },
        fired,
    })
}

pub fn gadget_resolve(sk_next: &SecretKey, out: &GadgetOutput) -> Result<Resolved> {
    let exit_state = he_phase(sk_next, &out.loc_ct)?;
    let new_pauli = PauliFrame { x: he_decrypt(sk_next, &out.corr_cts.0)?, z: he_decrypt(sk_next, &out.corr_cts.1)? };
    Ok(Resolved { state: correct(out.data.physical_state(), new_pauli), new_pauli, exit_state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lwe_he::{encrypt_with_mask, public_key_for, LweParams};
    use crate::quantum_core::{fidelity2, tomography_inputs};

    fn keys() -> (SecretKey, SecretKey, GadgetKey) {
        let sk0 = SecretKey { bits: vec![1, 0, 1, 1], level: 0 };
        let sk1 = SecretKey { bits: vec![0, 1, 1, 0], level: 1 };
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let pk1 = public_key_for(&sk1, &LweParams::t1(), &mut rng);
        let pad1 = public_key_for(&sk1, &LweParams::working(4, 2), &mut rng);
        let key = gadget_gen(&sk0, &pk1, &pad1, 11).unwrap();
        (sk0, sk1, key)
    }

    #[test]
    fn t1_gadget_shape() {
        let (sk0, sk1, key) = keys();
        assert_eq!(key.epr_pairs(), 154);
        assert_eq!(key.selection_cts.len(), 4);
        for (ct, &b) in key.selection_cts.iter().zip(&sk0.bits) {
            assert_eq!(he_decrypt(&sk1, ct).unwrap(), b);
        }
    }

    #[test]
    fn worked_example_exits_at_nine() {
        let (sk0, sk1, key) = keys();
        let ct = encrypt_with_mask(&sk0, &LweParams::t1(), &[3, 5, 7, 11], 1, 1).unwrap();
        let plus_i = tomography_inputs()[3];
        let out = gadget_apply(&key, plus_i, &ct, 4).unwrap();
        assert!(out.fired);
        let r = gadget_resolve(&sk1, &out).unwrap();
        assert_eq!(r.exit_state, 9);
        assert!((fidelity2(r.state, tomography_inputs()[2]) - 1.0).abs() < 1e-12);
        assert_eq!(r.new_pauli, out.data.frame);
    }

    #[test]
    fn wrong_level_is_rejected() {
        let (_, sk1, key) = keys();
        let ct = encrypt_with_mask(&sk1, &LweParams::t1(), &[3, 5, 7, 11], 0, 0).unwrap();
        assert!(matches!(gadget_apply(&key, tomography_inputs()[0], &ct, 1), Err(Error::KeyLevel { .. })));
    }
}
