//! QOTP + HE scheme over Clifford+T circuits.
//!
//! A ciphertext holds `X^a Z^b psi` per qubit together with encryptions of
//! `(a, b)`. Pad ciphertexts live at a working modulus (`2^32`) so that key
//! switching between levels has room; before each gadget the `a` pad is
//! switched down to the control modulus. Key levels advance once per
//! T-layer.

use crate::lwe_he::{
    he_decrypt, he_eval_linear, he_keygen, encrypt_with_rng, key_switch, ks_keygen, mod_switch, public_key_for,
    KeyChain, KeySwitchKey, LweCiphertext, LweParams, PublicKey,
};
use crate::quantum_core::{Gate, StateVector};
use crate::tgate_gadget::{gadget_apply, gadget_gen, GadgetKey};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const MAX_QFHE_QUBITS: usize = 3;

const PAD_STREAM: u64 = 1 << 50;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QfheParams {
    /// Control parameters the gadgets are built for.
    pub he: LweParams,
    pub pad: LweParams,
    /// Maximum T-depth.
    pub levels: usize,
}

impl QfheParams {
    pub fn t1(levels: usize) -> Self {
        let mut he = LweParams::t1();
        he.levels = levels + 1;
        QfheParams { pad: LweParams::working(he.n, levels + 1), he, levels }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QfheKeys {
    pub params: QfheParams,
    pub chain: KeyChain,
    pub pad_pks: Vec<PublicKey>,
    /// `ks_keys[i]` switches pads from level `i` to `i + 1`.
    pub ks_keys: Vec<KeySwitchKey>,
    /// `gadget_keys[i]` binds `sk_i` to level `i + 1`.
    pub gadget_keys: Vec<GadgetKey>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfheCiphertext {
    pub state: StateVector,
    /// `(enc a, enc b)` per qubit.
    pub pads: Vec<(LweCiphertext, LweCiphertext)>,
    pub level: usize,
}

impl QfheCiphertext {
    /// Fixed-width encoding: level, amplitudes, pad ciphertexts.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = (self.level as u64).to_le_bytes().to_vec();
        for a in &self.state.amplitudes {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        for (a, b) in &self.pads {
            out.extend(a.to_bytes());
            out.extend(b.to_bytes());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub qubit_count: usize,
    pub gates: Vec<CircuitGate>,
}

/// JSON form `{"g": "H", "q": [0]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitGate {
    pub g: Gate,
    pub q: Vec<usize>,
}

impl Circuit {
    pub fn validate(&self) -> Result<()> {
        for gate in &self.gates {
            if !matches!(gate.g, Gate::X | Gate::Z | Gate::H | Gate::S | Gate::Cnot | Gate::T) {
                return Err(Error::Input(format!("gate {:?} is outside {{X, Z, H, S, CNOT, T}}", gate.g)));
            }
            if gate.q.len() != gate.g.arity() {
                return Err(Error::Index(format!("{:?} takes {} qubits", gate.g, gate.g.arity())));
            }
            if gate.q.iter().any(|&q| q >= self.qubit_count) || (gate.q.len() == 2 && gate.q[0] == gate.q[1]) {
                return Err(Error::Index(format!("bad qubit indices {:?}", gate.q)));
            }
        }
        Ok(())
    }

    /// Per-qubit T count, merged across CNOTs; the maximum is the T-depth.
    fn layer_keys(&self) -> (Vec<usize>, usize) {
        let mut depth = vec![0usize; self.qubit_count];
        let mut keys = Vec::with_capacity(self.gates.len());
        for gate in &self.gates {
            let d = gate.q.iter().map(|&q| depth[q]).max().unwrap_or(0);
            let key = if gate.g == Gate::T { 2 * (d + 1) - 1 } else { 2 * d };
            let new_d = if gate.g == Gate::T { d + 1 } else { d };
            for &q in &gate.q {
                depth[q] = new_d;
            }
            keys.push(key);
        }
        (keys, depth.into_iter().max().unwrap_or(0))
    }

    pub fn t_depth(&self) -> usize {
        self.layer_keys().1
    }

    /// Equivalent gate order in which the T gates of each T-layer are contiguous.
    pub fn layered(&self) -> Vec<CircuitGate> {
        self.layered_keyed().into_iter().map(|(_, g)| g).collect()
    }

    fn layered_keyed(&self) -> Vec<(usize, CircuitGate)> {
        let (keys, _) = self.layer_keys();
        let mut idx: Vec<usize> = (0..self.gates.len()).collect();
        idx.sort_by_key(|&i| keys[i]);
        idx.into_iter().map(|i| (keys[i], self.gates[i].clone())).collect()
    }

    /// Plain simulation.
    pub fn simulate(&self, state: &StateVector) -> Result<StateVector> {
        self.validate()?;
        let mut s = state.clone();
        for g in &self.gates {
            s.apply(g.g, &g.q)?;
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecryptStats {
    /// Modular additions in pad decryption plus Pauli applications.
    pub ops: usize,
}

pub fn qfhe_keygen(params: &QfheParams, seed: u64) -> Result<QfheKeys> {
    if params.he.levels != params.levels + 1 || params.pad.levels != params.levels + 1 {
        return Err(Error::Parameter("key levels must equal T-depth + 1".into()));
    }
    params.pad.validate()?;
    if params.pad.n != params.he.n {
        return Err(Error::Parameter("pad and control dimensions differ".into()));
    }
    let chain = he_keygen(&params.he, seed)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(PAD_STREAM);
    let pad_pks: Vec<PublicKey> =
        chain.pairs.iter().map(|(sk, _)| public_key_for(sk, &params.pad, &mut rng)).collect();
    let mut ks_keys = Vec::with_capacity(params.levels);
    let mut gadget_keys = Vec::with_capacity(params.levels);
    for i in 0..params.levels {
        let sk = chain.secret(i)?;
        ks_keys.push(ks_keygen(sk, &pad_pks[i + 1], &mut rng));
        gadget_keys.push(gadget_gen(sk, chain.public(i + 1)?, &pad_pks[i + 1], rng.gen())?);
    }
    Ok(QfheKeys { params: params.clone(), chain, pad_pks, ks_keys, gadget_keys })
}

/// Encrypts with random pads drawn from `seed`; returns the pads for testing.
pub fn qfhe_encrypt_with_pads(keys: &QfheKeys, plaintext: &StateVector, seed: u64) -> Result<(QfheCiphertext, Vec<(u8, u8)>)> {
    let n = plaintext.qubit_count;
    if n > MAX_QFHE_QUBITS {
        return Err(Error::Size(format!("{n} qubits exceed the scheme limit of {MAX_QFHE_QUBITS}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pk = &keys.pad_pks[0];
    let mut state = plaintext.clone();
    let mut pads = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for q in 0..n {
        let (a, b) = (rng.gen_range(0..2u8), rng.gen_range(0..2u8));
        if b == 1 {
            state.apply(Gate::Z, &[q])?;
        }
        if a == 1 {
            state.apply(Gate::X, &[q])?;
        }
        pads.push((encrypt_with_rng(pk, a, &mut rng)?, encrypt_with_rng(pk, b, &mut rng)?));
        bits.push((a, b));
    }
    Ok((QfheCiphertext { state, pads, level: 0 }, bits))
}

pub fn qfhe_encrypt(keys: &QfheKeys, plaintext: &StateVector, seed: u64) -> Result<QfheCiphertext> {
    Ok(qfhe_encrypt_with_pads(keys, plaintext, seed)?.0)
}

pub fn qfhe_eval(keys: &QfheKeys, circuit: &Circuit, ct: &QfheCiphertext, seed: u64) -> Result<QfheCiphertext> {
    circuit.validate()?;
    if circuit.qubit_count != ct.pads.len() {
        return Err(Error::Index(format!(
            "circuit on {} qubits, ciphertext has {}",
            circuit.qubit_count,
            ct.pads.len()
        )));
    }
    let remaining = keys.params.levels.saturating_sub(ct.level);
    let depth = circuit.t_depth();
    if depth > remaining {
        return Err(Error::Depth(format!("T-depth {depth} exceeds the {remaining} remaining levels")));
    }
    let mut out = ct.clone();
    let mut pads = LinearPads::new(&out.pads);
    let gates = circuit.layered_keyed();
    let mut applications = 0u64;
    let mut i = 0;
    while i < gates.len() {
        let (key, gate) = &gates[i];
        if gate.g != Gate::T {
            apply_clifford(&mut out.state, &mut pads, gate)?;
            i += 1;
            continue;
        }
        let mut block = Vec::new();
        while i < gates.len() && gates[i].0 == *key {
            block.push(gates[i].1.q[0]);
            i += 1;
        }
        t_block(keys, &mut out, &pads, &block, seed, &mut applications)?;
        pads = LinearPads::new(&out.pads);
    }
    out.pads = pads.materialize()?;
    Ok(out)
}

/// Pad ciphertexts as GF(2) combinations of a fixed basis, so repeated
/// terms cancel and the noise bound does not grow with the gate count.
struct LinearPads {
    basis: Vec<LweCiphertext>,
    /// Per qubit and pad: basis indices and a constant bit.
    terms: Vec<[(BTreeSet<usize>, u8); 2]>,
}

impl LinearPads {
    fn new(pads: &[(LweCiphertext, LweCiphertext)]) -> Self {
        let mut basis = Vec::with_capacity(2 * pads.len());
        let mut terms = Vec::with_capacity(pads.len());
        for (a, b) in pads {
            let i = basis.len();
            basis.push(a.clone());
            basis.push(b.clone());
            terms.push([(BTreeSet::from([i]), 0), (BTreeSet::from([i + 1]), 0)]);
        }
        LinearPads { basis, terms }
    }

    fn xor_into(&mut self, (q, p): (usize, usize), (src_q, src_p): (usize, usize)) {
        let (set, c) = self.terms[src_q][src_p].clone();
        let dst = &mut self.terms[q][p];
        dst.0 = dst.0.symmetric_difference(&set).copied().collect();
        dst.1 ^= c;
    }

    fn pad(&self, q: usize, p: usize) -> Result<LweCiphertext> {
        let (set, c) = &self.terms[q][p];
        if set.is_empty() {
            return Err(Error::Input("pad combination lost every basis ciphertext".into()));
        }
        let cts: Vec<LweCiphertext> = set.iter().map(|&i| self.basis[i].clone()).collect();
        he_eval_linear(&cts, &[*c])
    }

    fn materialize(&self) -> Result<Vec<(LweCiphertext, LweCiphertext)>> {
        (0..self.terms.len()).map(|q| Ok((self.pad(q, 0)?, self.pad(q, 1)?))).collect()
    }
}

/// Pauli gates only flip pad bits; H, S and CNOT act on the held state and update the pads.
fn apply_clifford(state: &mut StateVector, pads: &mut LinearPads, gate: &CircuitGate) -> Result<()> {
    let q0 = gate.q[0];
    match gate.g {
        Gate::X => pads.terms[q0][0].1 ^= 1,
        Gate::Z => pads.terms[q0][1].1 ^= 1,
        Gate::H => pads.terms[q0].swap(0, 1),
        Gate::S => pads.xor_into((q0, 1), (q0, 0)),
        Gate::Cnot => {
            let t = gate.q[1];
            pads.xor_into((q0, 1), (t, 1));
            pads.xor_into((t, 0), (q0, 0));
        }
        _ => return Err(Error::Input(format!("{:?} is not a Clifford gate of the scheme", gate.g))),
    }
    if matches!(gate.g, Gate::H | Gate::S | Gate::Cnot) {
        state.apply(gate.g, &gate.q)?;
    }
    Ok(())
}

/// One T-layer: physical T and a gadget per qubit, then every pad moves to the next level.
fn t_block(
    keys: &QfheKeys,
    ct: &mut QfheCiphertext,
    pads: &LinearPads,
    qubits: &[usize],
    seed: u64,
    applications: &mut u64,
) -> Result<()> {
    let level = ct.level;
    let gadget = keys
        .gadget_keys
        .get(level)
        .ok_or_else(|| Error::Depth(format!("no gadget key for level {level}")))?;
    let ksk = &keys.ks_keys[level];
    let mut corrections = Vec::with_capacity(qubits.len());
    for &q in qubits {
        ct.state.apply(Gate::T, &[q])?;
        let control = mod_switch(&pads.pad(q, 0)?, &keys.params.he)?;
        let app_seed = ChaCha20Rng::seed_from_u64(seed ^ (*applications).wrapping_mul(0x9E37_79B9_7F4A_7C15)).gen();
        *applications += 1;
        let zero = [num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)];
        let out = gadget_apply(gadget, zero, &control, app_seed)?;
        if out.fired {
            ct.state.apply(Gate::Sdg, &[q])?;
        }
        if out.data.frame.z == 1 {
            ct.state.apply(Gate::Z, &[q])?;
        }
        if out.data.frame.x == 1 {
            ct.state.apply(Gate::X, &[q])?;
        }
        corrections.push((q, out.corr_cts));
    }
    ct.pads = pads
        .materialize()?
        .iter()
        .map(|(a, b)| Ok((key_switch(ksk, a)?, key_switch(ksk, b)?)))
        .collect::<Result<_>>()?;
    for (q, (cx, cz)) in corrections {
        let (a, b) = ct.pads[q].clone();
        ct.pads[q] = (he_eval_linear(&[a, cx], &[])?, he_eval_linear(&[b, cz], &[])?);
    }
    ct.level = level + 1;
    Ok(())
}

pub fn qfhe_decrypt(keys: &QfheKeys, ct: &QfheCiphertext) -> Result<(StateVector, DecryptStats)> {
    let sk = keys.chain.secret(ct.level)?;
    let mut state = ct.state.clone();
    let mut ops = 0;
    for (q, (ea, eb)) in ct.pads.iter().enumerate() {
        let (a, b) = (he_decrypt(sk, ea)?, he_decrypt(sk, eb)?);
        ops += ea.mask.len() + eb.mask.len() + 2;
        if a == 1 {
            state.apply(Gate::X, &[q])?;
        }
        if b == 1 {
            state.apply(Gate::Z, &[q])?;
        }
        ops += 2;
    }
    Ok((state, DecryptStats { ops }))
}

/// Pads in the clear, for tests.
pub fn decrypt_pads(keys: &QfheKeys, ct: &QfheCiphertext) -> Result<Vec<(u8, u8)>> {
    let sk = keys.chain.secret(ct.level)?;
    ct.pads.iter().map(|(a, b)| Ok((he_decrypt(sk, a)?, he_decrypt(sk, b)?))).collect()
}

/// Uniform random circuit over {X, Z, H, S, CNOT, T} with T-depth at most `max_t_depth`.
pub fn random_circuit<R: Rng + ?Sized>(qubits: usize, gates: usize, max_t_depth: usize, rng: &mut R) -> Circuit {
    let mut c = Circuit { qubit_count: qubits, gates: Vec::with_capacity(gates) };
    let choices = [Gate::X, Gate::Z, Gate::H, Gate::S, Gate::Cnot, Gate::T];
    while c.gates.len() < gates {
        let g = choices[rng.gen_range(0..choices.len())];
        let q = if g == Gate::Cnot {
            if qubits < 2 {
                continue;
            }
            let a = rng.gen_range(0..qubits);
            let b = (a + rng.gen_range(1..qubits)) % qubits;
            vec![a, b]
        } else {
            vec![rng.gen_range(0..qubits)]
        };
        c.gates.push(CircuitGate { g, q });
        if c.t_depth() > max_t_depth {
            c.gates.pop();
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_core::fidelity;
    use num_complex::Complex64 as C;

    fn circuit(gates: &[(Gate, &[usize])], n: usize) -> Circuit {
        Circuit { qubit_count: n, gates: gates.iter().map(|(g, q)| CircuitGate { g: *g, q: q.to_vec() }).collect() }
    }

    #[test]
    fn hth_on_zero() {
        let keys = qfhe_keygen(&QfheParams::t1(1), 3).unwrap();
        let ct = qfhe_encrypt(&keys, &StateVector::zero(1).unwrap(), 4).unwrap();
        let c = circuit(&[(Gate::H, &[0]), (Gate::T, &[0]), (Gate::H, &[0])], 1);
        let out = qfhe_eval(&keys, &c, &ct, 5).unwrap();
        assert_eq!(out.level, 1);
        let (plain, _) = qfhe_decrypt(&keys, &out).unwrap();
        let w = C::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let expect = StateVector::from_amplitudes(vec![(1.0 + w) / 2.0, (1.0 - w) / 2.0]).unwrap();
        assert!(fidelity(&plain, &expect) > 1.0 - 1e-9);
    }

    #[test]
    fn depth_budget_enforced() {
        let keys = qfhe_keygen(&QfheParams::t1(1), 3).unwrap();
        let ct = qfhe_encrypt(&keys, &StateVector::zero(1).unwrap(), 4).unwrap();
        let c = circuit(&[(Gate::T, &[0]), (Gate::T, &[0])], 1);
        assert!(matches!(qfhe_eval(&keys, &c, &ct, 5), Err(Error::Depth(_))));
    }

    #[test]
    fn layering_keeps_per_qubit_order() {
        let c = circuit(&[(Gate::T, &[0]), (Gate::H, &[1]), (Gate::Cnot, &[0, 1]), (Gate::T, &[1]), (Gate::T, &[0])], 2);
        assert_eq!(c.t_depth(), 2);
        let l = c.layered();
        assert_eq!(l[0].g, Gate::H);
        assert_eq!(l[1].g, Gate::T);
        assert_eq!(l[2].g, Gate::Cnot);
    }
}
