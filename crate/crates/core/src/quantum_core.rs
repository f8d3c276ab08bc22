//! Dense statevector simulation and the Pauli-frame teleportation chain.
//!
//! Qubit `k` is bit `k` of the amplitude index (little-endian). Global
//! phase is never tracked; compare states with [`fidelity`].
//!
//! Bell outcomes `(m1, m2)` label `|b_{m1 m2}> = (X^m1 Z^m2 (x) I)|Phi+>` on
//! `(q1, q2)`. Teleporting `psi` through an EPR pair with outcome `(m1, m2)`
//! leaves `X^m1 Z^m2 psi` on the far half.

use crate::{Error, Result};
use num_complex::Complex64 as C;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

pub const MAX_DENSE_QUBITS: usize = 22;

pub type Mat2 = [[C; 2]; 2];
pub type Amp2 = [C; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    #[serde(rename = "CNOT")]
    Cnot,
}

impl Gate {
    pub fn arity(self) -> usize {
        if self == Gate::Cnot {
            2
        } else {
            1
        }
    }

    pub fn matrix(self) -> Option<Mat2> {
        let o = C::new(0.0, 0.0);
        let l = C::new(1.0, 0.0);
        let h = C::new(FRAC_1_SQRT_2, 0.0);
        let w = C::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        Some(match self {
            Gate::X => [[o, l], [l, o]],
            Gate::Y => [[o, -C::i()], [C::i(), o]],
            Gate::Z => [[l, o], [o, -l]],
            Gate::H => [[h, h], [h, -h]],
            Gate::S => [[l, o], [o, C::i()]],
            Gate::Sdg => [[l, o], [o, -C::i()]],
            Gate::T => [[l, o], [o, w]],
            Gate::Tdg => [[l, o], [o, w.conj()]],
            Gate::Cnot => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub qubit_count: usize,
    pub amplitudes: Vec<C>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        if n > MAX_DENSE_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceed the dense limit of {MAX_DENSE_QUBITS}")));
        }
        let mut amplitudes = vec![C::new(0.0, 0.0); 1 << n];
        amplitudes[0] = C::new(1.0, 0.0);
        Ok(StateVector { qubit_count: n, amplitudes })
    }

    pub fn from_amplitudes(amplitudes: Vec<C>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::Input(format!("{len} amplitudes is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_DENSE_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceed the dense limit of {MAX_DENSE_QUBITS}")));
        }
        let mut sv = StateVector { qubit_count: n, amplitudes };
        let norm = sv.norm();
        if norm < 1e-300 {
            return Err(Error::Input("zero vector".into()));
        }
        sv.amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(sv)
    }

    pub fn from_qubit(amp: Amp2) -> Self {
        StateVector { qubit_count: 1, amplitudes: amp.to_vec() }
    }

    /// Tensor product; `self` occupies the low qubits.
    pub fn tensor(&self, high: &StateVector) -> Result<Self> {
        let n = self.qubit_count + high.qubit_count;
        if n > MAX_DENSE_QUBITS {
            return Err(Error::Size(format!("{n} qubits exceed the dense limit of {MAX_DENSE_QUBITS}")));
        }
        let mut amplitudes = Vec::with_capacity(1 << n);
        for h in &high.amplitudes {
            for l in &self.amplitudes {
                amplitudes.push(l * h);
            }
        }
        Ok(StateVector { qubit_count: n, amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check(&self, targets: &[usize]) -> Result<()> {
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.qubit_count {
                return Err(Error::Index(format!("qubit {t} out of range for {} qubits", self.qubit_count)));
            }
            if targets[..i].contains(&t) {
                return Err(Error::Index(format!("qubit {t} repeated")));
            }
        }
        Ok(())
    }

    pub fn apply_matrix(&mut self, m: &Mat2, target: usize) -> Result<()> {
        self.check(&[target])?;
        let bit = 1usize << target;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | bit]);
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: Gate, targets: &[usize]) -> Result<()> {
        if targets.len() != gate.arity() {
            return Err(Error::Index(format!("{gate:?} takes {} targets, got {}", gate.arity(), targets.len())));
        }
        match gate.matrix() {
            Some(m) => self.apply_matrix(&m, targets[0]),
            None => {
                self.check(targets)?;
                let (c, t) = (1usize << targets[0], 1usize << targets[1]);
                for i in 0..self.amplitudes.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amplitudes.swap(i, i | t);
                    }
                }
                Ok(())
            }
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

pub fn sv_apply(state: &StateVector, gate: Gate, targets: &[usize]) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(gate, targets)?;
    Ok(out)
}

/// Phase-invariant overlap `|<a|b>|^2`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
    a.inner(b).norm_sqr()
}

pub fn fidelity2(a: Amp2, b: Amp2) -> f64 {
    (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr()
}

/// Bell measurement of `(q1, q2)`. With `forced`, the given outcome is
/// projected onto instead of sampled. The collapsed state holds the
/// measured Bell pair on `(q1, q2)`.
pub fn sv_bell_measure<R: Rng + ?Sized>(
    state: &StateVector,
    q1: usize,
    q2: usize,
    rng: &mut R,
    forced: Option<(u8, u8)>,
) -> Result<(u8, u8, StateVector)> {
    if q1 == q2 {
        return Err(Error::Index("Bell measurement needs two distinct qubits".into()));
    }
    let mut s = sv_apply(state, Gate::Cnot, &[q1, q2])?;
    s.apply(Gate::H, &[q1])?;
    let (b1, b2) = (1usize << q1, 1usize << q2);
    let mut probs = [0.0f64; 4];
    for (i, a) in s.amplitudes.iter().enumerate() {
        let m1 = usize::from(i & b2 != 0);
        let m2 = usize::from(i & b1 != 0);
        probs[2 * m1 + m2] += a.norm_sqr();
    }
    let k = match forced {
        Some((m1, m2)) => {
            let k = 2 * usize::from(m1 & 1) + usize::from(m2 & 1);
            if probs[k] < 1e-14 {
                return Err(Error::Measurement(format!("forced outcome ({m1}, {m2}) has probability zero")));
            }
            k
        }
        None => {
            let r: f64 = rng.gen::<f64>() * probs.iter().sum::<f64>();
            let mut acc = 0.0;
            let mut k = 3;
            for (j, p) in probs.iter().enumerate() {
                acc += p;
                if r < acc {
                    k = j;
                    break;
                }
            }
            k
        }
    };
    let (m1, m2) = ((k >> 1) as u8, (k & 1) as u8);
    let norm = probs[k].sqrt();
    for (i, a) in s.amplitudes.iter_mut().enumerate() {
        let keep = usize::from(i & b2 != 0) == usize::from(m1) && usize::from(i & b1 != 0) == usize::from(m2);
        *a = if keep { *a / norm } else { C::new(0.0, 0.0) };
    }
    s.apply(Gate::H, &[q1])?;
    s.apply(Gate::Cnot, &[q1, q2])?;
    Ok((m1, m2, s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Enc,
    Dec,
}

/// ENC maps `psi` to `X^a Z^b psi`; DEC undoes it.
pub fn qotp(state: &StateVector, a: u8, b: u8, direction: Direction, target: usize) -> Result<StateVector> {
    let mut s = state.clone();
    let (first, second) = match direction {
        Direction::Enc => ((Gate::Z, b), (Gate::X, a)),
        Direction::Dec => ((Gate::X, a), (Gate::Z, b)),
    };
    for (g, bit) in [first, second] {
        if bit & 1 == 1 {
            s.apply(g, &[target])?;
        }
    }
    Ok(s)
}

pub fn apply2(m: &Mat2, v: Amp2) -> Amp2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn density_of(v: Amp2) -> Mat2 {
    [[v[0] * v[0].conj(), v[0] * v[1].conj()], [v[1] * v[0].conj(), v[1] * v[1].conj()]]
}

pub fn identity_half() -> Mat2 {
    let h = C::new(0.5, 0.0);
    let o = C::new(0.0, 0.0);
    [[h, o], [o, h]]
}

/// Single-qubit reduced density matrix of `qubit`.
pub fn reduced_density(state: &StateVector, qubit: usize) -> Result<Mat2> {
    state.check(&[qubit])?;
    let bit = 1usize << qubit;
    let mut rho = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..state.amplitudes.len() {
        if i & bit == 0 {
            let (a0, a1) = (state.amplitudes[i], state.amplitudes[i | bit]);
            rho[0][0] += a0 * a0.conj();
            rho[0][1] += a0 * a1.conj();
            rho[1][0] += a1 * a0.conj();
            rho[1][1] += a1 * a1.conj();
        }
    }
    Ok(rho)
}

/// `<v| rho |v>`.
pub fn fidelity_with_density(v: Amp2, rho: &Mat2) -> f64 {
    let w = apply2(rho, v);
    (v[0].conj() * w[0] + v[1].conj() * w[1]).re
}

/// Trace distance of two 2x2 Hermitian matrices.
pub fn trace_distance(a: &Mat2, b: &Mat2) -> f64 {
    let d = [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]];
    let half_tr = (d[0][0].re + d[1][1].re) / 2.0;
    let det = (d[0][0] * d[1][1] - d[0][1] * d[1][0]).re;
    let disc = (half_tr * half_tr - det).max(0.0).sqrt();
    ((half_tr + disc).abs() + (half_tr - disc).abs()) / 2.0
}

/// Exact average of the four QOTP paddings of `rho`.
pub fn qotp_average(rho: &Mat2) -> Mat2 {
    let mut acc = [[C::new(0.0, 0.0); 2]; 2];
    for a in 0..2u8 {
        for b in 0..2u8 {
            let p = pauli(a, b);
            let r = conjugate(&p, rho);
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += r[i][j] / 4.0;
                }
            }
        }
    }
    acc
}

/// `X^a Z^b`.
pub fn pauli(a: u8, b: u8) -> Mat2 {
    let mut m = [[C::new(1.0, 0.0), C::new(0.0, 0.0)], [C::new(0.0, 0.0), C::new(1.0, 0.0)]];
    if b & 1 == 1 {
        m = mul2(&Gate::Z.matrix().unwrap(), &m);
    }
    if a & 1 == 1 {
        m = mul2(&Gate::X.matrix().unwrap(), &m);
    }
    m
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `u rho u^dagger`.
pub fn conjugate(u: &Mat2, rho: &Mat2) -> Mat2 {
    let ud = [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]];
    mul2(&mul2(u, rho), &ud)
}

/// Gaussian-normalised random state.
pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<StateVector> {
    let amps = (0..1usize << n.min(MAX_DENSE_QUBITS + 1))
        .map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::from_amplitudes(amps)
}

pub fn random_qubit<R: Rng + ?Sized>(rng: &mut R) -> Amp2 {
    let sv = random_state(1, rng).expect("one qubit");
    [sv.amplitudes[0], sv.amplitudes[1]]
}

/// `|0>, |1>, |+>, |+i>`.
pub fn tomography_inputs() -> [Amp2; 4] {
    let o = C::new(0.0, 0.0);
    let l = C::new(1.0, 0.0);
    let h = C::new(FRAC_1_SQRT_2, 0.0);
    [[l, o], [o, l], [h, h], [h, C::new(0.0, FRAC_1_SQRT_2)]]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliFrame {
    pub x: u8,
    pub z: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decoration {
    None,
    Pdg,
}

/// Data qubit plus frame: the physical qubit is `X^x Z^z data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSim {
    pub data: Amp2,
    pub frame: PauliFrame,
    pub rng_seed: u64,
    pub transcript: Vec<(u8, u8)>,
    pub pdg_applied: usize,
}

impl ChainSim {
    pub fn new(data: Amp2, rng_seed: u64) -> Result<Self> {
        let norm = (data[0].norm_sqr() + data[1].norm_sqr()).sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("data qubit has norm {norm}")));
        }
        Ok(ChainSim { data, frame: PauliFrame::default(), rng_seed, transcript: Vec::new(), pdg_applied: 0 })
    }

    /// `X^x Z^z data`, the state the chain would hold physically.
    pub fn physical_state(&self) -> Amp2 {
        apply2(&pauli(self.frame.x, self.frame.z), self.data)
    }
}

/// Deterministic Bell outcome for measurement stream `stream` under `seed`.
pub fn outcome_for(seed: u64, stream: u64) -> (u8, u8) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let w = rng.next_u32();
    ((w & 1) as u8, ((w >> 1) & 1) as u8)
}

/// One teleportation step with a known outcome.
pub fn chain_step(chain: &ChainSim, outcome: (u8, u8), decoration: Decoration) -> ChainSim {
    let mut c = chain.clone();
    c.frame.x ^= outcome.0 & 1;
    c.frame.z ^= outcome.1 & 1;
    c.transcript.push((outcome.0 & 1, outcome.1 & 1));
    if decoration == Decoration::Pdg {
        c.data = apply2(&Gate::Sdg.matrix().unwrap(), c.data);
        c.frame.z ^= c.frame.x;
        c.pdg_applied += 1;
    }
    c
}

/// Teleportation step whose outcome is drawn from `stream` of the chain's seed.
pub fn chain_teleport(chain: &ChainSim, decoration: Decoration, stream: u64) -> ChainSim {
    chain_step(chain, outcome_for(chain.rng_seed, stream), decoration)
}

/// Data amplitudes and frame; `Z^z X^x` applied to the physical qubit gives the data.
pub fn chain_resolve(chain: &ChainSim) -> (Amp2, PauliFrame) {
    (chain.data, chain.frame)
}

/// Undoes a frame on a physical qubit.
pub fn correct(physical: Amp2, frame: PauliFrame) -> Amp2 {
    let v = if frame.x == 1 { apply2(&Gate::X.matrix().unwrap(), physical) } else { physical };
    if frame.z == 1 {
        apply2(&Gate::Z.matrix().unwrap(), v)
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn hadamard_on_zero() {
        let s = sv_apply(&StateVector::zero(1).unwrap(), Gate::H, &[0]).unwrap();
        assert!((s.amplitudes[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitudes[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn little_endian_cnot() {
        // |q0=1, q1=0> is index 1; CNOT(0 -> 1) gives index 3
        let mut s = StateVector::zero(2).unwrap();
        s.apply(Gate::X, &[0]).unwrap();
        s.apply(Gate::Cnot, &[0, 1]).unwrap();
        assert!((s.amplitudes[3].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_targets() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(s.apply(Gate::Cnot, &[1, 1]), Err(Error::Index(_))));
        assert!(matches!(s.apply(Gate::X, &[2]), Err(Error::Index(_))));
        assert!(matches!(StateVector::zero(23), Err(Error::Size(_))));
    }

    #[test]
    fn epr_measures_zero_zero() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(Gate::H, &[0]).unwrap();
        s.apply(Gate::Cnot, &[0, 1]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (m1, m2, _) = sv_bell_measure(&s, 0, 1, &mut rng, None).unwrap();
            assert_eq!((m1, m2), (0, 0));
        }
        assert!(matches!(sv_bell_measure(&s, 0, 1, &mut rng, Some((1, 0))), Err(Error::Measurement(_))));
    }

    #[test]
    fn pdg_on_plus_i_gives_plus() {
        let plus_i = tomography_inputs()[3];
        let chain = ChainSim::new(plus_i, 0).unwrap();
        let out = chain_step(&chain, (0, 0), Decoration::Pdg);
        assert!((fidelity2(out.data, tomography_inputs()[2]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fresh_chain_resolves_to_input() {
        let one = tomography_inputs()[1];
        let (d, f) = chain_resolve(&ChainSim::new(one, 5).unwrap());
        assert_eq!(d, one);
        assert_eq!(f, PauliFrame::default());
    }

    #[test]
    fn x_outcome_needs_x_correction() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let psi = random_qubit(&mut rng);
        let chain = chain_step(&ChainSim::new(psi, 0).unwrap(), (1, 0), Decoration::None);
        assert_eq!(chain.frame, PauliFrame { x: 1, z: 0 });
        let fixed = correct(chain.physical_state(), chain.frame);
        assert!((fidelity2(fixed, psi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_of_pure_orthogonal_states() {
        let t = tomography_inputs();
        assert!((trace_distance(&density_of(t[0]), &density_of(t[1])) - 1.0).abs() < 1e-15);
    }
}
