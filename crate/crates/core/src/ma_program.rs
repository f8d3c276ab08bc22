//! Modular arithmetic programs: a state in Z_m, one instruction per step
//! `(i, a, b)` adding `a` when `x_i = 0` and `b` when `x_i = 1`, and an accept
//! set on the final state.

use crate::lwe_he::{decode_phase, LweCiphertext};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    /// 1-based input index.
    pub var: usize,
    pub a: u64,
    pub b: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaProgram {
    pub modulus: u64,
    pub start: u64,
    pub instructions: Vec<Instruction>,
    pub accept: BTreeSet<u64>,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaTrace {
    pub states: Vec<u64>,
    pub output: u8,
}

impl MaProgram {
    pub fn validate(&self) -> Result<()> {
        let m = self.modulus;
        if m < 2 {
            return Err(Error::Construction(format!("modulus {m} < 2")));
        }
        if self.start >= m || self.accept.iter().any(|&s| s >= m) {
            return Err(Error::Construction("start state or accept set outside Z_m".into()));
        }
        for ins in &self.instructions {
            if ins.var == 0 || ins.var > self.arity || ins.a >= m || ins.b >= m {
                return Err(Error::Construction(format!("malformed instruction {ins:?}")));
            }
        }
        Ok(())
    }
}

pub fn ma_evaluate(prog: &MaProgram, x: &[u8]) -> Result<MaTrace> {
    if x.len() != prog.arity {
        return Err(Error::Input(format!(
            "input has length {}, program arity is {}",
            x.len(),
            prog.arity
        )));
    }
    let m = prog.modulus;
    let mut s = prog.start;
    let mut states = Vec::with_capacity(prog.instructions.len() + 1);
    states.push(s);
    for ins in &prog.instructions {
        let add = if x[ins.var - 1] == 1 { ins.b } else { ins.a };
        s = (s + add) % m;
        states.push(s);
    }
    Ok(MaTrace { output: u8::from(prog.accept.contains(&s)), states })
}

/// States `s` with `round(2s/q) mod 2 = 1`.
pub fn rounding_accept_set(q: u64) -> BTreeSet<u64> {
    (0..q).filter(|&s| decode_phase(s, q) == 1).collect()
}

/// Decryption as an MA-program: start at the body, subtract `mask_l * sk_l`.
pub fn compile_lwe_dec(ct: &LweCiphertext) -> MaProgram {
    let q = ct.params.q;
    MaProgram {
        modulus: q,
        start: ct.body % q,
        instructions: ct
            .mask
            .iter()
            .enumerate()
            .map(|(l, &c)| Instruction { var: l + 1, a: 0, b: (q - c % q) % q })
            .collect(),
        accept: rounding_accept_set(q),
        arity: ct.mask.len(),
    }
}

/// Positive inner-product form: start 0, instruction `(l, 0, c_l)`.
pub fn inner_product_program(c: &[u64], q: u64, accept: BTreeSet<u64>) -> MaProgram {
    MaProgram {
        modulus: q,
        start: 0,
        instructions: c
            .iter()
            .enumerate()
            .map(|(l, &v)| Instruction { var: l + 1, a: 0, b: v % q })
            .collect(),
        accept,
        arity: c.len(),
    }
}

/// Hamming-weight counter modulo n+1.
pub fn compile_counter(n: usize, accept_weights: &BTreeSet<u64>) -> Result<MaProgram> {
    if n == 0 {
        return Err(Error::Input("counter needs n >= 1".into()));
    }
    if accept_weights.iter().any(|&w| w > n as u64) {
        return Err(Error::Input(format!("accept weights must lie in [0, {n}]")));
    }
    Ok(MaProgram {
        modulus: n as u64 + 1,
        start: 0,
        instructions: (1..=n).map(|i| Instruction { var: i, a: 0, b: 1 }).collect(),
        accept: accept_weights.clone(),
        arity: n,
    })
}

/// Weights `{ceil(n/2), ..., n}`.
pub fn majority_weights(n: usize) -> BTreeSet<u64> {
    (n.div_ceil(2) as u64..=n as u64).collect()
}

/// Weights `{k, ..., n}`.
pub fn threshold_weights(n: usize, k: usize) -> BTreeSet<u64> {
    (k as u64..=n as u64).collect()
}

/// Width-2 parity: modulus 2, accept {1}.
pub fn compile_parity(n: usize) -> Result<MaProgram> {
    if n == 0 {
        return Err(Error::Input("parity needs n >= 1".into()));
    }
    Ok(MaProgram {
        modulus: 2,
        start: 0,
        instructions: (1..=n).map(|i| Instruction { var: i, a: 0, b: 1 }).collect(),
        accept: BTreeSet::from([1]),
        arity: n,
    })
}

/// Accepts iff `<sk, x> = 0 mod q`.
pub fn compile_abe_predicate(attributes: &[u64], q: u64) -> Result<MaProgram> {
    if attributes.is_empty() || attributes.iter().any(|&x| x >= q) {
        return Err(Error::Input("attributes must be nonempty and lie in [0, q)".into()));
    }
    Ok(inner_product_program(attributes, q, BTreeSet::from([0])))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    Symmetric,
    Witness(SymmetryWitness),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryWitness {
    pub x: Vec<u8>,
    pub permuted: Vec<u8>,
    /// 1-based positions swapped.
    pub transposition: (usize, usize),
    pub output_x: u8,
    pub output_permuted: u8,
    pub state_x: u64,
    pub state_permuted: u64,
}

pub const MAX_SYMMETRY_ARITY: usize = 16;

fn bits_msb_first(v: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((v >> (n - 1 - i)) & 1) as u8).collect()
}

/// Compares `x` with `x` under the transposition `(i, j)` (1-based).
pub fn transposition_witness(prog: &MaProgram, x: &[u8], i: usize, j: usize) -> Result<SymmetryWitness> {
    if i == 0 || j == 0 || i > x.len() || j > x.len() {
        return Err(Error::Input("transposition positions out of range".into()));
    }
    let mut permuted = x.to_vec();
    permuted.swap(i - 1, j - 1);
    let a = ma_evaluate(prog, x)?;
    let b = ma_evaluate(prog, &permuted)?;
    Ok(SymmetryWitness {
        x: x.to_vec(),
        permuted,
        transposition: (i, j),
        output_x: a.output,
        output_permuted: b.output,
        state_x: *a.states.last().unwrap(),
        state_permuted: *b.states.last().unwrap(),
    })
}

/// Exhaustive symmetry check. Returns the lexicographically smallest
/// `(x, (i, j))` whose output changes under the transposition.
pub fn symmetry_witness(prog: &MaProgram) -> Result<Symmetry> {
    let n = prog.arity;
    if n > MAX_SYMMETRY_ARITY {
        return Err(Error::Size(format!("arity {n} exceeds {MAX_SYMMETRY_ARITY}")));
    }
    let outputs: Vec<u8> = (0..1u32 << n)
        .map(|v| ma_evaluate(prog, &bits_msb_first(v, n)).map(|t| t.output))
        .collect::<Result<_>>()?;
    let mut by_weight: Vec<Option<u8>> = vec![None; n + 1];
    let mut symmetric = true;
    for (v, &o) in outputs.iter().enumerate() {
        let w = (v as u32).count_ones() as usize;
        match by_weight[w] {
            None => by_weight[w] = Some(o),
            Some(prev) if prev != o => symmetric = false,
            _ => {}
        }
    }
    if symmetric {
        return Ok(Symmetry::Symmetric);
    }
    for v in 0..1u32 << n {
        let x = bits_msb_first(v, n);
        for i in 1..=n {
            for j in i + 1..=n {
                if x[i - 1] == x[j - 1] {
                    continue;
                }
                let w = transposition_witness(prog, &x, i, j)?;
                if w.output_x != w.output_permuted {
                    return Ok(Symmetry::Witness(w));
                }
            }
        }
    }
    unreachable!("transpositions generate the symmetric group")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_program() -> MaProgram {
        inner_product_program(&[3, 5, 7, 11], 17, rounding_accept_set(17))
    }

    #[test]
    fn inner_product_trace() {
        let t = ma_evaluate(&worked_program(), &[1, 0, 1, 1]).unwrap();
        assert_eq!(t.states, vec![0, 3, 3, 10, 4]);
        assert_eq!(t.output, 0);
    }

    #[test]
    fn accept_set_q17() {
        assert_eq!(rounding_accept_set(17), (5..=12).collect());
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(ma_evaluate(&worked_program(), &[1, 0]), Err(Error::Input(_))));
    }

    #[test]
    fn majority_example() {
        let p = compile_counter(4, &majority_weights(4)).unwrap();
        assert_eq!(majority_weights(4), BTreeSet::from([2, 3, 4]));
        assert_eq!(ma_evaluate(&p, &[1, 0, 1, 1]).unwrap().output, 1);
    }

    #[test]
    fn parity_width_two() {
        let p = compile_parity(2).unwrap();
        let t = ma_evaluate(&p, &[1, 1]).unwrap();
        assert_eq!(*t.states.last().unwrap(), 0);
        assert_eq!(t.output, 0);
    }

    #[test]
    fn counter_rejects_out_of_range_weights() {
        assert!(compile_counter(3, &BTreeSet::from([4])).is_err());
    }

    #[test]
    fn abe_example() {
        let p = compile_abe_predicate(&[3, 5, 7, 11], 17).unwrap();
        assert_eq!(ma_evaluate(&p, &[1, 0, 1, 1]).unwrap().output, 0);
        assert_eq!(ma_evaluate(&p, &[0, 0, 0, 0]).unwrap().output, 1);
    }

    #[test]
    fn transposition_witness_pairs() {
        let p = worked_program();
        let w = transposition_witness(&p, &[1, 0, 1, 1], 2, 3).unwrap();
        assert_eq!((w.state_x, w.state_permuted), (4, 2));
        assert_eq!(w.permuted, vec![1, 1, 0, 1]);
        let w = transposition_witness(&p, &[1, 0, 1, 1], 1, 2).unwrap();
        assert_eq!(w.permuted, vec![0, 1, 1, 1]);
        assert_eq!((w.state_x, w.state_permuted), (4, 6));
        assert_eq!((w.output_x, w.output_permuted), (0, 1));
    }

    #[test]
    fn counter_is_symmetric() {
        let p = compile_counter(5, &BTreeSet::from([1, 4])).unwrap();
        assert_eq!(symmetry_witness(&p).unwrap(), Symmetry::Symmetric);
    }
}
