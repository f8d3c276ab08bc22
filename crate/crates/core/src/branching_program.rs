//! Layered branching programs, the state-level lowering of MA-programs and
//! the bit-level re-encoding.

use crate::ma_program::MaProgram;
use crate::{ceil_log2, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Reader {
    Alice,
    Bob,
    Shared,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpLayer {
    /// 1-based input index.
    pub var: usize,
    pub states: u64,
    pub map0: Vec<u64>,
    pub map1: Vec<u64>,
    pub reader: Reader,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredBp {
    pub layers: Vec<BpLayer>,
    pub start: u64,
    pub accept: BTreeSet<u64>,
    /// States of the layer before the first instruction.
    pub start_states: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpMetrics {
    pub width_states: u64,
    pub width_bits: u32,
    pub length: usize,
}

fn add_map(states: u64, modulus: u64, c: u64) -> Vec<u64> {
    (0..states)
        .map(|s| if s < modulus { (s + c) % modulus } else { s })
        .collect()
}

pub fn bp_from_ma(prog: &MaProgram, reader_tags: &[Reader]) -> Result<LayeredBp> {
    prog.validate()?;
    if reader_tags.len() != prog.instructions.len() {
        return Err(Error::Input(format!(
            "{} reader tags for {} instructions",
            reader_tags.len(),
            prog.instructions.len()
        )));
    }
    let m = prog.modulus;
    let layers = prog
        .instructions
        .iter()
        .zip(reader_tags)
        .map(|(ins, &reader)| BpLayer {
            var: ins.var,
            states: m,
            map0: add_map(m, m, ins.a),
            map1: add_map(m, m, ins.b),
            reader,
        })
        .collect();
    Ok(LayeredBp { layers, start: prog.start, accept: prog.accept.clone(), start_states: m })
}

/// All layers tagged ALICE, as for decryption programs.
pub fn bp_from_ma_alice(prog: &MaProgram) -> Result<LayeredBp> {
    bp_from_ma(prog, &vec![Reader::Alice; prog.instructions.len()])
}

/// Constant `c` when `map` is `s -> s + c mod m` on `[0, m)`.
pub fn shift_of(map: &[u64], m: u64) -> Option<u64> {
    let c = *map.first()? % m;
    map.iter()
        .take(m as usize)
        .enumerate()
        .all(|(s, &t)| t == (s as u64 + c) % m)
        .then_some(c)
}

/// Re-encodes states as `w = ceil(log2 m)` bits. Layer `l` becomes `w`
/// sub-layers; sub-layer `k` adds bit `k` of the layer constant times `2^k`
/// (carry propagating upward, wrapping mod m). Codes `>= m` are fixed points.
pub fn bp_to_bit_level(bp: &LayeredBp) -> Result<LayeredBp> {
    let m = bp.start_states;
    if bp.layers.iter().any(|l| l.states != m) {
        return Err(Error::Construction("bit-level conversion needs a state-level program".into()));
    }
    let w = ceil_log2(m);
    let codes = 1u64 << w;
    let mut layers = Vec::with_capacity(bp.layers.len() * w as usize);
    for layer in &bp.layers {
        let (c0, c1) = match (shift_of(&layer.map0, m), shift_of(&layer.map1, m)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Construction(
                    "bit-level conversion needs add-constant layers".into(),
                ))
            }
        };
        for k in 0..w {
            let d0 = ((c0 >> k) & 1) << k;
            let d1 = ((c1 >> k) & 1) << k;
            layers.push(BpLayer {
                var: layer.var,
                states: codes,
                map0: add_map(codes, m, d0 % m),
                map1: add_map(codes, m, d1 % m),
                reader: layer.reader,
            });
        }
    }
    Ok(LayeredBp { layers, start: bp.start, accept: bp.accept.clone(), start_states: codes })
}

pub fn bp_evaluate(bp: &LayeredBp, x: &[u8]) -> Result<(u8, Vec<u64>)> {
    let needed = bp.layers.iter().map(|l| l.var).max().unwrap_or(0);
    if x.len() < needed {
        return Err(Error::Input(format!("input has {} bits, program reads x_{needed}", x.len())));
    }
    let mut s = bp.start;
    let mut path = vec![s];
    for layer in &bp.layers {
        let map = if x[layer.var - 1] == 1 { &layer.map1 } else { &layer.map0 };
        s = *map
            .get(s as usize)
            .ok_or_else(|| Error::Input(format!("state {s} outside layer of {} states", layer.states)))?;
        path.push(s);
    }
    Ok((u8::from(bp.accept.contains(&s)), path))
}

pub fn bp_metrics(bp: &LayeredBp) -> BpMetrics {
    let width_states = bp
        .layers
        .iter()
        .map(|l| l.states)
        .chain(std::iter::once(bp.start_states))
        .max()
        .unwrap_or(1);
    BpMetrics { width_states, width_bits: ceil_log2(width_states), length: bp.layers.len() }
}

pub fn is_permutation(map: &[u64]) -> bool {
    let mut seen = vec![false; map.len()];
    for &t in map {
        match seen.get_mut(t as usize) {
            Some(slot) if !*slot => *slot = true,
            _ => return false,
        }
    }
    true
}

/// Layered state graph; `map0` edges dashed, `map1` edges solid.
pub fn bp_to_dot(bp: &LayeredBp) -> String {
    let mut out = String::from("digraph bp {\n  rankdir=LR;\n  node [shape=circle];\n");
    let mut reachable: BTreeSet<u64> = BTreeSet::from([bp.start]);
    for (l, layer) in bp.layers.iter().enumerate() {
        let mut next = BTreeSet::new();
        for &s in &reachable {
            let (t0, t1) = (layer.map0[s as usize], layer.map1[s as usize]);
            let _ = writeln!(out, "  \"L{l}_S{s}\" -> \"L{}_S{t0}\" [style=dashed, label=\"x{}=0\"];", l + 1, layer.var);
            let _ = writeln!(out, "  \"L{l}_S{s}\" -> \"L{}_S{t1}\" [label=\"x{}=1\"];", l + 1, layer.var);
            next.insert(t0);
            next.insert(t1);
        }
        reachable = next;
    }
    let last = bp.layers.len();
    for s in reachable.iter().filter(|s| bp.accept.contains(s)) {
        let _ = writeln!(out, "  \"L{last}_S{s}\" [shape=doublecircle];");
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ma_program::{inner_product_program, rounding_accept_set};

    fn t1_bp() -> LayeredBp {
        bp_from_ma_alice(&inner_product_program(&[3, 5, 7, 11], 17, rounding_accept_set(17))).unwrap()
    }

    #[test]
    fn state_level_path() {
        let (out, path) = bp_evaluate(&t1_bp(), &[1, 0, 1, 1]).unwrap();
        assert_eq!(path, vec![0, 3, 3, 10, 4]);
        assert_eq!(out, 0);
        let (out, path) = bp_evaluate(&t1_bp(), &[0, 1, 1, 1]).unwrap();
        assert_eq!(*path.last().unwrap(), 6);
        assert_eq!(out, 1);
    }

    #[test]
    fn metrics_t1() {
        let bp = t1_bp();
        assert_eq!(bp_metrics(&bp), BpMetrics { width_states: 17, width_bits: 5, length: 4 });
        let bit = bp_to_bit_level(&bp).unwrap();
        let m = bp_metrics(&bit);
        assert_eq!((m.width_bits, m.length), (5, 20));
    }

    #[test]
    fn parity_bit_level_unchanged_length() {
        let p = crate::ma_program::compile_parity(3).unwrap();
        let bp = bp_from_ma_alice(&p).unwrap();
        assert_eq!(bp_to_bit_level(&bp).unwrap().layers.len(), 3);
    }

    #[test]
    fn dot_is_a_digraph() {
        let dot = bp_to_dot(&t1_bp());
        assert!(dot.starts_with("digraph bp {"));
        assert!(dot.trim_end().ends_with('}'));
    }
}
