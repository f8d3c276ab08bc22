//! Garden-hose pipe networks for add-constant branching programs.
//!
//! Layout for `s` states and `L` layers (`m = 2sL + s + 1` pipes):
//!
//! * pipe 0 is the entry pipe; water enters at its Alice end;
//! * layer `l` owns an interface rank `I_l` and a bundle rank `B_l`, `s` pipes each;
//! * an exit rank `E` of `s` pipes closes the network.
//!
//! Bob's wiring only depends on his symbols (start state and layer shifts
//! `c_l`): `entry -> I_1[start]` and `B_l[j] -> R_{l+1}[(j + c_l) mod s]`,
//! where `R_{l+1}` is `I_{l+1}`, or `E` after the last layer. Alice's wiring
//! only depends on her bits: every reachable interface `I_l` (`l = 1` or
//! `x_{l-1} = 1`) is joined pipe-for-pipe to the bundle of the next layer
//! `l' >= l` with `x_{l'} = 1`, or to `E` when no such layer exists. Layers
//! with `x_l = 0` are skipped, so their shift is never applied.
//!
//! Exit pipe `E[k]` carries state `k`; pipes with `k` in the accept set hold
//! the P† decoration. Every water path crosses exactly one exit pipe.

use crate::branching_program::{shift_of, LayeredBp, Reader};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Entry,
    Interface,
    Bundle,
    Exit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Alice,
    Bob,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Alice => Side::Bob,
            Side::Bob => Side::Alice,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct End {
    pub pipe: usize,
    pub side: Side,
}

impl End {
    pub fn alice(pipe: usize) -> End {
        End { pipe, side: Side::Alice }
    }

    pub fn bob(pipe: usize) -> End {
        End { pipe, side: Side::Bob }
    }

    /// `2 * pipe + side`, also used as the RNG stream id of measurements.
    pub fn id(self) -> u64 {
        2 * self.pipe as u64 + u64::from(self.side == Side::Bob)
    }

    pub fn far(self) -> End {
        End { pipe: self.pipe, side: self.side.other() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipe {
    pub id: usize,
    /// 0 for the entry pipe, `1..=L` for layer ranks, `L + 1` for exits.
    pub layer: usize,
    pub role: Role,
    pub state_index: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipeNetwork {
    pub states: u64,
    pub layers: usize,
    /// Alice's input index read by each layer (1-based).
    pub layer_vars: Vec<usize>,
    pub accept: BTreeSet<u64>,
    pub pipes: Vec<Pipe>,
    pub entry_end: End,
    pub decorated: BTreeSet<usize>,
    /// Ends where water can leave the network.
    pub outputs: Vec<End>,
    pub pipe_count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(End, End)>,
}

impl Matching {
    pub fn partners(&self) -> HashMap<End, End> {
        let mut map = HashMap::with_capacity(2 * self.pairs.len());
        for &(a, b) in &self.pairs {
            map.insert(a, b);
            map.insert(b, a);
        }
        map
    }

    /// Checks that every end lies on `side`, exists, and is used at most once.
    pub fn validate(&self, net: &PipeNetwork, side: Side) -> Result<()> {
        let mut used = HashSet::new();
        for &(a, b) in &self.pairs {
            for e in [a, b] {
                if e.side != side || e.pipe >= net.pipe_count {
                    return Err(Error::Flow(format!("end {e:?} does not belong to {side:?}'s side")));
                }
                if !used.insert(e) {
                    return Err(Error::Flow(format!("end {e:?} matched twice")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BobSymbols {
    pub start: u64,
    pub shifts: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaterTrace {
    pub visited_ends: Vec<End>,
    /// Pipes in traversal order.
    pub pipes: Vec<usize>,
    pub exit_end: End,
    pub exit_state: u64,
    pub traversed_decorations: usize,
    pub output: u8,
}

impl PipeNetwork {
    pub fn interface(&self, layer: usize, j: u64) -> usize {
        1 + (layer - 1) * 2 * self.states as usize + j as usize
    }

    pub fn bundle(&self, layer: usize, j: u64) -> usize {
        self.interface(layer, j) + self.states as usize
    }

    pub fn exit(&self, k: u64) -> usize {
        1 + 2 * self.states as usize * self.layers + k as usize
    }

    /// Rank Bob feeds after layer `layer` (0 means the entry connection).
    fn next_rank(&self, layer: usize, j: u64) -> usize {
        if layer < self.layers {
            self.interface(layer + 1, j)
        } else {
            self.exit(j)
        }
    }

    /// Position of a pipe in the layer order: entry 0, `I_l` 2l-1, `B_l` 2l, exits 2L+1.
    pub fn rank(&self, pipe: usize) -> usize {
        let p = &self.pipes[pipe];
        match p.role {
            Role::Entry => 0,
            Role::Interface => 2 * p.layer - 1,
            Role::Bundle => 2 * p.layer,
            Role::Exit => 2 * self.layers + 1,
        }
    }

    /// One entry pipe and nothing else; water goes straight through.
    pub fn single_pipe() -> PipeNetwork {
        PipeNetwork {
            states: 1,
            layers: 0,
            layer_vars: Vec::new(),
            accept: BTreeSet::new(),
            pipes: vec![Pipe { id: 0, layer: 0, role: Role::Entry, state_index: 0 }],
            entry_end: End::alice(0),
            decorated: BTreeSet::new(),
            outputs: vec![End::bob(0)],
            pipe_count: 1,
        }
    }

    pub fn exit_pipes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.states).map(|k| self.exit(k))
    }
}

pub fn predicted_pipe_count(states: u64, layers: usize) -> usize {
    2 * states as usize * layers + states as usize + 1
}

/// Builds the network shape from a state-level, ALICE-read, add-constant program.
/// Only the shape, accept set and read variables are used.
pub fn gh_build(bp: &LayeredBp) -> Result<PipeNetwork> {
    let s = bp.start_states;
    if s == 0 {
        return Err(Error::Construction("program has no states".into()));
    }
    for (l, layer) in bp.layers.iter().enumerate() {
        if layer.states != s {
            return Err(Error::Construction(format!("layer {} is not state-level", l + 1)));
        }
        if shift_of(&layer.map0, s).is_none() || shift_of(&layer.map1, s).is_none() {
            return Err(Error::Construction(format!(
                "layer {} maps are not add-constant permutations",
                l + 1
            )));
        }
        if layer.reader == Reader::Bob {
            return Err(Error::Construction(format!(
                "layer {} is read by Bob; branch variables must be Alice's",
                l + 1
            )));
        }
    }
    let layers = bp.layers.len();
    let mut pipes = vec![Pipe { id: 0, layer: 0, role: Role::Entry, state_index: 0 }];
    for l in 1..=layers {
        for role in [Role::Interface, Role::Bundle] {
            for j in 0..s {
                pipes.push(Pipe { id: pipes.len(), layer: l, role, state_index: j });
            }
        }
    }
    for k in 0..s {
        pipes.push(Pipe { id: pipes.len(), layer: layers + 1, role: Role::Exit, state_index: k });
    }
    let mut net = PipeNetwork {
        states: s,
        layers,
        layer_vars: bp.layers.iter().map(|l| l.var).collect(),
        accept: bp.accept.iter().copied().filter(|&k| k < s).collect(),
        pipe_count: pipes.len(),
        pipes,
        entry_end: End::alice(0),
        decorated: BTreeSet::new(),
        outputs: Vec::new(),
    };
    net.decorated = net.accept.iter().map(|&k| net.exit(k)).collect();
    net.outputs = (0..s).map(|k| End::alice(net.exit(k))).collect();
    if layers > 0 {
        let last: Vec<End> = (0..s).map(|j| End::alice(net.bundle(layers, j))).collect();
        net.outputs.extend(last);
    }
    debug_assert_eq!(net.pipe_count, predicted_pipe_count(s, layers));
    Ok(net)
}

/// Bob's symbols for an add-constant program, normalised so that Alice only
/// selects whether the shift `c_l = b_l - a_l` applies.
pub fn bob_symbols(bp: &LayeredBp) -> Result<BobSymbols> {
    let s = bp.start_states;
    let mut start = bp.start % s;
    let mut shifts = Vec::with_capacity(bp.layers.len());
    for layer in &bp.layers {
        let (a, b) = match (shift_of(&layer.map0, s), shift_of(&layer.map1, s)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Construction("maps are not add-constant".into())),
        };
        start = (start + a) % s;
        shifts.push((b + s - a) % s);
    }
    Ok(BobSymbols { start, shifts })
}

pub fn gh_wire_alice(net: &PipeNetwork, alice_bits: &[u8]) -> Result<Matching> {
    let needed = net.layer_vars.iter().copied().max().unwrap_or(0);
    if alice_bits.len() < needed {
        return Err(Error::Input(format!("Alice needs {needed} bits, got {}", alice_bits.len())));
    }
    let x: Vec<u8> = net.layer_vars.iter().map(|&v| alice_bits[v - 1]).collect();
    let mut pairs = Vec::new();
    for l in 1..=net.layers {
        let reachable = l == 1 || x[l - 2] == 1;
        if !reachable {
            continue;
        }
        let target = (l..=net.layers).find(|&t| x[t - 1] == 1);
        for j in 0..net.states {
            let to = match target {
                Some(t) => net.bundle(t, j),
                None => net.exit(j),
            };
            pairs.push((End::alice(net.interface(l, j)), End::alice(to)));
        }
    }
    Ok(Matching { pairs })
}

pub fn gh_wire_bob(net: &PipeNetwork, symbols: &BobSymbols) -> Result<Matching> {
    let s = net.states;
    if symbols.shifts.len() != net.layers {
        return Err(Error::Input(format!(
            "{} shifts for {} layers",
            symbols.shifts.len(),
            net.layers
        )));
    }
    if symbols.start >= s || symbols.shifts.iter().any(|&c| c >= s) {
        return Err(Error::Input(format!("Bob's symbols must lie in [0, {s})")));
    }
    let mut pairs = vec![(End::bob(0), End::bob(net.next_rank(0, symbols.start)))];
    for (l, &c) in (1..=net.layers).zip(&symbols.shifts) {
        for j in 0..s {
            pairs.push((End::bob(net.bundle(l, j)), End::bob(net.next_rank(l, (j + c) % s))));
        }
    }
    Ok(Matching { pairs })
}

pub fn gh_flow(net: &PipeNetwork, alice: &Matching, bob: &Matching) -> Result<WaterTrace> {
    alice.validate(net, Side::Alice)?;
    bob.validate(net, Side::Bob)?;
    let (pa, pb) = (alice.partners(), bob.partners());
    let mut seen = HashSet::new();
    let mut cur = net.entry_end;
    seen.insert(cur);
    let mut visited = vec![cur];
    let mut pipes = Vec::new();
    let mut decorations = 0;
    let mut exit_state = None;
    loop {
        let far = cur.far();
        if !seen.insert(far) {
            return Err(Error::Flow(format!("cycle through pipe {}", cur.pipe)));
        }
        visited.push(far);
        pipes.push(far.pipe);
        if net.decorated.contains(&far.pipe) {
            decorations += 1;
        }
        let pipe = &net.pipes[far.pipe];
        if pipe.role == Role::Exit {
            exit_state = Some(pipe.state_index);
        }
        let next = match far.side {
            Side::Alice => pa.get(&far),
            Side::Bob => pb.get(&far),
        };
        match next {
            None => break,
            Some(&n) => {
                if !seen.insert(n) {
                    return Err(Error::Flow(format!("cycle at end {n:?}")));
                }
                visited.push(n);
                cur = n;
            }
        }
    }
    let exit_state = exit_state
        .ok_or_else(|| Error::Flow("water left the network without crossing the exit rank".into()))?;
    Ok(WaterTrace {
        exit_end: *visited.last().unwrap(),
        visited_ends: visited,
        pipes,
        exit_state,
        traversed_decorations: decorations,
        output: u8::from(net.accept.contains(&exit_state)),
    })
}

/// BP state represented by water inside `pipe`: interfaces hold the state
/// before their layer, bundles the state after it, exits the final state.
pub fn pipe_state(net: &PipeNetwork, symbols: &BobSymbols, pipe: usize) -> u64 {
    let p = &net.pipes[pipe];
    match p.role {
        Role::Entry => symbols.start,
        Role::Interface | Role::Exit => p.state_index,
        Role::Bundle => (p.state_index + symbols.shifts[p.layer - 1]) % net.states,
    }
}

pub fn network_to_dot(net: &PipeNetwork, alice: Option<&Matching>, bob: Option<&Matching>) -> String {
    let mut out = String::from("graph garden_hose {\n  rankdir=LR;\n  node [shape=point];\n");
    for p in &net.pipes {
        let label = match p.role {
            Role::Entry => "entry".to_string(),
            Role::Interface => format!("I{}[{}]", p.layer, p.state_index),
            Role::Bundle => format!("B{}[{}]", p.layer, p.state_index),
            Role::Exit => format!("E[{}]", p.state_index),
        };
        let deco = if net.decorated.contains(&p.id) { ", color=red, penwidth=2, xlabel=\"Pdg\"" } else { "" };
        let _ = writeln!(out, "  a{0} -- b{0} [label=\"{label}\"{deco}];", p.id);
    }
    for (m, color) in [(alice, "blue"), (bob, "darkgreen")] {
        if let Some(m) = m {
            for (x, y) in &m.pairs {
                let name = |e: &End| format!("{}{}", if e.side == Side::Alice { 'a' } else { 'b' }, e.pipe);
                let _ = writeln!(out, "  {} -- {} [color={color}, style=dashed];", name(x), name(y));
            }
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching_program::bp_from_ma_alice;
    use crate::lwe_he::{encrypt_with_mask, LweParams, SecretKey};
    use crate::ma_program::compile_lwe_dec;

    fn t1() -> (PipeNetwork, BobSymbols) {
        let sk = SecretKey { bits: vec![1, 0, 1, 1], level: 0 };
        let ct = encrypt_with_mask(&sk, &LweParams::t1(), &[3, 5, 7, 11], 1, 1).unwrap();
        let bp = bp_from_ma_alice(&compile_lwe_dec(&ct)).unwrap();
        (gh_build(&bp).unwrap(), bob_symbols(&bp).unwrap())
    }

    #[test]
    fn t1_pipe_count() {
        let (net, _) = t1();
        assert_eq!(net.pipe_count, 154);
        assert_eq!(net.decorated.len(), 8);
    }

    #[test]
    fn t1_bob_symbols() {
        let (_, sym) = t1();
        assert_eq!(sym.start, 13);
        assert_eq!(sym.shifts, vec![14, 12, 10, 6]);
    }

    #[test]
    fn t1_water_exits_at_nine() {
        let (net, sym) = t1();
        let a = gh_wire_alice(&net, &[1, 0, 1, 1]).unwrap();
        let b = gh_wire_bob(&net, &sym).unwrap();
        let tr = gh_flow(&net, &a, &b).unwrap();
        assert_eq!(tr.exit_state, 9);
        assert_eq!(tr.output, 1);
        assert_eq!(tr.traversed_decorations, 1);
    }

    #[test]
    fn zero_shift_wires_identically() {
        let (net, _) = t1();
        let b = gh_wire_bob(&net, &BobSymbols { start: 0, shifts: vec![0; 4] }).unwrap();
        for (x, y) in b.pairs.iter().skip(1) {
            assert_eq!(net.pipes[x.pipe].state_index, net.pipes[y.pipe].state_index);
        }
    }

    #[test]
    fn bob_symbols_out_of_range() {
        let (net, _) = t1();
        assert!(gh_wire_bob(&net, &BobSymbols { start: 17, shifts: vec![0; 4] }).is_err());
    }

    #[test]
    fn cycle_is_reported() {
        let (net, sym) = t1();
        let b = gh_wire_bob(&net, &sym).unwrap();
        // route I_1[13] back onto the entry's alice end
        let a = Matching { pairs: vec![(End::alice(net.interface(1, 13)), End::alice(0))] };
        assert!(matches!(gh_flow(&net, &a, &b), Err(Error::Flow(_))));
    }
}
