//! Flow function and measurement schedule of a wired gadget.
//!
//! Vertices are pipe ends (vertex id = [`End::id`]), edges are pipes. With
//! both matchings in place every connected component of pipes plus
//! connections is a simple path. The entry component is oriented from the
//! entry end; every other component from its terminal of lower rank
//! (ties by end id). The flow maps each vertex to its successor.
//!
//! Measurements are the input Bell measurement and one per connection.
//! Stages: input 0, Bob's entry connection 1, Alice's connections at
//! `I_l` 2l, Bob's connections leaving `B_l` 2l+1. A network with `L`
//! layers therefore runs in `2L + 2` rounds of at most `2s` measurements.

use crate::garden_hose::{End, Matching, PipeNetwork, Role, Side};
use crate::quantum_core::{chain_step, ChainSim, Amp2};
use crate::tgate_gadget::{gadget_assemble, gadget_prepare, step_outcome, GadgetKey, GadgetOutput, GadgetRun};
use crate::lwe_he::LweCiphertext;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub end: End,
    pub role: Role,
    pub layer: usize,
    pub index: u64,
    /// Stage rank of the owning pipe.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementGraph {
    pub vertices: Vec<Vertex>,
    /// One edge per pipe, as vertex ids.
    pub edges: Vec<(u64, u64)>,
    pub inputs: Vec<u64>,
    pub outputs: Vec<u64>,
    pub layers: usize,
    pub states: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowFunction {
    pub map: BTreeMap<u64, u64>,
    /// Oriented components; the first one starts at the entry.
    pub paths: Vec<Vec<u64>>,
    /// Connections per vertex pair, for classifying measurements.
    pub sides: BTreeMap<u64, Side>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Basis {
    Bell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasurementSide {
    Input,
    Alice,
    Bob,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub id: usize,
    pub side: MeasurementSide,
    pub pipes: (usize, usize),
    pub ends: (u64, u64),
    pub basis: Basis,
    pub stage: usize,
    /// RNG stream, the smaller end id.
    pub stream: u64,
    pub deps: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub rounds: Vec<Vec<usize>>,
    pub measurements: Vec<Measurement>,
}

impl Schedule {
    pub fn depth(&self) -> usize {
        self.rounds.len()
    }

    pub fn max_width(&self) -> usize {
        self.rounds.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.measurements.iter().flat_map(|m| m.deps.iter().map(move |&d| (d, m.id))).collect()
    }
}

pub fn build_measurement_graph(net: &PipeNetwork) -> MeasurementGraph {
    let mut vertices = Vec::with_capacity(2 * net.pipe_count);
    for p in &net.pipes {
        for end in [End::alice(p.id), End::bob(p.id)] {
            vertices.push(Vertex { end, role: p.role, layer: p.layer, index: p.state_index, rank: net.rank(p.id) });
        }
    }
    MeasurementGraph {
        vertices,
        edges: net.pipes.iter().map(|p| (End::alice(p.id).id(), End::bob(p.id).id())).collect(),
        inputs: vec![net.entry_end.id()],
        outputs: net.outputs.iter().map(|e| e.id()).collect(),
        layers: net.layers,
        states: net.states,
    }
}

fn end_of(id: u64) -> End {
    End { pipe: (id / 2) as usize, side: if id.is_multiple_of(2) { Side::Alice } else { Side::Bob } }
}

pub fn build_flow(graph: &MeasurementGraph, alice: &Matching, bob: &Matching) -> Result<FlowFunction> {
    let n = graph.vertices.len() as u64;
    let mut partner: HashMap<u64, u64> = HashMap::new();
    for (m, side) in [(alice, Side::Alice), (bob, Side::Bob)] {
        for &(a, b) in &m.pairs {
            for e in [a, b] {
                if e.side != side || e.id() >= n {
                    return Err(Error::Flow(format!("end {e:?} is not a valid {side:?} end")));
                }
            }
            if partner.insert(a.id(), b.id()).is_some() || partner.insert(b.id(), a.id()).is_some() {
                return Err(Error::Flow(format!("end {a:?} or {b:?} matched twice")));
            }
        }
    }
    let entry = graph.inputs[0];
    if partner.contains_key(&entry) {
        return Err(Error::Flow("the entry end must stay unmatched".into()));
    }
    let walk = |start: u64| {
        let mut path = vec![start];
        let mut v = start;
        loop {
            v ^= 1;
            path.push(v);
            match partner.get(&v) {
                Some(&w) => {
                    path.push(w);
                    v = w;
                }
                None => return path,
            }
        }
    };
    let key = |v: u64| (graph.vertices[v as usize].rank, v);
    let mut seen = vec![false; n as usize];
    let mut paths = Vec::new();
    let mut starts = vec![entry];
    starts.extend((0..n).filter(|&v| v != entry && !partner.contains_key(&v)));
    for s in starts {
        if seen[s as usize] {
            continue;
        }
        let path = walk(s);
        let last = *path.last().unwrap();
        let path = if s != entry && key(last) < key(s) { walk(last) } else { path };
        for &v in &path {
            seen[v as usize] = true;
        }
        paths.push(path);
    }
    if let Some(v) = seen.iter().position(|&x| !x) {
        return Err(Error::Flow(format!("vertex {v} lies on a cycle")));
    }
    let mut map = BTreeMap::new();
    for path in &paths {
        for w in path.windows(2) {
            if map.insert(w[0], w[1]).is_some() {
                return Err(Error::Flow(format!("vertex {} has two successors", w[0])));
            }
        }
    }
    let mut image = std::collections::HashSet::new();
    for &t in map.values() {
        if t == entry || !image.insert(t) {
            return Err(Error::Flow(format!("flow is not injective at {t}")));
        }
    }
    let sides = partner.keys().map(|&v| (v, end_of(v).side)).collect();
    Ok(FlowFunction { map, paths, sides })
}

/// Vertices visited from the entry, following `f`.
pub fn flow_path(flow: &FlowFunction, entry: u64) -> Vec<u64> {
    let mut path = vec![entry];
    let mut v = entry;
    while let Some(&w) = flow.map.get(&v) {
        path.push(w);
        v = w;
    }
    path
}

fn stage_of(graph: &MeasurementGraph, from: u64, to: u64, side: Side) -> Result<usize> {
    let (a, b) = (&graph.vertices[from as usize], &graph.vertices[to as usize]);
    let find = |role: Role| [a, b].into_iter().find(|v| v.role == role);
    let stage = match side {
        Side::Bob => find(Role::Entry).map(|_| 1).or_else(|| find(Role::Bundle).map(|v| 2 * v.layer + 1)),
        Side::Alice => find(Role::Interface).map(|v| 2 * v.layer),
    };
    stage.ok_or_else(|| Error::Schedule(format!("connection {from} - {to} does not fit the layer stages")))
}

pub fn schedule(flow: &FlowFunction, graph: &MeasurementGraph) -> Result<Schedule> {
    let entry = graph.inputs[0];
    let mut measurements = vec![Measurement {
        id: 0,
        side: MeasurementSide::Input,
        pipes: (end_of(entry).pipe, end_of(entry).pipe),
        ends: (entry, entry),
        basis: Basis::Bell,
        stage: 0,
        stream: entry,
        deps: Vec::new(),
    }];
    for path in &flow.paths {
        let mut prev = (path[0] == entry).then_some(0usize);
        for k in (1..path.len().saturating_sub(1)).step_by(2) {
            let (from, to) = (path[k], path[k + 1]);
            let side = flow.sides[&from];
            let id = measurements.len();
            let stage = stage_of(graph, from, to, side)?;
            if let Some(p) = prev {
                if measurements[p].stage >= stage {
                    return Err(Error::Schedule(format!(
                        "measurement at stage {stage} depends on stage {}",
                        measurements[p].stage
                    )));
                }
            }
            measurements.push(Measurement {
                id,
                side: if side == Side::Alice { MeasurementSide::Alice } else { MeasurementSide::Bob },
                pipes: (end_of(from).pipe, end_of(to).pipe),
                ends: (from, to),
                basis: Basis::Bell,
                stage,
                stream: from.min(to),
                deps: prev.into_iter().collect(),
            });
            prev = Some(id);
        }
    }
    let depth = measurements.iter().map(|m| m.stage).max().unwrap_or(0) + 1;
    let mut rounds = vec![Vec::new(); depth];
    for m in &measurements {
        rounds[m.stage].push(m.id);
    }
    let limit = (2 * graph.states as usize).max(1);
    if let Some(r) = rounds.iter().find(|r| r.len() > limit) {
        return Err(Error::Schedule(format!("round of {} measurements exceeds {limit}", r.len())));
    }
    Ok(Schedule { rounds, measurements })
}

/// Kahn's algorithm with a random choice among ready measurements.
pub fn random_topological_order<R: Rng + ?Sized>(sched: &Schedule, rng: &mut R) -> Vec<usize> {
    let n = sched.measurements.len();
    let mut indeg: Vec<usize> = sched.measurements.iter().map(|m| m.deps.len()).collect();
    let mut children = vec![Vec::new(); n];
    for m in &sched.measurements {
        for &d in &m.deps {
            children[d].push(m.id);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while !ready.is_empty() {
        let k = rng.gen_range(0..ready.len());
        let m = ready.swap_remove(k);
        order.push(m);
        for &c in &children[m] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.push(c);
            }
        }
    }
    order
}

/// Round-by-round order, shuffled within each round.
pub fn round_order<R: Rng + ?Sized>(sched: &Schedule, rng: &mut R) -> Vec<usize> {
    sched
        .rounds
        .iter()
        .flat_map(|r| {
            let mut r = r.clone();
            r.shuffle(rng);
            r
        })
        .collect()
}

pub struct GadgetPlan {
    pub run: GadgetRun,
    pub graph: MeasurementGraph,
    pub flow: FlowFunction,
    pub schedule: Schedule,
}

pub fn plan_gadget(key: &GadgetKey, control_ct: &LweCiphertext) -> Result<GadgetPlan> {
    let run = gadget_prepare(key, control_ct)?;
    let graph = build_measurement_graph(&key.network);
    let flow = build_flow(&graph, &key.alice_matching, &run.bob)?;
    let schedule = schedule(&flow, &graph)?;
    Ok(GadgetPlan { run, graph, flow, schedule })
}

/// Runs the gadget by executing measurements in `order`, which must be a
/// topological order of the schedule.
pub fn execute_order(
    key: &GadgetKey,
    plan: &GadgetPlan,
    data_in: Amp2,
    seed: u64,
    order: &[usize],
) -> Result<GadgetOutput> {
    let n = plan.schedule.measurements.len();
    let mut done = vec![false; n];
    if order.len() != n {
        return Err(Error::Schedule(format!("order has {} of {n} measurements", order.len())));
    }
    let by_stream: HashMap<u64, usize> =
        plan.run.steps.iter().enumerate().map(|(i, s)| (s.stream, i)).collect();
    let mut chain = ChainSim::new(data_in, seed)?;
    let mut next = 0;
    for &id in order {
        let m = plan
            .schedule
            .measurements
            .get(id)
            .ok_or_else(|| Error::Schedule(format!("unknown measurement {id}")))?;
        if done[id] || m.deps.iter().any(|&d| !done[d]) {
            return Err(Error::Schedule(format!("measurement {id} executed out of order")));
        }
        done[id] = true;
        if let Some(&i) = by_stream.get(&m.stream) {
            if i != next {
                return Err(Error::Schedule(format!("path measurement {i} ran before step {next}")));
            }
            let step = &plan.run.steps[i];
            chain = chain_step(&chain, step_outcome(key, step, seed), step.decoration);
            next += 1;
        }
    }
    gadget_assemble(key, &plan.run, chain, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garden_hose::{gh_flow, gh_wire_alice};

    #[test]
    fn single_pipe_graph() {
        let net = PipeNetwork::single_pipe();
        let g = build_measurement_graph(&net);
        assert_eq!(g.edges, vec![(0, 1)]);
        assert_eq!((g.inputs.clone(), g.outputs.clone()), (vec![0], vec![1]));
        let flow = build_flow(&g, &Matching::default(), &Matching::default()).unwrap();
        assert_eq!(flow.map, BTreeMap::from([(0, 1)]));
        let s = schedule(&flow, &g).unwrap();
        assert_eq!(s.depth(), 1);
    }

    #[test]
    fn t1_flow_follows_water() {
        let net = crate::tgate_gadget::decryption_network(17, 4).unwrap();
        let alice = gh_wire_alice(&net, &[1, 0, 1, 1]).unwrap();
        let bob = crate::garden_hose::gh_wire_bob(
            &net,
            &crate::garden_hose::BobSymbols { start: 13, shifts: vec![14, 12, 10, 6] },
        )
        .unwrap();
        let g = build_measurement_graph(&net);
        assert_eq!((g.edges.len(), g.vertices.len()), (154, 308));
        let flow = build_flow(&g, &alice, &bob).unwrap();
        let water = gh_flow(&net, &alice, &bob).unwrap();
        let ids: Vec<u64> = water.visited_ends.iter().map(|e| e.id()).collect();
        assert_eq!(flow_path(&flow, 0), ids);
        let s = schedule(&flow, &g).unwrap();
        assert_eq!(s.depth(), 10);
        assert!(s.max_width() <= 34);
    }
}
