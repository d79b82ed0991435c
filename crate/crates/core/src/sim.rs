// SPDX-License-Identifier: Apache-2.0

//! Clock-tick simulator of handshaking operator state machines.
//!
//! Every operator instance runs the same four-state controller:
//!
//! * `S0` resets the input latches and output register.
//! * `S1` latches every strobed input whose status bit is clear and
//!   acknowledges it; once the firing rule holds the node moves to `S2`.
//! * `S2` executes the operator, consuming latched inputs and filling the
//!   output register(s).
//! * `S3` strobes each filled output onto its arc as soon as the arc is free,
//!   stalling while the consumer is busy, then returns to `S1`.
//!
//! An arc carries at most one token between its send and the consumer firing
//! on it: a producer may strobe only when the channel register is empty and
//! the consumer's acknowledge line reads 0 (its latch for that port is empty).
//!
//! Each tick is two-phase. All transitions read the pre-tick snapshot and
//! write the next state, so node iteration order never changes the outcome.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asm::BoundProgram;
use crate::graph::{OperatorKind, PortRole};
use crate::ops::{self, Token, Width};

/// How a controlled merge treats the data input it does not select.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DMergePolicy {
    /// Fires once `a`, `b` and `ctl` are all latched; the unselected token is
    /// consumed and dropped.
    #[default]
    ConsumeAll,
    /// Fires once `ctl` and the selected input are latched; the unselected
    /// token stays latched for a later fire.
    ConsumeSelected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Record trace events. Counters are kept either way.
    pub trace: bool,
    pub dmerge: DMergePolicy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { trace: true, dmerge: DMergePolicy::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FsmState {
    S0,
    S1,
    S2,
    S3,
}

/// A latched input: the value and the tick it was latched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latch {
    pub value: Token,
    pub tick: u64,
}

/// Registers of one operator instance. A latch slot being `Some` is its
/// status bit (`bita`, `bitb`, ...); a pending slot being `Some` is `bitz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperatorState {
    pub fsm: FsmState,
    pub latches: [Option<Latch>; 3],
    pub pending: [Option<Token>; 2],
}

impl OperatorState {
    const RESET: OperatorState = OperatorState { fsm: FsmState::S1, latches: [None; 3], pending: [None; 2] };

    fn power_on() -> Self {
        OperatorState { fsm: FsmState::S0, ..Self::RESET }
    }

    pub fn status(&self, slot: usize) -> bool {
        self.latches[slot].is_some()
    }

    fn is_empty(&self) -> bool {
        self.latches.iter().all(Option::is_none) && self.pending.iter().all(Option::is_none)
    }
}

/// One arc at runtime. `strobe` set means the data register holds a token
/// the consumer has not latched yet.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Channel {
    pub data: Token,
    pub strobe: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Latch { port: PortRole, arc: Arc<str>, value: u64 },
    Ack { port: PortRole, arc: Arc<str> },
    Fire { consumed: Vec<PortRole>, produced: Vec<PortRole> },
    Send { port: PortRole, arc: Arc<str>, value: u64 },
    Warning { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub node: Arc<str>,
    #[serde(flatten)]
    pub event: Event,
}

/// Serializes a trace as JSON Lines.
pub fn trace_to_jsonl(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in trace {
        out.push_str(&serde_json::to_string(ev).expect("trace events serialize"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Deadlock,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimResult {
    /// Raw register values received on each graph output.
    pub outputs: BTreeMap<String, Vec<u64>>,
    pub ticks_elapsed: u64,
    pub fire_counts: BTreeMap<String, u64>,
    pub arc_token_counts: BTreeMap<String, u64>,
    pub warnings: u64,
    pub terminated: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Node { node: usize, slot: usize },
    External(usize),
}

/// Immutable wiring shared by every copy of a machine.
#[derive(Debug)]
struct Topology {
    width: Width,
    policy: DMergePolicy,
    kinds: Vec<OperatorKind>,
    names: Vec<Arc<str>>,
    labels: Vec<Arc<str>>,
    node_in: Vec<[usize; 3]>,
    node_out: Vec<[usize; 2]>,
    consumer: Vec<Endpoint>,
    source_edges: Vec<usize>,
    source_names: Vec<Arc<str>>,
    sink_edges: Vec<usize>,
    sink_names: Vec<Arc<str>>,
    expected: Vec<u64>,
}

#[derive(Debug, Clone)]
struct Source {
    queue: VecDeque<Token>,
}

/// Outcome of a single tick.
#[derive(Debug, Clone, Default)]
pub struct Step {
    pub events: Vec<TraceEvent>,
    /// Whether anything changed: an event or an FSM transition.
    pub progressed: bool,
}

/// Complete simulation state. Cloning is cheap; the wiring is shared.
#[derive(Debug, Clone)]
pub struct Machine {
    topo: Arc<Topology>,
    tick: u64,
    channels: Vec<Channel>,
    nodes: Vec<OperatorState>,
    sources: Vec<Source>,
    received: Vec<Vec<Token>>,
    fire_counts: Vec<u64>,
    arc_tokens: Vec<u64>,
    warnings: u64,
}

impl Machine {
    /// Builds a machine at tick 0 with every operator in `S0`.
    pub fn new(program: &BoundProgram, policy: DMergePolicy) -> Self {
        let graph = &program.graph;
        let wiring = graph.wiring();
        let edge_of = |e: Option<usize>| e.expect("bound programs are validated");
        let node_in = (0..graph.nodes.len())
            .map(|n| {
                let mut slots = [usize::MAX; 3];
                for (s, e) in wiring.node_inputs[n].iter().enumerate() {
                    slots[s] = edge_of(*e);
                }
                slots
            })
            .collect();
        let node_out = (0..graph.nodes.len())
            .map(|n| {
                let mut slots = [usize::MAX; 2];
                for (s, e) in wiring.node_outputs[n].iter().enumerate() {
                    slots[s] = edge_of(*e);
                }
                slots
            })
            .collect();
        let find_edge =
            |label: &str| graph.edges.iter().position(|e| e.label.as_str() == label).expect("declared arcs exist");
        let source_edges: Vec<usize> = program.injections.iter().map(|(l, _)| find_edge(l.as_str())).collect();
        let sink_edges: Vec<usize> = program.expected.iter().map(|(l, _)| find_edge(l.as_str())).collect();
        let consumer = graph
            .edges
            .iter()
            .enumerate()
            .map(|(ei, e)| match e.consumer {
                Some(p) => Endpoint::Node {
                    node: p.node,
                    slot: graph.nodes[p.node].kind.input_slot(p.role).expect("validated port"),
                },
                None => Endpoint::External(sink_edges.iter().position(|s| *s == ei).expect("outputs are sinks")),
            })
            .collect();
        let topo = Topology {
            width: program.width,
            policy,
            kinds: graph.nodes.iter().map(|n| n.kind).collect(),
            names: graph.nodes.iter().map(|n| Arc::from(n.name.as_str())).collect(),
            labels: graph.edges.iter().map(|e| Arc::from(e.label.as_str())).collect(),
            node_in,
            node_out,
            consumer,
            source_names: program.injections.iter().map(|(l, _)| Arc::from(format!("input:{l}"))).collect(),
            source_edges,
            sink_names: program.expected.iter().map(|(l, _)| Arc::from(format!("output:{l}"))).collect(),
            sink_edges,
            expected: program.expected.iter().map(|(_, n)| *n).collect(),
        };
        Machine {
            tick: 0,
            channels: vec![Channel::default(); graph.edges.len()],
            nodes: vec![OperatorState::power_on(); graph.nodes.len()],
            sources: program.injections.iter().map(|(_, t)| Source { queue: t.iter().copied().collect() }).collect(),
            received: vec![Vec::new(); program.expected.len()],
            fire_counts: vec![0; graph.nodes.len()],
            arc_tokens: vec![0; graph.edges.len()],
            warnings: 0,
            topo: Arc::new(topo),
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn width(&self) -> Width {
        self.topo.width
    }

    pub fn node_state(&self, name: &str) -> Option<&OperatorState> {
        self.topo.names.iter().position(|n| &**n == name).map(|i| &self.nodes[i])
    }

    pub fn channel(&self, label: &str) -> Option<Channel> {
        self.topo.labels.iter().position(|l| &**l == label).map(|i| self.channels[i])
    }

    /// Acknowledge line of an arc: 1 while the consumer's latch for it is full.
    pub fn ack(&self, label: &str) -> Option<bool> {
        let e = self.topo.labels.iter().position(|l| &**l == label)?;
        Some(consumer_busy(&self.topo, &self.nodes, e))
    }

    /// Tokens received so far on a graph output.
    pub fn received(&self, label: &str) -> Option<&[Token]> {
        self.topo
            .sink_names
            .iter()
            .position(|n| n.strip_prefix("output:") == Some(label))
            .map(|i| &self.received[i][..])
    }

    /// Pure step: returns the successor state and the events of this tick.
    pub fn ticked(&self) -> (Machine, Vec<TraceEvent>) {
        let mut next = self.clone();
        let step = next.step();
        (next, step.events)
    }

    /// Advances every source, operator and sink by one clock tick.
    pub fn step(&mut self) -> Step {
        let topo = Arc::clone(&self.topo);
        let prev_channels = self.channels.clone();
        let prev_nodes = self.nodes.clone();
        let tick = self.tick;
        let mut events = Vec::new();
        let mut progressed = false;
        let free = |e: usize| !prev_channels[e].strobe && !consumer_busy(&topo, &prev_nodes, e);

        for (si, source) in self.sources.iter_mut().enumerate() {
            let e = topo.source_edges[si];
            if free(e) {
                if let Some(tok) = source.queue.pop_front() {
                    self.channels[e] = Channel { data: tok, strobe: true };
                    self.arc_tokens[e] += 1;
                    events.push(TraceEvent {
                        tick,
                        node: topo.source_names[si].clone(),
                        event: Event::Send { port: PortRole::Z, arc: topo.labels[e].clone(), value: tok.0 },
                    });
                }
            }
        }

        for (ni, prev) in prev_nodes.iter().enumerate() {
            let kind = topo.kinds[ni];
            let name = &topo.names[ni];
            let mut st = *prev;
            match prev.fsm {
                FsmState::S0 => {
                    st = OperatorState::RESET;
                }
                FsmState::S1 => {
                    for (slot, &role) in kind.inputs().iter().enumerate() {
                        let e = topo.node_in[ni][slot];
                        if st.latches[slot].is_none() && prev_channels[e].strobe {
                            let value = prev_channels[e].data;
                            st.latches[slot] = Some(Latch { value, tick });
                            self.channels[e].strobe = false;
                            let arc = topo.labels[e].clone();
                            events.push(TraceEvent {
                                tick,
                                node: name.clone(),
                                event: Event::Latch { port: role, arc: arc.clone(), value: value.0 },
                            });
                            events.push(TraceEvent { tick, node: name.clone(), event: Event::Ack { port: role, arc } });
                        }
                    }
                    if ready(kind, topo.policy, &st) {
                        st.fsm = FsmState::S2;
                    }
                }
                FsmState::S2 => {
                    let fired = fire(kind, topo.policy, topo.width, &mut st);
                    self.fire_counts[ni] += 1;
                    events.push(TraceEvent {
                        tick,
                        node: name.clone(),
                        event: Event::Fire { consumed: fired.consumed, produced: fired.produced },
                    });
                    if fired.div_by_zero {
                        self.warnings += 1;
                        events.push(TraceEvent {
                            tick,
                            node: name.clone(),
                            event: Event::Warning { message: "division by zero; result forced to 0".into() },
                        });
                    }
                    st.fsm = FsmState::S3;
                }
                FsmState::S3 => {
                    for (slot, &role) in kind.outputs().iter().enumerate() {
                        let Some(tok) = st.pending[slot] else { continue };
                        let e = topo.node_out[ni][slot];
                        if free(e) {
                            self.channels[e] = Channel { data: tok, strobe: true };
                            self.arc_tokens[e] += 1;
                            st.pending[slot] = None;
                            events.push(TraceEvent {
                                tick,
                                node: name.clone(),
                                event: Event::Send { port: role, arc: topo.labels[e].clone(), value: tok.0 },
                            });
                        }
                    }
                    if st.pending.iter().all(Option::is_none) {
                        st.fsm = FsmState::S1;
                    }
                }
            }
            progressed |= st.fsm != prev.fsm;
            self.nodes[ni] = st;
        }

        for (ki, received) in self.received.iter_mut().enumerate() {
            let e = topo.sink_edges[ki];
            let wanted = topo.expected[ki];
            if prev_channels[e].strobe && (wanted == 0 || (received.len() as u64) < wanted) {
                let value = prev_channels[e].data;
                received.push(value);
                self.channels[e].strobe = false;
                let arc = topo.labels[e].clone();
                let node = topo.sink_names[ki].clone();
                events.push(TraceEvent {
                    tick,
                    node: node.clone(),
                    event: Event::Latch { port: PortRole::A, arc: arc.clone(), value: value.0 },
                });
                events.push(TraceEvent { tick, node, event: Event::Ack { port: PortRole::A, arc } });
            }
        }

        self.tick += 1;
        progressed |= !events.is_empty();
        Step { events, progressed }
    }

    /// Every output with a positive expectation has received exactly that many
    /// tokens, and at least one such expectation exists.
    pub fn expectations_met(&self) -> bool {
        let mut any = false;
        for (ki, wanted) in self.topo.expected.iter().enumerate() {
            if *wanted > 0 {
                any = true;
                if (self.received[ki].len() as u64) < *wanted {
                    return false;
                }
            }
        }
        any
    }

    fn all_expectations_met(&self) -> bool {
        self.topo.expected.iter().zip(&self.received).all(|(w, r)| *w == 0 || r.len() as u64 >= *w)
    }

    /// No token anywhere: sources exhausted, arcs, latches and registers empty.
    pub fn is_drained(&self) -> bool {
        self.sources.iter().all(|s| s.queue.is_empty())
            && self.channels.iter().all(|c| !c.strobe)
            && self.nodes.iter().all(OperatorState::is_empty)
    }

    pub fn result(&self, terminated: Termination) -> SimResult {
        let topo = &self.topo;
        SimResult {
            outputs: topo
                .sink_edges
                .iter()
                .zip(&self.received)
                .map(|(e, r)| (topo.labels[*e].to_string(), r.iter().map(|t| t.0).collect()))
                .collect(),
            ticks_elapsed: self.tick,
            fire_counts: topo.names.iter().zip(&self.fire_counts).map(|(n, c)| (n.to_string(), *c)).collect(),
            arc_token_counts: topo.labels.iter().zip(&self.arc_tokens).map(|(l, c)| (l.to_string(), *c)).collect(),
            warnings: self.warnings,
            terminated,
        }
    }
}

fn consumer_busy(topo: &Topology, nodes: &[OperatorState], edge: usize) -> bool {
    match topo.consumer[edge] {
        Endpoint::Node { node, slot } => nodes[node].latches[slot].is_some(),
        Endpoint::External(_) => false,
    }
}

/// Firing rule evaluated on the latches after this tick's receives.
fn ready(kind: OperatorKind, policy: DMergePolicy, st: &OperatorState) -> bool {
    let has = |s: usize| st.latches[s].is_some();
    match kind {
        OperatorKind::Copy | OperatorKind::Not => has(0),
        OperatorKind::NDMerge => has(0) || has(1),
        OperatorKind::Branch => has(0) && has(1),
        OperatorKind::DMerge => match policy {
            DMergePolicy::ConsumeAll => has(0) && has(1) && has(2),
            DMergePolicy::ConsumeSelected => match st.latches[2] {
                Some(ctl) => has(if ctl.value.is_true() { 0 } else { 1 }),
                None => false,
            },
        },
        _ => has(0) && has(1),
    }
}

struct Fired {
    consumed: Vec<PortRole>,
    produced: Vec<PortRole>,
    div_by_zero: bool,
}

/// Executes the operator on its latches, clearing what it consumes and
/// filling the output registers.
fn fire(kind: OperatorKind, policy: DMergePolicy, width: Width, st: &mut OperatorState) -> Fired {
    fn take(st: &mut OperatorState, slot: usize) -> Token {
        st.latches[slot].take().expect("firing rule checked in S1").value
    }
    let mut div_by_zero = false;
    let (consumed, outputs): (Vec<PortRole>, [Option<Token>; 2]) = match kind {
        OperatorKind::Copy => {
            let (l, r) = ops::eval_copy(take(st, 0));
            (vec![PortRole::A], [Some(l), Some(r)])
        }
        OperatorKind::Not => (vec![PortRole::A], [Some(ops::eval_not(take(st, 0), width)), None]),
        OperatorKind::NDMerge => {
            let arrival = |s: usize| st.latches[s].map(|l| (l.value, l.tick));
            let (port, tok) = ops::eval_ndmerge(arrival(0), arrival(1)).expect("firing rule checked in S1");
            st.latches[if port == PortRole::A { 0 } else { 1 }] = None;
            (vec![port], [Some(tok), None])
        }
        OperatorKind::DMerge => {
            let ctl = take(st, 2);
            let value = |s: usize| st.latches[s].map(|l| l.value);
            let (port, tok) = ops::eval_dmerge(value(0), value(1), ctl).expect("firing rule checked in S1");
            let consumed = match policy {
                DMergePolicy::ConsumeAll => {
                    st.latches[0] = None;
                    st.latches[1] = None;
                    vec![PortRole::A, PortRole::B, PortRole::Ctl]
                }
                DMergePolicy::ConsumeSelected => {
                    st.latches[if port == PortRole::A { 0 } else { 1 }] = None;
                    vec![port, PortRole::Ctl]
                }
            };
            (consumed, [Some(tok), None])
        }
        OperatorKind::Branch => {
            let a = take(st, 0);
            let ctl = take(st, 1);
            let (port, tok) = ops::eval_branch(a, ctl);
            let outs = if port == PortRole::T { [Some(tok), None] } else { [None, Some(tok)] };
            (vec![PortRole::A, PortRole::Ctl], outs)
        }
        _ => {
            let a = take(st, 0);
            let b = take(st, 1);
            let e = ops::eval_primitive(kind, a, b, width).expect("remaining kinds are two-input primitives");
            div_by_zero = e.div_by_zero;
            (vec![PortRole::A, PortRole::B], [Some(e.token), None])
        }
    };
    let produced = kind.outputs().iter().zip(&outputs).filter(|(_, t)| t.is_some()).map(|(r, _)| *r).collect();
    st.pending = outputs;
    Fired { consumed, produced, div_by_zero }
}

/// Runs a bound program until completion, deadlock or the tick budget.
pub fn run(program: &BoundProgram, config: SimConfig) -> (SimResult, Vec<TraceEvent>) {
    let mut machine = Machine::new(program, config.dmerge);
    let mut trace = Vec::new();
    let terminated = loop {
        if machine.tick() >= program.max_ticks {
            break Termination::BudgetExhausted;
        }
        let step = machine.step();
        if config.trace {
            trace.extend(step.events);
        }
        if machine.expectations_met() {
            break Termination::Completed;
        }
        if !step.progressed {
            // a quiescent tick is a fixed point of the step function
            if machine.all_expectations_met() && machine.is_drained() {
                break Termination::Completed;
            }
            break Termination::Deadlock;
        }
    };
    (machine.result(terminated), trace)
}
