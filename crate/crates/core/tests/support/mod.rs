// SPDX-License-Identifier: Apache-2.0

//! Shared helpers for the integration suites: a random valid-program
//! generator and an independent trace checker.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use staticflow::asm::{bind_manifest, parse_program, BoundProgram, Manifest};
use staticflow::graph::{ArcLabel, DataflowGraph, OperatorKind, PortRole};
use staticflow::ops::{eval_not, eval_primitive, Token, Width};
use staticflow::sim::{DMergePolicy, Event, TraceEvent};

/// A generated program with a matching manifest.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub source: String,
    pub manifest: Manifest,
    pub policy: DMergePolicy,
}

impl RandomCase {
    pub fn bind(&self) -> BoundProgram {
        let graph = parse_program(&self.source).expect("generated program parses");
        bind_manifest(&graph, &self.manifest).expect("generated manifest binds")
    }
}

/// Random well-formed program of 1..=`max_nodes` statements. Most arcs feed
/// forward; some inputs are wired to a label produced by a later statement,
/// which closes a cycle.
pub fn random_program<R: Rng>(rng: &mut R, max_nodes: usize) -> String {
    let n = rng.gen_range(1..=max_nodes);
    let mut open: Vec<String> = Vec::new();
    let mut wanted: Vec<String> = Vec::new();
    let mut fresh = 0usize;
    let mut next = |prefix: &str| {
        fresh += 1;
        format!("{prefix}{fresh}")
    };
    let mut lines = Vec::new();
    for _ in 0..n {
        let kind = *OperatorKind::ALL.choose(rng).unwrap();
        let mut args = Vec::new();
        for _ in kind.inputs() {
            let roll: f64 = rng.gen();
            let label = if roll < 0.1 {
                let l = next("fb");
                wanted.push(l.clone());
                l
            } else if roll < 0.7 && !open.is_empty() {
                let i = rng.gen_range(0..open.len());
                open.swap_remove(i)
            } else {
                next("in")
            };
            args.push(label);
        }
        for _ in kind.outputs() {
            let label = if !wanted.is_empty() && rng.gen_bool(0.5) {
                wanted.swap_remove(rng.gen_range(0..wanted.len()))
            } else {
                let l = next("s");
                open.push(l.clone());
                l
            };
            args.push(label);
        }
        lines.push(format!("{} {};", kind.mnemonic(), args.join(",")));
    }
    lines.join("\n") + "\n"
}

pub fn random_case<R: Rng>(rng: &mut R, max_nodes: usize) -> RandomCase {
    let source = random_program(rng, max_nodes);
    let graph = parse_program(&source).expect("generated program parses");
    let width = Width::new(*[4i64, 8, 16].choose(rng).unwrap()).unwrap();
    let mut manifest = Manifest { width, max_ticks: 3_000, ..Manifest::default() };
    for label in &graph.inputs {
        let len = rng.gen_range(0..=5);
        let values = (0..len).map(|_| rng.gen_range(width.min_signed()..=width.max_signed())).collect();
        manifest.bindings.insert(label.clone(), values);
    }
    let policy = if rng.gen_bool(0.5) { DMergePolicy::ConsumeAll } else { DMergePolicy::ConsumeSelected };
    RandomCase { source, manifest, policy }
}

#[derive(Default)]
struct ArcLog {
    sent: Vec<u64>,
    latched: Vec<u64>,
    acks: usize,
    /// Last handshake event: (is_send, tick).
    last: Option<(bool, u64)>,
}

fn set(ports: &[PortRole]) -> Vec<PortRole> {
    let mut v = ports.to_vec();
    v.sort_by_key(|r| r.as_str());
    v
}

/// Checks the single-token rule, per-arc sequence preservation, fire gating
/// and per-fire conservation. Returns one message per violation.
pub fn check_trace(graph: &DataflowGraph, width: Width, policy: DMergePolicy, trace: &[TraceEvent]) -> Vec<String> {
    let kinds: HashMap<&str, OperatorKind> = graph.nodes.iter().map(|n| (n.name.as_str(), n.kind)).collect();
    let mut arcs: BTreeMap<String, ArcLog> = BTreeMap::new();
    let mut latches: HashMap<(String, PortRole), (u64, u64)> = HashMap::new();
    let mut pending: HashMap<(String, PortRole), VecDeque<u64>> = HashMap::new();
    let mut bad = Vec::new();
    let mut prev_tick = 0;

    for ev in trace {
        let node = ev.node.to_string();
        let at = format!("tick {} {}", ev.tick, node);
        if ev.tick < prev_tick {
            bad.push(format!("{at}: tick went backwards"));
        }
        prev_tick = ev.tick;
        match &ev.event {
            Event::Send { port, arc, value } => {
                let log = arcs.entry(arc.to_string()).or_default();
                match log.last {
                    Some((true, _)) => bad.push(format!("{at}: second send on {arc} before ack")),
                    Some((false, t)) if t >= ev.tick => bad.push(format!("{at}: send on {arc} in the ack tick")),
                    _ => {}
                }
                log.last = Some((true, ev.tick));
                log.sent.push(*value);
                if kinds.contains_key(node.as_str()) {
                    match pending.get_mut(&(node.clone(), *port)).and_then(|q| q.pop_front()) {
                        Some(v) if v == *value => {}
                        Some(v) => bad.push(format!("{at}: sent {value} on {port}, fire produced {v}")),
                        None => bad.push(format!("{at}: send on {port} without a fire")),
                    }
                }
            }
            Event::Latch { port, arc, value } => {
                let log = arcs.entry(arc.to_string()).or_default();
                if log.latched.len() >= log.sent.len() {
                    bad.push(format!("{at}: latched {arc} with nothing sent"));
                }
                log.latched.push(*value);
                if kinds.contains_key(node.as_str())
                    && latches.insert((node.clone(), *port), (*value, ev.tick)).is_some()
                {
                    bad.push(format!("{at}: latched {port} while its status bit was set"));
                }
            }
            Event::Ack { arc, .. } => {
                let log = arcs.entry(arc.to_string()).or_default();
                match log.last {
                    Some((true, t)) if t < ev.tick => {}
                    _ => bad.push(format!("{at}: ack on {arc} without a prior send")),
                }
                log.last = Some((false, ev.tick));
                log.acks += 1;
                if log.acks != log.latched.len() {
                    bad.push(format!("{at}: ack on {arc} does not follow a latch"));
                }
            }
            Event::Fire { consumed, produced } => {
                let Some(&kind) = kinds.get(node.as_str()) else {
                    bad.push(format!("{at}: fire by unknown node"));
                    continue;
                };
                if pending.iter().any(|((n, _), q)| *n == node && !q.is_empty()) {
                    bad.push(format!("{at}: fired with results still pending"));
                }
                let held: HashMap<PortRole, (u64, u64)> =
                    kind.inputs().iter().filter_map(|r| latches.get(&(node.clone(), *r)).map(|v| (*r, *v))).collect();
                for r in consumed {
                    if latches.remove(&(node.clone(), *r)).is_none() {
                        bad.push(format!("{at}: consumed {r} without its status bit"));
                    }
                }
                let Some(expect) = expected_fire(kind, policy, width, &held, &mut bad, &at) else {
                    continue;
                };
                if set(consumed) != set(&expect.0) {
                    bad.push(format!("{at}: {kind} consumed {consumed:?}, expected {:?}", expect.0));
                }
                let produced_roles: Vec<PortRole> = expect.1.iter().map(|(r, _)| *r).collect();
                if set(produced) != set(&produced_roles) {
                    bad.push(format!("{at}: {kind} produced {produced:?}, expected {produced_roles:?}"));
                }
                for (r, v) in expect.1 {
                    pending.entry((node.clone(), r)).or_default().push_back(v);
                }
            }
            Event::Warning { .. } => {}
        }
    }

    for (label, log) in &arcs {
        let prefix = log.latched.len() <= log.sent.len() && log.sent[..log.latched.len()] == log.latched[..];
        if log.acks != log.latched.len() {
            bad.push(format!("arc {label}: {} latches but {} acks", log.latched.len(), log.acks));
        }
        if !prefix || log.sent.len() - log.latched.len() > 1 {
            bad.push(format!("arc {label}: sent {:?} but latched {:?}", log.sent, log.latched));
        }
    }
    bad
}

type Fire = (Vec<PortRole>, Vec<(PortRole, u64)>);

/// Consumed ports and produced `(port, value)` pairs a fire must show,
/// given the latched inputs.
fn expected_fire(
    kind: OperatorKind,
    policy: DMergePolicy,
    width: Width,
    held: &HashMap<PortRole, (u64, u64)>,
    bad: &mut Vec<String>,
    at: &str,
) -> Option<Fire> {
    use PortRole::*;
    let get = |r: PortRole| held.get(&r).map(|(v, _)| *v);
    let need = |rs: &[PortRole], bad: &mut Vec<String>| {
        let missing: Vec<_> = rs.iter().filter(|r| !held.contains_key(r)).collect();
        if missing.is_empty() {
            true
        } else {
            bad.push(format!("{at}: {kind} fired without {missing:?}"));
            false
        }
    };
    Some(match kind {
        OperatorKind::Copy => {
            need(&[A], bad).then_some(())?;
            let a = get(A)?;
            (vec![A], vec![(Z1, a), (Z2, a)])
        }
        OperatorKind::Not => {
            need(&[A], bad).then_some(())?;
            (vec![A], vec![(Z, eval_not(Token(get(A)?), width).0)])
        }
        OperatorKind::Branch => {
            need(&[A, Ctl], bad).then_some(())?;
            let out = if get(Ctl)? != 0 { T } else { F };
            (vec![A, Ctl], vec![(out, get(A)?)])
        }
        OperatorKind::DMerge => {
            let ctl_true = get(Ctl).map(|c| c != 0);
            match policy {
                DMergePolicy::ConsumeAll => {
                    need(&[A, B, Ctl], bad).then_some(())?;
                    let v = if ctl_true? { get(A)? } else { get(B)? };
                    (vec![A, B, Ctl], vec![(Z, v)])
                }
                DMergePolicy::ConsumeSelected => {
                    need(&[Ctl], bad).then_some(())?;
                    let sel = if ctl_true? { A } else { B };
                    need(&[sel], bad).then_some(())?;
                    (vec![sel, Ctl], vec![(Z, get(sel)?)])
                }
            }
        }
        OperatorKind::NDMerge => {
            let pick = match (held.get(&A), held.get(&B)) {
                (Some((_, ta)), Some((_, tb))) => {
                    if tb < ta {
                        B
                    } else {
                        A
                    }
                }
                (Some(_), None) => A,
                (None, Some(_)) => B,
                (None, None) => {
                    bad.push(format!("{at}: ndmerge fired with no input"));
                    return None;
                }
            };
            (vec![pick], vec![(Z, get(pick)?)])
        }
        _ => {
            need(&[A, B], bad).then_some(())?;
            let r = eval_primitive(kind, Token(get(A)?), Token(get(B)?), width).ok()?;
            (vec![A, B], vec![(Z, r.token.0)])
        }
    })
}

pub fn labels(names: &[&str]) -> Vec<ArcLabel> {
    names.iter().map(|n| ArcLabel::new(*n).unwrap()).collect()
}
