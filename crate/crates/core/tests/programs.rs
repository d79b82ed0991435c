// SPDX-License-Identifier: Apache-2.0

//! Shipped programs: the Fibonacci program text, its two-region structure, the
//! authored benchmarks and the emitted netlist.

use std::collections::BTreeSet;

use staticflow::asm::{parse_program, parse_statements};
use staticflow::bench::{BenchName, FIBONACCI_SRC};
use staticflow::graph::{graph_stats, validate_graph, DataflowGraph, OperatorKind, PortRole};
use staticflow::hdl::{emit_netlist, scan_netlist};
use staticflow::ops::Width;

const GOLDEN: &str = include_str!("golden/fibonacci.vhd");

const REFERENCE_TEXT: &str = "\
1.ndmerge s7,dadob,s1;
2.dmerge s2,dadoc,s1,s3;
3.ndmerge dadod,s11,s2;
4.gtdecider dadoa,s4,s5;
5.copy s3,s4,s9;
6.copy s5,s6,s8;
7.branch s9,s8,s10,pf;
8.copy s6,s7,s12;
9.add s10,dadoe,s11;
10.ndmerge s17,dadof,s13;
11.ndmerge dadog,s25,s14;
12.ndmerge dadoi,s22,s23;
13.ndmerge dadoj,s19,s21;
14.copy s18,s19,s20;
15.dmerge s23,dadoh,s12,s24;
16.dmerge s20,s21,s26,s22;
17.copy s24,s25,s26;
18.add s13,s14,s15;
19.copy s15,s16,s18;
20.copy s16,s17,fibo;
";

fn strip(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split("--").next().unwrap())
        .map(|l| l.trim_start_matches(|c: char| c.is_ascii_digit() || c == '.' || c.is_whitespace()))
        .map(|l| l.split_whitespace().collect::<String>())
        .filter(|l| !l.is_empty())
        .collect()
}

fn fib() -> DataflowGraph {
    parse_program(FIBONACCI_SRC).unwrap()
}

#[test]
fn fibonacci_text_matches_reference() {
    assert_eq!(strip(FIBONACCI_SRC), strip(REFERENCE_TEXT));
    let statements = parse_statements(FIBONACCI_SRC).unwrap();
    assert_eq!(statements.len(), 20);
    assert_eq!(statements.iter().map(|s| s.line_number).collect::<Vec<_>>(), (1..=20).map(Some).collect::<Vec<_>>());
}

#[test]
fn fibonacci_graph_shape() {
    let g = fib();
    assert!(validate_graph(&g).is_ok());
    let stats = graph_stats(&g);
    assert_eq!(stats.node_count, 20);
    assert_eq!(stats.arc_count, 38);
    assert_eq!(stats.internal_arc_count, 26);
    let inputs: BTreeSet<_> = stats.inputs.iter().map(String::as_str).collect();
    let want: BTreeSet<_> =
        ["dadoa", "dadob", "dadoc", "dadod", "dadoe", "dadof", "dadog", "dadoh", "dadoi", "dadoj"].into();
    assert_eq!(inputs, want);
    assert_eq!(stats.outputs, ["pf", "fibo"]);
    let kinds: Vec<(&str, usize)> = stats.kinds.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    assert_eq!(kinds, [("add", 2), ("branch", 1), ("copy", 7), ("dmerge", 3), ("gtdecider", 1), ("ndmerge", 6)]);
}

/// Weakly connected components over nodes, ignoring arcs in `cut`.
fn components(g: &DataflowGraph, cut: &[&str]) -> Vec<BTreeSet<usize>> {
    let mut parent: Vec<usize> = (0..g.nodes.len()).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for e in &g.edges {
        if cut.contains(&e.label.as_str()) {
            continue;
        }
        if let (Some(a), Some(b)) = (e.producer, e.consumer) {
            let (ra, rb) = (find(&mut parent, a.node), find(&mut parent, b.node));
            parent[ra] = rb;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    for i in 0..g.nodes.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().insert(i);
    }
    let mut v: Vec<_> = groups.into_values().collect();
    v.sort();
    v
}

#[test]
fn fibonacci_has_loop_control_and_accumulation_regions() {
    let g = fib();
    assert_eq!(components(&g, &[]).len(), 1);

    // Exactly one internal arc joins the two regions: a control token from
    // the loop-control side into a merge's ctl port on the other side.
    let regions = components(&g, &["s12"]);
    assert_eq!(regions.len(), 2);
    let left: BTreeSet<usize> = (0..9).collect();
    let right: BTreeSet<usize> = (9..20).collect();
    assert_eq!(regions, vec![left.clone(), right.clone()]);

    let crossing: Vec<_> = g
        .edges
        .iter()
        .filter(|e| match (e.producer, e.consumer) {
            (Some(p), Some(c)) => left.contains(&p.node) != left.contains(&c.node),
            _ => false,
        })
        .collect();
    assert_eq!(crossing.len(), 1);
    let c = crossing[0];
    assert!(left.contains(&c.producer.unwrap().node));
    assert_eq!(c.consumer.unwrap().role, PortRole::Ctl);

    let kinds_in = |set: &BTreeSet<usize>, k: OperatorKind| set.iter().filter(|i| g.nodes[**i].kind == k).count();
    assert_eq!(kinds_in(&left, OperatorKind::IfGt), 1);
    assert_eq!(kinds_in(&left, OperatorKind::Branch), 1);
    assert_eq!(kinds_in(&left, OperatorKind::Add), 1);
    assert_eq!(kinds_in(&right, OperatorKind::Add), 1);
    assert_eq!(kinds_in(&right, OperatorKind::IfGt), 0);

    // Both adds sit on a directed cycle (loop index and running sum).
    for add in g.nodes.iter().enumerate().filter(|(_, n)| n.kind == OperatorKind::Add).map(|(i, _)| i) {
        assert!(on_cycle(&g, add), "{}", g.nodes[add].name);
    }
}

fn on_cycle(g: &DataflowGraph, start: usize) -> bool {
    let mut seen = vec![false; g.nodes.len()];
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        for e in &g.edges {
            if let (Some(p), Some(c)) = (e.producer, e.consumer) {
                if p.node == n {
                    if c.node == start {
                        return true;
                    }
                    if !seen[c.node] {
                        seen[c.node] = true;
                        stack.push(c.node);
                    }
                }
            }
        }
    }
    false
}

#[test]
fn every_benchmark_program_validates() {
    for name in BenchName::ALL {
        let g = parse_program(name.source()).unwrap();
        let report = validate_graph(&g);
        assert!(report.is_ok(), "{name}: {report}");
    }
}

#[test]
fn netlist_matches_golden_file() {
    let text = emit_netlist(&fib(), Width::DEFAULT).unwrap();
    assert!(text == GOLDEN, "emitted netlist differs from tests/golden/fibonacci.vhd");
}

#[test]
fn netlist_counts_cross_check_stats() {
    let g = fib();
    let stats = graph_stats(&g);
    let counts = scan_netlist(GOLDEN);
    assert_eq!(counts.instances, stats.node_count);
    assert_eq!(counts.internal_bundles, stats.internal_arc_count);
    assert_eq!(counts.external_bundles, stats.inputs.len() + stats.outputs.len());
    for e in &g.edges {
        let l = e.label.as_str();
        let declared = GOLDEN.matches(&format!("{l}_data :")).count();
        assert_eq!(declared, 1, "{l}");
    }
}
