// SPDX-License-Identifier: Apache-2.0

//! Dataflow-graph intermediate representation and structural validation.
//!
//! A graph is a list of operator instances plus a list of arcs. Each arc is a
//! single-producer single-consumer connection; an arc without a producer is a
//! graph input and an arc without a consumer is a graph output. The
//! representation deliberately admits malformed graphs (a label used twice, a
//! port left open) so that [`validate_graph`] can report them as data.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Role of a port on an operator instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortRole {
    A,
    B,
    Ctl,
    Z,
    T,
    F,
    Z1,
    Z2,
}

impl PortRole {
    pub fn as_str(self) -> &'static str {
        match self {
            PortRole::A => "a",
            PortRole::B => "b",
            PortRole::Ctl => "ctl",
            PortRole::Z => "z",
            PortRole::T => "t",
            PortRole::F => "f",
            PortRole::Z1 => "z1",
            PortRole::Z2 => "z2",
        }
    }
}

impl fmt::Display for PortRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Hardware shape of an operator component: input and output bus counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Two input buses, one output bus (primitives, deciders, NDMerge, Not).
    TwoToOne,
    /// Three input buses, one output bus (DMerge).
    ThreeToOne,
    /// Two input buses, two output buses (Branch, Copy).
    TwoToTwo,
}

/// The operator set of the static dataflow machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    Copy,
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Not,
    IfGt,
    IfGe,
    IfLt,
    IfLe,
    IfEq,
    IfDf,
    DMerge,
    NDMerge,
    Branch,
}

const IN_A: &[PortRole] = &[PortRole::A];
const IN_AB: &[PortRole] = &[PortRole::A, PortRole::B];
const IN_AB_CTL: &[PortRole] = &[PortRole::A, PortRole::B, PortRole::Ctl];
const IN_A_CTL: &[PortRole] = &[PortRole::A, PortRole::Ctl];
const OUT_Z: &[PortRole] = &[PortRole::Z];
const OUT_Z1_Z2: &[PortRole] = &[PortRole::Z1, PortRole::Z2];
const OUT_T_F: &[PortRole] = &[PortRole::T, PortRole::F];

impl OperatorKind {
    pub const ALL: [OperatorKind; 17] = [
        OperatorKind::Copy,
        OperatorKind::Add,
        OperatorKind::Sub,
        OperatorKind::Mul,
        OperatorKind::Div,
        OperatorKind::And,
        OperatorKind::Or,
        OperatorKind::Not,
        OperatorKind::IfGt,
        OperatorKind::IfGe,
        OperatorKind::IfLt,
        OperatorKind::IfLe,
        OperatorKind::IfEq,
        OperatorKind::IfDf,
        OperatorKind::DMerge,
        OperatorKind::NDMerge,
        OperatorKind::Branch,
    ];

    /// Input ports in assembler argument order.
    pub fn inputs(self) -> &'static [PortRole] {
        use OperatorKind::*;
        match self {
            Copy | Not => IN_A,
            DMerge => IN_AB_CTL,
            Branch => IN_A_CTL,
            _ => IN_AB,
        }
    }

    /// Output ports in assembler argument order.
    pub fn outputs(self) -> &'static [PortRole] {
        match self {
            OperatorKind::Copy => OUT_Z1_Z2,
            OperatorKind::Branch => OUT_T_F,
            _ => OUT_Z,
        }
    }

    /// All ports in assembler argument order: inputs first, then outputs.
    pub fn signature(self) -> impl Iterator<Item = PortRole> {
        self.inputs().iter().chain(self.outputs()).copied()
    }

    pub fn arity(self) -> usize {
        self.inputs().len() + self.outputs().len()
    }

    pub fn input_slot(self, role: PortRole) -> Option<usize> {
        self.inputs().iter().position(|r| *r == role)
    }

    pub fn output_slot(self, role: PortRole) -> Option<usize> {
        self.outputs().iter().position(|r| *r == role)
    }

    pub fn has_port(self, role: PortRole) -> bool {
        self.input_slot(role).is_some() || self.output_slot(role).is_some()
    }

    pub fn is_decider(self) -> bool {
        use OperatorKind::*;
        matches!(self, IfGt | IfGe | IfLt | IfLe | IfEq | IfDf)
    }

    /// Two-input operators evaluated by [`crate::ops::eval_primitive`].
    pub fn is_binary_primitive(self) -> bool {
        use OperatorKind::*;
        matches!(self, Add | Sub | Mul | Div | And | Or) || self.is_decider()
    }

    pub fn shape(self) -> Shape {
        match self {
            OperatorKind::DMerge => Shape::ThreeToOne,
            OperatorKind::Branch | OperatorKind::Copy => Shape::TwoToTwo,
            _ => Shape::TwoToOne,
        }
    }

    /// Canonical assembler mnemonic.
    pub fn mnemonic(self) -> &'static str {
        use OperatorKind::*;
        match self {
            Copy => "copy",
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Div => "div",
            And => "and",
            Or => "or",
            Not => "not",
            IfGt => "gtdecider",
            IfGe => "gedecider",
            IfLt => "ltdecider",
            IfLe => "ledecider",
            IfEq => "eqdecider",
            IfDf => "dfdecider",
            DMerge => "dmerge",
            NDMerge => "ndmerge",
            Branch => "branch",
        }
    }

    /// Accepts the canonical mnemonics plus the `ifgt`-style relational names.
    pub fn from_mnemonic(text: &str) -> Option<Self> {
        use OperatorKind::*;
        let kind = match text.to_ascii_lowercase().as_str() {
            "copy" => Copy,
            "add" => Add,
            "sub" => Sub,
            "mul" => Mul,
            "div" => Div,
            "and" => And,
            "or" => Or,
            "not" => Not,
            "gtdecider" | "ifgt" => IfGt,
            "gedecider" | "ifge" => IfGe,
            "ltdecider" | "iflt" => IfLt,
            "ledecider" | "ifle" => IfLe,
            "eqdecider" | "ifeq" => IfEq,
            "dfdecider" | "ifdf" => IfDf,
            "dmerge" => DMerge,
            "ndmerge" => NDMerge,
            "branch" => Branch,
            _ => return None,
        };
        Some(kind)
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid arc label {0:?}: expected [A-Za-z_][A-Za-z0-9_]*")]
pub struct LabelError(pub String);

/// Name of an arc. Always a nonempty identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ArcLabel(String);

impl ArcLabel {
    pub fn new(name: impl Into<String>) -> Result<Self, LabelError> {
        let name = name.into();
        if is_identifier(&name) {
            Ok(ArcLabel(name))
        } else {
            Err(LabelError(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TryFrom<String> for ArcLabel {
    type Error = LabelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        ArcLabel::new(value)
    }
}

impl From<ArcLabel> for String {
    fn from(label: ArcLabel) -> String {
        label.0
    }
}

impl fmt::Display for ArcLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for ArcLabel {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// A port on a specific node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortId {
    pub node: usize,
    pub role: PortRole,
}

impl PortId {
    pub fn new(node: usize, role: PortRole) -> Self {
        PortId { node, role }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: OperatorKind,
    pub name: String,
}

/// One arc. `producer == None` marks a graph input, `consumer == None` a graph output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub label: ArcLabel,
    pub producer: Option<PortId>,
    pub consumer: Option<PortId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DataflowGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub inputs: Vec<ArcLabel>,
    pub outputs: Vec<ArcLabel>,
}

impl DataflowGraph {
    pub fn edge_by_label(&self, label: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.label.as_str() == label)
    }

    pub fn node_by_name(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Port-to-edge index. Meaningful for validated graphs; on malformed
    /// graphs the first matching edge wins and missing ports map to `None`.
    pub fn wiring(&self) -> Wiring {
        let mut node_inputs: Vec<Vec<Option<usize>>> =
            self.nodes.iter().map(|n| vec![None; n.kind.inputs().len()]).collect();
        let mut node_outputs: Vec<Vec<Option<usize>>> =
            self.nodes.iter().map(|n| vec![None; n.kind.outputs().len()]).collect();
        for (ei, edge) in self.edges.iter().enumerate() {
            if let Some(p) = edge.producer {
                if let Some(node) = self.nodes.get(p.node) {
                    if let Some(slot) = node.kind.output_slot(p.role) {
                        node_outputs[p.node][slot].get_or_insert(ei);
                    }
                }
            }
            if let Some(c) = edge.consumer {
                if let Some(node) = self.nodes.get(c.node) {
                    if let Some(slot) = node.kind.input_slot(c.role) {
                        node_inputs[c.node][slot].get_or_insert(ei);
                    }
                }
            }
        }
        Wiring { node_inputs, node_outputs }
    }
}

/// Per-node edge indices, in the kind's input and output slot order.
#[derive(Debug, Clone)]
pub struct Wiring {
    pub node_inputs: Vec<Vec<Option<usize>>>,
    pub node_outputs: Vec<Vec<Option<usize>>>,
}

impl Wiring {
    /// Edges in assembler argument order for one node.
    pub fn arguments(&self, node: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        self.node_inputs[node].iter().chain(&self.node_outputs[node]).copied()
    }
}

/// Assembles a graph from node statements whose ports are named by label.
///
/// Labels become arcs in first-use order. A label with no producing port is a
/// graph input; one with no consuming port is a graph output. Labels used by
/// several producers or consumers produce one edge per extra use so that
/// validation can report them.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    uses: Vec<(ArcLabel, PortId)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node whose ports, in argument order, connect to `labels`.
    /// Extra labels are ignored and missing ones leave ports open.
    pub fn node(&mut self, kind: OperatorKind, name: impl Into<String>, labels: &[ArcLabel]) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node { kind, name: name.into() });
        for (role, label) in kind.signature().zip(labels) {
            self.uses.push((label.clone(), PortId::new(idx, role)));
        }
        idx
    }

    pub fn build(self) -> DataflowGraph {
        let mut order: Vec<ArcLabel> = Vec::new();
        let mut ends: HashMap<ArcLabel, (Vec<PortId>, Vec<PortId>)> = HashMap::new();
        for (label, port) in self.uses {
            let entry = ends.entry(label.clone()).or_insert_with(|| {
                order.push(label.clone());
                (Vec::new(), Vec::new())
            });
            let kind = self.nodes[port.node].kind;
            if kind.output_slot(port.role).is_some() {
                entry.0.push(port);
            } else {
                entry.1.push(port);
            }
        }
        let mut graph = DataflowGraph { nodes: self.nodes, ..Default::default() };
        for label in order {
            let (producers, consumers) = &ends[&label];
            if producers.is_empty() {
                graph.inputs.push(label.clone());
            }
            if consumers.is_empty() {
                graph.outputs.push(label.clone());
            }
            let count = producers.len().max(consumers.len()).max(1);
            for i in 0..count {
                graph.edges.push(Edge {
                    label: label.clone(),
                    producer: producers.get(i).copied(),
                    consumer: consumers.get(i).copied(),
                });
            }
        }
        graph
    }
}

/// Structural rule violated by a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    UnconnectedPort,
    PortConnectedTwice,
    IllegalPort,
    UnknownNode,
    DuplicateNodeName,
    MultipleProducers,
    MultipleConsumers,
    DuplicateLabel,
    DanglingArc,
    UndeclaredInput,
    UndeclaredOutput,
    InputAndOutput,
    BadInputDeclaration,
    BadOutputDeclaration,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::UnconnectedPort => "unconnected port",
            Rule::PortConnectedTwice => "port connected twice",
            Rule::IllegalPort => "illegal port",
            Rule::UnknownNode => "unknown node",
            Rule::DuplicateNodeName => "duplicate node name",
            Rule::MultipleProducers => "multiple producers",
            Rule::MultipleConsumers => "multiple consumers",
            Rule::DuplicateLabel => "duplicate label",
            Rule::DanglingArc => "dangling arc",
            Rule::UndeclaredInput => "undeclared input",
            Rule::UndeclaredOutput => "undeclared output",
            Rule::InputAndOutput => "label is both input and output",
            Rule::BadInputDeclaration => "bad input declaration",
            Rule::BadOutputDeclaration => "bad output declaration",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub rule: Rule,
    /// Node instance name or arc label the diagnostic is about.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.rule, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.diagnostics.iter().any(|d| d.rule == rule)
    }

    fn push(&mut self, rule: Rule, subject: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic { rule, subject: subject.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Checks every structural rule of the IR and reports all violations.
pub fn validate_graph(graph: &DataflowGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut names: HashMap<&str, usize> = HashMap::new();
    for node in &graph.nodes {
        *names.entry(node.name.as_str()).or_default() += 1;
    }
    for node in &graph.nodes {
        if names.get(node.name.as_str()).copied().unwrap_or(0) > 1 {
            report.push(Rule::DuplicateNodeName, &node.name, "instance name used by more than one node");
            names.insert(node.name.as_str(), 0);
        }
    }

    // port -> number of edges attached
    let mut attached: HashMap<PortId, usize> = HashMap::new();
    for edge in &graph.edges {
        for (port, want_output) in [(edge.producer, true), (edge.consumer, false)] {
            let Some(port) = port else { continue };
            let Some(node) = graph.nodes.get(port.node) else {
                report.push(Rule::UnknownNode, edge.label.as_str(), format!("refers to node #{}", port.node));
                continue;
            };
            let legal = if want_output {
                node.kind.output_slot(port.role).is_some()
            } else {
                node.kind.input_slot(port.role).is_some()
            };
            if !legal {
                let side = if want_output { "output" } else { "input" };
                report.push(
                    Rule::IllegalPort,
                    &node.name,
                    format!("{} has no {side} port `{}` (arc {})", node.kind, port.role, edge.label),
                );
                continue;
            }
            *attached.entry(port).or_default() += 1;
        }
    }
    for (idx, node) in graph.nodes.iter().enumerate() {
        for role in node.kind.signature() {
            match attached.get(&PortId::new(idx, role)).copied().unwrap_or(0) {
                0 => report.push(Rule::UnconnectedPort, &node.name, format!("port `{role}` is not connected")),
                1 => {}
                n => {
                    report.push(Rule::PortConnectedTwice, &node.name, format!("port `{role}` is connected to {n} arcs"))
                }
            }
        }
    }

    let mut by_label: BTreeMap<&str, Vec<&Edge>> = BTreeMap::new();
    for edge in &graph.edges {
        by_label.entry(edge.label.as_str()).or_default().push(edge);
    }
    for (label, edges) in &by_label {
        if edges.len() > 1 {
            let producers = edges.iter().filter(|e| e.producer.is_some()).count();
            let consumers = edges.iter().filter(|e| e.consumer.is_some()).count();
            if producers > 1 {
                report.push(Rule::MultipleProducers, *label, format!("{producers} ports write this arc"));
            }
            if consumers > 1 {
                report.push(Rule::MultipleConsumers, *label, format!("{consumers} ports read this arc"));
            }
            if producers <= 1 && consumers <= 1 {
                report.push(Rule::DuplicateLabel, *label, "label used by more than one arc");
            }
        }
        for edge in edges {
            if edge.producer.is_none() && edge.consumer.is_none() {
                report.push(Rule::DanglingArc, *label, "arc has neither producer nor consumer");
            }
        }
    }

    let is_input = |l: &str| graph.inputs.iter().any(|i| i.as_str() == l);
    let is_output = |l: &str| graph.outputs.iter().any(|o| o.as_str() == l);
    for (label, edges) in &by_label {
        let produced = edges.iter().any(|e| e.producer.is_some());
        let consumed = edges.iter().any(|e| e.consumer.is_some());
        if !produced && consumed && !is_input(label) {
            report.push(Rule::UndeclaredInput, *label, "arc has no producer but is not a graph input");
        }
        if produced && !consumed && !is_output(label) {
            report.push(Rule::UndeclaredOutput, *label, "arc has no consumer but is not a graph output");
        }
    }
    for label in &graph.inputs {
        if is_output(label.as_str()) {
            report.push(Rule::InputAndOutput, label.as_str(), "declared as both input and output");
        }
        match by_label.get(label.as_str()) {
            Some(edges) if edges.iter().all(|e| e.producer.is_none()) => {}
            Some(_) => report.push(Rule::BadInputDeclaration, label.as_str(), "graph input is driven by a node"),
            None => report.push(Rule::BadInputDeclaration, label.as_str(), "graph input has no arc"),
        }
    }
    for label in &graph.outputs {
        match by_label.get(label.as_str()) {
            Some(edges) if edges.iter().all(|e| e.consumer.is_none()) => {}
            Some(_) => report.push(Rule::BadOutputDeclaration, label.as_str(), "graph output is read by a node"),
            None => report.push(Rule::BadOutputDeclaration, label.as_str(), "graph output has no arc"),
        }
    }
    report
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub arc_count: usize,
    /// Internal arcs: both producer and consumer are nodes.
    pub internal_arc_count: usize,
    pub kinds: BTreeMap<String, usize>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn graph_stats(graph: &DataflowGraph) -> GraphStats {
    let mut kinds = BTreeMap::new();
    for node in &graph.nodes {
        *kinds.entry(node.kind.mnemonic().to_string()).or_insert(0) += 1;
    }
    GraphStats {
        node_count: graph.nodes.len(),
        arc_count: graph.edges.len(),
        internal_arc_count: graph.edges.iter().filter(|e| e.producer.is_some() && e.consumer.is_some()).count(),
        kinds,
        inputs: graph.inputs.iter().map(|l| l.to_string()).collect(),
        outputs: graph.outputs.iter().map(|l| l.to_string()).collect(),
    }
}
