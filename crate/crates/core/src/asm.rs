// SPDX-License-Identifier: Apache-2.0

//! Assembler frontend: `.dfasm` programs and JSON run manifests.
//!
//! A program is a sequence of node statements:
//!
//! ```text
//! statement := [INT '.'] IDENT label (',' label)* ';'
//! ```
//!
//! Arguments name arcs in the operator's fixed port order:
//!
//! | mnemonic                                 | arguments       |
//! |------------------------------------------|-----------------|
//! | `copy`                                   | `a, z1, z2`     |
//! | `add` `sub` `mul` `div` `and` `or`       | `a, b, z`       |
//! | `not`                                    | `a, z`          |
//! | `ndmerge`                                | `a, b, z`       |
//! | `dmerge`                                 | `a, b, ctl, z`  |
//! | `branch`                                 | `a, ctl, t, f`  |
//! | `gtdecider` `ge..` `lt..` `le..` `eq..` `df..` | `a, b, z` (z = a OP b) |
//!
//! `--` starts a comment that runs to the end of the line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{validate_graph, ArcLabel, DataflowGraph, GraphBuilder, OperatorKind, ValidationReport};
use crate::ops::{Token, Width};

pub const DEFAULT_MAX_TICKS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: expected {expected}, found {found}")]
    Syntax { line: usize, column: usize, expected: &'static str, found: String },
    #[error("line {line}, column {column}: unknown mnemonic `{mnemonic}`")]
    UnknownMnemonic { line: usize, column: usize, mnemonic: String },
    #[error("line {line}, column {column}: `{mnemonic}` takes {expected} arguments, found {found}")]
    Arity { line: usize, column: usize, mnemonic: String, expected: usize, found: usize },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::UnknownMnemonic { line, .. }
            | ParseError::Arity { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    /// The optional `N.` prefix; informational only.
    pub line_number: Option<u64>,
    pub kind: OperatorKind,
    pub mnemonic: String,
    pub args: Vec<ArcLabel>,
    /// Source line of the mnemonic.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(u64),
    Ident(String),
    Dot,
    Comma,
    Semi,
    Other(char),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Other(c) => format!("`{c}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Lexeme {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(source: &str) -> Vec<Lexeme> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c.is_ascii_digit() {
            let begin = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            col += i - begin;
            // an all-digit run too long for u64 is still a syntax error downstream
            text.parse().map(Tok::Int).unwrap_or(Tok::Other(c))
        } else if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - begin;
            Tok::Ident(chars[begin..i].iter().collect())
        } else {
            i += 1;
            col += 1;
            match c {
                '.' => Tok::Dot,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                other => Tok::Other(other),
            }
        };
        out.push(Lexeme { tok, line: start.0, column: start.1 });
    }
    out.push(Lexeme { tok: Tok::Eof, line, column: col });
    out
}

struct Parser {
    lexemes: Vec<Lexeme>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Lexeme {
        &self.lexemes[self.pos]
    }

    fn bump(&mut self) -> Lexeme {
        let lx = self.lexemes[self.pos].clone();
        if self.pos + 1 < self.lexemes.len() {
            self.pos += 1;
        }
        lx
    }

    fn error(&self, expected: &'static str) -> ParseError {
        let lx = self.peek();
        ParseError::Syntax { line: lx.line, column: lx.column, expected, found: lx.tok.describe() }
    }

    fn expect_ident(&mut self, expected: &'static str) -> Result<(String, usize, usize), ParseError> {
        match &self.peek().tok {
            Tok::Ident(_) => {
                let lx = self.bump();
                let Tok::Ident(s) = lx.tok else { unreachable!() };
                Ok((s, lx.line, lx.column))
            }
            _ => Err(self.error(expected)),
        }
    }

    fn statement(&mut self) -> Result<Statement, ParseError> {
        let mut line_number = None;
        if let Tok::Int(n) = self.peek().tok {
            self.bump();
            if self.peek().tok != Tok::Dot {
                return Err(self.error("`.` after line number"));
            }
            self.bump();
            line_number = Some(n);
        }
        let (mnemonic, line, column) = self.expect_ident("mnemonic")?;
        let kind = OperatorKind::from_mnemonic(&mnemonic).ok_or_else(|| ParseError::UnknownMnemonic {
            line,
            column,
            mnemonic: mnemonic.clone(),
        })?;
        let mut args = Vec::new();
        loop {
            let (label, _, _) = self.expect_ident("arc label")?;
            args.push(ArcLabel::new(label).expect("lexer only yields identifiers"));
            match self.peek().tok {
                Tok::Comma => {
                    self.bump();
                }
                Tok::Semi => {
                    self.bump();
                    break;
                }
                _ => return Err(self.error("`,` or `;`")),
            }
        }
        if args.len() != kind.arity() {
            return Err(ParseError::Arity { line, column, mnemonic, expected: kind.arity(), found: args.len() });
        }
        Ok(Statement { line_number, kind, mnemonic, args, line })
    }
}

/// Parses program text into its statements without building a graph.
pub fn parse_statements(source: &str) -> Result<Vec<Statement>, ParseError> {
    let mut parser = Parser { lexemes: lex(source), pos: 0 };
    let mut statements = Vec::new();
    while parser.peek().tok != Tok::Eof {
        statements.push(parser.statement()?);
    }
    Ok(statements)
}

/// Instance name of the `ordinal`-th statement (1-based), e.g. `add_9`.
pub fn instance_name(kind: OperatorKind, ordinal: usize) -> String {
    format!("{}_{}", kind.mnemonic(), ordinal)
}

pub fn graph_from_statements(statements: &[Statement]) -> DataflowGraph {
    let mut builder = GraphBuilder::new();
    for (i, st) in statements.iter().enumerate() {
        builder.node(st.kind, instance_name(st.kind, i + 1), &st.args);
    }
    builder.build()
}

/// Parses a program into a graph: one node per statement, one arc per label.
pub fn parse_program(source: &str) -> Result<DataflowGraph, ParseError> {
    Ok(graph_from_statements(&parse_statements(source)?))
}

/// Renders a graph back to assembler text, one statement per node.
pub fn print_program(graph: &DataflowGraph) -> String {
    let wiring = graph.wiring();
    let mut out = String::new();
    for (idx, node) in graph.nodes.iter().enumerate() {
        let args: Vec<&str> =
            wiring.arguments(idx).map(|e| e.map(|e| graph.edges[e].label.as_str()).unwrap_or("_")).collect();
        let _ = writeln!(out, "{} {};", node.kind.mnemonic(), args.join(","));
    }
    out
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed manifest: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid width: {0}")]
    Width(String),
    #[error("max_ticks must be at least 1")]
    MaxTicks,
    #[error("invalid label in manifest: {0}")]
    Label(#[from] crate::graph::LabelError),
}

/// Run parameters: token streams for graph inputs and expected output counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub width: Width,
    pub max_ticks: u64,
    #[serde(rename = "inputs")]
    pub bindings: BTreeMap<ArcLabel, Vec<i64>>,
    pub results: BTreeMap<ArcLabel, u64>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            width: Width::DEFAULT,
            max_ticks: DEFAULT_MAX_TICKS,
            bindings: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    width: Option<serde_json::Value>,
    max_ticks: Option<u64>,
    #[serde(default)]
    inputs: BTreeMap<String, Vec<i64>>,
    #[serde(default)]
    results: BTreeMap<String, u64>,
}

pub fn parse_manifest(source: &str) -> Result<Manifest, ManifestError> {
    let raw: RawManifest = serde_json::from_str(source)?;
    let width = match raw.width {
        None => Width::DEFAULT,
        Some(v) => {
            let bits = v.as_i64().ok_or_else(|| ManifestError::Width(format!("{v} is not an integer")))?;
            Width::new(bits).map_err(|e| ManifestError::Width(e.to_string()))?
        }
    };
    let max_ticks = raw.max_ticks.unwrap_or(DEFAULT_MAX_TICKS);
    if max_ticks == 0 {
        return Err(ManifestError::MaxTicks);
    }
    let mut bindings = BTreeMap::new();
    for (label, values) in raw.inputs {
        bindings.insert(ArcLabel::new(label)?, values);
    }
    let mut results = BTreeMap::new();
    for (label, count) in raw.results {
        results.insert(ArcLabel::new(label)?, count);
    }
    Ok(Manifest { width, max_ticks, bindings, results })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindError {
    #[error("graph is not well formed:\n{0}")]
    InvalidGraph(ValidationReport),
    #[error("manifest binds `{0}`, which is not a graph input")]
    UnknownInput(String),
    #[error("manifest expects results on `{0}`, which is not a graph output")]
    UnknownOutput(String),
    #[error("value {value} on `{label}` does not fit in {width} bits")]
    ValueOutOfRange { label: String, value: i64, width: Width },
}

/// A validated graph with every input stream and output expectation resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundProgram {
    pub graph: DataflowGraph,
    pub width: Width,
    pub max_ticks: u64,
    /// One stream per graph input, in `graph.inputs` order.
    pub injections: Vec<(ArcLabel, Vec<Token>)>,
    /// Expected token count per graph output, in `graph.outputs` order.
    /// Zero means "collect whatever arrives".
    pub expected: Vec<(ArcLabel, u64)>,
}

pub fn bind_manifest(graph: &DataflowGraph, manifest: &Manifest) -> Result<BoundProgram, BindError> {
    let report = validate_graph(graph);
    if !report.is_ok() {
        return Err(BindError::InvalidGraph(report));
    }
    for label in manifest.bindings.keys() {
        if !graph.inputs.contains(label) {
            return Err(BindError::UnknownInput(label.to_string()));
        }
    }
    for label in manifest.results.keys() {
        if !graph.outputs.contains(label) {
            return Err(BindError::UnknownOutput(label.to_string()));
        }
    }
    let width = manifest.width;
    let mut injections = Vec::with_capacity(graph.inputs.len());
    for label in &graph.inputs {
        let values = manifest.bindings.get(label).map(Vec::as_slice).unwrap_or(&[]);
        let tokens = values
            .iter()
            .map(|&value| {
                width.encode(value).ok_or_else(|| BindError::ValueOutOfRange { label: label.to_string(), value, width })
            })
            .collect::<Result<Vec<_>, _>>()?;
        injections.push((label.clone(), tokens));
    }
    let expected = graph.outputs.iter().map(|l| (l.clone(), manifest.results.get(l).copied().unwrap_or(0))).collect();
    Ok(BoundProgram { graph: graph.clone(), width, max_ticks: manifest.max_ticks, injections, expected })
}
