// SPDX-License-Identifier: Apache-2.0

//! The six benchmark programs, their run manifests and scalar reference
//! oracles.
//!
//! Vectors travel as token streams on one input port. Loop bounds and
//! constant operands are streamed too, one token per use, and are derived
//! only from the input's length, never from its values.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{bind_manifest, parse_program, BindError, Manifest, ParseError};
use crate::graph::ArcLabel;
use crate::ops::{Token, Width};
use crate::sim::{run, SimConfig, SimResult, Termination, TraceEvent};

pub const FIBONACCI_SRC: &str = include_str!("../programs/fibonacci.dfasm");
pub const MAX_VECTOR_SRC: &str = include_str!("../programs/max_vector.dfasm");
pub const DOT_PROD_SRC: &str = include_str!("../programs/dot_prod.dfasm");
pub const VECTOR_SUM_SRC: &str = include_str!("../programs/vector_sum.dfasm");
pub const BUBBLE_SORT_SRC: &str = include_str!("../programs/bubble_sort.dfasm");
pub const POP_COUNT_SRC: &str = include_str!("../programs/pop_count.dfasm");

/// Number of compare-exchange passes in the bubble sort pipeline.
pub const SORT_CELLS: usize = 16;
/// Longest vector accepted by the vector benchmarks.
pub const MAX_VECTOR_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchName {
    Fibonacci,
    MaxVector,
    DotProd,
    VectorSum,
    BubbleSort,
    PopCount,
}

impl BenchName {
    pub const ALL: [BenchName; 6] = [
        BenchName::Fibonacci,
        BenchName::MaxVector,
        BenchName::DotProd,
        BenchName::VectorSum,
        BenchName::BubbleSort,
        BenchName::PopCount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchName::Fibonacci => "fibonacci",
            BenchName::MaxVector => "max_vector",
            BenchName::DotProd => "dot_prod",
            BenchName::VectorSum => "vector_sum",
            BenchName::BubbleSort => "bubble_sort",
            BenchName::PopCount => "pop_count",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            BenchName::Fibonacci => FIBONACCI_SRC,
            BenchName::MaxVector => MAX_VECTOR_SRC,
            BenchName::DotProd => DOT_PROD_SRC,
            BenchName::VectorSum => VECTOR_SUM_SRC,
            BenchName::BubbleSort => BUBBLE_SORT_SRC,
            BenchName::PopCount => POP_COUNT_SRC,
        }
    }

    pub fn is_vector(self) -> bool {
        !matches!(self, BenchName::Fibonacci | BenchName::PopCount)
    }
}

impl fmt::Display for BenchName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchName {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchName::ALL.into_iter().find(|b| b.as_str() == s).ok_or_else(|| BenchError::Unknown(s.to_string()))
    }
}

/// Problem input. Values are signed integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchInput {
    Scalar(i64),
    Vector(Vec<i64>),
    Pair(Vec<i64>, Vec<i64>),
}

impl fmt::Display for BenchInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchInput::Scalar(n) => write!(f, "{n}"),
            BenchInput::Vector(v) => write!(f, "{v:?}"),
            BenchInput::Pair(x, y) => write!(f, "{x:?} . {y:?}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}`")]
    Unknown(String),
    #[error("input not admissible for {bench}: {reason}")]
    Inadmissible { bench: BenchName, reason: String },
    #[error("benchmark program failed to parse: {0}")]
    Parse(#[from] ParseError),
    #[error("benchmark program failed to bind: {0}")]
    Bind(#[from] BindError),
}

/// Outcome of one benchmark run against its oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchReport {
    pub name: BenchName,
    pub input: BenchInput,
    pub outputs: Vec<i64>,
    pub oracle: Vec<i64>,
    #[serde(rename = "match")]
    pub matched: bool,
    pub terminated: Termination,
    pub ticks: u64,
    pub fire_counts: BTreeMap<String, u64>,
}

/// Scalar reference implementations, written directly from the problem
/// definitions with wrap-around at the bus width.
pub mod oracle {
    fn wrap(value: i128, bits: u32) -> i64 {
        let m = 1i128 << bits;
        let mut v = value.rem_euclid(m);
        if v >= m / 2 {
            v -= m;
        }
        v as i64
    }

    /// Literal transcription of the iterative Fibonacci loop, with the loop
    /// bound taken inclusively (`for i = 0 to n`).
    pub fn fibonacci(n: i64, bits: u32) -> i64 {
        let mut first: i128 = 0;
        let mut second: i128 = 1;
        let mut tmp: i128 = 0;
        let mut i = 0;
        while i <= n {
            tmp = wrap(first + second, bits) as i128;
            first = second;
            second = tmp;
            i += 1;
        }
        tmp as i64
    }

    /// Largest element; the empty vector yields the smallest signed value.
    pub fn max_vector(x: &[i64], bits: u32) -> i64 {
        x.iter().map(|v| wrap(*v as i128, bits)).max().unwrap_or(-(1i64 << (bits - 1)))
    }

    pub fn dot_prod(x: &[i64], y: &[i64], bits: u32) -> i64 {
        let mut acc: i128 = 0;
        for (a, b) in x.iter().zip(y) {
            acc = wrap(acc + (*a as i128) * (*b as i128), bits) as i128;
        }
        acc as i64
    }

    pub fn vector_sum(x: &[i64], bits: u32) -> i64 {
        let mut acc: i128 = 0;
        for v in x {
            acc = wrap(acc + *v as i128, bits) as i128;
        }
        acc as i64
    }

    pub fn bubble_sort(x: &[i64], bits: u32) -> Vec<i64> {
        let mut v: Vec<i64> = x.iter().map(|e| wrap(*e as i128, bits)).collect();
        let n = v.len();
        for pass in 0..n {
            for j in 0..n.saturating_sub(pass + 1) {
                if v[j] > v[j + 1] {
                    v.swap(j, j + 1);
                }
            }
        }
        v
    }

    /// Set bits in the `bits`-wide two's-complement encoding of `word`.
    pub fn pop_count(word: i64, bits: u32) -> i64 {
        let m = (1u64 << bits) - 1;
        ((word as u64) & m).count_ones() as i64
    }
}

/// Reference outputs for `input`, computed without the graph or engine.
pub fn oracle(name: BenchName, input: &BenchInput, width: Width) -> Result<Vec<i64>, BenchError> {
    check_input(name, input, width)?;
    let bits = width.bits();
    Ok(match (name, input) {
        (BenchName::Fibonacci, BenchInput::Scalar(n)) => vec![oracle::fibonacci(*n, bits)],
        (BenchName::PopCount, BenchInput::Scalar(n)) => vec![oracle::pop_count(*n, bits)],
        (BenchName::MaxVector, BenchInput::Vector(x)) => vec![oracle::max_vector(x, bits)],
        (BenchName::VectorSum, BenchInput::Vector(x)) => vec![oracle::vector_sum(x, bits)],
        (BenchName::BubbleSort, BenchInput::Vector(x)) => oracle::bubble_sort(x, bits),
        (BenchName::DotProd, BenchInput::Pair(x, y)) => vec![oracle::dot_prod(x, y, bits)],
        _ => unreachable!("check_input rejects mismatched shapes"),
    })
}

fn inadmissible(bench: BenchName, reason: impl Into<String>) -> BenchError {
    BenchError::Inadmissible { bench, reason: reason.into() }
}

fn check_input(name: BenchName, input: &BenchInput, width: Width) -> Result<(), BenchError> {
    let fits = |v: &[i64]| v.iter().all(|x| width.encode(*x).is_some());
    let vector_ok = |v: &[i64]| {
        if v.is_empty() || v.len() > MAX_VECTOR_LEN {
            Err(inadmissible(name, format!("vector length must be 1..={MAX_VECTOR_LEN}, got {}", v.len())))
        } else if !fits(v) {
            Err(inadmissible(name, format!("values must fit in {width} bits")))
        } else {
            Ok(())
        }
    };
    match (name, input) {
        (BenchName::Fibonacci, BenchInput::Scalar(n)) => {
            if *n < 0 || *n >= width.max_signed() {
                Err(inadmissible(name, format!("n must be in 0..{}", width.max_signed())))
            } else {
                Ok(())
            }
        }
        (BenchName::PopCount, BenchInput::Scalar(n)) => {
            if fits(&[*n]) {
                Ok(())
            } else {
                Err(inadmissible(name, format!("word must fit in {width} bits")))
            }
        }
        (BenchName::MaxVector | BenchName::VectorSum | BenchName::BubbleSort, BenchInput::Vector(x)) => {
            if name == BenchName::BubbleSort && width.bits() < 2 {
                return Err(inadmissible(name, "needs at least 2 bits"));
            }
            vector_ok(x)
        }
        (BenchName::DotProd, BenchInput::Pair(x, y)) => {
            vector_ok(x)?;
            vector_ok(y)?;
            if x.len() != y.len() {
                return Err(inadmissible(name, "vectors differ in length"));
            }
            Ok(())
        }
        _ => Err(inadmissible(name, format!("wrong input shape: {input}"))),
    }
}

fn label(name: &str) -> ArcLabel {
    ArcLabel::new(name).expect("benchmark labels are identifiers")
}

/// Counted-loop control streams: `iterations` true controls then one false.
fn loop_bindings(m: &mut Manifest, start: i64, bound: i64, iterations: usize) {
    m.bindings.insert(label("i0"), vec![start]);
    m.bindings.insert(label("len"), vec![bound; iterations + 1]);
    m.bindings.insert(label("one"), vec![1; iterations]);
    m.results.insert(label("iend"), 1);
}

/// Run manifest for `input`. The input must be admissible.
pub fn manifest(name: BenchName, input: &BenchInput, width: Width) -> Result<Manifest, BenchError> {
    check_input(name, input, width)?;
    let mut m = Manifest { width, ..Manifest::default() };
    let mut set = |l: &str, v: Vec<i64>| {
        m.bindings.insert(label(l), v);
    };
    let size: u64 = match (name, input) {
        (BenchName::Fibonacci, BenchInput::Scalar(n)) => {
            let n = *n;
            let k = n as usize;
            set("dadoa", vec![n; k + 1]);
            set("dadob", vec![0]);
            set("dadoc", vec![0; k + 1]);
            set("dadod", vec![0]);
            set("dadoe", vec![1; k]);
            set("dadof", vec![0]);
            set("dadog", vec![1]);
            set("dadoh", vec![0; k + 1]);
            set("dadoi", vec![1]);
            set("dadoj", vec![]);
            m.results.insert(label("fibo"), n as u64 + 2);
            m.results.insert(label("pf"), 1);
            n as u64
        }
        (BenchName::VectorSum, BenchInput::Vector(x)) => {
            set("x", x.clone());
            set("acc0", vec![0]);
            loop_bindings(&mut m, 0, x.len() as i64, x.len());
            m.results.insert(label("sum"), 1);
            x.len() as u64
        }
        (BenchName::DotProd, BenchInput::Pair(x, y)) => {
            set("x", x.clone());
            set("y", y.clone());
            set("acc0", vec![0]);
            loop_bindings(&mut m, 0, x.len() as i64, x.len());
            m.results.insert(label("dot"), 1);
            x.len() as u64
        }
        (BenchName::MaxVector, BenchInput::Vector(x)) => {
            set("x", x.clone());
            set("m0", vec![width.min_signed()]);
            loop_bindings(&mut m, 0, x.len() as i64, x.len());
            m.results.insert(label("max"), 1);
            x.len() as u64
        }
        (BenchName::PopCount, BenchInput::Scalar(word)) => {
            let bits = width.bits() as usize;
            set("word", vec![*word]);
            set("mask", (0..bits).map(|j| 1i64 << j).collect());
            set("zero", vec![0; bits]);
            set("acc0", vec![0]);
            loop_bindings(&mut m, 0, bits as i64, bits);
            m.results.insert(label("wend"), 1);
            m.results.insert(label("count"), 1);
            bits as u64
        }
        (BenchName::BubbleSort, BenchInput::Vector(x)) => {
            let k = x.len();
            set("x", x.clone());
            for j in 1..=SORT_CELLS {
                set(&format!("top{j}"), vec![width.max_signed()]);
                m.results.insert(label(&format!("r{j}")), 1);
            }
            loop_bindings(&mut m, 1, k as i64, k - 1);
            m.results.insert(label("tail"), k as u64);
            (k * SORT_CELLS) as u64
        }
        _ => unreachable!("check_input rejects mismatched shapes"),
    };
    m.max_ticks = 10_000 + 200 * size;
    Ok(m)
}

/// Benchmark result values read from the simulator's outputs.
pub fn extract(name: BenchName, input: &BenchInput, result: &SimResult, width: Width) -> Vec<i64> {
    let signed = |label: &str| -> Vec<i64> {
        result.outputs.get(label).map(|v| v.iter().map(|t| width.signed(Token(*t))).collect()).unwrap_or_default()
    };
    match name {
        BenchName::Fibonacci => signed("fibo").last().copied().into_iter().collect(),
        BenchName::VectorSum => signed("sum"),
        BenchName::DotProd => signed("dot"),
        BenchName::MaxVector => signed("max"),
        BenchName::PopCount => signed("count"),
        BenchName::BubbleSort => {
            let k = match input {
                BenchInput::Vector(x) => x.len(),
                _ => 0,
            };
            (1..=k).flat_map(|j| signed(&format!("r{j}"))).collect()
        }
    }
}

/// Runs one benchmark at the default 16-bit width without tracing.
pub fn run_benchmark(name: BenchName, input: &BenchInput) -> Result<BenchReport, BenchError> {
    run_benchmark_with(name, input, Width::DEFAULT, SimConfig { trace: false, ..SimConfig::default() })
        .map(|(report, _)| report)
}

pub fn run_benchmark_with(
    name: BenchName,
    input: &BenchInput,
    width: Width,
    config: SimConfig,
) -> Result<(BenchReport, Vec<TraceEvent>), BenchError> {
    let expected = oracle(name, input, width)?;
    let graph = parse_program(name.source())?;
    let program = bind_manifest(&graph, &manifest(name, input, width)?)?;
    let (result, trace) = run(&program, config);
    let outputs = extract(name, input, &result, width);
    let matched = result.terminated == Termination::Completed && outputs == expected;
    let report = BenchReport {
        name,
        input: input.clone(),
        outputs,
        oracle: expected,
        matched,
        terminated: result.terminated,
        ticks: result.ticks_elapsed,
        fire_counts: result.fire_counts,
    };
    Ok((report, trace))
}

/// Documented default inputs: n = 10, the word 0x00FF, length-8 vectors.
pub fn default_input(name: BenchName) -> BenchInput {
    match name {
        BenchName::Fibonacci => BenchInput::Scalar(10),
        BenchName::PopCount => BenchInput::Scalar(0x00FF),
        BenchName::MaxVector | BenchName::VectorSum => BenchInput::Vector(vec![3, 1, 2, -7, 12, 5, 0, 9]),
        BenchName::BubbleSort => BenchInput::Vector(vec![5, 1, 4, 2, 8, -3, 7, 0]),
        BenchName::DotProd => BenchInput::Pair(vec![1, 2, 3, 4, 5, 6, 7, 8], vec![8, -7, 6, -5, 4, -3, 2, -1]),
    }
}

/// Random admissible input: vectors of length 1..=16 with values in
/// [-100, 100], Fibonacci n in [0, 100], pop-count words in [-100, 100].
pub fn random_input<R: Rng + ?Sized>(name: BenchName, rng: &mut R) -> BenchInput {
    let vector = |rng: &mut R, len: usize| (0..len).map(|_| rng.gen_range(-100..=100)).collect::<Vec<i64>>();
    match name {
        BenchName::Fibonacci => BenchInput::Scalar(rng.gen_range(0..=100)),
        BenchName::PopCount => BenchInput::Scalar(rng.gen_range(-100..=100)),
        BenchName::DotProd => {
            let len = rng.gen_range(1..=MAX_VECTOR_LEN);
            let x = vector(rng, len);
            BenchInput::Pair(x, vector(rng, len))
        }
        _ => {
            let len = rng.gen_range(1..=MAX_VECTOR_LEN);
            BenchInput::Vector(vector(rng, len))
        }
    }
}
