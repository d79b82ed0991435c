// SPDX-License-Identifier: Apache-2.0

//! Toolchain for a static dataflow machine: an assembler frontend, a
//! validated graph IR, a clock-tick simulator of handshaking operator state
//! machines, a structural VHDL emitter and a benchmark suite with scalar
//! reference oracles.

pub mod asm;
pub mod bench;
pub mod graph;
pub mod hdl;
pub mod ops;
pub mod sim;

pub use asm::{bind_manifest, parse_manifest, parse_program, BoundProgram, Manifest};
pub use graph::{graph_stats, validate_graph, DataflowGraph, OperatorKind};
pub use hdl::{emit_netlist, scan_netlist};
pub use sim::{run, SimConfig, SimResult, Termination};
