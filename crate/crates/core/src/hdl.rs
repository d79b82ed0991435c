// SPDX-License-Identifier: Apache-2.0

//! Structural VHDL-93 netlist emission.
//!
//! The output has two parts. A fixed preamble defines the three operator
//! components (two-in/one-out, three-in/one-out, two-in/two-out), each a
//! four-state handshake machine selected by an `OP` generic. The per-graph
//! part is one top-level entity: graph inputs and outputs become
//! `data`/`str`/`ack` port bundles, internal arcs become signal bundles in
//! first-use order, and every node becomes one component instance in
//! statement order.
//!
//! The bus width appears only in the top-level `WIDTH` generic default.
//! The text is not compiled here; its shape is pinned by golden files.

use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{validate_graph, DataflowGraph, OperatorKind, PortRole, Shape, ValidationReport};
use crate::ops::Width;

pub const TOP_ENTITY: &str = "dataflow_top";

#[derive(Debug, Error)]
#[error("graph is not valid; emission refused: {0}")]
pub struct EmitError(pub ValidationReport);

pub fn component_name(shape: Shape) -> &'static str {
    match shape {
        Shape::TwoToOne => "df_op_2x1",
        Shape::ThreeToOne => "df_op_3x1",
        Shape::TwoToTwo => "df_op_2x2",
    }
}

/// Component pins, inputs then outputs.
fn pins(shape: Shape) -> (&'static [&'static str], &'static [&'static str]) {
    match shape {
        Shape::TwoToOne => (&["a", "b"], &["z"]),
        Shape::ThreeToOne => (&["a", "b", "ctl"], &["z"]),
        Shape::TwoToTwo => (&["a", "b"], &["z1", "z2"]),
    }
}

/// Component pin for an operator port. Branch control rides on pin `b`.
fn pin_for(kind: OperatorKind, role: PortRole) -> &'static str {
    match (kind, role) {
        (OperatorKind::Branch, PortRole::Ctl) => "b",
        (OperatorKind::Branch, PortRole::T) => "z1",
        (OperatorKind::Branch, PortRole::F) => "z2",
        (_, r) => r.as_str(),
    }
}

fn is_basic_identifier(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty()
        && b[0].is_ascii_alphabetic()
        && !s.contains("__")
        && !s.ends_with('_')
        && b.iter().all(|c| c.is_ascii_alphanumeric() || *c == b'_')
}

/// Signal or port name for one wire of an arc bundle. Labels that would
/// not form a basic identifier fall back to an extended identifier.
pub fn wire(label: &str, suffix: &str) -> String {
    let name = format!("{label}_{suffix}");
    if is_basic_identifier(&name) {
        name
    } else {
        format!("\\{name}\\")
    }
}

pub fn emit_netlist(graph: &DataflowGraph, width: Width) -> Result<String, EmitError> {
    let report = validate_graph(graph);
    if !report.is_ok() {
        return Err(EmitError(report));
    }
    let mut out = String::from(PREAMBLE);
    let w = &mut out;

    let _ = writeln!(w, "library ieee;\nuse ieee.std_logic_1164.all;\n");
    let _ = writeln!(w, "entity {TOP_ENTITY} is");
    let _ = writeln!(w, "  generic (WIDTH : positive := {});", width.bits());
    let _ = writeln!(w, "  port (");
    let _ = writeln!(w, "    clk : in std_logic;");
    let mut ports = Vec::new();
    for l in &graph.inputs {
        ports.push(format!("{} : in std_logic_vector(WIDTH-1 downto 0)", wire(l.as_str(), "data")));
        ports.push(format!("{} : in std_logic", wire(l.as_str(), "str")));
        ports.push(format!("{} : out std_logic", wire(l.as_str(), "ack")));
    }
    for l in &graph.outputs {
        ports.push(format!("{} : out std_logic_vector(WIDTH-1 downto 0)", wire(l.as_str(), "data")));
        ports.push(format!("{} : out std_logic", wire(l.as_str(), "str")));
        ports.push(format!("{} : in std_logic", wire(l.as_str(), "ack")));
    }
    let _ = write!(w, "    rst : in std_logic");
    for p in &ports {
        let _ = write!(w, ";\n    {p}");
    }
    let _ = writeln!(w, "\n  );\nend entity {TOP_ENTITY};\n");

    let _ = writeln!(w, "architecture structural of {TOP_ENTITY} is");
    for edge in graph.edges.iter().filter(|e| e.producer.is_some() && e.consumer.is_some()) {
        let l = edge.label.as_str();
        let _ = writeln!(w, "  signal {} : std_logic_vector(WIDTH-1 downto 0);", wire(l, "data"));
        let _ = writeln!(w, "  signal {} : std_logic;", wire(l, "str"));
        let _ = writeln!(w, "  signal {} : std_logic;", wire(l, "ack"));
    }
    let _ = writeln!(w, "begin");

    let wiring = graph.wiring();
    for (idx, node) in graph.nodes.iter().enumerate() {
        let shape = node.kind.shape();
        let (ins, outs) = pins(shape);
        let mut map: Vec<(String, String)> = vec![("clk".into(), "clk".into()), ("rst".into(), "rst".into())];
        let mut bind = |pin: &str, arc: Option<&str>| {
            for s in ["data", "str", "ack"] {
                let actual = arc.map(|l| wire(l, s));
                map.push((format!("{pin}_{s}"), actual.unwrap_or_default()));
            }
        };
        for pin in ins {
            let role = node.kind.inputs().iter().find(|r| pin_for(node.kind, **r) == *pin);
            let arc = role
                .and_then(|r| node.kind.input_slot(*r))
                .and_then(|slot| wiring.node_inputs[idx][slot])
                .map(|e| graph.edges[e].label.as_str());
            bind(pin, arc);
        }
        for pin in outs {
            let role = node.kind.outputs().iter().find(|r| pin_for(node.kind, **r) == *pin);
            let arc = role
                .and_then(|r| node.kind.output_slot(*r))
                .and_then(|slot| wiring.node_outputs[idx][slot])
                .map(|e| graph.edges[e].label.as_str());
            bind(pin, arc);
        }
        let _ = writeln!(w, "  {} : entity work.{}", node.name, component_name(shape));
        let _ = writeln!(w, "    generic map (OP => \"{}\", WIDTH => WIDTH)", node.kind.mnemonic());
        let _ = writeln!(w, "    port map (");
        let lines: Vec<String> = map
            .into_iter()
            .map(|(formal, actual)| {
                let actual = if !actual.is_empty() {
                    actual
                } else if formal.ends_with("_data") {
                    "(others => '0')".to_string()
                } else if formal.ends_with("_str") {
                    "'0'".to_string()
                } else {
                    "open".to_string()
                };
                format!("      {formal} => {actual}")
            })
            .collect();
        let _ = writeln!(w, "{}\n    );", lines.join(",\n"));
    }
    let _ = writeln!(w, "end architecture structural;");
    Ok(out)
}

/// Declaration counts recovered from emitted text by a line scanner.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetlistCounts {
    pub instances: usize,
    pub internal_bundles: usize,
    pub external_bundles: usize,
}

pub fn scan_netlist(text: &str) -> NetlistCounts {
    let top = text.split(&format!("entity {TOP_ENTITY} is")).nth(1).unwrap_or("");
    let mut counts = NetlistCounts::default();
    for line in top.lines() {
        let t = line.trim();
        if t.contains(": entity work.df_op_") {
            counts.instances += 1;
        } else if t.starts_with("signal ") && t.contains("_data") {
            counts.internal_bundles += 1;
        } else if t.contains("_data") && (t.contains(": in std_logic_vector") || t.contains(": out std_logic_vector")) {
            counts.external_bundles += 1;
        }
    }
    counts
}

const PREAMBLE: &str = r#"-- SPDX-License-Identifier: Apache-2.0
-- Static dataflow netlist. Generated file; regenerate rather than edit.
--
-- Operator library. Every operator runs the same four-state machine:
--   S0 reset, S1 latch strobed inputs, S2 fire, S3 send pending results.
-- A consumer holds ack high while its input latch is full; a producer
-- strobes a token only when the arc is idle and ack is low.

library ieee;
use ieee.std_logic_1164.all;
use ieee.numeric_std.all;

package df_ops is
  function df_eval(op : string; x, y : std_logic_vector) return std_logic_vector;
  function df_unary(op : string) return boolean;
end package df_ops;

package body df_ops is
  function flag(b : boolean; n : natural) return std_logic_vector is
    variable r : std_logic_vector(n-1 downto 0) := (others => '0');
  begin
    if b then
      r(0) := '1';
    end if;
    return r;
  end function;

  function df_eval(op : string; x, y : std_logic_vector) return std_logic_vector is
    constant n : natural := x'length;
    variable sx : signed(n-1 downto 0) := signed(x);
    variable sy : signed(n-1 downto 0) := signed(y);
  begin
    if op = "add" then
      return std_logic_vector(sx + sy);
    elsif op = "sub" then
      return std_logic_vector(sx - sy);
    elsif op = "mul" then
      return std_logic_vector(resize(sx * sy, n));
    elsif op = "div" then
      if sy = 0 then
        return flag(false, n);
      end if;
      return std_logic_vector(resize(sx / sy, n));
    elsif op = "and" then
      return x and y;
    elsif op = "or" then
      return x or y;
    elsif op = "not" then
      return not x;
    elsif op = "gtdecider" then
      return flag(sx > sy, n);
    elsif op = "gedecider" then
      return flag(sx >= sy, n);
    elsif op = "ltdecider" then
      return flag(sx < sy, n);
    elsif op = "ledecider" then
      return flag(sx <= sy, n);
    elsif op = "eqdecider" then
      return flag(sx = sy, n);
    elsif op = "dfdecider" then
      return flag(sx /= sy, n);
    end if;
    return x;
  end function;

  function df_unary(op : string) return boolean is
  begin
    return op = "not" or op = "copy";
  end function;
end package body df_ops;

library ieee;
use ieee.std_logic_1164.all;
use work.df_ops.all;

entity df_op_2x1 is
  generic (OP : string; WIDTH : positive);
  port (
    clk, rst : in std_logic;
    a_data : in std_logic_vector(WIDTH-1 downto 0);
    a_str : in std_logic;
    a_ack : out std_logic;
    b_data : in std_logic_vector(WIDTH-1 downto 0);
    b_str : in std_logic;
    b_ack : out std_logic;
    z_data : out std_logic_vector(WIDTH-1 downto 0);
    z_str : out std_logic;
    z_ack : in std_logic
  );
end entity df_op_2x1;

architecture fsm of df_op_2x1 is
  type state_t is (S0, S1, S2, S3);
  signal state : state_t;
  signal ra, rb, rz : std_logic_vector(WIDTH-1 downto 0);
  signal sa, sb, zs : std_logic;
  signal pick_b : boolean;
begin
  a_ack <= sa;
  b_ack <= sb;
  z_str <= zs;
  z_data <= rz;

  process (clk)
  begin
    if rising_edge(clk) then
      if rst = '1' then
        state <= S0;
        sa <= '0';
        sb <= '0';
        zs <= '0';
      else
        zs <= '0';
        case state is
          when S0 =>
            state <= S1;
          when S1 =>
            if a_str = '1' and sa = '0' then
              ra <= a_data;
              sa <= '1';
            end if;
            if b_str = '1' and sb = '0' then
              rb <= b_data;
              sb <= '1';
            end if;
            if OP = "ndmerge" then
              if sa = '1' then
                pick_b <= false;
                state <= S2;
              elsif sb = '1' then
                pick_b <= true;
                state <= S2;
              end if;
            elsif sa = '1' and (sb = '1' or df_unary(OP)) then
              state <= S2;
            end if;
          when S2 =>
            if OP = "ndmerge" then
              if pick_b then
                rz <= rb;
                sb <= '0';
              else
                rz <= ra;
                sa <= '0';
              end if;
            else
              rz <= df_eval(OP, ra, rb);
              sa <= '0';
              sb <= '0';
            end if;
            state <= S3;
          when S3 =>
            if z_ack = '0' and zs = '0' then
              zs <= '1';
              state <= S1;
            end if;
        end case;
      end if;
    end if;
  end process;
end architecture fsm;

library ieee;
use ieee.std_logic_1164.all;

entity df_op_3x1 is
  generic (OP : string; WIDTH : positive);
  port (
    clk, rst : in std_logic;
    a_data : in std_logic_vector(WIDTH-1 downto 0);
    a_str : in std_logic;
    a_ack : out std_logic;
    b_data : in std_logic_vector(WIDTH-1 downto 0);
    b_str : in std_logic;
    b_ack : out std_logic;
    ctl_data : in std_logic_vector(WIDTH-1 downto 0);
    ctl_str : in std_logic;
    ctl_ack : out std_logic;
    z_data : out std_logic_vector(WIDTH-1 downto 0);
    z_str : out std_logic;
    z_ack : in std_logic
  );
end entity df_op_3x1;

architecture fsm of df_op_3x1 is
  type state_t is (S0, S1, S2, S3);
  signal state : state_t;
  signal ra, rb, rc, rz : std_logic_vector(WIDTH-1 downto 0);
  signal sa, sb, sc, zs : std_logic;
  constant ZERO : std_logic_vector(WIDTH-1 downto 0) := (others => '0');
begin
  a_ack <= sa;
  b_ack <= sb;
  ctl_ack <= sc;
  z_str <= zs;
  z_data <= rz;

  process (clk)
  begin
    if rising_edge(clk) then
      if rst = '1' then
        state <= S0;
        sa <= '0';
        sb <= '0';
        sc <= '0';
        zs <= '0';
      else
        zs <= '0';
        case state is
          when S0 =>
            state <= S1;
          when S1 =>
            if a_str = '1' and sa = '0' then
              ra <= a_data;
              sa <= '1';
            end if;
            if b_str = '1' and sb = '0' then
              rb <= b_data;
              sb <= '1';
            end if;
            if ctl_str = '1' and sc = '0' then
              rc <= ctl_data;
              sc <= '1';
            end if;
            if sa = '1' and sb = '1' and sc = '1' then
              state <= S2;
            end if;
          when S2 =>
            if rc /= ZERO then
              rz <= ra;
            else
              rz <= rb;
            end if;
            sa <= '0';
            sb <= '0';
            sc <= '0';
            state <= S3;
          when S3 =>
            if z_ack = '0' and zs = '0' then
              zs <= '1';
              state <= S1;
            end if;
        end case;
      end if;
    end if;
  end process;
end architecture fsm;

library ieee;
use ieee.std_logic_1164.all;
use work.df_ops.all;

entity df_op_2x2 is
  generic (OP : string; WIDTH : positive);
  port (
    clk, rst : in std_logic;
    a_data : in std_logic_vector(WIDTH-1 downto 0);
    a_str : in std_logic;
    a_ack : out std_logic;
    b_data : in std_logic_vector(WIDTH-1 downto 0);
    b_str : in std_logic;
    b_ack : out std_logic;
    z1_data : out std_logic_vector(WIDTH-1 downto 0);
    z1_str : out std_logic;
    z1_ack : in std_logic;
    z2_data : out std_logic_vector(WIDTH-1 downto 0);
    z2_str : out std_logic;
    z2_ack : in std_logic
  );
end entity df_op_2x2;

architecture fsm of df_op_2x2 is
  type state_t is (S0, S1, S2, S3);
  signal state : state_t;
  signal ra, rb : std_logic_vector(WIDTH-1 downto 0);
  signal sa, sb, p1, p2, s1, s2 : std_logic;
  constant ZERO : std_logic_vector(WIDTH-1 downto 0) := (others => '0');
begin
  a_ack <= sa;
  b_ack <= sb;
  z1_str <= s1;
  z2_str <= s2;
  z1_data <= ra;
  z2_data <= ra;

  process (clk)
  begin
    if rising_edge(clk) then
      if rst = '1' then
        state <= S0;
        sa <= '0';
        sb <= '0';
        p1 <= '0';
        p2 <= '0';
        s1 <= '0';
        s2 <= '0';
      else
        s1 <= '0';
        s2 <= '0';
        case state is
          when S0 =>
            state <= S1;
          when S1 =>
            if a_str = '1' and sa = '0' then
              ra <= a_data;
              sa <= '1';
            end if;
            if b_str = '1' and sb = '0' then
              rb <= b_data;
              sb <= '1';
            end if;
            if sa = '1' and (sb = '1' or df_unary(OP)) then
              state <= S2;
            end if;
          when S2 =>
            if df_unary(OP) then
              p1 <= '1';
              p2 <= '1';
            elsif rb /= ZERO then
              p1 <= '1';
            else
              p2 <= '1';
            end if;
            sa <= '0';
            sb <= '0';
            state <= S3;
          when S3 =>
            if p1 = '1' and z1_ack = '0' and s1 = '0' then
              s1 <= '1';
              p1 <= '0';
            end if;
            if p2 = '1' and z2_ack = '0' and s2 = '0' then
              s2 <= '1';
              p2 <= '0';
            end if;
            if (p1 = '0' or (z1_ack = '0' and s1 = '0'))
               and (p2 = '0' or (z2_ack = '0' and s2 = '0')) then
              state <= S1;
            end if;
        end case;
      end if;
    end if;
  end process;
end architecture fsm;

-- Graph netlist.

"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::graph::graph_stats;

    #[test]
    fn single_add() {
        let g = parse_program("add a,b,z;").unwrap();
        let text = emit_netlist(&g, Width::DEFAULT).unwrap();
        let c = scan_netlist(&text);
        assert_eq!(c, NetlistCounts { instances: 1, internal_bundles: 0, external_bundles: 3 });
        assert!(text.contains("    clk : in std_logic;"));
        assert!(text.contains("    rst : in std_logic;"));
        assert!(text.contains("add_1 : entity work.df_op_2x1"));
    }

    #[test]
    fn rejects_invalid_graph() {
        let g = parse_program("add a,b,z;\nadd z,c,z;").unwrap();
        assert!(emit_netlist(&g, Width::DEFAULT).is_err());
    }

    #[test]
    fn deterministic_and_width_only_changes_generic() {
        let g = parse_program(crate::bench::FIBONACCI_SRC).unwrap();
        let a = emit_netlist(&g, Width::DEFAULT).unwrap();
        assert_eq!(a, emit_netlist(&g, Width::DEFAULT).unwrap());
        let b = emit_netlist(&g, Width::new(8).unwrap()).unwrap();
        let diff: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(a.lines().count(), b.lines().count());
        assert_eq!(diff, vec![("  generic (WIDTH : positive := 16);", "  generic (WIDTH : positive := 8);")]);
    }

    #[test]
    fn counts_match_stats() {
        let g = parse_program(crate::bench::FIBONACCI_SRC).unwrap();
        let s = graph_stats(&g);
        let c = scan_netlist(&emit_netlist(&g, Width::DEFAULT).unwrap());
        assert_eq!(c.instances, s.node_count);
        assert_eq!(c.internal_bundles, s.internal_arc_count);
        assert_eq!(c.external_bundles, s.inputs.len() + s.outputs.len());
        assert_eq!((c.instances, c.internal_bundles, c.external_bundles), (20, 26, 12));
    }

    #[test]
    fn copy_and_not_tie_off_b() {
        let g = parse_program("copy a,x,y;\nnot x,p;\nbranch y,c,t,f;").unwrap();
        let text = emit_netlist(&g, Width::DEFAULT).unwrap();
        let copy = text.split("copy_1 : entity").nth(1).unwrap();
        assert!(copy.contains("b_data => (others => '0')"));
        assert!(copy.contains("b_str => '0'"));
        assert!(copy.contains("b_ack => open"));
        let branch = text.split("branch_3 : entity").nth(1).unwrap();
        assert!(branch.contains("b_data => c_data"));
        assert!(branch.contains("z1_data => t_data"));
        assert!(branch.contains("z2_data => f_data"));
    }

    #[test]
    fn odd_labels_become_extended_identifiers() {
        assert_eq!(wire("s1", "data"), "s1_data");
        assert_eq!(wire("_x", "str"), "\\_x_str\\");
        assert_eq!(wire("a__b", "ack"), "\\a__b_ack\\");
    }
}
