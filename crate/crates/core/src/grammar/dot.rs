use std::fmt::Write;

use super::{NodeKind, Pcfg, Sym};

/// Renders the grammar as a Graphviz digraph.
///
/// And-nodes are filled boxes, Or-nodes filled ellipses and terminals plain
/// text nodes. Or-node edges carry the branch probability with three
/// decimals; And-node edges carry the 1-based expansion order in brackets.
/// An Or branch with several children goes through an unnamed And-node.
/// Node order follows symbol ids, so the output is byte-stable.
pub fn to_dot(g: &Pcfg) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", escape(g.name())).unwrap();
    out.push_str("  node [fontname=\"Helvetica\"];\n");
    for (i, nt) in g.nonterminals().iter().enumerate() {
        let style = match nt.kind {
            NodeKind::And => "shape=box, style=filled, fillcolor=pink",
            NodeKind::Or => "shape=ellipse, style=filled, fillcolor=plum",
        };
        writeln!(out, "  n{i} [label=\"{}\", {style}];", escape(&nt.name)).unwrap();
    }
    for (i, t) in g.terminals().iter().enumerate() {
        writeln!(out, "  t{i} [label=\"{}\", shape=plaintext];", escape(t)).unwrap();
    }
    let node = |s: Sym| match s {
        Sym::T(t) => format!("t{t}"),
        Sym::N(n) => format!("n{n}"),
    };
    for (i, rule) in g.rules().iter().enumerate() {
        let from = format!("n{}", rule.lhs);
        match g.nonterminals()[rule.lhs].kind {
            NodeKind::And => {
                for (k, &child) in rule.rhs.iter().enumerate() {
                    writeln!(out, "  {from} -> {} [label=\"[{}]\"];", node(child), k + 1).unwrap();
                }
            }
            NodeKind::Or if rule.rhs.len() == 1 => {
                writeln!(
                    out,
                    "  {from} -> {} [label=\"{:.3}\"];",
                    node(rule.rhs[0]),
                    rule.prob
                )
                .unwrap();
            }
            NodeKind::Or => {
                writeln!(
                    out,
                    "  r{i} [label=\"\", shape=box, style=filled, fillcolor=pink, width=0.2, height=0.2];"
                )
                .unwrap();
                writeln!(out, "  {from} -> r{i} [label=\"{:.3}\"];", rule.prob).unwrap();
                for (k, &child) in rule.rhs.iter().enumerate() {
                    writeln!(out, "  r{i} -> {} [label=\"[{}]\"];", node(child), k + 1).unwrap();
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
