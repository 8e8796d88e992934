//! Line-oriented grammar text format.
//!
//! ```text
//! pcfg <name>
//! M <key> <value>
//! T <id> <name>
//! N <id> <name> <and|or>
//! R <lhs-id> <prob> <rhs>...
//! S <id>
//! ```
//!
//! Right-hand side symbols are written `t<id>` or `n<id>` because terminal
//! and nonterminal ids are dense within their own tables. `#` starts a
//! comment. Probabilities use the shortest representation that parses back to
//! the same `f64`, so parse followed by write reproduces canonical input.

use std::fmt::Write;

use super::{NodeKind, Pcfg, Sym};
use crate::{Error, Result};

pub(super) fn write(g: &Pcfg) -> String {
    let mut out = String::new();
    writeln!(out, "pcfg {}", g.name()).unwrap();
    for (k, v) in g.metadata() {
        writeln!(out, "M {k} {v}").unwrap();
    }
    for (i, t) in g.terminals().iter().enumerate() {
        writeln!(out, "T {i} {t}").unwrap();
    }
    for (i, n) in g.nonterminals().iter().enumerate() {
        writeln!(out, "N {i} {} {}", n.name, n.kind.as_str()).unwrap();
    }
    for rule in g.rules() {
        write!(out, "R {} {}", rule.lhs, rule.prob).unwrap();
        for sym in &rule.rhs {
            match sym {
                Sym::T(t) => write!(out, " t{t}").unwrap(),
                Sym::N(n) => write!(out, " n{n}").unwrap(),
            }
        }
        out.push('\n');
    }
    writeln!(out, "S {}", g.start()).unwrap();
    out
}

pub(super) fn parse(text: &str) -> Result<Pcfg> {
    let mut g: Option<Pcfg> = None;
    let mut start = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| Error::Format { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap();
        if tag == "pcfg" {
            if g.is_some() {
                return Err(err("duplicate header".into()));
            }
            let name = fields.collect::<Vec<_>>().join(" ");
            g = Some(Pcfg::new(name));
            continue;
        }
        let g = g
            .as_mut()
            .ok_or_else(|| err("missing `pcfg` header".into()))?;
        let fields: Vec<&str> = fields.collect();
        let parse_id = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| err(format!("bad id {s:?}")))
        };
        match tag {
            "M" => {
                let (key, value) = line[1..]
                    .trim_start()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| err("metadata needs a key and a value".into()))?;
                g.set_metadata(key, value.trim());
            }
            "T" => {
                let [id, name] = fields[..] else {
                    return Err(err("expected `T <id> <name>`".into()));
                };
                if parse_id(id)? != g.terminals().len() {
                    return Err(err(format!("terminal id {id} out of order")));
                }
                if g.terminal_id(name).is_some() {
                    return Err(err(format!("duplicate terminal {name}")));
                }
                g.add_terminal(name);
            }
            "N" => {
                let [id, name, kind] = fields[..] else {
                    return Err(err("expected `N <id> <name> <and|or>`".into()));
                };
                if parse_id(id)? != g.nonterminals().len() {
                    return Err(err(format!("nonterminal id {id} out of order")));
                }
                let kind = match kind {
                    "and" => NodeKind::And,
                    "or" => NodeKind::Or,
                    other => return Err(err(format!("unknown node kind {other:?}"))),
                };
                g.add_nonterminal(name, kind);
            }
            "R" => {
                if fields.len() < 3 {
                    return Err(err("expected `R <lhs> <prob> <rhs>...`".into()));
                }
                let lhs = parse_id(fields[0])?;
                if lhs >= g.nonterminals().len() {
                    return Err(err(format!("unknown nonterminal {lhs}")));
                }
                let prob: f64 = fields[1]
                    .parse()
                    .map_err(|_| err(format!("bad probability {:?}", fields[1])))?;
                let mut rhs = Vec::with_capacity(fields.len() - 2);
                for f in &fields[2..] {
                    let sym = if let Some(id) = f.strip_prefix('t') {
                        let id = parse_id(id)?;
                        if id >= g.terminals().len() {
                            return Err(err(format!("unknown terminal {id}")));
                        }
                        Sym::T(id)
                    } else if let Some(id) = f.strip_prefix('n') {
                        let id = parse_id(id)?;
                        if id >= g.nonterminals().len() {
                            return Err(err(format!("unknown nonterminal {id}")));
                        }
                        Sym::N(id)
                    } else {
                        return Err(err(format!("bad symbol {f:?}, expected t<id> or n<id>")));
                    };
                    rhs.push(sym);
                }
                g.add_rule(lhs, rhs, prob);
            }
            "S" => {
                let [id] = fields[..] else {
                    return Err(err("expected `S <id>`".into()));
                };
                let id = parse_id(id)?;
                if id >= g.nonterminals().len() {
                    return Err(err(format!("unknown start nonterminal {id}")));
                }
                start = Some(id);
            }
            other => return Err(err(format!("unknown line tag {other:?}"))),
        }
    }
    let mut g = g.ok_or(Error::Format {
        line: 0,
        msg: "missing `pcfg` header".into(),
    })?;
    let start = start.ok_or(Error::Format {
        line: 0,
        msg: "missing start line".into(),
    })?;
    g.set_start(start);
    Ok(g)
}
