//! And-Or graph grammars as probabilistic context-free grammars.
//!
//! A [`Pcfg`] keeps two symbol tables: terminals (the action labels) and
//! nonterminals, each tagged as an And-node (a single ordered decomposition
//! with probability 1) or an Or-node (mutually exclusive branches whose
//! probabilities sum to 1). Empty right-hand sides are not representable.

mod cnf;
mod derivation;
mod dot;
pub mod earley;
mod format;
mod sample;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::{Error, Result};

pub use cnf::{log_likelihood, to_cnf, CnfGrammar, LogLikelihood};
pub use derivation::best_derivation;
pub use dot::to_dot;
pub use sample::{sample, sample_with};
pub use tree::ParseTree;

/// Tolerance on Or-branch probability sums.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A grammar symbol: an index into the terminal or the nonterminal table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    T(usize),
    N(usize),
}

impl Sym {
    pub fn is_terminal(self) -> bool {
        matches!(self, Sym::T(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    And,
    Or,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::And => "and",
            NodeKind::Or => "or",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nonterminal {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub lhs: usize,
    pub rhs: Vec<Sym>,
    pub prob: f64,
}

impl Rule {
    /// A rule rewriting one nonterminal to exactly one other nonterminal.
    pub fn is_unit(&self) -> bool {
        matches!(self.rhs.as_slice(), [Sym::N(_)])
    }
}

/// A probabilistic And-Or grammar.
///
/// The generated language is implicit; it is never enumerated.
#[derive(Clone, Debug, PartialEq)]
pub struct Pcfg {
    name: String,
    terminals: Vec<String>,
    nonterminals: Vec<Nonterminal>,
    rules: Vec<Rule>,
    by_lhs: Vec<Vec<usize>>,
    start: usize,
    metadata: BTreeMap<String, String>,
}

impl Pcfg {
    pub fn new(name: impl Into<String>) -> Self {
        Pcfg {
            name: name.into(),
            terminals: Vec::new(),
            nonterminals: Vec::new(),
            rules: Vec::new(),
            by_lhs: Vec::new(),
            start: 0,
            metadata: BTreeMap::new(),
        }
    }

    /// Builds a grammar from lines of the form `A -> x y z [: prob]`.
    ///
    /// Every symbol appearing on a left-hand side is a nonterminal, everything
    /// else is a terminal. The first left-hand side is the start symbol. A
    /// nonterminal with a single rule of probability 1 is an And-node, all
    /// others are Or-nodes. Mostly useful in tests and examples.
    pub fn from_productions(name: &str, text: &str) -> Result<Self> {
        let mut parsed = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fmt_err = |msg: &str| Error::Format {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let (lhs, rest) = line
                .split_once("->")
                .ok_or_else(|| fmt_err("expected `->`"))?;
            let (rhs, prob) = match rest.split_once(':') {
                Some((rhs, p)) => (
                    rhs,
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| fmt_err("bad probability"))?,
                ),
                None => (rest, 1.0),
            };
            let lhs = lhs.trim().to_string();
            let rhs: Vec<String> = rhs.split_whitespace().map(str::to_string).collect();
            if lhs.is_empty() || rhs.is_empty() {
                return Err(fmt_err("empty side in production"));
            }
            parsed.push((lhs, rhs, prob));
        }

        let mut g = Pcfg::new(name);
        let mut counts: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for (lhs, _, p) in &parsed {
            let e = counts.entry(lhs.as_str()).or_insert((0, 0.0));
            e.0 += 1;
            e.1 = *p;
        }
        for (lhs, _, _) in &parsed {
            if g.nonterminal_id(lhs).is_none() {
                let (n, p) = counts[lhs.as_str()];
                let kind = if n == 1 && p == 1.0 {
                    NodeKind::And
                } else {
                    NodeKind::Or
                };
                g.add_nonterminal(lhs.clone(), kind);
            }
        }
        for (lhs, rhs, prob) in &parsed {
            let lhs = g.nonterminal_id(lhs).expect("registered above");
            let rhs = rhs
                .iter()
                .map(|s| match g.nonterminal_id(s) {
                    Some(n) => Sym::N(n),
                    None => Sym::T(g.add_terminal(s.clone())),
                })
                .collect();
            g.add_rule(lhs, rhs, *prob);
        }
        Ok(g)
    }

    /// Adds a terminal, returning the id of an existing one with the same name.
    pub fn add_terminal(&mut self, name: impl Into<String>) -> usize {
        let name = name.into();
        if let Some(id) = self.terminal_id(&name) {
            return id;
        }
        self.terminals.push(name);
        self.terminals.len() - 1
    }

    pub fn add_nonterminal(&mut self, name: impl Into<String>, kind: NodeKind) -> usize {
        self.nonterminals.push(Nonterminal {
            name: name.into(),
            kind,
        });
        self.by_lhs.push(Vec::new());
        self.nonterminals.len() - 1
    }

    /// Appends a rule. Panics if `lhs` is not a nonterminal id.
    pub fn add_rule(&mut self, lhs: usize, rhs: Vec<Sym>, prob: f64) -> usize {
        let idx = self.rules.len();
        self.by_lhs[lhs].push(idx);
        self.rules.push(Rule { lhs, rhs, prob });
        idx
    }

    pub fn set_start(&mut self, start: usize) {
        self.start = start;
    }

    pub fn set_rule_prob(&mut self, rule: usize, prob: f64) {
        self.rules[rule].prob = prob;
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terminals(&self) -> &[String] {
        &self.terminals
    }

    pub fn nonterminals(&self) -> &[Nonterminal] {
        &self.nonterminals
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Rule indices with the given left-hand side, in rule order.
    pub fn rules_of(&self, lhs: usize) -> &[usize] {
        &self.by_lhs[lhs]
    }

    pub fn terminal_id(&self, name: &str) -> Option<usize> {
        self.terminals.iter().position(|t| t == name)
    }

    pub fn nonterminal_id(&self, name: &str) -> Option<usize> {
        self.nonterminals.iter().position(|n| n.name == name)
    }

    pub fn symbol_name(&self, sym: Sym) -> &str {
        match sym {
            Sym::T(t) => &self.terminals[t],
            Sym::N(n) => &self.nonterminals[n].name,
        }
    }

    /// Nonterminals reachable from the start symbol.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.nonterminals.len()];
        if self.start >= seen.len() {
            return seen;
        }
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(n) = stack.pop() {
            for &r in &self.by_lhs[n] {
                for &sym in &self.rules[r].rhs {
                    if let Sym::N(m) = sym {
                        if m < seen.len() && !seen[m] {
                            seen[m] = true;
                            stack.push(m);
                        }
                    }
                }
            }
        }
        seen
    }

    /// Nonterminals that derive at least one terminal string.
    pub fn productive(&self) -> Vec<bool> {
        let mut prod = vec![false; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for rule in &self.rules {
                if prod[rule.lhs] {
                    continue;
                }
                let ok = rule.rhs.iter().all(|&s| match s {
                    Sym::T(t) => t < self.terminals.len(),
                    Sym::N(m) => m < prod.len() && prod[m],
                });
                if ok {
                    prod[rule.lhs] = true;
                    changed = true;
                }
            }
            if !changed {
                return prod;
            }
        }
    }

    /// Checks every structural and probabilistic invariant. An empty list
    /// means the grammar is usable by every operation in this crate.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n_t = self.terminals.len();
        let n_n = self.nonterminals.len();

        for (i, name) in self.terminals.iter().enumerate() {
            if name.is_empty() || name.contains(char::is_whitespace) {
                out.push(Violation::BadName(name.clone()));
            }
            if self.terminals[..i].contains(name) {
                out.push(Violation::DuplicateName(name.clone()));
            }
        }
        for (i, nt) in self.nonterminals.iter().enumerate() {
            if nt.name.is_empty() || nt.name.contains(char::is_whitespace) {
                out.push(Violation::BadName(nt.name.clone()));
            }
            if self.nonterminals[..i].iter().any(|o| o.name == nt.name) {
                out.push(Violation::DuplicateName(nt.name.clone()));
            }
        }
        if self.start >= n_n {
            out.push(Violation::BadStart);
            return out;
        }

        for (i, rule) in self.rules.iter().enumerate() {
            if rule.rhs.is_empty() {
                out.push(Violation::EmptyRhs { rule: i });
            }
            let bad_sym = rule.rhs.iter().any(|&s| match s {
                Sym::T(t) => t >= n_t,
                Sym::N(m) => m >= n_n,
            });
            if bad_sym {
                out.push(Violation::UnknownSymbol { rule: i });
            }
            if !(rule.prob > 0.0 && rule.prob <= 1.0) {
                out.push(Violation::ProbOutOfRange {
                    rule: i,
                    prob: rule.prob,
                });
            }
        }

        for (n, nt) in self.nonterminals.iter().enumerate() {
            let rules = &self.by_lhs[n];
            match nt.kind {
                NodeKind::And if !rules.is_empty() => {
                    if rules.len() != 1 {
                        out.push(Violation::AndRuleCount {
                            name: nt.name.clone(),
                            count: rules.len(),
                        });
                    } else if self.rules[rules[0]].prob != 1.0 {
                        out.push(Violation::AndRuleProb {
                            name: nt.name.clone(),
                            prob: self.rules[rules[0]].prob,
                        });
                    }
                }
                NodeKind::Or if !rules.is_empty() => {
                    let sum: f64 = rules.iter().map(|&r| self.rules[r].prob).sum();
                    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                        out.push(Violation::BranchSum {
                            name: nt.name.clone(),
                            sum,
                        });
                    }
                }
                _ => {}
            }
        }

        let reachable = self.reachable();
        let productive = self.productive();
        for (n, nt) in self.nonterminals.iter().enumerate() {
            if !reachable[n] {
                continue;
            }
            if self.by_lhs[n].is_empty() {
                out.push(Violation::NoRules(nt.name.clone()));
            } else if !productive[n] {
                out.push(Violation::NonProductive(nt.name.clone()));
            }
        }
        out
    }

    /// `validate` as a `Result`.
    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGrammar(
                v.iter().map(ToString::to_string).collect(),
            ))
        }
    }

    /// Serializes the grammar in the line-oriented text format.
    pub fn to_text(&self) -> String {
        format::write(self)
    }

    /// Parses the line-oriented text format.
    pub fn from_text(text: &str) -> Result<Self> {
        format::parse(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// A copy with every Or-node's branches set to equal probability.
    pub fn with_uniform_branches(&self) -> Pcfg {
        let mut g = self.clone();
        for (n, nt) in self.nonterminals.iter().enumerate() {
            if nt.kind == NodeKind::Or {
                let rules = &self.by_lhs[n];
                for &r in rules {
                    g.rules[r].prob = 1.0 / rules.len() as f64;
                }
            }
        }
        g
    }
}

/// Reflexive-transitive closure `(I - P)^-1` of a substochastic relation
/// given as `(from, to, prob)` triples over `n` nodes. Entries that are not
/// reachable in the boolean closure are exactly zero.
pub(crate) fn star_closure(n: usize, edges: &[(usize, usize, f64)]) -> Result<Vec<Vec<f64>>> {
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b, _) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut().filter(|row| row[k]) {
            for (cell, &v) in row.iter_mut().zip(&via) {
                *cell |= v;
            }
        }
    }
    if edges.is_empty() {
        return Ok((0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect());
    }
    let mut m = nalgebra::DMatrix::<f64>::identity(n, n);
    for &(a, b, p) in edges {
        m[(a, b)] -= p;
    }
    let inv = m.try_inverse().ok_or_else(|| {
        Error::InvalidGrammar(vec![
            "probability closure is singular (cyclic chain with mass 1)".into(),
        ])
    })?;
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if reach[i][j] {
                        inv[(i, j)].max(0.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}

/// A single failed grammar invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BadName(String),
    DuplicateName(String),
    BadStart,
    EmptyRhs { rule: usize },
    UnknownSymbol { rule: usize },
    ProbOutOfRange { rule: usize, prob: f64 },
    AndRuleCount { name: String, count: usize },
    AndRuleProb { name: String, prob: f64 },
    BranchSum { name: String, sum: f64 },
    NoRules(String),
    NonProductive(String),
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadName(n) => write!(f, "symbol name {n:?} is empty or contains whitespace"),
            Violation::DuplicateName(n) => write!(f, "duplicate symbol name {n:?}"),
            Violation::BadStart => write!(f, "start symbol is not a nonterminal"),
            Violation::EmptyRhs { rule } => write!(f, "rule {rule} has an empty right-hand side"),
            Violation::UnknownSymbol { rule } => {
                write!(f, "rule {rule} refers to an unknown symbol")
            }
            Violation::ProbOutOfRange { rule, prob } => {
                write!(f, "rule {rule} has probability {prob} outside (0, 1]")
            }
            Violation::AndRuleCount { name, count } => {
                write!(f, "And-node {name} has {count} rules, expected 1")
            }
            Violation::AndRuleProb { name, prob } => {
                write!(f, "And-node {name} rule has probability {prob}, expected 1")
            }
            Violation::BranchSum { name, sum } => {
                write!(f, "Or-node {name}: branch probs sum {}", round9(*sum))
            }
            Violation::NoRules(n) => {
                write!(f, "nonterminal {n} is non-productive: it has no rules")
            }
            Violation::NonProductive(n) => {
                write!(
                    f,
                    "nonterminal {n} is non-productive: it derives no terminal string"
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_grammar_is_valid() {
        let g = Pcfg::from_productions("min", "S -> a").unwrap();
        assert!(g.validate().is_empty());
        assert_eq!(g.nonterminals()[0].kind, NodeKind::And);
    }

    #[test]
    fn branch_sum_violation() {
        let g = Pcfg::from_productions("bad", "S -> a : 0.6\nS -> b : 0.5").unwrap();
        let v = g.validate();
        assert_eq!(v.len(), 1);
        assert!(
            v[0].to_string().contains("branch probs sum 1.1"),
            "{}",
            v[0]
        );
    }

    #[test]
    fn reachable_nonterminal_without_rules() {
        let mut g = Pcfg::from_productions("x", "S -> a : 0.5").unwrap();
        let x = g.add_nonterminal("X", NodeKind::Or);
        g.add_rule(0, vec![Sym::N(x)], 0.5);
        let v = g.validate();
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].to_string().contains("non-productive"));
    }

    #[test]
    fn self_loop_is_non_productive() {
        let mut g = Pcfg::new("loop");
        let s = g.add_nonterminal("S", NodeKind::And);
        g.add_rule(s, vec![Sym::N(s)], 1.0);
        let v = g.validate();
        assert_eq!(v, vec![Violation::NonProductive("S".into())]);
    }

    #[test]
    fn and_node_with_two_rules() {
        let mut g = Pcfg::from_productions("x", "S -> a").unwrap();
        let b = g.add_terminal("b");
        g.add_rule(0, vec![Sym::T(b)], 1.0);
        assert!(matches!(
            g.validate().as_slice(),
            [Violation::AndRuleCount { count: 2, .. }]
        ));
    }

    #[test]
    fn unreachable_symbols_are_ignored() {
        let mut g = Pcfg::from_productions("x", "S -> a").unwrap();
        g.add_nonterminal("Dead", NodeKind::Or);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn uniform_branches() {
        let g = Pcfg::from_productions("x", "S -> a : 0.9\nS -> b : 0.1").unwrap();
        let u = g.with_uniform_branches();
        assert_eq!(u.rules()[0].prob, 0.5);
        assert_eq!(u.rules()[1].prob, 0.5);
    }
}
