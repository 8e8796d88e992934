//! Probabilistic Earley parsing with prefix probabilities.
//!
//! Each chart column carries forward (`alpha`) and inner (`gamma`)
//! probabilities. Prediction and completion go through the left-corner and
//! unit-production closures so recursive and unit chains are summed in closed
//! form. The sum of `alpha` over the states created by scanning token `i` is
//! the probability that a sentence drawn from the grammar starts with the
//! first `i + 1` tokens. The chart also yields the set of terminals that may
//! follow a prefix, which is what constrains the decoder's search.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use super::{star_closure, Pcfg, Sym};
use crate::Result;

/// Grammar tables shared by every chart built for one grammar.
#[derive(Clone, Debug)]
pub struct EarleyTables {
    /// Rule right-hand sides and probabilities; the last entry is the
    /// augmented start rule `⊥ -> S`.
    rules: Vec<(usize, Vec<Sym>, f64)>,
    rules_of: Vec<Vec<usize>>,
    /// `left_corner[Z]`: every `(Y, R_L(Z, Y))` with nonzero closure weight.
    left_corner: Vec<Vec<(usize, f64)>>,
    /// `unit_parents[Y]`: every `(Z, R_U(Z, Y))` with nonzero closure weight.
    unit_parents: Vec<Vec<(usize, f64)>>,
    n_terminals: usize,
}

#[derive(Clone, Copy, Debug)]
struct State {
    rule: usize,
    dot: usize,
    origin: usize,
    alpha: f64,
    gamma: f64,
}

#[derive(Debug, Default)]
struct Column {
    states: Vec<State>,
    index: HashMap<(usize, usize, usize), usize>,
    waiting: HashMap<usize, Vec<usize>>,
    next_terminals: Vec<usize>,
    prefix_prob: f64,
    sentence_prob: f64,
}

impl Column {
    fn add(
        &mut self,
        rule: usize,
        dot: usize,
        origin: usize,
        alpha: f64,
        gamma: f64,
    ) -> (usize, bool) {
        match self.index.get(&(rule, dot, origin)) {
            Some(&i) => {
                self.states[i].alpha += alpha;
                self.states[i].gamma += gamma;
                (i, false)
            }
            None => {
                let i = self.states.len();
                self.states.push(State {
                    rule,
                    dot,
                    origin,
                    alpha,
                    gamma,
                });
                self.index.insert((rule, dot, origin), i);
                (i, true)
            }
        }
    }
}

/// An Earley chart for one prefix. Cloning is cheap: columns are shared.
#[derive(Clone, Debug)]
pub struct EarleyChart {
    columns: Vec<Arc<Column>>,
}

impl EarleyTables {
    pub fn new(g: &Pcfg) -> Result<Self> {
        g.check()?;
        let nn = g.nonterminals().len();
        let mut rules: Vec<(usize, Vec<Sym>, f64)> = g
            .rules()
            .iter()
            .map(|r| (r.lhs, r.rhs.clone(), r.prob))
            .collect();
        rules.push((usize::MAX, vec![Sym::N(g.start())], 1.0));
        let rules_of = (0..nn).map(|n| g.rules_of(n).to_vec()).collect();

        let mut lc_edges = Vec::new();
        let mut unit_edges = Vec::new();
        let reachable = g.reachable();
        for r in g.rules().iter().filter(|r| reachable[r.lhs]) {
            if let Sym::N(y) = r.rhs[0] {
                lc_edges.push((r.lhs, y, r.prob));
                if r.rhs.len() == 1 {
                    unit_edges.push((r.lhs, y, r.prob));
                }
            }
        }
        let rl = star_closure(nn, &lc_edges)?;
        let ru = star_closure(nn, &unit_edges)?;
        let left_corner = rl
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(y, &w)| (y, w))
                    .collect()
            })
            .collect();
        let mut unit_parents = vec![Vec::new(); nn];
        for (z, row) in ru.iter().enumerate() {
            for (y, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    unit_parents[y].push((z, w));
                }
            }
        }
        Ok(EarleyTables {
            rules,
            rules_of,
            left_corner,
            unit_parents,
            n_terminals: g.terminals().len(),
        })
    }

    fn dummy(&self) -> usize {
        self.rules.len() - 1
    }

    fn next_sym(&self, st: &State) -> Option<Sym> {
        self.rules[st.rule].1.get(st.dot).copied()
    }

    /// Chart for the empty prefix.
    pub fn initial(&self) -> EarleyChart {
        let mut col = Column::default();
        col.add(self.dummy(), 0, 0, 1.0, 1.0);
        col.prefix_prob = 1.0;
        self.predict(&mut col, 0);
        EarleyChart {
            columns: vec![Arc::new(col)],
        }
    }

    fn predict(&self, col: &mut Column, position: usize) {
        let parents: Vec<(usize, f64)> = col
            .states
            .iter()
            .filter(|st| st.dot > 0 || st.rule == self.dummy())
            .filter_map(|st| match self.next_sym(st) {
                Some(Sym::N(z)) => Some((z, st.alpha)),
                _ => None,
            })
            .collect();
        for (z, alpha) in parents {
            for &(y, w) in &self.left_corner[z] {
                for &r in &self.rules_of[y] {
                    let p = self.rules[r].2;
                    let (i, _) = col.add(r, 0, position, alpha * w * p, 0.0);
                    col.states[i].gamma = p;
                }
            }
        }
        let mut next = Vec::new();
        for (i, st) in col.states.iter().enumerate() {
            match self.next_sym(st) {
                Some(Sym::N(z)) => col.waiting.entry(z).or_default().push(i),
                Some(Sym::T(t)) => next.push(t),
                None => {}
            }
        }
        next.sort_unstable();
        next.dedup();
        col.next_terminals = next;
        col.sentence_prob = col
            .index
            .get(&(self.dummy(), 1, 0))
            .map_or(0.0, |&i| col.states[i].gamma);
    }

    /// Extends the chart by one token; `None` when no sentence of the
    /// grammar continues the prefix with it.
    pub fn advance(&self, chart: &EarleyChart, token: usize) -> Option<EarleyChart> {
        if token >= self.n_terminals {
            return None;
        }
        let last = chart.columns.last().expect("chart has a column");
        let position = chart.columns.len();
        let mut col = Column::default();
        let mut heap = BinaryHeap::new();
        for st in &last.states {
            if self.next_sym(st) == Some(Sym::T(token)) {
                let (i, _) = col.add(st.rule, st.dot + 1, st.origin, st.alpha, st.gamma);
                col.prefix_prob += st.alpha;
                if self.next_sym(&col.states[i]).is_none() {
                    heap.push((st.origin, Reverse(i)));
                }
            }
        }
        if col.states.is_empty() {
            return None;
        }

        while let Some((_, Reverse(ci))) = heap.pop() {
            let c = col.states[ci];
            let (lhs, rhs, _) = &self.rules[c.rule];
            if c.rule == self.dummy() || (rhs.len() == 1 && !rhs[0].is_terminal()) {
                continue;
            }
            let origin_col: &Column = if c.origin == position {
                unreachable!("completed state spans at least one token")
            } else {
                &chart.columns[c.origin]
            };
            for &(z, w) in &self.unit_parents[*lhs] {
                let Some(waiters) = origin_col.waiting.get(&z) else {
                    continue;
                };
                for &wi in waiters {
                    let p = origin_col.states[wi];
                    let (ti, new) = col.add(
                        p.rule,
                        p.dot + 1,
                        p.origin,
                        p.alpha * c.gamma * w,
                        p.gamma * c.gamma * w,
                    );
                    if new && self.next_sym(&col.states[ti]).is_none() {
                        heap.push((p.origin, Reverse(ti)));
                    }
                }
            }
        }

        self.predict(&mut col, position);
        let mut columns = chart.columns.clone();
        columns.push(Arc::new(col));
        Some(EarleyChart { columns })
    }

    /// Chart after consuming all of `tokens`, if they form a viable prefix.
    pub fn parse_prefix(&self, tokens: &[usize]) -> Option<EarleyChart> {
        let mut chart = self.initial();
        for &t in tokens {
            chart = self.advance(&chart, t)?;
        }
        Some(chart)
    }

    /// Probability that a sampled sentence starts with `tokens`.
    pub fn prefix_probability(&self, tokens: &[usize]) -> f64 {
        self.parse_prefix(tokens).map_or(0.0, |c| c.prefix_prob())
    }

    /// Probability of the complete sentence `tokens`.
    pub fn sentence_probability(&self, tokens: &[usize]) -> f64 {
        self.parse_prefix(tokens).map_or(0.0, |c| c.sentence_prob())
    }
}

impl EarleyChart {
    fn last(&self) -> &Column {
        self.columns.last().expect("chart has a column")
    }

    /// Number of tokens consumed.
    pub fn len(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Terminals that can follow the consumed prefix, ascending.
    pub fn next_terminals(&self) -> &[usize] {
        &self.last().next_terminals
    }

    pub fn allows(&self, terminal: usize) -> bool {
        self.last().next_terminals.binary_search(&terminal).is_ok()
    }

    pub fn prefix_prob(&self) -> f64 {
        self.last().prefix_prob
    }

    /// Inside probability of the consumed prefix as a complete sentence.
    pub fn sentence_prob(&self) -> f64 {
        self.last().sentence_prob
    }
}
