use super::{Pcfg, Sym};

/// A derivation tree. Leaves are terminals; every internal node records the
/// rule applied at it and the probability of its subtree (the product of
/// all rule probabilities below and including it).
#[derive(Clone, Debug, PartialEq)]
pub struct ParseTree {
    pub symbol: Sym,
    pub rule: Option<usize>,
    pub children: Vec<ParseTree>,
    pub prob: f64,
}

impl ParseTree {
    pub fn leaf(terminal: usize) -> Self {
        ParseTree {
            symbol: Sym::T(terminal),
            rule: None,
            children: Vec::new(),
            prob: 1.0,
        }
    }

    pub fn node(g: &Pcfg, rule: usize, children: Vec<ParseTree>) -> Self {
        let r = &g.rules()[rule];
        let prob = children.iter().fold(r.prob, |acc, c| acc * c.prob);
        ParseTree {
            symbol: Sym::N(r.lhs),
            rule: Some(rule),
            children,
            prob,
        }
    }

    /// Terminal frontier, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self.symbol {
            Sym::T(t) => out.push(t),
            Sym::N(_) => self.children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    /// Applied rules in pre-order.
    pub fn rules(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_rules(&mut out);
        out
    }

    fn collect_rules(&self, out: &mut Vec<usize>) {
        if let Some(r) = self.rule {
            out.push(r);
        }
        self.children.iter().for_each(|c| c.collect_rules(out));
    }

    /// Product of the applied rule probabilities, recomputed from `g`.
    pub fn recompute_prob(&self, g: &Pcfg) -> f64 {
        self.rules().iter().map(|&r| g.rules()[r].prob).product()
    }
}
