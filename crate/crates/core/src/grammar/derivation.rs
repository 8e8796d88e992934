//! Max-product chart parsing directly over the original (non-CNF) rules, so
//! the resulting tree refers to the grammar's own And/Or rules.

use super::{ParseTree, Pcfg, Sym};
use crate::{Error, Result};

const NONE: usize = usize::MAX;

struct Chart {
    n: usize,
    /// `[(A * n + i) * (n + 1) + j]`: best log prob of `A =>* s[i..j]`.
    sym: Vec<f64>,
    sym_rule: Vec<usize>,
    /// Per rule, per dot position `d` (1-based): best log prob of
    /// `rhs[..d] =>* s[i..j]` and the start of the last symbol.
    dot: Vec<Vec<Vec<(f64, usize)>>>,
}

impl Chart {
    fn span(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    fn sym_idx(&self, a: usize, i: usize, j: usize) -> usize {
        a * self.n * (self.n + 1) + self.span(i, j)
    }

    fn value(&self, s: &[usize], sym: Sym, i: usize, j: usize) -> f64 {
        match sym {
            Sym::T(t) => {
                if j == i + 1 && s[i] == t {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Sym::N(a) => self.sym[self.sym_idx(a, i, j)],
        }
    }
}

/// The single most probable derivation of `s` under `g`, using the rules of
/// `g` itself. Ties prefer the smaller split point, then the lower rule index.
pub fn best_derivation(g: &Pcfg, s: &[usize]) -> Result<ParseTree> {
    if s.is_empty() {
        return Err(Error::InvalidSentence("empty sentence".into()));
    }
    for (position, &token) in s.iter().enumerate() {
        if token >= g.terminals().len() {
            return Err(Error::UnknownTerminal { token, position });
        }
    }
    let n = s.len();
    let nn = g.nonterminals().len();
    let rules = g.rules();
    let logp: Vec<f64> = rules.iter().map(|r| r.prob.ln()).collect();
    let mut chart = Chart {
        n,
        sym: vec![f64::NEG_INFINITY; nn * n * (n + 1)],
        sym_rule: vec![NONE; nn * n * (n + 1)],
        dot: rules
            .iter()
            .map(|r| vec![vec![(f64::NEG_INFINITY, NONE); n * (n + 1)]; r.rhs.len() + 1])
            .collect(),
    };

    for len in 1..=n {
        for i in 0..=n - len {
            let j = i + len;
            let span = chart.span(i, j);
            for (r, rule) in rules.iter().enumerate() {
                let m = rule.rhs.len();
                for d in 2..=m.min(len) {
                    let mut best = (f64::NEG_INFINITY, NONE);
                    for k in (i + d - 1)..j {
                        let left = chart.dot[r][d - 1][chart.span(i, k)].0;
                        if left == f64::NEG_INFINITY {
                            continue;
                        }
                        let v = left + chart.value(s, rule.rhs[d - 1], k, j);
                        if v > best.0 {
                            best = (v, k);
                        }
                    }
                    chart.dot[r][d][span] = best;
                }
            }
            for (r, rule) in rules.iter().enumerate() {
                let m = rule.rhs.len();
                let v = match rule.rhs[..] {
                    [Sym::T(t)] if len == 1 && s[i] == t => logp[r],
                    [_] => continue,
                    _ if m <= len => chart.dot[r][m][span].0 + logp[r],
                    _ => continue,
                };
                let idx = chart.sym_idx(rule.lhs, i, j);
                if v > chart.sym[idx] {
                    chart.sym[idx] = v;
                    chart.sym_rule[idx] = r;
                }
            }
            loop {
                let mut changed = false;
                for (r, rule) in rules.iter().enumerate() {
                    if let [Sym::N(b)] = rule.rhs[..] {
                        let v = logp[r] + chart.sym[chart.sym_idx(b, i, j)];
                        let idx = chart.sym_idx(rule.lhs, i, j);
                        if v > chart.sym[idx] {
                            chart.sym[idx] = v;
                            chart.sym_rule[idx] = r;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            for (r, rule) in rules.iter().enumerate() {
                if rule.rhs.len() >= 2 {
                    chart.dot[r][1][span] = (chart.value(s, rule.rhs[0], i, j), i);
                }
            }
        }
    }

    let root = chart.sym_idx(g.start(), 0, n);
    if chart.sym[root] == f64::NEG_INFINITY {
        return Err(Error::NoParse);
    }
    Ok(build(g, &chart, s, g.start(), 0, n))
}

fn build(g: &Pcfg, chart: &Chart, s: &[usize], a: usize, i: usize, j: usize) -> ParseTree {
    let r = chart.sym_rule[chart.sym_idx(a, i, j)];
    let rule = &g.rules()[r];
    let m = rule.rhs.len();
    let mut spans = vec![(0, 0); m];
    let mut end = j;
    for d in (1..=m).rev() {
        let start = if d == 1 {
            i
        } else {
            chart.dot[r][d][chart.span(i, end)].1
        };
        spans[d - 1] = (start, end);
        end = start;
    }
    let children = rule
        .rhs
        .iter()
        .zip(spans)
        .map(|(&sym, (ci, cj))| match sym {
            Sym::T(_) => ParseTree::leaf(s[ci]),
            Sym::N(b) => build(g, chart, s, b, ci, cj),
        })
        .collect();
    ParseTree::node(g, r, children)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::to_cnf;

    #[test]
    fn uses_original_rules() {
        let g = Pcfg::from_productions("axc", "S -> a X c\nX -> b : 0.5\nX -> d : 0.5").unwrap();
        let s: Vec<usize> = ["a", "d", "c"]
            .iter()
            .map(|t| g.terminal_id(t).unwrap())
            .collect();
        let tree = best_derivation(&g, &s).unwrap();
        assert_eq!(tree.leaves(), s);
        assert_eq!(tree.rules(), vec![0, 2]);
        assert!((tree.prob - 0.5).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_cnf_viterbi() {
        let g = Pcfg::from_productions(
            "mix",
            "S -> S S : 0.3\nS -> A : 0.3\nS -> a b : 0.4\nA -> a : 0.6\nA -> S b : 0.4",
        )
        .unwrap();
        let cnf = to_cnf(&g).unwrap();
        for s in [
            vec![0],
            vec![0, 1],
            vec![0, 1, 1],
            vec![0, 0, 1, 1],
            vec![0, 1, 0, 1, 1],
        ] {
            let ours = best_derivation(&g, &s).map(|t| t.prob).unwrap_or(0.0);
            let theirs = cnf.viterbi(&s).map(|(_, p)| p).unwrap_or(0.0);
            assert!(
                (ours - theirs).abs() <= 1e-12 * theirs.max(1e-300),
                "{s:?}: {ours} vs {theirs}"
            );
        }
        assert!(matches!(best_derivation(&g, &[1]), Err(Error::NoParse)));
    }
}
