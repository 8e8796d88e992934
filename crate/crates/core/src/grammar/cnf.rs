//! Chomsky normal form conversion and the CKY-style inside and Viterbi
//! recurrences, both carried in log space.

use std::collections::HashMap;

use super::{star_closure, NodeKind, ParseTree, Pcfg, Sym};
use crate::logspace::log_add;
use crate::{Error, Result, Sentence};

/// Viterbi chart cell entry: log probability, split length and rule index.
type Backpointer = (f64, usize, usize);

/// A grammar whose every rule is `A -> B C` or `A -> a`, indexed for chart
/// parsing. Terminal ids are those of the grammar it was converted from.
#[derive(Clone, Debug)]
pub struct CnfGrammar {
    grammar: Pcfg,
    /// Per terminal: `(lhs, log prob, rule index)`.
    lexical: Vec<Vec<(usize, f64, usize)>>,
    /// `(lhs, left, right, log prob, rule index)` in rule order.
    binary: Vec<(usize, usize, usize, f64, usize)>,
}

impl CnfGrammar {
    /// Wraps a grammar that is already in CNF.
    pub fn new(grammar: Pcfg) -> Result<Self> {
        let mut lexical = vec![Vec::new(); grammar.terminals().len()];
        let mut binary = Vec::new();
        for (i, rule) in grammar.rules().iter().enumerate() {
            match rule.rhs[..] {
                [Sym::T(t)] => lexical[t].push((rule.lhs, rule.prob.ln(), i)),
                [Sym::N(b), Sym::N(c)] => binary.push((rule.lhs, b, c, rule.prob.ln(), i)),
                _ => {
                    return Err(Error::NotCnf(format!(
                        "rule {i} of {} has shape {}",
                        grammar.nonterminals()[rule.lhs].name,
                        rule.rhs
                            .iter()
                            .map(|&s| grammar.symbol_name(s))
                            .collect::<Vec<_>>()
                            .join(" ")
                    )))
                }
            }
        }
        Ok(CnfGrammar {
            grammar,
            lexical,
            binary,
        })
    }

    pub fn grammar(&self) -> &Pcfg {
        &self.grammar
    }

    pub fn into_grammar(self) -> Pcfg {
        self.grammar
    }

    fn check_tokens(&self, s: &[usize]) -> Result<()> {
        if s.is_empty() {
            return Err(Error::InvalidSentence("empty sentence".into()));
        }
        for (position, &token) in s.iter().enumerate() {
            if token >= self.lexical.len() {
                return Err(Error::UnknownTerminal { token, position });
            }
        }
        Ok(())
    }

    /// Natural log of the inside probability of `s` from the start symbol.
    pub fn log_inside(&self, s: &[usize]) -> Result<f64> {
        self.check_tokens(s)?;
        let n = s.len();
        let nn = self.grammar.nonterminals().len();
        // chart[i][len - 1][A]: log P(A =>* s[i..i+len])
        let mut chart = vec![vec![Vec::new(); n]; n];
        for (i, &tok) in s.iter().enumerate() {
            let mut cell = vec![f64::NEG_INFINITY; nn];
            for &(lhs, lp, _) in &self.lexical[tok] {
                cell[lhs] = log_add(cell[lhs], lp);
            }
            chart[i][0] = cell;
        }
        for len in 2..=n {
            for i in 0..=n - len {
                let mut cell = vec![f64::NEG_INFINITY; nn];
                for split in 1..len {
                    let left = &chart[i][split - 1];
                    let right = &chart[i + split][len - split - 1];
                    for &(lhs, b, c, lp, _) in &self.binary {
                        let (lb, rc) = (left[b], right[c]);
                        if lb > f64::NEG_INFINITY && rc > f64::NEG_INFINITY {
                            cell[lhs] = log_add(cell[lhs], lp + lb + rc);
                        }
                    }
                }
                chart[i][len - 1] = cell;
            }
        }
        Ok(chart[0][n - 1][self.grammar.start()])
    }

    /// Sum over all parse trees of `s`; 0 when `s` is not in the language.
    pub fn inside(&self, s: &[usize]) -> Result<f64> {
        Ok(self.log_inside(s)?.exp())
    }

    /// Most probable parse tree and its probability. Ties prefer the smaller
    /// split point, then the lower rule index.
    pub fn viterbi(&self, s: &[usize]) -> Result<(ParseTree, f64)> {
        self.check_tokens(s)?;
        let n = s.len();
        let nn = self.grammar.nonterminals().len();
        // best[i][len - 1][A] = (log prob, split, rule)
        let empty = (f64::NEG_INFINITY, 0usize, usize::MAX);
        let mut best = vec![vec![Vec::new(); n]; n];
        for (i, &tok) in s.iter().enumerate() {
            let mut cell = vec![empty; nn];
            for &(lhs, lp, r) in &self.lexical[tok] {
                if lp > cell[lhs].0 {
                    cell[lhs] = (lp, 0, r);
                }
            }
            best[i][0] = cell;
        }
        for len in 2..=n {
            for i in 0..=n - len {
                let mut cell = vec![empty; nn];
                for split in 1..len {
                    let left = &best[i][split - 1];
                    let right = &best[i + split][len - split - 1];
                    for &(lhs, b, c, lp, r) in &self.binary {
                        let v = lp + left[b].0 + right[c].0;
                        if v > cell[lhs].0 {
                            cell[lhs] = (v, split, r);
                        }
                    }
                }
                best[i][len - 1] = cell;
            }
        }
        let start = self.grammar.start();
        if best[0][n - 1][start].0 == f64::NEG_INFINITY {
            return Err(Error::NoParse);
        }
        let tree = self.build(&best, s, start, 0, n);
        let prob = tree.prob;
        Ok((tree, prob))
    }

    fn build(
        &self,
        best: &[Vec<Vec<Backpointer>>],
        s: &[usize],
        sym: usize,
        i: usize,
        len: usize,
    ) -> ParseTree {
        let (_, split, rule) = best[i][len - 1][sym];
        let children = if len == 1 {
            vec![ParseTree::leaf(s[i])]
        } else {
            let (b, c) = match self.grammar.rules()[rule].rhs[..] {
                [Sym::N(b), Sym::N(c)] => (b, c),
                _ => unreachable!("binary rule"),
            };
            vec![
                self.build(best, s, b, i, split),
                self.build(best, s, c, i + split, len - split),
            ]
        };
        ParseTree::node(&self.grammar, rule, children)
    }

    pub fn log_likelihood(&self, corpus: &[Sentence]) -> Result<LogLikelihood> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let per_sentence = corpus
            .iter()
            .map(|s| self.log_inside(s))
            .collect::<Result<Vec<_>>>()?;
        let zero_prob: Vec<usize> = per_sentence
            .iter()
            .enumerate()
            .filter(|(_, &lp)| lp == f64::NEG_INFINITY)
            .map(|(i, _)| i)
            .collect();
        let total = if zero_prob.is_empty() {
            per_sentence.iter().sum()
        } else {
            f64::NEG_INFINITY
        };
        Ok(LogLikelihood {
            total,
            per_sentence,
            zero_prob,
        })
    }
}

/// Corpus log-likelihood. `total` is `-inf` when any sentence has
/// probability zero; `zero_prob` lists those sentence indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLikelihood {
    pub total: f64,
    pub per_sentence: Vec<f64>,
    pub zero_prob: Vec<usize>,
}

impl LogLikelihood {
    pub fn is_finite(&self) -> bool {
        self.zero_prob.is_empty()
    }
}

/// Σ log P(s | g) over the corpus, converting `g` to CNF first.
pub fn log_likelihood(g: &Pcfg, corpus: &[Sentence]) -> Result<LogLikelihood> {
    to_cnf(g)?.log_likelihood(corpus)
}

/// Converts a valid grammar to Chomsky normal form while preserving the
/// probability of every sentence.
///
/// Terminals inside longer right-hand sides get preterminals, long rules are
/// left-binarized and unit chains are folded into their targets through the
/// closure `(I - P_unit)^-1`. Generated nonterminals are named `X<n>`, with `n`
/// assigned in rule order. Unreachable nonterminals are dropped; the terminal
/// table is kept as is.
pub fn to_cnf(g: &Pcfg) -> Result<CnfGrammar> {
    g.check()?;

    let mut names: Vec<(String, NodeKind)> = g
        .nonterminals()
        .iter()
        .map(|n| (n.name.clone(), n.kind))
        .collect();
    let mut counter = 0usize;
    let mut fresh = |names: &mut Vec<(String, NodeKind)>| -> usize {
        loop {
            counter += 1;
            let name = format!("X{counter}");
            if !names.iter().any(|(n, _)| *n == name) {
                names.push((name, NodeKind::And));
                return names.len() - 1;
            }
        }
    };

    let mut rules: Vec<(usize, Vec<Sym>, f64)> = Vec::new();
    let mut preterminal: HashMap<usize, usize> = HashMap::new();
    for rule in g.rules() {
        if rule.rhs.len() == 1 {
            rules.push((rule.lhs, rule.rhs.clone(), rule.prob));
            continue;
        }
        let mut syms = Vec::with_capacity(rule.rhs.len());
        for &sym in &rule.rhs {
            match sym {
                Sym::N(_) => syms.push(sym),
                Sym::T(t) => {
                    let nt = match preterminal.get(&t) {
                        Some(&nt) => nt,
                        None => {
                            let nt = fresh(&mut names);
                            preterminal.insert(t, nt);
                            rules.push((nt, vec![Sym::T(t)], 1.0));
                            nt
                        }
                    };
                    syms.push(Sym::N(nt));
                }
            }
        }
        let mut acc = syms[0];
        for &next in &syms[1..syms.len() - 1] {
            let x = fresh(&mut names);
            rules.push((x, vec![acc, next], 1.0));
            acc = Sym::N(x);
        }
        rules.push((rule.lhs, vec![acc, syms[syms.len() - 1]], rule.prob));
    }

    let n = names.len();
    let reachable = g.reachable();
    let unit_edges: Vec<(usize, usize, f64)> = rules
        .iter()
        .filter_map(|(lhs, rhs, p)| match rhs[..] {
            [Sym::N(b)] if reachable.get(*lhs).copied().unwrap_or(true) => Some((*lhs, b, *p)),
            _ => None,
        })
        .collect();
    let closure = star_closure(n, &unit_edges)?;
    let mut folded: Vec<(usize, Vec<Sym>, f64)> = Vec::new();
    let mut slot: HashMap<(usize, Vec<Sym>), usize> = HashMap::new();
    for (lhs, rhs, p) in &rules {
        if matches!(rhs[..], [Sym::N(_)]) {
            continue;
        }
        for (a, row) in closure.iter().enumerate() {
            let w = row[*lhs];
            if w == 0.0 {
                continue;
            }
            let key = (a, rhs.clone());
            match slot.get(&key) {
                Some(&i) => folded[i].2 += w * p,
                None => {
                    slot.insert(key, folded.len());
                    folded.push((a, rhs.clone(), w * p));
                }
            }
        }
    }

    // Keep nonterminals reachable from the start, in their original order.
    let mut reach = vec![false; n];
    reach[g.start()] = true;
    let mut stack = vec![g.start()];
    while let Some(a) = stack.pop() {
        for (lhs, rhs, _) in &folded {
            if *lhs != a {
                continue;
            }
            for &s in rhs {
                if let Sym::N(b) = s {
                    if !reach[b] {
                        reach[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
    }
    let mut remap = vec![usize::MAX; n];
    let mut out = Pcfg::new(g.name());
    for (k, v) in g.metadata() {
        out.set_metadata(k.clone(), v.clone());
    }
    for t in g.terminals() {
        out.add_terminal(t.clone());
    }
    let mut rule_count = vec![0usize; n];
    for (lhs, _, _) in &folded {
        rule_count[*lhs] += 1;
    }
    for (i, (name, kind)) in names.iter().enumerate() {
        if reach[i] {
            let kind = if *kind == NodeKind::And && rule_count[i] != 1 {
                NodeKind::Or
            } else {
                *kind
            };
            remap[i] = out.add_nonterminal(name.clone(), kind);
        }
    }
    for (lhs, rhs, p) in folded {
        if !reach[lhs] {
            continue;
        }
        let rhs = rhs
            .into_iter()
            .map(|s| match s {
                Sym::N(b) => Sym::N(remap[b]),
                t => t,
            })
            .collect();
        let new_lhs = remap[lhs];
        let p = if out.nonterminals()[new_lhs].kind == NodeKind::And && (p - 1.0).abs() < 1e-9 {
            1.0
        } else {
            p.min(1.0)
        };
        out.add_rule(new_lhs, rhs, p);
    }
    out.set_start(remap[g.start()]);
    CnfGrammar::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(g: &Pcfg, s: &str) -> Vec<usize> {
        s.split_whitespace()
            .map(|t| g.terminal_id(t).unwrap())
            .collect()
    }

    #[test]
    fn binarizes_long_rule() {
        let g = Pcfg::from_productions("abc", "S -> a b c").unwrap();
        let cnf = to_cnf(&g).unwrap();
        let c = cnf.grammar();
        assert!(c.validate().is_empty(), "{:?}", c.validate());
        assert_eq!(c.rules().len(), 5);
        assert!(c.nonterminals().iter().any(|n| n.name == "X4"));
        assert_eq!(cnf.inside(&toks(&g, "a b c")).unwrap(), 1.0);
        assert_eq!(cnf.inside(&toks(&g, "a b")).unwrap(), 0.0);
    }

    #[test]
    fn cnf_input_is_unchanged() {
        let g = Pcfg::from_productions(
            "cnf",
            "S -> A B : 0.5\nS -> a : 0.5\nA -> a\nB -> b : 0.25\nB -> S B : 0.75",
        )
        .unwrap();
        let cnf = to_cnf(&g).unwrap();
        assert_eq!(cnf.grammar().rules(), g.rules());
        assert_eq!(cnf.grammar().nonterminals(), g.nonterminals());
    }

    #[test]
    fn inside_of_ambiguous_grammar() {
        let g = Pcfg::from_productions("ss", "S -> S S : 0.4\nS -> a : 0.6").unwrap();
        let cnf = to_cnf(&g).unwrap();
        let p = cnf.inside(&[0, 0, 0]).unwrap();
        assert!((p - 0.06912).abs() < 1e-15, "{p}");
        let (tree, vp) = cnf.viterbi(&[0, 0, 0]).unwrap();
        assert!((vp - 0.03456).abs() < 1e-15);
        // smaller split point first: S -> (a) (S S)
        assert_eq!(tree.children[0].leaves(), vec![0]);
        assert_eq!(tree.leaves(), vec![0, 0, 0]);
        assert!((tree.recompute_prob(cnf.grammar()) - vp).abs() <= 1e-12 * vp);
    }

    #[test]
    fn unit_chains_are_folded() {
        let g = Pcfg::from_productions(
            "units",
            "S -> A : 0.5\nS -> b c : 0.5\nA -> B\nB -> a : 0.3\nB -> S : 0.7",
        )
        .unwrap();
        let cnf = to_cnf(&g).unwrap();
        assert!(cnf.grammar().rules().iter().all(|r| !r.is_unit()));
        assert!(
            cnf.grammar().validate().is_empty(),
            "{:?}",
            cnf.grammar().validate()
        );
        // S => A => B => a: 0.5 * 0.3 / (1 - 0.5 * 0.7)
        let p = cnf.inside(&toks(&g, "a")).unwrap();
        assert!((p - 0.15 / 0.65).abs() < 1e-12, "{p}");
    }

    #[test]
    fn unknown_terminal_and_no_parse() {
        let g = Pcfg::from_productions("a", "S -> a").unwrap();
        let cnf = to_cnf(&g).unwrap();
        assert!(matches!(
            cnf.inside(&[0, 3]),
            Err(Error::UnknownTerminal {
                token: 3,
                position: 1
            })
        ));
        let mut g2 = g.clone();
        let b = g2.add_terminal("b");
        let cnf2 = to_cnf(&g2).unwrap();
        assert_eq!(cnf2.inside(&[b]).unwrap(), 0.0);
        assert!(matches!(cnf2.viterbi(&[b]), Err(Error::NoParse)));
    }

    #[test]
    fn rejects_non_cnf_wrap() {
        let g = Pcfg::from_productions("abc", "S -> a b").unwrap();
        assert!(matches!(CnfGrammar::new(g), Err(Error::NotCnf(_))));
    }

    #[test]
    fn log_likelihood_cases() {
        let g = Pcfg::from_productions("ab", "S -> a : 0.25\nS -> b : 0.75").unwrap();
        let one = log_likelihood(&g, &[Sentence::new(vec![0]), Sentence::new(vec![0])]).unwrap();
        assert!((one.total - 2.0 * 0.25f64.ln()).abs() < 1e-12);

        let certain = Pcfg::from_productions("a", "S -> a").unwrap();
        assert_eq!(
            log_likelihood(&certain, &[Sentence::new(vec![0])])
                .unwrap()
                .total,
            0.0
        );

        let mixed =
            log_likelihood(&g, &[Sentence::new(vec![0]), Sentence::new(vec![0, 1])]).unwrap();
        assert_eq!(mixed.total, f64::NEG_INFINITY);
        assert_eq!(mixed.zero_prob, vec![1]);
        assert!(!mixed.is_finite());

        assert!(matches!(log_likelihood(&g, &[]), Err(Error::EmptyCorpus)));
    }
}
