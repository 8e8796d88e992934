//! Grammar induction from label-sentence corpora.
//!
//! Sentences become paths over a growing lexicon in an [`RdsGraph`]. Each
//! iteration first merges units that fill the same context windows into
//! equivalence classes ([`bootstrap_generalize`]), then adopts the most
//! significant sub-path flagged by [`mex_scan`] as a pattern and rewires all
//! its occurrences. When nothing changes, patterns are emitted as And-nodes,
//! classes as Or-nodes and a root Or-node `S` gets one branch per distinct
//! final path, so every training sentence stays in the language.

mod bootstrap;
mod mex;
mod rds;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::grammar::{best_derivation, NodeKind, Pcfg, Sym};
use crate::{Error, Result, Sentence};

pub use bootstrap::{bootstrap_generalize, jaccard, EquivalenceClass};
pub use mex::{mex_scan, PatternCandidate};
pub use rds::{build_rds, RdsGraph, Unit, BEGIN, END};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiosParams {
    /// Divergence threshold on transition-probability drops.
    pub eta: f64,
    /// Significance level for pattern candidates.
    pub alpha: f64,
    /// Slots per context window.
    pub context_window: usize,
    /// Minimum overlap ratio between members of an equivalence class.
    pub bootstrap_threshold: f64,
    /// Cap on generalize-and-distill rounds; 0 memorizes the corpus.
    pub max_iterations: usize,
}

impl Default for AdiosParams {
    fn default() -> Self {
        AdiosParams {
            eta: 0.9,
            alpha: 0.08,
            context_window: 3,
            bootstrap_threshold: 0.65,
            max_iterations: 100,
        }
    }
}

impl AdiosParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.eta) {
            return Err(Error::InvalidParam(format!(
                "eta must be in (0, 1), got {}",
                self.eta
            )));
        }
        if !open_unit(self.alpha) {
            return Err(Error::InvalidParam(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.context_window < 2 {
            return Err(Error::InvalidParam(format!(
                "context_window must be >= 2, got {}",
                self.context_window
            )));
        }
        if !(self.bootstrap_threshold > 0.0 && self.bootstrap_threshold <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "bootstrap_threshold must be in (0, 1], got {}",
                self.bootstrap_threshold
            )));
        }
        Ok(())
    }

    /// Sets one parameter by name. Accepts the field names and the short
    /// forms `window`, `bootstrap` and `max-iterations`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad =
            |e: &dyn std::fmt::Display| Error::InvalidParam(format!("{key} = {value:?}: {e}"));
        let value = value.trim();
        match key.trim() {
            "eta" => self.eta = value.parse().map_err(|e| bad(&e))?,
            "alpha" => self.alpha = value.parse().map_err(|e| bad(&e))?,
            "context_window" | "window" => {
                self.context_window = value.parse().map_err(|e| bad(&e))?
            }
            "bootstrap_threshold" | "bootstrap" => {
                self.bootstrap_threshold = value.parse().map_err(|e| bad(&e))?
            }
            "max_iterations" | "max-iterations" => {
                self.max_iterations = value.parse().map_err(|e| bad(&e))?
            }
            other => return Err(Error::InvalidParam(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }
}

/// Counters from one induction run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InductionStats {
    pub iterations: usize,
    pub patterns: usize,
    pub classes: usize,
    pub root_branches: usize,
}

/// Induces a grammar over the corpus vocabulary. Terminal ids of the result
/// equal corpus token ids. Root branches are weighted by form frequency and
/// class branches uniformly; see [`estimate_probs`].
pub fn induce(corpus: &Corpus, params: &AdiosParams) -> Result<Pcfg> {
    induce_with_stats(corpus, params).map(|(g, _)| g)
}

pub fn induce_with_stats(corpus: &Corpus, params: &AdiosParams) -> Result<(Pcfg, InductionStats)> {
    params.validate()?;
    let mut graph = build_rds(corpus)?;
    let mut stats = InductionStats::default();
    while stats.iterations < params.max_iterations {
        stats.iterations += 1;
        let mut changed = false;
        for class in bootstrap_generalize(&graph, params) {
            let (_, hits) = graph.adopt_class(&class.members, &class.context);
            changed |= hits > 0;
        }
        if let Some(best) = mex_scan(&graph, params).into_iter().next() {
            graph.adopt_pattern(&best.units);
            stats.patterns += 1;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let g = emit(&graph, params, &mut stats)?;
    Ok((g, stats))
}

struct Emitter<'a> {
    graph: &'a RdsGraph,
    g: Pcfg,
    nonterminal_of: HashMap<usize, usize>,
    patterns: usize,
    classes: usize,
}

impl Emitter<'_> {
    fn symbol(&mut self, unit: usize) -> Sym {
        match &self.graph.units()[unit] {
            Unit::Terminal(t) => Sym::T(*t),
            Unit::Begin | Unit::End => unreachable!("markers never appear inside paths"),
            Unit::Pattern(seq) => {
                if let Some(&n) = self.nonterminal_of.get(&unit) {
                    return Sym::N(n);
                }
                let rhs: Vec<Sym> = seq.clone().into_iter().map(|u| self.symbol(u)).collect();
                self.patterns += 1;
                let n = self
                    .g
                    .add_nonterminal(format!("P{}", self.patterns), NodeKind::And);
                self.g.add_rule(n, rhs, 1.0);
                self.nonterminal_of.insert(unit, n);
                Sym::N(n)
            }
            Unit::Class(members) => {
                if let Some(&n) = self.nonterminal_of.get(&unit) {
                    return Sym::N(n);
                }
                let rhs: Vec<Sym> = members
                    .clone()
                    .into_iter()
                    .map(|u| self.symbol(u))
                    .collect();
                self.classes += 1;
                let n = self
                    .g
                    .add_nonterminal(format!("E{}", self.classes), NodeKind::Or);
                let p = 1.0 / rhs.len() as f64;
                for s in rhs {
                    self.g.add_rule(n, vec![s], p);
                }
                self.nonterminal_of.insert(unit, n);
                Sym::N(n)
            }
        }
    }
}

fn emit(graph: &RdsGraph, params: &AdiosParams, stats: &mut InductionStats) -> Result<Pcfg> {
    let mut g = Pcfg::new("adios");
    for name in graph.vocab() {
        g.add_terminal(name.clone());
    }
    let root = g.add_nonterminal("S", NodeKind::Or);
    g.set_start(root);
    g.set_metadata("eta", params.eta.to_string());
    g.set_metadata("alpha", params.alpha.to_string());
    g.set_metadata("context_window", params.context_window.to_string());
    g.set_metadata(
        "bootstrap_threshold",
        params.bootstrap_threshold.to_string(),
    );
    g.set_metadata("max_iterations", params.max_iterations.to_string());

    let mut forms: Vec<(&[usize], usize)> = Vec::new();
    for path in graph.paths() {
        let interior = &path[1..path.len() - 1];
        match forms.iter_mut().find(|(f, _)| *f == interior) {
            Some((_, n)) => *n += 1,
            None => forms.push((interior, 1)),
        }
    }
    let mut em = Emitter {
        graph,
        g,
        nonterminal_of: HashMap::new(),
        patterns: 0,
        classes: 0,
    };
    let branches: Vec<(Vec<Sym>, usize)> = forms
        .iter()
        .map(|(f, n)| (f.iter().map(|&u| em.symbol(u)).collect(), *n))
        .collect();
    let total = graph.paths().len() as f64;
    for (rhs, n) in &branches {
        em.g.add_rule(root, rhs.clone(), *n as f64 / total);
    }
    stats.classes = em.classes;
    stats.root_branches = branches.len();
    let mut g = em.g;
    g.set_metadata("iterations", stats.iterations.to_string());
    g.check()?;
    Ok(g)
}

/// Corpus sentences re-encoded as terminal ids of `g`, matched by name.
/// Sentences with tokens unknown to `g` are reported as out of language.
pub fn sentences_for(g: &Pcfg, corpus: &Corpus) -> Result<Vec<Sentence>> {
    let mut out = Vec::with_capacity(corpus.len());
    let mut bad = Vec::new();
    for (i, s) in corpus.sentences.iter().enumerate() {
        let mapped: Option<Sentence> = s
            .iter()
            .map(|&t| g.terminal_id(&corpus.vocab()[t]))
            .collect();
        match mapped {
            Some(m) => out.push(m),
            None => bad.push(i),
        }
    }
    if bad.is_empty() {
        Ok(out)
    } else {
        Err(Error::OutOfLanguage(bad))
    }
}

/// Re-estimates Or-branch probabilities from Viterbi derivations of the
/// corpus with add-one smoothing: `(count + 1) / Σ siblings (count + 1)`.
/// And rules keep probability 1.
pub fn estimate_probs(g: &Pcfg, corpus: &[Sentence]) -> Result<Pcfg> {
    g.check()?;
    let mut counts = vec![0usize; g.rules().len()];
    let mut bad = Vec::new();
    for (i, s) in corpus.iter().enumerate() {
        match best_derivation(g, s) {
            Ok(tree) => {
                for r in tree.rules() {
                    counts[r] += 1;
                }
            }
            Err(_) => bad.push(i),
        }
    }
    if !bad.is_empty() {
        return Err(Error::OutOfLanguage(bad));
    }
    let mut out = g.clone();
    for (n, nt) in g.nonterminals().iter().enumerate() {
        if nt.kind != NodeKind::Or {
            continue;
        }
        let rules = g.rules_of(n);
        let total: usize = rules.iter().map(|&r| counts[r] + 1).sum();
        for &r in rules {
            out.set_rule_prob(r, (counts[r] + 1) as f64 / total as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{sample, to_cnf};

    fn corpus(lines: &[(&str, usize)]) -> Corpus {
        let mut c = Corpus::new();
        for &(l, n) in lines {
            for _ in 0..n {
                c.push_names(&l.split_whitespace().collect::<Vec<_>>());
            }
        }
        c
    }

    fn names_to_ids(g: &Pcfg, text: &str) -> Vec<usize> {
        text.split_whitespace()
            .map(|t| g.terminal_id(t).unwrap())
            .collect()
    }

    #[test]
    fn params_validation_and_config() {
        assert!(AdiosParams::default().validate().is_ok());
        for bad in [
            AdiosParams {
                eta: 1.0,
                ..Default::default()
            },
            AdiosParams {
                alpha: 0.0,
                ..Default::default()
            },
            AdiosParams {
                context_window: 1,
                ..Default::default()
            },
            AdiosParams {
                bootstrap_threshold: 0.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let mut p = AdiosParams::default();
        p.apply_config("# comment\neta = 0.8\nwindow=4\n\nmax-iterations = 7\n")
            .unwrap();
        assert_eq!((p.eta, p.context_window, p.max_iterations), (0.8, 4, 7));
        assert!(p.set("gamma", "1").is_err());
        assert!(p.set("alpha", "x").is_err());
    }

    #[test]
    fn variable_middle_generalizes() {
        let truth =
            Pcfg::from_productions("truth", "S -> SIL a X c SIL\nX -> b : 0.5\nX -> d : 0.5")
                .unwrap();
        let mut c = Corpus::new();
        for seed in 0..30 {
            let s = sample(&truth, seed, 50).unwrap();
            c.push_names(&s.names(truth.terminals()));
        }
        let g = induce(&c, &AdiosParams::default()).unwrap();
        assert!(g.validate().is_empty());
        let cnf = to_cnf(&g).unwrap();
        for s in ["SIL a b c SIL", "SIL a d c SIL"] {
            assert!(cnf.inside(&names_to_ids(&g, s)).unwrap() > 0.0, "{s}");
        }
        let mut covered = 0;
        for seed in 1000..1100 {
            let s = sample(&truth, seed, 50).unwrap();
            let names = s.names(truth.terminals());
            let ids: Vec<usize> = names.iter().map(|n| g.terminal_id(n).unwrap()).collect();
            if cnf.inside(&ids).unwrap() > 0.0 {
                covered += 1;
            }
        }
        assert!(covered >= 90, "{covered}");
    }

    #[test]
    fn repeated_sentence() {
        let c = corpus(&[("SIL a b SIL", 5)]);
        let g = induce(&c, &AdiosParams::default()).unwrap();
        assert_eq!(g.rules_of(g.start()).len(), 1);
        let p = to_cnf(&g)
            .unwrap()
            .inside(&names_to_ids(&g, "SIL a b SIL"))
            .unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_memorize() {
        let c = corpus(&[("SIL a b SIL", 3), ("SIL b SIL", 1), ("SIL a b SIL", 1)]);
        let p = AdiosParams {
            max_iterations: 0,
            ..Default::default()
        };
        let g = induce(&c, &p).unwrap();
        assert_eq!(g.nonterminals().len(), 1);
        let probs: Vec<f64> = g
            .rules_of(g.start())
            .iter()
            .map(|&r| g.rules()[r].prob)
            .collect();
        assert_eq!(probs, vec![0.8, 0.2]);
        assert!(g
            .rules()
            .iter()
            .all(|r| r.rhs.iter().all(|s| s.is_terminal())));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            induce(&Corpus::new(), &AdiosParams::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn deterministic_output() {
        let c = corpus(&[
            ("SIL a b c SIL", 4),
            ("SIL a d c SIL", 3),
            ("SIL e a b c SIL", 2),
        ]);
        let a = induce(&c, &AdiosParams::default()).unwrap().to_text();
        let b = induce(&c, &AdiosParams::default()).unwrap().to_text();
        assert_eq!(a, b);
    }

    #[test]
    fn smoothing_formula() {
        let g = Pcfg::from_productions("g", "S -> a : 0.5\nS -> b : 0.5").unwrap();
        let s = |t: &str| Sentence::new(names_to_ids(&g, t));
        let corpus = vec![s("a"), s("a"), s("a"), s("b")];
        let est = estimate_probs(&g, &corpus).unwrap();
        assert!((est.rules()[0].prob - 4.0 / 6.0).abs() < 1e-12);
        assert!((est.rules()[1].prob - 2.0 / 6.0).abs() < 1e-12);
        let unused = estimate_probs(&g, &corpus[..3]).unwrap();
        assert!((unused.rules()[1].prob - 1.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_language_is_reported() {
        let g = Pcfg::from_productions("g", "S -> a b").unwrap();
        let ids = |t: &str| Sentence::new(names_to_ids(&g, t));
        let err = estimate_probs(&g, &[ids("a b"), ids("b a"), ids("a")]).unwrap_err();
        assert!(matches!(err, Error::OutOfLanguage(v) if v == vec![1, 2]));
    }

    #[test]
    fn recovers_branch_frequencies() {
        let truth = Pcfg::from_productions("t", "S -> a X\nX -> b : 0.7\nX -> c : 0.3").unwrap();
        let corpus: Vec<Sentence> = (0..1000)
            .map(|seed| sample(&truth, seed, 20).unwrap())
            .collect();
        let est = estimate_probs(&truth.with_uniform_branches(), &corpus).unwrap();
        let x = est.nonterminal_id("X").unwrap();
        let probs: Vec<f64> = est
            .rules_of(x)
            .iter()
            .map(|&r| est.rules()[r].prob)
            .collect();
        assert!(
            (probs[0] - 0.7).abs() < 0.05 && (probs[1] - 0.3).abs() < 0.05,
            "{probs:?}"
        );
    }
}
