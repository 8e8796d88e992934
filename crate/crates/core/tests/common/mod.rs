#![allow(dead_code)]

use std::collections::HashMap;

use pigrammar::corpus::collapse_segments;
use pigrammar::decoder::ProbMatrix;
use pigrammar::grammar::{sample, NodeKind, Pcfg, Sym};
use rand::Rng;

pub mod checks;

pub const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

/// Row-stochastic matrix with entries bounded away from zero, classes named
/// `a, b, ...`.
pub fn random_matrix<R: Rng>(rng: &mut R, frames: usize, classes: usize) -> ProbMatrix {
    let mut data = Vec::with_capacity(frames * classes);
    for _ in 0..frames {
        let row: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / sum));
    }
    ProbMatrix::with_names(
        frames,
        classes,
        data,
        NAMES[..classes].iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}

fn normalized<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// A valid grammar over the first `terminals` names with at most
/// `max_rules` rules, right-hand sides of length 1 to 3, and possibly unit
/// rules and recursion.
pub fn random_grammar<R: Rng>(rng: &mut R, terminals: usize, max_rules: usize) -> Pcfg {
    loop {
        let n_nt = rng.random_range(1..=3usize).min(max_rules);
        let mut counts: Vec<usize> = (0..n_nt).map(|_| rng.random_range(1..=3)).collect();
        while counts.iter().sum::<usize>() > max_rules {
            let i = counts.iter().position(|&c| c > 1).unwrap();
            counts[i] -= 1;
        }
        let mut g = Pcfg::new("random");
        for name in &NAMES[..terminals] {
            g.add_terminal(*name);
        }
        for (i, &c) in counts.iter().enumerate() {
            let kind = if c == 1 { NodeKind::And } else { NodeKind::Or };
            g.add_nonterminal(format!("N{i}"), kind);
        }
        for (lhs, &c) in counts.iter().enumerate() {
            let probs = if c == 1 {
                vec![1.0]
            } else {
                normalized(rng, c)
            };
            for p in probs {
                let len = rng.random_range(1..=3);
                let rhs = (0..len)
                    .map(|_| {
                        if rng.random_bool(0.65) {
                            Sym::T(rng.random_range(0..terminals))
                        } else {
                            Sym::N(rng.random_range(0..n_nt))
                        }
                    })
                    .collect();
                g.add_rule(lhs, rhs, p);
            }
        }
        if g.validate().is_empty() {
            return g;
        }
    }
}

/// A valid CNF grammar: every nonterminal has one or two lexical rules and
/// up to two binary rules.
pub fn random_cnf_grammar<R: Rng>(rng: &mut R, terminals: usize) -> Pcfg {
    let n_nt = rng.random_range(1..=3usize);
    let mut g = Pcfg::new("random-cnf");
    for name in &NAMES[..terminals] {
        g.add_terminal(*name);
    }
    let mut rhss: Vec<Vec<Vec<Sym>>> = Vec::new();
    for _ in 0..n_nt {
        let mut rules = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            rules.push(vec![Sym::T(rng.random_range(0..terminals))]);
        }
        for _ in 0..rng.random_range(0..=2) {
            rules.push(vec![
                Sym::N(rng.random_range(0..n_nt)),
                Sym::N(rng.random_range(0..n_nt)),
            ]);
        }
        rules.dedup();
        rhss.push(rules);
    }
    for (i, rules) in rhss.iter().enumerate() {
        let kind = if rules.len() == 1 {
            NodeKind::And
        } else {
            NodeKind::Or
        };
        g.add_nonterminal(format!("N{i}"), kind);
    }
    for (lhs, rules) in rhss.into_iter().enumerate() {
        let probs = if rules.len() == 1 {
            vec![1.0]
        } else {
            normalized(rng, rules.len())
        };
        for (rhs, p) in rules.into_iter().zip(probs) {
            g.add_rule(lhs, rhs, p);
        }
    }
    assert!(g.validate().is_empty(), "{:?}", g.validate());
    g
}

/// Probabilities of every parse tree of `s` rooted at `sym`, listed one by
/// one. Only for CNF grammars.
pub fn enumerate_trees(g: &Pcfg, sym: usize, s: &[usize]) -> Vec<f64> {
    let mut out = Vec::new();
    for &r in g.rules_of(sym) {
        let rule = &g.rules()[r];
        match rule.rhs[..] {
            [Sym::T(a)] if s.len() == 1 && s[0] == a => out.push(rule.prob),
            [Sym::N(b), Sym::N(c)] if s.len() >= 2 => {
                for split in 1..s.len() {
                    let left = enumerate_trees(g, b, &s[..split]);
                    if left.is_empty() {
                        continue;
                    }
                    let right = enumerate_trees(g, c, &s[split..]);
                    for pl in &left {
                        for pr in &right {
                            out.push(rule.prob * pl * pr);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Every labeling in `K^T`, in lexicographic order.
pub fn labelings(frames: usize, classes: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = classes.pow(frames as u32);
    (0..total).map(move |mut code| {
        let mut y = vec![0; frames];
        for slot in y.iter_mut().rev() {
            *slot = code % classes;
            code /= classes;
        }
        y
    })
}

fn labeling_prob(m: &ProbMatrix, y: &[usize]) -> f64 {
    y.iter().enumerate().map(|(t, &k)| m.get(t, k)).product()
}

/// Brute-force prefix tables of a matrix.
pub struct Enumeration {
    /// `f[t][l]`: mass of labelings of the first `t` frames collapsing to `l`.
    pub f: Vec<HashMap<Vec<usize>, f64>>,
    /// `g[l]`: mass of full labelings whose collapse starts with `l`.
    pub g: HashMap<Vec<usize>, f64>,
}

pub fn enumerate(m: &ProbMatrix) -> Enumeration {
    let (frames, classes) = (m.frames(), m.classes());
    let mut f = vec![HashMap::new()];
    for t in 1..=frames {
        let mut table: HashMap<Vec<usize>, f64> = HashMap::new();
        for y in labelings(t, classes) {
            *table
                .entry(collapse_segments(&y).into_tokens())
                .or_default() += labeling_prob(m, &y);
        }
        f.push(table);
    }
    let mut g: HashMap<Vec<usize>, f64> = HashMap::new();
    for y in labelings(frames, classes) {
        let p = labeling_prob(m, &y);
        let l = collapse_segments(&y).into_tokens();
        for n in 1..=l.len() {
            *g.entry(l[..n].to_vec()).or_default() += p;
        }
    }
    Enumeration { f, g }
}

/// The best grammatical sentence by enumeration: maximizes
/// `ln P(l | data) + weight * ln P(l | G)` over all collapses `l`, ties to the
/// lexicographically smaller sentence. Returns the winner, its score and the
/// runner-up score.
pub fn brute_best(
    e: &Enumeration,
    frames: usize,
    weight: f64,
    grammar_prob: impl Fn(&[usize]) -> f64,
) -> Option<(Vec<usize>, f64, f64)> {
    let mut scored: Vec<(f64, Vec<usize>)> = e.f[frames]
        .iter()
        .filter_map(|(l, &p)| {
            let gp = grammar_prob(l);
            (gp > 0.0).then(|| {
                (
                    p.ln() + if weight > 0.0 { weight * gp.ln() } else { 0.0 },
                    l.clone(),
                )
            })
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut it = scored.into_iter();
    let (best, l) = it.next()?;
    let second = it.next().map_or(f64::NEG_INFINITY, |s| s.0);
    Some((l, best, second))
}

/// Up to `n` sampled sentences; derivations that exceed the depth limit are
/// skipped. `None` if fewer than `n` are found in `20 * n` tries.
pub fn sample_sentences(g: &Pcfg, n: usize, seed: u64) -> Option<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for i in 0..(20 * n as u64) {
        if let Ok(s) = sample(g, seed.wrapping_mul(1000).wrapping_add(i), 40) {
            if s.len() <= 12 {
                out.push(s.into_tokens());
            }
        }
        if out.len() == n {
            return Some(out);
        }
    }
    None
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
