use std::collections::{BTreeSet, HashMap};

use statrs::distribution::{Binomial, DiscreteCDF};

use super::rds::{RdsGraph, BEGIN, END};
use super::AdiosParams;

/// A sub-path flagged by the divergence criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternCandidate {
    pub units: Vec<usize>,
    /// `D_R`: drop of the rightward transition probability past the end.
    pub right_ratio: f64,
    /// `D_L`: drop of the leftward transition probability past the start.
    pub left_ratio: f64,
    /// Family-wise p-value of the weaker of the two drops.
    pub significance: f64,
    /// Number of occurrences of the sub-path.
    pub support: usize,
    /// `(path, position)` of the leftmost occurrence on a search path.
    pub first_occurrence: (usize, usize),
}

struct Counter<'a> {
    graph: &'a RdsGraph,
    memo: HashMap<Vec<usize>, usize>,
}

impl Counter<'_> {
    fn count(&mut self, seq: &[usize]) -> usize {
        if let Some(&c) = self.memo.get(seq) {
            return c;
        }
        let c = self.graph.count(seq);
        self.memo.insert(seq.to_vec(), c);
        c
    }
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
fn binomial_cdf(k: usize, n: usize, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    match Binomial::new(p.min(1.0), n as u64) {
        Ok(b) => b.cdf(k as u64),
        Err(_) => 1.0,
    }
}

struct Test {
    units: Vec<usize>,
    right_ratio: f64,
    left_ratio: f64,
    p_value: f64,
    support: usize,
    at: (usize, usize),
}

/// Scans every distinct path for sub-paths `[i..j]` (length >= 2, markers
/// excluded) where both the rightward probability past `j` and the leftward
/// probability before `i` drop below `eta` times their value inside the
/// sub-path. A continuation into a begin or end marker counts as zero. Each
/// drop gets a one-sided binomial p-value over the continuation counts; the
/// larger of the two is multiplied by the number of sub-paths tested, and
/// candidates at or below `alpha` are returned, most significant first, ties
/// by support then leftmost occurrence.
pub fn mex_scan(graph: &RdsGraph, params: &AdiosParams) -> Vec<PatternCandidate> {
    let mut counter = Counter {
        graph,
        memo: HashMap::new(),
    };
    let mut seen_paths = BTreeSet::new();
    let mut seen_tests = BTreeSet::new();
    let mut tests = Vec::new();
    for (p, path) in graph.paths().iter().enumerate() {
        if !seen_paths.insert(path.as_slice()) {
            continue;
        }
        let n = path.len();
        for i in 1..n.saturating_sub(2) {
            for j in i + 1..n - 1 {
                let key = &path[i - 1..=j + 1];
                if !seen_tests.insert(key) {
                    continue;
                }
                let support = counter.count(&path[i..=j]);
                // Rightward: P_R(i;j) = l(i..j) / l(i..j-1).
                let inner_r = support as f64 / counter.count(&path[i..j]) as f64;
                let cont_r = if path[j + 1] == END {
                    0
                } else {
                    counter.count(&path[i..=j + 1])
                };
                let next_r = cont_r as f64 / support as f64;
                let d_r = next_r / inner_r;
                // Leftward: P_L(j;i) = l(i..j) / l(i+1..j).
                let inner_l = support as f64 / counter.count(&path[i + 1..=j]) as f64;
                let cont_l = if path[i - 1] == BEGIN {
                    0
                } else {
                    counter.count(&path[i - 1..=j])
                };
                let next_l = cont_l as f64 / support as f64;
                let d_l = next_l / inner_l;
                let p_r = binomial_cdf(cont_r, support, params.eta * inner_r);
                let p_l = binomial_cdf(cont_l, support, params.eta * inner_l);
                tests.push(Test {
                    units: path[i..=j].to_vec(),
                    right_ratio: d_r,
                    left_ratio: d_l,
                    p_value: if d_r < params.eta && d_l < params.eta {
                        p_r.max(p_l)
                    } else {
                        1.0
                    },
                    support,
                    at: (p, i),
                });
            }
        }
    }

    let family = tests.len().max(1) as f64;
    let mut best: HashMap<Vec<usize>, PatternCandidate> = HashMap::new();
    for t in tests {
        let significance = (t.p_value * family).min(1.0);
        if significance > params.alpha {
            continue;
        }
        let cand = PatternCandidate {
            units: t.units,
            right_ratio: t.right_ratio,
            left_ratio: t.left_ratio,
            significance,
            support: t.support,
            first_occurrence: t.at,
        };
        match best.get_mut(&cand.units) {
            Some(old) if old.significance <= cand.significance => {}
            Some(old) => {
                let at = old.first_occurrence;
                *old = cand;
                old.first_occurrence = at;
            }
            None => {
                best.insert(cand.units.clone(), cand);
            }
        }
    }
    let mut out: Vec<PatternCandidate> = best.into_values().collect();
    out.sort_by(|a, b| {
        a.significance
            .total_cmp(&b.significance)
            .then(b.support.cmp(&a.support))
            .then(a.first_occurrence.cmp(&b.first_occurrence))
            .then(b.units.len().cmp(&a.units.len()))
            .then_with(|| a.units.cmp(&b.units))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::induction::build_rds;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(lines: &[(&str, usize)]) -> Corpus {
        let mut c = Corpus::new();
        for &(l, n) in lines {
            for _ in 0..n {
                c.push_names(&l.split_whitespace().collect::<Vec<_>>());
            }
        }
        c
    }

    fn names(g: &RdsGraph, units: &[usize]) -> String {
        units
            .iter()
            .map(|&u| g.unit_name(u))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn two_disjoint_motifs() {
        let g = build_rds(&corpus(&[("a b c", 20), ("d e f", 20)])).unwrap();
        let cands = mex_scan(&g, &AdiosParams::default());
        let found: Vec<String> = cands.iter().map(|c| names(&g, &c.units)).collect();
        assert_eq!(found, vec!["a b c", "d e f"]);
        for c in &cands {
            assert_eq!(c.support, 20);
            assert_eq!(c.right_ratio, 0.0);
            assert_eq!(c.left_ratio, 0.0);
            assert!(c.significance <= 0.08);
        }
    }

    #[test]
    fn single_sentence_has_no_support() {
        let g = build_rds(&corpus(&[("a b c d", 1)])).unwrap();
        assert!(mex_scan(&g, &AdiosParams::default()).is_empty());
    }

    #[test]
    fn random_unigrams_pass_nothing() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = Corpus::new();
            let symbols = ["a", "b", "c", "d", "e", "f"];
            for _ in 0..500 {
                let len = rng.random_range(3..=8);
                let s: Vec<&str> = (0..len).map(|_| symbols[rng.random_range(0..6)]).collect();
                c.push_names(&s);
            }
            let g = build_rds(&c).unwrap();
            let cands = mex_scan(&g, &AdiosParams::default());
            assert!(cands.is_empty(), "seed {seed}: {:?}", cands.first());
        }
    }
}
