use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NodeKind, Pcfg, Sym};
use crate::{Error, Result, Sentence};

/// Samples one sentence top-down from the start symbol with a seeded RNG.
pub fn sample(g: &Pcfg, seed: u64, max_depth: usize) -> Result<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(g, &mut rng, max_depth)
}

/// Samples with a caller-provided RNG. And-nodes expand all children in
/// order; Or-nodes pick one branch according to its probability. A
/// derivation deeper than `max_depth` nonterminal expansions is an error.
pub fn sample_with<R: Rng + ?Sized>(g: &Pcfg, rng: &mut R, max_depth: usize) -> Result<Sentence> {
    let mut out = Vec::new();
    let mut stack = vec![(Sym::N(g.start()), 0usize)];
    while let Some((sym, depth)) = stack.pop() {
        let n = match sym {
            Sym::T(t) => {
                out.push(t);
                continue;
            }
            Sym::N(n) => n,
        };
        if depth >= max_depth {
            return Err(Error::DepthExceeded(max_depth));
        }
        let rules = g.rules_of(n);
        let rule = match (g.nonterminals()[n].kind, rules) {
            (_, []) => {
                return Err(Error::InvalidGrammar(vec![format!(
                    "nonterminal {} has no rules",
                    g.nonterminals()[n].name
                )]))
            }
            (NodeKind::And, [r, ..]) => *r,
            (NodeKind::Or, rules) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = *rules.last().unwrap();
                for &r in rules {
                    acc += g.rules()[r].prob;
                    if u < acc {
                        chosen = r;
                        break;
                    }
                }
                chosen
            }
        };
        for &child in g.rules()[rule].rhs.iter().rev() {
            stack.push((child, depth + 1));
        }
    }
    Ok(Sentence::new(out))
}
