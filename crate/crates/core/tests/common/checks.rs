//! One randomized instance per call for each oracle comparison. Every
//! function returns `Err` with a description on the first mismatch.

use pigrammar::decoder::ProbMatrix;
use pigrammar::decoder::{gep_parse, prefix_probabilities, GepConfig};
use pigrammar::grammar::earley::EarleyTables;
use pigrammar::grammar::{to_cnf, CnfGrammar, Pcfg};
use pigrammar::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const TOL: f64 = 1e-9;

/// Random decoding instance: at most 4 classes, 8 frames and 8 rules.
pub fn gep_case(seed: u64) -> (ProbMatrix, Pcfg) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = rng.random_range(2..=4usize);
    let frames = rng.random_range(1..=8usize);
    let m = random_matrix(&mut rng, frames, classes);
    let g = random_grammar(&mut rng, classes, 8);
    (m, g)
}

/// Brute force over `K^T` labelings against the decoder: `f(l, t)`, `g(l)`
/// and the best grammatical sentence for prior weights 0, 1 and a random
/// weight.
pub fn gep_instance(seed: u64) -> Result<(), String> {
    let (m, g) = gep_case(seed);
    let frames = m.frames();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let e = enumerate(&m);

    for (l, &brute_g) in &e.g {
        let ps = prefix_probabilities(&m, l).map_err(|err| err.to_string())?;
        for t in 0..=frames {
            let brute_f = e.f[t].get(l).copied().unwrap_or(0.0);
            if !close(ps.f_row[t], brute_f, TOL) {
                return Err(format!(
                    "f({l:?}, {t}) = {} vs brute {brute_f}",
                    ps.f_row[t]
                ));
            }
        }
        if !close(ps.g, brute_g, TOL) {
            return Err(format!("g({l:?}) = {} vs brute {brute_g}", ps.g));
        }
    }

    let cnf = to_cnf(&g).map_err(|err| err.to_string())?;
    let grammar_prob = |l: &[usize]| cnf.inside(l).unwrap_or(0.0);
    for weight in [0.0, 1.0, rng.random_range(0.3..3.0)] {
        let cfg = GepConfig {
            use_grammar_prior: weight > 0.0,
            prior_weight: weight,
            fallback_on_failure: false,
            ..GepConfig::default()
        };
        let parsed = gep_parse(&m, &g, &cfg);
        match (brute_best(&e, frames, weight, grammar_prob), parsed) {
            (None, Err(Error::NoGrammaticalParse)) => {}
            (Some((l, best, second)), Ok(r)) => {
                if !close(r.combined_score, best, TOL) {
                    return Err(format!(
                        "w={weight}: score {} for {:?} vs brute {best} for {l:?}",
                        r.combined_score, r.sentence
                    ));
                }
                if best - second > TOL && r.sentence.tokens() != l.as_slice() {
                    return Err(format!(
                        "w={weight}: sentence {:?} vs brute {l:?}",
                        r.sentence
                    ));
                }
                let brute_data = e.f[frames].get(r.sentence.tokens()).copied().unwrap_or(0.0);
                if !close(r.data_prob, brute_data, TOL) {
                    return Err(format!("data_prob {} vs brute {brute_data}", r.data_prob));
                }
                if !close(r.grammar_prob, grammar_prob(&r.sentence), TOL) {
                    return Err(format!(
                        "grammar_prob {} vs inside {}",
                        r.grammar_prob,
                        grammar_prob(&r.sentence)
                    ));
                }
                if r.frame_labels.len() != frames {
                    return Err("frame label count".into());
                }
            }
            (brute, parsed) => {
                return Err(format!("w={weight}: brute {brute:?} vs decoder {parsed:?}"));
            }
        }
    }
    Ok(())
}

/// `g(l) = f(l, T) + sum over k != last(l) of g(l k)` for every prefix `l`
/// of length up to `T`, and the single-token `g` values sum to 1.
pub fn conservation_instance(seed: u64) -> Result<(), String> {
    let (m, _) = gep_case(seed);
    let (frames, classes) = (m.frames(), m.classes());
    let g_of = |l: &[usize]| {
        prefix_probabilities(&m, l)
            .map(|p| p.g)
            .map_err(|e| e.to_string())
    };
    let mut frontier: Vec<Vec<usize>> = (0..classes).map(|k| vec![k]).collect();
    let total = frontier
        .iter()
        .map(|l| g_of(l))
        .sum::<Result<f64, String>>()?;
    if !close(total, 1.0, TOL) {
        return Err(format!("sum of single-token g = {total}"));
    }
    while let Some(l) = frontier.pop() {
        let ps = prefix_probabilities(&m, &l).map_err(|e| e.to_string())?;
        let mut sum = ps.f_row[frames];
        for k in (0..classes).filter(|&k| Some(&k) != l.last()) {
            let mut lk = l.clone();
            lk.push(k);
            sum += g_of(&lk)?;
            if lk.len() <= frames {
                frontier.push(lk);
            }
        }
        if !close(ps.g, sum, TOL) {
            return Err(format!("g({l:?}) = {} but f + children = {sum}", ps.g));
        }
    }
    Ok(())
}

/// CKY inside and Viterbi against explicit parse-tree enumeration on a random
/// CNF grammar. Returns the number of sentences with at least one tree.
pub fn inside_instance(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terminals = rng.random_range(2..=6usize);
    let g = random_cnf_grammar(&mut rng, terminals);
    let cnf = CnfGrammar::new(g.clone()).map_err(|e| e.to_string())?;
    let mut sentences: Vec<Vec<usize>> = (0..10)
        .map(|_| {
            let len = rng.random_range(1..=6);
            (0..len).map(|_| rng.random_range(0..terminals)).collect()
        })
        .collect();
    if let Some(sampled) = sample_sentences(&g, 10, seed) {
        sentences.extend(sampled.into_iter().filter(|s| s.len() <= 6));
    }
    let mut parsed = 0;
    for s in &sentences {
        let trees = enumerate_trees(&g, g.start(), s);
        let sum: f64 = trees.iter().sum();
        let max = trees.iter().copied().fold(0.0, f64::max);
        let inside = cnf.inside(s).map_err(|e| e.to_string())?;
        if !close(inside, sum, TOL) || !close_rel(inside, sum, TOL) && sum > 0.0 {
            return Err(format!("inside {s:?} = {inside} vs enumeration {sum}"));
        }
        match cnf.viterbi(s) {
            Ok((tree, p)) => {
                parsed += 1;
                if trees.is_empty() || !close(p, max, TOL) || !close_rel(p, max, TOL) {
                    return Err(format!("viterbi {s:?} = {p} vs enumeration max {max}"));
                }
                if tree.leaves() != *s || !close_rel(tree.recompute_prob(&g), p, TOL) {
                    return Err(format!("viterbi tree of {s:?} inconsistent"));
                }
            }
            Err(Error::NoParse) if trees.is_empty() => {}
            Err(e) => return Err(format!("viterbi {s:?}: {e} with {} trees", trees.len())),
        }
    }
    Ok(parsed)
}

/// Sentence probabilities of a random grammar (Earley on the original rules)
/// against CKY on its CNF conversion, over 10 sampled sentences.
pub fn cnf_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (g, sentences) = loop {
        let terminals = rng.random_range(2..=4usize);
        let g = random_grammar(&mut rng, terminals, 10);
        if let Some(s) = sample_sentences(&g, 10, rng.random()) {
            break (g, s);
        }
    };
    let cnf = to_cnf(&g).map_err(|e| e.to_string())?;
    CnfGrammar::new(cnf.grammar().clone()).map_err(|e| format!("conversion output: {e}"))?;
    let earley = EarleyTables::new(&g).map_err(|e| e.to_string())?;
    for s in &sentences {
        let before = earley.sentence_probability(s);
        let after = cnf.inside(s).map_err(|e| e.to_string())?;
        if before <= 0.0 || !close_rel(before, after, TOL) {
            return Err(format!(
                "{s:?}: original {before} vs CNF {after}\n{}",
                g.to_text()
            ));
        }
    }
    Ok(())
}
