//! Segment-collapse forward recurrences.
//!
//! `f(l, t)` is the total probability of labelings of frames `1..=t` whose
//! collapse is exactly `l`; `g(l)` is the total probability of labelings of
//! all frames whose collapse starts with `l`. With `k = last(l)` and `l-` the
//! prefix without it:
//!
//! ```text
//! f(l, t) = y_t[k] * (f(l, t-1) + f(l-, t-1))
//! g(l)    = sum_{t=1..T} f(l-, t-1) * y_t[k]
//! ```
//!
//! Rows are kept in log space.

use serde::{Deserialize, Serialize};

use super::ProbMatrix;
use crate::logspace::log_add;
use crate::{Error, Result, Sentence};

/// Linear-space prefix scores of one sentence prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixScore {
    pub prefix: Sentence,
    /// `f(l, t)` for `t = 0..=T`.
    pub f_row: Vec<f64>,
    pub g: f64,
    pub log_g: f64,
}

/// `f(ε, ·)`: 1 at `t = 0`, 0 afterwards.
pub(crate) fn root_row(frames: usize) -> Vec<f64> {
    let mut row = vec![f64::NEG_INFINITY; frames + 1];
    row[0] = 0.0;
    row
}

/// Extends a log `f` row by class `k`, returning the child row and `ln g`.
pub(crate) fn extend_row(
    log_y: &[f64],
    classes: usize,
    parent: &[f64],
    k: usize,
) -> (Vec<f64>, f64) {
    let frames = parent.len() - 1;
    let mut row = vec![f64::NEG_INFINITY; frames + 1];
    let mut log_g = f64::NEG_INFINITY;
    for t in 1..=frames {
        let y = log_y[(t - 1) * classes + k];
        let from_parent = parent[t - 1];
        row[t] = y + log_add(row[t - 1], from_parent);
        if from_parent > f64::NEG_INFINITY {
            log_g = log_add(log_g, from_parent + y);
        }
    }
    (row, log_g)
}

pub(crate) fn check_sentence(l: &[usize], classes: usize) -> Result<()> {
    if l.is_empty() {
        return Err(Error::InvalidSentence("empty sentence".into()));
    }
    if let Some(&k) = l.iter().find(|&&k| k >= classes) {
        return Err(Error::LabelOutOfRange { label: k, classes });
    }
    if let Some(i) = l.windows(2).position(|w| w[0] == w[1]) {
        return Err(Error::InvalidSentence(format!(
            "tokens {i} and {} are equal; a segment collapse cannot produce them",
            i + 1
        )));
    }
    Ok(())
}

/// Computes `f(l, ·)` and `g(l)` for a non-empty sentence of class ids.
pub fn prefix_probabilities(m: &ProbMatrix, l: &[usize]) -> Result<PrefixScore> {
    check_sentence(l, m.classes())?;
    let log_y = m.log_data();
    let mut row = root_row(m.frames());
    let mut log_g = 0.0;
    for &k in l {
        let (next, lg) = extend_row(&log_y, m.classes(), &row, k);
        row = next;
        log_g = lg;
    }
    Ok(PrefixScore {
        prefix: Sentence::new(l.to_vec()),
        f_row: row.iter().map(|v| v.exp()).collect(),
        g: log_g.exp(),
        log_g,
    })
}
