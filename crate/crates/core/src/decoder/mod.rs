//! Grammar-constrained decoding of per-frame class probabilities.
//!
//! [`gep_parse`] searches the tree of label-sentence prefixes best-first. A
//! prefix is scored by the probability mass of all frame labelings whose
//! segment collapse starts with it, times an upper bound on its grammar
//! probability raised to `prior_weight`. Only extensions that the Earley
//! chart of the grammar allows are explored, so every complete candidate is
//! grammatical. The first complete sentence whose score is at least the best
//! open prefix score is the exact argmax.

mod align;
mod io;
mod prefix;
mod search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grammar::Pcfg;
use crate::{Error, Result, Sentence};

pub use align::align_frames;
pub use prefix::{prefix_probabilities, PrefixScore};
pub use search::{gep_parse, Decoder};

/// Matrix entries are floored at this value, and rows renormalized, before
/// taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row sums must be within this distance of 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// A `T x K` row-stochastic matrix of per-frame class probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    class_names: Vec<String>,
}

/// Default class names `PI0 .. PI{K-1}`.
pub fn default_class_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("PI{i}")).collect()
}

impl ProbMatrix {
    /// Row-major constructor. Class names default to `PI<k>`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_names(rows, cols, data, default_class_names(cols))
    }

    pub fn with_names(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if rows < 1 {
            return Err(Error::InvalidMatrix("need at least one frame".into()));
        }
        if cols < 2 {
            return Err(Error::InvalidMatrix("need at least two classes".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if class_names.len() != cols {
            return Err(Error::InvalidMatrix(format!(
                "{} class names for {cols} classes",
                class_names.len()
            )));
        }
        for (t, row) in data.chunks(cols).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidMatrix(format!(
                    "frame {t}: entry {v} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidMatrix(format!(
                    "frame {t}: row sums to {sum}"
                )));
            }
        }
        Ok(ProbMatrix {
            rows,
            cols,
            data,
            class_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Replaces the class names.
    pub fn named(mut self, names: &[&str]) -> Result<Self> {
        if names.len() != self.cols {
            return Err(Error::InvalidMatrix(format!(
                "{} class names for {} classes",
                names.len(),
                self.cols
            )));
        }
        self.class_names = names.iter().map(|s| s.to_string()).collect();
        Ok(self)
    }

    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.cols {
            return Err(Error::InvalidMatrix(format!(
                "{} class names for {} classes",
                names.len(),
                self.cols
            )));
        }
        self.class_names = names;
        Ok(())
    }

    /// Number of frames `T`.
    pub fn frames(&self) -> usize {
        self.rows
    }

    /// Number of classes `K`.
    pub fn classes(&self) -> usize {
        self.cols
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.data[t * self.cols + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Per-frame argmax; ties go to the lowest class id.
    pub fn argmax_labels(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|t| {
                let row = self.row(t);
                let mut best = 0;
                for k in 1..self.cols {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// Natural logs of the entries floored and renormalized per row,
    /// row-major.
    pub(crate) fn log_data(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.cols) {
            let norm = row.iter().map(|&v| v.max(PROB_FLOOR)).sum::<f64>().ln();
            out.extend(row.iter().map(|&v| v.max(PROB_FLOOR).ln() - norm));
        }
        out
    }
}

/// Numerically stable softmax of a score vector.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InvalidParam("softmax of an empty vector".into()));
    }
    if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "softmax input {v} is not finite"
        )));
    }
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - hi).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GepConfig {
    pub use_grammar_prior: bool,
    /// Exponent on the grammar sentence probability in the score.
    pub prior_weight: f64,
    /// Cap on open prefixes; beyond it the lowest-scoring quarter is pruned.
    pub max_queue: usize,
    /// Return per-frame argmax labels instead of failing when no grammatical
    /// sentence fits the matrix.
    pub fallback_on_failure: bool,
}

impl Default for GepConfig {
    fn default() -> Self {
        GepConfig {
            use_grammar_prior: true,
            prior_weight: 1.0,
            max_queue: 100_000,
            fallback_on_failure: true,
        }
    }
}

impl GepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "prior_weight must be >= 0, got {}",
                self.prior_weight
            )));
        }
        if self.max_queue < 1 {
            return Err(Error::InvalidParam("max_queue must be >= 1".into()));
        }
        Ok(())
    }

    /// Effective exponent on the grammar probability.
    pub(crate) fn weight(&self) -> f64 {
        if self.use_grammar_prior {
            self.prior_weight
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseResult {
    /// Best sentence as matrix class ids, without `SIL`.
    pub sentence: Sentence,
    /// One class id per frame.
    pub frame_labels: Vec<usize>,
    /// Probability mass of labelings collapsing to `sentence`; may
    /// underflow to 0 on long matrices, see `data_log_prob`.
    pub data_prob: f64,
    pub data_log_prob: f64,
    /// Inside probability of the (`SIL`-wrapped) sentence.
    pub grammar_prob: f64,
    /// `data_log_prob + weight * ln(grammar_prob)`.
    pub combined_score: f64,
    pub fallback_used: bool,
    /// Set when the open-prefix queue overflowed and was pruned.
    pub pruned: bool,
    /// Number of prefixes popped from the queue.
    pub expansions: usize,
}

/// Parses the matrix and aligns the best sentence to frames.
pub fn refine(m: &ProbMatrix, g: &Pcfg, cfg: &GepConfig) -> Result<ParseResult> {
    gep_parse(m, g, cfg)
}

/// Parses many matrices against one grammar on `jobs` worker threads
/// (0 = one per logical CPU). Results keep input order.
pub fn refine_batch(
    matrices: &[ProbMatrix],
    g: &Pcfg,
    cfg: &GepConfig,
    jobs: usize,
) -> Result<Vec<Result<ParseResult>>> {
    let decoder = Decoder::new(g)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    Ok(pool.install(|| matrices.par_iter().map(|m| decoder.parse(m, cfg)).collect()))
}

pub use io::{
    load_matrix, matrix_from_bytes, matrix_from_csv, matrix_to_bytes, matrix_to_csv, save_matrix,
};
