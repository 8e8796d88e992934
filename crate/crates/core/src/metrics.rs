//! Frame-wise classification metrics.
//!
//! Macro F1 is the harmonic mean of macro precision and macro recall. The
//! mean of per-class F1 scores is reported alongside as `mean_class_f1`.
//! A class absent from both ground truth and predictions is left out of the
//! macro averages; a class present in only one of them counts with zero
//! precision or recall.

use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Counts indexed `[ground truth][prediction]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn add(&mut self, gt: usize, pred: usize) {
        self.counts[gt][pred] += 1;
    }

    /// Adds another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(orow) {
                *c += o;
            }
        }
    }
}

pub fn confusion(pred: &[usize], gt: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch(pred.len(), gt.len()));
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&p, &g) in pred.iter().zip(gt) {
        for label in [p, g] {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        cm.add(g, p);
    }
    Ok(cm)
}

/// Parses whitespace-separated integer frame labels.
pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        for field in line.split_whitespace() {
            out.push(field.parse().map_err(|_| Error::Format {
                line: i + 1,
                msg: format!("bad label {field:?}"),
            })?);
        }
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}

/// One label per line.
pub fn labels_to_text(labels: &[usize]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro_pr: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub mean_class_f1: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(cm: &ConfusionMatrix) -> Result<EvalReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidParam("empty confusion matrix".into()));
    }
    let k = cm.classes();
    let row = |i: usize| cm.counts[i].iter().sum::<u64>();
    let col = |j: usize| cm.counts.iter().map(|r| r[j]).sum::<u64>();

    let mut per_class = Vec::with_capacity(k);
    let mut present = Vec::with_capacity(k);
    for c in 0..k {
        let diag = cm.counts[c][c];
        let (r, s) = (row(c), col(c));
        let precision = ratio(diag, s);
        let recall = ratio(diag, r);
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1: harmonic(precision, recall),
            support: r,
        });
        present.push(r > 0 || s > 0);
    }
    let n_present = present.iter().filter(|&&p| p).count() as f64;
    let mean_over_present = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .zip(&present)
            .filter(|(_, &p)| p)
            .map(|(m, _)| f(m))
            .sum::<f64>()
            / n_present
    };
    let macro_precision = mean_over_present(|m| m.precision);
    let macro_recall = mean_over_present(|m| m.recall);
    let trace: u64 = (0..k).map(|c| cm.counts[c][c]).sum();
    let weighted_f1 = per_class
        .iter()
        .map(|m| m.support as f64 * m.f1)
        .sum::<f64>()
        / total as f64;
    Ok(EvalReport {
        micro_pr: trace as f64 / total as f64,
        macro_precision,
        macro_recall,
        macro_f1: harmonic(macro_precision, macro_recall),
        mean_class_f1: mean_over_present(|m| m.f1),
        weighted_f1,
        per_class,
    })
}

impl EvalReport {
    /// Aligned plain-text table.
    pub fn to_table(&self, class_names: Option<&[String]>) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<10} {:>9} {:>9} {:>9} {:>9}",
            "class", "precision", "recall", "f1", "support"
        )
        .unwrap();
        for (i, m) in self.per_class.iter().enumerate() {
            let name = class_names
                .and_then(|n| n.get(i).cloned())
                .unwrap_or_else(|| i.to_string());
            writeln!(
                out,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                name, m.precision, m.recall, m.f1, m.support
            )
            .unwrap();
        }
        out.push('\n');
        for (label, v) in [
            ("micro P/R", self.micro_pr),
            ("macro precision", self.macro_precision),
            ("macro recall", self.macro_recall),
            ("macro F1", self.macro_f1),
            ("mean class F1", self.mean_class_f1),
            ("weighted F1", self.weighted_f1),
        ] {
            writeln!(out, "{label:<16} {v:.4}").unwrap();
        }
        out
    }
}
