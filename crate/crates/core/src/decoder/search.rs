use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::align::align_frames;
use super::prefix::{extend_row, root_row};
use super::{GepConfig, ParseResult, ProbMatrix};
use crate::corpus::collapse_segments;
use crate::grammar::earley::{EarleyChart, EarleyTables};
use crate::grammar::Pcfg;
use crate::{Error, Result, Sentence, SIL};

/// A grammar prepared for repeated parsing. Safe to share across threads.
#[derive(Clone, Debug)]
pub struct Decoder {
    tables: EarleyTables,
    terminals: Vec<String>,
    sil: Option<usize>,
}

struct Node {
    score: f64,
    tokens: Vec<usize>,
    row: Vec<f64>,
    chart: EarleyChart,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Higher score first, then the lexicographically smaller prefix.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.tokens.cmp(&self.tokens))
    }
}

struct Candidate {
    score: f64,
    tokens: Vec<usize>,
    data_log_prob: f64,
    grammar_prob: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => self.score > o.score || (self.score == o.score && self.tokens < o.tokens),
        }
    }
}

impl Decoder {
    /// Prepares a validated grammar. If it has a `SIL` terminal, matrix
    /// sentences are matched as `SIL l SIL`.
    pub fn new(g: &Pcfg) -> Result<Self> {
        Ok(Decoder {
            tables: EarleyTables::new(g)?,
            terminals: g.terminals().to_vec(),
            sil: g.terminal_id(SIL),
        })
    }

    /// Grammar terminal of each matrix class, matched by name.
    fn class_terminals(&self, m: &ProbMatrix) -> Vec<Option<usize>> {
        m.class_names()
            .iter()
            .map(|name| {
                if name == SIL {
                    None
                } else {
                    self.terminals.iter().position(|t| t == name)
                }
            })
            .collect()
    }

    fn complete_prob(&self, chart: &EarleyChart) -> f64 {
        match self.sil {
            Some(sil) => self
                .tables
                .advance(chart, sil)
                .map_or(0.0, |c| c.sentence_prob()),
            None => chart.sentence_prob(),
        }
    }

    /// Inside probability of a matrix-class sentence under this grammar.
    pub fn grammar_prob(&self, m: &ProbMatrix, sentence: &[usize]) -> f64 {
        let map = self.class_terminals(m);
        let mut tokens = Vec::with_capacity(sentence.len() + 2);
        tokens.extend(self.sil);
        for &k in sentence {
            match map.get(k).copied().flatten() {
                Some(t) => tokens.push(t),
                None => return 0.0,
            }
        }
        tokens.extend(self.sil);
        self.tables.sentence_probability(&tokens)
    }

    pub fn parse(&self, m: &ProbMatrix, cfg: &GepConfig) -> Result<ParseResult> {
        cfg.validate()?;
        let weight = cfg.weight();
        let classes = m.classes();
        let log_y = m.log_data();
        let map = self.class_terminals(m);

        let mut heap = BinaryHeap::new();
        let mut pruned = false;
        let mut expansions = 0usize;
        let mut best: Option<Candidate> = None;

        let root_chart = match self.sil {
            Some(sil) => self.tables.advance(&self.tables.initial(), sil),
            None => Some(self.tables.initial()),
        };
        if let Some(chart) = root_chart {
            heap.push(Node {
                score: 0.0,
                tokens: Vec::new(),
                row: root_row(m.frames()),
                chart,
            });
        }

        while let Some(node) = heap.pop() {
            if let Some(b) = &best {
                if node.score < b.score || (node.score == b.score && node.tokens > b.tokens) {
                    break;
                }
            }
            expansions += 1;

            let data_log_prob = node.row[m.frames()];
            if !node.tokens.is_empty() && data_log_prob > f64::NEG_INFINITY {
                let grammar_prob = self.complete_prob(&node.chart);
                if grammar_prob > 0.0 {
                    let score = if weight > 0.0 {
                        data_log_prob + weight * grammar_prob.ln()
                    } else {
                        data_log_prob
                    };
                    let cand = Candidate {
                        score,
                        tokens: node.tokens.clone(),
                        data_log_prob,
                        grammar_prob,
                    };
                    if cand.beats(&best) {
                        best = Some(cand);
                    }
                }
            }

            for (k, &term) in map.iter().enumerate() {
                if node.tokens.last() == Some(&k) {
                    continue;
                }
                let Some(term) = term else { continue };
                if !node.chart.allows(term) {
                    continue;
                }
                let Some(chart) = self.tables.advance(&node.chart, term) else {
                    continue;
                };
                let (row, log_g) = extend_row(&log_y, classes, &node.row, k);
                if log_g == f64::NEG_INFINITY {
                    continue;
                }
                let score = if weight > 0.0 {
                    log_g + weight * chart.prefix_prob().ln()
                } else {
                    log_g
                };
                if best.as_ref().is_some_and(|b| score < b.score) {
                    continue;
                }
                let mut tokens = node.tokens.clone();
                tokens.push(k);
                heap.push(Node {
                    score,
                    tokens,
                    row,
                    chart,
                });
            }

            if heap.len() > cfg.max_queue {
                let keep = (cfg.max_queue - cfg.max_queue / 4).max(1);
                let mut nodes = std::mem::take(&mut heap).into_sorted_vec();
                nodes.reverse();
                nodes.truncate(keep);
                heap = nodes.into();
                pruned = true;
            }
        }

        match best {
            Some(c) => {
                let frame_labels = align_frames(&c.tokens, m)?;
                Ok(ParseResult {
                    sentence: Sentence::new(c.tokens),
                    frame_labels,
                    data_prob: c.data_log_prob.exp(),
                    data_log_prob: c.data_log_prob,
                    grammar_prob: c.grammar_prob,
                    combined_score: c.score,
                    fallback_used: false,
                    pruned,
                    expansions,
                })
            }
            None if cfg.fallback_on_failure => {
                let frame_labels = m.argmax_labels();
                let sentence = collapse_segments(&frame_labels);
                let mut row = root_row(m.frames());
                for &k in sentence.iter() {
                    row = extend_row(&log_y, classes, &row, k).0;
                }
                let data_log_prob = row[m.frames()];
                let grammar_prob = self.grammar_prob(m, &sentence);
                let combined_score = if weight > 0.0 {
                    data_log_prob + weight * grammar_prob.ln()
                } else {
                    data_log_prob
                };
                Ok(ParseResult {
                    sentence,
                    frame_labels,
                    data_prob: data_log_prob.exp(),
                    data_log_prob,
                    grammar_prob,
                    combined_score,
                    fallback_used: true,
                    pruned,
                    expansions,
                })
            }
            None => Err(Error::NoGrammaticalParse),
        }
    }
}

/// Most probable grammatical sentence for a probability matrix, aligned to
/// frames. See [`Decoder`] for repeated parsing with one grammar.
pub fn gep_parse(m: &ProbMatrix, g: &Pcfg, cfg: &GepConfig) -> Result<ParseResult> {
    Decoder::new(g)?.parse(m, cfg)
}
