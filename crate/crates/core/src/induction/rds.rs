use std::collections::BTreeMap;

use crate::corpus::Corpus;
use crate::{Error, Result};

/// Unit id of the begin marker that starts every path.
pub const BEGIN: usize = 0;
/// Unit id of the end marker that closes every path.
pub const END: usize = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Unit {
    Begin,
    End,
    /// A corpus token id.
    Terminal(usize),
    /// An adopted pattern: an ordered sequence of units.
    Pattern(Vec<usize>),
    /// An equivalence class: interchangeable units.
    Class(Vec<usize>),
}

/// Corpus sentences as paths over a growing lexicon of units.
#[derive(Clone, Debug)]
pub struct RdsGraph {
    units: Vec<Unit>,
    vocab: Vec<String>,
    paths: Vec<Vec<usize>>,
    occurrences: BTreeMap<usize, Vec<(usize, usize)>>,
}

/// One path per sentence over the initial lexicon of terminals.
pub fn build_rds(corpus: &Corpus) -> Result<RdsGraph> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut units = vec![Unit::Begin, Unit::End];
    units.extend((0..corpus.vocab().len()).map(Unit::Terminal));
    let mut paths = Vec::with_capacity(corpus.len());
    for (i, s) in corpus.sentences.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::EmptySentence(i));
        }
        let mut path = Vec::with_capacity(s.len() + 2);
        path.push(BEGIN);
        path.extend(s.iter().map(|&t| t + 2));
        path.push(END);
        paths.push(path);
    }
    let mut g = RdsGraph {
        units,
        vocab: corpus.vocab().to_vec(),
        paths,
        occurrences: BTreeMap::new(),
    };
    g.reindex();
    Ok(g)
}

impl RdsGraph {
    fn reindex(&mut self) {
        self.occurrences.clear();
        for (p, path) in self.paths.iter().enumerate() {
            for (i, &u) in path.iter().enumerate() {
                self.occurrences.entry(u).or_default().push((p, i));
            }
        }
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    /// `(path, position)` of every occurrence of `unit`.
    pub fn occurrences(&self, unit: usize) -> &[(usize, usize)] {
        self.occurrences.get(&unit).map_or(&[], Vec::as_slice)
    }

    /// Total number of vertices over all paths, markers included.
    pub fn token_count(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }

    pub fn unit_of_terminal(&self, token: usize) -> usize {
        token + 2
    }

    /// Number of positions where `seq` occurs as a contiguous sub-path.
    pub fn count(&self, seq: &[usize]) -> usize {
        let Some((&first, rest)) = seq.split_first() else {
            return 0;
        };
        self.occurrences(first)
            .iter()
            .filter(|&&(p, i)| {
                let path = &self.paths[p];
                i + seq.len() <= path.len() && path[i + 1..i + seq.len()] == *rest
            })
            .count()
    }

    pub fn unit_name(&self, u: usize) -> String {
        match &self.units[u] {
            Unit::Begin => "<begin>".into(),
            Unit::End => "<end>".into(),
            Unit::Terminal(t) => self.vocab[*t].clone(),
            Unit::Pattern(_) => format!("P{u}"),
            Unit::Class(_) => format!("E{u}"),
        }
    }

    /// Adds a pattern unit and rewrites every non-overlapping occurrence,
    /// scanning each path left to right. Returns the new unit id.
    pub fn adopt_pattern(&mut self, seq: &[usize]) -> usize {
        let unit = self.units.len();
        self.units.push(Unit::Pattern(seq.to_vec()));
        for path in &mut self.paths {
            let mut out = Vec::with_capacity(path.len());
            let mut i = 0;
            while i < path.len() {
                if path[i..].starts_with(seq) {
                    out.push(unit);
                    i += seq.len();
                } else {
                    out.push(path[i]);
                    i += 1;
                }
            }
            *path = out;
        }
        self.reindex();
        unit
    }

    /// Replaces members of `class` that fill the variable slot of `context`
    /// (a window with `None` at the slot) with the class unit. An existing
    /// class unit with the same members is reused. Returns the unit and the
    /// number of replaced vertices.
    pub fn adopt_class(&mut self, members: &[usize], context: &[Option<usize>]) -> (usize, usize) {
        let unit = match self
            .units
            .iter()
            .position(|u| matches!(u, Unit::Class(m) if m == members))
        {
            Some(u) => u,
            None => {
                self.units.push(Unit::Class(members.to_vec()));
                self.units.len() - 1
            }
        };
        let slot = context
            .iter()
            .position(Option::is_none)
            .expect("context has a slot");
        let mut hits = Vec::new();
        for (p, path) in self.paths.iter().enumerate() {
            for i in slot..path.len() {
                if !members.contains(&path[i]) {
                    continue;
                }
                let start = i - slot;
                if start + context.len() > path.len() {
                    continue;
                }
                let fits = context
                    .iter()
                    .enumerate()
                    .all(|(k, c)| c.is_none_or(|u| path[start + k] == u));
                if fits {
                    hits.push((p, i));
                }
            }
        }
        for &(p, i) in &hits {
            self.paths[p][i] = unit;
        }
        if !hits.is_empty() {
            self.reindex();
        }
        (unit, hits.len())
    }
}
