//! Label corpora: mapping frame annotations to intention classes, collapsing
//! frames into segment sentences, `SIL` delimiting and file I/O.
//!
//! Corpus text format: one sentence per line, whitespace-separated token
//! names, `#` starts a comment, blank lines (including whitespace-only ones)
//! are skipped. Token id 0 of every [`Corpus`] is `SIL`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Sentence, SIL};

/// A primary intention: a `<verb, target>` pair with a dense id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiClass {
    pub id: usize,
    pub verb: String,
    pub target: String,
    pub name: String,
}

/// Many-to-one mapping from annotated `<verb, target>` pairs to classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMap {
    classes: Vec<PiClass>,
    lookup: HashMap<(String, String), usize>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ClassMapRow {
    verb: String,
    target: String,
    class_id: usize,
    class_name: String,
}

impl ClassMap {
    /// The six-class cholecystectomy schema. Peritoneum and omentum
    /// dissection and peritoneum cutting all map to `<dissect, fat>`.
    pub fn cholec_pi() -> Self {
        let rows = [
            ("dissect", "cystic_duct", 0),
            ("aspirate", "fluid", 1),
            ("dissect", "gallbladder", 2),
            ("dissect", "cystic_artery", 3),
            ("dissect", "cystic_plate", 4),
            ("dissect", "fat", 5),
            ("dissect", "peritoneum", 5),
            ("dissect", "omentum", 5),
            ("cut", "peritoneum", 5),
        ];
        let mut map = ClassMap {
            classes: Vec::new(),
            lookup: HashMap::new(),
        };
        for (verb, target, id) in rows {
            map.insert(verb, target, id, &format!("PI{id}"))
                .expect("static table is consistent");
        }
        map
    }

    /// Builds a map from `(verb, target, class_id, class_name)` rows. The
    /// first row naming a class id defines its canonical pair.
    pub fn from_rows<'a>(
        rows: impl IntoIterator<Item = (&'a str, &'a str, usize, &'a str)>,
    ) -> Result<Self> {
        let mut map = ClassMap {
            classes: Vec::new(),
            lookup: HashMap::new(),
        };
        for (verb, target, id, name) in rows {
            map.insert(verb, target, id, name)?;
        }
        map.check_dense()?;
        Ok(map)
    }

    fn insert(&mut self, verb: &str, target: &str, id: usize, name: &str) -> Result<()> {
        let key = (verb.to_string(), target.to_string());
        if let Some(&old) = self.lookup.get(&key) {
            if old != id {
                return Err(Error::InvalidParam(format!(
                    "pair <{verb}, {target}> mapped to both {old} and {id}"
                )));
            }
            return Ok(());
        }
        self.lookup.insert(key, id);
        if let Some(c) = self.classes.iter().find(|c| c.id == id) {
            if c.name != name {
                return Err(Error::InvalidParam(format!(
                    "class {id} named both {} and {name}",
                    c.name
                )));
            }
        } else {
            if self.classes.iter().any(|c| c.name == name) {
                return Err(Error::InvalidParam(format!("duplicate class name {name}")));
            }
            self.classes.push(PiClass {
                id,
                verb: verb.to_string(),
                target: target.to_string(),
                name: name.to_string(),
            });
            self.classes.sort_by_key(|c| c.id);
        }
        Ok(())
    }

    fn check_dense(&self) -> Result<()> {
        for (i, c) in self.classes.iter().enumerate() {
            if c.id != i {
                return Err(Error::InvalidParam(format!(
                    "class ids are not dense: missing {i}"
                )));
            }
        }
        Ok(())
    }

    /// Reads a CSV with header `verb,target,class_id,class_name`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format {
                line: 0,
                msg: format!("{other:?}"),
            },
        })?;
        let rows: Vec<ClassMapRow> = reader.deserialize().collect::<Result<_, _>>()?;
        Self::from_rows(rows.iter().map(|r| {
            (
                r.verb.as_str(),
                r.target.as_str(),
                r.class_id,
                r.class_name.as_str(),
            )
        }))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        // Canonical pair of each class first, then merged pairs.
        let mut entries: Vec<_> = self.lookup.iter().collect();
        entries.sort_by_key(|((verb, target), &id)| {
            let c = &self.classes[id];
            (
                id,
                !(c.verb == *verb && c.target == *target),
                (*verb).clone(),
                (*target).clone(),
            )
        });
        for ((verb, target), &id) in entries {
            writer.serialize(ClassMapRow {
                verb: verb.clone(),
                target: target.clone(),
                class_id: id,
                class_name: self.classes[id].name.clone(),
            })?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn classes(&self) -> &[PiClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn get(&self, verb: &str, target: &str) -> Option<usize> {
        self.lookup
            .get(&(verb.to_string(), target.to_string()))
            .copied()
    }
}

/// One annotated frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    pub verb: String,
    pub target: String,
}

/// Maps each frame to its class id, preserving order.
pub fn map_classes(frames: &[FrameAnnotation], map: &ClassMap) -> Result<Vec<usize>> {
    frames
        .iter()
        .map(|f| {
            map.get(&f.verb, &f.target)
                .ok_or_else(|| Error::UnmappedPair {
                    verb: f.verb.clone(),
                    target: f.target.clone(),
                    frame: f.frame_index,
                })
        })
        .collect()
}

/// Run-length collapse of a frame label sequence.
pub fn collapse_segments(frame_ids: &[usize]) -> Sentence {
    let mut out: Vec<usize> = Vec::new();
    for &id in frame_ids {
        if out.last() != Some(&id) {
            out.push(id);
        }
    }
    Sentence::new(out)
}

/// `SIL s SIL`. Fails if `s` already contains `sil`.
pub fn wrap_sil(s: &[usize], sil: usize) -> Result<Sentence> {
    if let Some(pos) = s.iter().position(|&t| t == sil) {
        return Err(Error::InvalidSentence(format!(
            "SIL at position {pos} inside the sentence"
        )));
    }
    let mut out = Vec::with_capacity(s.len() + 2);
    out.push(sil);
    out.extend_from_slice(s);
    out.push(sil);
    Ok(Sentence::new(out))
}

/// Removes one leading and one trailing `sil`, when present.
pub fn strip_sil(s: &[usize], sil: usize) -> Sentence {
    let mut s = s;
    if let [first, rest @ ..] = s {
        if *first == sil {
            s = rest;
        }
    }
    if let [rest @ .., last] = s {
        if *last == sil {
            s = rest;
        }
    }
    Sentence::new(s.to_vec())
}

/// Reads frame annotations from a JSON array of `{frame, verb, target}`
/// records. Output is sorted by frame; duplicate frames are rejected.
pub fn load_frame_annotations(path: impl AsRef<Path>) -> Result<Vec<FrameAnnotation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_frame_annotations(&text)
}

pub fn parse_frame_annotations(json: &str) -> Result<Vec<FrameAnnotation>> {
    let mut frames: Vec<FrameAnnotation> = serde_json::from_str(json)?;
    frames.sort_by_key(|f| f.frame_index);
    for w in frames.windows(2) {
        if w[0].frame_index == w[1].frame_index {
            return Err(Error::DuplicateFrame(w[0].frame_index));
        }
    }
    Ok(frames)
}

/// A set of sentences over a named vocabulary whose id 0 is `SIL`.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    pub sentences: Vec<Sentence>,
}

impl Default for Corpus {
    fn default() -> Self {
        Self::new()
    }
}

impl Corpus {
    pub fn new() -> Self {
        let mut c = Corpus {
            vocab: Vec::new(),
            index: BTreeMap::new(),
            sentences: Vec::new(),
        };
        c.intern(SIL);
        c
    }

    /// A corpus whose vocabulary is `SIL` followed by `class_names`, so class
    /// `k` is token `k + 1`.
    pub fn with_classes(class_names: &[String]) -> Self {
        let mut c = Self::new();
        for n in class_names {
            c.intern(n);
        }
        c
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn sil(&self) -> usize {
        0
    }

    pub fn token_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        self.vocab.push(name.to_string());
        self.index.insert(name.to_string(), self.vocab.len() - 1);
        self.vocab.len() - 1
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Adds a sentence given as token names, interning new names.
    pub fn push_names<S: AsRef<str>>(&mut self, names: &[S]) {
        let s = names.iter().map(|n| self.intern(n.as_ref())).collect();
        self.sentences.push(s);
    }

    /// Adds a phase given as per-frame class ids: the frames are collapsed
    /// into segments and wrapped in `SIL`. Requires [`Corpus::with_classes`].
    pub fn push_frames(&mut self, frame_ids: &[usize]) -> Result<()> {
        let collapsed = collapse_segments(frame_ids);
        let tokens: Vec<usize> = collapsed.iter().map(|&k| k + 1).collect();
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab.len()) {
            return Err(Error::LabelOutOfRange {
                label: bad - 1,
                classes: self.vocab.len() - 1,
            });
        }
        self.sentences.push(wrap_sil(&tokens, self.sil())?);
        Ok(())
    }

    /// The first `n` sentences, same vocabulary.
    pub fn subset(&self, n: usize) -> Corpus {
        Corpus {
            vocab: self.vocab.clone(),
            index: self.index.clone(),
            sentences: self.sentences.iter().take(n).cloned().collect(),
        }
    }

    pub fn sentence_names(&self, i: usize) -> Vec<&str> {
        self.sentences[i]
            .iter()
            .map(|&t| self.vocab[t].as_str())
            .collect()
    }

    /// Parses the corpus text format. With a class table, every token other
    /// than `SIL` must be one of its names and the vocabulary follows the
    /// table order.
    pub fn parse(text: &str, class_table: Option<&[String]>) -> Result<Corpus> {
        let mut corpus = match class_table {
            Some(table) => Corpus::with_classes(table),
            None => Corpus::new(),
        };
        for (idx, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("");
            let names: Vec<&str> = content.split_whitespace().collect();
            if names.is_empty() {
                continue;
            }
            if class_table.is_some() {
                if let Some(bad) = names.iter().find(|n| corpus.token_id(n).is_none()) {
                    return Err(Error::UnknownToken {
                        token: bad.to_string(),
                        line: idx + 1,
                    });
                }
            }
            corpus.push_names(&names);
        }
        Ok(corpus)
    }

    pub fn load(path: impl AsRef<Path>, class_table: Option<&[String]>) -> Result<Corpus> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, class_table)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&s.display_with(&self.vocab).to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
