//! Text edge-list ingestion: dense id remapping and train/valid/test split.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use graphvec_core::rng;
use rand::seq::SliceRandom;

use super::format::Edge;
use crate::error::{EngineError, Result};

/// Default relation name for two-column input.
pub const UNTYPED_RELATION: &str = "edge";

#[derive(Debug, Default, Clone)]
pub struct Interner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> Option<u32> {
        if let Some(&id) = self.ids.get(name) {
            return Some(id);
        }
        let id = u32::try_from(self.names.len()).ok()?;
        self.ids.insert(name.to_owned(), id);
        self.names.push(name.to_owned());
        Some(id)
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn into_names(self) -> Vec<String> {
        self.names
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    /// Column separator; `None` splits on runs of whitespace.
    pub delimiter: Option<char>,
    /// Train, valid and test fractions for single-file input.
    pub split: [f64; 3],
    pub seed: u64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { delimiter: None, split: [0.9, 0.05, 0.05], seed: 0 }
    }
}

/// An ingested graph with dense ids assigned in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct RawGraph {
    pub node_names: Vec<String>,
    pub relation_names: Vec<String>,
    /// Train, valid and test edges.
    pub splits: [Vec<Edge>; 3],
}

impl RawGraph {
    pub fn num_nodes(&self) -> u64 {
        self.node_names.len() as u64
    }

    pub fn num_edges(&self) -> u64 {
        self.splits.iter().map(|s| s.len() as u64).sum()
    }
}

struct Reader {
    delimiter: Option<char>,
    nodes: Interner,
    relations: Interner,
    columns: Option<usize>,
}

impl Reader {
    fn read(&mut self, path: &Path) -> Result<Vec<Edge>> {
        let file = File::open(path).map_err(|e| EngineError::io(path, e))?;
        let mut edges = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| EngineError::io(path, e))?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = match self.delimiter {
                Some(c) => text.split(c).map(str::trim).collect(),
                None => text.split_whitespace().collect(),
            };
            let err = |msg: String| EngineError::Parse { path: path.to_owned(), line: lineno, msg };
            if tokens.iter().any(|t| t.is_empty()) {
                return Err(err("empty field".into()));
            }
            if tokens.len() != 2 && tokens.len() != 3 {
                return Err(err(format!("expected 2 or 3 columns, found {}", tokens.len())));
            }
            match self.columns {
                None => self.columns = Some(tokens.len()),
                Some(n) if n != tokens.len() => {
                    return Err(err(format!("expected {n} columns, found {}", tokens.len())))
                }
                Some(_) => {}
            }
            let (s, r, d) = match tokens[..] {
                [s, d] => (s, UNTYPED_RELATION, d),
                [s, r, d] => (s, r, d),
                _ => unreachable!(),
            };
            let overflow = || err("more than 2^32 distinct ids".into());
            let src = self.nodes.intern(s).ok_or_else(overflow)?;
            let rel = self.relations.intern(r).ok_or_else(overflow)?;
            let dst = self.nodes.intern(d).ok_or_else(overflow)?;
            edges.push(Edge::new(src, rel, dst));
        }
        Ok(edges)
    }
}

fn check_split(split: [f64; 3]) -> Result<()> {
    let sum: f64 = split.iter().sum();
    if split.iter().any(|f| !(0.0..=1.0).contains(f)) || (sum - 1.0).abs() > 1e-6 {
        return Err(EngineError::Config(format!("split fractions {split:?} must be in [0,1] and sum to 1")));
    }
    Ok(())
}

/// Number of edges in each split for `n` edges.
pub fn split_counts(n: usize, split: [f64; 3]) -> [usize; 3] {
    let valid = ((split[1] * n as f64).round() as usize).min(n);
    let test = ((split[2] * n as f64).round() as usize).min(n - valid);
    [n - valid - test, valid, test]
}

/// Reads one edge list, shuffles it with `opts.seed` and splits it.
pub fn ingest_file(path: &Path, opts: &IngestOptions) -> Result<RawGraph> {
    check_split(opts.split)?;
    let mut reader =
        Reader { delimiter: opts.delimiter, nodes: Interner::default(), relations: Interner::default(), columns: None };
    let mut edges = reader.read(path)?;
    if edges.is_empty() {
        return Err(EngineError::EmptyInput(path.to_owned()));
    }
    edges.shuffle(&mut rng::stream(opts.seed, &[0x5EED_5B17]));
    let [train, valid, _] = split_counts(edges.len(), opts.split);
    let test = edges.split_off(train + valid);
    let valid = edges.split_off(train);
    Ok(RawGraph {
        node_names: reader.nodes.into_names(),
        relation_names: reader.relations.into_names(),
        splits: [edges, valid, test],
    })
}

/// Reads pre-split train, valid and test files sharing one id space.
pub fn ingest_presplit(paths: [&Path; 3], delimiter: Option<char>) -> Result<RawGraph> {
    let mut reader = Reader { delimiter, nodes: Interner::default(), relations: Interner::default(), columns: None };
    let train = reader.read(paths[0])?;
    if train.is_empty() {
        return Err(EngineError::EmptyInput(paths[0].to_owned()));
    }
    let valid = reader.read(paths[1])?;
    let test = reader.read(paths[2])?;
    Ok(RawGraph {
        node_names: reader.nodes.into_names(),
        relation_names: reader.relations.into_names(),
        splits: [train, valid, test],
    })
}
