//! On-disk dataset directory: metadata, edge splits, buckets and parameters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use graphvec_core::{init_uniform, rng, PartitionAssignment};

use super::format::{self, Edge};
use super::ingest::RawGraph;
use super::layout::{partition_nodes, relabel_edges, EdgeBuckets};
use super::meta::{GraphMeta, FORMAT_VERSION};
use crate::block::{BlockData, RelationTable};
use crate::error::{EngineError, Result};

pub const META_FILE: &str = "meta.json";
pub const OFFSETS_FILE: &str = "bucket_offsets.bin";
pub const RELATIONS_FILE: &str = "relations.bin";

const INIT_NODES: u64 = 0x1A17;
const INIT_RELATIONS: u64 = 0x1A18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for Split {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| EngineError::Config(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayoutOptions {
    pub partitions: u32,
    pub dim: usize,
    pub seed: u64,
}

/// A preprocessed dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub meta: GraphMeta,
}

impl Dataset {
    /// Relabels, buckets and writes `raw` with freshly initialized parameters.
    pub fn create(dir: &Path, mut raw: RawGraph, layout: LayoutOptions, force: bool) -> Result<Dataset> {
        if dir.join(META_FILE).exists() && !force {
            return Err(EngineError::AlreadyExists(dir.to_owned()));
        }
        if raw.splits[0].is_empty() {
            return Err(EngineError::Config("training split is empty".into()));
        }
        fs::create_dir_all(dir).map_err(|e| EngineError::io(dir, e))?;
        let (assignment, relabel) = partition_nodes(raw.num_nodes(), layout.partitions, layout.seed)?;
        for split in &mut raw.splits {
            relabel_edges(split, &relabel);
        }
        let meta = GraphMeta {
            format_version: FORMAT_VERSION,
            num_nodes: raw.num_nodes(),
            num_relations: raw.relation_names.len() as u32,
            num_edges: raw.num_edges(),
            num_partitions: layout.partitions,
            embedding_dim: layout.dim,
            split_sizes: raw.splits.each_ref().map(|s| s.len() as u64),
            seed: layout.seed,
        };
        meta.validate()?;
        let ds = Dataset { dir: dir.to_owned(), meta };

        let buckets = EdgeBuckets::build(&raw.splits[0], &assignment)?;
        format::write_edges(&ds.edges_path(Split::Train), &buckets.edges)?;
        format::write_u64s(&dir.join(OFFSETS_FILE), &buckets.offsets)?;
        for split in [Split::Valid, Split::Test] {
            format::write_edges(&ds.edges_path(split), &raw.splits[split.index()])?;
        }

        let mut names = vec![String::new(); raw.node_names.len()];
        for (old, name) in raw.node_names.into_iter().enumerate() {
            names[relabel[old] as usize] = name;
        }
        write_names(&dir.join("nodes.tsv"), &names)?;
        write_names(&dir.join("relations.tsv"), &raw.relation_names)?;

        ParamFiles::new(dir, &ds.meta)?.initialize(layout.seed)?;
        ds.meta.save(&dir.join(META_FILE))?;
        Ok(ds)
    }

    pub fn open(dir: &Path) -> Result<Dataset> {
        let meta = GraphMeta::load(&dir.join(META_FILE))?;
        Ok(Dataset { dir: dir.to_owned(), meta })
    }

    pub fn edges_path(&self, split: Split) -> PathBuf {
        self.dir.join(format!("edges_{}.bin", split.as_str()))
    }

    pub fn edges(&self, split: Split) -> Result<Vec<Edge>> {
        let path = self.edges_path(split);
        let edges = format::read_edges(&path)?;
        if edges.len() as u64 != self.meta.split_sizes[split.index()] {
            return Err(EngineError::format(
                &path,
                format!("{} edges, meta says {}", edges.len(), self.meta.split_sizes[split.index()]),
            ));
        }
        let n = self.meta.num_nodes;
        let r = self.meta.num_relations;
        if let Some(e) = edges.iter().find(|e| u64::from(e.src.max(e.dst)) >= n || e.rel >= r) {
            return Err(EngineError::format(&path, format!("edge {e:?} out of range")));
        }
        Ok(edges)
    }

    pub fn train_buckets(&self) -> Result<EdgeBuckets> {
        let edges = self.edges(Split::Train)?;
        let offsets = format::read_u64s(&self.dir.join(OFFSETS_FILE))?;
        EdgeBuckets::from_parts(self.meta.num_partitions, edges, offsets)
    }

    pub fn assignment(&self) -> Result<PartitionAssignment> {
        self.meta.assignment()
    }

    /// Initial parameters stored with the dataset.
    pub fn params(&self) -> Result<ParamFiles> {
        ParamFiles::new(&self.dir, &self.meta)
    }
}

fn write_names(path: &Path, names: &[String]) -> Result<()> {
    let mut out = String::new();
    for (id, name) in names.iter().enumerate() {
        out.push_str(name);
        out.push('\t');
        out.push_str(&id.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| EngineError::io(path, e))
}

/// Partition and relation parameter files in one directory.
#[derive(Debug, Clone)]
pub struct ParamFiles {
    pub dir: PathBuf,
    pub dim: usize,
    pub num_relations: u32,
    pub assignment: PartitionAssignment,
    /// Injected latency per partition read or write.
    pub io_delay: Duration,
}

impl ParamFiles {
    pub fn new(dir: &Path, meta: &GraphMeta) -> Result<Self> {
        Ok(ParamFiles {
            dir: dir.to_owned(),
            dim: meta.embedding_dim,
            num_relations: meta.num_relations,
            assignment: meta.assignment()?,
            io_delay: Duration::ZERO,
        })
    }

    pub fn with_io_delay(mut self, delay: Duration) -> Self {
        self.io_delay = delay;
        self
    }

    pub fn num_partitions(&self) -> u32 {
        self.assignment.num_partitions()
    }

    pub fn partition_path(&self, k: u32) -> PathBuf {
        self.dir.join(format!("node_part_{k}.bin"))
    }

    pub fn partition_bytes(&self, k: u32) -> u64 {
        self.assignment.rows(k) * self.dim as u64 * 8
    }

    fn throttle(&self) {
        if !self.io_delay.is_zero() {
            thread::sleep(self.io_delay);
        }
    }

    fn check_partition(&self, k: u32) -> Result<()> {
        if k >= self.num_partitions() {
            return Err(EngineError::Mismatch(format!("partition {k} of {}", self.num_partitions())));
        }
        Ok(())
    }

    pub fn read_partition(&self, k: u32) -> Result<BlockData> {
        self.check_partition(k)?;
        self.throttle();
        let n = self.assignment.rows(k) as usize * self.dim;
        let mut all = format::read_f32s(&self.partition_path(k), 2 * n)
            .map_err(|e| EngineError::Partition { partition: k, source: Box::new(e) })?;
        let accum = all.split_off(n);
        Ok(BlockData { params: all, accum })
    }

    pub fn write_partition(&self, k: u32, data: &BlockData) -> Result<()> {
        self.check_partition(k)?;
        let n = self.assignment.rows(k) as usize * self.dim;
        if data.params.len() != n || data.accum.len() != n {
            return Err(EngineError::Mismatch(format!(
                "partition {k} holds {} values, expected {n}",
                data.params.len()
            )));
        }
        self.throttle();
        let path = self.partition_path(k);
        let tmp = path.with_extension("bin.tmp");
        format::write_f32s(&tmp, &[&data.params, &data.accum])
            .and_then(|_| fs::rename(&tmp, &path).map_err(|e| EngineError::io(&path, e)))
            .map_err(|e| EngineError::Partition { partition: k, source: Box::new(e) })
    }

    pub fn read_relations(&self) -> Result<RelationTable> {
        let n = self.num_relations as usize * self.dim;
        let mut all = format::read_f32s(&self.dir.join(RELATIONS_FILE), 2 * n)?;
        let accum = all.split_off(n);
        Ok(RelationTable { dim: self.dim, params: all, accum, updates: 0 })
    }

    pub fn write_relations(&self, table: &RelationTable) -> Result<()> {
        if table.dim != self.dim || table.rows() != self.num_relations as usize {
            return Err(EngineError::Mismatch(format!(
                "relation table is {}x{}, expected {}x{}",
                table.rows(),
                table.dim,
                self.num_relations,
                self.dim
            )));
        }
        format::write_f32s(&self.dir.join(RELATIONS_FILE), &[&table.params, &table.accum])
    }

    /// Writes seeded uniform embeddings and zero optimizer state.
    pub fn initialize(&self, seed: u64) -> Result<()> {
        for k in 0..self.num_partitions() {
            let rows = self.assignment.rows(k) as usize;
            let mut data = BlockData::zeros(rows, self.dim);
            init_uniform(&mut rng::stream(seed, &[INIT_NODES, u64::from(k)]), self.dim, &mut data.params);
            self.write_partition(k, &data)?;
        }
        let mut table = RelationTable {
            dim: self.dim,
            params: vec![0.0; self.num_relations as usize * self.dim],
            accum: vec![0.0; self.num_relations as usize * self.dim],
            updates: 0,
        };
        init_uniform(&mut rng::stream(seed, &[INIT_RELATIONS]), self.dim, &mut table.params);
        self.write_relations(&table)
    }

    /// Copies every parameter file into `dir` and returns a handle to the copy.
    pub fn copy_to(&self, dir: &Path) -> Result<ParamFiles> {
        fs::create_dir_all(dir).map_err(|e| EngineError::io(dir, e))?;
        let mut names: Vec<PathBuf> = (0..self.num_partitions()).map(|k| self.partition_path(k)).collect();
        names.push(self.dir.join(RELATIONS_FILE));
        for src in names {
            let dst = dir.join(src.file_name().expect("file name"));
            fs::copy(&src, &dst).map_err(|e| EngineError::io(&src, e))?;
        }
        Ok(ParamFiles { dir: dir.to_owned(), ..self.clone() })
    }

    /// Loads all partitions into one contiguous block.
    pub fn read_all(&self) -> Result<BlockData> {
        let mut all = BlockData::default();
        for k in 0..self.num_partitions() {
            let b = self.read_partition(k)?;
            all.params.extend_from_slice(&b.params);
            all.accum.extend_from_slice(&b.accum);
        }
        Ok(all)
    }

    /// Splits a contiguous block back into partition files.
    pub fn write_all(&self, data: &BlockData) -> Result<()> {
        let d = self.dim;
        for k in 0..self.num_partitions() {
            let lo = self.assignment.start(k) as usize * d;
            let hi = lo + self.assignment.rows(k) as usize * d;
            let part = BlockData { params: data.params[lo..hi].to_vec(), accum: data.accum[lo..hi].to_vec() };
            self.write_partition(k, &part)?;
        }
        Ok(())
    }
}

/// Writes the node embeddings as text, one `name<TAB>v1 v2 ...` line per node.
pub fn export_embeddings(params: &ParamFiles, names: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(names).map_err(|e| EngineError::io(names, e))?;
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap_or("")).collect();
    let file = fs::File::create(out).map_err(|e| EngineError::io(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    let d = params.dim;
    for k in 0..params.num_partitions() {
        let block = params.read_partition(k)?;
        let first = params.assignment.start(k) as usize;
        for (r, row) in block.params.chunks_exact(d).enumerate() {
            let name = names.get(first + r).copied().unwrap_or("");
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{name}\t{}", vals.join(" ")).map_err(|e| EngineError::io(out, e))?;
        }
    }
    w.flush().map_err(|e| EngineError::io(out, e))
}
