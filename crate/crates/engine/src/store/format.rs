//! Little-endian binary encodings for edge lists, offsets and float rows.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{EngineError, Result};

/// A typed edge with global node and relation ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Edge {
    pub src: u32,
    pub rel: u32,
    pub dst: u32,
}

impl Edge {
    pub const fn new(src: u32, rel: u32, dst: u32) -> Self {
        Edge { src, rel, dst }
    }
}

fn read_exact_multiple(path: &Path, unit: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| EngineError::io(path, e))?;
    if bytes.len() % unit != 0 {
        return Err(EngineError::format(path, format!("length {} is not a multiple of {unit} bytes", bytes.len())));
    }
    Ok(bytes)
}

fn write_all(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| EngineError::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    fill(&mut w).and_then(|_| w.flush()).map_err(|e| EngineError::io(path, e))
}

pub fn write_edges(path: &Path, edges: &[Edge]) -> Result<()> {
    write_all(path, |w| {
        for e in edges {
            w.write_all(&e.src.to_le_bytes())?;
            w.write_all(&e.rel.to_le_bytes())?;
            w.write_all(&e.dst.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let bytes = read_exact_multiple(path, 12)?;
    let word = |c: &[u8]| u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
    Ok(bytes.chunks_exact(12).map(|c| Edge::new(word(&c[0..4]), word(&c[4..8]), word(&c[8..12]))).collect())
}

pub fn write_u64s(path: &Path, values: &[u64]) -> Result<()> {
    write_all(path, |w| values.iter().try_for_each(|v| w.write_all(&v.to_le_bytes())))
}

pub fn read_u64s(path: &Path) -> Result<Vec<u64>> {
    let bytes = read_exact_multiple(path, 8)?;
    Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Writes the concatenation of `parts` as f32 values.
pub fn write_f32s(path: &Path, parts: &[&[f32]]) -> Result<()> {
    write_all(path, |w| {
        for part in parts {
            for v in *part {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })
}

/// Reads exactly `expected` f32 values.
pub fn read_f32s(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = read_exact_multiple(path, 4)?;
    if bytes.len() / 4 != expected {
        return Err(EngineError::format(path, format!("holds {} values, expected {expected}", bytes.len() / 4)));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_roundtrip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.bin");
        let edges = vec![Edge::new(1, 2, 3), Edge::new(u32::MAX, 0, 7)];
        write_edges(&path, &edges).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 24);
        assert_eq!(read_edges(&path).unwrap(), edges);
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..23]).unwrap();
        assert!(read_edges(&path).is_err());
    }

    #[test]
    fn floats_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let a = [1.5f32, -0.0, f32::MIN_POSITIVE, 3.0e-40];
        let b = [f32::MAX];
        write_f32s(&path, &[&a, &b]).unwrap();
        let back = read_f32s(&path, 5).unwrap();
        let bits: Vec<u32> = back.iter().map(|v| v.to_bits()).collect();
        let want: Vec<u32> = a.iter().chain(&b).map(|v| v.to_bits()).collect();
        assert_eq!(bits, want);
        assert!(read_f32s(&path, 4).is_err());
    }

    #[test]
    fn offsets_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.bin");
        let v = vec![0, 5, 1 << 40];
        write_u64s(&path, &v).unwrap();
        assert_eq!(read_u64s(&path).unwrap(), v);
    }
}
