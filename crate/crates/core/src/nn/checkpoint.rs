//! Flat binary checkpoint format: magic, version, entry count, then per
//! entry (id string, rows, cols, row-major doubles, little-endian). Entries
//! cover both trainable parameters and auxiliary tensors such as batch-norm
//! running statistics.

use crate::error::{Error, Result};
use crate::tensor::Tensor2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MLNC";
const VERSION: u32 = 1;

pub fn write_checkpoint(path: &Path, entries: &[(String, Tensor2)]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| Error::io(path.display().to_string(), e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(entries.len() as u32).to_le_bytes()).map_err(io)?;
    for (id, t) in entries {
        let bytes = id.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(bytes).map_err(io)?;
        w.write_all(&(t.rows as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(t.cols as u64).to_le_bytes()).map_err(io)?;
        for v in &t.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<(String, Tensor2)>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io = |e: std::io::Error| Error::io(path.display().to_string(), e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(io)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut u32buf).map_err(io)?;
    let count = u32::from_le_bytes(u32buf) as usize;

    let mut entries = Vec::with_capacity(count);
    let mut u64buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut u32buf).map_err(io)?;
        let id_len = u32::from_le_bytes(u32buf) as usize;
        let mut id_bytes = vec![0u8; id_len];
        r.read_exact(&mut id_bytes).map_err(io)?;
        let id = String::from_utf8(id_bytes)
            .map_err(|_| Error::Checkpoint("non-utf8 parameter id".into()))?;
        r.read_exact(&mut u64buf).map_err(io)?;
        let rows = u64::from_le_bytes(u64buf) as usize;
        r.read_exact(&mut u64buf).map_err(io)?;
        let cols = u64::from_le_bytes(u64buf) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut u64buf).map_err(io)?;
            data.push(f64::from_le_bytes(u64buf));
        }
        entries.push((id, Tensor2::from_vec(rows, cols, data)));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let entries = vec![
            ("w_in".to_string(), Tensor2::from_rows(&[vec![1.0, -2.5], vec![0.0, 3.25]])),
            ("layer0.bias".to_string(), Tensor2::from_vec(1, 3, vec![0.1, 0.2, 0.3])),
        ];
        let path = std::env::temp_dir().join(format!("mlnc_ckpt_{}.bin", std::process::id()));
        write_checkpoint(&path, &entries).unwrap();
        let back = read_checkpoint(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(entries.len(), back.len());
        for ((id_a, t_a), (id_b, t_b)) in entries.iter().zip(&back) {
            assert_eq!(id_a, id_b);
            assert_eq!(t_a, t_b);
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let path = std::env::temp_dir().join(format!("mlnc_badmagic_{}.bin", std::process::id()));
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        assert!(read_checkpoint(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
