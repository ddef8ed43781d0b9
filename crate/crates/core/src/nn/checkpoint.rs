//! Named-tensor checkpoints. Values are stored as little-endian f64 bytes,
//! so a load reproduces the saved parameters bit for bit.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"SLCKPT01";

pub fn save(path: &Path, entries: &[(&str, &[f64])]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(entries.len() as u64).to_le_bytes())?;
    for (name, values) in entries {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u64).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in *values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn load(path: &Path) -> io::Result<Vec<(String, Vec<f64>)>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "not a checkpoint file",
        ));
    }
    let n = read_u64(&mut r)? as usize;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let name_len = read_u64(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad entry name"))?;
        let len = read_u64(&mut r)? as usize;
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        entries.push((name, values));
    }
    Ok(entries)
}

/// Pulls one named tensor out of a loaded checkpoint.
pub fn take(entries: &[(String, Vec<f64>)], name: &str) -> io::Result<Vec<f64>> {
    entries
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("checkpoint is missing entry {name:?}"),
            )
        })
}

fn read_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}
