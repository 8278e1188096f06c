//! Binary bank container: magic, version, JSON header length, JSON header,
//! then every model's parameters as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, CnnBank, CnnModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"EDGECNN\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch: Architecture,
    seed: u64,
    epoch: usize,
    bank_size: usize,
    param_count: usize,
    model_seeds: Vec<u64>,
}

pub fn write_bank<W: Write>(bank: &CnnBank, mut w: W) -> std::io::Result<()> {
    let header = Header {
        arch: bank.arch.clone(),
        seed: bank.seed,
        epoch: bank.epoch,
        bank_size: bank.models.len(),
        param_count: bank.arch.param_count(),
        model_seeds: bank.models.iter().map(|m| m.seed).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for m in &bank.models {
        for p in &m.params {
            w.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

fn malformed(msg: &str) -> Error {
    Error::MalformedFile(msg.to_string())
}

pub fn read_bank(bytes: &[u8]) -> Result<CnnBank> {
    let mut r = bytes;
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| malformed("truncated magic"))?;
    if &magic != MAGIC {
        return Err(malformed("not a bank checkpoint"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| malformed("truncated version"))?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    r.read_exact(&mut word).map_err(|_| malformed("truncated header length"))?;
    let len = u32::from_le_bytes(word) as usize;
    if r.len() < len {
        return Err(malformed("truncated header"));
    }
    let header: Header = serde_json::from_slice(&r[..len]).map_err(|e| malformed(&e.to_string()))?;
    r = &r[len..];
    if header.param_count != header.arch.param_count() || header.model_seeds.len() != header.bank_size {
        return Err(malformed("header disagrees with its architecture"));
    }
    if r.len() != header.bank_size * header.param_count * 8 {
        return Err(malformed("parameter block has the wrong length"));
    }
    let models = r
        .chunks_exact(header.param_count * 8)
        .zip(&header.model_seeds)
        .map(|(chunk, &seed)| CnnModel {
            arch: header.arch.clone(),
            seed,
            params: chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        })
        .collect();
    Ok(CnnBank {
        arch: header.arch,
        seed: header.seed,
        epoch: header.epoch,
        models,
    })
}

pub fn save_bank(bank: &CnnBank, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_bank(bank, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<CnnBank> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_bank(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_bank;

    fn bank() -> CnnBank {
        init_bank(&Architecture::standard(5, 33, 6), 2, 11).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = bank();
        let mut buf = Vec::new();
        write_bank(&b, &mut buf).unwrap();
        assert!(buf.starts_with(MAGIC));
        assert_eq!(read_bank(&buf).unwrap(), b);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.ckpt");
        save_bank(&b, &path).unwrap();
        assert_eq!(load_bank(&path).unwrap(), b);
    }

    #[test]
    fn corrupt_files_rejected() {
        let mut buf = Vec::new();
        write_bank(&bank(), &mut buf).unwrap();
        assert!(matches!(read_bank(&buf[..buf.len() - 3]), Err(Error::MalformedFile(_))));
        assert!(matches!(read_bank(b"nonsense"), Err(Error::MalformedFile(_))));
        let mut wrong = buf.clone();
        wrong[8] = 9;
        assert!(matches!(read_bank(&wrong), Err(Error::VersionMismatch { found: 9, .. })));
    }
}
