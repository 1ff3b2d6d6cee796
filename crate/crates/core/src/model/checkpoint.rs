//! Binary checkpoint: the magic `BAGG1`, one line of JSON header, then every
//! parameter as a little-endian `f64` in declaration order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dims, ModelParams, PoolSpace, TENSOR_NAMES};
use crate::{Error, Result};

pub const MAGIC: &[u8; 5] = b"BAGG1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub dims: Dims,
    pub pool_space: PoolSpace,
    pub vocab_hash: String,
    pub tensors: Vec<String>,
}

pub fn write_checkpoint(
    mut w: impl Write,
    params: &ModelParams,
    pool_space: PoolSpace,
    vocab_hash: &str,
) -> Result<()> {
    let header = CheckpointHeader {
        dims: params.dims(),
        pool_space,
        vocab_hash: vocab_hash.to_string(),
        tensors: TENSOR_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    let io = |e| Error::Checkpoint(format!("write failed: {e}"));
    w.write_all(MAGIC).map_err(io)?;
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    let mut buf = Vec::with_capacity(params.len() * 8);
    for x in params.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_checkpoint(r: impl Read) -> Result<(CheckpointHeader, ModelParams)> {
    let mut r = BufReader::new(r);
    let io = |e| Error::Checkpoint(format!("read failed: {e}"));
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut line = String::new();
    r.read_line(&mut line).map_err(io)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    if header.tensors != TENSOR_NAMES {
        return Err(Error::Checkpoint(format!(
            "unexpected tensor list {:?}",
            header.tensors
        )));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != header.dims.num_params() * 8 {
        return Err(Error::Checkpoint(format!(
            "expected {} parameter bytes, found {}",
            header.dims.num_params() * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let params = ModelParams::from_vec(header.dims, data)?;
    Ok((header, params))
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    pool_space: PoolSpace,
    vocab_hash: &str,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(
        std::io::BufWriter::new(file),
        params,
        pool_space,
        vocab_hash,
    )
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ModelParams)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file)
}
