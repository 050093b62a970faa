//! Model checkpoint container: versioned binary with a JSON header and
//! little-endian f64 shadow weights.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::network::{LossKind, MLPModel};

const CKPT_MAGIC: &[u8; 8] = b"FXCKPT01";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    dims: Vec<usize>,
    seed: u64,
    epoch: usize,
    levels: u8,
    fraction_set: Vec<f64>,
    loss: LossKind,
}

pub fn save_checkpoint(model: &MLPModel, epoch: usize, path: &Path) -> Result<(), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let header = CheckpointHeader {
        version: 1,
        dims: model.dims.clone(),
        seed: model.seed,
        epoch,
        levels: model.levels,
        fraction_set: model.fraction_set.clone(),
        loss: model.loss,
    };
    let header_json = serde_json::to_vec(&header).expect("header serialize");
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(CKPT_MAGIC).map_err(io_err)?;
    f.write_all(&(header_json.len() as u32).to_le_bytes()).map_err(io_err)?;
    f.write_all(&header_json).map_err(io_err)?;
    for w in &model.weights {
        for v in w.iter() {
            f.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(MLPModel, usize), CheckpointError> {
    let io_err = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let bad = |msg: String| CheckpointError::Format {
        path: path.display().to_string(),
        msg,
    };
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).map_err(io_err)?;
    if &magic != CKPT_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let mut len = [0u8; 4];
    f.read_exact(&mut len).map_err(io_err)?;
    let mut header_json = vec![0u8; u32::from_le_bytes(len) as usize];
    f.read_exact(&mut header_json).map_err(io_err)?;
    let header: CheckpointHeader =
        serde_json::from_slice(&header_json).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.version != 1 {
        return Err(bad(format!("unsupported version {}", header.version)));
    }
    if header.dims.len() < 2 {
        return Err(bad("dims must have at least two entries".into()));
    }

    let mut weights = Vec::new();
    for pair in header.dims.windows(2) {
        let (rows, cols) = (pair[0] + 1, pair[1]);
        let mut buf = vec![0u8; rows * cols * 8];
        f.read_exact(&mut buf)
            .map_err(|_| bad("truncated weight payload".into()))?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        weights.push(
            ndarray::Array2::from_shape_vec((rows, cols), values)
                .map_err(|e| bad(format!("weight shape: {e}")))?,
        );
    }
    Ok((
        MLPModel {
            dims: header.dims,
            weights,
            levels: header.levels,
            fraction_set: header.fraction_set,
            loss: header.loss,
            seed: header.seed,
        },
        header.epoch,
    ))
}
