//! Differential Fe-FinFET crossbar realizing one network layer.
//!
//! Each signed weight occupies a pair of devices on complementary bit
//! lines; the analog weighted sum is the difference of the two column
//! currents. Sums are normalized to the conductance of an ideal LRS device
//! at a sensing operating point and then quantized by a column ADC.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::device::{
    channel_conductance, DeviceError, DeviceInstance, GateStackParams, MemoryState,
    OperatingPoint,
};
use crate::rng::Stream;

#[derive(Debug, thiserror::Error)]
pub enum CrossbarError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("weight {value} at ({row}, {col}) is not an achievable fraction")]
    UnmappableWeight { row: usize, col: usize, value: f64 },
    #[error("input length {got} does not match row count {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("ADC bits {0} outside [1, 16]")]
    BadAdcBits(u32),
    #[error("ADC full scale {0} must be positive")]
    BadAdcFullScale(f64),
    #[error("sensing reference conductance is not positive")]
    BadSenseReference,
    #[error("snapshot {path}: {msg}")]
    Snapshot { path: String, msg: String },
    #[error("snapshot {path}: {source}")]
    SnapshotIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One differential synapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapsePair {
    pub plus: DeviceInstance,
    pub minus: DeviceInstance,
}

/// A rows x cols array of synapse pairs sharing one gate stack.
/// Row 0..rows-1 includes the always-on bias row appended by the network.
#[derive(Debug, Clone)]
pub struct CrossbarLayer {
    pub rows: usize,
    pub cols: usize,
    pairs: Vec<SynapsePair>,
    pub params: GateStackParams,
    pub num_levels: u8,
}

impl CrossbarLayer {
    pub fn pair(&self, row: usize, col: usize) -> &SynapsePair {
        &self.pairs[row * self.cols + col]
    }

    pub fn pairs(&self) -> &[SynapsePair] {
        &self.pairs
    }
}

/// Column ADC setting; the conversion range is symmetric, +/- full_scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcConfig {
    pub bits: u32,
    pub full_scale: f64,
}

impl AdcConfig {
    pub fn new(bits: u32, full_scale: f64) -> Result<Self, CrossbarError> {
        if bits < 1 || bits > 16 {
            return Err(CrossbarError::BadAdcBits(bits));
        }
        if full_scale <= 0.0 {
            return Err(CrossbarError::BadAdcFullScale(full_scale));
        }
        Ok(AdcConfig { bits, full_scale })
    }
}

/// Conductance fractions `G(level) / G(max level)` the stack can store,
/// evaluated with variation off at `op_ref`. Strictly increasing, last is 1.
pub fn achievable_fractions(
    params: &GateStackParams,
    num_levels: u8,
    op_ref: &OperatingPoint,
) -> Result<Vec<f64>, CrossbarError> {
    let g_max = channel_conductance(
        params,
        &DeviceInstance::ideal(MemoryState::lrs(num_levels)?),
        op_ref,
    )?;
    (0..num_levels)
        .map(|l| {
            let g = channel_conductance(
                params,
                &DeviceInstance::ideal(MemoryState::new(l, num_levels)?),
                op_ref,
            )?;
            Ok(g / g_max)
        })
        .collect()
}

/// Program quantized weights into a differential layer.
///
/// Positive weights put the magnitude level on the plus device with an HRS
/// reference opposite; negative weights mirror; zero programs both sides to
/// the HRS. Variation factors are left at zero until sampling.
pub fn map_weights(
    w_quant: &Array2<f64>,
    params: &GateStackParams,
    num_levels: u8,
    fractions: &[f64],
) -> Result<CrossbarLayer, CrossbarError> {
    let (rows, cols) = w_quant.dim();
    let hrs = MemoryState::hrs(num_levels)?;
    let mut pairs = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let w = w_quant[(row, col)];
            let pair = if w == 0.0 {
                SynapsePair {
                    plus: DeviceInstance::ideal(hrs),
                    minus: DeviceInstance::ideal(hrs),
                }
            } else {
                let level = level_for_magnitude(w.abs(), fractions).ok_or(
                    CrossbarError::UnmappableWeight { row, col, value: w },
                )?;
                let mag = DeviceInstance::ideal(MemoryState::new(level, num_levels)?);
                let ref_dev = DeviceInstance::ideal(hrs);
                if w > 0.0 {
                    SynapsePair { plus: mag, minus: ref_dev }
                } else {
                    SynapsePair { plus: ref_dev, minus: mag }
                }
            };
            pairs.push(pair);
        }
    }
    Ok(CrossbarLayer {
        rows,
        cols,
        pairs,
        params: params.clone(),
        num_levels,
    })
}

fn level_for_magnitude(mag: f64, fractions: &[f64]) -> Option<u8> {
    fractions
        .iter()
        .position(|&f| (mag - f).abs() <= 1e-9 * f.max(1.0))
        .map(|l| l as u8)
}

/// Per-pair stream labels for variation sampling.
const TAG_PLUS: u64 = 0;
const TAG_MINUS: u64 = 1;

/// Sample an independent variation factor for every device.
///
/// Streams are derived from (master_seed, layer_index, row, col, tag), so
/// the result does not depend on traversal order.
pub fn sample_array_variation(
    layer: &mut CrossbarLayer,
    sigma: f64,
    master_seed: u64,
    layer_index: u64,
) -> Result<(), CrossbarError> {
    if sigma == 0.0 {
        return Ok(());
    }
    let root = Stream::new(master_seed).derive(layer_index);
    for row in 0..layer.rows {
        let row_stream = root.derive(row as u64);
        for col in 0..layer.cols {
            let cell = row_stream.derive(col as u64);
            let pair = &mut layer.pairs[row * layer.cols + col];
            let mut sp = cell.derive(TAG_PLUS);
            let mut sm = cell.derive(TAG_MINUS);
            pair.plus.epsilon = crate::device::sample_variation(sigma, &mut sp)?;
            pair.minus.epsilon = crate::device::sample_variation(sigma, &mut sm)?;
        }
    }
    Ok(())
}

/// Analog column currents `I_j = sum_i x_i * vd * (G_plus - G_minus)`, A.
pub fn array_output_currents(
    layer: &CrossbarLayer,
    x: &[f64],
    op: &OperatingPoint,
) -> Result<Vec<f64>, CrossbarError> {
    if x.len() != layer.rows {
        return Err(CrossbarError::DimensionMismatch {
            got: x.len(),
            expected: layer.rows,
        });
    }
    let mut currents = vec![0.0; layer.cols];
    for row in 0..layer.rows {
        let drive = x[row] * op.vd_read;
        if drive == 0.0 {
            continue;
        }
        for col in 0..layer.cols {
            let pair = &layer.pairs[row * layer.cols + col];
            let gp = channel_conductance(&layer.params, &pair.plus, op)?;
            let gm = channel_conductance(&layer.params, &pair.minus, op)?;
            currents[col] += drive * (gp - gm);
        }
    }
    Ok(currents)
}

/// Sense-reference conductance: an ideal LRS device at `sense_op`.
pub fn sense_reference(
    params: &GateStackParams,
    num_levels: u8,
    sense_op: &OperatingPoint,
) -> Result<f64, CrossbarError> {
    let g = channel_conductance(
        params,
        &DeviceInstance::ideal(MemoryState::lrs(num_levels)?),
        sense_op,
    )?;
    if g <= 0.0 {
        return Err(CrossbarError::BadSenseReference);
    }
    Ok(g)
}

/// Normalize column currents to dimensionless weighted sums,
/// `s_j = I_j / (vd * G_max(sense_op))`.
pub fn normalize_sum(
    currents: &[f64],
    layer: &CrossbarLayer,
    sense_op: &OperatingPoint,
) -> Result<Vec<f64>, CrossbarError> {
    let g_ref = sense_reference(&layer.params, layer.num_levels, sense_op)?;
    let denom = sense_op.vd_read * g_ref;
    if denom <= 0.0 {
        return Err(CrossbarError::BadSenseReference);
    }
    Ok(currents.iter().map(|&i| i / denom).collect())
}

/// Midtread uniform quantizer with saturation; step `full_scale / 2^(bits-1)`,
/// rounding half away from zero.
pub fn adc_quantize(s: f64, adc: &AdcConfig) -> f64 {
    let half_codes = (1u32 << (adc.bits - 1)) as f64;
    let delta = adc.full_scale / half_codes;
    let code = (s / delta).round().clamp(-half_codes, half_codes - 1.0);
    code * delta
}

/// Full column path: currents -> normalization -> ADC.
pub fn layer_forward(
    layer: &CrossbarLayer,
    x: &[f64],
    op: &OperatingPoint,
    sense_op: &OperatingPoint,
    adc: Option<&AdcConfig>,
) -> Result<Vec<f64>, CrossbarError> {
    let currents = array_output_currents(layer, x, op)?;
    let mut sums = normalize_sum(&currents, layer, sense_op)?;
    if let Some(adc) = adc {
        for s in &mut sums {
            *s = adc_quantize(*s, adc);
        }
    }
    Ok(sums)
}

/// Dense equivalent of the normalized (pre-ADC) layer transfer:
/// `W_eff[i][j] = (G_plus - G_minus) / G_max(sense_op)`, so that
/// `s = x . W_eff * (vd_op / vd_sense)`.
///
/// This is the vectorized path used for whole-dataset inference; it is
/// numerically identical to composing the per-column operations.
pub fn effective_weight_matrix(
    layer: &CrossbarLayer,
    op: &OperatingPoint,
    sense_op: &OperatingPoint,
) -> Result<Array2<f64>, CrossbarError> {
    let g_ref = sense_reference(&layer.params, layer.num_levels, sense_op)?;
    // per-level base conductance at op; epsilon scales multiplicatively
    let base: Vec<f64> = (0..layer.num_levels)
        .map(|l| {
            channel_conductance(
                &layer.params,
                &DeviceInstance::ideal(MemoryState::new(l, layer.num_levels).unwrap()),
                op,
            )
            .map_err(CrossbarError::from)
        })
        .collect::<Result<_, _>>()?;
    let mut w = Array2::zeros((layer.rows, layer.cols));
    for row in 0..layer.rows {
        for col in 0..layer.cols {
            let pair = &layer.pairs[row * layer.cols + col];
            let gp = base[pair.plus.state.level() as usize] * (1.0 + pair.plus.epsilon);
            let gm = base[pair.minus.state.level() as usize] * (1.0 + pair.minus.epsilon);
            w[(row, col)] = (gp - gm) / g_ref;
        }
    }
    Ok(w)
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"FXBAR001";

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    version: u32,
    rows: usize,
    cols: usize,
    num_levels: u8,
    params_hash: String,
    seed: u64,
}

/// FNV-1a 64 over the canonical JSON serialization of the parameters.
pub fn params_hash(params: &GateStackParams) -> String {
    let bytes = serde_json::to_vec(params).expect("params serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Write a layer snapshot (levels + variation factors) to a versioned
/// binary container with a JSON header.
pub fn save_snapshot(
    layer: &CrossbarLayer,
    seed: u64,
    path: &Path,
) -> Result<(), CrossbarError> {
    let io_err = |source| CrossbarError::SnapshotIo {
        path: path.display().to_string(),
        source,
    };
    let header = SnapshotHeader {
        version: 1,
        rows: layer.rows,
        cols: layer.cols,
        num_levels: layer.num_levels,
        params_hash: params_hash(&layer.params),
        seed,
    };
    let header_json = serde_json::to_vec(&header).expect("header serialize");
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(SNAPSHOT_MAGIC).map_err(io_err)?;
    f.write_all(&(header_json.len() as u32).to_le_bytes()).map_err(io_err)?;
    f.write_all(&header_json).map_err(io_err)?;
    let mut levels = Vec::with_capacity(layer.pairs.len() * 2);
    let mut eps = Vec::with_capacity(layer.pairs.len() * 16);
    for pair in &layer.pairs {
        levels.push(pair.plus.state.level());
        levels.push(pair.minus.state.level());
        eps.extend_from_slice(&pair.plus.epsilon.to_le_bytes());
        eps.extend_from_slice(&pair.minus.epsilon.to_le_bytes());
    }
    f.write_all(&levels).map_err(io_err)?;
    f.write_all(&eps).map_err(io_err)?;
    Ok(())
}

/// Read back a snapshot written by [`save_snapshot`]; `params` must hash to
/// the value recorded in the header.
pub fn load_snapshot(
    path: &Path,
    params: &GateStackParams,
) -> Result<(CrossbarLayer, u64), CrossbarError> {
    let bad = |msg: &str| CrossbarError::Snapshot {
        path: path.display().to_string(),
        msg: msg.to_string(),
    };
    let io_err = |source| CrossbarError::SnapshotIo {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::open(path).map_err(io_err)?;
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).map_err(io_err)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut len_bytes = [0u8; 4];
    f.read_exact(&mut len_bytes).map_err(io_err)?;
    let mut header_json = vec![0u8; u32::from_le_bytes(len_bytes) as usize];
    f.read_exact(&mut header_json).map_err(io_err)?;
    let header: SnapshotHeader =
        serde_json::from_slice(&header_json).map_err(|e| bad(&format!("bad header: {e}")))?;
    if header.version != 1 {
        return Err(bad(&format!("unsupported version {}", header.version)));
    }
    if header.params_hash != params_hash(params) {
        return Err(bad("gate stack parameters do not match snapshot hash"));
    }
    let n = header.rows * header.cols;
    let mut levels = vec![0u8; n * 2];
    f.read_exact(&mut levels).map_err(io_err)?;
    let mut eps_bytes = vec![0u8; n * 16];
    f.read_exact(&mut eps_bytes).map_err(io_err)?;
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let read_f64 = |k: usize| {
            let mut b = [0u8; 8];
            b.copy_from_slice(&eps_bytes[k * 8..k * 8 + 8]);
            f64::from_le_bytes(b)
        };
        pairs.push(SynapsePair {
            plus: DeviceInstance {
                state: MemoryState::new(levels[i * 2], header.num_levels)?,
                epsilon: read_f64(i * 2),
            },
            minus: DeviceInstance {
                state: MemoryState::new(levels[i * 2 + 1], header.num_levels)?,
                epsilon: read_f64(i * 2 + 1),
            },
        });
    }
    Ok((
        CrossbarLayer {
            rows: header.rows,
            cols: header.cols,
            pairs,
            params: params.clone(),
            num_levels: header.num_levels,
        },
        header.seed,
    ))
}
