//! Inference-after-temperature-change experiments.
//!
//! Networks are trained once at the reference temperature, mapped onto
//! crossbar layers, and evaluated at other junction temperatures without
//! any retraining. Device-to-device variation is Monte Carlo sampled per
//! trial; a trial models one programmed chip, so the same variation draw
//! is reused across every read condition of that trial.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossbar::{
    achievable_fractions, adc_quantize, effective_weight_matrix, map_weights,
    sample_array_variation, sense_reference, AdcConfig, CrossbarError,
};
use crate::data::Dataset;
use crate::device::{DeviceError, GateStackParams, OperatingPoint, T_REF, VD_READ_DEFAULT};
use crate::network::{accuracy_of, argmax_rows, augment, sigmoid, MLPModel};
use crate::rng::Stream;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Crossbar(#[from] CrossbarError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("sweep config invalid: {0}")]
    BadConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bias grid is empty")]
    EmptyBiasGrid,
}

/// How the sense amplifier's normalization reference tracks temperature.
///
/// `Reference` fixes the reference conductance at the programming
/// temperature (the read path keeps the thresholds it was calibrated
/// with); `Adjusted` recomputes it at the operating temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensingMode {
    #[serde(rename = "reference")]
    Reference,
    #[serde(rename = "adjusted")]
    Adjusted,
}

/// Monte Carlo sweep over (temperature, read bias, trial).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub gate_stack: GateStackParams,
    pub temperatures: Vec<f64>,
    pub vg_read_values: Vec<f64>,
    pub vd_read: f64,
    pub sigma: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub levels: u8,
    /// None disables the column ADC entirely.
    pub adc_bits: Option<u32>,
    /// None auto-calibrates per layer at the reference temperature.
    pub adc_full_scale: Option<f64>,
    pub sensing: SensingMode,
    /// Input-referred read noise as a fraction of the reference full-scale
    /// signal of one LRS device. Zero disables read noise.
    pub read_noise_frac: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.temperatures.is_empty() || self.vg_read_values.is_empty() {
            return Err(ExperimentError::BadConfig(
                "temperatures and vg_read_values must be non-empty".into(),
            ));
        }
        if self.trials < 1 {
            return Err(ExperimentError::BadConfig("trials must be >= 1".into()));
        }
        if self.sigma < 0.0 {
            return Err(ExperimentError::BadConfig(format!(
                "sigma = {} must be non-negative",
                self.sigma
            )));
        }
        if self.read_noise_frac < 0.0 {
            return Err(ExperimentError::BadConfig(format!(
                "read_noise_frac = {} must be non-negative",
                self.read_noise_frac
            )));
        }
        Ok(())
    }
}

/// One accuracy measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub stack: String,
    pub temp: f64,
    pub vg_read: f64,
    pub levels: u8,
    pub sigma: f64,
    pub trial: usize,
    pub accuracy: f64,
}

/// Sample statistics for one (temperature, bias) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub stack: String,
    pub temp: f64,
    pub vg_read: f64,
    pub levels: u8,
    pub sigma: f64,
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); absent for a single trial.
    pub std: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub records: Vec<AccuracyRecord>,
    pub summaries: Vec<CellSummary>,
}

impl AccuracyReport {
    pub fn summary_for(&self, temp: f64, vg_read: f64) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.temp == temp && s.vg_read == vg_read)
    }
}

/// Exact per-cell sample statistics in first-seen cell order.
pub fn monte_carlo_summary(records: &[AccuracyRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<((String, u64, u64, u8, u64), Vec<f64>)> = Vec::new();
    for r in records {
        let key = (
            r.stack.clone(),
            r.temp.to_bits(),
            r.vg_read.to_bits(),
            r.levels,
            r.sigma.to_bits(),
        );
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, vals)) => vals.push(r.accuracy),
            None => cells.push((key, vec![r.accuracy])),
        }
    }
    cells
        .into_iter()
        .map(|((stack, t, vg, levels, sigma), vals)| {
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                Some(
                    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
                        .sqrt(),
                )
            } else {
                None
            };
            CellSummary {
                stack,
                temp: f64::from_bits(t),
                vg_read: f64::from_bits(vg),
                levels,
                sigma: f64::from_bits(sigma),
                trials: n,
                mean,
                std,
                min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
                max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

const TRIAL_SEED_SPACE: u64 = 11;
const VARIATION_SPACE: u64 = 1;
const NOISE_SPACE: u64 = 2;

/// Seed of one Monte Carlo trial: depends only on the master seed and the
/// trial index, so trial k is identical no matter how many trials run and
/// the same programmed chip is reused across read conditions.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    Stream::new(master_seed)
        .derive(TRIAL_SEED_SPACE)
        .derive(trial as u64)
        .next_u64()
}

fn quantized_key(v: f64) -> u64 {
    (v * 1e6).round() as i64 as u64
}

/// Reference operating point used for weight quantization and mapping.
pub fn quantization_reference_op() -> OperatingPoint {
    OperatingPoint::new(0.5, VD_READ_DEFAULT, T_REF).unwrap()
}

/// Hardware inference over a full dataset at one read condition.
///
/// Maps the quantized weights onto crossbar layers, samples variation from
/// `trial_seed`, and evaluates every image at `op`. Weights are never
/// updated. Returns the predicted class per image.
#[allow(clippy::too_many_arguments)]
pub fn run_hw_predictions(
    quantized_weights: &[Array2<f64>],
    params: &GateStackParams,
    fraction_set: &[f64],
    levels: u8,
    op: &OperatingPoint,
    sigma: f64,
    trial_seed: u64,
    adc: Option<&[AdcConfig]>,
    sensing: SensingMode,
    read_noise_frac: f64,
    images: &Array2<f64>,
) -> Result<Vec<usize>, ExperimentError> {
    let sense_op = match sensing {
        SensingMode::Reference => op.at_reference(params.t_ref),
        SensingMode::Adjusted => *op,
    };
    let variation_seed = Stream::new(trial_seed).derive(VARIATION_SPACE).next_u64();

    // read noise std in normalized-sum units: the sense chain's
    // input-referred current noise is a fixed fraction of the design-point
    // (reference-temperature) full-scale current
    let noise_std = if read_noise_frac > 0.0 {
        let g_design = sense_reference(params, levels, &op.at_reference(params.t_ref))?;
        let g_ref = sense_reference(params, levels, &sense_op)?;
        read_noise_frac * g_design / g_ref
    } else {
        0.0
    };
    let noise_root = Stream::new(trial_seed)
        .derive(NOISE_SPACE)
        .derive(quantized_key(op.temp))
        .derive(quantized_key(op.vg_read));

    let mut act = images.clone();
    let last = quantized_weights.len() - 1;
    for (layer_idx, wq) in quantized_weights.iter().enumerate() {
        let mut layer = map_weights(wq, params, levels, fraction_set)?;
        sample_array_variation(&mut layer, sigma, variation_seed, layer_idx as u64)?;
        let w_eff = effective_weight_matrix(&layer, op, &sense_op)?;
        let mut sums = augment(&act).dot(&w_eff);

        if noise_std > 0.0 {
            let layer_noise = noise_root.derive(layer_idx as u64);
            for (img, mut row) in sums.rows_mut().into_iter().enumerate() {
                let mut stream = layer_noise.derive(img as u64);
                for v in row.iter_mut() {
                    *v += noise_std * stream.next_gaussian();
                }
            }
        }
        if let Some(adcs) = adc {
            let cfg = &adcs[layer_idx];
            sums.mapv_inplace(|s| adc_quantize(s, cfg));
        }
        act = if layer_idx < last { sums.mapv(sigmoid) } else { sums };
    }
    Ok(argmax_rows(&act))
}

/// Accuracy wrapper around [`run_hw_predictions`].
#[allow(clippy::too_many_arguments)]
pub fn run_hw_inference(
    quantized_weights: &[Array2<f64>],
    params: &GateStackParams,
    fraction_set: &[f64],
    levels: u8,
    op: &OperatingPoint,
    sigma: f64,
    trial_seed: u64,
    adc: Option<&[AdcConfig]>,
    sensing: SensingMode,
    read_noise_frac: f64,
    dataset: &Dataset,
) -> Result<f64, ExperimentError> {
    if dataset.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let predictions = run_hw_predictions(
        quantized_weights,
        params,
        fraction_set,
        levels,
        op,
        sigma,
        trial_seed,
        adc,
        sensing,
        read_noise_frac,
        &dataset.images,
    )?;
    Ok(accuracy_of(&predictions, &dataset.labels))
}

/// Column ADC settings calibrated at the reference temperature: per layer,
/// full scale is 1.2x the 99.9th percentile of |s| over a calibration
/// batch with variation and noise off.
pub fn calibrate_adc(
    quantized_weights: &[Array2<f64>],
    params: &GateStackParams,
    fraction_set: &[f64],
    levels: u8,
    vg_read: f64,
    vd_read: f64,
    bits: u32,
    calibration: &Dataset,
) -> Result<Vec<AdcConfig>, ExperimentError> {
    let op = OperatingPoint::new(vg_read, vd_read, params.t_ref)?;
    let mut configs = Vec::with_capacity(quantized_weights.len());
    let mut act = calibration.images.clone();
    let last = quantized_weights.len() - 1;
    for (layer_idx, wq) in quantized_weights.iter().enumerate() {
        let layer = map_weights(wq, params, levels, fraction_set)?;
        let w_eff = effective_weight_matrix(&layer, &op, &op)?;
        let sums = augment(&act).dot(&w_eff);
        let mut mags: Vec<f64> = sums.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((mags.len() as f64 * 0.999).ceil() as usize).clamp(1, mags.len()) - 1;
        let full_scale = (1.2 * mags[idx]).max(1e-6);
        configs.push(AdcConfig::new(bits, full_scale)?);
        act = if layer_idx < last { sums.mapv(sigmoid) } else { sums };
    }
    Ok(configs)
}

/// Resolve the per-layer ADC chain for a sweep cell, if enabled.
fn resolve_adc(
    cfg: &SweepConfig,
    quantized: &[Array2<f64>],
    fraction_set: &[f64],
    vg: f64,
    calibration: &Dataset,
) -> Result<Option<Vec<AdcConfig>>, ExperimentError> {
    match cfg.adc_bits {
        None => Ok(None),
        Some(bits) => {
            let chain = match cfg.adc_full_scale {
                Some(fs) => vec![AdcConfig::new(bits, fs)?; quantized.len()],
                None => calibrate_adc(
                    quantized,
                    &cfg.gate_stack,
                    fraction_set,
                    cfg.levels,
                    vg,
                    cfg.vd_read,
                    bits,
                    calibration,
                )?,
            };
            Ok(Some(chain))
        }
    }
}

/// Full factorial sweep over (bias, temperature, trial).
///
/// Cells run in parallel; records are gathered in deterministic
/// (vg, temperature, trial) order regardless of completion order, and the
/// whole report is a pure function of (weights, config).
pub fn temperature_sweep(
    cfg: &SweepConfig,
    model: &MLPModel,
    dataset: &Dataset,
) -> Result<AccuracyReport, ExperimentError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let quantized = model.quantized_weights();
    let calibration = dataset.head(1000);

    let mut cells = Vec::new();
    for &vg in &cfg.vg_read_values {
        let adc = resolve_adc(cfg, &quantized, &model.fraction_set, vg, &calibration)?;
        for &temp in &cfg.temperatures {
            for trial in 0..cfg.trials {
                cells.push((vg, temp, trial, adc.clone()));
            }
        }
    }

    let records: Result<Vec<AccuracyRecord>, ExperimentError> = cells
        .into_par_iter()
        .map(|(vg, temp, trial, adc)| {
            let op = OperatingPoint::new(vg, cfg.vd_read, temp)?;
            let accuracy = run_hw_inference(
                &quantized,
                &cfg.gate_stack,
                &model.fraction_set,
                cfg.levels,
                &op,
                cfg.sigma,
                trial_seed(cfg.master_seed, trial),
                adc.as_deref(),
                cfg.sensing,
                cfg.read_noise_frac,
                dataset,
            )?;
            Ok(AccuracyRecord {
                stack: cfg.gate_stack.id.to_string(),
                temp,
                vg_read: vg,
                levels: cfg.levels,
                sigma: cfg.sigma,
                trial,
                accuracy,
            })
        })
        .collect();
    let records = records?;
    let summaries = monte_carlo_summary(&records);
    Ok(AccuracyReport { records, summaries })
}

/// Read-bias selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasMode {
    /// One bias for all temperatures, maximizing the worst-case mean.
    #[serde(rename = "fixed")]
    Fixed,
    /// An independent bias per temperature (adaptive temperature-aware read).
    #[serde(rename = "per-temperature")]
    PerTemperature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasOptimization {
    pub mode: BiasMode,
    /// Chosen bias in fixed mode.
    pub fixed_choice: Option<f64>,
    /// Worst-case (min over temperature) mean accuracy of the choice.
    pub fixed_objective: Option<f64>,
    /// (temperature, bias, mean accuracy) triples in per-temperature mode.
    pub per_temperature: Option<Vec<(f64, f64, f64)>>,
    pub report: AccuracyReport,
}

/// Exhaustive grid search over the configured read biases.
///
/// Fixed mode maximizes the minimum-over-temperature mean accuracy;
/// per-temperature mode maximizes each temperature independently. Ties
/// resolve to the lower bias.
pub fn optimize_read_bias(
    cfg: &SweepConfig,
    model: &MLPModel,
    dataset: &Dataset,
    mode: BiasMode,
) -> Result<BiasOptimization, ExperimentError> {
    if cfg.vg_read_values.is_empty() {
        return Err(ExperimentError::EmptyBiasGrid);
    }
    let report = temperature_sweep(cfg, model, dataset)?;

    let mean_of = |vg: f64, temp: f64| -> f64 {
        report
            .summaries
            .iter()
            .find(|s| s.vg_read == vg && s.temp == temp)
            .map(|s| s.mean)
            .unwrap_or(f64::NEG_INFINITY)
    };

    let mut sorted_vg = cfg.vg_read_values.clone();
    sorted_vg.sort_by(|a, b| a.partial_cmp(b).unwrap());

    match mode {
        BiasMode::Fixed => {
            let mut best_vg = sorted_vg[0];
            let mut best_obj = f64::NEG_INFINITY;
            for &vg in &sorted_vg {
                let obj = cfg
                    .temperatures
                    .iter()
                    .map(|&t| mean_of(vg, t))
                    .fold(f64::INFINITY, f64::min);
                if obj > best_obj {
                    best_obj = obj;
                    best_vg = vg;
                }
            }
            Ok(BiasOptimization {
                mode,
                fixed_choice: Some(best_vg),
                fixed_objective: Some(best_obj),
                per_temperature: None,
                report,
            })
        }
        BiasMode::PerTemperature => {
            let per_t = cfg
                .temperatures
                .iter()
                .map(|&t| {
                    let mut best_vg = sorted_vg[0];
                    let mut best = f64::NEG_INFINITY;
                    for &vg in &sorted_vg {
                        let m = mean_of(vg, t);
                        if m > best {
                            best = m;
                            best_vg = vg;
                        }
                    }
                    (t, best_vg, best)
                })
                .collect();
            Ok(BiasOptimization {
                mode,
                fixed_choice: None,
                fixed_objective: None,
                per_temperature: Some(per_t),
                report,
            })
        }
    }
}

/// Achievable fraction ladder at the quantization reference point.
pub fn training_fraction_set(
    params: &GateStackParams,
    levels: u8,
) -> Result<Vec<f64>, ExperimentError> {
    Ok(achievable_fractions(params, levels, &quantization_reference_op())?)
}
