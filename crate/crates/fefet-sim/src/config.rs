//! Run configuration: structured text (TOML) with sections, documented
//! defaults, unknown-key rejection, and a resolved dump for provenance.

use serde::{Deserialize, Deserializer, Serialize};
use std::path::{Path, PathBuf};

use crate::device::{GateStackId, GateStackParams};
use crate::experiments::{SensingMode, SweepConfig};
use crate::network::{LossKind, TrainConfig};

/// Default input-referred read-path noise, as a fraction of the
/// reference-temperature full-scale signal of one LRS device.
pub const DEFAULT_READ_NOISE_FRAC: f64 = 0.25;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Toml { path: String, message: String },
    #[error("config key {key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error("config key {key}: path {path} does not exist")]
    MissingPath { key: String, path: String },
}

fn num_list_or_csv<'de, D>(de: D) -> Result<Vec<f64>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum ListOrCsv {
        List(Vec<f64>),
        Csv(String),
    }
    match ListOrCsv::deserialize(de)? {
        ListOrCsv::List(v) => Ok(v),
        ListOrCsv::Csv(s) => parse_csv_list(&s).map_err(serde::de::Error::custom),
    }
}

/// Parse a comma-separated number list like "0.3,0.5,0.7".
pub fn parse_csv_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| format!("invalid number '{}': {e}", tok.trim()))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub levels: u8,
    pub loss: LossKind,
    pub dims: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            epochs: 30,
            batch_size: 64,
            learning_rate: 0.1,
            seed: 1,
            levels: 2,
            loss: LossKind::CrossEntropySoftmax,
            dims: vec![784, 200, 10],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub gate_stack: GateStackId,
    #[serde(deserialize_with = "num_list_or_csv")]
    pub temperatures: Vec<f64>,
    #[serde(deserialize_with = "num_list_or_csv")]
    pub vg_read_values: Vec<f64>,
    pub vd_read: f64,
    pub sigma: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub sensing: SensingMode,
    pub read_noise_frac: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            gate_stack: GateStackId::GsII,
            temperatures: vec![233.0, 300.0, 398.0],
            vg_read_values: vec![0.5],
            vd_read: 0.1,
            sigma: 0.15,
            trials: 10,
            master_seed: 42,
            sensing: SensingMode::Reference,
            read_noise_frac: DEFAULT_READ_NOISE_FRAC,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdcSection {
    pub enabled: bool,
    pub bits: u32,
    /// Absent: auto-calibrate per layer at the reference temperature.
    pub full_scale: Option<f64>,
}

impl Default for AdcSection {
    fn default() -> Self {
        AdcSection {
            enabled: true,
            bits: 8,
            full_scale: None,
        }
    }
}

/// Optional per-field overrides of a gate stack preset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceOverrides {
    pub t_fe: Option<f64>,
    pub vth_hrs_ref: Option<f64>,
    pub vth_lrs_ref: Option<f64>,
    pub kappa_vt: Option<f64>,
    pub n_ideality: Option<f64>,
    pub k_gain: Option<f64>,
    pub mu_exp: Option<f64>,
    pub ec: Option<f64>,
}

impl DeviceOverrides {
    fn apply(&self, mut params: GateStackParams) -> GateStackParams {
        if let Some(v) = self.t_fe {
            params.t_fe = v;
        }
        if let Some(v) = self.vth_hrs_ref {
            params.vth_hrs_ref = v;
        }
        if let Some(v) = self.vth_lrs_ref {
            params.vth_lrs_ref = v;
        }
        if let Some(v) = self.kappa_vt {
            params.kappa_vt = v;
        }
        if let Some(v) = self.n_ideality {
            params.n_ideality = v;
        }
        if let Some(v) = self.k_gain {
            params.k_gain = v;
        }
        if let Some(v) = self.mu_exp {
            params.mu_exp = v;
        }
        if let Some(v) = self.ec {
            params.ec = v;
        }
        params
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    #[serde(rename = "gs-i")]
    pub gs_i: DeviceOverrides,
    #[serde(rename = "gs-ii")]
    pub gs_ii: DeviceOverrides,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub mnist_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub adc: AdcSection,
    pub device: DeviceSection,
    pub paths: PathsSection,
}

impl RunConfig {
    /// Parse a config file; an empty file yields every default.
    pub fn parse(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Toml {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        // referenced paths must exist at load time
        if let Some(dir) = &cfg.paths.mnist_dir {
            if !dir.exists() {
                return Err(ConfigError::MissingPath {
                    key: "paths.mnist_dir".into(),
                    path: dir.display().to_string(),
                });
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, msg: String| {
            Err(ConfigError::Invalid {
                key: key.into(),
                msg,
            })
        };
        if self.train.epochs == 0 {
            return invalid("train.epochs", "must be >= 1".into());
        }
        if self.train.batch_size == 0 {
            return invalid("train.batch_size", "must be >= 1".into());
        }
        if self.train.learning_rate <= 0.0 {
            return invalid(
                "train.learning_rate",
                format!("{} is not positive", self.train.learning_rate),
            );
        }
        if self.train.levels != 2 && self.train.levels != 4 {
            return invalid("train.levels", format!("{} is not 2 or 4", self.train.levels));
        }
        if self.train.dims.len() < 2 {
            return invalid("train.dims", "needs at least input and output sizes".into());
        }
        if self.sweep.sigma < 0.0 {
            return invalid("sweep.sigma", format!("{} is negative", self.sweep.sigma));
        }
        if self.sweep.trials < 1 {
            return invalid("sweep.trials", "must be >= 1".into());
        }
        if self.sweep.temperatures.is_empty() {
            return invalid("sweep.temperatures", "must be non-empty".into());
        }
        if self.sweep.vg_read_values.is_empty() {
            return invalid("sweep.vg_read_values", "must be non-empty".into());
        }
        if self.sweep.vd_read <= 0.0 {
            return invalid("sweep.vd_read", format!("{} is not positive", self.sweep.vd_read));
        }
        if self.sweep.read_noise_frac < 0.0 {
            return invalid(
                "sweep.read_noise_frac",
                format!("{} is negative", self.sweep.read_noise_frac),
            );
        }
        if self.adc.bits < 1 || self.adc.bits > 16 {
            return invalid("adc.bits", format!("{} outside [1, 16]", self.adc.bits));
        }
        if let Some(fs) = self.adc.full_scale {
            if fs <= 0.0 {
                return invalid("adc.full_scale", format!("{fs} is not positive"));
            }
        }
        for (key, id) in [("device.gs-i", GateStackId::GsI), ("device.gs-ii", GateStackId::GsII)] {
            if let Err(e) = self.gate_stack_params(id).validate() {
                return invalid(key, e.to_string());
            }
        }
        Ok(())
    }

    /// Preset parameters with any configured overrides applied.
    pub fn gate_stack_params(&self, id: GateStackId) -> GateStackParams {
        let overrides = match id {
            GateStackId::GsI => &self.device.gs_i,
            GateStackId::GsII => &self.device.gs_ii,
        };
        overrides.apply(GateStackParams::preset(id))
    }

    pub fn mnist_dir(&self) -> PathBuf {
        self.paths
            .mnist_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("data/mnist"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Training config bound to a fraction ladder.
    pub fn train_config(&self, fraction_set: Vec<f64>) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.train.seed,
            levels: self.train.levels,
            fraction_set,
            loss: self.train.loss,
        }
    }

    /// Sweep config for the configured gate stack.
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            gate_stack: self.gate_stack_params(self.sweep.gate_stack),
            temperatures: self.sweep.temperatures.clone(),
            vg_read_values: self.sweep.vg_read_values.clone(),
            vd_read: self.sweep.vd_read,
            sigma: self.sweep.sigma,
            trials: self.sweep.trials,
            master_seed: self.sweep.master_seed,
            levels: self.train.levels,
            adc_bits: self.adc.enabled.then_some(self.adc.bits),
            adc_full_scale: self.adc.full_scale,
            sensing: self.sweep.sensing,
            read_noise_frac: self.sweep.read_noise_frac,
        }
    }

    /// Fully-resolved dump with every default echoed.
    pub fn resolved_toml(&self) -> String {
        let mut resolved = self.clone();
        resolved.paths.mnist_dir = Some(self.mnist_dir());
        resolved.paths.out_dir = Some(self.out_dir());
        toml::to_string_pretty(&resolved).expect("config serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn empty_file_is_all_defaults() {
        let (_dir, path) = write_config("");
        let cfg = RunConfig::parse(&path).unwrap();
        assert_eq!(cfg.sweep.gate_stack, GateStackId::GsII);
        assert_eq!(cfg.sweep.vg_read_values, vec![0.5]);
        assert_eq!(cfg.sweep.sigma, 0.15);
        assert_eq!(cfg.train.levels, 2);
        assert_eq!(cfg.train.dims, vec![784, 200, 10]);
        assert_eq!(cfg.sweep.sensing, SensingMode::Reference);
    }

    #[test]
    fn negative_sigma_names_the_key() {
        let (_dir, path) = write_config("[sweep]\nsigma = -0.1\n");
        match RunConfig::parse(&path) {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "sweep.sigma"),
            other => panic!("expected invalid-key error, got {other:?}"),
        }
    }

    #[test]
    fn vg_list_accepts_csv_string() {
        let (_dir, path) = write_config("[sweep]\nvg_read_values = \"0.3,0.5,0.7\"\n");
        let cfg = RunConfig::parse(&path).unwrap();
        assert_eq!(cfg.sweep.vg_read_values, vec![0.3, 0.5, 0.7]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let (_dir, path) = write_config("[sweep]\nnot_a_key = 3\n");
        match RunConfig::parse(&path) {
            Err(ConfigError::Toml { message, .. }) => {
                assert!(message.contains("not_a_key"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            other => panic!("expected toml error, got {other:?}"),
        }
    }

    #[test]
    fn device_overrides_apply() {
        let (_dir, path) = write_config("[device.gs-i]\nvth_hrs_ref = 0.6\n");
        let cfg = RunConfig::parse(&path).unwrap();
        let p = cfg.gate_stack_params(GateStackId::GsI);
        assert_eq!(p.vth_hrs_ref, 0.6);
        // untouched fields keep preset values
        assert_eq!(p.t_fe, GateStackParams::gs1().t_fe);
    }

    #[test]
    fn invalid_override_is_named() {
        let (_dir, path) = write_config("[device.gs-ii]\nvth_hrs_ref = 0.0\n");
        match RunConfig::parse(&path) {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "device.gs-ii"),
            other => panic!("expected invalid-key error, got {other:?}"),
        }
    }

    #[test]
    fn missing_mnist_dir_is_rejected_at_parse() {
        let (_dir, path) = write_config("[paths]\nmnist_dir = \"/definitely/not/here\"\n");
        assert!(matches!(
            RunConfig::parse(&path),
            Err(ConfigError::MissingPath { .. })
        ));
    }

    #[test]
    fn resolved_dump_echoes_defaults_and_round_trips() {
        let (_dir, path) = write_config("");
        let cfg = RunConfig::parse(&path).unwrap();
        let dump = cfg.resolved_toml();
        assert!(dump.contains("epochs = 30"), "{dump}");
        assert!(dump.contains("sigma = 0.15"), "{dump}");
        assert!(dump.contains("mnist_dir ="), "{dump}");
        let reparsed: RunConfig = toml::from_str(&dump).unwrap();
        assert_eq!(reparsed.train.epochs, cfg.train.epochs);
        assert_eq!(reparsed.sweep.vg_read_values, cfg.sweep.vg_read_values);
    }
}
