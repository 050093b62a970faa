//! Fe-FinFET compact model.
//!
//! Maps (gate stack, programmed level, gate bias, temperature) to channel
//! conductance. The model is a single-piece smooth charge interpolation:
//!
//! ```text
//! Q(Vov) = n * vt * ln(1 + exp(Vov / (n * vt)))     [V]
//! G      = k_gain * (T/Tref)^mu_exp * Q(Vov) * (1 + eps)
//! ```
//!
//! which reduces to the exponential subthreshold law for `Vov << 0` and to
//! the linear-in-overdrive triode law for `Vov >> 0`, with no piecewise
//! seams. Programmed levels shift the threshold voltage; temperature enters
//! through the thermal voltage, a linear Vth shift (`kappa_vt`) and a
//! power-law mobility factor (`mu_exp`).

use serde::{Deserialize, Serialize};

use crate::rng::Stream;

/// Boltzmann constant over elementary charge, V/K.
pub const BOLTZMANN_OVER_Q: f64 = 8.617333e-5;

/// Reference (programming) temperature, K.
pub const T_REF: f64 = 300.0;

/// Model validity range for junction temperature, K.
pub const TEMP_MIN: f64 = 200.0;
pub const TEMP_MAX: f64 = 450.0;

/// Variation factors are resampled until above this bound so conductance
/// stays positive (a 6-sigma event at sigma = 0.15).
pub const EPSILON_FLOOR: f64 = -0.9;

#[derive(Debug, thiserror::Error)]
pub enum DeviceError {
    #[error("temperature {0} K is not positive")]
    NonPositiveTemperature(f64),
    #[error("temperature {0} K outside model validity range [{TEMP_MIN}, {TEMP_MAX}] K")]
    TemperatureOutOfRange(f64),
    #[error("drain read bias {0} V is negative")]
    NegativeDrainBias(f64),
    #[error("level count {0} is not a supported multi-level setting (2 or 4)")]
    DegenerateStateCount(u8),
    #[error("level {level} out of range for {num_levels} levels")]
    LevelOutOfRange { level: u8, num_levels: u8 },
    #[error("variation sigma {0} is negative")]
    NegativeSigma(f64),
    #[error("variation factor {0} leaves conductance non-positive")]
    EpsilonTooNegative(f64),
    #[error("gate stack parameters invalid: {0}")]
    InvalidParams(String),
    #[error("gate bias grid is empty")]
    EmptyBiasGrid,
    #[error("gate bias grid is not strictly increasing")]
    NonMonotonicBiasGrid,
}

/// Named gate stack presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateStackId {
    #[serde(rename = "GS-I")]
    GsI,
    #[serde(rename = "GS-II")]
    GsII,
}

impl std::fmt::Display for GateStackId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GateStackId::GsI => write!(f, "GS-I"),
            GateStackId::GsII => write!(f, "GS-II"),
        }
    }
}

impl std::str::FromStr for GateStackId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "GS-I" | "gs-i" | "gs1" | "GS1" => Ok(GateStackId::GsI),
            "GS-II" | "gs-ii" | "gs2" | "GS2" => Ok(GateStackId::GsII),
            other => Err(format!("unknown gate stack '{other}' (expected GS-I or GS-II)")),
        }
    }
}

/// Physical and calibration parameters of one gate stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateStackParams {
    /// Preset identity.
    pub id: GateStackId,
    /// Ferroelectric layer thickness, m.
    pub t_fe: f64,
    /// HRS ("0") threshold voltage at `t_ref`, V.
    pub vth_hrs_ref: f64,
    /// LRS ("1") threshold voltage at `t_ref`, V.
    pub vth_lrs_ref: f64,
    /// Threshold temperature coefficient, V/K (negative).
    pub kappa_vt: f64,
    /// Subthreshold ideality factor.
    pub n_ideality: f64,
    /// Transconductance factor mu0*Cox*(W/L) at `t_ref`, A/V^2.
    pub k_gain: f64,
    /// Mobility temperature exponent.
    pub mu_exp: f64,
    /// Coercive field, V/m.
    pub ec: f64,
    /// Reference temperature, K.
    pub t_ref: f64,
}

impl GateStackParams {
    /// GS-I calibration: 5 nm HZO, narrow memory window. The window is
    /// deliberately small enough that the HRS rises into moderate inversion
    /// at the hot end of the operating range at a 0.5 V read bias.
    pub fn gs1() -> Self {
        GateStackParams {
            id: GateStackId::GsI,
            t_fe: 5e-9,
            vth_hrs_ref: 0.50,
            vth_lrs_ref: 0.40,
            kappa_vt: -1.0e-3,
            n_ideality: 1.1,
            k_gain: 100e-6,
            mu_exp: -1.5,
            ec: 1.0e8,
            t_ref: T_REF,
        }
    }

    /// GS-II calibration: 10 nm HZO, wide memory window. The "0" state sits
    /// in deep subthreshold and the "1" state in strong inversion at a 0.5 V
    /// read bias over the whole 233-398 K range.
    pub fn gs2() -> Self {
        GateStackParams {
            id: GateStackId::GsII,
            t_fe: 10e-9,
            vth_hrs_ref: 1.05,
            vth_lrs_ref: 0.25,
            kappa_vt: -1.0e-3,
            n_ideality: 1.1,
            k_gain: 100e-6,
            mu_exp: -1.5,
            ec: 1.0e8,
            t_ref: T_REF,
        }
    }

    pub fn preset(id: GateStackId) -> Self {
        match id {
            GateStackId::GsI => Self::gs1(),
            GateStackId::GsII => Self::gs2(),
        }
    }

    /// Check the structural invariants of a parameter set.
    pub fn validate(&self) -> Result<(), DeviceError> {
        let fail = |msg: String| Err(DeviceError::InvalidParams(msg));
        if self.t_fe <= 0.0 {
            return fail(format!("t_fe = {} m must be positive", self.t_fe));
        }
        if self.k_gain <= 0.0 {
            return fail(format!("k_gain = {} A/V^2 must be positive", self.k_gain));
        }
        if !(1.0..=2.0).contains(&self.n_ideality) {
            return fail(format!("n_ideality = {} must lie in [1, 2]", self.n_ideality));
        }
        if self.vth_hrs_ref <= self.vth_lrs_ref {
            return fail(format!(
                "memory window must be positive (vth_hrs_ref = {} V <= vth_lrs_ref = {} V)",
                self.vth_hrs_ref, self.vth_lrs_ref
            ));
        }
        let window = self.vth_hrs_ref - self.vth_lrs_ref;
        let ideal = memory_window_ideal(self);
        if window > ideal {
            return fail(format!(
                "memory window {window} V exceeds ideal bound 2*Ec*T_Fe = {ideal} V"
            ));
        }
        if self.t_ref <= 0.0 {
            return fail(format!("t_ref = {} K must be positive", self.t_ref));
        }
        Ok(())
    }
}

/// Programmed level of one cell: level 0 is the HRS (minimum conductance),
/// level `num_levels - 1` the LRS (maximum conductance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryState {
    level: u8,
    num_levels: u8,
}

impl MemoryState {
    pub fn new(level: u8, num_levels: u8) -> Result<Self, DeviceError> {
        if num_levels != 2 && num_levels != 4 {
            return Err(DeviceError::DegenerateStateCount(num_levels));
        }
        if level >= num_levels {
            return Err(DeviceError::LevelOutOfRange { level, num_levels });
        }
        Ok(MemoryState { level, num_levels })
    }

    pub fn hrs(num_levels: u8) -> Result<Self, DeviceError> {
        Self::new(0, num_levels)
    }

    pub fn lrs(num_levels: u8) -> Result<Self, DeviceError> {
        Self::new(num_levels - 1, num_levels)
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn num_levels(&self) -> u8 {
        self.num_levels
    }
}

/// Read-operation bias and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Gate read bias, V.
    pub vg_read: f64,
    /// Drain read bias, V.
    pub vd_read: f64,
    /// Junction temperature, K.
    pub temp: f64,
}

/// Default drain read bias, V.
pub const VD_READ_DEFAULT: f64 = 0.1;

/// The small-signal triode assumption holds up to this drain bias.
pub const VD_TRIODE_LIMIT: f64 = 0.2;

impl OperatingPoint {
    pub fn new(vg_read: f64, vd_read: f64, temp: f64) -> Result<Self, DeviceError> {
        if vd_read < 0.0 {
            return Err(DeviceError::NegativeDrainBias(vd_read));
        }
        if !(TEMP_MIN..=TEMP_MAX).contains(&temp) {
            return Err(DeviceError::TemperatureOutOfRange(temp));
        }
        Ok(OperatingPoint { vg_read, vd_read, temp })
    }

    /// Same gate/drain bias at the reference temperature.
    pub fn at_reference(&self, t_ref: f64) -> OperatingPoint {
        OperatingPoint { temp: t_ref, ..*self }
    }
}

/// One programmed cell: level plus the variation factor sampled when the
/// cell was written.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceInstance {
    pub state: MemoryState,
    pub epsilon: f64,
}

impl DeviceInstance {
    pub fn ideal(state: MemoryState) -> Self {
        DeviceInstance { state, epsilon: 0.0 }
    }

    pub fn with_epsilon(state: MemoryState, epsilon: f64) -> Result<Self, DeviceError> {
        if epsilon <= -1.0 {
            return Err(DeviceError::EpsilonTooNegative(epsilon));
        }
        Ok(DeviceInstance { state, epsilon })
    }
}

/// kT/q at `temp`.
pub fn thermal_voltage(temp: f64) -> Result<f64, DeviceError> {
    if temp <= 0.0 {
        return Err(DeviceError::NonPositiveTemperature(temp));
    }
    Ok(BOLTZMANN_OVER_Q * temp)
}

/// Mobility power law `(T / Tref)^mu_exp`, multiplying `k_gain`.
pub fn effective_mobility_factor(params: &GateStackParams, temp: f64) -> f64 {
    (temp / params.t_ref).powf(params.mu_exp)
}

/// Threshold voltage of a programmed level at temperature `temp`.
///
/// Levels interpolate linearly between the HRS and LRS references; the
/// whole ladder shifts by `kappa_vt * (T - Tref)`.
pub fn state_threshold_voltage(
    params: &GateStackParams,
    state: MemoryState,
    temp: f64,
) -> Result<f64, DeviceError> {
    if state.num_levels() < 2 {
        return Err(DeviceError::DegenerateStateCount(state.num_levels()));
    }
    let window = params.vth_hrs_ref - params.vth_lrs_ref;
    let frac = state.level() as f64 / (state.num_levels() - 1) as f64;
    Ok(params.vth_hrs_ref - frac * window + params.kappa_vt * (temp - params.t_ref))
}

/// Numerically stable softplus ln(1 + e^x).
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Channel conductance of one cell at an operating point, S.
///
/// Always positive; exponential in deep subthreshold, linear in overdrive
/// in strong inversion.
pub fn channel_conductance(
    params: &GateStackParams,
    device: &DeviceInstance,
    op: &OperatingPoint,
) -> Result<f64, DeviceError> {
    let vt = thermal_voltage(op.temp)?;
    let vth = state_threshold_voltage(params, device.state, op.temp)?;
    let nvt = params.n_ideality * vt;
    let q_sheet = nvt * softplus((op.vg_read - vth) / nvt);
    Ok(params.k_gain * effective_mobility_factor(params, op.temp) * q_sheet * (1.0 + device.epsilon))
}

/// Drain current with a triode-validity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrainCurrent {
    /// Current, A.
    pub amps: f64,
    /// Set when `vd_read` exceeds the small-signal triode assumption.
    pub triode_warning: bool,
}

/// Ohmic drain current `G * vd_read`.
pub fn drain_current(
    params: &GateStackParams,
    device: &DeviceInstance,
    op: &OperatingPoint,
) -> Result<DrainCurrent, DeviceError> {
    let g = channel_conductance(params, device, op)?;
    Ok(DrainCurrent {
        amps: g * op.vd_read,
        triode_warning: op.vd_read > VD_TRIODE_LIMIT,
    })
}

/// Ideal memory window bound `2 * Ec * T_Fe`, V.
pub fn memory_window_ideal(params: &GateStackParams) -> f64 {
    2.0 * params.ec * params.t_fe
}

/// Id-Vg sweep of one programmed state at fixed temperature (variation off).
pub fn id_vg_curve(
    params: &GateStackParams,
    state: MemoryState,
    temp: f64,
    vg_grid: &[f64],
) -> Result<Vec<(f64, f64)>, DeviceError> {
    if vg_grid.is_empty() {
        return Err(DeviceError::EmptyBiasGrid);
    }
    if vg_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DeviceError::NonMonotonicBiasGrid);
    }
    let device = DeviceInstance::ideal(state);
    vg_grid
        .iter()
        .map(|&vg| {
            let op = OperatingPoint::new(vg, VD_READ_DEFAULT, temp)?;
            Ok((vg, drain_current(params, &device, &op)?.amps))
        })
        .collect()
}

/// Draw a programming variation factor: Normal(0, sigma^2), resampled until
/// above [`EPSILON_FLOOR`].
pub fn sample_variation(sigma: f64, stream: &mut Stream) -> Result<f64, DeviceError> {
    if sigma < 0.0 {
        return Err(DeviceError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    loop {
        let eps = sigma * stream.next_gaussian();
        if eps > EPSILON_FLOOR {
            return Ok(eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(vg: f64, temp: f64) -> OperatingPoint {
        OperatingPoint::new(vg, VD_READ_DEFAULT, temp).unwrap()
    }

    #[test]
    fn thermal_voltage_reference_points() {
        // direct evaluation of kB*T/q
        assert!((thermal_voltage(300.0).unwrap() - 0.025852).abs() < 1e-6);
        assert!((thermal_voltage(233.0).unwrap() - 0.020078).abs() < 1e-6);
        assert!((thermal_voltage(398.0).unwrap() - 0.034297).abs() < 1e-6);
    }

    #[test]
    fn thermal_voltage_rejects_nonpositive() {
        assert!(thermal_voltage(0.0).is_err());
        assert!(thermal_voltage(-10.0).is_err());
    }

    #[test]
    fn mobility_factor_power_law() {
        let p = GateStackParams::gs2();
        assert_eq!(effective_mobility_factor(&p, 300.0), 1.0);
        assert!((effective_mobility_factor(&p, 398.0) - (398.0f64 / 300.0).powf(-1.5)).abs() < 1e-12);
        assert!((effective_mobility_factor(&p, 398.0) - 0.6545).abs() < 1e-4);
        assert!((effective_mobility_factor(&p, 233.0) - 1.4609).abs() < 1e-4);
    }

    #[test]
    fn threshold_interpolation_and_shift() {
        // explicit calibration from the worked examples
        let mut p = GateStackParams::gs2();
        p.vth_hrs_ref = 1.1;
        p.vth_lrs_ref = 0.1;
        let s1 = MemoryState::new(1, 4).unwrap();
        let vth = state_threshold_voltage(&p, s1, 300.0).unwrap();
        assert!((vth - (1.1 - 1.0 / 3.0)).abs() < 1e-12);
        assert!((vth - 0.7667).abs() < 1e-4);

        // level 0 at the reference temperature is the HRS reference itself
        let s0 = MemoryState::hrs(4).unwrap();
        assert_eq!(state_threshold_voltage(&p, s0, p.t_ref).unwrap(), p.vth_hrs_ref);

        // kappa_vt = -1 mV/K, 398 K
        p.kappa_vt = -1.0e-3;
        let vth_hot = state_threshold_voltage(&p, s0, 398.0).unwrap();
        assert!((vth_hot - 1.002).abs() < 1e-9);
    }

    #[test]
    fn conductance_inversion_and_subthreshold_limits() {
        let mut p = GateStackParams::gs2();
        p.vth_lrs_ref = 0.1;
        p.vth_hrs_ref = 1.1;
        p.k_gain = 100e-6;
        p.n_ideality = 1.1;

        let lrs = DeviceInstance::ideal(MemoryState::lrs(2).unwrap());
        let g_on = channel_conductance(&p, &lrs, &op(0.5, 300.0)).unwrap();
        // Q(0.4 V) ~ 0.400 V so G ~ k_gain * 0.4 = 40 uS
        assert!((g_on - 40.0e-6).abs() / 40.0e-6 < 1e-3, "G_on = {g_on}");

        let hrs = DeviceInstance::ideal(MemoryState::hrs(2).unwrap());
        let g_off = channel_conductance(&p, &hrs, &op(0.5, 300.0)).unwrap();
        // subthreshold limit: n*vt*exp(-0.6/(n*vt)) * k_gain
        let nvt = 1.1 * thermal_voltage(300.0).unwrap();
        let expect = 100e-6 * nvt * (-0.6 / nvt).exp();
        assert!((g_off - expect).abs() / expect < 1e-3);
        assert!(g_off > 1.8e-15 && g_off < 2.1e-15, "G_off = {g_off}");
        let on_off = g_on / g_off;
        assert!(on_off > 1.9e10 && on_off < 2.2e10, "on/off = {on_off}");
    }

    #[test]
    fn variation_factor_is_multiplicative() {
        let p = GateStackParams::gs2();
        let s = MemoryState::lrs(2).unwrap();
        let base = channel_conductance(&p, &DeviceInstance::ideal(s), &op(0.5, 300.0)).unwrap();
        let dev = DeviceInstance::with_epsilon(s, 0.15).unwrap();
        let varied = channel_conductance(&p, &dev, &op(0.5, 300.0)).unwrap();
        assert!((varied / base - 1.15).abs() < 1e-12);
        assert!(DeviceInstance::with_epsilon(s, -1.0).is_err());
    }

    #[test]
    fn drain_current_ohmic() {
        let mut p = GateStackParams::gs2();
        p.vth_lrs_ref = 0.1;
        p.vth_hrs_ref = 1.1;
        let lrs = DeviceInstance::ideal(MemoryState::lrs(2).unwrap());
        let i = drain_current(&p, &lrs, &op(0.5, 300.0)).unwrap();
        assert!((i.amps - 4.0e-6).abs() / 4.0e-6 < 1e-3);
        assert!(!i.triode_warning);

        let zero = OperatingPoint::new(0.5, 0.0, 300.0).unwrap();
        assert_eq!(drain_current(&p, &lrs, &zero).unwrap().amps, 0.0);

        let sat = OperatingPoint::new(0.5, 0.5, 300.0).unwrap();
        assert!(drain_current(&p, &lrs, &sat).unwrap().triode_warning);
    }

    #[test]
    fn gs1_hrs_current_shows_overlap_onset() {
        // hot GS-I HRS current falls between the two 300 K state currents
        let p = GateStackParams::gs1();
        let hrs = DeviceInstance::ideal(MemoryState::hrs(2).unwrap());
        let lrs = DeviceInstance::ideal(MemoryState::lrs(2).unwrap());
        let i_hrs_hot = drain_current(&p, &hrs, &op(0.5, 398.0)).unwrap().amps;
        let i_hrs_ref = drain_current(&p, &hrs, &op(0.5, 300.0)).unwrap().amps;
        let i_lrs_ref = drain_current(&p, &lrs, &op(0.5, 300.0)).unwrap().amps;
        assert!(i_hrs_hot > i_hrs_ref);
        assert!(i_hrs_hot < i_lrs_ref);
    }

    #[test]
    fn ideal_memory_window() {
        let mut p = GateStackParams::gs2();
        p.ec = 1e8;
        p.t_fe = 10e-9;
        assert!((memory_window_ideal(&p) - 2.0).abs() < 1e-12);
        p.t_fe = 5e-9;
        assert!((memory_window_ideal(&p) - 1.0).abs() < 1e-12);
        p.t_fe = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn preset_params_validate() {
        GateStackParams::gs1().validate().unwrap();
        GateStackParams::gs2().validate().unwrap();
    }

    #[test]
    fn id_vg_curves() {
        let p = GateStackParams::gs2();
        let grid: Vec<f64> = (0..=60).map(|i| i as f64 * 0.02).collect();
        let lrs = id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 300.0, &grid).unwrap();
        let hrs = id_vg_curve(&p, MemoryState::hrs(2).unwrap(), 300.0, &grid).unwrap();
        // LRS strictly above HRS everywhere: states do not cross
        for (l, h) in lrs.iter().zip(hrs.iter()) {
            assert!(l.1 > h.1);
        }
        // strictly increasing in vg
        for w in lrs.windows(2) {
            assert!(w[1].1 > w[0].1);
        }

        // singleton grid equals a direct drain_current evaluation
        let single = id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 300.0, &[0.5]).unwrap();
        let direct = drain_current(
            &p,
            &DeviceInstance::ideal(MemoryState::lrs(2).unwrap()),
            &op(0.5, 300.0),
        )
        .unwrap();
        assert_eq!(single[0].1, direct.amps);

        // strong-inversion curves ordered by the mobility factor
        let c233 = id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 233.0, &[1.5]).unwrap();
        let c300 = id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 300.0, &[1.5]).unwrap();
        let c398 = id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 398.0, &[1.5]).unwrap();
        assert!(c233[0].1 > c300[0].1 && c300[0].1 > c398[0].1);

        assert!(matches!(
            id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 300.0, &[]),
            Err(DeviceError::EmptyBiasGrid)
        ));
        assert!(id_vg_curve(&p, MemoryState::lrs(2).unwrap(), 300.0, &[0.2, 0.1]).is_err());
    }

    #[test]
    fn sample_variation_contracts() {
        let mut s = Stream::new(1);
        assert_eq!(sample_variation(0.0, &mut s).unwrap(), 0.0);
        assert!(sample_variation(-0.1, &mut s).is_err());

        let mut s1 = Stream::new(99);
        let mut s2 = Stream::new(99);
        let a: Vec<f64> = (0..50).map(|_| sample_variation(0.15, &mut s1).unwrap()).collect();
        let b: Vec<f64> = (0..50).map(|_| sample_variation(0.15, &mut s2).unwrap()).collect();
        assert_eq!(a, b);

        let mut s3 = Stream::new(7);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| sample_variation(0.15, &mut s3).unwrap()).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((0.14..0.16).contains(&std), "std {std}");
        assert!(samples.iter().all(|&e| e > EPSILON_FLOOR));
    }

    #[test]
    fn conductance_monotone_in_gate_bias() {
        // 1000 random parameter draws
        let mut s = Stream::new(2024);
        for _ in 0..1000 {
            let mut p = GateStackParams::gs2();
            p.vth_lrs_ref = s.next_range(0.05, 0.5);
            p.vth_hrs_ref = p.vth_lrs_ref + s.next_range(0.05, 1.2);
            p.n_ideality = s.next_range(1.0, 2.0);
            p.k_gain = s.next_range(10e-6, 500e-6);
            p.kappa_vt = -s.next_range(0.2e-3, 3e-3);
            let level = MemoryState::new((s.next_u64() % 4) as u8, 4).unwrap();
            let dev = DeviceInstance::ideal(level);
            let temp = s.next_range(TEMP_MIN, TEMP_MAX);
            let vg_a = s.next_range(-0.5, 1.5);
            let vg_b = vg_a + s.next_range(1e-4, 0.5);
            let ga = channel_conductance(&p, &dev, &OperatingPoint::new(vg_a, 0.1, temp).unwrap()).unwrap();
            let gb = channel_conductance(&p, &dev, &OperatingPoint::new(vg_b, 0.1, temp).unwrap()).unwrap();
            assert!(gb > ga, "not monotone: G({vg_b}) = {gb} <= G({vg_a}) = {ga}");
            assert!(ga > 0.0);
        }
    }

    #[test]
    fn conductance_ordered_by_level() {
        for params in [GateStackParams::gs1(), GateStackParams::gs2()] {
            for temp in [233.0, 300.0, 398.0] {
                for vg in [0.3, 0.5, 0.9] {
                    let o = op(vg, temp);
                    let gs: Vec<f64> = (0..4)
                        .map(|l| {
                            let st = MemoryState::new(l, 4).unwrap();
                            channel_conductance(&params, &DeviceInstance::ideal(st), &o).unwrap()
                        })
                        .collect();
                    for w in gs.windows(2) {
                        assert!(w[1] > w[0]);
                    }
                }
            }
        }
    }

    #[test]
    fn subthreshold_slope_matches_ideality() {
        // d(log10 Id)/dVg = 1/(ln10 * n * vt) deep below threshold
        let p = GateStackParams::gs2();
        let hrs = DeviceInstance::ideal(MemoryState::hrs(2).unwrap());
        let vth = state_threshold_voltage(&p, hrs.state, 300.0).unwrap();
        let nvt = p.n_ideality * thermal_voltage(300.0).unwrap();
        let expected_mv_per_dec = std::f64::consts::LN_10 * nvt * 1e3;
        assert!((expected_mv_per_dec - 65.5).abs() < 0.1);

        let vg = vth - 0.25; // V_ov = -0.25 V, below the -0.2 V bound
        let h = 1e-4;
        let i1 = drain_current(&p, &hrs, &op(vg - h, 300.0)).unwrap().amps;
        let i2 = drain_current(&p, &hrs, &op(vg + h, 300.0)).unwrap().amps;
        let slope = (i2.log10() - i1.log10()) / (2.0 * h); // dec/V
        let ss_mv_per_dec = 1e3 / slope;
        assert!(
            (ss_mv_per_dec - expected_mv_per_dec).abs() / expected_mv_per_dec < 0.02,
            "SS = {ss_mv_per_dec} mV/dec"
        );
    }

    #[test]
    fn strong_inversion_matches_linear_limit() {
        let p = GateStackParams::gs2();
        let lrs = DeviceInstance::ideal(MemoryState::lrs(2).unwrap());
        for temp in [233.0, 300.0, 398.0] {
            let vth = state_threshold_voltage(&p, lrs.state, temp).unwrap();
            let nvt = p.n_ideality * thermal_voltage(temp).unwrap();
            let vov = 10.0 * nvt;
            let g = channel_conductance(&p, &lrs, &op(vth + vov, temp)).unwrap();
            let linear = p.k_gain * effective_mobility_factor(&p, temp) * vov;
            assert!((g - linear).abs() / linear < 0.01);
        }
    }

    #[test]
    fn gs2_states_stay_separated() {
        // min over T of G_on/G_off at 0.5 V read exceeds 1e6
        let p = GateStackParams::gs2();
        let lrs = DeviceInstance::ideal(MemoryState::lrs(2).unwrap());
        let hrs = DeviceInstance::ideal(MemoryState::hrs(2).unwrap());
        let mut min_ratio = f64::INFINITY;
        let mut t = 233.0;
        while t <= 398.0 {
            let o = op(0.5, t);
            let ratio = channel_conductance(&p, &lrs, &o).unwrap()
                / channel_conductance(&p, &hrs, &o).unwrap();
            min_ratio = min_ratio.min(ratio);
            t += 5.0;
        }
        assert!(min_ratio > 1e6, "min on/off ratio {min_ratio:.3e}");
    }

    #[test]
    fn gs1_states_overlap_across_temperature() {
        // the hot HRS current band reaches the cold LRS band (within 1e-2)
        let p = GateStackParams::gs1();
        let hrs = DeviceInstance::ideal(MemoryState::hrs(2).unwrap());
        let lrs = DeviceInstance::ideal(MemoryState::lrs(2).unwrap());
        let g_lrs_cold = channel_conductance(&p, &lrs, &op(0.5, 233.0)).unwrap();
        let mut overlap = false;
        let mut t = 233.0;
        while t <= 398.0 {
            let g_hrs = channel_conductance(&p, &hrs, &op(0.5, t)).unwrap();
            if g_hrs > g_lrs_cold * 1e-2 {
                overlap = true;
                break;
            }
            t += 5.0;
        }
        assert!(overlap, "GS-I failure mode not representable");
    }
}
