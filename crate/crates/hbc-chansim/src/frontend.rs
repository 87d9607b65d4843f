//! Tx drive and Rx measurement-chain models.
//!
//! The transmitter gates a rectangular carrier (OOK) between 0 V and the
//! supply rail; the AC solver consumes the sinusoidal fundamental of that
//! square wave. The receiver chain is a passive band-pass filter, a
//! logarithmic detector with a 92 dB dynamic range, and an ADC. Conversions
//! between volts, dBm and ADC codes live here.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Transmit-side model: carrier rail and frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxModel {
    /// Carrier high level in volts (the V2 = 3.3 V rail by default).
    pub rail_v: f64,
    /// Carrier frequency; the hardware PLL covers 4 MHz to 64 MHz.
    pub carrier_hz: f64,
}

impl Default for TxModel {
    fn default() -> Self {
        Self {
            rail_v: 3.3,
            carrier_hz: 4e6,
        }
    }
}

impl TxModel {
    pub fn validate(&self) -> Result<(), FrontendError> {
        if !self.rail_v.is_finite() || self.rail_v <= 0.0 {
            return Err(FrontendError::InvalidModel(format!(
                "rail_v must be finite and > 0, got {}",
                self.rail_v
            )));
        }
        if !(4e6..=64e6).contains(&self.carrier_hz) {
            return Err(FrontendError::InvalidModel(format!(
                "carrier_hz must lie in [4 MHz, 64 MHz], got {}",
                self.carrier_hz
            )));
        }
        Ok(())
    }
}

/// Receive-side model: band-pass corners, log-detector transfer, ADC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RxFrontendModel {
    /// High-pass corner (suppresses mains noise).
    pub f_low_hz: f64,
    /// Low-pass corner.
    pub f_high_hz: f64,
    /// Detector slope in volts per dB.
    pub det_slope_v_per_db: f64,
    /// Input power at which the detector output crosses zero.
    pub det_intercept_dbm: f64,
    /// Detector dynamic range; fixed at 92 dB for this detector class.
    pub dynamic_range_db: f64,
    /// ADC resolution in bits.
    pub adc_bits: u32,
    /// ADC reference voltage (the V1 = 2.7 V rail by default).
    pub adc_vref: f64,
    /// Detector input resistance; received power is referenced to it.
    pub r_in: f64,
}

/// Dynamic range of the logarithmic detector in dB.
pub const DETECTOR_DYNAMIC_RANGE_DB: f64 = 92.0;

impl Default for RxFrontendModel {
    fn default() -> Self {
        Self {
            f_low_hz: 160.0,
            f_high_hz: 70e6,
            det_slope_v_per_db: 0.025,
            det_intercept_dbm: -84.0,
            dynamic_range_db: DETECTOR_DYNAMIC_RANGE_DB,
            adc_bits: 12,
            adc_vref: 2.7,
            r_in: 1100.0,
        }
    }
}

impl RxFrontendModel {
    /// Largest ADC code, `2^bits - 1`.
    pub fn adc_max_code(&self) -> u16 {
        ((1u32 << self.adc_bits) - 1) as u16
    }

    pub fn validate(&self) -> Result<(), FrontendError> {
        let invalid = |msg: String| Err(FrontendError::InvalidModel(msg));
        if !(self.f_low_hz > 0.0 && self.f_high_hz.is_finite() && self.f_low_hz < self.f_high_hz) {
            return invalid(format!(
                "band-pass corners must satisfy 0 < f_low < f_high, got {} and {}",
                self.f_low_hz, self.f_high_hz
            ));
        }
        if !self.det_slope_v_per_db.is_finite() || self.det_slope_v_per_db <= 0.0 {
            return invalid(format!(
                "detector slope must be > 0, got {}",
                self.det_slope_v_per_db
            ));
        }
        if !self.det_intercept_dbm.is_finite() {
            return invalid(format!(
                "detector intercept must be finite, got {}",
                self.det_intercept_dbm
            ));
        }
        if self.dynamic_range_db != DETECTOR_DYNAMIC_RANGE_DB {
            return invalid(format!(
                "dynamic_range_db is fixed at {DETECTOR_DYNAMIC_RANGE_DB}, got {}",
                self.dynamic_range_db
            ));
        }
        if !(2..=16).contains(&self.adc_bits) {
            return invalid(format!("adc_bits must lie in [2, 16], got {}", self.adc_bits));
        }
        if !self.adc_vref.is_finite() || self.adc_vref <= 0.0 {
            return invalid(format!("adc_vref must be > 0, got {}", self.adc_vref));
        }
        if !self.r_in.is_finite() || self.r_in <= 0.0 {
            return invalid(format!("r_in must be > 0, got {}", self.r_in));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrontendError {
    NegativeInput { name: &'static str, value: f64 },
    NonPositiveFrequency(f64),
    NonPositiveResistance(f64),
    CodeOutOfRange { code: u16, max: u16 },
    InvalidModel(String),
}

impl fmt::Display for FrontendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrontendError::NegativeInput { name, value } => {
                write!(f, "{name} must be >= 0, got {value}")
            }
            FrontendError::NonPositiveFrequency(v) => {
                write!(f, "frequency must be > 0, got {v}")
            }
            FrontendError::NonPositiveResistance(v) => {
                write!(f, "resistance must be > 0, got {v}")
            }
            FrontendError::CodeOutOfRange { code, max } => {
                write!(f, "ADC code {code} exceeds full scale {max}")
            }
            FrontendError::InvalidModel(msg) => write!(f, "invalid frontend model: {msg}"),
        }
    }
}

impl std::error::Error for FrontendError {}

/// Peak amplitude of the fundamental of a 0-to-`rail_v` 50% square wave,
/// `2·rail_v/π`. This is the sinusoidal-equivalent source the AC solver
/// consumes; harmonics are outside the single-frequency sweep model.
pub fn square_fundamental_peak(rail_v: f64) -> Result<f64, FrontendError> {
    if !rail_v.is_finite() || rail_v < 0.0 {
        return Err(FrontendError::NegativeInput {
            name: "rail_v",
            value: rail_v,
        });
    }
    Ok(2.0 * rail_v / std::f64::consts::PI)
}

/// Gain of the passive input filter at `f`: a first-order high-pass at
/// `f_low_hz` cascaded with a first-order low-pass at `f_high_hz`, in dB.
/// Always negative, approaching 0 dB in the flat midband and -3.0103 dB at
/// each corner.
pub fn bandpass_gain_db(model: &RxFrontendModel, f: f64) -> Result<f64, FrontendError> {
    if !f.is_finite() || f <= 0.0 {
        return Err(FrontendError::NonPositiveFrequency(f));
    }
    let hp_ratio = f / model.f_low_hz;
    let lp_ratio = f / model.f_high_hz;
    let magnitude = hp_ratio / (1.0 + hp_ratio * hp_ratio).sqrt()
        / (1.0 + lp_ratio * lp_ratio).sqrt();
    Ok(20.0 * magnitude.log10())
}

/// Detector output voltage for an input power in dBm. The input is clamped
/// to the detector's dynamic range, so the output lies in
/// `[0, slope * dynamic_range]`; clamping is the contract, not an error.
pub fn detector_voltage(model: &RxFrontendModel, p_in_dbm: f64) -> f64 {
    let lo = model.det_intercept_dbm;
    let hi = model.det_intercept_dbm + model.dynamic_range_db;
    model.det_slope_v_per_db * (p_in_dbm.clamp(lo, hi) - lo)
}

/// Quantizes a voltage to an ADC code: `round(clamp(v, 0, vref)/vref *
/// (2^bits - 1))`, rounding half away from zero.
pub fn adc_quantize(model: &RxFrontendModel, v: f64) -> u16 {
    let full_scale = f64::from(model.adc_max_code());
    let clamped = v.clamp(0.0, model.adc_vref);
    (clamped / model.adc_vref * full_scale).round() as u16
}

/// Inverts the measurement chain: maps an ADC code back to the detector
/// input power in dBm.
pub fn code_to_dbm(model: &RxFrontendModel, code: u16) -> Result<f64, FrontendError> {
    let max = model.adc_max_code();
    if code > max {
        return Err(FrontendError::CodeOutOfRange { code, max });
    }
    let v = f64::from(code) / f64::from(max) * model.adc_vref;
    Ok(v / model.det_slope_v_per_db + model.det_intercept_dbm)
}

/// Power of a sinusoid of peak amplitude `v_amplitude` dissipated in `r_in`,
/// in dBm: `10·log10(v²/(2·r_in) / 1 mW)`. Zero amplitude yields the
/// distinguished `f64::NEG_INFINITY`.
pub fn rx_power_dbm(v_amplitude: f64, r_in: f64) -> Result<f64, FrontendError> {
    if !r_in.is_finite() || r_in <= 0.0 {
        return Err(FrontendError::NonPositiveResistance(r_in));
    }
    if !v_amplitude.is_finite() || v_amplitude < 0.0 {
        return Err(FrontendError::NegativeInput {
            name: "v_amplitude",
            value: v_amplitude,
        });
    }
    let power_w = v_amplitude * v_amplitude / (2.0 * r_in);
    Ok(watts_to_dbm(power_w))
}

/// Converts watts to dBm. Zero maps to `f64::NEG_INFINITY`.
pub fn watts_to_dbm(power_w: f64) -> f64 {
    10.0 * (power_w / 1e-3).log10()
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_fundamental_examples() {
        let v = square_fundamental_peak(3.3).unwrap();
        assert_eq!(v, 2.0 * 3.3 / std::f64::consts::PI);
        assert!((v - 2.10085).abs() < 1e-5);
        assert_eq!(square_fundamental_peak(0.0).unwrap(), 0.0);
        assert!((square_fundamental_peak(std::f64::consts::PI).unwrap() - 2.0).abs() < 1e-15);
        assert!(square_fundamental_peak(-0.1).is_err());
        // linear in the rail
        let doubled = square_fundamental_peak(6.6).unwrap();
        assert_eq!(doubled, 2.0 * v);
    }

    #[test]
    fn bandpass_corner_values() {
        let m = RxFrontendModel::default();
        assert!((bandpass_gain_db(&m, 70e6).unwrap() + 3.0103).abs() < 0.001);
        assert!((bandpass_gain_db(&m, 160.0).unwrap() + 3.0103).abs() < 0.001);
        assert!((bandpass_gain_db(&m, 4e6).unwrap() + 0.0142).abs() < 0.001);
        assert!(bandpass_gain_db(&m, 0.0).is_err());
        assert!(bandpass_gain_db(&m, -5.0).is_err());
    }

    #[test]
    fn bandpass_is_negative_everywhere_and_flat_midband() {
        let m = RxFrontendModel::default();
        let mut f = 1.0;
        while f < 1e9 {
            let g = bandpass_gain_db(&m, f).unwrap();
            assert!(g < 0.0, "f = {f}: {g}");
            f *= 1.7;
        }
        // geometric midband is essentially transparent
        let mid = (m.f_low_hz * m.f_high_hz).sqrt();
        assert!(bandpass_gain_db(&m, mid).unwrap().abs() < 1e-4);
    }

    #[test]
    fn detector_examples_and_clamps() {
        let m = RxFrontendModel::default();
        assert_eq!(detector_voltage(&m, -84.0), 0.0);
        assert!((detector_voltage(&m, -39.3) - 1.1175).abs() < 1e-12);
        assert_eq!(detector_voltage(&m, 20.0), 0.025 * 92.0);
        assert_eq!(detector_voltage(&m, -200.0), 0.0);
    }

    #[test]
    fn detector_is_monotone_with_exact_slope_inside_window() {
        let m = RxFrontendModel::default();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=300 {
            let p = -120.0 + i as f64 * 0.5;
            let v = detector_voltage(&m, p);
            assert!(v >= prev);
            prev = v;
        }
        let inside = detector_voltage(&m, -50.0) - detector_voltage(&m, -51.0);
        assert!((inside - m.det_slope_v_per_db).abs() < 1e-12);
    }

    #[test]
    fn adc_examples() {
        let m = RxFrontendModel::default();
        assert_eq!(adc_quantize(&m, 0.0), 0);
        assert_eq!(adc_quantize(&m, 2.7), 4095);
        assert_eq!(adc_quantize(&m, 1.35), 2048); // round(2047.5) away from zero
        assert_eq!(adc_quantize(&m, -1.0), 0);
        assert_eq!(adc_quantize(&m, 9.9), 4095);
    }

    #[test]
    fn code_to_dbm_examples() {
        let m = RxFrontendModel::default();
        assert_eq!(code_to_dbm(&m, 0).unwrap(), -84.0);
        assert!((code_to_dbm(&m, 2048).unwrap() + 29.99).abs() < 0.02);
        assert_eq!(
            code_to_dbm(&m, 4096),
            Err(FrontendError::CodeOutOfRange { code: 4096, max: 4095 })
        );
    }

    #[test]
    fn chain_roundtrip_stays_within_half_lsb() {
        let m = RxFrontendModel::default();
        let half_lsb_db = m.adc_vref / f64::from(m.adc_max_code()) / m.det_slope_v_per_db / 2.0;
        for i in 1..1000 {
            let p = -84.0 + 92.0 * i as f64 / 1000.0;
            let code = adc_quantize(&m, detector_voltage(&m, p));
            let back = code_to_dbm(&m, code).unwrap();
            assert!(
                (back - p).abs() <= half_lsb_db + 1e-12,
                "p = {p}: back = {back}"
            );
        }
    }

    #[test]
    fn rx_power_examples() {
        assert!((rx_power_dbm(0.1, 1100.0).unwrap() + 23.42).abs() < 0.01);
        let v0 = (2.0f64 * 1100.0 * 1e-3).sqrt();
        assert!(rx_power_dbm(v0, 1100.0).unwrap().abs() < 1e-12);
        let one = rx_power_dbm(0.05, 1100.0).unwrap();
        let two = rx_power_dbm(0.10, 1100.0).unwrap();
        assert!((two - one - 6.0206).abs() < 1e-4);
        assert_eq!(rx_power_dbm(0.0, 1100.0).unwrap(), f64::NEG_INFINITY);
        assert!(rx_power_dbm(0.1, 0.0).is_err());
        assert!(rx_power_dbm(-0.1, 50.0).is_err());
    }

    #[test]
    fn dbm_conversions_invert() {
        for dbm in [-84.0, -35.53, 0.0, 4.33] {
            assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-12);
        }
        assert!((watts_to_dbm(2.71e-3) - 4.33).abs() < 0.005);
    }

    #[test]
    fn model_validation() {
        assert!(RxFrontendModel::default().validate().is_ok());
        assert!(TxModel::default().validate().is_ok());

        let mut m = RxFrontendModel::default();
        m.dynamic_range_db = 90.0;
        assert!(m.validate().is_err());

        let mut m = RxFrontendModel::default();
        m.adc_bits = 18;
        assert!(m.validate().is_err());

        let mut t = TxModel::default();
        t.carrier_hz = 1e6;
        assert!(t.validate().is_err());
    }
}
