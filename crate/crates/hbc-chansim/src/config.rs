//! Campaign configuration files.
//!
//! A config is a UTF-8 JSON document with the optional top-level keys
//! `params`, `tx`, `rx`, `sweep`, `scenarios` and `safety`. Each section
//! overrides individual fields of the corresponding defaults. Unknown keys
//! anywhere are an error (fail-closed). When `scenarios` is absent, the
//! canonical campaign is used: classical and wireless at 10, 30 and 50 cm.
//!
//! ```json
//! {
//!   "params": { "k_int": 5e-13 },
//!   "sweep": { "points": 61, "spacing": "linear" },
//!   "scenarios": [ { "daq": "wireless", "distance_cm": 30.0 } ],
//!   "safety": { "max_tx_dbm": 5.0 }
//! }
//! ```

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::campaign::{GridSpacing, SafetyPolicy, SweepConfig};
use crate::channel::{ChannelParams, DaqMode, Scenario};
use crate::frontend::{RxFrontendModel, TxModel};

/// A fully resolved campaign specification (defaults plus overrides).
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub params: ChannelParams,
    pub tx: TxModel,
    pub rx: RxFrontendModel,
    pub sweep: SweepConfig,
    pub scenarios: Vec<Scenario>,
    pub safety: SafetyPolicy,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        Self {
            params: ChannelParams::default(),
            tx: TxModel::default(),
            rx: RxFrontendModel::default(),
            sweep: SweepConfig::default(),
            scenarios: canonical_scenarios(),
            safety: SafetyPolicy::default(),
        }
    }
}

/// The canonical scenario set: both DAQ modes at 10, 30 and 50 cm.
pub fn canonical_scenarios() -> Vec<Scenario> {
    let mut scenarios = Vec::new();
    for mode in [DaqMode::Classical, DaqMode::Wireless] {
        for distance in [10.0, 30.0, 50.0] {
            scenarios.push(Scenario::new(mode, distance));
        }
    }
    scenarios
}

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    /// JSON syntax error, unknown key, or type mismatch.
    Parse(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "i/o: {e}"),
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<std::io::Error> for ConfigError {
    fn from(e: std::io::Error) -> Self {
        ConfigError::Io(e)
    }
}

/// Loads and resolves a config file against the defaults.
pub fn load_config(path: &Path) -> Result<CampaignSpec, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses a config document; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<CampaignSpec, ConfigError> {
    let file: ConfigFile =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut spec = CampaignSpec::default();

    file.params.apply(&mut spec.params);
    file.tx.apply(&mut spec.tx);
    file.rx.apply(&mut spec.rx);
    file.sweep.apply(&mut spec.sweep);
    if let Some(list) = file.scenarios {
        spec.scenarios = list
            .into_iter()
            .map(|s| Scenario::new(s.daq, s.distance_cm))
            .collect();
    }
    file.safety.apply(&mut spec.safety);
    Ok(spec)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    params: ParamOverrides,
    #[serde(default)]
    tx: TxOverrides,
    #[serde(default)]
    rx: RxOverrides,
    #[serde(default)]
    sweep: SweepOverrides,
    #[serde(default)]
    scenarios: Option<Vec<ScenarioSpec>>,
    #[serde(default)]
    safety: SafetyOverrides,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    daq: DaqMode,
    distance_cm: f64,
}

macro_rules! overrides {
    ($name:ident -> $target:ty { $($field:ident),+ $(,)? }) => {
        #[derive(Debug, Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            $(#[serde(default)] $field: Option<f64>,)+
        }

        impl $name {
            fn apply(&self, target: &mut $target) {
                $(if let Some(v) = self.$field { target.$field = v; })+
            }
        }
    };
}

overrides!(ParamOverrides -> ChannelParams {
    r_out, c_electrode_tx, c_electrode_rx, r_skin_tx, r_skin_rx,
    r_body_base, r_body_per_cm, c_body_gnd, c_gt, c_gr_wireless,
    c_gr_classical, k_int, r_in, c_in,
});

overrides!(TxOverrides -> TxModel { rail_v, carrier_hz });

overrides!(SafetyOverrides -> SafetyPolicy { max_tx_dbm });

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RxOverrides {
    #[serde(default)]
    f_low_hz: Option<f64>,
    #[serde(default)]
    f_high_hz: Option<f64>,
    #[serde(default)]
    det_slope_v_per_db: Option<f64>,
    #[serde(default)]
    det_intercept_dbm: Option<f64>,
    #[serde(default)]
    dynamic_range_db: Option<f64>,
    #[serde(default)]
    adc_bits: Option<u32>,
    #[serde(default)]
    adc_vref: Option<f64>,
    #[serde(default)]
    r_in: Option<f64>,
}

impl RxOverrides {
    fn apply(&self, target: &mut RxFrontendModel) {
        if let Some(v) = self.f_low_hz {
            target.f_low_hz = v;
        }
        if let Some(v) = self.f_high_hz {
            target.f_high_hz = v;
        }
        if let Some(v) = self.det_slope_v_per_db {
            target.det_slope_v_per_db = v;
        }
        if let Some(v) = self.det_intercept_dbm {
            target.det_intercept_dbm = v;
        }
        if let Some(v) = self.dynamic_range_db {
            target.dynamic_range_db = v;
        }
        if let Some(v) = self.adc_bits {
            target.adc_bits = v;
        }
        if let Some(v) = self.adc_vref {
            target.adc_vref = v;
        }
        if let Some(v) = self.r_in {
            target.r_in = v;
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepOverrides {
    #[serde(default)]
    f_start_hz: Option<f64>,
    #[serde(default)]
    f_stop_hz: Option<f64>,
    #[serde(default)]
    points: Option<usize>,
    #[serde(default)]
    spacing: Option<GridSpacing>,
}

impl SweepOverrides {
    fn apply(&self, target: &mut SweepConfig) {
        if let Some(v) = self.f_start_hz {
            target.f_start_hz = v;
        }
        if let Some(v) = self.f_stop_hz {
            target.f_stop_hz = v;
        }
        if let Some(v) = self.points {
            target.points = v;
        }
        if let Some(v) = self.spacing {
            target.spacing = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_canonical_campaign() {
        let spec = parse_config("{}").unwrap();
        assert_eq!(spec, CampaignSpec::default());
        assert_eq!(spec.scenarios.len(), 6);
    }

    #[test]
    fn overrides_apply_field_by_field() {
        let spec = parse_config(
            r#"{
                "params": { "k_int": 5e-13, "r_in": 1200.0 },
                "tx": { "rail_v": 2.7 },
                "rx": { "adc_bits": 10 },
                "sweep": { "points": 13, "spacing": "log" },
                "scenarios": [ { "daq": "wireless", "distance_cm": 25.0 } ],
                "safety": { "max_tx_dbm": 4.0 }
            }"#,
        )
        .unwrap();
        assert_eq!(spec.params.k_int, 5e-13);
        assert_eq!(spec.params.r_in, 1200.0);
        assert_eq!(spec.params.r_out, ChannelParams::default().r_out);
        assert_eq!(spec.tx.rail_v, 2.7);
        assert_eq!(spec.rx.adc_bits, 10);
        assert_eq!(spec.sweep.points, 13);
        assert_eq!(spec.sweep.spacing, GridSpacing::Log);
        assert_eq!(spec.scenarios, vec![Scenario::new(DaqMode::Wireless, 25.0)]);
        assert_eq!(spec.safety.max_tx_dbm, 4.0);
    }

    #[test]
    fn unknown_keys_fail_closed() {
        for doc in [
            r#"{ "paramz": {} }"#,
            r#"{ "params": { "k_int_typo": 1.0 } }"#,
            r#"{ "sweep": { "step_hz": 1e6 } }"#,
            r#"{ "scenarios": [ { "daq": "wireless", "distance": 10 } ] }"#,
        ] {
            let err = parse_config(doc).unwrap_err();
            assert!(matches!(err, ConfigError::Parse(_)), "{doc}");
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_config("{"), Err(ConfigError::Parse(_))));
        assert!(matches!(
            parse_config(r#"{ "params": 3 }"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn empty_scenario_array_is_respected() {
        let spec = parse_config(r#"{ "scenarios": [] }"#).unwrap();
        assert!(spec.scenarios.is_empty());
    }
}
