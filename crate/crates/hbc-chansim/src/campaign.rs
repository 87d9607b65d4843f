//! Frequency-sweep campaign execution and CSV persistence.
//!
//! [`run_campaign`] reproduces the measurement procedure digitally: for each
//! scenario (DAQ mode x distance) it sweeps the frequency grid through the
//! channel and receiver chain, producing one [`SamplePoint`] per grid
//! frequency. A transmit-power safety gate is checked before any simulation
//! work; a violating configuration produces zero output rows.
//!
//! The signal chain per sample: equivalent circuit -> band-pass filter ->
//! logarithmic detector -> ADC. The recorded `rx_power_dbm` is the power at
//! the detector input (after the band-pass), referenced to the detector
//! input resistance, so each row satisfies
//! `adc_code == adc_quantize(detector_voltage(rx_power_dbm))`.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    build_channel, ChannelError, ChannelParams, DaqMode, Scenario, RX_GROUND_NODE, RX_SIGNAL_NODE,
};
use crate::circuit::solve_ac;
use crate::frontend::{
    adc_quantize, bandpass_gain_db, detector_voltage, rx_power_dbm, square_fundamental_peak,
    FrontendError, RxFrontendModel, TxModel,
};

/// Spacing of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpacing {
    Linear,
    Log,
}

/// Frequency-sweep definition: `points` frequencies from `f_start_hz` to
/// `f_stop_hz` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
    pub spacing: GridSpacing,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            f_start_hz: 4e6,
            f_stop_hz: 64e6,
            points: 61,
            spacing: GridSpacing::Linear,
        }
    }
}

/// Transmit-power cap enforced before running a campaign (safety standards
/// limit body exposure; the default cap is 5 dBm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyPolicy {
    pub max_tx_dbm: f64,
}

impl Default for SafetyPolicy {
    fn default() -> Self {
        Self { max_tx_dbm: 5.0 }
    }
}

/// One simulated measurement: a scenario evaluated at one grid frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub scenario: String,
    pub daq_mode: DaqMode,
    pub distance_cm: f64,
    pub freq_hz: f64,
    pub gain_db: f64,
    pub rx_power_dbm: f64,
    pub detector_v: f64,
    pub adc_code: u16,
}

/// A gain record as read from either results or measured-data CSV; the
/// common currency of the analysis and calibration modules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub daq_mode: DaqMode,
    pub distance_cm: f64,
    pub freq_hz: f64,
    pub gain_db: f64,
}

impl From<&SamplePoint> for GainRecord {
    fn from(s: &SamplePoint) -> Self {
        Self {
            daq_mode: s.daq_mode,
            distance_cm: s.distance_cm,
            freq_hz: s.freq_hz,
            gain_db: s.gain_db,
        }
    }
}

/// Fully resolved configuration echoed into every campaign result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub params: ChannelParams,
    pub tx: TxModel,
    pub rx: RxFrontendModel,
    pub sweep: SweepConfig,
    pub scenarios: Vec<Scenario>,
    pub safety: SafetyPolicy,
    /// Equivalent transmit power checked against the safety cap.
    pub tx_equiv_power_dbm: f64,
    /// Reference convention for `tx_equiv_power_dbm`.
    pub power_reference: String,
    /// Reference convention for the per-sample `rx_power_dbm`.
    pub rx_power_reference: String,
    /// Seed of the optional detector dither; absent when disabled.
    pub dither_seed: Option<u64>,
}

/// Campaign output: the resolved configuration plus samples ordered by
/// (scenario declaration order, ascending frequency).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: ResolvedConfig,
    pub samples: Vec<SamplePoint>,
}

/// Extra run controls beyond the campaign inputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// When set, adds a deterministic uniform dither of up to half an LSB to
    /// each detector voltage before quantization (robustness testing). Note
    /// that dithered rows no longer recompute `adc_code` exactly from
    /// `rx_power_dbm`.
    pub dither_seed: Option<u64>,
}

#[derive(Debug)]
pub enum CampaignError {
    SafetyViolation { tx_power_dbm: f64, limit_dbm: f64 },
    InvalidConfig(String),
    Channel { scenario: String, freq_hz: f64, source: ChannelError },
    Frontend(FrontendError),
    Io(std::io::Error),
    Format { line: usize, message: String },
}

impl fmt::Display for CampaignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CampaignError::SafetyViolation { tx_power_dbm, limit_dbm } => write!(
                f,
                "safety violation: transmit power {tx_power_dbm} dBm exceeds the {limit_dbm} dBm limit"
            ),
            CampaignError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            CampaignError::Channel { scenario, freq_hz, source } => {
                write!(f, "scenario {scenario} at {freq_hz} Hz: {source}")
            }
            CampaignError::Frontend(e) => write!(f, "frontend: {e}"),
            CampaignError::Io(e) => write!(f, "i/o: {e}"),
            CampaignError::Format { line, message } => {
                write!(f, "malformed CSV at line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for CampaignError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CampaignError::Channel { source, .. } => Some(source),
            CampaignError::Frontend(e) => Some(e),
            CampaignError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<FrontendError> for CampaignError {
    fn from(e: FrontendError) -> Self {
        CampaignError::Frontend(e)
    }
}

impl From<std::io::Error> for CampaignError {
    fn from(e: std::io::Error) -> Self {
        CampaignError::Io(e)
    }
}

/// Accepts iff `tx_power_dbm` is finite and does not exceed the cap; the
/// boundary itself is allowed.
pub fn check_safety(tx_power_dbm: f64, policy: &SafetyPolicy) -> Result<(), CampaignError> {
    if tx_power_dbm.is_finite() && tx_power_dbm <= policy.max_tx_dbm {
        Ok(())
    } else {
        Err(CampaignError::SafetyViolation {
            tx_power_dbm,
            limit_dbm: policy.max_tx_dbm,
        })
    }
}

/// The strictly increasing sweep grid: `points` frequencies from
/// `f_start_hz` to `f_stop_hz` inclusive, uniform in frequency (`Linear`) or
/// in log10 (`Log`). Both endpoints are hit exactly.
pub fn frequency_grid(cfg: &SweepConfig) -> Result<Vec<f64>, CampaignError> {
    if !(cfg.f_start_hz.is_finite() && cfg.f_stop_hz.is_finite()) || cfg.f_start_hz <= 0.0 {
        return Err(CampaignError::InvalidConfig(format!(
            "sweep bounds must be finite with 0 < f_start, got {} and {}",
            cfg.f_start_hz, cfg.f_stop_hz
        )));
    }
    if cfg.points < 2 {
        return Err(CampaignError::InvalidConfig(format!(
            "sweep needs at least 2 points, got {}",
            cfg.points
        )));
    }
    // points >= 2 makes a strictly increasing grid impossible for equal bounds
    if cfg.f_start_hz >= cfg.f_stop_hz {
        return Err(CampaignError::InvalidConfig(format!(
            "sweep needs f_start < f_stop, got {} and {}",
            cfg.f_start_hz, cfg.f_stop_hz
        )));
    }

    let n = cfg.points;
    let mut grid = Vec::with_capacity(n);
    match cfg.spacing {
        GridSpacing::Linear => {
            let step = (cfg.f_stop_hz - cfg.f_start_hz) / (n - 1) as f64;
            for i in 0..n {
                grid.push(cfg.f_start_hz + i as f64 * step);
            }
        }
        GridSpacing::Log => {
            let lo = cfg.f_start_hz.log10();
            let hi = cfg.f_stop_hz.log10();
            let step = (hi - lo) / (n - 1) as f64;
            for i in 0..n {
                grid.push(10f64.powf(lo + i as f64 * step));
            }
        }
    }
    grid[0] = cfg.f_start_hz;
    grid[n - 1] = cfg.f_stop_hz;

    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CampaignError::InvalidConfig(
            "sweep grid is not strictly increasing".to_string(),
        ));
    }
    Ok(grid)
}

/// Runs the campaign with default options (no dither).
pub fn run_campaign(
    scenarios: &[Scenario],
    params: &ChannelParams,
    tx: &TxModel,
    rx: &RxFrontendModel,
    sweep: &SweepConfig,
    policy: &SafetyPolicy,
) -> Result<CampaignResult, CampaignError> {
    run_campaign_with(scenarios, params, tx, rx, sweep, policy, &RunOptions::default())
}

/// Runs the campaign: safety gate first, then one sample per scenario x grid
/// frequency. Samples may be evaluated concurrently; the output order is a
/// pure function of the configuration.
pub fn run_campaign_with(
    scenarios: &[Scenario],
    params: &ChannelParams,
    tx: &TxModel,
    rx: &RxFrontendModel,
    sweep: &SweepConfig,
    policy: &SafetyPolicy,
    options: &RunOptions,
) -> Result<CampaignResult, CampaignError> {
    params
        .validate()
        .map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
    tx.validate()?;
    rx.validate()?;
    for s in scenarios {
        s.validate()
            .map_err(|e| CampaignError::InvalidConfig(e.to_string()))?;
    }

    let v_src = square_fundamental_peak(tx.rail_v)?;
    // Equivalent Tx power: the carrier fundamental driven into the detector
    // input resistance. Checked against the cap before any solving.
    let tx_equiv_power_dbm = rx_power_dbm(v_src, rx.r_in)?;
    check_safety(tx_equiv_power_dbm, policy)?;

    let grid = frequency_grid(sweep)?;
    let config = ResolvedConfig {
        params: *params,
        tx: *tx,
        rx: *rx,
        sweep: *sweep,
        scenarios: scenarios.to_vec(),
        safety: *policy,
        tx_equiv_power_dbm,
        power_reference: format!(
            "carrier fundamental ({v_src} V peak) into the detector input resistance ({} ohm)",
            rx.r_in
        ),
        rx_power_reference: format!(
            "detector input resistance ({} ohm), after the input band-pass",
            rx.r_in
        ),
        dither_seed: options.dither_seed,
    };

    let jobs: Vec<(usize, &Scenario, f64)> = scenarios
        .iter()
        .flat_map(|s| grid.iter().map(move |f| (s, *f)))
        .enumerate()
        .map(|(i, (s, f))| (i, s, f))
        .collect();

    let samples = jobs
        .par_iter()
        .map(|&(index, scenario, freq_hz)| {
            sample_one(index, scenario, params, rx, v_src, freq_hz, options)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(CampaignResult { config, samples })
}

fn sample_one(
    index: usize,
    scenario: &Scenario,
    params: &ChannelParams,
    rx: &RxFrontendModel,
    v_src: f64,
    freq_hz: f64,
    options: &RunOptions,
) -> Result<SamplePoint, CampaignError> {
    let annotate = |source: ChannelError| CampaignError::Channel {
        scenario: scenario.id(),
        freq_hz,
        source,
    };
    let net = build_channel(scenario, params, v_src).map_err(annotate)?;
    let solution = solve_ac(&net, freq_hz).map_err(|e| annotate(e.into()))?;
    let v_rx = solution
        .differential(RX_SIGNAL_NODE, RX_GROUND_NODE)
        .expect("canonical nodes exist")
        .norm();
    let gain_db = 20.0 * (v_rx / v_src).log10();

    let bp_db = bandpass_gain_db(rx, freq_hz)?;
    let v_detector_in = v_rx * 10f64.powf(bp_db / 20.0);
    let power_dbm = rx_power_dbm(v_detector_in, rx.r_in)?;
    let mut detector_v = detector_voltage(rx, power_dbm);
    if let Some(seed) = options.dither_seed {
        let lsb = rx.adc_vref / f64::from(rx.adc_max_code());
        // per-sample stream keyed by index, so concurrency cannot reorder it
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        detector_v += rng.random_range(-0.5..0.5) * lsb;
    }
    let adc_code = adc_quantize(rx, detector_v);

    Ok(SamplePoint {
        scenario: scenario.id(),
        daq_mode: scenario.daq_mode,
        distance_cm: scenario.distance_cm,
        freq_hz,
        gain_db,
        rx_power_dbm: power_dbm,
        detector_v,
        adc_code,
    })
}

/// Header of the campaign results CSV.
pub const RESULT_CSV_HEADER: &str =
    "scenario,daq_mode,distance_cm,freq_hz,gain_db,rx_power_dbm,detector_v,adc_code";

/// Header of the measured-data CSV consumed by analysis and calibration.
pub const MEASURED_CSV_HEADER: &str = "daq_mode,distance_cm,freq_hz,gain_db";

/// Serializes the campaign samples to the results CSV format: exact header,
/// comma separators, `.` decimal point, LF line endings, UTF-8. Numeric
/// fields use the shortest decimal form that round-trips the value exactly.
pub fn write_csv(result: &CampaignResult, path: &Path) -> Result<(), CampaignError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "{}", csv_string(result))?;
    out.flush()?;
    Ok(())
}

/// The results CSV as an in-memory string; see [`write_csv`].
pub fn csv_string(result: &CampaignResult) -> String {
    let mut s = String::with_capacity(64 * (result.samples.len() + 1));
    s.push_str(RESULT_CSV_HEADER);
    s.push('\n');
    for p in &result.samples {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            p.scenario,
            p.daq_mode,
            p.distance_cm,
            p.freq_hz,
            p.gain_db,
            p.rx_power_dbm,
            p.detector_v,
            p.adc_code
        ));
    }
    s
}

/// Reads a results CSV back into sample records. A header-only file yields
/// an empty list; any malformed row is reported with its 1-based line
/// number.
pub fn read_csv(path: &Path) -> Result<Vec<SamplePoint>, CampaignError> {
    let text = std::fs::read_to_string(path)?;
    parse_result_csv(&text)
}

fn parse_result_csv(text: &str) -> Result<Vec<SamplePoint>, CampaignError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == RESULT_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(CampaignError::Format {
                line: 1,
                message: format!("expected header \"{RESULT_CSV_HEADER}\", got \"{header}\""),
            })
        }
        None => {
            return Err(CampaignError::Format {
                line: 1,
                message: "empty file".to_string(),
            })
        }
    }

    let mut samples = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CampaignError::Format {
                line: line_no,
                message: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        samples.push(SamplePoint {
            scenario: fields[0].to_string(),
            daq_mode: parse_field(fields[1], "daq_mode", line_no)?,
            distance_cm: parse_field(fields[2], "distance_cm", line_no)?,
            freq_hz: parse_field(fields[3], "freq_hz", line_no)?,
            gain_db: parse_field(fields[4], "gain_db", line_no)?,
            rx_power_dbm: parse_field(fields[5], "rx_power_dbm", line_no)?,
            detector_v: parse_field(fields[6], "detector_v", line_no)?,
            adc_code: parse_field(fields[7], "adc_code", line_no)?,
        });
    }
    Ok(samples)
}

/// Reads the 4-column measured-data CSV (`daq_mode,distance_cm,freq_hz,gain_db`).
pub fn read_measured_csv(path: &Path) -> Result<Vec<GainRecord>, CampaignError> {
    let text = std::fs::read_to_string(path)?;
    parse_measured_csv(&text)
}

fn parse_measured_csv(text: &str) -> Result<Vec<GainRecord>, CampaignError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == MEASURED_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(CampaignError::Format {
                line: 1,
                message: format!("expected header \"{MEASURED_CSV_HEADER}\", got \"{header}\""),
            })
        }
        None => {
            return Err(CampaignError::Format {
                line: 1,
                message: "empty file".to_string(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(CampaignError::Format {
                line: line_no,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        records.push(GainRecord {
            daq_mode: parse_field(fields[0], "daq_mode", line_no)?,
            distance_cm: parse_field(fields[1], "distance_cm", line_no)?,
            freq_hz: parse_field(fields[2], "freq_hz", line_no)?,
            gain_db: parse_field(fields[3], "gain_db", line_no)?,
        });
    }
    Ok(records)
}

/// Reads gain records from either CSV flavor, sniffing the header line.
pub fn read_gain_records(path: &Path) -> Result<Vec<GainRecord>, CampaignError> {
    let text = std::fs::read_to_string(path)?;
    let header = text.lines().next().map(|h| h.trim_end_matches('\r'));
    match header {
        Some(RESULT_CSV_HEADER) => {
            Ok(parse_result_csv(&text)?.iter().map(GainRecord::from).collect())
        }
        Some(MEASURED_CSV_HEADER) => parse_measured_csv(&text),
        Some(other) => Err(CampaignError::Format {
            line: 1,
            message: format!(
                "expected header \"{RESULT_CSV_HEADER}\" or \"{MEASURED_CSV_HEADER}\", got \"{other}\""
            ),
        }),
        None => Err(CampaignError::Format {
            line: 1,
            message: "empty file".to_string(),
        }),
    }
}

fn parse_field<T: std::str::FromStr>(
    raw: &str,
    name: &str,
    line: usize,
) -> Result<T, CampaignError>
where
    T::Err: fmt::Display,
{
    raw.parse().map_err(|e| CampaignError::Format {
        line,
        message: format!("bad {name} value \"{raw}\": {e}"),
    })
}
