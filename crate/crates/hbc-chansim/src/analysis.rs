//! Gain-curve statistics: classical-vs-wireless gaps, correlations, peaks,
//! fluctuation, and energy per bit.
//!
//! Averages are taken in the dB domain (arithmetic means of dB values), and
//! the grand mean weights distances equally: it is the mean of the
//! per-distance mean gaps, not a mean over the pooled samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::campaign::GainRecord;
use crate::channel::DaqMode;

/// A channel-gain curve for one scenario: `(freq_hz, gain_db)` points with
/// strictly increasing frequency; at least two points, all values finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub daq_mode: DaqMode,
    pub distance_cm: f64,
    pub points: Vec<(f64, f64)>,
}

impl GainCurve {
    pub fn new(
        daq_mode: DaqMode,
        distance_cm: f64,
        points: Vec<(f64, f64)>,
    ) -> Result<Self, AnalysisError> {
        let curve = Self {
            daq_mode,
            distance_cm,
            points,
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.points.len() < 2 {
            return Err(AnalysisError::InvalidCurve(format!(
                "curve {} {} cm needs at least 2 points, got {}",
                self.daq_mode,
                self.distance_cm,
                self.points.len()
            )));
        }
        for (f, g) in &self.points {
            if !f.is_finite() || !g.is_finite() {
                return Err(AnalysisError::InvalidCurve(format!(
                    "curve {} {} cm contains a non-finite point ({f}, {g})",
                    self.daq_mode, self.distance_cm
                )));
            }
        }
        if let Some(w) = self.points.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(AnalysisError::InvalidCurve(format!(
                "curve {} {} cm frequencies are not strictly increasing near {} Hz",
                self.daq_mode, self.distance_cm, w[0].0
            )));
        }
        Ok(())
    }

    pub fn gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&(_, g)| g)
    }
}

/// Summary statistics of one curve within a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveStats {
    pub peak_freq_hz: f64,
    pub peak_gain_db: f64,
    pub fluctuation_db: f64,
}

/// Classical-vs-wireless comparison at one distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceComparison {
    pub distance_cm: f64,
    /// Mean over the grid of classical minus wireless gain, in dB.
    pub mean_gap_db: f64,
    /// Correlation between the classical and wireless curve; absent when a
    /// curve is constant.
    pub classical_wireless_r: Option<f64>,
    pub classical: CurveStats,
    pub wireless: CurveStats,
}

/// Pearson correlation between the curves of two distances in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub daq_mode: DaqMode,
    pub distance_a_cm: f64,
    pub distance_b_cm: f64,
    pub pearson_r: f64,
}

/// Assumptions behind the energy-per-bit figure in a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAssumptions {
    pub tx_power_w: f64,
    pub data_rate_bps: f64,
}

impl Default for EnergyAssumptions {
    fn default() -> Self {
        // measured Tx power at the top of the band, and a plausible OOK rate
        Self {
            tx_power_w: 2.71e-3,
            data_rate_bps: 1e6,
        }
    }
}

/// Full comparison of a classical against a wireless campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Per-distance statistics, ascending distance.
    pub per_distance: Vec<DistanceComparison>,
    /// Mean of the per-distance mean gaps (distances weighted equally).
    pub grand_mean_gap_db: f64,
    /// Pairwise correlations between distances, per mode.
    pub correlations: Vec<CorrelationEntry>,
    pub energy: EnergyAssumptions,
    pub energy_per_bit_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisError {
    /// Frequency grids disagree at `index`.
    GridMismatch { index: usize, freq_a: f64, freq_b: f64 },
    GridLengthMismatch { len_a: usize, len_b: usize },
    DistanceMismatch { a: f64, b: f64 },
    /// A distance present on one side is missing from the other.
    MissingDistance { daq_mode: DaqMode, distance_cm: f64 },
    DuplicateDistance { distance_cm: f64 },
    ZeroVariance,
    EmptyInput,
    NonPositiveInput { name: &'static str, value: f64 },
    InvalidCurve(String),
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::GridMismatch { index, freq_a, freq_b } => write!(
                f,
                "frequency grids differ at index {index}: {freq_a} Hz vs {freq_b} Hz"
            ),
            AnalysisError::GridLengthMismatch { len_a, len_b } => {
                write!(f, "frequency grids have different lengths: {len_a} vs {len_b}")
            }
            AnalysisError::DistanceMismatch { a, b } => {
                write!(f, "curves are for different distances: {a} cm vs {b} cm")
            }
            AnalysisError::MissingDistance { daq_mode, distance_cm } => {
                write!(f, "no {daq_mode} curve for {distance_cm} cm")
            }
            AnalysisError::DuplicateDistance { distance_cm } => write!(
                f,
                "more than one curve for {distance_cm} cm on the same side"
            ),
            AnalysisError::ZeroVariance => {
                write!(f, "correlation is undefined for a constant curve")
            }
            AnalysisError::EmptyInput => write!(f, "empty input"),
            AnalysisError::NonPositiveInput { name, value } => {
                write!(f, "{name} must be > 0, got {value}")
            }
            AnalysisError::InvalidCurve(msg) => write!(f, "invalid curve: {msg}"),
        }
    }
}

impl std::error::Error for AnalysisError {}

fn check_same_grid(a: &GainCurve, b: &GainCurve) -> Result<(), AnalysisError> {
    if a.points.len() != b.points.len() {
        return Err(AnalysisError::GridLengthMismatch {
            len_a: a.points.len(),
            len_b: b.points.len(),
        });
    }
    for (index, (pa, pb)) in a.points.iter().zip(&b.points).enumerate() {
        if pa.0 != pb.0 {
            return Err(AnalysisError::GridMismatch {
                index,
                freq_a: pa.0,
                freq_b: pb.0,
            });
        }
    }
    Ok(())
}

/// Mean over the shared grid of `classical - wireless` gain, in dB.
/// Antisymmetric in its arguments.
pub fn mean_gap_db(classical: &GainCurve, wireless: &GainCurve) -> Result<f64, AnalysisError> {
    if classical.distance_cm != wireless.distance_cm {
        return Err(AnalysisError::DistanceMismatch {
            a: classical.distance_cm,
            b: wireless.distance_cm,
        });
    }
    check_same_grid(classical, wireless)?;
    let sum: f64 = classical
        .gains()
        .zip(wireless.gains())
        .map(|(c, w)| c - w)
        .sum();
    Ok(sum / classical.points.len() as f64)
}

/// Arithmetic mean of per-distance gaps.
pub fn grand_mean_gap(gaps: &[f64]) -> Result<f64, AnalysisError> {
    if gaps.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// Pearson product-moment correlation of the two curves' gain values over a
/// shared grid. Symmetric, and invariant under positive affine transforms of
/// either input.
pub fn pearson(a: &GainCurve, b: &GainCurve) -> Result<f64, AnalysisError> {
    check_same_grid(a, b)?;
    let n = a.points.len() as f64;
    let mean_a = a.gains().sum::<f64>() / n;
    let mean_b = b.gains().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (ga, gb) in a.gains().zip(b.gains()) {
        let da = ga - mean_a;
        let db = gb - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok(cov / (var_a * var_b).sqrt())
}

/// The maximum-gain point; ties broken by the lowest frequency.
pub fn peak(curve: &GainCurve) -> (f64, f64) {
    let mut best = curve.points[0];
    for &p in &curve.points[1..] {
        if p.1 > best.1 {
            best = p;
        }
    }
    best
}

/// Spread of the curve: maximum minus minimum gain, in dB.
pub fn fluctuation_db(curve: &GainCurve) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for g in curve.gains() {
        min = min.min(g);
        max = max.max(g);
    }
    max - min
}

/// Transmit energy per bit in joules: power times bit duration.
/// Homogeneous in the power.
pub fn energy_per_bit(tx_power_w: f64, data_rate_bps: f64) -> Result<f64, AnalysisError> {
    if !tx_power_w.is_finite() || tx_power_w <= 0.0 {
        return Err(AnalysisError::NonPositiveInput {
            name: "tx_power_w",
            value: tx_power_w,
        });
    }
    if !data_rate_bps.is_finite() || data_rate_bps <= 0.0 {
        return Err(AnalysisError::NonPositiveInput {
            name: "data_rate_bps",
            value: data_rate_bps,
        });
    }
    Ok(tx_power_w * (1.0 / data_rate_bps))
}

/// Groups records into curves, one per distance, preserving per-distance
/// record order. All records on one side must share the distance set and a
/// single mode per distance.
pub fn curves_from_records(records: &[GainRecord]) -> Result<Vec<GainCurve>, AnalysisError> {
    let mut curves: Vec<GainCurve> = Vec::new();
    for r in records {
        match curves.iter_mut().find(|c| c.distance_cm == r.distance_cm) {
            Some(curve) => {
                if curve.daq_mode != r.daq_mode {
                    return Err(AnalysisError::DuplicateDistance {
                        distance_cm: r.distance_cm,
                    });
                }
                curve.points.push((r.freq_hz, r.gain_db));
            }
            None => curves.push(GainCurve {
                daq_mode: r.daq_mode,
                distance_cm: r.distance_cm,
                points: vec![(r.freq_hz, r.gain_db)],
            }),
        }
    }
    for curve in &curves {
        curve.validate()?;
    }
    curves.sort_by(|a, b| a.distance_cm.total_cmp(&b.distance_cm));
    Ok(curves)
}

/// Compares a classical campaign against a wireless one with the default
/// energy assumptions.
pub fn compare_campaigns(
    classical: &[GainRecord],
    wireless: &[GainRecord],
) -> Result<ComparisonReport, AnalysisError> {
    compare_campaigns_with(classical, wireless, EnergyAssumptions::default())
}

/// Compares a classical campaign against a wireless one: per-distance mean
/// gaps, grand mean, per-mode pairwise correlations, per-curve peaks and
/// fluctuations. Both sides must cover the same distances on the same grids.
pub fn compare_campaigns_with(
    classical: &[GainRecord],
    wireless: &[GainRecord],
    energy: EnergyAssumptions,
) -> Result<ComparisonReport, AnalysisError> {
    if classical.is_empty() || wireless.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let classical_curves = curves_from_records(classical)?;
    let wireless_curves = curves_from_records(wireless)?;

    let mut per_distance = Vec::new();
    let mut gaps = Vec::new();
    for c in &classical_curves {
        let w = wireless_curves
            .iter()
            .find(|w| w.distance_cm == c.distance_cm)
            .ok_or(AnalysisError::MissingDistance {
                daq_mode: DaqMode::Wireless,
                distance_cm: c.distance_cm,
            })?;
        let gap = mean_gap_db(c, w)?;
        gaps.push(gap);
        let classical_wireless_r = match pearson(c, w) {
            Ok(r) => Some(r),
            Err(AnalysisError::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        let (cpf, cpg) = peak(c);
        let (wpf, wpg) = peak(w);
        per_distance.push(DistanceComparison {
            distance_cm: c.distance_cm,
            mean_gap_db: gap,
            classical_wireless_r,
            classical: CurveStats {
                peak_freq_hz: cpf,
                peak_gain_db: cpg,
                fluctuation_db: fluctuation_db(c),
            },
            wireless: CurveStats {
                peak_freq_hz: wpf,
                peak_gain_db: wpg,
                fluctuation_db: fluctuation_db(w),
            },
        });
    }
    for w in &wireless_curves {
        if !classical_curves.iter().any(|c| c.distance_cm == w.distance_cm) {
            return Err(AnalysisError::MissingDistance {
                daq_mode: DaqMode::Classical,
                distance_cm: w.distance_cm,
            });
        }
    }

    // pairs with a constant curve have no defined correlation and are omitted
    let mut correlations = Vec::new();
    for curves in [&classical_curves, &wireless_curves] {
        for i in 0..curves.len() {
            for j in i + 1..curves.len() {
                match pearson(&curves[i], &curves[j]) {
                    Ok(r) => correlations.push(CorrelationEntry {
                        daq_mode: curves[i].daq_mode,
                        distance_a_cm: curves[i].distance_cm,
                        distance_b_cm: curves[j].distance_cm,
                        pearson_r: r,
                    }),
                    Err(AnalysisError::ZeroVariance) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }

    Ok(ComparisonReport {
        grand_mean_gap_db: grand_mean_gap(&gaps)?,
        per_distance,
        correlations,
        energy,
        energy_per_bit_j: energy_per_bit(energy.tx_power_w, energy.data_rate_bps)?,
    })
}
