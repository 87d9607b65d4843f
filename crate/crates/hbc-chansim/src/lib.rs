//! Simulation and analysis toolkit for capacitive human-body-communication
//! (HBC) channels.
//!
//! The library models the body channel as a lumped equivalent circuit solved
//! with complex-valued modified nodal analysis, simulates the wearable Tx/Rx
//! signal chains (square-wave carrier, band-pass filter, logarithmic detector,
//! ADC), runs classical-vs-wireless DAQ frequency-sweep campaigns, and
//! computes the channel-gain, received-power, overestimation, correlation,
//! and energy-per-bit statistics used to compare the two readout setups.
//!
//! Modules:
//! - [`circuit`]: general AC solver for linear R/C/L networks (MNA).
//! - [`channel`]: the capacitive-HBC equivalent-circuit builder and gain.
//! - [`frontend`]: Tx drive and Rx measurement-chain models.
//! - [`campaign`]: frequency-sweep execution, safety gate, CSV persistence.
//! - [`config`]: JSON campaign configuration (fail-closed parsing).
//! - [`analysis`]: gain-curve statistics and campaign comparison.
//! - [`calibrate`]: Nelder-Mead parameter fitting against measured curves.
//! - [`plot`]: deterministic SVG gain charts.

pub mod analysis;
pub mod calibrate;
pub mod campaign;
pub mod channel;
pub mod circuit;
pub mod config;
pub mod frontend;
pub mod plot;

pub use analysis::{ComparisonReport, GainCurve};
pub use campaign::{CampaignResult, GainRecord, SafetyPolicy, SamplePoint, SweepConfig};
pub use channel::{ChannelParams, DaqMode, Scenario};
pub use circuit::{AcSolution, Element, ElementKind, Netlist};
pub use frontend::{RxFrontendModel, TxModel};
