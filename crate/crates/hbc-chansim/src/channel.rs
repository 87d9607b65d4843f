//! Equivalent-circuit model of the capacitive HBC link.
//!
//! [`build_channel`] assembles the lumped network for a given scenario (DAQ
//! mode and Tx-Rx distance) from physical [`ChannelParams`]. The topology
//! captures the forward path through body tissue, the capacitive return path
//! through the environment and earth ground, the direct inter-device coupling
//! between the two floating grounds (`C_INT = k_int / d`), and the classical
//! DAQ readout branch, which is modeled as an enlarged Rx-ground-to-earth
//! capacitance: wiring the receiver to grid-powered equipment strengthens the
//! return path and overestimates the channel.
//!
//! Nodes: `E` (earth reference), `GT` (Tx floating ground), `TXo` (driver
//! output), `TE`/`TEi` (Tx electrode, outer/inner), `BT`/`BR` (body at Tx/Rx),
//! `REi` (Rx electrode inner), `SR` (Rx signal input), `GR` (Rx floating
//! ground). The channel probe pair is (`SR`, `GR`).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::{self, CircuitError, Element, Netlist, REFERENCE_NODE};

/// Rx signal node of the canonical topology (probe plus).
pub const RX_SIGNAL_NODE: &str = "SR";
/// Rx floating-ground node of the canonical topology (probe minus).
pub const RX_GROUND_NODE: &str = "GR";

/// Readout configuration of the measurement campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DaqMode {
    /// Receiver wired to grid-powered equipment (USB + plugged-in computer).
    Classical,
    /// Battery-powered receiver forwarding data over the air.
    Wireless,
}

impl fmt::Display for DaqMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DaqMode::Classical => write!(f, "classical"),
            DaqMode::Wireless => write!(f, "wireless"),
        }
    }
}

impl std::str::FromStr for DaqMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(DaqMode::Classical),
            "wireless" => Ok(DaqMode::Wireless),
            other => Err(format!("unknown DAQ mode \"{other}\"")),
        }
    }
}

/// One measurement placement: DAQ mode plus Tx-Rx distance.
///
/// Canonical distances are 10, 30 and 50 cm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub daq_mode: DaqMode,
    pub distance_cm: f64,
}

impl Scenario {
    pub fn new(daq_mode: DaqMode, distance_cm: f64) -> Self {
        Self {
            daq_mode,
            distance_cm,
        }
    }

    /// Stable identifier used in campaign output, e.g. `wireless_30cm`.
    pub fn id(&self) -> String {
        format!("{}_{}cm", self.daq_mode, self.distance_cm)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.distance_cm.is_finite() || self.distance_cm <= 0.0 {
            return Err(ChannelError::InvalidParams(format!(
                "distance_cm must be finite and > 0, got {}",
                self.distance_cm
            )));
        }
        Ok(())
    }
}

/// Physical parameters of the equivalent circuit. All values are strictly
/// positive; resistances in ohms, capacitances in farads, `k_int` in
/// farad-centimeters.
///
/// The defaults are plausible wearable-scale values chosen so that the
/// simulated campaign reproduces the qualitative classical-vs-wireless
/// behavior (overestimation growing with distance, short-distance advantage
/// from inter-device coupling). They are calibration targets, not claims;
/// see the `calibrate` module for fitting them to measured curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Tx driver output resistance.
    pub r_out: f64,
    /// Tx electrode-skin coupling capacitance.
    pub c_electrode_tx: f64,
    /// Rx electrode-skin coupling capacitance.
    pub c_electrode_rx: f64,
    /// Tx electrode-skin series resistance.
    pub r_skin_tx: f64,
    /// Rx electrode-skin series resistance.
    pub r_skin_rx: f64,
    /// Distance-independent part of the forward-path body resistance.
    pub r_body_base: f64,
    /// Distance-proportional part: `R_body(d) = r_body_base + r_body_per_cm * d`.
    pub r_body_per_cm: f64,
    /// Body-to-earth coupling, applied at both body nodes.
    pub c_body_gnd: f64,
    /// Tx floating-ground-to-earth capacitance.
    pub c_gt: f64,
    /// Rx floating-ground-to-earth capacitance, wireless readout.
    pub c_gr_wireless: f64,
    /// Rx floating-ground-to-earth capacitance, classical (wired) readout.
    pub c_gr_classical: f64,
    /// Inter-device coupling constant: `C_INT(d) = k_int / d` (farad·cm).
    pub k_int: f64,
    /// Rx input resistance (log-detector input).
    pub r_in: f64,
    /// Rx input capacitance, parallel to `r_in`.
    pub c_in: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            r_out: 1.0,
            c_electrode_tx: 100e-9,
            c_electrode_rx: 100e-9,
            r_skin_tx: 500.0,
            r_skin_rx: 500.0,
            r_body_base: 50.0,
            r_body_per_cm: 2.0,
            c_body_gnd: 15e-12,
            c_gt: 6e-12,
            c_gr_wireless: 0.3e-12,
            c_gr_classical: 1e-9,
            k_int: 0.5e-12,
            r_in: 1100.0,
            c_in: 1.4e-12,
        }
    }
}

impl ChannelParams {
    /// Field names accepted by [`ChannelParams::get`] / [`ChannelParams::set`]
    /// and by calibration free-parameter lists.
    pub const FIELD_NAMES: [&'static str; 14] = [
        "r_out",
        "c_electrode_tx",
        "c_electrode_rx",
        "r_skin_tx",
        "r_skin_rx",
        "r_body_base",
        "r_body_per_cm",
        "c_body_gnd",
        "c_gt",
        "c_gr_wireless",
        "c_gr_classical",
        "k_int",
        "r_in",
        "c_in",
    ];

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "r_out" => self.r_out,
            "c_electrode_tx" => self.c_electrode_tx,
            "c_electrode_rx" => self.c_electrode_rx,
            "r_skin_tx" => self.r_skin_tx,
            "r_skin_rx" => self.r_skin_rx,
            "r_body_base" => self.r_body_base,
            "r_body_per_cm" => self.r_body_per_cm,
            "c_body_gnd" => self.c_body_gnd,
            "c_gt" => self.c_gt,
            "c_gr_wireless" => self.c_gr_wireless,
            "c_gr_classical" => self.c_gr_classical,
            "k_int" => self.k_int,
            "r_in" => self.r_in,
            "c_in" => self.c_in,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "r_out" => &mut self.r_out,
            "c_electrode_tx" => &mut self.c_electrode_tx,
            "c_electrode_rx" => &mut self.c_electrode_rx,
            "r_skin_tx" => &mut self.r_skin_tx,
            "r_skin_rx" => &mut self.r_skin_rx,
            "r_body_base" => &mut self.r_body_base,
            "r_body_per_cm" => &mut self.r_body_per_cm,
            "c_body_gnd" => &mut self.c_body_gnd,
            "c_gt" => &mut self.c_gt,
            "c_gr_wireless" => &mut self.c_gr_wireless,
            "c_gr_classical" => &mut self.c_gr_classical,
            "k_int" => &mut self.k_int,
            "r_in" => &mut self.r_in,
            "c_in" => &mut self.c_in,
        _ => return false,
        };
        *slot = value;
        true
    }

    /// Forward-path body resistance at the given distance.
    pub fn r_body(&self, distance_cm: f64) -> f64 {
        self.r_body_base + self.r_body_per_cm * distance_cm
    }

    /// Rx floating-ground-to-earth capacitance for the given readout mode.
    pub fn c_gr(&self, mode: DaqMode) -> f64 {
        match mode {
            DaqMode::Classical => self.c_gr_classical,
            DaqMode::Wireless => self.c_gr_wireless,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for name in Self::FIELD_NAMES {
            let value = self.get(name).expect("known field");
            if !value.is_finite() || value <= 0.0 {
                return Err(ChannelError::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        if self.c_gr_classical < self.c_gr_wireless {
            return Err(ChannelError::InvalidParams(format!(
                "c_gr_classical ({}) must be >= c_gr_wireless ({})",
                self.c_gr_classical, self.c_gr_wireless
            )));
        }
        Ok(())
    }
}

/// Errors from channel construction and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    InvalidParams(String),
    /// An input that must be strictly positive was not.
    NonPositiveInput { name: &'static str, value: f64 },
    Solver(CircuitError),
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::InvalidParams(msg) => write!(f, "invalid channel parameters: {msg}"),
            ChannelError::NonPositiveInput { name, value } => {
                write!(f, "{name} must be > 0, got {value}")
            }
            ChannelError::Solver(e) => write!(f, "solver: {e}"),
        }
    }
}

impl std::error::Error for ChannelError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ChannelError::Solver(e) => Some(e),
            _ => None,
        }
    }
}

impl From<CircuitError> for ChannelError {
    fn from(e: CircuitError) -> Self {
        ChannelError::Solver(e)
    }
}

/// Inter-device coupling capacitance `C_INT(d) = k_int / d`, strictly
/// decreasing in distance.
pub fn c_int_of_distance(distance_cm: f64, k_int: f64) -> Result<f64, ChannelError> {
    if !distance_cm.is_finite() || distance_cm <= 0.0 {
        return Err(ChannelError::NonPositiveInput {
            name: "distance_cm",
            value: distance_cm,
        });
    }
    if !k_int.is_finite() || k_int <= 0.0 {
        return Err(ChannelError::NonPositiveInput {
            name: "k_int",
            value: k_int,
        });
    }
    Ok(k_int / distance_cm)
}

/// Builds the canonical equivalent-circuit netlist for a scenario.
///
/// The netlist has 9 non-reference nodes and 14 elements; the two DAQ modes
/// differ in exactly one element value, the `GR`-to-`E` capacitance.
pub fn build_channel(
    scenario: &Scenario,
    params: &ChannelParams,
    v_src: f64,
) -> Result<Netlist, ChannelError> {
    scenario.validate()?;
    params.validate()?;
    if !v_src.is_finite() || v_src < 0.0 {
        return Err(ChannelError::InvalidParams(format!(
            "source amplitude must be finite and >= 0, got {v_src}"
        )));
    }

    let d = scenario.distance_cm;
    let c_int = c_int_of_distance(d, params.k_int)?;

    let mut net = Netlist::new();
    for node in ["GT", "TXo", "TE", "TEi", "BT", "BR", "REi", RX_SIGNAL_NODE, RX_GROUND_NODE] {
        net.declare_node(node);
    }
    net.push(Element::voltage_source("V_src", "GT", "TXo", v_src));
    net.push(Element::resistor("R_out", "TXo", "TE", params.r_out));
    net.push(Element::capacitor("C_el_tx", "TE", "TEi", params.c_electrode_tx));
    net.push(Element::resistor("R_skin_tx", "TEi", "BT", params.r_skin_tx));
    net.push(Element::resistor("R_body", "BT", "BR", params.r_body(d)));
    net.push(Element::capacitor("C_body_tx", "BT", REFERENCE_NODE, params.c_body_gnd));
    net.push(Element::capacitor("C_body_rx", "BR", REFERENCE_NODE, params.c_body_gnd));
    net.push(Element::resistor("R_skin_rx", "BR", "REi", params.r_skin_rx));
    net.push(Element::capacitor("C_el_rx", "REi", RX_SIGNAL_NODE, params.c_electrode_rx));
    net.push(Element::resistor("R_in", RX_SIGNAL_NODE, RX_GROUND_NODE, params.r_in));
    net.push(Element::capacitor("C_in", RX_SIGNAL_NODE, RX_GROUND_NODE, params.c_in));
    net.push(Element::capacitor("C_gt", "GT", REFERENCE_NODE, params.c_gt));
    net.push(Element::capacitor(
        "C_gr",
        RX_GROUND_NODE,
        REFERENCE_NODE,
        params.c_gr(scenario.daq_mode),
    ));
    net.push(Element::capacitor("C_int", "GT", RX_GROUND_NODE, c_int));

    debug_assert!(net.validate().is_ok());
    Ok(net)
}

/// Channel gain in dB at `freq_hz`: the differential voltage at the Rx input
/// (`SR` minus `GR`) relative to the source amplitude.
pub fn channel_gain_db(
    scenario: &Scenario,
    params: &ChannelParams,
    freq_hz: f64,
) -> Result<f64, ChannelError> {
    let net = build_channel(scenario, params, 1.0)?;
    circuit::transfer_gain_db(&net, RX_SIGNAL_NODE, RX_GROUND_NODE, freq_hz).map_err(Into::into)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..61).map(|i| 4e6 + i as f64 * 1e6).collect()
    }

    #[test]
    fn c_int_examples() {
        assert!((c_int_of_distance(10.0, 10e-12).unwrap() - 1.0e-12).abs() < 1e-27);
        assert!((c_int_of_distance(50.0, 10e-12).unwrap() - 0.2e-12).abs() < 1e-27);
        let near = c_int_of_distance(7.0, 3e-12).unwrap();
        let far = c_int_of_distance(14.0, 3e-12).unwrap();
        assert_eq!(near / far, 2.0);
        assert!(c_int_of_distance(0.0, 1e-12).is_err());
        assert!(c_int_of_distance(10.0, -1e-12).is_err());
    }

    #[test]
    fn canonical_topology_shape() {
        let scenario = Scenario::new(DaqMode::Wireless, 30.0);
        let net = build_channel(&scenario, &ChannelParams::default(), 1.0).unwrap();
        assert!(net.validate().is_ok());
        let non_reference = net.nodes.iter().filter(|n| *n != REFERENCE_NODE).count();
        assert_eq!(non_reference, 9);
        assert_eq!(net.elements.len(), 14);
    }

    #[test]
    fn mode_swap_changes_exactly_one_element() {
        let params = ChannelParams::default();
        let wireless =
            build_channel(&Scenario::new(DaqMode::Wireless, 30.0), &params, 1.0).unwrap();
        let classical =
            build_channel(&Scenario::new(DaqMode::Classical, 30.0), &params, 1.0).unwrap();
        assert_eq!(wireless.nodes, classical.nodes);
        let differing: Vec<_> = wireless
            .elements
            .iter()
            .zip(&classical.elements)
            .filter(|(w, c)| w != c)
            .collect();
        assert_eq!(differing.len(), 1);
        let (w, c) = differing[0];
        assert_eq!(w.label, "C_gr");
        assert_eq!(
            c.kind,
            crate::circuit::ElementKind::Capacitor {
                farads: params.c_gr_classical
            }
        );
    }

    #[test]
    fn building_twice_is_deterministic() {
        let scenario = Scenario::new(DaqMode::Wireless, 10.0);
        let params = ChannelParams::default();
        let a = build_channel(&scenario, &params, 1.0).unwrap();
        let b = build_channel(&scenario, &params, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classical_gain_dominates_wireless_on_the_grid() {
        let params = ChannelParams::default();
        for d in [10.0, 30.0, 50.0] {
            for f in grid() {
                let gc =
                    channel_gain_db(&Scenario::new(DaqMode::Classical, d), &params, f).unwrap();
                let gw = channel_gain_db(&Scenario::new(DaqMode::Wireless, d), &params, f).unwrap();
                assert!(gc >= gw, "d = {d} cm, f = {f} Hz: {gc} < {gw}");
            }
        }
    }

    #[test]
    fn gain_is_non_increasing_in_distance_on_the_grid() {
        let params = ChannelParams::default();
        for mode in [DaqMode::Wireless, DaqMode::Classical] {
            for f in grid() {
                let g10 = channel_gain_db(&Scenario::new(mode, 10.0), &params, f).unwrap();
                let g30 = channel_gain_db(&Scenario::new(mode, 30.0), &params, f).unwrap();
                let g50 = channel_gain_db(&Scenario::new(mode, 50.0), &params, f).unwrap();
                assert!(g10 >= g30 && g30 >= g50, "{mode} f = {f}: {g10} {g30} {g50}");
            }
        }
    }

    #[test]
    fn gain_is_non_decreasing_in_c_gr_on_the_grid() {
        let params = ChannelParams::default();
        let mut boosted = params;
        boosted.c_gr_wireless *= 10.0;
        boosted.c_gr_classical *= 10.0;
        for mode in [DaqMode::Wireless, DaqMode::Classical] {
            for d in [10.0, 30.0, 50.0] {
                for f in grid() {
                    let base = channel_gain_db(&Scenario::new(mode, d), &params, f).unwrap();
                    let up = channel_gain_db(&Scenario::new(mode, d), &boosted, f).unwrap();
                    assert!(up >= base - 1e-9, "{mode} d = {d} f = {f}: {up} < {base}");
                }
            }
        }
    }

    #[test]
    fn gain_is_invariant_to_source_amplitude() {
        let scenario = Scenario::new(DaqMode::Wireless, 30.0);
        let params = ChannelParams::default();
        let net1 = build_channel(&scenario, &params, 1.0).unwrap();
        let net2 = build_channel(&scenario, &params, 2.0).unwrap();
        let g1 = circuit::transfer_gain_db(&net1, RX_SIGNAL_NODE, RX_GROUND_NODE, 20e6).unwrap();
        let g2 = circuit::transfer_gain_db(&net2, RX_SIGNAL_NODE, RX_GROUND_NODE, 20e6).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let params = ChannelParams::default();
        assert!(build_channel(&Scenario::new(DaqMode::Wireless, 0.0), &params, 1.0).is_err());
        let mut bad = params;
        bad.c_gr_classical = bad.c_gr_wireless / 2.0;
        assert!(bad.validate().is_err());
        let mut zero = params;
        zero.r_in = 0.0;
        assert!(zero.validate().is_err());
    }

    #[test]
    fn field_access_by_name_round_trips() {
        let mut params = ChannelParams::default();
        for name in ChannelParams::FIELD_NAMES {
            let v = params.get(name).unwrap();
            assert!(params.set(name, v * 2.0));
            assert_eq!(params.get(name).unwrap(), v * 2.0);
            assert!(params.set(name, v));
        }
        assert_eq!(params, ChannelParams::default());
        assert!(params.get("no_such_field").is_none());
        assert!(!params.set("no_such_field", 1.0));
    }
}
