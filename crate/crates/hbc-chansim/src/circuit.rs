//! Complex-valued AC analysis of linear R/C/L networks via modified nodal
//! analysis (MNA).
//!
//! Networks are described as a [`Netlist`] over named nodes with the reserved
//! identifier `"E"` as the earth-ground reference (0 V by definition) and
//! exactly one ideal voltage source. [`solve_ac`] assembles the complex MNA
//! system at a single frequency and solves it by dense Gaussian elimination
//! with partial pivoting; network sizes here are small (< 20 nodes), so no
//! sparse machinery is used.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;

/// Reserved identifier of the earth-ground reference node.
pub const REFERENCE_NODE: &str = "E";

/// Relative pivot threshold: a pivot whose magnitude falls below
/// `SINGULAR_PIVOT_RATIO` times the largest entry of the initial matrix is
/// treated as a singular system.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-15;

/// A two-terminal circuit element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementKind {
    Resistor { ohms: f64 },
    Capacitor { farads: f64 },
    Inductor { henries: f64 },
    /// Ideal source enforcing `V(a) - V(b) = volts` (peak amplitude).
    VoltageSource { volts: f64 },
}

impl ElementKind {
    fn describe(&self) -> &'static str {
        match self {
            ElementKind::Resistor { .. } => "resistor",
            ElementKind::Capacitor { .. } => "capacitor",
            ElementKind::Inductor { .. } => "inductor",
            ElementKind::VoltageSource { .. } => "voltage source",
        }
    }
}

/// An element instance connecting nodes `a` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub a: String,
    pub b: String,
    pub label: String,
}

impl Element {
    pub fn resistor(label: &str, a: &str, b: &str, ohms: f64) -> Self {
        Self::new(label, a, b, ElementKind::Resistor { ohms })
    }

    pub fn capacitor(label: &str, a: &str, b: &str, farads: f64) -> Self {
        Self::new(label, a, b, ElementKind::Capacitor { farads })
    }

    pub fn inductor(label: &str, a: &str, b: &str, henries: f64) -> Self {
        Self::new(label, a, b, ElementKind::Inductor { henries })
    }

    pub fn voltage_source(label: &str, a: &str, b: &str, volts: f64) -> Self {
        Self::new(label, a, b, ElementKind::VoltageSource { volts })
    }

    fn new(label: &str, a: &str, b: &str, kind: ElementKind) -> Self {
        Self {
            kind,
            a: a.to_string(),
            b: b.to_string(),
            label: label.to_string(),
        }
    }
}

/// A linear AC circuit over named nodes.
///
/// Invariants checked by [`Netlist::validate`]:
/// - the reference node `"E"` is present,
/// - every element endpoint names a declared node and `a != b`,
/// - component values are strictly positive and finite (source amplitude
///   may be zero),
/// - exactly one voltage source exists,
/// - the element graph connects every node to `"E"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub nodes: Vec<String>,
    pub elements: Vec<Element>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    /// Empty netlist containing only the reference node.
    pub fn new() -> Self {
        Self {
            nodes: vec![REFERENCE_NODE.to_string()],
            elements: Vec::new(),
        }
    }

    /// Declares a node if not already present.
    pub fn declare_node(&mut self, id: &str) {
        if !self.nodes.iter().any(|n| n == id) {
            self.nodes.push(id.to_string());
        }
    }

    /// Appends an element. Endpoints must be declared separately; see
    /// [`Netlist::validate`].
    pub fn push(&mut self, element: Element) {
        self.elements.push(element);
    }

    /// The single voltage source, if the netlist holds exactly one.
    pub fn source(&self) -> Option<&Element> {
        let mut sources = self
            .elements
            .iter()
            .filter(|e| matches!(e.kind, ElementKind::VoltageSource { .. }));
        match (sources.next(), sources.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    }

    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let invalid = |msg: String| Err(CircuitError::InvalidNetlist(msg));

        if !self.nodes.iter().any(|n| n == REFERENCE_NODE) {
            return invalid(format!("reference node \"{REFERENCE_NODE}\" is missing"));
        }
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for node in &self.nodes {
            if seen.insert(node.as_str(), ()).is_some() {
                return invalid(format!("duplicate node \"{node}\""));
            }
        }

        let mut sources = 0usize;
        for el in &self.elements {
            if el.a == el.b {
                return invalid(format!(
                    "element \"{}\" connects node \"{}\" to itself",
                    el.label, el.a
                ));
            }
            for end in [&el.a, &el.b] {
                if !seen.contains_key(end.as_str()) {
                    return invalid(format!(
                        "element \"{}\" references undeclared node \"{end}\"",
                        el.label
                    ));
                }
            }
            let value_ok = match el.kind {
                ElementKind::Resistor { ohms } => ohms.is_finite() && ohms > 0.0,
                ElementKind::Capacitor { farads } => farads.is_finite() && farads > 0.0,
                ElementKind::Inductor { henries } => henries.is_finite() && henries > 0.0,
                ElementKind::VoltageSource { volts } => {
                    sources += 1;
                    volts.is_finite() && volts >= 0.0
                }
            };
            if !value_ok {
                return invalid(format!(
                    "{} \"{}\" has a non-positive or non-finite value",
                    el.kind.describe(),
                    el.label
                ));
            }
        }
        if sources != 1 {
            return invalid(format!("expected exactly 1 voltage source, found {sources}"));
        }

        // Connectivity: every node must reach the reference through elements.
        let index: HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for el in &self.elements {
            let ia = index[el.a.as_str()];
            let ib = index[el.b.as_str()];
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        let mut reached = vec![false; self.nodes.len()];
        let mut stack = vec![index[REFERENCE_NODE]];
        while let Some(i) = stack.pop() {
            if !reached[i] {
                reached[i] = true;
                stack.extend(adjacency[i].iter().copied());
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return invalid(format!(
                "node \"{}\" is not connected to the reference node",
                self.nodes[i]
            ));
        }
        Ok(())
    }
}

/// Phasor solution of a netlist at one frequency.
///
/// Voltages are relative to the reference node; `node_voltages["E"]` is
/// exactly zero. The solution is linear in the source amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AcSolution {
    pub freq_hz: f64,
    pub node_voltages: BTreeMap<String, Complex64>,
    /// Current through the ideal source, flowing from terminal `a` through
    /// the source to terminal `b`.
    pub source_current: Complex64,
}

impl AcSolution {
    pub fn voltage(&self, node: &str) -> Option<Complex64> {
        self.node_voltages.get(node).copied()
    }

    /// Differential voltage `V(plus) - V(minus)`.
    pub fn differential(&self, plus: &str, minus: &str) -> Option<Complex64> {
        Some(self.voltage(plus)? - self.voltage(minus)?)
    }
}

/// Errors from netlist validation and AC solving.
#[derive(Debug, Clone, PartialEq)]
pub enum CircuitError {
    /// A structural invariant of the netlist is violated.
    InvalidNetlist(String),
    /// Frequency is negative or non-finite.
    InvalidFrequency(f64),
    /// A probe endpoint names no declared node.
    UnknownNode(String),
    /// The MNA matrix is numerically singular at this frequency, e.g. a
    /// subnetwork left floating when capacitors open at f = 0.
    SingularSystem { freq_hz: f64 },
}

impl fmt::Display for CircuitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CircuitError::InvalidNetlist(msg) => write!(f, "invalid netlist: {msg}"),
            CircuitError::InvalidFrequency(v) => {
                write!(f, "frequency must be finite and >= 0, got {v}")
            }
            CircuitError::UnknownNode(n) => write!(f, "unknown node \"{n}\""),
            CircuitError::SingularSystem { freq_hz } => {
                write!(f, "singular system at {freq_hz} Hz (floating subnetwork?)")
            }
        }
    }
}

impl std::error::Error for CircuitError {}

/// Solves the netlist at `freq_hz`, returning phasor node voltages that
/// satisfy Kirchhoff's current law at every non-reference node.
///
/// Element admittances are 1/R and j·2πf·C; inductors and the ideal source
/// carry auxiliary branch-current unknowns (for the inductor the branch
/// equation `V(a) - V(b) = jωL·I` is the 1/(jωL) admittance for f > 0 and
/// degenerates to a short at f = 0). f = 0 is accepted: capacitors become
/// open circuits and a resulting floating subnetwork is reported as
/// [`CircuitError::SingularSystem`], not a crash.
pub fn solve_ac(net: &Netlist, freq_hz: f64) -> Result<AcSolution, CircuitError> {
    if !freq_hz.is_finite() || freq_hz < 0.0 {
        return Err(CircuitError::InvalidFrequency(freq_hz));
    }
    net.validate()?;

    // Non-reference nodes in declaration order, then branch unknowns.
    let mut node_index: HashMap<&str, usize> = HashMap::new();
    for node in self_nodes(net) {
        let next = node_index.len();
        node_index.insert(node, next);
    }
    let n_nodes = node_index.len();
    let n_branches = net
        .elements
        .iter()
        .filter(|e| {
            matches!(
                e.kind,
                ElementKind::Inductor { .. } | ElementKind::VoltageSource { .. }
            )
        })
        .count();
    let dim = n_nodes + n_branches;

    let mut matrix = vec![vec![Complex64::ZERO; dim]; dim];
    let mut rhs = vec![Complex64::ZERO; dim];
    let omega = 2.0 * std::f64::consts::PI * freq_hz;

    let idx = |name: &str| node_index.get(name).copied();
    let stamp_admittance =
        |m: &mut Vec<Vec<Complex64>>, a: Option<usize>, b: Option<usize>, y: Complex64| {
            if let Some(i) = a {
                m[i][i] += y;
            }
            if let Some(j) = b {
                m[j][j] += y;
            }
            if let (Some(i), Some(j)) = (a, b) {
                m[i][j] -= y;
                m[j][i] -= y;
            }
        };

    let mut branch = n_nodes;
    let mut source_branch = 0usize;
    for el in &net.elements {
        let a = idx(&el.a);
        let b = idx(&el.b);
        match el.kind {
            ElementKind::Resistor { ohms } => {
                stamp_admittance(&mut matrix, a, b, Complex64::new(1.0 / ohms, 0.0));
            }
            ElementKind::Capacitor { farads } => {
                stamp_admittance(&mut matrix, a, b, Complex64::new(0.0, omega * farads));
            }
            ElementKind::Inductor { henries } => {
                stamp_branch(&mut matrix, a, b, branch);
                matrix[branch][branch] -= Complex64::new(0.0, omega * henries);
                branch += 1;
            }
            ElementKind::VoltageSource { volts } => {
                stamp_branch(&mut matrix, a, b, branch);
                rhs[branch] = Complex64::new(volts, 0.0);
                source_branch = branch;
                branch += 1;
            }
        }
    }

    let solution = gaussian_eliminate(matrix, rhs)
        .ok_or(CircuitError::SingularSystem { freq_hz })?;

    let mut node_voltages = BTreeMap::new();
    node_voltages.insert(REFERENCE_NODE.to_string(), Complex64::ZERO);
    for node in &net.nodes {
        if node != REFERENCE_NODE {
            node_voltages.insert(node.clone(), solution[node_index[node.as_str()]]);
        }
    }
    Ok(AcSolution {
        freq_hz,
        node_voltages,
        source_current: solution[source_branch],
    })
}

/// Differential transfer gain `20·log10(|V(plus) - V(minus)| / V_source)` in
/// dB at `freq_hz`.
///
/// A probe differential of exactly zero yields `f64::NEG_INFINITY` as the
/// distinguished minus-infinity value.
pub fn transfer_gain_db(
    net: &Netlist,
    probe_plus: &str,
    probe_minus: &str,
    freq_hz: f64,
) -> Result<f64, CircuitError> {
    let amplitude = match net.source().map(|s| s.kind) {
        Some(ElementKind::VoltageSource { volts }) if volts > 0.0 => volts,
        _ => {
            return Err(CircuitError::InvalidNetlist(
                "transfer gain requires exactly one voltage source with amplitude > 0".to_string(),
            ))
        }
    };
    let solution = solve_ac(net, freq_hz)?;
    let diff = solution
        .differential(probe_plus, probe_minus)
        .ok_or_else(|| {
            let missing = if solution.voltage(probe_plus).is_none() {
                probe_plus
            } else {
                probe_minus
            };
            CircuitError::UnknownNode(missing.to_string())
        })?;
    Ok(20.0 * (diff.norm() / amplitude).log10())
}

fn self_nodes(net: &Netlist) -> Vec<&str> {
    net.nodes
        .iter()
        .filter(|n| n.as_str() != REFERENCE_NODE)
        .map(|n| n.as_str())
        .collect()
}

// KCL and branch-equation entries shared by voltage sources and inductors:
// the branch current leaves node a, enters node b, and the branch row reads
// V(a) - V(b) (minus the impedance term added by the caller).
fn stamp_branch(matrix: &mut [Vec<Complex64>], a: Option<usize>, b: Option<usize>, branch: usize) {
    let one = Complex64::ONE;
    if let Some(i) = a {
        matrix[i][branch] += one;
        matrix[branch][i] += one;
    }
    if let Some(j) = b {
        matrix[j][branch] -= one;
        matrix[branch][j] -= one;
    }
}

/// Dense Gaussian elimination with partial pivoting. Returns `None` when a
/// pivot falls below `SINGULAR_PIVOT_RATIO` times the largest magnitude of
/// the initial matrix.
fn gaussian_eliminate(
    mut matrix: Vec<Vec<Complex64>>,
    mut rhs: Vec<Complex64>,
) -> Option<Vec<Complex64>> {
    let n = matrix.len();
    let scale = matrix
        .iter()
        .flat_map(|row| row.iter())
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return if n == 0 { Some(rhs) } else { None };
    }
    let threshold = SINGULAR_PIVOT_RATIO * scale;

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                matrix[r][col]
                    .norm()
                    .partial_cmp(&matrix[s][col].norm())
                    .expect("pivot magnitudes are finite")
            })
            .expect("non-empty pivot range");
        if matrix[pivot_row][col].norm() < threshold {
            return None;
        }
        matrix.swap(col, pivot_row);
        rhs.swap(col, pivot_row);

        let pivot = matrix[col][col];
        for row in col + 1..n {
            let factor = matrix[row][col] / pivot;
            if factor == Complex64::ZERO {
                continue;
            }
            for k in col..n {
                let sub = factor * matrix[col][k];
                matrix[row][k] -= sub;
            }
            let sub = factor * rhs[col];
            rhs[row] -= sub;
        }
    }

    let mut x = vec![Complex64::ZERO; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= matrix[row][k] * x[k];
        }
        x[row] = acc / matrix[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_resistor_divider() -> Netlist {
        let mut net = Netlist::new();
        for node in ["top", "mid"] {
            net.declare_node(node);
        }
        net.push(Element::voltage_source("V1", "top", REFERENCE_NODE, 1.0));
        net.push(Element::resistor("R1", "top", "mid", 1e3));
        net.push(Element::resistor("R2", "mid", REFERENCE_NODE, 1e3));
        net
    }

    #[test]
    fn symmetric_divider_gives_half_source() {
        let net = two_resistor_divider();
        let sol = solve_ac(&net, 1e3).unwrap();
        let mid = sol.voltage("mid").unwrap();
        assert!((mid.norm() - 0.5).abs() < 1e-12);
        assert!(mid.arg().abs() < 1e-12);
        assert_eq!(sol.voltage(REFERENCE_NODE).unwrap(), Complex64::ZERO);

        let gain = transfer_gain_db(&net, "mid", REFERENCE_NODE, 1e3).unwrap();
        assert!((gain - 20.0 * 0.5f64.log10()).abs() < 1e-12);
        assert!((gain + 6.0206).abs() < 1e-4);
    }

    #[test]
    fn rc_corner_magnitude_and_phase() {
        // R = 1 kΩ, C = 159.1549 pF -> corner at 1 MHz.
        let mut net = Netlist::new();
        net.declare_node("in");
        net.declare_node("out");
        net.push(Element::voltage_source("V1", "in", REFERENCE_NODE, 1.0));
        net.push(Element::resistor("R1", "in", "out", 1e3));
        net.push(Element::capacitor("C1", "out", REFERENCE_NODE, 159.1549e-12));
        let sol = solve_ac(&net, 1e6).unwrap();
        let out = sol.voltage("out").unwrap();
        assert!((out.norm() - 0.70711).abs() < 1e-4);
        assert!((out.arg().to_degrees() + 45.0).abs() < 1e-2);
    }

    #[test]
    fn capacitive_divider_is_frequency_independent() {
        let mut net = Netlist::new();
        net.declare_node("in");
        net.declare_node("out");
        net.push(Element::voltage_source("V1", "in", REFERENCE_NODE, 1.0));
        net.push(Element::capacitor("C1", "in", "out", 1e-12));
        net.push(Element::capacitor("C2", "out", REFERENCE_NODE, 9e-12));
        for freq in [1e3, 1e6, 64e6] {
            let sol = solve_ac(&net, freq).unwrap();
            let out = sol.voltage("out").unwrap();
            assert!((out.norm() - 0.100).abs() < 1e-12, "f = {freq}");
            let gain = transfer_gain_db(&net, "out", REFERENCE_NODE, freq).unwrap();
            assert!((gain + 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn probing_across_the_source_is_zero_db() {
        let net = two_resistor_divider();
        let gain = transfer_gain_db(&net, "top", REFERENCE_NODE, 5e4).unwrap();
        assert!(gain.abs() < 1e-12);
    }

    #[test]
    fn gain_is_invariant_to_source_amplitude() {
        let base = transfer_gain_db(&two_resistor_divider(), "mid", REFERENCE_NODE, 1e3).unwrap();
        for alpha in [2.0, 0.25, 1024.0] {
            let mut net = two_resistor_divider();
            net.elements[0] = Element::voltage_source("V1", "top", REFERENCE_NODE, alpha);
            let gain = transfer_gain_db(&net, "mid", REFERENCE_NODE, 1e3).unwrap();
            // power-of-two scaling is bit-exact
            assert_eq!(gain, base, "alpha = {alpha}");
        }
        for alpha in [3.7, 0.013] {
            let mut net = two_resistor_divider();
            net.elements[0] = Element::voltage_source("V1", "top", REFERENCE_NODE, alpha);
            let gain = transfer_gain_db(&net, "mid", REFERENCE_NODE, 1e3).unwrap();
            assert!((gain - base).abs() < 1e-9, "alpha = {alpha}");
        }
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let net = two_resistor_divider();
        let a = solve_ac(&net, 12.5e6).unwrap();
        let b = solve_ac(&net, 12.5e6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capacitor_only_node_is_singular_at_dc() {
        let mut net = Netlist::new();
        net.declare_node("in");
        net.declare_node("out");
        net.push(Element::voltage_source("V1", "in", REFERENCE_NODE, 1.0));
        net.push(Element::capacitor("C1", "in", "out", 1e-9));
        net.push(Element::capacitor("C2", "out", REFERENCE_NODE, 1e-9));
        assert!(solve_ac(&net, 1e3).is_ok());
        assert_eq!(
            solve_ac(&net, 0.0),
            Err(CircuitError::SingularSystem { freq_hz: 0.0 })
        );
    }

    #[test]
    fn inductor_is_a_short_at_dc() {
        let mut net = Netlist::new();
        net.declare_node("in");
        net.declare_node("out");
        net.push(Element::voltage_source("V1", "in", REFERENCE_NODE, 1.0));
        net.push(Element::inductor("L1", "in", "out", 1e-3));
        net.push(Element::resistor("R1", "out", REFERENCE_NODE, 50.0));
        let sol = solve_ac(&net, 0.0).unwrap();
        let out = sol.voltage("out").unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
        assert!((sol.source_current.norm() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn zero_probe_differential_signals_minus_infinity() {
        let net = two_resistor_divider();
        let gain = transfer_gain_db(&net, "mid", "mid", 1e3).unwrap();
        assert_eq!(gain, f64::NEG_INFINITY);
    }

    #[test]
    fn validation_rejects_broken_netlists() {
        let ok = two_resistor_divider();
        assert!(ok.validate().is_ok());

        let mut no_ref = ok.clone();
        no_ref.nodes.retain(|n| n != REFERENCE_NODE);
        assert!(matches!(
            no_ref.validate(),
            Err(CircuitError::InvalidNetlist(_))
        ));

        let mut unknown = ok.clone();
        unknown.elements[1].b = "nowhere".to_string();
        assert!(matches!(
            unknown.validate(),
            Err(CircuitError::InvalidNetlist(_))
        ));

        let mut two_sources = ok.clone();
        two_sources.push(Element::voltage_source("V2", "mid", REFERENCE_NODE, 1.0));
        assert!(matches!(
            two_sources.validate(),
            Err(CircuitError::InvalidNetlist(_))
        ));

        let mut self_loop = ok.clone();
        self_loop.elements[1].b = "top".to_string();
        assert!(matches!(
            self_loop.validate(),
            Err(CircuitError::InvalidNetlist(_))
        ));

        let mut bad_value = ok.clone();
        bad_value.elements[1].kind = ElementKind::Resistor { ohms: 0.0 };
        assert!(matches!(
            bad_value.validate(),
            Err(CircuitError::InvalidNetlist(_))
        ));

        let mut disconnected = ok.clone();
        disconnected.declare_node("island");
        assert!(matches!(
            disconnected.validate(),
            Err(CircuitError::InvalidNetlist(_))
        ));
    }

    #[test]
    fn negative_frequency_is_rejected_and_probe_must_exist() {
        let net = two_resistor_divider();
        assert_eq!(
            solve_ac(&net, -1.0),
            Err(CircuitError::InvalidFrequency(-1.0))
        );
        assert_eq!(
            transfer_gain_db(&net, "mid", "ghost", 1e3),
            Err(CircuitError::UnknownNode("ghost".to_string()))
        );
    }
}
