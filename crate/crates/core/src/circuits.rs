//! The CNOT and Toffoli circuits as element sequences, plus the runner that
//! propagates a photon through them, measures it and applies the
//! feed-forward corrections.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::ScatteringCoefficients;
use crate::error::{Error, Result};
use crate::spin::{SpinConfig, SpinState};
use crate::state::{
    CavityFace, Face, HybridState, MeasurementBasis, OutcomeLabel, Polarization, PhotonOutcome,
    Port,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Cnot,
    Toffoli,
}

impl GateKind {
    pub fn n_spins(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            GateKind::Toffoli => 3,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::Cnot => "cnot",
            GateKind::Toffoli => "toffoli",
        })
    }
}

/// One optical or spin element with its port and spin bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Element {
    SpinHadamard { spin: usize },
    SigmaZ { spin: usize, global_minus: bool },
    Hwp { port: Port },
    Cpbs { inputs: [Port; 2], outputs: [Port; 2] },
    PhaseShift { port: Port, phase: f64 },
    BeamSplitter { inputs: [Port; 2], outputs: [Port; 2] },
    /// Free propagation from one labelled mode to the next.
    Route { from: Port, to: Port },
    /// Time-delay line; only synchronizes arrival, so it does nothing here.
    Delay { port: Port },
    /// Scattering off QD-cavity system `cavity`, whose electron is `spin`.
    Cavity {
        cavity: usize,
        spin: usize,
        faces: Vec<CavityFace>,
    },
    /// Named checkpoint for tracing intermediate states.
    Marker { label: String },
}

/// How the cavities scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "coefficients", rename_all = "snake_case")]
pub enum SimulationMode {
    Ideal,
    /// One set of coefficients per cavity, indexed like `Element::Cavity::cavity`.
    Lossy(Vec<ScatteringCoefficients>),
}

impl SimulationMode {
    /// Every cavity of the circuit shares the same coefficients.
    pub fn lossy_uniform(circuit: &CircuitSpec, coeffs: ScatteringCoefficients) -> Self {
        SimulationMode::Lossy(vec![coeffs; circuit.n_cavities])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinCorrection {
    Identity,
    SigmaZ,
    MinusSigmaZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub spin: usize,
    pub op: SpinCorrection,
}

impl Correction {
    pub fn apply(&self, state: &mut SpinState) -> Result<()> {
        match self.op {
            SpinCorrection::Identity => Ok(()),
            SpinCorrection::SigmaZ => state.apply_sigma_z(self.spin, false),
            SpinCorrection::MinusSigmaZ => state.apply_sigma_z(self.spin, true),
        }
    }
}

/// A single-photon detector behind a given port and polarization analyzer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub name: String,
    pub port: Port,
    pub outcome: PhotonOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub ports: Vec<Port>,
    pub basis: MeasurementBasis,
}

/// Photon injected at the start of the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonSource {
    pub polarization: Polarization,
    pub port: Port,
}

pub type FeedForwardTable = BTreeMap<String, Vec<Correction>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub name: GateKind,
    pub n_spins: usize,
    pub n_cavities: usize,
    pub ports: Vec<Port>,
    pub source: PhotonSource,
    pub elements: Vec<Element>,
    pub measurement: MeasurementSpec,
    pub detectors: Vec<Detector>,
    /// Corrections keyed by detector name.
    pub feed_forward: FeedForwardTable,
}

/// One heralded branch of a gate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchResult {
    pub detector: String,
    pub port: Port,
    pub outcome: PhotonOutcome,
    pub probability: f64,
    /// Normalized spin state after the feed-forward corrections.
    pub corrected_state: Option<SpinState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRunResult {
    pub gate: GateKind,
    pub outcomes: Vec<BranchResult>,
    /// Probability that some detector fires.
    pub success_probability: f64,
    pub lost_probability: f64,
}

fn ports(names: &[&str]) -> Vec<Port> {
    names.iter().map(|&n| Port::new(n)).collect()
}

fn pair(a: &str, b: &str) -> [Port; 2] {
    [Port::new(a), Port::new(b)]
}

/// CPBS → cavity (both faces) → CPBS loop.
///
/// R enters the top face, L the bottom face, and every scattered component
/// recombines into `output`. With `pi_on_bottom_arm` a π phase shifter sits on
/// the bottom arm and is traversed on the way in and on the way out.
fn cavity_round(
    tag: &str,
    input: &str,
    output: &str,
    cavity: usize,
    spin: usize,
    pi_on_bottom_arm: bool,
) -> (Vec<Element>, Vec<String>) {
    let p = |suffix: &str| format!("{tag}.{suffix}");
    let (top_in, top_out, bot_in, bot_out) = (p("top.in"), p("top.out"), p("bot.in"), p("bot.out"));
    let (in_aux, out_aux) = (p("in.aux"), p("out.aux"));
    let mut elements = vec![Element::Cpbs {
        inputs: pair(input, &in_aux),
        outputs: pair(&top_in, &bot_in),
    }];
    if pi_on_bottom_arm {
        elements.push(Element::PhaseShift {
            port: Port::new(&bot_in),
            phase: PI,
        });
    }
    elements.push(Element::Cavity {
        cavity,
        spin,
        faces: vec![
            CavityFace::new(&top_in, Face::Top, &bot_out, &top_out),
            CavityFace::new(&bot_in, Face::Bottom, &top_out, &bot_out),
        ],
    });
    if pi_on_bottom_arm {
        elements.push(Element::PhaseShift {
            port: Port::new(&bot_out),
            phase: PI,
        });
    }
    elements.push(Element::Cpbs {
        inputs: pair(&bot_out, &top_out),
        outputs: pair(output, &out_aux),
    });
    (elements, vec![top_in, top_out, bot_in, bot_out, in_aux, out_aux])
}

fn marker(label: &str) -> Element {
    Element::Marker {
        label: label.to_owned(),
    }
}

/// Two-spin CNOT: spin 0 (cavity 1) controls, spin 1 (cavity 2) is the target.
///
/// Detector `D2` sees an L photon and heralds success directly; `D1` sees an R
/// photon and calls for −σ_z on the control.
pub fn build_cnot() -> CircuitSpec {
    let (round_a, mut internal) = cavity_round("ra", "in", "3", 0, 0, false);
    let (round_b, internal_b) = cavity_round("rb", "4", "8", 1, 1, true);
    internal.extend(internal_b);

    let mut elements = vec![marker("round_a.begin")];
    elements.extend(round_a);
    elements.push(marker("round_a"));
    elements.push(Element::Hwp { port: "3".into() });
    elements.push(Element::SpinHadamard { spin: 1 });
    elements.push(Element::Route {
        from: "3".into(),
        to: "4".into(),
    });
    elements.push(marker("round_b.begin"));
    elements.extend(round_b);
    elements.push(marker("round_b.end"));
    elements.push(Element::SpinHadamard { spin: 1 });
    elements.push(marker("pre_measurement"));

    let mut port_names: Vec<String> = ["in", "3", "4", "8"].iter().map(|s| s.to_string()).collect();
    port_names.extend(internal);
    let detectors = vec![
        Detector {
            name: "D1".into(),
            port: "8".into(),
            outcome: PhotonOutcome::R,
        },
        Detector {
            name: "D2".into(),
            port: "8".into(),
            outcome: PhotonOutcome::L,
        },
    ];
    let feed_forward = BTreeMap::from([
        (
            "D1".to_owned(),
            vec![Correction {
                spin: 0,
                op: SpinCorrection::MinusSigmaZ,
            }],
        ),
        ("D2".to_owned(), vec![]),
    ]);
    CircuitSpec {
        name: GateKind::Cnot,
        n_spins: 2,
        n_cavities: 2,
        ports: port_names.iter().map(|s| Port::new(s)).collect(),
        source: PhotonSource {
            polarization: Polarization::R,
            port: "in".into(),
        },
        elements,
        measurement: MeasurementSpec {
            ports: ports(&["8"]),
            basis: MeasurementBasis::Circular,
        },
        detectors,
        feed_forward,
    }
}

/// Three-spin Toffoli: spins 0 and 1 (cavities 1, 2) control, spin 2 (cavity 3)
/// is the target.
///
/// The photon leaving the BS is analyzed in the ± basis at ports `5` and `3~`.
/// Detector placement, fixed so that the feed-forward table restores the
/// Toffoli output in every branch:
///
/// | detector | port | outcome | correction              |
/// |----------|------|---------|-------------------------|
/// | D1       | 3~   | +       | −σ_z on c₁, σ_z on c₂   |
/// | D2       | 3~   | −       | none                    |
/// | D3       | 5    | +       | σ_z on c₂               |
/// | D4       | 5    | −       | σ_z on c₁               |
pub fn build_toffoli() -> CircuitSpec {
    let (round_a1, mut internal) = cavity_round("ra1", "1", "2", 1, 1, false);
    let (round_a2, internal_2) = cavity_round("ra2", "1~", "2~", 1, 1, false);
    let (round_a3, internal_3) = cavity_round("ra3", "2", "4", 2, 2, false);
    internal.extend(internal_2);
    internal.extend(internal_3);

    let mut elements = vec![
        Element::Cavity {
            cavity: 0,
            spin: 0,
            faces: vec![CavityFace::new("in", Face::Top, "1~", "1")],
        },
        marker("cavity_1"),
    ];
    elements.extend(round_a1);
    elements.extend(round_a2);
    elements.push(marker("round_a12"));
    elements.push(Element::Hwp { port: "2".into() });
    elements.push(Element::SpinHadamard { spin: 2 });
    elements.extend(round_a3);
    elements.push(Element::Hwp { port: "4".into() });
    elements.push(Element::SpinHadamard { spin: 2 });
    elements.push(marker("round_a3"));
    elements.push(Element::Delay { port: "2~".into() });
    elements.push(Element::BeamSplitter {
        inputs: pair("4", "2~"),
        outputs: pair("5", "3~"),
    });
    elements.push(marker("pre_measurement"));

    let mut port_names: Vec<String> = ["in", "1", "1~", "2", "2~", "4", "5", "3~"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    port_names.extend(internal);

    let detector = |name: &str, port: &str, outcome| Detector {
        name: name.into(),
        port: port.into(),
        outcome,
    };
    let fix = |spin, op| Correction { spin, op };
    CircuitSpec {
        name: GateKind::Toffoli,
        n_spins: 3,
        n_cavities: 3,
        ports: port_names.iter().map(|s| Port::new(s)).collect(),
        source: PhotonSource {
            polarization: Polarization::R,
            port: "in".into(),
        },
        elements,
        measurement: MeasurementSpec {
            ports: ports(&["5", "3~"]),
            basis: MeasurementBasis::Diagonal,
        },
        detectors: vec![
            detector("D1", "3~", PhotonOutcome::Plus),
            detector("D2", "3~", PhotonOutcome::Minus),
            detector("D3", "5", PhotonOutcome::Plus),
            detector("D4", "5", PhotonOutcome::Minus),
        ],
        feed_forward: BTreeMap::from([
            (
                "D1".to_owned(),
                vec![fix(0, SpinCorrection::MinusSigmaZ), fix(1, SpinCorrection::SigmaZ)],
            ),
            ("D2".to_owned(), vec![]),
            ("D3".to_owned(), vec![fix(1, SpinCorrection::SigmaZ)]),
            ("D4".to_owned(), vec![fix(0, SpinCorrection::SigmaZ)]),
        ]),
    }
}

pub fn build(gate: GateKind) -> CircuitSpec {
    match gate {
        GateKind::Cnot => build_cnot(),
        GateKind::Toffoli => build_toffoli(),
    }
}

/// Transfer matrix of a circuit segment on one spin, in the basis
/// {R|↑⟩, R|↓⟩, L|↑⟩, L|↓⟩}; `matrix[row][col]` = ⟨row|U|col⟩.
pub type SegmentMatrix = [[Complex64; 4]; 4];

impl CircuitSpec {
    pub fn port_set(&self) -> Arc<BTreeSet<Port>> {
        Arc::new(self.ports.iter().cloned().collect())
    }

    /// Checks that every referenced port, spin, cavity and detector is declared.
    pub fn validate(&self) -> Result<()> {
        let declared: BTreeSet<&Port> = self.ports.iter().collect();
        let check_port = |p: &Port| {
            if declared.contains(p) {
                Ok(())
            } else {
                Err(Error::UnknownPort(p.name().to_owned()))
            }
        };
        let check_spin = |s: usize| {
            if s < self.n_spins {
                Ok(())
            } else {
                Err(Error::SpinIndexOutOfRange {
                    index: s,
                    n_spins: self.n_spins,
                })
            }
        };
        if self.n_spins != self.name.n_spins() {
            return Err(Error::InconsistentCircuit(format!(
                "{} needs {} spins, circuit declares {}",
                self.name,
                self.name.n_spins(),
                self.n_spins
            )));
        }
        check_port(&self.source.port)?;
        let mut labels = BTreeSet::new();
        for element in &self.elements {
            match element {
                Element::SpinHadamard { spin } | Element::SigmaZ { spin, .. } => check_spin(*spin)?,
                Element::Hwp { port } | Element::PhaseShift { port, .. } | Element::Delay { port } => {
                    check_port(port)?
                }
                Element::Cpbs { inputs, outputs } | Element::BeamSplitter { inputs, outputs } => {
                    for p in inputs.iter().chain(outputs) {
                        check_port(p)?;
                    }
                }
                Element::Route { from, to } => {
                    check_port(from)?;
                    check_port(to)?;
                }
                Element::Cavity { cavity, spin, faces } => {
                    check_spin(*spin)?;
                    if *cavity >= self.n_cavities {
                        return Err(Error::InconsistentCircuit(format!(
                            "cavity index {cavity} out of range for {} cavities",
                            self.n_cavities
                        )));
                    }
                    for f in faces {
                        check_port(&f.input)?;
                        check_port(&f.transmit)?;
                        check_port(&f.reflect)?;
                    }
                }
                Element::Marker { label } => {
                    if !labels.insert(label.as_str()) {
                        return Err(Error::InconsistentCircuit(format!(
                            "duplicate marker `{label}`"
                        )));
                    }
                }
            }
        }
        for p in &self.measurement.ports {
            check_port(p)?;
        }
        let expected = self.measurement.basis.outcomes();
        for port in &self.measurement.ports {
            for outcome in expected {
                let found = self
                    .detectors
                    .iter()
                    .filter(|d| &d.port == port && d.outcome == outcome)
                    .count();
                if found != 1 {
                    return Err(Error::InconsistentCircuit(format!(
                        "expected exactly one detector for ({port}, {outcome}), found {found}"
                    )));
                }
            }
        }
        for d in &self.detectors {
            if !self.measurement.ports.contains(&d.port) || !expected.contains(&d.outcome) {
                return Err(Error::InconsistentCircuit(format!(
                    "detector {} watches an unmeasured outcome",
                    d.name
                )));
            }
            let corrections = self.feed_forward.get(&d.name).ok_or_else(|| {
                Error::InconsistentCircuit(format!("no feed-forward entry for {}", d.name))
            })?;
            for c in corrections {
                check_spin(c.spin)?;
            }
        }
        Ok(())
    }

    fn check_mode(&self, mode: &SimulationMode) -> Result<()> {
        if let SimulationMode::Lossy(coeffs) = mode {
            if coeffs.len() != self.n_cavities {
                return Err(Error::InconsistentCircuit(format!(
                    "{} coefficient sets given for {} cavities",
                    coeffs.len(),
                    self.n_cavities
                )));
            }
            for c in coeffs {
                c.check_passive()?;
            }
        }
        Ok(())
    }

    /// Photon from the source attached to the given spin register.
    pub fn input_state(&self, spins: &SpinState) -> Result<HybridState> {
        if spins.n_spins() != self.n_spins {
            return Err(Error::InvalidInput(format!(
                "{} expects {} spins, got {}",
                self.name,
                self.n_spins,
                spins.n_spins()
            )));
        }
        HybridState::with_photon(
            self.source.polarization,
            &self.source.port,
            spins,
            self.port_set(),
        )
    }

    /// Elements strictly between two markers.
    pub fn segment(&self, begin: &str, end: &str) -> Result<&[Element]> {
        let find = |label: &str| {
            self.elements
                .iter()
                .position(|e| matches!(e, Element::Marker { label: l } if l == label))
                .ok_or_else(|| Error::InvalidInput(format!("no marker `{label}`")))
        };
        let (b, e) = (find(begin)?, find(end)?);
        if b >= e {
            return Err(Error::InvalidInput(format!("marker `{begin}` is not before `{end}`")));
        }
        Ok(&self.elements[b + 1..e])
    }

    /// Propagates `state` through `elements`.
    pub fn apply(
        &self,
        elements: &[Element],
        state: &HybridState,
        mode: &SimulationMode,
    ) -> Result<HybridState> {
        self.check_mode(mode)?;
        let mut state = state.clone();
        for element in elements {
            state = apply_element(element, &state, mode)?;
        }
        Ok(state)
    }

    /// States at every marker, in circuit order.
    pub fn trace(
        &self,
        spins: &SpinState,
        mode: &SimulationMode,
    ) -> Result<Vec<(String, HybridState)>> {
        self.check_mode(mode)?;
        let mut state = self.input_state(spins)?;
        let mut out = Vec::new();
        for element in &self.elements {
            if let Element::Marker { label } = element {
                out.push((label.clone(), state.clone()));
            }
            state = apply_element(element, &state, mode)?;
        }
        Ok(out)
    }

    /// State at a named marker.
    pub fn state_at(&self, label: &str, spins: &SpinState, mode: &SimulationMode) -> Result<HybridState> {
        self.trace(spins, mode)?
            .into_iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::InvalidInput(format!("no marker `{label}`")))
    }

    /// Photon + spin state just before detection.
    pub fn pre_measurement_state(
        &self,
        spins: &SpinState,
        mode: &SimulationMode,
    ) -> Result<HybridState> {
        let input = self.input_state(spins)?;
        self.apply(&self.elements, &input, mode)
    }

    /// Net map of the segment between two markers, acting on `spin` with the
    /// photon entering at `input` and leaving at `output`. Other spins stay ↑.
    pub fn segment_matrix(
        &self,
        begin: &str,
        end: &str,
        spin: usize,
        input: &str,
        output: &str,
        mode: &SimulationMode,
    ) -> Result<SegmentMatrix> {
        let elements = self.segment(begin, end)?;
        let basis = [
            (Polarization::R, false),
            (Polarization::R, true),
            (Polarization::L, false),
            (Polarization::L, true),
        ];
        let ground = SpinConfig::from_index(0, self.n_spins);
        let mut matrix = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (col, &(pol, down)) in basis.iter().enumerate() {
            let spins = SpinState::basis(ground.with_spin(spin, down));
            let state = HybridState::with_photon(pol, &Port::new(input), &spins, self.port_set())?;
            let out = self.apply(elements, &state, mode)?;
            if let Some((mode, _, _)) = out.iter().find(|(m, _, _)| m.port.name() != output) {
                return Err(Error::InconsistentCircuit(format!(
                    "segment leaks amplitude to port `{}`",
                    mode.port
                )));
            }
            for (row, &(p, d)) in basis.iter().enumerate() {
                let label = ground.with_spin(spin, d).to_string();
                matrix[row][col] = out.amplitude(p, output, &label);
            }
        }
        Ok(matrix)
    }

    /// Runs the circuit, enumerating every detector outcome.
    pub fn run(&self, spins: &SpinState, mode: &SimulationMode) -> Result<GateRunResult> {
        self.validate()?;
        let state = self.pre_measurement_state(spins, mode)?;
        let measured = state.measure_photon(&self.measurement.ports, self.measurement.basis)?;
        let mut outcomes = Vec::new();
        let mut success_probability = 0.0;
        let mut lost_probability = 0.0;
        for m in measured {
            match m.label {
                OutcomeLabel::NoClick => lost_probability += m.probability,
                OutcomeLabel::Click { port, outcome } => {
                    let detector = self
                        .detectors
                        .iter()
                        .find(|d| d.port == port && d.outcome == outcome)
                        .expect("validated detector coverage");
                    let corrected_state = match m.conditioned_state {
                        Some(mut s) => {
                            for c in &self.feed_forward[&detector.name] {
                                c.apply(&mut s)?;
                            }
                            Some(s)
                        }
                        None => None,
                    };
                    success_probability += m.probability;
                    outcomes.push(BranchResult {
                        detector: detector.name.clone(),
                        port,
                        outcome,
                        probability: m.probability,
                        corrected_state,
                    });
                }
            }
        }
        outcomes.sort_by(|a, b| a.detector.cmp(&b.detector));
        Ok(GateRunResult {
            gate: self.name,
            outcomes,
            success_probability,
            lost_probability,
        })
    }
}

fn apply_element(element: &Element, state: &HybridState, mode: &SimulationMode) -> Result<HybridState> {
    match element {
        Element::SpinHadamard { spin } => state.apply_spin_hadamard(*spin),
        Element::SigmaZ { spin, global_minus } => state.apply_sigma_z(*spin, *global_minus),
        Element::Hwp { port } => state.apply_hwp(port),
        Element::Cpbs { inputs, outputs } => {
            state.apply_cpbs([&inputs[0], &inputs[1]], [&outputs[0], &outputs[1]])
        }
        Element::PhaseShift { port, phase } => state.apply_phase_shift(port, *phase),
        Element::BeamSplitter { inputs, outputs } => {
            state.apply_bs([&inputs[0], &inputs[1]], [&outputs[0], &outputs[1]])
        }
        Element::Route { from, to } => state.apply_route(from, to),
        Element::Delay { .. } | Element::Marker { .. } => Ok(state.clone()),
        Element::Cavity { cavity, spin, faces } => match mode {
            SimulationMode::Ideal => state.apply_cavity_ideal(*spin, faces),
            SimulationMode::Lossy(coeffs) => {
                let c = coeffs.get(*cavity).ok_or_else(|| {
                    Error::InconsistentCircuit(format!("no coefficients for cavity {cavity}"))
                })?;
                state.apply_cavity_lossy(*spin, faces, c)
            }
        },
    }
}

/// Dense unitary acting on a spin register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateMatrix {
    pub dim: usize,
    /// Row-major entries.
    pub entries: Vec<Complex64>,
}

impl GateMatrix {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn apply(&self, state: &SpinState) -> SpinState {
        assert_eq!(state.amplitudes().len(), self.dim);
        let amps = (0..self.dim)
            .map(|r| {
                (0..self.dim)
                    .map(|c| self.get(r, c) * state.amplitudes()[c])
                    .sum()
            })
            .collect();
        SpinState::new(state.n_spins(), amps).expect("dimension checked")
    }

    pub fn mul(&self, other: &GateMatrix) -> GateMatrix {
        let n = self.dim;
        let entries = (0..n * n)
            .map(|i| (0..n).map(|k| self.get(i / n, k) * other.get(k, i % n)).sum())
            .collect();
        GateMatrix { dim: n, entries }
    }
}

/// I₂ ⊕ X (CNOT) or I₆ ⊕ X (Toffoli) in the basis ↑…↑, …, ↓…↓.
pub fn ideal_gate_matrix(gate: GateKind) -> GateMatrix {
    let dim = 1 << gate.n_spins();
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for row in 0..dim {
        let col = if row >= dim - 2 { (2 * dim - 3) - row } else { row };
        entries[row * dim + col] = Complex64::new(1.0, 0.0);
    }
    GateMatrix { dim, entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutBranch {
    pub outcome: PhotonOutcome,
    pub probability: f64,
    pub collapsed: Option<SpinState>,
}

/// Non-destructive spin readout with one R photon entering the top face of an
/// ideal cavity: R (transmitted) heralds ↑, L (reflected) heralds ↓.
pub fn spin_readout(spin: &SpinState) -> Result<[ReadoutBranch; 2]> {
    if spin.n_spins() != 1 {
        return Err(Error::InvalidInput(format!(
            "spin readout acts on one spin, got {}",
            spin.n_spins()
        )));
    }
    let ports = HybridState::port_set(&["probe", "transmitted", "reflected"]);
    let face = CavityFace::new("probe", Face::Top, "transmitted", "reflected");
    let state = HybridState::with_photon(Polarization::R, &"probe".into(), spin, ports)?
        .apply_cavity_ideal(0, &[face])?;
    let detect = ["transmitted".into(), "reflected".into()];
    let outcomes = state.measure_photon(&detect, MeasurementBasis::Circular)?;
    let branch = |outcome: PhotonOutcome| {
        let mut probability = 0.0;
        let mut collapsed = None;
        for m in &outcomes {
            if let OutcomeLabel::Click { outcome: o, .. } = &m.label {
                if *o == outcome && m.probability > 0.0 {
                    probability += m.probability;
                    collapsed = m.conditioned_state.clone();
                }
            }
        }
        ReadoutBranch {
            outcome,
            probability,
            collapsed,
        }
    };
    Ok([branch(PhotonOutcome::R), branch(PhotonOutcome::L)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn spins(label: &str) -> SpinState {
        SpinState::basis(SpinConfig::parse(label).unwrap())
    }

    #[test]
    fn circuits_validate() {
        build_cnot().validate().unwrap();
        build_toffoli().validate().unwrap();
    }

    #[test]
    fn validation_catches_unknown_ports() {
        let mut circuit = build_cnot();
        circuit.elements.push(Element::Hwp { port: "nowhere".into() });
        assert_eq!(circuit.validate(), Err(Error::UnknownPort("nowhere".into())));
        let mut circuit = build_toffoli();
        circuit.feed_forward.remove("D3");
        assert!(matches!(circuit.validate(), Err(Error::InconsistentCircuit(_))));
    }

    #[test]
    fn cnot_truth_table_down_down() {
        let result = build_cnot().run(&spins("dd"), &SimulationMode::Ideal).unwrap();
        assert!((result.success_probability - 1.0).abs() < 1e-12);
        let target = spins("du");
        for b in result.outcomes.iter().filter(|b| b.probability > 1e-12) {
            assert!(b.corrected_state.as_ref().unwrap().equals_up_to_phase(&target));
        }
    }

    #[test]
    fn toffoli_truth_table_samples() {
        let circuit = build_toffoli();
        for (input, expected) in [("ddd", "ddu"), ("udd", "udd"), ("ddu", "ddd"), ("uuu", "uuu")] {
            let result = circuit.run(&spins(input), &SimulationMode::Ideal).unwrap();
            assert!((result.success_probability - 1.0).abs() < 1e-12);
            for b in result.outcomes.iter().filter(|b| b.probability > 1e-12) {
                assert!(
                    b.corrected_state.as_ref().unwrap().equals_up_to_phase(&spins(expected)),
                    "{input} via {}",
                    b.detector
                );
            }
        }
    }

    #[test]
    fn wrong_spin_count_is_rejected() {
        assert!(build_cnot().run(&spins("ddd"), &SimulationMode::Ideal).is_err());
        let short = SimulationMode::Lossy(vec![ScatteringCoefficients::IDEAL]);
        assert!(build_cnot().run(&spins("dd"), &short).is_err());
    }

    #[test]
    fn gate_matrices() {
        let cnot = ideal_gate_matrix(GateKind::Cnot);
        assert_eq!(cnot.apply(&spins("du")), spins("dd"));
        assert_eq!(cnot.apply(&spins("ud")), spins("ud"));
        let sq = cnot.mul(&cnot);
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(sq.get(r, col), c(if r == col { 1.0 } else { 0.0 }));
            }
        }
        let toffoli = ideal_gate_matrix(GateKind::Toffoli);
        assert_eq!(toffoli.apply(&spins("ddd")), spins("ddu"));
        assert_eq!(toffoli.apply(&spins("dud")), spins("dud"));
    }

    #[test]
    fn readout_probabilities() {
        let [r, l] = spin_readout(&spins("u")).unwrap();
        assert!((r.probability - 1.0).abs() < 1e-15 && l.probability == 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let [r, l] = spin_readout(&SpinState::new(1, vec![c(h), c(h)]).unwrap()).unwrap();
        assert!((r.probability - 0.5).abs() < 1e-15 && (l.probability - 0.5).abs() < 1e-15);
        let [r, l] = spin_readout(&SpinState::new(1, vec![c(0.6), c(0.8)]).unwrap()).unwrap();
        assert!((r.probability - 0.36).abs() < 1e-15);
        assert!((l.probability - 0.64).abs() < 1e-15);
        assert!(r.collapsed.unwrap().equals_up_to_phase(&spins("u")));
        assert!(l.collapsed.unwrap().equals_up_to_phase(&spins("d")));
    }

    #[test]
    fn circuit_json_round_trip() {
        let circuit = build_toffoli();
        let json = serde_json::to_string(&circuit).unwrap();
        let back: CircuitSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, circuit);
    }
}
