//! Joint state of one flying photon and a register of electron spins.
//!
//! Basis states are labelled by photon polarization, the spatial mode (port)
//! the photon occupies, and the spin configuration. The propagation direction
//! of the photon is not stored: every cavity element declares which face each
//! of its input ports touches, and the face fixes the direction.
//!
//! Photon loss at a leaky cavity is tracked as a non-negative weight per spin
//! configuration. A lost photon carries no phase reference, so the lost sector
//! never interferes with itself or with the surviving branch.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::ScatteringCoefficients;
use crate::error::{Error, Result};
use crate::spin::{check_spin, SpinConfig, SpinState};

/// Amplitudes below this magnitude are dropped after every operation.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Name of a spatial mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Port(Arc<str>);

impl Port {
    pub fn new(name: &str) -> Self {
        Self(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Port {
    fn from(name: &str) -> Self {
        Self::new(name)
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Circular polarization in a fixed laboratory frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    R,
    L,
}

impl Polarization {
    pub fn flipped(self) -> Self {
        match self {
            Polarization::R => Polarization::L,
            Polarization::L => Polarization::R,
        }
    }
}

/// Side of a double-sided cavity a photon enters through.
///
/// A photon entering the top face travels downwards (↓), one entering the
/// bottom face travels upwards (↑).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Top,
    Bottom,
}

/// Photon spin projection s_z for a given polarization and entry face.
///
/// R↑ and L↓ carry s_z = +1, R↓ and L↑ carry s_z = −1.
fn photon_spin_up(polarization: Polarization, face: Face) -> bool {
    matches!(
        (polarization, face),
        (Polarization::R, Face::Bottom) | (Polarization::L, Face::Top)
    )
}

/// One input face of a cavity and the modes its scattered light leaves through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityFace {
    pub input: Port,
    pub face: Face,
    /// Mode of light that crosses the cavity and exits the opposite face.
    pub transmit: Port,
    /// Mode of light sent back out of the entry face.
    pub reflect: Port,
}

impl CavityFace {
    pub fn new(input: &str, face: Face, transmit: &str, reflect: &str) -> Self {
        Self {
            input: input.into(),
            face,
            transmit: transmit.into(),
            reflect: reflect.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PhotonMode {
    pub polarization: Polarization,
    pub port: Port,
}

impl PhotonMode {
    pub fn new(polarization: Polarization, port: &Port) -> Self {
        Self {
            polarization,
            port: port.clone(),
        }
    }
}

/// Measurement basis for the photon polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementBasis {
    /// {|R⟩, |L⟩}
    Circular,
    /// {|+⟩, |−⟩} with |±⟩ = (|R⟩ ± |L⟩)/√2.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhotonOutcome {
    R,
    L,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl MeasurementBasis {
    pub fn outcomes(self) -> [PhotonOutcome; 2] {
        match self {
            MeasurementBasis::Circular => [PhotonOutcome::R, PhotonOutcome::L],
            MeasurementBasis::Diagonal => [PhotonOutcome::Plus, PhotonOutcome::Minus],
        }
    }
}

impl PhotonOutcome {
    /// ⟨outcome|R⟩ and ⟨outcome|L⟩.
    fn projection(self) -> (f64, f64) {
        match self {
            PhotonOutcome::R => (1.0, 0.0),
            PhotonOutcome::L => (0.0, 1.0),
            PhotonOutcome::Plus => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            PhotonOutcome::Minus => (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        }
    }
}

impl fmt::Display for PhotonOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhotonOutcome::R => "R",
            PhotonOutcome::L => "L",
            PhotonOutcome::Plus => "+",
            PhotonOutcome::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeLabel {
    Click { port: Port, outcome: PhotonOutcome },
    /// The photon was lost and no detector fires.
    NoClick,
}

/// One branch of a complete projective photon measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    pub label: OutcomeLabel,
    pub probability: f64,
    /// Normalized spin state conditioned on this outcome; `None` for branches
    /// with zero probability and for the no-click branch.
    pub conditioned_state: Option<SpinState>,
}

/// One line of the deterministic state dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEntry {
    pub polarization: Option<Polarization>,
    pub port: Option<Port>,
    pub spins: String,
    pub re: f64,
    pub im: f64,
}

/// Sparse photon ⊗ spin state, possibly sub-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    n_spins: usize,
    ports: Arc<BTreeSet<Port>>,
    amplitudes: BTreeMap<(PhotonMode, SpinConfig), Complex64>,
    lost: BTreeMap<SpinConfig, f64>,
}

type Contribution = (PhotonMode, SpinConfig, Complex64);

impl HybridState {
    /// Empty state on a declared port set.
    pub fn vacuum(n_spins: usize, ports: Arc<BTreeSet<Port>>) -> Result<Self> {
        if n_spins == 0 || n_spins > SpinConfig::MAX_SPINS {
            return Err(Error::InvalidInput(format!("unsupported spin count {n_spins}")));
        }
        Ok(Self {
            n_spins,
            ports,
            amplitudes: BTreeMap::new(),
            lost: BTreeMap::new(),
        })
    }

    /// |polarization⟩_port ⊗ |spins⟩.
    pub fn with_photon(
        polarization: Polarization,
        port: &Port,
        spins: &SpinState,
        ports: Arc<BTreeSet<Port>>,
    ) -> Result<Self> {
        let mut state = Self::vacuum(spins.n_spins(), ports)?;
        state.check_port(port)?;
        for (config, amp) in spins.iter() {
            state.add(PhotonMode::new(polarization, port), config, amp);
        }
        state.prune();
        Ok(state)
    }

    pub fn port_set(ports: &[&str]) -> Arc<BTreeSet<Port>> {
        Arc::new(ports.iter().map(|&p| Port::new(p)).collect())
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn ports(&self) -> &Arc<BTreeSet<Port>> {
        &self.ports
    }

    pub fn amplitude(&self, polarization: Polarization, port: &str, spins: &str) -> Complex64 {
        let key = (
            PhotonMode::new(polarization, &Port::new(port)),
            SpinConfig::parse(spins).expect("valid spin label"),
        );
        self.amplitudes.get(&key).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PhotonMode, SpinConfig, Complex64)> {
        self.amplitudes.iter().map(|((m, s), a)| (m, *s, *a))
    }

    /// Number of stored (non-pruned) photon-present amplitudes.
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Lost-photon weight per spin configuration.
    pub fn lost_sector(&self) -> &BTreeMap<SpinConfig, f64> {
        &self.lost
    }

    /// Ports currently holding photon amplitude.
    pub fn occupied_ports(&self) -> BTreeSet<Port> {
        self.amplitudes.keys().map(|(m, _)| m.port.clone()).collect()
    }

    /// Adds `amp` to a basis amplitude.
    pub fn add(&mut self, mode: PhotonMode, spins: SpinConfig, amp: Complex64) {
        debug_assert_eq!(spins.n_spins(), self.n_spins);
        *self.amplitudes.entry((mode, spins)).or_default() += amp;
    }

    fn check_port(&self, port: &Port) -> Result<()> {
        if !self.ports.contains(port) {
            return Err(Error::UnknownPort(port.name().to_owned()));
        }
        Ok(())
    }

    fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }

    /// Squared norm of the photon-present sector.
    pub fn present_norm_sq(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn lost_weight(&self) -> f64 {
        self.lost.values().sum()
    }

    /// Total squared norm, lost sector included.
    pub fn norm_sq(&self) -> f64 {
        self.present_norm_sq() + self.lost_weight()
    }

    /// ⟨self|other⟩ over the photon-present sector.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        if self.n_spins != other.n_spins {
            return Err(Error::InvalidInput(format!(
                "spin count mismatch: {} vs {}",
                self.n_spins, other.n_spins
            )));
        }
        let (small, large, conj_small) = if self.amplitudes.len() <= other.amplitudes.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut sum = Complex64::new(0.0, 0.0);
        for (key, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(key) {
                sum += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(sum)
    }

    /// Rescales to unit total norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm_sq = self.norm_sq();
        if !(norm_sq > 0.0) {
            return Err(Error::DegenerateState);
        }
        let scale = norm_sq.sqrt().recip();
        let mut out = self.clone();
        out.amplitudes.values_mut().for_each(|a| *a *= scale);
        out.lost.values_mut().for_each(|w| *w *= scale * scale);
        Ok(out)
    }

    /// Photon-present branch renormalized to unit norm, lost sector dropped.
    pub fn success_conditioned(&self) -> Result<Self> {
        let mut out = self.clone();
        out.lost.clear();
        out.normalized()
    }

    /// Multiplies every amplitude by `factor` (the lost weight by |factor|²).
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.amplitudes.values_mut().for_each(|a| *a *= factor);
        out.lost.values_mut().for_each(|w| *w *= factor.norm_sqr());
        out.prune();
        out
    }

    /// |⟨a|b⟩| ≥ (1 − 10⁻¹⁰)‖a‖‖b‖ over the photon-present sector.
    pub fn equals_up_to_phase(&self, other: &Self) -> bool {
        match self.inner_product(other) {
            Ok(overlap) => {
                overlap.norm()
                    >= (1.0 - 1e-10) * (self.present_norm_sq() * other.present_norm_sq()).sqrt()
            }
            Err(_) => false,
        }
    }

    /// Largest amplitude difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let keys: BTreeSet<_> = self.amplitudes.keys().chain(other.amplitudes.keys()).collect();
        keys.into_iter()
            .map(|k| {
                let a = self.amplitudes.get(k).copied().unwrap_or_default();
                let b = other.amplitudes.get(k).copied().unwrap_or_default();
                (a - b).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Rebuilds the photon-present sector by mapping every basis amplitude
    /// through `f`. The lost sector is carried over unchanged.
    fn map_basis<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&PhotonMode, SpinConfig, Complex64, &mut Vec<Contribution>),
    {
        let mut out = Self {
            n_spins: self.n_spins,
            ports: self.ports.clone(),
            amplitudes: BTreeMap::new(),
            lost: self.lost.clone(),
        };
        let mut buf = Vec::with_capacity(4);
        for ((mode, spins), &amp) in &self.amplitudes {
            buf.clear();
            f(mode, *spins, amp, &mut buf);
            for (m, s, a) in buf.drain(..) {
                out.add(m, s, a);
            }
        }
        out.prune();
        out
    }

    /// Output ports of a port-moving element must be empty unless they are
    /// also inputs of the same element.
    fn ensure_vacant(&self, inputs: &[&Port], outputs: &[&Port]) -> Result<()> {
        for port in inputs.iter().chain(outputs) {
            self.check_port(port)?;
        }
        for out in outputs {
            if inputs.contains(out) {
                continue;
            }
            if self.amplitudes.keys().any(|(m, _)| &m.port == *out) {
                return Err(Error::InconsistentCircuit(format!(
                    "output port `{out}` already carries photon amplitude"
                )));
            }
        }
        Ok(())
    }

    /// Hadamard on one spin: |↑⟩ → (|↑⟩+|↓⟩)/√2, |↓⟩ → (|↑⟩−|↓⟩)/√2.
    pub fn apply_spin_hadamard(&self, spin: usize) -> Result<Self> {
        check_spin(spin, self.n_spins)?;
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let mut out = self.map_basis(|mode, spins, amp, buf| {
            let up = spins.with_spin(spin, false);
            let down = spins.with_spin(spin, true);
            let sign = if spins.is_down(spin) { -1.0 } else { 1.0 };
            buf.push((mode.clone(), up, amp * h));
            buf.push((mode.clone(), down, amp * h * sign));
        });
        // The lost sector holds populations only; each one spreads evenly.
        if !out.lost.is_empty() {
            let mut lost = BTreeMap::new();
            for (spins, w) in &self.lost {
                for s in [spins.with_spin(spin, false), spins.with_spin(spin, true)] {
                    *lost.entry(s).or_insert(0.0) += w / 2.0;
                }
            }
            out.lost = lost;
        }
        Ok(out)
    }

    /// σ_z = |↑⟩⟨↑| − |↓⟩⟨↓| on one spin, or −σ_z when `global_minus` is set.
    pub fn apply_sigma_z(&self, spin: usize, global_minus: bool) -> Result<Self> {
        check_spin(spin, self.n_spins)?;
        Ok(self.map_basis(|mode, spins, amp, buf| {
            let flip = spins.is_down(spin) != global_minus;
            buf.push((mode.clone(), spins, if flip { -amp } else { amp }));
        }))
    }

    /// Half-wave plate at 22.5°: |R⟩ → (|R⟩+|L⟩)/√2, |L⟩ → (|R⟩−|L⟩)/√2.
    pub fn apply_hwp(&self, port: &Port) -> Result<Self> {
        self.check_port(port)?;
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Ok(self.map_basis(|mode, spins, amp, buf| {
            if &mode.port != port {
                buf.push((mode.clone(), spins, amp));
                return;
            }
            let sign = match mode.polarization {
                Polarization::R => 1.0,
                Polarization::L => -1.0,
            };
            buf.push((PhotonMode::new(Polarization::R, port), spins, amp * h));
            buf.push((PhotonMode::new(Polarization::L, port), spins, amp * h * sign));
        }))
    }

    /// Polarizing beam splitter in the circular basis: R is transmitted
    /// (`inputs[k]` → `outputs[k]`), L is reflected (`inputs[k]` → `outputs[1-k]`).
    pub fn apply_cpbs(&self, inputs: [&Port; 2], outputs: [&Port; 2]) -> Result<Self> {
        check_distinct("CPBS", inputs, outputs)?;
        self.ensure_vacant(&inputs, &outputs)?;
        Ok(self.map_basis(|mode, spins, amp, buf| {
            let target = match inputs.iter().position(|p| **p == mode.port) {
                None => mode.port.clone(),
                Some(k) => match mode.polarization {
                    Polarization::R => outputs[k].clone(),
                    Polarization::L => outputs[1 - k].clone(),
                },
            };
            buf.push((PhotonMode::new(mode.polarization, &target), spins, amp));
        }))
    }

    /// Multiplies amplitudes on `port` by exp(i·phase).
    pub fn apply_phase_shift(&self, port: &Port, phase: f64) -> Result<Self> {
        self.check_port(port)?;
        let factor = Complex64::from_polar(1.0, phase);
        Ok(self.map_basis(|mode, spins, amp, buf| {
            let amp = if &mode.port == port { amp * factor } else { amp };
            buf.push((mode.clone(), spins, amp));
        }))
    }

    /// 50:50 beam splitter: |x⟩_{in₀} → (|x⟩_{out₀} + |x⟩_{out₁})/√2 and
    /// |x⟩_{in₁} → (|x⟩_{out₀} − |x⟩_{out₁})/√2.
    pub fn apply_bs(&self, inputs: [&Port; 2], outputs: [&Port; 2]) -> Result<Self> {
        check_distinct("BS", inputs, outputs)?;
        self.ensure_vacant(&inputs, &outputs)?;
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Ok(self.map_basis(|mode, spins, amp, buf| {
            match inputs.iter().position(|p| **p == mode.port) {
                None => buf.push((mode.clone(), spins, amp)),
                Some(k) => {
                    let sign = if k == 0 { 1.0 } else { -1.0 };
                    buf.push((PhotonMode::new(mode.polarization, outputs[0]), spins, amp * h));
                    buf.push((
                        PhotonMode::new(mode.polarization, outputs[1]),
                        spins,
                        amp * h * sign,
                    ));
                }
            }
        }))
    }

    /// Moves all amplitude from one mode to another (free propagation).
    pub fn apply_route(&self, from: &Port, to: &Port) -> Result<Self> {
        self.ensure_vacant(&[from], &[to])?;
        Ok(self.map_basis(|mode, spins, amp, buf| {
            let port = if &mode.port == from { to } else { &mode.port };
            buf.push((PhotonMode::new(mode.polarization, port), spins, amp));
        }))
    }

    /// Scattering off an ideal QD-cavity system.
    ///
    /// A photon whose s_z matches the spin (s_z = +1 with ↑, s_z = −1 with ↓)
    /// is reflected with its polarization flipped; otherwise it is
    /// transmitted with a π phase.
    pub fn apply_cavity_ideal(&self, spin: usize, faces: &[CavityFace]) -> Result<Self> {
        self.scatter(spin, faces, |coupled, reflect, transmit| {
            if coupled {
                reflect.push(Complex64::new(1.0, 0.0));
            } else {
                transmit.push(Complex64::new(-1.0, 0.0));
            }
        })
    }

    /// Scattering off a leaky QD-cavity system.
    ///
    /// Coupled photons are reflected with amplitude r and transmitted with −t,
    /// uncoupled photons are transmitted with t₀ and reflected with −r₀. At
    /// resonance (t, t₀ ≤ 0 ≤ r, r₀) these are |r|, |t|, −|t₀|, −|r₀|. The norm
    /// removed from the photon-present sector is booked in the lost sector.
    pub fn apply_cavity_lossy(
        &self,
        spin: usize,
        faces: &[CavityFace],
        coeffs: &ScatteringCoefficients,
    ) -> Result<Self> {
        coeffs.check_passive()?;
        let c = *coeffs;
        self.scatter(spin, faces, move |coupled, reflect, transmit| {
            if coupled {
                reflect.push(c.r_hot);
                transmit.push(-c.t_hot);
            } else {
                transmit.push(c.t_cold);
                reflect.push(-c.r_cold);
            }
        })
    }

    fn scatter<F>(&self, spin: usize, faces: &[CavityFace], amplitudes: F) -> Result<Self>
    where
        F: Fn(bool, &mut Vec<Complex64>, &mut Vec<Complex64>),
    {
        check_spin(spin, self.n_spins)?;
        let inputs: Vec<&Port> = faces.iter().map(|f| &f.input).collect();
        let outputs: Vec<&Port> = faces.iter().flat_map(|f| [&f.transmit, &f.reflect]).collect();
        for (i, a) in inputs.iter().enumerate() {
            if inputs[..i].contains(a) {
                return Err(Error::InconsistentCircuit(format!(
                    "cavity input port `{a}` declared twice"
                )));
            }
            if outputs.contains(a) {
                return Err(Error::InconsistentCircuit(format!(
                    "cavity port `{a}` used as both input and output"
                )));
            }
        }
        self.ensure_vacant(&inputs, &outputs)?;

        let mut untouched = self.clone();
        untouched.amplitudes.retain(|(m, _), _| !inputs.contains(&&m.port));
        let mut scattered = BTreeMap::<(PhotonMode, SpinConfig), Complex64>::new();
        let mut in_norm = BTreeMap::<SpinConfig, f64>::new();
        let (mut reflect, mut transmit) = (Vec::new(), Vec::new());
        for ((mode, spins), &amp) in &self.amplitudes {
            let Some(face) = faces.iter().find(|f| f.input == mode.port) else {
                continue;
            };
            *in_norm.entry(*spins).or_default() += amp.norm_sqr();
            let coupled = photon_spin_up(mode.polarization, face.face) != spins.is_down(spin);
            reflect.clear();
            transmit.clear();
            amplitudes(coupled, &mut reflect, &mut transmit);
            for r in &reflect {
                let key = (PhotonMode::new(mode.polarization.flipped(), &face.reflect), *spins);
                *scattered.entry(key).or_default() += amp * r;
            }
            for t in &transmit {
                let key = (PhotonMode::new(mode.polarization, &face.transmit), *spins);
                *scattered.entry(key).or_default() += amp * t;
            }
        }
        let mut out_norm = BTreeMap::<SpinConfig, f64>::new();
        for ((_, spins), amp) in &scattered {
            *out_norm.entry(*spins).or_default() += amp.norm_sqr();
        }
        for (spins, n_in) in in_norm {
            let n_out = out_norm.get(&spins).copied().unwrap_or(0.0);
            let deficit = n_in - n_out;
            // Deficits at rounding level come from lossless scattering.
            if deficit > 16.0 * f64::EPSILON * n_in {
                *untouched.lost.entry(spins).or_insert(0.0) += deficit;
            }
        }
        for ((mode, spins), amp) in scattered {
            untouched.add(mode, spins, amp);
        }
        untouched.prune();
        Ok(untouched)
    }

    /// Complete projective measurement of the photon on `ports`.
    ///
    /// Returns one outcome per (port, basis label), in the order given, followed
    /// by the no-click outcome carrying the lost weight.
    pub fn measure_photon(
        &self,
        ports: &[Port],
        basis: MeasurementBasis,
    ) -> Result<Vec<MeasurementOutcome>> {
        for port in ports {
            self.check_port(port)?;
        }
        if let Some((mode, _)) = self.amplitudes.keys().find(|(m, _)| !ports.contains(&m.port)) {
            return Err(Error::InconsistentCircuit(format!(
                "photon amplitude on unmeasured port `{}`",
                mode.port
            )));
        }
        let mut outcomes = Vec::with_capacity(2 * ports.len() + 1);
        for port in ports {
            for outcome in basis.outcomes() {
                let (pr, pl) = outcome.projection();
                let mut spins = SpinState::zero(self.n_spins);
                for ((mode, config), amp) in &self.amplitudes {
                    if &mode.port != port {
                        continue;
                    }
                    let weight = match mode.polarization {
                        Polarization::R => pr,
                        Polarization::L => pl,
                    };
                    let current = spins.amplitude(*config);
                    spins.set(*config, current + amp * weight);
                }
                let probability = spins.norm_sq();
                let conditioned_state = if probability > 0.0 {
                    Some(spins.normalized()?)
                } else {
                    None
                };
                outcomes.push(MeasurementOutcome {
                    label: OutcomeLabel::Click {
                        port: port.clone(),
                        outcome,
                    },
                    probability,
                    conditioned_state,
                });
            }
        }
        outcomes.push(MeasurementOutcome {
            label: OutcomeLabel::NoClick,
            probability: self.lost_weight(),
            conditioned_state: None,
        });
        Ok(outcomes)
    }

    /// Deterministic listing of all amplitudes, sorted by (polarization, port,
    /// spins), followed by the lost sector as real weights.
    pub fn dump(&self) -> Vec<DumpEntry> {
        let mut entries: Vec<DumpEntry> = self
            .amplitudes
            .iter()
            .map(|((mode, spins), amp)| DumpEntry {
                polarization: Some(mode.polarization),
                port: Some(mode.port.clone()),
                spins: spins.to_string(),
                re: amp.re,
                im: amp.im,
            })
            .collect();
        entries.sort_by(|a, b| {
            (a.polarization, &a.port, &a.spins).cmp(&(b.polarization, &b.port, &b.spins))
        });
        entries.extend(self.lost.iter().map(|(spins, w)| DumpEntry {
            polarization: None,
            port: None,
            spins: spins.to_string(),
            re: *w,
            im: 0.0,
        }));
        entries
    }

    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for e in self.dump() {
            match (e.polarization, &e.port) {
                (Some(p), Some(port)) => {
                    out.push_str(&format!("{p:?} {port} {} {:+.12e} {:+.12e}\n", e.spins, e.re, e.im))
                }
                _ => out.push_str(&format!("LOST {} {:.12e}\n", e.spins, e.re)),
            }
        }
        out
    }
}

fn check_distinct(element: &str, inputs: [&Port; 2], outputs: [&Port; 2]) -> Result<()> {
    if inputs[0] == inputs[1] || outputs[0] == outputs[1] {
        return Err(Error::InconsistentCircuit(format!(
            "{element} needs two distinct inputs and two distinct outputs"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn ports() -> Arc<BTreeSet<Port>> {
        HybridState::port_set(&["a", "b", "x", "y", "t", "r", "4", "2~", "5", "3~"])
    }

    fn single(pol: Polarization, port: &str, spins: &str) -> HybridState {
        let s = SpinState::basis(SpinConfig::parse(spins).unwrap());
        HybridState::with_photon(pol, &Port::new(port), &s, ports()).unwrap()
    }

    fn top(input: &str) -> CavityFace {
        CavityFace::new(input, Face::Top, "t", "r")
    }

    #[test]
    fn spin_hadamard_maps_up_to_plus() {
        let s = single(Polarization::R, "a", "u").apply_spin_hadamard(0).unwrap();
        assert!((s.amplitude(Polarization::R, "a", "u") - c(FRAC_1_SQRT_2)).norm() < EPS);
        assert!((s.amplitude(Polarization::R, "a", "d") - c(FRAC_1_SQRT_2)).norm() < EPS);
        let back = s.apply_spin_hadamard(0).unwrap();
        assert!(back.max_abs_diff(&single(Polarization::R, "a", "u")) < EPS);
        assert!(s.apply_spin_hadamard(1).is_err());
    }

    #[test]
    fn minus_sigma_z_signs() {
        let up = single(Polarization::R, "a", "u").apply_sigma_z(0, true).unwrap();
        assert_eq!(up.amplitude(Polarization::R, "a", "u"), c(-1.0));
        let down = single(Polarization::R, "a", "d").apply_sigma_z(0, true).unwrap();
        assert_eq!(down.amplitude(Polarization::R, "a", "d"), c(1.0));
    }

    #[test]
    fn hwp_acts_on_its_port_only() {
        let mut s = single(Polarization::R, "a", "u");
        s.add(PhotonMode::new(Polarization::L, &"b".into()), SpinConfig::parse("u").unwrap(), c(0.5));
        let out = s.apply_hwp(&"a".into()).unwrap();
        assert!((out.amplitude(Polarization::L, "a", "u") - c(FRAC_1_SQRT_2)).norm() < EPS);
        assert_eq!(out.amplitude(Polarization::L, "b", "u"), c(0.5));
        // (|R⟩ − |L⟩)/√2 → |L⟩
        let mut minus = HybridState::vacuum(1, ports()).unwrap();
        let u = SpinConfig::parse("u").unwrap();
        minus.add(PhotonMode::new(Polarization::R, &"a".into()), u, c(FRAC_1_SQRT_2));
        minus.add(PhotonMode::new(Polarization::L, &"a".into()), u, c(-FRAC_1_SQRT_2));
        let l = minus.apply_hwp(&"a".into()).unwrap();
        assert!(l.max_abs_diff(&single(Polarization::L, "a", "u")) < EPS);
        assert_eq!(s.apply_hwp(&"zz".into()), Err(Error::UnknownPort("zz".into())));
    }

    #[test]
    fn cpbs_routes_by_polarization() {
        let (a, b, x, y) = (Port::new("a"), Port::new("b"), Port::new("x"), Port::new("y"));
        let r = single(Polarization::R, "a", "u").apply_cpbs([&a, &b], [&x, &y]).unwrap();
        assert_eq!(r.amplitude(Polarization::R, "x", "u"), c(1.0));
        let l = single(Polarization::L, "a", "u").apply_cpbs([&a, &b], [&x, &y]).unwrap();
        assert_eq!(l.amplitude(Polarization::L, "y", "u"), c(1.0));
        let l2 = single(Polarization::L, "b", "u").apply_cpbs([&a, &b], [&x, &y]).unwrap();
        assert_eq!(l2.amplitude(Polarization::L, "x", "u"), c(1.0));
        assert!(r.apply_cpbs([&a, &a], [&x, &y]).is_err());
    }

    #[test]
    fn phase_shift_pi() {
        let s = single(Polarization::R, "a", "u");
        let p = s.apply_phase_shift(&"a".into(), std::f64::consts::PI).unwrap();
        assert!((p.amplitude(Polarization::R, "a", "u") + c(1.0)).norm() < EPS);
        let pp = p.apply_phase_shift(&"a".into(), std::f64::consts::PI).unwrap();
        assert!(pp.max_abs_diff(&s) < EPS);
        assert_eq!(s.apply_phase_shift(&"a".into(), 0.0).unwrap(), s);
    }

    #[test]
    fn beam_splitter_rules() {
        let (p4, p2, p5, p3) = (Port::new("4"), Port::new("2~"), Port::new("5"), Port::new("3~"));
        let out = single(Polarization::R, "4", "u").apply_bs([&p4, &p2], [&p5, &p3]).unwrap();
        assert!((out.amplitude(Polarization::R, "5", "u") - c(FRAC_1_SQRT_2)).norm() < EPS);
        assert!((out.amplitude(Polarization::R, "3~", "u") - c(FRAC_1_SQRT_2)).norm() < EPS);
        let out = single(Polarization::L, "2~", "u").apply_bs([&p4, &p2], [&p5, &p3]).unwrap();
        assert!((out.amplitude(Polarization::L, "5", "u") - c(FRAC_1_SQRT_2)).norm() < EPS);
        assert!((out.amplitude(Polarization::L, "3~", "u") + c(FRAC_1_SQRT_2)).norm() < EPS);
        // constructive interference into port 5
        let sum = single(Polarization::R, "4", "u").scaled(c(FRAC_1_SQRT_2));
        let mut sum = sum;
        sum.add(PhotonMode::new(Polarization::R, &p2), SpinConfig::parse("u").unwrap(), c(FRAC_1_SQRT_2));
        let out = sum.apply_bs([&p4, &p2], [&p5, &p3]).unwrap();
        assert!(out.max_abs_diff(&single(Polarization::R, "5", "u")) < EPS);
    }

    #[test]
    fn ideal_cavity_selection_rules() {
        // R entering the top face travels down: s_z = −1, couples to ↓.
        let up = single(Polarization::R, "a", "u").apply_cavity_ideal(0, &[top("a")]).unwrap();
        assert_eq!(up.amplitude(Polarization::R, "t", "u"), c(-1.0));
        let down = single(Polarization::R, "a", "d").apply_cavity_ideal(0, &[top("a")]).unwrap();
        assert_eq!(down.amplitude(Polarization::L, "r", "d"), c(1.0));
        // Full table, entering from the bottom too.
        let cases = [
            (Polarization::R, Face::Bottom, "u", Polarization::L, "r", 1.0),
            (Polarization::L, Face::Bottom, "u", Polarization::L, "t", -1.0),
            (Polarization::L, Face::Top, "u", Polarization::R, "r", 1.0),
            (Polarization::R, Face::Bottom, "d", Polarization::R, "t", -1.0),
            (Polarization::L, Face::Bottom, "d", Polarization::R, "r", 1.0),
            (Polarization::L, Face::Top, "d", Polarization::L, "t", -1.0),
        ];
        for (pin, face, spin, pout, port, amp) in cases {
            let face = CavityFace::new("a", face, "t", "r");
            let out = single(pin, "a", spin).apply_cavity_ideal(0, &[face]).unwrap();
            assert_eq!(out.amplitude(pout, port, spin), c(amp), "{pin:?} {spin}");
        }
    }

    #[test]
    fn spin_readout_transformation() {
        let spins = SpinState::new(1, vec![c(0.6), c(0.8)]).unwrap();
        let s = HybridState::with_photon(Polarization::R, &"a".into(), &spins, ports()).unwrap();
        let out = s.apply_cavity_ideal(0, &[top("a")]).unwrap();
        assert!((out.amplitude(Polarization::R, "t", "u") + c(0.6)).norm() < EPS);
        assert!((out.amplitude(Polarization::L, "r", "d") - c(0.8)).norm() < EPS);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn lossy_cavity_rules_and_bookkeeping() {
        let coeffs = ScatteringCoefficients::from_real(0.9, -0.05, 0.1, -0.85);
        let down = single(Polarization::R, "a", "d")
            .apply_cavity_lossy(0, &[top("a")], &coeffs)
            .unwrap();
        assert!((down.amplitude(Polarization::L, "r", "d") - c(0.9)).norm() < EPS);
        assert!((down.amplitude(Polarization::R, "t", "d") - c(0.05)).norm() < EPS);
        assert!((down.lost_weight() - (1.0 - 0.81 - 0.0025)).abs() < EPS);
        let up = single(Polarization::R, "a", "u")
            .apply_cavity_lossy(0, &[top("a")], &coeffs)
            .unwrap();
        assert!((up.amplitude(Polarization::R, "t", "u") + c(0.85)).norm() < EPS);
        assert!((up.amplitude(Polarization::L, "r", "u") + c(0.1)).norm() < EPS);
        assert!((up.norm_sq() - 1.0).abs() < EPS);

        let bad = ScatteringCoefficients::from_real(1.0, -0.5, 0.0, -1.0);
        assert!(matches!(
            single(Polarization::R, "a", "u").apply_cavity_lossy(0, &[top("a")], &bad),
            Err(Error::InvalidCoefficients { .. })
        ));
    }

    #[test]
    fn lossy_with_ideal_coefficients_is_ideal() {
        for spin in ["u", "d"] {
            for pol in [Polarization::R, Polarization::L] {
                let s = single(pol, "a", spin);
                let ideal = s.apply_cavity_ideal(0, &[top("a")]).unwrap();
                let lossy = s
                    .apply_cavity_lossy(0, &[top("a")], &ScatteringCoefficients::IDEAL)
                    .unwrap();
                assert_eq!(ideal, lossy);
            }
        }
    }

    #[test]
    fn cavity_rejects_occupied_outputs() {
        let mut s = single(Polarization::R, "a", "u");
        s.add(PhotonMode::new(Polarization::R, &"t".into()), SpinConfig::parse("u").unwrap(), c(0.1));
        assert!(matches!(
            s.apply_cavity_ideal(0, &[top("a")]),
            Err(Error::InconsistentCircuit(_))
        ));
        assert!(s.apply_cavity_ideal(0, &[CavityFace::new("a", Face::Top, "a", "r")]).is_err());
        assert!(single(Polarization::R, "a", "u").apply_cavity_ideal(3, &[top("a")]).is_err());
    }

    #[test]
    fn measurement_probabilities() {
        let mut s = HybridState::vacuum(1, ports()).unwrap();
        let u = SpinConfig::parse("u").unwrap();
        s.add(PhotonMode::new(Polarization::R, &"a".into()), u, c(FRAC_1_SQRT_2));
        s.add(PhotonMode::new(Polarization::L, &"a".into()), u, c(FRAC_1_SQRT_2));
        let out = s.measure_photon(&["a".into()], MeasurementBasis::Circular).unwrap();
        assert_eq!(out.len(), 3);
        assert!((out[0].probability - 0.5).abs() < EPS);
        assert!((out[1].probability - 0.5).abs() < EPS);
        assert_eq!(out[2].label, OutcomeLabel::NoClick);
        let cond = out[0].conditioned_state.as_ref().unwrap();
        assert!((cond.amplitude(u) - c(1.0)).norm() < EPS);

        let d = SpinConfig::parse("d").unwrap();
        let mut p = HybridState::vacuum(1, ports()).unwrap();
        p.add(PhotonMode::new(Polarization::R, &"a".into()), d, c(FRAC_1_SQRT_2));
        p.add(PhotonMode::new(Polarization::L, &"a".into()), d, c(FRAC_1_SQRT_2));
        let out = p.measure_photon(&["a".into()], MeasurementBasis::Diagonal).unwrap();
        assert!((out[0].probability - 1.0).abs() < EPS);
        assert!(out[1].probability < EPS);
        assert!(out[1].conditioned_state.is_none());

        assert!(matches!(
            p.measure_photon(&["b".into()], MeasurementBasis::Circular),
            Err(Error::InconsistentCircuit(_))
        ));
    }

    #[test]
    fn inner_products() {
        let a = single(Polarization::R, "a", "u");
        let b = single(Polarization::L, "a", "u");
        assert_eq!(a.inner_product(&b).unwrap(), c(0.0));
        assert_eq!(a.inner_product(&a).unwrap(), c(1.0));
        let n = a.scaled(c(3.0)).normalized().unwrap();
        assert!((n.norm_sq() - 1.0).abs() < EPS);
        assert_eq!(HybridState::vacuum(1, ports()).unwrap().normalized(), Err(Error::DegenerateState));
    }

    #[test]
    fn dump_is_sorted() {
        let mut s = HybridState::vacuum(2, ports()).unwrap();
        s.add(PhotonMode::new(Polarization::L, &"b".into()), SpinConfig::parse("ud").unwrap(), c(0.5));
        s.add(PhotonMode::new(Polarization::R, &"b".into()), SpinConfig::parse("du").unwrap(), c(0.5));
        s.add(PhotonMode::new(Polarization::R, &"a".into()), SpinConfig::parse("dd").unwrap(), c(0.5));
        let text = s.dump_text();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("R a dd"));
        assert!(lines[1].starts_with("R b du"));
        assert!(lines[2].starts_with("L b ud"));
    }
}
