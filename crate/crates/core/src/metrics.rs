//! Average gate fidelities, photon efficiencies and (g, κ_s) sweeps.
//!
//! The target angle α enters the input state linearly, so every output state
//! is `cos α·ψ(0) + sin α·ψ(π/2)`. The α-average therefore needs two circuit
//! evaluations per gate plus O(1) work per quadrature node.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{coefficients, CavityParams, ScatteringCoefficients};
use crate::circuits::{build, GateKind, SimulationMode};
use crate::error::{Error, Result};
use crate::spin::{SpinConfig, SpinState};
use crate::state::{HybridState, PhotonMode, Polarization, Port};

pub const DEFAULT_ALPHA_SAMPLES: usize = 256;
pub const MIN_ALPHA_SAMPLES: usize = 64;

/// Port carrying the CNOT output photon.
pub const CNOT_OUTPUT_PORT: &str = "8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMethod {
    ClosedForm,
    Simulation,
}

impl fmt::Display for FidelityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FidelityMethod::ClosedForm => "closed_form",
            FidelityMethod::Simulation => "simulation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub gate: GateKind,
    pub average_fidelity: f64,
    pub method: FidelityMethod,
    pub alpha_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// False when any detuning is non-zero; the result is then outside the
    /// regime the closed forms describe.
    pub resonant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub gate: GateKind,
    pub efficiency: f64,
}

/// (ξ, ζ) from the coefficient magnitudes.
pub fn xi_zeta(coeffs: &ScatteringCoefficients) -> (f64, f64) {
    let (r, t, r0, t0) = coeffs.magnitudes();
    ((t0 - r0) - (t - r), (t0 - r0) + (t - r))
}

fn cnot_output_ports() -> std::sync::Arc<std::collections::BTreeSet<Port>> {
    HybridState::port_set(&[CNOT_OUTPUT_PORT])
}

/// Adds `amp·|±⟩|spins⟩`, with |±⟩ = (|R⟩ ± |L⟩)/√2.
fn add_diagonal(state: &mut HybridState, plus: bool, spins: &str, amp: f64) {
    let port = Port::new(CNOT_OUTPUT_PORT);
    let config = SpinConfig::parse(spins).expect("static label");
    let a = amp * FRAC_1_SQRT_2;
    state.add(PhotonMode::new(Polarization::R, &port), config, Complex64::new(a, 0.0));
    let l = if plus { a } else { -a };
    state.add(PhotonMode::new(Polarization::L, &port), config, Complex64::new(l, 0.0));
}

/// Ideal CNOT output for the standard input: control (|↑⟩+|↓⟩)/√2, target
/// cos α|↑⟩ + sin α|↓⟩. Spin order is (control, target).
pub fn ideal_cnot_output(alpha: f64) -> HybridState {
    let (c, s) = (alpha.cos(), alpha.sin());
    let mut state = HybridState::vacuum(2, cnot_output_ports()).expect("two spins");
    let k = FRAC_1_SQRT_2;
    add_diagonal(&mut state, false, "dd", k * c);
    add_diagonal(&mut state, false, "du", k * s);
    add_diagonal(&mut state, true, "uu", -k * c);
    add_diagonal(&mut state, true, "ud", -k * s);
    state
}

/// Sub-normalized CNOT output with lossy cavities, built from the coefficient
/// magnitudes.
pub fn realistic_cnot_output(alpha: f64, coeffs: &ScatteringCoefficients) -> Result<HybridState> {
    coeffs.check_passive()?;
    let (r, t, r0, t0) = coeffs.magnitudes();
    let (xi, zeta) = xi_zeta(coeffs);
    let (c, s) = (alpha.cos(), alpha.sin());
    let p = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    let k = FRAC_1_SQRT_2;
    let mut state = HybridState::vacuum(2, cnot_output_ports())?;
    add_diagonal(&mut state, true, "du", p * t * (xi * c + zeta * s));
    add_diagonal(&mut state, true, "dd", p * t * (zeta * c + xi * s));
    add_diagonal(&mut state, true, "uu", -p * t0 * (xi * c + zeta * s));
    add_diagonal(&mut state, true, "ud", -p * t0 * (zeta * c + xi * s));
    add_diagonal(&mut state, false, "dd", k * r * c);
    add_diagonal(&mut state, false, "du", k * r * s);
    add_diagonal(&mut state, false, "ud", -k * r0 * c);
    add_diagonal(&mut state, false, "uu", -k * r0 * s);
    Ok(state)
}

/// Standard input register: uniform controls, target cos α|↑⟩ + sin α|↓⟩.
pub fn standard_input(gate: GateKind, alpha: f64) -> SpinState {
    SpinState::uniform_controls(gate.n_spins(), alpha)
}

/// Realistic and ideal output at one α.
pub fn output_pair(
    gate: GateKind,
    coeffs: &ScatteringCoefficients,
    method: FidelityMethod,
    alpha: f64,
) -> Result<(HybridState, HybridState)> {
    match method {
        FidelityMethod::ClosedForm => match gate {
            GateKind::Cnot => Ok((realistic_cnot_output(alpha, coeffs)?, ideal_cnot_output(alpha))),
            GateKind::Toffoli => Err(Error::Unsupported(
                "the Toffoli fidelity has no closed form; use the simulation method".into(),
            )),
        },
        FidelityMethod::Simulation => {
            let circuit = build(gate);
            let input = standard_input(gate, alpha);
            let lossy = SimulationMode::lossy_uniform(&circuit, *coeffs);
            Ok((
                circuit.pre_measurement_state(&input, &lossy)?,
                circuit.pre_measurement_state(&input, &SimulationMode::Ideal)?,
            ))
        }
    }
}

/// |⟨ψ_r|ψ_i⟩|² / (‖ψ_r‖²‖ψ_i‖²) over the photon-present sector.
pub fn conditioned_fidelity(realistic: &HybridState, ideal: &HybridState) -> Result<f64> {
    let overlap = realistic.inner_product(ideal)?.norm_sqr();
    let norms = realistic.present_norm_sq() * ideal.present_norm_sq();
    if !(norms > 0.0) {
        return Err(Error::DegenerateState);
    }
    Ok((overlap / norms).clamp(0.0, 1.0))
}

/// Fidelity at a single α, evaluated directly.
pub fn fidelity_at(
    gate: GateKind,
    coeffs: &ScatteringCoefficients,
    method: FidelityMethod,
    alpha: f64,
) -> Result<f64> {
    let (r, i) = output_pair(gate, coeffs, method, alpha)?;
    conditioned_fidelity(&r, &i)
}

/// Inner products among the α = 0 and α = π/2 outputs.
struct Gram {
    /// ⟨r_a|i_b⟩
    ri: [[Complex64; 2]; 2],
    /// ⟨r_a|r_b⟩
    rr: [[Complex64; 2]; 2],
    /// ⟨i_a|i_b⟩
    ii: [[Complex64; 2]; 2],
}

impl Gram {
    fn new(r: &[HybridState; 2], i: &[HybridState; 2]) -> Result<Self> {
        let mut gram = Gram {
            ri: Default::default(),
            rr: Default::default(),
            ii: Default::default(),
        };
        for a in 0..2 {
            for b in 0..2 {
                gram.ri[a][b] = r[a].inner_product(&i[b])?;
                gram.rr[a][b] = r[a].inner_product(&r[b])?;
                gram.ii[a][b] = i[a].inner_product(&i[b])?;
            }
        }
        Ok(gram)
    }

    fn fidelity(&self, alpha: f64) -> f64 {
        let w = [alpha.cos(), alpha.sin()];
        let mut overlap = Complex64::new(0.0, 0.0);
        let (mut rr, mut ii) = (0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                let wab = w[a] * w[b];
                overlap += self.ri[a][b] * wab;
                rr += self.rr[a][b].re * wab;
                ii += self.ii[a][b].re * wab;
            }
        }
        let norms = rr * ii;
        if norms > 0.0 {
            (overlap.norm_sqr() / norms).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Uniform trapezoid average of the fidelity over α ∈ [0, 2π).
pub fn average_fidelity_for(
    gate: GateKind,
    coeffs: &ScatteringCoefficients,
    method: FidelityMethod,
    alpha_samples: usize,
) -> Result<f64> {
    if alpha_samples < MIN_ALPHA_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "alpha_samples",
            reason: format!("must be at least {MIN_ALPHA_SAMPLES}, got {alpha_samples}"),
        });
    }
    let (r0, i0) = output_pair(gate, coeffs, method, 0.0)?;
    let (r1, i1) = output_pair(gate, coeffs, method, FRAC_PI_2)?;
    let gram = Gram::new(&[r0, r1], &[i0, i1])?;
    let step = 2.0 * PI / alpha_samples as f64;
    let sum: f64 = (0..alpha_samples).map(|k| gram.fidelity(k as f64 * step)).sum();
    Ok((sum / alpha_samples as f64).clamp(0.0, 1.0))
}

/// Average fidelity for the given cavity parameters.
pub fn average_fidelity(
    gate: GateKind,
    params: &CavityParams,
    method: FidelityMethod,
    alpha_samples: usize,
) -> Result<FidelityResult> {
    let coeffs = coefficients(params)?;
    let average_fidelity = average_fidelity_for(gate, &coeffs, method, alpha_samples)?;
    let (xi, zeta) = match (gate, method) {
        (GateKind::Cnot, FidelityMethod::ClosedForm) => {
            let (xi, zeta) = xi_zeta(&coeffs);
            (Some(xi), Some(zeta))
        }
        _ => (None, None),
    };
    Ok(FidelityResult {
        gate,
        average_fidelity,
        method,
        alpha_samples,
        xi,
        zeta,
        resonant: params.is_resonant(),
    })
}

/// Photon yield: (1−|t₀||r₀|−|t||r|)² for the CNOT and
/// ½(1−|t₀||r₀|−|t||r|)²(2−|t₀||r₀|−|t||r|) for the Toffoli.
pub fn efficiency(gate: GateKind, coeffs: &ScatteringCoefficients) -> EfficiencyResult {
    let (r, t, r0, t0) = coeffs.magnitudes();
    let loss = t0 * r0 + t * r;
    let efficiency = match gate {
        GateKind::Cnot => (1.0 - loss).powi(2),
        GateKind::Toffoli => 0.5 * (1.0 - loss).powi(2) * (2.0 - loss),
    };
    EfficiencyResult {
        gate,
        efficiency: efficiency.clamp(0.0, 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepQuantity {
    #[serde(rename = "F_CNOT")]
    FidelityCnot,
    #[serde(rename = "F_Toffoli")]
    FidelityToffoli,
    #[serde(rename = "eta_CNOT")]
    EfficiencyCnot,
    #[serde(rename = "eta_Toffoli")]
    EfficiencyToffoli,
}

impl SweepQuantity {
    pub const ALL: [SweepQuantity; 4] = [
        SweepQuantity::FidelityCnot,
        SweepQuantity::FidelityToffoli,
        SweepQuantity::EfficiencyCnot,
        SweepQuantity::EfficiencyToffoli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepQuantity::FidelityCnot => "F_CNOT",
            SweepQuantity::FidelityToffoli => "F_Toffoli",
            SweepQuantity::EfficiencyCnot => "eta_CNOT",
            SweepQuantity::EfficiencyToffoli => "eta_Toffoli",
        }
    }

    pub fn gate(self) -> GateKind {
        match self {
            SweepQuantity::FidelityCnot | SweepQuantity::EfficiencyCnot => GateKind::Cnot,
            SweepQuantity::FidelityToffoli | SweepQuantity::EfficiencyToffoli => GateKind::Toffoli,
        }
    }

    /// Value at one resonant parameter point. CNOT fidelities use the closed
    /// form, Toffoli fidelities the circuit simulation.
    pub fn evaluate(self, params: &CavityParams, alpha_samples: usize) -> Result<f64> {
        let coeffs = coefficients(params)?;
        match self {
            SweepQuantity::FidelityCnot => {
                average_fidelity_for(GateKind::Cnot, &coeffs, FidelityMethod::ClosedForm, alpha_samples)
            }
            SweepQuantity::FidelityToffoli => average_fidelity_for(
                GateKind::Toffoli,
                &coeffs,
                FidelityMethod::Simulation,
                alpha_samples,
            ),
            SweepQuantity::EfficiencyCnot | SweepQuantity::EfficiencyToffoli => {
                Ok(efficiency(self.gate(), &coeffs).efficiency)
            }
        }
    }
}

impl fmt::Display for SweepQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "f_cnot" | "fidelity_cnot" => Ok(SweepQuantity::FidelityCnot),
            "f_toffoli" | "fidelity_toffoli" => Ok(SweepQuantity::FidelityToffoli),
            "eta_cnot" | "efficiency_cnot" => Ok(SweepQuantity::EfficiencyCnot),
            "eta_toffoli" | "efficiency_toffoli" => Ok(SweepQuantity::EfficiencyToffoli),
            _ => Err(Error::InvalidInput(format!(
                "unknown sweep quantity `{s}` (expected F_CNOT, F_Toffoli, eta_CNOT or eta_Toffoli)"
            ))),
        }
    }
}

/// Sweep request. Both axes share `resolution` points, end points included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub quantity: SweepQuantity,
    pub g_range: (f64, f64),
    pub ks_range: (f64, f64),
    pub resolution: usize,
    pub gamma_over_kappa: f64,
    pub alpha_samples: usize,
}

impl SweepSpec {
    pub fn new(quantity: SweepQuantity) -> Self {
        SweepSpec {
            quantity,
            g_range: (0.0, 3.0),
            ks_range: (0.0, 1.0),
            resolution: 101,
            gamma_over_kappa: 0.1,
            alpha_samples: DEFAULT_ALPHA_SAMPLES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("g_range", self.g_range), ("ks_range", self.ks_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("need finite 0 ≤ lo ≤ hi, got [{lo}, {hi}]"),
                });
            }
        }
        if self.resolution == 0 {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.gamma_over_kappa.is_finite() && self.gamma_over_kappa >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "gamma_over_kappa",
                reason: format!("must be finite and non-negative, got {}", self.gamma_over_kappa),
            });
        }
        Ok(())
    }
}

/// Evenly spaced points from `lo` to `hi`; a single point sits at `lo`.
pub fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let span = hi - lo;
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + span * k as f64 / (n - 1) as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub g_over_kappa: Vec<f64>,
    pub kappa_s_over_kappa: Vec<f64>,
}

/// Values over (g/κ, κ_s/κ); `values[i][j]` belongs to `g[i]`, `κ_s[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub quantity: SweepQuantity,
    pub gamma_over_kappa: f64,
    pub axes: SweepAxes,
    pub values: Vec<Vec<f64>>,
}

impl SweepGrid {
    pub fn axis_g(&self) -> &[f64] {
        &self.axes.g_over_kappa
    }

    pub fn axis_ks(&self) -> &[f64] {
        &self.axes.kappa_s_over_kappa
    }

    /// Value at the grid node nearest to (g, κ_s).
    pub fn nearest(&self, g: f64, ks: f64) -> Option<f64> {
        let closest = |axis: &[f64], x: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
                .map(|(i, _)| i)
        };
        let i = closest(self.axis_g(), g)?;
        let j = closest(self.axis_ks(), ks)?;
        Some(self.values[i][j])
    }

    /// Header row of κ_s values, then one row per g value.
    pub fn to_csv(&self, significant: usize) -> String {
        let mut out = String::from("g_over_kappa");
        for ks in self.axis_ks() {
            out.push(',');
            out.push_str(&format_significant(*ks, significant));
        }
        out.push('\n');
        for (g, row) in self.axis_g().iter().zip(&self.values) {
            out.push_str(&format_significant(*g, significant));
            for v in row {
                out.push(',');
                out.push_str(&format_significant(*v, significant));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs a sweep on the global rayon pool.
pub fn sweep(spec: &SweepSpec) -> Result<SweepGrid> {
    spec.validate()?;
    let g_axis = axis(spec.g_range.0, spec.g_range.1, spec.resolution);
    let ks_axis = axis(spec.ks_range.0, spec.ks_range.1, spec.resolution);
    let values = g_axis
        .par_iter()
        .map(|&g| {
            ks_axis
                .iter()
                .map(|&ks| {
                    let params = CavityParams::resonant(g, ks, spec.gamma_over_kappa);
                    spec.quantity.evaluate(&params, spec.alpha_samples)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        quantity: spec.quantity,
        gamma_over_kappa: spec.gamma_over_kappa,
        axes: SweepAxes {
            g_over_kappa: g_axis,
            kappa_s_over_kappa: ks_axis,
        },
        values,
    })
}

/// Runs a sweep on a dedicated pool of `jobs` threads.
pub fn sweep_with_jobs(spec: &SweepSpec, jobs: usize) -> Result<SweepGrid> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| sweep(spec))
}

/// `%g`-style formatting with `significant` digits.
pub fn format_significant(x: f64, significant: usize) -> String {
    let digits = significant.max(1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_fraction(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_owned()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
