//! Hand-written reference states for the CNOT and Toffoli circuits.
#![allow(dead_code)]

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use qd_gates::circuits::CircuitSpec;
use qd_gates::spin::{SpinConfig, SpinState};
use qd_gates::state::{HybridState, PhotonMode, Polarization, Port};
use rand::Rng;

use Polarization::{L, R};

pub type Term = (Polarization, &'static str, String, f64);

/// State assembled from (polarization, port, spins, amplitude) terms.
pub fn assemble(circuit: &CircuitSpec, terms: &[Term]) -> HybridState {
    let mut s = HybridState::vacuum(circuit.n_spins, circuit.port_set()).unwrap();
    for (pol, port, spins, amp) in terms {
        s.add(
            PhotonMode::new(*pol, &Port::new(port)),
            SpinConfig::parse(spins).unwrap(),
            Complex64::new(*amp, 0.0),
        );
    }
    s
}

/// `prefix ⊗ (cos α|↑⟩ + sin α|↓⟩)`, or `prefix ⊗ (cos α|↓⟩ + sin α|↑⟩)` when `flip`.
pub fn with_target(pol: Polarization, port: &'static str, prefix: &str, amp: f64, alpha: f64, flip: bool) -> [Term; 2] {
    let (up, down) = if flip {
        (alpha.sin(), alpha.cos())
    } else {
        (alpha.cos(), alpha.sin())
    };
    [
        (pol, port, format!("{prefix}u"), amp * up),
        (pol, port, format!("{prefix}d"), amp * down),
    ]
}

fn collect<const N: usize>(parts: [[Term; 2]; N]) -> Vec<Term> {
    parts.into_iter().flatten().collect()
}

/// CNOT after the control round.
pub fn cnot_psi1(alpha: f64) -> Vec<Term> {
    let h = FRAC_1_SQRT_2;
    collect([
        with_target(R, "3", "u", -h, alpha, false),
        with_target(L, "3", "d", h, alpha, false),
    ])
}

/// CNOT just before detection.
pub fn cnot_psi2(alpha: f64) -> Vec<Term> {
    collect([
        with_target(R, "8", "u", -0.5, alpha, false),
        with_target(L, "8", "u", -0.5, alpha, false),
        with_target(R, "8", "d", 0.5, alpha, true),
        with_target(L, "8", "d", -0.5, alpha, true),
    ])
}

/// CNOT spin output after feed-forward.
pub fn cnot_out(alpha: f64) -> SpinState {
    let (c, s) = (alpha.cos() * FRAC_1_SQRT_2, alpha.sin() * FRAC_1_SQRT_2);
    real_state(2, &[c, s, s, c])
}

/// Toffoli after the first cavity.
pub fn toffoli_xi1(alpha: f64) -> Vec<Term> {
    collect([
        with_target(R, "1~", "uu", -0.5, alpha, false),
        with_target(R, "1~", "ud", -0.5, alpha, false),
        with_target(L, "1", "du", 0.5, alpha, false),
        with_target(L, "1", "dd", 0.5, alpha, false),
    ])
}

/// Toffoli after both control rounds.
pub fn toffoli_xi2(alpha: f64) -> Vec<Term> {
    collect([
        with_target(R, "2~", "uu", 0.5, alpha, false),
        with_target(L, "2~", "ud", -0.5, alpha, false),
        with_target(L, "2", "du", -0.5, alpha, false),
        with_target(R, "2", "dd", 0.5, alpha, false),
    ])
}

/// Toffoli after the target round and its wave plates.
pub fn toffoli_xi3(alpha: f64) -> Vec<Term> {
    collect([
        with_target(R, "2~", "uu", 0.5, alpha, false),
        with_target(L, "2~", "ud", -0.5, alpha, false),
        with_target(L, "4", "du", 0.5, alpha, false),
        with_target(R, "4", "dd", -0.5, alpha, true),
    ])
}

/// Toffoli after the beam splitter.
pub fn toffoli_bs(alpha: f64) -> Vec<Term> {
    let h = 0.5 * FRAC_1_SQRT_2;
    collect([
        with_target(R, "5", "uu", h, alpha, false),
        with_target(R, "3~", "uu", -h, alpha, false),
        with_target(L, "5", "ud", -h, alpha, false),
        with_target(L, "3~", "ud", h, alpha, false),
        with_target(L, "5", "du", h, alpha, false),
        with_target(L, "3~", "du", h, alpha, false),
        with_target(R, "5", "dd", -h, alpha, true),
        with_target(R, "3~", "dd", -h, alpha, true),
    ])
}

/// Toffoli spin output after feed-forward.
pub fn toffoli_out(alpha: f64) -> SpinState {
    let (c, s) = (alpha.cos() * 0.5, alpha.sin() * 0.5);
    real_state(3, &[c, s, c, s, c, s, s, c])
}

pub fn real_state(n_spins: usize, amps: &[f64]) -> SpinState {
    SpinState::new(n_spins, amps.iter().map(|&x| Complex64::new(x, 0.0)).collect()).unwrap()
}

/// Largest amplitude deviation after removing the relative global phase.
pub fn phase_aligned_deviation(got: &SpinState, want: &SpinState) -> f64 {
    let overlap = want.inner_product(got);
    if overlap.norm() == 0.0 {
        return f64::INFINITY;
    }
    let phase = overlap / overlap.norm();
    got.amplitudes()
        .iter()
        .zip(want.amplitudes())
        .map(|(g, w)| (g - w * phase).norm())
        .fold(0.0, f64::max)
}

pub fn random_state(rng: &mut impl Rng, n_spins: usize) -> SpinState {
    let amps = (0..1 << n_spins)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SpinState::new(n_spins, amps).unwrap().normalized().unwrap()
}
