//! Electron-spin registers.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computational basis state of an `n`-spin register.
///
/// The basis index follows the ordering ↑↑…↑, ↑↑…↓, …, ↓↓…↓ with spin 0 as the
/// most significant position and ↑ as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    bits: u32,
    n_spins: u8,
}

impl SpinConfig {
    pub const MAX_SPINS: usize = 16;

    pub fn from_index(index: usize, n_spins: usize) -> Self {
        debug_assert!(n_spins <= Self::MAX_SPINS && index < (1 << n_spins));
        Self {
            bits: index as u32,
            n_spins: n_spins as u8,
        }
    }

    /// Parses `u`/`d` (or `↑`/`↓`) labels, spin 0 first.
    pub fn parse(labels: &str) -> Result<Self> {
        let mut bits = 0u32;
        let mut n = 0usize;
        for ch in labels.chars() {
            let down = match ch {
                'u' | 'U' | '↑' | '0' => false,
                'd' | 'D' | '↓' | '1' => true,
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "unknown spin label `{ch}` in `{labels}`"
                    )))
                }
            };
            bits = (bits << 1) | down as u32;
            n += 1;
        }
        if n == 0 || n > Self::MAX_SPINS {
            return Err(Error::InvalidInput(format!(
                "spin label `{labels}` must name between 1 and {} spins",
                Self::MAX_SPINS
            )));
        }
        Ok(Self::from_index(bits as usize, n))
    }

    pub fn index(self) -> usize {
        self.bits as usize
    }

    pub fn n_spins(self) -> usize {
        self.n_spins as usize
    }

    fn mask(self, spin: usize) -> u32 {
        1 << (self.n_spins as usize - 1 - spin)
    }

    pub fn is_down(self, spin: usize) -> bool {
        self.bits & self.mask(spin) != 0
    }

    pub fn flipped(self, spin: usize) -> Self {
        Self {
            bits: self.bits ^ self.mask(spin),
            ..self
        }
    }

    pub fn with_spin(self, spin: usize, down: bool) -> Self {
        let mask = self.mask(spin);
        let bits = if down { self.bits | mask } else { self.bits & !mask };
        Self { bits, ..self }
    }

    pub fn all(n_spins: usize) -> impl Iterator<Item = SpinConfig> {
        (0..1usize << n_spins).map(move |i| SpinConfig::from_index(i, n_spins))
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for spin in 0..self.n_spins() {
            f.write_str(if self.is_down(spin) { "d" } else { "u" })?;
        }
        Ok(())
    }
}

pub(crate) fn check_spin(index: usize, n_spins: usize) -> Result<()> {
    if index >= n_spins {
        return Err(Error::SpinIndexOutOfRange { index, n_spins });
    }
    Ok(())
}

/// Dense pure state of an `n`-spin register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    n_spins: usize,
    amplitudes: Vec<Complex64>,
}

impl SpinState {
    pub fn new(n_spins: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_spins == 0 || n_spins > SpinConfig::MAX_SPINS {
            return Err(Error::InvalidInput(format!("unsupported spin count {n_spins}")));
        }
        if amplitudes.len() != 1 << n_spins {
            return Err(Error::InvalidInput(format!(
                "{} amplitudes given for {n_spins} spins (expected {})",
                amplitudes.len(),
                1 << n_spins
            )));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite amplitude".into()));
        }
        Ok(Self { n_spins, amplitudes })
    }

    pub fn zero(n_spins: usize) -> Self {
        Self {
            n_spins,
            amplitudes: vec![Complex64::new(0.0, 0.0); 1 << n_spins],
        }
    }

    pub fn basis(config: SpinConfig) -> Self {
        let mut state = Self::zero(config.n_spins());
        state.amplitudes[config.index()] = Complex64::new(1.0, 0.0);
        state
    }

    /// Tensor product of single-spin states `(a_↑, a_↓)`, spin 0 first.
    pub fn product(factors: &[(Complex64, Complex64)]) -> Result<Self> {
        let n = factors.len();
        let mut state = Self::zero(n.max(1));
        if n == 0 {
            return Err(Error::InvalidInput("empty product state".into()));
        }
        for config in SpinConfig::all(n) {
            state.amplitudes[config.index()] = (0..n)
                .map(|s| {
                    if config.is_down(s) {
                        factors[s].1
                    } else {
                        factors[s].0
                    }
                })
                .product();
        }
        Ok(state)
    }

    /// Controls in (|↑⟩+|↓⟩)/√2 and the last spin in cos α|↑⟩ + sin α|↓⟩.
    pub fn uniform_controls(n_spins: usize, alpha: f64) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut factors = vec![(h, h); n_spins - 1];
        factors.push((Complex64::new(alpha.cos(), 0.0), Complex64::new(alpha.sin(), 0.0)));
        Self::product(&factors).expect("non-empty product")
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, config: SpinConfig) -> Complex64 {
        self.amplitudes[config.index()]
    }

    pub fn set(&mut self, config: SpinConfig, value: Complex64) {
        self.amplitudes[config.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (SpinConfig, Complex64)> + '_ {
        self.amplitudes
            .iter()
            .enumerate()
            .map(move |(i, &a)| (SpinConfig::from_index(i, self.n_spins), a))
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sq().sqrt();
        if !(norm > 0.0) {
            return Err(Error::DegenerateState);
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            n_spins: self.n_spins,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    /// ⟨self|other⟩
    pub fn inner_product(&self, other: &Self) -> Complex64 {
        assert_eq!(self.n_spins, other.n_spins, "spin count mismatch");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |⟨a|b⟩| ≥ (1 − 10⁻¹⁰)‖a‖‖b‖.
    pub fn equals_up_to_phase(&self, other: &Self) -> bool {
        self.n_spins == other.n_spins
            && self.inner_product(other).norm()
                >= (1.0 - 1e-10) * (self.norm_sq() * other.norm_sq()).sqrt()
    }

    /// σ_z = |↑⟩⟨↑| − |↓⟩⟨↓| on one spin; `global_minus` gives −σ_z.
    pub fn apply_sigma_z(&mut self, spin: usize, global_minus: bool) -> Result<()> {
        check_spin(spin, self.n_spins)?;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            let down = SpinConfig::from_index(i, self.n_spins).is_down(spin);
            if down != global_minus {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Hadamard on one spin.
    pub fn apply_hadamard(&mut self, spin: usize) -> Result<()> {
        check_spin(spin, self.n_spins)?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for config in SpinConfig::all(self.n_spins).filter(|c| !c.is_down(spin)) {
            let up = config.index();
            let down = config.flipped(spin).index();
            let (a, b) = (self.amplitudes[up], self.amplitudes[down]);
            self.amplitudes[up] = (a + b) * h;
            self.amplitudes[down] = (a - b) * h;
        }
        Ok(())
    }
}
