//! Steady-state optical response of a singly charged quantum dot in a
//! double-sided microcavity.
//!
//! All rates are dimensionless ratios to the cavity decay rate κ, which is
//! therefore fixed to 1 and never stored.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of one QD–cavity system, in units of κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Dipole–cavity coupling strength g/κ.
    pub g_over_kappa: f64,
    /// Side-leakage rate κ_s/κ.
    pub kappa_s_over_kappa: f64,
    /// Dipole decay rate γ/κ.
    pub gamma_over_kappa: f64,
    /// Probe detuning ω − ω₀.
    #[serde(default)]
    pub detuning_photon: f64,
    /// Cavity detuning ω_c − ω₀.
    #[serde(default)]
    pub detuning_cavity: f64,
    /// Trion transition detuning ω_X⁻ − ω₀.
    #[serde(default)]
    pub detuning_exciton: f64,
}

impl CavityParams {
    /// Resonant parameters (all detunings zero).
    pub fn resonant(g_over_kappa: f64, kappa_s_over_kappa: f64, gamma_over_kappa: f64) -> Self {
        Self {
            g_over_kappa,
            kappa_s_over_kappa,
            gamma_over_kappa,
            detuning_photon: 0.0,
            detuning_cavity: 0.0,
            detuning_exciton: 0.0,
        }
    }

    pub fn with_detuning(mut self, photon: f64, cavity: f64, exciton: f64) -> Self {
        self.detuning_photon = photon;
        self.detuning_cavity = cavity;
        self.detuning_exciton = exciton;
        self
    }

    pub fn is_resonant(&self) -> bool {
        self.detuning_photon == self.detuning_cavity && self.detuning_photon == self.detuning_exciton
    }

    /// Same system with the dipole decoupled (g = 0).
    pub fn cold(&self) -> Self {
        Self {
            g_over_kappa: 0.0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("g_over_kappa", self.g_over_kappa),
            ("kappa_s_over_kappa", self.kappa_s_over_kappa),
            ("gamma_over_kappa", self.gamma_over_kappa),
        ];
        for (name, value) in rates {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative, got {value}"),
                });
            }
        }
        let detunings = [
            ("detuning_photon", self.detuning_photon),
            ("detuning_cavity", self.detuning_cavity),
            ("detuning_exciton", self.detuning_exciton),
        ];
        for (name, value) in detunings {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// Reflection and transmission amplitudes for the coupled ("hot") and the
/// uncoupled ("cold") cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    pub r_hot: Complex64,
    pub t_hot: Complex64,
    pub r_cold: Complex64,
    pub t_cold: Complex64,
}

impl ScatteringCoefficients {
    /// Perfect birefringence: the coupled cavity reflects, the uncoupled one transmits
    /// with a π phase.
    pub const IDEAL: Self = Self {
        r_hot: Complex64::new(1.0, 0.0),
        t_hot: Complex64::new(0.0, 0.0),
        r_cold: Complex64::new(0.0, 0.0),
        t_cold: Complex64::new(-1.0, 0.0),
    };

    /// Real-valued coefficients, as obtained at resonance.
    pub fn from_real(r_hot: f64, t_hot: f64, r_cold: f64, t_cold: f64) -> Self {
        Self {
            r_hot: Complex64::new(r_hot, 0.0),
            t_hot: Complex64::new(t_hot, 0.0),
            r_cold: Complex64::new(r_cold, 0.0),
            t_cold: Complex64::new(t_cold, 0.0),
        }
    }

    pub fn hot_norm_sq(&self) -> f64 {
        self.r_hot.norm_sqr() + self.t_hot.norm_sqr()
    }

    pub fn cold_norm_sq(&self) -> f64 {
        self.r_cold.norm_sqr() + self.t_cold.norm_sqr()
    }

    /// Fails if either cavity would create amplitude.
    pub fn check_passive(&self) -> Result<()> {
        for norm_sq in [self.hot_norm_sq(), self.cold_norm_sq()] {
            if !norm_sq.is_finite() || norm_sq > 1.0 + 1e-12 {
                return Err(Error::InvalidCoefficients { norm_sq });
            }
        }
        Ok(())
    }

    /// `(|r|, |t|, |r₀|, |t₀|)`
    pub fn magnitudes(&self) -> (f64, f64, f64, f64) {
        (
            self.r_hot.norm(),
            self.t_hot.norm(),
            self.r_cold.norm(),
            self.t_cold.norm(),
        )
    }
}

/// Transmission amplitude of the two-mirror cavity with the dipole coupled at
/// strength `g`.
fn transmission(params: &CavityParams, g: f64) -> Complex64 {
    let i = Complex64::i();
    let dipole = i * (params.detuning_exciton - params.detuning_photon)
        + params.gamma_over_kappa / 2.0;
    let cavity =
        i * (params.detuning_cavity - params.detuning_photon) + 1.0 + params.kappa_s_over_kappa / 2.0;
    -dipole / (dipole * cavity + g * g)
}

/// Reflection/transmission coefficients of the hot and the cold cavity.
///
/// The cold pair is the same expression evaluated with g = 0, so detuned cold
/// coefficients carry their phase as well.
pub fn coefficients(params: &CavityParams) -> Result<ScatteringCoefficients> {
    params.validate()?;
    let t_hot = transmission(params, params.g_over_kappa);
    let t_cold = transmission(params, 0.0);
    if !(t_hot.re.is_finite() && t_hot.im.is_finite() && t_cold.re.is_finite() && t_cold.im.is_finite())
    {
        return Err(Error::InvalidParameter {
            name: "gamma_over_kappa",
            reason: "dipole and cavity response vanish simultaneously".into(),
        });
    }
    Ok(ScatteringCoefficients {
        r_hot: 1.0 + t_hot,
        t_hot,
        r_cold: 1.0 + t_cold,
        t_cold,
    })
}

/// Validity bounds of the weak-excitation treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// n₀ = γ²/(2g²).
    pub critical_photon_number: f64,
    /// τ/n₀, in the time unit of `tau`.
    pub min_photon_interval: f64,
    /// 1 − exp(−τ/T₂).
    pub dephasing_penalty: f64,
}

pub fn feasibility(params: &CavityParams, tau: f64, t2: f64) -> Result<FeasibilityReport> {
    params.validate()?;
    if params.g_over_kappa == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be finite and non-negative, got {tau}"),
        });
    }
    if !(t2 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t2",
            reason: format!("must be positive, got {t2}"),
        });
    }
    let g = params.g_over_kappa;
    let gamma = params.gamma_over_kappa;
    let n0 = gamma * gamma / (2.0 * g * g);
    Ok(FeasibilityReport {
        critical_photon_number: n0,
        min_photon_interval: tau / n0,
        dephasing_penalty: -(-tau / t2).exp_m1(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Resonant closed forms, written independently of `transmission`.
    fn resonant_oracle(g: f64, ks: f64, gamma: f64) -> (f64, f64, f64, f64) {
        let t0 = -1.0 / (1.0 + ks / 2.0);
        let r0 = (ks / 2.0) / (1.0 + ks / 2.0);
        let t = -(gamma / 2.0) / ((gamma / 2.0) * (1.0 + ks / 2.0) + g * g);
        (1.0 + t, t, r0, t0)
    }

    #[test]
    fn reference_point_values() {
        let c = coefficients(&CavityParams::resonant(2.4, 0.2, 0.1)).unwrap();
        assert!((c.t_cold.re + 0.909091).abs() < 1e-6);
        assert!((c.r_cold.re - 0.090909).abs() < 1e-6);
        assert!((c.t_hot.re + 0.008598).abs() < 1e-6);
        assert!((c.r_hot.re - 0.991402).abs() < 1e-6);
        for z in [c.r_hot, c.t_hot, c.r_cold, c.t_cold] {
            assert_eq!(z.im, 0.0);
        }
    }

    #[test]
    fn no_side_leakage_gives_perfect_cold_transmission() {
        for g in [0.0, 0.3, 2.4, 10.0] {
            let c = coefficients(&CavityParams::resonant(g, 0.0, 0.1)).unwrap();
            assert_eq!(c.t_cold, Complex64::new(-1.0, 0.0));
            assert_eq!(c.r_cold, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn zero_coupling_is_cold() {
        let c = coefficients(&CavityParams::resonant(0.0, 0.4, 0.1).with_detuning(0.3, -0.1, 0.2))
            .unwrap();
        assert_eq!(c.r_hot, c.r_cold);
        assert_eq!(c.t_hot, c.t_cold);
    }

    #[test]
    fn resonance_matches_simplified_form() {
        let (r, t, r0, t0) = resonant_oracle(1.3, 0.45, 0.2);
        let c = coefficients(&CavityParams::resonant(1.3, 0.45, 0.2)).unwrap();
        assert!((c.r_hot.re - r).abs() < 1e-15);
        assert!((c.t_hot.re - t).abs() < 1e-15);
        assert!((c.r_cold.re - r0).abs() < 1e-15);
        assert!((c.t_cold.re - t0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_and_negative() {
        assert!(matches!(
            coefficients(&CavityParams::resonant(f64::NAN, 0.0, 0.1)),
            Err(Error::InvalidParameter { name: "g_over_kappa", .. })
        ));
        assert!(coefficients(&CavityParams::resonant(1.0, -0.1, 0.1)).is_err());
        assert!(coefficients(&CavityParams::resonant(1.0, 0.1, 0.1).with_detuning(f64::INFINITY, 0.0, 0.0)).is_err());
    }

    #[test]
    fn strong_coupling_limit() {
        let c = coefficients(&CavityParams::resonant(1e4, 0.0, 0.1)).unwrap();
        assert!((c.r_hot.re - 1.0).abs() < 1e-9);
        assert!(c.t_hot.norm() < 1e-9);
        assert_eq!(c.t_cold.re, -1.0);
    }

    #[test]
    fn feasibility_reference_point() {
        // g/(κ+κ_s) = 1.0 with κ_s/κ = 0.7.
        let params = CavityParams::resonant(1.7, 0.7, 0.1);
        let report = feasibility(&params, 9e-12, 1e-9).unwrap();
        assert!((report.critical_photon_number - 0.01 / 5.78).abs() < 1e-15);
        assert!((report.min_photon_interval - 9e-12 / (0.01 / 5.78)).abs() < 1e-20);
    }

    #[test]
    fn dephasing_penalty_limits() {
        let params = CavityParams::resonant(1.0, 0.0, 0.1);
        assert_eq!(feasibility(&params, 0.0, 1.0).unwrap().dephasing_penalty, 0.0);
        let long = feasibility(&params, 1.0, 1e300).unwrap().dephasing_penalty;
        assert!(long >= 0.0 && long < 1e-299);
        let p = feasibility(&params, 2.0, 1.0).unwrap().dephasing_penalty;
        assert!((p - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn feasibility_requires_coupling() {
        let params = CavityParams::resonant(0.0, 0.0, 0.1);
        assert_eq!(feasibility(&params, 1.0, 1.0), Err(Error::ZeroCoupling));
        let params = CavityParams::resonant(1.0, 0.0, 0.1);
        assert!(feasibility(&params, 1.0, 0.0).is_err());
        assert!(feasibility(&params, -1.0, 1.0).is_err());
    }
}
