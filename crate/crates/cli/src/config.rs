use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use qd_gates::cavity::CavityParams;
use qd_gates::circuits::GateKind;
use qd_gates::metrics::{FidelityMethod, SweepQuantity, DEFAULT_ALPHA_SAMPLES};
use qd_gates::spin::{SpinConfig, SpinState};
use qd_gates::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_GAMMA: f64 = 0.1;
pub const DEFAULT_PRECISION: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ideal,
    Lossy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GateArg {
    Cnot,
    Toffoli,
}

impl From<GateArg> for GateKind {
    fn from(g: GateArg) -> Self {
        match g {
            GateArg::Cnot => GateKind::Cnot,
            GateArg::Toffoli => GateKind::Toffoli,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    ClosedForm,
    Simulation,
}

impl From<MethodArg> for FidelityMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::ClosedForm => FidelityMethod::ClosedForm,
            MethodArg::Simulation => FidelityMethod::Simulation,
        }
    }
}

/// Input spin register: a basis label, the standard α-parameterized input, or
/// explicit amplitudes as `[re, im]` pairs in basis order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    Basis(String),
    Alpha(f64),
    Amplitudes(Vec<[f64; 2]>),
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Alpha(0.0)
    }
}

impl FromStr for InputSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        if s.starts_with('[') {
            let amps: Vec<[f64; 2]> = serde_json::from_str(s)
                .map_err(|e| CliError::usage(format!("bad amplitude list `{s}`: {e}")))?;
            Ok(InputSpec::Amplitudes(amps))
        } else if let Some(value) = s.strip_prefix("alpha=") {
            let alpha = value
                .parse()
                .map_err(|_| CliError::usage(format!("bad angle in `{s}`")))?;
            Ok(InputSpec::Alpha(alpha))
        } else {
            Ok(InputSpec::Basis(s.to_owned()))
        }
    }
}

impl InputSpec {
    pub fn to_state(&self, n_spins: usize) -> CliResult<SpinState> {
        match self {
            InputSpec::Basis(label) => {
                let config = SpinConfig::parse(label).map_err(|e| CliError::usage(e.to_string()))?;
                if config.n_spins() != n_spins {
                    return Err(CliError::usage(format!(
                        "input `{label}` has {} spins, the gate needs {n_spins}",
                        config.n_spins()
                    )));
                }
                Ok(SpinState::basis(config))
            }
            InputSpec::Alpha(alpha) => {
                if !alpha.is_finite() {
                    return Err(CliError::usage("input angle must be finite"));
                }
                Ok(SpinState::uniform_controls(n_spins, *alpha))
            }
            InputSpec::Amplitudes(pairs) => {
                if pairs.len() != 1 << n_spins {
                    return Err(CliError::usage(format!(
                        "expected {} amplitudes for {n_spins} spins, got {}",
                        1 << n_spins,
                        pairs.len()
                    )));
                }
                let amps = pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                SpinState::new(n_spins, amps)
                    .and_then(|s| s.normalized())
                    .map_err(|e| CliError::usage(format!("bad input amplitudes: {e}")))
            }
        }
    }
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSpec::Basis(label) => f.write_str(label),
            InputSpec::Alpha(a) => write!(f, "alpha={a}"),
            InputSpec::Amplitudes(pairs) => {
                f.write_str(&serde_json::to_string(pairs).map_err(|_| fmt::Error)?)
            }
        }
    }
}

/// Cavity parameters as given; every field may be left to a preset or default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_over_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_s_over_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_over_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_photon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_cavity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_exciton: Option<f64>,
}

impl ParamsConfig {
    fn merged(self, over: ParamsConfig) -> ParamsConfig {
        ParamsConfig {
            g_over_kappa: over.g_over_kappa.or(self.g_over_kappa),
            kappa_s_over_kappa: over.kappa_s_over_kappa.or(self.kappa_s_over_kappa),
            gamma_over_kappa: over.gamma_over_kappa.or(self.gamma_over_kappa),
            detuning_photon: over.detuning_photon.or(self.detuning_photon),
            detuning_cavity: over.detuning_cavity.or(self.detuning_cavity),
            detuning_exciton: over.detuning_exciton.or(self.detuning_exciton),
        }
    }
}

/// Everything a command can be configured with. Loaded from `--config`,
/// overridden by flags, echoed by `--dump-config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub params: ParamsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<FidelityMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<SweepQuantity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Cavity photon lifetime in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Exciton coherence time in seconds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_owned(),
            source: Box::new(e),
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_owned(),
            source: Box::new(e),
        })
    }

    /// Field-wise merge; values set in `over` win.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        RunConfig {
            gate: over.gate.or(self.gate),
            preset: over.preset.or(self.preset),
            params: self.params.merged(over.params),
            mode: over.mode.or(self.mode),
            input: over.input.or(self.input),
            method: over.method.or(self.method),
            alpha_samples: over.alpha_samples.or(self.alpha_samples),
            quantity: over.quantity.or(self.quantity),
            g_range: over.g_range.or(self.g_range),
            ks_range: over.ks_range.or(self.ks_range),
            resolution: over.resolution.or(self.resolution),
            jobs: over.jobs.or(self.jobs),
            tau: over.tau.or(self.tau),
            t2: over.t2.or(self.t2),
            format: over.format.or(self.format),
            precision: over.precision.or(self.precision),
        }
    }

    pub fn gate(&self) -> CliResult<GateKind> {
        self.gate
            .ok_or_else(|| CliError::usage("no gate given (use --gate cnot|toffoli)"))
    }

    pub fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn precision(&self) -> usize {
        self.precision.unwrap_or(DEFAULT_PRECISION)
    }

    pub fn alpha_samples(&self) -> usize {
        self.alpha_samples.unwrap_or(DEFAULT_ALPHA_SAMPLES)
    }

    pub fn method(&self, gate: GateKind) -> FidelityMethod {
        self.method.unwrap_or(match gate {
            GateKind::Cnot => FidelityMethod::ClosedForm,
            GateKind::Toffoli => FidelityMethod::Simulation,
        })
    }

    /// Parameters with the preset folded in; g/κ and κ_s/κ must be known.
    pub fn cavity_params(&self) -> CliResult<CavityParams> {
        let p = self.resolved_params()?;
        let g = p
            .g_over_kappa
            .ok_or_else(|| CliError::usage("no coupling given (use --g or --preset)"))?;
        let ks = p
            .kappa_s_over_kappa
            .ok_or_else(|| CliError::usage("no side leakage given (use --ks or --preset)"))?;
        let params = CavityParams::resonant(g, ks, p.gamma_over_kappa.unwrap_or(DEFAULT_GAMMA)).with_detuning(
            p.detuning_photon.unwrap_or(0.0),
            p.detuning_cavity.unwrap_or(0.0),
            p.detuning_exciton.unwrap_or(0.0),
        );
        params.validate()?;
        Ok(params)
    }

    /// Explicit parameters with the preset applied underneath them.
    pub fn resolved_params(&self) -> CliResult<ParamsConfig> {
        let mut p = self.params.clone();
        if let Some(name) = &self.preset {
            let preset = find_preset(name)?;
            let ks = p.kappa_s_over_kappa.or(preset.kappa_s_over_kappa);
            if p.g_over_kappa.is_none() {
                let ks = ks.ok_or_else(|| {
                    qd_gates::Error::InvalidInput(format!(
                        "preset {name} does not fix κ_s/κ; pass --ks to convert g/(κ+κ_s) = {} into g/κ",
                        preset.g_over_kappa_plus_ks
                    ))
                })?;
                p.g_over_kappa = Some(preset.g_over_kappa_plus_ks * (1.0 + ks));
            }
            p.kappa_s_over_kappa = ks;
        }
        Ok(p)
    }

    /// The effective configuration: preset folded into the parameters and
    /// defaults written out, so that loading it reproduces the run.
    pub fn effective(&self) -> CliResult<RunConfig> {
        let mut out = self.clone();
        let mut p = self.resolved_params()?;
        p.gamma_over_kappa.get_or_insert(DEFAULT_GAMMA);
        p.detuning_photon.get_or_insert(0.0);
        p.detuning_cavity.get_or_insert(0.0);
        p.detuning_exciton.get_or_insert(0.0);
        out.params = p;
        out.precision.get_or_insert(DEFAULT_PRECISION);
        Ok(out)
    }
}

/// Measured micropillar cavity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub g_over_kappa_plus_ks: f64,
    pub kappa_s_over_kappa: Option<f64>,
    pub quality_factor: f64,
    pub diameter_um: f64,
    pub note: &'static str,
}

impl Preset {
    pub fn g_over_kappa(&self) -> Option<f64> {
        self.kappa_s_over_kappa.map(|ks| self.g_over_kappa_plus_ks * (1.0 + ks))
    }
}

/// Sorted by name.
pub const PRESETS: [Preset; 4] = [
    Preset {
        name: "micropillar-d1.5-Q17000",
        g_over_kappa_plus_ks: 1.0,
        kappa_s_over_kappa: Some(0.7),
        quality_factor: 1.7e4,
        diameter_um: 1.5,
        note: "side-leakage ratio is reported both as κ/κ_s ≈ 0.7 and as κ_s/κ = 0.7; κ_s/κ = 0.7 is stored",
    },
    Preset {
        name: "micropillar-d1.5-Q40000",
        g_over_kappa_plus_ks: 2.4,
        kappa_s_over_kappa: None,
        quality_factor: 4e4,
        diameter_um: 1.5,
        note: "κ_s/κ not reported; pass --ks",
    },
    Preset {
        name: "micropillar-d1.5-Q8800",
        g_over_kappa_plus_ks: 0.5,
        kappa_s_over_kappa: None,
        quality_factor: 8.8e3,
        diameter_um: 1.5,
        note: "κ_s/κ not reported; pass --ks",
    },
    Preset {
        name: "micropillar-d7.3-Q65000",
        g_over_kappa_plus_ks: 0.8,
        kappa_s_over_kappa: None,
        quality_factor: 6.5e4,
        diameter_um: 7.3,
        note: "κ_s/κ not reported; pass --ks",
    },
];

pub fn find_preset(name: &str) -> CliResult<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::usage(format!("unknown preset `{name}` (known: {})", names.join(", ")))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_sorted() {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn preset_conversion() {
        let cfg = RunConfig {
            preset: Some("micropillar-d1.5-Q17000".into()),
            ..Default::default()
        };
        let p = cfg.cavity_params().unwrap();
        assert!((p.g_over_kappa - 1.7).abs() < 1e-15);
        assert_eq!(p.kappa_s_over_kappa, 0.7);
        assert_eq!(p.gamma_over_kappa, DEFAULT_GAMMA);
    }

    #[test]
    fn preset_without_side_leakage_needs_ks() {
        let mut cfg = RunConfig {
            preset: Some("micropillar-d1.5-Q40000".into()),
            ..Default::default()
        };
        let err = cfg.cavity_params().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        cfg.params.kappa_s_over_kappa = Some(0.25);
        assert!((cfg.cavity_params().unwrap().g_over_kappa - 3.0).abs() < 1e-15);
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig {
            gate: Some(GateKind::Cnot),
            params: ParamsConfig {
                g_over_kappa: Some(1.0),
                kappa_s_over_kappa: Some(0.5),
                ..Default::default()
            },
            precision: Some(4),
            ..Default::default()
        };
        let flags = RunConfig {
            params: ParamsConfig {
                g_over_kappa: Some(2.4),
                ..Default::default()
            },
            ..Default::default()
        };
        let merged = file.merged(flags);
        assert_eq!(merged.params.g_over_kappa, Some(2.4));
        assert_eq!(merged.params.kappa_s_over_kappa, Some(0.5));
        assert_eq!(merged.precision, Some(4));
        assert_eq!(merged.gate, Some(GateKind::Cnot));
    }

    #[test]
    fn input_specs() {
        assert_eq!("dd".parse::<InputSpec>().unwrap(), InputSpec::Basis("dd".into()));
        assert_eq!("alpha=0.5".parse::<InputSpec>().unwrap(), InputSpec::Alpha(0.5));
        assert_eq!(
            "[[1,0],[0,1]]".parse::<InputSpec>().unwrap(),
            InputSpec::Amplitudes(vec![[1.0, 0.0], [0.0, 1.0]])
        );
        assert!("alpha=x".parse::<InputSpec>().is_err());
        assert!(InputSpec::Basis("ddd".into()).to_state(2).is_err());
        let s = InputSpec::Amplitudes(vec![[3.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 4.0]])
            .to_state(2)
            .unwrap();
        assert!((s.norm_sq() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_round_trip_is_canonical() {
        let cfg = RunConfig {
            gate: Some(GateKind::Toffoli),
            preset: Some("micropillar-d1.5-Q17000".into()),
            input: Some(InputSpec::Alpha(0.25)),
            mode: Some(Mode::Lossy),
            ..Default::default()
        }
        .effective()
        .unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(serde_json::to_string_pretty(&back.effective().unwrap()).unwrap(), text);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"gait": "cnot"}"#).is_err());
    }
}
