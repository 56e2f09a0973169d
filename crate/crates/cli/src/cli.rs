use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qd_gates::metrics::SweepQuantity;

use crate::config::{Format, GateArg, InputSpec, MethodArg, Mode, ParamsConfig, RunConfig};

/// Simulate photon-mediated CNOT and Toffoli gates on quantum-dot spins in
/// double-sided microcavities.
#[derive(Debug, Parser)]
#[command(name = "qdgates", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output format (default: text; csv for sweep).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Significant digits for printed numbers.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=17))]
    pub precision: Option<u8>,
    /// JSON run configuration; command-line flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

/// Cavity parameters in units of the output-mode decay rate κ.
#[derive(Debug, Clone, Default, Args)]
pub struct CavityArgs {
    /// Coupling strength g/κ.
    #[arg(long = "g", value_name = "G", allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Side leakage κ_s/κ.
    #[arg(long, value_name = "KS", allow_negative_numbers = true)]
    pub ks: Option<f64>,
    /// Dipole decay γ/κ [default: 0.1].
    #[arg(long, value_name = "GAMMA", allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Probe detuning (ω − ω₀)/κ.
    #[arg(long, value_name = "D", allow_negative_numbers = true)]
    pub detuning: Option<f64>,
    /// Cavity detuning (ω_c − ω₀)/κ.
    #[arg(long, value_name = "D", allow_negative_numbers = true)]
    pub detuning_cavity: Option<f64>,
    /// Trion detuning (ω_X − ω₀)/κ.
    #[arg(long, value_name = "D", allow_negative_numbers = true)]
    pub detuning_exciton: Option<f64>,
    /// Named micropillar cavity (see `presets`).
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
}

impl CavityArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            preset: self.preset.clone(),
            params: ParamsConfig {
                g_over_kappa: self.g,
                kappa_s_over_kappa: self.ks,
                gamma_over_kappa: self.gamma,
                detuning_photon: self.detuning,
                detuning_cavity: self.detuning_cavity,
                detuning_exciton: self.detuning_exciton,
            },
            ..Default::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reflection and transmission coefficients of the coupled and uncoupled cavity.
    Coeffs {
        #[command(flatten)]
        cavity: CavityArgs,
    },
    /// Run a gate circuit and list every heralded outcome.
    Simulate {
        #[arg(long, value_enum)]
        gate: Option<GateArg>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Spin input: basis label (e.g. `dd`), `alpha=<rad>`, or `[[re,im],...]`.
        #[arg(long, allow_hyphen_values = true)]
        input: Option<InputSpec>,
        #[command(flatten)]
        cavity: CavityArgs,
    },
    /// Average gate fidelity over the input angle.
    Fidelity {
        #[arg(long, value_enum)]
        gate: Option<GateArg>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Quadrature nodes over the input angle.
        #[arg(long)]
        alpha_samples: Option<usize>,
        #[command(flatten)]
        cavity: CavityArgs,
    },
    /// Closed-form gate efficiency.
    Efficiency {
        #[arg(long, value_enum)]
        gate: Option<GateArg>,
        #[command(flatten)]
        cavity: CavityArgs,
    },
    /// Evaluate a quantity on a (g/κ, κ_s/κ) grid.
    Sweep {
        /// F_CNOT, F_Toffoli, eta_CNOT or eta_Toffoli.
        #[arg(long)]
        quantity: Option<SweepQuantity>,
        /// g/κ range as `lo,hi` [default: 0,3].
        #[arg(long, value_parser = parse_range)]
        g_range: Option<[f64; 2]>,
        /// κ_s/κ range as `lo,hi` [default: 0,1].
        #[arg(long, value_parser = parse_range)]
        ks_range: Option<[f64; 2]>,
        /// Points per axis [default: 101].
        #[arg(long)]
        resolution: Option<usize>,
        /// Dipole decay γ/κ [default: 0.1].
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long)]
        alpha_samples: Option<usize>,
        /// Worker threads [default: all cores].
        #[arg(long)]
        jobs: Option<usize>,
        /// Output file; defaults to $QDGATES_OUT_DIR/<quantity>.<ext>, else stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// List the measured micropillar cavities available as presets.
    Presets,
    /// Print a circuit definition.
    Circuit {
        #[arg(long, value_enum)]
        gate: Option<GateArg>,
    },
    /// Critical photon number, photon spacing and dephasing penalty.
    Feasibility {
        /// Cavity photon lifetime in seconds.
        #[arg(long)]
        tau: Option<f64>,
        /// Exciton coherence time in seconds.
        #[arg(long)]
        t2: Option<f64>,
        #[command(flatten)]
        cavity: CavityArgs,
    },
}

impl Command {
    /// Settings given on the command line, as a config layer.
    pub fn overrides(&self) -> RunConfig {
        match self {
            Command::Coeffs { cavity } => cavity.overrides(),
            Command::Simulate {
                gate,
                mode,
                input,
                cavity,
            } => RunConfig {
                gate: gate.map(Into::into),
                mode: *mode,
                input: input.clone(),
                ..cavity.overrides()
            },
            Command::Fidelity {
                gate,
                method,
                alpha_samples,
                cavity,
            } => RunConfig {
                gate: gate.map(Into::into),
                method: method.map(Into::into),
                alpha_samples: *alpha_samples,
                ..cavity.overrides()
            },
            Command::Efficiency { gate, cavity } => RunConfig {
                gate: gate.map(Into::into),
                ..cavity.overrides()
            },
            Command::Sweep {
                quantity,
                g_range,
                ks_range,
                resolution,
                gamma,
                alpha_samples,
                jobs,
                out: _,
            } => RunConfig {
                quantity: *quantity,
                g_range: *g_range,
                ks_range: *ks_range,
                resolution: *resolution,
                alpha_samples: *alpha_samples,
                jobs: *jobs,
                params: ParamsConfig {
                    gamma_over_kappa: *gamma,
                    ..Default::default()
                },
                ..Default::default()
            },
            Command::Presets => RunConfig::default(),
            Command::Circuit { gate } => RunConfig {
                gate: gate.map(Into::into),
                ..Default::default()
            },
            Command::Feasibility { tau, t2, cavity } => RunConfig {
                tau: *tau,
                t2: *t2,
                ..cavity.overrides()
            },
        }
    }
}

fn parse_range(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{x}` is not a number"))
    };
    Ok([parse(lo)?, parse(hi)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0,3").unwrap(), [0.0, 3.0]);
        assert_eq!(parse_range(" 0.5 , 1 ").unwrap(), [0.5, 1.0]);
        assert!(parse_range("0").is_err());
        assert!(parse_range("a,1").is_err());
    }

    #[test]
    fn negative_detuning_parses() {
        let cli = Cli::try_parse_from(["qdgates", "coeffs", "--g", "1", "--ks", "0", "--detuning", "-0.5"]).unwrap();
        let cfg = cli.command.overrides();
        assert_eq!(cfg.params.detuning_photon, Some(-0.5));
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["qdgates", "presets", "--format", "json", "--precision", "4"]).unwrap();
        assert_eq!(cli.global.format, Some(Format::Json));
        assert_eq!(cli.global.precision, Some(4));
        assert!(Cli::try_parse_from(["qdgates", "presets", "--precision", "0"]).is_err());
    }
}
