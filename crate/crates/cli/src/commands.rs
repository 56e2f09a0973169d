use std::io::Write;
use std::path::{Path, PathBuf};

use qd_gates::circuits::build;
use qd_gates::metrics::{sweep, sweep_with_jobs, SweepSpec};
use qd_gates::{average_fidelity, coefficients, efficiency, feasibility, CavityParams, SimulationMode};
use serde_json::{json, Value};

use crate::cli::{Cli, Command};
use crate::config::{Format, Mode, RunConfig, PRESETS};
use crate::error::{CliError, CliResult};
use crate::output::{complex_json, state_json, Cell, Report, Table};

/// Environment variable naming the directory sweeps are written to when
/// `--out` is absent.
pub const OUT_DIR_ENV: &str = "QDGATES_OUT_DIR";

pub fn execute(cli: Cli) -> CliResult<()> {
    let mut config = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config = config.merged(cli.command.overrides());
    config = config.merged(RunConfig {
        format: cli.global.format,
        precision: cli.global.precision.map(usize::from),
        ..Default::default()
    });
    if !(1..=17).contains(&config.precision()) {
        return Err(CliError::usage(format!(
            "precision must be between 1 and 17, got {}",
            config.precision()
        )));
    }

    if cli.global.dump_config {
        let text = serde_json::to_string_pretty(&config.effective()?).expect("config serializes");
        return write_stdout(&format!("{text}\n"));
    }

    let default_format = match cli.command {
        Command::Sweep { .. } => Format::Csv,
        _ => Format::Text,
    };
    let format = config.format(default_format);
    let precision = config.precision();

    if let Command::Sweep { out, .. } = &cli.command {
        let report = cmd_sweep(&config)?;
        let text = report.render(format, precision)?;
        return match sweep_destination(out.as_deref(), &config, format) {
            Some(path) => {
                std::fs::write(&path, text).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
            None => write_stdout(&text),
        };
    }

    let report = match &cli.command {
        Command::Coeffs { .. } => cmd_coeffs(&config)?,
        Command::Simulate { .. } => cmd_simulate(&config)?,
        Command::Fidelity { .. } => cmd_fidelity(&config)?,
        Command::Efficiency { .. } => cmd_efficiency(&config)?,
        Command::Presets => cmd_presets(),
        Command::Circuit { .. } => cmd_circuit(&config)?,
        Command::Feasibility { .. } => cmd_feasibility(&config)?,
        Command::Sweep { .. } => unreachable!("handled above"),
    };
    write_stdout(&report.render(format, precision)?)
}

fn write_stdout(text: &str) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn sweep_destination(out: Option<&Path>, config: &RunConfig, format: Format) -> Option<PathBuf> {
    if let Some(path) = out {
        return Some(path.to_owned());
    }
    let dir = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty())?;
    let quantity = config.quantity?;
    let ext = match format {
        Format::Json => "json",
        Format::Csv => "csv",
        Format::Text => "txt",
    };
    Some(Path::new(&dir).join(format!("{}.{ext}", quantity.name())))
}

fn params_json(p: &CavityParams) -> Value {
    serde_json::to_value(p).expect("parameters serialize")
}

pub fn cmd_coeffs(config: &RunConfig) -> CliResult<Report> {
    let params = config.cavity_params()?;
    let c = coefficients(&params)?;
    let hot_residual = 1.0 - c.hot_norm_sq();
    let cold_residual = 1.0 - c.cold_norm_sq();
    let json = json!({
        "command": "coeffs",
        "params": params_json(&params),
        "resonant": params.is_resonant(),
        "r_hot": complex_json(c.r_hot),
        "t_hot": complex_json(c.t_hot),
        "r_cold": complex_json(c.r_cold),
        "t_cold": complex_json(c.t_cold),
        "passivity_residual": { "hot": hot_residual, "cold": cold_residual },
        "identity_residual": {
            "hot": (c.r_hot - 1.0 - c.t_hot).norm(),
            "cold": (c.r_cold - 1.0 - c.t_cold).norm(),
        },
    });
    let mut table = Table::new(&["coefficient", "re", "im", "abs"]);
    for (name, z) in [("r_hot", c.r_hot), ("t_hot", c.t_hot), ("r_cold", c.r_cold), ("t_cold", c.t_cold)] {
        table.push(vec![name.into(), z.re.into(), z.im.into(), z.norm().into()]);
    }
    Ok(Report::new(json).with_table(table))
}

pub fn cmd_simulate(config: &RunConfig) -> CliResult<Report> {
    let gate = config.gate()?;
    let circuit = build(gate);
    let input = config.input.clone().unwrap_or_default().to_state(circuit.n_spins)?;
    let mode = config.mode.unwrap_or(Mode::Ideal);
    let (sim_mode, params, closed_form) = match mode {
        Mode::Ideal => (SimulationMode::Ideal, Value::Null, Value::Null),
        Mode::Lossy => {
            let params = config.cavity_params()?;
            let coeffs = coefficients(&params)?;
            let eta = efficiency(gate, &coeffs).efficiency;
            (
                SimulationMode::lossy_uniform(&circuit, coeffs),
                params_json(&params),
                json!(eta),
            )
        }
    };
    let result = circuit.run(&input, &sim_mode)?;

    let mut table = Table::new(&["detector", "port", "outcome", "probability", "spins", "re", "im"]);
    let outcomes: Vec<Value> = result
        .outcomes
        .iter()
        .map(|b| {
            let state = b.corrected_state.as_ref().map_or(Value::Null, state_json);
            if let Some(s) = &b.corrected_state {
                for (config, amp) in s.iter() {
                    table.push(vec![
                        b.detector.as_str().into(),
                        b.port.name().into(),
                        b.outcome.to_string().into(),
                        b.probability.into(),
                        config.to_string().into(),
                        amp.re.into(),
                        amp.im.into(),
                    ]);
                }
            } else {
                table.push(vec![
                    b.detector.as_str().into(),
                    b.port.name().into(),
                    b.outcome.to_string().into(),
                    b.probability.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            json!({
                "detector": b.detector,
                "port": b.port.name(),
                "outcome": b.outcome.to_string(),
                "probability": b.probability,
                "corrected_state": state,
            })
        })
        .collect();

    let json = json!({
        "command": "simulate",
        "gate": gate,
        "mode": mode,
        "params": params,
        "input": state_json(&input),
        "outcomes": outcomes,
        "success_probability": result.success_probability,
        "lost_probability": result.lost_probability,
        "closed_form_efficiency": closed_form,
    });
    Ok(Report::new(json).with_table(table))
}

pub fn cmd_fidelity(config: &RunConfig) -> CliResult<Report> {
    let gate = config.gate()?;
    let params = config.cavity_params()?;
    let method = config.method(gate);
    let result = average_fidelity(gate, &params, method, config.alpha_samples())?;
    let mut table = Table::new(&["gate", "method", "alpha_samples", "average_fidelity", "xi", "zeta", "resonant"]);
    table.push(vec![
        gate.to_string().into(),
        method.to_string().into(),
        result.alpha_samples.into(),
        result.average_fidelity.into(),
        result.xi.into(),
        result.zeta.into(),
        result.resonant.into(),
    ]);
    let mut json = serde_json::to_value(&result).expect("fidelity serializes");
    json["command"] = json!("fidelity");
    json["params"] = params_json(&params);
    Ok(Report::new(json).with_table(table))
}

pub fn cmd_efficiency(config: &RunConfig) -> CliResult<Report> {
    let gate = config.gate()?;
    let params = config.cavity_params()?;
    let result = efficiency(gate, &coefficients(&params)?);
    let mut table = Table::new(&["gate", "efficiency", "resonant"]);
    table.push(vec![gate.to_string().into(), result.efficiency.into(), params.is_resonant().into()]);
    let json = json!({
        "command": "efficiency",
        "gate": gate,
        "params": params_json(&params),
        "efficiency": result.efficiency,
        "resonant": params.is_resonant(),
    });
    Ok(Report::new(json).with_table(table))
}

pub fn sweep_spec(config: &RunConfig) -> CliResult<SweepSpec> {
    let quantity = config
        .quantity
        .ok_or_else(|| CliError::usage("no quantity given (use --quantity)"))?;
    let mut spec = SweepSpec::new(quantity);
    if let Some([lo, hi]) = config.g_range {
        spec.g_range = (lo, hi);
    }
    if let Some([lo, hi]) = config.ks_range {
        spec.ks_range = (lo, hi);
    }
    if let Some(n) = config.resolution {
        spec.resolution = n;
    }
    if let Some(gamma) = config.params.gamma_over_kappa {
        spec.gamma_over_kappa = gamma;
    }
    spec.alpha_samples = config.alpha_samples();
    Ok(spec)
}

pub fn cmd_sweep(config: &RunConfig) -> CliResult<Report> {
    let spec = sweep_spec(config)?;
    let grid = match config.jobs {
        Some(0) => return Err(CliError::usage("--jobs must be at least 1")),
        Some(jobs) => sweep_with_jobs(&spec, jobs)?,
        None => sweep(&spec)?,
    };
    let precision = config.precision();
    let json = json!({
        "command": "sweep",
        "quantity": grid.quantity,
        "gamma_over_kappa": grid.gamma_over_kappa,
        "alpha_samples": spec.alpha_samples,
        "g_over_kappa": grid.axis_g(),
        "kappa_s_over_kappa": grid.axis_ks(),
        "values": grid.values,
    });
    let csv = grid.to_csv(precision);
    let mut report = Report::new(json);
    report.csv = Some(csv);
    Ok(report)
}

pub fn cmd_presets() -> Report {
    let mut table = Table::new(&[
        "name",
        "g_over_kappa_plus_ks",
        "kappa_s_over_kappa",
        "g_over_kappa",
        "quality_factor",
        "diameter_um",
        "note",
    ]);
    let presets: Vec<Value> = PRESETS
        .iter()
        .map(|p| {
            table.push(vec![
                p.name.into(),
                p.g_over_kappa_plus_ks.into(),
                p.kappa_s_over_kappa.into(),
                p.g_over_kappa().into(),
                p.quality_factor.into(),
                p.diameter_um.into(),
                p.note.into(),
            ]);
            json!({
                "name": p.name,
                "g_over_kappa_plus_ks": p.g_over_kappa_plus_ks,
                "kappa_s_over_kappa": p.kappa_s_over_kappa,
                "g_over_kappa": p.g_over_kappa(),
                "quality_factor": p.quality_factor,
                "diameter_um": p.diameter_um,
                "note": p.note,
            })
        })
        .collect();
    Report::new(json!({ "command": "presets", "presets": presets })).with_table(table)
}

pub fn cmd_circuit(config: &RunConfig) -> CliResult<Report> {
    let gate = config.gate()?;
    let circuit = build(gate);
    let mut report = Report::new(json!({
        "command": "circuit",
        "circuit": serde_json::to_value(&circuit).expect("circuit serializes"),
    }));
    report.exact = true;
    Ok(report)
}

pub fn cmd_feasibility(config: &RunConfig) -> CliResult<Report> {
    let params = config.cavity_params()?;
    let tau = config
        .tau
        .ok_or_else(|| CliError::usage("no photon lifetime given (use --tau, in seconds)"))?;
    let t2 = config
        .t2
        .ok_or_else(|| CliError::usage("no coherence time given (use --t2, in seconds)"))?;
    let r = feasibility(&params, tau, t2)?;
    let mut table = Table::new(&[
        "tau",
        "t2",
        "critical_photon_number",
        "min_photon_interval",
        "dephasing_penalty",
    ]);
    table.push(vec![
        tau.into(),
        t2.into(),
        r.critical_photon_number.into(),
        r.min_photon_interval.into(),
        r.dephasing_penalty.into(),
    ]);
    let json = json!({
        "command": "feasibility",
        "params": params_json(&params),
        "tau": tau,
        "t2": t2,
        "critical_photon_number": r.critical_photon_number,
        "min_photon_interval": r.min_photon_interval,
        "dephasing_penalty": r.dephasing_penalty,
    });
    Ok(Report::new(json).with_table(table))
}
