//! `qsched`: run scheduling scenarios, verify the pulse registry and export
//! figure data.
//!
//! Exit status: 0 success, 1 verification failure, 2 usage, parse or I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qsched_core::gates::coupled_evolution;
use qsched_core::linalg::{equal_up_to_global_phase, DEFAULT_TOLERANCE};
use qsched_core::nmr::{
    apply_angle_miscalibration, compile_gate, refocused_delay, sequence_unitary, verify_sequence,
    RegistryGate, SpinSystem,
};
use qsched_core::scenario::{self, ScenarioSpec};
use qsched_core::tomography::Fig1Entry;
use qsched_core::Error;

/// Default seed for randomized checks.
const DEFAULT_SEED: u64 = 20_240_501;

#[derive(Parser)]
#[command(
    name = "qsched",
    version,
    about = "Two-party quantum scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario (Q1, Q2, Q12, Q3, Q4, Q34) or a descriptor file.
    Scenario {
        target: String,
        /// Also write the JSON report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify pulse sequences against their target unitaries.
    Verify {
        #[arg(long)]
        gate: Option<String>,
        /// Relative rf angle error applied to every pulse.
        #[arg(long)]
        miscalibration: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Random offset pairs for the refocused-delay check.
        #[arg(long, default_value_t = 0)]
        refocus_trials: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Export the figure density matrices.
    ExportFig1 {
        #[arg(long)]
        miscalibration: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the protocol transcript of a built-in scenario or descriptor file.
    Protocol { target: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Verification(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_spec(target: &str) -> Result<ScenarioSpec, Failure> {
    if scenario::BUILTIN_NAMES.contains(&target) {
        return Ok(scenario::builtin(target)?);
    }
    let path = Path::new(target);
    if !path.exists() {
        return Err(Error::UnknownScenario(target.to_string()).into());
    }
    Ok(ScenarioSpec::load(path)?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    let written = out.write_all(text.as_bytes()).and_then(|()| {
        if text.ends_with('\n') {
            Ok(())
        } else {
            out.write_all(b"\n")
        }
    });
    match written {
        // A closed pipe (e.g. `| head`) is not an error.
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(usage(e)),
        _ => Ok(()),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(usage)
}

fn cmd_scenario(target: &str, output: Option<&Path>) -> Result<(), Failure> {
    let spec = load_spec(target)?;
    let report = scenario::run_scenario(&spec, &SpinSystem::default())?;
    let json = to_json(&report)?;
    let destination = output
        .map(Path::to_path_buf)
        .or_else(|| spec.output_path.as_ref().map(PathBuf::from));
    if let Some(path) = destination {
        write_file(&path, &json)?;
    }
    emit(&json)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "success probability {:.6} below {} on common slot {:?}",
            report.success_probability,
            scenario::SUCCESS_THRESHOLD,
            report.common
        )))
    }
}

#[derive(Serialize)]
struct GateReport {
    gate: String,
    pulses: usize,
    equivalent: bool,
    residual: f64,
}

#[derive(Serialize)]
struct RefocusReport {
    trials: usize,
    seed: u64,
    max_residual: f64,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyReport {
    tolerance: f64,
    miscalibration: Option<f64>,
    gates: Vec<GateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refocus: Option<RefocusReport>,
}

fn refocus_check(trials: usize, seed: u64, tolerance: f64) -> Result<RefocusReport, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual = 0.0f64;
    for _ in 0..trials {
        let sys = SpinSystem::default().with_offsets(
            rng.random_range(-500.0..=500.0),
            rng.random_range(-500.0..=500.0),
        );
        let tau = rng.random_range(0.0..0.02);
        let achieved = sequence_unitary(&refocused_delay(tau), &sys);
        let target = coupled_evolution(tau, sys.coupling_hz);
        let report = equal_up_to_global_phase(&target, &achieved, tolerance)?;
        max_residual = max_residual.max(report.max_residual);
    }
    Ok(RefocusReport {
        trials,
        seed,
        max_residual,
        passed: max_residual <= tolerance,
    })
}

fn cmd_verify(
    gate: Option<&str>,
    miscalibration: Option<f64>,
    tolerance: f64,
    refocus_trials: usize,
    seed: u64,
) -> Result<(), Failure> {
    let sys = SpinSystem::default();
    let mut gates: Vec<RegistryGate> = match gate {
        Some(name) => vec![name.parse()?],
        None => RegistryGate::ALL.to_vec(),
    };
    gates.sort_by_key(|g| g.name());

    let mut reports = Vec::new();
    for g in gates {
        let mut seq = compile_gate(g, &sys);
        if let Some(f) = miscalibration {
            seq = apply_angle_miscalibration(&seq, f)?;
        }
        let v = verify_sequence(&seq, &g.target(), &sys, tolerance)?;
        reports.push(GateReport {
            gate: g.name().to_string(),
            pulses: seq.len(),
            equivalent: v.report.equivalent,
            residual: v.report.max_residual,
        });
    }
    let refocus = if refocus_trials > 0 {
        Some(refocus_check(refocus_trials, seed, tolerance)?)
    } else {
        None
    };
    let report = VerifyReport {
        tolerance,
        miscalibration,
        gates: reports,
        refocus,
    };
    emit(&to_json(&report)?)?;

    let failed: Vec<&str> = report
        .gates
        .iter()
        .filter(|g| !g.equivalent)
        .map(|g| g.gate.as_str())
        .collect();
    let refocus_failed = report.refocus.as_ref().is_some_and(|r| !r.passed);
    if failed.is_empty() && !refocus_failed {
        Ok(())
    } else {
        let mut msg = format!("{} gate(s) failed verification", failed.len());
        if !failed.is_empty() {
            msg.push_str(&format!(": {}", failed.join(", ")));
        }
        if refocus_failed {
            msg.push_str("; refocused delay check failed");
        }
        Err(Failure::Verification(msg))
    }
}

fn fig1_csv(entries: &[Fig1Entry]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "kind", "row", "c0", "c1", "c2", "c3"])
        .map_err(usage)?;
    for e in entries {
        let mut kinds = vec![("theory", &e.theory)];
        if let Some(sim) = &e.simulated {
            kinds.push(("simulated", sim));
        }
        for (kind, m) in kinds {
            for (r, row) in m.re.iter().enumerate() {
                let mut record = vec![e.scenario.clone(), kind.to_string(), r.to_string()];
                record.extend(row.iter().map(|x| (x + 0.0).to_string()));
                w.write_record(&record).map_err(usage)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(usage)?;
    String::from_utf8(bytes).map_err(usage)
}

fn cmd_export_fig1(
    miscalibration: Option<f64>,
    format: Format,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let entries = scenario::export_fig1(miscalibration, &SpinSystem::default())?;
    let text = match format {
        Format::Json => to_json(&entries)?,
        Format::Csv => fig1_csv(&entries)?,
    };
    match output {
        Some(path) => write_file(path, &text),
        None => emit(&text),
    }
}

fn cmd_protocol(target: &str) -> Result<(), Failure> {
    let spec = load_spec(target)?;
    let transcript = scenario::run_protocol(&spec)?;
    emit(&transcript.to_log())?;
    transcript
        .validate()
        .map_err(|e| Failure::Verification(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scenario { target, output } => cmd_scenario(target, output.as_deref()),
        Command::Verify {
            gate,
            miscalibration,
            tolerance,
            refocus_trials,
            seed,
        } => cmd_verify(
            gate.as_deref(),
            *miscalibration,
            *tolerance,
            *refocus_trials,
            *seed,
        ),
        Command::ExportFig1 {
            miscalibration,
            format,
            output,
        } => cmd_export_fig1(*miscalibration, *format, output.as_deref()),
        Command::Protocol { target } => cmd_protocol(target),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("qsched: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("qsched: {msg}");
            ExitCode::from(2)
        }
    }
}
