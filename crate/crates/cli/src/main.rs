mod failure;
mod jobs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use qls_core::odeint::IntegratorConfig;
use serde_json::{json, Value};

use failure::Failure;
use jobs::{Context, Outcome, TransformKind};

const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    BracketTable,
    CheckScheme,
    GambierCoeffs,
    Pushforward,
    Reduce,
    ToKs2,
    ToRiccati2,
    Integrate,
    Invariant,
    Superpose,
    ExactSolve,
    Verify,
}

/// Quasi-Lie scheme toolkit for Gambier equations.
///
/// Exit codes: 0 success, 1 a precondition fails (or a check reports a
/// failure), 2 malformed input, 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "qls", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON job file.
    #[arg(long)]
    job: Option<PathBuf>,
    /// Directory for the report and CSV files; the report goes to stdout
    /// when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomised checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Factor applied to the integrator tolerances.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

fn command_name(c: Command) -> String {
    c.to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string()
}

fn dispatch(cli: &Cli, job: Option<&Value>) -> Result<Outcome, Failure> {
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(Failure::input("--tol-scale must be positive"));
    }
    let ctx = Context {
        seed: cli.seed,
        integrator: IntegratorConfig::default().scaled(cli.tol_scale),
        tol_scale: cli.tol_scale,
    };
    match cli.command {
        Command::BracketTable => jobs::bracket_table(),
        Command::CheckScheme => jobs::check_scheme_cmd(job),
        Command::GambierCoeffs => jobs::gambier_coeffs(job),
        Command::Pushforward => jobs::pushforward(job),
        Command::Reduce => jobs::transform(TransformKind::Reduce, job, &ctx),
        Command::ToKs2 => jobs::transform(TransformKind::ToKs2, job, &ctx),
        Command::ToRiccati2 => jobs::transform(TransformKind::ToRiccati2, job, &ctx),
        Command::Integrate => jobs::integrate_cmd(job, &ctx),
        Command::Invariant => jobs::invariant(job, &ctx),
        Command::Superpose => jobs::superpose(job, &ctx),
        Command::ExactSolve => jobs::exact_solve(job, &ctx),
        Command::Verify => jobs::verify(&ctx),
    }
}

fn read_job(path: &Path) -> Result<Value, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn envelope(command: &str, body: Value) -> Value {
    let mut doc = json!({ "schema": SCHEMA, "command": command });
    match body {
        Value::Object(map) => doc.as_object_mut().expect("object").extend(map),
        other => doc["result"] = other,
    }
    doc
}

fn write_outputs(out: Option<&Path>, command: &str, outcome: &Outcome) -> Result<(), Failure> {
    let report = envelope(command, outcome.report.clone());
    let text = serde_json::to_string_pretty(&report).map_err(Failure::numeric)? + "\n";
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{command}.json")), text)?;
            for (name, body) in &outcome.csv {
                fs::write(dir.join(name), body)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    let job = cli.job.as_deref().map(read_job).transpose()?;
    let outcome = dispatch(cli, job.as_ref())?;
    write_outputs(cli.out.as_deref(), &command_name(cli.command), &outcome)?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let doc = envelope(
                &command_name(cli.command),
                json!({ "error": f, "exit_code": f.kind.exit_code() }),
            );
            eprintln!("error: {f}");
            eprintln!("{}", serde_json::to_string(&doc).expect("serialisable"));
            ExitCode::from(f.kind.exit_code())
        }
    }
}
