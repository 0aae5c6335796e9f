//! `cstar-fiber`: verify instances of C*-bases, modules, relative tensor
//! products and fiber products.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cstar_fiber::report::Report;
use cstar_fiber::{Mat, Tol};
use serde::Serialize;

mod commands;
mod generate;
mod instance;

use commands::Output;
use instance::{Instance, MatrixSpec};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Verify(String),
}

const EXIT_FAIL: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "cstar-fiber", version, about = "Verify finite-dimensional C*-base and fiber product instances")]
struct Cli {
    /// Relative cutoff for rank decisions.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Absolute bound on residuals.
    #[arg(long, global = true)]
    tol_residual: Option<f64>,
    /// Also write the report as JSON.
    #[arg(long, global = true, value_name = "PATH")]
    json_out: Option<PathBuf>,
    /// Print bases of the computed spaces.
    #[arg(long, global = true)]
    dump_bases: bool,
    /// Seed for `generate`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every base, module and algebra of an instance.
    Check { instance: PathBuf },
    /// Relative tensor product of two modules.
    Rtp { instance: PathBuf, h: String, k: String },
    /// Fiber product of two algebras over module legs.
    Fiber { instance: PathBuf, a: String, b: String },
    /// Induced algebra of an algebra along an operator space.
    Ind { instance: PathBuf, space: String, algebra: String },
    /// Commutant of a named set of matrices.
    Commutant { instance: PathBuf, set: String },
    /// GNS base of a named state.
    Gns { instance: PathBuf, state: String },
    /// Every check plus the pairs listed in the instance's suite block.
    Suite { instance: PathBuf },
    /// Print a random instance.
    Generate,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    command: &'a str,
    instance: String,
    passed: bool,
    tolerance: [f64; 2],
    reports: &'a [Report],
    dims: &'a BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    bases: BTreeMap<String, Vec<MatrixSpec>>,
}

fn tolerance(cli: &Cli, inst: &Instance) -> Result<Tol, CliError> {
    let d = Tol::default();
    let spec = inst.tolerance.unwrap_or(instance::ToleranceSpec { rank: None, residual: None });
    let rank = cli.tol_rank.or(spec.rank).unwrap_or(d.rank_rel);
    let residual = cli.tol_residual.or(spec.residual).unwrap_or(d.residual_abs);
    Tol::new(rank, residual).map_err(|e| CliError::Input(e.to_string()))
}

fn entry(x: f64) -> f64 {
    x + 0.0
}

fn render_matrix(s: &mut String, m: &Mat) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| format!("{:+.6e}{:+.6e}i", entry(m[(r, c)].re), entry(m[(r, c)].im)))
            .collect();
        let _ = writeln!(s, "    [{}]", row.join(", "));
    }
}

fn render(command: &str, path: &str, out: &Output, show_bases: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "cstar-fiber {command} {path}");
    for r in &out.reports {
        s.push_str(&r.render());
    }
    if !out.dims.is_empty() {
        let dims: Vec<String> = out.dims.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(s, "dims: {}", dims.join(" "));
    }
    if show_bases {
        for (name, ms) in &out.bases {
            let _ = writeln!(s, "basis {name} ({} elements)", ms.len());
            for (i, m) in ms.iter().enumerate() {
                let _ = writeln!(s, "  [{i}] {}x{}", m.nrows(), m.ncols());
                render_matrix(&mut s, m);
            }
        }
    }
    let _ = writeln!(s, "RESULT: {}", if out.passed() { "PASS" } else { "FAIL" });
    s
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let (name, path) = match &cli.command {
        Command::Generate => {
            let inst = generate::generate(cli.seed);
            let text = serde_json::to_string_pretty(&inst).map_err(|e| CliError::Input(e.to_string()))?;
            println!("{text}");
            return Ok(true);
        }
        Command::Check { instance } => ("check", instance),
        Command::Rtp { instance, .. } => ("rtp", instance),
        Command::Fiber { instance, .. } => ("fiber", instance),
        Command::Ind { instance, .. } => ("ind", instance),
        Command::Commutant { instance, .. } => ("commutant", instance),
        Command::Gns { instance, .. } => ("gns", instance),
        Command::Suite { instance } => ("suite", instance),
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let inst = Instance::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let tol = tolerance(cli, &inst)?;
    let dump = cli.dump_bases;
    let out = match &cli.command {
        Command::Check { .. } => commands::check(&inst, &tol),
        Command::Rtp { h, k, .. } => commands::rtp(&inst, h, k, &tol, dump),
        Command::Fiber { a, b, .. } => commands::fiber(&inst, a, b, &tol, dump),
        Command::Ind { space, algebra, .. } => commands::ind_cmd(&inst, space, algebra, &tol, dump),
        Command::Commutant { set, .. } => commands::commutant(&inst, set, &tol),
        Command::Gns { state, .. } => commands::gns(&inst, state, &tol),
        Command::Suite { .. } => commands::suite(&inst, &tol, dump),
        Command::Generate => unreachable!("handled above"),
    }?;
    let show = dump || matches!(cli.command, Command::Commutant { .. } | Command::Gns { .. });
    let path_text = path.display().to_string();
    print!("{}", render(name, &path_text, &out, show));
    if let Some(json) = &cli.json_out {
        let bases = if show {
            out.bases
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(MatrixSpec::from_matrix).collect()))
                .collect()
        } else {
            BTreeMap::new()
        };
        let report = JsonReport {
            command: name,
            instance: path_text,
            passed: out.passed(),
            tolerance: [tol.rank_rel, tol.residual_abs],
            reports: &out.reports,
            dims: &out.dims,
            bases,
        };
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
        std::fs::write(json, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", json.display())))?;
    }
    Ok(out.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(CliError::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_FAIL)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("input error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
