//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::schemes::{scheme_lmax, solve_scheme, SchemeId};
use crate::solver::{SolveStatus, SolverOptions};

use super::config::{load_config, ExperimentConfig};
use super::experiments::{self, trial_population, write_rows, write_trials, Sweep, TrialRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mrfog", version, about = "Energy-optimal Map-Reduce load distribution across wireless devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "MRFOG_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Scheme(s): opt, blind, nodfs, blind-nodfs, noopt. Repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    scheme: Vec<SchemeId>,
    /// CSV output path; stdout when omitted.
    #[arg(long, global = true, env = "MRFOG_OUT")]
    out: Option<PathBuf>,
    /// Certified relative gap required from the solver.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write every per-trial measurement to this CSV.
    #[arg(long, global = true)]
    log_trials: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one sampled instance (first entries of n_list and tau_ms_list).
    Solve,
    /// Maximum computing loads of the optimal and uniform splits.
    Lmax,
    /// Outage probability per scheme at the configured task size.
    Outage,
    /// Per-bit energy of each scheme against the number of devices.
    SweepN,
    /// Per-bit energy of each scheme against the deadline.
    SweepTau,
    /// Fraction of participating devices against the load ratio.
    Participation,
}

fn open_out(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn solve(cfg: &ExperimentConfig, scheme: SchemeId) -> Result<i32> {
    let n = cfg.n_list[0];
    let tau = cfg.tau_list()[0];
    let sys = cfg.system(n, tau)?;
    let devices = trial_population(cfg, n, 0)?;
    let opts = SolverOptions { gap_tol: cfg.gap_tol, feas_tol: cfg.feas_tol, ..SolverOptions::default() };
    let sol = solve_scheme(scheme, &sys, &devices, &opts)?;
    if sol.status == SolveStatus::Infeasible {
        let l_max = scheme_lmax(scheme, &sys, &devices)?;
        eprintln!("infeasible: L = {} bits exceeds l_max = {l_max} bits for scheme {scheme} (n = {n}, tau = {tau} s)", cfg.l_bits);
        return Ok(EXIT_INFEASIBLE);
    }
    sol.write_csv(open_out(cfg.out.as_ref())?)?;
    eprintln!(
        "{scheme}: status {}, energy {} J, dual bound {} J, relative gap {:e}, {} Newton steps",
        sol.status, sol.primal_value, sol.dual_bound, sol.rel_gap, sol.iterations
    );
    Ok(if sol.status == SolveStatus::Optimal { EXIT_OK } else { EXIT_NUMERICAL })
}

fn run(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(t) = cli.tol {
        cfg.gap_tol = t;
    }
    if let Some(o) = cli.out {
        cfg.out = Some(o);
    }
    if !cli.scheme.is_empty() && !matches!(cli.command, Command::Solve) {
        cfg.schemes = cli.scheme.clone();
    }
    cfg.validate()?;

    let mut log: Vec<TrialRecord> = Vec::new();
    let want_log = cli.log_trials.is_some();
    let log_ref = want_log.then_some(&mut log);
    let rows = match cli.command {
        Command::Solve => return solve(&cfg, cli.scheme.first().copied().unwrap_or(SchemeId::Opt)),
        Command::Lmax => experiments::lmax_sweep(&cfg, log_ref)?,
        Command::Outage => experiments::outage(&cfg, log_ref)?,
        Command::SweepN => experiments::energy_sweep(&cfg, Sweep::N, log_ref)?,
        Command::SweepTau => experiments::energy_sweep(&cfg, Sweep::Tau, log_ref)?,
        Command::Participation => experiments::participation(&cfg, log_ref)?,
    };
    write_rows(open_out(cfg.out.as_ref())?, &rows)?;
    if let Some(p) = &cli.log_trials {
        write_trials(BufWriter::new(File::create(p)?), &log)?;
    }
    Ok(EXIT_OK)
}

fn is_broken_pipe(e: &Error) -> bool {
    let io = match e {
        Error::Io(io) => Some(io),
        Error::Csv(c) => match c.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        },
        _ => None,
    };
    io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

/// Runs the CLI on `argv` (program name first) and returns the process exit code:
/// 0 success, 1 infeasible solve or too few feasible instances, 2 usage, config or
/// I/O error, 3 numerical failure.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        // downstream closed the pipe (`mrfog lmax | head`)
        Err(e) if is_broken_pipe(&e) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Experiment(_) => EXIT_INFEASIBLE,
                _ => EXIT_USAGE,
            }
        }
    }
}
