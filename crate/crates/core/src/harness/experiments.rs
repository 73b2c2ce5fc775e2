//! Monte-Carlo experiments over sampled device populations.
//!
//! Trial `k` of a cell with `n` devices uses the population seeded by
//! `derive_seed(derive_seed(seed, n), k)`, so cells that share `n` see the same
//! populations and every result is a pure function of the configuration. Trials run
//! on a scoped worker pool and are aggregated in trial order.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::{blind_lmax, opt_lmax};
use crate::model::{derive_seed, sample_population, DeviceParams};
use crate::schemes::{participation_fraction, scheme_lmax, solve_scheme};
use crate::solver::{SolveStatus, SolverOptions};

use super::config::ExperimentConfig;

/// One aggregated output line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub experiment: String,
    pub scheme: String,
    pub n: usize,
    pub tau_s: f64,
    #[serde(rename = "L_bits")]
    pub l_bits: f64,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
    pub stderr: f64,
}

/// One per-trial measurement; rows are aggregates of these.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub scheme: String,
    pub n: usize,
    pub tau_s: f64,
    #[serde(rename = "L_bits")]
    pub l_bits: f64,
    pub metric: String,
    pub trial: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Device counts from `n_list` at the first deadline.
    N,
    /// Deadlines from `tau_ms_list` at the first device count.
    Tau,
}

#[derive(Debug, Clone, Copy)]
enum Stat {
    /// Sample mean with standard error `s/√k`.
    Mean,
    /// Frequency of 0/1 samples with binomial standard error.
    Proportion,
    /// Empirical quantile, reported with zero standard error.
    Quantile(f64),
    /// Sum of the samples, reported with zero standard error.
    Count,
}

struct Cell {
    experiment: &'static str,
    scheme: String,
    n: usize,
    tau_s: f64,
    l_bits: f64,
    metric: String,
    stat: Stat,
    samples: Vec<(usize, f64)>,
}

#[derive(Default)]
struct Collector {
    cells: Vec<Cell>,
}

impl Collector {
    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        experiment: &'static str,
        scheme: &str,
        n: usize,
        tau_s: f64,
        l_bits: f64,
        metric: &str,
        stat: Stat,
        samples: Vec<(usize, f64)>,
    ) {
        self.cells.push(Cell {
            experiment,
            scheme: scheme.to_string(),
            n,
            tau_s,
            l_bits,
            metric: metric.to_string(),
            stat,
            samples,
        });
    }

    fn finish(self, mut log: Option<&mut Vec<TrialRecord>>) -> Vec<ExperimentRow> {
        self.cells
            .into_iter()
            .map(|c| {
                if let Some(log) = log.as_deref_mut() {
                    log.extend(c.samples.iter().map(|&(trial, value)| TrialRecord {
                        experiment: c.experiment.to_string(),
                        scheme: c.scheme.clone(),
                        n: c.n,
                        tau_s: c.tau_s,
                        l_bits: c.l_bits,
                        metric: c.metric.clone(),
                        trial,
                        value,
                    }));
                }
                let values: Vec<f64> = c.samples.iter().map(|s| s.1).collect();
                let (value, stderr) = aggregate(&values, c.stat);
                ExperimentRow {
                    experiment: c.experiment.to_string(),
                    scheme: c.scheme,
                    n: c.n,
                    tau_s: c.tau_s,
                    l_bits: c.l_bits,
                    metric: c.metric,
                    value,
                    trials: values.len(),
                    stderr,
                }
            })
            .collect()
    }
}

fn aggregate(values: &[f64], stat: Stat) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, 0.0);
    }
    let kf = k as f64;
    let mean = values.iter().sum::<f64>() / kf;
    match stat {
        Stat::Mean => {
            let var = if k > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0) } else { 0.0 };
            (mean, (var / kf).sqrt())
        }
        Stat::Proportion => (mean, (mean * (1.0 - mean) / kf).max(0.0).sqrt()),
        Stat::Quantile(q) => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            let pos = q * (kf - 1.0);
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            (sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64), 0.0)
        }
        Stat::Count => (values.iter().sum(), 0.0),
    }
}

/// Maps `f` over `0..count` on a bounded pool of scoped threads, preserving order.
fn par_map<R: Send>(count: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(count).max(1);
    let next = AtomicUsize::new(0);
    let mut out: Vec<Option<R>> = (0..count).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= count {
                            break local;
                        }
                        local.push((i, f(i)));
                    }
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("experiment worker panicked") {
                out[i] = Some(r);
            }
        }
    });
    out.into_iter().map(|r| r.expect("every trial computed")).collect()
}

/// Population of trial `trial` in cells with `n` devices.
pub fn trial_population(cfg: &ExperimentConfig, n: usize, trial: usize) -> Result<Vec<DeviceParams<f64>>> {
    let seed = derive_seed(derive_seed(cfg.seed, n as u64), trial as u64);
    sample_population(seed, &cfg.population.spec(), n)
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions<f64> {
    SolverOptions { gap_tol: cfg.gap_tol, feas_tol: cfg.feas_tol, ..SolverOptions::default() }
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    let taus = cfg.tau_list();
    cfg.n_list.iter().flat_map(|&n| taus.iter().map(move |&t| (n, t))).collect()
}

fn enumerate(values: Vec<f64>) -> Vec<(usize, f64)> {
    values.into_iter().enumerate().collect()
}

/// Maximum loads of the optimal and uniform splits: mean and 10/50/90% quantiles.
pub fn run_lmax_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    lmax_sweep(cfg, None)
}

pub fn lmax_sweep(cfg: &ExperimentConfig, log: Option<&mut Vec<TrialRecord>>) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let mut col = Collector::default();
    for (n, tau) in cells(cfg) {
        let sys = cfg.system(n, tau)?;
        let pairs = par_map(cfg.trials, |k| -> Result<(f64, f64)> {
            let devs = trial_population(cfg, n, k)?;
            Ok((opt_lmax(&sys, &devs)?.l_max, blind_lmax(&sys, &devs)?.l_max))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (scheme, values) in [("opt", pairs.iter().map(|p| p.0).collect::<Vec<_>>()), ("blind", pairs.iter().map(|p| p.1).collect())] {
            let samples = enumerate(values);
            col.add("lmax", scheme, n, tau, cfg.l_bits, "lmax_mean", Stat::Mean, samples.clone());
            for (name, q) in [("lmax_p10", 0.1), ("lmax_p50", 0.5), ("lmax_p90", 0.9)] {
                col.add("lmax", scheme, n, tau, cfg.l_bits, name, Stat::Quantile(q), samples.clone());
            }
        }
    }
    Ok(col.finish(log))
}

/// Probability that a population cannot complete the configured task, per scheme.
pub fn run_outage(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    outage(cfg, None)
}

pub fn outage(cfg: &ExperimentConfig, log: Option<&mut Vec<TrialRecord>>) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let mut col = Collector::default();
    for (n, tau) in cells(cfg) {
        let sys = cfg.system(n, tau)?;
        let flags = par_map(cfg.trials, |k| -> Result<Vec<f64>> {
            let devs = trial_population(cfg, n, k)?;
            cfg.schemes
                .iter()
                .map(|&s| Ok(if sys.task_bits() > scheme_lmax(s, &sys, &devs)? { 1.0 } else { 0.0 }))
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        for (j, scheme) in cfg.schemes.iter().enumerate() {
            let samples = enumerate(flags.iter().map(|f| f[j]).collect());
            col.add("outage", scheme.name(), n, tau, cfg.l_bits, "outage", Stat::Proportion, samples);
        }
    }
    Ok(col.finish(log))
}

/// Per-bit energies of every configured scheme on instances feasible for both the
/// optimal and the uniform split.
pub fn run_energy_sweep(cfg: &ExperimentConfig, sweep: Sweep) -> Result<Vec<ExperimentRow>> {
    energy_sweep(cfg, sweep, None)
}

pub fn energy_sweep(cfg: &ExperimentConfig, sweep: Sweep, log: Option<&mut Vec<TrialRecord>>) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let name = match sweep {
        Sweep::N => "sweep-n",
        Sweep::Tau => "sweep-tau",
    };
    let grid: Vec<(usize, f64)> = match sweep {
        Sweep::N => cfg.n_list.iter().map(|&n| (n, cfg.tau_list()[0])).collect(),
        Sweep::Tau => cfg.tau_list().into_iter().map(|t| (cfg.n_list[0], t)).collect(),
    };
    let opts = solver_options(cfg);
    let max_attempts = (cfg.trials as f64 / cfg.min_acceptance).ceil() as usize;
    let mut col = Collector::default();
    for (n, tau) in grid {
        let sys = cfg.system(n, tau)?;
        let mut accepted = Vec::with_capacity(cfg.trials);
        let mut attempts = 0;
        while accepted.len() < cfg.trials && attempts < max_attempts {
            let devs = trial_population(cfg, n, attempts)?;
            if sys.task_bits() <= opt_lmax(&sys, &devs)?.l_max && sys.task_bits() <= blind_lmax(&sys, &devs)?.l_max {
                accepted.push(attempts);
            }
            attempts += 1;
        }
        let rate = accepted.len() as f64 / attempts.max(1) as f64;
        if accepted.len() < cfg.trials {
            return Err(Error::Experiment(format!(
                "only {} of {} sampled instances with n = {n}, tau = {tau} s are feasible (acceptance {rate:.4} < {})",
                accepted.len(),
                attempts,
                cfg.min_acceptance
            )));
        }
        let per_trial = par_map(accepted.len(), |k| -> Result<Vec<[f64; 5]>> {
            let devs = trial_population(cfg, n, accepted[k])?;
            cfg.schemes
                .iter()
                .map(|&s| {
                    let sol = solve_scheme(s, &sys, &devs, &opts)?;
                    let b = &sol.breakdown;
                    let per_bit = |e: f64| e / sys.task_bits();
                    Ok([
                        per_bit(sol.primal_value),
                        per_bit(b.map_total()),
                        per_bit(b.shuffle_total()),
                        per_bit(b.reduce_total()),
                        if sol.status == SolveStatus::Optimal { 0.0 } else { 1.0 },
                    ])
                })
                .collect()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let trial_ids = |j: usize, m: usize| -> Vec<(usize, f64)> {
            accepted.iter().zip(&per_trial).map(|(&id, v)| (id, v[j][m])).collect()
        };
        for (j, scheme) in cfg.schemes.iter().enumerate() {
            for (m, metric) in ["energy_per_bit", "map_per_bit", "shuffle_per_bit", "reduce_per_bit"].iter().enumerate() {
                col.add(name, scheme.name(), n, tau, cfg.l_bits, metric, Stat::Mean, trial_ids(j, m));
            }
            col.add(name, scheme.name(), n, tau, cfg.l_bits, "non_optimal", Stat::Count, trial_ids(j, 4));
        }
        let acc: Vec<(usize, f64)> = (0..attempts).map(|a| (a, if accepted.binary_search(&a).is_ok() { 1.0 } else { 0.0 })).collect();
        col.add(name, "all", n, tau, cfg.l_bits, "acceptance_rate", Stat::Proportion, acc);
    }
    Ok(col.finish(log))
}

/// Fraction of devices with a positive load against the load ratio `L / l_max` of the
/// optimal scheme. Trials where a scheme is infeasible at that load are skipped for
/// that scheme.
pub fn run_participation(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    participation(cfg, None)
}

pub fn participation(cfg: &ExperimentConfig, log: Option<&mut Vec<TrialRecord>>) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let n = cfg.n_list[0];
    let tau = cfg.tau_list()[0];
    let base = cfg.system(n, tau)?;
    let opts = solver_options(cfg);
    let mut col = Collector::default();
    for &ratio in &cfg.load_ratios {
        let per_trial = par_map(cfg.trials, |k| -> Result<(f64, Vec<Option<f64>>)> {
            let devs = trial_population(cfg, n, k)?;
            let sys = base.clone().with_task_bits(ratio * opt_lmax(&base, &devs)?.l_max)?;
            let fractions = cfg
                .schemes
                .iter()
                .map(|&s| {
                    let sol = solve_scheme(s, &sys, &devs, &opts)?;
                    Ok((sol.status != SolveStatus::Infeasible).then(|| participation_fraction(&sol, cfg.participation_tol)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((sys.task_bits(), fractions))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mean_l = per_trial.iter().map(|t| t.0).sum::<f64>() / per_trial.len() as f64;
        let metric = format!("participation@{ratio}");
        for (j, scheme) in cfg.schemes.iter().enumerate() {
            let samples: Vec<(usize, f64)> =
                per_trial.iter().enumerate().filter_map(|(k, t)| t.1[j].map(|v| (k, v))).collect();
            col.add("participation", scheme.name(), n, tau, mean_l, &metric, Stat::Mean, samples);
        }
    }
    Ok(col.finish(log))
}

pub fn write_rows<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["experiment", "scheme", "n", "tau_s", "L_bits", "metric", "value", "trials", "stderr"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["experiment", "scheme", "n", "tau_s", "L_bits", "metric", "trial", "value"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ChannelKind;

    fn small() -> ExperimentConfig {
        ExperimentConfig { trials: 20, n_list: vec![3, 6], tau_ms_list: vec![50.0, 100.0], ..ExperimentConfig::default() }
    }

    fn rows_to_csv(rows: &[ExperimentRow]) -> String {
        let mut buf = Vec::new();
        write_rows(&mut buf, rows).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_header_and_determinism() {
        let cfg = small();
        let a = rows_to_csv(&run_lmax_sweep(&cfg).unwrap());
        let b = rows_to_csv(&run_lmax_sweep(&cfg).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("experiment,scheme,n,tau_s,L_bits,metric,value,trials,stderr\n"));
    }

    #[test]
    fn identical_devices_give_equal_capacities() {
        let mut cfg = small();
        let p = &mut cfg.population;
        p.kappa = [5e-28; 2];
        p.c_cycles_per_bit = [1000.0; 2];
        p.f_max_hz = [2e9; 2];
        p.p_max_w = [0.02; 2];
        p.p_circuit_w = [0.015; 2];
        p.channel = ChannelKind::Fixed;
        let rows = run_lmax_sweep(&cfg).unwrap();
        for r in rows.iter().filter(|r| r.scheme == "opt") {
            let twin = rows.iter().find(|b| b.scheme == "blind" && b.n == r.n && b.tau_s == r.tau_s && b.metric == r.metric).unwrap();
            assert!((r.value - twin.value).abs() <= 1e-9 * r.value);
        }
    }

    #[test]
    fn zero_load_has_no_outage() {
        let cfg = ExperimentConfig { l_bits: 0.0, ..small() };
        for r in run_outage(&cfg).unwrap() {
            assert_eq!(r.value, 0.0);
            assert_eq!(r.stderr, 0.0);
        }
    }

    #[test]
    fn trial_log_reproduces_rows() {
        let cfg = ExperimentConfig { l_bits: 5e6, ..small() };
        let mut log = Vec::new();
        let rows = outage(&cfg, Some(&mut log)).unwrap();
        for r in &rows {
            let vals: Vec<f64> = log
                .iter()
                .filter(|t| t.scheme == r.scheme && t.n == r.n && t.tau_s == r.tau_s && t.metric == r.metric)
                .map(|t| t.value)
                .collect();
            assert_eq!(vals.len(), r.trials);
            assert_eq!(vals.iter().sum::<f64>() / vals.len() as f64, r.value);
        }
    }

    #[test]
    fn low_acceptance_aborts() {
        let cfg = ExperimentConfig { l_bits: 1e9, beta_l_bits: 1e5, min_acceptance: 0.5, ..small() };
        assert!(matches!(run_energy_sweep(&cfg, Sweep::N), Err(Error::Experiment(_))));
    }

    #[test]
    fn quantiles_and_stderr() {
        let (q, s) = aggregate(&[1.0, 2.0, 3.0, 4.0, 5.0], Stat::Quantile(0.5));
        assert_eq!((q, s), (3.0, 0.0));
        let (m, s) = aggregate(&[1.0, 3.0], Stat::Mean);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
        let (p, s) = aggregate(&[1.0, 0.0, 0.0, 1.0], Stat::Proportion);
        assert_eq!(p, 0.5);
        assert!((s - 0.25).abs() < 1e-12);
    }
}
