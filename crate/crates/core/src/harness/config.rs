//! TOML experiment configuration. Every physical quantity carries its unit in the key.
//!
//! ```toml
//! seed = 7
//! trials = 100
//! n_list = [10, 20, 30, 40, 50]
//! tau_ms_list = [100.0]
//! L_bits = 1e6
//! beta_L_bits = 100.0
//! bandwidth_hz = 15e3
//! noise_psd_w_per_hz = 1e-9
//! snr_gap = 1.0
//! schemes = ["opt", "blind", "nodfs", "blind-nodfs", "noopt"]
//!
//! [population]
//! kappa = [1e-28, 1e-27]
//! c_cycles_per_bit = [500.0, 1500.0]
//! f_max_hz = [1e9, 3e9]
//! p_max_w = [0.010, 0.025]
//! p_circuit_w = [0.010, 0.025]
//! channel = "power_gain"
//! h_variance = 1e-3
//! ```
//!
//! Missing keys take the defaults shown. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_system, ChannelModel, PopulationSpec, SystemConfig};
use crate::schemes::SchemeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// `h = |g|²`, `g ~ CN(0, h_variance)`.
    PowerGain,
    /// `h = |g|`.
    Magnitude,
    /// `h = h_fixed` for every device.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    pub kappa: [f64; 2],
    pub c_cycles_per_bit: [f64; 2],
    pub f_max_hz: [f64; 2],
    pub p_max_w: [f64; 2],
    pub p_circuit_w: [f64; 2],
    pub channel: ChannelKind,
    pub h_variance: f64,
    pub h_fixed: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        let spec = PopulationSpec::default();
        Self {
            kappa: spec.kappa.into(),
            c_cycles_per_bit: spec.c.into(),
            f_max_hz: spec.f_max.into(),
            p_max_w: spec.p_max.into(),
            p_circuit_w: spec.p_circuit.into(),
            channel: ChannelKind::PowerGain,
            h_variance: 1e-3,
            h_fixed: 1e-3,
        }
    }
}

impl PopulationConfig {
    pub fn spec(&self) -> PopulationSpec {
        let pair = |v: [f64; 2]| (v[0], v[1]);
        PopulationSpec {
            kappa: pair(self.kappa),
            c: pair(self.c_cycles_per_bit),
            f_max: pair(self.f_max_hz),
            p_max: pair(self.p_max_w),
            p_circuit: pair(self.p_circuit_w),
            channel: match self.channel {
                ChannelKind::PowerGain => ChannelModel::PowerGain { variance: self.h_variance },
                ChannelKind::Magnitude => ChannelModel::Magnitude { variance: self.h_variance },
                ChannelKind::Fixed => ChannelModel::Fixed { h: self.h_fixed },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Trials per cell (feasible instances for energy sweeps).
    pub trials: usize,
    pub n_list: Vec<usize>,
    pub tau_ms_list: Vec<f64>,
    #[serde(rename = "L_bits")]
    pub l_bits: f64,
    /// Size of the combined intermediate result; `β = beta_L_bits / L_bits`.
    #[serde(rename = "beta_L_bits")]
    pub beta_l_bits: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_w_per_hz: f64,
    pub snr_gap: f64,
    /// Divide rates by ln 2 so they are in bits/s instead of nats/s.
    pub strict_bits: bool,
    pub schemes: Vec<SchemeId>,
    /// `L / l_max` grid of the participation experiment.
    pub load_ratios: Vec<f64>,
    /// A device participates when its load exceeds `participation_tol · L`.
    pub participation_tol: f64,
    /// Energy sweeps abort when fewer than this fraction of sampled instances is feasible.
    pub min_acceptance: f64,
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub out: Option<PathBuf>,
    pub population: PopulationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 100,
            n_list: vec![10, 20, 30, 40, 50],
            tau_ms_list: (1..=8).map(|k| 25.0 * f64::from(k)).collect(),
            l_bits: 1e6,
            beta_l_bits: 100.0,
            bandwidth_hz: 15e3,
            noise_psd_w_per_hz: 1e-9,
            snr_gap: 1.0,
            strict_bits: false,
            schemes: SchemeId::ALL.to_vec(),
            load_ratios: (1..=10).map(|k| f64::from(k) / 10.0).collect(),
            participation_tol: 1e-6,
            min_acceptance: 0.01,
            gap_tol: 1e-6,
            feas_tol: 1e-7,
            out: None,
            population: PopulationConfig::default(),
        }
    }
}

/// 1-based line of `key = …` in `text`, searching `[table]` sections when given.
fn key_line(text: &str, table: Option<&str>, key: &str) -> Option<usize> {
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = Some(name.trim().to_string());
            continue;
        }
        let Some((k, _)) = line.split_once('=') else { continue };
        if k.trim() == key && section.as_deref() == table {
            return Some(i + 1);
        }
    }
    None
}

impl ExperimentConfig {
    pub fn beta(&self) -> f64 {
        if self.l_bits > 0.0 {
            self.beta_l_bits / self.l_bits
        } else {
            0.0
        }
    }

    pub fn tau_list(&self) -> Vec<f64> {
        self.tau_ms_list.iter().map(|t| t * 1e-3).collect()
    }

    /// System with `n` devices and deadline `tau` seconds at the configured task size.
    pub fn system(&self, n: usize, tau: f64) -> Result<SystemConfig<f64>> {
        Ok(make_system(n, self.l_bits, self.beta(), tau, self.bandwidth_hz, self.noise_psd_w_per_hz, self.snr_gap)?
            .with_strict_bits(self.strict_bits))
    }

    /// Checks value ranges. Returns the offending key and `[table]` on failure.
    fn check(&self) -> std::result::Result<(), (Option<&'static str>, &'static str, String)> {
        let top = |key: &'static str, msg: String| Err((None, key, msg));
        if self.trials == 0 {
            return top("trials", "trials must be >= 1".into());
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return top("n_list", "n_list must be non-empty with entries >= 1".into());
        }
        if self.tau_ms_list.is_empty() || self.tau_ms_list.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return top("tau_ms_list", "tau_ms_list must be non-empty with positive entries".into());
        }
        if !(self.l_bits.is_finite() && self.l_bits >= 0.0) {
            return top("L_bits", format!("L_bits must be >= 0, got {}", self.l_bits));
        }
        if !(self.beta_l_bits.is_finite() && self.beta_l_bits >= 0.0) {
            return top("beta_L_bits", format!("beta_L_bits must be >= 0, got {}", self.beta_l_bits));
        }
        for (key, v) in [("bandwidth_hz", self.bandwidth_hz), ("noise_psd_w_per_hz", self.noise_psd_w_per_hz)] {
            if !(v.is_finite() && v > 0.0) {
                return top(key, format!("{key} must be > 0, got {v}"));
            }
        }
        if !(self.snr_gap >= 1.0) {
            return top("snr_gap", format!("snr_gap must be >= 1, got {}", self.snr_gap));
        }
        if self.schemes.is_empty() {
            return top("schemes", "schemes must be non-empty".into());
        }
        if self.load_ratios.is_empty() || self.load_ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return top("load_ratios", "load_ratios must be non-empty with entries in (0, 1]".into());
        }
        if !(self.min_acceptance > 0.0 && self.min_acceptance <= 1.0) {
            return top("min_acceptance", "min_acceptance must be in (0, 1]".into());
        }
        for (key, v) in [("gap_tol", self.gap_tol), ("feas_tol", self.feas_tol), ("participation_tol", self.participation_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return top(key, format!("{key} must be > 0, got {v}"));
            }
        }
        let pop = &self.population;
        for (key, [lo, hi]) in [
            ("kappa", pop.kappa),
            ("c_cycles_per_bit", pop.c_cycles_per_bit),
            ("f_max_hz", pop.f_max_hz),
            ("p_max_w", pop.p_max_w),
            ("p_circuit_w", pop.p_circuit_w),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err((Some("population"), key, format!("{key} must satisfy 0 < lower <= upper, got [{lo}, {hi}]")));
            }
        }
        if let Err(e) = pop.spec().validate() {
            let key = if pop.channel == ChannelKind::Fixed { "h_fixed" } else { "h_variance" };
            return Err((Some("population"), key, e.to_string()));
        }
        Ok(())
    }

    /// Validates ranges; the message points at the offending key when it is present
    /// in `source`.
    pub fn validate_against(&self, source: Option<&str>) -> Result<()> {
        self.check().map_err(|(table, key, msg)| {
            let line = source.and_then(|s| key_line(s, table, key));
            Error::Config(match line {
                Some(l) => format!("line {l}: {msg}"),
                None => msg,
            })
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_against(None)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cfg.validate_against(Some(text))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
