//! Domain types: devices, the shared system configuration, allocations, multipliers,
//! and the random device population sampler.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compute and radio capabilities of one device. All quantities SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams<T> {
    /// Effective switched capacitance coefficient.
    pub kappa: T,
    /// CPU cycles needed per input bit.
    pub c: T,
    /// Maximum CPU frequency in cycles/s.
    pub f_max: T,
    /// Uplink channel power gain.
    pub h: T,
    /// Maximum RF transmit power in W.
    pub p_max: T,
    /// Constant circuit power of the radio in W.
    pub p_circuit: T,
}

impl<T: Real> DeviceParams<T> {
    pub fn new(kappa: T, c: T, f_max: T, h: T, p_max: T, p_circuit: T) -> Result<Self> {
        let dev = Self { kappa, c, f_max, h, p_max, p_circuit };
        dev.validate()?;
        Ok(dev)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("kappa", self.kappa),
            ("c", self.c),
            ("f_max", self.f_max),
            ("h", self.h),
            ("p_max", self.p_max),
            ("p_circuit", self.p_circuit),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "device field {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Bits per second processed at full CPU speed, `f_max / c`.
    #[inline]
    pub fn full_speed(&self) -> T {
        self.f_max / self.c
    }

    /// `κ c³`, the coefficient of the cubic computing energy.
    #[inline]
    pub fn energy_coeff(&self) -> T {
        self.kappa * self.c * self.c * self.c
    }

    /// Noise power referred to the transmitter, `Γ N₀ B / h`.
    #[inline]
    pub fn noise_equivalent_power(&self, sys: &SystemConfig<T>) -> T {
        sys.snr_gap * sys.noise_psd * sys.bandwidth / self.h
    }

    pub fn cast<U: Real>(&self) -> DeviceParams<U> {
        let c = |x: T| U::lit(x.as_f64());
        DeviceParams {
            kappa: c(self.kappa),
            c: c(self.c),
            f_max: c(self.f_max),
            h: c(self.h),
            p_max: c(self.p_max),
            p_circuit: c(self.p_circuit),
        }
    }
}

/// Task and network parameters shared by every device.
///
/// `alpha` is derived as `(n_devices - 1) * beta` and cannot be set independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystemConfig<T>", bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SystemConfig<T> {
    n_devices: usize,
    task_bits: T,
    beta: T,
    alpha: T,
    deadline: T,
    bandwidth: T,
    noise_psd: T,
    snr_gap: T,
    /// Divide the ln-based rate by ln 2 so that rates are in bits/s.
    #[serde(default)]
    strict_bits: bool,
}

#[derive(Deserialize)]
struct RawSystemConfig<T> {
    n_devices: usize,
    task_bits: T,
    beta: T,
    alpha: T,
    deadline: T,
    bandwidth: T,
    noise_psd: T,
    snr_gap: T,
    #[serde(default)]
    strict_bits: bool,
}

impl<T: Real> TryFrom<RawSystemConfig<T>> for SystemConfig<T> {
    type Error = Error;

    fn try_from(raw: RawSystemConfig<T>) -> Result<Self> {
        let sys = make_system(
            raw.n_devices,
            raw.task_bits,
            raw.beta,
            raw.deadline,
            raw.bandwidth,
            raw.noise_psd,
            raw.snr_gap,
        )?
        .with_strict_bits(raw.strict_bits);
        if sys.alpha != raw.alpha {
            return Err(Error::InvalidParameter(format!(
                "alpha {} inconsistent with (n_devices - 1) * beta = {}",
                raw.alpha, sys.alpha
            )));
        }
        Ok(sys)
    }
}

/// Builds a validated [`SystemConfig`]; `alpha` is computed as `(n - 1) * beta`.
pub fn make_system<T: Real>(
    n: usize,
    task_bits: T,
    beta: T,
    deadline: T,
    bandwidth: T,
    noise_psd: T,
    snr_gap: T,
) -> Result<SystemConfig<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n_devices must be >= 1".into()));
    }
    let check = |name: &str, v: T, strict: bool| -> Result<()> {
        let ok = v.is_finite() && if strict { v > T::zero() } else { v >= T::zero() };
        if ok {
            Ok(())
        } else {
            let rel = if strict { "> 0" } else { ">= 0" };
            Err(Error::InvalidParameter(format!("{name} must be finite and {rel}, got {v}")))
        }
    };
    check("task_bits", task_bits, false)?;
    check("beta", beta, false)?;
    check("deadline", deadline, true)?;
    check("bandwidth", bandwidth, true)?;
    check("noise_psd", noise_psd, true)?;
    if !(snr_gap.is_finite() && snr_gap >= T::one()) {
        return Err(Error::InvalidParameter(format!("snr_gap must be >= 1, got {snr_gap}")));
    }
    let alpha = T::from_usize(n - 1).expect("device count") * beta;
    Ok(SystemConfig {
        n_devices: n,
        task_bits,
        beta,
        alpha,
        deadline,
        bandwidth,
        noise_psd,
        snr_gap,
        strict_bits: false,
    })
}

impl<T: Real> SystemConfig<T> {
    pub fn n_devices(&self) -> usize {
        self.n_devices
    }
    pub fn task_bits(&self) -> T {
        self.task_bits
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn deadline(&self) -> T {
        self.deadline
    }
    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }
    pub fn noise_psd(&self) -> T {
        self.noise_psd
    }
    pub fn snr_gap(&self) -> T {
        self.snr_gap
    }
    pub fn strict_bits(&self) -> bool {
        self.strict_bits
    }

    /// Size `βL` of the intermediate results every device combines in the Reduce phase.
    pub fn reduce_bits(&self) -> T {
        self.beta * self.task_bits
    }

    /// Bandwidth as it appears inside the rate formula: `B`, or `B / ln 2` in strict-bit mode.
    pub fn rate_bandwidth(&self) -> T {
        if self.strict_bits {
            self.bandwidth / T::lit(std::f64::consts::LN_2)
        } else {
            self.bandwidth
        }
    }

    pub fn with_strict_bits(mut self, strict: bool) -> Self {
        self.strict_bits = strict;
        self
    }

    /// Same system with a different task size; `beta` (hence `alpha`) is kept.
    pub fn with_task_bits(mut self, task_bits: T) -> Result<Self> {
        if !(task_bits.is_finite() && task_bits >= T::zero()) {
            return Err(Error::InvalidParameter(format!("task_bits must be >= 0, got {task_bits}")));
        }
        self.task_bits = task_bits;
        Ok(self)
    }

    pub fn with_deadline(mut self, deadline: T) -> Result<Self> {
        if !(deadline.is_finite() && deadline > T::zero()) {
            return Err(Error::InvalidParameter(format!("deadline must be > 0, got {deadline}")));
        }
        self.deadline = deadline;
        Ok(self)
    }
}

/// Reduce-phase durations: one shared value, or one per device when devices run at
/// full CPU speed (the NoDFS family).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReduceTiming<T> {
    Shared(T),
    PerDevice(Vec<T>),
}

impl<T: Real> ReduceTiming<T> {
    pub fn get(&self, n: usize) -> T {
        match self {
            ReduceTiming::Shared(t) => *t,
            ReduceTiming::PerDevice(ts) => ts[n],
        }
    }
}

/// Decision variables of the convexified problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation<T> {
    pub loads: Vec<T>,
    pub t_map: Vec<T>,
    pub t_shu: Vec<T>,
    pub t_red: ReduceTiming<T>,
    pub rf_energy: Vec<T>,
}

impl<T: Real> Allocation<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            loads: vec![T::zero(); n],
            t_map: vec![T::zero(); n],
            t_shu: vec![T::zero(); n],
            t_red: ReduceTiming::Shared(T::zero()),
            rf_energy: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    /// RF transmit power `E_n / t^SHU_n`, taken as 0 for an idle radio.
    pub fn power(&self, n: usize) -> T {
        if self.t_shu[n] > T::zero() {
            self.rf_energy[n] / self.t_shu[n]
        } else {
            T::zero()
        }
    }
}

/// Outer Lagrange multipliers: task completeness, shuffle rate, and per-device deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers<T> {
    pub lambda: T,
    pub mu: Vec<T>,
    pub beta_t: Vec<T>,
}

impl<T: Real> Multipliers<T> {
    pub fn zeros(n: usize) -> Self {
        Self { lambda: T::zero(), mu: vec![T::zero(); n], beta_t: vec![T::zero(); n] }
    }

    pub fn is_valid(&self) -> bool {
        self.lambda.is_finite()
            && self.mu.iter().all(|m| m.is_finite() && *m >= T::zero())
            && self.beta_t.iter().all(|b| b.is_finite() && *b >= T::zero())
    }
}

/// Per-phase, per-device energies in J.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub e_map: Vec<T>,
    pub e_shu: Vec<T>,
    pub e_red: Vec<T>,
    pub total: T,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn from_parts(e_map: Vec<T>, e_shu: Vec<T>, e_red: Vec<T>) -> Self {
        let total = e_map.iter().chain(&e_shu).chain(&e_red).fold(T::zero(), |a, &b| a + b);
        Self { e_map, e_shu, e_red, total }
    }

    pub fn map_total(&self) -> T {
        self.e_map.iter().fold(T::zero(), |a, &b| a + b)
    }
    pub fn shuffle_total(&self) -> T {
        self.e_shu.iter().fold(T::zero(), |a, &b| a + b)
    }
    pub fn reduce_total(&self) -> T {
        self.e_red.iter().fold(T::zero(), |a, &b| a + b)
    }
}

/// How the channel gain `h` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// `h = |g|²` with `g ~ CN(0, variance)`: exponential power gain with mean `variance`.
    PowerGain { variance: f64 },
    /// `h = |g|`, the Rayleigh-distributed magnitude.
    Magnitude { variance: f64 },
    /// Every device gets the same gain.
    Fixed { h: f64 },
}

/// Uniform bounds for each device parameter plus the channel model. SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub kappa: (f64, f64),
    pub c: (f64, f64),
    pub f_max: (f64, f64),
    pub p_max: (f64, f64),
    pub p_circuit: (f64, f64),
    pub channel: ChannelModel,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            kappa: (1e-28, 1e-27),
            c: (500.0, 1500.0),
            f_max: (1e9, 3e9),
            p_max: (10e-3, 25e-3),
            p_circuit: (10e-3, 25e-3),
            channel: ChannelModel::PowerGain { variance: 1e-3 },
        }
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("kappa", self.kappa),
            ("c", self.c),
            ("f_max", self.f_max),
            ("p_max", self.p_max),
            ("p_circuit", self.p_circuit),
        ];
        for (name, (lower, upper)) in ranges {
            if !(lower.is_finite() && upper.is_finite()) || lower > upper {
                return Err(Error::InvalidBounds { name, lower, upper });
            }
            if lower <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} lower bound must be > 0")));
            }
        }
        match self.channel {
            ChannelModel::PowerGain { variance } | ChannelModel::Magnitude { variance }
                if !(variance.is_finite() && variance > 0.0) =>
            {
                Err(Error::InvalidParameter(format!("channel variance must be > 0, got {variance}")))
            }
            ChannelModel::Fixed { h } if !(h.is_finite() && h > 0.0) => {
                Err(Error::InvalidParameter(format!("fixed channel gain must be > 0, got {h}")))
            }
            _ => Ok(()),
        }
    }
}

/// Mixes a seed with a stream key (splitmix64 finalizer). Used to derive independent,
/// reproducible seeds for trials and cells.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    let mut z = seed ^ key.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws `n` devices. Device `i` uses its own ChaCha stream keyed by `(seed, i)`, so the
/// population does not depend on sampling order.
pub fn sample_population<T: Real>(
    seed: u64,
    spec: &PopulationSpec,
    n: usize,
) -> Result<Vec<DeviceParams<T>>> {
    if n == 0 {
        return Err(Error::InvalidParameter("population size must be >= 1".into()));
    }
    spec.validate()?;
    let devices = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let kappa = uniform(&mut rng, spec.kappa);
            let c = uniform(&mut rng, spec.c);
            let f_max = uniform(&mut rng, spec.f_max);
            let p_max = uniform(&mut rng, spec.p_max);
            let p_circuit = uniform(&mut rng, spec.p_circuit);
            let h = match spec.channel {
                ChannelModel::PowerGain { variance } | ChannelModel::Magnitude { variance } => {
                    let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("variance > 0");
                    let (re, im) = (normal.sample(&mut rng), normal.sample(&mut rng));
                    let power = re * re + im * im;
                    match spec.channel {
                        ChannelModel::Magnitude { .. } => power.sqrt(),
                        _ => power,
                    }
                }
                ChannelModel::Fixed { h } => h,
            };
            // a zero draw has probability zero but would violate the device invariant
            let h = h.max(f64::MIN_POSITIVE);
            DeviceParams {
                kappa: T::lit(kappa),
                c: T::lit(c),
                f_max: T::lit(f_max),
                h: T::lit(h),
                p_max: T::lit(p_max),
                p_circuit: T::lit(p_circuit),
            }
        })
        .collect();
    Ok(devices)
}

/// Writes a population as CSV with header `idx,kappa,c,f_max,h,p_max,p_circuit`.
pub fn write_population_csv<T: Real, W: Write>(out: W, devices: &[DeviceParams<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["idx", "kappa", "c", "f_max", "h", "p_max", "p_circuit"])?;
    for (i, d) in devices.iter().enumerate() {
        w.write_record([
            i.to_string(),
            d.kappa.to_string(),
            d.c.to_string(),
            d.f_max.to_string(),
            d.h.to_string(),
            d.p_max.to_string(),
            d.p_circuit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
