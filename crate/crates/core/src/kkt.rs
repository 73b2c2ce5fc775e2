//! Closed-form minimizers of the per-phase dual subproblems, the dual function, and
//! KKT residuals of an allocation against a set of outer multipliers.
//!
//! With outer multipliers `λ` (task completeness), `μ_n` (shuffle rate) and `β_n`
//! (deadline), the partial Lagrangian splits into one Map and one Shuffle problem per
//! device plus a single Reduce problem. The Map and Shuffle problems are positively
//! homogeneous in (load, time) so their time solutions are bang-bang on `[0, τ]`.

use std::io::Write;

use serde::Serialize;

use crate::energy::{slowest_cycle_time, uplink_rate};
use crate::error::{Error, Result};
use crate::model::{Allocation, DeviceParams, Multipliers, ReduceTiming, SystemConfig};
use crate::scalar::{clamp, pos, Real};

/// Which end of `[0, τ]` a homogeneous subproblem picks for its duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeBranch {
    Zero,
    /// Switch value exactly 0: every duration in `[0, τ]` is optimal; `τ` is reported.
    Indifferent,
    Deadline,
}

fn branch<T: Real>(rho: T) -> TimeBranch {
    if rho > T::zero() {
        TimeBranch::Deadline
    } else if rho < T::zero() {
        TimeBranch::Zero
    } else {
        TimeBranch::Indifferent
    }
}

fn branch_time<T: Real>(b: TimeBranch, tau: T) -> T {
    match b {
        TimeBranch::Zero => T::zero(),
        _ => tau,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSubSolution<T> {
    pub l_star: T,
    pub t_map_star: T,
    pub branch: TimeBranch,
    /// Effective processing rate in bits/s.
    pub m_star: T,
    pub gamma2: T,
    pub rho1: T,
    /// Minimum of the subproblem objective.
    pub value: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShuffleSubSolution<T> {
    pub e_star: T,
    pub t_shu_star: T,
    pub branch: TimeBranch,
    pub p_star: T,
    pub delta2: T,
    pub rho2: T,
    pub value: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReduceSubSolution<T> {
    pub t_red_star: T,
    pub on_floor: bool,
    pub value: T,
}

/// Map subproblem: `min κc³l³/t² + (αμ − λ)l + βt` over `0 ≤ l ≤ tf/c`, `0 ≤ t ≤ τ`.
pub fn solve_map_sub<T: Real>(
    dev: &DeviceParams<T>,
    sys: &SystemConfig<T>,
    lambda: T,
    mu_n: T,
    beta_n: T,
    tau: T,
) -> MapSubSolution<T> {
    let k = dev.energy_coeff();
    let speed = dev.full_speed();
    let drive = lambda - sys.alpha() * mu_n;
    let three = T::lit(3.0);
    let cap = three * dev.kappa * dev.c * dev.f_max * dev.f_max;
    let (m_star, gamma2) = if drive <= T::zero() {
        (T::zero(), T::zero())
    } else if drive >= cap {
        (speed, drive - cap)
    } else {
        ((drive / (three * k)).sqrt().min(speed), T::zero())
    };
    let rho1 = (T::one() + T::one()) * k * m_star * m_star * m_star - beta_n + gamma2 * speed;
    let b = branch(rho1);
    let t = branch_time(b, tau);
    MapSubSolution {
        l_star: m_star * t,
        t_map_star: t,
        branch: b,
        m_star,
        gamma2,
        rho1,
        value: -tau * pos(rho1),
    }
}

/// Shuffle subproblem: `min E + (P^c + β)t − μ t r(E/t)` over `0 ≤ E ≤ t p_max`, `0 ≤ t ≤ τ`.
pub fn solve_shuffle_sub<T: Real>(
    dev: &DeviceParams<T>,
    sys: &SystemConfig<T>,
    mu_n: T,
    beta_n: T,
    tau: T,
) -> ShuffleSubSolution<T> {
    let sigma = dev.noise_equivalent_power(sys);
    let bw = sys.rate_bandwidth();
    let p_star = clamp(mu_n * bw - sigma, T::zero(), dev.p_max);
    let delta2 = if p_star >= dev.p_max {
        pos(mu_n * bw / (sigma + dev.p_max) - T::one())
    } else {
        T::zero()
    };
    // verbatim switch form; it reduces to μ r(p*) − p* − P^c − β
    let slope = mu_n * p_star * bw / (sigma + p_star);
    let rho2 = mu_n * uplink_rate(dev, sys, p_star) - dev.p_circuit - beta_n - slope + delta2 * dev.p_max;
    let b = branch(rho2);
    let t = branch_time(b, tau);
    ShuffleSubSolution {
        e_star: p_star * t,
        t_shu_star: t,
        branch: b,
        p_star,
        delta2,
        rho2,
        value: -tau * pos(rho2),
    }
}

/// Reduce subproblem: `min Σ κc³(βL)³/t² + (Σβ_n) t` over `βL·max c/f ≤ t ≤ τ`.
pub fn solve_reduce_sub<T: Real>(
    devices: &[DeviceParams<T>],
    sys: &SystemConfig<T>,
    beta_t: &[T],
    tau: T,
) -> ReduceSubSolution<T> {
    let big_t = sys.reduce_bits();
    let floor = big_t * slowest_cycle_time(devices);
    let sum_k = devices.iter().map(|d| d.energy_coeff()).fold(T::zero(), |a, b| a + b);
    let sum_b = beta_t.iter().fold(T::zero(), |a, &b| a + b);
    let t = if sum_b > T::zero() {
        big_t * ((T::one() + T::one()) * sum_k / sum_b).cbrt()
    } else {
        tau
    };
    let t = clamp(t, floor, tau.max(floor));
    let energy = if big_t == T::zero() {
        T::zero()
    } else {
        sum_k * big_t * big_t * big_t / (t * t)
    };
    ReduceSubSolution { t_red_star: t, on_floor: t <= floor, value: energy + sum_b * t }
}

/// Dual function with every subproblem's minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct DualEvaluation<T> {
    pub value: T,
    pub map: Vec<MapSubSolution<T>>,
    pub shuffle: Vec<ShuffleSubSolution<T>>,
    pub reduce: ReduceSubSolution<T>,
}

impl<T: Real> DualEvaluation<T> {
    /// Constraint residuals at the subproblem minimizers, which form a supergradient
    /// of the dual function: `(L − Σl, αl_n − t_n r_n, t^MAP_n + t^SHU_n + t^RED − τ)`.
    pub fn supergradient(&self, sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> (T, Vec<T>, Vec<T>) {
        let sum_l = self.map.iter().fold(T::zero(), |a, m| a + m.l_star);
        let g_lambda = sys.task_bits() - sum_l;
        let g_mu = self
            .map
            .iter()
            .zip(&self.shuffle)
            .zip(devices)
            .map(|((m, s), d)| sys.alpha() * m.l_star - s.t_shu_star * uplink_rate(d, sys, s.p_star))
            .collect();
        let g_beta = self
            .map
            .iter()
            .zip(&self.shuffle)
            .map(|(m, s)| m.t_map_star + s.t_shu_star + self.reduce.t_red_star - sys.deadline())
            .collect();
        (g_lambda, g_mu, g_beta)
    }
}

fn check_multipliers<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], mult: &Multipliers<T>) -> Result<()> {
    let n = sys.n_devices();
    for got in [devices.len(), mult.mu.len(), mult.beta_t.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if !mult.is_valid() {
        return Err(Error::InvalidParameter("multipliers must be finite with mu, beta_t >= 0".into()));
    }
    Ok(())
}

pub fn evaluate_dual<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    mult: &Multipliers<T>,
) -> Result<DualEvaluation<T>> {
    check_multipliers(sys, devices, mult)?;
    let tau = sys.deadline();
    let map: Vec<_> = devices
        .iter()
        .enumerate()
        .map(|(n, d)| solve_map_sub(d, sys, mult.lambda, mult.mu[n], mult.beta_t[n], tau))
        .collect();
    let shuffle: Vec<_> = devices
        .iter()
        .enumerate()
        .map(|(n, d)| solve_shuffle_sub(d, sys, mult.mu[n], mult.beta_t[n], tau))
        .collect();
    let reduce = solve_reduce_sub(devices, sys, &mult.beta_t, tau);
    let sum_beta = mult.beta_t.iter().fold(T::zero(), |a, &b| a + b);
    let value = map.iter().fold(T::zero(), |a, m| a + m.value)
        + shuffle.iter().fold(T::zero(), |a, s| a + s.value)
        + reduce.value
        + mult.lambda * sys.task_bits()
        - tau * sum_beta;
    Ok(DualEvaluation { value, map, shuffle, reduce })
}

/// Dual function value: a lower bound on the optimal energy for any valid multipliers.
pub fn dual_value<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], mult: &Multipliers<T>) -> Result<T> {
    Ok(evaluate_dual(sys, devices, mult)?.value)
}

/// One KKT condition evaluated at a point, with the scale it is judged against.
#[derive(Debug, Clone, Serialize)]
pub struct KktEntry {
    pub condition: &'static str,
    pub device: Option<usize>,
    pub residual: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    pub entries: Vec<KktEntry>,
}

impl KktReport {
    /// Largest `|residual| / scale` over all conditions.
    pub fn max_scaled(&self) -> f64 {
        self.entries.iter().map(|e| e.residual.abs() / e.scale).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&KktEntry> {
        self.entries
            .iter()
            .max_by(|a, b| (a.residual.abs() / a.scale).total_cmp(&(b.residual.abs() / b.scale)))
    }

    pub fn get(&self, condition: &str, device: Option<usize>) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.condition == condition && e.device == device)
            .map(|e| e.residual)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["condition", "device", "residual", "scale"])?;
        for e in &self.entries {
            let dev = e.device.map(|d| d.to_string()).unwrap_or_default();
            w.write_record([e.condition, &dev, &e.residual.to_string(), &e.scale.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// KKT residuals of a shared-Reduce allocation against outer multipliers.
///
/// Inner multipliers are rebuilt from the active set: a bound counts as active when
/// its slack is within `active_tol` of its natural scale. Devices with zero load are
/// checked through the sign of their idle multipliers. Residuals carry units; each
/// entry's `scale` is the energy scale `primal` divided by the natural unit (`L` for
/// per-bit conditions, `τ` for per-second ones).
pub fn kkt_residuals<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    alloc: &Allocation<T>,
    mult: &Multipliers<T>,
    active_tol: T,
) -> Result<KktReport> {
    check_multipliers(sys, devices, mult)?;
    let t_red = match &alloc.t_red {
        ReduceTiming::Shared(t) => *t,
        ReduceTiming::PerDevice(_) => {
            return Err(Error::InvalidParameter("KKT conditions need a shared Reduce time".into()))
        }
    };
    let f = |x: T| x.as_f64();
    let tau = sys.deadline();
    let big_l = sys.task_bits();
    let alpha = sys.alpha();
    let primal = crate::energy::total_energy(sys, devices, alloc)?.total.as_f64().max(f64::MIN_POSITIVE);
    let per_bit = primal / f(big_l).max(1.0);
    let per_sec = primal / f(tau);
    let mut entries = Vec::new();
    let mut push = |condition: &'static str, device: Option<usize>, residual: f64, scale: f64| {
        entries.push(KktEntry { condition, device, residual, scale });
    };
    let (lambda, mu, beta) = (mult.lambda, &mult.mu, &mult.beta_t);
    let bw = sys.rate_bandwidth();

    for (n, d) in devices.iter().enumerate() {
        let (l, tm, ts, e) = (alloc.loads[n], alloc.t_map[n], alloc.t_shu[n], alloc.rf_energy[n]);
        let k = d.energy_coeff();
        let speed = d.full_speed();
        let sigma = d.noise_equivalent_power(sys);
        let dev = Some(n);

        // outer complementary slackness
        let deadline_slack = tm + ts + t_red - tau;
        push("cs_deadline", dev, f(beta[n] * deadline_slack), primal);
        let rate_slack = alpha * l - crate::energy::perspective_rate(d, sys, ts, e);
        push("cs_rate", dev, f(mu[n] * rate_slack), primal);

        if l > T::zero() && tm > T::zero() {
            let ratio = l / tm;
            // Map stationarity in l: 3K(l/t)² + αμ − λ − γ1 + γ2 = 0 with γ1 = 0
            let raw = lambda - alpha * mu[n] - T::lit(3.0) * k * ratio * ratio;
            let speed_active = (l - tm * speed) >= -active_tol * big_l;
            let gamma2 = if speed_active { pos(raw) } else { T::zero() };
            push("map_l", dev, f(gamma2 - raw), per_bit);
            push("cs_gamma1", dev, 0.0, primal);
            push("cs_gamma2", dev, f(gamma2 * (l - tm * speed)), primal);
            // Map stationarity in t: −2K(l/t)³ + β − γ2 f/c − γ3 + γ4 = 0 with γ3 = 0
            let raw_t = T::lit(-2.0) * k * ratio * ratio * ratio + beta[n] - gamma2 * speed;
            let at_tau = tm >= tau * (T::one() - active_tol);
            let gamma4 = if at_tau { pos(-raw_t) } else { T::zero() };
            push("map_t", dev, f(raw_t + gamma4), per_sec);
            push("cs_gamma3", dev, 0.0, primal);
            push("cs_gamma4", dev, f(gamma4 * (tm - tau)), primal);
        } else {
            // idle: γ1 = αμ − λ and γ3 = β must be non-negative
            push("map_l", dev, f(pos(lambda - alpha * mu[n])), per_bit);
            push("cs_gamma1", dev, f((alpha * mu[n] - lambda) * l), primal);
            push("cs_gamma2", dev, 0.0, primal);
            push("map_t", dev, 0.0, per_sec);
            push("cs_gamma3", dev, f(beta[n] * tm), primal);
            push("cs_gamma4", dev, 0.0, primal);
        }

        if ts > T::zero() && e > T::zero() {
            let p = e / ts;
            let slope = bw / (sigma + p);
            // Shuffle stationarity in E: 1 − δ1 + δ2 − μ r'(p) = 0 with δ1 = 0
            let raw = mu[n] * slope - T::one();
            let cap_active = p >= d.p_max * (T::one() - active_tol);
            let delta2 = if cap_active { pos(raw) } else { T::zero() };
            push("shu_e", dev, f(T::one() + delta2 - mu[n] * slope), 1.0);
            push("cs_delta1", dev, 0.0, primal);
            push("cs_delta2", dev, f(delta2 * (e - ts * d.p_max)), primal);
            // Shuffle stationarity in t: μ p r'(p) − μ r(p) + P^c + β − δ2 p_max − δ3 + δ4 = 0
            let raw_t = mu[n] * p * slope - mu[n] * uplink_rate(d, sys, p) + d.p_circuit + beta[n]
                - delta2 * d.p_max;
            let at_tau = ts >= tau * (T::one() - active_tol);
            let delta4 = if at_tau { pos(-raw_t) } else { T::zero() };
            push("shu_t", dev, f(raw_t + delta4), per_sec);
            push("cs_delta3", dev, 0.0, primal);
            push("cs_delta4", dev, f(delta4 * (ts - tau)), primal);
        } else {
            // idle radio: the subproblem must prefer t = 0, i.e. δ3 = −ρ2 ≥ 0
            let sub = solve_shuffle_sub(d, sys, mu[n], beta[n], tau);
            push("shu_e", dev, 0.0, 1.0);
            push("cs_delta1", dev, f(e), primal);
            push("cs_delta2", dev, 0.0, primal);
            push("shu_t", dev, f(pos(sub.rho2)), per_sec);
            push("cs_delta3", dev, f(-sub.rho2 * ts), primal);
            push("cs_delta4", dev, 0.0, primal);
        }
    }

    // Reduce stationarity: ε2 − ε1 − 2ΣK (βL/t)³ + Σβ = 0
    let big_t = sys.reduce_bits();
    let floor = big_t * slowest_cycle_time(devices);
    let sum_k = devices.iter().map(|d| d.energy_coeff()).fold(T::zero(), |a, b| a + b);
    let sum_b = beta.iter().fold(T::zero(), |a, &b| a + b);
    let cube = if big_t == T::zero() { T::zero() } else { (big_t / t_red).powi(3) };
    let raw = sum_b - (T::one() + T::one()) * sum_k * cube;
    let on_floor = t_red - floor <= active_tol * tau;
    let at_tau = t_red >= tau * (T::one() - active_tol);
    let eps1 = if on_floor { pos(raw) } else { T::zero() };
    let eps2 = if at_tau { pos(-raw) } else { T::zero() };
    push("red_t", None, f(raw - eps1 + eps2), per_sec);
    push("cs_eps1", None, f(eps1 * (floor - t_red)), primal);
    push("cs_eps2", None, f(eps2 * (t_red - tau)), primal);

    let sum_l = alloc.loads.iter().fold(T::zero(), |a, &b| a + b);
    push("primal_task", None, f(sum_l - big_l), f(big_l).max(1.0));
    Ok(KktReport { entries })
}
