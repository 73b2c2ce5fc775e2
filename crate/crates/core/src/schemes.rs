//! The optimal scheme and four restrictions of it used as baselines.
//!
//! * `Blind` splits the load uniformly and optimizes everything else.
//! * `NoDFS` runs every CPU at full speed (Map and Reduce), optimizing loads and radio.
//! * `BlindNoDFS` combines both restrictions; only the radio is optimized, per device.
//! * `NoOpt` also transmits at full power for the shortest possible time.
//!
//! The NoDFS family gives every device its own Reduce time `c_n βL / f^max_n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::{min_rf_energy, slowest_cycle_time, total_energy, uplink_rate};
use crate::error::{Error, Result};
use crate::feasibility::{blind_lmax, nodfs_lmax, opt_lmax};
use crate::model::{Allocation, DeviceParams, Multipliers, ReduceTiming, SystemConfig};
use crate::scalar::{clamp, Real};
use crate::solver::program::{self, RowKind};
use crate::solver::{
    empty_task, finalize, rate_multiplier, rf_energies, row_of, run_program, shared_solution, snap_idle, solve_opt,
    validate, Solution, SolveStatus, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "opt")]
    Opt,
    #[serde(rename = "blind")]
    Blind,
    #[serde(rename = "nodfs")]
    NoDfs,
    #[serde(rename = "blind-nodfs")]
    BlindNoDfs,
    #[serde(rename = "noopt")]
    NoOpt,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [SchemeId::Opt, SchemeId::Blind, SchemeId::NoDfs, SchemeId::BlindNoDfs, SchemeId::NoOpt];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Opt => "opt",
            SchemeId::Blind => "blind",
            SchemeId::NoDfs => "nodfs",
            SchemeId::BlindNoDfs => "blind-nodfs",
            SchemeId::NoOpt => "noopt",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "opt" => Ok(SchemeId::Opt),
            "blind" => Ok(SchemeId::Blind),
            "nodfs" => Ok(SchemeId::NoDfs),
            "blindnodfs" => Ok(SchemeId::BlindNoDfs),
            "noopt" => Ok(SchemeId::NoOpt),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scheme '{s}' (expected opt, blind, nodfs, blind-nodfs or noopt)"
            ))),
        }
    }
}

/// Closed-form solution for which `dual_bound = primal_value`.
fn exact<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    allocation: Allocation<T>,
    multipliers: Multipliers<T>,
) -> Result<Solution<T>> {
    let breakdown = total_energy(sys, devices, &allocation)?;
    let primal = breakdown.total;
    Ok(Solution {
        allocation,
        breakdown,
        multipliers,
        primal_value: primal,
        dual_bound: primal,
        rel_gap: T::zero(),
        status: SolveStatus::Optimal,
        iterations: 0,
    })
}

fn per_device_reduce<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Vec<T> {
    devices.iter().map(|d| sys.reduce_bits() * d.c / d.f_max).collect()
}

/// Every device at full speed and full power on the given loads, Reduce on its floor.
fn full_speed_point<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], loads: &[T]) -> Allocation<T> {
    let mut alloc = Allocation::zeros(devices.len());
    for (i, d) in devices.iter().enumerate() {
        alloc.loads[i] = loads[i];
        alloc.t_map[i] = loads[i] / d.full_speed();
        if sys.alpha() > T::zero() && loads[i] > T::zero() {
            alloc.t_shu[i] = sys.alpha() * loads[i] / uplink_rate(d, sys, d.p_max);
            alloc.rf_energy[i] = alloc.t_shu[i] * d.p_max;
        }
    }
    alloc.t_red = ReduceTiming::Shared(sys.reduce_bits() * slowest_cycle_time(devices));
    alloc
}

/// Uniform split `l_n = L/N`; Map and Shuffle times, RF energies and the shared Reduce
/// time are optimized.
pub fn solve_blind<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], opts: &SolverOptions<T>) -> Result<Solution<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    let big_l = sys.task_bits();
    if big_l == T::zero() {
        return empty_task(sys, devices);
    }
    if big_l > blind_lmax(sys, devices)?.l_max {
        return Ok(Solution::infeasible(n));
    }
    let share = big_l / T::from_usize(n).expect("device count");
    let loads = vec![share; n];
    let Some(prog) = program::shared_reduce(sys, devices, Some(&loads)) else {
        // no interior: the weakest device must run flat out. The optimal scheme's bound
        // still bounds this restriction from below.
        let alloc = full_speed_point(sys, devices, &loads);
        let opt = solve_opt(sys, devices, opts)?;
        return finalize(sys, devices, alloc, Multipliers::zeros(n), opt.dual_bound, true, opt.iterations, opts);
    };
    let Some((prog, solved)) = run_program(prog, opts) else {
        return Ok(Solution { status: SolveStatus::NumericalFailure, ..Solution::infeasible(n) });
    };
    shared_solution(sys, devices, &prog, &solved, opts)
}

/// Full CPU speed: `t^MAP_n = c_n l_n / f^max_n`, `t^RED_n = c_n βL / f^max_n`. Loads,
/// Shuffle times and RF energies are optimized.
pub fn solve_nodfs<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], opts: &SolverOptions<T>) -> Result<Solution<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    let big_l = sys.task_bits();
    let reduce = per_device_reduce(sys, devices);
    if big_l == T::zero() {
        let mut alloc = Allocation::zeros(n);
        alloc.t_red = ReduceTiming::PerDevice(reduce);
        return exact(sys, devices, alloc, Multipliers::zeros(n));
    }
    let cap = nodfs_lmax(sys, devices)?;
    if big_l > cap {
        return Ok(Solution::infeasible(n));
    }
    let tau = sys.deadline();
    let active: Vec<bool> = reduce.iter().map(|&r| r < tau).collect();
    let e_red = devices
        .iter()
        .fold(T::zero(), |a, d| a + d.kappa * d.c * d.f_max * d.f_max * sys.reduce_bits());

    let Some(prog) = program::full_speed(sys, devices, &active) else {
        // on the capacity boundary: loads proportional to each device's full-speed capacity
        let caps: Vec<T> = devices
            .iter()
            .zip(&reduce)
            .map(|(d, &r)| crate::feasibility::throughput(sys, d) * crate::scalar::pos(tau - r))
            .collect();
        let total = caps.iter().fold(T::zero(), |a, &b| a + b);
        let loads: Vec<T> = caps.iter().map(|&c| big_l * c / total).collect();
        let mut alloc = full_speed_point(sys, devices, &loads);
        alloc.t_red = ReduceTiming::PerDevice(reduce);
        return exact(sys, devices, alloc, Multipliers::zeros(n));
    };
    let Some((prog, solved)) = run_program(prog, opts) else {
        return Ok(Solution { status: SolveStatus::NumericalFailure, ..Solution::infeasible(n) });
    };
    let x = &solved.x;
    let mut alloc = Allocation::zeros(n);
    let mut mult = Multipliers::zeros(n);
    for (i, d) in devices.iter().enumerate() {
        let Some(v) = prog.vars.load[i] else { continue };
        alloc.loads[i] = x[v] * big_l;
        alloc.t_shu[i] = prog.vars.t_shu[i].map_or(T::zero(), |s| x[s] * tau);
        let z = |kind| row_of(&prog, kind).map_or(T::zero(), |r| solved.z[r]);
        mult.beta_t[i] = z(RowKind::Deadline(i));
        mult.mu[i] = rate_multiplier(sys, d, alloc.loads[i], alloc.t_shu[i], z(RowKind::RateCap(i)));
    }
    mult.lambda = -solved.w;
    snap_idle(&mut alloc, big_l, opts.idle_tol);
    for (i, d) in devices.iter().enumerate() {
        alloc.t_map[i] = alloc.loads[i] / d.full_speed();
    }
    alloc.t_red = ReduceTiming::PerDevice(reduce);
    rf_energies(sys, devices, &mut alloc);
    finalize(sys, devices, alloc, mult, solved.bound + e_red, solved.converged, solved.steps, opts)
}

/// Root of `(u − 1)eᵘ + 1 = q` for `q ≥ 0`: the normalized spectral load minimizing
/// `s (P^c + σ(e^{a/s} − 1))` over `s`, with `u = a/s`.
fn shuffle_root<T: Real>(q: T) -> T {
    if !(q > T::zero()) {
        return T::zero();
    }
    let phi = |u: T| (u - T::one()) * u.exp() + T::one();
    let (mut lo, mut hi) = (T::zero(), T::one());
    while phi(hi) < q {
        hi = hi + hi;
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Shuffle duration minimizing the radio energy of one device, given the bits to send
/// and the time left after Map and Reduce. `None` if even full power is too slow.
pub(crate) fn best_shuffle_time<T: Real>(sys: &SystemConfig<T>, d: &DeviceParams<T>, bits: T, window: T) -> Option<T> {
    if bits == T::zero() {
        return (window >= T::zero()).then_some(T::zero());
    }
    let shortest = bits / uplink_rate(d, sys, d.p_max);
    if shortest > window {
        return None;
    }
    let sigma = d.noise_equivalent_power(sys);
    let u = shuffle_root(d.p_circuit / sigma);
    let unconstrained = bits / (sys.rate_bandwidth() * u);
    Some(clamp(unconstrained, shortest, window))
}

/// Uniform split at full CPU speed; each device independently picks its Shuffle time
/// and RF energy.
pub fn solve_blind_nodfs<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], _opts: &SolverOptions<T>) -> Result<Solution<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    let share = sys.task_bits() / T::from_usize(n).expect("device count");
    let reduce = per_device_reduce(sys, devices);
    let tau = sys.deadline();
    let mut alloc = Allocation::zeros(n);
    let mut mult = Multipliers::zeros(n);
    for (i, d) in devices.iter().enumerate() {
        alloc.loads[i] = share;
        alloc.t_map[i] = share / d.full_speed();
        let window = tau - alloc.t_map[i] - reduce[i];
        let bits = sys.alpha() * share;
        let Some(s) = best_shuffle_time(sys, d, bits, window) else {
            return Ok(Solution::infeasible(n));
        };
        alloc.t_shu[i] = s;
        if bits > T::zero() {
            alloc.rf_energy[i] = min_rf_energy(d, sys, bits, s).min(s * d.p_max);
            mult.mu[i] = rate_multiplier(sys, d, share, s, T::zero());
        }
    }
    alloc.t_red = ReduceTiming::PerDevice(reduce);
    exact(sys, devices, alloc, mult)
}

/// Uniform split, full CPU speed, full RF power for the shortest Shuffle time.
pub fn solve_noopt<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<Solution<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    let share = sys.task_bits() / T::from_usize(n).expect("device count");
    let reduce = per_device_reduce(sys, devices);
    let mut alloc = full_speed_point(sys, devices, &vec![share; n]);
    for i in 0..n {
        if alloc.t_map[i] + alloc.t_shu[i] + reduce[i] > sys.deadline() {
            return Ok(Solution::infeasible(n));
        }
    }
    alloc.t_red = ReduceTiming::PerDevice(reduce);
    exact(sys, devices, alloc, Multipliers::zeros(n))
}

pub fn solve_scheme<T: Real>(
    scheme: SchemeId,
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    match scheme {
        SchemeId::Opt => solve_opt(sys, devices, opts),
        SchemeId::Blind => solve_blind(sys, devices, opts),
        SchemeId::NoDfs => solve_nodfs(sys, devices, opts),
        SchemeId::BlindNoDfs => solve_blind_nodfs(sys, devices, opts),
        SchemeId::NoOpt => solve_noopt(sys, devices),
    }
}

/// Largest task the scheme completes on this population. The uniform full-speed
/// schemes need `L/N (c/f + α/r(p^max)) + βL c/f ≤ τ` on every device.
pub fn scheme_lmax<T: Real>(scheme: SchemeId, sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<T> {
    validate(sys, devices)?;
    Ok(match scheme {
        SchemeId::Opt => opt_lmax(sys, devices)?.l_max,
        SchemeId::Blind => blind_lmax(sys, devices)?.l_max,
        SchemeId::NoDfs => nodfs_lmax(sys, devices)?,
        SchemeId::BlindNoDfs | SchemeId::NoOpt => {
            let n = T::from_usize(devices.len()).expect("device count");
            devices
                .iter()
                .map(|d| sys.deadline() / ((crate::feasibility::throughput(sys, d) * n).recip() + sys.beta() * d.c / d.f_max))
                .fold(T::infinity(), T::min)
        }
    })
}

/// Whether the scheme can complete the task at all.
pub fn scheme_feasible<T: Real>(scheme: SchemeId, sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<bool> {
    Ok(sys.task_bits() <= scheme_lmax(scheme, sys, devices)?)
}

/// Fraction of devices whose load exceeds `tol · L`.
pub fn participation_fraction<T: Real>(sol: &Solution<T>, tol: T) -> T {
    let loads = &sol.allocation.loads;
    if loads.is_empty() {
        return T::zero();
    }
    let total = loads.iter().fold(T::zero(), |a, &b| a + b);
    let count = loads.iter().filter(|&&l| l > tol * total).count();
    T::from_usize(count).expect("count") / T::from_usize(loads.len()).expect("count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::check_allocation;
    use crate::model::{make_system, sample_population, PopulationSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn instance(seed: u64, n: usize, ratio: f64) -> (SystemConfig<f64>, Vec<DeviceParams<f64>>) {
        let devs = sample_population(seed, &PopulationSpec::default(), n).unwrap();
        let s = make_system(n, 1e6, 1e-4, 0.1, 15e3, 1e-9, 1.0).unwrap();
        let lmax = opt_lmax(&s, &devs).unwrap().l_max;
        (s.with_task_bits(ratio * lmax).unwrap(), devs)
    }

    #[test]
    fn scheme_names_round_trip() {
        for id in SchemeId::ALL {
            assert_eq!(id.to_string().parse::<SchemeId>().unwrap(), id);
        }
        assert_eq!("Blind_NoDFS".parse::<SchemeId>().unwrap(), SchemeId::BlindNoDfs);
        assert!("fast".parse::<SchemeId>().is_err());
    }

    #[test]
    fn noopt_shuffle_time_by_hand() {
        let d = DeviceParams::new(1e-27, 1000.0, 2e9, 1e-3, 0.02, 0.01).unwrap();
        let s = make_system(2, 1e6, 1e-4, 1.0, 15e3, 1e-9, 1.0).unwrap();
        let sol = solve_noopt(&s, &[d, d]).unwrap();
        assert!(sol.is_optimal());
        let rate = 15e3 * (7.0f64 / 3.0).ln();
        assert_relative_eq!(sol.allocation.t_shu[0], 50.0 / rate, max_relative = 1e-12);
        assert_relative_eq!(sol.allocation.t_shu[0], 3.934e-3, max_relative = 1e-3);
        assert_relative_eq!(sol.breakdown.e_map[0], 1e-27 * 1000.0 * 5e5 * 4e18, max_relative = 1e-12);
    }

    #[test]
    fn identical_devices_make_blind_optimal() {
        let d = DeviceParams::new(5e-28, 900.0, 2e9, 2e-3, 0.02, 0.015).unwrap();
        let devs = vec![d; 3];
        let s = make_system(3, 1e6, 1e-4, 0.1, 15e3, 1e-9, 1.0).unwrap();
        let s = s.with_task_bits(0.5 * opt_lmax(&s, &devs).unwrap().l_max).unwrap();
        let opts = SolverOptions::default();
        let o = solve_opt(&s, &devs, &opts).unwrap();
        let b = solve_blind(&s, &devs, &opts).unwrap();
        assert!(o.is_optimal() && b.is_optimal());
        assert_relative_eq!(o.primal_value, b.primal_value, max_relative = 2e-6);
    }

    #[test]
    fn weak_device_breaks_blind_only() {
        let strong = DeviceParams::new(5e-28, 600.0, 3e9, 2e-3, 0.02, 0.015).unwrap();
        let weak = DeviceParams::new(5e-28, 1500.0, 1e9, 2e-3, 0.02, 0.015).unwrap();
        let devs = vec![strong, strong, weak];
        let s = make_system(3, 1e6, 1e-4, 0.1, 15e3, 1e-9, 1.0).unwrap();
        let bl = blind_lmax(&s, &devs).unwrap().l_max;
        let ol = opt_lmax(&s, &devs).unwrap().l_max;
        assert!(bl < ol);
        let s = s.with_task_bits(0.5 * (bl + ol)).unwrap();
        let opts = SolverOptions::default();
        assert_eq!(solve_blind(&s, &devs, &opts).unwrap().status, SolveStatus::Infeasible);
        assert!(solve_opt(&s, &devs, &opts).unwrap().is_optimal());
    }

    #[test]
    fn nodfs_map_energy_is_linear_in_load() {
        let (s, devs) = instance(3, 4, 0.4);
        let sol = solve_nodfs(&s, &devs, &SolverOptions::default()).unwrap();
        assert!(sol.is_optimal(), "{:?} {}", sol.status, sol.rel_gap);
        for (i, d) in devs.iter().enumerate() {
            let l = sol.allocation.loads[i];
            assert_relative_eq!(sol.breakdown.e_map[i], d.kappa * d.c * l * d.f_max * d.f_max, max_relative = 1e-9);
            let doubled = crate::energy::map_energy(d, 2.0 * l, 2.0 * l / d.full_speed()).unwrap();
            assert_relative_eq!(doubled, 2.0 * sol.breakdown.e_map[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn blind_nodfs_is_separable() {
        let (s, mut devs) = instance(8, 4, 0.3);
        let opts = SolverOptions::default();
        let a = solve_blind_nodfs(&s, &devs, &opts).unwrap();
        devs[3].p_circuit *= 1.5;
        devs[3].kappa *= 2.0;
        let b = solve_blind_nodfs(&s, &devs, &opts).unwrap();
        for i in 0..3 {
            assert_eq!(a.allocation.t_shu[i], b.allocation.t_shu[i]);
            assert_eq!(a.breakdown.e_shu[i], b.breakdown.e_shu[i]);
        }
    }

    #[test]
    fn blind_nodfs_shuffle_time_is_a_minimizer() {
        let (s, devs) = instance(9, 5, 0.5);
        let sol = solve_blind_nodfs(&s, &devs, &SolverOptions::default()).unwrap();
        for (i, d) in devs.iter().enumerate() {
            let bits = s.alpha() * sol.allocation.loads[i];
            let window = s.deadline() - sol.allocation.t_map[i] - s.reduce_bits() * d.c / d.f_max;
            let cost = |t: f64| t * d.p_circuit + min_rf_energy(d, &s, bits, t);
            let lo = bits / uplink_rate(d, &s, d.p_max);
            let best = cost(sol.allocation.t_shu[i]);
            for k in 0..=200 {
                let t = lo + (window - lo) * k as f64 / 200.0;
                assert!(best <= cost(t) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn participation_counts_loaded_devices() {
        let (s, devs) = instance(2, 5, 0.5);
        let b = solve_blind(&s, &devs, &SolverOptions::default()).unwrap();
        if b.status != SolveStatus::Infeasible {
            assert_eq!(participation_fraction(&b, 1e-6), 1.0);
        }
        let mut sol = solve_noopt(&s, &devs).unwrap();
        sol.allocation.loads = vec![0.0, 1.0, 2.0, 0.0, 3.0];
        assert_eq!(participation_fraction(&sol, 1e-6), 0.6);
    }

    #[test]
    fn every_scheme_output_is_feasible() {
        for seed in 0..6 {
            let (s, devs) = instance(seed, 3 + seed as usize, 0.3);
            for id in SchemeId::ALL {
                let sol = solve_scheme(id, &s, &devs, &SolverOptions::default()).unwrap();
                assert_eq!(scheme_feasible(id, &s, &devs).unwrap(), sol.status != SolveStatus::Infeasible, "{id}");
                if sol.status == SolveStatus::Infeasible {
                    continue;
                }
                assert!(sol.is_optimal(), "{id} seed {seed}: {:?}", sol.status);
                assert!(check_allocation(&s, &devs, &sol.allocation, 1e-7).unwrap().feasible, "{id} seed {seed}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn restriction_ordering(seed in 0u64..10_000, n in 2usize..7, ratio in 0.05..0.6f64) {
            let (s, devs) = instance(seed, n, ratio);
            let opts = SolverOptions::default();
            let v = |id| solve_scheme(id, &s, &devs, &opts).unwrap();
            let (o, b, nd, bn, no) = (v(SchemeId::Opt), v(SchemeId::Blind), v(SchemeId::NoDfs), v(SchemeId::BlindNoDfs), v(SchemeId::NoOpt));
            prop_assume!(b.status != SolveStatus::Infeasible);
            let le = |a: f64, b: f64| a <= b * (1.0 + 1e-8);
            prop_assert!(le(o.primal_value, b.primal_value));
            prop_assert!(le(b.primal_value, bn.primal_value));
            prop_assert!(le(bn.primal_value, no.primal_value));
            prop_assert!(le(o.primal_value, nd.primal_value));
            prop_assert!(le(nd.primal_value, bn.primal_value));
        }
    }
}
