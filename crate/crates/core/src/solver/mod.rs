//! Certified solver for the convexified energy minimization problem.
//!
//! The primal is solved directly with a log-barrier method; every returned optimum
//! carries a rigorous lower bound obtained from the Lagrangian at the barrier
//! multipliers, minimized over a box that contains the feasible set.

pub(crate) mod barrier;
pub mod dual_ascent;
pub mod linalg;
pub mod oracle;
pub(crate) mod program;

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::energy::{check_allocation, min_rf_energy, total_energy};
use crate::error::{Error, Result};
use crate::feasibility::opt_lmax;
use crate::model::{Allocation, DeviceParams, EnergyBreakdown, Multipliers, ReduceTiming, SystemConfig};
use crate::scalar::Real;
use barrier::{minimize, BarrierOptions, Smooth};
use program::{Program, RowKind};

pub use dual_ascent::{dual_ascent, DualAscentOptions, DualAscentResult};
pub use oracle::{brute_force_oracle, OracleResolution, OracleSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical-failure",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions<T> {
    /// Required certified relative gap.
    pub gap_tol: T,
    /// Relative constraint tolerance for the returned allocation.
    pub feas_tol: T,
    pub max_newton: usize,
    /// Barrier weight multiplier between centering runs.
    pub growth: T,
    /// Relative gap the barrier keeps tightening towards once `gap_tol` is met, so
    /// that idle devices are driven to numerically zero load.
    pub polish_gap: T,
    /// Loads at or below `idle_tol · L` are reported as exactly zero.
    pub idle_tol: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            gap_tol: T::lit(1e-6),
            feas_tol: T::lit(1e-7),
            max_newton: 600,
            growth: T::lit(15.0),
            polish_gap: T::lit(1e-10),
            idle_tol: T::lit(1e-9),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution<T> {
    pub allocation: Allocation<T>,
    pub breakdown: EnergyBreakdown<T>,
    pub multipliers: Multipliers<T>,
    pub primal_value: T,
    pub dual_bound: T,
    pub rel_gap: T,
    pub status: SolveStatus,
    /// Newton steps taken.
    pub iterations: usize,
}

impl<T: Real> Solution<T> {
    pub(crate) fn infeasible(n: usize) -> Self {
        Self {
            allocation: Allocation::zeros(n),
            breakdown: EnergyBreakdown::from_parts(vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]),
            multipliers: Multipliers::zeros(n),
            primal_value: T::infinity(),
            dual_bound: T::infinity(),
            rel_gap: T::zero(),
            status: SolveStatus::Infeasible,
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Per-device rows `idx,l,t_map,t_shu,p,e_map,e_shu,e_red` and a `total` row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["idx", "l", "t_map", "t_shu", "p", "e_map", "e_shu", "e_red"])?;
        let a = &self.allocation;
        let b = &self.breakdown;
        for i in 0..a.len() {
            w.write_record([
                i.to_string(),
                a.loads[i].to_string(),
                a.t_map[i].to_string(),
                a.t_shu[i].to_string(),
                a.power(i).to_string(),
                b.e_map[i].to_string(),
                b.e_shu[i].to_string(),
                b.e_red[i].to_string(),
            ])?;
        }
        let sum = |v: &[T]| v.iter().fold(T::zero(), |acc, &x| acc + x).to_string();
        w.write_record([
            "total".to_string(),
            sum(&a.loads),
            String::new(),
            String::new(),
            String::new(),
            b.map_total().to_string(),
            b.shuffle_total().to_string(),
            b.reduce_total().to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn validate<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<()> {
    if devices.len() != sys.n_devices() {
        return Err(Error::DimensionMismatch { expected: sys.n_devices(), got: devices.len() });
    }
    devices.iter().try_for_each(|d| d.validate())
}

/// Barrier output mapped back to physical units.
pub(crate) struct Solved<T> {
    pub x: Vec<T>,
    pub bound: T,
    /// Physical inequality multipliers, one per row.
    pub z: Vec<T>,
    /// Physical equality multiplier.
    pub w: T,
    pub steps: usize,
    pub converged: bool,
}

pub(crate) fn run_program<T: Real>(mut prog: Program<T>, opts: &SolverOptions<T>) -> Option<(Program<T>, Solved<T>)> {
    let f0 = prog.objective.value(&prog.x0)?;
    if !(f0 > T::zero()) {
        return None;
    }
    prog.objective.scale = f0.recip();
    let bopts = BarrierOptions {
        target_gap: opts.polish_gap.min(opts.gap_tol),
        accept_gap: opts.gap_tol,
        growth: opts.growth,
        max_newton: opts.max_newton,
    };
    let res = minimize(&prog.objective, &prog.cons, &prog.x0, &bopts);
    let z = res.z.iter().zip(&prog.row_scale).map(|(&z, &rho)| z * f0 / rho).collect();
    let solved = Solved {
        x: res.x,
        bound: res.bound * f0,
        z,
        w: res.w * f0 / prog.eq_scale,
        steps: res.newton_steps,
        converged: res.converged,
    };
    Some((prog, solved))
}

/// Row index lookup for multiplier recovery.
pub(crate) fn row_of(prog: &Program<impl Real>, kind: RowKind) -> Option<usize> {
    prog.rows.iter().position(|&k| k == kind)
}

/// RF power implied by the eliminated energy at the barrier point, and the
/// corresponding shuffle-rate multiplier `μ = (σ + p)/B + z_cap`.
pub(crate) fn rate_multiplier<T: Real>(
    sys: &SystemConfig<T>,
    dev: &DeviceParams<T>,
    l: T,
    s: T,
    z_cap: T,
) -> T {
    if sys.alpha() == T::zero() || !(s > T::zero()) {
        return T::zero();
    }
    let sigma = dev.noise_equivalent_power(sys);
    let bw = sys.rate_bandwidth();
    let p = sigma * (sys.alpha() * l / (bw * s)).exp_m1();
    (sigma + p) / bw + z_cap
}

/// Fills RF energies from the tight rate constraint, capped by the power limit.
pub(crate) fn rf_energies<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], alloc: &mut Allocation<T>) {
    for (i, d) in devices.iter().enumerate() {
        let bits = sys.alpha() * alloc.loads[i];
        alloc.rf_energy[i] = if bits > T::zero() && alloc.t_shu[i] > T::zero() {
            min_rf_energy(d, sys, bits, alloc.t_shu[i]).min(alloc.t_shu[i] * d.p_max)
        } else {
            T::zero()
        };
    }
}

/// Zeroes devices whose load is at most `idle_tol · L` and rescales the rest so the
/// loads still sum to `L`.
pub(crate) fn snap_idle<T: Real>(alloc: &mut Allocation<T>, big_l: T, idle_tol: T) {
    let mut kept = T::zero();
    for i in 0..alloc.len() {
        if alloc.loads[i] <= idle_tol * big_l {
            alloc.loads[i] = T::zero();
            alloc.t_map[i] = T::zero();
            alloc.t_shu[i] = T::zero();
            alloc.rf_energy[i] = T::zero();
        } else {
            kept = kept + alloc.loads[i];
        }
    }
    if kept > T::zero() {
        let factor = big_l / kept;
        alloc.loads.iter_mut().for_each(|l| *l = *l * factor);
    }
}

/// Turns a solved allocation into a [`Solution`], recomputing the energy and
/// verifying feasibility and the certified gap.
pub(crate) fn finalize<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    allocation: Allocation<T>,
    multipliers: Multipliers<T>,
    bound: T,
    converged: bool,
    iterations: usize,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    let breakdown = total_energy(sys, devices, &allocation)?;
    let primal = breakdown.total;
    let bound = bound.min(primal);
    let rel_gap = (primal - bound) / primal.max(T::min_positive_value());
    let feasible = check_allocation(sys, devices, &allocation, opts.feas_tol)?.feasible;
    let status = if converged && feasible && rel_gap <= opts.gap_tol {
        SolveStatus::Optimal
    } else {
        SolveStatus::NumericalFailure
    };
    Ok(Solution { allocation, breakdown, multipliers, primal_value: primal, dual_bound: bound, rel_gap, status, iterations })
}

/// Every device at full speed and full power with the Reduce phase on its floor:
/// the only feasible point when `L = l_max`.
fn capacity_point<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<Solution<T>> {
    let cap = opt_lmax(sys, devices)?;
    let scale = sys.task_bits() / cap.l_max;
    let mut alloc = Allocation::zeros(devices.len());
    for (i, d) in devices.iter().enumerate() {
        let l = cap.per_device_terms[i] * scale;
        alloc.loads[i] = l;
        alloc.t_map[i] = l / d.full_speed();
        if sys.alpha() > T::zero() {
            alloc.t_shu[i] = sys.alpha() * l / crate::energy::uplink_rate(d, sys, d.p_max);
            alloc.rf_energy[i] = alloc.t_shu[i] * d.p_max;
        }
    }
    alloc.t_red = ReduceTiming::Shared(sys.reduce_bits() * crate::energy::slowest_cycle_time(devices));
    let breakdown = total_energy(sys, devices, &alloc)?;
    let primal = breakdown.total;
    Ok(Solution {
        allocation: alloc,
        breakdown,
        multipliers: Multipliers::zeros(devices.len()),
        primal_value: primal,
        dual_bound: primal,
        rel_gap: T::zero(),
        status: SolveStatus::Optimal,
        iterations: 0,
    })
}

/// Nothing to process: all loads zero and the Reduce phase stretched to the deadline.
pub(crate) fn empty_task<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<Solution<T>> {
    let mut alloc = Allocation::zeros(devices.len());
    alloc.t_red = ReduceTiming::Shared(sys.deadline());
    let breakdown = total_energy(sys, devices, &alloc)?;
    let primal = breakdown.total;
    Ok(Solution {
        allocation: alloc,
        breakdown,
        multipliers: Multipliers::zeros(devices.len()),
        primal_value: primal,
        dual_bound: primal,
        rel_gap: T::zero(),
        status: SolveStatus::Optimal,
        iterations: 0,
    })
}

/// Minimum-energy allocation over loads, Map and Shuffle durations, RF energies and the
/// shared Reduce time.
pub fn solve_opt<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    let big_l = sys.task_bits();
    if big_l == T::zero() {
        return empty_task(sys, devices);
    }
    let cap = opt_lmax(sys, devices)?;
    if big_l > cap.l_max {
        return Ok(Solution::infeasible(n));
    }
    if big_l >= cap.l_max * (T::one() - T::lit(1e-12)) {
        return capacity_point(sys, devices);
    }
    let Some(prog) = program::shared_reduce(sys, devices, None) else {
        return capacity_point(sys, devices);
    };
    let Some((prog, solved)) = run_program(prog, opts) else {
        return Ok(Solution { status: SolveStatus::NumericalFailure, ..Solution::infeasible(n) });
    };
    shared_solution(sys, devices, &prog, &solved, opts)
}

/// Maps a shared-Reduce program solution (optimal or uniform split) back to an allocation.
pub(crate) fn shared_solution<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    prog: &Program<T>,
    solved: &Solved<T>,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    let n = devices.len();
    let big_l = sys.task_bits();
    let tau = sys.deadline();
    let x = &solved.x;
    let mut alloc = Allocation::zeros(n);
    let mut mult = Multipliers::zeros(n);
    for (i, d) in devices.iter().enumerate() {
        alloc.loads[i] = match prog.objective.devices[i].load {
            program::Load::Fixed(v) => v * big_l,
            program::Load::Var(v) => x[v] * big_l,
        };
        alloc.t_map[i] = prog.vars.t_map[i].map_or(T::zero(), |v| x[v] * tau);
        alloc.t_shu[i] = prog.vars.t_shu[i].map_or(T::zero(), |v| x[v] * tau);
        let z = |kind| row_of(prog, kind).map_or(T::zero(), |r| solved.z[r]);
        mult.beta_t[i] = z(RowKind::Deadline(i));
        mult.mu[i] = rate_multiplier(sys, d, alloc.loads[i], alloc.t_shu[i], z(RowKind::RateCap(i)));
    }
    mult.lambda = -solved.w;
    alloc.t_red = ReduceTiming::Shared(prog.vars.t_red.map_or(T::zero(), |v| x[v] * tau));
    if prog.cons.eq.is_some() {
        snap_idle(&mut alloc, big_l, opts.idle_tol);
    }
    rf_energies(sys, devices, &mut alloc);
    finalize(sys, devices, alloc, mult, solved.bound, solved.converged, solved.steps, opts)
}
