//! Projected supergradient ascent on the dual function.
//!
//! Each evaluation solves the `2N + 1` subproblems in closed form, so every iterate
//! yields a valid lower bound on the optimal energy. Steps are taken in normalized
//! coordinates (multipliers times `L/f̂` or `τ/f̂`, with `f̂` an energy scale) using a
//! Polyak rule whose target sits a little above the best value found so far.

use serde::Serialize;

use crate::kkt::evaluate_dual;
use crate::model::{DeviceParams, Multipliers, SystemConfig};
use crate::scalar::{pos, Real};
use crate::error::Result;

use super::validate;

#[derive(Debug, Clone, Serialize)]
pub struct DualAscentOptions<T> {
    pub max_iter: usize,
    /// Starting multipliers; zeros when `None`.
    pub initial: Option<Multipliers<T>>,
    /// Initial Polyak target offset, relative to the energy scale.
    pub target_offset: T,
    /// Iterations without improvement before the target offset is halved.
    pub patience: usize,
}

impl<T: Real> Default for DualAscentOptions<T> {
    fn default() -> Self {
        Self { max_iter: 2000, initial: None, target_offset: T::lit(0.1), patience: 10 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualAscentResult<T> {
    /// Multipliers attaining `best`.
    pub multipliers: Multipliers<T>,
    pub best: T,
    /// Best-so-far dual value after each evaluation, starting with the initial point.
    pub trace: Vec<T>,
}

/// Energy scale used to normalize the dual: full-speed Map energy of a uniform split
/// plus circuit power over the deadline.
fn energy_scale<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> T {
    let n = T::from_usize(devices.len()).expect("device count");
    let share = sys.task_bits() / n;
    let s = devices
        .iter()
        .fold(T::zero(), |a, d| a + d.kappa * d.c * d.f_max * d.f_max * share + d.p_circuit * sys.deadline());
    s.max(T::min_positive_value())
}

pub fn dual_ascent<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    opts: &DualAscentOptions<T>,
) -> Result<DualAscentResult<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    let scale = energy_scale(sys, devices);
    let bit_unit = sys.task_bits().max(T::one());
    let time_unit = sys.deadline();

    let mut cur = opts.initial.clone().unwrap_or_else(|| Multipliers::zeros(n));
    let mut eval = evaluate_dual(sys, devices, &cur)?;
    let mut best = eval.value;
    let mut best_mult = cur.clone();
    let mut trace = Vec::with_capacity(opts.max_iter + 1);
    trace.push(best);
    let mut offset = opts.target_offset;
    let mut stall = 0;

    for _ in 0..opts.max_iter {
        let (g_lambda, g_mu, g_beta) = eval.supergradient(sys, devices);
        // supergradient with respect to the normalized multipliers, in units of `scale`
        let d_lambda = g_lambda / bit_unit;
        let d_mu: Vec<T> = g_mu.iter().map(|&g| g / bit_unit).collect();
        let d_beta: Vec<T> = g_beta.iter().map(|&g| g / time_unit).collect();
        let norm2 = d_mu.iter().chain(&d_beta).fold(d_lambda * d_lambda, |a, &g| a + g * g);
        if !(norm2 > T::zero()) {
            // zero supergradient: the current point maximizes the dual
            break;
        }
        let target = best / scale + offset * (best.abs() / scale).max(T::one());
        let step = pos(target - eval.value / scale) / norm2;
        cur.lambda = cur.lambda + step * d_lambda * scale / bit_unit;
        for i in 0..n {
            cur.mu[i] = pos(cur.mu[i] + step * d_mu[i] * scale / bit_unit);
            cur.beta_t[i] = pos(cur.beta_t[i] + step * d_beta[i] * scale / time_unit);
        }
        if !cur.is_valid() {
            break;
        }
        eval = evaluate_dual(sys, devices, &cur)?;
        if !eval.value.is_finite() {
            break;
        }
        if eval.value > best {
            // sufficient progress lets the target move further ahead
            if eval.value - best >= offset * (best.abs() / scale).max(T::one()) * scale / T::lit(2.0) {
                offset = offset * T::lit(1.5);
            }
            best = eval.value;
            best_mult = cur.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= opts.patience {
                offset = offset / T::lit(2.0);
                stall = 0;
                // restart from the best point with the smaller target
                cur = best_mult.clone();
                eval = evaluate_dual(sys, devices, &cur)?;
            }
        }
        trace.push(best);
    }
    Ok(DualAscentResult { multipliers: best_mult, best, trace })
}
