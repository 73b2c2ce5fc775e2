//! Maximum computing loads and capacity time splits.
//!
//! The Reduce floor `βL·m` grows with the task size, so "L fits" is the implicit
//! inequality `L ≤ (τ − βLm)·S`. It is linear in `L` and resolved in closed form.

use serde::Serialize;

use crate::energy::{slowest_cycle_time, uplink_rate};
use crate::error::{Error, Result};
use crate::model::{DeviceParams, SystemConfig};
use crate::scalar::{pos, Real};

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult<T> {
    pub l_max: T,
    /// Bits each device processes when the system runs at `l_max`.
    pub per_device_terms: Vec<T>,
    /// `βL·max c/f` evaluated at `L = l_max` (s).
    pub reduce_floor: T,
    pub t_map_full: Vec<T>,
    pub t_shu_full: Vec<T>,
}

/// Bits per second of Map plus Shuffle time a device sustains at full CPU speed and
/// full power: `1 / (c/f + α/r(p_max))`.
pub fn throughput<T: Real>(sys: &SystemConfig<T>, dev: &DeviceParams<T>) -> T {
    let speed = dev.full_speed();
    if sys.alpha() == T::zero() {
        return speed;
    }
    let rate = uplink_rate(dev, sys, dev.p_max);
    speed / (T::one() + sys.alpha() * speed / rate)
}

fn non_empty<T>(devices: &[DeviceParams<T>]) -> Result<()> {
    if devices.is_empty() {
        Err(Error::InvalidParameter("at least one device is required".into()))
    } else {
        Ok(())
    }
}

fn finish<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    l_max: T,
    rates: &[T],
    m: T,
) -> CapacityResult<T> {
    let reduce_floor = sys.beta() * l_max * m;
    let budget = pos(sys.deadline() - reduce_floor);
    let per_device_terms = rates.iter().map(|&s| budget * s).collect();
    let (t_map_full, t_shu_full) = devices
        .iter()
        .map(|d| split(sys, d, budget))
        .unzip();
    CapacityResult { l_max, per_device_terms, reduce_floor, t_map_full, t_shu_full }
}

/// Largest task the optimal scheme can complete: `τS / (1 + βmS)` with `S` the summed throughput.
pub fn opt_lmax<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<CapacityResult<T>> {
    non_empty(devices)?;
    let rates: Vec<T> = devices.iter().map(|d| throughput(sys, d)).collect();
    let s = rates.iter().fold(T::zero(), |a, &b| a + b);
    let m = slowest_cycle_time(devices);
    let l_max = sys.deadline() * s / (T::one() + sys.beta() * m * s);
    Ok(finish(sys, devices, l_max, &rates, m))
}

/// Largest task the uniform split can complete: every device gets `L/N`, so the weakest
/// device sets the pace.
pub fn blind_lmax<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<CapacityResult<T>> {
    non_empty(devices)?;
    let rates: Vec<T> = devices.iter().map(|d| throughput(sys, d)).collect();
    let s_min = rates.iter().fold(T::infinity(), |a, &b| a.min(b));
    let n = T::from_usize(devices.len()).expect("device count");
    let m = slowest_cycle_time(devices);
    let l_max = n * sys.deadline() * s_min / (T::one() + sys.beta() * m * n * s_min);
    Ok(finish(sys, devices, l_max, &rates, m))
}

/// Largest task when every device computes at full speed, each with its own Reduce
/// time `βL c_n/f_n`. Every device runs the Reduce phase, so `βL·max c/f ≤ τ` is also
/// required. Solves `L = Σ (τ − βL c_n/f_n)⁺ s_n` by bisection (the right side is
/// non-increasing in `L`).
pub fn nodfs_lmax<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> Result<T> {
    non_empty(devices)?;
    let rates: Vec<T> = devices.iter().map(|d| throughput(sys, d)).collect();
    let tau = sys.deadline();
    let m = slowest_cycle_time(devices);
    let capacity = |l: T| {
        devices
            .iter()
            .zip(&rates)
            .map(|(d, &s)| pos(tau - sys.beta() * l * d.c / d.f_max) * s)
            .fold(T::zero(), |a, b| a + b)
    };
    let (mut lo, mut hi) = (T::zero(), capacity(T::zero()));
    for _ in 0..200 {
        let mid = (lo + hi) / (T::one() + T::one());
        if mid <= lo || mid >= hi {
            break;
        }
        if capacity(mid) >= mid && sys.beta() * mid * m <= tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn split<T: Real>(sys: &SystemConfig<T>, dev: &DeviceParams<T>, budget: T) -> (T, T) {
    if sys.alpha() == T::zero() {
        return (budget, T::zero());
    }
    // q = time share of shuffling relative to mapping per bit
    let q = sys.alpha() * dev.full_speed() / uplink_rate(dev, sys, dev.p_max);
    (budget / (T::one() + q), budget * q / (T::one() + q))
}

/// Splits `τ − reduce_floor` between Map and Shuffle so that a device running at full
/// speed and full power finishes both exactly at the deadline.
pub fn capacity_time_split<T: Real>(
    sys: &SystemConfig<T>,
    dev: &DeviceParams<T>,
    reduce_floor: T,
) -> Result<(T, T)> {
    if reduce_floor >= sys.deadline() {
        return Err(Error::NoTimeBudget {
            reduce_floor: reduce_floor.as_f64(),
            deadline: sys.deadline().as_f64(),
        });
    }
    Ok(split(sys, dev, sys.deadline() - reduce_floor))
}

pub fn is_feasible<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> bool {
    opt_lmax(sys, devices).is_ok_and(|c| sys.task_bits() <= c.l_max)
}

pub fn is_feasible_blind<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>]) -> bool {
    blind_lmax(sys, devices).is_ok_and(|c| sys.task_bits() <= c.l_max)
}
