//! Energy and time model of the Map, Shuffle and Reduce phases, and constraint
//! verification for arbitrary allocations.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Allocation, DeviceParams, EnergyBreakdown, ReduceTiming, SystemConfig};
use crate::scalar::{pos, Real};

/// `κ c³ l³ / t²`: energy to process `l` bits in `t` seconds with frequency scaling.
pub fn map_energy<T: Real>(dev: &DeviceParams<T>, l: T, t: T) -> Result<T> {
    if l == T::zero() {
        return Ok(T::zero());
    }
    if !(t > T::zero()) {
        return Err(Error::Domain(format!("map energy of {l} bits in {t} s is unbounded")));
    }
    let ratio = l / t;
    Ok(dev.energy_coeff() * ratio * ratio * l)
}

/// Reduce-phase energy; same cubic law applied to the `βL` combined bits.
pub fn reduce_energy<T: Real>(dev: &DeviceParams<T>, reduce_bits: T, t_red: T) -> Result<T> {
    map_energy(dev, reduce_bits, t_red)
        .map_err(|_| Error::Domain(format!("reduce energy of {reduce_bits} bits in {t_red} s is unbounded")))
}

/// Radio energy: RF energy plus circuit power over the shuffle duration.
pub fn shuffle_energy<T: Real>(dev: &DeviceParams<T>, t_shu: T, rf_energy: T) -> T {
    rf_energy + t_shu * dev.p_circuit
}

/// Achievable uplink rate `B ln(1 + p h / (Γ N₀ B))` in nats/s (bits/s in strict-bit mode).
pub fn uplink_rate<T: Real>(dev: &DeviceParams<T>, sys: &SystemConfig<T>, p: T) -> T {
    sys.rate_bandwidth() * (p / dev.noise_equivalent_power(sys)).ln_1p()
}

/// `t · r(E / t)`, closed at the origin: 0 when `t = 0`.
pub fn perspective_rate<T: Real>(dev: &DeviceParams<T>, sys: &SystemConfig<T>, t: T, rf_energy: T) -> T {
    if t > T::zero() {
        t * uplink_rate(dev, sys, rf_energy / t)
    } else {
        T::zero()
    }
}

/// Smallest RF energy that pushes `bits` through the uplink within `t` seconds.
pub fn min_rf_energy<T: Real>(dev: &DeviceParams<T>, sys: &SystemConfig<T>, bits: T, t: T) -> T {
    if bits == T::zero() {
        return T::zero();
    }
    if !(t > T::zero()) {
        return T::infinity();
    }
    t * dev.noise_equivalent_power(sys) * (bits / (sys.rate_bandwidth() * t)).exp_m1()
}

/// `max_n c_n / f^max_n`, the slowest full-speed processing time per bit.
pub fn slowest_cycle_time<T: Real>(devices: &[DeviceParams<T>]) -> T {
    devices.iter().map(|d| d.c / d.f_max).fold(T::zero(), T::max)
}

/// Signed residuals of every constraint (positive = violated), in physical units.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintReport<T> {
    /// `Σ l_n − L` (bits).
    pub task_completeness: T,
    /// `c_n l_n − t^MAP_n f^max_n` (cycles).
    pub map_speed: Vec<T>,
    /// `βL c/f − t^RED` (s); one entry for a shared Reduce time, else one per device.
    pub reduce_speed: Vec<T>,
    /// `t^MAP_n + t^SHU_n + t^RED − τ` (s).
    pub deadline: Vec<T>,
    /// `α l_n − t^SHU_n r_n(E_n / t^SHU_n)` (bits).
    pub shuffle_rate: Vec<T>,
    /// `E_n − t^SHU_n p^max_n` (J).
    pub power_cap: Vec<T>,
    /// Most negative allocation entry, as a positive violation (0 if none).
    pub negativity: T,
    /// Largest violation after normalizing by the natural scales (L, τ, p_max).
    pub max_scaled_violation: T,
    pub feasible: bool,
}

impl<T: Real> ConstraintReport<T> {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["constraint", "device", "residual"])?;
        w.write_record(["task_completeness", "", &self.task_completeness.to_string()])?;
        let groups: [(&str, &Vec<T>); 5] = [
            ("map_speed", &self.map_speed),
            ("reduce_speed", &self.reduce_speed),
            ("deadline", &self.deadline),
            ("shuffle_rate", &self.shuffle_rate),
            ("power_cap", &self.power_cap),
        ];
        for (name, values) in groups {
            for (i, v) in values.iter().enumerate() {
                w.write_record([name, &i.to_string(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_dims<T: Real>(sys: &SystemConfig<T>, devices: &[DeviceParams<T>], alloc: &Allocation<T>) -> Result<()> {
    let n = sys.n_devices();
    let lens = [
        devices.len(),
        alloc.loads.len(),
        alloc.t_map.len(),
        alloc.t_shu.len(),
        alloc.rf_energy.len(),
    ];
    if let Some(&got) = lens.iter().find(|&&len| len != n) {
        return Err(Error::DimensionMismatch { expected: n, got });
    }
    if let ReduceTiming::PerDevice(ts) = &alloc.t_red {
        if ts.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: ts.len() });
        }
    }
    Ok(())
}

/// Evaluates every constraint of the problem for `alloc`. `tol` is relative to the
/// natural scales: `L` for bit quantities, `τ` for times, `p_max·τ` for RF energy.
pub fn check_allocation<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    alloc: &Allocation<T>,
    tol: T,
) -> Result<ConstraintReport<T>> {
    check_dims(sys, devices, alloc)?;
    let tau = sys.deadline();
    let big_l = sys.task_bits();
    let bit_scale = if big_l > T::zero() { big_l } else { T::one() };
    let reduce_bits = sys.reduce_bits();

    let sum_l = alloc.loads.iter().fold(T::zero(), |a, &b| a + b);
    let task_completeness = sum_l - big_l;
    let mut worst = task_completeness.abs() / bit_scale;

    let reduce_speed: Vec<T> = match &alloc.t_red {
        ReduceTiming::Shared(t) => vec![reduce_bits * slowest_cycle_time(devices) - *t],
        ReduceTiming::PerDevice(ts) => devices
            .iter()
            .zip(ts)
            .map(|(d, &t)| reduce_bits * d.c / d.f_max - t)
            .collect(),
    };
    for r in &reduce_speed {
        worst = worst.max(*r / tau);
    }

    let mut map_speed = Vec::with_capacity(devices.len());
    let mut deadline = Vec::with_capacity(devices.len());
    let mut shuffle_rate = Vec::with_capacity(devices.len());
    let mut power_cap = Vec::with_capacity(devices.len());
    let mut negativity = T::zero();
    for (n, d) in devices.iter().enumerate() {
        let (l, tm, ts, e) = (alloc.loads[n], alloc.t_map[n], alloc.t_shu[n], alloc.rf_energy[n]);
        let tr = alloc.t_red.get(n);
        for v in [l, tm, ts, e, tr] {
            negativity = negativity.max(-v);
        }
        let ms = d.c * l - tm * d.f_max;
        let dl = tm + ts + tr - tau;
        let sr = sys.alpha() * l - perspective_rate(d, sys, ts, e);
        let pc = e - ts * d.p_max;
        worst = worst
            .max(ms / d.f_max / tau)
            .max(dl / tau)
            .max(sr / bit_scale)
            .max(pc / (d.p_max * tau));
        map_speed.push(ms);
        deadline.push(dl);
        shuffle_rate.push(sr);
        power_cap.push(pc);
    }
    for v in &alloc.loads {
        worst = worst.max(-*v / bit_scale);
    }
    let max_scaled_violation = pos(worst.max(negativity / tau.max(bit_scale)));
    // negativity of times is judged against τ, of loads against L
    let neg_ok = alloc.loads.iter().all(|&l| -l <= tol * bit_scale)
        && alloc.t_map.iter().chain(&alloc.t_shu).all(|&t| -t <= tol * tau)
        && (0..devices.len()).all(|n| -alloc.t_red.get(n) <= tol * tau)
        && alloc.rf_energy.iter().zip(devices).all(|(&e, d)| -e <= tol * d.p_max * tau);
    let feasible = neg_ok && worst <= tol && task_completeness.abs() <= tol * bit_scale;
    Ok(ConstraintReport {
        task_completeness,
        map_speed,
        reduce_speed,
        deadline,
        shuffle_rate,
        power_cap,
        negativity,
        max_scaled_violation,
        feasible,
    })
}

/// Per-phase energies of an allocation. Every device pays the Reduce energy, idle or not.
pub fn total_energy<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    alloc: &Allocation<T>,
) -> Result<EnergyBreakdown<T>> {
    check_dims(sys, devices, alloc)?;
    let reduce_bits = sys.reduce_bits();
    let mut e_map = Vec::with_capacity(devices.len());
    let mut e_shu = Vec::with_capacity(devices.len());
    let mut e_red = Vec::with_capacity(devices.len());
    for (n, d) in devices.iter().enumerate() {
        e_map.push(map_energy(d, alloc.loads[n], alloc.t_map[n])?);
        e_shu.push(shuffle_energy(d, alloc.t_shu[n], alloc.rf_energy[n]));
        e_red.push(reduce_energy(d, reduce_bits, alloc.t_red.get(n))?);
    }
    Ok(EnergyBreakdown::from_parts(e_map, e_shu, e_red))
}
