//! Grid-search reference solver for instances with at most three devices.
//!
//! At the optimum the shuffle-rate constraint is tight, so for a device with load `l`
//! and Map-plus-Shuffle window `W`, choosing the RF power `p` fixes
//! `t^SHU = αl / r(p)`. Map energy falls with Map time, so the rest of the window goes
//! to Map: `t^MAP = W − t^SHU`. The per-device search is therefore one-dimensional in
//! `p`, nested inside grids over the Reduce time and the load simplex.

use serde::Serialize;

use crate::energy::{total_energy, uplink_rate};
use crate::error::{Error, Result};
use crate::model::{Allocation, DeviceParams, EnergyBreakdown, ReduceTiming, SystemConfig};
use crate::scalar::Real;

use super::validate;

/// Grid sizes. Every grid is refined once around the incumbent with the same number
/// of points over a window of two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleResolution {
    /// Cells per load axis of the simplex.
    pub loads: usize,
    /// Reduce-time grid points.
    pub reduce: usize,
    /// RF power grid points per device.
    pub power: usize,
}

impl Default for OracleResolution {
    fn default() -> Self {
        Self { loads: 48, reduce: 32, power: 48 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSolution<T> {
    pub allocation: Allocation<T>,
    pub breakdown: EnergyBreakdown<T>,
    pub value: T,
}

#[derive(Debug, Clone, Copy)]
struct DevicePoint<T> {
    cost: T,
    t_map: T,
    t_shu: T,
    power: T,
}

/// Cost of one device at power `p`, or `None` if the window is too short.
fn device_at<T: Real>(sys: &SystemConfig<T>, d: &DeviceParams<T>, l: T, window: T, p: T) -> Option<DevicePoint<T>> {
    let t_shu = if sys.alpha() > T::zero() { sys.alpha() * l / uplink_rate(d, sys, p) } else { T::zero() };
    let t_map = window - t_shu;
    if !(t_map > T::zero()) || t_map * d.f_max < d.c * l {
        return None;
    }
    let r = l / t_map;
    let cost = d.energy_coeff() * r * r * l + t_shu * (d.p_circuit + p);
    Some(DevicePoint { cost, t_map, t_shu, power: p })
}

fn best_device<T: Real>(
    sys: &SystemConfig<T>,
    d: &DeviceParams<T>,
    l: T,
    window: T,
    steps: usize,
) -> Option<DevicePoint<T>> {
    if l == T::zero() {
        return Some(DevicePoint { cost: T::zero(), t_map: T::zero(), t_shu: T::zero(), power: T::zero() });
    }
    if sys.alpha() == T::zero() {
        return device_at(sys, d, l, window, T::zero());
    }
    let k = T::from_usize(steps).expect("grid size");
    let cell = d.p_max / k;
    let pick = |a: Option<DevicePoint<T>>, b: Option<DevicePoint<T>>| match (a, b) {
        (Some(a), Some(b)) => Some(if b.cost < a.cost { b } else { a }),
        (a, b) => a.or(b),
    };
    let mut best = None;
    for j in 1..=steps {
        let p = d.p_max * T::from_usize(j).expect("grid index") / k;
        best = pick(best, device_at(sys, d, l, window, p));
    }
    let centre = best?.power;
    for j in 0..=steps {
        let p = centre - cell + (cell + cell) * T::from_usize(j).expect("grid index") / k;
        if p > T::zero() && p <= d.p_max {
            best = pick(best, device_at(sys, d, l, window, p));
        }
    }
    best
}

#[derive(Debug, Clone)]
struct Incumbent<T> {
    cost: T,
    loads: Vec<T>,
    t_red: T,
    points: Vec<DevicePoint<T>>,
}

struct Search<'a, T> {
    sys: &'a SystemConfig<T>,
    devices: &'a [DeviceParams<T>],
    res: OracleResolution,
    floor: T,
    reduce_coeff: T,
    best: Option<Incumbent<T>>,
}

impl<T: Real> Search<'_, T> {
    fn try_point(&mut self, loads: &[T], t_red: T) {
        if t_red < self.floor || !(t_red < self.sys.deadline()) {
            return;
        }
        let reduce = if self.reduce_coeff == T::zero() {
            T::zero()
        } else if t_red > T::zero() {
            self.reduce_coeff / (t_red * t_red)
        } else {
            return;
        };
        let window = self.sys.deadline() - t_red;
        let mut cost = reduce;
        let mut points = Vec::with_capacity(loads.len());
        for (d, &l) in self.devices.iter().zip(loads) {
            let Some(pt) = best_device(self.sys, d, l, window, self.res.power) else {
                return;
            };
            cost = cost + pt.cost;
            points.push(pt);
        }
        if self.best.as_ref().is_none_or(|b| cost < b.cost) {
            self.best = Some(Incumbent { cost, loads: loads.to_vec(), t_red, points });
        }
    }
}

/// Load vectors `base + cell·(o_1, …, o_{N−1}, −Σo)` for integer offsets in
/// `[lo, hi]` on the first `N − 1` coordinates, skipping points off the simplex.
fn lattice<T: Real>(base: &[T], cell: T, lo: i64, hi: i64, mut visit: impl FnMut(&[T])) {
    let n = base.len();
    let mut offs = vec![lo; n.saturating_sub(1)];
    let mut point = vec![T::zero(); n];
    loop {
        let mut moved = T::zero();
        for (i, &o) in offs.iter().enumerate() {
            let step = cell * T::from_i64(o).expect("offset");
            point[i] = base[i] + step;
            moved = moved + step;
        }
        point[n - 1] = base[n - 1] - moved;
        let total = base.iter().fold(T::zero(), |a, &b| a + b);
        let tiny = total * T::lit(1e-12);
        if point.iter().all(|&v| v >= -tiny) {
            point.iter_mut().for_each(|v| *v = v.max(T::zero()));
            visit(&point);
        }
        let mut i = 0;
        loop {
            if i == offs.len() {
                return;
            }
            offs[i] += 1;
            if offs[i] <= hi {
                break;
            }
            offs[i] = lo;
            i += 1;
        }
    }
}

/// Best grid point of the problem for `N ≤ 3` devices, refined once. Fails with
/// [`Error::OracleResolution`] when no grid point is feasible.
pub fn brute_force_oracle<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    resolution: OracleResolution,
) -> Result<OracleSolution<T>> {
    validate(sys, devices)?;
    let n = devices.len();
    if n > 3 {
        return Err(Error::InvalidParameter(format!("brute-force oracle handles at most 3 devices, got {n}")));
    }
    if resolution.loads == 0 || resolution.reduce == 0 || resolution.power == 0 {
        return Err(Error::InvalidParameter("oracle grid sizes must be >= 1".into()));
    }
    let big_l = sys.task_bits();
    let tau = sys.deadline();
    let rb = sys.reduce_bits();
    let floor = rb * crate::energy::slowest_cycle_time(devices);
    let sum_k = devices.iter().fold(T::zero(), |a, d| a + d.energy_coeff());
    let mut search = Search { sys, devices, res: resolution, floor, reduce_coeff: sum_k * rb * rb * rb, best: None };

    let g = resolution.loads as i64;
    let load_cell = big_l / T::from_i64(g).expect("grid size");
    let r = T::from_usize(resolution.reduce).expect("grid size");
    let red_cell = (tau - floor) / r;
    let reduce_grid = |centre: T, cell: T, count: usize| -> Vec<T> {
        let k = T::from_usize(count).expect("grid size");
        (0..=count).map(|j| centre - cell + (cell + cell) * T::from_usize(j).expect("grid index") / k).collect()
    };
    let coarse_red: Vec<T> = (0..resolution.reduce).map(|j| floor + red_cell * T::from_usize(j).expect("grid index")).collect();

    // coarse pass: the whole simplex, starting from "everything on the last device"
    let mut corner = vec![T::zero(); n];
    corner[n - 1] = big_l;
    let mut loads_grid = Vec::new();
    lattice(&corner, load_cell, 0, g, |p| loads_grid.push(p.to_vec()));
    for loads in &loads_grid {
        for &tr in &coarse_red {
            search.try_point(loads, tr);
        }
    }
    let coarse = search.best.clone().ok_or(Error::OracleResolution)?;

    // refinement: two cells around the incumbent on every grid
    let fine = load_cell / T::from_i64(g).expect("grid size");
    let mut local = Vec::new();
    lattice(&coarse.loads, fine, -g, g, |p| local.push(p.to_vec()));
    let fine_red = reduce_grid(coarse.t_red, red_cell, resolution.reduce);
    for loads in &local {
        for &tr in &fine_red {
            search.try_point(loads, tr);
        }
    }
    let best = search.best.expect("coarse incumbent exists");

    let mut allocation = Allocation::zeros(n);
    for (i, pt) in best.points.iter().enumerate() {
        allocation.loads[i] = best.loads[i];
        allocation.t_map[i] = pt.t_map;
        allocation.t_shu[i] = pt.t_shu;
        allocation.rf_energy[i] = pt.t_shu * pt.power;
    }
    allocation.t_red = ReduceTiming::Shared(best.t_red);
    let breakdown = total_energy(sys, devices, &allocation)?;
    let value = breakdown.total;
    Ok(OracleSolution { allocation, breakdown, value })
}
