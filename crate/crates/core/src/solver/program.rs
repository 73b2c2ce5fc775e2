//! Scaled convex programs for the optimal scheme and its restrictions.
//!
//! The shuffle-rate constraint is tight at every optimum, so the RF energy is
//! eliminated as `E = σ s (e^{αl/(B s)} − 1)`. What remains is a smooth convex
//! objective over a polyhedron. Loads are scaled by `L`, times by `τ`, and the
//! objective by its value at the start point.

use super::barrier::{Constraints, Smooth};
use super::linalg::Matrix;
use crate::energy::{slowest_cycle_time, uplink_rate};
use crate::feasibility::throughput;
use crate::model::{DeviceParams, SystemConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Load<T> {
    Var(usize),
    Fixed(T),
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum MapCost<T> {
    /// `k x³ / y²` with `y` the scaled Map time.
    Cubic { k: T, tm: usize },
    /// `c1 x` (full CPU speed).
    Linear { c1: T },
}

/// `ŝ (pc + σ (e^{a x / ŝ} − 1))`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShuffleCost<T> {
    pub s: usize,
    pub pc: T,
    pub sigma: T,
    pub a: T,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DeviceCost<T> {
    pub load: Load<T>,
    pub map: MapCost<T>,
    pub shuffle: Option<ShuffleCost<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Objective<T> {
    pub devices: Vec<DeviceCost<T>>,
    /// `k_r / ŷ²` on the shared Reduce time.
    pub reduce: Option<(usize, T)>,
    pub scale: T,
}

fn load_value<T: Real>(load: Load<T>, x: &[T]) -> (T, Option<usize>) {
    match load {
        Load::Var(i) => (x[i], Some(i)),
        Load::Fixed(v) => (v, None),
    }
}

impl<T: Real> Objective<T> {
    fn raw_value(&self, x: &[T]) -> Option<T> {
        let mut total = T::zero();
        for d in &self.devices {
            let (l, _) = load_value(d.load, x);
            match d.map {
                MapCost::Cubic { k, tm } => {
                    let y = x[tm];
                    if l != T::zero() {
                        if !(y > T::zero()) {
                            return None;
                        }
                        total = total + k * l * l * l / (y * y);
                    }
                }
                MapCost::Linear { c1 } => total = total + c1 * l,
            }
            if let Some(sh) = d.shuffle {
                let s = x[sh.s];
                if s > T::zero() {
                    total = total + s * (sh.pc + sh.sigma * (sh.a * l / s).exp_m1());
                } else if l != T::zero() || s < T::zero() {
                    return None;
                }
            }
        }
        if let Some((i, k)) = self.reduce {
            let y = x[i];
            if k != T::zero() {
                if !(y > T::zero()) {
                    return None;
                }
                total = total + k / (y * y);
            }
        }
        total.is_finite().then_some(total)
    }
}

impl<T: Real> Smooth<T> for Objective<T> {
    fn value(&self, x: &[T]) -> Option<T> {
        self.raw_value(x).map(|v| v * self.scale)
    }

    fn derivatives(&self, x: &[T], grad: &mut [T], hess: &mut Matrix<T>) {
        grad.iter_mut().for_each(|g| *g = T::zero());
        hess.fill_zero();
        let c = self.scale;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        for d in &self.devices {
            let (l, li) = load_value(d.load, x);
            match d.map {
                MapCost::Cubic { k, tm } => {
                    let y = x[tm];
                    let r = l / y;
                    grad[tm] = grad[tm] - c * two * k * r * r * r;
                    hess.add(tm, tm, c * six * k * r * r * r / y);
                    if let Some(i) = li {
                        grad[i] = grad[i] + c * three * k * r * r;
                        hess.add(i, i, c * six * k * r / y);
                        let off = -c * six * k * r * r / y;
                        hess.add(i, tm, off);
                        hess.add(tm, i, off);
                    }
                }
                MapCost::Linear { c1 } => {
                    if let Some(i) = li {
                        grad[i] = grad[i] + c * c1;
                    }
                }
            }
            if let Some(sh) = d.shuffle {
                let s = x[sh.s];
                let u = sh.a * l / s;
                let eu = u.exp();
                grad[sh.s] = grad[sh.s] + c * (sh.pc + sh.sigma * (u.exp_m1() - u * eu));
                let base = c * sh.sigma * eu / s;
                hess.add(sh.s, sh.s, base * u * u);
                if let Some(i) = li {
                    grad[i] = grad[i] + c * sh.sigma * sh.a * eu;
                    hess.add(i, i, base * sh.a * sh.a);
                    let off = -base * sh.a * u;
                    hess.add(i, sh.s, off);
                    hess.add(sh.s, i, off);
                }
            }
        }
        if let Some((i, k)) = self.reduce {
            let y = x[i];
            grad[i] = grad[i] - c * two * k / (y * y * y);
            hess.add(i, i, c * six * k / (y * y * y * y));
        }
    }
}

/// Which constraint a row encodes, with the device it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowKind {
    Nonneg(usize),
    Speed(usize),
    RateCap(usize),
    Deadline(usize),
    Floor,
}

/// Variable indices per device (`None` when absent or fixed).
#[derive(Debug, Clone, Default)]
pub(crate) struct VarMap {
    pub load: Vec<Option<usize>>,
    pub t_map: Vec<Option<usize>>,
    pub t_shu: Vec<Option<usize>>,
    pub t_red: Option<usize>,
}

pub(crate) struct Program<T> {
    pub objective: Objective<T>,
    pub cons: Constraints<T>,
    pub x0: Vec<T>,
    pub rows: Vec<RowKind>,
    /// Physical constraint = `row_scale · scaled constraint`.
    pub row_scale: Vec<T>,
    /// Physical equality = `eq_scale · scaled equality`.
    pub eq_scale: T,
    pub vars: VarMap,
}

struct Builder<T> {
    n_vars: usize,
    rows: Vec<(Vec<(usize, T)>, T, RowKind, T)>,
}

impl<T: Real> Builder<T> {
    fn var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    fn row(&mut self, coeffs: Vec<(usize, T)>, rhs: T, kind: RowKind, scale: T) {
        self.rows.push((coeffs, rhs, kind, scale));
    }

    fn finish(self, objective: Objective<T>, x0: Vec<T>, eq: Option<(Vec<T>, T)>, eq_scale: T, vars: VarMap) -> Program<T> {
        let n = self.n_vars;
        let mut a = Matrix::zeros(self.rows.len(), n);
        let mut b = Vec::with_capacity(self.rows.len());
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut row_scale = Vec::with_capacity(self.rows.len());
        for (r, (coeffs, rhs, kind, scale)) in self.rows.into_iter().enumerate() {
            for (j, v) in coeffs {
                a.add(r, j, v);
            }
            b.push(rhs);
            rows.push(kind);
            row_scale.push(scale);
        }
        let cons = Constraints { a, b, eq, lower: vec![T::zero(); n], upper: vec![T::one(); n] };
        Program { objective, cons, x0, rows, row_scale, eq_scale, vars }
    }
}

fn two<T: Real>() -> T {
    T::one() + T::one()
}

/// Scaled shuffle cost for a device, `None` when nothing is shuffled.
fn shuffle_cost<T: Real>(sys: &SystemConfig<T>, d: &DeviceParams<T>, s: usize) -> ShuffleCost<T> {
    let tau = sys.deadline();
    ShuffleCost {
        s,
        pc: d.p_circuit * tau,
        sigma: d.noise_equivalent_power(sys) * tau,
        a: sys.alpha() / sys.rate_bandwidth() * sys.task_bits() / tau,
    }
}

/// Program with a shared Reduce time. `fixed_loads = None` optimizes the loads
/// (optimal scheme); `Some` pins them (uniform split). Returns `None` when the
/// instance has no strictly feasible point.
pub(crate) fn shared_reduce<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    fixed_loads: Option<&[T]>,
) -> Option<Program<T>> {
    let n = devices.len();
    let big_l = sys.task_bits();
    let tau = sys.deadline();
    let alpha = sys.alpha();
    let shuffles = alpha > T::zero();
    let floor = sys.reduce_bits() * slowest_cycle_time(devices);
    let thr: Vec<T> = devices.iter().map(|d| throughput(sys, d)).collect();

    // loads and the latest Reduce start that still lets every device finish
    let (loads, busy) = match fixed_loads {
        None => {
            let total = thr.iter().fold(T::zero(), |a, &b| a + b);
            let loads: Vec<T> = thr.iter().map(|&s| big_l * s / total).collect();
            (loads, big_l / total)
        }
        Some(l) => {
            let busy = l.iter().zip(&thr).map(|(&l, &s)| l / s).fold(T::zero(), T::max);
            (l.to_vec(), busy)
        }
    };
    let latest = tau - busy;
    if !(latest > floor) {
        return None;
    }
    let t_red0 = (floor + latest) / two();
    let budget = tau - t_red0;

    let mut bld = Builder { n_vars: 0, rows: Vec::new() };
    let mut vars = VarMap::default();
    let mut x0 = Vec::new();
    let mut costs = Vec::with_capacity(n);
    for (i, d) in devices.iter().enumerate() {
        let l = loads[i];
        let speed = d.full_speed();
        let rate = if shuffles { uplink_rate(d, sys, d.p_max) } else { T::one() };
        let slack = budget - l / speed - if shuffles { alpha * l / rate } else { T::zero() };
        let parts = if shuffles { T::lit(3.0) } else { two() };

        let load = match fixed_loads {
            None => {
                let v = bld.var();
                x0.push(l / big_l);
                vars.load.push(Some(v));
                Load::Var(v)
            }
            Some(_) => {
                vars.load.push(None);
                Load::Fixed(l / big_l)
            }
        };
        let tm = bld.var();
        x0.push((l / speed + slack / parts) / tau);
        vars.t_map.push(Some(tm));
        let s = if shuffles {
            let s = bld.var();
            x0.push((alpha * l / rate + slack / parts) / tau);
            vars.t_shu.push(Some(s));
            Some(s)
        } else {
            vars.t_shu.push(None);
            None
        };
        costs.push(DeviceCost {
            load,
            map: MapCost::Cubic { k: d.energy_coeff() * big_l * big_l * big_l / (tau * tau), tm },
            shuffle: s.map(|s| shuffle_cost(sys, d, s)),
        });

        let speed_scaled = speed * tau / big_l;
        match load {
            Load::Var(v) => {
                bld.row(vec![(v, -T::one())], T::zero(), RowKind::Nonneg(i), big_l);
                bld.row(vec![(v, T::one()), (tm, -speed_scaled)], T::zero(), RowKind::Speed(i), big_l);
                if let Some(s) = s {
                    let rate_scaled = rate * tau / big_l;
                    bld.row(vec![(v, alpha), (s, -rate_scaled)], T::zero(), RowKind::RateCap(i), big_l);
                }
            }
            Load::Fixed(x) => {
                bld.row(vec![(tm, -speed_scaled)], -x, RowKind::Speed(i), big_l);
                if let Some(s) = s {
                    let rate_scaled = rate * tau / big_l;
                    bld.row(vec![(s, -rate_scaled)], -alpha * x, RowKind::RateCap(i), big_l);
                }
            }
        }
    }
    let tr = bld.var();
    x0.push(t_red0 / tau);
    vars.t_red = Some(tr);
    for i in 0..n {
        let mut coeffs = vec![(vars.t_map[i].expect("map time"), T::one()), (tr, T::one())];
        if let Some(s) = vars.t_shu[i] {
            coeffs.push((s, T::one()));
        }
        bld.row(coeffs, T::one(), RowKind::Deadline(i), tau);
    }
    bld.row(vec![(tr, -T::one())], -floor / tau, RowKind::Floor, tau);

    let red_k = devices.iter().map(|d| d.energy_coeff()).fold(T::zero(), |a, b| a + b);
    let rb = sys.reduce_bits();
    let objective = Objective { devices: costs, reduce: Some((tr, red_k * rb * rb * rb / (tau * tau))), scale: T::one() };
    let eq = fixed_loads.is_none().then(|| {
        let mut a = vec![T::zero(); bld.n_vars];
        for v in vars.load.iter().flatten() {
            a[*v] = T::one();
        }
        (a, T::one())
    });
    Some(bld.finish(objective, x0, eq, big_l, vars))
}

/// Program for full-speed computing with per-device Reduce times. `active[i] = false`
/// devices have no time left and are excluded. Returns `None` without a strictly
/// feasible point.
pub(crate) fn full_speed<T: Real>(
    sys: &SystemConfig<T>,
    devices: &[DeviceParams<T>],
    active: &[bool],
) -> Option<Program<T>> {
    let big_l = sys.task_bits();
    let tau = sys.deadline();
    let alpha = sys.alpha();
    let shuffles = alpha > T::zero();
    let windows: Vec<T> = devices.iter().map(|d| tau - sys.reduce_bits() * d.c / d.f_max).collect();
    let caps: Vec<T> = devices
        .iter()
        .zip(&windows)
        .zip(active)
        .map(|((d, &w), &on)| if on { throughput(sys, d) * w } else { T::zero() })
        .collect();
    let total = caps.iter().fold(T::zero(), |a, &b| a + b);
    if !(total > big_l) {
        return None;
    }

    let mut bld = Builder { n_vars: 0, rows: Vec::new() };
    let mut vars = VarMap::default();
    let mut x0 = Vec::new();
    let mut costs = Vec::new();
    for (i, d) in devices.iter().enumerate() {
        vars.t_map.push(None);
        if !active[i] {
            vars.load.push(None);
            vars.t_shu.push(None);
            continue;
        }
        let l = big_l * caps[i] / total;
        let speed = d.full_speed();
        let v = bld.var();
        vars.load.push(Some(v));
        x0.push(l / big_l);
        let rate = if shuffles { uplink_rate(d, sys, d.p_max) } else { T::one() };
        let s = if shuffles {
            let s = bld.var();
            let slack = windows[i] - l / speed - alpha * l / rate;
            x0.push((alpha * l / rate + slack / two()) / tau);
            Some(s)
        } else {
            None
        };
        vars.t_shu.push(s);
        costs.push(DeviceCost {
            load: Load::Var(v),
            map: MapCost::Linear { c1: d.kappa * d.c * d.f_max * d.f_max * big_l },
            shuffle: s.map(|s| shuffle_cost(sys, d, s)),
        });
        bld.row(vec![(v, -T::one())], T::zero(), RowKind::Nonneg(i), big_l);
        let mut dl = vec![(v, big_l / (speed * tau))];
        if let Some(s) = s {
            bld.row(vec![(v, alpha), (s, -rate * tau / big_l)], T::zero(), RowKind::RateCap(i), big_l);
            dl.push((s, T::one()));
        }
        bld.row(dl, windows[i] / tau, RowKind::Deadline(i), tau);
    }
    let mut a = vec![T::zero(); bld.n_vars];
    for v in vars.load.iter().flatten() {
        a[*v] = T::one();
    }
    let objective = Objective { devices: costs, reduce: None, scale: T::one() };
    Some(bld.finish(objective, x0, Some((a, T::one())), big_l, vars))
}
