//! Log-barrier interior point method for a smooth convex objective over
//! `{x : A x ≤ b, aᵀx = c}` with a certified Lagrangian lower bound.

use super::linalg::{dot, solve_in_place, Matrix};
use crate::scalar::Real;

/// Smooth convex objective with a (possibly open) domain.
pub(crate) trait Smooth<T: Real> {
    /// `None` outside the domain.
    fn value(&self, x: &[T]) -> Option<T>;
    /// Overwrites `grad` and `hess` (dense, symmetric).
    fn derivatives(&self, x: &[T], grad: &mut [T], hess: &mut Matrix<T>);
}

pub(crate) struct Constraints<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub eq: Option<(Vec<T>, T)>,
    /// Box known to contain the feasible set; only used for the lower bound.
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierOptions<T> {
    /// Relative gap `(f − bound) / f` at which iterations stop.
    pub target_gap: T,
    /// Largest relative gap reported as converged.
    pub accept_gap: T,
    pub growth: T,
    pub max_newton: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierResult<T> {
    pub x: Vec<T>,
    pub value: T,
    /// Inequality multipliers `1 / (t · slack)`.
    pub z: Vec<T>,
    /// Equality multiplier (0 without an equality row).
    pub w: T,
    pub bound: T,
    pub newton_steps: usize,
    pub converged: bool,
}

struct Workspace<T> {
    grad: Vec<T>,
    hess: Matrix<T>,
    kkt: Matrix<T>,
    rhs: Vec<T>,
    slack: Vec<T>,
    adx: Vec<T>,
    tmp: Vec<T>,
    trial: Vec<T>,
    /// Newton direction of the last centering step; zero if centering did not converge.
    dx: Vec<T>,
}

fn slacks<T: Real>(c: &Constraints<T>, x: &[T], out: &mut [T]) {
    c.a.mul_vec(x, out);
    for (s, &bi) in out.iter_mut().zip(&c.b) {
        *s = bi - *s;
    }
}

fn barrier_value<T: Real, F: Smooth<T>>(f: &F, c: &Constraints<T>, x: &[T], t: T, slack: &mut [T]) -> Option<T> {
    slacks(c, x, slack);
    if slack.iter().any(|&s| !(s > T::zero())) {
        return None;
    }
    let fx = f.value(x)?;
    let logs = slack.iter().fold(T::zero(), |acc, s| acc + s.ln());
    let v = t * fx - logs;
    v.is_finite().then_some(v)
}

/// One damped Newton centering run at barrier weight `t`. Returns the number of steps.
fn center<T: Real, F: Smooth<T>>(
    f: &F,
    c: &Constraints<T>,
    x: &mut [T],
    t: T,
    ws: &mut Workspace<T>,
    budget: usize,
) -> (usize, bool) {
    let n = x.len();
    let m = c.b.len();
    let k = n + usize::from(c.eq.is_some());
    let newton_tol = T::lit(1e-11);
    ws.dx.iter_mut().for_each(|v| *v = T::zero());
    for step in 0..budget {
        slacks(c, x, &mut ws.slack);
        f.derivatives(x, &mut ws.grad, &mut ws.hess);
        // gradient and Hessian of t f − Σ ln(slack)
        let inv: Vec<T> = ws.slack.iter().map(|s| s.recip()).collect();
        c.a.mul_t_vec(&inv, &mut ws.tmp);
        ws.kkt.fill_zero();
        for i in 0..n {
            ws.rhs[i] = -(t * ws.grad[i] + ws.tmp[i]);
            for j in 0..n {
                ws.kkt.set(i, j, t * ws.hess.get(i, j));
            }
        }
        for r in 0..m {
            let row = c.a.row(r);
            let w2 = inv[r] * inv[r];
            for i in 0..n {
                if row[i] == T::zero() {
                    continue;
                }
                let ri = row[i] * w2;
                for j in 0..n {
                    if row[j] != T::zero() {
                        ws.kkt.add(i, j, ri * row[j]);
                    }
                }
            }
        }
        if let Some((a_eq, _)) = &c.eq {
            for i in 0..n {
                ws.kkt.set(i, n, a_eq[i]);
                ws.kkt.set(n, i, a_eq[i]);
            }
            ws.kkt.set(n, n, T::zero());
            ws.rhs[n] = T::zero();
        }
        let g: Vec<T> = ws.rhs[..n].iter().map(|v| -*v).collect();
        let mut sol = ws.rhs[..k].to_vec();
        let mut sys = ws.kkt.clone();
        if !solve_in_place(&mut sys, &mut sol) {
            return (step, false);
        }
        let dx = &sol[..n];
        let dec2 = -dot(&g, dx);
        if !(dec2.is_finite()) {
            return (step, false);
        }
        if dec2 <= newton_tol {
            ws.dx.copy_from_slice(dx);
            return (step, true);
        }
        // largest step keeping every slack positive
        c.a.mul_vec(dx, &mut ws.adx);
        let mut s_max = T::one();
        for (sl, ad) in ws.slack.iter().zip(&ws.adx) {
            if *ad > T::zero() {
                s_max = s_max.min(T::lit(0.99) * *sl / *ad);
            }
        }
        // adx is free from here on and serves as the slack buffer
        let phi0 = barrier_value(f, c, x, t, &mut ws.adx).unwrap_or(T::infinity());
        let mut s = s_max;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                ws.trial[i] = x[i] + s * dx[i];
            }
            if let Some(phi) = barrier_value(f, c, &ws.trial, t, &mut ws.adx) {
                // near the solution the decrease is below rounding of φ; trust the step
                if dec2 < T::lit(1e-7) || phi <= phi0 - T::lit(0.25) * s * dec2 {
                    accepted = true;
                    break;
                }
            }
            s = s * T::lit(0.5);
        }
        if !accepted {
            return (step, dec2 < T::lit(1e-6));
        }
        x.copy_from_slice(&ws.trial[..n]);
        if let Some((a_eq, rhs)) = &c.eq {
            // remove drift along the equality normal
            let err = dot(a_eq, x) - *rhs;
            let nn = dot(a_eq, a_eq);
            for i in 0..n {
                x[i] = x[i] - err * a_eq[i] / nn;
            }
        }
    }
    (budget, false)
}

/// Lower bound from the linearized Lagrangian minimized over the bounding box.
fn certify<T: Real, F: Smooth<T>>(f: &F, c: &Constraints<T>, x: &[T], z: &[T], ws: &mut Workspace<T>) -> (T, T) {
    let n = x.len();
    let fx = f.value(x).unwrap_or(T::infinity());
    f.derivatives(x, &mut ws.grad, &mut ws.hess);
    c.a.mul_t_vec(z, &mut ws.tmp);
    let mut r: Vec<T> = (0..n).map(|i| ws.grad[i] + ws.tmp[i]).collect();
    let mut w = T::zero();
    let mut eq_term = T::zero();
    if let Some((a_eq, rhs)) = &c.eq {
        w = -dot(a_eq, &r) / dot(a_eq, a_eq);
        for i in 0..n {
            r[i] = r[i] + w * a_eq[i];
        }
        eq_term = w * (dot(a_eq, x) - *rhs);
    }
    slacks(c, x, &mut ws.slack);
    let comp = dot(z, &ws.slack);
    let mut box_term = T::zero();
    for j in 0..n {
        let lo = r[j] * c.lower[j];
        let hi = r[j] * c.upper[j];
        box_term = box_term + lo.min(hi) - r[j] * x[j];
    }
    (fx - comp + eq_term + box_term, w)
}

pub(crate) fn minimize<T: Real, F: Smooth<T>>(
    f: &F,
    c: &Constraints<T>,
    x0: &[T],
    opts: &BarrierOptions<T>,
) -> BarrierResult<T> {
    let n = x0.len();
    let m = c.b.len();
    let k = n + usize::from(c.eq.is_some());
    let mut ws = Workspace {
        grad: vec![T::zero(); n],
        hess: Matrix::zeros(n, n),
        kkt: Matrix::zeros(k, k),
        rhs: vec![T::zero(); k],
        slack: vec![T::zero(); m],
        adx: vec![T::zero(); m],
        tmp: vec![T::zero(); n],
        trial: vec![T::zero(); n],
        dx: vec![T::zero(); n],
    };
    let mut x = x0.to_vec();
    let m_t = T::from_usize(m.max(1)).expect("row count");
    let f0 = f.value(&x).unwrap_or(T::one()).abs().max(T::min_positive_value());
    let mut t = m_t / f0;
    let mut steps = 0;
    let mut best: Option<BarrierResult<T>> = None;
    let rel = |r: &BarrierResult<T>| (r.value - r.bound) / r.value.abs().max(T::min_positive_value());
    loop {
        // warm-started centering takes about ten steps; a pass that needs many more has run
        // into rounding and is cut short
        let budget = opts.max_newton.saturating_sub(steps).clamp(1, 80);
        let (used, ok) = center(f, c, &mut x, t, &mut ws, budget);
        steps += used;
        slacks(c, &x, &mut ws.slack);
        let mut z: Vec<T> = ws.slack.iter().map(|s| (t * *s).recip()).collect();
        let (mut bound, mut w) = certify(f, c, &x, &z, &mut ws);
        if ok {
            // dual estimate corrected by the last Newton step: removes the constraint part
            // of the stationarity residual, which dominates the gap at large t
            c.a.mul_vec(&ws.dx, &mut ws.adx);
            let zc: Vec<T> = ws
                .slack
                .iter()
                .zip(&ws.adx)
                .map(|(&s, &ad)| ((T::one() + ad / s) / (t * s)).max(T::zero()))
                .collect();
            let (bc, wc) = certify(f, c, &x, &zc, &mut ws);
            if bc > bound {
                (bound, w, z) = (bc, wc, zc);
            }
        }
        let value = f.value(&x).unwrap_or(T::infinity());
        let cur = BarrierResult { x: x.clone(), value, z, w, bound, newton_steps: steps, converged: false };
        let gap = rel(&cur);
        let have_accepted = best.as_ref().is_some_and(|b| b.converged);
        if ok && gap <= opts.accept_gap {
            // later iterates are better polished, so they replace earlier accepted ones
            best = Some(BarrierResult { converged: true, ..cur });
        } else if !have_accepted && best.as_ref().is_none_or(|b| gap < rel(b)) {
            best = Some(cur);
        }
        if (ok && gap <= opts.target_gap) || (!ok && have_accepted) {
            break;
        }
        // stop once the barrier term can no longer be resolved in floating point
        if steps >= opts.max_newton || m_t / t < T::epsilon() * value.abs() * T::lit(1e-2) {
            break;
        }
        t = t * opts.growth;
    }
    let mut out = best.expect("at least one centering pass");
    out.newton_steps = steps;
    out
}
