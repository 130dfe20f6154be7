//! Bounded quasi-Newton minimization with finite-difference gradients.
//!
//! Works in the unit box: callers map their bounds to `[0, 1]^n`. The
//! inverse-Hessian estimate is a BFGS update; variables at a bound whose
//! gradient points outward are held fixed for the iteration, and trial points
//! are projected back into the box.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub max_iter: usize,
    pub max_evals: usize,
    /// Finite-difference step in unit coordinates.
    pub fd_step: f64,
    /// Larger step used to re-estimate the gradient after a failed line
    /// search, when small jumps in the objective swamp the first estimate.
    pub fd_step_retry: f64,
    /// Success when the projected gradient is below `gtol * (1 + |f|)`.
    pub gtol: f64,
    /// Success when an accepted step lowers `f` by less than `ftol * (1 + |f|)`.
    pub ftol: f64,
    /// Longest step, in unit coordinates, tried by the line search.
    pub max_step: f64,
    /// Coordinate step, in unit coordinates, probed after a successful stop.
    /// Stationary points that are not minima (a spread parameter held at
    /// zero, where the objective is flat to first order) are left this way.
    pub probe_step: f64,
    /// Restarts allowed after a probe finds a lower value.
    pub max_restarts: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            max_iter: 500,
            max_evals: 20_000,
            fd_step: 1e-6,
            fd_step_retry: 1e-4,
            gtol: 1e-7,
            ftol: 1e-12,
            max_step: 0.25,
            probe_step: 1e-2,
            max_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Gradient,
    Objective,
    /// No decrease along the search direction, at a near-stationary point.
    Stalled,
    /// No decrease along the search direction, away from a stationary point.
    LineSearch,
    Iterations,
    Evaluations,
    /// The objective is not finite at the start.
    NonFinite,
}

impl Stop {
    pub fn is_success(self) -> bool {
        matches!(self, Stop::Gradient | Stop::Objective | Stop::Stalled)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub evals: usize,
    pub iterations: usize,
    pub stop: Stop,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let y = (self.f)(x);
        if y.is_nan() {
            f64::INFINITY
        } else {
            y
        }
    }
}

fn project<const N: usize>(x: &mut [f64; N]) {
    for xi in x.iter_mut() {
        *xi = xi.clamp(0.0, 1.0);
    }
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central differences, one-sided next to a bound. Infinite values make the
/// affected component one-sided too.
fn gradient<const N: usize, F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x: &[f64; N],
    fx: f64,
    h: f64,
) -> [f64; N] {
    let mut g = [0.0; N];
    for i in 0..N {
        let mut xp = *x;
        let mut xm = *x;
        let up = (x[i] + h).min(1.0);
        let dn = (x[i] - h).max(0.0);
        xp[i] = up;
        xm[i] = dn;
        let fp = if up > x[i] { obj.call(&xp) } else { fx };
        let fm = if dn < x[i] { obj.call(&xm) } else { fx };
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (up - dn),
            (true, false) if up > x[i] => (fp - fx) / (up - x[i]),
            (false, true) if dn < x[i] => (fx - fm) / (x[i] - dn),
            _ => 0.0,
        };
    }
    g
}

/// Components of the projected gradient step `P(x - g) - x`.
fn projected_gradient_norm<const N: usize>(x: &[f64; N], g: &[f64; N]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| ((xi - gi).clamp(0.0, 1.0) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimize `f` over `[0, 1]^N` from `x0`.
pub fn minimize<const N: usize>(
    f: impl FnMut(&[f64]) -> f64,
    x0: [f64; N],
    cfg: &OptimConfig,
) -> Minimum<N> {
    let mut obj = Counted { f, evals: 0 };
    let mut x = x0;
    project(&mut x);
    let mut fx = obj.call(&x);
    if !fx.is_finite() {
        return Minimum {
            x,
            f: fx,
            evals: obj.evals,
            iterations: 0,
            stop: Stop::NonFinite,
        };
    }
    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let stop = descend(&mut obj, &mut x, &mut fx, &mut iterations, cfg);
        if stop.is_success() && restarts < cfg.max_restarts && obj.evals < cfg.max_evals {
            if let Some((xn, fxn)) = probe(&mut obj, &x, fx, cfg) {
                x = xn;
                fx = fxn;
                restarts += 1;
                continue;
            }
        }
        return Minimum {
            x,
            f: fx,
            evals: obj.evals,
            iterations,
            stop,
        };
    }
}

/// The best point among `x +- probe_step` along each coordinate, if it is
/// lower than `fx` by more than the objective tolerance.
fn probe<const N: usize, F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x: &[f64; N],
    fx: f64,
    cfg: &OptimConfig,
) -> Option<([f64; N], f64)> {
    let mut best = None;
    let mut f_best = fx - cfg.ftol * (1.0 + fx.abs());
    for i in 0..N {
        for sign in [1.0, -1.0] {
            let mut xn = *x;
            xn[i] = (x[i] + sign * cfg.probe_step).clamp(0.0, 1.0);
            if xn[i] == x[i] {
                continue;
            }
            let f = obj.call(&xn);
            if f < f_best {
                f_best = f;
                best = Some(xn);
            }
        }
    }
    best.map(|xn| (xn, f_best))
}

/// BFGS iterations from `x` until a stopping rule fires.
fn descend<const N: usize, F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x: &mut [f64; N],
    fx: &mut f64,
    iterations: &mut usize,
    cfg: &OptimConfig,
) -> Stop {
    let mut h = identity::<N>();
    let mut fd = cfg.fd_step;
    let mut g = gradient(obj, x, *fx, fd);
    while *iterations < cfg.max_iter {
        let scale = 1.0 + fx.abs();
        if projected_gradient_norm(x, &g) <= cfg.gtol * scale {
            return Stop::Gradient;
        }
        if obj.evals >= cfg.max_evals {
            return Stop::Evaluations;
        }
        let active: [bool; N] =
            std::array::from_fn(|i| (x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= 1.0 && g[i] < 0.0));
        let mut d = direction(&h, &g, &active);
        if dot(&d, &g) >= 0.0 {
            h = identity::<N>();
            d = direction(&h, &g, &active);
        }
        let len = d.iter().fold(0.0_f64, |m, di| m.max(di.abs()));
        if len > cfg.max_step {
            d.iter_mut().for_each(|di| *di *= cfg.max_step / len);
        }

        // Armijo backtracking along the projected path.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: [f64; N] = std::array::from_fn(|i| x[i] + alpha * d[i]);
            project(&mut xn);
            let s: [f64; N] = std::array::from_fn(|i| xn[i] - x[i]);
            if s.iter().all(|si| *si == 0.0) {
                break;
            }
            let fxn = obj.call(&xn);
            if fxn <= *fx + 1e-4 * dot(&g, &s) && fxn < *fx {
                accepted = Some((xn, fxn, s));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fxn, s)) = accepted else {
            if fd < cfg.fd_step_retry {
                fd = cfg.fd_step_retry;
                h = identity::<N>();
                g = gradient(obj, x, *fx, fd);
                continue;
            }
            return if projected_gradient_norm(x, &g) <= 1e3 * cfg.gtol * scale {
                Stop::Stalled
            } else {
                Stop::LineSearch
            };
        };
        *iterations += 1;
        let decrease = *fx - fxn;
        let gn = gradient(obj, &xn, fxn, fd);
        let y: [f64; N] = std::array::from_fn(|i| gn[i] - g[i]);
        bfgs_update(&mut h, &s, &y);
        *x = xn;
        *fx = fxn;
        g = gn;
        if decrease <= cfg.ftol * (1.0 + fx.abs()) {
            return Stop::Objective;
        }
    }
    Stop::Iterations
}

fn identity<const N: usize>() -> [[f64; N]; N] {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
}

fn direction<const N: usize>(h: &[[f64; N]; N], g: &[f64; N], active: &[bool; N]) -> [f64; N] {
    std::array::from_fn(|i| {
        if active[i] {
            return 0.0;
        }
        -(0..N)
            .filter(|&j| !active[j])
            .map(|j| h[i][j] * g[j])
            .sum::<f64>()
    })
}

/// Inverse-Hessian BFGS update, skipped unless the curvature condition holds.
fn bfgs_update<const N: usize>(h: &mut [[f64; N]; N], s: &[f64; N], y: &[f64; N]) {
    let sy = dot(s, y);
    if !(sy > 1e-10 * dot(s, s).sqrt() * dot(y, y).sqrt()) {
        return;
    }
    let rho = 1.0 / sy;
    let hy: [f64; N] = std::array::from_fn(|i| dot(&h[i], y));
    let yhy = dot(y, &hy);
    for i in 0..N {
        for j in 0..N {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let f = |x: &[f64]| {
            (x[0] - 0.3).powi(2) + 10.0 * (x[1] - 0.7).powi(2) + (x[0] - 0.3) * (x[1] - 0.7)
        };
        let m = minimize(f, [0.9, 0.1], &OptimConfig::default());
        assert!(m.stop.is_success(), "{:?}", m.stop);
        assert!(
            (m.x[0] - 0.3).abs() < 1e-5 && (m.x[1] - 0.7).abs() < 1e-5,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn minimum_outside_the_box_lands_on_the_bound() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 0.5).powi(2);
        let m = minimize(f, [0.5, 0.9], &OptimConfig::default());
        assert!(m.stop.is_success());
        assert_eq!(m.x[0], 0.0);
        assert!((m.x[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_in_the_box() {
        // Minimum at (1, 1) after mapping u -> 4u - 2.
        let f = |u: &[f64]| {
            let (x, y) = (4.0 * u[0] - 2.0, 4.0 * u[1] - 2.0);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        };
        let m = minimize(f, [0.2, 0.8], &OptimConfig::default());
        assert!(m.stop.is_success(), "{:?}", m.stop);
        assert!(
            (m.x[0] - 0.75).abs() < 1e-3 && (m.x[1] - 0.75).abs() < 1e-3,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn leaves_a_saddle_on_the_boundary() {
        // Even in x[1] about the bound, so the gradient vanishes there; the
        // minimum is at x[1] = sqrt(0.1).
        let f = |x: &[f64]| (x[0] - 0.5).powi(2) - x[1].powi(2) + 5.0 * x[1].powi(4);
        let m = minimize(f, [0.9, 0.0], &OptimConfig::default());
        assert!(m.stop.is_success(), "{:?}", m.stop);
        assert!((m.x[1] - 0.1f64.sqrt()).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn infinite_start_fails() {
        let m = minimize(|_: &[f64]| f64::INFINITY, [0.5], &OptimConfig::default());
        assert_eq!(m.stop, Stop::NonFinite);
        assert!(!m.stop.is_success());
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 0.1).powi(4) + (x[1] - 0.2).powi(2);
        let a = minimize(f, [0.8, 0.8], &OptimConfig::default());
        let b = minimize(f, [0.8, 0.8], &OptimConfig::default());
        assert_eq!(a, b);
    }
}
