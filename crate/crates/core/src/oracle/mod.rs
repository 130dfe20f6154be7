//! Reference densities for testing.
//!
//! Both series are summed to a large fixed term count in double-double
//! arithmetic and must agree before a value is returned. Slow by design.

pub mod dd;
pub mod quad;

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::DomainError;
use crate::params::{prepare, validate, Choice, DdmParams, Observation};
use dd::Dd;

/// Integration horizon after `t0` for normalization checks, in seconds.
pub const NORMALIZATION_HORIZON: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Term count for each series (at least 100).
    pub n_terms: usize,
    /// Allowed relative gap between the two series.
    pub agreement_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n_terms: 10_000,
            agreement_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("n_terms = {0} is below the minimum of 100")]
    TooFewTerms(usize),
    #[error("large-time {large:e} and small-time {small:e} reference values differ at rt = {rt}")]
    Disagreement { large: f64, small: f64, rt: f64 },
}

/// Both reference series at one point, before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePair {
    pub large: f64,
    pub small: f64,
}

impl ReferencePair {
    pub fn relative_gap(&self) -> f64 {
        (self.large - self.small).abs() / self.small.abs().max(1.0)
    }
}

/// Large-time inner sum over `j = 1..=n_terms`.
pub fn large_sum(t_hat: f64, w: f64, n_terms: usize) -> Dd {
    let c = (dd::PI * dd::PI).mul_f64(t_hat).ldexp(-1);
    let mut sum = Dd::ZERO;
    for j in 1..=n_terms {
        let jf = j as f64;
        let e = (-c.mul_f64(jf * jf)).exp();
        if e.hi == 0.0 {
            break;
        }
        let s = Dd::prod_f64(jf, w).sin_pi();
        sum = sum + (s * e).mul_f64(jf);
    }
    sum
}

/// Small-time two-sided sum over `j = -n..=n`, `n = n_terms / 2`.
pub fn small_sum(t_hat: f64, w: f64, n_terms: usize) -> Dd {
    let term = |x: Dd| x * (-x.sqr().div_f64(2.0 * t_hat)).exp();
    let mut sum = term(Dd::from_f64(w));
    for j in 1..=n_terms / 2 {
        let two_j = 2.0 * j as f64;
        let minus = term(Dd::sum_f64(w, -two_j));
        let plus = term(Dd::sum_f64(w, two_j));
        if minus.hi == 0.0 && plus.hi == 0.0 {
            break;
        }
        sum = sum + minus + plus;
    }
    sum
}

/// Prefactor exponent and the remaining coefficients, in the normalized frame.
struct Prefactor {
    exponent: Dd,
    spread_root: f64,
}

fn prefactor(p: &DdmParams, t: f64) -> Prefactor {
    let (v, a, w) = (p.v, p.a, p.w());
    let vaw = Dd::prod_f64(v, a).mul_f64(w);
    let vvt = Dd::prod_f64(v, v).mul_f64(t);
    if p.eta > 0.0 {
        let e2 = Dd::prod_f64(p.eta, p.eta);
        let aw = Dd::prod_f64(a, w);
        let num = e2 * aw.sqr() - vaw.ldexp(1) - vvt;
        let spread = Dd::ONE + e2.mul_f64(t);
        Prefactor {
            exponent: num / spread.ldexp(1),
            spread_root: spread.to_f64().sqrt(),
        }
    } else {
        Prefactor {
            exponent: -vaw - vvt.ldexp(-1),
            spread_root: 1.0,
        }
    }
}

/// `coef * exp(exponent) * sum`, computed in log space when the exponential overflows.
fn scale(coef: f64, exponent: Dd, sum: Dd) -> f64 {
    let s = sum.to_f64();
    if s == 0.0 {
        return 0.0;
    }
    let e = exponent.exp();
    if e.hi.is_finite() && e.hi > 0.0 {
        (e * sum).mul_f64(coef).to_f64()
    } else {
        s.signum() * (coef.ln() + exponent.to_f64() + s.abs().ln()).exp()
    }
}

/// Unclamped large-time and small-time reference densities.
pub fn reference_pair(
    params: &DdmParams,
    obs: &Observation,
    cfg: &OracleConfig,
) -> Result<ReferencePair, OracleError> {
    validate(params)?;
    obs.validate()?;
    if cfg.n_terms < 100 {
        return Err(OracleError::TooFewTerms(cfg.n_terms));
    }
    let input = prepare(params, obs);
    if input.degenerate {
        return Ok(ReferencePair {
            large: 0.0,
            small: 0.0,
        });
    }
    let p = input.params;
    let (t, t_hat, a, w) = (input.t_shifted, input.t_hat, p.a, p.w());
    let pre = prefactor(&p, t);
    let large_coef = std::f64::consts::PI / (a * a) / pre.spread_root;
    let small_coef =
        1.0 / (a * a * (2.0 * std::f64::consts::PI * t_hat.powi(3)).sqrt()) / pre.spread_root;
    Ok(ReferencePair {
        large: scale(large_coef, pre.exponent, large_sum(t_hat, w, cfg.n_terms)),
        small: scale(small_coef, pre.exponent, small_sum(t_hat, w, cfg.n_terms)),
    })
}

/// Reference density: the small-time value, checked against the large-time one.
pub fn reference_density(
    params: &DdmParams,
    obs: &Observation,
    cfg: &OracleConfig,
) -> Result<f64, OracleError> {
    let pair = reference_pair(params, obs, cfg)?;
    if !(pair.relative_gap() <= cfg.agreement_tol) {
        return Err(OracleError::Disagreement {
            large: pair.large,
            small: pair.small,
            rt: obs.rt,
        });
    }
    Ok(pair.small.max(0.0))
}

/// Probability mass absorbed at the lower and upper boundary within the horizon.
pub fn boundary_masses(params: &DdmParams, cfg: &OracleConfig) -> Result<(f64, f64), OracleError> {
    validate(params)?;
    let lower = mass(params, Choice::Lower, cfg)?;
    let upper = mass(params, Choice::Upper, cfg)?;
    Ok((lower, upper))
}

/// Total mass over `(t0, t0 + 60]`; 1 up to the quadrature and tail error.
pub fn check_normalization(params: &DdmParams, cfg: &OracleConfig) -> Result<f64, OracleError> {
    let (lower, upper) = boundary_masses(params, cfg)?;
    Ok(lower + upper)
}

/// Breakpoints on `[t0, t0 + horizon]` spaced in units of `a^2`.
pub fn quadrature_breaks(t0: f64, a: f64, horizon: f64) -> Vec<f64> {
    let a2 = a * a;
    let mut pts = vec![t0];
    for s in [1e-3, 1e-2, 0.05, 0.2, 1.0, 3.0, 10.0] {
        let x = s * a2;
        if x < horizon {
            pts.push(t0 + x);
        }
    }
    pts.push(t0 + horizon);
    pts
}

fn mass(params: &DdmParams, choice: Choice, cfg: &OracleConfig) -> Result<f64, OracleError> {
    let failure: Cell<Option<OracleError>> = Cell::new(None);
    let f = |rt: f64| {
        if rt <= params.t0 {
            return 0.0;
        }
        match reference_density(params, &Observation { choice, rt }, cfg) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let a = params.a / params.sigma2.sqrt();
    let pts = quadrature_breaks(params.t0, a, NORMALIZATION_HORIZON);
    let r = quad::integrate(f, &pts, 1e-10, 1e-12, 4000);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}
