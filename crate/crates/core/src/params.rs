//! Model parameters, observations and input preparation.
//!
//! Every density evaluation goes through [`prepare`]: scale to unit
//! diffusion coefficient, map the upper boundary onto the lower one, shift by
//! the non-decision time and form the effective time `t / a^2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Relative start point `w` in (0, 1).
///
/// Carries its complement so that the boundary flip is an exact involution:
/// `1 - (1 - w)` does not round-trip in binary floating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct StartPoint {
    value: f64,
    complement: f64,
}

impl StartPoint {
    pub fn new(w: f64) -> Self {
        StartPoint {
            value: w,
            complement: 1.0 - w,
        }
    }

    pub fn get(self) -> f64 {
        self.value
    }

    /// The start point measured from the other boundary.
    pub fn mirrored(self) -> Self {
        StartPoint {
            value: self.complement,
            complement: self.value,
        }
    }
}

impl From<f64> for StartPoint {
    fn from(w: f64) -> Self {
        StartPoint::new(w)
    }
}

impl From<StartPoint> for f64 {
    fn from(w: StartPoint) -> f64 {
        w.value
    }
}

/// The six model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdmParams {
    /// Drift rate.
    pub v: f64,
    /// Inter-trial standard deviation of the drift rate.
    pub eta: f64,
    /// Threshold separation.
    pub a: f64,
    /// Relative start point.
    pub w: StartPoint,
    /// Non-decision time in seconds.
    pub t0: f64,
    /// Diffusion coefficient.
    pub sigma2: f64,
}

impl DdmParams {
    /// Parameters with unit diffusion coefficient.
    pub fn new(v: f64, eta: f64, a: f64, w: f64, t0: f64) -> Self {
        DdmParams {
            v,
            eta,
            a,
            w: StartPoint::new(w),
            t0,
            sigma2: 1.0,
        }
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    /// Relative start point as a plain number.
    pub fn w(&self) -> f64 {
        self.w.get()
    }
}

/// Which threshold the process hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Lower,
    Upper,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::Lower => "lower",
            Choice::Upper => "upper",
        })
    }
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lower" | "1" => Ok(Choice::Lower),
            "upper" | "2" => Ok(Choice::Upper),
            other => Err(format!(
                "unknown choice `{other}` (expected lower or upper)"
            )),
        }
    }
}

/// One response: the boundary reached and the response time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub choice: Choice,
    pub rt: f64,
}

impl Observation {
    pub fn new(choice: Choice, rt: f64) -> Result<Self, DomainError> {
        let obs = Observation { choice, rt };
        obs.validate()?;
        Ok(obs)
    }

    pub fn lower(rt: f64) -> Self {
        Observation {
            choice: Choice::Lower,
            rt,
        }
    }

    pub fn upper(rt: f64) -> Self {
        Observation {
            choice: Choice::Upper,
            rt,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.rt.is_finite() && self.rt > 0.0) {
            return Err(DomainError::param("rt", self.rt, "must be finite and > 0"));
        }
        Ok(())
    }
}

/// An observation reduced to the lower boundary with unit diffusion coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedInput {
    /// `rt - t0`; may be non-positive.
    pub t_shifted: f64,
    /// Effective time `t_shifted / a^2`.
    pub t_hat: f64,
    pub params: DdmParams,
    /// Set when `t_shifted <= 0`.
    pub degenerate: bool,
}

pub fn validate(p: &DdmParams) -> Result<(), DomainError> {
    if !p.v.is_finite() {
        return Err(DomainError::param("v", p.v, "must be finite"));
    }
    if !(p.eta.is_finite() && p.eta >= 0.0) {
        return Err(DomainError::param("eta", p.eta, "must be finite and >= 0"));
    }
    if !(p.a.is_finite() && p.a > 0.0) {
        return Err(DomainError::param("a", p.a, "must be finite and > 0"));
    }
    let w = p.w();
    if !(w > 0.0 && w < 1.0) {
        return Err(DomainError::param(
            "w",
            w,
            "must lie strictly inside (0, 1)",
        ));
    }
    if !(p.t0.is_finite() && p.t0 >= 0.0) {
        return Err(DomainError::param("t0", p.t0, "must be finite and >= 0"));
    }
    if !(p.sigma2.is_finite() && p.sigma2 > 0.0) {
        return Err(DomainError::param(
            "sigma2",
            p.sigma2,
            "must be finite and > 0",
        ));
    }
    Ok(())
}

/// Rescale to unit diffusion coefficient: `v/σ`, `η/σ`, `a/σ`.
pub fn normalize(p: &DdmParams) -> Result<DdmParams, DomainError> {
    validate(p)?;
    Ok(normalize_unchecked(p))
}

pub(crate) fn normalize_unchecked(p: &DdmParams) -> DdmParams {
    if p.sigma2 == 1.0 {
        return *p;
    }
    let sigma = p.sigma2.sqrt();
    DdmParams {
        v: p.v / sigma,
        eta: p.eta / sigma,
        a: p.a / sigma,
        sigma2: 1.0,
        ..*p
    }
}

/// Map an upper-boundary evaluation onto the lower boundary: `v -> -v`, `w -> 1 - w`.
pub fn flip_for_boundary(p: &DdmParams, choice: Choice) -> DdmParams {
    match choice {
        Choice::Lower => *p,
        Choice::Upper => DdmParams {
            v: -p.v,
            w: p.w.mirrored(),
            ..*p
        },
    }
}

/// Normalize, flip, shift and form the effective time. `p` must be valid.
pub fn prepare(p: &DdmParams, obs: &Observation) -> NormalizedInput {
    debug_assert!(validate(p).is_ok());
    let params = flip_for_boundary(&normalize_unchecked(p), obs.choice);
    let t_shifted = obs.rt - params.t0;
    let t_hat = t_shifted / (params.a * params.a);
    NormalizedInput {
        t_shifted,
        t_hat,
        params,
        degenerate: !(t_shifted > 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> DdmParams {
        DdmParams::new(0.0, 0.0, 1.0, 0.5, 0.0)
    }

    #[test]
    fn validate_accepts_canonical_point() {
        assert!(validate(&canonical()).is_ok());
    }

    #[test]
    fn validate_names_offending_field() {
        let mut p = canonical();
        p.a = 0.0;
        assert_eq!(validate(&p).unwrap_err().field(), "a");
        let p = DdmParams::new(0.0, 0.0, 1.0, 1.0, 0.0);
        assert_eq!(validate(&p).unwrap_err().field(), "w");
        let p = DdmParams::new(0.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(validate(&p).unwrap_err().field(), "w");
        let p = DdmParams::new(0.0, -0.1, 1.0, 0.5, 0.0);
        assert_eq!(validate(&p).unwrap_err().field(), "eta");
        let p = DdmParams::new(f64::NAN, 0.0, 1.0, 0.5, 0.0);
        assert_eq!(validate(&p).unwrap_err().field(), "v");
        let p = canonical().with_sigma2(0.0);
        assert_eq!(validate(&p).unwrap_err().field(), "sigma2");
        let p = DdmParams::new(0.0, 0.0, 1.0, 0.5, -1.0);
        assert_eq!(validate(&p).unwrap_err().field(), "t0");
    }

    #[test]
    fn normalize_unit_sigma_is_identity() {
        let p = DdmParams::new(1.3, 0.4, 2.2, 0.3, 0.1);
        assert_eq!(normalize(&p).unwrap(), p);
    }

    #[test]
    fn normalize_divides_by_sigma() {
        let p = DdmParams::new(1.0, 0.5, 2.0, 0.5, 0.0).with_sigma2(4.0);
        let n = normalize(&p).unwrap();
        assert_eq!((n.v, n.eta, n.a, n.sigma2), (0.5, 0.25, 1.0, 1.0));
    }

    #[test]
    fn normalize_small_sigma_convention() {
        let p = DdmParams::new(0.1, 0.01, 0.11, 0.5, 0.0).with_sigma2(0.01);
        let n = normalize(&p).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 4.0 * f64::EPSILON * y.abs();
        assert!(close(n.v, 1.0));
        assert!(close(n.eta, 0.1));
        assert!(close(n.a, 1.1));
        assert_eq!(n.sigma2, 1.0);
    }

    #[test]
    fn flip_upper_negates_drift_and_mirrors_start() {
        let p = DdmParams::new(2.0, 0.0, 1.0, 0.3, 0.0);
        let f = flip_for_boundary(&p, Choice::Upper);
        assert_eq!(f.v, -2.0);
        assert_eq!(f.w(), 0.7);
        assert_eq!(flip_for_boundary(&p, Choice::Lower), p);
        let s = flip_for_boundary(&canonical(), Choice::Upper);
        assert_eq!((s.v, s.w()), (0.0, 0.5));
    }

    #[test]
    fn flip_is_exact_involution() {
        for &w in &[0.2, 0.1, 0.3, 1e-9, 0.999_999, 0.123_456_789] {
            let p = DdmParams::new(1.7, 0.2, 1.0, w, 0.0);
            let twice = flip_for_boundary(&flip_for_boundary(&p, Choice::Upper), Choice::Upper);
            assert_eq!(twice, p);
        }
    }

    #[test]
    fn prepare_shifts_and_scales() {
        let p = DdmParams::new(0.0, 0.0, 1.0, 0.5, 0.3);
        let n = prepare(&p, &Observation::lower(1.0));
        assert_eq!(n.t_shifted, 1.0 - 0.3);
        assert_eq!(n.t_hat, n.t_shifted);
        assert!(!n.degenerate);

        let n = prepare(&p, &Observation::lower(0.2));
        assert!(n.degenerate);

        let p = DdmParams::new(0.0, 0.0, 2.0, 0.5, 0.0);
        assert_eq!(prepare(&p, &Observation::lower(2.0)).t_hat, 0.5);
    }

    #[test]
    fn observation_rejects_bad_rt() {
        assert!(Observation::new(Choice::Lower, 0.0).is_err());
        assert!(Observation::new(Choice::Upper, f64::INFINITY).is_err());
        assert!(Observation::new(Choice::Upper, 0.4).is_ok());
    }

    #[test]
    fn choice_parses_case_insensitively() {
        assert_eq!("Lower".parse::<Choice>().unwrap(), Choice::Lower);
        assert_eq!("upper".parse::<Choice>().unwrap(), Choice::Upper);
        assert!("middle".parse::<Choice>().is_err());
    }
}
