//! First-passage-time densities by the thirteen truncation methods.
//!
//! A density is `prefactor * sum`, where the prefactor depends on the series
//! (large- or small-time) and on whether the drift varies across trials. The
//! prefactor is handled in log space and the tolerance is rescaled by it
//! before any term count is chosen.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;
use crate::params::{
    flip_for_boundary, normalize_unchecked, validate, Choice, DdmParams, Observation,
};
pub use crate::sums::DEFAULT_MAX_TERMS;
use crate::sums::{self, SumStyle};
use crate::truncation::{self, TimescaleChoice, Tolerance, LN_PI};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Truncation rule and timescale of a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Timescale {
    Large,
    SmallNav,
    SmallGon,
    SmallSwse,
    CombinedNav,
    CombinedGon,
    CombinedSwse,
}

/// One of the thirteen approximation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    timescale: Timescale,
    style: Option<SumStyle>,
}

/// Rejected method construction or name.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown method `{given}`; valid methods: {}", valid_names().join(", "))]
pub struct UnknownMethod {
    pub given: String,
}

fn valid_names() -> Vec<String> {
    MethodSpec::all().iter().map(|m| m.name()).collect()
}

impl MethodSpec {
    /// `style` must be `None` exactly when `timescale` is [`Timescale::Large`].
    pub fn new(timescale: Timescale, style: Option<SumStyle>) -> Option<Self> {
        match (timescale, style) {
            (Timescale::Large, None) => Some(MethodSpec { timescale, style }),
            (Timescale::Large, Some(_)) | (_, None) => None,
            _ => Some(MethodSpec { timescale, style }),
        }
    }

    pub const fn large() -> Self {
        MethodSpec {
            timescale: Timescale::Large,
            style: None,
        }
    }

    /// A small-time or combined method. Panics on [`Timescale::Large`].
    pub fn with_style(timescale: Timescale, style: SumStyle) -> Self {
        Self::new(timescale, Some(style)).expect("large-time methods take no summation style")
    }

    pub fn timescale(&self) -> Timescale {
        self.timescale
    }

    pub fn style(&self) -> Option<SumStyle> {
        self.style
    }

    /// All thirteen methods, large-time first.
    pub fn all() -> Vec<MethodSpec> {
        let mut out = vec![MethodSpec::large()];
        for ts in [
            Timescale::SmallNav,
            Timescale::SmallGon,
            Timescale::SmallSwse,
            Timescale::CombinedNav,
            Timescale::CombinedGon,
            Timescale::CombinedSwse,
        ] {
            for style in [SumStyle::S14, SumStyle::S17] {
                out.push(MethodSpec::with_style(ts, style));
            }
        }
        out
    }

    /// Methods that only ever use the small-time series.
    pub fn is_pure_small(&self) -> bool {
        matches!(
            self.timescale,
            Timescale::SmallNav | Timescale::SmallGon | Timescale::SmallSwse
        )
    }

    /// Name such as `combined-swse-17` or `large-nav`.
    pub fn name(&self) -> String {
        let (scale, rule) = match self.timescale {
            Timescale::Large => return "large-nav".to_string(),
            Timescale::SmallNav => ("small", "nav"),
            Timescale::SmallGon => ("small", "gon"),
            Timescale::SmallSwse => ("small", "swse"),
            Timescale::CombinedNav => ("combined", "nav"),
            Timescale::CombinedGon => ("combined", "gon"),
            Timescale::CombinedSwse => ("combined", "swse"),
        };
        let style = match self.style {
            Some(SumStyle::S14) => "14",
            _ => "17",
        };
        format!("{scale}-{rule}-{style}")
    }
}

impl Default for MethodSpec {
    fn default() -> Self {
        MethodSpec::with_style(Timescale::CombinedSwse, SumStyle::S17)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for MethodSpec {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        MethodSpec::all()
            .into_iter()
            .find(|m| m.name() == wanted)
            .ok_or_else(|| UnknownMethod {
                given: s.to_string(),
            })
    }
}

/// Scale of [`DensityResult::value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Absolute tolerance on the density.
    pub eps: f64,
    /// Use the large-time series when it needs at most this many terms (combined SWSE only).
    pub delta: usize,
    pub max_terms: usize,
    pub scale: Scale,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            eps: 1e-6,
            delta: 1,
            max_terms: DEFAULT_MAX_TERMS,
            scale: Scale::Linear,
        }
    }
}

/// Series actually evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Series {
    Large,
    Small,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Series::Large => "large",
            Series::Small => "small",
        })
    }
}

/// Constant or trial-to-trial variable drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Drift {
    Const,
    Var,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityResult {
    /// Density, or log-density when evaluated with [`Scale::Log`].
    pub value: f64,
    pub terms_used: usize,
    /// Reported as [`Series::Small`] for `rt <= t0`, where no series is evaluated.
    pub timescale_used: Series,
    pub converged: bool,
}

/// Log of the factor in front of the series, for normalized parameters.
///
/// `t` is the shifted time `rt - t0`. Variable drift with `eta == 0` gives
/// the constant-drift value bit for bit.
pub fn log_prefactor(
    series: Series,
    drift: Drift,
    v: f64,
    eta: f64,
    a: f64,
    w: f64,
    t: f64,
) -> f64 {
    let t_hat = t / (a * a);
    log_base(series, a.ln(), t_hat.ln()) + log_exponent(drift, v, eta, a, w, t)
}

/// Series-dependent part of the log-prefactor: `pi / a^2` or
/// `1 / (a^2 sqrt(2 pi t_hat^3))`.
fn log_base(series: Series, ln_a: f64, ln_t_hat: f64) -> f64 {
    match series {
        Series::Large => LN_PI - 2.0 * ln_a,
        Series::Small => -2.0 * ln_a - 0.5 * LN_2PI - 1.5 * ln_t_hat,
    }
}

/// Drift-dependent part of the log-prefactor, shared by both series.
fn log_exponent(drift: Drift, v: f64, eta: f64, a: f64, w: f64, t: f64) -> f64 {
    let x = v * a * w;
    let y = v * v * t;
    match drift {
        Drift::Const => -x - y / 2.0,
        Drift::Var => {
            let e2 = eta * eta;
            let spread = 1.0 + e2 * t;
            let expo = (e2 * a * a * w * w - 2.0 * x - y) / (2.0 * spread);
            expo + (-0.5 * spread.ln())
        }
    }
}

/// Log of the factor turning a constant-drift density into the variable-drift one.
pub fn log_m_conversion(v: f64, eta: f64, a: f64, w: f64, t: f64) -> f64 {
    let (hi, lo) = m_exponent(v, eta, a, w, t);
    hi + lo
}

/// Factor `M` with `M * f(t | v, a, w) = f(t | v, eta, a, w)`.
///
/// Taken as the exact difference of the two small-time log-prefactors, so
/// that it reproduces the ratio of the densities this module returns.
/// May overflow to infinity where [`log_m_conversion`] stays finite.
pub fn m_conversion(v: f64, eta: f64, a: f64, w: f64, t: f64) -> f64 {
    let (hi, lo) = m_exponent(v, eta, a, w, t);
    hi.exp() * (1.0 + lo)
}

fn m_exponent(v: f64, eta: f64, a: f64, w: f64, t: f64) -> (f64, f64) {
    let var = log_prefactor(Series::Small, Drift::Var, v, eta, a, w, t);
    let cst = log_prefactor(Series::Small, Drift::Const, v, eta, a, w, t);
    let hi = var - cst;
    // Error-free difference (two-sum).
    let bb = hi - var;
    let lo = (var - (hi - bb)) + (-cst - bb);
    (hi, lo)
}

/// `exp(log_p) * sum` before the output scale is chosen.
struct Evaluated {
    log_p: f64,
    /// `exp(log_p)`, when already computed.
    p: Option<f64>,
    sum: f64,
    terms_used: usize,
    series: Series,
    converged: bool,
}

impl Evaluated {
    /// Density, clamped at zero.
    fn linear(&self) -> f64 {
        if !(self.sum > 0.0) {
            return 0.0;
        }
        let p = self.p.unwrap_or_else(|| self.log_p.exp());
        if p.is_normal() && p.is_finite() {
            let v = p * self.sum;
            if v.is_normal() {
                return v;
            }
        }
        self.log().exp()
    }

    fn log(&self) -> f64 {
        if !(self.sum > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.log_p + self.sum.ln()
    }

    fn into_result(self, scale: Scale) -> DensityResult {
        DensityResult {
            value: match scale {
                Scale::Linear => self.linear(),
                Scale::Log => self.log(),
            },
            terms_used: self.terms_used,
            timescale_used: self.series,
            converged: self.converged,
        }
    }
}

fn cap(k: usize, max_terms: usize) -> (usize, bool) {
    let max_terms = max_terms.max(1);
    if k > max_terms {
        (max_terms, false)
    } else {
        (k, true)
    }
}

/// Quantities shared by every observation evaluated under one parameter set.
struct Context<'a> {
    method: MethodSpec,
    opts: &'a EvalOptions,
    lower: DdmParams,
    upper: DdmParams,
    ln_a: f64,
    ln_eps: f64,
}

impl<'a> Context<'a> {
    fn new(
        method: MethodSpec,
        params: &DdmParams,
        opts: &'a EvalOptions,
    ) -> Result<Self, DomainError> {
        validate(params)?;
        let unit = normalize_unchecked(params);
        Ok(Context {
            method,
            opts,
            lower: flip_for_boundary(&unit, Choice::Lower),
            upper: flip_for_boundary(&unit, Choice::Upper),
            ln_a: unit.a.ln(),
            ln_eps: opts.eps.ln(),
        })
    }

    fn evaluate(&self, obs: &Observation) -> Result<Evaluated, DomainError> {
        obs.validate()?;
        let (method, opts, ln_a, ln_eps) = (self.method, self.opts, self.ln_a, self.ln_eps);
        let p = match obs.choice {
            Choice::Lower => self.lower,
            Choice::Upper => self.upper,
        };
        let t = obs.rt - p.t0;
        if !(t > 0.0) {
            return Ok(Evaluated {
                log_p: 0.0,
                p: None,
                sum: 0.0,
                terms_used: 0,
                series: Series::Small,
                converged: true,
            });
        }
        let t_hat = t / (p.a * p.a);
        let w = p.w();
        let drift = if p.eta > 0.0 {
            Drift::Var
        } else {
            Drift::Const
        };
        let ln_t_hat = t_hat.ln();
        let expo = log_exponent(drift, p.v, p.eta, p.a, w, t);
        let lp = |series| log_base(series, ln_a, ln_t_hat) + expo;
        let rescale = |log_p: f64| ln_eps - log_p;

        let large = |k: usize, log_p: f64| {
            let (k, ok) = cap(k, opts.max_terms);
            Evaluated {
                log_p,
                p: None,
                sum: sums::sum_large(t_hat, w, k),
                terms_used: k,
                series: Series::Large,
                converged: ok,
            }
        };
        let small_fixed = |style: SumStyle, k: usize, log_p: f64| {
            let (k, ok) = cap(k, opts.max_terms);
            let (sum, terms) = match style {
                SumStyle::S14 => (sums::sum_small_s14(t_hat, w, k), 2 * (k / 2) + 1),
                SumStyle::S17 => (sums::sum_small_s17(t_hat, w, k), k),
            };
            Evaluated {
                log_p,
                p: None,
                sum,
                terms_used: terms,
                series: Series::Small,
                converged: ok,
            }
        };
        let small_adaptive = |style: SumStyle, log_p: f64| {
            // Divide directly when the prefactor is representable; the value is
            // reused for the density.
            let pre = log_p.exp();
            let eps_prime = if pre.is_normal() && pre.is_finite() {
                opts.eps / pre
            } else {
                Tolerance::eps_prime_from_ln(rescale(log_p))
            };
            let r = sums::sum_swse(style, t_hat, w, eps_prime, opts.max_terms);
            Evaluated {
                log_p,
                p: Some(pre),
                sum: r.sum,
                terms_used: r.terms_used,
                series: Series::Small,
                converged: r.converged,
            }
        };
        let small_ln = |ln_eps_prime| truncation::small_bound_tolerance_ln(t_hat, ln_eps_prime);
        let style = method.style.unwrap_or(SumStyle::S17);

        let out = match method.timescale {
            Timescale::Large => {
                let log_p = lp(Series::Large);
                large(
                    truncation::k_large_nav_logs(t_hat, ln_t_hat, rescale(log_p)),
                    log_p,
                )
            }
            Timescale::SmallNav => {
                let log_p = lp(Series::Small);
                let ln_eps = small_ln(rescale(log_p));
                small_fixed(style, truncation::k_small_nav_ln(t_hat, ln_eps), log_p)
            }
            Timescale::SmallGon => {
                let log_p = lp(Series::Small);
                let ln_eps = small_ln(rescale(log_p));
                small_fixed(style, truncation::k_small_gon_ln(t_hat, w, ln_eps), log_p)
            }
            Timescale::SmallSwse => small_adaptive(style, lp(Series::Small)),
            Timescale::CombinedNav | Timescale::CombinedGon => {
                let (lp_l, lp_s) = (lp(Series::Large), lp(Series::Small));
                let ln_l = rescale(lp_l);
                let ln_s = small_ln(rescale(lp_s));
                let choice = if method.timescale == Timescale::CombinedNav {
                    truncation::choose_combined_nav_ln(t_hat, ln_l, ln_s)
                } else {
                    truncation::choose_combined_gon_ln(t_hat, w, ln_l, ln_s)
                };
                match choice {
                    TimescaleChoice::LargeTime(k) => large(k, lp_l),
                    TimescaleChoice::SmallTimeFixed(k) => small_fixed(style, k, lp_s),
                    TimescaleChoice::SmallTimeAdaptive => unreachable!("fixed-count rules"),
                }
            }
            Timescale::CombinedSwse => {
                let lp_l = lp(Series::Large);
                let ln_l = rescale(lp_l);
                match truncation::choose_swse_combined_logs(t_hat, ln_t_hat, ln_l, opts.delta) {
                    TimescaleChoice::LargeTime(k) => large(k, lp_l),
                    _ => small_adaptive(style, lp(Series::Small)),
                }
            }
        };
        Ok(out)
    }
}

/// Density of one observation.
///
/// Returns 0 (or `-inf` on the log scale) for `rt <= t0`. When `converged`
/// is set the value is within `opts.eps` of the exact density.
pub fn density(
    method: MethodSpec,
    params: &DdmParams,
    obs: &Observation,
    opts: &EvalOptions,
) -> Result<DensityResult, DomainError> {
    Ok(Context::new(method, params, opts)?
        .evaluate(obs)?
        .into_result(opts.scale))
}

/// Log-density of one observation, regardless of `opts.scale`.
pub fn log_density(
    method: MethodSpec,
    params: &DdmParams,
    obs: &Observation,
    opts: &EvalOptions,
) -> Result<f64, DomainError> {
    Ok(Context::new(method, params, opts)?.evaluate(obs)?.log())
}

/// Densities of many observations; each uses its own term count.
pub fn density_batch(
    method: MethodSpec,
    params: &DdmParams,
    observations: &[Observation],
    opts: &EvalOptions,
) -> Result<Vec<DensityResult>, DomainError> {
    let ctx = Context::new(method, params, opts)?;
    observations
        .iter()
        .map(|obs| Ok(ctx.evaluate(obs)?.into_result(opts.scale)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Choice;

    const REF_DENSITY: f64 = 0.022_593_967_916_138_819;
    const REF_LOG_DENSITY: f64 = -3.790_072_314_695_279_2;

    fn canonical() -> DdmParams {
        DdmParams::new(0.0, 0.0, 1.0, 0.5, 0.0)
    }

    #[test]
    fn there_are_thirteen_named_methods() {
        let all = MethodSpec::all();
        assert_eq!(all.len(), 13);
        for m in &all {
            assert_eq!(m.name().parse::<MethodSpec>().unwrap(), *m);
        }
        assert!(MethodSpec::new(Timescale::Large, Some(SumStyle::S14)).is_none());
        assert!(MethodSpec::new(Timescale::SmallNav, None).is_none());
        let err = "bogus".parse::<MethodSpec>().unwrap_err().to_string();
        for m in &all {
            assert!(err.contains(&m.name()));
        }
        assert_eq!(MethodSpec::default().name(), "combined-swse-17");
    }

    #[test]
    fn prefactor_values() {
        let lp = log_prefactor(Series::Small, Drift::Const, 0.0, 0.0, 1.0, 0.5, 1.0);
        assert!((lp - (-0.918_938_533_204_672_7)).abs() < 1e-15);
        let lp = log_prefactor(Series::Large, Drift::Const, 0.0, 0.0, 2.0, 0.5, 1.0);
        assert!((lp - (std::f64::consts::PI / 4.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn variable_drift_without_spread_is_constant_drift() {
        for &(v, a, w, t) in &[
            (1.3, 0.7, 0.2, 0.9),
            (-4.0, 2.5, 0.8, 0.01),
            (0.0, 1.0, 0.5, 3.0),
        ] {
            for series in [Series::Large, Series::Small] {
                let c = log_prefactor(series, Drift::Const, v, 0.0, a, w, t);
                let var = log_prefactor(series, Drift::Var, v, 0.0, a, w, t);
                assert_eq!(c.to_bits(), var.to_bits());
            }
            assert_eq!(m_conversion(v, 0.0, a, w, t), 1.0);
        }
    }

    #[test]
    fn m_stays_finite_in_log_space() {
        let lm = log_m_conversion(0.0, 50.0, 40.0, 0.99, 1e-4);
        assert!(lm.is_finite());
        assert!(m_conversion(0.0, 50.0, 40.0, 0.99, 1e-4).is_infinite());
    }

    #[test]
    fn reference_density() {
        let opts = EvalOptions::default();
        let r = density(
            MethodSpec::default(),
            &canonical(),
            &Observation::lower(1.0),
            &opts,
        )
        .unwrap();
        assert!((r.value - REF_DENSITY).abs() < 1e-6);
        assert!(r.converged);
        let up = density(
            MethodSpec::default(),
            &canonical(),
            &Observation::upper(1.0),
            &opts,
        )
        .unwrap();
        assert_eq!(up.value.to_bits(), r.value.to_bits());
        let ld = log_density(
            MethodSpec::default(),
            &canonical(),
            &Observation::lower(1.0),
            &opts,
        )
        .unwrap();
        assert!((ld - REF_LOG_DENSITY).abs() < 1e-4);
        let ratio = ld.exp() / r.value;
        assert!((ratio - 1.0).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn degenerate_time_is_zero() {
        let p = DdmParams::new(0.0, 0.0, 1.0, 0.5, 0.3);
        let opts = EvalOptions::default();
        for m in MethodSpec::all() {
            let r = density(m, &p, &Observation::lower(0.2), &opts).unwrap();
            assert_eq!(r.value, 0.0);
            assert_eq!(r.terms_used, 0);
            assert!(r.converged);
            let l = log_density(m, &p, &Observation::lower(0.3), &opts).unwrap();
            assert_eq!(l, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn methods_agree_pairwise() {
        let opts = EvalOptions::default();
        let vals: Vec<f64> = MethodSpec::all()
            .into_iter()
            .map(|m| {
                density(m, &canonical(), &Observation::lower(1.0), &opts)
                    .unwrap()
                    .value
            })
            .collect();
        for x in &vals {
            for y in &vals {
                assert!((x - y).abs() < 2e-6);
            }
        }
    }

    #[test]
    fn log_scale_option() {
        let opts = EvalOptions {
            scale: Scale::Log,
            ..EvalOptions::default()
        };
        let r = density(
            MethodSpec::default(),
            &canonical(),
            &Observation::lower(1.0),
            &opts,
        )
        .unwrap();
        let ld = log_density(
            MethodSpec::default(),
            &canonical(),
            &Observation::lower(1.0),
            &opts,
        )
        .unwrap();
        assert_eq!(r.value, ld);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = DdmParams::new(0.0, 0.0, 0.0, 0.5, 0.0);
        let e = density(
            MethodSpec::default(),
            &p,
            &Observation::lower(1.0),
            &EvalOptions::default(),
        );
        assert_eq!(e.unwrap_err().field(), "a");
        let bad_obs = Observation {
            choice: Choice::Lower,
            rt: -1.0,
        };
        let e = density(
            MethodSpec::default(),
            &canonical(),
            &bad_obs,
            &EvalOptions::default(),
        );
        assert_eq!(e.unwrap_err().field(), "rt");
    }

    #[test]
    fn batches_match_singletons() {
        let opts = EvalOptions::default();
        let p = DdmParams::new(0.7, 0.4, 1.3, 0.35, 0.1);
        let obs: Vec<Observation> = (1..40)
            .map(|i| {
                let rt = 0.05 * i as f64;
                if i % 3 == 0 {
                    Observation::upper(rt)
                } else {
                    Observation::lower(rt)
                }
            })
            .collect();
        let m = MethodSpec::default();
        assert!(density_batch(m, &p, &[], &opts).unwrap().is_empty());
        let batch = density_batch(m, &p, &obs, &opts).unwrap();
        for (o, r) in obs.iter().zip(&batch) {
            assert_eq!(density(m, &p, o, &opts).unwrap(), *r);
        }
        let one = density_batch(m, &p, &obs[..1], &opts).unwrap();
        assert_eq!(one[0], batch[0]);
    }

    #[test]
    fn term_cap_is_reported() {
        let opts = EvalOptions {
            max_terms: 2,
            ..EvalOptions::default()
        };
        let p = DdmParams::new(0.0, 0.0, 0.1, 0.5, 0.0);
        let r = density(
            MethodSpec::with_style(Timescale::SmallSwse, SumStyle::S17),
            &p,
            &Observation::lower(10.0),
            &opts,
        )
        .unwrap();
        assert!(!r.converged);
        let r = density(MethodSpec::large(), &p, &Observation::lower(1e-4), &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.terms_used, 2);
    }
}
