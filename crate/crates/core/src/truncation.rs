//! Term counts that guarantee a truncation error below a sum-level tolerance,
//! and the rules that pick a timescale from them.
//!
//! Every function here works on the effective time `t_hat` and a tolerance
//! `eps_prime` that has already been divided by the density prefactor. The
//! `_ln` variants take `ln(eps_prime)` so that extreme prefactors cannot
//! overflow the tolerance.

use std::f64::consts::PI;

pub(crate) const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Which series to evaluate and how many terms to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimescaleChoice {
    LargeTime(usize),
    SmallTimeFixed(usize),
    SmallTimeAdaptive,
}

/// A density tolerance and its sum-level rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub eps: f64,
    pub eps_prime: f64,
    pub ln_eps_prime: f64,
}

impl Tolerance {
    /// Divide `eps` by `exp(log_prefactor)` in log space.
    ///
    /// `eps_prime` is clamped to the positive normal range; `ln_eps_prime`
    /// keeps the exact value.
    pub fn rescaled(eps: f64, log_prefactor: f64) -> Self {
        let ln_eps_prime = eps.ln() - log_prefactor;
        Tolerance {
            eps,
            eps_prime: Self::eps_prime_from_ln(ln_eps_prime),
            ln_eps_prime,
        }
    }

    /// `exp(ln_eps_prime)` clamped to the positive normal range.
    pub fn eps_prime_from_ln(ln_eps_prime: f64) -> f64 {
        ln_eps_prime.exp().clamp(f64::MIN_POSITIVE, f64::MAX)
    }
}

fn ceil_count(x: f64) -> usize {
    // NaN and negatives fall to 1; the cast saturates for huge values.
    let c = x.ceil();
    if c >= 1.0 {
        c as usize
    } else {
        1
    }
}

/// Large-time term count `ceil(max{sqrt(-2 ln(pi t eps) / (pi^2 t)), 1 / (pi sqrt t)})`.
pub fn k_large_nav(t_hat: f64, eps_prime: f64) -> usize {
    k_large_nav_ln(t_hat, eps_prime.ln())
}

pub fn k_large_nav_ln(t_hat: f64, ln_eps_prime: f64) -> usize {
    k_large_nav_logs(t_hat, t_hat.ln(), ln_eps_prime)
}

/// [`k_large_nav_ln`] with `ln(t_hat)` supplied by the caller.
pub(crate) fn k_large_nav_logs(t_hat: f64, ln_t_hat: f64, ln_eps_prime: f64) -> usize {
    let fallback = 1.0 / (PI * t_hat.sqrt());
    let arg = LN_PI + ln_t_hat + ln_eps_prime;
    let bound = if arg < 0.0 {
        (-2.0 * arg / (PI * PI * t_hat)).sqrt()
    } else {
        0.0
    };
    ceil_count(bound.max(fallback))
}

/// Small-time term count `ceil(max{2 + sqrt(-2 t ln(2 eps sqrt(2 pi t))), 1 + sqrt t})`.
pub fn k_small_nav(t_hat: f64, eps_prime: f64) -> usize {
    k_small_nav_ln(t_hat, eps_prime.ln())
}

pub fn k_small_nav_ln(t_hat: f64, ln_eps_prime: f64) -> usize {
    let fallback = 1.0 + t_hat.sqrt();
    let inner = 2.0_f64.ln() + ln_eps_prime + 0.5 * (2.0 * PI * t_hat).ln();
    let bound = if inner < 0.0 {
        2.0 + (-2.0 * t_hat * inner).sqrt()
    } else {
        0.0
    };
    ceil_count(bound.max(fallback))
}

/// Small-time term count from the pair bound; always odd.
///
/// `1 + 2 ceil(max{(sqrt(2t) - w)/2, (sqrt(-t(u - sqrt(-2u - 2))) - w)/2})`
/// with `u = min{-1, ln(2 pi t^2 eps^2)}`; the inner ceiling is clamped at 0.
pub fn k_small_gon(t_hat: f64, w: f64, eps_prime: f64) -> usize {
    k_small_gon_ln(t_hat, w, eps_prime.ln())
}

pub fn k_small_gon_ln(t_hat: f64, w: f64, ln_eps_prime: f64) -> usize {
    let u = ((2.0 * PI).ln() + 2.0 * t_hat.ln() + 2.0 * ln_eps_prime).min(-1.0);
    let arg = -t_hat * (u - (-2.0 * u - 2.0).sqrt());
    let c1 = 0.5 * ((2.0 * t_hat).sqrt() - w);
    let c2 = 0.5 * (arg.sqrt() - w);
    let pairs = c1.max(c2).ceil();
    let pairs = if pairs > 0.0 { pairs as usize } else { 0 };
    pairs.saturating_mul(2).saturating_add(1)
}

/// Tolerance for the small-time bounds, given a sum-level `ln(eps_prime)`.
///
/// The small-time bounds are stated for the sum times `1 / sqrt(2 pi t^3)`.
/// Passing `eps_prime` unchanged is only safe while that factor is at least
/// one, so for larger `t_hat` the tolerance is divided by it; it is never
/// loosened.
pub fn small_bound_tolerance_ln(t_hat: f64, ln_eps_prime: f64) -> f64 {
    let ln_factor = 0.5 * ((2.0 * PI).ln() + 3.0 * t_hat.ln());
    ln_eps_prime - ln_factor.max(0.0)
}

fn pick(k_large: usize, k_small: usize) -> TimescaleChoice {
    if k_large < k_small {
        TimescaleChoice::LargeTime(k_large)
    } else {
        TimescaleChoice::SmallTimeFixed(k_small)
    }
}

/// Fewer terms of large-time or small-time (Navarro–Fuss bounds); ties go to small-time.
pub fn choose_combined_nav(t_hat: f64, eps_prime: f64) -> TimescaleChoice {
    choose_combined_nav_ln(t_hat, eps_prime.ln(), eps_prime.ln())
}

/// As [`choose_combined_nav`] with separate tolerances for the two series.
pub fn choose_combined_nav_ln(t_hat: f64, ln_eps_large: f64, ln_eps_small: f64) -> TimescaleChoice {
    pick(
        k_large_nav_ln(t_hat, ln_eps_large),
        k_small_nav_ln(t_hat, ln_eps_small),
    )
}

/// Fewer terms of large-time or small-time (pair bound); ties go to small-time.
pub fn choose_combined_gon(t_hat: f64, w: f64, eps_prime: f64) -> TimescaleChoice {
    choose_combined_gon_ln(t_hat, w, eps_prime.ln(), eps_prime.ln())
}

pub fn choose_combined_gon_ln(
    t_hat: f64,
    w: f64,
    ln_eps_large: f64,
    ln_eps_small: f64,
) -> TimescaleChoice {
    pick(
        k_large_nav_ln(t_hat, ln_eps_large),
        k_small_gon_ln(t_hat, w, ln_eps_small),
    )
}

/// Large-time when it needs at most `delta` terms, otherwise the adaptive small-time sum.
pub fn choose_swse_combined(t_hat: f64, eps_prime: f64, delta: usize) -> TimescaleChoice {
    choose_swse_combined_ln(t_hat, eps_prime.ln(), delta)
}

pub fn choose_swse_combined_ln(t_hat: f64, ln_eps_large: f64, delta: usize) -> TimescaleChoice {
    choose_swse_combined_logs(t_hat, t_hat.ln(), ln_eps_large, delta)
}

pub(crate) fn choose_swse_combined_logs(
    t_hat: f64,
    ln_t_hat: f64,
    ln_eps_large: f64,
    delta: usize,
) -> TimescaleChoice {
    let k = k_large_nav_logs(t_hat, ln_t_hat, ln_eps_large);
    if k <= delta {
        TimescaleChoice::LargeTime(k)
    } else {
        TimescaleChoice::SmallTimeAdaptive
    }
}
