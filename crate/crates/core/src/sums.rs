//! Truncated series kernels.
//!
//! All sums are over the normalized density (unit diffusion coefficient,
//! effective time `t_hat`). Small-time terms are `x * exp(-x^2 / (2 t_hat))`
//! with `x = w + 2j`; the one-sided ordering writes the same terms as
//! `(-1)^j r_j` with `r_j = j + w` (even `j`) or `j + 1 - w` (odd `j`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Default cap on the number of terms an adaptive sum may add.
pub const DEFAULT_MAX_TERMS: usize = 1_000_000;

/// Ordering of the small-time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SumStyle {
    /// Two-sided index window `j = -K..=K`.
    S14,
    /// One-sided alternating index `j = 0..k`.
    S17,
}

/// Outcome of an adaptive small-time sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwseResult {
    pub sum: f64,
    pub terms_used: usize,
    /// Absolute value of the first term left out.
    pub last_omitted_abs: f64,
    /// False when the term cap was reached before the stopping rule fired.
    pub converged: bool,
}

#[inline]
fn small_term(x: f64, half_inv_t: f64) -> f64 {
    x * (-x * x * half_inv_t).exp()
}

/// `r_j` of the one-sided ordering.
#[inline]
pub fn r_index(j: usize, w: f64) -> f64 {
    if j.is_multiple_of(2) {
        j as f64 + w
    } else {
        (j + 1) as f64 - w
    }
}

/// Signed term at position `j` of the one-sided ordering.
#[inline]
fn s17_term(j: usize, w: f64, half_inv_t: f64) -> f64 {
    let r = r_index(j, w);
    let term = small_term(r, half_inv_t);
    if j.is_multiple_of(2) {
        term
    } else {
        -term
    }
}

/// Large-time inner sum `sum_{j=1..k} j sin(j w pi) exp(-j^2 pi^2 t_hat / 2)`.
pub fn sum_large(t_hat: f64, w: f64, k: usize) -> f64 {
    let c = PI * PI * t_hat / 2.0;
    let mut sum = 0.0;
    for j in 1..=k {
        let jf = j as f64;
        sum += jf * sin_pi_multiple(jf, w) * (-jf * jf * c).exp();
    }
    sum
}

/// `sin(pi * j * w)` for integer `j < 2^26`, with `j * w` reduced modulo 2
/// exactly. The naive angle loses about `j` ulps, which the large-time sum
/// cannot afford at small `t_hat` where its terms cancel heavily.
fn sin_pi_multiple(j: f64, w: f64) -> f64 {
    // w = w_hi + w_lo with 26 and 27 significant bits; both products are exact.
    let w_hi = f64::from_bits(w.to_bits() & !((1u64 << 27) - 1));
    let w_lo = w - w_hi;
    let p = j * w_hi;
    let r = p - 2.0 * (0.5 * p).round();
    let mut x = r + j * w_lo;
    if x > 0.5 {
        x = 1.0 - x;
    } else if x < -0.5 {
        x = -1.0 - x;
    }
    (PI * x).sin()
}

/// Small-time sum over `j = -floor(k/2)..=floor(k/2)`.
///
/// Accumulates `j = 0`, then `-1, 1, -2, 2, ...`, the same order as the
/// one-sided form.
pub fn sum_small_s14(t_hat: f64, w: f64, k: usize) -> f64 {
    let half_inv_t = 0.5 / t_hat;
    let big_k = k / 2;
    let mut sum = small_term(w, half_inv_t);
    for j in 1..=big_k {
        let jf = j as f64;
        sum += small_term(w - 2.0 * jf, half_inv_t);
        sum += small_term(w + 2.0 * jf, half_inv_t);
    }
    sum
}

/// Small-time sum over the first `k` terms of the one-sided ordering.
pub fn sum_small_s17(t_hat: f64, w: f64, k: usize) -> f64 {
    let half_inv_t = 0.5 / t_hat;
    let mut sum = 0.0;
    for j in 0..k {
        sum += s17_term(j, w, half_inv_t);
    }
    sum
}

/// Index after which term magnitudes decrease monotonically.
///
/// S14 counts pairs (`max(0, floor(sqrt(t_hat)/2 - w/2))`). S17 counts
/// one-sided positions; `floor(sqrt(t_hat) - w)` is raised when needed so
/// that `r_{J+1} >= sqrt(t_hat)`, the point past which `x exp(-x^2/(2 t_hat))`
/// is decreasing.
pub fn j_threshold(style: SumStyle, t_hat: f64, w: f64) -> usize {
    let s = t_hat.sqrt();
    match style {
        SumStyle::S14 => floor_nonneg(s / 2.0 - w / 2.0),
        SumStyle::S17 => floor_nonneg(s - w).max(first_past_peak(s, w) - 1),
    }
}

fn floor_nonneg(x: f64) -> usize {
    if x > 0.0 {
        x.floor() as usize
    } else {
        0
    }
}

/// Smallest `m >= 1` with `r_m >= s`.
fn first_past_peak(s: f64, w: f64) -> usize {
    let mut m = floor_nonneg(s - 1.0).max(1);
    while m > 1 && r_index(m - 1, w) >= s {
        m -= 1;
    }
    while r_index(m, w) < s {
        m += 1;
    }
    m
}

/// Adaptive small-time sum: add terms in the one-sided order and stop at the
/// first term past the monotone threshold whose magnitude is below `eps_prime`.
///
/// Both styles visit identical terms; S14 takes the sign from its two-sided
/// index. The Gaussian factors come from a ratio recurrence on each side of
/// the series: `exp(-(x+2)^2 / 2t) = exp(-x^2 / 2t) * exp(-2(x+1) / t)`, and
/// successive ratios differ by `exp(-4/t)`. Three exponentials per sum
/// instead of one per term; the relative error of the `m`-th factor on a
/// side grows like `m^2 / 2` ulps.
pub fn sum_swse(
    style: SumStyle,
    t_hat: f64,
    w: f64,
    eps_prime: f64,
    max_terms: usize,
) -> SwseResult {
    let inv_t = 1.0 / t_hat;
    let guard = j_threshold(SumStyle::S17, t_hat, w);
    let max_terms = max_terms.max(1);

    let first = (-0.5 * w * w * inv_t).exp();
    let mut up = first;
    let mut down = first;
    let mut up_ratio = (-2.0 * (1.0 + w) * inv_t).exp();
    let mut down_ratio = (-2.0 * (1.0 - w) * inv_t).exp();
    let step = up_ratio * down_ratio;

    let mut sum = 0.0;
    let mut pos = 0;
    let mut m = 0.0;
    let mut term = w * first;
    // Terms alternate between the lower and upper sides, one pair per pass.
    macro_rules! take {
        () => {
            if pos > guard && term.abs() < eps_prime {
                return SwseResult {
                    sum,
                    terms_used: pos,
                    last_omitted_abs: term.abs(),
                    converged: true,
                };
            }
            if pos >= max_terms {
                return SwseResult {
                    sum,
                    terms_used: pos,
                    last_omitted_abs: term.abs(),
                    converged: false,
                };
            }
            sum += term;
            pos += 1;
        };
    }
    loop {
        take!();
        m += 1.0;
        down *= down_ratio;
        down_ratio *= step;
        let x = match style {
            SumStyle::S14 => w - 2.0 * m,
            SumStyle::S17 => -(2.0 * m - w),
        };
        term = x * down;
        take!();
        up *= up_ratio;
        up_ratio *= step;
        term = (w + 2.0 * m) * up;
    }
}
