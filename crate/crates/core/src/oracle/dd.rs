//! Double-double arithmetic (about 106 significant bits) for the reference
//! sums. Only the operations the oracle needs.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub const PI: Dd = Dd {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};

pub const LN_2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `x * 2^k` without intermediate overflow or underflow of the scale factor.
fn ldexp(mut x: f64, mut k: i32) -> f64 {
    while k > 1000 {
        x *= f64::from_bits(((1023 + 1000) as u64) << 52);
        k -= 1000;
    }
    while k < -1000 {
        x *= f64::from_bits(((1023 - 1000) as u64) << 52);
        k += 1000;
    }
    x * f64::from_bits(((1023 + k) as u64) << 52)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact sum of two doubles.
    pub fn sum_f64(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_sum(a, b);
        Dd { hi, lo }
    }

    /// Exact product of two doubles.
    pub fn prod_f64(a: f64, b: f64) -> Dd {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let (s, t) = two_sum(self.hi, -p);
        let t = t - e + self.lo;
        let q2 = (s + t) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    pub fn ldexp(self, k: i32) -> Dd {
        Dd {
            hi: ldexp(self.hi, k),
            lo: ldexp(self.lo, k),
        }
    }

    pub fn sqr(self) -> Dd {
        self * self
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// `e^x`.
    pub fn exp(self) -> Dd {
        if self.hi < -746.0 {
            return Dd::ZERO;
        }
        if self.hi > 709.8 {
            return Dd::from_f64(f64::INFINITY);
        }
        let k = (self.hi / LN_2.hi).round();
        let r = (self - LN_2.mul_f64(k)).ldexp(-10);
        // expm1(r) by Taylor series, |r| < 3.4e-4.
        let mut s = r;
        let mut p = r;
        for i in 2..=10 {
            p = (p * r).div_f64(i as f64);
            s = s + p;
        }
        // expm1(2x) = 2 expm1(x) + expm1(x)^2
        for _ in 0..10 {
            s = s.ldexp(1) + s.sqr();
        }
        (s + Dd::ONE).ldexp(k as i32)
    }

    /// `sin(pi * x)` with exact reduction of `x` modulo 2.
    pub fn sin_pi(self) -> Dd {
        let n = 2.0 * (self.hi / 2.0).round();
        let mut y = Dd::sum_f64(self.hi - n, self.lo);
        let mut sign = 1.0;
        if y.hi < 0.0 {
            y = -y;
            sign = -1.0;
        }
        if y.hi > 0.5 {
            y = Dd::ONE - y;
        }
        let r = if y.hi > 0.25 {
            cos_taylor(PI * (Dd::from_f64(0.5) - y))
        } else {
            sin_taylor(PI * y)
        };
        r.mul_f64(sign)
    }
}

fn sin_taylor(x: Dd) -> Dd {
    let x2 = x.sqr();
    let mut term = x;
    let mut sum = x;
    let mut n = 1.0;
    loop {
        term = -(term * x2).div_f64((n + 1.0) * (n + 2.0));
        n += 2.0;
        if term.hi.abs() < 1e-36 {
            return sum;
        }
        sum = sum + term;
    }
}

fn cos_taylor(x: Dd) -> Dd {
    let x2 = x.sqr();
    let mut term = Dd::ONE;
    let mut sum = Dd::ONE;
    let mut n = 0.0;
    loop {
        term = -(term * x2).div_f64((n + 1.0) * (n + 2.0));
        n += 2.0;
        if term.hi.abs() < 1e-36 {
            return sum;
        }
        sum = sum + term;
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;

    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Neg for Dd {
    type Output = Dd;

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;

    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;

    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}
