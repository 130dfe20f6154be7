//! Maximum-likelihood fitting with two drift rates, and a simulator.
//!
//! The free parameters are `a`, one drift rate per stimulus class, `w`,
//! `t0` and `eta`. Each start runs a bounded quasi-Newton minimization of
//! the negative log-likelihood; starts run in parallel and each run is
//! deterministic.

pub mod data;
pub mod optim;
pub mod simulate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{log_density, EvalOptions, MethodSpec};
use crate::error::DomainError;
use crate::params::{validate, DdmParams, Observation};
pub use data::{DataError, Dataset, Row, StimulusClass};
use optim::{minimize, OptimConfig};
pub use simulate::{simulate, SimError, Simulation, DEFAULT_DT, TRIAL_TIMEOUT};

/// The six free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub a: f64,
    #[serde(rename = "v_class1")]
    pub v_c1: f64,
    #[serde(rename = "v_class2")]
    pub v_c2: f64,
    pub w: f64,
    pub t0: f64,
    pub eta: f64,
}

impl Theta {
    pub fn v(&self, class: StimulusClass) -> f64 {
        match class {
            StimulusClass::C1 => self.v_c1,
            StimulusClass::C2 => self.v_c2,
        }
    }

    pub fn params(&self, class: StimulusClass) -> DdmParams {
        DdmParams::new(self.v(class), self.eta, self.a, self.w, self.t0)
    }

    fn to_array(self) -> [f64; 6] {
        [self.a, self.v_c1, self.v_c2, self.w, self.t0, self.eta]
    }

    fn from_array(x: [f64; 6]) -> Self {
        Theta {
            a: x[0],
            v_c1: x[1],
            v_c2: x[2],
            w: x[3],
            t0: x[4],
            eta: x[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Theta,
    pub upper: Theta,
}

impl Bounds {
    /// Default box; the `t0` upper bound stays `1e-4` below the fastest response.
    pub fn default_for(data: &Dataset) -> Self {
        let t0_max = (data.min_rt() - 1e-4).max(0.0);
        Bounds {
            lower: Theta {
                a: 0.05,
                v_c1: -15.0,
                v_c2: -15.0,
                w: 0.01,
                t0: 0.0,
                eta: 0.0,
            },
            upper: Theta {
                a: 10.0,
                v_c1: 15.0,
                v_c2: 15.0,
                w: 0.99,
                t0: if t0_max.is_finite() { t0_max } else { 0.0 },
                eta: 10.0,
            },
        }
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        let (lo, hi, x) = (
            self.lower.to_array(),
            self.upper.to_array(),
            theta.to_array(),
        );
        (0..6).all(|i| lo[i] <= x[i] && x[i] <= hi[i])
    }

    fn unit_coords(&self, theta: &Theta) -> [f64; 6] {
        let (lo, hi, x) = (
            self.lower.to_array(),
            self.upper.to_array(),
            theta.to_array(),
        );
        std::array::from_fn(|i| {
            if hi[i] > lo[i] {
                ((x[i] - lo[i]) / (hi[i] - lo[i])).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
    }

    fn theta_at(&self, u: &[f64]) -> Theta {
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        Theta::from_array(std::array::from_fn(|i| {
            (lo[i] + u[i] * (hi[i] - lo[i])).clamp(lo[i], hi[i])
        }))
    }
}

/// A start vector; `t0` is given as a fraction of its upper bound so that
/// one set of starts suits any dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub a: f64,
    pub v_c1: f64,
    pub v_c2: f64,
    pub w: f64,
    pub t0_fraction: f64,
    pub eta: f64,
}

impl Start {
    fn resolve(&self, bounds: &Bounds) -> Theta {
        let t0 = bounds.lower.t0 + self.t0_fraction * (bounds.upper.t0 - bounds.lower.t0);
        let raw = Theta {
            a: self.a,
            v_c1: self.v_c1,
            v_c2: self.v_c2,
            w: self.w,
            t0,
            eta: self.eta,
        };
        bounds.theta_at(&bounds.unit_coords(&raw))
    }
}

#[derive(Deserialize)]
struct StartFile {
    starts: Vec<Start>,
}

const DEFAULT_STARTS: &str = include_str!("../../config/default_starts.json");

/// The eleven default starts, a fixed Latin-hypercube lattice.
pub fn default_starts() -> Vec<Start> {
    parse_starts(DEFAULT_STARTS).expect("bundled start file parses")
}

/// Parse a start file of the form `{"starts": [{"a": .., "v_c1": .., ...}]}`.
pub fn parse_starts(json: &str) -> serde_json::Result<Vec<Start>> {
    Ok(serde_json::from_str::<StartFile>(json)?.starts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub method: MethodSpec,
    pub opts: EvalOptions,
    pub starts: Vec<Start>,
    /// `None` uses [`Bounds::default_for`] on each dataset.
    pub bounds: Option<Bounds>,
    pub max_obj_evals: usize,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: MethodSpec::default(),
            opts: EvalOptions::default(),
            starts: default_starts(),
            bounds: None,
            max_obj_evals: 20_000,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convergence {
    Success,
    Failure,
}

impl Convergence {
    pub fn is_success(self) -> bool {
        self == Convergence::Success
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub participant: String,
    pub estimates: Theta,
    /// Minimized negative log-likelihood.
    pub objective: f64,
    pub convergence: Convergence,
    pub n_obj_evals: usize,
    pub start_index: usize,
}

/// Negative log-likelihood of `data` under `theta`.
///
/// `+inf` when any row has zero density. The sum is exactly rounded, so the
/// result does not depend on row order.
pub fn nll(
    theta: &Theta,
    data: &Dataset,
    method: MethodSpec,
    opts: &EvalOptions,
) -> Result<f64, DomainError> {
    let p1 = theta.params(StimulusClass::C1);
    let p2 = theta.params(StimulusClass::C2);
    validate(&p1)?;
    validate(&p2)?;
    let mut terms = Vec::with_capacity(data.len());
    for row in &data.rows {
        let p = match row.stimulus_class {
            StimulusClass::C1 => &p1,
            StimulusClass::C2 => &p2,
        };
        let obs = Observation {
            choice: row.choice,
            rt: row.rt,
        };
        let ld = log_density(method, p, &obs, opts)?;
        if ld == f64::NEG_INFINITY || ld.is_nan() {
            return Ok(f64::INFINITY);
        }
        terms.push(-ld);
    }
    Ok(exact_sum(&terms))
}

/// Correctly rounded sum of finite values (Shewchuk's partials).
fn exact_sum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x0 in xs {
        let mut x = x0;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // Round half-way cases using the sign of the next partial.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

fn participant_label(data: &Dataset) -> String {
    let ids = data.participants();
    match ids.as_slice() {
        [one] => one.clone(),
        _ => "all".to_string(),
    }
}

/// Fit `data` as one participant from every start in `cfg`.
///
/// Results are in start order. A start is a success when the minimizer
/// stops at a (numerically) stationary point with a finite objective.
pub fn fit(data: &Dataset, cfg: &FitConfig) -> Vec<FitResult> {
    let bounds = cfg.bounds.unwrap_or_else(|| Bounds::default_for(data));
    let participant = participant_label(data);
    let ocfg = OptimConfig {
        max_iter: cfg.max_iter,
        max_evals: cfg.max_obj_evals,
        ..OptimConfig::default()
    };
    cfg.starts
        .par_iter()
        .enumerate()
        .map(|(start_index, start)| {
            let x0 = bounds.unit_coords(&start.resolve(&bounds));
            let objective = |u: &[f64]| {
                if data.is_empty() {
                    return f64::INFINITY;
                }
                nll(&bounds.theta_at(u), data, cfg.method, &cfg.opts).unwrap_or(f64::INFINITY)
            };
            let m = minimize(objective, x0, &ocfg);
            let success = m.stop.is_success() && m.f.is_finite();
            FitResult {
                participant: participant.clone(),
                estimates: bounds.theta_at(&m.x),
                objective: m.f,
                convergence: if success {
                    Convergence::Success
                } else {
                    Convergence::Failure
                },
                n_obj_evals: m.evals,
                start_index,
            }
        })
        .collect()
}

/// [`fit`] for each participant separately, in first-seen order.
pub fn fit_participants(data: &Dataset, cfg: &FitConfig) -> Vec<FitResult> {
    data.participants()
        .iter()
        .flat_map(|id| fit(&data.participant(id), cfg))
        .collect()
}

/// The lowest-objective success, if any.
pub fn best(results: &[FitResult]) -> Option<&FitResult> {
    results
        .iter()
        .filter(|r| r.convergence.is_success())
        .min_by(|x, y| x.objective.total_cmp(&y.objective))
}
