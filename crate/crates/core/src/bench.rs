//! Timing sweeps over parameter grids.
//!
//! Repetitions are spread over several passes, each visiting the grid points
//! in a fresh shuffled order, so that slow phases of the machine neither line
//! up with the grid nor land on a single point. Within a pass each point times
//! every candidate in a shuffled interleaved order after a warmup, on the
//! calling thread. Records come back in grid order. Records keep exact order statistics of the
//! samples; absolute times are machine dependent, so comparisons should use
//! orderings and ratios.

use std::hint::black_box;
use std::io;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::{density, density_batch, EvalOptions, MethodSpec, Timescale};
use crate::fitting::{fit, Dataset, FitConfig, FitResult};
use crate::params::{DdmParams, Observation};
use crate::sums::SumStyle;

/// Cartesian parameter grid; `t` values are response times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
    pub t0: f64,
}

/// A grid point without its response time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub a: f64,
    pub v: f64,
    pub w: f64,
    pub eta: f64,
    pub t0: f64,
}

impl GridPoint {
    pub fn params(&self) -> DdmParams {
        DdmParams::new(self.v, self.eta, self.a, self.w, self.t0)
    }
}

impl ParamGrid {
    /// Wide grid with response times from 0.001 to 30 s.
    pub fn table1() -> Self {
        ParamGrid {
            t: vec![0.001, 0.1, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 30.0],
            a: vec![0.25, 0.5, 1.0, 2.5, 5.0],
            v: vec![-5.0, -2.0, 0.0, 2.0, 5.0],
            w: vec![0.2, 0.5, 0.8],
            eta: vec![0.0, 0.5, 1.0, 1.5],
            t0: 0.0001,
        }
    }

    /// Realistic grid with response times from 0.1 to 2 s.
    pub fn table2() -> Self {
        ParamGrid {
            t: vec![
                0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6,
                1.7, 1.8, 1.9, 2.0,
            ],
            a: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
            v: vec![-5.0, -2.0, 0.0, 2.0, 5.0],
            w: vec![0.3, 0.4, 0.5, 0.6, 0.7],
            eta: vec![0.0, 1.0, 2.0, 3.5],
            t0: 0.0001,
        }
    }

    pub fn from_json_file(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Every `(a, v, w, eta)` combination, `a` varying slowest.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out =
            Vec::with_capacity(self.a.len() * self.v.len() * self.w.len() * self.eta.len());
        for &a in &self.a {
            for &v in &self.v {
                for &w in &self.w {
                    for &eta in &self.eta {
                        out.push(GridPoint {
                            a,
                            v,
                            w,
                            eta,
                            t0: self.t0,
                        });
                    }
                }
            }
        }
        out
    }

    /// Number of points including the response-time axis.
    pub fn len(&self) -> usize {
        self.t.len() * self.a.len() * self.v.len() * self.w.len() * self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A method and options under a label.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCandidate {
    pub name: String,
    pub method: MethodSpec,
    pub opts: EvalOptions,
}

impl BenchCandidate {
    pub fn new(method: MethodSpec, opts: EvalOptions) -> Self {
        BenchCandidate {
            name: method.name(),
            method,
            opts,
        }
    }

    /// All thirteen methods with the same options.
    pub fn all_methods(opts: EvalOptions) -> Vec<Self> {
        MethodSpec::all()
            .into_iter()
            .map(|m| BenchCandidate::new(m, opts))
            .collect()
    }

    /// The switch threshold, reported for combined SWSE only.
    pub fn delta(&self) -> Option<usize> {
        (self.method.timescale() == Timescale::CombinedSwse).then_some(self.opts.delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub reps: usize,
    pub warmup: usize,
    /// Calls per timed sample; each sample is reported per call.
    pub inner: usize,
    /// Seed for the repetition order.
    pub seed: u64,
    /// Passes over the grid; each pass takes its share of `reps` at every
    /// point, visiting points in a fresh shuffled order.
    pub rounds: usize,
}

impl BenchConfig {
    pub fn vectorized() -> Self {
        BenchConfig {
            reps: 1000,
            warmup: 10,
            inner: 1,
            seed: 1,
            rounds: 1,
        }
    }

    pub fn individual() -> Self {
        BenchConfig {
            reps: 200,
            warmup: 10,
            inner: 8,
            seed: 1,
            rounds: 8,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }
}

/// Order statistics of timing samples, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub min: f64,
    pub max: f64,
}

impl Quantiles {
    /// Median averages the two middle samples for even counts; p10 and p90
    /// are nearest-rank. Panics on an empty slice.
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "no samples");
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        };
        Quantiles {
            median,
            p10: nearest_rank(&s, 0.1),
            p90: nearest_rank(&s, 0.9),
            min: s[0],
            max: s[n - 1],
        }
    }
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// One timed configuration at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub style: Option<SumStyle>,
    pub delta: Option<usize>,
    pub point: GridPoint,
    /// Response time for single-observation sweeps.
    pub t: Option<f64>,
    pub t_hat: Option<f64>,
    pub times_ns: Quantiles,
    pub reps: usize,
    /// Terms summed by one call (over the whole vector for vectorized sweeps).
    pub terms_used: usize,
    pub converged: bool,
}

pub const CSV_HEADER: [&str; 17] = [
    "method",
    "style",
    "delta",
    "t",
    "a",
    "v",
    "w",
    "eta",
    "t_hat",
    "median_ns",
    "p10_ns",
    "p90_ns",
    "min_ns",
    "max_ns",
    "reps",
    "terms_used",
    "converged",
];

fn style_label(style: Option<SumStyle>) -> &'static str {
    match style {
        Some(SumStyle::S14) => "14",
        Some(SumStyle::S17) => "17",
        None => "",
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Write records as CSV with [`CSV_HEADER`].
pub fn write_csv<W: io::Write>(records: &[BenchRecord], out: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        let q = &r.times_ns;
        wr.write_record([
            r.method.clone(),
            style_label(r.style).to_string(),
            r.delta.map(|d| d.to_string()).unwrap_or_default(),
            opt_num(r.t),
            format!("{:?}", r.point.a),
            format!("{:?}", r.point.v),
            format!("{:?}", r.point.w),
            format!("{:?}", r.point.eta),
            opt_num(r.t_hat),
            format!("{:.1}", q.median),
            format!("{:.1}", q.p10),
            format!("{:.1}", q.p90),
            format!("{:.1}", q.min),
            format!("{:.1}", q.max),
            r.reps.to_string(),
            r.terms_used.to_string(),
            r.converged.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Per-candidate aggregate over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub method: String,
    pub style: Option<SumStyle>,
    pub delta: Option<usize>,
    pub records: usize,
    /// Order statistics of the per-record medians.
    pub medians_ns: Quantiles,
    pub mean_median_ns: f64,
    pub non_converged: usize,
}

/// Aggregate records by `(method, delta)`, in first-seen order.
pub fn summarize(records: &[BenchRecord]) -> Vec<CandidateSummary> {
    let mut keys: Vec<(String, Option<usize>)> = Vec::new();
    for r in records {
        let k = (r.method.clone(), r.delta);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, delta)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.method == method && r.delta == delta)
                .collect();
            let medians: Vec<f64> = group.iter().map(|r| r.times_ns.median).collect();
            CandidateSummary {
                style: group[0].style,
                records: group.len(),
                medians_ns: Quantiles::from_samples(&medians),
                mean_median_ns: medians.iter().sum::<f64>() / medians.len() as f64,
                non_converged: group.iter().filter(|r| !r.converged).count(),
                method,
                delta,
            }
        })
        .collect()
}

/// Time `call` for every candidate `cfg.reps` times in a shuffled order.
fn time_interleaved(
    n_candidates: usize,
    cfg: &BenchConfig,
    rng: &mut ChaCha8Rng,
    mut call: impl FnMut(usize),
) -> Vec<Vec<f64>> {
    for c in 0..n_candidates {
        for _ in 0..cfg.warmup {
            call(c);
        }
    }
    let inner = cfg.inner.max(1);
    let mut order: Vec<usize> = (0..n_candidates)
        .flat_map(|c| std::iter::repeat_n(c, cfg.reps))
        .collect();
    order.shuffle(rng);
    let mut samples = vec![Vec::with_capacity(cfg.reps); n_candidates];
    for c in order {
        let start = Instant::now();
        for _ in 0..inner {
            call(c);
        }
        let ns = start.elapsed().as_nanos() as f64 / inner as f64;
        samples[c].push(ns);
    }
    samples
}

/// Timing samples indexed by job, then candidate, collected in
/// `cfg.rounds` shuffled passes over `jobs`.
fn sample_jobs<J>(
    jobs: &[J],
    n_candidates: usize,
    cfg: &BenchConfig,
    rng: &mut ChaCha8Rng,
    mut call: impl FnMut(&J, usize),
) -> Vec<Vec<Vec<f64>>> {
    let rounds = cfg.rounds.clamp(1, cfg.reps.max(1));
    let mut samples = vec![vec![Vec::with_capacity(cfg.reps); n_candidates]; jobs.len()];
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    for round in 0..rounds {
        let reps = cfg.reps / rounds + usize::from(round < cfg.reps % rounds);
        let pass = BenchConfig { reps, ..*cfg };
        order.shuffle(rng);
        for &i in &order {
            let s = time_interleaved(n_candidates, &pass, rng, |c| call(&jobs[i], c));
            for (all, new) in samples[i].iter_mut().zip(s) {
                all.extend(new);
            }
        }
    }
    samples
}

/// One timed call per candidate and grid point, passing all response times at once.
pub fn sweep_vectorized(
    grid: &ParamGrid,
    candidates: &[BenchCandidate],
    cfg: &BenchConfig,
) -> Vec<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let obs: Vec<Observation> = grid.t.iter().map(|&t| Observation::lower(t)).collect();
    let points = grid.points();
    let params: Vec<DdmParams> = points.iter().map(|p| p.params()).collect();
    let samples = sample_jobs(&params, candidates.len(), cfg, &mut rng, |p, c| {
        let cand = &candidates[c];
        black_box(density_batch(cand.method, p, black_box(&obs), &cand.opts).ok());
    });
    let mut out = Vec::new();
    for ((&point, p), per_cand) in points.iter().zip(&params).zip(samples) {
        for (cand, s) in candidates.iter().zip(per_cand) {
            let results = density_batch(cand.method, p, &obs, &cand.opts).unwrap_or_default();
            out.push(BenchRecord {
                method: cand.name.clone(),
                style: cand.method.style(),
                delta: cand.delta(),
                point,
                t: None,
                t_hat: None,
                times_ns: Quantiles::from_samples(&s),
                reps: s.len(),
                terms_used: results.iter().map(|r| r.terms_used).sum(),
                converged: results.len() == obs.len() && results.iter().all(|r| r.converged),
            });
        }
    }
    out
}

/// One timed call per candidate, grid point and single response time.
pub fn sweep_individual(
    grid: &ParamGrid,
    candidates: &[BenchCandidate],
    cfg: &BenchConfig,
) -> Vec<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jobs: Vec<(GridPoint, f64)> = grid
        .points()
        .into_iter()
        .flat_map(|p| grid.t.iter().map(move |&t| (p, t)))
        .collect();
    let inputs: Vec<(DdmParams, Observation)> = jobs
        .iter()
        .map(|&(point, t)| (point.params(), Observation::lower(t)))
        .collect();
    let samples = sample_jobs(&inputs, candidates.len(), cfg, &mut rng, |(p, obs), c| {
        let cand = &candidates[c];
        black_box(density(cand.method, p, black_box(obs), &cand.opts).ok());
    });
    let mut out = Vec::new();
    for ((&(point, t), (p, obs)), per_cand) in jobs.iter().zip(&inputs).zip(samples) {
        for (cand, s) in candidates.iter().zip(per_cand) {
            let r = density(cand.method, p, obs, &cand.opts).ok();
            out.push(BenchRecord {
                method: cand.name.clone(),
                style: cand.method.style(),
                delta: cand.delta(),
                point,
                t: Some(t),
                t_hat: Some((t - point.t0) / (point.a * point.a)),
                times_ns: Quantiles::from_samples(&s),
                reps: s.len(),
                terms_used: r.map_or(0, |r| r.terms_used),
                converged: r.is_some_and(|r| r.converged),
            });
        }
    }
    out
}

/// Combined SWSE for every `(delta, style)` pair, timed with vectorized calls.
pub fn delta_experiment(
    grid: &ParamGrid,
    deltas: &[usize],
    styles: &[SumStyle],
    opts: &EvalOptions,
    cfg: &BenchConfig,
) -> Vec<BenchRecord> {
    let mut candidates = Vec::new();
    for &style in styles {
        for &delta in deltas {
            candidates.push(BenchCandidate::new(
                MethodSpec::with_style(Timescale::CombinedSwse, style),
                EvalOptions { delta, ..*opts },
            ));
        }
    }
    sweep_vectorized(grid, &candidates, cfg)
}

/// Medians of `records` grouped into `t_hat` bins `[edges[i], edges[i+1])`.
///
/// Returns `(geometric bin centre, median of record medians)` for non-empty bins.
pub fn binned_medians(records: &[&BenchRecord], edges: &[f64]) -> Vec<(f64, f64)> {
    edges
        .windows(2)
        .filter_map(|e| {
            let inside: Vec<f64> = records
                .iter()
                .filter(|r| r.t_hat.is_some_and(|t| t >= e[0] && t < e[1]))
                .map(|r| r.times_ns.median)
                .collect();
            (!inside.is_empty()).then(|| {
                (
                    (e[0] * e[1]).sqrt(),
                    Quantiles::from_samples(&inside).median,
                )
            })
        })
        .collect()
}

/// Spearman rank correlation, average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Timing and stability of a full multi-start fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBenchRecord {
    pub dataset: String,
    pub method: String,
    pub times_ns: Quantiles,
    pub reps: usize,
    /// Starts reporting failure, from the first repetition.
    pub failures: usize,
    /// Starts whose objective exceeds the best of this fit by more than [`OBJECTIVE_GAP`].
    pub gap_flags: usize,
    pub best_objective: f64,
    pub results: Vec<FitResult>,
}

/// Log-likelihood difference that flags a start as not reaching the optimum.
pub const OBJECTIVE_GAP: f64 = 1e-4;

/// Time complete fits of each dataset with each method.
pub fn bench_fit(
    datasets: &[(String, Dataset)],
    methods: &[MethodSpec],
    base: &FitConfig,
    reps: usize,
) -> Vec<FitBenchRecord> {
    let mut out = Vec::new();
    for (name, data) in datasets {
        for &method in methods {
            let cfg = FitConfig {
                method,
                ..base.clone()
            };
            let mut samples = Vec::with_capacity(reps);
            let mut first: Option<Vec<FitResult>> = None;
            for _ in 0..reps.max(1) {
                let start = Instant::now();
                let results = fit(data, &cfg);
                samples.push(start.elapsed().as_nanos() as f64);
                first.get_or_insert(results);
            }
            let results = first.expect("at least one repetition");
            let best = results
                .iter()
                .map(|r| r.objective)
                .filter(|o| o.is_finite())
                .fold(f64::INFINITY, f64::min);
            out.push(FitBenchRecord {
                dataset: name.clone(),
                method: method.name(),
                times_ns: Quantiles::from_samples(&samples),
                reps: samples.len(),
                failures: results
                    .iter()
                    .filter(|r| !r.convergence.is_success())
                    .count(),
                gap_flags: results
                    .iter()
                    .filter(|r| !(r.objective - best <= OBJECTIVE_GAP))
                    .count(),
                best_objective: best,
                results,
            });
        }
    }
    out
}
