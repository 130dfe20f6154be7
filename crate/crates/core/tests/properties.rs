use std::f64::consts::PI;

use proptest::prelude::*;

use wfpt::bench::{self, BenchCandidate, BenchConfig, ParamGrid};
use wfpt::fitting::{self, Bounds, Dataset, FitConfig, Row, Theta};
use wfpt::params::{flip_for_boundary, normalize};
use wfpt::sums::{self, j_threshold, SumStyle};
use wfpt::truncation::{
    choose_swse_combined, k_large_nav, k_small_gon, k_small_nav, TimescaleChoice,
};
use wfpt::{
    density, density_batch, log_density, Choice, DdmParams, EvalOptions, MethodSpec, Observation,
    Scale,
};

fn params() -> impl Strategy<Value = DdmParams> {
    (
        -6.0..6.0,
        prop_oneof![Just(0.0), 0.0..3.5],
        0.2..5.0,
        0.01..0.99,
        0.0..0.5,
    )
        .prop_map(|(v, eta, a, w, t0)| DdmParams::new(v, eta, a, w, t0))
}

fn method() -> impl Strategy<Value = MethodSpec> {
    (0..13usize).prop_map(|i| MethodSpec::all()[i])
}

fn choice() -> impl Strategy<Value = Choice> {
    prop_oneof![Just(Choice::Lower), Just(Choice::Upper)]
}

/// Response time after `t0`, spanning both timescales.
fn delay() -> impl Strategy<Value = f64> {
    (-7.0..3.5f64).prop_map(f64::exp)
}

fn ulps_apart(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / (scale * f64::EPSILON)
    }
}

proptest! {
    #[test]
    fn unit_diffusion_rescaling_is_bitwise(p in params(), sigma2 in 0.01..10.0, m in method(), c in choice(), d in delay()) {
        let scaled = p.with_sigma2(sigma2);
        let unit = normalize(&scaled).unwrap();
        let obs = Observation::new(c, p.t0 + d).unwrap();
        let opts = EvalOptions::default();
        let x = density(m, &scaled, &obs, &opts).unwrap();
        let y = density(m, &unit, &obs, &opts).unwrap();
        prop_assert_eq!(x.value.to_bits(), y.value.to_bits());
        prop_assert_eq!(x.terms_used, y.terms_used);
    }

    #[test]
    fn flip_is_an_involution(p in params()) {
        let twice = flip_for_boundary(&flip_for_boundary(&p, Choice::Upper), Choice::Upper);
        prop_assert_eq!(twice, p);
        prop_assert_eq!(flip_for_boundary(&p, Choice::Lower), p);
    }

    #[test]
    fn unbiased_zero_drift_is_symmetric(eta in 0.0..3.0, a in 0.2..5.0, d in delay(), m in method()) {
        let p = DdmParams::new(0.0, eta, a, 0.5, 0.0);
        let opts = EvalOptions::default();
        let lo = density(m, &p, &Observation::lower(d), &opts).unwrap().value;
        let up = density(m, &p, &Observation::upper(d), &opts).unwrap().value;
        prop_assert_eq!(lo.to_bits(), up.to_bits());
    }

    #[test]
    fn upper_density_is_lower_density_of_mirrored_process(p in params(), m in method(), d in delay()) {
        let opts = EvalOptions::default();
        let rt = p.t0 + d;
        let up = density(m, &p, &Observation::upper(rt), &opts).unwrap().value;
        let mirrored = DdmParams::new(-p.v, p.eta, p.a, 1.0 - p.w(), p.t0);
        let lo = density(m, &mirrored, &Observation::lower(rt), &opts).unwrap().value;
        prop_assert_eq!(up.to_bits(), lo.to_bits());
    }

    #[test]
    fn summation_styles_agree(t_hat in (-7.0..3.5f64).prop_map(f64::exp), w in 0.001..0.999, k in 1..80usize) {
        let a = sums::sum_small_s14(t_hat, w, k);
        let b = sums::sum_small_s17(t_hat, w, 2 * (k / 2) + 1);
        prop_assert!(ulps_apart(a, b) <= 8.0, "{} vs {}", a, b);
    }

    #[test]
    fn large_sum_is_cauchy_and_finite(t_hat in (-7.0..3.5f64).prop_map(f64::exp), w in 0.001..0.999, k in 1..60usize) {
        let s_k = sums::sum_large(t_hat, w, k);
        let s_next = sums::sum_large(t_hat, w, k + 1);
        prop_assert!(s_k.is_finite() && s_next.is_finite());
        let j = (k + 1) as f64;
        let bound = j * (-j * j * PI * PI * t_hat / 2.0).exp();
        // The added term itself is computed with a few ulps of error.
        prop_assert!((s_next - s_k).abs() <= bound * (1.0 + 8.0 * f64::EPSILON) + 4.0 * f64::EPSILON * s_k.abs());
    }

    #[test]
    fn small_sums_are_finite(t_hat in (-12.0..6.0f64).prop_map(f64::exp), w in 0.001..0.999, k in 1..200usize) {
        prop_assert!(sums::sum_small_s14(t_hat, w, k).is_finite());
        prop_assert!(sums::sum_small_s17(t_hat, w, k).is_finite());
    }

    #[test]
    fn swse_never_stops_inside_the_guard(t_hat in (-7.0..5.0f64).prop_map(f64::exp), w in 0.001..0.999, ln_eps in -35.0..2.0f64, s14 in any::<bool>()) {
        let style = if s14 { SumStyle::S14 } else { SumStyle::S17 };
        let eps = ln_eps.exp();
        let r = sums::sum_swse(style, t_hat, w, eps, 1_000_000);
        prop_assert!(r.converged);
        prop_assert!(r.terms_used > j_threshold(SumStyle::S17, t_hat, w));
        prop_assert!(r.last_omitted_abs < eps);
    }

    #[test]
    fn term_counts_are_monotone_and_odd(t_hat in (-9.0..4.0f64).prop_map(f64::exp), w in 0.001..0.999, e1 in -30.0..0.0f64, e2 in -30.0..0.0f64) {
        let (tight, loose) = if e1 < e2 { (e1.exp(), e2.exp()) } else { (e2.exp(), e1.exp()) };
        prop_assert!(k_large_nav(t_hat, tight) >= k_large_nav(t_hat, loose));
        prop_assert!(k_small_nav(t_hat, tight) >= k_small_nav(t_hat, loose));
        prop_assert!(k_small_gon(t_hat, w, tight) >= k_small_gon(t_hat, w, loose));
        prop_assert_eq!(k_small_gon(t_hat, w, tight) % 2, 1);
        prop_assert!(k_large_nav(t_hat, loose) >= 1 && k_small_nav(t_hat, loose) >= 1);
    }

    #[test]
    fn default_switch_takes_large_time_only_for_one_term(t_hat in (-9.0..4.0f64).prop_map(f64::exp), ln_eps in -30.0..0.0f64) {
        let eps = ln_eps.exp();
        let k = k_large_nav(t_hat, eps);
        match choose_swse_combined(t_hat, eps, 1) {
            TimescaleChoice::LargeTime(n) => prop_assert!(n == k && k <= 1),
            TimescaleChoice::SmallTimeAdaptive => prop_assert!(k > 1),
            TimescaleChoice::SmallTimeFixed(_) => prop_assert!(false, "fixed count from the adaptive rule"),
        }
        prop_assert_eq!(choose_swse_combined(t_hat, eps, 0), TimescaleChoice::SmallTimeAdaptive);
    }

    #[test]
    fn densities_are_non_negative_and_log_consistent(p in params(), m in method(), c in choice(), rt in 0.0001..20.0f64) {
        let opts = EvalOptions::default();
        let obs = Observation::new(c, rt).unwrap();
        let r = density(m, &p, &obs, &opts).unwrap();
        prop_assert!(r.value >= 0.0 && r.value.is_finite());
        let ld = log_density(m, &p, &obs, &opts).unwrap();
        let via_scale = density(m, &p, &obs, &EvalOptions { scale: Scale::Log, ..opts }).unwrap().value;
        prop_assert_eq!(ld.to_bits(), via_scale.to_bits());
        if rt <= p.t0 {
            prop_assert_eq!(r.value, 0.0);
            prop_assert_eq!(r.terms_used, 0);
        } else if r.value > 1e-300 {
            prop_assert!(ulps_apart(ld.exp(), r.value) <= 2.0 + 2.0 * ld.abs());
        }
    }

    #[test]
    fn batches_match_single_evaluations(p in params(), m in method(), rts in prop::collection::vec((choice(), 0.0001..20.0f64), 0..30)) {
        let opts = EvalOptions::default();
        let obs: Vec<Observation> = rts.iter().map(|&(c, rt)| Observation::new(c, rt).unwrap()).collect();
        let batch = density_batch(m, &p, &obs, &opts).unwrap();
        prop_assert_eq!(batch.len(), obs.len());
        for (o, b) in obs.iter().zip(&batch) {
            let single = density(m, &p, o, &opts).unwrap();
            prop_assert_eq!(single.value.to_bits(), b.value.to_bits());
            prop_assert_eq!(single.terms_used, b.terms_used);
        }
    }
}

fn small_dataset(seed: u64, n: usize) -> Dataset {
    let theta = Theta {
        a: 1.2,
        v_c1: 1.5,
        v_c2: -0.5,
        w: 0.45,
        t0: 0.25,
        eta: 0.3,
    };
    fitting::simulate(&theta, n, seed, 1e-3, "p")
        .unwrap()
        .dataset
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn likelihood_ignores_row_order(seed in 0..1000u64, shuffle_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let data = small_dataset(seed, 40);
        let mut rows: Vec<Row> = data.rows.clone();
        rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        let theta = Theta { a: 1.0, v_c1: 1.0, v_c2: -1.0, w: 0.5, t0: 0.1, eta: 0.5 };
        let m = MethodSpec::default();
        let opts = EvalOptions::default();
        let x = fitting::nll(&theta, &data, m, &opts).unwrap();
        let y = fitting::nll(&theta, &Dataset::new(rows), m, &opts).unwrap();
        prop_assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn vectorized_bench_reports_plain_terms(a in 0.3..3.0, v in -3.0..3.0, w in 0.1..0.9, eta in 0.0..2.0) {
        let grid = ParamGrid { t: vec![0.05, 0.4, 2.0, 9.0], a: vec![a], v: vec![v], w: vec![w], eta: vec![eta], t0: 0.01 };
        let opts = EvalOptions::default();
        let candidates: Vec<BenchCandidate> = MethodSpec::all().into_iter().map(|m| BenchCandidate::new(m, opts)).collect();
        let cfg = BenchConfig { reps: 2, warmup: 0, inner: 1, seed: 3, rounds: 1 };
        let records = bench::sweep_vectorized(&grid, &candidates, &cfg);
        prop_assert_eq!(records.len(), candidates.len());
        let p = DdmParams::new(v, eta, a, w, 0.01);
        for (r, c) in records.iter().zip(&candidates) {
            let plain: usize = grid.t.iter()
                .map(|&t| density(c.method, &p, &Observation::lower(t), &opts).unwrap().terms_used)
                .sum();
            prop_assert_eq!(r.terms_used, plain);
            prop_assert!(r.converged);
            prop_assert_eq!(r.reps, 2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn fit_estimates_stay_in_bounds(seed in 0..1000u64) {
        let data = small_dataset(seed, 60);
        let bounds = Bounds::default_for(&data);
        let cfg = FitConfig { starts: fitting::default_starts()[..3].to_vec(), ..FitConfig::default() };
        for r in fitting::fit(&data, &cfg) {
            let (e, lo, hi) = (r.estimates, bounds.lower, bounds.upper);
            for (x, l, h) in [(e.a, lo.a, hi.a), (e.v_c1, lo.v_c1, hi.v_c1), (e.v_c2, lo.v_c2, hi.v_c2), (e.w, lo.w, hi.w), (e.t0, lo.t0, hi.t0), (e.eta, lo.eta, hi.eta)] {
                prop_assert!(l <= x && x <= h, "{} outside [{}, {}]", x, l, h);
            }
            if r.convergence.is_success() {
                prop_assert!(r.objective.is_finite());
            }
            prop_assert!(e.t0 < data.rows.iter().map(|r| r.rt).fold(f64::INFINITY, f64::min));
        }
    }
}
