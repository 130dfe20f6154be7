use wfpt::fitting::{self, Dataset, FitConfig, Row, StimulusClass, Theta};
use wfpt::{Choice, EvalOptions, MethodSpec};

const THETA: Theta = Theta {
    a: 1.4,
    v_c1: 0.8,
    v_c2: -1.2,
    w: 0.55,
    t0: 0.25,
    eta: 0.6,
};

fn simulated(seed: u64) -> Dataset {
    fitting::simulate(&THETA, 500, seed, fitting::DEFAULT_DT, "p")
        .unwrap()
        .dataset
}

#[test]
fn tighter_tolerance_barely_moves_the_best_objective() {
    let data = simulated(21);
    let loose = FitConfig::default();
    let tight = FitConfig {
        opts: EvalOptions {
            eps: 1e-8,
            ..EvalOptions::default()
        },
        ..FitConfig::default()
    };
    let a = fitting::best(&fitting::fit(&data, &loose))
        .unwrap()
        .objective;
    let b = fitting::best(&fitting::fit(&data, &tight))
        .unwrap()
        .objective;
    assert!((a - b).abs() < 1e-2, "{a} vs {b}");
}

#[test]
fn default_method_converges_from_every_start() {
    for seed in [22, 23] {
        let results = fitting::fit(&simulated(seed), &FitConfig::default());
        assert_eq!(results.len(), 11);
        assert!(
            results.iter().all(|r| r.convergence.is_success()),
            "{results:#?}"
        );
    }
}

#[test]
fn identical_starts_give_identical_results() {
    let data = simulated(24);
    let start = fitting::default_starts()[4];
    let cfg = FitConfig {
        starts: vec![start, start],
        ..FitConfig::default()
    };
    let r = fitting::fit(&data, &cfg);
    assert_eq!(r[0].estimates, r[1].estimates);
    assert_eq!(r[0].objective.to_bits(), r[1].objective.to_bits());
    assert_eq!(r[0].n_obj_evals, r[1].n_obj_evals);
}

#[test]
fn duplicated_rows_double_the_likelihood_exactly() {
    let data = simulated(25);
    let mut rows = data.rows.clone();
    rows.extend(data.rows.iter().cloned());
    let m = MethodSpec::default();
    let opts = EvalOptions::default();
    let once = fitting::nll(&THETA, &data, m, &opts).unwrap();
    let twice = fitting::nll(&THETA, &Dataset::new(rows), m, &opts).unwrap();
    assert_eq!(twice, 2.0 * once);
}

#[test]
fn tiny_datasets_do_not_crash() {
    let rows = vec![
        Row {
            participant: "p".into(),
            stimulus_class: StimulusClass::C1,
            choice: Choice::Upper,
            rt: 0.61,
        },
        Row {
            participant: "p".into(),
            stimulus_class: StimulusClass::C2,
            choice: Choice::Lower,
            rt: 0.48,
        },
    ];
    for data in [Dataset::new(rows[..1].to_vec()), Dataset::new(rows)] {
        let min_rt = data.rows.iter().map(|r| r.rt).fold(f64::INFINITY, f64::min);
        let results = fitting::fit(&data, &FitConfig::default());
        assert_eq!(results.len(), 11);
        for r in results {
            assert!(!r.objective.is_nan());
            assert!(r.estimates.t0 < min_rt);
        }
    }
}

#[test]
fn participants_are_fitted_separately() {
    let mut rows = fitting::simulate(&THETA, 100, 26, 1e-3, "x")
        .unwrap()
        .dataset
        .rows;
    rows.extend(
        fitting::simulate(&THETA, 100, 27, 1e-3, "y")
            .unwrap()
            .dataset
            .rows,
    );
    let cfg = FitConfig {
        starts: fitting::default_starts()[..2].to_vec(),
        ..FitConfig::default()
    };
    let results = fitting::fit_participants(&Dataset::new(rows), &cfg);
    let ids: Vec<&str> = results.iter().map(|r| r.participant.as_str()).collect();
    assert_eq!(ids, ["x", "x", "y", "y"]);
}
