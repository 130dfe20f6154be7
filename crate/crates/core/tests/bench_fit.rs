use wfpt::bench::{self, FitBenchRecord};
use wfpt::fitting::{self, Dataset, FitConfig, Theta};
use wfpt::{MethodSpec, Timescale};

/// Thirty-seven simulated participants with parameters spread over a
/// realistic range.
fn suite() -> Vec<(String, Dataset)> {
    (0..37u64)
        .map(|i| {
            let f = i as f64 / 36.0;
            let theta = Theta {
                a: 0.8 + 1.2 * f,
                v_c1: 0.5 + 2.0 * ((i * 7 % 37) as f64 / 36.0),
                v_c2: -0.5 - 2.0 * ((i * 11 % 37) as f64 / 36.0),
                w: 0.4 + 0.2 * ((i * 5 % 37) as f64 / 36.0),
                t0: 0.2 + 0.2 * ((i * 3 % 37) as f64 / 36.0),
                eta: 1.5 * ((i * 13 % 37) as f64 / 36.0),
            };
            let name = format!("p{i:02}");
            let data = fitting::simulate(&theta, 150, 100 + i, 1e-3, &name)
                .unwrap()
                .dataset;
            (name, data)
        })
        .collect()
}

fn totals(records: &[FitBenchRecord], method: &MethodSpec) -> (usize, usize) {
    records
        .iter()
        .filter(|r| r.method == method.name())
        .fold((0, 0), |(f, g), r| (f + r.failures, g + r.gap_flags))
}

#[test]
fn default_method_is_stable_across_a_participant_suite() {
    let large = MethodSpec::new(Timescale::Large, None).unwrap();
    let methods = [MethodSpec::default(), large];
    let records = bench::bench_fit(&suite(), &methods, &FitConfig::default(), 1);
    assert_eq!(records.len(), 2 * 37);
    for r in &records {
        assert_eq!(r.reps, 1);
        assert_eq!(r.times_ns.median, r.times_ns.min);
    }
    let (def_failures, def_gaps) = totals(&records, &methods[0]);
    let (large_failures, _) = totals(&records, &large);
    assert_eq!(def_gaps, 0);
    assert!(
        large_failures > def_failures,
        "{large_failures} vs {def_failures}"
    );
}
