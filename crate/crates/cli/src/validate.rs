//! `validate`: every method against the oracle over a grid, plus unit mass.

use std::io::Write;

use wfpt::bench::GridPoint;
use wfpt::oracle::{self, OracleConfig};
use wfpt::{density, EvalOptions, MethodSpec, Observation, Scale};

use crate::{load_grid, num, open_output, CliError, ValidateArgs};

struct Failure {
    kind: &'static str,
    method: String,
    point: GridPoint,
    t: Option<f64>,
    value: f64,
    reference: f64,
}

pub(crate) fn run(args: &ValidateArgs) -> Result<(), CliError> {
    let grid = load_grid(&args.grid)?;
    if !(args.eps.is_finite() && args.eps > 0.0) {
        return Err(CliError::Input(format!(
            "--eps must be finite and > 0, got {}",
            args.eps
        )));
    }
    let opts = EvalOptions {
        eps: args.eps,
        delta: args.delta,
        scale: Scale::Linear,
        ..EvalOptions::default()
    };
    let methods = if args.method.is_empty() {
        MethodSpec::all()
    } else {
        args.method.clone()
    };
    let ocfg = OracleConfig::default();
    let points = grid.points();
    let mut failures = Vec::new();
    let mut max_err = vec![0.0_f64; methods.len()];
    let mut checked = 0usize;

    for point in &points {
        let params = point.params();
        for &t in grid.t.iter().filter(|&&t| t > point.t0) {
            let obs = Observation::lower(t);
            let reference = match oracle::reference_density(&params, &obs, &ocfg) {
                Ok(r) => r,
                Err(e) => {
                    let (value, reference) = match e {
                        oracle::OracleError::Disagreement { large, small, .. } => (large, small),
                        other => return Err(CliError::Input(other.to_string())),
                    };
                    failures.push(Failure {
                        kind: "oracle",
                        method: String::new(),
                        point: *point,
                        t: Some(t),
                        value,
                        reference,
                    });
                    continue;
                }
            };
            checked += 1;
            for (m, &method) in methods.iter().enumerate() {
                let value = density(method, &params, &obs, &opts)
                    .map_err(|e| CliError::Input(e.to_string()))?
                    .value;
                let err = (value - reference).abs();
                max_err[m] = max_err[m].max(err);
                if !(err < args.eps) {
                    failures.push(Failure {
                        kind: "density",
                        method: method.name(),
                        point: *point,
                        t: Some(t),
                        value,
                        reference,
                    });
                }
            }
        }
    }

    let candidates: Vec<&GridPoint> = points.iter().filter(|p| p.a <= 2.5).collect();
    let n_sets = args.normalization_sets.min(candidates.len());
    let mut worst_mass_gap = 0.0_f64;
    for i in 0..n_sets {
        let point = candidates[i * candidates.len() / n_sets];
        // An oracle error counts as a failed set.
        let mass = oracle::check_normalization(&point.params(), &ocfg).unwrap_or(f64::NAN);
        worst_mass_gap = worst_mass_gap.max((mass - 1.0).abs());
        if !((mass - 1.0).abs() <= args.normalization_tol) {
            failures.push(Failure {
                kind: "normalization",
                method: String::new(),
                point: *point,
                t: None,
                value: mass,
                reference: 1.0,
            });
        }
    }

    eprintln!(
        "checked {checked} points against the oracle at eps = {:e}",
        args.eps
    );
    for (m, method) in methods.iter().enumerate() {
        let n = failures
            .iter()
            .filter(|f| f.method == method.name())
            .count();
        eprintln!(
            "  {:<18} max error {:.3e}  failures {n}",
            method.name(),
            max_err[m]
        );
    }
    eprintln!("normalization: {n_sets} sets, largest |mass - 1| = {worst_mass_gap:.3e}");

    if let Some(path) = &args.output {
        let mut wr = csv::Writer::from_writer(open_output(Some(path))?);
        wr.write_record([
            "kind",
            "method",
            "a",
            "v",
            "w",
            "eta",
            "t",
            "value",
            "reference",
        ])?;
        for f in &failures {
            wr.write_record([
                f.kind.to_string(),
                f.method.clone(),
                format!("{:?}", f.point.a),
                format!("{:?}", f.point.v),
                format!("{:?}", f.point.w),
                format!("{:?}", f.point.eta),
                f.t.map(|t| format!("{t:?}")).unwrap_or_default(),
                num(f.value),
                num(f.reference),
            ])?;
        }
        wr.flush()?;
        let mut inner = wr.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        inner.flush()?;
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} failures", failures.len())))
    }
}
