//! `wfpt`: evaluate, fit, simulate, benchmark and validate from the command line.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 when `validate` finds a
//! disagreement.

// `!(x < tol)` also catches NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wfpt::bench::{self, BenchCandidate, BenchConfig, ParamGrid};
use wfpt::fitting::{self, Dataset, FitConfig, Theta};
use wfpt::{density, Choice, DdmParams, EvalOptions, MethodSpec, Observation, Scale, SumStyle};

mod validate;

#[derive(Debug, Parser)]
#[command(
    name = "wfpt",
    version,
    about = "Diffusion decision model first-passage-time densities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate densities for inline or CSV observations.
    Eval(EvalArgs),
    /// Fit the six-parameter model to a dataset by maximum likelihood.
    Fit(FitArgs),
    /// Simulate a dataset with two stimulus classes.
    Simulate(SimulateArgs),
    /// Time the methods over a parameter grid.
    Bench(BenchArgs),
    /// Check every method against the reference oracle and check normalization.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
struct MethodArgs {
    /// One of the thirteen method names, e.g. combined-swse-17.
    #[arg(long, default_value = "combined-swse-17", value_parser = parse_method)]
    method: MethodSpec,
    /// Absolute error tolerance on the density.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Largest large-time term count the combined SWSE method accepts.
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Cap on the number of summed terms.
    #[arg(long, default_value_t = wfpt::density::DEFAULT_MAX_TERMS)]
    max_terms: usize,
}

impl MethodArgs {
    fn options(&self, scale: Scale) -> Result<EvalOptions, CliError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(CliError::Input(format!(
                "--eps must be finite and > 0, got {}",
                self.eps
            )));
        }
        Ok(EvalOptions {
            eps: self.eps,
            delta: self.delta,
            max_terms: self.max_terms,
            scale,
        })
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct EvalArgs {
    #[command(flatten)]
    method: MethodArgs,
    /// Evaluate on the log scale; `density` is then the exponential of `log_density`.
    #[arg(long)]
    log: bool,
    #[arg(long)]
    v: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long)]
    a: f64,
    /// Relative start point in (0, 1).
    #[arg(long, conflicts_with = "z", required_unless_present = "z")]
    w: Option<f64>,
    /// Absolute start point in (0, a); converted to w = z / a.
    #[arg(long)]
    z: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Response time of a single inline observation.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    rt: Option<f64>,
    /// Boundary of the inline observation.
    #[arg(long, default_value = "lower", value_parser = parse_choice)]
    choice: Choice,
    /// CSV with `choice` and `rt` columns; other columns are ignored.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    #[command(flatten)]
    method: MethodArgs,
    /// Dataset CSV with header `participant,stimulus_class,choice,rt`.
    #[arg(long)]
    input: PathBuf,
    /// JSON start file `{"starts": [...]}`; the built-in eleven starts when absent.
    #[arg(long)]
    starts: Option<PathBuf>,
    /// Cap on objective evaluations per start.
    #[arg(long, default_value_t = 20_000)]
    max_obj_evals: usize,
    /// JSON output with one record per participant and start; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[arg(long)]
    a: f64,
    /// Drift rate for stimulus class c1.
    #[arg(long = "v-c1")]
    v_c1: f64,
    /// Drift rate for stimulus class c2.
    #[arg(long = "v-c2")]
    v_c2: f64,
    #[arg(long, conflicts_with = "z", required_unless_present = "z")]
    w: Option<f64>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    t0: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Trials per stimulus class.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Euler step in seconds.
    #[arg(long, default_value_t = fitting::DEFAULT_DT)]
    dt: f64,
    #[arg(long, default_value = "p1")]
    participant: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    /// One timed call per grid point with all response times at once.
    Vectorized,
    /// One timed call per grid point and response time.
    Individual,
    /// Combined SWSE for delta 0 to 7 in both summation styles.
    Delta,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct BenchArgs {
    /// `table1`, `table2` or a JSON grid file.
    #[arg(long, default_value = "table2")]
    grid: String,
    #[arg(long, value_enum, default_value_t = BenchMode::Vectorized)]
    mode: BenchMode,
    /// Timed repetitions per candidate and point.
    #[arg(long)]
    reps: Option<usize>,
    /// Restrict to these methods (repeatable); all thirteen when absent.
    #[arg(long, value_parser = parse_method)]
    method: Vec<MethodSpec>,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    delta: usize,
    #[arg(long, default_value_t = wfpt::density::DEFAULT_MAX_TERMS)]
    max_terms: usize,
    /// Seed for the repetition order.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-method JSON summary.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct ValidateArgs {
    /// `table1`, `table2` or a JSON grid file.
    #[arg(long, default_value = "table2")]
    grid: String,
    /// Restrict to these methods (repeatable); all thirteen when absent.
    #[arg(long, value_parser = parse_method)]
    method: Vec<MethodSpec>,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Parameter sets checked for unit mass, spread over the grid points with a <= 2.5.
    #[arg(long, default_value_t = 12)]
    normalization_sets: usize,
    /// Allowed deviation of the total mass from 1.
    #[arg(long, default_value_t = 1e-4)]
    normalization_tol: f64,
    /// Report of every failure as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Validation(String),
    Io(io::Error),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn parse_method(s: &str) -> Result<MethodSpec, String> {
    s.parse()
        .map_err(|e: wfpt::density::UnknownMethod| e.to_string())
}

fn parse_choice(s: &str) -> Result<Choice, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => cmd_eval(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Validate(args) => validate::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            CliError::Input(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))
}

fn load_grid(which: &str) -> Result<ParamGrid, CliError> {
    match which {
        "table1" => Ok(ParamGrid::table1()),
        "table2" => Ok(ParamGrid::table2()),
        path => ParamGrid::from_json_file(Path::new(path))
            .map_err(|e| CliError::Input(format!("grid {path}: {e}"))),
    }
}

fn start_point(w: Option<f64>, z: Option<f64>, a: f64) -> f64 {
    match (w, z) {
        (Some(w), _) => w,
        (None, Some(z)) => z / a,
        (None, None) => unreachable!("clap requires --w or --z"),
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_observations<R: Read>(input: R) -> Result<Vec<Observation>, CliError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rd.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("input has no `{name}` column")))
    };
    let (ci, ri) = (col("choice")?, col("rt")?);
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let choice: Choice = rec[ci]
            .parse()
            .map_err(|e| CliError::Input(format!("row {row}: choice: {e}")))?;
        let rt: f64 = rec[ri]
            .parse()
            .map_err(|_| CliError::Input(format!("row {row}: rt: cannot parse `{}`", &rec[ri])))?;
        let obs =
            Observation::new(choice, rt).map_err(|e| CliError::Input(format!("row {row}: {e}")))?;
        out.push(obs);
    }
    Ok(out)
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let scale = if args.log { Scale::Log } else { Scale::Linear };
    let opts = args.method.options(scale)?;
    let w = start_point(args.w, args.z, args.a);
    let params = DdmParams::new(args.v, args.eta, args.a, w, args.t0).with_sigma2(args.sigma2);
    wfpt::params::validate(&params).map_err(|e| CliError::Input(e.to_string()))?;
    let observations = match (&args.input, args.rt) {
        (Some(path), _) => read_observations(open_input(path)?)?,
        (None, Some(rt)) => vec![Observation::new(args.choice, rt)
            .map_err(|e| CliError::Input(format!("row 1: {e}")))?],
        (None, None) => unreachable!("clap requires --rt or --input"),
    };
    let method = args.method.method;
    let mut wr = csv::Writer::from_writer(open_output(args.output.as_deref())?);
    wr.write_record([
        "choice",
        "rt",
        "density",
        "log_density",
        "terms_used",
        "timescale_used",
        "converged",
    ])?;
    for (i, obs) in observations.iter().enumerate() {
        let row_err = |e: wfpt::DomainError| CliError::Input(format!("row {}: {e}", i + 1));
        let r = density(method, &params, obs, &opts).map_err(row_err)?;
        let (dens, log_dens) = if args.log {
            (r.value.exp(), r.value)
        } else {
            (r.value, r.value.ln())
        };
        wr.write_record([
            obs.choice.to_string(),
            format!("{:?}", obs.rt),
            num(dens),
            num(log_dens),
            r.terms_used.to_string(),
            r.timescale_used.to_string(),
            r.converged.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let opts = args.method.options(Scale::Linear)?;
    let data = Dataset::read_csv(open_input(&args.input)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.input.display())))?;
    if data.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no rows",
            args.input.display()
        )));
    }
    let starts = match &args.starts {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
            fitting::parse_starts(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => fitting::default_starts(),
    };
    let cfg = FitConfig {
        method: args.method.method,
        opts,
        starts,
        max_obj_evals: args.max_obj_evals,
        ..FitConfig::default()
    };
    let results = fitting::fit_participants(&data, &cfg);
    let mut out = open_output(args.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &results).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let theta = Theta {
        a: args.a,
        v_c1: args.v_c1,
        v_c2: args.v_c2,
        w: start_point(args.w, args.z, args.a),
        t0: args.t0,
        eta: args.eta,
    };
    let sim = fitting::simulate(&theta, args.n, args.seed, args.dt, &args.participant)
        .map_err(|e| CliError::Input(e.to_string()))?;
    if sim.timeouts > 0 {
        eprintln!(
            "note: {} trials exceeded {} s and were redrawn",
            sim.timeouts,
            fitting::TRIAL_TIMEOUT
        );
    }
    let out = open_output(args.output.as_deref())?;
    sim.dataset
        .write_csv(out)
        .map_err(|e| CliError::Io(io::Error::other(e)))?;
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let grid = load_grid(&args.grid)?;
    let opts = MethodArgs {
        method: MethodSpec::default(),
        eps: args.eps,
        delta: args.delta,
        max_terms: args.max_terms,
    }
    .options(Scale::Linear)?;
    let base = match args.mode {
        BenchMode::Individual => BenchConfig::individual(),
        _ => BenchConfig::vectorized(),
    };
    let cfg = BenchConfig {
        reps: args.reps.unwrap_or(base.reps).max(1),
        seed: args.seed,
        ..base
    };
    let candidates: Vec<BenchCandidate> = if args.method.is_empty() {
        BenchCandidate::all_methods(opts)
    } else {
        args.method
            .iter()
            .map(|&m| BenchCandidate::new(m, opts))
            .collect()
    };
    let records = match args.mode {
        BenchMode::Vectorized => bench::sweep_vectorized(&grid, &candidates, &cfg),
        BenchMode::Individual => bench::sweep_individual(&grid, &candidates, &cfg),
        BenchMode::Delta => bench::delta_experiment(
            &grid,
            &(0..=7).collect::<Vec<_>>(),
            &[SumStyle::S14, SumStyle::S17],
            &opts,
            &cfg,
        ),
    };
    bench::write_csv(&records, open_output(args.output.as_deref())?)?;
    if let Some(path) = &args.summary {
        let mut out = open_output(Some(path))?;
        serde_json::to_writer_pretty(&mut out, &bench::summarize(&records))
            .map_err(io::Error::from)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}
