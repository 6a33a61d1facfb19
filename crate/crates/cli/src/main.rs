//! `aircomp`: solve single scenarios, run benchmark sweeps, generate
//! scenario files and run the verification suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 numerical failure.

use std::fmt::{self, Write as _};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aircomp::harness::{self, figure_sweep, run_sweep, Scheme, SweepSpec, SweptVariable};
use aircomp::mse::{analytic_mse, MseBreakdown, TransceiverDesign};
use aircomp::rng::{derive_seed, seeded};
use aircomp::scenario::{PerDevice, Scenario, ScenarioError, DEFAULT_CHANNEL_VAR_RANGE};
use aircomp::simo::{solve_simo_with, SimoSettings, HARNESS_STARTS};
use aircomp::siso::solve_siso;
use aircomp::verify::{self, VerifyLevel};
use aircomp::{model, SystemConfig64};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

/// Stream for the channel draw of `single`.
const SINGLE_STREAM: u64 = 0x5161;

#[derive(Parser)]
#[command(name = "aircomp", version, about = "AirComp transceiver design under imperfect CSI")]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true, env = "AIRCOMP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realisation and print the design.
    Single(SingleArgs),
    /// Monte Carlo sweep of one parameter, written as CSV.
    Sweep(SweepArgs),
    /// Run the self-verification suite.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Quick)]
        level: Level,
    },
    /// Write a scenario file with drawn channel variances.
    Scenario(ScenarioArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Quick,
    Full,
}

/// Per-run replacements for scenario fields; values are linear.
#[derive(Args)]
struct Overrides {
    /// Receive antennas.
    #[arg(long)]
    nr: Option<usize>,
    /// Common power budget (linear).
    #[arg(long)]
    power: Option<f64>,
    /// Common estimation-error variance.
    #[arg(long)]
    est_error_var: Option<f64>,
    /// Receiver noise variance.
    #[arg(long)]
    noise_var: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        if let Some(n) = self.nr {
            s.num_rx_antennas = n;
        }
        if let Some(p) = self.power {
            s.power_budget = PerDevice::Scalar(p);
        }
        if let Some(v) = self.est_error_var {
            s.est_error_var = PerDevice::Scalar(v);
        }
        if let Some(v) = self.noise_var {
            s.noise_var = v;
        }
        if let Some(seed) = self.seed {
            s.master_seed = seed;
        }
    }
}

#[derive(Args)]
struct SingleArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Initialisations for the multi-antenna solver.
    #[arg(long, default_value_t = HARNESS_STARTS)]
    starts: usize,
    /// Also write configuration, channels and design as JSON.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario JSON file giving the base configuration.
    #[arg(required_unless_present = "figure", conflicts_with = "figure")]
    scenario: Option<PathBuf>,
    /// Use the preset of benchmark figure 1–5 instead of a scenario file.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    figure: Option<u8>,
    /// Swept quantity: power_db, est_error_var or num_rx_antennas (alias nr).
    #[arg(long, required_unless_present = "figure")]
    var: Option<SweptVariable>,
    /// Comma-separated, strictly increasing grid. Power values are in dB
    /// (P = 10^(dB/10)); all other quantities are linear.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required_unless_present = "figure"
    )]
    grid: Option<Vec<f64>>,
    /// Channel draws per grid point.
    #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
    trials: usize,
    /// Comma-separated subset of proposed, ignore_csi, full_power,
    /// channel_inversion.
    #[arg(long, value_delimiter = ',', default_values_t = Scheme::ALL.to_vec())]
    schemes: Vec<Scheme>,
    /// Master seed (default: the scenario's `master_seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Initialisations per multi-antenna solve.
    #[arg(long, default_value_t = HARNESS_STARTS)]
    starts: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Also write whitespace-separated blocks, one per scheme, for plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 20)]
    num_wds: usize,
    #[arg(long, default_value_t = 1)]
    nr: usize,
    /// Common power budget in dB.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    power_db: f64,
    #[arg(long, default_value_t = 0.1)]
    est_error_var: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    /// Interval `min,max` for the per-device channel variances.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CHANNEL_VAR_RANGE.to_vec())]
    channel_var_range: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Verification(String),
    Config(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Verification(_) => 1,
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Self::Config(e.to_string())
    }
}

fn numeric(e: impl std::fmt::Display) -> Failure {
    Failure::Numeric(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Single(args) => single(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify { level } => run_verify(level),
        Command::Scenario(args) => scenario(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Verification(msg) | Failure::Config(msg) | Failure::Numeric(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::Config(format!("scenario `{}`: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, so `path` is
/// either left untouched or fully written.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: io::Error| Failure::Config(format!("cannot write `{}`: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(fail)?;
        w.flush().map_err(fail)?;
    }
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn single(args: SingleArgs) -> Result<(), Failure> {
    let mut sc = load_scenario(&args.scenario)?;
    args.overrides.apply(&mut sc);
    let config = sc.resolve()?;
    let channels = match sc.pinned_channels(&config)? {
        Some(h) => h,
        None => {
            let mut rng = seeded(derive_seed(sc.master_seed, &[SINGLE_STREAM]));
            model::generate_channel_instance(&config, &mut rng)
                .map_err(numeric)?
                .est_channel
        }
    };
    if args.starts == 0 {
        return Err(Failure::Config("starts must be at least 1".into()));
    }

    let (design, solver_line) = if config.num_rx_antennas == 1 {
        let sol = solve_siso(&channels, &config).map_err(numeric)?;
        let line = format!("solver: closed form, full-power devices k* = {}", sol.threshold_index);
        (sol.design(), line)
    } else {
        let settings = SimoSettings::multistart(args.starts, derive_seed(sc.master_seed, &[SINGLE_STREAM, 1]));
        let trace = solve_simo_with(&channels, &config, &settings).map_err(numeric)?;
        let line = format!(
            "solver: alternating optimisation, best of {} starts, iterations = {}, converged = {}",
            args.starts, trace.iterations, trace.converged
        );
        (trace.final_design, line)
    };
    let mse = analytic_mse(&design, &channels, &config).map_err(numeric)?;

    print_report(&render_single(&config, &solver_line, &design, &mse).expect("formatting into a String"));

    if let Some(path) = &args.dump {
        let doc = json!({
            "scenario": Scenario::from_config(&config, sc.master_seed),
            "est_channel": channels.iter().map(|h| h.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "design": design,
            "mse": mse,
        });
        write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)
        })?;
    }
    Ok(())
}

fn render_single(
    config: &SystemConfig64,
    solver_line: &str,
    design: &TransceiverDesign<f64>,
    mse: &MseBreakdown<f64>,
) -> Result<String, fmt::Error> {
    let mut report = String::new();
    writeln!(
        report,
        "devices K = {}, receive antennas N_r = {}, noise variance = {}",
        config.num_wds, config.num_rx_antennas, config.noise_var
    )?;
    writeln!(report, "{solver_line}")?;
    writeln!(report, "receive beamformer w:")?;
    for (i, w) in design.rx_beamformer.iter().enumerate() {
        writeln!(
            report,
            "  w[{i}] = {:.10} {:+.10}i   |w| = {:.10}",
            w.re,
            w.im,
            w.norm()
        )?;
    }
    writeln!(report, "transmit coefficients:")?;
    writeln!(
        report,
        "  {:>4}  {:>14}  {:>12}  {:>10}",
        "wd", "|b|", "phase (rad)", "|b|²/P"
    )?;
    for (k, b) in design.tx_coeff.iter().enumerate() {
        writeln!(
            report,
            "  {k:>4}  {:>14.8}  {:>12.6}  {:>10.6}",
            b.norm(),
            b.arg(),
            b.norm_sqr() / config.power_budget[k]
        )?;
    }
    writeln!(report, "misalignment   = {:.10e}", mse.misalignment)?;
    writeln!(report, "csi_related    = {:.10e}", mse.csi_related)?;
    writeln!(report, "noise          = {:.10e}", mse.noise)?;
    writeln!(report, "objective      = {:.10e}", mse.objective())?;
    writeln!(report, "mse            = {:.10e}", mse.total)?;
    Ok(report)
}

/// Prints to stdout; a reader that closed the pipe early is not an error.
fn print_report(text: &str) {
    let mut out = io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: writing to standard output: {e}");
        }
    }
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut spec = match (&args.scenario, args.figure) {
        (Some(path), _) => {
            let sc = load_scenario(path)?;
            let mut spec = SweepSpec::new(
                args.var.expect("required by clap"),
                args.grid.clone().expect("required by clap"),
                sc.resolve()?,
            );
            spec.master_seed = sc.master_seed;
            spec
        }
        (None, Some(f)) => {
            let mut spec = figure_sweep(usize::from(f), args.seed.unwrap_or(0)).expect("range checked by clap");
            if let Some(v) = args.var {
                spec.swept = v;
            }
            if let Some(g) = &args.grid {
                spec.grid = g.clone();
            }
            spec
        }
        (None, None) => unreachable!("clap requires a scenario or a figure"),
    };
    spec.trials = args.trials;
    spec.schemes = args.schemes.clone();
    spec.starts = args.starts;
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Err(e) = spec.validate() {
        return Err(Failure::Config(format!("sweep: {e}")));
    }

    let result = run_sweep(&spec).map_err(numeric)?;
    let rows = harness::summarize(&result);
    write_atomic(&args.out, |w| harness::write_csv(&rows, w).map_err(io::Error::other))?;
    if let Some(path) = &args.plot_data {
        write_atomic(path, |w| harness::write_plot_data(&result, w))?;
    }
    eprintln!(
        "wrote {} rows ({} grid points × {} schemes, {} trials each) to {}",
        rows.len(),
        result.grid.len(),
        result.schemes.len(),
        spec.trials,
        args.out.display()
    );
    Ok(())
}

fn run_verify(level: Level) -> Result<(), Failure> {
    let level = match level {
        Level::Quick => VerifyLevel::Quick,
        Level::Full => VerifyLevel::Full,
    };
    let outcomes = verify::run_with(level, |o| {
        println!(
            "{} {:<26} {:>7.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.elapsed.as_secs_f64(),
            o.detail
        );
    });
    match outcomes.iter().find(|o| !o.passed) {
        Some(first) => Err(Failure::Verification(format!(
            "verification failed; first failing check: {}",
            first.name
        ))),
        None => {
            println!("all {} checks passed", outcomes.len());
            Ok(())
        }
    }
}

fn scenario(args: ScenarioArgs) -> Result<(), Failure> {
    let [lo, hi] = args.channel_var_range[..] else {
        return Err(Failure::Config(
            "--channel-var-range takes exactly two values: min,max".into(),
        ));
    };
    let sc = Scenario {
        num_wds: args.num_wds,
        num_rx_antennas: args.nr,
        power_budget: PerDevice::Scalar(10f64.powf(args.power_db / 10.0)),
        est_error_var: PerDevice::Scalar(args.est_error_var),
        noise_var: args.noise_var,
        channel_var: None,
        channel_var_range: Some([lo, hi]),
        master_seed: args.seed,
        est_channel: None,
    };
    let config: SystemConfig64 = sc.resolve()?;
    let text = Scenario::from_config(&config, args.seed).to_json();
    match &args.out {
        Some(path) => write_atomic(path, |w| writeln!(w, "{text}")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
