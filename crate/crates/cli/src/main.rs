//! `ssd`: run, converge and verify shrinking-dimer saddle dynamics experiments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use ssd::harness::DEFAULT_REF_TAU;
use ssd::io::{trajectory_records, write_jsonl};
use ssd::problems::LinearProblemSpec;
use ssd::{
    integrate, saddle_residual, ForceField, Harness, InitialCondition, InitialDimerLength,
    ProbeQuantity, Problem, ProblemKind, ProblemRegistry, SaddleConfig, Scheme, SsdError,
};

const V0_CORRECTION_WARN: f64 = 1e-8;
const LEMMA_SLOPE_MIN: f64 = 1.8;

#[derive(Parser, Debug)]
#[command(
    name = "ssd",
    version,
    about = "Shrinking-dimer saddle dynamics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate once and write the trajectory as JSON lines.
    Run {
        #[command(flatten)]
        spec: RunSpec,
        /// Step size.
        #[arg(long, default_value_t = 1.0 / 32.0, value_parser = parse_scalar)]
        tau: f64,
        /// Trajectory file (default: `<problem>-k<k>.jsonl`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a convergence table over a dyadic ladder of step sizes.
    Converge {
        #[command(flatten)]
        spec: RunSpec,
        /// Comma-separated step sizes, each half the previous one.
        #[arg(long, value_parser = parse_scalar, value_delimiter = ',', default_value = "2^-5,2^-6,2^-7,2^-8")]
        taus: Vec<f64>,
        /// Reference step size.
        #[arg(long, value_parser = parse_scalar, default_value_t = DEFAULT_REF_TAU)]
        ref_tau: f64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
        scheme: SchemeArg,
        /// Exit with status 2 unless every rate lies in the scheme's window.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Fit the step-size scaling of a pre-orthonormalization defect.
    Verify {
        #[command(flatten)]
        spec: RunSpec,
        #[arg(long, value_enum)]
        lemma: LemmaArg,
        #[arg(long, value_parser = parse_scalar, value_delimiter = ',', default_value = "2^-5,2^-6,2^-7,2^-8,2^-9")]
        taus: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct RunSpec {
    /// Problem name (built-in or from --problem-file).
    #[arg(long)]
    problem: String,
    /// JSON file defining a linear problem `{"name", "matrix", "offset"}`.
    #[arg(long)]
    problem_file: Option<PathBuf>,
    /// Saddle index.
    #[arg(long)]
    k: usize,
    /// Scheme variant (default: the problem's kind).
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Initial position, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Initial directions: comma-separated vectors separated by semicolons.
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<String>,
    #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
    beta: f64,
    #[arg(long, default_value_t = 1.0, value_parser = parse_scalar)]
    gamma: f64,
    /// Final time.
    #[arg(long = "t-final", visible_alias = "T", default_value_t = 1.0, value_parser = parse_scalar)]
    t_final: f64,
    /// Initial dimer length (default: sqrt(tau) for every run).
    #[arg(long, value_parser = parse_scalar)]
    l0: Option<f64>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Gradient,
    NonGradient,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Euler,
    Richardson,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LemmaArg {
    Cross,
    Norm,
    Gs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Csv,
    Json,
    Md,
}

/// A float, or `2^p` / `2^-p`.
fn parse_scalar(s: &str) -> Result<f64, String> {
    let s = s.trim();
    if let Some(p) = s.strip_prefix("2^") {
        let p: i32 = p.parse().map_err(|_| format!("bad power of two `{s}`"))?;
        return Ok(2f64.powi(p));
    }
    s.parse::<f64>().map_err(|_| format!("not a number: `{s}`"))
}

fn parse_vector(s: &str) -> Result<Vec<f64>, SsdError> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| SsdError::Input(format!("not a number: `{}` in `{s}`", c.trim())))
        })
        .collect()
}

fn parse_frame(s: &str) -> Result<Vec<Vec<f64>>, SsdError> {
    s.split(';')
        .filter(|v| !v.trim().is_empty())
        .map(parse_vector)
        .collect()
}

enum Failure {
    Error(SsdError),
    Check(String),
}

impl From<SsdError> for Failure {
    fn from(e: SsdError) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

struct Setup {
    problem: Problem,
    ic: InitialCondition,
    config: SaddleConfig,
}

fn setup(spec: &RunSpec, tau: f64) -> Result<Setup, SsdError> {
    let mut registry = ProblemRegistry::with_builtins();
    if let Some(path) = &spec.problem_file {
        registry.register(LinearProblemSpec::load(path)?);
    }
    let problem = registry.get(&spec.problem)?;
    let default_ic = problem.default_initial_condition(spec.k)?;
    let x0 = match &spec.x0 {
        Some(s) => parse_vector(s)?,
        None => default_ic.x0.iter().copied().collect(),
    };
    let v0 = match &spec.v0 {
        Some(s) => parse_frame(s)?,
        None => default_ic
            .frame0
            .vectors()
            .iter()
            .map(|v| v.iter().copied().collect())
            .collect(),
    };
    if v0.len() != spec.k {
        return Err(SsdError::Input(format!(
            "--v0 has {} directions but --k is {}",
            v0.len(),
            spec.k
        )));
    }
    if x0.len() != problem.dimension() {
        return Err(SsdError::DimensionMismatch {
            expected: problem.dimension(),
            got: x0.len(),
        });
    }
    let (ic, correction) = InitialCondition::from_slices(&x0, &v0)?;
    if correction > V0_CORRECTION_WARN {
        warn!("--v0 was not orthonormal; Gram-Schmidt moved it by up to {correction:e}");
    }
    let mode = match spec.mode {
        Some(ModeArg::Gradient) => ProblemKind::Gradient,
        Some(ModeArg::NonGradient) => ProblemKind::NonGradient,
        None => problem.kind(),
    };
    let config = SaddleConfig {
        k: spec.k,
        beta: spec.beta,
        gamma: spec.gamma,
        t_final: spec.t_final,
        tau,
        l0: spec
            .l0
            .map_or(InitialDimerLength::SqrtTau, InitialDimerLength::Fixed),
        mode,
    };
    config.validate()?;
    Ok(Setup {
        problem,
        ic,
        config,
    })
}

fn emit(out: &OutputArgs, text: &str) -> io::Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn fmt_vec(v: impl IntoIterator<Item = f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|c| format!("{c:.10e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn cmd_run(spec: &RunSpec, tau: f64, output: Option<&Path>) -> Result<(), Failure> {
    let s = setup(spec, tau)?;
    let traj = integrate(&s.problem, &s.ic, &s.config)?;
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}-k{}.jsonl", s.problem.name(), spec.k)));
    let file = File::create(&path)?;
    write_jsonl(BufWriter::new(file), &trajectory_records(&s.problem, &traj))?;
    let last = traj.final_state();
    println!(
        "trajectory: {} ({} states)",
        path.display(),
        traj.states.len()
    );
    println!("final residual: {:e}", saddle_residual(&s.problem, last));
    println!("final x: {}", fmt_vec(last.x.iter().copied()));
    Ok(())
}

fn cmd_converge(
    spec: &RunSpec,
    taus: &[f64],
    ref_tau: f64,
    scheme: Scheme,
    check: bool,
    out: &OutputArgs,
) -> Result<(), Failure> {
    let first = *taus
        .first()
        .ok_or_else(|| SsdError::Input("--taus is empty".into()))?;
    let s = setup(spec, first)?;
    let report = Harness::from_env()
        .convergence_ladder(&s.problem, &s.ic, &s.config, taus, ref_tau, scheme)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    let text = match out.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json()? + "\n",
        Format::Md => report.to_markdown(),
    };
    emit(out, &text)?;
    if check {
        report
            .check(scheme.rate_window())
            .map_err(|f| Failure::Check(f.to_string()))?;
        info!("all rates within the {scheme} window");
    }
    Ok(())
}

fn cmd_verify(
    spec: &RunSpec,
    lemma: LemmaArg,
    taus: &[f64],
    out: &OutputArgs,
) -> Result<(), Failure> {
    let quantity = match lemma {
        LemmaArg::Cross => ProbeQuantity::Cross,
        LemmaArg::Norm => ProbeQuantity::NormDefect,
        LemmaArg::Gs => ProbeQuantity::GsCorrection,
    };
    let first = *taus
        .first()
        .ok_or_else(|| SsdError::Input("--taus is empty".into()))?;
    let s = setup(spec, first)?;
    let r = Harness::from_env().scaling_probe(&s.problem, &s.ic, &s.config, taus, quantity)?;
    let text = match out.format {
        Format::Json => serde_json::to_string_pretty(&r).map_err(SsdError::from)? + "\n",
        Format::Csv => {
            let mut t = String::from("inv_tau,max\n");
            for (tau, m) in r.taus.iter().zip(&r.maxima) {
                t += &format!("{},{m:e}\n", (1.0 / tau).round());
            }
            t
        }
        Format::Md => {
            let mut t = format!("| 1/tau | max {} |\n|------:|------:|\n", r.quantity);
            for (tau, m) in r.taus.iter().zip(&r.maxima) {
                t += &format!("| {} | {m:.3e} |\n", (1.0 / tau).round());
            }
            t + &format!("\nslope: {:.4}\n", r.slope)
        }
    };
    emit(out, &text)?;
    if r.slope < LEMMA_SLOPE_MIN {
        return Err(Failure::Check(format!(
            "{} slope {:.4} is below {LEMMA_SLOPE_MIN}",
            r.quantity, r.slope
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run { spec, tau, output } => cmd_run(spec, *tau, output.as_deref()),
        Command::Converge {
            spec,
            taus,
            ref_tau,
            scheme,
            check,
            out,
        } => {
            let scheme = match scheme {
                SchemeArg::Euler => Scheme::Euler,
                SchemeArg::Richardson => Scheme::Richardson,
            };
            cmd_converge(spec, taus, *ref_tau, scheme, *check, out)
        }
        Command::Verify {
            spec,
            lemma,
            taus,
            out,
        } => cmd_verify(spec, *lemma, taus, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
