use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use heavyball::certificates;
use heavyball::geometry::{self, ConditionKind, SampleBox};
use heavyball_cli::config::{CliError, RunConfig};
use heavyball_cli::{repro, runner};

/// Heavy-Ball ODE laboratory: integrate, tune damping, certify rates and
/// verify them pointwise.
#[derive(Parser)]
#[command(name = "heavyball", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured experiment (JSON config; flags override keys).
    Run(RunArgs),
    /// Print rate certificates and feasible damping regions as JSON.
    Certify {
        #[command(subcommand)]
        what: CertifyCmd,
    },
    /// Sampled verification of a geometric condition, or constant estimation.
    CheckGeometry(CheckGeometryArgs),
    /// Heavy-ball on the Moreau envelope of a nonsmooth convex function.
    Moreau(MoreauArgs),
    /// Worst-case convergence-factor comparison across methods.
    Compare {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        mu: f64,
    },
    /// Reproduce the benchmark experiments.
    Repro {
        #[command(subcommand)]
        which: ReproCmd,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    alpha_spec: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trajectory CSV output path.
    #[arg(long)]
    csv: Option<String>,
    /// Override the JSON summary output path.
    #[arg(long)]
    summary: Option<String>,
    /// Override the bounds CSV output path (moreau dynamics).
    #[arg(long)]
    bounds_csv: Option<String>,
}

#[derive(Subcommand)]
enum CertifyCmd {
    /// Optimal damping and certificates for convex PL functions.
    OptimalConvex {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Optimal damping and certificate without convexity.
    OptimalNonconvex {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
    /// Certificate at an explicit damping (delta inverted when omitted).
    At {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: Option<f64>,
        /// Also emit the convex-theorem pair.
        #[arg(long)]
        convex: bool,
    },
    /// Feasible damping region at a Lyapunov parameter.
    Region {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Invert the damping-to-delta cubic.
    DeltaFor {
        #[arg(long)]
        l: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Pl,
    Qg,
    Eb,
    Qsc,
    NsPl,
}

impl From<KindArg> for ConditionKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pl => ConditionKind::Pl,
            KindArg::Qg => ConditionKind::Qg,
            KindArg::Eb => ConditionKind::Eb,
            KindArg::Qsc => ConditionKind::Qsc,
            KindArg::NsPl => ConditionKind::NsPl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateArg {
    Pl,
    Lipschitz,
}

#[derive(Args)]
struct CheckGeometryArgs {
    /// Registry id: quadratic | sin-valley | piecewise | flat-bottom | abs.
    #[arg(long)]
    function: String,
    /// Function parameters as a JSON object, e.g. '{"eps": 1.0}'.
    #[arg(long, default_value = "{}")]
    params: String,
    /// Condition to check (requires --parameter).
    #[arg(long)]
    kind: Option<KindArg>,
    #[arg(long)]
    parameter: Option<f64>,
    /// Estimate a constant instead of checking a condition.
    #[arg(long)]
    estimate: Option<EstimateArg>,
    /// Per-axis bounds "lo:hi", comma separated, e.g. "-4:4,-4:4".
    #[arg(long = "box")]
    sample_box: String,
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MoreauArgs {
    /// Base function registry id (must be convex).
    #[arg(long, default_value = "abs")]
    base: String,
    #[arg(long, default_value = "{}")]
    params: String,
    #[arg(long)]
    lambda: f64,
    /// User-asserted nonsmooth PL constant of the base.
    #[arg(long)]
    mu_ns: f64,
    /// Lipschitz constant of the base itself (enables the direct-gap bound).
    #[arg(long)]
    lipschitz_m: Option<f64>,
    /// Comma-separated start point.
    #[arg(long)]
    x0: String,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1001)]
    n_samples: usize,
    /// Output directory (trajectory.csv, bounds.csv, summary.json).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ReproCmd {
    /// Random quadratic sweep at a given condition number.
    Example1 {
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sine-valley landscape from one of the documented starts.
    Example2 {
        /// Start point "x,y"; the documented starts are 4.5,4.5 and
        /// -1.75,4.5 and -1,4.5.
        #[arg(long)]
        start: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_box(spec: &str) -> Result<SampleBox, CliError> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for axis in spec.split(',') {
        let (a, b) = axis
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("box axis `{axis}` is not lo:hi")))?;
        lo.push(
            a.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("box bound `{a}`: {e}")))?,
        );
        hi.push(
            b.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("box bound `{b}`: {e}")))?,
        );
    }
    SampleBox::new(lo, hi).map_err(CliError::Core)
}

fn parse_point(spec: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("coordinate `{v}`: {e}")))
        })
        .collect()
}

fn parse_params(text: &str) -> Result<serde_json::Map<String, serde_json::Value>, CliError> {
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(serde_json::Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Config("--params must be a JSON object".into())),
        Err(e) => Err(CliError::Config(format!("--params: {e}"))),
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

/// Exit 0 on success, 1 on a failed check, 2 on configuration errors.
fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run(args) => {
            let mut config = RunConfig::from_file(&args.config)?;
            if let Some(v) = args.alpha_spec {
                config.alpha_spec = Some(v);
            }
            if let Some(v) = args.t_end {
                config.t_end = Some(v);
            }
            if let Some(v) = args.n_samples {
                config.n_samples = Some(v);
            }
            if let Some(v) = args.seed {
                config.seed = v;
            }
            if args.csv.is_some() {
                config.output.csv = args.csv;
            }
            if args.summary.is_some() {
                config.output.summary = args.summary;
            }
            if args.bounds_csv.is_some() {
                config.output.bounds_csv = args.bounds_csv;
            }
            let outcome = runner::run(&config)?;
            print_json(&outcome.summary);
            Ok(if outcome.failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Certify { what } => {
            match what {
                CertifyCmd::OptimalConvex { l, mu, eps } => {
                    let (grad, gap) = certificates::optimal_damping_convex(l, mu, eps)?;
                    print_json(&serde_json::json!({"grad": grad, "gap": gap}));
                }
                CertifyCmd::OptimalNonconvex { l, mu, eps } => {
                    print_json(&certificates::optimal_damping_nonconvex(l, mu, eps)?);
                }
                CertifyCmd::At { l, mu, alpha, delta, convex } => {
                    let delta = match delta {
                        Some(d) => d,
                        None => certificates::delta_for_alpha(alpha, l, mu)?,
                    };
                    let nonconvex = certificates::rate_nonconvex(l, mu, delta, alpha)?;
                    if convex {
                        let (grad, gap) = certificates::rate_convex(l, mu, delta, alpha)?;
                        print_json(&serde_json::json!({
                            "delta": delta, "nonconvex": nonconvex, "grad": grad, "gap": gap,
                        }));
                    } else {
                        print_json(&serde_json::json!({"delta": delta, "nonconvex": nonconvex}));
                    }
                }
                CertifyCmd::Region { l, mu, delta } => {
                    print_json(&certificates::feasible_alpha_region(l, mu, delta)?);
                }
                CertifyCmd::DeltaFor { l, mu, alpha } => {
                    let delta = certificates::delta_for_alpha(alpha, l, mu)?;
                    print_json(&serde_json::json!({"alpha": alpha, "delta": delta}));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckGeometry(args) => {
            let params = parse_params(&args.params)?;
            let objective = heavyball::objectives::build_from_registry(&args.function, &params)?;
            let sample_box = parse_box(&args.sample_box)?;
            match (args.estimate, args.kind) {
                (Some(EstimateArg::Pl), _) => {
                    let (mu_hat, witness) =
                        geometry::estimate_pl(&objective, &sample_box, args.n, args.seed)?;
                    print_json(&serde_json::json!({"mu_hat": mu_hat, "witness": witness}));
                    Ok(ExitCode::SUCCESS)
                }
                (Some(EstimateArg::Lipschitz), _) => {
                    let l_hat = geometry::estimate_lipschitz_grad(
                        &objective, &sample_box, args.n, args.seed,
                    )?;
                    print_json(&serde_json::json!({
                        "l_hat": l_hat,
                        "note": "sampled lower bound on the gradient Lipschitz constant",
                    }));
                    Ok(ExitCode::SUCCESS)
                }
                (None, Some(kind)) => {
                    let parameter = args.parameter.ok_or_else(|| {
                        CliError::Config("--parameter is required with --kind".into())
                    })?;
                    let report = geometry::check_condition(
                        &objective,
                        kind.into(),
                        parameter,
                        None,
                        &sample_box,
                        args.n,
                        args.seed,
                    )?;
                    let holds = report.holds;
                    print_json(&report);
                    Ok(if holds { ExitCode::SUCCESS } else { ExitCode::from(1) })
                }
                (None, None) => Err(CliError::Config("pass either --kind or --estimate".into())),
            }
        }
        Command::Moreau(args) => {
            let x0 = parse_point(&args.x0)?;
            let mut function: heavyball_cli::config::FunctionConfig =
                serde_json::from_value(serde_json::json!({"id": args.base})).expect("static shape");
            let mut params = parse_params(&args.params)?;
            function.params.append(&mut params);
            let config = RunConfig {
                function,
                dynamics: heavyball_cli::config::Dynamics::MoreauHeavyBall,
                alpha_spec: None,
                x0,
                v0: None,
                t_end: args.t_end,
                n_samples: Some(args.n_samples),
                abs_tol: None,
                rel_tol: None,
                seed: 0,
                checks: vec!["envelope".into(), "energy".into()],
                output: heavyball_cli::config::OutputPaths {
                    csv: Some(args.out.join("trajectory.csv").to_string_lossy().into_owned()),
                    summary: Some(args.out.join("summary.json").to_string_lossy().into_owned()),
                    bounds_csv: Some(args.out.join("bounds.csv").to_string_lossy().into_owned()),
                },
                lambda: Some(args.lambda),
                mu_ns: Some(args.mu_ns),
                lipschitz_m: args.lipschitz_m,
                eps: None,
            };
            let outcome = runner::run(&config)?;
            print_json(&outcome.summary);
            Ok(if outcome.failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::Compare { l, mu } => {
            print_json(&certificates::compare_factors(l, mu)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Repro { which } => {
            let summary = match which {
                ReproCmd::Example1 { kappa, seed, out } => repro::example1(kappa, seed, &out)?,
                ReproCmd::Example2 { start, out } => {
                    let p = parse_point(&start)?;
                    if p.len() != 2 {
                        return Err(CliError::Config("--start must be x,y".into()));
                    }
                    repro::example2((p[0], p[1]), &out)?
                }
            };
            let ok = summary.all_checks_passed;
            print_json(&summary);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
