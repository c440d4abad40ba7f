use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use surfwalk::cocycle::{default_transient, equivariance_residual, lyapunov_exponents_along, oseledets_splitting, sum_exponent_stderr};
use surfwalk::cohomology::{boundary_measure_sample, furstenberg_vector};
use surfwalk::exact::IntMatrix;
use surfwalk::experiments::config::LabModel;
use surfwalk::experiments::report::CheckRecord;
use surfwalk::experiments::suites::{flow_laws, jets_suite};
use surfwalk::experiments::{lattice_action, run_full_report, run_measure_histogram, walker, ExperimentConfig, LoadedConfig, Sampleable};
use surfwalk::lattice::{self, IntegralLattice};
use surfwalk::orbit::{ChartedOrbit, OrbitSpec};
use surfwalk::walk::WalkWord;
use surfwalk::Error;

#[derive(Parser)]
#[command(name = "surfwalk", version, about = "Random dynamics on complex surfaces: exponents, charts, flows, lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov exponents along the first walker of a config.
    Lyapunov {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Oseledets splitting and its equivariance residual.
    Oseledets {
        #[arg(long)]
        config: PathBuf,
    },
    /// Group laws of the standard and time-changed flows.
    FlowCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
    },
    /// Validation suite for the 2-jet algebra.
    JetsTest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cohomology action of a model.
    Cohomology {
        #[arg(long)]
        config: PathBuf,
        #[arg(value_enum, default_value_t = CohomologyOp::Classify)]
        op: CohomologyOp,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        iterations: u64,
    },
    /// Exact checks on an integral lattice given by its Gram matrix.
    LatticeVerify {
        /// Rows separated by `;`, entries by `,`, e.g. `7,0;0,-14`.
        #[arg(long, allow_hyphen_values = true)]
        gram: String,
        #[arg(long, default_value_t = 50)]
        bound: i64,
        #[arg(long = "check", value_enum, required = true, allow_hyphen_values = true)]
        checks: Vec<LatticeCheck>,
    },
    /// Empirical stationary measure histogram (CSV on stdout or to `--csv`).
    MeasureHist {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Runs all configured stages and writes the report bundle.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CohomologyOp {
    Classify,
    Furstenberg,
    BoundarySample,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum LatticeCheck {
    Even,
    Rep,
    #[value(name = "-2")]
    MinusTwo,
    Null,
    Isom,
    Parabolic,
    Appendix,
}

enum Failure {
    Check,
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn emit<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("serializable output"));
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn parse_gram(s: &str) -> std::result::Result<IntegralLattice, Failure> {
    let rows: Vec<Vec<i64>> = s
        .split(';')
        .map(|r| r.split(',').map(|x| x.trim().parse::<i64>()).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Failure::Config(format!("bad --gram: {e}")))?;
    IntegralLattice::new(IntMatrix::from_rows(&rows)).map_err(|e| Failure::Config(e.to_string()))
}

fn lattice_verify(gram: &str, bound: i64, checks: &[LatticeCheck]) -> Outcome {
    let l = parse_gram(gram)?;
    let mut all = true;
    let mut line = |name: &str, pass: bool, detail: serde_json::Value| {
        all &= pass;
        emit(&serde_json::json!({ "check": name, "pass": pass, "detail": detail }));
    };
    for &c in checks {
        match c {
            LatticeCheck::Even => {
                let (even, w) = lattice::is_even(&l);
                line("even", even, serde_json::json!({ "odd_witness": w }));
            }
            LatticeCheck::Rep | LatticeCheck::MinusTwo => {
                let r = lattice::represents(&l, -2, bound)?;
                line("no-minus-two", r.is_absent(), serde_json::to_value(&r).unwrap_or_default());
            }
            LatticeCheck::Null => {
                let n = lattice::null_vectors(&l, bound)?;
                line("no-null", n.found.is_empty(), serde_json::to_value(&n).unwrap_or_default());
            }
            LatticeCheck::Isom => {
                let s = lattice::isometry_search(&l, bound)?;
                line("hyperbolic-axes", s.distinct_axes >= 2, serde_json::to_value(&s).unwrap_or_default());
            }
            LatticeCheck::Parabolic => {
                let p = lattice::parabolic_absence(&l, bound)?;
                line("parabolic-absence", p.absent, serde_json::to_value(&p).unwrap_or_default());
            }
            LatticeCheck::Appendix => {
                let r = lattice::verify_appendix(&l, bound)?;
                for c in &r.lines {
                    line(&c.name, c.pass, serde_json::Value::String(c.detail.clone()));
                }
            }
        }
    }
    verdict(all)
}

fn load(path: &std::path::Path) -> std::result::Result<LoadedConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn with_model<M: Sampleable>(model: &M, loaded: &LoadedConfig, cmd: &Command) -> Outcome {
    let cfg = &loaded.config;
    let mu = cfg.measure.build(model)?;
    let start = || -> surfwalk::Result<(WalkWord, M::Point)> {
        let (w, x) = walker(model, &mu, cfg.seed, 0)?;
        let b = cfg.run.burn_in as i64;
        Ok((w.shift(b), surfwalk::walk::compose(model, &w, b, &x)?))
    };
    match cmd {
        Command::Lyapunov { steps, .. } => {
            let n = steps.unwrap_or(cfg.run.n_steps);
            let (w, x) = start()?;
            let e = lyapunov_exponents_along(model, &w, &x, n, default_transient(n))?;
            let (_, se) = sum_exponent_stderr(model, &w, &x, n, default_transient(n))?;
            let sum: f64 = e.exponents.iter().sum();
            emit(&serde_json::json!({ "seed": cfg.seed, "estimate": e, "sum": sum, "sum_stderr": 2.0 * se }));
            verdict(sum.abs() <= (6.0 * se).max(1e-9))
        }
        Command::Oseledets { .. } => {
            let (w, x) = start()?;
            let f = oseledets_splitting(model, &w, &x, cfg.orbit.n_fwd, cfg.orbit.n_bwd)?;
            let r = equivariance_residual(model, &f, cfg.orbit.n_bwd)?;
            emit(&serde_json::json!({
                "seed": cfg.seed, "angle": f.angle, "lambda_plus": f.lambda_plus,
                "lambda_minus": f.lambda_minus, "equivariance_residual": r, "tolerance": 1e-6
            }));
            verdict(r < 1e-6)
        }
        Command::FlowCheck { pairs, .. } => {
            let (w, x) = start()?;
            let n = cfg.run.n_steps;
            let e = lyapunov_exponents_along(model, &w, &x, n, default_transient(n))?;
            let spec = OrbitSpec {
                radius: cfg.orbit.radius,
                pad: cfg.orbit.pad,
                lambda_plus: e.lambda_plus,
                lambda_minus: e.lambda_minus,
                eps0: cfg.orbit.eps0.unwrap_or_else(|| surfwalk::cocycle::default_eps0(e.lambda_plus, e.lambda_minus)),
            };
            let orbit = ChartedOrbit::build(model, &w, &x, spec)?;
            let errs = flow_laws(model, &orbit, &w, cfg.seed, *pairs)?;
            for r in errs.records(cfg.seed, 1e-9) {
                emit(&r);
            }
            verdict(errs.passes(1e-9))
        }
        Command::Cohomology { op, samples, iterations, .. } => {
            let action = lattice_action(model)?;
            match op {
                CohomologyOp::Classify => {
                    for &id in mu.atoms() {
                        emit(&serde_json::json!({ "automorphism": model.automorphism_name(id), "class": action.classify(id)? }));
                    }
                    let mut p = IntMatrix::identity(action.rank());
                    for &id in mu.atoms() {
                        p = p.mul(&action.generators()[id]);
                    }
                    let class = surfwalk::cohomology::classify_isometry(&p, action.gram())?;
                    emit(&serde_json::json!({ "automorphism": "product", "class": class }));
                }
                CohomologyOp::Furstenberg => {
                    let w = WalkWord::new(cfg.seed, &mu);
                    let e = furstenberg_vector(&action, &w, &action.kappa(), *iterations, 1e-9)?;
                    emit(&serde_json::json!({ "seed": cfg.seed, "vector": e }));
                }
                CohomologyOp::BoundarySample => {
                    let s = boundary_measure_sample(&action, &mu, *samples, *iterations, cfg.seed)?;
                    emit(&serde_json::json!({ "seed": cfg.seed, "sample": s }));
                }
            }
            Ok(())
        }
        Command::MeasureHist { csv, .. } => {
            let (r, h) = (&cfg.run, &cfg.histogram);
            let hist = run_measure_histogram(model, &mu, cfg.seed, r.walkers, r.burn_in, h.samples_per_walker, h.grid, h.pair)?;
            match csv {
                Some(p) => hist.write_csv(std::fs::File::create(p).map_err(|e| Failure::Run(e.to_string()))?)?,
                None => hist.write_csv(std::io::stdout())?,
            }
            let rec = CheckRecord::check("histogram", "stationarity-tv", hist.stationarity_tv, hist.tv_threshold, cfg.seed, hist.stationary, true);
            eprintln!("{}", serde_json::to_string(&rec).expect("serializable"));
            verdict(hist.stationary)
        }
        _ => unreachable!("model-free commands are handled in run"),
    }
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::JetsTest { seed } => {
            let recs = jets_suite(*seed)?;
            recs.iter().for_each(emit);
            verdict(recs.iter().all(|r| !r.failed()))
        }
        Command::LatticeVerify { gram, bound, checks } => lattice_verify(gram, *bound, checks),
        Command::Report { config, out } => {
            let loaded = load(config)?;
            let bundle = run_full_report(&loaded)?;
            let dir = out.clone().or_else(|| loaded.config.output_dir.as_ref().map(PathBuf::from));
            if let Some(d) = dir {
                bundle.write_to(&d)?;
            }
            print!("{}", bundle.summary());
            verdict(!bundle.failed())
        }
        Command::Lyapunov { config, .. }
        | Command::Oseledets { config }
        | Command::FlowCheck { config, .. }
        | Command::Cohomology { config, .. }
        | Command::MeasureHist { config, .. } => {
            let loaded = load(config)?;
            match loaded.config.model.build()? {
                LabModel::Torus(m) => with_model(&m, &loaded, &cli.command),
                LabModel::Wehler(m) => with_model(&m, &loaded, &cli.command),
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
