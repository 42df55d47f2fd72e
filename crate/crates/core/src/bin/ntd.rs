use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ntd::bounds::{mn_bounds, pf_bounds};
use ntd::harness::selfcheck::{kernel_mc, run_selfcheck, unit_ball};
use ntd::harness::{cmd_run, cmd_sweep, ExperimentConfig, SweepAxis};
use ntd::network::ntk_closed_form;
use ntd::{Error, Variant};

const EXIT_VALIDATION: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;
const EXIT_SELFCHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "ntd", version, about = "Neural TD learning experiments")]
struct Cli {
    /// Worker threads for replications and sweep points (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `logging.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `replication.n_seeds`.
    #[arg(long)]
    seeds: Option<u64>,
    /// Overrides `logging.log_every`.
    #[arg(long)]
    log_every: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// One run per seed; writes {tag}_{seed}.csv/.json.
    Run(RunArgs),
    /// Runs a set of replications per axis value and writes a summary table.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// One of m, alpha, variant, R.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Prints the width / step-size / horizon calculator output as JSON.
    Bounds {
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        nu_bar: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        d: usize,
        /// MN only.
        #[arg(long)]
        radius: Option<f64>,
        /// MN only.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Runs the fast invariant battery.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compares Monte Carlo kernel estimates with the closed form.
    KernelCheck {
        #[arg(long, default_value_t = 20)]
        pairs: usize,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Divergence { .. } => ExitCode::from(EXIT_DIVERGENCE),
        _ => ExitCode::from(EXIT_VALIDATION),
    }
}

fn load(args: &RunArgs) -> ntd::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.logging.out_dir = out.clone();
    }
    if let Some(n) = args.seeds {
        cfg.replication.n_seeds = n;
    }
    if let Some(k) = args.log_every {
        cfg.logging.log_every = k;
    }
    Ok(cfg)
}

fn run_cmd(args: &RunArgs) -> ntd::Result<()> {
    let cfg = load(args)?;
    let exp = cfg.resolve()?;
    for (record, secs) in cmd_run(&exp, &cfg.logging.out_dir)? {
        println!("{}", serde_json::to_string(&record)?);
        eprintln!("seed {} finished in {secs:.2}s", record.seeds.replication);
    }
    Ok(())
}

fn sweep_cmd(args: &RunArgs, axis: &str, values: &[String]) -> ntd::Result<()> {
    let cfg = load(args)?;
    let axis: SweepAxis = axis.parse()?;
    let rows = cmd_sweep(&cfg, axis, values, &cfg.logging.out_dir)?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bounds_cmd(
    variant: Variant,
    nu_bar: f64,
    gamma: f64,
    eps: f64,
    delta: f64,
    d: usize,
    radius: Option<f64>,
    horizon: Option<u64>,
) -> ntd::Result<()> {
    let json = match variant {
        Variant::ProjectionFree => serde_json::to_string_pretty(&pf_bounds(nu_bar, gamma, eps, delta, d)?)?,
        Variant::MaxNorm => {
            let radius = radius.ok_or_else(|| Error::Config("--radius is required for MN".into()))?;
            let horizon = horizon.ok_or_else(|| Error::Config("--horizon is required for MN".into()))?;
            serde_json::to_string_pretty(&mn_bounds(nu_bar, gamma, eps, delta, d, radius, horizon)?)?
        }
    };
    println!("{json}");
    Ok(())
}

fn kernel_check(pairs: usize, samples: usize, d: usize, seed: u64) -> ntd::Result<bool> {
    if d == 0 || samples < 2 {
        return Err(Error::Config("kernel-check: need d >= 1 and samples >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = true;
    for k in 0..pairs {
        let x = unit_ball(d, &mut rng);
        let y = match k {
            0 => x.clone(),
            1 => x.iter().map(|a| -a).collect(),
            _ => unit_ball(d, &mut rng),
        };
        let exact = ntk_closed_form(&x, &y)?;
        let (est, se) = kernel_mc(&x, &y, samples, &mut rng);
        let z = if se > 0.0 { (est - exact).abs() / se } else { (est - exact).abs() * 1e12 };
        let pass = z <= 4.0;
        ok &= pass;
        println!(
            "{}",
            serde_json::json!({"pair": k, "closed_form": exact, "monte_carlo": est, "stderr": se, "z": z, "pass": pass})
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let result = match &cli.command {
        Command::Run(args) => run_cmd(args),
        Command::Sweep { run, axis, values } => sweep_cmd(run, axis, values),
        Command::Bounds { variant, nu_bar, gamma, eps, delta, d, radius, horizon } => {
            bounds_cmd(*variant, *nu_bar, *gamma, *eps, *delta, *d, *radius, *horizon)
        }
        Command::Selfcheck { seed } => {
            let report = run_selfcheck(*seed);
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_SELFCHECK) };
        }
        Command::KernelCheck { pairs, samples, d, seed } => match kernel_check(*pairs, *samples, *d, *seed) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_SELFCHECK),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
