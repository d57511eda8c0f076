use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ymlab_cli::{exit, CliError, Command, Settings};

/// Numerical laboratory for shrinking solitons of Yang-Mills flow.
///
/// Settings resolve as built-in defaults, then `--config FILE` (`key = value`
/// lines), then flags.
#[derive(Parser)]
#[command(name = "ymlab", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Global {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dimensions: `5..9`, `5,7` or `6`.
    #[arg(long = "n", global = true)]
    n: Option<String>,
    /// Normalisation conventions, e.g. `A,B,C`.
    #[arg(long, global = true)]
    conventions: Option<String>,
    /// Relative tolerance of the radial quadrature.
    #[arg(long, global = true)]
    tol_quad: Option<String>,
    /// Override every per-check tolerance.
    #[arg(long, global = true)]
    tol_check: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Radial profile CSV (`r,eta`) replacing the Gastel profile.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Grid shape for xi-scan, e.g. `41x41`.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// `csv` or `json`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Use the flat connection.
    #[arg(long, global = true)]
    flat: bool,
    /// Sample points per dimension in pointwise suites.
    #[arg(long, global = true)]
    points: Option<String>,
    /// Random paths per dimension in the variation suite.
    #[arg(long, global = true)]
    paths: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Entropy of the Gastel shrinkers under each normalisation convention.
    Table,
    /// Run verification suites (all of them unless `--suite` is given).
    Verify {
        /// identities, eigenforms, bianchi, gap, variation or scaling.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Evolve the reduced flow and check monotonicity.
    Flow(FlowArgs),
    /// Tabulate Xi over a (c, log t0) grid.
    XiScan {
        #[arg(long, allow_hyphen_values = true)]
        c_max: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        log_t0_min: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        log_t0_max: Option<String>,
    },
    /// Re-run a manifest and compare its results and checksums.
    Replay { manifest: PathBuf },
}

#[derive(Args)]
struct FlowArgs {
    /// Start from the self-similar solution and check tracking.
    #[arg(long)]
    gastel: bool,
    #[arg(long, allow_hyphen_values = true)]
    t0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t1: Option<String>,
    #[arg(long)]
    dr: Option<String>,
    #[arg(long)]
    rho_max: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Factor applied to the initial profile.
    #[arg(long, allow_hyphen_values = true)]
    perturb: Option<String>,
    /// clamp, mirror or exact.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    cfl: Option<String>,
    #[arg(long)]
    tracking_bound: Option<String>,
    #[arg(long)]
    blowup_threshold: Option<String>,
    /// Skip the monotonicity harness.
    #[arg(long)]
    no_harness: bool,
    /// Leave the entropy out of the harness.
    #[arg(long)]
    no_entropy: bool,
}

fn overrides(cli: &Cli) -> Vec<(&'static str, String)> {
    let g = &cli.global;
    let mut kv: Vec<(&'static str, String)> = Vec::new();
    let mut put = |k: &'static str, v: &Option<String>| {
        if let Some(v) = v {
            kv.push((k, v.clone()));
        }
    };
    put("n", &g.n);
    put("conventions", &g.conventions);
    put("tol_quad", &g.tol_quad);
    put("tol_check", &g.tol_check);
    put("seed", &g.seed);
    put("grid", &g.grid);
    put("format", &g.format);
    put("points", &g.points);
    put("paths", &g.paths);
    match &cli.command {
        Cmd::Verify { suite } => put("suite", suite),
        Cmd::XiScan { c_max, log_t0_min, log_t0_max } => {
            put("c_max", c_max);
            put("log_t0_min", log_t0_min);
            put("log_t0_max", log_t0_max);
        }
        Cmd::Flow(f) => {
            put("t0", &f.t0);
            put("t1", &f.t1);
            put("dr", &f.dr);
            put("rho_max", &f.rho_max);
            put("samples", &f.samples);
            put("perturb", &f.perturb);
            put("boundary", &f.boundary);
            put("cfl", &f.cfl);
            put("tracking_bound", &f.tracking_bound);
            put("blowup_threshold", &f.blowup_threshold);
            if f.gastel {
                kv.push(("gastel", "true".into()));
            }
            if f.no_harness {
                kv.push(("harness", "false".into()));
            }
            if f.no_entropy {
                kv.push(("entropy", "false".into()));
            }
        }
        Cmd::Table | Cmd::Replay { .. } => {}
    }
    if g.flat {
        kv.push(("flat", "true".into()));
    }
    kv
}

fn resolve(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = Settings::default();
    if let Some(path) = &cli.global.config {
        s.apply_file(path)?;
    }
    for (k, v) in overrides(cli) {
        s.apply(k, &v)?;
    }
    if let Some(out) = &cli.global.out {
        s.out = Some(out.clone());
    }
    if let Some(p) = &cli.global.profile {
        s.profile = Some(p.clone());
    }
    Ok(s)
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("YMLAB_THREADS") else { return Ok(()) };
    let k: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| CliError::Config(format!("YMLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

fn main() {
    let cli = Cli::parse();
    let result = threads().and_then(|()| match &cli.command {
        Cmd::Replay { manifest } => ymlab_cli::replay(manifest),
        cmd => {
            let settings = resolve(&cli)?;
            let which = match cmd {
                Cmd::Table => Command::Table,
                Cmd::Verify { .. } => Command::Verify,
                Cmd::Flow(_) => Command::Flow,
                Cmd::XiScan { .. } => Command::XiScan,
                Cmd::Replay { .. } => unreachable!(),
            };
            ymlab_cli::execute(which, &settings)
        }
    });
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("ymlab: {e}");
            std::process::exit(match e.exit_code() {
                exit::PASS => exit::CONFIG,
                c => c,
            });
        }
    }
}
