use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use disent_cli::config::{parse_config, validate, CONFIG_REFERENCE};
use disent_cli::{run, CliError, RunConfig};

/// Two-spin disentanglement dynamics: steady-state sweeps, modified
/// master equation and stochastic trajectory ensembles.
#[derive(Parser, Debug)]
#[command(name = "disent", version, after_help = CONFIG_REFERENCE)]
struct Args {
    /// TOML configuration file
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Named preset; used as the base when no config file is given
    #[arg(long, short)]
    preset: Option<String>,
    /// Overrides integrator.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Size of the worker pool (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides integrator.dt
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides integrator.t_end
    #[arg(long)]
    t_end: Option<f64>,
    /// Skip SVG output
    #[arg(long)]
    no_plots: bool,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), None) => {
            std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?
        }
        (None, Some(name)) => format!("preset = {}", toml_string(name)),
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "--config and --preset are exclusive; set `preset` inside the file".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.integrator.seed = seed;
    }
    if let Some(dt) = args.dt {
        cfg.integrator.dt = dt;
    }
    if let Some(t) = args.t_end {
        cfg.integrator.t_end = t;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if args.no_plots {
        cfg.output.plots = false;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn toml_string(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load(&args)?;
    let summary = run(&cfg)?;
    println!("wrote {} to {}", summary.data_files.join(", "), cfg.output.dir.display());
    if !summary.plots.is_empty() {
        println!("plots: {}", summary.plots.len());
    }
    for v in &summary.verdicts {
        match (&v.verdict, &v.note) {
            (Some(verdict), _) => println!(
                "{}: {:?} (amplitude {:.3e})",
                v.source, verdict.kind, verdict.amplitude
            ),
            (None, Some(note)) => println!("{}: no verdict ({note})", v.source),
            (None, None) => {}
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
