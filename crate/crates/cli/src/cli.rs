//! Argument parsing and the write-out of records and tables.

use crate::commands::{self, parse_point, Context, Output};
use crate::config::CensusOptions;
use crate::error::RunError;
use crate::record::TOOL_VERSION;
use crate::sweep;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use torus_bubbling::green::{Backend, ConstantCache};

#[derive(Debug, Parser)]
#[command(name = "torus-bubbling", version, about = "Green's functions, critical points and blow-up admissibility on flat tori")]
pub struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for the JSON record and CSV tables.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory of the per-basis constant cache.
    #[arg(long, global = true, default_value = ".torus-bubbling")]
    pub cache: PathBuf,
    /// Neither read nor write the constant cache.
    #[arg(long, global = true)]
    pub no_cache: bool,
    /// Seed for Monte-Carlo checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the Green's function.
    Green {
        #[command(subcommand)]
        action: GreenCommand,
    },
    /// Critical points of the Green's function.
    Census(CensusArgs),
    /// The functional D at one point.
    Dfunc(DfuncArgs),
    /// The functional D² of a blow-up configuration.
    D2func {
        #[arg(long)]
        config: PathBuf,
    },
    /// Necessary conditions report for a blow-up configuration.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Radial solutions of the two-component Liouville system.
    Liouville {
        #[command(subcommand)]
        action: LiouvilleCommand,
    },
    /// Census, D and D² along a path of moduli, as CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum GreenCommand {
    Eval {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        point: [f64; 2],
        #[arg(long, value_enum, default_value = "theta")]
        backend: BackendArg,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum BackendArg {
    Theta,
    Ewald,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct CensusArgs {
    #[command(subcommand)]
    pub action: Option<CensusCommand>,
    #[arg(long)]
    pub basis: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum CensusCommand {
    /// One CSV row per modulus `τ` of the basis `(1, τ)`.
    Sweep {
        #[arg(long)]
        tau_path: PathBuf,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
pub struct DfuncArgs {
    #[arg(long)]
    pub basis: PathBuf,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub point: [f64; 2],
    /// Monte-Carlo samples for the exterior-term check (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    /// Write the regularized integral at each extrapolation radius as CSV.
    #[arg(long)]
    pub rings_csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LiouvilleCommand {
    /// Integrate from `(a1, a2)` and report masses and tail constants.
    Shoot {
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
        #[arg(long, allow_hyphen_values = true)]
        a1: f64,
        #[arg(long, allow_hyphen_values = true)]
        a2: f64,
        #[arg(long, default_value_t = 1e4)]
        rmax: f64,
        #[arg(long)]
        profile_csv: Option<PathBuf>,
    },
    /// Find `a2` with equal masses.
    EqualMass {
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
        #[arg(long, allow_hyphen_values = true)]
        a1: f64,
        #[arg(long, default_value_t = 1e4)]
        rmax: f64,
        #[arg(long)]
        profile_csv: Option<PathBuf>,
    },
}

fn cache_file(dir: &Path) -> PathBuf {
    dir.join("constants.json")
}

/// Run one parsed command line on the right thread pool.
pub fn execute(cli: &Cli) -> Result<Output, RunError> {
    let cache = if cli.no_cache {
        ConstantCache::new()
    } else {
        ConstantCache::load(&cache_file(&cli.cache), TOOL_VERSION).unwrap_or_default()
    };
    let ctx = Context { cache, seed: cli.seed };
    let out = match cli.threads {
        Some(0) => return Err(RunError::Config("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::Internal(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(&ctx, &cli.command))?
        }
        None => dispatch(&ctx, &cli.command)?,
    };
    if !cli.no_cache && !ctx.cache.is_empty() {
        ctx.cache.save(&cache_file(&cli.cache), TOOL_VERSION)?;
    }
    Ok(out)
}

fn dispatch(ctx: &Context, command: &Command) -> Result<Output, RunError> {
    match command {
        Command::Green { action: GreenCommand::Eval { basis, point, backend } } => {
            let backend = match backend {
                BackendArg::Theta => Backend::Theta,
                BackendArg::Ewald => Backend::Ewald,
            };
            commands::green_eval(ctx, basis, *point, backend)
        }
        Command::Census(args) => match (&args.action, &args.basis) {
            (Some(CensusCommand::Sweep { tau_path, grid, tol }), _) => {
                sweep::census_sweep(ctx, tau_path, &CensusOptions { grid: *grid, tol: *tol })
            }
            (None, Some(basis)) => commands::census(ctx, basis, args.grid, args.tol),
            (None, None) => Err(RunError::Config("census needs --basis <file> or the `sweep` subcommand".into())),
        },
        Command::Dfunc(a) => commands::dfunc(ctx, &a.basis, a.point, a.mc_samples, a.rings_csv.as_deref()),
        Command::D2func { config } => commands::d2func(ctx, config),
        Command::Verify { config } => commands::verify(ctx, config),
        Command::Liouville { action } => match action {
            LiouvilleCommand::Shoot { c1, c2, a1, a2, rmax, profile_csv } => {
                commands::liouville_shoot([*c1, *c2], [*a1, *a2], *rmax, profile_csv.as_deref())
            }
            LiouvilleCommand::EqualMass { c1, c2, a1, rmax, profile_csv } => {
                commands::liouville_equal_mass([*c1, *c2], *a1, *rmax, profile_csv.as_deref())
            }
        },
        Command::Sweep { spec } => sweep::sweep(ctx, spec),
    }
}

fn file_stem(command: &str) -> String {
    command.replace(' ', "_")
}

/// Write the artifacts of `out`. Tables go to stdout when there is no output
/// directory; otherwise the record is printed and everything is written there.
pub fn emit(out: &Output, out_dir: Option<&Path>, stdout: &mut dyn Write) -> Result<(), RunError> {
    for f in &out.side_files {
        if let Some(dir) = f.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&f.path, &f.contents)?;
    }
    let record_json = match &out.record {
        Some(r) => Some((file_stem(&r.command), serde_json::to_string_pretty(r)?)),
        None => None,
    };
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            if let Some((name, csv)) = &out.table {
                std::fs::write(dir.join(name), csv)?;
            }
            if let Some((stem, json)) = &record_json {
                std::fs::write(dir.join(format!("{stem}.json")), json)?;
                writeln!(stdout, "{json}")?;
            }
        }
        None => match (&out.table, &record_json) {
            (Some((_, csv)), _) => write!(stdout, "{csv}")?,
            (None, Some((_, json))) => writeln!(stdout, "{json}")?,
            (None, None) => {}
        },
    }
    Ok(())
}

/// Parse, run and write; returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    match execute(&cli).and_then(|out| emit(&out, cli.out.as_deref(), stdout)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(std::iter::once("torus-bubbling").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn parse_errors_exit_with_config_code() {
        let (code, _, err) = run(&["census", "--grid", "many"]);
        assert_eq!(code, 2);
        assert!(err.contains("grid"), "{err}");
    }

    #[test]
    fn census_without_basis_is_a_config_error() {
        let (code, _, err) = run(&["--no-cache", "census"]);
        assert_eq!(code, 2);
        assert!(err.contains("--basis"), "{err}");
    }

    #[test]
    fn zero_threads_rejected() {
        let (code, _, _) = run(&["--no-cache", "--threads", "0", "liouville", "shoot", "--c1", "1", "--c2", "1", "--a1", "0", "--a2", "0"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn negative_arguments_parse() {
        let (code, out, err) =
            run(&["--no-cache", "liouville", "shoot", "--c1", "1", "--c2", "1", "--a1", "-0.1", "--a2", "-0.1"]);
        assert_eq!(code, 0, "{err}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["command"], "liouville shoot");
        assert!(v["outputs"]["M1"].as_f64().unwrap() > 0.0);
    }
}
