//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::Config;
use crate::error::CliError;
use crate::manifest::Outputs;

const RUN_SCHEMA: &str = "\
runs/N<n>/<variant>_rho<rho1>_seed<seed>.csv
  variant,N,rho1,seed,epoch,test_mse,e_low,e_mid,e_high
  one row per epoch 1..E, evaluated after the epoch's last update.";

const SWEEP_SCHEMA: &str = "\
variant,N,rho1,epoch,runs,test_mse_mean,test_mse_sd,e_low_mean,e_low_sd,
e_mid_mean,e_mid_sd,e_high_mean,e_high_sd
  means and population standard deviations over seeds.";

#[derive(Debug, Parser)]
#[command(name = "acbias", version, about = "Autocorrelation and spectral bias in FastKAN forecasters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; omitted tables and keys take their defaults.
    #[arg(long, global = true, value_name = "FILE", conflicts_with = "paper_defaults")]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,

    /// Number of seeds (0..S) for training runs and dataset export.
    #[arg(long, global = true, value_name = "S")]
    pub seeds: Option<u64>,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Use the full protocol: 100 seeds per configuration.
    #[arg(long, global = true)]
    pub paper_defaults: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train both variants on N=1 across the rho grid and record per-epoch errors.
    #[command(after_long_help = format!(
        "Outputs:\n{RUN_SCHEMA}\nepoch_dynamics.csv\n  {SWEEP_SCHEMA}\nplots/epoch_mse_<variant>.svg, \
         plots/epoch_components_<variant>_rho<rho1>.svg\nmanifest.json"
    ))]
    EpochDynamics,

    /// Train both variants for every AR order and summarize final-epoch errors.
    #[command(after_long_help = format!(
        "Outputs:\n{RUN_SCHEMA}\nsweep_N<n>.csv\n  {SWEEP_SCHEMA}\n  final epoch only.\n\
         mse_N<n>.csv\n  rho1,<variant>_test_mse_mean,<variant>_test_mse_sd,...\n\
         components_N<n>.csv\n  rho1,<variant>_e_low_mean,<variant>_e_low_sd,... for e_low, e_mid, e_high\n\
         plots/mse_N<n>.svg, plots/components_N<n>.svg\nmanifest.json"
    ))]
    RhoSweep,

    /// Check the eigenvalue and condition-number bounds of the leading-order Hessian.
    #[command(after_long_help = "Outputs:\n\
        theory_condition.csv\n  rho,p,G,k,density,lmax_R,lmin_R,lmax_C,lmin_C,C_k,lmax_M,lambda_p,kappa,\n  \
        bound1_lo,bound1_hi,bound2_lo,bound2_hi,bound3_lo,bound3_hi,null_dim,pass\n\
        theory_summary.txt\nplots/kappa_<density>_G<g>_k<k>.svg\nmanifest.json\n\
        Exit status 2 when any bound is violated.")]
    Theory,

    /// Compare empirical spline Hessians of AR(1) windows against the leading-order form.
    #[command(after_long_help = "Outputs:\n\
        residual.csv\n  rho,p,samples,res_norm,rel_res,max_eig_dev,weyl_ok,clamped_fraction,warning\n\
        manifest.json\nExit status 2 when an eigenvalue deviation exceeds the residual norm.")]
    Residual,

    /// Run gradient descent on quadratic losses and fit per-mode decay rates.
    #[command(after_long_help = "Outputs:\n\
        mode_decay.csv\n  label,mode,lambda,expected_rate,fitted_rate,rel_error,degenerate,checked\n\
        manifest.json\nExit status 2 when a checked rate is off by 5% or more, or the null dimension is not p-1.")]
    ModeDecay,

    /// Export the standardized datasets used for training.
    #[command(after_long_help = "Outputs:\n\
        datasets/N<n>_rho<rho1>_seed<seed>_<variant>.csv\n  t,x_lag0,...,x_lag<p-1>,y,c_low,c_mid,c_high,is_test\n  \
        dct-kan files hold DCT-transformed inputs.\nmanifest.json")]
    Gen,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::EpochDynamics => "epoch-dynamics",
            Command::RhoSweep => "rho-sweep",
            Command::Theory => "theory",
            Command::Residual => "residual",
            Command::ModeDecay => "mode-decay",
            Command::Gen => "gen",
        }
    }
}

fn resolve_config(common: &Common) -> Result<Config, CliError> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if common.paper_defaults {
        cfg.experiment.seeds = 100;
    }
    if let Some(s) = common.seeds {
        if s == 0 {
            return Err(CliError::usage("--seeds must be positive"));
        }
        cfg.experiment.seeds = s;
        cfg.gen.seeds = s;
    }
    Ok(cfg)
}

fn seeds_for(command: &Command, cfg: &Config) -> Vec<u64> {
    match command {
        Command::EpochDynamics | Command::RhoSweep => (0..cfg.experiment.seeds).collect(),
        Command::Gen => (0..cfg.gen.seeds).collect(),
        Command::Theory => Vec::new(),
        Command::Residual => vec![cfg.residual.seed],
        Command::ModeDecay => vec![cfg.mode_decay.seed],
    }
}

/// Executes a parsed invocation; `Ok(false)` means a verification check failed.
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = resolve_config(&cli.common)?;
    let jobs = match cli.common.jobs {
        Some(0) => return Err(CliError::usage("--jobs must be positive")),
        Some(j) => j,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {jobs} workers: {e}")))?;
    let mut out = Outputs::create(&cli.common.out)?;
    let (ok, checked) = match cli.command {
        Command::EpochDynamics => (commands::epoch_dynamics(&cfg, &mut out, &pool)?, false),
        Command::RhoSweep => (commands::rho_sweep(&cfg, &mut out, &pool)?, false),
        Command::Theory => (commands::theory(&cfg, &mut out, &pool)?, true),
        Command::Residual => (commands::residual(&cfg, &mut out, &pool)?, true),
        Command::ModeDecay => (commands::mode_decay(&cfg, &mut out)?, true),
        Command::Gen => (commands::gen(&cfg, &mut out)?, false),
    };
    let count = out.artifacts().len();
    let root = out.root().to_path_buf();
    out.finish(cli.command.name(), &cfg.to_toml(), seeds_for(&cli.command, &cfg), checked.then_some(ok))?;
    eprintln!("{}: wrote {count} files and manifest.json to {}", cli.command.name(), root.display());
    Ok(ok)
}

/// Parses `args`, runs the command and returns the process exit status:
/// 0 on success, 1 on usage or runtime errors, 2 on failed verification.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("{}: verification failed", cli.command.name());
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
