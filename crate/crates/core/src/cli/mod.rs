//! `mtower` command-line front end: subcommands write CSV tables and a JSON
//! manifest into the output directory.
//!
//! Exit codes: 0 on success, 1 on usage or runtime errors, 2 when a
//! verdict fails.

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;

use clap::{Parser, Subcommand};
use config::{observable_by_name, RunConfig};
use output::{Manifest, Outputs};
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "mtower", version, about = "Markov towers, twisted transfer operators and semiflow correlations")]
struct Cli {
    /// TOML file with run parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `mtower-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Model id, or a path to a `.toml` model description.
    #[arg(long, global = true)]
    model: Option<String>,
    /// `log2` of the grid cells per axis.
    #[arg(long, global = true)]
    res: Option<u32>,
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Comma-separated list of twist frequencies.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    b: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    sigma: Option<Vec<f64>>,
    #[arg(long, global = true)]
    n0: Option<usize>,
    #[arg(long, global = true)]
    nodes: Option<usize>,
    #[arg(long, global = true)]
    pairs: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    tmax: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Observable name (constant, height-cos, base-bump, base-cos, base-sin,
    /// odd-bump, coordinate, height-indicator).
    #[arg(long, global = true)]
    observable: Option<String>,
    /// Second observable; defaults to the first.
    #[arg(long, global = true)]
    observable_w: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// List the built-in models.
    Models,
    /// Build a Markov inducing scheme and check it.
    Induce,
    /// Generation ratios of the inducing construction.
    Ratios,
    /// Return-time tail table and fit.
    Tails,
    /// Leading eigendata of the transfer operator.
    Spectrum,
    /// Uniform non-integrability constant.
    Uni,
    /// Cancellation domination over random cone pairs.
    Cancel,
    /// L2 contraction along the cone iteration.
    Cone,
    /// Correlation function of the suspension semiflow.
    Correlate,
    /// Temporal distortion over random pairs.
    Distortion,
    /// UNI / cohomology / distortion cross-table.
    Consistency,
    /// Full acceptance suite.
    All {
        /// Skip the second run used for the determinism check.
        #[arg(long)]
        no_rerun: bool,
    },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Models => "models",
            Command::Induce => "induce",
            Command::Ratios => "ratios",
            Command::Tails => "tails",
            Command::Spectrum => "spectrum",
            Command::Uni => "uni",
            Command::Cancel => "cancel",
            Command::Cone => "cone",
            Command::Correlate => "correlate",
            Command::Distortion => "distortion",
            Command::Consistency => "consistency",
            Command::All { .. } => "all",
        }
    }
}

impl Cli {
    fn flags(&self) -> crate::Result<RunConfig> {
        let obs = |o: &Option<String>| o.as_deref().map(observable_by_name).transpose();
        Ok(RunConfig {
            model: self.model.clone(),
            res: self.res,
            nmax: self.nmax,
            b: self.b.clone(),
            sigma: self.sigma.clone(),
            n0: self.n0,
            nodes: self.nodes,
            pairs: self.pairs,
            steps: self.steps,
            samples: self.samples,
            tmax: self.tmax,
            dt: self.dt,
            observable: obs(&self.observable)?,
            observable_w: obs(&self.observable_w)?,
            models: self.models.clone(),
            degree: self.degree,
            tol: self.tol,
            constants: None,
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
        })
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli) -> crate::Result<i32> {
    let start = Instant::now();
    let flags = cli.flags()?;
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?.merge(flags),
        None => flags,
    };
    if let Some(n) = cfg.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    cfg.seed = Some(cfg.seed());
    cfg.out = Some(cfg.out_dir());
    let dir = cfg.out_dir();
    let mut out = Outputs::new(&dir)?;
    let mut man = Manifest::new(cli.command.name(), &cfg);
    match cli.command {
        Command::Models => commands::cmd_models(&mut out, &mut man)?,
        Command::Induce => commands::cmd_induce(&mut cfg, &mut out, &mut man)?,
        Command::Ratios => commands::cmd_ratios(&mut cfg, &mut out, &mut man)?,
        Command::Tails => commands::cmd_tails(&mut cfg, &mut out, &mut man)?,
        Command::Spectrum => commands::cmd_spectrum(&mut cfg, &mut out, &mut man)?,
        Command::Uni => commands::cmd_uni(&mut cfg, &mut out, &mut man)?,
        Command::Cancel => commands::cmd_cancel(&mut cfg, &mut out, &mut man)?,
        Command::Cone => commands::cmd_cone(&mut cfg, &mut out, &mut man)?,
        Command::Correlate => commands::cmd_correlate(&mut cfg, &mut out, &mut man)?,
        Command::Distortion => commands::cmd_distortion(&mut cfg, &mut out, &mut man)?,
        Command::Consistency => commands::cmd_consistency(&mut cfg, &mut out, &mut man)?,
        Command::All { no_rerun } => {
            let list = suite::run_suite(cfg.seed(), &mut out, !no_rerun)?;
            let (verdicts, details) = suite::summarize(&list);
            man.verdicts = verdicts;
            man.details = details;
        }
    }
    man.set_config(&cfg);
    man.outputs = out.files.clone();
    man.exit_code = if man.all_pass() { 0 } else { 2 };
    man.elapsed_seconds = start.elapsed().as_secs_f64();
    man.write(&dir)?;
    for (k, v) in &man.verdicts {
        println!("{k}: {}", if *v { "pass" } else { "FAIL" });
    }
    println!("wrote {} files and manifest.json to {}", out.files.len(), dir.display());
    Ok(man.exit_code)
}
