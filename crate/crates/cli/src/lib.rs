//! Library side of the `holeflow` binary: argument definitions, configuration
//! parsing, report emission and the subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod emit;
pub mod error;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use holeflow::cutoff::NormKind;
use holeflow::testfn::TestField;

use crate::commands::Outcome;
use crate::config::{parse_config, Command, DEFAULT_TOL};
use crate::error::CliError;

/// Environment variable that replaces the configured output directory.
pub const OUT_DIR_ENV: &str = "HOLEFLOW_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "holeflow-out";

#[derive(Debug, Parser)]
#[command(name = "holeflow", version, about = "Numerical experiments for compressible flow past a vanishing obstacle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// Output directory; beats HOLEFLOW_OUT_DIR and the config file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Evaluate the acceptance checks and exit with status 4 if any fails.
    #[arg(long, global = true)]
    pub check: bool,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// L^q norms of the logarithmic cutoff against closed forms.
    CutoffNorms {
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        eps: Vec<f64>,
        /// Outer/inner radius ratio; defaults to max(2, |ln eps|).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        q: Vec<f64>,
        /// grad_eta_tilde, x_hess_eta_tilde, grad_eta, x_grad_eta, x_hess_eta or eta.
        #[arg(long, default_value = "grad_eta_tilde")]
        kind: String,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Convergence of the corrected test functions as eps shrinks.
    TestfnRates {
        /// linear, quad or sine.
        #[arg(long)]
        phi: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long = "eps-list", value_delimiter = ',', num_args = 1.., required = true)]
        eps_list: Vec<f64>,
        #[arg(long = "half-width", default_value_t = 0.5)]
        half_width: f64,
    },
    /// Uniformity of the perforated-domain divergence inverse in eps.
    BogovskiiCheck {
        #[arg(long = "eps-list", value_delimiter = ',', num_args = 1.., required = true)]
        eps_list: Vec<f64>,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long = "half-width", default_value_t = 0.5)]
        half_width: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// One solver run: snapshots, monitors.csv and run.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep over hole radii against the hole-free reference.
    Homogenize {
        #[arg(long)]
        config: PathBuf,
    },
}

/// `--out`, then the environment variable, then the config file, then the
/// default.
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<String>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(e) = env.filter(|s| !s.is_empty()) {
        return PathBuf::from(e);
    }
    config.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let env = std::env::var(OUT_DIR_ENV).ok();
    let out_for = |cfg_dir: Option<&Path>| resolve_out_dir(cli.out.as_deref(), env.clone(), cfg_dir);
    match &cli.command {
        Sub::CutoffNorms { eps, alpha, q, kind, tol } => {
            let kind = NormKind::parse(kind).ok_or_else(|| CliError::config("--kind", format!("unknown norm kind {kind:?}")))?;
            commands::cutoff_norms(eps, *alpha, q, kind, *tol, &out_for(None))
        }
        Sub::TestfnRates { phi, p, q, eps_list, half_width } => {
            let field = TestField::parse(phi)
                .ok_or_else(|| CliError::config("--phi", format!("expected linear, quad or sine, got {phi:?}")))?;
            commands::testfn_rates(field, *p, *q, eps_list, *half_width, &out_for(None))
        }
        Sub::BogovskiiCheck { eps_list, p, q, n, half_width, tol } => {
            commands::bogovskii_check(eps_list, *p, *q, *n, *half_width, *tol, &out_for(None))
        }
        Sub::Solve { config } => {
            let cfg = parse_config(config)?;
            let Command::Solve(s) = &cfg.command else {
                return Err(CliError::config("sweep", "a [sweep] table belongs to `homogenize`, not `solve`"));
            };
            commands::solve(s, cfg.seed, &out_for(cfg.out_dir.as_deref()))
        }
        Sub::Homogenize { config } => {
            let cfg = parse_config(config)?;
            let Command::Homogenize(s) = &cfg.command else {
                return Err(CliError::config("sweep", "missing [sweep] table"));
            };
            commands::homogenize(s, cfg.seed, &out_for(cfg.out_dir.as_deref()))
        }
    }
}
