//! Batch command-line front end for the audit toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! non-convergence (the fit report is still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
    NonConvergence,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::NonConvergence => 3,
        }
    }
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

pub fn data<E: Into<anyhow::Error>>(err: E) -> CliError {
    CliError::Data(err.into())
}

#[derive(Parser)]
#[command(
    name = "biasaudit",
    about = "Dataset-bias audits for binary detectors: seeded interventions, nuisance scoring, and mixed-effects score models",
    version
)]
struct Cli {
    /// Bound worker threads for parallel per-file processing.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
struct CorpusArgs {
    /// Items per (class, split) cell.
    #[arg(long)]
    n_per_cell: Option<usize>,
    /// Item duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Spectral class separation in [0, 1].
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    speakers: Option<usize>,
    #[arg(long)]
    attacks: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
struct InterventionArgs {
    /// Transform: white_noise, mu_law, loudness_norm, nonspeech_zeroing,
    /// external_codec.
    #[arg(long)]
    kind: Option<String>,
    /// Lower edge of the uniform control interval.
    #[arg(long)]
    lo: Option<f64>,
    /// Upper edge of the uniform control interval.
    #[arg(long)]
    hi: Option<f64>,
    /// Discrete codec parameter set, comma separated.
    #[arg(long)]
    bitrates: Option<String>,
    /// Codec command template with {in}, {out}, {z} placeholders.
    #[arg(long)]
    codec_cmd: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a seeded intervention plan (or a test-side grid of plans) to a
    /// manifest and write the transformed dataset plus its receipt.
    Intervene {
        #[arg(long)]
        manifest: PathBuf,
        /// Named corner configuration (O, I, M_tr, M_te, IT_p, IT_n,
        /// IV_pn, IV_np, O_n, O_p).
        #[arg(long)]
        config: Option<String>,
        /// Explicit probabilities rho_train_neg,rho_train_pos,
        /// rho_test_neg,rho_test_pos.
        #[arg(long)]
        rho: Option<String>,
        /// Test-side probability axis (comma separated); builds the full
        /// grid against itself.
        #[arg(long)]
        grid: Option<String>,
        /// Training corner for grid mode: original, positive_only,
        /// negative_only.
        #[arg(long, default_value = "original")]
        train_corner: String,
        #[command(flatten)]
        intervention: InterventionArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Optional structured config file; flags override its values.
        #[arg(long)]
        config_file: Option<PathBuf>,
    },
    /// Extract a nuisance feature, train per-class mixtures on the training
    /// split, and score every evaluation item.
    Nuisance {
        #[arg(long)]
        manifest: PathBuf,
        /// Nuisance feature: snr or nonspeech.
        #[arg(long, default_value = "snr")]
        feature: String,
        /// Mixture components per class.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path for the per-item score file.
        #[arg(long)]
        scores: PathBuf,
        /// Optional output path for the Gaussian summary.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Fit a score model to a score file and write the fit report.
    Fit {
        #[arg(long)]
        scores: PathBuf,
        /// Model: interventional, observational, or asv.
        #[arg(long)]
        formula: String,
        /// Random factors: none, speaker, attack, or speaker,attack.
        /// Defaults to the formula's usual factors.
        #[arg(long)]
        random: Option<String>,
        /// Z-score the scores per (config, intervention) cell first.
        #[arg(long)]
        zscore: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Equal error rates over a score file, optionally grouped or pivoted
    /// into a partial-bias heatmap matrix.
    Eer {
        #[arg(long)]
        scores: PathBuf,
        /// Group rows by these columns before computing rates.
        #[arg(long)]
        group_by: Option<String>,
        /// Pivot rho_test_pos x rho_test_neg cells into a matrix.
        #[arg(long)]
        heatmap: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with a manifest.
    ToyGen {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config_file: Option<PathBuf>,
    },
    /// End-to-end demo: generate a corpus, run an intervention per
    /// configuration, train and score the built-in detector, and report
    /// rates plus the interventional fit.
    ToyRun {
        #[arg(long)]
        out: PathBuf,
        /// Configurations to run, comma separated.
        #[arg(long, default_value = "O,IT_p,IT_n,IV_pn,IV_np")]
        configs: String,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        intervention: InterventionArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config_file: Option<PathBuf>,
    },
    /// Build speaker-verification trials filtered by metadata flags.
    Trials {
        #[arg(long)]
        manifest: PathBuf,
        /// Target-trial flags as three bits RGC, e.g. 011.
        #[arg(long)]
        target_flags: String,
        /// Nontarget-trial flags as three bits RGC, e.g. 000.
        #[arg(long)]
        nontarget_flags: String,
        /// Cap on trials per class.
        #[arg(long)]
        max_trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(data)?;
    }
    match cli.command {
        Command::Intervene {
            manifest,
            config,
            rho,
            grid,
            train_corner,
            intervention,
            seed,
            out,
            config_file,
        } => commands::intervene::run(commands::intervene::Params {
            manifest,
            config,
            rho,
            grid,
            train_corner,
            intervention,
            seed,
            out,
            config_file,
        }),
        Command::Nuisance {
            manifest,
            feature,
            k,
            seed,
            scores,
            summary,
        } => commands::nuisance::run(&manifest, &feature, k, seed, &scores, summary.as_deref()),
        Command::Fit {
            scores,
            formula,
            random,
            zscore,
            out,
        } => commands::fit::run(&scores, &formula, random.as_deref(), zscore, &out),
        Command::Eer {
            scores,
            group_by,
            heatmap,
            out,
        } => commands::eer::run(&scores, group_by.as_deref(), heatmap, &out),
        Command::ToyGen {
            out,
            corpus,
            seed,
            config_file,
        } => commands::toy::run_gen(&out, &corpus, seed, config_file.as_deref()),
        Command::ToyRun {
            out,
            configs,
            corpus,
            intervention,
            seed,
            config_file,
        } => commands::toy::run_demo(
            &out,
            &configs,
            &corpus,
            &intervention,
            seed,
            config_file.as_deref(),
        ),
        Command::Trials {
            manifest,
            target_flags,
            nontarget_flags,
            max_trials,
            seed,
            out,
        } => commands::trials::run(
            &manifest,
            &target_flags,
            &nontarget_flags,
            max_trials,
            seed,
            &out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not usage errors.
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Usage(message) => eprintln!("usage error: {message}"),
                CliError::Data(inner) => eprintln!("error: {inner:#}"),
                CliError::NonConvergence => {
                    eprintln!("fit did not converge; report written with converged=0")
                }
            }
            ExitCode::from(err.code())
        }
    }
}
