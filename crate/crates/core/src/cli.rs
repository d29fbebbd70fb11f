//! Command-line surface. Exit codes: 0 success, 1 usage, 2 data or
//! validation, 3 numerical failure. Errors go to stderr as one JSON line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench;
use crate::boosting::{run_boosting, BoostingConfig};
use crate::error::{Error, Result};
use crate::io::{
    read_dataset, read_fit, read_simulation_config, read_table, read_truth, to_json,
    write_dataset, write_fit, ColumnRoles, FitDocument, TruthDocument, Versioned, SCHEMA_VERSION,
};
use crate::post_selection::inference::predict_hazard_ratio;
use crate::post_selection::stability::{DEFAULT_SUBSAMPLES, DEFAULT_THRESHOLD};
use crate::post_selection::{refit_inference, stability_selection, strata_summary};
use crate::simulate::{selection_metrics, simulate_survival_cox};
use crate::stopping::{StoppingRule, DEFAULT_ALPHA, DEFAULT_FOLDS, DEFAULT_ITERATIONS};

#[derive(Debug, Parser)]
#[command(name = "stratboost", version, about = "Boosting variable selection for stratified Cox models")]
pub struct Cli {
    /// Worker threads for cross validation, stability selection and the
    /// derivative scan.
    #[arg(long, global = true, env = "STRATBOOST_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a stratified survival dataset from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Output truth JSON.
        #[arg(long)]
        truth: PathBuf,
    },
    /// Fit the boosting model.
    Fit(FitArgs),
    /// Shorthand for `fit --stop cv`.
    Cv(FitArgs),
    /// Hazard ratios relative to the training covariate means.
    Predict {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refit the selected variables and report Wald inference.
    Inference {
        #[arg(long)]
        fit: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Selection frequencies over stratified half-subsamples.
    Stability {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        boost: BoostArgs,
        #[arg(long, default_value_t = DEFAULT_SUBSAMPLES)]
        subsamples: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Five-number summaries of survival time by a candidate strata variable.
    StrataSummary {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        var: String,
        #[arg(long, default_value = "time")]
        time: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity, specificity, FDR and SSE of a fit against a truth file.
    Metrics {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-iteration timing across doubled n and p.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000, 2000])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [250usize, 500, 1000])]
        p: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time: String,
    #[arg(long, default_value = "delta")]
    pub status: String,
    /// Stratum column; omit for a single stratum.
    #[arg(long)]
    pub strata: Option<String>,
    /// Comma-separated covariates; default is every other numeric column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
}

impl DataArgs {
    fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            time: self.time.clone(),
            status: self.status.clone(),
            stratum: self.strata.clone(),
            covariates: self.covariates.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopKind {
    Fixed,
    NumSelected,
    Likelihood,
    Bic,
    Ebic,
    Aic,
    Cv,
}

#[derive(Debug, Args)]
pub struct BoostArgs {
    #[arg(long, default_value_t = 0.01)]
    pub rate: f64,
    #[arg(long, value_enum, default_value_t = StopKind::Fixed)]
    pub stop: StopKind,
    /// Iterations for `--stop fixed`.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Number of variables for `--stop num-selected`.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    pub folds: usize,
    /// Iteration cap for every rule other than `fixed`.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl BoostArgs {
    pub fn config(&self) -> BoostingConfig {
        BoostingConfig::new(self.rate, self.max_iterations)
    }

    pub fn rule(&self) -> Result<StoppingRule> {
        Ok(match self.stop {
            StopKind::Fixed => StoppingRule::Fixed {
                iterations: self.iterations,
            },
            StopKind::NumSelected => StoppingRule::NumSelected {
                target: self.target.ok_or_else(|| {
                    Error::InvalidParameter("--stop num-selected requires --target".into())
                })?,
            },
            StopKind::Likelihood => StoppingRule::LikelihoodChange { alpha: self.alpha },
            StopKind::Bic => StoppingRule::Bic,
            StopKind::Ebic => StoppingRule::Ebic { gamma: self.gamma },
            StopKind::Aic => StoppingRule::Aic,
            StopKind::Cv => StoppingRule::CrossValidation {
                folds: self.folds,
                max_iterations: self.max_iterations,
                seed: self.seed,
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub boost: BoostArgs,
    /// Include per-iteration trace, selection counts and coefficient paths.
    #[arg(long)]
    pub trace: bool,
    /// Include the full coefficient vector.
    #[arg(long)]
    pub all_beta: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(doc: &T, out: Option<&Path>) -> Result<()> {
    emit(&to_json(doc)?, out)
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let rule = args.boost.rule()?;
    let data = read_dataset(&args.data.data, &args.data.roles())?;
    let fit = run_boosting(&data, &args.boost.config(), &rule)?;
    let doc = FitDocument::from_fit(&fit, &data, args.trace, args.all_beta);
    match &args.out {
        Some(path) => write_fit(&doc, path),
        None => emit_json(&doc, None),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            truth,
        } => {
            let cfg = read_simulation_config(&config)?;
            let sim = simulate_survival_cox(&cfg, seed)?;
            write_dataset(&sim.dataset, &out)?;
            let doc = TruthDocument {
                schema_version: SCHEMA_VERSION,
                variables: sim.dataset.names().to_vec(),
                true_beta: sim.truth,
                seed,
                n: sim.dataset.n(),
                censoring_rate: sim.censoring_rate,
                stratum_sizes: sim.stratum_sizes,
                config: cfg,
            };
            fs::write(&truth, to_json(&doc)?)?;
            Ok(())
        }
        Command::Fit(args) => run_fit(&args),
        Command::Cv(mut args) => {
            args.boost.stop = StopKind::Cv;
            run_fit(&args)
        }
        Command::Predict { fit, data, out } => {
            let doc = read_fit(&fit)?;
            let table = read_table(&data)?;
            let columns = doc
                .variables
                .iter()
                .map(|v| table.numeric_column(v))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
            let hr = predict_hazard_ratio(&doc.beta_vector(), &doc.covariate_means, &refs)?;
            let mut text = String::from("row,hazard_ratio\n");
            for (i, h) in hr.iter().enumerate() {
                text.push_str(&format!("{},{}\n", i + 1, h));
            }
            emit(&text, out.as_deref())
        }
        Command::Inference { fit, data, out } => {
            let doc = read_fit(&fit)?;
            let mut roles = data.roles();
            roles.covariates = Some(doc.variables.clone());
            let dataset = read_dataset(&data.data, &roles)?;
            let table = refit_inference(&dataset, &doc.selected())?;
            emit_json(&Versioned::new(table), out.as_deref())
        }
        Command::Stability {
            data,
            boost,
            subsamples,
            threshold,
            out,
        } => {
            let rule = boost.rule()?;
            let dataset = read_dataset(&data.data, &data.roles())?;
            let result = stability_selection(
                &dataset,
                &boost.config(),
                &rule,
                subsamples,
                threshold,
                boost.seed,
            )?;
            emit_json(&Versioned::new(result), out.as_deref())
        }
        Command::StrataSummary {
            data,
            var,
            time,
            out,
        } => {
            let table = read_table(&data)?;
            let summary = strata_summary(&table.column(&var)?, &table.numeric_column(&time)?)?;
            emit_json(&Versioned::new(summary), out.as_deref())
        }
        Command::Metrics { fit, truth, out } => {
            let doc = read_fit(&fit)?;
            let truth = read_truth(&truth)?;
            if doc.variables != truth.variables {
                return Err(Error::validation("fit and truth list different variables"));
            }
            let metrics = selection_metrics(&doc.beta_vector(), &truth.true_beta)?;
            emit_json(&Versioned::new(metrics), out.as_deref())
        }
        Command::Bench {
            n,
            p,
            iterations,
            repeats,
            seed,
            out,
        } => {
            if n.is_empty() || p.is_empty() || iterations == 0 {
                return Err(Error::InvalidParameter("bench needs sizes and iterations".into()));
            }
            let mut text = String::from("n,p,iterations,seconds_per_iteration\n");
            let base_p = p[0];
            let base_n = n[0];
            let mut sizes: Vec<(usize, usize)> = n.iter().map(|&n| (n, base_p)).collect();
            sizes.extend(p.iter().skip(1).map(|&p| (base_n, p)));
            for (n, p) in sizes {
                let data = bench::synthetic_dataset(n, p, seed)?;
                let t = bench::time_iterations(&data, iterations, repeats)?;
                text.push_str(&format!(
                    "{},{},{},{:.4e}\n",
                    t.n, t.p, t.iterations, t.seconds_per_iteration
                ));
            }
            emit(&text, out.as_deref())
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    code: i32,
    message: String,
}

fn report(kind: &str, code: i32, message: &str) -> i32 {
    let record = ErrorRecord {
        error: kind,
        code,
        message: message.split_whitespace().collect::<Vec<_>>().join(" "),
    };
    eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
    code
}

/// Parses `argv`, runs the command, and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => report("usage", 1, &e.to_string()),
            };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return report("usage", 1, "--threads must be at least 1");
        }
        // A global pool may already exist when called repeatedly in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => report(e.kind(), e.exit_code(), &e.to_string()),
    }
}
