use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recprompt::config::RunConfig;
use recprompt::ingest::InputFormat;
use recprompt::pipeline::{self, ModelKind};
use recprompt::sample_gen::Task;
use recprompt::Result;

#[derive(Parser)]
#[command(name = "recprompt", version, about = "Prompt corpora and evaluation for LLM recommenders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Run settings shared by every stage. Flags override the config file.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON object with the same keys as these flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<String>,
    #[arg(long, global = true)]
    reviews: Option<PathBuf>,
    #[arg(long, global = true)]
    meta: Option<PathBuf>,
    /// amazon-review-jsonl or csv.
    #[arg(long, global = true)]
    format: Option<InputFormat>,
    #[arg(long, global = true)]
    snapshot: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    k_core: Option<usize>,
    #[arg(long, global = true)]
    window_size: Option<usize>,
    #[arg(long, global = true)]
    mask_ratio: Option<f64>,
    #[arg(long, global = true)]
    pool_size: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Comma-separated task names, or "all".
    #[arg(long, global = true)]
    tasks: Option<String>,
    #[arg(long, global = true)]
    k_max: Option<usize>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    l2: Option<f64>,
    #[arg(long, global = true)]
    bpr_epochs: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    c.$f = v;
                }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f.clone();
                }
            )*};
        }
        set!(dataset, format, out, seed, k_core, window_size, mask_ratio, pool_size, epochs, tasks, k_max, dim, learning_rate, l2, bpr_epochs);
        set_opt!(reviews, meta, snapshot, jobs);
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse, dedupe and k-core filter raw logs into a snapshot.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-out split, validation users and the display-ID table.
    Split {
        #[command(flatten)]
        common: Common,
    },
    /// Write corpus and truth files for the enabled tasks.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a reference model.
    Train {
        #[arg(long, default_value = "bpr-mf")]
        model: ModelKind,
        #[command(flatten)]
        common: Common,
    },
    /// Test-split predictions of a trained reference model.
    Predict {
        #[arg(long, default_value = "bpr-mf")]
        model: ModelKind,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions. Either name a reference model, or give explicit
    /// prediction and truth files with a task.
    Eval {
        #[arg(long, conflicts_with_all = ["pred", "truth"])]
        model: Option<ModelKind>,
        #[arg(long, requires_all = ["truth", "task"])]
        pred: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        task: Option<Task>,
        /// Report path for an explicit evaluation (default: next to the predictions).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Dataset statistics and per-task sample counts.
    Stats {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic review log with planted structure.
    Synth {
        /// standard, chain or clusters.
        #[arg(long, default_value = "standard")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
        #[arg(long, default_value = "synthetic")]
        name: String,
    },
    /// ingest, split, gen, then train, predict and eval each model.
    Pipeline {
        /// Comma-separated model names.
        #[arg(long, default_value = "popularity,markov,bpr-mf", value_delimiter = ',')]
        models: Vec<ModelKind>,
        #[command(flatten)]
        common: Common,
    },
}

fn with_pool<T>(cfg: &RunConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| recprompt::Error::Config(e.to_string()))?
            .install(f),
        None => f(),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { common } => {
            let cfg = common.resolve()?;
            let snap = with_pool(&cfg, || pipeline::cmd_ingest(&cfg))?;
            println!("{}: {}", snap.dataset, snap.stats);
        }
        Command::Split { common } => {
            let cfg = common.resolve()?;
            let (split, _) = with_pool(&cfg, || pipeline::cmd_split(&cfg))?;
            println!(
                "{} users, {} train interactions, {} validation users",
                split.n_users(),
                split.train_interactions(),
                split.valid_users.len()
            );
        }
        Command::Gen { common } => {
            let cfg = common.resolve()?;
            let report = with_pool(&cfg, || pipeline::cmd_gen(&cfg))?;
            for f in &report.files {
                println!("{:>9} {}", f.samples, f.path.display());
            }
        }
        Command::Train { model, common } => {
            let cfg = common.resolve()?;
            with_pool(&cfg, || pipeline::cmd_train(&cfg, model))?;
            println!("{}", cfg.model_path(model.name()).display());
        }
        Command::Predict { model, common } => {
            let cfg = common.resolve()?;
            for p in with_pool(&cfg, || pipeline::cmd_predict(&cfg, model))? {
                println!("{}", p.display());
            }
        }
        Command::Eval {
            model,
            pred,
            truth,
            task,
            report,
            common,
        } => {
            let cfg = common.resolve()?;
            let reports = match (pred, truth, task) {
                (Some(pred), Some(truth), Some(task)) => {
                    let report = report.unwrap_or_else(|| pred.with_extension("report.json"));
                    vec![pipeline::eval_files(&cfg, &pred, &truth, task, &report)?]
                }
                _ => pipeline::cmd_eval(&cfg, model.unwrap_or(ModelKind::BprMf))?,
            };
            for r in reports {
                println!("{r}");
            }
        }
        Command::Stats { common } => {
            let cfg = common.resolve()?;
            print!("{}", pipeline::cmd_stats(&cfg)?);
        }
        Command::Synth { preset, seed, dir, name } => {
            let (reviews, meta) = pipeline::cmd_synth(&preset, seed, &dir, &name)?;
            println!("{}\n{}", reviews.display(), meta.display());
        }
        Command::Pipeline { models, common } => {
            let cfg = common.resolve()?;
            for (kind, r) in with_pool(&cfg, || pipeline::run_pipeline(&cfg, &models))? {
                println!("[{}]\n{r}", kind.name());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
