use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bapla::pipeline::{run, Command, EvalSection, RunConfig};

/// Simulate, fit and test sparse networks of binary time series.
#[derive(Parser)]
#[command(name = "bapla", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a panel and its ground truth.
    Simulate(Common),
    /// Select the penalty and fit every series.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Fixed penalty instead of BIC selection.
        #[arg(long)]
        lambda: Option<f64>,
        /// Number of spline basis functions; 0 drops the trend.
        #[arg(long, visible_alias = "trend-basis")]
        m: Option<usize>,
    },
    /// Confidence intervals and the significance-filtered network.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Score estimates against the truth.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, visible_alias = "trend-basis")]
        m: Option<usize>,
    },
    /// Bin, align and filter recorded spikes into panels.
    Prep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(common: &Common) -> bapla::Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(t) = common.threads {
        config.threads = Some(t);
    }
    if let Some(o) = &common.out {
        config.out = o.clone();
    }
    Ok(config)
}

fn prepare(cmd: Cmd) -> bapla::Result<(Command, RunConfig)> {
    Ok(match cmd {
        Cmd::Simulate(c) => (Command::Simulate, load(&c)?),
        Cmd::Prep(c) => (Command::Prep, load(&c)?),
        Cmd::Fit { common, lambda, m } => {
            let mut config = load(&common)?;
            if let Some(fit) = config.fit.as_mut() {
                if lambda.is_some() {
                    fit.lambda = lambda;
                }
                if let Some(m) = m {
                    fit.m = m;
                }
            }
            (Command::Fit, config)
        }
        Cmd::Infer { common, alpha } => {
            let mut config = load(&common)?;
            if let (Some(infer), Some(a)) = (config.infer.as_mut(), alpha) {
                infer.alpha = a;
            }
            (Command::Infer, config)
        }
        Cmd::Eval {
            common,
            alpha,
            lambda,
            m,
        } => {
            let mut config = load(&common)?;
            if let Some(EvalSection::Scenarios {
                alpha: a,
                lambda: l,
                m: mm,
                ..
            }) = config.eval.as_mut()
            {
                if let Some(v) = alpha {
                    *a = v;
                }
                if lambda.is_some() {
                    *l = lambda;
                }
                if let Some(v) = m {
                    *mm = v;
                }
            }
            (Command::Eval, config)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = prepare(cli.command).and_then(|(cmd, config)| run(cmd, &config));
    match result {
        Ok(notes) => {
            for n in notes {
                eprintln!("{n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
