use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tbpr::{ModelKind, SettingKind};
use tbpr_cli::config::parse_model_list;
use tbpr_cli::{
    recommend, run_experiment, CliError, ExitStatus, ExperimentConfig, Session, TrainOverrides,
};

#[derive(Parser)]
#[command(name = "tbpr", version, about = "Review-aware personalized ranking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the dataset statistics table.
    Stats(ConfigArgs),
    /// Compose and write item text features.
    Features(ConfigArgs),
    /// Train one model and write its checkpoint and training log.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
    },
    /// Evaluate the configured models on the test split.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// Restrict to one setting; all three by default.
        #[arg(long, value_parser = parse_setting)]
        setting: Option<SettingKind>,
    },
    /// Retrain at several factor counts.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated factor counts; replaces the configured list.
        #[arg(long, value_delimiter = ',')]
        factors: Vec<usize>,
    },
    /// Run every stage from scratch.
    Run(ConfigArgs),
    /// Print the top unobserved items for a user, one per line.
    Recommend {
        checkpoint: PathBuf,
        user: String,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Directory with the prepared dataset and features; defaults to
        /// the checkpoint's directory.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long)]
    latent_factors: Option<usize>,
    #[arg(long)]
    text_factors: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    cold_threshold: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    reg_latent: Option<f64>,
    #[arg(long)]
    reg_text: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_setting(s: &str) -> Result<SettingKind, String> {
    s.parse()
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if !self.models.is_empty() {
            cfg.models = parse_model_list(&self.models)?;
        }
        if let Some(f) = self.latent_factors {
            cfg.latent_factors = f;
        }
        if let Some(k) = self.text_factors {
            cfg.text_factors = Some(k);
        }
        if let Some(seed) = self.split_seed {
            cfg.split_seed = seed;
        }
        if let Some(t) = self.cold_threshold {
            cfg.cold_threshold = t;
        }
        cfg.override_train(&TrainOverrides {
            learning_rate: self.learning_rate,
            reg_latent: self.reg_latent,
            reg_text: self.reg_text,
            max_iterations: self.max_iterations,
            patience: self.patience,
            seed: self.seed,
            ..TrainOverrides::default()
        });
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Stats(args) => {
            let cfg = args.load()?;
            let mut session = Session::open(&cfg, true)?;
            let report = session.stats()?;
            println!("{}\n{}", tbpr::StatsReport::CSV_HEADER, report.csv_row(&cfg.dataset_name));
        }
        Command::Features(args) => {
            let cfg = args.load()?;
            let mut session = Session::open(&cfg, true)?;
            let f = session.features()?;
            println!("{} items x {} dims", f.item_count(), f.dim());
        }
        Command::Train { config, model } => {
            let mut cfg = config.load()?;
            if !cfg.models.contains(&model) {
                cfg.models.push(model);
                cfg.models.sort();
            }
            let mut session = Session::open(&cfg, true)?;
            session.model(model)?;
            println!("{}", session.layout().checkpoint(model).display());
        }
        Command::Eval { config, setting } => {
            let cfg = config.load()?;
            let mut session = Session::open(&cfg, true)?;
            let (settings, path) = match setting {
                Some(s) => (vec![s], session.layout().setting_report(s)),
                None => (SettingKind::ALL.to_vec(), session.layout().report()),
            };
            print!("{}", session.write_report(&settings, &path)?);
        }
        Command::Sweep { config, factors } => {
            let cfg = config.load()?;
            let factors = if factors.is_empty() { cfg.sweep.clone() } else { factors };
            let mut session = Session::open(&cfg, true)?;
            print!("{}", session.sweep(&factors)?);
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let artifacts = run_experiment(&cfg)?;
            print!("{}", std::fs::read_to_string(&artifacts.report).unwrap_or_default());
        }
        Command::Recommend {
            checkpoint,
            user,
            top,
            data_dir,
        } => {
            for item in recommend(&checkpoint, &user, top, data_dir.as_deref())? {
                println!("{item}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::Config as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
