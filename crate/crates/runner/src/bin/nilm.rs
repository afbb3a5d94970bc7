use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nilm_core::write_csv;
use nilm_runner::config::{ExperimentConfig, Mode};
use nilm_runner::data::load_dataset;
use nilm_runner::{emit_report, generate_synthetic, replay_log, run_automl, run_single, RunnerError, SyntheticHouseSpec};

#[derive(Parser)]
#[command(name = "nilm", about = "Energy disaggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resample and align a dataset CSV.
    Ingest {
        csv: PathBuf,
        #[arg(long, default_value_t = 60)]
        period: i64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic house from a spec file.
    Synth {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit and evaluate one model family.
    Run { config: PathBuf },
    /// Search families and hyperparameters.
    Automl { config: PathBuf },
    /// Tables and plots from a trial log.
    Report {
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_dataset(ds: &nilm_core::AlignedDataset, out: &Path) -> Result<(), RunnerError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| RunnerError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    let file = std::fs::File::create(out).map_err(|e| RunnerError::Runtime(format!("{}: {e}", out.display())))?;
    let mut channels = vec![ds.aggregate()];
    channels.extend(ds.appliances());
    Ok(write_csv(file, &channels)?)
}

fn load_config(path: &Path, mode: Mode) -> Result<ExperimentConfig, RunnerError> {
    let cfg = ExperimentConfig::load(path).map_err(|e| match e {
        RunnerError::Io { .. } => RunnerError::Config(e.to_string()),
        e => e,
    })?;
    if cfg.mode != mode {
        return Err(RunnerError::Config(format!("{} expects mode = {}", path.display(), match mode {
            Mode::Single => "single",
            Mode::Automl => "automl",
        })));
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Ingest { csv, period, out } => {
            if period <= 0 {
                return Err(RunnerError::Config("--period must be positive".into()));
            }
            let ds = load_dataset(&csv, period)?;
            let path = out.join("dataset.csv");
            write_dataset(&ds, &path)?;
            println!("{} samples x {} appliances -> {}", ds.len(), ds.appliances().len(), path.display());
        }
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| RunnerError::Config(format!("{}: {e}", spec.display())))?;
            let ds = generate_synthetic(&SyntheticHouseSpec::parse(&text)?)?;
            write_dataset(&ds, &out)?;
            println!("{} samples x {} appliances -> {}", ds.len(), ds.appliances().len(), out.display());
        }
        Command::Run { config } => {
            let cfg = load_config(&config, Mode::Single)?;
            let out = run_single(&cfg)?;
            println!("{}: test MAE {:.3} W, accuracy {:.4}", out.family, out.test.mae, out.test.accuracy);
        }
        Command::Automl { config } => {
            let cfg = load_config(&config, Mode::Automl)?;
            let out = run_automl(&cfg)?;
            let family = out.best.config.get("model").map(|v| v.to_string()).unwrap_or_default();
            println!(
                "best trial {} ({family}): val MAE {:.3} W, test MAE {:.3} W, accuracy {:.4}",
                out.best.id, out.best.loss, out.test.mae, out.test.accuracy
            );
        }
        Command::Report { log, out } => {
            let records = replay_log(&log)?;
            for p in emit_report(&records, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
