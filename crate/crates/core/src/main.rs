use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vibrissa::harness::{
    active_run, collect, dataset_dir, evaluate, load_dataset, replicate_all, Experiment,
    HarnessError, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "vibrissa",
    version,
    about = "Simulated whisker array experiments"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a protocol and write its dataset.
    Collect(Common),
    /// Monte Carlo cross validation of a collected dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Cross-validation samples.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Active and passive trials replayed from a collected dataset.
    ActiveRun {
        #[command(flatten)]
        common: Common,
        /// Decision threshold of the reported trajectories.
        #[arg(long, conflicts_with = "fixed_time")]
        theta: Option<f64>,
        /// Fixed decision time of the reported trajectories.
        #[arg(long)]
        fixed_time: Option<usize>,
    },
    /// Collect, evaluate and run every experiment with default configs.
    ReplicateAll {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip rendering and use ground-truth deflections.
        #[arg(long)]
        headless: bool,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys take experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// static_dab, dynamic_whisk or dynamic_whisk_calibrated.
    #[arg(long)]
    experiment: Option<Experiment>,
    /// Skip rendering and use ground-truth deflections.
    #[arg(long)]
    headless: bool,
}

impl Common {
    fn resolve(&self, edit: impl FnOnce(&mut RunConfig)) -> Result<RunConfig, HarnessError> {
        let fallback = self.experiment.unwrap_or(Experiment::DynamicWhisk);
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path, fallback)?,
            None => RunConfig::default_for(fallback),
        };
        if let Some(e) = self.experiment {
            if e != config.experiment() {
                return Err(HarnessError::Config(format!(
                    "--experiment {e} conflicts with config experiment {}",
                    config.experiment()
                )));
            }
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.headless {
            config.protocol.headless = true;
        }
        edit(&mut config);
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(HarnessError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Collect(common) => {
            let config = common.resolve(|_| {})?;
            let d = collect(&config, &common.out)?;
            println!(
                "{}: {} runs x {} locations written to {}",
                config.experiment(),
                d.manifest.runs,
                d.classes.len(),
                dataset_dir(&common.out, config.experiment()).display()
            );
        }
        Command::Evaluate { common, samples } => {
            let config = common.resolve(|c| {
                if let Some(n) = samples {
                    c.perception.samples = n;
                }
            })?;
            let d = load_dataset(&common.out, config.experiment())?;
            let r = evaluate(&d, &config, &common.out)?;
            println!(
                "{}: {} samples, IQR {} mm, mean |error| {} mm",
                config.experiment(),
                r.samples.len(),
                r.iqr_mm,
                r.mean_abs_error_mm
            );
        }
        Command::ActiveRun {
            common,
            theta,
            fixed_time,
        } => {
            let config = common.resolve(|c| {
                if let Some(t) = theta {
                    c.active.theta = t;
                    c.active.fixed_time = None;
                }
                if fixed_time.is_some() {
                    c.active.fixed_time = fixed_time;
                }
            })?;
            let d = load_dataset(&common.out, config.experiment())?;
            let a = active_run(&d, &config, &common.out)?;
            let s = &a.summary;
            println!(
                "{}: {}/{} trajectories end within one class of {} mm, mean {} contacts",
                config.experiment(),
                s.converged,
                s.trajectories,
                s.x_fix_mm,
                s.mean_decision_contacts
            );
        }
        Command::ReplicateAll {
            seed,
            out,
            headless,
        } => {
            let r = replicate_all(seed, &out, headless)?;
            for s in &r.report.experiments {
                println!(
                    "{}: IQR {} mm; {}/{} trajectories converged",
                    s.experiment, s.perception.iqr_mm, s.active.converged, s.active.trajectories
                );
            }
            println!("report written to {}", out.join("report.toml").display());
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
