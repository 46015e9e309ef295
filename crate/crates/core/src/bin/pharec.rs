use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pharec::config::PipelineConfig;
use pharec::io::{read_signal_csv, write_trials};
use pharec::pipeline::{self, Report};
use pharec::signal::{extract_phase_amplitude, to_trial};
use pharec::vf_reconstruction::TrialSet;
use pharec::Error;

#[derive(Parser)]
#[command(
    name = "pharec",
    version,
    about = "Phase-amplitude reduction and coupling reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config; defaults to <from>/config.json
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory holding upstream artifacts (defaults to the output directory)
    #[arg(long)]
    from: Option<PathBuf>,
    /// Overrides the trial and coupling-grid seeds
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    Simulate(Common),
    LimitCycle(Common),
    Transforms(Common),
    ReconstructVf(Common),
    ReduceCoupling(Common),
    Pipeline(Common),
    Compare(Common),
    /// Raw-signal CSV to a trial directory
    Extract {
        /// CSV with a t column and one column per channel
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::InvalidConfig { .. } | Error::UnknownKind(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<(), Error> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::invalid_config("--jobs", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid_config("--jobs", e.to_string()))?;
    }
    Ok(())
}

fn load(c: &Common) -> Result<(PipelineConfig, PathBuf, PathBuf), Error> {
    let mut cfg = match (&c.config, &c.from) {
        (Some(p), _) => PipelineConfig::load(p)?,
        (None, Some(d)) => pipeline::read_config(d)?,
        (None, None) => {
            return Err(Error::invalid_config(
                "--config",
                "a config file or --from directory is required",
            ))
        }
    };
    if let Some(s) = c.seed {
        cfg.set_seed(s);
    }
    let out = pipeline::output_dir(&cfg, c.out.as_deref());
    let from = c.from.clone().unwrap_or_else(|| out.clone());
    Ok((cfg, from, out))
}

fn print_report(r: &Report) {
    for row in &r.rows {
        let rel = match row.relation {
            pipeline::Relation::AtMost => "<=",
            pipeline::Relation::AtLeast => ">=",
        };
        println!(
            "{:<4} {:<44} {:>12.4e} {rel} {:.1e}",
            if row.pass { "ok" } else { "FAIL" },
            row.name,
            row.value,
            row.bound
        );
    }
    for n in &r.notes {
        println!("note: {n}");
    }
    println!("{}", if r.pass { "pass" } else { "FAIL" });
}

fn extract(input: &Path, out: &Path) -> Result<(), Error> {
    let signals = read_signal_csv(input)?;
    let channels = signals
        .iter()
        .map(extract_phase_amplitude)
        .collect::<Result<Vec<_>, _>>()?;
    let trial = to_trial(&channels)?;
    let set = TrialSet {
        n_oscillators: channels.len(),
        trials: vec![trial],
        metadata: format!("extracted:{}", input.display()),
    };
    let m = write_trials(out, &set, None, None)?;
    eprintln!(
        "wrote {} trial(s) for {} channel(s) to {}",
        m.files.len(),
        m.n_oscillators,
        out.display()
    );
    Ok(())
}

fn run(cmd: Command) -> Result<bool, Error> {
    let c = match &cmd {
        Command::Extract { input, out, jobs } => {
            set_jobs(*jobs)?;
            extract(input, out)?;
            return Ok(true);
        }
        Command::Simulate(c)
        | Command::LimitCycle(c)
        | Command::Transforms(c)
        | Command::ReconstructVf(c)
        | Command::ReduceCoupling(c)
        | Command::Pipeline(c)
        | Command::Compare(c) => c.clone(),
    };
    set_jobs(c.jobs)?;
    let (cfg, from, out) = load(&c)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    match cmd {
        Command::Simulate(_) => {
            let t = pipeline::run_simulate(&cfg, &from, &out)?;
            eprintln!(
                "wrote {} trials to {}",
                t.trials.len(),
                out.join(pipeline::TRIALS_DIR).display()
            );
        }
        Command::LimitCycle(_) => {
            pipeline::run_limit_cycle(&cfg, &from, &out)?;
        }
        Command::Transforms(_) => {
            pipeline::run_transforms(&cfg, &from, &out)?;
        }
        Command::ReconstructVf(_) => {
            pipeline::run_vf(&cfg, &from, &out)?;
        }
        Command::ReduceCoupling(_) => {
            pipeline::run_coupling(&cfg, &from, &out)?;
        }
        Command::Pipeline(_) => {
            let r = pipeline::run_pipeline(&cfg, &out)?;
            print_report(&r);
            return Ok(r.pass);
        }
        Command::Compare(_) => {
            let r = pipeline::run_compare(&cfg, &from, &out)?;
            print_report(&r);
            return Ok(r.pass);
        }
        Command::Extract { .. } => unreachable!(),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
