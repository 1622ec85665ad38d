mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Common, LevelArg, SkewModel, SourceArg};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
    CheckFailed(usize),
}

impl From<shotnoise::Error> for CliError {
    fn from(e: shotnoise::Error) -> Self {
        match e {
            shotnoise::Error::InvalidParameter(m) => CliError::Usage(m),
            other => CliError::Compute(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Compute(_) => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

fn set_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Compute(e.to_string()))?;
    }
    Ok(())
}

/// Applies `--config` and returns the value of a subcommand-specific key, if present.
fn prepare(common: &mut Common, key: &str) -> Result<Option<String>, CliError> {
    let mut extra = None;
    if let Some(path) = common.config.clone() {
        let cfg = args::read_config(&path)?;
        common.merge_config(&cfg, &[key])?;
        extra = cfg.get(key).cloned();
    }
    set_threads(common.threads)?;
    Ok(extra)
}

fn pick<T: clap::ValueEnum>(flag: Option<T>, config: Option<String>, key: &str) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    let s = config.ok_or_else(|| CliError::Usage(format!("--{key} is required")))?;
    T::from_str(&s, false).map_err(|e| CliError::Usage(format!("{key}: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bispectrum { source, mut common } => {
            let cfg = prepare(&mut common, "source")?;
            commands::bispectrum(pick::<SourceArg>(source, cfg, "source")?, &common)
        }
        Command::Skewness { model, mut common } => {
            let cfg = prepare(&mut common, "model")?;
            commands::skewness(pick::<SkewModel>(model, cfg, "model")?, &common)
        }
        Command::Spectroscopy { mut common } => {
            prepare(&mut common, "")?;
            commands::spectroscopy(&common)
        }
        Command::Check { level, mutation, threads } => {
            set_threads(threads)?;
            commands::check(level.into(), LevelArg::parse_mutation(&mutation)?)
        }
    }
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
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Compute(m) => eprintln!("computation failed: {m}"),
                CliError::CheckFailed(n) => eprintln!("{n} check(s) failed"),
            }
            ExitCode::from(e.code())
        }
    }
}
