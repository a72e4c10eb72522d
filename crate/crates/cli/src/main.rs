use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vrpl_cli::config::RunConfig;
use vrpl_cli::{cmd_check, cmd_grid, cmd_run, CliError};

#[derive(Parser)]
#[command(name = "vrpl", version, about = "Variance-reduced prox-linear experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration, optionally over several seeds.
    Run(Common),
    /// Finite-difference and Lipschitz checks for the selected problem.
    Check(Common),
    /// Sweep the prox penalty M.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Comma-separated M values, e.g. 0.5,1,2.
        #[arg(long)]
        m_list: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable, e.g. --set algorithm=sarahpl.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Record wall-clock milliseconds in traces.
    #[arg(long)]
    timing: bool,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = common.stride {
        cfg.stride = v;
    }
    cfg.timing |= common.timing;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Run(c) => cmd_run(&load(&c)?, &mut out),
        Command::Check(c) => cmd_check(&load(&c)?, &mut out),
        Command::Grid { common, m_list } => {
            let mut cfg = load(&common)?;
            if let Some(list) = m_list {
                cfg.set("m_grid", &list)?;
            }
            cmd_grid(&cfg, &mut out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
