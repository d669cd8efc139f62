//! `srnet <command> [--config <path>] [--seed N] [--out DIR]`
//!
//! Exit codes: 0 success, 2 config error, 3 numerical failure, 4 data
//! error. `SRNET_THREADS` caps worker-thread parallelism.

use clap::{Arg, Command as ClapCommand};
use srnet::commands::{lookup, RunContext, COMMANDS};
use srnet::config::load_config;
use srnet::CliError;
use std::path::PathBuf;

const DEFAULT_SEED: u64 = 42;

fn build_cli() -> ClapCommand {
    let mut cli = ClapCommand::new("srnet")
        .about("stable-rank constrained random network experiments")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for cmd in COMMANDS {
        cli = cli.subcommand(
            ClapCommand::new(cmd.name())
                .about(cmd.about())
                .arg(
                    Arg::new("config")
                        .long("config")
                        .value_name("PATH")
                        .help("JSON experiment config; defaults apply when omitted"),
                )
                .arg(
                    Arg::new("seed")
                        .long("seed")
                        .value_name("N")
                        .help("overrides the config seed"),
                )
                .arg(
                    Arg::new("out")
                        .long("out")
                        .value_name("DIR")
                        .help("output directory (default srnet-out/<command>)"),
                ),
        );
    }
    cli
}

fn run() -> Result<(), CliError> {
    let matches = build_cli()
        .try_get_matches()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let command = lookup(name).expect("registry covers every subcommand");

    let config = match sub.get_one::<String>("config") {
        Some(path) => {
            let cfg = load_config(std::path::Path::new(path))?;
            if cfg.experiment != name {
                return Err(CliError::Config(format!(
                    "config is for experiment '{}' but the '{name}' command was invoked",
                    cfg.experiment
                )));
            }
            Some(cfg)
        }
        None => None,
    };

    let seed = match sub.get_one::<String>("seed") {
        Some(s) => s
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("--seed must be an integer, got '{s}'")))?,
        None => config.as_ref().map(|c| c.seed).unwrap_or(DEFAULT_SEED),
    };
    let out_dir = sub
        .get_one::<String>("out")
        .map(PathBuf::from)
        .or_else(|| {
            config
                .as_ref()
                .and_then(|c| c.out_dir.as_ref().map(PathBuf::from))
        })
        .unwrap_or_else(|| PathBuf::from("srnet-out").join(name));
    let params = config
        .as_ref()
        .map(|c| c.params.clone())
        .unwrap_or(serde_json::Value::Null);

    let ctx = RunContext::new(seed, out_dir)?;
    command.run(&ctx, &params)
}

fn main() {
    if let Ok(threads) = std::env::var("SRNET_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
