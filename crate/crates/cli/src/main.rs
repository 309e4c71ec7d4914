use std::process::ExitCode;

use clap::Parser;
use nelson_cli::commands::{self, Outcome};
use nelson_cli::config::RunConfig;
use nelson_cli::output::{ErrorRecord, RunContext};
use nelson_cli::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::load(cli.config.as_deref(), &cli.all_overrides(), cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nelson-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let mut ctx = match RunContext::prepare(&cfg, cli.command.name()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nelson-lab: cannot prepare output directory under {}: {e}", cfg.output.dir.display());
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Kernels => commands::kernels::run(&cfg, &mut ctx).map(|o| (o, None)),
        Command::Estimate(args) => commands::estimate::run(&cfg, args, &mut ctx).map(|o| (o, None)),
        Command::SweepG => commands::sweeps::run_g(&cfg, &mut ctx).map(|o| (o, None)),
        Command::SweepEps => commands::sweeps::run_eps(&cfg, &mut ctx).map(|o| (o, None)),
        Command::Gamma => commands::gamma::run(&cfg, &mut ctx).map(|o| (o, None)),
        Command::Fock { export_matrix } => commands::fock::run(&cfg, *export_matrix, &mut ctx).map(|o| (o, None)),
        Command::Verify => commands::verify::run(&cfg, &mut ctx),
    };
    let (code, error) = match result {
        Ok((Outcome::Success, err)) => (if err.is_some() { 2 } else { 0 }, err),
        Ok((Outcome::ChecksFailed, err)) => (if err.is_some() { 2 } else { 1 }, err),
        Err(e) => {
            eprintln!("nelson-lab: {e:#}");
            (
                2,
                Some(ErrorRecord {
                    kind: "error".into(),
                    message: format!("{e:#}"),
                }),
            )
        }
    };
    let dir = ctx.dir().to_path_buf();
    match ctx.finish(error) {
        Ok(_) => {
            if code == 1 {
                eprintln!("nelson-lab: some checks failed; see {}", dir.join("checks.csv").display());
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("nelson-lab: cannot write manifest: {e}");
            ExitCode::from(2)
        }
    }
}
