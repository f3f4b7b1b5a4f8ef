use aclk_cli::{run, Format, InitLocals, PromptSelector, RunConfig, RunMode, Witnesses};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Verify temporal-epistemic properties of access-control policies.
///
/// Exit status: 0 the property holds, 1 it fails, 2 usage or input error,
/// 3 a capacity limit was exceeded.
#[derive(Debug, Parser)]
#[command(name = "aclk", version)]
struct Args {
    /// Policy (`.acp`) or raw interpreted system (`.its`).
    #[arg(long)]
    policy: PathBuf,
    /// Query file holding `init : property`.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, value_enum, default_value = "cegar-auto")]
    mode: RunMode,
    /// Cap on reachable states of any explored system.
    #[arg(long, default_value_t = 1_000_000)]
    max_states: usize,
    /// Cap on ground and derived actions.
    #[arg(long, default_value_t = 100_000)]
    max_actions: usize,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Scripted answers for interactive refinement.
    #[arg(long)]
    select_from: Option<PathBuf>,
    /// Write the reachable concrete system in `.its` form to this file.
    #[arg(long)]
    dump_system: Option<PathBuf>,
    /// Include the refinement trace in text reports.
    #[arg(long)]
    trace: bool,
    /// Initial value of local copies an agent cannot read.
    #[arg(long, value_enum, default_value = "cleared")]
    local_init: InitLocals,
    /// How epistemic witnesses are concretized during checking.
    #[arg(long, value_enum, default_value = "single")]
    witness: Witnesses,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let cfg = RunConfig {
        policy: args.policy,
        query: args.query,
        mode: args.mode,
        max_states: args.max_states,
        max_actions: args.max_actions,
        format: args.format,
        select_from: args.select_from,
        dump_system: args.dump_system,
        trace: args.trace,
        local_init: args.local_init,
        witness: args.witness,
    };
    let stdin = std::io::stdin();
    let mut prompt = PromptSelector::new(stdin.lock(), std::io::stderr());
    match run(&cfg, Some(&mut prompt)) {
        Ok(rep) => {
            let text = rep.render(cfg.format);
            match &args.out {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, text) {
                        eprintln!("aclk: {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::from(rep.status() as u8)
        }
        Err(e) => {
            eprintln!("aclk: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}
