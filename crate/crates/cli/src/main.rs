use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lgr2_core::eval::{eval_only, resolve_params, run, RunConfig, TranslatorBackend};
use lgr2_core::trainer::{Mode, TrainConfig};
use lgr2_core::translator::{CompletionClient, HttpLlmClient};
use lgr2_core::{EnvConfig, EnvKind, Error};

/// Train and evaluate language-guided hierarchical agents.
#[derive(Debug, Parser)]
#[command(name = "lgr2", version)]
struct Cli {
    /// Run config (TOML). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lgr2, lgr2_no_her, hier, hac or flat_l2r.
    #[arg(long)]
    mode: Option<Mode>,
    /// Train this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// maze, pick_place or bin.
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    instruction: Option<String>,
    /// Output directory for CSVs and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Translate the instruction with the language model endpoint in
    /// LGR2_LLM_URL (and optional LGR2_LLM_KEY).
    #[arg(long)]
    llm: bool,
    /// Evaluate this checkpoint without training.
    #[arg(long, value_name = "CHECKPOINT")]
    eval_only: Option<PathBuf>,
}

fn default_instruction(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::Maze => "navigate to the bottom right corner",
        EnvKind::PickPlace => "move block to (0.3, 0.6, 0.5)",
        EnvKind::Bin => "place the cuboid in the bin center",
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(TrainConfig::desk_scale(Mode::Lgr2), "lgr2-out"),
    };
    if let Some(mode) = cli.mode {
        cfg.train.mode = mode;
    }
    if let Some(seed) = cli.seed {
        cfg.train.seeds = vec![seed];
    }
    if let Some(kind) = cli.env {
        if kind != cfg.train.env.kind {
            cfg.train.env = match kind {
                EnvKind::Maze => EnvConfig::maze(0),
                k => EnvConfig::new(k),
            };
            if cli.instruction.is_none() {
                cfg.train.instruction = default_instruction(kind).to_string();
            }
        }
    }
    if let Some(text) = &cli.instruction {
        cfg.train.instruction = text.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.llm {
        cfg.translator_backend = TranslatorBackend::Llm;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Input(_) | Error::Validation(_) | Error::Grammar { .. } => 2,
        Error::Translation { .. } | Error::Transport(_) | Error::Template(_) => 3,
        Error::Training(_) => 4,
        Error::Checkpoint(_) => 5,
        _ => 1,
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = build_config(cli)?;
    for w in cfg.validate()? {
        eprintln!("warning: {w}");
    }
    let client = match cfg.translator_backend {
        TranslatorBackend::Llm => Some(HttpLlmClient::from_env()?),
        TranslatorBackend::Grammar => None,
    };
    let client = client.as_ref().map(|c| c as &dyn CompletionClient);

    if let Some(checkpoint) = &cli.eval_only {
        let params = resolve_params(&cfg, client)?;
        let seed = cfg.train.seeds[0];
        let report = eval_only(&cfg, &params, checkpoint, seed)?;
        println!(
            "mode={} seed={seed} episodes={} success_rate={} gradient_updates={}",
            cfg.train.mode, cfg.eval_episodes, report.success, report.gradient_steps
        );
        return Ok(());
    }

    let summary = run(&cfg, client)?;
    println!("reward_params={}", summary.params.to_json());
    for s in &summary.seeds {
        println!(
            "mode={} seed={} env_steps={} final_success={} best_success={}",
            cfg.train.mode,
            s.seed,
            s.env_steps,
            s.curve.last().map_or(0.0, |r| r.success),
            s.best_success()
        );
    }
    println!("terminal_success={}", summary.terminal_success);
    println!("wrote {}", cfg.out_dir.join("curves.csv").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Translation { raw, .. } = &e {
                eprintln!("rejected response:\n{raw}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
