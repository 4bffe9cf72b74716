use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{RunConfig, TranslatorBackend};
use super::curves::{
    aggregate, terminal_success, write_curves, CurvePoint, CurveRow, METRICS_HEADER,
    STALENESS_HEADER,
};
use super::evaluate;
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::learner::{load_checkpoint, save_checkpoint};
use crate::trainer::{CycleMetrics, Staleness, Trainer};
use crate::translator::{
    parse_instruction, translate_via_llm, CompletionClient, PromptBundle, RewardParams,
};

/// Identifier stored in checkpoints so they only load into the same layout.
pub fn env_id(cfg: &EnvConfig) -> String {
    let size = match (cfg.maze_width, cfg.maze_height) {
        (Some(w), Some(h)) => format!(":{w}x{h}"),
        _ => String::new(),
    };
    format!("{}:layout{}{size}", cfg.kind, cfg.layout_seed)
}

/// Translates the configured instruction with the configured backend.
pub fn resolve_params(
    cfg: &RunConfig,
    client: Option<&dyn CompletionClient>,
) -> Result<RewardParams> {
    let env = Env::new(&cfg.train.env)?;
    match cfg.translator_backend {
        TranslatorBackend::Grammar => parse_instruction(&cfg.train.instruction, &env),
        TranslatorBackend::Llm => {
            let client =
                client.ok_or_else(|| Error::config("the llm backend needs a completion client"))?;
            let bundle = PromptBundle::builtin(env.kind());
            translate_via_llm(client, &bundle, &cfg.train.instruction, &env)
        }
    }
}

/// Everything one seed produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub curve: Vec<CurveRow>,
    /// `metrics.csv` body lines.
    pub metrics: Vec<String>,
    /// `staleness.csv` body lines.
    pub staleness: Vec<String>,
    pub env_steps: u64,
    pub diagnostic_steps: u64,
    pub gradient_steps: u64,
    pub checkpoint: PathBuf,
}

impl SeedResult {
    pub fn successes(&self) -> Vec<f64> {
        self.curve.iter().map(|r| r.success).collect()
    }

    pub fn best_success(&self) -> f64 {
        self.curve.iter().map(|r| r.success).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub params: RewardParams,
    pub seeds: Vec<SeedResult>,
    pub points: Vec<CurvePoint>,
    /// Mean over seeds of each seed's terminal success.
    pub terminal_success: f64,
}

fn checkpoint_path(cfg: &RunConfig, seed: u64, tag: &str) -> PathBuf {
    cfg.out_dir
        .join("checkpoints")
        .join(format!("{}-seed{seed}{tag}.ckpt", cfg.train.mode))
}

/// Writes through a temporary file so readers never see a partial checkpoint.
fn write_checkpoint(path: &Path, trainer: &Trainer) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        save_checkpoint(&mut w, &env_id(&trainer.config().env), &trainer.agents())?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metrics_line(
    cfg: &RunConfig,
    seed: u64,
    m: &CycleMetrics,
    eval: Option<f64>,
    stale: Option<&Staleness>,
) -> String {
    [
        cfg.train.mode.as_str().to_string(),
        seed.to_string(),
        m.cycle.to_string(),
        m.env_steps.to_string(),
        opt(eval),
        opt(m.lower.map(|l| l.critic)),
        opt(m.lower.map(|l| l.actor)),
        opt(m.higher.map(|l| l.critic)),
        opt(m.higher.map(|l| l.actor)),
        opt(stale.map(|s| s.vanilla)),
        m.lower_buffer.to_string(),
        m.higher_buffer.to_string(),
        m.hindsight_trajectories.to_string(),
    ]
    .join(",")
}

/// Seed of the evaluation episodes; fixed per training seed so every
/// evaluation point sees the same start states.
fn eval_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Trains one seed, evaluating and checkpointing every `eval_every` cycles
/// and after the last one. A non-finite loss dumps an `-abort` checkpoint.
pub fn run_seed(cfg: &RunConfig, params: &RewardParams, seed: u64) -> Result<SeedResult> {
    let mut trainer = Trainer::new(cfg.train.clone(), params.clone(), seed)?;
    let mut eval_env = trainer.env().clone();
    let checkpoint = checkpoint_path(cfg, seed, "");
    if let Some(dir) = checkpoint.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = SeedResult {
        seed,
        curve: Vec::new(),
        metrics: Vec::new(),
        staleness: Vec::new(),
        env_steps: 0,
        diagnostic_steps: 0,
        gradient_steps: 0,
        checkpoint: checkpoint.clone(),
    };
    while !trainer.finished() {
        let m = match trainer.run_cycle() {
            Ok(m) => m,
            Err(e @ Error::Training(_)) => {
                write_checkpoint(&checkpoint_path(cfg, seed, "-abort"), &trainer)?;
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        if m.cycle % cfg.eval_every == 0 || trainer.finished() {
            let success = {
                let mut controller = trainer.controller();
                evaluate(
                    &mut *controller,
                    &mut eval_env,
                    cfg.eval_episodes,
                    cfg.train.horizon,
                    eval_seed(seed),
                )?
            };
            let stale = trainer.staleness(cfg.staleness_samples)?;
            write_checkpoint(&checkpoint, &trainer)?;
            out.curve.push(CurveRow {
                mode: cfg.train.mode,
                seed,
                env_steps: m.env_steps,
                success,
            });
            out.staleness.push(
                [
                    cfg.train.mode.as_str().to_string(),
                    seed.to_string(),
                    m.cycle.to_string(),
                    m.env_steps.to_string(),
                    stale.samples.to_string(),
                    stale.vanilla.to_string(),
                    stale.relabeled.to_string(),
                    trainer.diagnostic_steps().to_string(),
                ]
                .join(","),
            );
            out.metrics
                .push(metrics_line(cfg, seed, &m, Some(success), Some(&stale)));
        } else {
            out.metrics.push(metrics_line(cfg, seed, &m, None, None));
        }
    }
    out.env_steps = trainer.env_steps();
    out.diagnostic_steps = trainer.diagnostic_steps();
    out.gradient_steps = trainer.gradient_steps();
    Ok(out)
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Trains every configured seed (in parallel, bounded by the available
/// cores) and writes `curves.csv`, `metrics.csv` and `staleness.csv` once
/// all seeds finish, rows ordered by seed then step.
pub fn run(cfg: &RunConfig, client: Option<&dyn CompletionClient>) -> Result<RunSummary> {
    cfg.validate()?;
    let params = resolve_params(cfg, client)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| {
        Error::config(format!(
            "output dir {} is not writable: {e}",
            cfg.out_dir.display()
        ))
    })?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results: Vec<Result<SeedResult>> = Vec::with_capacity(cfg.train.seeds.len());
    for chunk in cfg.train.seeds.chunks(workers) {
        let done: Vec<Result<SeedResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&seed| {
                    let params = &params;
                    scope.spawn(move || run_seed(cfg, params, seed))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Internal("seed worker panicked".into())))
                })
                .collect()
        });
        results.extend(done);
    }
    let mut seeds = results.into_iter().collect::<Result<Vec<_>>>()?;
    seeds.sort_by_key(|s| s.seed);

    let rows: Vec<CurveRow> = seeds.iter().flat_map(|s| s.curve.iter().cloned()).collect();
    let mut w = BufWriter::new(File::create(cfg.out_dir.join("curves.csv"))?);
    write_curves(&mut w, &rows)?;
    w.flush()?;
    write_lines(
        &cfg.out_dir.join("metrics.csv"),
        METRICS_HEADER,
        seeds.iter().flat_map(|s| s.metrics.iter().cloned()),
    )?;
    write_lines(
        &cfg.out_dir.join("staleness.csv"),
        STALENESS_HEADER,
        seeds.iter().flat_map(|s| s.staleness.iter().cloned()),
    )?;
    fs::write(
        cfg.out_dir.join("reward_params.json"),
        params.to_json() + "\n",
    )?;

    let terminal = seeds
        .iter()
        .map(|s| terminal_success(&s.successes(), cfg.terminal_window))
        .sum::<f64>()
        / seeds.len() as f64;
    Ok(RunSummary {
        params,
        points: aggregate(&rows),
        seeds,
        terminal_success: terminal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub success: f64,
    /// Gradient updates applied while evaluating; always zero.
    pub gradient_steps: u64,
}

/// Loads a checkpoint and evaluates it without any training.
pub fn eval_only(
    cfg: &RunConfig,
    params: &RewardParams,
    checkpoint: &Path,
    seed: u64,
) -> Result<EvalReport> {
    cfg.validate()?;
    let mut trainer = Trainer::new(cfg.train.clone(), params.clone(), seed)?;
    let file = File::open(checkpoint)
        .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", checkpoint.display())))?;
    load_checkpoint(
        std::io::BufReader::new(file),
        &env_id(&cfg.train.env),
        &mut trainer.agents_mut(),
    )?;
    let before = trainer.gradient_steps();
    let mut env = trainer.env().clone();
    let success = {
        let mut controller = trainer.controller();
        evaluate(
            &mut *controller,
            &mut env,
            cfg.eval_episodes,
            cfg.train.horizon,
            eval_seed(seed),
        )?
    };
    let updates = trainer.gradient_steps() - before;
    if updates != 0 {
        return Err(Error::Internal("evaluation changed the networks".into()));
    }
    Ok(EvalReport {
        success,
        gradient_steps: updates,
    })
}
