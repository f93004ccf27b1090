use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use poshs::agent::EpisodeLog;
use poshs::harness::output::{read_rows, write_report, write_rows};
use poshs::harness::{
    evaluate, pretrain_occupants, summarize, train, Condition, EpisodeRow, ExperimentConfig,
    Phase, TrainedAgent,
};
use poshs::occupant::HumanModel;
use poshs::records::{write_episode_log, AgentSnapshot};

#[derive(Parser)]
#[command(name = "poshs", about = "Occupant identification and comfort control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train the occupant models of every seed.
    Pretrain(Common),
    /// Train the smart home; reuses pre-trained occupants when present.
    Train(Common),
    /// Evaluate trained agents on test episodes.
    Eval(Common),
    /// Aggregate per-episode rows into summary and series files.
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Comma-separated seeds; overrides the config.
    #[arg(short, long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output root; overrides the config.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Experiment id; overrides the config.
    #[arg(short, long)]
    experiment: Option<String>,
    /// Also run every episode without the smart home (experiment B).
    #[arg(long)]
    control: bool,
}

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn occupants(&self, seed: u64) -> PathBuf {
        self.root.join("occupants").join(format!("seed{seed}"))
    }
    fn agent(&self, seed: u64) -> PathBuf {
        self.root.join("agents").join(format!("seed{seed}.json"))
    }
    fn log(&self, stage: &str, seed: u64) -> PathBuf {
        self.root.join("logs").join(format!("{stage}_seed{seed}.jsonl"))
    }
    fn rows(&self, stage: &str, seed: u64) -> PathBuf {
        self.root.join("rows").join(format!("{stage}_seed{seed}.csv"))
    }
}

fn load_config(args: &Common) -> Result<(ExperimentConfig, Layout)> {
    let mut config = ExperimentConfig::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(id) = &args.experiment {
        config.experiment_id = id.clone();
    }
    config.validate()?;
    let root = config.output_dir.join(&config.experiment_id);
    for dir in ["occupants", "agents", "logs", "rows"] {
        fs::create_dir_all(root.join(dir))?;
    }
    Ok((config, Layout { root }))
}

fn occupants_for(config: &ExperimentConfig, layout: &Layout, seed: u64) -> Result<Vec<HumanModel>> {
    let dir = layout.occupants(seed);
    let ids = config.occupant_ids();
    if ids.iter().all(|id| dir.join(format!("{id}.json")).exists()) {
        return ids
            .iter()
            .map(|id| {
                let path = dir.join(format!("{id}.json"));
                HumanModel::load(&path).with_context(|| format!("loading {}", path.display()))
            })
            .collect();
    }
    Ok(pretrain_occupants(config, seed)?)
}

/// Runs `job` for every seed on its own thread.
fn per_seed<F>(config: &ExperimentConfig, job: F) -> Result<()>
where
    F: Fn(u64) -> Result<()> + Sync,
{
    std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| {
                let job = &job;
                scope.spawn(move || job(seed).with_context(|| format!("seed {seed}")))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect::<Result<Vec<()>>>()
    })?;
    Ok(())
}

fn log_writer(
    experiment_id: &str,
    path: &Path,
) -> Result<impl FnMut(Phase, Condition, u32, &EpisodeLog) -> poshs::Result<()>> {
    let mut out = BufWriter::new(File::create(path)?);
    let id = experiment_id.to_owned();
    Ok(move |_: Phase, _: Condition, episode: u32, log: &EpisodeLog| {
        write_episode_log(&mut out, &id, episode, log)?;
        out.flush()?;
        Ok(())
    })
}

fn cmd_pretrain(args: &Common) -> Result<()> {
    let (config, layout) = load_config(args)?;
    per_seed(&config, |seed| {
        let dir = layout.occupants(seed);
        fs::create_dir_all(&dir)?;
        for model in pretrain_occupants(&config, seed)? {
            model.save(&dir.join(format!("{}.json", model.id)))?;
        }
        Ok(())
    })?;
    println!("pre-trained occupants written under {}", layout.root.join("occupants").display());
    Ok(())
}

fn cmd_train(args: &Common) -> Result<()> {
    let (config, layout) = load_config(args)?;
    per_seed(&config, |seed| {
        let occupants = occupants_for(&config, &layout, seed)?;
        let mut sink = log_writer(&config.experiment_id, &layout.log("train", seed))?;
        let (trained, rows) = train(&config, seed, &occupants, args.control, &mut sink)?;
        AgentSnapshot::capture(&trained.agent, &trained.labels).save(&layout.agent(seed))?;
        write_rows(&layout.rows("train", seed), &rows)?;
        Ok(())
    })?;
    println!("trained agents written under {}", layout.root.join("agents").display());
    Ok(())
}

fn cmd_eval(args: &Common) -> Result<()> {
    let (config, layout) = load_config(args)?;
    per_seed(&config, |seed| {
        let path = layout.agent(seed);
        if !path.exists() {
            bail!("no trained agent at {}; run `train` first", path.display());
        }
        let (agent, labels) = AgentSnapshot::load(&path)?.restore()?;
        let mut trained = TrainedAgent { agent, labels };
        let occupants = occupants_for(&config, &layout, seed)?;
        let mut sink = log_writer(&config.experiment_id, &layout.log("test", seed))?;
        let (mut rows, _) =
            evaluate(&config, seed, &occupants, &mut trained, Condition::Poshs, &mut sink)?;
        if args.control {
            rows.extend(
                evaluate(&config, seed, &occupants, &mut trained, Condition::NoShs, &mut sink)?.0,
            );
        }
        write_rows(&layout.rows("eval", seed), &rows)?;
        Ok(())
    })?;
    println!("evaluation rows written under {}", layout.root.join("rows").display());
    Ok(())
}

fn cmd_report(args: &Common) -> Result<()> {
    let (config, layout) = load_config(args)?;
    let mut rows: Vec<EpisodeRow> = Vec::new();
    for &seed in &config.seeds {
        for stage in ["train", "eval"] {
            let path = layout.rows(stage, seed);
            if path.exists() {
                rows.extend(read_rows(&path)?);
            }
        }
    }
    if rows.is_empty() {
        bail!("no episode rows under {}", layout.root.join("rows").display());
    }
    if let Some(path) = &config.baseline_csv {
        let baseline = read_rows(path).with_context(|| format!("reading {}", path.display()))?;
        rows.extend(baseline.into_iter().filter(|r| r.condition == Condition::Baseline));
    }
    let report = summarize(&config, rows)?;
    for path in write_report(&layout.root, &report)? {
        println!("wrote {}", path.display());
    }
    println!(
        "accuracy {:.3}  f1 {:.3}  belief steps {:.1}",
        report.scores.mean_accuracy, report.scores.mean_f1, report.belief_steps.mean
    );
    for c in &report.conditions {
        println!(
            "{:<8} reward {:.2} ± {:.2}  th-steps {:.2} ± {:.2}",
            c.condition.name(),
            c.reward.mean,
            c.reward.std,
            c.th_steps.mean,
            c.th_steps.std
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Pretrain(a) => cmd_pretrain(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Report(a) => cmd_report(&a),
    }
}
