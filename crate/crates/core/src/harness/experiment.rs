use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{mean_std, score, ConfusionMatrix, MeanStd, Scores};
use crate::agent::{run_episode, EpisodeLog, PoshsAgent, ShsMode};
use crate::env::{SmartHome, ACTIVITIES};
use crate::error::{Error, Result};
use crate::occupant::{ComfortParams, HumanModel, PRETRAIN_SEGMENT_STEPS};

/// Belief mass the true occupant must reach to count as converged.
pub const CONVERGENCE_BELIEF: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Poshs,
    NoShs,
    Baseline,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Poshs => "poshs",
            Condition::NoShs => "no_shs",
            Condition::Baseline => "baseline",
        }
    }
}

/// One row of the per-episode CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub experiment_id: String,
    pub seed: u64,
    pub phase: Phase,
    pub condition: Condition,
    pub episode: u32,
    pub occupant: String,
    /// Label of the matched pool entry; empty when the episode created a new entry.
    pub predicted: Option<String>,
    pub correct: bool,
    pub is_new: bool,
    pub pool_size: usize,
    pub reward: f64,
    /// TH-changing occupant actions per activity segment.
    pub th_steps: f64,
    pub steps: u32,
    pub valid_samples: u32,
    /// First time-step at which the true occupant's belief reached the
    /// convergence level, or the episode length if it never did.
    pub belief_steps: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub episode: u32,
    pub occupant: String,
    pub belief: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub reward: MeanStd,
    pub th_steps: MeanStd,
}

/// Plot-ready per-episode series, averaged over seeds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub training_accuracy: Vec<f64>,
    pub training_reward: BTreeMap<String, Vec<f64>>,
    pub training_th_steps: BTreeMap<String, Vec<f64>>,
    pub belief_trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment_id: String,
    pub occupants: Vec<String>,
    pub seeds: Vec<u64>,
    pub confusion: ConfusionMatrix,
    pub scores: Scores,
    /// Mean per-model accuracy of each seed.
    pub seed_accuracy: Vec<f64>,
    pub belief_steps: MeanStd,
    pub conditions: Vec<ConditionSummary>,
    pub runtime_secs: f64,
    #[serde(skip)]
    pub rows: Vec<EpisodeRow>,
    #[serde(skip)]
    pub series: Series,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent sub-seed for one (stream, index) pair of a run seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ stream) ^ index)
}

const STREAM_PRETRAIN: u64 = 1;
const STREAM_SCHEDULE: u64 = 2;
const STREAM_ENV: u64 = 3;
const STREAM_POLICY: u64 = 4;

/// Occupants of the experiment, each pre-trained on its own seed stream.
pub fn pretrain_occupants(config: &ExperimentConfig, seed: u64) -> Result<Vec<HumanModel>> {
    config.occupants[..config.n_models]
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let model = HumanModel::new(
                spec.id.clone(),
                spec.met_indices,
                config.pmv_band,
                &config.env.grid,
                ComfortParams::default(),
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_PRETRAIN, k as u64));
            Ok(model.pretrain(config.pretrain_episodes, PRETRAIN_SEGMENT_STEPS, &mut rng))
        })
        .collect()
}

/// Trained agent together with the occupant that created each pool entry.
#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub agent: PoshsAgent,
    pub labels: Vec<Option<String>>,
}

impl TrainedAgent {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            agent: PoshsAgent::new(config.policy, config.jsd(), config.profile_variant)?,
            labels: Vec::new(),
        })
    }

    /// Belief mass on entries created by `occupant`.
    fn mass_on(&self, belief: &[f64], occupant: &str) -> f64 {
        belief
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.as_deref() == Some(occupant))
            .map(|(b, _)| b)
            .sum()
    }
}

fn home(config: &ExperimentConfig, occupants: &[HumanModel]) -> Result<SmartHome> {
    let mut env = SmartHome::new(config.env.clone())?;
    for o in occupants {
        env.register(&o.id);
    }
    Ok(env)
}

/// Turns a finished episode into a CSV row and labels any new pool entry.
fn record_episode(
    config: &ExperimentConfig,
    seed: u64,
    phase: Phase,
    condition: Condition,
    episode: u32,
    log: &EpisodeLog,
    trained: &mut TrainedAgent,
) -> (EpisodeRow, Vec<f64>) {
    let mut trajectory = Vec::with_capacity(log.steps.len());
    let mut belief_steps = None;
    for s in &log.steps {
        let m = if s.belief.is_empty() {
            0.0
        } else {
            trained.mass_on(&s.belief, &log.occupant)
        };
        trajectory.push(m);
        if belief_steps.is_none() && m >= CONVERGENCE_BELIEF {
            belief_steps = Some(s.t + 1);
        }
    }
    let (predicted, is_new) = match &log.identification {
        Some(id) if id.is_new => {
            trained.labels.push(Some(log.occupant.clone()));
            (None, true)
        }
        Some(id) => (trained.labels[id.id].clone(), false),
        None => (None, false),
    };
    let row = EpisodeRow {
        experiment_id: config.experiment_id.clone(),
        seed,
        phase,
        condition,
        episode,
        occupant: log.occupant.clone(),
        correct: predicted.as_deref() == Some(log.occupant.as_str()),
        predicted,
        is_new,
        pool_size: log.pool_size,
        reward: log.total_reward(),
        th_steps: log.human_moves() as f64 / ACTIVITIES as f64,
        steps: log.steps.len() as u32,
        valid_samples: log.valid_samples() as u32,
        belief_steps: belief_steps.unwrap_or(log.steps.len() as u32),
        converged: belief_steps.is_some(),
    };
    (row, trajectory)
}

/// Occupant index for every training episode of a seed.
pub fn training_schedule(config: &ExperimentConfig, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SCHEDULE, 0));
    (0..config.train_episodes)
        .map(|_| rng.gen_range(0..config.n_models))
        .collect()
}

fn env_seed(seed: u64, phase: Phase, episode: u32) -> u64 {
    let offset = match phase {
        Phase::Train => 0,
        Phase::Test => 1 << 32,
    };
    derive_seed(seed, STREAM_ENV, offset + episode as u64)
}

/// Callback receiving every episode log as it is produced.
pub type LogSink<'a> = dyn FnMut(Phase, Condition, u32, &EpisodeLog) -> Result<()> + 'a;

/// Trains the agent on a uniformly random occupant per episode. With
/// `control` set, every training episode is also replayed without the home
/// under the same occupant and start state.
pub fn train(
    config: &ExperimentConfig,
    seed: u64,
    occupants: &[HumanModel],
    control: bool,
    sink: &mut LogSink<'_>,
) -> Result<(TrainedAgent, Vec<EpisodeRow>)> {
    let mut env = home(config, occupants)?;
    let mut trained = TrainedAgent::new(config)?;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_POLICY, 0));
    let mut rows = Vec::new();
    for (e, &k) in training_schedule(config, seed).iter().enumerate() {
        let e = e as u32;
        let s = env_seed(seed, Phase::Train, e);
        let eps = config.policy.epsilon(trained.agent.episodes);
        let log = run_episode(
            &mut env,
            &occupants[k],
            &mut trained.agent,
            s,
            eps,
            ShsMode::Poshs,
            &mut policy_rng,
        )?;
        sink(Phase::Train, Condition::Poshs, e, &log)?;
        rows.push(record_episode(config, seed, Phase::Train, Condition::Poshs, e, &log, &mut trained).0);
        if control {
            let log = run_episode(
                &mut env,
                &occupants[k],
                &mut trained.agent,
                s,
                0.0,
                ShsMode::Disabled,
                &mut policy_rng,
            )?;
            sink(Phase::Train, Condition::NoShs, e, &log)?;
            rows.push(record_episode(config, seed, Phase::Train, Condition::NoShs, e, &log, &mut trained).0);
        }
    }
    Ok((trained, rows))
}

/// Test episodes cycling through the occupants, at the exploration floor.
pub fn evaluate(
    config: &ExperimentConfig,
    seed: u64,
    occupants: &[HumanModel],
    trained: &mut TrainedAgent,
    condition: Condition,
    sink: &mut LogSink<'_>,
) -> Result<(Vec<EpisodeRow>, Vec<Trajectory>)> {
    let mode = match condition {
        Condition::Poshs => ShsMode::Poshs,
        Condition::NoShs => ShsMode::Disabled,
        Condition::Baseline => {
            return Err(Error::Config("the baseline condition is imported, not simulated".into()))
        }
    };
    let mut env = home(config, occupants)?;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_POLICY, 1));
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for e in 0..config.test_episodes {
        let occupant = &occupants[e as usize % occupants.len()];
        let log = run_episode(
            &mut env,
            occupant,
            &mut trained.agent,
            env_seed(seed, Phase::Test, e),
            config.policy.epsilon_min,
            mode,
            &mut policy_rng,
        )?;
        sink(Phase::Test, condition, e, &log)?;
        let (row, belief) = record_episode(config, seed, Phase::Test, condition, e, &log, trained);
        rows.push(row);
        if mode == ShsMode::Poshs {
            trajectories.push(Trajectory {
                seed,
                episode: e,
                occupant: occupant.id.clone(),
                belief,
            });
        }
    }
    Ok((rows, trajectories))
}

struct SeedRun {
    rows: Vec<EpisodeRow>,
    trajectories: Vec<Trajectory>,
}

fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    control: bool,
    sink: &mut LogSink<'_>,
) -> Result<SeedRun> {
    let occupants = pretrain_occupants(config, seed)?;
    let (mut trained, mut rows) = train(config, seed, &occupants, control, sink)?;
    let (test_rows, trajectories) =
        evaluate(config, seed, &occupants, &mut trained, Condition::Poshs, sink)?;
    rows.extend(test_rows);
    if control {
        let (control_rows, _) =
            evaluate(config, seed, &occupants, &mut trained, Condition::NoShs, sink)?;
        rows.extend(control_rows);
    }
    Ok(SeedRun { rows, trajectories })
}

fn run(config: &ExperimentConfig, control: bool) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let runs: Vec<Result<SeedRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .seeds
            .iter()
            .map(|&seed| scope.spawn(move || run_seed(config, seed, control, &mut |_, _, _, _| Ok(()))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for r in runs {
        let r = r?;
        rows.extend(r.rows);
        trajectories.extend(r.trajectories);
    }
    let mut report = summarize(config, rows)?;
    report.series.belief_trajectories = trajectories;
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Identification experiment: accuracy, F1 and belief convergence.
pub fn run_experiment_a(config: &ExperimentConfig) -> Result<RunReport> {
    run(config, false)
}

/// Comfort experiment: POSHS against no smart home, plus an imported
/// baseline when `baseline_csv` is set.
pub fn run_experiment_b(config: &ExperimentConfig) -> Result<RunReport> {
    let baseline = match &config.baseline_csv {
        Some(path) => {
            if !path.exists() {
                return Err(Error::MissingBaseline(path.display().to_string()));
            }
            let rows = super::output::read_rows(path)?;
            if !rows.iter().any(|r| r.condition == Condition::Baseline) {
                return Err(Error::MissingBaseline(format!(
                    "{} has no baseline rows",
                    path.display()
                )));
            }
            rows
        }
        None => Vec::new(),
    };
    let mut report = run(config, true)?;
    if !baseline.is_empty() {
        let series = std::mem::take(&mut report.series);
        let runtime = report.runtime_secs;
        let mut rows = std::mem::take(&mut report.rows);
        rows.extend(baseline.into_iter().filter(|r| r.condition == Condition::Baseline));
        report = summarize(config, rows)?;
        report.series.belief_trajectories = series.belief_trajectories;
        report.runtime_secs = runtime;
    }
    Ok(report)
}

/// Builds a report from per-episode rows alone.
pub fn summarize(config: &ExperimentConfig, rows: Vec<EpisodeRow>) -> Result<RunReport> {
    let occupants = config.occupant_ids();
    let index: BTreeMap<&str, usize> = occupants
        .iter()
        .enumerate()
        .map(|(i, o)| (o.as_str(), i))
        .collect();
    let class = |name: &str| -> Result<usize> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownOccupant(name.to_owned()))
    };

    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();

    let test_poshs = |r: &&EpisodeRow| r.phase == Phase::Test && r.condition == Condition::Poshs;
    let mut confusion = ConfusionMatrix::new(occupants.len());
    let mut seed_accuracy = Vec::new();
    for &seed in &seeds {
        let mut m = ConfusionMatrix::new(occupants.len());
        for r in rows.iter().filter(test_poshs).filter(|r| r.seed == seed) {
            let predicted = match &r.predicted {
                Some(p) => Some(class(p)?),
                None => None,
            };
            m.record(class(&r.occupant)?, predicted);
        }
        if m.total() > 0 {
            seed_accuracy.push(score(&m)?.mean_accuracy);
            confusion.add(&m);
        }
    }
    let scores = score(&confusion)?;
    let belief_steps: Vec<f64> = rows
        .iter()
        .filter(test_poshs)
        .map(|r| r.belief_steps as f64)
        .collect();

    let mut conditions = Vec::new();
    for c in [Condition::Poshs, Condition::NoShs, Condition::Baseline] {
        let test: Vec<&EpisodeRow> = rows
            .iter()
            .filter(|r| r.phase == Phase::Test && r.condition == c)
            .collect();
        if test.is_empty() {
            continue;
        }
        let reward: Vec<f64> = test.iter().map(|r| r.reward).collect();
        let th: Vec<f64> = test.iter().map(|r| r.th_steps).collect();
        conditions.push(ConditionSummary {
            condition: c,
            reward: mean_std(&reward),
            th_steps: mean_std(&th),
        });
    }

    let mut series = Series::default();
    let episodes = rows
        .iter()
        .filter(|r| r.phase == Phase::Train)
        .map(|r| r.episode + 1)
        .max()
        .unwrap_or(0) as usize;
    let per_episode = |c: Condition, f: &dyn Fn(&EpisodeRow) -> f64| -> Vec<f64> {
        let mut sum = vec![0.0; episodes];
        let mut n = vec![0usize; episodes];
        for r in rows.iter().filter(|r| r.phase == Phase::Train && r.condition == c) {
            sum[r.episode as usize] += f(r);
            n[r.episode as usize] += 1;
        }
        sum.iter()
            .zip(&n)
            .filter(|(_, &k)| k > 0)
            .map(|(s, &k)| s / k as f64)
            .collect()
    };
    series.training_accuracy = per_episode(Condition::Poshs, &|r| if r.correct { 1.0 } else { 0.0 });
    for c in [Condition::Poshs, Condition::NoShs] {
        let reward = per_episode(c, &|r| r.reward);
        if !reward.is_empty() {
            series.training_reward.insert(c.name().into(), reward);
            series
                .training_th_steps
                .insert(c.name().into(), per_episode(c, &|r| r.th_steps));
        }
    }

    Ok(RunReport {
        experiment_id: config.experiment_id.clone(),
        occupants,
        seeds,
        confusion,
        scores,
        seed_accuracy,
        belief_steps: mean_std(&belief_steps),
        conditions,
        runtime_secs: 0.0,
        rows,
        series,
    })
}

/// Runs one seed end to end, streaming every episode log to `sink`.
pub fn run_seed_logged(
    config: &ExperimentConfig,
    seed: u64,
    control: bool,
    sink: &mut LogSink<'_>,
) -> Result<Vec<EpisodeRow>> {
    config.validate()?;
    Ok(run_seed(config, seed, control, sink)?.rows)
}

impl RunReport {
    pub fn condition(&self, c: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|s| s.condition == c)
    }
}
