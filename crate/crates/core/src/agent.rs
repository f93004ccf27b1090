//! The smart-home control loop.
//!
//! Each known occupant owns a tabular Q-function. Actions are chosen
//! epsilon-greedily on the belief-weighted mixture of those tables. After
//! the episode the occupant is identified, the pool updated, and every table
//! replays the episode memory with its reward scaled by the belief held in
//! that occupant when the action was taken.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{self, BeliefVector};
use crate::env::{HumanAction, ObsKey, ShsAction, SmartHome, ThermalObservation};
use crate::error::{Error, Result};
use crate::identity::{self, Identification, JsdConfig, OccupantPool};
use crate::occupant::{comfort_reward, HumanModel, OccupantSession};
use crate::preference::{EpisodeEstimator, ProfileVariant};

/// Tabular action values; unseen pairs are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QTable(BTreeMap<ObsKey, [f64; ShsAction::COUNT]>);

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self, key: &ObsKey) -> [f64; ShsAction::COUNT] {
        self.0.get(key).copied().unwrap_or([0.0; ShsAction::COUNT])
    }

    pub fn get(&self, key: &ObsKey, action: ShsAction) -> f64 {
        self.values(key)[action.index()]
    }

    pub fn set(&mut self, key: ObsKey, action: ShsAction, value: f64) {
        self.0.entry(key).or_insert([0.0; ShsAction::COUNT])[action.index()] = value;
    }

    pub fn max(&self, key: &ObsKey) -> f64 {
        self.values(key)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObsKey, &[f64; ShsAction::COUNT])> {
        self.0.iter()
    }

    pub(crate) fn insert_row(&mut self, key: ObsKey, values: [f64; ShsAction::COUNT]) {
        self.0.insert(key, values);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub o_t: ThermalObservation,
    pub a_t: ShsAction,
    pub o_next: ThermalObservation,
    pub r_next: f64,
    pub b_t: Vec<f64>,
    pub valid_sample: bool,
    /// The episode ended on this transition; nothing is bootstrapped past it.
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            gamma: 0.98,
            epsilon_start: 1.0,
            epsilon_min: 0.005,
            epsilon_decay: 0.97,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1]".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return Err(Error::Config("need 0 < epsilon_min <= epsilon_start <= 1".into()));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(Error::Config("epsilon_decay must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Exploration rate for the given 0-based episode.
    pub fn epsilon(&self, episode: u32) -> f64 {
        (self.epsilon_start * self.epsilon_decay.powi(episode as i32)).max(self.epsilon_min)
    }
}

/// Belief-weighted action values `Σ_H b(H) Q_H(o, ·)`.
pub fn q_net(
    obs: &ThermalObservation,
    belief: &[f64],
    tables: &[&QTable],
) -> Result<[f64; ShsAction::COUNT]> {
    if belief.len() != tables.len() {
        return Err(Error::DimensionMismatch {
            expected: tables.len(),
            got: belief.len(),
        });
    }
    let key = obs.key();
    let mut out = [0.0; ShsAction::COUNT];
    for (b, table) in belief.iter().zip(tables) {
        let q = table.values(&key);
        for (o, v) in out.iter_mut().zip(q) {
            *o += b * v;
        }
    }
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy(values: &[f64; ShsAction::COUNT]) -> ShsAction {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    ShsAction::ALL[best]
}

/// Epsilon-greedy choice over the five smart-home actions.
pub fn select_action<R: Rng + ?Sized>(
    q_values: &[f64; ShsAction::COUNT],
    epsilon: f64,
    rng: &mut R,
) -> ShsAction {
    if rng.gen::<f64>() < epsilon {
        ShsAction::ALL[rng.gen_range(0..ShsAction::COUNT)]
    } else {
        greedy(q_values)
    }
}

/// Replays the episode memory into every occupant table.
///
/// `Q(o,a) <- (1-α) Q(o,a) + α [r b_t(H) + γ max_a' Q(o',a')]`. Only the
/// reward carries the belief weight. When `new_node` is set the last table
/// belongs to the occupant discovered by this episode: it is reset and the
/// episode is attributed to it in full.
pub fn update_q(
    tables: &mut [&mut QTable],
    memory: &[Transition],
    new_node: bool,
    config: &PolicyConfig,
) {
    let n = tables.len();
    for (h, table) in tables.iter_mut().enumerate() {
        let fresh = new_node && h + 1 == n;
        if fresh {
            **table = QTable::new();
        }
        for tr in memory {
            let weight = if fresh {
                1.0
            } else {
                tr.b_t.get(h).copied().unwrap_or(0.0)
            };
            let key = tr.o_t.key();
            let bootstrap = if tr.done { 0.0 } else { table.max(&tr.o_next.key()) };
            let old = table.get(&key, tr.a_t);
            let new = (1.0 - config.alpha) * old
                + config.alpha * (tr.r_next * weight + config.gamma * bootstrap);
            table.set(key, tr.a_t, new);
        }
    }
}

/// How the smart home participates in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShsMode {
    /// Belief tracking, control, identification and learning.
    Poshs,
    /// The home never acts; the occupant is on its own.
    Disabled,
}

/// Everything recorded about one time-step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    /// What the occupant saw before acting.
    pub obs: ThermalObservation,
    pub human_action: HumanAction,
    pub human_reward: f64,
    pub valid_sample: bool,
    /// What the home saw after the occupant acted; absent on the final step.
    pub shs_obs: Option<ThermalObservation>,
    pub shs_action: Option<ShsAction>,
    /// Belief after this step's update.
    pub belief: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub occupant: String,
    pub seed: u64,
    pub epsilon: f64,
    pub mode: ShsMode,
    /// Pool size when the episode started.
    pub pool_size: usize,
    pub steps: Vec<StepRecord>,
    pub memory: Vec<Transition>,
    pub identification: Option<Identification>,
}

impl EpisodeLog {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.human_reward).sum()
    }

    /// TH-changing occupant actions over the whole episode.
    pub fn human_moves(&self) -> usize {
        self.steps.iter().filter(|s| s.human_action.changes_th()).count()
    }

    pub fn valid_samples(&self) -> usize {
        self.steps.iter().filter(|s| s.valid_sample).count()
    }
}

/// Learned state of the smart home: the occupant pool and its settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PoshsAgent {
    pub pool: OccupantPool,
    pub policy: PolicyConfig,
    pub jsd: JsdConfig,
    pub variant: ProfileVariant,
    pub episodes: u32,
}

impl PoshsAgent {
    pub fn new(policy: PolicyConfig, jsd: JsdConfig, variant: ProfileVariant) -> Result<Self> {
        policy.validate()?;
        jsd.validate()?;
        Ok(Self {
            pool: OccupantPool::new(),
            policy,
            jsd,
            variant,
            episodes: 0,
        })
    }

    fn likelihoods(&self, obs: &ThermalObservation) -> Vec<f64> {
        self.pool
            .profiles()
            .map(|p| belief::likelihood(p, obs))
            .collect()
    }

    fn action_values(&self, obs: &ThermalObservation, belief: &[f64]) -> Result<[f64; ShsAction::COUNT]> {
        let tables: Vec<&QTable> = self.pool.entries().iter().map(|e| &e.q_table).collect();
        q_net(obs, belief, &tables)
    }

    /// Identification, pool maintenance and Q replay at the end of an episode.
    pub fn finish_episode(
        &mut self,
        estimator: &EpisodeEstimator,
        memory: &[Transition],
    ) -> Result<Identification> {
        let profile = estimator.finalize(self.variant)?;
        let id = identity::end_of_episode(&mut self.pool, &profile, &self.jsd)?;
        let mut tables: Vec<&mut QTable> = self
            .pool
            .entries_mut()
            .iter_mut()
            .map(|e| &mut e.q_table)
            .collect();
        update_q(&mut tables, memory, id.is_new, &self.policy);
        self.episodes += 1;
        Ok(id)
    }
}

/// Runs one full episode of the occupant with the smart home.
///
/// Within a time-step the occupant acts first. The home then sees the
/// result, updates its belief if the occupant left TH alone, and takes its
/// own action. A home transition is closed by the next occupant step, whose
/// comfort reward is the home's reward.
pub fn run_episode<R: Rng + ?Sized>(
    env: &mut SmartHome,
    occupant: &HumanModel,
    agent: &mut PoshsAgent,
    seed: u64,
    epsilon: f64,
    mode: ShsMode,
    rng: &mut R,
) -> Result<EpisodeLog> {
    let mut obs = env.reset(seed, &occupant.id)?;
    let pool_size = agent.pool.len();
    let mut belief = match (mode, pool_size) {
        (ShsMode::Poshs, n) if n > 0 => Some(BeliefVector::uniform(n)?),
        _ => None,
    };
    let mut session = OccupantSession::new();
    let mut estimator = EpisodeEstimator::new();
    let mut steps = Vec::new();
    let mut memory: Vec<Transition> = Vec::new();
    let mut pending: Option<(ThermalObservation, ShsAction, Vec<f64>, bool)> = None;
    let mut t = 0u32;

    loop {
        let requested = session.act(occupant, &obs);
        let step = env.apply_human(requested);
        let human_action = step.action;
        let reward = comfort_reward(&obs, human_action, occupant);
        let valid = crate::env::is_valid_sample(human_action);

        if let Some((o_t, a_t, b_t, valid_sample)) = pending.take() {
            memory.push(Transition {
                o_t,
                a_t,
                o_next: step.obs,
                r_next: reward,
                b_t,
                valid_sample,
                done: step.terminal,
            });
        }

        let mut record = StepRecord {
            t,
            obs,
            human_action,
            human_reward: reward,
            valid_sample: valid,
            shs_obs: None,
            shs_action: None,
            belief: Vec::new(),
        };

        if mode == ShsMode::Poshs {
            estimator.accumulate(&obs, human_action);
            if let Some(b) = belief.as_mut() {
                if valid {
                    let lik = agent.likelihoods(&obs);
                    *b = belief::update(b, &lik)?;
                }
                record.belief = b.probs().to_vec();
            }
        }

        if step.terminal {
            steps.push(record);
            break;
        }

        let o_t = step.obs;
        record.shs_obs = Some(o_t);
        let action = match mode {
            ShsMode::Disabled => ShsAction::NoOp,
            ShsMode::Poshs => {
                let values = match belief.as_ref() {
                    Some(b) => agent.action_values(&o_t, b.probs())?,
                    None => [0.0; ShsAction::COUNT],
                };
                select_action(&values, epsilon, rng)
            }
        };
        record.shs_action = Some(action);
        obs = env.apply_shs(action);
        if mode == ShsMode::Poshs {
            pending = Some((o_t, action, record.belief.clone(), valid));
        }
        steps.push(record);
        t += 1;
    }

    let identification = match mode {
        ShsMode::Poshs => Some(agent.finish_episode(&estimator, &memory)?),
        ShsMode::Disabled => None,
    };

    Ok(EpisodeLog {
        occupant: occupant.id.clone(),
        seed,
        epsilon,
        mode,
        pool_size,
        steps,
        memory,
        identification,
    })
}
