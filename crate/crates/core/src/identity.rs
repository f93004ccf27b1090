//! End-of-episode occupant identification.
//!
//! The episode's preference profile is compared with every pooled profile by
//! the square-rooted Jensen-Shannon divergence of their grid-discretized
//! channel distributions. A divergence below `tau` identifies a known
//! occupant, whose profile is then moved toward the episode estimate;
//! otherwise the episode starts a new pool entry with a fresh Q-table.

use serde::{Deserialize, Serialize};

use crate::agent::QTable;
use crate::env::ThermalGrid;
use crate::error::{Error, Result};
use crate::preference::{merge, GaussianParams, PreferenceProfile, ProfileVariant, POOL_WEIGHT};

/// Default threshold for activity-specific profiles.
pub const TAU_12D: f64 = 0.20;
/// Default threshold for episode-level profiles.
pub const TAU_4D: f64 = 0.13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdConfig {
    pub tau: f64,
    pub amplification: f64,
    pub weights: (f64, f64),
    pub eval_grid: ThermalGrid,
}

impl JsdConfig {
    pub fn new(tau: f64, eval_grid: ThermalGrid) -> Result<Self> {
        let config = Self {
            tau,
            amplification: 1.0,
            weights: (0.5, 0.5),
            eval_grid,
        };
        config.validate()?;
        Ok(config)
    }

    /// Threshold default for the profile variant.
    pub fn for_variant(variant: ProfileVariant, eval_grid: ThermalGrid) -> Self {
        let tau = match variant {
            ProfileVariant::Activity12d => TAU_12D,
            ProfileVariant::Episode4d => TAU_4D,
        };
        Self {
            tau,
            amplification: 1.0,
            weights: (0.5, 0.5),
            eval_grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        let (w1, w2) = self.weights;
        if w1 < 0.0 || w2 < 0.0 || ((w1 + w2) - 1.0).abs() > 1e-12 {
            return Err(Error::Config("JSD weights must be non-negative and sum to 1".into()));
        }
        if !(self.amplification > 0.0) {
            return Err(Error::Config("amplification must be positive".into()));
        }
        self.eval_grid.validate()
    }
}

/// Gaussian evaluated on `support` and normalized to a probability vector.
pub fn discretize(params: &GaussianParams, support: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = support.iter().map(|&x| params.ln_pdf(x)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Square root of the weighted Jensen-Shannon divergence (natural log).
pub fn jsd_discrete(p: &[f64], q: &[f64], weights: (f64, f64)) -> f64 {
    let (w1, w2) = weights;
    let mix: Vec<f64> = p.iter().zip(q).map(|(a, b)| w1 * a + w2 * b).collect();
    let div = entropy(&mix) - (w1 * entropy(p) + w2 * entropy(q));
    div.max(0.0).sqrt()
}

/// Profile divergence: mean channel divergence times the amplification factor.
pub fn jsd(p: &PreferenceProfile, q: &PreferenceProfile, config: &JsdConfig) -> Result<f64> {
    if p.variant() != q.variant() {
        return Err(Error::VariantMismatch {
            left: p.variant().label(),
            right: q.variant().label(),
        });
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for ((_, channel, a), (_, _, b)) in p.channels().zip(q.channels()) {
        let support = config.eval_grid.channel_support(channel);
        let da = discretize(&a, &support);
        let db = discretize(&b, &support);
        total += jsd_discrete(&da, &db, config.weights);
        n += 1;
    }
    Ok(config.amplification * total / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub id: usize,
    pub profile: PreferenceProfile,
    pub q_table: QTable,
}

/// Growable registry of discovered occupants.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OccupantPool {
    entries: Vec<PoolEntry>,
}

impl OccupantPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [PoolEntry] {
        &mut self.entries
    }

    pub fn get(&self, id: usize) -> Option<&PoolEntry> {
        self.entries.get(id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &PreferenceProfile> {
        self.entries.iter().map(|e| &e.profile)
    }

    /// Appends a profile with an empty Q-table and returns its id.
    pub fn push(&mut self, profile: PreferenceProfile) -> usize {
        let id = self.entries.len();
        self.entries.push(PoolEntry {
            id,
            profile,
            q_table: QTable::new(),
        });
        id
    }

    pub(crate) fn from_entries(entries: Vec<PoolEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if e.id != i {
                return Err(Error::Record(format!("pool entry {i} has id {}", e.id)));
            }
        }
        if let Some(first) = entries.first() {
            let v = first.profile.variant();
            if let Some(bad) = entries.iter().find(|e| e.profile.variant() != v) {
                return Err(Error::VariantMismatch {
                    left: v.label(),
                    right: bad.profile.variant().label(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Pairwise profile divergences.
    pub fn divergence_matrix(&self, config: &JsdConfig) -> Result<Vec<Vec<f64>>> {
        self.entries
            .iter()
            .map(|a| {
                self.entries
                    .iter()
                    .map(|b| jsd(&a.profile, &b.profile, config))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MatchOutcome {
    Known { id: usize, divergence: f64 },
    New,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub outcome: MatchOutcome,
    pub divergences: Vec<f64>,
}

/// Closest pooled profile, or `New` when nothing is within `tau`.
pub fn match_profile(
    pool: &OccupantPool,
    episode: &PreferenceProfile,
    config: &JsdConfig,
) -> Result<MatchResult> {
    let divergences = pool
        .profiles()
        .map(|p| jsd(episode, p, config))
        .collect::<Result<Vec<f64>>>()?;
    let mut best: Option<usize> = None;
    for (i, d) in divergences.iter().enumerate() {
        if best.is_none_or(|b| *d < divergences[b]) {
            best = Some(i);
        }
    }
    let outcome = match best {
        Some(i) if divergences[i] < config.tau => MatchOutcome::Known {
            id: i,
            divergence: divergences[i],
        },
        _ => MatchOutcome::New,
    };
    Ok(MatchResult {
        outcome,
        divergences,
    })
}

/// Outcome of pool maintenance after an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub id: usize,
    pub is_new: bool,
    pub divergences: Vec<f64>,
}

/// Identify the episode's occupant and update the pool accordingly.
pub fn end_of_episode(
    pool: &mut OccupantPool,
    episode: &PreferenceProfile,
    config: &JsdConfig,
) -> Result<Identification> {
    let result = match_profile(pool, episode, config)?;
    match result.outcome {
        MatchOutcome::New => {
            let id = pool.push(episode.clone());
            Ok(Identification {
                id,
                is_new: true,
                divergences: result.divergences,
            })
        }
        MatchOutcome::Known { id, .. } => {
            let entry = &mut pool.entries[id];
            entry.profile = merge(&entry.profile, episode, POOL_WEIGHT)?;
            Ok(Identification {
                id,
                is_new: false,
                divergences: result.divergences,
            })
        }
    }
}
