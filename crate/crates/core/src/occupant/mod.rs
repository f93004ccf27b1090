//! Simulated occupants.
//!
//! An occupant is comfortable while `|PMV| <= pmv_band` for the metabolic
//! index of its current activity. On entering an activity, and whenever it
//! becomes uncomfortable, it adjusts TH with its learned Q-table until it
//! reaches its set-point (the centroid of its comfort band on the grid). It
//! tolerates in-band drift, and stops adjusting early if the home reverses
//! a move while TH is comfortable.
//! After `DWELL_STEPS` comfortable `Continue` steps in an activity it leaves.

pub mod comfort;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use comfort::{pmv, ComfortParams};

use crate::env::{HumanAction, ObsKey, ThermalGrid, ThermalObservation, ACTIVITIES};
use crate::error::{Error, Result};

/// Comfortable `Continue` steps per activity before the occupant leaves.
pub const DWELL_STEPS: u32 = 10;

/// Step budget of one pre-training activity segment.
pub const PRETRAIN_SEGMENT_STEPS: u32 = 400;

/// Cost of one TH-changing occupant action.
pub const MOVE_COST: f64 = 0.1;

/// Value of untried occupant actions.
const INITIAL_Q: f64 = 0.0;

/// Occupant file format version.
pub const MODEL_FILE_VERSION: u32 = 1;

/// Metabolic index sets of the five reference occupants.
pub const REFERENCE_MET_SETS: [(&str, [f64; 3]); 5] = [
    ("H_a", [1.0, 1.2, 1.4]),
    ("H_b", [1.15, 1.25, 1.45]),
    ("H_c", [1.15, 1.22, 1.35]),
    ("H_d", [1.15, 1.25, 1.4]),
    ("H_e", [1.05, 1.3, 1.45]),
];

/// Actions the occupant's Q-table chooses between while adjusting.
const ADJUST_ACTIONS: [HumanAction; 5] = [
    HumanAction::IncT,
    HumanAction::DecT,
    HumanAction::IncH,
    HumanAction::DecH,
    HumanAction::Continue,
];

/// Q-learning settings for occupant pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanLearning {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for HumanLearning {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            gamma: 0.95,
        }
    }
}

type HumanQ = BTreeMap<ObsKey, [f64; HumanAction::COUNT]>;

#[derive(Debug, Clone, PartialEq)]
pub struct HumanModel {
    pub id: String,
    pub met_indices: [f64; ACTIVITIES],
    pub pmv_band: f64,
    pub epsilon: f64,
    pub learning: HumanLearning,
    pub comfort: ComfortParams,
    grid: ThermalGrid,
    /// `in_band[activity][t * hum_points + h]`
    in_band: Vec<Vec<bool>>,
    set_points: [(u16, u16); ACTIVITIES],
    q_table: HumanQ,
    trained_episodes: u32,
}

fn validate_model(met: &[f64; ACTIVITIES], band: f64) -> Result<()> {
    if let Some(m) = met.iter().find(|m| !(0.8..=2.0).contains(*m)) {
        return Err(Error::InvalidModel(format!(
            "metabolic index {m} outside [0.8, 2.0]"
        )));
    }
    if band != 0.25 && band != 0.5 {
        return Err(Error::InvalidModel(format!(
            "pmv band {band} must be 0.25 or 0.5"
        )));
    }
    Ok(())
}

impl HumanModel {
    pub fn new(
        id: impl Into<String>,
        met_indices: [f64; ACTIVITIES],
        pmv_band: f64,
        grid: &ThermalGrid,
        comfort: ComfortParams,
    ) -> Result<Self> {
        validate_model(&met_indices, pmv_band)?;
        grid.validate()?;
        let id = id.into();
        let hp = grid.hum_points();
        let mut in_band = Vec::with_capacity(ACTIVITIES);
        let mut set_points = [(0u16, 0u16); ACTIVITIES];
        for (activity, &met) in met_indices.iter().enumerate() {
            let mut cells = vec![false; grid.temp_points() * hp];
            let mut abs_pmv = vec![f64::INFINITY; cells.len()];
            for t in 0..grid.temp_points() {
                for h in 0..hp {
                    let v = pmv(grid.temp_at(t), grid.hum_at(h), met, &comfort);
                    abs_pmv[t * hp + h] = v.abs();
                    cells[t * hp + h] = v.abs() <= pmv_band;
                }
            }
            set_points[activity] = band_set_point(grid, &cells, &abs_pmv).ok_or_else(|| {
                Error::InvalidModel(format!(
                    "{id}: no grid cell inside the comfort band for activity {activity}"
                ))
            })?;
            in_band.push(cells);
        }
        Ok(Self {
            id,
            met_indices,
            pmv_band,
            epsilon: 0.3,
            learning: HumanLearning::default(),
            comfort,
            grid: grid.clone(),
            in_band,
            set_points,
            q_table: BTreeMap::new(),
            trained_episodes: 0,
        })
    }

    /// One of the five reference occupants `H_a`..`H_e`.
    pub fn reference(id: &str, pmv_band: f64, grid: &ThermalGrid) -> Result<Self> {
        let (_, met) = REFERENCE_MET_SETS
            .iter()
            .find(|(name, _)| *name == id)
            .ok_or_else(|| Error::UnknownOccupant(id.to_owned()))?;
        Self::new(id, *met, pmv_band, grid, ComfortParams::default())
    }

    pub fn grid(&self) -> &ThermalGrid {
        &self.grid
    }

    pub fn trained_episodes(&self) -> u32 {
        self.trained_episodes
    }

    pub fn pmv(&self, obs: &ThermalObservation) -> f64 {
        pmv(
            obs.temp,
            obs.humidity,
            self.met_indices[obs.activity as usize],
            &self.comfort,
        )
    }

    pub fn in_band(&self, obs: &ThermalObservation) -> bool {
        let hp = self.grid.hum_points();
        self.in_band[obs.activity as usize][obs.temp_idx as usize * hp + obs.hum_idx as usize]
    }

    /// Grid cell the occupant settles on when it adjusts TH in `activity`.
    pub fn set_point(&self, activity: usize) -> ThermalObservation {
        let (t, h) = self.set_points[activity];
        self.grid.observation(activity, t as usize, h as usize)
    }

    pub fn q_values(&self, obs: &ThermalObservation) -> [f64; HumanAction::COUNT] {
        self.q_table
            .get(&obs.key())
            .copied()
            .unwrap_or([INITIAL_Q; HumanAction::COUNT])
    }

    /// Greedy adjusting action; ties go to the earliest action.
    pub fn greedy_adjust(&self, obs: &ThermalObservation) -> HumanAction {
        let q = self.q_values(obs);
        let mut best = ADJUST_ACTIONS[0];
        for &a in &ADJUST_ACTIONS[1..] {
            if q[a.index()] > q[best.index()] {
                best = a;
            }
        }
        best
    }

    /// Tabular Q-learning of the TH adjustment policy.
    ///
    /// Each activity segment starts from a random cell; the occupant pays
    /// `MOVE_COST` per step and is paid 1 for settling (`Continue`) on its
    /// set-point, which ends the segment. Updates are applied online, and
    /// after every episode each distinct transition seen so far is replayed
    /// once.
    pub fn pretrain<R: Rng>(mut self, episodes: u32, max_steps: u32, rng: &mut R) -> Self {
        let grid = self.grid.clone();
        let mut seen = BTreeSet::new();
        let mut replay = Vec::new();
        for _ in 0..episodes {
            for activity in 0..ACTIVITIES {
                let mut obs = grid.observation(
                    activity,
                    rng.gen_range(0..grid.temp_points()),
                    rng.gen_range(0..grid.hum_points()),
                );
                let goal = self.set_point(activity).key();
                for _ in 0..max_steps {
                    let action = if rng.gen::<f64>() < self.epsilon {
                        ADJUST_ACTIONS[rng.gen_range(0..ADJUST_ACTIONS.len())]
                    } else {
                        self.greedy_adjust(&obs)
                    };
                    let next = grid.shift(&obs, action.delta());
                    let settled = self.learn(&obs, action, &next, goal);
                    if seen.insert((obs.key(), action.index())) {
                        replay.push((obs, action, next, goal));
                    }
                    if settled {
                        break;
                    }
                    obs = next;
                }
            }
            for (o, a, n, goal) in replay.iter().rev() {
                self.learn(o, *a, n, *goal);
            }
            self.trained_episodes += 1;
        }
        self
    }

    /// One Q update; returns whether the step settled on the set-point.
    fn learn(
        &mut self,
        obs: &ThermalObservation,
        action: HumanAction,
        next: &ThermalObservation,
        goal: ObsKey,
    ) -> bool {
        let HumanLearning { alpha, gamma } = self.learning;
        let settled = action == HumanAction::Continue && obs.key() == goal;
        // Idling away from the set-point costs as much as moving, so long
        // walks are never worse than giving up.
        let reward = if settled { 1.0 } else { -MOVE_COST };
        let bootstrap = if settled {
            0.0
        } else {
            let nq = self.q_values(next);
            ADJUST_ACTIONS
                .iter()
                .map(|a| nq[a.index()])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let entry = self
            .q_table
            .entry(obs.key())
            .or_insert([INITIAL_Q; HumanAction::COUNT]);
        let q = &mut entry[action.index()];
        *q = (1.0 - alpha) * *q + alpha * (reward + gamma * bootstrap);
        settled
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = HumanModelFile::from(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HumanModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&HumanModelFile::from(self))?)
    }
}

/// Nearest in-band cell to the band centroid, measured in grid steps.
fn band_set_point(grid: &ThermalGrid, cells: &[bool], abs_pmv: &[f64]) -> Option<(u16, u16)> {
    let hp = grid.hum_points();
    let members: Vec<(usize, usize)> = (0..grid.temp_points())
        .flat_map(|t| (0..hp).map(move |h| (t, h)))
        .filter(|&(t, h)| cells[t * hp + h])
        .collect();
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    let ct = members.iter().map(|&(t, _)| t as f64).sum::<f64>() / n;
    let ch = members.iter().map(|&(_, h)| h as f64).sum::<f64>() / n;
    members
        .into_iter()
        .min_by(|&(t1, h1), &(t2, h2)| {
            let d1 = (t1 as f64 - ct).powi(2) + (h1 as f64 - ch).powi(2);
            let d2 = (t2 as f64 - ct).powi(2) + (h2 as f64 - ch).powi(2);
            d1.total_cmp(&d2)
                .then(abs_pmv[t1 * hp + h1].total_cmp(&abs_pmv[t2 * hp + h2]))
        })
        .map(|(t, h)| (t as u16, h as u16))
}

/// Occupant reward for one step: 1 while comfortable, minus the cost of a TH change.
pub fn comfort_reward(obs: &ThermalObservation, action: HumanAction, model: &HumanModel) -> f64 {
    let comfort = if model.in_band(obs) { 1.0 } else { 0.0 };
    let cost = if action.changes_th() { MOVE_COST } else { 0.0 };
    comfort - cost
}

/// Per-episode behavioural state of an occupant.
#[derive(Debug, Clone, Default)]
pub struct OccupantSession {
    activity: Option<u8>,
    in_band_steps: u32,
    adjusting: bool,
    /// Where the occupant stood before its last move.
    moved_from: Option<ObsKey>,
}

impl OccupantSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn in_band_steps(&self) -> u32 {
        self.in_band_steps
    }

    /// Next occupant action for `obs` (greedy, no exploration).
    pub fn act(&mut self, model: &HumanModel, obs: &ThermalObservation) -> HumanAction {
        if self.activity != Some(obs.activity) {
            *self = Self {
                activity: Some(obs.activity),
                adjusting: true,
                ..Self::default()
            };
        }
        let comfortable = model.in_band(obs);
        if !comfortable {
            self.adjusting = true;
        } else if self.moved_from == Some(obs.key()) {
            // The home undid the last move; settle for the comfortable cell.
            self.adjusting = false;
        }
        if self.adjusting {
            let action = model.greedy_adjust(obs);
            if action != HumanAction::Continue {
                self.moved_from = Some(obs.key());
                return action;
            }
            self.adjusting = false;
        }
        self.moved_from = None;
        if !comfortable {
            return HumanAction::Continue;
        }
        if self.in_band_steps >= DWELL_STEPS {
            return HumanAction::Leave;
        }
        self.in_band_steps += 1;
        HumanAction::Continue
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct QRow {
    activity: u8,
    temp_idx: u16,
    hum_idx: u16,
    values: [f64; HumanAction::COUNT],
}

/// Versioned on-disk occupant record.
#[derive(Debug, Serialize, Deserialize)]
struct HumanModelFile {
    version: u32,
    id: String,
    met_indices: [f64; ACTIVITIES],
    pmv_band: f64,
    epsilon: f64,
    learning: HumanLearning,
    comfort: ComfortParams,
    grid: ThermalGrid,
    trained_episodes: u32,
    q_table: Vec<QRow>,
}

impl From<&HumanModel> for HumanModelFile {
    fn from(m: &HumanModel) -> Self {
        Self {
            version: MODEL_FILE_VERSION,
            id: m.id.clone(),
            met_indices: m.met_indices,
            pmv_band: m.pmv_band,
            epsilon: m.epsilon,
            learning: m.learning,
            comfort: m.comfort,
            grid: m.grid.clone(),
            trained_episodes: m.trained_episodes,
            q_table: m
                .q_table
                .iter()
                .map(|(k, v)| QRow {
                    activity: k.activity,
                    temp_idx: k.temp_idx,
                    hum_idx: k.hum_idx,
                    values: *v,
                })
                .collect(),
        }
    }
}

impl HumanModelFile {
    fn into_model(self) -> Result<HumanModel> {
        if self.version != MODEL_FILE_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: MODEL_FILE_VERSION,
            });
        }
        if !(self.comfort.clo.is_finite()
            && self.comfort.clo >= 0.0
            && self.comfort.air_speed.is_finite()
            && self.comfort.air_speed >= 0.0)
        {
            return Err(Error::InvalidModel("comfort parameters out of range".into()));
        }
        if self.grid.temp_points() * self.grid.hum_points() > 1_000_000 {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        let mut model = HumanModel::new(
            self.id,
            self.met_indices,
            self.pmv_band,
            &self.grid,
            self.comfort,
        )?;
        model.epsilon = self.epsilon;
        model.learning = self.learning;
        model.trained_episodes = self.trained_episodes;
        for row in self.q_table {
            if row.activity as usize >= ACTIVITIES
                || row.temp_idx as usize >= self.grid.temp_points()
                || row.hum_idx as usize >= self.grid.hum_points()
            {
                return Err(Error::Record(format!(
                    "q-table cell ({}, {}, {}) outside the grid",
                    row.activity, row.temp_idx, row.hum_idx
                )));
            }
            if row.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Record("non-finite q value".into()));
            }
            model.q_table.insert(
                ObsKey {
                    activity: row.activity,
                    temp_idx: row.temp_idx,
                    hum_idx: row.hum_idx,
                },
                row.values,
            );
        }
        Ok(model)
    }
}
