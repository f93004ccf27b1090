//! Discretized smart-home environment.
//!
//! The state is the occupant's current activity plus a temperature/humidity
//! cell on a fixed grid. Within a time-step the occupant acts first and the
//! smart-home agent second. Every TH action is an instantaneous one-cell
//! move, clamped at the grid bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of activity segments in an episode.
pub const ACTIVITIES: usize = 3;

/// Temperature / humidity discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalGrid {
    pub temp_min: f64,
    pub temp_max: f64,
    pub temp_step: f64,
    pub hum_min: f64,
    pub hum_max: f64,
    pub hum_step: f64,
}

impl Default for ThermalGrid {
    fn default() -> Self {
        Self {
            temp_min: 15.0,
            temp_max: 30.0,
            temp_step: 0.5,
            hum_min: 20.0,
            hum_max: 70.0,
            hum_step: 5.0,
        }
    }
}

fn axis_points(min: f64, max: f64, step: f64, name: &str) -> Result<usize> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) || step <= 0.0 || max <= min {
        return Err(Error::InvalidGrid(format!(
            "{name} axis needs finite min < max and step > 0"
        )));
    }
    let intervals = (max - min) / step;
    let rounded = intervals.round();
    if (intervals - rounded).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "{name} step {step} does not divide [{min}, {max}]"
        )));
    }
    let points = rounded as usize + 1;
    if points < 10 {
        return Err(Error::InvalidGrid(format!(
            "{name} axis has {points} points, need at least 10"
        )));
    }
    Ok(points)
}

impl ThermalGrid {
    pub fn validate(&self) -> Result<()> {
        axis_points(self.temp_min, self.temp_max, self.temp_step, "temperature")?;
        axis_points(self.hum_min, self.hum_max, self.hum_step, "humidity")?;
        Ok(())
    }

    pub fn temp_points(&self) -> usize {
        ((self.temp_max - self.temp_min) / self.temp_step).round() as usize + 1
    }

    pub fn hum_points(&self) -> usize {
        ((self.hum_max - self.hum_min) / self.hum_step).round() as usize + 1
    }

    pub fn temp_at(&self, idx: usize) -> f64 {
        self.temp_min + idx as f64 * self.temp_step
    }

    pub fn hum_at(&self, idx: usize) -> f64 {
        self.hum_min + idx as f64 * self.hum_step
    }

    /// All temperature grid values, ascending.
    pub fn temps(&self) -> Vec<f64> {
        (0..self.temp_points()).map(|i| self.temp_at(i)).collect()
    }

    /// All humidity grid values, ascending.
    pub fn hums(&self) -> Vec<f64> {
        (0..self.hum_points()).map(|i| self.hum_at(i)).collect()
    }

    /// Grid values for a preference channel.
    pub fn channel_support(&self, channel: Channel) -> Vec<f64> {
        match channel {
            Channel::Temperature => self.temps(),
            Channel::Humidity => self.hums(),
        }
    }

    /// Index of the nearest temperature grid point.
    pub fn temp_index(&self, temp: f64) -> usize {
        let idx = ((temp - self.temp_min) / self.temp_step).round();
        idx.clamp(0.0, (self.temp_points() - 1) as f64) as usize
    }

    pub fn hum_index(&self, hum: f64) -> usize {
        let idx = ((hum - self.hum_min) / self.hum_step).round();
        idx.clamp(0.0, (self.hum_points() - 1) as f64) as usize
    }

    /// Observation at the given cell.
    pub fn observation(&self, activity: usize, temp_idx: usize, hum_idx: usize) -> ThermalObservation {
        let t = temp_idx.min(self.temp_points() - 1);
        let h = hum_idx.min(self.hum_points() - 1);
        ThermalObservation {
            activity: activity as u8,
            temp: self.temp_at(t),
            humidity: self.hum_at(h),
            temp_idx: t as u16,
            hum_idx: h as u16,
        }
    }

    /// True when the observation sits exactly on this grid.
    pub fn contains(&self, obs: &ThermalObservation) -> bool {
        (obs.activity as usize) < ACTIVITIES
            && (obs.temp_idx as usize) < self.temp_points()
            && (obs.hum_idx as usize) < self.hum_points()
            && obs.temp == self.temp_at(obs.temp_idx as usize)
            && obs.humidity == self.hum_at(obs.hum_idx as usize)
    }

    /// Move one cell in the direction of a TH delta, clamped at the bounds.
    pub fn shift(&self, obs: &ThermalObservation, delta: ThDelta) -> ThermalObservation {
        let t = obs.temp_idx as i64 + delta.temp as i64;
        let h = obs.hum_idx as i64 + delta.hum as i64;
        let t = t.clamp(0, self.temp_points() as i64 - 1) as usize;
        let h = h.clamp(0, self.hum_points() as i64 - 1) as usize;
        self.observation(obs.activity as usize, t, h)
    }
}

/// Preference channel of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Temperature,
    Humidity,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Temperature, Channel::Humidity];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Temperature => "temperature",
            Channel::Humidity => "humidity",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::Temperature => 0,
            Channel::Humidity => 1,
        }
    }

    pub fn value(self, obs: &ThermalObservation) -> f64 {
        match self {
            Channel::Temperature => obs.temp,
            Channel::Humidity => obs.humidity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Activity {
    pub id: u8,
    pub name: &'static str,
}

pub const ACTIVITY_SCHEDULE: [Activity; ACTIVITIES] = [
    Activity { id: 0, name: "resting" },
    Activity { id: 1, name: "household" },
    Activity { id: 2, name: "exercise" },
];

/// Full per-step percept: activity and the grid TH cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalObservation {
    pub activity: u8,
    pub temp: f64,
    pub humidity: f64,
    pub temp_idx: u16,
    pub hum_idx: u16,
}

impl ThermalObservation {
    pub fn key(&self) -> ObsKey {
        ObsKey {
            activity: self.activity,
            temp_idx: self.temp_idx,
            hum_idx: self.hum_idx,
        }
    }
}

/// Hashable, totally ordered identity of an observation cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsKey {
    pub activity: u8,
    pub temp_idx: u16,
    pub hum_idx: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThDelta {
    pub temp: i8,
    pub hum: i8,
}

impl ThDelta {
    const NONE: ThDelta = ThDelta { temp: 0, hum: 0 };
}

/// Smart-home actions. `NoOp` is index 0 so an untrained agent defaults to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShsAction {
    NoOp,
    IncT,
    DecT,
    IncH,
    DecH,
}

impl ShsAction {
    pub const COUNT: usize = 5;
    pub const ALL: [ShsAction; 5] = [
        ShsAction::NoOp,
        ShsAction::IncT,
        ShsAction::DecT,
        ShsAction::IncH,
        ShsAction::DecH,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn delta(self) -> ThDelta {
        match self {
            ShsAction::NoOp => ThDelta::NONE,
            ShsAction::IncT => ThDelta { temp: 1, hum: 0 },
            ShsAction::DecT => ThDelta { temp: -1, hum: 0 },
            ShsAction::IncH => ThDelta { temp: 0, hum: 1 },
            ShsAction::DecH => ThDelta { temp: 0, hum: -1 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HumanAction {
    IncT,
    DecT,
    IncH,
    DecH,
    Continue,
    Leave,
}

impl HumanAction {
    pub const COUNT: usize = 6;
    pub const ALL: [HumanAction; 6] = [
        HumanAction::IncT,
        HumanAction::DecT,
        HumanAction::IncH,
        HumanAction::DecH,
        HumanAction::Continue,
        HumanAction::Leave,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn delta(self) -> ThDelta {
        match self {
            HumanAction::IncT => ThDelta { temp: 1, hum: 0 },
            HumanAction::DecT => ThDelta { temp: -1, hum: 0 },
            HumanAction::IncH => ThDelta { temp: 0, hum: 1 },
            HumanAction::DecH => ThDelta { temp: 0, hum: -1 },
            HumanAction::Continue | HumanAction::Leave => ThDelta::NONE,
        }
    }

    /// Whether the action is an attempt to change TH.
    pub fn changes_th(self) -> bool {
        !matches!(self, HumanAction::Continue | HumanAction::Leave)
    }
}

/// Observations taken while the occupant leaves TH alone are preference samples.
pub fn is_valid_sample(action: HumanAction) -> bool {
    matches!(action, HumanAction::Continue | HumanAction::Leave)
}

/// Either actor's action, for replaying recorded traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvAction {
    Human(HumanAction),
    Shs(ShsAction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(default)]
    pub grid: ThermalGrid,
    #[serde(default = "default_max_steps")]
    pub max_steps_per_activity: u32,
}

fn default_max_steps() -> u32 {
    40
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            grid: ThermalGrid::default(),
            max_steps_per_activity: default_max_steps(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.max_steps_per_activity == 0 {
            return Err(Error::Config("max_steps_per_activity must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: EnvConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct EnvState {
    obs: ThermalObservation,
    segment_steps: u32,
    terminal: bool,
}

/// Result of an occupant move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanStep {
    /// Action actually applied; differs from the request only on a forced leave.
    pub action: HumanAction,
    pub obs: ThermalObservation,
    pub terminal: bool,
}

/// One smart home with a registry of occupants allowed to enter it.
#[derive(Debug, Clone)]
pub struct SmartHome {
    config: EnvConfig,
    occupants: Vec<String>,
    state: Option<EnvState>,
}

impl SmartHome {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            occupants: Vec::new(),
            state: None,
        })
    }

    pub fn register(&mut self, occupant_id: &str) {
        if !self.occupants.iter().any(|o| o == occupant_id) {
            self.occupants.push(occupant_id.to_owned());
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn grid(&self) -> &ThermalGrid {
        &self.config.grid
    }

    /// Start an episode at a seeded random TH cell in the first activity.
    pub fn reset(&mut self, seed: u64, occupant_id: &str) -> Result<ThermalObservation> {
        if !self.occupants.iter().any(|o| o == occupant_id) {
            return Err(Error::UnknownOccupant(occupant_id.to_owned()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = &self.config.grid;
        let t = rng.gen_range(0..grid.temp_points());
        let h = rng.gen_range(0..grid.hum_points());
        let obs = grid.observation(0, t, h);
        self.state = Some(EnvState {
            obs,
            segment_steps: 0,
            terminal: false,
        });
        Ok(obs)
    }

    fn state_mut(&mut self) -> &mut EnvState {
        self.state.as_mut().expect("environment used before reset")
    }

    pub fn observation(&self) -> ThermalObservation {
        self.state.as_ref().expect("environment used before reset").obs
    }

    pub fn is_terminal(&self) -> bool {
        self.state.as_ref().is_some_and(|s| s.terminal)
    }

    /// Steps the occupant has spent in the current activity.
    pub fn segment_steps(&self) -> u32 {
        self.state.as_ref().map_or(0, |s| s.segment_steps)
    }

    /// Apply an occupant action. The last step of an activity's budget is a forced leave.
    pub fn apply_human(&mut self, action: HumanAction) -> HumanStep {
        let max_steps = self.config.max_steps_per_activity;
        let grid = self.config.grid.clone();
        let state = self.state_mut();
        if state.terminal {
            return HumanStep {
                action,
                obs: state.obs,
                terminal: true,
            };
        }
        state.segment_steps += 1;
        let action = if state.segment_steps >= max_steps {
            HumanAction::Leave
        } else {
            action
        };
        match action {
            HumanAction::Leave => {
                let next = state.obs.activity as usize + 1;
                if next >= ACTIVITIES {
                    state.terminal = true;
                } else {
                    state.obs.activity = next as u8;
                    state.segment_steps = 0;
                }
            }
            HumanAction::Continue => {}
            moving => state.obs = grid.shift(&state.obs, moving.delta()),
        }
        HumanStep {
            action,
            obs: state.obs,
            terminal: state.terminal,
        }
    }

    pub fn apply_shs(&mut self, action: ShsAction) -> ThermalObservation {
        let grid = self.config.grid.clone();
        let state = self.state_mut();
        if !state.terminal {
            state.obs = grid.shift(&state.obs, action.delta());
        }
        state.obs
    }

    pub fn apply(&mut self, action: EnvAction) -> ThermalObservation {
        match action {
            EnvAction::Human(a) => self.apply_human(a).obs,
            EnvAction::Shs(a) => self.apply_shs(a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn home() -> SmartHome {
        let mut env = SmartHome::new(EnvConfig::default()).unwrap();
        env.register("H_a");
        env
    }

    #[test]
    fn default_grid_shape() {
        let g = ThermalGrid::default();
        g.validate().unwrap();
        assert_eq!(g.temp_points(), 31);
        assert_eq!(g.hum_points(), 11);
        assert_eq!(g.temp_at(30), 30.0);
        assert_eq!(g.hum_at(10), 70.0);
    }

    #[test]
    fn grid_rejects_non_dividing_step() {
        let g = ThermalGrid {
            temp_step: 0.7,
            ..ThermalGrid::default()
        };
        assert!(matches!(g.validate(), Err(Error::InvalidGrid(_))));
        let coarse = ThermalGrid {
            hum_step: 25.0,
            ..ThermalGrid::default()
        };
        assert!(coarse.validate().is_err());
    }

    #[test]
    fn reset_is_seeded() {
        let mut env = home();
        let a = env.reset(7, "H_a").unwrap();
        let b = env.reset(7, "H_a").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.activity, 0);
        assert_eq!(env.segment_steps(), 0);
        let starts: Vec<_> = (0..20).map(|s| env.reset(s, "H_a").unwrap()).collect();
        assert!(starts.iter().any(|o| *o != starts[0]));
        for o in starts {
            assert!((15.0..=30.0).contains(&o.temp));
            assert!(env.grid().contains(&o));
        }
    }

    #[test]
    fn reset_unknown_occupant() {
        let mut env = home();
        assert!(matches!(env.reset(1, "H_z"), Err(Error::UnknownOccupant(_))));
    }

    #[test]
    fn moves_clamp_at_bounds() {
        let mut env = home();
        env.reset(3, "H_a").unwrap();
        for _ in 0..40 {
            env.apply_shs(ShsAction::IncT);
        }
        let top = env.observation();
        assert_eq!(top.temp, 30.0);
        let after = env.apply_shs(ShsAction::IncT);
        assert_eq!(after, top);
        for _ in 0..20 {
            env.apply_shs(ShsAction::DecH);
        }
        assert_eq!(env.observation().humidity, 20.0);
    }

    #[test]
    fn continue_keeps_state_and_leave_advances() {
        let mut env = home();
        let start = env.reset(11, "H_a").unwrap();
        let step = env.apply_human(HumanAction::Continue);
        assert_eq!(step.obs, start);
        assert!(!step.terminal);
        let step = env.apply_human(HumanAction::Leave);
        assert_eq!(step.obs.activity, 1);
        assert_eq!(step.obs.temp, start.temp);
        env.apply_human(HumanAction::Leave);
        let last = env.apply_human(HumanAction::Leave);
        assert!(last.terminal);
        assert!(env.is_terminal());
    }

    #[test]
    fn step_budget_forces_leave() {
        let mut env = home();
        env.reset(5, "H_a").unwrap();
        let mut forced = None;
        for i in 1..=40 {
            let step = env.apply_human(HumanAction::Continue);
            if step.action == HumanAction::Leave {
                forced = Some(i);
                break;
            }
        }
        assert_eq!(forced, Some(40));
        assert_eq!(env.observation().activity, 1);
    }

    #[test]
    fn valid_samples() {
        assert!(is_valid_sample(HumanAction::Continue));
        assert!(is_valid_sample(HumanAction::Leave));
        assert!(!is_valid_sample(HumanAction::IncT));
        assert!(!is_valid_sample(HumanAction::DecH));
    }

    #[test]
    fn env_config_from_toml() {
        let cfg = EnvConfig::from_toml(
            "max_steps_per_activity = 25\n[grid]\ntemp_min = 16.0\ntemp_max = 28.0\ntemp_step = 1.0\nhum_min = 20.0\nhum_max = 70.0\nhum_step = 5.0\n",
        )
        .unwrap();
        assert_eq!(cfg.max_steps_per_activity, 25);
        assert_eq!(cfg.grid.temp_points(), 13);
        assert!(EnvConfig::from_toml("max_steps_per_activity = 0").is_err());
    }
}
