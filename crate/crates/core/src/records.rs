//! Line-delimited episode logs and agent snapshots.
//!
//! An episode log is a run of JSON lines: one `header`, its `step` and
//! `transition` records, then a closing `summary`. Several episodes may be
//! concatenated in one file.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeLog, PolicyConfig, PoshsAgent, QTable, ShsMode, StepRecord, Transition};
use crate::env::{ObsKey, ShsAction};
use crate::error::{Error, Result};
use crate::identity::{Identification, JsdConfig, OccupantPool, PoolEntry};
use crate::preference::{PreferenceProfile, ProfileRecord, ProfileVariant};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        experiment_id: String,
        episode: u32,
        occupant: String,
        seed: u64,
        epsilon: f64,
        mode: ShsMode,
        pool_size: usize,
    },
    Step(StepRecord),
    Transition(Transition),
    Summary {
        identification: Option<Identification>,
        total_reward: f64,
        human_moves: usize,
    },
}

pub fn parse_log_line(line: &str) -> Result<LogRecord> {
    Ok(serde_json::from_str(line)?)
}

/// Appends one episode as JSON lines.
pub fn write_episode_log<W: Write>(
    out: &mut W,
    experiment_id: &str,
    episode: u32,
    log: &EpisodeLog,
) -> Result<()> {
    let mut emit = |record: &LogRecord| -> Result<()> {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
        Ok(())
    };
    emit(&LogRecord::Header {
        experiment_id: experiment_id.to_owned(),
        episode,
        occupant: log.occupant.clone(),
        seed: log.seed,
        epsilon: log.epsilon,
        mode: log.mode,
        pool_size: log.pool_size,
    })?;
    for s in &log.steps {
        emit(&LogRecord::Step(s.clone()))?;
    }
    for t in &log.memory {
        emit(&LogRecord::Transition(t.clone()))?;
    }
    emit(&LogRecord::Summary {
        identification: log.identification.clone(),
        total_reward: log.total_reward(),
        human_moves: log.human_moves(),
    })
}

/// Episode logs read back from JSON lines, in file order.
pub fn read_episode_logs<R: BufRead>(input: R) -> Result<Vec<(u32, EpisodeLog)>> {
    let mut logs = Vec::new();
    let mut open: Option<(u32, EpisodeLog)> = None;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_log_line(&line)?;
        let at = |msg: &str| Error::Record(format!("line {}: {msg}", n + 1));
        match record {
            LogRecord::Header {
                episode,
                occupant,
                seed,
                epsilon,
                mode,
                pool_size,
                ..
            } => {
                if open.is_some() {
                    return Err(at("header inside an open episode"));
                }
                open = Some((
                    episode,
                    EpisodeLog {
                        occupant,
                        seed,
                        epsilon,
                        mode,
                        pool_size,
                        steps: Vec::new(),
                        memory: Vec::new(),
                        identification: None,
                    },
                ));
            }
            LogRecord::Step(s) => match open.as_mut() {
                Some((_, log)) => log.steps.push(s),
                None => return Err(at("step outside an episode")),
            },
            LogRecord::Transition(t) => match open.as_mut() {
                Some((_, log)) => log.memory.push(t),
                None => return Err(at("transition outside an episode")),
            },
            LogRecord::Summary { identification, .. } => match open.take() {
                Some((episode, mut log)) => {
                    log.identification = identification;
                    logs.push((episode, log));
                }
                None => return Err(at("summary outside an episode")),
            },
        }
    }
    if open.is_some() {
        return Err(Error::Record("episode log ends without a summary".into()));
    }
    Ok(logs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct QRow {
    activity: u8,
    temp_idx: u16,
    hum_idx: u16,
    values: [f64; ShsAction::COUNT],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SnapshotEntry {
    /// Occupant that created the entry, when known.
    label: Option<String>,
    profile: ProfileRecord,
    q_table: Vec<QRow>,
}

/// Versioned on-disk form of a trained agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    version: u32,
    variant: ProfileVariant,
    policy: PolicyConfig,
    jsd: JsdConfig,
    episodes: u32,
    entries: Vec<SnapshotEntry>,
}

impl AgentSnapshot {
    /// `labels[i]` names the occupant behind pool entry `i`.
    pub fn capture(agent: &PoshsAgent, labels: &[Option<String>]) -> Self {
        let entries = agent
            .pool
            .entries()
            .iter()
            .map(|e| SnapshotEntry {
                label: labels.get(e.id).cloned().flatten(),
                profile: e.profile.to_record(&format!("pool{}", e.id)),
                q_table: e
                    .q_table
                    .iter()
                    .map(|(k, v)| QRow {
                        activity: k.activity,
                        temp_idx: k.temp_idx,
                        hum_idx: k.hum_idx,
                        values: *v,
                    })
                    .collect(),
            })
            .collect();
        Self {
            version: SNAPSHOT_VERSION,
            variant: agent.variant,
            policy: agent.policy,
            jsd: agent.jsd.clone(),
            episodes: agent.episodes,
            entries,
        }
    }

    /// Rebuilds the agent and its entry labels.
    pub fn restore(&self) -> Result<(PoshsAgent, Vec<Option<String>>)> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        let mut agent = PoshsAgent::new(self.policy, self.jsd.clone(), self.variant)?;
        let grid = &self.jsd.eval_grid;
        let mut entries = Vec::with_capacity(self.entries.len());
        let mut labels = Vec::with_capacity(self.entries.len());
        for (id, e) in self.entries.iter().enumerate() {
            let profile = PreferenceProfile::from_record(&e.profile)?;
            if profile.variant() != self.variant {
                return Err(Error::VariantMismatch {
                    left: self.variant.label(),
                    right: profile.variant().label(),
                });
            }
            let mut q_table = QTable::new();
            for row in &e.q_table {
                if row.activity as usize >= crate::env::ACTIVITIES
                    || row.temp_idx as usize >= grid.temp_points()
                    || row.hum_idx as usize >= grid.hum_points()
                {
                    return Err(Error::Record(format!("entry {id}: Q row outside the grid")));
                }
                if row.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Record(format!("entry {id}: non-finite Q value")));
                }
                let key = ObsKey {
                    activity: row.activity,
                    temp_idx: row.temp_idx,
                    hum_idx: row.hum_idx,
                };
                q_table.insert_row(key, row.values);
            }
            entries.push(PoolEntry {
                id,
                profile,
                q_table,
            });
            labels.push(e.label.clone());
        }
        agent.pool = OccupantPool::from_entries(entries)?;
        agent.episodes = self.episodes;
        Ok((agent, labels))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::run_episode;
    use crate::env::{EnvConfig, SmartHome, ThermalGrid};
    use crate::occupant::HumanModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trained() -> (PoshsAgent, Vec<EpisodeLog>) {
        let grid = ThermalGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = HumanModel::reference("H_a", 0.25, &grid)
            .unwrap()
            .pretrain(60, 40, &mut rng);
        let mut env = SmartHome::new(EnvConfig::default()).unwrap();
        env.register(&h.id);
        let jsd = JsdConfig::for_variant(ProfileVariant::Activity12d, grid);
        let mut agent =
            PoshsAgent::new(PolicyConfig::default(), jsd, ProfileVariant::Activity12d).unwrap();
        let logs = (0..3)
            .map(|e| run_episode(&mut env, &h, &mut agent, e, 0.5, ShsMode::Poshs, &mut rng).unwrap())
            .collect();
        (agent, logs)
    }

    #[test]
    fn log_round_trip() {
        let (_, logs) = trained();
        let mut buf = Vec::new();
        for (i, log) in logs.iter().enumerate() {
            write_episode_log(&mut buf, "t", i as u32, log).unwrap();
        }
        let back = read_episode_logs(buf.as_slice()).unwrap();
        assert_eq!(back.len(), logs.len());
        for ((i, b), l) in back.iter().zip(&logs) {
            assert_eq!(b, l);
            assert!(*i < 3);
        }
    }

    #[test]
    fn truncated_log_rejected() {
        let (_, logs) = trained();
        let mut buf = Vec::new();
        write_episode_log(&mut buf, "t", 0, &logs[0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().collect();
        let truncated = cut[..cut.len() - 1].join("\n");
        assert!(read_episode_logs(truncated.as_bytes()).is_err());
        assert!(read_episode_logs(cut[1].as_bytes()).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let (agent, _) = trained();
        let labels = vec![Some("H_a".to_owned()); agent.pool.len()];
        let snap = AgentSnapshot::capture(&agent, &labels);
        let parsed = AgentSnapshot::from_json(&snap.to_json().unwrap()).unwrap();
        let (back, back_labels) = parsed.restore().unwrap();
        assert_eq!(back_labels, labels);
        assert_eq!(back.pool.len(), agent.pool.len());
        for (a, b) in back.pool.entries().iter().zip(agent.pool.entries()) {
            assert_eq!(a.q_table, b.q_table);
            assert_eq!(a.profile.variant(), b.profile.variant());
            for (x, y) in a.profile.to_vector().iter().zip(b.profile.to_vector()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn snapshot_version_checked() {
        let (agent, _) = trained();
        let mut snap = AgentSnapshot::capture(&agent, &[]);
        snap.version = 99;
        assert!(matches!(snap.restore(), Err(Error::Version { found: 99, .. })));
    }
}
