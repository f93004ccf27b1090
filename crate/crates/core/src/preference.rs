//! Per-activity Gaussian TH preference profiles.
//!
//! Temperature and humidity are modelled as independent Gaussians. The
//! activity-specific profile holds one (mu, sigma) pair per activity and
//! channel, twelve scalars in total; the episode profile pools all
//! activities into a single pair per channel.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::env::{is_valid_sample, Channel, HumanAction, ThermalObservation, ACTIVITIES};
use crate::error::{Error, Result};

/// Lower bound on every stored standard deviation, in channel units.
pub const SIGMA_FLOOR: f64 = 0.1;

/// Moving-average weight given to the stored pool profile.
pub const POOL_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParams {
    /// Builds params with `sigma` clamped to the floor.
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self {
            mu,
            sigma: sigma.max(SIGMA_FLOOR),
        }
    }

    pub fn pdf(&self, value: f64) -> f64 {
        pdf(self, value)
    }

    pub fn ln_pdf(&self, value: f64) -> f64 {
        let z = (value - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * (2.0 * PI).ln()
    }
}

/// Gaussian density at `value`.
pub fn pdf(params: &GaussianParams, value: f64) -> f64 {
    let z = (value - params.mu) / params.sigma;
    (-0.5 * z * z).exp() / (params.sigma * (2.0 * PI).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileVariant {
    #[serde(rename = "12d")]
    Activity12d,
    #[serde(rename = "4d")]
    Episode4d,
}

impl ProfileVariant {
    pub fn label(self) -> &'static str {
        match self {
            ProfileVariant::Activity12d => "12d",
            ProfileVariant::Episode4d => "4d",
        }
    }

    /// Number of (temperature, humidity) slots.
    pub fn slots(self) -> usize {
        match self {
            ProfileVariant::Activity12d => ACTIVITIES,
            ProfileVariant::Episode4d => 1,
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        match label {
            "12d" => Some(ProfileVariant::Activity12d),
            "4d" => Some(ProfileVariant::Episode4d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    variant: ProfileVariant,
    /// `slots[s][channel.index()]`
    slots: Vec<[GaussianParams; 2]>,
}

impl PreferenceProfile {
    pub fn new(variant: ProfileVariant, slots: Vec<[GaussianParams; 2]>) -> Result<Self> {
        if slots.len() != variant.slots() {
            return Err(Error::DimensionMismatch {
                expected: variant.slots(),
                got: slots.len(),
            });
        }
        let slots = slots
            .into_iter()
            .map(|s| s.map(|g| GaussianParams::new(g.mu, g.sigma)))
            .collect();
        Ok(Self { variant, slots })
    }

    pub fn variant(&self) -> ProfileVariant {
        self.variant
    }

    fn slot(&self, activity: usize) -> usize {
        match self.variant {
            ProfileVariant::Activity12d => activity,
            ProfileVariant::Episode4d => 0,
        }
    }

    /// Distribution used for `channel` during `activity`.
    pub fn params(&self, activity: usize, channel: Channel) -> GaussianParams {
        self.slots[self.slot(activity)][channel.index()]
    }

    /// Every stored channel distribution in slot order.
    pub fn channels(&self) -> impl Iterator<Item = (usize, Channel, GaussianParams)> + '_ {
        self.slots.iter().enumerate().flat_map(|(s, pair)| {
            Channel::ALL
                .into_iter()
                .map(move |c| (s, c, pair[c.index()]))
        })
    }

    /// Flat parameter vector: per slot, temperature (mu, sigma) then humidity (mu, sigma).
    pub fn to_vector(&self) -> Vec<f64> {
        self.slots
            .iter()
            .flat_map(|p| [p[0].mu, p[0].sigma, p[1].mu, p[1].sigma])
            .collect()
    }

    fn param_names(variant: ProfileVariant) -> Vec<String> {
        let mut names = Vec::new();
        for s in 0..variant.slots() {
            for ch in ["temp", "hum"] {
                for p in ["mu", "sigma"] {
                    names.push(match variant {
                        ProfileVariant::Activity12d => format!("act{s}_{ch}_{p}"),
                        ProfileVariant::Episode4d => format!("{ch}_{p}"),
                    });
                }
            }
        }
        names
    }

    pub fn to_record(&self, occupant: &str) -> ProfileRecord {
        let params = Self::param_names(self.variant)
            .into_iter()
            .zip(self.to_vector())
            .collect();
        ProfileRecord {
            occupant: occupant.to_owned(),
            variant: self.variant,
            params,
        }
    }

    pub fn from_record(record: &ProfileRecord) -> Result<Self> {
        let names = Self::param_names(record.variant);
        if record.params.len() != names.len() {
            return Err(Error::Record(format!(
                "{} profile needs {} parameters, found {}",
                record.variant.label(),
                names.len(),
                record.params.len()
            )));
        }
        let mut values = Vec::with_capacity(names.len());
        for name in &names {
            let v = *record
                .params
                .get(name)
                .ok_or_else(|| Error::Record(format!("missing parameter `{name}`")))?;
            if !v.is_finite() {
                return Err(Error::Record(format!("parameter `{name}` is not finite")));
            }
            values.push(v);
        }
        let mut slots = Vec::new();
        for chunk in values.chunks(4) {
            if chunk[1] < SIGMA_FLOOR || chunk[3] < SIGMA_FLOOR {
                return Err(Error::Record("sigma below floor".into()));
            }
            slots.push([
                GaussianParams::new(chunk[0], chunk[1]),
                GaussianParams::new(chunk[2], chunk[3]),
            ]);
        }
        Self::new(record.variant, slots)
    }
}

/// Serialized profile: occupant id, variant and named scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub occupant: String,
    pub variant: ProfileVariant,
    pub params: BTreeMap<String, f64>,
}

impl ProfileRecord {
    pub fn to_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn parse_line(line: &str) -> Result<(String, PreferenceProfile)> {
        let record: ProfileRecord = serde_json::from_str(line)?;
        let profile = PreferenceProfile::from_record(&record)?;
        Ok((record.occupant, profile))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn mean_std(&self) -> (f64, f64) {
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Streaming valid-sample statistics for one episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeEstimator {
    moments: [[Moments; 2]; ACTIVITIES],
}

impl EpisodeEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the observation when the occupant left TH alone this step.
    pub fn accumulate(&mut self, obs: &ThermalObservation, human_action: HumanAction) {
        if !is_valid_sample(human_action) {
            return;
        }
        let slot = &mut self.moments[obs.activity as usize];
        for c in Channel::ALL {
            slot[c.index()].push(c.value(obs));
        }
    }

    pub fn count(&self, activity: usize, channel: Channel) -> u64 {
        self.moments[activity][channel.index()].count
    }

    pub fn sum(&self, activity: usize, channel: Channel) -> f64 {
        self.moments[activity][channel.index()].sum
    }

    /// Point estimates for the episode: mean and population standard deviation.
    pub fn finalize(&self, variant: ProfileVariant) -> Result<PreferenceProfile> {
        let pooled;
        let groups: &[[Moments; 2]] = match variant {
            ProfileVariant::Activity12d => &self.moments,
            ProfileVariant::Episode4d => {
                let mut all = [Moments::default(); 2];
                for slot in &self.moments {
                    for c in 0..2 {
                        all[c].merge(&slot[c]);
                    }
                }
                pooled = [all];
                &pooled
            }
        };
        let mut slots = Vec::with_capacity(groups.len());
        for (activity, group) in groups.iter().enumerate() {
            let mut pair = [GaussianParams::new(0.0, SIGMA_FLOOR); 2];
            for c in Channel::ALL {
                let m = &group[c.index()];
                if m.count == 0 {
                    return Err(Error::EmptyChannel {
                        activity,
                        channel: c.name(),
                    });
                }
                let (mu, sigma) = m.mean_std();
                pair[c.index()] = GaussianParams::new(mu, sigma);
            }
            slots.push(pair);
        }
        PreferenceProfile::new(variant, slots)
    }
}

/// Moving average of a pooled profile toward an episode estimate.
///
/// Every parameter becomes `(1 - m) * episode + m * pool`.
pub fn merge(
    pool: &PreferenceProfile,
    episode: &PreferenceProfile,
    m: f64,
) -> Result<PreferenceProfile> {
    if pool.variant != episode.variant {
        return Err(Error::VariantMismatch {
            left: pool.variant.label(),
            right: episode.variant.label(),
        });
    }
    let blend = |p: f64, e: f64| (1.0 - m) * e + m * p;
    let slots = pool
        .slots
        .iter()
        .zip(&episode.slots)
        .map(|(p, e)| {
            [0, 1].map(|c| GaussianParams::new(blend(p[c].mu, e[c].mu), blend(p[c].sigma, e[c].sigma)))
        })
        .collect();
    PreferenceProfile::new(pool.variant, slots)
}
