//! Belief over which known occupant is present.
//!
//! The occupant is assumed fixed for a whole episode, so the hidden state is
//! just an index into the occupant pool and the belief is a categorical
//! distribution over it. Each valid TH sample multiplies the belief by the
//! occupants' Gaussian preference likelihoods; the posterior of one step is
//! the prior of the next.

use serde::{Deserialize, Serialize};

use crate::env::{Channel, ThermalObservation};
use crate::error::{Error, Result};
use crate::preference::PreferenceProfile;

/// Smallest likelihood an observation may receive.
pub const LIKELIHOOD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    /// Equal belief over `n` occupants.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyBelief);
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyBelief);
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Record("belief weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Record("belief weights sum to zero".into()));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Index of the most believed occupant (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Grows the belief to cover a newly discovered occupant with weight zero.
    pub fn extend_zero(&mut self) {
        self.0.push(0.0);
    }
}

pub fn init_uniform(n: usize) -> Result<BeliefVector> {
    BeliefVector::uniform(n)
}

/// Density of the observed TH under a profile: product of the two channel pdfs.
pub fn likelihood(profile: &PreferenceProfile, obs: &ThermalObservation) -> f64 {
    let activity = obs.activity as usize;
    let density: f64 = Channel::ALL
        .into_iter()
        .map(|c| profile.params(activity, c).pdf(c.value(obs)))
        .product();
    density.max(LIKELIHOOD_FLOOR)
}

/// Bayes update `b'_i ∝ L_i b_i`.
pub fn update(belief: &BeliefVector, likelihoods: &[f64]) -> Result<BeliefVector> {
    if likelihoods.len() != belief.len() {
        return Err(Error::DimensionMismatch {
            expected: belief.len(),
            got: likelihoods.len(),
        });
    }
    let joint: Vec<f64> = belief
        .0
        .iter()
        .zip(likelihoods)
        .map(|(b, l)| b * l)
        .collect();
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Record("belief update has zero evidence".into()));
    }
    Ok(BeliefVector(joint.into_iter().map(|j| j / total).collect()))
}

/// Two-model likelihood-ratio factor `C(j, i) = P(th | j) / P(th | i)` under a shared sigma.
pub fn ratio_factor(mu_j: f64, mu_i: f64, sigma: f64, th: f64) -> f64 {
    ((2.0 * th - mu_j - mu_i) * (mu_j - mu_i) / (2.0 * sigma * sigma)).exp()
}

/// Posterior from the shared-sigma ratio form: `P(i | th) = P(i) / Σ_j C(j, i) P(j)`.
pub fn posterior_closed_form(
    mus: &[f64],
    sigma: f64,
    th: f64,
    priors: &BeliefVector,
) -> Result<BeliefVector> {
    if mus.len() != priors.len() {
        return Err(Error::DimensionMismatch {
            expected: priors.len(),
            got: mus.len(),
        });
    }
    let post = mus
        .iter()
        .enumerate()
        .map(|(i, &mu_i)| {
            if priors.0[i] == 0.0 {
                return 0.0;
            }
            let denom: f64 = mus
                .iter()
                .zip(&priors.0)
                .map(|(&mu_j, &p_j)| ratio_factor(mu_j, mu_i, sigma, th) * p_j)
                .sum();
            priors.0[i] / denom
        })
        .collect();
    Ok(BeliefVector(post))
}
