//! Simulated users with latent preferences.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Error, Result};
use crate::preference::{linear_utility, project_to_simplex, tlo_compare, ReturnVector, UtilityFunction};
use crate::rng::{self, Stream};

const USER_STREAM: u64 = 0x05E7;

/// Regret below this counts as executing an optimal policy; absorbs exact
/// utility ties that differ only by rounding.
pub const ALIGNED_TOL: f64 = 1e-9;

/// Serializable description of a simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub user_id: String,
    pub true_utility: UtilityFunction,
    #[serde(default = "default_gain")]
    pub reaction_gain: f64,
    #[serde(default = "default_noise")]
    pub reaction_noise: f64,
    #[serde(default)]
    pub drift_rate: f64,
}

fn default_gain() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.25
}

impl UserSpec {
    pub fn linear(user_id: impl Into<String>, weights: crate::preference::PreferenceVector) -> Self {
        Self {
            user_id: user_id.into(),
            true_utility: UtilityFunction::linear(weights),
            reaction_gain: default_gain(),
            reaction_noise: default_noise(),
            drift_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.true_utility.validate()?;
        if !(self.reaction_gain.is_finite() && self.reaction_gain > 0.0) {
            return Err(invalid("reaction_gain", "must be positive"));
        }
        if !(self.reaction_noise.is_finite() && self.reaction_noise >= 0.0) {
            return Err(invalid("reaction_noise", "must be nonnegative"));
        }
        if !(self.drift_rate.is_finite() && self.drift_rate >= 0.0) {
            return Err(invalid("drift_rate", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionSignal {
    pub value: f64,
    pub interaction: u64,
}

/// Ground-truth user: emits noisy reactions to executed returns.
#[derive(Debug, Clone)]
pub struct SimulatedUser {
    spec: UserSpec,
    rng: Stream,
    reactions: u64,
}

/// Scalar utility of `r` under `u`. Lexicographic utilities have no scale of
/// their own, so they score minus the number of front members ranked
/// strictly above `r`.
pub fn scalar_utility(u: &UtilityFunction, r: &ReturnVector, front: &[ReturnVector]) -> Result<f64> {
    match u {
        UtilityFunction::Linear { weights } => linear_utility(weights, r),
        UtilityFunction::ThresholdedLexicographic { .. } => {
            let mut better = 0usize;
            for f in front {
                if tlo_compare(u, f, r)? == Ordering::Greater {
                    better += 1;
                }
            }
            Ok(-(better as f64))
        }
    }
}

impl SimulatedUser {
    pub fn new(spec: UserSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let rng = rng::stream(seed, &[USER_STREAM, rng::hash_str(&spec.user_id)]);
        Ok(Self {
            spec,
            rng,
            reactions: 0,
        })
    }

    pub fn spec(&self) -> &UserSpec {
        &self.spec
    }

    pub fn user_id(&self) -> &str {
        &self.spec.user_id
    }

    pub fn true_utility(&self) -> &UtilityFunction {
        &self.spec.true_utility
    }

    fn best_on_front(&self, front: &[ReturnVector]) -> Result<f64> {
        if front.is_empty() {
            return Err(Error::Empty("front"));
        }
        front
            .iter()
            .map(|f| scalar_utility(&self.spec.true_utility, f, front))
            .try_fold(f64::NEG_INFINITY, |best, u| Ok(best.max(u?)))
    }

    /// `zeta = gain * (u*(observed) - max_front u*) + noise`.
    pub fn react(&mut self, observed: &ReturnVector, front: &[ReturnVector]) -> Result<ReactionSignal> {
        let best = self.best_on_front(front)?;
        check_dims(self.spec.true_utility.num_objectives(), observed.len())?;
        let own = scalar_utility(&self.spec.true_utility, observed, front)?;
        let noise = if self.spec.reaction_noise > 0.0 {
            self.spec.reaction_noise * rng::standard_normal(&mut self.rng)
        } else {
            0.0
        };
        let signal = ReactionSignal {
            value: self.spec.reaction_gain * (own - best) + noise,
            interaction: self.reactions,
        };
        self.reactions += 1;
        Ok(signal)
    }

    /// Projected Gaussian random walk of the latent weights.
    pub fn drift(&mut self) -> Result<()> {
        let rate = self.spec.drift_rate;
        let UtilityFunction::Linear { weights } = &mut self.spec.true_utility else {
            return Err(Error::UnsupportedDrift);
        };
        if rate == 0.0 {
            return Ok(());
        }
        let raw: Vec<f64> = weights
            .weights()
            .iter()
            .map(|w| w + rate * rng::standard_normal(&mut self.rng))
            .collect();
        *weights = project_to_simplex(&raw)?;
        Ok(())
    }

    /// Utility gap between the best front member and `observed`; never
    /// negative.
    pub fn true_regret(&self, observed: &ReturnVector, front: &[ReturnVector]) -> Result<f64> {
        let best = self.best_on_front(front)?;
        check_dims(self.spec.true_utility.num_objectives(), observed.len())?;
        let own = scalar_utility(&self.spec.true_utility, observed, front)?;
        Ok((best - own).max(0.0))
    }

    /// Whether `observed` attains the front maximum of the true utility.
    pub fn is_optimal(&self, observed: &ReturnVector, front: &[ReturnVector]) -> Result<bool> {
        Ok(self.true_regret(observed, front)? <= ALIGNED_TOL)
    }
}
