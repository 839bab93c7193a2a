//! Count updates after real steps and one-step map extension over
//! predicted, not yet visited, neighbours.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::inference::{Belief, StepOutcome};
use crate::model::{Action, CountPrior, GenerativeModel, StateId, StateStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    /// Count increment for transitions and likelihoods the agent lived through.
    pub lr_experienced: f64,
    /// Count increment for predicted edges toward imagined neighbours.
    pub lr_imagined: f64,
    pub epsilon_floor: f64,
    pub strong_count: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            lr_experienced: 1.0,
            lr_imagined: 0.1,
            epsilon_floor: 0.01,
            strong_count: 10.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("learning rates must be positive (experienced {0}, imagined {1})")]
    NonPositiveRate(f64, f64),
    #[error("experienced learning rate {0} must exceed the imagined rate {1}")]
    RateOrdering(f64, f64),
    #[error("count floor and strong count must be positive")]
    NonPositiveCounts,
}

impl LearningConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.lr_experienced > 0.0 && self.lr_imagined > 0.0) {
            return Err(ConfigError::NonPositiveRate(
                self.lr_experienced,
                self.lr_imagined,
            ));
        }
        if self.lr_experienced <= self.lr_imagined {
            return Err(ConfigError::RateOrdering(
                self.lr_experienced,
                self.lr_imagined,
            ));
        }
        if !(self.epsilon_floor > 0.0 && self.strong_count > 0.0) {
            return Err(ConfigError::NonPositiveCounts);
        }
        Ok(())
    }

    pub fn count_prior(&self) -> CountPrior {
        CountPrior {
            epsilon: self.epsilon_floor,
            strong: self.strong_count,
        }
    }
}

/// Accumulates the outer product `q(s_t) q(s_{t-1})` into `B_s[:, :, action]`
/// and the new belief into the observation and position likelihoods.
///
/// Does nothing while the agent is lost.
pub fn update_on_step(
    model: &mut GenerativeModel,
    prev: &Belief,
    action: Action,
    new: &Belief,
    outcome: &StepOutcome,
    cfg: &LearningConfig,
    lost: bool,
) {
    if lost {
        return;
    }
    let lr = cfg.lr_experienced;
    let n = model.num_states();
    for (from, &q_prev) in prev.state_probs.iter().enumerate().take(n) {
        if q_prev == 0.0 {
            continue;
        }
        for (to, &q_new) in new.state_probs.iter().enumerate().take(n) {
            if q_new != 0.0 {
                model.add_trans_count(StateId(to), StateId(from), action, lr * q_new * q_prev);
            }
        }
    }
    let pos_idx = model.position_index(new.pose);
    for (s, &q) in new.state_probs.iter().enumerate().take(n) {
        if q == 0.0 {
            continue;
        }
        model.add_obs_count(outcome.observation, StateId(s), lr * q);
        if let Some(p) = pos_idx {
            model.add_pos_count(p, StateId(s), lr * q);
        }
    }
    model.mark_experienced(new.modal_state());
}

/// Grows imagined states at every open neighbouring pose and seeds weak
/// edges toward them. Walled directions and `Stay` are seeded as
/// self-transitions. Each `(state, action)` edge is seeded at most once, so
/// repeated calls with the same belief change nothing.
///
/// Returns the number of states created. Does nothing while lost.
pub fn extend_map(
    model: &mut GenerativeModel,
    belief: &Belief,
    blocked_dirs: &BTreeSet<Action>,
    cfg: &LearningConfig,
    lost: bool,
) -> usize {
    if lost {
        return 0;
    }
    let lr = cfg.lr_imagined;
    let current = belief.modal_state();
    let mut created = 0;
    for action in Action::ALL {
        if model.is_seeded(current, action) {
            continue;
        }
        if action == Action::Stay || blocked_dirs.contains(&action) {
            model.add_trans_count(current, current, action, lr);
        } else {
            let target_pose = belief.pose + action;
            let target = match model.state_at(target_pose) {
                Some(s) => s,
                None => {
                    created += 1;
                    model
                        .grow_state(target_pose, StateStatus::Imagined)
                        .expect("pose checked free")
                        .0
                }
            };
            model.add_trans_count(target, current, action, lr);
            let back = action.inverse();
            if !model.is_seeded(target, back) {
                model.add_trans_count(current, target, back, lr);
                model.mark_seeded(target, back);
            }
        }
        model.mark_seeded(current, action);
    }
    created
}
