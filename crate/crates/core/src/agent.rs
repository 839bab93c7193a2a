//! The perceive / learn / extend / plan cycle for one agent.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::inference::{
    check_confidence, infer_state_with_pose, predict_states, variational_free_energy, Belief,
    InferenceError, Localization, StepOutcome,
};
use crate::learning::{extend_map, update_on_step, LearningConfig};
use crate::model::{Action, GenerativeModel, ObservationId, StateId};
use crate::planner::{score_policies, select_action, EfeFieldRow, PlannerConfig, Policy};
use crate::roomworld::Percept;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub planner: PlannerConfig,
    pub learning: LearningConfig,
    /// Below this maximum posterior probability the agent is lost.
    pub confidence_threshold: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            planner: PlannerConfig::default(),
            learning: LearningConfig::default(),
            confidence_threshold: 0.5,
        }
    }
}

/// What happened to the agent's beliefs during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub observation: ObservationId,
    pub new_color: bool,
    pub vfe: f64,
    pub localization: Localization,
    pub states_created: usize,
}

#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    model: GenerativeModel,
    belief: Belief,
    /// Environment colour -> dense observation id, in order of first sight.
    alphabet: HashMap<usize, ObservationId>,
    localization: Localization,
    check_invariants: bool,
}

/// Tolerance for column sums and belief normalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

impl Agent {
    /// Starts an agent from its very first percept.
    pub fn new(first: &Percept, cfg: AgentConfig) -> Self {
        let mut model = GenerativeModel::new(ObservationId(0), cfg.learning.count_prior());
        let mut belief = Belief::certain(StateId(0), 1, crate::model::Pose::ORIGIN);
        extend_map(
            &mut model,
            &belief,
            &first.blocked_dirs,
            &cfg.learning,
            false,
        );
        belief.pad_to(model.num_states());
        Agent {
            cfg,
            model,
            belief,
            alphabet: HashMap::from([(first.color, ObservationId(0))]),
            localization: Localization::Confident,
            check_invariants: false,
        }
    }

    /// Asserts model and belief normalization after every internal operation.
    pub fn with_invariant_checks(mut self, on: bool) -> Self {
        self.check_invariants = on;
        self.assert_invariants("init", &self.belief.clone());
        self
    }

    fn assert_invariants(&self, stage: &str, belief: &Belief) {
        if !self.check_invariants {
            return;
        }
        let err = self.model.max_column_error();
        assert!(
            err <= NORMALIZATION_TOLERANCE,
            "{stage}: column sum off by {err}"
        );
        assert!(
            self.model.min_count() > 0.0,
            "{stage}: non-positive pseudo-count"
        );
        let total: f64 = belief.state_probs.iter().sum();
        assert!(
            (total - 1.0).abs() <= NORMALIZATION_TOLERANCE,
            "{stage}: belief sums to {total}"
        );
        assert!(
            belief.state_probs.iter().all(|&p| p >= 0.0),
            "{stage}: negative belief"
        );
        let max = belief.state_probs.iter().copied().fold(0.0, f64::max);
        assert_eq!(
            belief.confidence, max,
            "{stage}: confidence is not the max posterior"
        );
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.model
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn localization(&self) -> Localization {
        self.localization
    }

    pub fn is_lost(&self) -> bool {
        self.localization == Localization::Lost
    }

    /// Scores every candidate policy from the current belief.
    pub fn score(&self) -> Vec<Policy> {
        score_policies(&self.model.view(), &self.belief, &self.cfg.planner)
    }

    pub fn efe_field(&self) -> Vec<EfeFieldRow> {
        crate::planner::dump_efe_field(&self.model.view(), &self.belief, &self.cfg.planner)
    }

    /// Samples the next action from the softmax over policies.
    pub fn plan<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        let policies = self.score();
        select_action(&policies, self.cfg.planner.gamma, rng).1
    }

    /// Maps a colour to the agent's alphabet, growing it on first sight.
    fn encode(&mut self, color: usize) -> (ObservationId, bool) {
        if let Some(&o) = self.alphabet.get(&color) {
            return (o, false);
        }
        let o = ObservationId(self.model.num_obs());
        self.model.grow_observation(o).expect("next dense id");
        self.alphabet.insert(color, o);
        (o, true)
    }

    /// Incorporates the percept that followed `action`.
    pub fn observe(
        &mut self,
        action: Action,
        percept: &Percept,
    ) -> Result<StepReport, InferenceError> {
        let (observation, new_color) = self.encode(percept.color);
        self.assert_invariants("grow_observation", &self.belief.clone());
        let outcome = StepOutcome {
            moved: percept.moved,
            observation,
            blocked_dirs: percept.blocked_dirs.clone(),
        };
        let was_lost = self.is_lost();
        let prior = predict_states(&self.model, &self.belief, action);
        let mut posterior =
            infer_state_with_pose(&self.model, &self.belief, action, &outcome, !was_lost)?;
        let vfe = variational_free_energy(&self.model, &posterior, &prior, observation);
        self.assert_invariants("infer_state", &posterior);

        let localization = check_confidence(&posterior, self.cfg.confidence_threshold);
        let lost = localization == Localization::Lost;
        update_on_step(
            &mut self.model,
            &self.belief,
            action,
            &posterior,
            &outcome,
            &self.cfg.learning,
            lost,
        );
        self.assert_invariants("update_on_step", &posterior);
        let states_created = extend_map(
            &mut self.model,
            &posterior,
            &outcome.blocked_dirs,
            &self.cfg.learning,
            lost,
        );
        posterior.pad_to(self.model.num_states());
        self.assert_invariants("extend_map", &posterior);

        self.belief = posterior;
        self.localization = localization;
        Ok(StepReport {
            observation,
            new_color,
            vfe,
            localization,
            states_created,
        })
    }
}
