//! Episode driver, baselines, metrics, and result files.

mod batch;
mod metrics;
mod oracle;
pub mod output;

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use batch::{batch, median_with_failures, summarize, BatchRecord, Method, Stats, SummaryRow};
pub use metrics::{
    dump_transition_plot, separation_violations, transition_accuracy, PoseFrame, TransitionRow,
    TransitionSource,
};
pub use oracle::{oracle_steps, OracleError, MAX_ORACLE_ROOMS};

use crate::agent::{Agent, AgentConfig};
use crate::inference::{InferenceError, Localization};
use crate::learning::ConfigError;
use crate::model::{Action, ModelSnapshot, ObservationId, Pose, StateId};
use crate::planner::{EfeFieldRow, MAX_HORIZON};
use crate::roomworld::{EnvError, Room, RoomWorldSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid run configuration: {0}")]
    Invalid(String),
    #[error("inference failed at step {step}: {source}")]
    Inference { step: usize, source: InferenceError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How actions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    /// Softmax over expected free energy of every policy.
    ExpectedFreeEnergy,
    /// Uniformly random actions; learning and inference are unchanged.
    Random,
}

/// Relocates the agent in the world just before the given step's action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Teleport {
    pub before_step: usize,
    pub to: Room,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Preset name or path to an environment file.
    pub env: String,
    pub seed: u64,
    pub max_steps: usize,
    pub accuracy_threshold: f64,
    pub agent: AgentConfig,
    pub controller: Controller,
    /// Keep stepping after completion until `max_steps`.
    pub run_to_max: bool,
    /// Record the EFE field at every planning step.
    pub dump_efe: bool,
    /// Assert normalization after every agent operation.
    pub check_invariants: bool,
    pub start_room: Option<Room>,
    pub teleport: Option<Teleport>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `env` with both the start room and the action stream
    /// drawn from `seed`.
    pub fn new(env: impl Into<String>, seed: u64) -> Self {
        let mut agent = AgentConfig::default();
        agent.planner.rng_seed = seed;
        RunConfig {
            env: env.into(),
            seed,
            max_steps: 200,
            accuracy_threshold: 0.6,
            agent,
            controller: Controller::ExpectedFreeEnergy,
            run_to_max: false,
            dump_efe: false,
            check_invariants: false,
            start_room: None,
            teleport: None,
            output_dir: None,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg.agent.planner.rng_seed = seed;
        cfg
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.agent.learning.validate()?;
        let fail = |m: &str| Err(RunError::Invalid(m.to_string()));
        if !(self.accuracy_threshold > 0.0 && self.accuracy_threshold <= 1.0) {
            return fail("accuracy threshold must lie in (0, 1]");
        }
        if !(self.agent.confidence_threshold > 0.0 && self.agent.confidence_threshold < 1.0) {
            return fail("confidence threshold must lie in (0, 1)");
        }
        if !(1..=MAX_HORIZON).contains(&self.agent.planner.horizon) {
            return fail("horizon out of range");
        }
        if !(self.agent.planner.gamma.is_finite() && self.agent.planner.gamma >= 0.0) {
            return fail("gamma must be finite and non-negative");
        }
        if self.agent.planner.novelty_weight.is_nan() || self.agent.planner.novelty_weight < 0.0 {
            return fail("novelty weight must be non-negative");
        }
        if self.max_steps == 0 {
            return fail("max_steps must be positive");
        }
        Ok(())
    }
}

/// One agent step as written to the trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub action: Action,
    pub moved: bool,
    pub room: Room,
    pub color: usize,
    pub observation: ObservationId,
    pub pose: Pose,
    pub state: StateId,
    pub confidence: f64,
    pub lost: bool,
    pub vfe: f64,
    pub accuracy: f64,
    pub num_states: usize,
    /// Total pseudo-count mass after the step.
    pub count_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub env: String,
    pub seed: u64,
    pub controller: Controller,
    pub start_room: Room,
    pub start_color: usize,
    /// First step at which every room has been entered.
    pub steps_to_discovery: Option<usize>,
    /// First step at which every room has been entered and transition
    /// accuracy meets the threshold.
    pub steps_to_complete: Option<usize>,
    pub final_accuracy: f64,
    pub visited: BTreeSet<Room>,
    pub trace: Vec<StepRecord>,
    pub snapshot: ModelSnapshot,
    /// `(step, field)` for each planning step when `dump_efe` is set.
    pub efe_fields: Vec<(usize, Vec<EfeFieldRow>)>,
}

impl RunResult {
    pub fn frame(&self) -> PoseFrame {
        PoseFrame {
            start: self.start_room,
        }
    }

    pub fn actions(&self) -> Vec<Action> {
        self.trace.iter().map(|r| r.action).collect()
    }

    pub fn completed(&self) -> bool {
        self.steps_to_complete.is_some()
    }
}

pub fn run_episode(cfg: &RunConfig) -> Result<RunResult, RunError> {
    let spec = RoomWorldSpec::load(&cfg.env)?;
    let result = run_episode_on(&spec, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        output::write_run(dir, &spec, &result)?;
    }
    Ok(result)
}

/// Same loop with uniformly random actions.
pub fn random_baseline(cfg: &RunConfig) -> Result<RunResult, RunError> {
    let mut cfg = cfg.clone();
    cfg.controller = Controller::Random;
    run_episode(&cfg)
}

fn action_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs one exploration episode in an already loaded world.
pub fn run_episode_on(spec: &RoomWorldSpec, cfg: &RunConfig) -> Result<RunResult, RunError> {
    cfg.validate()?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut act_rng = action_rng(cfg.agent.planner.rng_seed);

    let (mut env, first) = match cfg.start_room {
        Some(room) => spec.reset_at(room),
        None => spec.reset(&mut env_rng),
    };
    let frame = PoseFrame {
        start: env.agent_room,
    };
    let mut agent = Agent::new(&first, cfg.agent).with_invariant_checks(cfg.check_invariants);
    let mut visited = BTreeSet::from([env.agent_room]);

    let mut accuracy = transition_accuracy(agent.model(), spec, frame, &visited);
    let all_seen = |v: &BTreeSet<Room>| v.len() == spec.num_rooms();
    let mut steps_to_discovery = all_seen(&visited).then_some(0);
    let mut steps_to_complete =
        (steps_to_discovery.is_some() && accuracy >= cfg.accuracy_threshold).then_some(0);

    let mut trace = Vec::new();
    let mut efe_fields = Vec::new();
    for step in 1..=cfg.max_steps {
        if steps_to_complete.is_some() && !cfg.run_to_max {
            break;
        }
        let action = match cfg.controller {
            Controller::ExpectedFreeEnergy => {
                if cfg.dump_efe {
                    efe_fields.push((step, agent.efe_field()));
                }
                agent.plan(&mut act_rng)
            }
            Controller::Random => Action::ALL[act_rng.gen_range(0..Action::COUNT)],
        };
        if let Some(t) = cfg.teleport.filter(|t| t.before_step == step) {
            env.teleport(t.to);
        }
        let (next, percept) = spec.step(&env, action);
        env = next;
        let report = agent
            .observe(action, &percept)
            .map_err(|source| RunError::Inference { step, source })?;
        visited.insert(env.agent_room);
        accuracy = transition_accuracy(agent.model(), spec, frame, &visited);

        let belief = agent.belief();
        trace.push(StepRecord {
            step,
            action,
            moved: percept.moved,
            room: env.agent_room,
            color: percept.color,
            observation: report.observation,
            pose: belief.pose,
            state: belief.modal_state(),
            confidence: belief.confidence,
            lost: report.localization == Localization::Lost,
            vfe: report.vfe,
            accuracy,
            num_states: agent.model().num_states(),
            count_mass: agent.model().total_mass(),
        });

        if steps_to_discovery.is_none() && all_seen(&visited) {
            steps_to_discovery = Some(step);
        }
        if steps_to_complete.is_none()
            && steps_to_discovery.is_some()
            && accuracy >= cfg.accuracy_threshold
        {
            steps_to_complete = Some(step);
        }
    }

    Ok(RunResult {
        env: cfg.env.clone(),
        seed: cfg.seed,
        controller: cfg.controller,
        start_room: frame.start,
        start_color: first.color,
        steps_to_discovery,
        steps_to_complete,
        final_accuracy: accuracy,
        visited,
        trace,
        snapshot: agent.model().snapshot(),
        efe_fields,
    })
}
