//! Generative-model parameters stored as Dirichlet pseudo-counts.
//!
//! Three parameter blocks grow together as the agent explores:
//!
//! * `A_o = P(o | s)`: observation likelihood, one column per state.
//! * `A_p = P(p | s)`: position likelihood, one column per state.
//! * `B_s = P(s' | s, a)`: state transitions, one column per `(s, a)`.
//!
//! Counts are kept column-major (`counts[state][row]`) so that every column
//! is a contiguous slice and normalization is a single pass. The position
//! transition is not learned; it is plain pose arithmetic (see [`Pose::step`]).

use std::collections::HashMap;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete action set: four cardinal moves plus staying in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    North,
    East,
    South,
    West,
    Stay,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [
        Action::North,
        Action::East,
        Action::South,
        Action::West,
        Action::Stay,
    ];
    pub const CARDINAL: [Action; 4] = [Action::North, Action::East, Action::South, Action::West];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn inverse(self) -> Action {
        match self {
            Action::North => Action::South,
            Action::South => Action::North,
            Action::East => Action::West,
            Action::West => Action::East,
            Action::Stay => Action::Stay,
        }
    }

    /// Room-grid displacement, with `y` pointing north.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::North => (0, 1),
            Action::East => (1, 0),
            Action::South => (0, -1),
            Action::West => (-1, 0),
            Action::Stay => (0, 0),
        }
    }

    pub fn is_cardinal(self) -> bool {
        self != Action::Stay
    }

    /// Single-letter code used in trace and dump files.
    pub fn code(self) -> char {
        match self {
            Action::North => 'N',
            Action::East => 'E',
            Action::South => 'S',
            Action::West => 'W',
            Action::Stay => 'X',
        }
    }

    pub fn from_code(c: char) -> Option<Action> {
        match c {
            'N' => Some(Action::North),
            'E' => Some(Action::East),
            'S' => Some(Action::South),
            'W' => Some(Action::West),
            'X' => Some(Action::Stay),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Room-grid coordinate relative to where exploration started.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct Pose {
    pub x: i32,
    pub y: i32,
}

impl Pose {
    pub const ORIGIN: Pose = Pose { x: 0, y: 0 };

    pub fn new(x: i32, y: i32) -> Self {
        Pose { x, y }
    }

    pub fn step(self, action: Action) -> Pose {
        self + action
    }
}

impl Add<Action> for Pose {
    type Output = Pose;

    fn add(self, action: Action) -> Pose {
        let (dx, dy) = action.delta();
        Pose {
            x: self.x + dx,
            y: self.y + dy,
        }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Dense index into the agent's observation alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservationId(pub usize);

/// Dense index into the agent's state set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateStatus {
    /// Visited at least once while the agent was confident.
    Experienced,
    /// Predicted from a neighbouring state, never visited.
    Imagined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateMeta {
    pub status: StateStatus,
    pub anchor: Pose,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("observation id {got} is not the next dense id (expected {expected})")]
    NonDenseObservation { expected: usize, got: usize },
    #[error("a state is already anchored at pose {0}")]
    DuplicateAnchor(Pose),
}

/// Pseudo-count constants used when growing the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountPrior {
    /// Floor added to every new cell so each column stays a proper distribution.
    pub epsilon: f64,
    /// Count assigned to the outcome considered certain at initialization.
    pub strong: f64,
}

impl Default for CountPrior {
    fn default() -> Self {
        CountPrior {
            epsilon: 0.01,
            strong: 10.0,
        }
    }
}

/// Normalizes one column of pseudo-counts into a categorical distribution.
pub fn normalize(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    debug_assert!(total > 0.0, "zero-mass column");
    counts.iter().map(|c| c / total).collect()
}

/// The agent's growing parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    prior: CountPrior,
    /// `obs_counts[s][o]`
    obs_counts: Vec<Vec<f64>>,
    /// `pos_counts[s][p]`
    pos_counts: Vec<Vec<f64>>,
    /// `trans_counts[a][s][s_next]`
    trans_counts: [Vec<Vec<f64>>; Action::COUNT],
    positions: Vec<Pose>,
    position_index: HashMap<Pose, usize>,
    states: Vec<StateMeta>,
    state_at: HashMap<Pose, StateId>,
    /// Per state, which actions already received an imagined-edge seed.
    seeded: Vec<[bool; Action::COUNT]>,
    num_obs: usize,
}

impl GenerativeModel {
    /// Builds the single-state model for the first observation at pose `(0,0)`.
    pub fn new(first_obs: ObservationId, prior: CountPrior) -> Self {
        let mut model = GenerativeModel {
            prior,
            obs_counts: Vec::new(),
            pos_counts: Vec::new(),
            trans_counts: Default::default(),
            positions: Vec::new(),
            position_index: HashMap::new(),
            states: Vec::new(),
            state_at: HashMap::new(),
            seeded: Vec::new(),
            num_obs: 0,
        };
        for o in 0..=first_obs.0 {
            model
                .grow_observation(ObservationId(o))
                .expect("dense by construction");
        }
        let (s0, _) = model
            .grow_state(Pose::ORIGIN, StateStatus::Experienced)
            .expect("empty model has no anchors");
        model.obs_counts[s0.0][first_obs.0] = prior.strong;
        model
    }

    pub fn prior(&self) -> CountPrior {
        self.prior
    }

    pub fn num_obs(&self) -> usize {
        self.num_obs
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn state_meta(&self, s: StateId) -> &StateMeta {
        &self.states[s.0]
    }

    pub fn states(&self) -> &[StateMeta] {
        &self.states
    }

    pub fn positions(&self) -> &[Pose] {
        &self.positions
    }

    pub fn position_index(&self, pose: Pose) -> Option<usize> {
        self.position_index.get(&pose).copied()
    }

    pub fn state_at(&self, pose: Pose) -> Option<StateId> {
        self.state_at.get(&pose).copied()
    }

    /// Adds the next observation id to the alphabet with an all-floor row.
    pub fn grow_observation(&mut self, new_obs: ObservationId) -> Result<(), ModelError> {
        if new_obs.0 != self.num_obs {
            return Err(ModelError::NonDenseObservation {
                expected: self.num_obs,
                got: new_obs.0,
            });
        }
        for column in &mut self.obs_counts {
            column.push(self.prior.epsilon);
        }
        self.num_obs += 1;
        Ok(())
    }

    /// Adds a state anchored at `anchor`, registering the pose if it is new.
    pub fn grow_state(
        &mut self,
        anchor: Pose,
        status: StateStatus,
    ) -> Result<(StateId, bool), ModelError> {
        if self.state_at.contains_key(&anchor) {
            return Err(ModelError::DuplicateAnchor(anchor));
        }
        let eps = self.prior.epsilon;

        let (pos_idx, new_position) = match self.position_index.get(&anchor) {
            Some(&i) => (i, false),
            None => {
                let i = self.positions.len();
                self.positions.push(anchor);
                self.position_index.insert(anchor, i);
                for column in &mut self.pos_counts {
                    column.push(eps);
                }
                (i, true)
            }
        };

        let id = StateId(self.states.len());
        self.states.push(StateMeta { status, anchor });
        self.state_at.insert(anchor, id);
        self.seeded.push([false; Action::COUNT]);

        self.obs_counts.push(vec![eps; self.num_obs]);
        let mut pos_column = vec![eps; self.positions.len()];
        pos_column[pos_idx] = self.prior.strong;
        self.pos_counts.push(pos_column);

        let n = self.states.len();
        for slice in &mut self.trans_counts {
            for column in slice.iter_mut() {
                column.push(eps);
            }
            slice.push(vec![eps; n]);
        }
        Ok((id, new_position))
    }

    pub fn mark_experienced(&mut self, s: StateId) {
        self.states[s.0].status = StateStatus::Experienced;
    }

    pub fn is_seeded(&self, s: StateId, action: Action) -> bool {
        self.seeded[s.0][action.index()]
    }

    pub(crate) fn mark_seeded(&mut self, s: StateId, action: Action) {
        self.seeded[s.0][action.index()] = true;
    }

    pub fn obs_counts(&self, s: StateId) -> &[f64] {
        &self.obs_counts[s.0]
    }

    pub fn pos_counts(&self, s: StateId) -> &[f64] {
        &self.pos_counts[s.0]
    }

    pub fn trans_counts(&self, from: StateId, action: Action) -> &[f64] {
        &self.trans_counts[action.index()][from.0]
    }

    /// Adds pseudo-counts; `amount` must be non-negative so columns stay proper.
    pub fn add_obs_count(&mut self, o: ObservationId, s: StateId, amount: f64) {
        debug_assert!(amount >= 0.0, "negative pseudo-count increment");
        self.obs_counts[s.0][o.0] += amount;
    }

    pub fn add_pos_count(&mut self, p: usize, s: StateId, amount: f64) {
        debug_assert!(amount >= 0.0, "negative pseudo-count increment");
        self.pos_counts[s.0][p] += amount;
    }

    pub fn add_trans_count(&mut self, to: StateId, from: StateId, action: Action, amount: f64) {
        debug_assert!(amount >= 0.0, "negative pseudo-count increment");
        self.trans_counts[action.index()][from.0][to.0] += amount;
    }

    /// Normalized `P(o | s)` column.
    pub fn obs_dist(&self, s: StateId) -> Vec<f64> {
        normalize(&self.obs_counts[s.0])
    }

    /// Normalized `P(p | s)` column, indexed by position index.
    pub fn pos_dist(&self, s: StateId) -> Vec<f64> {
        normalize(&self.pos_counts[s.0])
    }

    /// Normalized `P(s' | s, a)` column.
    pub fn trans_dist(&self, from: StateId, action: Action) -> Vec<f64> {
        normalize(&self.trans_counts[action.index()][from.0])
    }

    pub fn obs_prob(&self, o: ObservationId, s: StateId) -> f64 {
        let column = &self.obs_counts[s.0];
        column[o.0] / column.iter().sum::<f64>()
    }

    /// `P(p | s)`. A pose the model has never registered reads as an
    /// all-floor row, exactly as it would right after being added.
    pub fn pos_prob(&self, pose: Pose, s: StateId) -> f64 {
        let column = &self.pos_counts[s.0];
        let total: f64 = column.iter().sum();
        match self.position_index.get(&pose) {
            Some(&p) => column[p] / total,
            None => self.prior.epsilon / (total + self.prior.epsilon),
        }
    }

    pub fn trans_prob(&self, to: StateId, from: StateId, action: Action) -> f64 {
        let column = &self.trans_counts[action.index()][from.0];
        column[to.0] / column.iter().sum::<f64>()
    }

    /// Total observation pseudo-count mass of a state.
    pub fn obs_mass(&self, s: StateId) -> f64 {
        self.obs_counts[s.0].iter().sum()
    }

    /// Dense normalized copy used by the planner's inner loops.
    pub fn view(&self) -> ModelView {
        let n = self.num_states();
        let a_o = (0..n).map(|s| self.obs_dist(StateId(s))).collect();
        let b_s = std::array::from_fn(|a| {
            (0..n)
                .map(|s| normalize(&self.trans_counts[a][s]))
                .collect()
        });
        let novelty = (0..n).map(|s| 1.0 / self.obs_mass(StateId(s))).collect();
        let anchors = self.states.iter().map(|m| m.anchor).collect();
        ModelView {
            a_o,
            b_s,
            novelty,
            anchors,
        }
    }

    /// Largest deviation from 1 over every normalized column in the model.
    pub fn max_column_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut check = |counts: &[f64]| {
            let total: f64 = normalize(counts).iter().sum();
            worst = worst.max((total - 1.0).abs());
        };
        self.obs_counts.iter().for_each(|c| check(c));
        self.pos_counts.iter().for_each(|c| check(c));
        self.trans_counts.iter().flatten().for_each(|c| check(c));
        worst
    }

    /// Sum of every pseudo-count in the model.
    pub fn total_mass(&self) -> f64 {
        self.obs_counts
            .iter()
            .chain(self.pos_counts.iter())
            .chain(self.trans_counts.iter().flatten())
            .flatten()
            .sum()
    }

    /// Minimum pseudo-count anywhere in the model.
    pub fn min_count(&self) -> f64 {
        self.obs_counts
            .iter()
            .chain(self.pos_counts.iter())
            .chain(self.trans_counts.iter().flatten())
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let n = self.num_states();
        ModelSnapshot {
            format_version: SNAPSHOT_VERSION,
            num_obs: self.num_obs,
            num_positions: self.num_positions(),
            num_states: n,
            positions: self.positions.clone(),
            states: self.states.clone(),
            obs_likelihood: (0..n).map(|s| self.obs_dist(StateId(s))).collect(),
            pos_likelihood: (0..n).map(|s| self.pos_dist(StateId(s))).collect(),
            transitions: Action::ALL
                .iter()
                .map(|&a| (0..n).map(|s| self.trans_dist(StateId(s), a)).collect())
                .collect(),
        }
    }
}

/// Normalized, read-only matrices shared across planner threads.
#[derive(Debug, Clone)]
pub struct ModelView {
    /// `a_o[s][o]`
    pub a_o: Vec<Vec<f64>>,
    /// `b_s[a][s][s_next]`
    pub b_s: [Vec<Vec<f64>>; Action::COUNT],
    /// Count-inverse parameter novelty per state.
    pub novelty: Vec<f64>,
    pub anchors: Vec<Pose>,
}

impl ModelView {
    pub fn num_states(&self) -> usize {
        self.a_o.len()
    }

    pub fn num_obs(&self) -> usize {
        self.a_o.first().map_or(0, Vec::len)
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Exported model: dimensions, every normalized matrix, and per-state metadata.
///
/// Matrices are stored column-major: `obs_likelihood[s][o]`,
/// `pos_likelihood[s][p]`, `transitions[a][s][s_next]` with `a` in
/// `N, E, S, W, X` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub format_version: u32,
    pub num_obs: usize,
    pub num_positions: usize,
    pub num_states: usize,
    pub positions: Vec<Pose>,
    pub states: Vec<StateMeta>,
    pub obs_likelihood: Vec<Vec<f64>>,
    pub pos_likelihood: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl ModelSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn state_at(&self, pose: Pose) -> Option<StateId> {
        self.states
            .iter()
            .position(|m| m.anchor == pose)
            .map(StateId)
    }
}
