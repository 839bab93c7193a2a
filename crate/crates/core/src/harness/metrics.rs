//! Agreement between the learned transition model and the ground truth.

use std::collections::BTreeSet;

use crate::model::{Action, GenerativeModel, ModelSnapshot, Pose, StateId};
use crate::roomworld::{Room, RoomWorldSpec};

/// Read access to learned transitions, implemented by the live model and
/// by exported snapshots so metrics agree between the two.
pub trait TransitionSource {
    fn num_states(&self) -> usize;
    fn anchor(&self, s: StateId) -> Pose;
    fn state_at(&self, pose: Pose) -> Option<StateId>;
    fn transition_prob(&self, to: StateId, from: StateId, action: Action) -> f64;
}

impl TransitionSource for GenerativeModel {
    fn num_states(&self) -> usize {
        GenerativeModel::num_states(self)
    }

    fn anchor(&self, s: StateId) -> Pose {
        self.state_meta(s).anchor
    }

    fn state_at(&self, pose: Pose) -> Option<StateId> {
        GenerativeModel::state_at(self, pose)
    }

    fn transition_prob(&self, to: StateId, from: StateId, action: Action) -> f64 {
        self.trans_prob(to, from, action)
    }
}

impl TransitionSource for ModelSnapshot {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn anchor(&self, s: StateId) -> Pose {
        self.states[s.0].anchor
    }

    fn state_at(&self, pose: Pose) -> Option<StateId> {
        ModelSnapshot::state_at(self, pose)
    }

    fn transition_prob(&self, to: StateId, from: StateId, action: Action) -> f64 {
        self.transitions[action.index()][from.0][to.0]
    }
}

/// Aligns the agent's pose frame with the world grid. The start room sits
/// at pose `(0,0)`; `y` grows northward while rows grow southward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoseFrame {
    pub start: Room,
}

impl PoseFrame {
    pub fn pose_of(&self, room: Room) -> Pose {
        Pose::new(
            room.col as i32 - self.start.col as i32,
            self.start.row as i32 - room.row as i32,
        )
    }

    /// Grid cell under `pose`, if that cell is a room.
    pub fn room_of(&self, spec: &RoomWorldSpec, pose: Pose) -> Option<Room> {
        let row = self.start.row as i64 - pose.y as i64;
        let col = self.start.col as i64 + pose.x as i64;
        spec.is_room(row, col)
            .then(|| Room::new(row as usize, col as usize))
    }
}

/// Mean probability assigned to the true successor over every visited
/// room and every action. Rooms with no state count as zero.
pub fn transition_accuracy<T: TransitionSource + ?Sized>(
    model: &T,
    spec: &RoomWorldSpec,
    frame: PoseFrame,
    visited: &BTreeSet<Room>,
) -> f64 {
    if visited.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &room in visited {
        for action in Action::ALL {
            let next = spec.successor(room, action);
            let from = model.state_at(frame.pose_of(room));
            let to = model.state_at(frame.pose_of(next));
            if let (Some(from), Some(to)) = (from, to) {
                total += model.transition_prob(to, from, action);
            }
        }
    }
    total / (visited.len() * Action::COUNT) as f64
}

/// One cell of the learned transition tensor, annotated with poses and rooms.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub from_state: StateId,
    pub from_pose: Pose,
    pub from_room: Option<Room>,
    pub action: Action,
    pub to_state: StateId,
    pub to_pose: Pose,
    pub to_room: Option<Room>,
    pub probability: f64,
    /// Whether the world really moves `from_room` to `to_room` under `action`.
    pub feasible: bool,
}

/// Full normalized `B_s` with ground-truth annotations, ordered by
/// `(from_state, action, to_state)`.
pub fn dump_transition_plot<T: TransitionSource + ?Sized>(
    model: &T,
    spec: &RoomWorldSpec,
    frame: PoseFrame,
) -> Vec<TransitionRow> {
    let n = model.num_states();
    let mut rows = Vec::with_capacity(n * n * Action::COUNT);
    for from in (0..n).map(StateId) {
        let from_pose = model.anchor(from);
        let from_room = frame.room_of(spec, from_pose);
        for action in Action::ALL {
            let truth = from_room.map(|r| spec.successor(r, action));
            for to in (0..n).map(StateId) {
                let to_pose = model.anchor(to);
                let to_room = frame.room_of(spec, to_pose);
                rows.push(TransitionRow {
                    from_state: from,
                    from_pose,
                    from_room,
                    action,
                    to_state: to,
                    to_pose,
                    to_room,
                    probability: model.transition_prob(to, from, action),
                    feasible: truth.is_some() && truth == to_room,
                });
            }
        }
    }
    rows
}

/// `(from_state, action)` groups where some infeasible successor is at
/// least as probable as the feasible one. Empty means every learned
/// transition is sharper than every impossible one.
pub fn separation_violations(rows: &[TransitionRow]) -> Vec<(StateId, Action)> {
    let mut out = Vec::new();
    for group in rows.chunk_by(|a, b| a.from_state == b.from_state && a.action == b.action) {
        let Some(correct) = group.iter().find(|r| r.feasible) else {
            continue;
        };
        let worst = group
            .iter()
            .filter(|r| !r.feasible)
            .map(|r| r.probability)
            .fold(0.0, f64::max);
        if correct.probability <= worst {
            out.push((correct.from_state, correct.action));
        }
    }
    out
}
