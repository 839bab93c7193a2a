//! Shortest walk that visits every room at least once.

use thiserror::Error;

use crate::model::Action;
use crate::roomworld::{Room, RoomWorldSpec};

/// Largest world the exhaustive search accepts.
pub const MAX_ORACLE_ROOMS: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{0} rooms exceeds the covering-walk search budget of {MAX_ORACLE_ROOMS}")]
    TooManyRooms(usize),
    #[error("start cell {0} is not a room")]
    BadStart(Room),
}

/// Length of the shortest covering walk from `start`.
///
/// Breadth-first search over `(room, visited set)` pairs, so the first
/// layer that reaches a full visited set is optimal.
pub fn oracle_steps(spec: &RoomWorldSpec, start: Room) -> Result<usize, OracleError> {
    let n = spec.num_rooms();
    if n > MAX_ORACLE_ROOMS {
        return Err(OracleError::TooManyRooms(n));
    }
    let start = spec.room_index(start).ok_or(OracleError::BadStart(start))?;
    let neighbors: Vec<Vec<usize>> = spec
        .rooms()
        .iter()
        .map(|&room| {
            Action::CARDINAL
                .iter()
                .filter_map(|&a| spec.neighbor(room, a))
                .map(|r| spec.room_index(r).expect("neighbour is a room"))
                .collect()
        })
        .collect();

    let full: u32 = (1u32 << n) - 1;
    let key = |room: usize, mask: u32| ((mask as usize) << 5) | room;
    let mut seen = vec![0u64; (key(n - 1, full) >> 6) + 1];
    let mut mark = |k: usize| {
        let (w, b) = (k >> 6, k & 63);
        let fresh = seen[w] & (1 << b) == 0;
        seen[w] |= 1 << b;
        fresh
    };

    let mut frontier = vec![(start, 1u32 << start)];
    mark(key(start, 1 << start));
    let mut depth = 0;
    loop {
        if frontier.iter().any(|&(_, mask)| mask == full) {
            return Ok(depth);
        }
        let mut next = Vec::new();
        for &(room, mask) in &frontier {
            for &nb in &neighbors[room] {
                let m = mask | (1 << nb);
                if mark(key(nb, m)) {
                    next.push((nb, m));
                }
            }
        }
        debug_assert!(
            !next.is_empty(),
            "connected world always reaches full coverage"
        );
        frontier = next;
        depth += 1;
    }
}
