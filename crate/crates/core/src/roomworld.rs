//! Ground-truth grid-room environments.
//!
//! Rooms sit on a `height x width` grid with row 0 at the north edge. Each
//! room has one floor colour; doors join horizontally or vertically adjacent
//! rooms. Masked cells are not rooms (used for T and ring shapes).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Action;

pub const ENV_FORMAT_VERSION: u32 = 1;

pub const PRESETS: [&str; 7] = [
    "grid3x3",
    "grid3x3_aliased",
    "grid4x4",
    "grid4x4_aliased",
    "tmaze",
    "donut",
    "donut_aliased",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Room {
    pub row: usize,
    pub col: usize,
}

impl Room {
    pub fn new(row: usize, col: usize) -> Self {
        Room { row, col }
    }
}

impl fmt::Display for Room {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}c{}", self.row, self.col)
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("{field}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    Shape {
        field: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("world must have positive width and height")]
    Empty,
    #[error("world has no unmasked rooms")]
    NoRooms,
    #[error("{kind} door at row {row}, col {col} touches a masked cell")]
    DoorToMasked {
        kind: &'static str,
        row: usize,
        col: usize,
    },
    #[error("room at row {row}, col {col} is unreachable from the first room")]
    Disconnected { row: usize, col: usize },
    #[error("colour id {id} at row {row}, col {col} is outside the dense palette 0..{palette}")]
    UnknownColor {
        row: usize,
        col: usize,
        id: usize,
        palette: usize,
    },
    #[error("unsupported env format version {0}")]
    Version(u32),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("invalid env document: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// On-disk environment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EnvDocument {
    format_version: u32,
    width: usize,
    height: usize,
    colors: Vec<Vec<usize>>,
    h_doors: Vec<Vec<bool>>,
    v_doors: Vec<Vec<bool>>,
    mask: Vec<Vec<bool>>,
}

/// A validated room world.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomWorldSpec {
    width: usize,
    height: usize,
    colors: Vec<Vec<usize>>,
    /// `h_doors[r][c]` joins `(r, c)` and `(r, c + 1)`.
    h_doors: Vec<Vec<bool>>,
    /// `v_doors[r][c]` joins `(r, c)` and `(r + 1, c)`.
    v_doors: Vec<Vec<bool>>,
    /// `true` marks a cell that is not a room.
    mask: Vec<Vec<bool>>,
    rooms: Vec<Room>,
}

fn check_shape<T>(
    field: &'static str,
    m: &[Vec<T>],
    rows: usize,
    cols: usize,
) -> Result<(), EnvError> {
    let bad_cols = m.iter().find(|r| r.len() != cols).map(Vec::len);
    if m.len() != rows || bad_cols.is_some() {
        return Err(EnvError::Shape {
            field,
            expected_rows: rows,
            expected_cols: cols,
            rows: m.len(),
            cols: bad_cols.unwrap_or(cols),
        });
    }
    Ok(())
}

impl RoomWorldSpec {
    pub fn new(
        colors: Vec<Vec<usize>>,
        h_doors: Vec<Vec<bool>>,
        v_doors: Vec<Vec<bool>>,
        mask: Vec<Vec<bool>>,
    ) -> Result<Self, EnvError> {
        let height = colors.len();
        let width = colors.first().map_or(0, Vec::len);
        if width == 0 || height == 0 {
            return Err(EnvError::Empty);
        }
        check_shape("colors", &colors, height, width)?;
        check_shape("h_doors", &h_doors, height, width - 1)?;
        check_shape("v_doors", &v_doors, height - 1, width)?;
        check_shape("mask", &mask, height, width)?;

        let rooms: Vec<Room> = (0..height)
            .flat_map(|r| (0..width).map(move |c| Room::new(r, c)))
            .filter(|room| !mask[room.row][room.col])
            .collect();
        if rooms.is_empty() {
            return Err(EnvError::NoRooms);
        }
        for (r, row) in h_doors.iter().enumerate() {
            for (c, &door) in row.iter().enumerate() {
                if door && (mask[r][c] || mask[r][c + 1]) {
                    return Err(EnvError::DoorToMasked {
                        kind: "east-west",
                        row: r,
                        col: c,
                    });
                }
            }
        }
        for (r, row) in v_doors.iter().enumerate() {
            for (c, &door) in row.iter().enumerate() {
                if door && (mask[r][c] || mask[r + 1][c]) {
                    return Err(EnvError::DoorToMasked {
                        kind: "north-south",
                        row: r,
                        col: c,
                    });
                }
            }
        }
        let palette: BTreeSet<usize> = rooms.iter().map(|rm| colors[rm.row][rm.col]).collect();
        for rm in &rooms {
            let id = colors[rm.row][rm.col];
            if id >= palette.len() {
                return Err(EnvError::UnknownColor {
                    row: rm.row,
                    col: rm.col,
                    id,
                    palette: palette.len(),
                });
            }
        }

        let spec = RoomWorldSpec {
            width,
            height,
            colors,
            h_doors,
            v_doors,
            mask,
            rooms,
        };
        spec.check_connected()?;
        Ok(spec)
    }

    fn check_connected(&self) -> Result<(), EnvError> {
        let mut seen = vec![false; self.rooms.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for a in Action::CARDINAL {
                if let Some(n) = self.neighbor(self.rooms[i], a) {
                    let j = self.room_index(n).expect("neighbours are rooms");
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(EnvError::Disconnected {
                row: self.rooms[i].row,
                col: self.rooms[i].col,
            }),
            None => Ok(()),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Unmasked rooms in row-major order.
    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn num_rooms(&self) -> usize {
        self.rooms.len()
    }

    pub fn room_index(&self, room: Room) -> Option<usize> {
        self.rooms.binary_search(&room).ok()
    }

    pub fn is_room(&self, row: i64, col: i64) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && !self.mask[row as usize][col as usize]
    }

    pub fn color(&self, room: Room) -> usize {
        self.colors[room.row][room.col]
    }

    pub fn num_colors(&self) -> usize {
        self.rooms
            .iter()
            .map(|&r| self.color(r))
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn num_doors(&self) -> usize {
        let count = |m: &Vec<Vec<bool>>| m.iter().flatten().filter(|&&d| d).count();
        count(&self.h_doors) + count(&self.v_doors)
    }

    /// Room reached through a door in direction `action`, if there is one.
    pub fn neighbor(&self, room: Room, action: Action) -> Option<Room> {
        let Room { row: r, col: c } = room;
        match action {
            Action::North if r > 0 && self.v_doors[r - 1][c] => Some(Room::new(r - 1, c)),
            Action::South if r + 1 < self.height && self.v_doors[r][c] => Some(Room::new(r + 1, c)),
            Action::West if c > 0 && self.h_doors[r][c - 1] => Some(Room::new(r, c - 1)),
            Action::East if c + 1 < self.width && self.h_doors[r][c] => Some(Room::new(r, c + 1)),
            _ => None,
        }
    }

    /// Cardinal directions without a door out of `room`.
    pub fn blocked_dirs(&self, room: Room) -> BTreeSet<Action> {
        Action::CARDINAL
            .into_iter()
            .filter(|&a| self.neighbor(room, a).is_none())
            .collect()
    }

    /// Room reached by `action` from `room`; walls and `Stay` keep the agent in place.
    pub fn successor(&self, room: Room, action: Action) -> Room {
        self.neighbor(room, action).unwrap_or(room)
    }

    /// One-hot tensor `[action][from_room][to_room]` over dense room indices.
    pub fn ground_truth_transitions(&self) -> Vec<Vec<Vec<f64>>> {
        let n = self.rooms.len();
        Action::ALL
            .iter()
            .map(|&a| {
                self.rooms
                    .iter()
                    .map(|&room| {
                        let mut column = vec![0.0; n];
                        let to = self
                            .room_index(self.successor(room, a))
                            .expect("successor is a room");
                        column[to] = 1.0;
                        column
                    })
                    .collect()
            })
            .collect()
    }

    /// Uniformly random start room.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (EnvState, Percept) {
        let room = self.rooms[rng.gen_range(0..self.rooms.len())];
        self.reset_at(room)
    }

    pub fn reset_at(&self, room: Room) -> (EnvState, Percept) {
        assert!(
            self.room_index(room).is_some(),
            "start cell {room} is not a room"
        );
        let state = EnvState {
            agent_room: room,
            step_count: 0,
        };
        let percept = Percept {
            moved: false,
            color: self.color(room),
            blocked_dirs: self.blocked_dirs(room),
        };
        (state, percept)
    }

    pub fn step(&self, state: &EnvState, action: Action) -> (EnvState, Percept) {
        let (room, moved) = match self.neighbor(state.agent_room, action) {
            Some(next) => (next, true),
            None => (state.agent_room, false),
        };
        let next = EnvState {
            agent_room: room,
            step_count: state.step_count + 1,
        };
        let percept = Percept {
            moved,
            color: self.color(room),
            blocked_dirs: self.blocked_dirs(room),
        };
        (next, percept)
    }

    pub fn to_toml(&self) -> String {
        let doc = EnvDocument {
            format_version: ENV_FORMAT_VERSION,
            width: self.width,
            height: self.height,
            colors: self.colors.clone(),
            h_doors: self.h_doors.clone(),
            v_doors: self.v_doors.clone(),
            mask: self.mask.clone(),
        };
        toml::to_string(&doc).expect("env document is always serializable")
    }

    pub fn from_toml(text: &str) -> Result<Self, EnvError> {
        let doc: EnvDocument = toml::from_str(text)?;
        if doc.format_version != ENV_FORMAT_VERSION {
            return Err(EnvError::Version(doc.format_version));
        }
        let spec = RoomWorldSpec::new(doc.colors, doc.h_doors, doc.v_doors, doc.mask)?;
        if spec.width != doc.width || spec.height != doc.height {
            return Err(EnvError::Shape {
                field: "width/height",
                expected_rows: doc.height,
                expected_cols: doc.width,
                rows: spec.height,
                cols: spec.width,
            });
        }
        Ok(spec)
    }

    /// Loads a preset by name or, failing that, a config file at that path.
    pub fn load(source: &str) -> Result<Self, EnvError> {
        if let Some(spec) = preset(source) {
            return Ok(spec);
        }
        let path = std::path::Path::new(source);
        if path.exists() {
            return Self::from_toml(&std::fs::read_to_string(path)?);
        }
        Err(EnvError::UnknownPreset(source.to_string()))
    }

    /// Fully connected grid with the given colour layout.
    pub fn open_grid(colors: Vec<Vec<usize>>) -> Result<Self, EnvError> {
        let h = colors.len();
        let w = colors.first().map_or(0, Vec::len);
        if w == 0 || h == 0 {
            return Err(EnvError::Empty);
        }
        Self::new(
            colors,
            vec![vec![true; w - 1]; h],
            vec![vec![true; w]; h - 1],
            vec![vec![false; w]; h],
        )
    }

    /// Grid where doors join every pair of adjacent unmasked cells.
    pub fn masked_grid(colors: Vec<Vec<usize>>, mask: Vec<Vec<bool>>) -> Result<Self, EnvError> {
        let h = colors.len();
        let w = colors.first().map_or(0, Vec::len);
        if w == 0 || h == 0 {
            return Err(EnvError::Empty);
        }
        check_shape("mask", &mask, h, w)?;
        let h_doors = (0..h)
            .map(|r| (0..w - 1).map(|c| !mask[r][c] && !mask[r][c + 1]).collect())
            .collect();
        let v_doors = (0..h - 1)
            .map(|r| (0..w).map(|c| !mask[r][c] && !mask[r + 1][c]).collect())
            .collect();
        Self::new(colors, h_doors, v_doors, mask)
    }

    /// T-shaped corridor: a bar of `2 * arm_len + 1` rooms on the north edge
    /// and a stem of `stem_len` rooms hanging from its middle.
    pub fn tmaze(arm_len: usize, stem_len: usize, aliased: bool) -> Result<Self, EnvError> {
        let w = 2 * arm_len + 1;
        let h = stem_len + 1;
        let mut mask = vec![vec![true; w]; h];
        mask[0].iter_mut().for_each(|m| *m = false);
        for row in mask.iter_mut().skip(1) {
            row[arm_len] = false;
        }
        let mut colors = vec![vec![0; w]; h];
        let mut next = 0;
        for r in 0..h {
            for c in 0..w {
                if !mask[r][c] {
                    colors[r][c] = if aliased { next % 3 } else { next };
                    next += 1;
                }
            }
        }
        Self::masked_grid(colors, mask)
    }

    /// Square ring: a `side x side` grid with the centre block masked.
    pub fn donut(side: usize, hole: usize, palette: Option<usize>) -> Result<Self, EnvError> {
        let lo = (side - hole) / 2;
        let mask: Vec<Vec<bool>> = (0..side)
            .map(|r| {
                (0..side)
                    .map(|c| (lo..lo + hole).contains(&r) && (lo..lo + hole).contains(&c))
                    .collect()
            })
            .collect();
        let mut colors = vec![vec![0; side]; side];
        let mut next = 0;
        for r in 0..side {
            for c in 0..side {
                if !mask[r][c] {
                    colors[r][c] = palette.map_or(next, |k| next % k);
                    next += 1;
                }
            }
        }
        Self::masked_grid(colors, mask)
    }
}

/// Built-in environments.
pub fn preset(name: &str) -> Option<RoomWorldSpec> {
    let spec = match name {
        "grid3x3" => RoomWorldSpec::open_grid(vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]]),
        "grid3x3_aliased" => {
            RoomWorldSpec::open_grid(vec![vec![0, 1, 2], vec![3, 0, 4], vec![2, 5, 1]])
        }
        "grid4x4" => RoomWorldSpec::open_grid(
            (0..4)
                .map(|r| (0..4).map(|c| 4 * r + c).collect())
                .collect(),
        ),
        "grid4x4_aliased" => RoomWorldSpec::open_grid(vec![
            vec![0, 1, 2, 3],
            vec![4, 5, 0, 1],
            vec![2, 3, 4, 5],
            vec![5, 0, 1, 2],
        ]),
        "tmaze" => RoomWorldSpec::tmaze(1, 4, false),
        "donut" => RoomWorldSpec::donut(4, 2, None),
        "donut_aliased" => RoomWorldSpec::donut(4, 2, Some(4)),
        _ => return None,
    };
    Some(spec.expect("presets are valid"))
}

/// Live environment state for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvState {
    pub agent_room: Room,
    pub step_count: usize,
}

impl EnvState {
    /// Relocates the agent without it noticing; used to exercise the
    /// kidnapped-agent path.
    pub fn teleport(&mut self, room: Room) {
        self.agent_room = room;
    }
}

/// Raw environment feedback: door traversal, floor colour, local walls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Percept {
    pub moved: bool,
    pub color: usize,
    pub blocked_dirs: BTreeSet<Action>,
}
