//! Seeded rooms-and-corridors ("dungeon") ground-truth maps.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Cell, CellIndex, OccupancyGrid, Pose2};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MapGenParams {
    pub width: usize,
    pub height: usize,
    /// Cell size in meters.
    pub resolution: f64,
    /// Upper bound on the number of rooms; placement may stop early when the map is full.
    pub rooms: usize,
    pub room_min: usize,
    pub room_max: usize,
    /// Corridor width in cells.
    pub corridor_width: usize,
}

impl Default for MapGenParams {
    fn default() -> Self {
        Self::for_size(250, 250)
    }
}

impl MapGenParams {
    /// Defaults scaled to the map area: one room per 5000 cells, capped at ten.
    pub fn for_size(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            resolution: 0.4,
            rooms: (width * height / 5000).clamp(1, 10),
            room_min: 24,
            room_max: 48,
            corridor_width: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 5 || self.height < 5 {
            return Err(Error::Config("map must be at least 5x5 cells"));
        }
        if self.rooms == 0 {
            return Err(Error::Config("map needs at least one room"));
        }
        if self.room_min == 0 || self.room_min > self.room_max {
            return Err(Error::Config("room size range is empty"));
        }
        if self.corridor_width == 0 {
            return Err(Error::Config("corridor width must be positive"));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::Config("map resolution must be positive"));
        }
        Ok(())
    }
}

/// Axis-aligned room, inclusive bounds in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Room {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Room {
    pub fn center(&self) -> CellIndex {
        CellIndex::new((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)
    }

    fn overlaps(&self, other: &Room, gap: usize) -> bool {
        self.x0 <= other.x1 + gap
            && other.x0 <= self.x1 + gap
            && self.y0 <= other.y1 + gap
            && other.y0 <= self.y1 + gap
    }
}

#[derive(Clone, Debug)]
pub struct Dungeon {
    pub grid: OccupancyGrid,
    pub rooms: Vec<Room>,
}

impl Dungeon {
    /// Center of the first room; every Free cell is reachable from it.
    pub fn start(&self) -> CellIndex {
        self.rooms[0].center()
    }
}

pub fn generate_dungeon_map(seed: u64, params: &MapGenParams) -> Result<OccupancyGrid> {
    generate_dungeon(seed, params).map(|d| d.grid)
}

pub fn generate_dungeon(seed: u64, params: &MapGenParams) -> Result<Dungeon> {
    params.validate()?;
    let (w, h) = (params.width, params.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = OccupancyGrid::new(w, h, params.resolution, Pose2::default(), Cell::Obstacle);

    let span = |limit: usize| {
        let hi = params.room_max.min(limit);
        (params.room_min.min(hi), hi)
    };
    let (wmin, wmax) = span(w - 2);
    let (hmin, hmax) = span(h - 2);

    let mut rooms: Vec<Room> = Vec::new();
    let attempts = 60 * params.rooms;
    for _ in 0..attempts {
        if rooms.len() == params.rooms {
            break;
        }
        let rw = rng.gen_range(wmin..=wmax);
        let rh = rng.gen_range(hmin..=hmax);
        let x0 = rng.gen_range(1..=w - 1 - rw);
        let y0 = rng.gen_range(1..=h - 1 - rh);
        let room = Room {
            x0,
            y0,
            x1: x0 + rw - 1,
            y1: y0 + rh - 1,
        };
        if rooms.iter().all(|r| !r.overlaps(&room, 2)) {
            rooms.push(room);
        }
    }
    debug_assert!(!rooms.is_empty());

    for r in &rooms {
        carve(&mut grid, r.x0, r.y0, r.x1, r.y1);
    }
    let cw = params.corridor_width;
    let lo = |c: usize| c.saturating_sub(cw / 2);
    let hi = |c: usize| lo(c) + cw - 1;
    for pair in rooms.windows(2) {
        let (a, b) = (pair[0].center(), pair[1].center());
        // horizontal leg along a's row, then vertical leg along b's column
        carve(&mut grid, lo(a.x.min(b.x)), lo(a.y), hi(a.x.max(b.x)), hi(a.y));
        carve(&mut grid, lo(b.x), lo(a.y.min(b.y)), hi(b.x), hi(a.y.max(b.y)));
    }

    Ok(Dungeon { grid, rooms })
}

/// Marks an inclusive rectangle Free, clipped to the grid interior.
fn carve(grid: &mut OccupancyGrid, x0: usize, y0: usize, x1: usize, y1: usize) {
    let (w, h) = (grid.width(), grid.height());
    let (x0, y0) = (x0.max(1), y0.max(1));
    let (x1, y1) = (x1.min(w - 2), y1.min(h - 2));
    for y in y0..=y1 {
        for x in x0..=x1 {
            grid.set(CellIndex::new(x, y), Cell::Free);
        }
    }
}
