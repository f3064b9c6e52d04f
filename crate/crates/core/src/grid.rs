//! Occupancy grids, integer line tracing, the range sensor and frontier detection.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Ternary cell state shared by ground-truth and belief grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Cell {
    Unknown,
    Free,
    Obstacle,
}

/// Integer cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub x: usize,
    pub y: usize,
}

impl CellIndex {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Squared distance in cell units.
    pub fn dist2(self, other: CellIndex) -> i64 {
        let dx = self.x as i64 - other.x as i64;
        let dy = self.y as i64 - other.y as i64;
        dx * dx + dy * dy
    }
}

/// A point in world meters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
}

impl Pose2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Pose2) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Inclusive rectangle of cells, used to report which part of a grid changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRect {
    pub min: CellIndex,
    pub max: CellIndex,
}

impl CellRect {
    pub fn point(c: CellIndex) -> Self {
        Self { min: c, max: c }
    }

    pub fn include(&mut self, c: CellIndex) {
        self.min.x = self.min.x.min(c.x);
        self.min.y = self.min.y.min(c.y);
        self.max.x = self.max.x.max(c.x);
        self.max.y = self.max.y.max(c.y);
    }

    pub fn intersects(&self, other: &CellRect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2, fill: Cell) -> Self {
        Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![fill; width * height],
        }
    }

    /// Builds a grid from row-major cells (row `y` occupies `cells[y * width..][..width]`).
    pub fn from_cells(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2,
        cells: Vec<Cell>,
    ) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::Config("cell count does not match grid dimensions"));
        }
        if !(resolution > 0.0) {
            return Err(Error::Config("grid resolution must be positive"));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// An all-Unknown grid with the same geometry.
    pub fn unknown_like(&self) -> Self {
        Self::new(self.width, self.height, self.resolution, self.origin, Cell::Unknown)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2 {
        self.origin
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn linear(&self, c: CellIndex) -> usize {
        c.y * self.width + c.x
    }

    #[inline]
    pub fn unlinear(&self, i: usize) -> CellIndex {
        CellIndex::new(i % self.width, i / self.width)
    }

    #[inline]
    pub fn get(&self, c: CellIndex) -> Cell {
        self.cells[c.y * self.width + c.x]
    }

    #[inline]
    pub fn set(&mut self, c: CellIndex, v: Cell) {
        let w = self.width;
        self.cells[c.y * w + c.x] = v;
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn count(&self, state: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// World position of the cell center.
    pub fn cell_center(&self, c: CellIndex) -> Pose2 {
        Pose2::new(
            self.origin.x + (c.x as f64 + 0.5) * self.resolution,
            self.origin.y + (c.y as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_at(&self, p: Pose2) -> Option<CellIndex> {
        let fx = libm::floor((p.x - self.origin.x) / self.resolution);
        let fy = libm::floor((p.y - self.origin.y) / self.resolution);
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let c = CellIndex::new(fx as usize, fy as usize);
        self.contains(c).then_some(c)
    }

    /// In-bounds 8-neighborhood of a cell.
    pub fn neighbors8(&self, c: CellIndex) -> impl Iterator<Item = CellIndex> + '_ {
        let (x, y) = (c.x as i64, c.y as i64);
        (-1i64..=1)
            .flat_map(move |dy| (-1i64..=1).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx != 0 || dy != 0)
            .filter_map(move |(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                (nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height)
                    .then(|| CellIndex::new(nx as usize, ny as usize))
            })
    }
}

/// Visits the cells of the integer line between `a` and `b`, endpoints included.
///
/// The traversal always runs from the lexicographically smaller endpoint
/// (by `(y, x)`), so the visited set is the same whichever way the segment is
/// named. The visitor returns `false` to stop early; the function returns
/// `false` in that case.
pub fn visit_line(a: CellIndex, b: CellIndex, mut visit: impl FnMut(CellIndex) -> bool) -> bool {
    let (s, e) = if (a.y, a.x) <= (b.y, b.x) { (a, b) } else { (b, a) };
    let (mut x, mut y) = (s.x as i64, s.y as i64);
    let (x1, y1) = (e.x as i64, e.y as i64);
    let dx = (x1 - x).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let dy = -(y1 - y).abs();
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if !visit(CellIndex::new(x as usize, y as usize)) {
            return false;
        }
        if x == x1 && y == y1 {
            return true;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Cells of the line from `from` to `to`, ordered starting at `from`.
pub fn trace_line(from: CellIndex, to: CellIndex, out: &mut Vec<CellIndex>) {
    out.clear();
    visit_line(from, to, |c| {
        out.push(c);
        true
    });
    if out.first() != Some(&from) {
        out.reverse();
    }
}

/// True iff every cell on the discretized segment is Free in `grid`.
pub fn cells_visible(grid: &OccupancyGrid, a: CellIndex, b: CellIndex) -> bool {
    visit_line(a, b, |c| grid.get(c) == Cell::Free)
}

/// Line of sight between two world points through Free cells; Unknown blocks.
pub fn line_of_sight(grid: &OccupancyGrid, a: Pose2, b: Pose2) -> bool {
    match (grid.cell_at(a), grid.cell_at(b)) {
        (Some(ca), Some(cb)) => cells_visible(grid, ca, cb),
        _ => false,
    }
}

/// Omnidirectional range sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorConfig {
    /// Range in meters.
    pub range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self { range: 20.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScanReport {
    /// Cells that went from Unknown to Free/Obstacle.
    pub revealed: usize,
    pub dirty: Option<CellRect>,
}

/// Copies the cells visible from `pose` out of `truth` into `belief`.
///
/// A ray is cast to every cell of the range disc (the disc rim included). Each
/// ray copies cells from the pose outward until and including its first
/// truth-Obstacle cell. Every Free cell reached by a ray that lies at least one
/// cell diagonal inside the rim also reveals its 8 neighbors, so a Free cell in
/// line of sight of the pose is never left bordering Unknown space after the
/// scan. Known cells never change.
pub fn raycast_scan(
    truth: &OccupancyGrid,
    belief: &mut OccupancyGrid,
    pose: Pose2,
    cfg: &SensorConfig,
) -> Result<ScanReport> {
    if !(cfg.range > 0.0) {
        return Err(Error::Config("sensor range must be positive"));
    }
    if truth.width != belief.width || truth.height != belief.height {
        return Err(Error::Config("truth and belief grids differ in size"));
    }
    let center = truth
        .cell_at(pose)
        .ok_or(Error::Precondition("sensor pose outside the grid"))?;
    if truth.get(center) != Cell::Free {
        return Err(Error::Precondition("sensor pose is not on a free cell"));
    }

    let r = cfg.range / truth.resolution;
    let r2 = r * r;
    let inner = (r - core::f64::consts::SQRT_2).max(0.0);
    let inner2 = inner * inner;
    let ri = libm::floor(r) as i64;

    let x0 = (center.x as i64 - ri).max(0) as usize;
    let y0 = (center.y as i64 - ri).max(0) as usize;
    let x1 = ((center.x as i64 + ri) as usize).min(truth.width - 1);
    let y1 = ((center.y as i64 + ri) as usize).min(truth.height - 1);
    let bw = x1 - x0 + 1;
    let mut visible = vec![false; bw * (y1 - y0 + 1)];
    let mut ray = Vec::with_capacity(2 * ri as usize + 2);

    for ty in y0..=y1 {
        for tx in x0..=x1 {
            let target = CellIndex::new(tx, ty);
            if (target.dist2(center) as f64) > r2 {
                continue;
            }
            trace_line(center, target, &mut ray);
            for &c in &ray {
                visible[(c.y - y0) * bw + (c.x - x0)] = true;
                if truth.get(c) == Cell::Obstacle {
                    break;
                }
            }
        }
    }

    let mut report = ScanReport::default();
    let reveal = |belief: &mut OccupancyGrid, c: CellIndex, report: &mut ScanReport| {
        if belief.get(c) == Cell::Unknown {
            belief.set(c, truth.get(c));
            report.revealed += 1;
            match report.dirty.as_mut() {
                Some(rect) => rect.include(c),
                None => report.dirty = Some(CellRect::point(c)),
            }
        }
    };
    for ty in y0..=y1 {
        for tx in x0..=x1 {
            if !visible[(ty - y0) * bw + (tx - x0)] {
                continue;
            }
            let c = CellIndex::new(tx, ty);
            reveal(belief, c, &mut report);
            if truth.get(c) == Cell::Free && (c.dist2(center) as f64) <= inner2 {
                for n in truth.neighbors8(c) {
                    reveal(belief, n, &mut report);
                }
            }
        }
    }
    Ok(report)
}

/// Free cells bordering Unknown space, as sorted linear indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrontierSet {
    pub cells: Vec<usize>,
}

impl FrontierSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, linear: usize) -> bool {
        self.cells.binary_search(&linear).is_ok()
    }
}

/// Free cells of `belief` with at least one Unknown cell in their 8-neighborhood.
pub fn detect_frontiers(belief: &OccupancyGrid) -> FrontierSet {
    frontiers_where(belief, |c| belief.get(c) == Cell::Free)
}

/// Cells passing `is_candidate` that have an Unknown belief neighbor.
pub(crate) fn frontiers_where(
    belief: &OccupancyGrid,
    is_candidate: impl Fn(CellIndex) -> bool,
) -> FrontierSet {
    let mut cells = Vec::new();
    for y in 0..belief.height {
        for x in 0..belief.width {
            let c = CellIndex::new(x, y);
            if is_candidate(c) && belief.neighbors8(c).any(|n| belief.get(n) == Cell::Unknown) {
                cells.push(belief.linear(c));
            }
        }
    }
    FrontierSet { cells }
}
