//! Probabilistic occupancy grid with dynamic growth and copy-on-write tiles.
//!
//! Cells store clamped log-odds with a distinguished "never observed" state.
//! Storage is a sparse collection of fixed-size square tiles held behind
//! atomically reference-counted pointers: cloning a grid copies tile handles
//! only, and the first write to a shared tile materializes a private copy.

mod local;
mod pgm;

pub use local::LocalBinaryMap;
pub use pgm::{export_pgm, PgmError};

use crate::geometry::Pose2D;
use crate::scan_match::Scan;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

/// Cells per tile edge.
pub const TILE_SIZE: i32 = 64;
const TILE_AREA: usize = (TILE_SIZE * TILE_SIZE) as usize;

/// Log-odds clamp bounds.
pub const LOG_ODDS_MIN: f64 = -10.0;
pub const LOG_ODDS_MAX: f64 = 10.0;

/// Default log-odds increment for a beam endpoint cell.
pub const DEFAULT_LOG_ODDS_HIT: f64 = 0.85;
/// Default log-odds increment for cells a beam passed through.
pub const DEFAULT_LOG_ODDS_MISS: f64 = -0.4;

// Sentinel for never-observed cells; valid log-odds are clamped to ±10.
const UNOBSERVED: f64 = f64::INFINITY;

/// Integer grid cell index. May be negative: the grid grows in every
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub cx: i32,
    pub cy: i32,
}

impl CellIndex {
    pub fn new(cx: i32, cy: i32) -> Self {
        Self { cx, cy }
    }

    pub fn offset(self, kx: i32, ky: i32) -> Self {
        Self {
            cx: self.cx + kx,
            cy: self.cy + ky,
        }
    }
}

/// Inverse log-odds: the occupancy probability `1 / (1 + exp(-l))`.
pub fn probability_from_log_odds(log_odds: f64) -> f64 {
    1.0 / (1.0 + (-log_odds).exp())
}

#[derive(Clone)]
struct Tile {
    cells: Box<[f64; TILE_AREA]>,
}

impl Tile {
    fn new() -> Self {
        Self {
            cells: Box::new([UNOBSERVED; TILE_AREA]),
        }
    }
}

/// Diagnostics from one scan integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AddScanStats {
    pub beams_used: usize,
    pub beams_skipped: usize,
}

/// A dynamically growing occupancy grid map.
#[derive(Clone)]
pub struct OccupancyGrid {
    origin: (f64, f64),
    resolution: f64,
    log_odds_hit: f64,
    log_odds_miss: f64,
    tiles: HashMap<(i32, i32), Arc<Tile>>,
}

impl OccupancyGrid {
    /// Create an empty grid. `resolution` is the cell edge in meters.
    pub fn new(origin: (f64, f64), resolution: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            origin,
            resolution,
            log_odds_hit: DEFAULT_LOG_ODDS_HIT,
            log_odds_miss: DEFAULT_LOG_ODDS_MISS,
            tiles: HashMap::new(),
        }
    }

    /// Override the binary Bayes increments applied by [`add_scan`].
    ///
    /// [`add_scan`]: OccupancyGrid::add_scan
    pub fn with_update_model(mut self, log_odds_hit: f64, log_odds_miss: f64) -> Self {
        self.log_odds_hit = log_odds_hit;
        self.log_odds_miss = log_odds_miss;
        self
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    /// Approximate heap footprint of the tile storage in bytes, counting each
    /// tile once even when shared with clones of this grid.
    pub fn tile_bytes(&self) -> usize {
        self.tiles.len() * TILE_AREA * std::mem::size_of::<f64>()
    }

    /// Grid cell containing a world point, using mathematical floor.
    ///
    /// The float quotient is reconciled against the exact cell boundaries as
    /// evaluated by [`cell_to_world`], so points landing on a boundary go to
    /// the cell whose origin they equal.
    ///
    /// [`cell_to_world`]: OccupancyGrid::cell_to_world
    pub fn world_to_cell(&self, x: f64, y: f64) -> CellIndex {
        CellIndex {
            cx: axis_cell(x, self.origin.0, self.resolution),
            cy: axis_cell(y, self.origin.1, self.resolution),
        }
    }

    /// World coordinates of a cell's minimum corner: `origin + index * Δ`.
    pub fn cell_to_world(&self, cell: CellIndex) -> (f64, f64) {
        (
            self.origin.0 + cell.cx as f64 * self.resolution,
            self.origin.1 + cell.cy as f64 * self.resolution,
        )
    }

    fn split_index(cell: CellIndex) -> ((i32, i32), usize) {
        let tx = cell.cx.div_euclid(TILE_SIZE);
        let ty = cell.cy.div_euclid(TILE_SIZE);
        let lx = cell.cx.rem_euclid(TILE_SIZE) as usize;
        let ly = cell.cy.rem_euclid(TILE_SIZE) as usize;
        ((tx, ty), ly * TILE_SIZE as usize + lx)
    }

    /// Log-odds of a cell, or `None` if it was never observed.
    pub fn log_odds(&self, cell: CellIndex) -> Option<f64> {
        let (tile_key, idx) = Self::split_index(cell);
        let value = *self.tiles.get(&tile_key)?.cells.get(idx)?;
        if value == UNOBSERVED {
            None
        } else {
            Some(value)
        }
    }

    /// Occupancy probability of a cell, `None` if never observed.
    pub fn probability(&self, cell: CellIndex) -> Option<f64> {
        self.log_odds(cell).map(probability_from_log_odds)
    }

    /// Whether a cell's occupancy probability exceeds `threshold`.
    /// Never-observed cells are not occupied.
    pub fn is_occupied(&self, cell: CellIndex, threshold: f64) -> bool {
        match self.probability(cell) {
            Some(p) => p > threshold,
            None => false,
        }
    }

    /// Add `increment` to a cell's log-odds, clamping to
    /// [`LOG_ODDS_MIN`, `LOG_ODDS_MAX`]. Allocates the tile on first write;
    /// shared tiles are copied before mutation.
    pub fn update_cell(&mut self, cell: CellIndex, increment: f64) {
        let (tile_key, idx) = Self::split_index(cell);
        let tile = self.tiles.entry(tile_key).or_insert_with(|| Arc::new(Tile::new()));
        let cells = &mut Arc::make_mut(tile).cells;
        let prior = if cells[idx] == UNOBSERVED { 0.0 } else { cells[idx] };
        cells[idx] = (prior + increment).clamp(LOG_ODDS_MIN, LOG_ODDS_MAX);
    }

    /// Integrate one scan taken from `pose`.
    ///
    /// Each valid beam's endpoint cell receives the hit increment and every
    /// cell the beam traversed (per Bresenham, endpoint excluded) receives
    /// the miss increment. Invalid beams are skipped and counted.
    pub fn add_scan(&mut self, pose: &Pose2D, scan: &Scan) -> AddScanStats {
        let mut stats = AddScanStats::default();
        let sensor_cell = self.world_to_cell(pose.x, pose.y);
        for beam in &scan.beams {
            if !scan.beam_valid(beam) {
                stats.beams_skipped += 1;
                continue;
            }
            let (hx, hy) = crate::scan_match::project_beam(pose, beam);
            let hit_cell = self.world_to_cell(hx, hy);
            for cell in bresenham(sensor_cell, hit_cell) {
                self.update_cell(cell, self.log_odds_miss);
            }
            self.update_cell(hit_cell, self.log_odds_hit);
            stats.beams_used += 1;
        }
        stats
    }

    /// Clip a `2W x 2W` window centered on the cell under `pose` and binarize
    /// it against `threshold`: bit set iff occupancy probability exceeds the
    /// threshold. Never-observed and out-of-grid cells are zero.
    pub fn extract_local_map(
        &self,
        pose: &Pose2D,
        half_width: i32,
        threshold: f64,
    ) -> LocalBinaryMap {
        assert!(half_width > 0, "local map half-width must be positive");
        let center = self.world_to_cell(pose.x, pose.y);
        let mut local = LocalBinaryMap::new(center, half_width, self.resolution, self.origin);
        for ky in -half_width..half_width {
            for kx in -half_width..half_width {
                if self.is_occupied(center.offset(kx, ky), threshold) {
                    local.set_offset(kx, ky);
                }
            }
        }
        local
    }

    /// Bounding cell rectangle of all observed cells:
    /// `(min_cx, min_cy, max_cx, max_cy)` inclusive. `None` if nothing was
    /// ever observed.
    pub fn observed_bounds(&self) -> Option<(i32, i32, i32, i32)> {
        let mut bounds: Option<(i32, i32, i32, i32)> = None;
        for (&(tx, ty), tile) in &self.tiles {
            for (idx, &value) in tile.cells.iter().enumerate() {
                if value == UNOBSERVED {
                    continue;
                }
                let cx = tx * TILE_SIZE + (idx as i32 % TILE_SIZE);
                let cy = ty * TILE_SIZE + (idx as i32 / TILE_SIZE);
                bounds = Some(match bounds {
                    None => (cx, cy, cx, cy),
                    Some((x0, y0, x1, y1)) => (x0.min(cx), y0.min(cy), x1.max(cx), y1.max(cy)),
                });
            }
        }
        bounds
    }

    fn tile_ptrs(&self) -> impl Iterator<Item = *const Tile> + '_ {
        self.tiles.values().map(Arc::as_ptr)
    }
}

/// Number of distinct tile allocations across a family of grids, counting a
/// shared tile once. Together with [`OccupancyGrid::tile_count`] this exposes
/// how much storage copy-on-write sharing actually saves.
pub fn unique_tile_count<'a>(grids: impl IntoIterator<Item = &'a OccupancyGrid>) -> usize {
    let mut seen: HashSet<*const Tile> = HashSet::new();
    for grid in grids {
        seen.extend(grid.tile_ptrs());
    }
    seen.len()
}

/// Total bytes of cell storage for `unique_tile_count` tiles.
pub fn unique_tile_bytes<'a>(grids: impl IntoIterator<Item = &'a OccupancyGrid>) -> usize {
    unique_tile_count(grids) * TILE_AREA * std::mem::size_of::<f64>()
}

fn axis_cell(v: f64, origin: f64, delta: f64) -> i32 {
    let mut c = ((v - origin) / delta).floor();
    if !c.is_finite() {
        c = 0.0;
    }
    let mut c = c.clamp(i32::MIN as f64 + 1.0, i32::MAX as f64 - 1.0) as i64;
    // the float quotient can land one cell off near boundaries; reconcile
    // against the same expression cell_to_world evaluates
    while v >= origin + (c + 1) as f64 * delta {
        c += 1;
    }
    while v < origin + c as f64 * delta {
        c -= 1;
    }
    c.clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

/// Integer line rasterization from `from` to `to`, inclusive of `from` and
/// exclusive of `to`. 8-connected and deterministic; `from == to` yields an
/// empty path.
pub fn bresenham(from: CellIndex, to: CellIndex) -> Vec<CellIndex> {
    let mut cells = Vec::new();
    if from == to {
        return cells;
    }
    let dx = (to.cx - from.cx).abs();
    let dy = -(to.cy - from.cy).abs();
    let sx = if from.cx < to.cx { 1 } else { -1 };
    let sy = if from.cy < to.cy { 1 } else { -1 };
    let mut err = dx + dy;
    let mut current = from;
    loop {
        cells.push(current);
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            current.cx += sx;
        }
        if e2 <= dx {
            err += dx;
            current.cy += sy;
        }
        if current == to {
            return cells;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_match::Beam;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn grid() -> OccupancyGrid {
        OccupancyGrid::new((0.0, 0.0), 0.05)
    }

    #[test]
    fn world_to_cell_hand_cases() {
        let g = grid();
        assert_eq!(g.world_to_cell(0.12, -0.07), CellIndex::new(2, -2));
        assert_eq!(g.world_to_cell(0.0, 0.0), CellIndex::new(0, 0));
        // boundary case: 1.0 / 0.05 sits exactly on the cell-20 edge
        assert_eq!(g.world_to_cell(1.0, 0.0), CellIndex::new(20, 0));
    }

    #[test]
    fn cell_to_world_hand_cases() {
        let g = grid();
        assert_eq!(g.cell_to_world(CellIndex::new(0, 0)), (0.0, 0.0));
        let (x, y) = g.cell_to_world(CellIndex::new(2, -2));
        assert_abs_diff_eq!(x, 0.10, epsilon = 1e-15);
        assert_abs_diff_eq!(y, -0.10, epsilon = 1e-15);
        // diagonal neighbors sit √2·Δ apart
        let (x0, y0) = g.cell_to_world(CellIndex::new(0, 0));
        let (x1, y1) = g.cell_to_world(CellIndex::new(1, 1));
        assert_abs_diff_eq!(
            ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt(),
            std::f64::consts::SQRT_2 * 0.05,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bresenham_hand_cases() {
        let c = CellIndex::new;
        assert!(bresenham(c(3, 4), c(3, 4)).is_empty());
        assert_eq!(bresenham(c(0, 0), c(3, 0)), vec![c(0, 0), c(1, 0), c(2, 0)]);
        assert_eq!(bresenham(c(0, 0), c(2, 2)), vec![c(0, 0), c(1, 1)]);
        assert_eq!(bresenham(c(0, 0), c(0, -3)), vec![c(0, 0), c(0, -1), c(0, -2)]);
    }

    /// Cells crossed by the segment between two cell centers, found by
    /// stepping at a tenth of a cell. Samples landing on (or within float
    /// noise of) a cell boundary pin no cell and are skipped; the endpoint
    /// cell is excluded to mirror the rasterizer's contract.
    fn ray_stepping_cells(start: CellIndex, end: CellIndex) -> HashSet<CellIndex> {
        let (x0, y0) = (start.cx as f64, start.cy as f64);
        let dx = end.cx as f64 - x0;
        let dy = end.cy as f64 - y0;
        let steps = (dx.hypot(dy) * 10.0).ceil() as usize;
        let mut cells = HashSet::new();
        for i in 0..=steps {
            let t = i as f64 / steps.max(1) as f64;
            let px = x0 + t * dx;
            let py = y0 + t * dy;
            // cell boundaries sit at half-integers in index space
            let fx = px + 0.5;
            let fy = py + 0.5;
            if (fx - fx.round()).abs() < 1e-9 || (fy - fy.round()).abs() < 1e-9 {
                continue;
            }
            let c = CellIndex::new(fx.floor() as i32, fy.floor() as i32);
            if c != end {
                cells.insert(c);
            }
        }
        cells
    }

    #[test]
    fn bresenham_matches_ray_stepping_oracle() {
        // exact agreement away from diagonal steps, where 8-connected
        // Bresenham legitimately cuts corners the continuous segment grazes
        let mut rng_state = 0x9E3779B97F4A7C15u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 33) % 81) as i32 - 40
        };
        for case in 0..100 {
            let start = CellIndex::new(next(), next());
            let end = CellIndex::new(next(), next());
            let path = bresenham(start, end);
            let mut excluded = HashSet::new();
            let mut full_path = path.clone();
            full_path.push(end);
            for pair in full_path.windows(2) {
                if (pair[0].cx - pair[1].cx).abs() == 1 && (pair[0].cy - pair[1].cy).abs() == 1 {
                    excluded.insert(pair[0]);
                    excluded.insert(pair[1]);
                    excluded.insert(CellIndex::new(pair[0].cx, pair[1].cy));
                    excluded.insert(CellIndex::new(pair[1].cx, pair[0].cy));
                }
            }
            let bres: HashSet<CellIndex> = path.into_iter().collect();
            let oracle = ray_stepping_cells(start, end);
            let bres_only: Vec<_> = bres
                .difference(&oracle)
                .filter(|c| !excluded.contains(c))
                .collect();
            let oracle_only: Vec<_> = oracle
                .difference(&bres)
                .filter(|c| !excluded.contains(c))
                .collect();
            assert!(
                bres_only.is_empty() && oracle_only.is_empty(),
                "case {case}: cell sets diverge beyond corner cuts: \
                 bres_only={bres_only:?} oracle_only={oracle_only:?} start={start:?} end={end:?}"
            );
        }
    }

    #[test]
    fn add_scan_empty_scan_changes_nothing() {
        let mut g = grid();
        let scan = crate::scan_match::Scan::new(vec![], 0.05, 20.0).unwrap();
        let stats = g.add_scan(&Pose2D::identity(), &scan);
        assert_eq!(stats, AddScanStats::default());
        assert_eq!(g.tile_count(), 0);
        assert!(g.observed_bounds().is_none());
    }

    #[test]
    fn add_scan_single_forward_beam() {
        let mut g = grid();
        let scan = crate::scan_match::Scan::new(
            vec![Beam { range: 1.0, angle: 0.0 }],
            0.05,
            20.0,
        )
        .unwrap();
        let stats = g.add_scan(&Pose2D::identity(), &scan);
        assert_eq!(stats.beams_used, 1);
        let hit = g.log_odds(CellIndex::new(20, 0)).unwrap();
        assert_abs_diff_eq!(hit, DEFAULT_LOG_ODDS_HIT, epsilon = 1e-12);
        for cx in 0..20 {
            let lo = g.log_odds(CellIndex::new(cx, 0)).unwrap();
            assert_abs_diff_eq!(lo, DEFAULT_LOG_ODDS_MISS, epsilon = 1e-12);
        }
        assert!(g.log_odds(CellIndex::new(21, 0)).is_none());
    }

    #[test]
    fn add_scan_repeated_hits_clamp() {
        let mut g = grid();
        let scan = crate::scan_match::Scan::new(
            vec![Beam { range: 1.0, angle: 0.0 }],
            0.05,
            20.0,
        )
        .unwrap();
        let k = 30usize;
        for _ in 0..k {
            g.add_scan(&Pose2D::identity(), &scan);
        }
        let hit = g.log_odds(CellIndex::new(20, 0)).unwrap();
        assert_abs_diff_eq!(
            hit,
            (k as f64 * DEFAULT_LOG_ODDS_HIT).min(LOG_ODDS_MAX),
            epsilon = 1e-9
        );
        assert_eq!(hit, LOG_ODDS_MAX);
        // missed cells clamp at the bottom
        let miss = g.log_odds(CellIndex::new(5, 0)).unwrap();
        assert_eq!(miss, (k as f64 * DEFAULT_LOG_ODDS_MISS).max(LOG_ODDS_MIN));
    }

    #[test]
    fn add_scan_skips_invalid_beams() {
        let mut g = grid();
        let scan = crate::scan_match::Scan::new(
            vec![
                Beam { range: 0.01, angle: -0.1 }, // below r_min
                Beam { range: 1.0, angle: 0.0 },
                Beam { range: 20.0, angle: 0.1 }, // at r_max
            ],
            0.05,
            20.0,
        )
        .unwrap();
        let stats = g.add_scan(&Pose2D::identity(), &scan);
        assert_eq!(stats.beams_used, 1);
        assert_eq!(stats.beams_skipped, 2);
    }

    #[test]
    fn probability_basics() {
        assert_eq!(probability_from_log_odds(0.0), 0.5);
        assert_abs_diff_eq!(
            probability_from_log_odds(LOG_ODDS_MAX),
            0.9999546021312976,
            epsilon = 1e-12
        );
    }

    #[test]
    fn extract_local_map_single_occupied_cell() {
        let mut g = grid();
        // drive one cell well above the 0.5 threshold
        g.update_cell(CellIndex::new(3, -2), 2.2); // p ≈ 0.90
        let local = g.extract_local_map(&Pose2D::identity(), 8, 0.5);
        assert_eq!(local.center(), CellIndex::new(0, 0));
        assert_eq!(local.occupied_count(), 1);
        assert!(local.bit(3, -2));
        assert!(local.is_occupied_cell(CellIndex::new(3, -2)));
        assert!(!local.bit(3, -3));
        // outside the window reads zero
        assert!(!local.bit(100, 100));
        assert!(!local.is_occupied_cell(CellIndex::new(100, 100)));
    }

    #[test]
    fn extract_local_map_empty_grid_is_all_zero() {
        let g = grid();
        let local = g.extract_local_map(&Pose2D::new(1.0, 1.0, 0.3), 16, 0.5);
        assert_eq!(local.occupied_count(), 0);
    }

    #[test]
    fn cow_clone_reads_identical_then_isolates() {
        let mut source = grid();
        let scan = crate::scan_match::Scan::new(
            (0..30)
                .map(|i| Beam {
                    range: 2.0 + 0.02 * i as f64,
                    angle: -0.6 + 0.04 * i as f64,
                })
                .collect(),
            0.05,
            20.0,
        )
        .unwrap();
        source.add_scan(&Pose2D::identity(), &scan);

        let mut clone = source.clone();
        assert_eq!(unique_tile_count([&source, &clone]), source.tile_count());
        // deep-copy oracle of the source before mutating the clone
        let snapshot: Vec<(CellIndex, Option<f64>)> = (-80..80)
            .flat_map(|cy| (-80..80).map(move |cx| CellIndex::new(cx, cy)))
            .map(|c| (c, source.log_odds(c)))
            .collect();
        for (cell, expected) in &snapshot {
            assert_eq!(clone.log_odds(*cell), *expected);
        }

        let pose = Pose2D::new(0.1, 0.05, 0.4);
        clone.add_scan(&pose, &scan);
        for (cell, expected) in &snapshot {
            assert_eq!(source.log_odds(*cell), *expected, "source changed at {cell:?}");
        }
    }

    #[test]
    fn cow_sharing_bounds_memory() {
        let mut base = OccupancyGrid::new((0.0, 0.0), 0.05);
        // touch a 1024 x 1024 cell area: 16 x 16 tiles
        for ty in 0..16 {
            for tx in 0..16 {
                base.update_cell(CellIndex::new(tx * 64, ty * 64), 1.0);
            }
        }
        let base_tiles = base.tile_count();
        assert_eq!(base_tiles, 256);
        let mut clones: Vec<OccupancyGrid> = (0..32).map(|_| base.clone()).collect();
        // write ~1% of tiles in each clone
        for (i, clone) in clones.iter_mut().enumerate() {
            for t in 0..3 {
                let k = (7 * i + 13 * t) % 256;
                clone.update_cell(
                    CellIndex::new((k as i32 % 16) * 64, (k as i32 / 16) * 64),
                    0.5,
                );
            }
        }
        let mut all: Vec<&OccupancyGrid> = vec![&base];
        all.extend(clones.iter());
        let unique = unique_tile_count(all);
        assert!(
            unique < 2 * base_tiles,
            "expected copy-on-write to bound storage: {unique} unique tiles vs {base_tiles} in one map"
        );
    }

    #[test]
    fn log_odds_always_clamped() {
        let mut g = grid();
        for i in 0..100 {
            g.update_cell(CellIndex::new(0, 0), 3.0);
            g.update_cell(CellIndex::new(1, 0), -3.0);
            let a = g.log_odds(CellIndex::new(0, 0)).unwrap();
            let b = g.log_odds(CellIndex::new(1, 0)).unwrap();
            assert!((LOG_ODDS_MIN..=LOG_ODDS_MAX).contains(&a), "i={i}");
            assert!((LOG_ODDS_MIN..=LOG_ODDS_MAX).contains(&b), "i={i}");
        }
    }

    proptest! {
        #[test]
        fn cell_world_roundtrip(
            cx in -100_000i32..100_000,
            cy in -100_000i32..100_000,
            ox in -50.0..50.0f64,
            oy in -50.0..50.0f64,
            delta in prop::sample::select(vec![0.01, 0.025, 0.05, 0.1, 0.2]),
        ) {
            let g = OccupancyGrid::new((ox, oy), delta);
            let cell = CellIndex::new(cx, cy);
            let (x, y) = g.cell_to_world(cell);
            prop_assert_eq!(g.world_to_cell(x, y), cell);
        }

        #[test]
        fn binarization_matches_threshold_comparison(
            seeds in prop::collection::vec((-12i32..12, -12i32..12, -4.0..4.0f64), 1..40),
            threshold in 0.2..0.8f64,
        ) {
            let mut g = grid();
            for (cx, cy, lo) in &seeds {
                g.update_cell(CellIndex::new(*cx, *cy), *lo);
            }
            let pose = Pose2D::identity();
            let w = 16;
            let local = g.extract_local_map(&pose, w, threshold);
            let center = g.world_to_cell(pose.x, pose.y);
            for ky in -w..w {
                for kx in -w..w {
                    let cell = center.offset(kx, ky);
                    let expected = g.probability(cell).map(|p| p > threshold).unwrap_or(false);
                    prop_assert_eq!(local.bit(kx, ky), expected, "offset ({}, {})", kx, ky);
                }
            }
        }
    }
}
