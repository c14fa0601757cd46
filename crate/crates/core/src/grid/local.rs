//! Fixed-size binarized crop of an occupancy grid.

use super::CellIndex;

/// A `2W x 2W` one-bit-per-cell view of a grid, centered on the cell under
/// the robot pose. Offsets run over `[-W, W)` on both axes; anything outside
/// the window (or never observed in the source grid) reads as zero.
///
/// Immutable after construction and freely shareable across workers.
#[derive(Debug, Clone)]
pub struct LocalBinaryMap {
    words: Vec<u64>,
    center: CellIndex,
    half_width: i32,
    resolution: f64,
    origin: (f64, f64),
}

impl LocalBinaryMap {
    pub(crate) fn new(
        center: CellIndex,
        half_width: i32,
        resolution: f64,
        origin: (f64, f64),
    ) -> Self {
        let side = 2 * half_width as usize;
        let bits = side * side;
        Self {
            words: vec![0; bits.div_ceil(64)],
            center,
            half_width,
            resolution,
            origin,
        }
    }

    /// Grid cell the window is centered on (offset (0, 0)).
    pub fn center(&self) -> CellIndex {
        self.center
    }

    /// Window half-width W in cells; the window is 2W cells on a side.
    pub fn half_width(&self) -> i32 {
        self.half_width
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// World position of the source grid's cell (0, 0); the window's cell
    /// indices stay global so matches locate the window within the full map.
    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    fn bit_index(&self, kx: i32, ky: i32) -> Option<usize> {
        let w = self.half_width;
        if kx < -w || kx >= w || ky < -w || ky >= w {
            return None;
        }
        let side = 2 * w as usize;
        Some((ky + w) as usize * side + (kx + w) as usize)
    }

    pub(crate) fn set_offset(&mut self, kx: i32, ky: i32) {
        let idx = self
            .bit_index(kx, ky)
            .expect("offset outside local map window");
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    /// Bit at window offset `(kx, ky)`; offsets outside `[-W, W)` are zero.
    pub fn bit(&self, kx: i32, ky: i32) -> bool {
        match self.bit_index(kx, ky) {
            Some(idx) => self.words[idx / 64] >> (idx % 64) & 1 == 1,
            None => false,
        }
    }

    /// Whether a global cell index falls inside the window.
    pub fn contains_cell(&self, cell: CellIndex) -> bool {
        self.bit_index(cell.cx - self.center.cx, cell.cy - self.center.cy)
            .is_some()
    }

    /// Occupancy bit for a global cell index; out-of-window cells are free.
    pub fn is_occupied_cell(&self, cell: CellIndex) -> bool {
        self.bit(cell.cx - self.center.cx, cell.cy - self.center.cy)
    }

    /// Number of set bits, mainly for diagnostics.
    pub fn occupied_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}
