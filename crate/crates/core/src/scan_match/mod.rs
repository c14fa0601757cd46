//! Greedy endpoint matching: per-beam window search, Gaussian scoring, and
//! hill-climbing pose refinement.
//!
//! Two backends share the same search structure. The reference backend works
//! in double precision against the full occupancy grid and iterates until the
//! step size converges. The accelerated backend mirrors a fixed-point
//! hardware matcher: Q16.16 arithmetic, a binarized local map, a precomputed
//! score table, and an unconditional fixed iteration count so every
//! invocation performs identical work.

mod fixed_backend;
mod hill;

pub use fixed_backend::{
    log_likelihood_accelerated, project_beam_fixed, score_accelerated, FixedBeam, FixedPose,
    FixedProjector, FixedScan,
};
pub use hill::{hill_climb_accelerated, hill_climb_reference};

use crate::geometry::Pose2D;
use crate::grid::{CellIndex, LocalBinaryMap, OccupancyGrid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One LiDAR return: range in meters, bearing in radians relative to the
/// sensor heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    pub range: f64,
    pub angle: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("beam angles must be strictly increasing (beam {index})")]
    AnglesNotIncreasing { index: usize },
    #[error("beam {index} is not finite")]
    NonFinite { index: usize },
    #[error("range bounds must satisfy 0 <= r_min < r_max, got [{min}, {max}]")]
    BadRangeBounds { min: f64, max: f64 },
}

/// One LiDAR sweep. A beam is valid iff `range_min < r < range_max`; invalid
/// beams are carried along but skipped by every consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub beams: Vec<Beam>,
    pub range_min: f64,
    pub range_max: f64,
}

impl Scan {
    pub fn new(beams: Vec<Beam>, range_min: f64, range_max: f64) -> Result<Self, ScanError> {
        if !(range_min >= 0.0 && range_min < range_max && range_max.is_finite()) {
            return Err(ScanError::BadRangeBounds {
                min: range_min,
                max: range_max,
            });
        }
        for (index, beam) in beams.iter().enumerate() {
            if !(beam.range.is_finite() && beam.angle.is_finite()) {
                return Err(ScanError::NonFinite { index });
            }
            if index > 0 && beams[index - 1].angle >= beam.angle {
                return Err(ScanError::AnglesNotIncreasing { index });
            }
        }
        Ok(Self {
            beams,
            range_min,
            range_max,
        })
    }

    pub fn beam_valid(&self, beam: &Beam) -> bool {
        beam.range > self.range_min && beam.range < self.range_max
    }

    pub fn valid_count(&self) -> usize {
        self.beams.iter().filter(|b| self.beam_valid(b)).count()
    }
}

/// Project a beam endpoint into the map frame (double precision):
/// `(x + r cos(θ + φ), y + r sin(θ + φ))`.
pub fn project_beam(pose: &Pose2D, beam: &Beam) -> (f64, f64) {
    let (s, c) = (pose.theta + beam.angle).sin_cos();
    (pose.x + beam.range * c, pose.y + beam.range * s)
}

/// Scan matcher tuning knobs shared by both backends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    /// Search window radius K in cells; the window is (2K+1) x (2K+1).
    pub window_radius: i32,
    /// Pullback distance δ: the free-space probe sits this far short of the
    /// beam endpoint.
    pub pullback: f64,
    /// Gaussian score standard deviation σ in meters.
    pub sigma: f64,
    /// Occupancy probability threshold T.
    pub occupied_threshold: f64,
    pub initial_linear_step: f64,
    pub initial_angular_step: f64,
    /// Reference backend: iteration cap.
    pub max_iterations: u32,
    /// Reference backend: stop once the linear step shrinks below this.
    pub convergence_step: f64,
    /// Accelerated backend: unconditional iteration count.
    pub fixed_iterations: u32,
    /// Log-likelihood assigned to a valid beam with no match.
    pub log_likelihood_floor: f64,
}

impl MatchParams {
    /// Defaults scaled to a map resolution: pullback √2·Δ (guarantees the
    /// pullback cell differs from the hit cell on any heading), σ = Δ,
    /// reference convergence at Δ/8.
    pub fn for_resolution(resolution: f64) -> Self {
        Self {
            window_radius: 1,
            pullback: std::f64::consts::SQRT_2 * resolution,
            sigma: resolution,
            occupied_threshold: 0.5,
            initial_linear_step: 0.05,
            initial_angular_step: 0.025,
            max_iterations: 50,
            convergence_step: resolution / 8.0,
            fixed_iterations: 25,
            log_likelihood_floor: -4.0,
        }
    }
}

/// Precomputed Gaussian score table over window offsets.
///
/// Entry `(kx, ky)` holds `exp(-(kx² + ky²) Δ² / (2σ²))`, the per-beam score
/// contribution for a match found at that offset.
#[derive(Debug, Clone)]
pub struct ScoreLut {
    entries: Vec<f64>,
    window_radius: i32,
}

impl ScoreLut {
    /// Build the `(2K+1)²` table for window radius `K`, map resolution
    /// `Δ`, and score deviation `σ`.
    pub fn build(window_radius: i32, resolution: f64, sigma: f64) -> Self {
        assert!(window_radius >= 1, "window radius must be at least 1");
        assert!(sigma > 0.0 && resolution > 0.0);
        let side = (2 * window_radius + 1) as usize;
        let mut entries = vec![0.0; side * side];
        for ky in -window_radius..=window_radius {
            for kx in -window_radius..=window_radius {
                let d2 = (kx * kx + ky * ky) as f64 * resolution * resolution;
                let idx = ((ky + window_radius) as usize) * side + (kx + window_radius) as usize;
                entries[idx] = (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
        Self {
            entries,
            window_radius,
        }
    }

    pub fn window_radius(&self) -> i32 {
        self.window_radius
    }

    /// Score of a match at offset `(kx, ky)`; offsets must lie within the
    /// window the table was built for.
    pub fn entry(&self, kx: i32, ky: i32) -> f64 {
        let k = self.window_radius;
        debug_assert!(kx.abs() <= k && ky.abs() <= k);
        let side = (2 * k + 1) as usize;
        self.entries[((ky + k) as usize) * side + (kx + k) as usize]
    }
}

/// Read access for the window search: the full-precision grid thresholded on
/// the fly, or a pre-binarized local map.
pub trait OccupancyView {
    fn occupied(&self, cell: CellIndex) -> bool;

    /// Whether the hit/pullback window centers are usable. Unbounded views
    /// always accept; the local map rejects centers outside its window.
    fn centers_in_bounds(&self, hit: CellIndex, pullback: CellIndex) -> bool {
        let _ = (hit, pullback);
        true
    }
}

/// The reference backend's view: occupancy probability compared against a
/// threshold at every query.
pub struct GridView<'a> {
    pub grid: &'a OccupancyGrid,
    pub threshold: f64,
}

impl OccupancyView for GridView<'_> {
    fn occupied(&self, cell: CellIndex) -> bool {
        self.grid.is_occupied(cell, self.threshold)
    }
}

impl OccupancyView for LocalBinaryMap {
    fn occupied(&self, cell: CellIndex) -> bool {
        self.is_occupied_cell(cell)
    }

    fn centers_in_bounds(&self, hit: CellIndex, pullback: CellIndex) -> bool {
        self.contains_cell(hit) && self.contains_cell(pullback)
    }
}

/// Acceptance decision for every window offset: `true` where the shifted hit
/// cell is occupied and the equally shifted pullback cell is free. Offsets
/// are reported in row-major order (ky outer, kx inner).
pub fn window_acceptance<V: OccupancyView + ?Sized>(
    view: &V,
    hit: CellIndex,
    pullback: CellIndex,
    window_radius: i32,
) -> Vec<(i32, i32, bool)> {
    let k = window_radius;
    let mut out = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
    for ky in -k..=k {
        for kx in -k..=k {
            let accept =
                view.occupied(hit.offset(kx, ky)) && !view.occupied(pullback.offset(kx, ky));
            out.push((kx, ky, accept));
        }
    }
    out
}

/// Minimum-distance window search around a beam's hit cell.
///
/// Scans the `(2K+1)²` window; an offset is accepted when the shifted hit
/// cell is occupied and the shifted pullback cell is not. Among accepted
/// offsets the smallest squared offset wins, ties broken by smaller `ky`
/// then smaller `kx`. `None` when nothing is accepted or (bounded views)
/// when either center falls outside the view.
pub fn find_min_offset<V: OccupancyView + ?Sized>(
    view: &V,
    hit: CellIndex,
    pullback: CellIndex,
    window_radius: i32,
) -> Option<(i32, i32)> {
    if !view.centers_in_bounds(hit, pullback) {
        return None;
    }
    let k = window_radius;
    let mut best: Option<(i32, i32, i32)> = None; // (d², ky, kx)
    for ky in -k..=k {
        for kx in -k..=k {
            if view.occupied(hit.offset(kx, ky)) && !view.occupied(pullback.offset(kx, ky)) {
                let candidate = (kx * kx + ky * ky, ky, kx);
                if best.is_none_or(|b| candidate < b) {
                    best = Some(candidate);
                }
            }
        }
    }
    best.map(|(_, ky, kx)| (kx, ky))
}

/// Score and matched-beam count of a pose evaluated by the reference backend:
/// beams are projected in double precision and each match contributes the
/// directly evaluated Gaussian of its offset distance.
pub fn score_reference(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    scan: &Scan,
    params: &MatchParams,
) -> (f64, usize) {
    let view = GridView {
        grid,
        threshold: params.occupied_threshold,
    };
    let mut score = 0.0;
    let mut matched = 0;
    for beam in &scan.beams {
        if !scan.beam_valid(beam) {
            continue;
        }
        let (hit, pullback) = reference_beam_cells(grid, pose, beam, params.pullback);
        if let Some((kx, ky)) = find_min_offset(&view, hit, pullback, params.window_radius) {
            let d2 = (kx * kx + ky * ky) as f64 * grid.resolution() * grid.resolution();
            score += (-d2 / (2.0 * params.sigma * params.sigma)).exp();
            matched += 1;
        }
    }
    (score, matched)
}

/// Hit and pullback cells of a beam under the reference backend.
pub fn reference_beam_cells(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    beam: &Beam,
    pullback: f64,
) -> (CellIndex, CellIndex) {
    let (hx, hy) = project_beam(pose, beam);
    let short = Beam {
        range: beam.range - pullback,
        angle: beam.angle,
    };
    let (mx, my) = project_beam(pose, &short);
    (grid.world_to_cell(hx, hy), grid.world_to_cell(mx, my))
}

/// Observation log-likelihood of a scan at a pose (reference backend).
///
/// Matched beams contribute `log u(d') = -(kx² + ky²) Δ² / (2σ²)`; valid but
/// unmatched beams contribute the configured floor. Always finite.
pub fn log_likelihood_reference(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    scan: &Scan,
    params: &MatchParams,
) -> f64 {
    let view = GridView {
        grid,
        threshold: params.occupied_threshold,
    };
    let mut total = 0.0;
    for beam in &scan.beams {
        if !scan.beam_valid(beam) {
            continue;
        }
        let (hit, pullback) = reference_beam_cells(grid, pose, beam, params.pullback);
        total += match find_min_offset(&view, hit, pullback, params.window_radius) {
            Some((kx, ky)) => {
                let d2 = (kx * kx + ky * ky) as f64 * grid.resolution() * grid.resolution();
                -d2 / (2.0 * params.sigma * params.sigma)
            }
            None => params.log_likelihood_floor,
        };
    }
    total
}

/// Scan matcher backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Double precision, full-precision grid, convergence-terminated.
    Reference,
    /// Q16.16 arithmetic, binarized local map, LUT score, fixed iterations.
    Accelerated,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(Backend::Reference),
            "accelerated" => Ok(Backend::Accelerated),
            other => Err(format!(
                "unknown backend '{other}' (expected 'reference' or 'accelerated')"
            )),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Reference => write!(f, "reference"),
            Backend::Accelerated => write!(f, "accelerated"),
        }
    }
}

/// Outcome of one scan-match refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Refined pose.
    pub pose: Pose2D,
    /// Matching score of the refined pose (sum of per-beam Gaussians).
    pub score: f64,
    /// Beams that found a window match at the refined pose.
    pub matched_beams: usize,
    /// Hill-climbing iterations actually performed.
    pub iterations_used: u32,
    /// Whether any fixed-point operation saturated (accelerated backend).
    pub overflow: bool,
}
