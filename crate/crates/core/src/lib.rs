//! Grid-based Rao-Blackwellized particle filter SLAM.
//!
//! The engine follows the classic GMapping pipeline: particles carry a pose
//! hypothesis and an occupancy grid map, each filter step samples a motion
//! guess, refines it by hill-climbing scan matching, integrates the scan into
//! the particle's map, updates the importance weight, and resamples when the
//! effective sample size drops.
//!
//! Scan matching comes in two interchangeable backends:
//!
//! * `Reference` — double precision arithmetic against the full occupancy
//!   grid, iterating until the step size converges.
//! * `Accelerated` — faithful to a fixed-point hardware matcher: Q16.16
//!   arithmetic, a binarized fixed-size local map, a precomputed Gaussian
//!   score table, and an unconditional fixed iteration budget.
//!
//! Supporting modules ingest CARMEN-format robot logs, compute relative-pose
//! trajectory error statistics, and simulate synthetic worlds for testing.

pub mod dataset;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod rbpf;
pub mod scan_match;
pub mod sim;

pub use geometry::{FixedQ16, OverflowFlag, Pose2D};
pub use grid::{CellIndex, LocalBinaryMap, OccupancyGrid};
pub use rbpf::{FilterConfig, Particle, SlamEngine};
pub use scan_match::{Backend, MatchParams, MatchResult, Scan, ScoreLut};
