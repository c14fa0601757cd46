//! Synthetic worlds: segment-based ray casting, loop paths, and CARMEN log
//! synthesis with noisy odometry.
//!
//! The simulator provides the ground truth that end-to-end tests score the
//! filter against, and generates small deterministic logs for the CLI.

use crate::dataset::LogEvent;
use crate::geometry::{normalize_angle, Pose2D};
use crate::rbpf::stream_rng;
use crate::scan_match::{Beam, Scan};
use rand::Rng;
use rand_distr::StandardNormal;

/// A wall segment from `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

/// A 2D world made of wall segments.
#[derive(Debug, Clone, Default)]
pub struct World {
    pub segments: Vec<Segment>,
}

impl World {
    /// Axis-aligned rectangular room with corners (0, 0) and (width, height).
    pub fn rectangle(width: f64, height: f64) -> Self {
        let corners = [(0.0, 0.0), (width, 0.0), (width, height), (0.0, height)];
        let segments = (0..4)
            .map(|i| Segment {
                a: corners[i],
                b: corners[(i + 1) % 4],
            })
            .collect();
        Self { segments }
    }

    pub fn add_segment(&mut self, a: (f64, f64), b: (f64, f64)) {
        self.segments.push(Segment { a, b });
    }

    /// Distance to the first wall hit by a ray, or `None` within `max_range`.
    pub fn cast_ray(&self, origin: (f64, f64), angle: f64, max_range: f64) -> Option<f64> {
        let (dy, dx) = angle.sin_cos();
        let mut nearest: Option<f64> = None;
        for segment in &self.segments {
            let ex = segment.b.0 - segment.a.0;
            let ey = segment.b.1 - segment.a.1;
            let denom = dx * ey - dy * ex;
            if denom.abs() < 1e-12 {
                continue; // parallel
            }
            let ox = segment.a.0 - origin.0;
            let oy = segment.a.1 - origin.1;
            let t = (ox * ey - oy * ex) / denom;
            let s = (ox * dy - oy * dx) / denom;
            if t >= 0.0 && (0.0..=1.0).contains(&s) && t <= max_range {
                nearest = Some(nearest.map_or(t, |n: f64| n.min(t)));
            }
        }
        nearest
    }

    /// Render a full scan from a pose. Beams that hit nothing report
    /// `range_max`, which consumers treat as invalid.
    pub fn render_scan(
        &self,
        pose: &Pose2D,
        beams: usize,
        field_of_view: f64,
        range_min: f64,
        range_max: f64,
    ) -> Scan {
        let angles = crate::dataset::beam_angles(beams, field_of_view);
        let beams = angles
            .iter()
            .map(|&angle| Beam {
                range: self
                    .cast_ray((pose.x, pose.y), pose.theta + angle, range_max)
                    .unwrap_or(range_max),
                angle,
            })
            .collect();
        Scan::new(beams, range_min, range_max).expect("rendered scan is well-formed")
    }
}

/// Poses around a circle, headings tangent to it.
pub fn circle_path(center: (f64, f64), radius: f64, steps: usize, turns: f64) -> Vec<Pose2D> {
    (0..steps)
        .map(|i| {
            let phi = turns * 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
            Pose2D::new(
                center.0 + radius * phi.cos(),
                center.1 + radius * phi.sin(),
                normalize_angle(phi + std::f64::consts::FRAC_PI_2),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub beams_per_scan: usize,
    pub field_of_view: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// Gaussian noise added to each odometry increment.
    pub odom_trans_noise: f64,
    pub odom_rot_noise: f64,
    pub seed: u64,
    /// Seconds between scans.
    pub period: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            beams_per_scan: 91,
            field_of_view: std::f64::consts::PI,
            range_min: 0.05,
            range_max: 10.0,
            odom_trans_noise: 0.004,
            odom_rot_noise: 0.002,
            seed: 1,
            period: 0.1,
        }
    }
}

/// A simulated run: laser events with drifting odometry, plus the true
/// trajectory the odometry was derived from.
#[derive(Debug, Clone)]
pub struct SimLog {
    pub events: Vec<LogEvent>,
    pub ground_truth: Vec<(f64, Pose2D)>,
}

/// Walk `path` through `world`, rendering a scan from each true pose and
/// integrating odometry from the true motion increments corrupted by
/// Gaussian noise. Deterministic for a given seed.
pub fn simulate(world: &World, path: &[Pose2D], config: &SimConfig) -> SimLog {
    let mut rng = stream_rng(config.seed, 0, 0);
    let mut events = Vec::with_capacity(path.len());
    let mut ground_truth = Vec::with_capacity(path.len());
    let mut odom = Pose2D::identity();
    let mut previous: Option<Pose2D> = None;
    for (i, true_pose) in path.iter().enumerate() {
        let timestamp = i as f64 * config.period;
        if let Some(prev) = previous {
            let control = true_pose.inverse_compose(&prev);
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let nt: f64 = rng.sample(StandardNormal);
            let noisy = Pose2D::new(
                control.x + config.odom_trans_noise * nx,
                control.y + config.odom_trans_noise * ny,
                control.theta + config.odom_rot_noise * nt,
            );
            odom = odom.compose(&noisy);
        }
        let scan = world.render_scan(
            true_pose,
            config.beams_per_scan,
            config.field_of_view,
            config.range_min,
            config.range_max,
        );
        events.push(LogEvent {
            timestamp,
            odom_pose: odom,
            laser_pose: Some(odom),
            scan: Some(scan),
        });
        ground_truth.push((timestamp, *true_pose));
        previous = Some(*true_pose);
    }
    SimLog { events, ground_truth }
}

/// Serialize a simulated run as CARMEN log text.
pub fn to_carmen_text(log: &SimLog) -> String {
    let mut out = String::new();
    for event in &log.events {
        out.push_str(&crate::dataset::to_carmen_line(event));
        out.push('\n');
    }
    out
}
