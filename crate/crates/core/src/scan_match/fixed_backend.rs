//! Q16.16 projection pipeline for the accelerated backend.
//!
//! Poses, ranges, and bearings are quantized once per scan-match call and all
//! coordinate transforms run in fixed point, mirroring a hardware matcher
//! that stores every decimal value in the 32-bit Q16.16 format.

use super::{Beam, MatchParams, Scan, ScoreLut};
use crate::geometry::{FixedQ16, OverflowFlag, Pose2D};
use crate::grid::{CellIndex, LocalBinaryMap};

// round(π · 2^16) and round(2π · 2^16)
const PI_RAW: i32 = 205_887;
const TWO_PI_RAW: i32 = 411_775;

/// Wrap a fixed-point angle into the representable [-π, π) band. One
/// correction suffices for sums of two normalized angles.
fn wrap_angle(raw: i32) -> i32 {
    if raw >= PI_RAW {
        raw - TWO_PI_RAW
    } else if raw < -PI_RAW {
        raw + TWO_PI_RAW
    } else {
        raw
    }
}

/// A pose held entirely in Q16.16.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPose {
    pub x: FixedQ16,
    pub y: FixedQ16,
    pub theta: FixedQ16,
}

impl FixedPose {
    pub fn quantize(pose: &Pose2D, flag: &mut OverflowFlag) -> Self {
        Self {
            x: FixedQ16::saturating_from_real(pose.x, flag),
            y: FixedQ16::saturating_from_real(pose.y, flag),
            theta: FixedQ16::saturating_from_real(pose.theta, flag),
        }
    }

    pub fn to_pose(self) -> Pose2D {
        Pose2D::new(self.x.to_real(), self.y.to_real(), self.theta.to_real())
    }

    /// Shift one coordinate by a step, wrapping the heading.
    pub fn step_x(self, step: FixedQ16, flag: &mut OverflowFlag) -> Self {
        Self {
            x: self.x.add(step, flag),
            ..self
        }
    }

    pub fn step_y(self, step: FixedQ16, flag: &mut OverflowFlag) -> Self {
        Self {
            y: self.y.add(step, flag),
            ..self
        }
    }

    pub fn step_theta(self, step: FixedQ16, flag: &mut OverflowFlag) -> Self {
        Self {
            theta: FixedQ16::from_raw(wrap_angle(self.theta.add(step, flag).raw())),
            ..self
        }
    }
}

/// One beam quantized for the fixed-point pipeline. Validity is decided on
/// the original measurement before quantization.
#[derive(Debug, Clone, Copy)]
pub struct FixedBeam {
    pub range: FixedQ16,
    pub pullback_range: FixedQ16,
    pub angle: FixedQ16,
    pub valid: bool,
}

/// A scan quantized once and shared across all particles of a filter step.
#[derive(Debug, Clone)]
pub struct FixedScan {
    pub beams: Vec<FixedBeam>,
}

impl FixedScan {
    pub fn quantize(scan: &Scan, pullback: f64, flag: &mut OverflowFlag) -> Self {
        let pullback = FixedQ16::saturating_from_real(pullback, flag);
        let beams = scan
            .beams
            .iter()
            .map(|beam| {
                let range = FixedQ16::saturating_from_real(beam.range, flag);
                FixedBeam {
                    range,
                    pullback_range: range.sub(pullback, flag),
                    angle: FixedQ16::saturating_from_real(beam.angle, flag),
                    valid: scan.beam_valid(beam),
                }
            })
            .collect();
        Self { beams }
    }

    pub fn valid_count(&self) -> usize {
        self.beams.iter().filter(|b| b.valid).count()
    }
}

/// Converts fixed-point map-frame coordinates to grid cell indices.
///
/// The division by the resolution is realized as a multiplication by the
/// quantized reciprocal followed by a floor, as a divider-free datapath
/// would.
#[derive(Debug, Clone, Copy)]
pub struct FixedProjector {
    origin_x: FixedQ16,
    origin_y: FixedQ16,
    inv_resolution: FixedQ16,
}

impl FixedProjector {
    pub fn new(origin: (f64, f64), resolution: f64, flag: &mut OverflowFlag) -> Self {
        assert!(resolution > 0.0);
        Self {
            origin_x: FixedQ16::saturating_from_real(origin.0, flag),
            origin_y: FixedQ16::saturating_from_real(origin.1, flag),
            inv_resolution: FixedQ16::saturating_from_real(1.0 / resolution, flag),
        }
    }

    /// Beam endpoint at `range` in the map frame, all in fixed point:
    /// `(x + r cos(θ + φ), y + r sin(θ + φ))`.
    pub fn project(
        &self,
        pose: &FixedPose,
        range: FixedQ16,
        bearing: FixedQ16,
        flag: &mut OverflowFlag,
    ) -> (FixedQ16, FixedQ16) {
        let angle = FixedQ16::from_raw(wrap_angle(pose.theta.add(bearing, flag).raw()));
        let (s, c) = angle.sincos();
        (
            pose.x.add(range.mul(c, flag), flag),
            pose.y.add(range.mul(s, flag), flag),
        )
    }

    /// Grid cell containing a fixed-point map position.
    pub fn cell_of(&self, px: FixedQ16, py: FixedQ16, flag: &mut OverflowFlag) -> CellIndex {
        CellIndex {
            cx: px.sub(self.origin_x, flag).mul(self.inv_resolution, flag).floor_int(),
            cy: py.sub(self.origin_y, flag).mul(self.inv_resolution, flag).floor_int(),
        }
    }

    /// Hit and pullback cells of one quantized beam.
    pub fn beam_cells(
        &self,
        pose: &FixedPose,
        beam: &FixedBeam,
        flag: &mut OverflowFlag,
    ) -> (CellIndex, CellIndex) {
        let (hx, hy) = self.project(pose, beam.range, beam.angle, flag);
        let (mx, my) = self.project(pose, beam.pullback_range, beam.angle, flag);
        (self.cell_of(hx, hy, flag), self.cell_of(mx, my, flag))
    }
}

/// Fixed-point projection of a single beam endpoint, exposed for accuracy
/// comparisons against [`project_beam`](super::project_beam).
pub fn project_beam_fixed(pose: &Pose2D, beam: &Beam, flag: &mut OverflowFlag) -> (f64, f64) {
    let qpose = FixedPose::quantize(pose, flag);
    let range = FixedQ16::saturating_from_real(beam.range, flag);
    let bearing = FixedQ16::saturating_from_real(beam.angle, flag);
    let angle = FixedQ16::from_raw(wrap_angle(qpose.theta.add(bearing, flag).raw()));
    let (s, c) = angle.sincos();
    (
        qpose.x.add(range.mul(c, flag), flag).to_real(),
        qpose.y.add(range.mul(s, flag), flag).to_real(),
    )
}

/// Score and matched count of a fixed-point pose against a binarized local
/// map, reading per-offset contributions from the LUT.
pub(super) fn score_quantized(
    local: &LocalBinaryMap,
    projector: &FixedProjector,
    pose: &FixedPose,
    scan: &FixedScan,
    params: &MatchParams,
    lut: &ScoreLut,
    flag: &mut OverflowFlag,
) -> (f64, usize) {
    let mut score = 0.0;
    let mut matched = 0;
    for beam in &scan.beams {
        if !beam.valid {
            continue;
        }
        let (hit, pullback) = projector.beam_cells(pose, beam, flag);
        if let Some((kx, ky)) = super::find_min_offset(local, hit, pullback, params.window_radius)
        {
            score += lut.entry(kx, ky);
            matched += 1;
        }
    }
    (score, matched)
}

/// Score and matched-beam count of a pose evaluated by the accelerated
/// backend: the pose and scan are quantized to Q16.16, projected in fixed
/// point against the binarized local map, and matches read the LUT.
pub fn score_accelerated(
    local: &LocalBinaryMap,
    pose: &Pose2D,
    scan: &Scan,
    params: &MatchParams,
    lut: &ScoreLut,
) -> (f64, usize) {
    let mut flag = OverflowFlag::new();
    let projector = FixedProjector::new(local.origin(), local.resolution(), &mut flag);
    let fixed_scan = FixedScan::quantize(scan, params.pullback, &mut flag);
    let fixed_pose = FixedPose::quantize(pose, &mut flag);
    score_quantized(local, &projector, &fixed_pose, &fixed_scan, params, lut, &mut flag)
}

/// Observation log-likelihood under the accelerated backend; matched beams
/// contribute the log of their LUT entry, unmatched valid beams the floor.
pub fn log_likelihood_accelerated(
    local: &LocalBinaryMap,
    pose: &Pose2D,
    scan: &Scan,
    params: &MatchParams,
    lut: &ScoreLut,
) -> f64 {
    let mut flag = OverflowFlag::new();
    let projector = FixedProjector::new(local.origin(), local.resolution(), &mut flag);
    let fixed_scan = FixedScan::quantize(scan, params.pullback, &mut flag);
    let fixed_pose = FixedPose::quantize(pose, &mut flag);
    let mut total = 0.0;
    for beam in &fixed_scan.beams {
        if !beam.valid {
            continue;
        }
        let (hit, pullback) = projector.beam_cells(&fixed_pose, beam, &mut flag);
        total += match super::find_min_offset(local, hit, pullback, params.window_radius) {
            Some((kx, ky)) => lut.entry(kx, ky).ln(),
            None => params.log_likelihood_floor,
        };
    }
    total
}
