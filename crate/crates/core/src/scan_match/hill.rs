//! Axial hill climbing over the matching score.

use super::fixed_backend::{score_quantized, FixedPose, FixedProjector, FixedScan};
use super::{score_reference, MatchParams, MatchResult, Scan, ScoreLut};
use crate::geometry::{FixedQ16, OverflowFlag, Pose2D};
use crate::grid::{LocalBinaryMap, OccupancyGrid};

/// Refine a pose against the full-precision grid.
///
/// Each iteration evaluates the six axial neighbors of the current best pose
/// in the fixed order +x, -x, +y, -y, +θ, -θ. If the best neighbor strictly
/// improves the score the pose moves there, otherwise both steps are halved.
/// Terminates when the linear step drops below the convergence step or the
/// iteration cap is reached. The returned score is never below the initial
/// pose's score.
pub fn hill_climb_reference(
    grid: &OccupancyGrid,
    scan: &Scan,
    initial: Pose2D,
    params: &MatchParams,
) -> MatchResult {
    let mut linear = params.initial_linear_step;
    let mut angular = params.initial_angular_step;
    let mut pose = initial;
    let (mut score, mut matched) = score_reference(grid, &pose, scan, params);
    let mut iterations = 0;

    while iterations < params.max_iterations && linear >= params.convergence_step {
        iterations += 1;
        let neighbors = [
            Pose2D::new(pose.x + linear, pose.y, pose.theta),
            Pose2D::new(pose.x - linear, pose.y, pose.theta),
            Pose2D::new(pose.x, pose.y + linear, pose.theta),
            Pose2D::new(pose.x, pose.y - linear, pose.theta),
            Pose2D::new(pose.x, pose.y, pose.theta + angular),
            Pose2D::new(pose.x, pose.y, pose.theta - angular),
        ];
        let mut best: Option<(f64, usize, Pose2D)> = None;
        for candidate in neighbors {
            let (s, m) = score_reference(grid, &candidate, scan, params);
            // strict comparison keeps the earliest neighbor on ties
            if best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
                best = Some((s, m, candidate));
            }
        }
        match best {
            Some((s, m, candidate)) if s > score => {
                pose = candidate;
                score = s;
                matched = m;
            }
            _ => {
                linear /= 2.0;
                angular /= 2.0;
            }
        }
    }

    MatchResult {
        pose,
        score,
        matched_beams: matched,
        iterations_used: iterations,
        overflow: false,
    }
}

/// Refine a pose against a binarized local map in Q16.16 arithmetic.
///
/// Identical search structure to the reference backend, but the pose and all
/// projections live in fixed point, per-offset scores come from the LUT, and
/// exactly `fixed_iterations` iterations run regardless of convergence so
/// every invocation performs the same amount of work. Step halving is an
/// arithmetic shift of the raw fixed-point step.
pub fn hill_climb_accelerated(
    local: &LocalBinaryMap,
    scan: &Scan,
    initial: Pose2D,
    params: &MatchParams,
    lut: &ScoreLut,
) -> MatchResult {
    let mut flag = OverflowFlag::new();
    let projector = FixedProjector::new(local.origin(), local.resolution(), &mut flag);
    let fixed_scan = FixedScan::quantize(scan, params.pullback, &mut flag);

    let mut pose = FixedPose::quantize(&initial, &mut flag);
    let (mut score, mut matched) =
        score_quantized(local, &projector, &pose, &fixed_scan, params, lut, &mut flag);
    let mut linear = FixedQ16::saturating_from_real(params.initial_linear_step, &mut flag);
    let mut angular = FixedQ16::saturating_from_real(params.initial_angular_step, &mut flag);

    for _ in 0..params.fixed_iterations {
        let neighbors = [
            pose.step_x(linear, &mut flag),
            pose.step_x(linear.neg(&mut flag), &mut flag),
            pose.step_y(linear, &mut flag),
            pose.step_y(linear.neg(&mut flag), &mut flag),
            pose.step_theta(angular, &mut flag),
            pose.step_theta(angular.neg(&mut flag), &mut flag),
        ];
        let mut best: Option<(f64, usize, FixedPose)> = None;
        for candidate in neighbors {
            let (s, m) = score_quantized(
                local,
                &projector,
                &candidate,
                &fixed_scan,
                params,
                lut,
                &mut flag,
            );
            if best.as_ref().is_none_or(|(bs, _, _)| s > *bs) {
                best = Some((s, m, candidate));
            }
        }
        match best {
            Some((s, m, candidate)) if s > score => {
                pose = candidate;
                score = s;
                matched = m;
            }
            _ => {
                linear = FixedQ16::from_raw(linear.raw() >> 1);
                angular = FixedQ16::from_raw(angular.raw() >> 1);
            }
        }
    }

    MatchResult {
        pose: pose.to_pose(),
        score,
        matched_beams: matched,
        iterations_used: params.fixed_iterations,
        overflow: flag.is_raised(),
    }
}
