//! Relative-pose trajectory error statistics.
//!
//! A trajectory is scored by comparing relative transforms between pose
//! pairs against reference relative transforms — either manually verified
//! ground-truth relations or the corresponding relative poses of a second
//! trajectory. Because only relative poses enter, the statistics are
//! invariant to a rigid transform of the whole trajectory.

use crate::dataset::GroundTruthRelation;
use crate::geometry::Pose2D;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("trajectory timestamps must strictly increase (index {index})")]
    NonMonotonic { index: usize },
    #[error("no relation could be resolved against the trajectory")]
    NoUsableRelations,
    #[error("fewer than 2 consecutive pose pairs align between the trajectories")]
    NotAlignable,
}

/// A time-stamped pose sequence with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<(f64, Pose2D)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, Pose2D)>) -> Result<Self, MetricError> {
        for index in 1..samples.len() {
            if samples[index - 1].0 >= samples[index].0 {
                return Err(MetricError::NonMonotonic { index });
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, Pose2D)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Pose at the sample nearest to `t`, provided the timestamp difference
    /// is within `tolerance` seconds.
    pub fn pose_at(&self, t: f64, tolerance: f64) -> Option<Pose2D> {
        if self.samples.is_empty() {
            return None;
        }
        let idx = self.samples.partition_point(|(ts, _)| *ts < t);
        let mut best: Option<(f64, Pose2D)> = None;
        for candidate in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
            if let Some(&(ts, pose)) = self.samples.get(candidate) {
                let dt = (ts - t).abs();
                if dt <= tolerance && best.is_none_or(|(bd, _)| dt < bd) {
                    best = Some((dt, pose));
                }
            }
        }
        best.map(|(_, pose)| pose)
    }
}

/// Default timestamp association tolerance in seconds.
pub const DEFAULT_TIME_TOLERANCE: f64 = 0.15;

/// Aggregated error statistics. Standard deviations use the population form
/// (divide by the term count, not count minus one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub eps_trans: f64,
    pub sigma_trans: f64,
    pub eps_rot: f64,
    pub sigma_rot: f64,
    pub relations_used: usize,
    pub relations_skipped: usize,
}

impl MetricReport {
    fn from_errors(trans: &[f64], rot: &[f64], skipped: usize) -> Self {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let pop_std = |v: &[f64], m: f64| {
            (v.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let eps_trans = mean(trans);
        let eps_rot = mean(rot);
        Self {
            eps_trans,
            sigma_trans: pop_std(trans, eps_trans),
            eps_rot,
            sigma_rot: pop_std(rot, eps_rot),
            relations_used: trans.len(),
            relations_skipped: skipped,
        }
    }

    /// Flat `key value` text block, one metric per line.
    pub fn to_key_value_text(&self) -> String {
        format!(
            "eps_trans {}\nsigma_trans {}\neps_rot {}\nsigma_rot {}\nrelations_used {}\nrelations_skipped {}\n",
            self.eps_trans,
            self.sigma_trans,
            self.eps_rot,
            self.sigma_rot,
            self.relations_used,
            self.relations_skipped
        )
    }
}

/// Per-relation error: `ε = (pose(t2) ⊖ pose(t1)) ⊖ δ*`.
fn relation_error(pose_t1: &Pose2D, pose_t2: &Pose2D, reference: &Pose2D) -> Pose2D {
    pose_t2.inverse_compose(pose_t1).inverse_compose(reference)
}

/// Evaluate a trajectory against ground-truth relations.
///
/// Relations whose endpoints cannot both be resolved on the trajectory
/// (within `tolerance` seconds) are counted as skipped. Errors when nothing
/// resolves.
pub fn relation_errors(
    trajectory: &Trajectory,
    relations: &[GroundTruthRelation],
    tolerance: f64,
) -> Result<MetricReport, MetricError> {
    let mut trans = Vec::new();
    let mut rot = Vec::new();
    let mut skipped = 0usize;
    for relation in relations {
        match (
            trajectory.pose_at(relation.t1, tolerance),
            trajectory.pose_at(relation.t2, tolerance),
        ) {
            (Some(p1), Some(p2)) => {
                let e = relation_error(&p1, &p2, &relation.relative_pose);
                trans.push(e.trans_norm());
                rot.push(e.rot_abs());
            }
            _ => skipped += 1,
        }
    }
    if trans.is_empty() {
        return Err(MetricError::NoUsableRelations);
    }
    Ok(MetricReport::from_errors(&trans, &rot, skipped))
}

/// Compare two trajectories over consecutive pose pairs of the first.
///
/// For each consecutive pair `(t_{i-1}, t_i)` of `a` whose timestamps both
/// resolve in `b`, the reference relative pose is taken from `b` and the
/// discrepancy accumulated exactly as in [`relation_errors`]. Errors when
/// fewer than two pairs align.
pub fn trajectory_difference(
    a: &Trajectory,
    b: &Trajectory,
    tolerance: f64,
) -> Result<MetricReport, MetricError> {
    let mut trans = Vec::new();
    let mut rot = Vec::new();
    let mut skipped = 0usize;
    for window in a.samples().windows(2) {
        let (t_prev, a_prev) = window[0];
        let (t_curr, a_curr) = window[1];
        match (b.pose_at(t_prev, tolerance), b.pose_at(t_curr, tolerance)) {
            (Some(b_prev), Some(b_curr)) => {
                let reference = b_curr.inverse_compose(&b_prev);
                let e = relation_error(&a_prev, &a_curr, &reference);
                trans.push(e.trans_norm());
                rot.push(e.rot_abs());
            }
            _ => skipped += 1,
        }
    }
    if trans.len() < 2 {
        return Err(MetricError::NotAlignable);
    }
    Ok(MetricReport::from_errors(&trans, &rot, skipped))
}

/// Synthesize relations from a trajectory's own consecutive poses; scoring
/// the trajectory against them yields exact zeros, which anchors the metric
/// tests.
pub fn relations_from_trajectory(trajectory: &Trajectory) -> Vec<GroundTruthRelation> {
    trajectory
        .samples()
        .windows(2)
        .map(|w| GroundTruthRelation {
            t1: w[0].0,
            t2: w[1].0,
            relative_pose: w[1].1.inverse_compose(&w[0].1),
        })
        .collect()
}
