//! The particle filter loop: motion sampling, scan-matching refinement, map
//! update, weight update, adaptive resampling, best-particle selection.
//!
//! The per-particle phase runs on a worker pool with no cross-particle
//! state; weight normalization, effective sample size, and resampling form a
//! sequential barrier. Every random draw comes from a counter-based stream
//! keyed by `(seed, step, particle)`, so results are bitwise independent of
//! worker scheduling and thread count.

use crate::geometry::Pose2D;
use crate::grid::{self, OccupancyGrid};
use crate::scan_match::{
    self, Backend, MatchParams, Scan, ScoreLut,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter diverged at step {step}: all particle weights underflowed")]
    Diverged { step: u64 },
    #[error("timestamps must be strictly increasing (got {timestamp} after {previous})")]
    NonMonotonicTimestamp { timestamp: f64, previous: f64 },
}

/// Odometry motion noise: standard deviations grow with the commanded
/// translation and rotation, with absolute floors so a stationary robot
/// still diffuses slightly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionNoise {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub linear_floor: f64,
    pub angular_floor: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            a1: 0.1,
            a2: 0.05,
            a3: 0.1,
            a4: 0.05,
            linear_floor: 0.001,
            angular_floor: 0.0005,
        }
    }
}

impl MotionNoise {
    pub fn zero() -> Self {
        Self {
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            a4: 0.0,
            linear_floor: 0.0,
            angular_floor: 0.0,
        }
    }
}

/// Filter configuration. `resample_threshold_fraction` scales the particle
/// count into the adaptive resampling threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub particle_count: usize,
    pub resample_threshold_fraction: f64,
    pub motion_noise: MotionNoise,
    pub linear_process_threshold: f64,
    pub angular_process_threshold: f64,
    pub match_params: MatchParams,
    pub backend: Backend,
    pub seed: u64,
    /// Map resolution in meters per cell.
    pub resolution: f64,
    /// Local map half-width W in cells (accelerated backend).
    pub local_half_width: i32,
    /// Reject a refined pose when fewer than this fraction of valid beams
    /// matched; the motion sample is kept with the floor likelihood instead.
    pub min_match_fraction: f64,
    pub log_odds_hit: f64,
    pub log_odds_miss: f64,
}

impl FilterConfig {
    pub fn new(resolution: f64) -> Self {
        Self {
            particle_count: 32,
            resample_threshold_fraction: 0.5,
            motion_noise: MotionNoise::default(),
            linear_process_threshold: 0.1,
            angular_process_threshold: 0.05,
            match_params: MatchParams::for_resolution(resolution),
            backend: Backend::Reference,
            seed: 0,
            resolution,
            local_half_width: 128,
            min_match_fraction: 0.4,
            log_odds_hit: grid::DEFAULT_LOG_ODDS_HIT,
            log_odds_miss: grid::DEFAULT_LOG_ODDS_MISS,
        }
    }
}

/// One trajectory-and-map hypothesis.
#[derive(Clone)]
pub struct Particle {
    pub pose: Pose2D,
    pub log_weight: f64,
    pub map: OccupancyGrid,
    /// Append-only `(timestamp, pose)` history; timestamps strictly increase.
    pub trajectory: Vec<(f64, Pose2D)>,
}

/// Wall-clock time spent in each stage of one filter step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimes {
    pub initial_guess: Duration,
    pub scan_matching: Duration,
    pub map_update: Duration,
    pub weight_update: Duration,
    pub resampling: Duration,
}

/// Diagnostics from one filter step.
#[derive(Debug, Clone)]
pub struct StepSummary {
    pub timestamp: f64,
    pub ess: f64,
    pub resampled: bool,
    /// Hill-climb iterations per particle, indexed by particle.
    pub match_iterations: Vec<u32>,
    /// Particles whose refined pose was rejected for matching too few beams.
    pub rejected_matches: usize,
    /// Particles whose fixed-point pipeline saturated (accelerated backend).
    pub overflows: usize,
    pub times: StageTimes,
}

/// splitmix64 finalizer; decorrelates consecutive counter values.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-lane random stream: identical for a given
/// `(seed, step, lane)` regardless of which worker runs it.
pub fn stream_rng(seed: u64, step: u64, lane: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ step) ^ lane);
    ChaCha8Rng::seed_from_u64(mixed)
}

const RESAMPLE_LANE: u64 = u64::MAX;

/// Compose the odometry increment onto a pose and perturb it with zero-mean
/// Gaussian noise whose standard deviations scale with the increment.
pub fn sample_motion<R: Rng>(
    pose: &Pose2D,
    control: &Pose2D,
    noise: &MotionNoise,
    rng: &mut R,
) -> Pose2D {
    let predicted = pose.compose(control);
    let trans = control.trans_norm();
    let rot = control.rot_abs();
    let sigma_xy = noise.a1 * trans + noise.a2 * rot + noise.linear_floor;
    let sigma_theta = noise.a3 * rot + noise.a4 * trans + noise.angular_floor;
    if sigma_xy == 0.0 && sigma_theta == 0.0 {
        return predicted;
    }
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let nt: f64 = rng.sample(StandardNormal);
    Pose2D::new(
        predicted.x + sigma_xy * nx,
        predicted.y + sigma_xy * ny,
        predicted.theta + sigma_theta * nt,
    )
}

/// Whether accumulated odometry motion since the last processed pose crosses
/// either threshold. `None` for `last` means nothing was processed yet.
pub fn should_process(
    last: Option<&Pose2D>,
    odom: &Pose2D,
    linear_threshold: f64,
    angular_threshold: f64,
) -> bool {
    match last {
        None => true,
        Some(last) => {
            let rel = odom.inverse_compose(last);
            rel.trans_norm() > linear_threshold || rel.rot_abs() > angular_threshold
        }
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Effective sample size `1 / Σ w²` of normalized log-weights.
///
/// Equals the particle count for uniform weights and 1 for a degenerate
/// distribution. Errors when every weight underflowed to zero.
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64, FilterError> {
    let lse2 = log_sum_exp(&log_weights.iter().map(|lw| 2.0 * lw).collect::<Vec<_>>());
    if lse2 == f64::NEG_INFINITY {
        return Err(FilterError::Diverged { step: 0 });
    }
    Ok((-lse2).exp())
}

/// Ancestor index for each offspring slot under low-variance (systematic)
/// resampling with a single uniform draw `u0 ∈ [0, 1)`. Each particle's copy
/// count is `⌊M w⌋` or `⌈M w⌉`; equal weights reproduce every particle
/// exactly once.
pub fn systematic_ancestors(weights: &[f64], u0: f64) -> Vec<usize> {
    let m = weights.len();
    debug_assert!(m > 0 && (0.0..1.0).contains(&u0));
    let mut ancestors = Vec::with_capacity(m);
    let mut index = 0usize;
    let mut upper = weights[0];
    for j in 0..m {
        let target = (u0 + j as f64) / m as f64;
        while upper <= target && index + 1 < m {
            index += 1;
            upper += weights[index];
        }
        ancestors.push(index);
    }
    ancestors
}

/// The filter: a fixed-size particle population advanced one scan at a time.
pub struct SlamEngine {
    config: FilterConfig,
    particles: Vec<Particle>,
    lut: ScoreLut,
    step: u64,
    last_processed_odom: Option<Pose2D>,
    last_timestamp: Option<f64>,
}

impl SlamEngine {
    pub fn new(config: FilterConfig, initial_pose: Pose2D) -> Self {
        assert!(config.particle_count >= 1, "need at least one particle");
        assert!(
            config.resample_threshold_fraction > 0.0 && config.resample_threshold_fraction <= 1.0
        );
        let lut = ScoreLut::build(
            config.match_params.window_radius,
            config.resolution,
            config.match_params.sigma,
        );
        let initial_log_weight = -(config.particle_count as f64).ln();
        let map = OccupancyGrid::new((0.0, 0.0), config.resolution)
            .with_update_model(config.log_odds_hit, config.log_odds_miss);
        let particles = (0..config.particle_count)
            .map(|_| Particle {
                pose: initial_pose,
                log_weight: initial_log_weight,
                map: map.clone(),
                trajectory: Vec::new(),
            })
            .collect();
        Self {
            config,
            particles,
            lut,
            step: 0,
            last_processed_odom: None,
            last_timestamp: None,
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn steps_processed(&self) -> u64 {
        self.step
    }

    /// Particle with the largest importance weight; ties go to the lowest
    /// index.
    pub fn best_particle(&self) -> &Particle {
        self.particles
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.log_weight
                    .partial_cmp(&b.log_weight)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // reversed index order makes max_by keep the lowest index on ties
                    .then(ib.cmp(ia))
            })
            .map(|(_, p)| p)
            .expect("particle set is never empty")
    }

    /// Total bytes of distinct map tile storage across all particles,
    /// counting shared tiles once.
    pub fn map_memory_bytes(&self) -> usize {
        grid::unique_tile_bytes(self.particles.iter().map(|p| &p.map))
    }

    /// Motion gate: process this odometry pose only if the robot moved far
    /// enough since the last processed scan (always true for the first).
    pub fn should_process(&self, odom_pose: &Pose2D) -> bool {
        should_process(
            self.last_processed_odom.as_ref(),
            odom_pose,
            self.config.linear_process_threshold,
            self.config.angular_process_threshold,
        )
    }

    /// Gate on odometry motion and, if due, derive the control increment and
    /// run one filter step. Returns `None` when the scan was gated away.
    pub fn advance(
        &mut self,
        odom_pose: &Pose2D,
        scan: &Scan,
        timestamp: f64,
    ) -> Result<Option<StepSummary>, FilterError> {
        if !self.should_process(odom_pose) {
            return Ok(None);
        }
        let control = match self.last_processed_odom {
            Some(last) => odom_pose.inverse_compose(&last),
            None => Pose2D::identity(),
        };
        let summary = self.process(&control, scan, timestamp)?;
        self.last_processed_odom = Some(*odom_pose);
        Ok(Some(summary))
    }

    /// One full filter step: sample motion, refine by scan matching, update
    /// maps, update and normalize weights, resample when the effective
    /// sample size falls below the threshold.
    pub fn process(
        &mut self,
        control: &Pose2D,
        scan: &Scan,
        timestamp: f64,
    ) -> Result<StepSummary, FilterError> {
        if let Some(previous) = self.last_timestamp {
            if timestamp <= previous {
                return Err(FilterError::NonMonotonicTimestamp {
                    timestamp,
                    previous,
                });
            }
        }
        let step = self.step;
        let config = &self.config;

        // initial guess
        let start = Instant::now();
        let guesses: Vec<Pose2D> = self
            .particles
            .par_iter()
            .enumerate()
            .map(|(k, particle)| {
                let mut rng = stream_rng(config.seed, step, k as u64);
                sample_motion(&particle.pose, control, &config.motion_noise, &mut rng)
            })
            .collect();
        let t_guess = start.elapsed();

        // scan matching, with the observation likelihood evaluated against
        // the pre-update map at whichever pose survives the rejection gate
        let start = Instant::now();
        let valid_beams = scan.valid_count();
        let outcomes: Vec<MatchOutcome> = self
            .particles
            .par_iter()
            .zip(guesses.par_iter())
            .map(|(particle, guess)| {
                match_particle(particle, guess, scan, config, &self.lut, valid_beams)
            })
            .collect();
        let t_match = start.elapsed();

        // map update
        let start = Instant::now();
        self.particles
            .par_iter_mut()
            .zip(outcomes.par_iter())
            .for_each(|(particle, outcome)| {
                particle.pose = outcome.pose;
                particle.trajectory.push((timestamp, outcome.pose));
                particle.map.add_scan(&outcome.pose, scan);
            });
        let t_map = start.elapsed();

        // weight update and normalization
        let start = Instant::now();
        for (particle, outcome) in self.particles.iter_mut().zip(&outcomes) {
            particle.log_weight += outcome.log_likelihood;
        }
        let log_weights: Vec<f64> = self.particles.iter().map(|p| p.log_weight).collect();
        let normalizer = log_sum_exp(&log_weights);
        if normalizer == f64::NEG_INFINITY || !normalizer.is_finite() {
            return Err(FilterError::Diverged { step });
        }
        for particle in &mut self.particles {
            particle.log_weight -= normalizer;
        }
        let normalized: Vec<f64> = self.particles.iter().map(|p| p.log_weight).collect();
        let ess = effective_sample_size(&normalized).map_err(|_| FilterError::Diverged { step })?;
        let t_weight = start.elapsed();

        // adaptive resampling
        let start = Instant::now();
        let threshold = config.resample_threshold_fraction * config.particle_count as f64;
        let resampled = ess < threshold;
        if resampled {
            let mut rng = stream_rng(config.seed, step, RESAMPLE_LANE);
            let u0: f64 = rng.random::<f64>();
            self.resample_with(u0);
        }
        let t_resample = start.elapsed();

        self.step += 1;
        self.last_timestamp = Some(timestamp);
        Ok(StepSummary {
            timestamp,
            ess,
            resampled,
            match_iterations: outcomes.iter().map(|o| o.iterations).collect(),
            rejected_matches: outcomes.iter().filter(|o| o.rejected).count(),
            overflows: outcomes.iter().filter(|o| o.overflow).count(),
            times: StageTimes {
                initial_guess: t_guess,
                scan_matching: t_match,
                map_update: t_map,
                weight_update: t_weight,
                resampling: t_resample,
            },
        })
    }

    /// Systematic resampling with the provided uniform draw. Survivor maps
    /// are shared copy-on-write; weights reset to uniform.
    fn resample_with(&mut self, u0: f64) {
        let weights: Vec<f64> = self
            .particles
            .iter()
            .map(|p| p.log_weight.exp())
            .collect();
        let ancestors = systematic_ancestors(&weights, u0);
        let uniform = -(self.particles.len() as f64).ln();
        let mut next = Vec::with_capacity(self.particles.len());
        for &a in &ancestors {
            let mut particle = self.particles[a].clone();
            particle.log_weight = uniform;
            next.push(particle);
        }
        self.particles = next;
    }

    /// Resample immediately from the current normalized weights (the
    /// adaptive gate normally decides this inside [`process`]).
    ///
    /// [`process`]: SlamEngine::process
    pub fn force_resample(&mut self) -> Result<(), FilterError> {
        let normalized: Vec<f64> = self.particles.iter().map(|p| p.log_weight).collect();
        effective_sample_size(&normalized)?;
        let mut rng = stream_rng(self.config.seed, self.step, RESAMPLE_LANE);
        let u0: f64 = rng.random::<f64>();
        self.resample_with(u0);
        Ok(())
    }
}

struct MatchOutcome {
    pose: Pose2D,
    log_likelihood: f64,
    iterations: u32,
    rejected: bool,
    overflow: bool,
}

fn match_particle(
    particle: &Particle,
    guess: &Pose2D,
    scan: &Scan,
    config: &FilterConfig,
    lut: &ScoreLut,
    valid_beams: usize,
) -> MatchOutcome {
    let params = &config.match_params;
    let rejected_by = |matched: usize| {
        valid_beams == 0 || (matched as f64) < config.min_match_fraction * valid_beams as f64
    };
    match config.backend {
        Backend::Reference => {
            let result = scan_match::hill_climb_reference(&particle.map, scan, *guess, params);
            if rejected_by(result.matched_beams) {
                MatchOutcome {
                    pose: *guess,
                    log_likelihood: valid_beams as f64 * params.log_likelihood_floor,
                    iterations: result.iterations_used,
                    rejected: true,
                    overflow: false,
                }
            } else {
                let log_likelihood =
                    scan_match::log_likelihood_reference(&particle.map, &result.pose, scan, params);
                MatchOutcome {
                    pose: result.pose,
                    log_likelihood,
                    iterations: result.iterations_used,
                    rejected: false,
                    overflow: false,
                }
            }
        }
        Backend::Accelerated => {
            let local = particle.map.extract_local_map(
                guess,
                config.local_half_width,
                params.occupied_threshold,
            );
            let result = scan_match::hill_climb_accelerated(&local, scan, *guess, params, lut);
            if rejected_by(result.matched_beams) {
                MatchOutcome {
                    pose: *guess,
                    log_likelihood: valid_beams as f64 * params.log_likelihood_floor,
                    iterations: result.iterations_used,
                    rejected: true,
                    overflow: result.overflow,
                }
            } else {
                let log_likelihood =
                    scan_match::log_likelihood_accelerated(&local, &result.pose, scan, params, lut);
                MatchOutcome {
                    pose: result.pose,
                    log_likelihood,
                    iterations: result.iterations_used,
                    rejected: false,
                    overflow: result.overflow,
                }
            }
        }
    }
}
