//! CARMEN-format robot log ingestion and ground-truth relation files.
//!
//! The CARMEN text format carries one message per line. The two messages
//! this engine consumes are
//!
//! ```text
//! FLASER n r_1 ... r_n laser_x laser_y laser_θ odom_x odom_y odom_θ ts host logts
//! ODOM x y θ tv rv accel ts host logts
//! ```
//!
//! Relations files pair two timestamps with the ground-truth relative
//! transform between them, one `t1 t2 x y z roll pitch yaw` per line; the
//! z/roll/pitch components are discarded for the planar case.

use crate::geometry::Pose2D;
use crate::scan_match::{Beam, Scan};
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading log: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// One parsed log event. Laser events carry a scan; odometry events do not.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEvent {
    pub timestamp: f64,
    pub odom_pose: Pose2D,
    pub laser_pose: Option<Pose2D>,
    pub scan: Option<Scan>,
}

impl LogEvent {
    pub fn is_laser(&self) -> bool {
        self.scan.is_some()
    }
}

/// A manually verified relative transform between two trajectory times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthRelation {
    pub t1: f64,
    pub t2: f64,
    pub relative_pose: Pose2D,
}

/// Parser knobs. The CARMEN defaults suit the classic 180° planar scanners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParserConfig {
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
    /// Angular field of view; `n` beams span it uniformly, first beam at
    /// `-fov/2`.
    pub field_of_view: f64,
    /// Sensor mounting pose relative to the robot origin, composed onto the
    /// odometry pose by consumers that need the sensor frame.
    pub sensor_offset: Pose2D,
    pub range_min: f64,
    pub range_max: f64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            strict: false,
            field_of_view: std::f64::consts::PI,
            sensor_offset: Pose2D::identity(),
            range_min: 0.05,
            range_max: 20.0,
        }
    }
}

/// A warning attached to a skipped line in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseWarning {
    pub line: usize,
    pub reason: String,
}

/// Result of parsing a CARMEN log.
#[derive(Debug, Clone, Default)]
pub struct CarmenLog {
    pub events: Vec<LogEvent>,
    pub warnings: Vec<ParseWarning>,
    /// Lines with a message type this parser does not consume.
    pub unknown_messages: usize,
}

/// Uniform beam bearings spanning the field of view: `n - 1` equal intervals
/// with the first beam at `-fov/2`.
pub fn beam_angles(n: usize, field_of_view: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -field_of_view / 2.0 + field_of_view * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Parse a CARMEN log stream. In lenient mode malformed lines are reported
/// with their line number and skipped; strict mode aborts instead.
pub fn parse_carmen<R: BufRead>(reader: R, config: &ParserConfig) -> Result<CarmenLog, DatasetError> {
    let mut log = CarmenLog::default();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        match parse_line(&line, config) {
            Ok(ParsedLine::Event(event)) => log.events.push(event),
            Ok(ParsedLine::Unknown) => log.unknown_messages += 1,
            Ok(ParsedLine::Empty) => {}
            Err(reason) => {
                if config.strict {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        reason,
                    });
                }
                log.warnings.push(ParseWarning {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(log)
}

enum ParsedLine {
    Event(LogEvent),
    Unknown,
    Empty,
}

fn parse_line(line: &str, config: &ParserConfig) -> Result<ParsedLine, String> {
    let mut fields = line.split_whitespace();
    let Some(kind) = fields.next() else {
        return Ok(ParsedLine::Empty);
    };
    let rest: Vec<&str> = fields.collect();
    match kind {
        "FLASER" => parse_flaser(&rest, config).map(ParsedLine::Event),
        "ODOM" => parse_odom(&rest).map(ParsedLine::Event),
        _ => Ok(ParsedLine::Unknown),
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64, String> {
    field
        .parse::<f64>()
        .map_err(|_| format!("bad {what} field '{field}'"))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("non-finite {what} field '{field}'"))
            }
        })
}

fn parse_flaser(fields: &[&str], config: &ParserConfig) -> Result<LogEvent, String> {
    let n: usize = fields
        .first()
        .ok_or("FLASER missing reading count")?
        .parse()
        .map_err(|_| format!("bad FLASER reading count '{}'", fields[0]))?;
    // n readings + laser pose (3) + odom pose (3) + ts + host + logts
    let expected = n.checked_add(9).ok_or("FLASER reading count too large")?;
    if fields.len() - 1 != expected {
        return Err(format!(
            "FLASER declares {n} readings but carries {} fields after the count (expected {expected})",
            fields.len() - 1
        ));
    }
    let angles = beam_angles(n, config.field_of_view);
    let mut beams = Vec::with_capacity(n);
    for i in 0..n {
        let range = parse_f64(fields[1 + i], "range")?;
        beams.push(Beam {
            range,
            angle: angles[i],
        });
    }
    let scan = Scan::new(beams, config.range_min, config.range_max)
        .map_err(|e| format!("bad scan: {e}"))?;
    let f = |i: usize, what: &str| parse_f64(fields[1 + n + i], what);
    let laser_pose = Pose2D::new(f(0, "laser_x")?, f(1, "laser_y")?, f(2, "laser_theta")?);
    let odom_pose = Pose2D::new(f(3, "odom_x")?, f(4, "odom_y")?, f(5, "odom_theta")?);
    let timestamp = f(6, "timestamp")?;
    Ok(LogEvent {
        timestamp,
        odom_pose,
        laser_pose: Some(laser_pose),
        scan: Some(scan),
    })
}

fn parse_odom(fields: &[&str]) -> Result<LogEvent, String> {
    // x y θ tv rv accel ts host logts
    if fields.len() != 9 {
        return Err(format!("ODOM carries {} fields, expected 9", fields.len()));
    }
    let f = |i: usize, what: &str| parse_f64(fields[i], what);
    let odom_pose = Pose2D::new(f(0, "x")?, f(1, "y")?, f(2, "theta")?);
    let timestamp = f(6, "timestamp")?;
    Ok(LogEvent {
        timestamp,
        odom_pose,
        laser_pose: None,
        scan: None,
    })
}

/// Serialize a laser event back to a CARMEN `FLASER` line (6 decimal places,
/// matching the precision the round-trip contract guarantees). Odometry-only
/// events become `ODOM` lines with zero velocities.
pub fn to_carmen_line(event: &LogEvent) -> String {
    use std::fmt::Write;
    let mut line = String::new();
    match &event.scan {
        Some(scan) => {
            write!(line, "FLASER {}", scan.beams.len()).unwrap();
            for beam in &scan.beams {
                write!(line, " {:.6}", beam.range).unwrap();
            }
            let laser = event.laser_pose.unwrap_or(event.odom_pose);
            write!(
                line,
                " {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} gridslam {:.6}",
                laser.x,
                laser.y,
                laser.theta,
                event.odom_pose.x,
                event.odom_pose.y,
                event.odom_pose.theta,
                event.timestamp,
                event.timestamp
            )
            .unwrap();
        }
        None => {
            write!(
                line,
                "ODOM {:.6} {:.6} {:.6} 0.000000 0.000000 0.000000 {:.6} gridslam {:.6}",
                event.odom_pose.x, event.odom_pose.y, event.odom_pose.theta,
                event.timestamp, event.timestamp
            )
            .unwrap();
        }
    }
    line
}

/// Result of parsing a relations stream.
#[derive(Debug, Clone, Default)]
pub struct RelationsFile {
    pub relations: Vec<GroundTruthRelation>,
    pub warnings: Vec<ParseWarning>,
}

/// Parse ground-truth relations: `t1 t2 x y z roll pitch yaw` per line with
/// `t1 < t2`; yaw becomes the planar heading.
pub fn parse_relations<R: BufRead>(
    reader: R,
    strict: bool,
) -> Result<RelationsFile, DatasetError> {
    let mut out = RelationsFile::default();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        if line.split_whitespace().next().is_none() {
            continue;
        }
        match parse_relation_line(&line) {
            Ok(relation) => out.relations.push(relation),
            Err(reason) => {
                if strict {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        reason,
                    });
                }
                out.warnings.push(ParseWarning {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

fn parse_relation_line(line: &str) -> Result<GroundTruthRelation, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 fields, got {}", fields.len()));
    }
    let f = |i: usize, what: &str| parse_f64(fields[i], what);
    let t1 = f(0, "t1")?;
    let t2 = f(1, "t2")?;
    if t1 >= t2 {
        return Err(format!("timestamps must satisfy t1 < t2, got {t1} >= {t2}"));
    }
    let x = f(2, "x")?;
    let y = f(3, "y")?;
    let yaw = f(7, "yaw")?;
    Ok(GroundTruthRelation {
        t1,
        t2,
        relative_pose: Pose2D::new(x, y, yaw),
    })
}

/// Derive per-scan controls from consecutive laser events' odometry poses.
///
/// Each laser event yields `(timestamp, control, scan)` where the control is
/// the relative transform from the previous laser event's odometry pose (the
/// first event gets a zero control). Odometry-only events contribute nothing
/// here; consumers that gate on motion use the raw events instead.
pub fn controls_from_odometry(events: &[LogEvent]) -> Vec<(f64, Pose2D, Scan)> {
    let mut out = Vec::new();
    let mut previous: Option<Pose2D> = None;
    for event in events {
        let Some(scan) = &event.scan else { continue };
        let control = match previous {
            Some(prev) => event.odom_pose.inverse_compose(&prev),
            None => Pose2D::identity(),
        };
        out.push((event.timestamp, control, scan.clone()));
        previous = Some(event.odom_pose);
    }
    out
}
