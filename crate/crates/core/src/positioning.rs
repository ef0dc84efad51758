//! Snapshot tag positioning from multi-anchor bearings.
//!
//! Every sighting is rotated into the user frame with its anchor's
//! calibrated orientation, giving a bearing line through the anchor. Each
//! line contributes two linear equations,
//!
//! ```text
//! (y - y0)·vx - vy·(x - x0) = 0
//! (x - x0)·vz - vx·(z - z0) = 0
//! ```
//!
//! and the fix is the least-squares intersection of all lines. Both
//! equations carry `vx`; bearings with `vx ≈ 0` constrain `x` only, which
//! the condition indicator surfaces instead of hiding.

use std::collections::BTreeMap;

use chrono::Duration;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{
    compose_rotation, unit_vector_from_angles, AnglePair, GeometryError, Point3, UnitVector3,
};
use crate::model::{AnchorConfig, MeasurementRecord, Timestamp};

const UNKNOWNS: usize = 3;

/// Condition indicator (ratio of extreme singular values of the design
/// matrix) above which a fix is refused.
pub const MAX_CONDITION: f64 = 1e8;

/// Default width of the window that groups sightings into one epoch.
pub const DEFAULT_EPOCH_WINDOW_MS: i64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PositioningError {
    #[error("need sightings from at least 2 distinct anchors, got {count}")]
    InsufficientAnchors { count: usize },
    #[error("anchor {id} appears more than once in the epoch")]
    DuplicateAnchor { id: String },
    #[error("anchors {first} and {second} share a position")]
    CoincidentAnchors { first: String, second: String },
    #[error("anchor {id} has no orientation; calibrate it first")]
    MissingOrientation { id: String },
    #[error("unknown anchor {id}")]
    UnknownAnchor { id: String },
    #[error("degenerate intersection geometry (condition indicator {condition:.3e})")]
    DegenerateGeometry { condition: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl PositioningError {
    /// Input/configuration problems as opposed to numerical ones.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Self::MissingOrientation { .. } | Self::UnknownAnchor { .. } | Self::Geometry(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sighting {
    pub anchor: AnchorConfig,
    pub angles: AnglePair,
    pub rssi_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositioningInput {
    pub epoch: Timestamp,
    pub sightings: Vec<Sighting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionFix {
    pub epoch: Timestamp,
    pub position: Point3,
    /// Covariance of (x, y, z), m².
    pub covariance: Matrix3<f64>,
    pub mse: f64,
    pub anchors_used: Vec<String>,
    /// Largest over smallest singular value of the design matrix.
    pub condition_indicator: f64,
}

/// A bearing line in the user frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingLine {
    pub origin: Point3,
    pub direction: UnitVector3,
}

/// Which line equations each bearing contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineEquations {
    /// The xy and xz pairings only.
    #[default]
    Paired,
    /// Adds `(y - y0)·vz - vy·(z - z0) = 0`, which stays informative when `vx → 0`.
    /// Changes the estimator, so it is off unless asked for.
    WithYz,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PositioningOptions {
    pub equations: LineEquations,
}

/// Anchor-frame angles rotated into the user frame.
pub fn to_user_frame(
    angles: &AnglePair,
    anchor: &AnchorConfig,
) -> Result<UnitVector3, PositioningError> {
    let orientation = anchor
        .orientation
        .ok_or_else(|| PositioningError::MissingOrientation { id: anchor.id.clone() })?;
    let u = unit_vector_from_angles(angles)?;
    Ok(compose_rotation(&orientation).apply(&u))
}

/// Checks the epoch invariants and converts every sighting into a bearing line.
pub fn bearing_lines(input: &PositioningInput) -> Result<Vec<BearingLine>, PositioningError> {
    let count = input.sightings.len();
    for (i, a) in input.sightings.iter().enumerate() {
        for b in &input.sightings[i + 1..] {
            if a.anchor.id == b.anchor.id {
                return Err(PositioningError::DuplicateAnchor { id: a.anchor.id.clone() });
            }
            if (a.anchor.position - b.anchor.position).norm() <= crate::geometry::MIN_RANGE {
                return Err(PositioningError::CoincidentAnchors {
                    first: a.anchor.id.clone(),
                    second: b.anchor.id.clone(),
                });
            }
        }
    }
    if count < 2 {
        return Err(PositioningError::InsufficientAnchors { count });
    }
    input
        .sightings
        .iter()
        .map(|s| {
            Ok(BearingLine {
                origin: s.anchor.position,
                direction: to_user_frame(&s.angles, &s.anchor)?,
            })
        })
        .collect()
}

/// Design matrix `A` and observation vector `B` with two rows per line.
pub fn build_system(lines: &[BearingLine]) -> (DMatrix<f64>, DVector<f64>) {
    build_system_with(lines, LineEquations::Paired)
}

pub fn build_system_with(
    lines: &[BearingLine],
    equations: LineEquations,
) -> (DMatrix<f64>, DVector<f64>) {
    let per_line = match equations {
        LineEquations::Paired => 2,
        LineEquations::WithYz => 3,
    };
    let rows = per_line * lines.len();
    let mut a = DMatrix::zeros(rows, UNKNOWNS);
    let mut b = DVector::zeros(rows);
    for (n, line) in lines.iter().enumerate() {
        let (x0, y0, z0) = (line.origin.x, line.origin.y, line.origin.z);
        let v = line.direction;
        let r = per_line * n;
        a[(r, 0)] = -v.y;
        a[(r, 1)] = v.x;
        b[r] = y0 * v.x - x0 * v.y;
        a[(r + 1, 0)] = v.z;
        a[(r + 1, 2)] = -v.x;
        b[r + 1] = x0 * v.z - v.x * z0;
        if equations == LineEquations::WithYz {
            a[(r + 2, 1)] = v.z;
            a[(r + 2, 2)] = -v.y;
            b[r + 2] = y0 * v.z - v.y * z0;
        }
    }
    (a, b)
}

pub fn solve_position(input: &PositioningInput) -> Result<PositionFix, PositioningError> {
    solve_position_with(input, &PositioningOptions::default())
}

pub fn solve_position_with(
    input: &PositioningInput,
    options: &PositioningOptions,
) -> Result<PositionFix, PositioningError> {
    let lines = bearing_lines(input)?;
    let (a, b) = build_system_with(&lines, options.equations);
    let solution = least_squares(&a, &b)?;
    Ok(PositionFix {
        epoch: input.epoch,
        position: Point3::from(solution.x),
        covariance: solution.covariance,
        mse: solution.mse,
        anchors_used: input.sightings.iter().map(|s| s.anchor.id.clone()).collect(),
        condition_indicator: solution.condition,
    })
}

struct LeastSquares {
    x: Vector3<f64>,
    covariance: Matrix3<f64>,
    mse: f64,
    condition: f64,
}

/// Solves `A x = B` through the SVD of `A`; `(AᵀA)⁻¹ = V S⁻² Vᵀ` is formed
/// only for the covariance.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LeastSquares, PositioningError> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(PositioningError::DegenerateGeometry { condition });
    }
    let x_dyn = svd
        .solve(b, 0.0)
        .map_err(|_| PositioningError::DegenerateGeometry { condition })?;
    let x = Vector3::new(x_dyn[0], x_dyn[1], x_dyn[2]);
    let residual = b - a * &x_dyn;
    let dof = a.nrows() - UNKNOWNS;
    let mse = residual.norm_squared() / dof as f64;

    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut inverse_normal = Matrix3::zeros();
    for k in 0..UNKNOWNS {
        let vk: Vector3<f64> = v_t.row(k).transpose().fixed_rows::<3>(0).into_owned();
        inverse_normal += vk * vk.transpose() / svd.singular_values[k].powi(2);
    }
    let covariance = inverse_normal * mse;
    Ok(LeastSquares {
        x,
        covariance: (covariance + covariance.transpose()) * 0.5,
        mse,
        condition,
    })
}

/// Result of one epoch in a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum EpochOutcome {
    Fix(PositionFix),
    Gap {
        epoch: Timestamp,
        reason: PositioningError,
    },
}

impl EpochOutcome {
    pub fn fix(&self) -> Option<&PositionFix> {
        match self {
            Self::Fix(f) => Some(f),
            Self::Gap { .. } => None,
        }
    }
}

/// Independent per-epoch solves; epochs that cannot be solved become gaps.
pub fn solve_trajectory<'a>(
    inputs: impl IntoIterator<Item = &'a PositioningInput>,
) -> Vec<EpochOutcome> {
    inputs
        .into_iter()
        .map(|input| match solve_position(input) {
            Ok(fix) => EpochOutcome::Fix(fix),
            Err(reason) => EpochOutcome::Gap {
                epoch: input.epoch,
                reason,
            },
        })
        .collect()
}

/// A tag's epoch assembled from the measurement log.
#[derive(Debug, Clone, PartialEq)]
pub struct TagEpoch {
    pub tag_id: String,
    pub input: PositioningInput,
}

/// Groups raw sightings into per-tag epochs.
///
/// For each tag, records are sorted by time; an epoch opens at the first
/// unassigned record and takes every record less than `window` after it.
/// Repeated sightings from one anchor inside a window are averaged. The
/// epoch timestamp is the opening record's timestamp. Output is ordered by
/// (timestamp, tag id).
pub fn assemble_epochs(
    records: &[MeasurementRecord],
    anchors: &BTreeMap<String, AnchorConfig>,
    window: Duration,
) -> Result<Vec<TagEpoch>, PositioningError> {
    let mut by_tag: BTreeMap<&str, Vec<&MeasurementRecord>> = BTreeMap::new();
    for r in records {
        let anchor = anchors
            .get(&r.anchor_id)
            .ok_or_else(|| PositioningError::UnknownAnchor { id: r.anchor_id.clone() })?;
        if anchor.orientation.is_none() {
            return Err(PositioningError::MissingOrientation { id: anchor.id.clone() });
        }
        by_tag.entry(&r.tag_id).or_default().push(r);
    }

    let mut epochs = Vec::new();
    for (tag_id, mut recs) in by_tag {
        recs.sort_by_key(|r| r.timestamp);
        let mut start = 0;
        while start < recs.len() {
            let opened = recs[start].timestamp;
            let end = recs[start..]
                .iter()
                .position(|r| r.timestamp - opened >= window)
                .map_or(recs.len(), |p| start + p);
            let mut per_anchor: BTreeMap<&str, Vec<&MeasurementRecord>> = BTreeMap::new();
            for r in &recs[start..end] {
                per_anchor.entry(&r.anchor_id).or_default().push(r);
            }
            let sightings = per_anchor
                .into_iter()
                .map(|(anchor_id, group)| average_sighting(&anchors[anchor_id], &group))
                .collect();
            epochs.push(TagEpoch {
                tag_id: tag_id.to_string(),
                input: PositioningInput {
                    epoch: opened,
                    sightings,
                },
            });
            start = end;
        }
    }
    epochs.sort_by(|a, b| (a.input.epoch, &a.tag_id).cmp(&(b.input.epoch, &b.tag_id)));
    Ok(epochs)
}

fn average_sighting(anchor: &AnchorConfig, group: &[&MeasurementRecord]) -> Sighting {
    let n = group.len() as f64;
    let azimuth = group.iter().map(|r| r.angles.azimuth).sum::<f64>() / n;
    let elevation = group.iter().map(|r| r.angles.elevation).sum::<f64>() / n;
    let rssi: Vec<f64> = group.iter().filter_map(|r| r.rssi_dbm).collect();
    Sighting {
        anchor: anchor.clone(),
        angles: AnglePair { azimuth, elevation },
        rssi_dbm: (!rssi.is_empty()).then(|| rssi.iter().sum::<f64>() / rssi.len() as f64),
    }
}
