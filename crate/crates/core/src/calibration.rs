//! Anchor orientation calibration.
//!
//! Given an anchor at a surveyed position and a set of tags at surveyed
//! positions, each anchor-frame bearing `u` must map onto the user-frame
//! direction `v` toward the tag: `R(roll, pitch, yaw) · u = v`. The three
//! angles are found by Gauss-Newton on the stacked 3-component residuals,
//! seeded from a closed-form SVD alignment of the `u`/`v` pairs.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{
    compose_rotation, rotation_jacobian, unit_vector_between, unit_vector_from_angles,
    AnglePair, EulerAngles, GeometryError, Point3, RotationMatrix3, UnitVector3,
};

/// Number of estimated parameters (roll, pitch, yaw).
const UNKNOWNS: usize = 3;

/// Step halvings tried before a Gauss-Newton step is declared stalled.
const MAX_STEP_HALVINGS: usize = 8;

/// Reciprocal condition number of `JᵀJ` below which the normal equations are singular.
const MIN_RCOND: f64 = 1e-12;

/// Singular-value ratio below which all bearings are treated as parallel.
const PARALLEL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("insufficient calibration geometry: {accepted} tag(s) accepted, {required} required; rejected: {}", format_rejections(.rejected))]
    InsufficientGeometry {
        accepted: usize,
        required: usize,
        rejected: Vec<RejectedTag>,
    },
    #[error("degenerate initialization geometry: bearings are parallel")]
    DegenerateInitialization,
    #[error("degenerate geometry: normal matrix is singular (rcond {rcond:.3e})")]
    DegenerateGeometry { rcond: f64 },
    #[error("no convergence after {iterations} iterations (last max |step| {last_step_deg:.3e} deg)")]
    NotConverged {
        iterations: usize,
        last_step_deg: f64,
    },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn format_rejections(rejected: &[RejectedTag]) -> String {
    if rejected.is_empty() {
        return "none".to_string();
    }
    rejected
        .iter()
        .map(|r| format!("{} ({})", r.tag_id, r.reason))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One tag's observation session as seen by the anchor being calibrated.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationObservation {
    pub tag_id: String,
    pub tag_position: Point3,
    pub anchor_position: Point3,
    pub measurements: Vec<AnglePair>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    /// Tags whose azimuth or elevation sample std exceeds this are dropped (degrees).
    pub sample_std_threshold: f64,
    /// Iteration stops once every component of the step is below this (degrees).
    pub convergence_threshold: f64,
    pub max_iterations: usize,
    pub min_tags: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            sample_std_threshold: 3.0,
            convergence_threshold: 1e-6,
            max_iterations: 50,
            min_tags: 3,
        }
    }
}

impl CalibrationSettings {
    fn validate(&self) -> Result<(), CalibrationError> {
        if !(self.sample_std_threshold >= 0.0) {
            return Err(CalibrationError::InvalidSettings(
                "sample_std_threshold must be non-negative".into(),
            ));
        }
        if !(self.convergence_threshold > 0.0) || self.max_iterations == 0 || self.min_tags == 0 {
            return Err(CalibrationError::InvalidSettings(
                "convergence_threshold, max_iterations and min_tags must be positive".into(),
            ));
        }
        Ok(())
    }

    /// At least two tags are always needed so that the MSE denominator is positive.
    fn required_tags(&self) -> usize {
        self.min_tags.max(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedTag {
    pub tag_id: String,
    pub reason: String,
}

/// A tag that survived pre-processing, with its session-mean angles.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedTag {
    pub tag_id: String,
    pub tag_position: Point3,
    pub anchor_position: Point3,
    pub mean: AnglePair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub accepted: Vec<AcceptedTag>,
    pub rejected: Vec<RejectedTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSolution {
    pub angles: EulerAngles,
    /// Covariance of (roll, pitch, yaw), degrees².
    pub covariance: Matrix3<f64>,
    pub mse: f64,
    pub iterations: usize,
    pub used_tags: Vec<String>,
    pub rejected_tags: Vec<RejectedTag>,
}

impl CalibrationSolution {
    pub fn rotation(&self) -> RotationMatrix3 {
        compose_rotation(&self.angles)
    }

    /// Per-angle standard deviations (roll, pitch, yaw), degrees.
    pub fn std_devs(&self) -> EulerAngles {
        let d = self.covariance.diagonal();
        EulerAngles::new(d.x.max(0.0).sqrt(), d.y.max(0.0).sqrt(), d.z.max(0.0).sqrt())
    }
}

/// Sample mean and (n-1) standard deviation. A single sample has std 0.
fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Outlier screening: a tag is kept only when both its azimuth and
/// elevation sample std over the session are within the threshold.
pub fn preprocess(
    observations: &[CalibrationObservation],
    settings: &CalibrationSettings,
) -> Result<Preprocessed, CalibrationError> {
    settings.validate()?;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for obs in observations {
        let reject = |reason: String| RejectedTag {
            tag_id: obs.tag_id.clone(),
            reason,
        };
        if obs.measurements.is_empty() {
            rejected.push(reject("no samples".into()));
            continue;
        }
        if let Some(bad) = obs.measurements.iter().find_map(|m| m.validate().err()) {
            rejected.push(reject(bad.to_string()));
            continue;
        }
        if unit_vector_between(&obs.anchor_position, &obs.tag_position).is_err() {
            rejected.push(reject("tag coincident with anchor".into()));
            continue;
        }
        let (az_mean, az_std) = mean_std(obs.measurements.iter().map(|m| m.azimuth));
        let (el_mean, el_std) = mean_std(obs.measurements.iter().map(|m| m.elevation));
        let limit = settings.sample_std_threshold;
        if az_std > limit {
            rejected.push(reject(format!("azimuth std {az_std:.1} > {limit:.1}")));
        } else if el_std > limit {
            rejected.push(reject(format!("elevation std {el_std:.1} > {limit:.1}")));
        } else {
            accepted.push(AcceptedTag {
                tag_id: obs.tag_id.clone(),
                tag_position: obs.tag_position,
                anchor_position: obs.anchor_position,
                mean: AnglePair {
                    azimuth: az_mean,
                    elevation: el_mean,
                },
            });
        }
    }
    let required = settings.required_tags();
    if accepted.len() < required {
        return Err(CalibrationError::InsufficientGeometry {
            accepted: accepted.len(),
            required,
            rejected,
        });
    }
    Ok(Preprocessed { accepted, rejected })
}

/// Closed-form rotation that best maps each anchor-frame `u` onto its
/// user-frame `v` in the least-squares sense (SVD of `Σ v uᵀ`).
pub fn initial_orientation(
    pairs: &[(UnitVector3, UnitVector3)],
) -> Result<EulerAngles, CalibrationError> {
    if pairs.len() < 2 {
        return Err(CalibrationError::DegenerateInitialization);
    }
    let mut u_spread = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (u, v) in pairs {
        u_spread += u.into_inner() * u.transpose();
        cross += v.into_inner() * u.transpose();
    }
    // Two non-parallel u directions give rank ≥ 2 here.
    let spread = u_spread.singular_values();
    let (smax, smid) = sorted_top_two(&spread);
    if smax <= 0.0 || smid / smax < PARALLEL_TOLERANCE {
        return Err(CalibrationError::DegenerateInitialization);
    }
    let svd = cross.svd(true, true);
    let (Some(left), Some(right_t)) = (svd.u, svd.v_t) else {
        return Err(CalibrationError::DegenerateInitialization);
    };
    let mut fix = Matrix3::identity();
    if (left * right_t).determinant() < 0.0 {
        // nalgebra sorts singular values descending; flip the smallest.
        fix[(2, 2)] = -1.0;
    }
    let rotation = RotationMatrix3::from_matrix_unchecked(left * fix * right_t);
    Ok(rotation.to_euler())
}

fn sorted_top_two(values: &Vector3<f64>) -> (f64, f64) {
    let mut s = [values.x, values.y, values.z];
    s.sort_by(|a, b| b.total_cmp(a));
    (s[0], s[1])
}

/// Bearing pairs (anchor-frame `u`, user-frame `v`) for accepted tags.
pub fn bearing_pairs(
    accepted: &[AcceptedTag],
) -> Result<Vec<(UnitVector3, UnitVector3)>, GeometryError> {
    accepted
        .iter()
        .map(|t| {
            Ok((
                unit_vector_from_angles(&t.mean)?,
                unit_vector_between(&t.anchor_position, &t.tag_position)?,
            ))
        })
        .collect()
}

/// Full calibration: pre-processing, closed-form seed, Gauss-Newton.
pub fn calibrate(
    observations: &[CalibrationObservation],
    settings: &CalibrationSettings,
) -> Result<CalibrationSolution, CalibrationError> {
    calibrate_inner(observations, settings, None)
}

/// Same as [`calibrate`] but iterating from the supplied starting angles
/// instead of the closed-form seed.
pub fn calibrate_from(
    observations: &[CalibrationObservation],
    settings: &CalibrationSettings,
    seed: EulerAngles,
) -> Result<CalibrationSolution, CalibrationError> {
    calibrate_inner(observations, settings, Some(seed))
}

fn calibrate_inner(
    observations: &[CalibrationObservation],
    settings: &CalibrationSettings,
    seed: Option<EulerAngles>,
) -> Result<CalibrationSolution, CalibrationError> {
    let pre = preprocess(observations, settings)?;
    let pairs = bearing_pairs(&pre.accepted)?;
    check_user_directions(&pairs)?;
    let start = match seed {
        Some(s) => s,
        None => initial_orientation(&pairs)?,
    };
    let fit = gauss_newton(&pairs, start, settings)?;
    Ok(CalibrationSolution {
        angles: fit.angles.normalized(),
        covariance: fit.covariance,
        mse: fit.mse,
        iterations: fit.iterations,
        used_tags: pre.accepted.iter().map(|t| t.tag_id.clone()).collect(),
        rejected_tags: pre.rejected,
    })
}

/// Tags lying on one ray from the anchor cannot fix a rotation.
fn check_user_directions(pairs: &[(UnitVector3, UnitVector3)]) -> Result<(), CalibrationError> {
    let mut spread = Matrix3::zeros();
    for (_, v) in pairs {
        spread += v.into_inner() * v.transpose();
    }
    let (smax, smid) = sorted_top_two(&spread.singular_values());
    if smax <= 0.0 || smid / smax < PARALLEL_TOLERANCE {
        return Err(CalibrationError::DegenerateGeometry { rcond: 0.0 });
    }
    Ok(())
}

struct GaussNewtonFit {
    angles: EulerAngles,
    covariance: Matrix3<f64>,
    mse: f64,
    iterations: usize,
    /// Sum of squared residuals after each accepted iterate, starting with the seed.
    #[cfg_attr(not(test), allow(dead_code))]
    cost_history: Vec<f64>,
}

/// Stacked residuals `R(e)·u − v` (3 rows per tag) and their Jacobian, per radian.
fn linearize(
    pairs: &[(UnitVector3, UnitVector3)],
    angles: &EulerAngles,
) -> (DVector<f64>, DMatrix<f64>) {
    let rotation = compose_rotation(angles);
    let mut residual = DVector::zeros(3 * pairs.len());
    let mut jacobian = DMatrix::zeros(3 * pairs.len(), UNKNOWNS);
    for (i, (u, v)) in pairs.iter().enumerate() {
        let r = rotation.matrix() * u.into_inner() - v.into_inner();
        residual.fixed_rows_mut::<3>(3 * i).copy_from(&r);
        jacobian
            .fixed_view_mut::<3, 3>(3 * i, 0)
            .copy_from(&rotation_jacobian(angles, u));
    }
    (residual, jacobian)
}

fn sum_squares(pairs: &[(UnitVector3, UnitVector3)], angles: &EulerAngles) -> f64 {
    let rotation = compose_rotation(angles);
    pairs
        .iter()
        .map(|(u, v)| (rotation.matrix() * u.into_inner() - v.into_inner()).norm_squared())
        .sum()
}

fn normal_matrix(jacobian: &DMatrix<f64>) -> Result<Matrix3<f64>, CalibrationError> {
    let jtj: Matrix3<f64> = (jacobian.transpose() * jacobian).fixed_view::<3, 3>(0, 0).into_owned();
    let sv = jtj.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond >= MIN_RCOND) {
        return Err(CalibrationError::DegenerateGeometry { rcond });
    }
    Ok(jtj)
}

fn gauss_newton(
    pairs: &[(UnitVector3, UnitVector3)],
    start: EulerAngles,
    settings: &CalibrationSettings,
) -> Result<GaussNewtonFit, CalibrationError> {
    let mut current = start.to_radians();
    let mut cost = sum_squares(pairs, &start);
    let mut cost_history = vec![cost];
    let mut iterations = 0;
    let mut last_step_deg = f64::INFINITY;
    let mut converged = false;

    while iterations < settings.max_iterations {
        iterations += 1;
        let angles = EulerAngles::from_radians(&current);
        let (residual, jacobian) = linearize(pairs, &angles);
        let jtj = normal_matrix(&jacobian)?;
        let jtr: Vector3<f64> = (jacobian.transpose() * &residual).fixed_rows::<3>(0).into_owned();
        let chol = jtj
            .cholesky()
            .ok_or(CalibrationError::DegenerateGeometry { rcond: 0.0 })?;
        let step = -chol.solve(&jtr);
        last_step_deg = step.amax().to_degrees();
        if last_step_deg < settings.convergence_threshold {
            current += step;
            converged = true;
            break;
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let trial = current + step * scale;
            let trial_cost = sum_squares(pairs, &EulerAngles::from_radians(&trial));
            if trial_cost <= cost {
                accepted = Some((trial, trial_cost));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((next, next_cost)) => {
                current = next;
                cost = next_cost;
                cost_history.push(cost);
            }
            None => {
                // No descent along the step at any tried length: the cost is
                // at its numerical floor, so the current point is the minimum.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(CalibrationError::NotConverged {
            iterations,
            last_step_deg,
        });
    }

    let angles = EulerAngles::from_radians(&current);
    let (residual, jacobian) = linearize(pairs, &angles);
    let jtj = normal_matrix(&jacobian)?;
    let observations = residual.len();
    let mse = residual.norm_squared() / (observations - UNKNOWNS) as f64;
    let inverse = jtj
        .try_inverse()
        .ok_or(CalibrationError::DegenerateGeometry { rcond: 0.0 })?;
    let to_deg2 = 1.0_f64.to_degrees().powi(2);
    let mut covariance = inverse * mse * to_deg2;
    covariance = (covariance + covariance.transpose()) * 0.5;
    Ok(GaussNewtonFit {
        angles,
        covariance,
        mse,
        iterations,
        cost_history,
    })
}
