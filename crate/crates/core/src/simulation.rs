//! Ground-truth oracle: synthetic anchors, tags and AoA sightings.
//!
//! Measurements come from inverting the measurement model: the true
//! user-frame direction to the tag is rotated back into the anchor frame
//! and decoded into azimuth/elevation. Noise is drawn from a ChaCha8
//! stream (`rand_chacha::ChaCha8Rng`) seeded from the scenario, so logs are
//! identical across runs and platforms for the same seed.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    angles_from_unit_vector, compose_rotation, unit_vector_between, AnglePair, EulerAngles,
    GeometryError, Point3,
};
use crate::model::{AnchorConfig, MeasurementRecord, Timestamp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("tag not visible to anchor")]
    NotVisible,
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Constant per-anchor angle offsets, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleBias {
    #[serde(default)]
    pub azimuth: f64,
    #[serde(default)]
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Std of the i.i.d. Gaussian error on each angle, degrees.
    #[serde(default)]
    pub angle_sigma: f64,
    /// Probability that a sighting draws from the outlier distribution instead.
    #[serde(default)]
    pub outlier_rate: f64,
    #[serde(default)]
    pub outlier_sigma: f64,
    /// Systematic offsets keyed by anchor id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bias: BTreeMap<String, AngleBias>,
}

impl NoiseModel {
    pub fn gaussian(angle_sigma: f64) -> Self {
        Self {
            angle_sigma,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), SimulationError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.angle_sigma) || !ok(self.outlier_sigma) {
            return Err(SimulationError::InvalidScenario(
                "noise sigmas must be finite and non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(SimulationError::InvalidScenario(
                "noise.outlier_rate must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioAnchor {
    pub id: String,
    pub position: [f64; 3],
    pub orientation: EulerAngles,
}

impl ScenarioAnchor {
    pub fn position(&self) -> Point3 {
        Point3::from(self.position)
    }

    /// Surveyed configuration as handed to the pipeline: position only.
    pub fn surveyed(&self) -> AnchorConfig {
        AnchorConfig::new(self.id.clone(), self.position())
    }

    /// Configuration carrying the true orientation.
    pub fn with_truth(&self) -> AnchorConfig {
        self.surveyed().with_orientation(self.orientation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTag {
    pub id: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPoint {
    /// Seconds after the scenario start time.
    pub t: f64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub tag_id: String,
    pub points: Vec<TrajectoryPoint>,
}

fn default_start() -> Timestamp {
    DateTime::<Utc>::from_timestamp(1_704_067_200, 0).expect("valid epoch")
}

fn default_samples() -> usize {
    60
}

fn default_interval() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub anchors: Vec<ScenarioAnchor>,
    /// Static tags, observed for `samples_per_tag` epochs each.
    #[serde(default)]
    pub tags: Vec<ScenarioTag>,
    #[serde(default)]
    pub trajectory: Option<Trajectory>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_time: Timestamp,
    #[serde(default = "default_samples")]
    pub samples_per_tag: usize,
    #[serde(default = "default_interval")]
    pub sample_interval_s: f64,
}

impl Scenario {
    pub fn new(anchors: Vec<ScenarioAnchor>, tags: Vec<ScenarioTag>) -> Self {
        Self {
            anchors,
            tags,
            trajectory: None,
            noise: NoiseModel::default(),
            seed: 0,
            start_time: default_start(),
            samples_per_tag: default_samples(),
            sample_interval_s: default_interval(),
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let invalid = |m: String| Err(SimulationError::InvalidScenario(m));
        let mut ids = BTreeSet::new();
        for a in &self.anchors {
            if !ids.insert(a.id.as_str()) {
                return invalid(format!("duplicate anchor id {}", a.id));
            }
            if a.position.iter().any(|c| !c.is_finite()) {
                return invalid(format!("anchor {} position is not finite", a.id));
            }
        }
        let mut tag_ids = BTreeSet::new();
        for t in &self.tags {
            if !tag_ids.insert(t.id.as_str()) {
                return invalid(format!("duplicate tag id {}", t.id));
            }
        }
        if let Some(traj) = &self.trajectory {
            if tag_ids.contains(traj.tag_id.as_str()) {
                return invalid(format!("trajectory tag {} is also a static tag", traj.tag_id));
            }
            for w in traj.points.windows(2) {
                if !(w[1].t > w[0].t) {
                    return invalid("trajectory timestamps must be strictly increasing".into());
                }
            }
        }
        if self.samples_per_tag == 0 || !(self.sample_interval_s > 0.0) {
            return invalid("samples_per_tag and sample_interval_s must be positive".into());
        }
        self.noise.validate()
    }
}

/// Angles a noiseless anchor at `anchor` with orientation `orientation`
/// reports for a tag at `tag`.
pub fn true_angles(
    anchor: &Point3,
    orientation: &EulerAngles,
    tag: &Point3,
) -> Result<AnglePair, SimulationError> {
    let v = unit_vector_between(anchor, tag)?;
    let u = compose_rotation(orientation).transpose().matrix() * v.into_inner();
    match angles_from_unit_vector(&u) {
        Ok(d) => Ok(d.angles),
        Err(GeometryError::OutsideFieldOfView { .. }) => Err(SimulationError::NotVisible),
        Err(e) => Err(e.into()),
    }
}

/// Seeded angle-noise source.
pub struct NoiseSampler {
    rng: ChaCha8Rng,
    model: NoiseModel,
}

impl NoiseSampler {
    pub fn new(model: NoiseModel, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            model,
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(rand_distr::StandardNormal)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        self.rng.gen_range(low..high)
    }

    /// Adds bias and noise; results are clamped into the reportable `[-90, 90]`.
    pub fn perturb(&mut self, truth: &AnglePair, anchor_id: &str) -> AnglePair {
        let outlier = self.model.outlier_rate > 0.0 && self.rng.gen::<f64>() < self.model.outlier_rate;
        let sigma = if outlier {
            self.model.outlier_sigma
        } else {
            self.model.angle_sigma
        };
        let normal = Normal::new(0.0, sigma).expect("validated sigma");
        let bias = self.model.bias.get(anchor_id).copied().unwrap_or_default();
        let azimuth = truth.azimuth + bias.azimuth + normal.sample(&mut self.rng);
        let elevation = truth.elevation + bias.elevation + normal.sample(&mut self.rng);
        AnglePair {
            azimuth: azimuth.clamp(-90.0, 90.0),
            elevation: elevation.clamp(-90.0, 90.0),
        }
    }
}

/// An anchor/tag pair that produced no sighting because the tag was out of view.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dropout {
    pub anchor_id: String,
    pub tag_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementLog {
    pub records: Vec<MeasurementRecord>,
    /// Unique out-of-view anchor/tag pairs.
    pub dropouts: Vec<Dropout>,
}

/// Log timestamps carry millisecond resolution, so offsets are rounded to it.
fn seconds(s: f64) -> Duration {
    Duration::milliseconds((s * 1e3).round() as i64)
}

/// Synthesizes the measurement log for a scenario.
///
/// Static tags are observed at `start + k·interval` for `k < samples_per_tag`;
/// trajectory points at `start + t`. Within an epoch records run over
/// anchors then tags in scenario order.
pub fn generate_measurements(scenario: &Scenario) -> Result<MeasurementLog, SimulationError> {
    scenario.validate()?;
    let mut sampler = NoiseSampler::new(scenario.noise.clone(), scenario.seed);
    let mut records = Vec::new();
    let mut dropouts = BTreeSet::new();

    let mut epochs: Vec<(Timestamp, Vec<(&str, Point3)>)> = Vec::new();
    if !scenario.tags.is_empty() {
        let tags: Vec<(&str, Point3)> = scenario
            .tags
            .iter()
            .map(|t| (t.id.as_str(), Point3::from(t.position)))
            .collect();
        for k in 0..scenario.samples_per_tag {
            let at = scenario.start_time + seconds(k as f64 * scenario.sample_interval_s);
            epochs.push((at, tags.clone()));
        }
    }
    if let Some(traj) = &scenario.trajectory {
        for p in &traj.points {
            let at = scenario.start_time + seconds(p.t);
            epochs.push((at, vec![(traj.tag_id.as_str(), Point3::from(p.position))]));
        }
    }
    epochs.sort_by_key(|(at, _)| *at);

    for (at, tags) in &epochs {
        for anchor in &scenario.anchors {
            for (tag_id, tag) in tags {
                match true_angles(&anchor.position(), &anchor.orientation, tag) {
                    Ok(truth) => records.push(MeasurementRecord {
                        timestamp: *at,
                        anchor_id: anchor.id.clone(),
                        tag_id: tag_id.to_string(),
                        angles: sampler.perturb(&truth, &anchor.id),
                        rssi_dbm: None,
                    }),
                    Err(SimulationError::NotVisible) => {
                        dropouts.insert(Dropout {
                            anchor_id: anchor.id.clone(),
                            tag_id: tag_id.to_string(),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(MeasurementLog {
        records,
        dropouts: dropouts.into_iter().collect(),
    })
}
