//! Records shared across the pipeline: anchor configuration and raw AoA sightings.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::geometry::{AnglePair, EulerAngles, Point3};

pub type Timestamp = DateTime<Utc>;

/// Where an anchor's orientation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OrientationSource {
    #[default]
    Surveyed,
    Calibrated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorConfig {
    pub id: String,
    pub position: Point3,
    /// `None` until the anchor has been calibrated (or its orientation surveyed).
    pub orientation: Option<EulerAngles>,
    /// Per-angle standard deviation (roll, pitch, yaw), degrees.
    pub orientation_std: Option<EulerAngles>,
    pub source: OrientationSource,
}

impl AnchorConfig {
    pub fn new(id: impl Into<String>, position: Point3) -> Self {
        Self {
            id: id.into(),
            position,
            orientation: None,
            orientation_std: None,
            source: OrientationSource::Surveyed,
        }
    }

    pub fn with_orientation(mut self, orientation: EulerAngles) -> Self {
        self.orientation = Some(orientation);
        self
    }
}

/// One azimuth/elevation sighting of a tag by an anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub timestamp: Timestamp,
    pub anchor_id: String,
    pub tag_id: String,
    pub angles: AnglePair,
    pub rssi_dbm: Option<f64>,
}
