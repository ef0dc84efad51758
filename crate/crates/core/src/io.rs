//! File formats: measurement logs, anchor configuration, truth, fixes and reports.
//!
//! CSV for logs and reports, JSON for nested configuration. Angles are in
//! degrees and coordinates in meters everywhere. Writers go through a
//! temporary file in the destination directory and rename into place.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AnglePair, EulerAngles, GeometryError, Point3};
use crate::metrics::{AcrossPathError, DistanceGrid, StaticErrorReport};
use crate::model::{AnchorConfig, MeasurementRecord, OrientationSource, Timestamp};
use crate::positioning::PositionFix;

pub const MEASUREMENT_HEADER: [&str; 6] = [
    "timestamp",
    "anchor_id",
    "tag_id",
    "azimuth_deg",
    "elevation_deg",
    "rssi_dbm",
];

pub const FIX_HEADER: [&str; 13] = [
    "timestamp", "tag_id", "x", "y", "z", "mse", "sxx", "syy", "szz", "sxy", "sxz", "syz",
    "n_anchors",
];

pub const CALIBRATION_HEADER: [&str; 10] = [
    "id", "R_x", "R_y", "R_z", "R_x_std", "R_y_std", "R_z_std", "n_tags", "used_tags",
    "rejected_tags",
];

pub const STATIC_HEADER: [&str; 13] = [
    "tag_id",
    "n_fixes",
    "bias_x",
    "bias_y",
    "bias_z",
    "std_x",
    "std_y",
    "std_z",
    "mean_horizontal_error",
    "mean_vertical_error",
    "horizontal_std_rss",
    "horizontal_std_magnitude",
    "vertical_std",
];

pub const KINEMATIC_HEADER: [&str; 4] = ["timestamp", "tag_id", "across_path_horizontal", "vertical"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: at `{json_path}`: {message}")]
    Json {
        path: PathBuf,
        json_path: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(file_err(path))
}

/// Writes `path` via a sibling temporary file and an atomic rename.
pub fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(file_err(path))?;
    body(tmp.as_file_mut()).map_err(file_err(path))?;
    tmp.as_file_mut().flush().map_err(file_err(path))?;
    tmp.persist(path).map_err(|e| IoError::File {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn format_timestamp(t: &Timestamp) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn parse_timestamp(s: &str) -> Result<Timestamp, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("timestamp `{s}`: {e}"))
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<(), IoError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(IoError::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn parse_f64(field: &'static str, raw: &str) -> Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("{field}: cannot parse `{raw}` as a number"))?;
    if !v.is_finite() {
        return Err(format!("{field}: `{raw}` is not finite"));
    }
    Ok(v)
}

fn non_empty(field: &'static str, raw: &str) -> Result<String, String> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(format!("{field}: empty"));
    }
    Ok(s.to_string())
}

/// A row skipped because an angle was outside the reportable range.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRow {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedMeasurements {
    pub records: Vec<MeasurementRecord>,
    pub rejected: Vec<RejectedRow>,
}

pub fn parse_measurements(path: &Path) -> Result<ParsedMeasurements, IoError> {
    read_measurements(open(path)?, path)
}

/// Parses a measurement log. Malformed rows fail the whole read; rows with
/// angles outside `[-90, 90]` are collected in `rejected`.
pub fn read_measurements(reader: impl Read, path: &Path) -> Result<ParsedMeasurements, IoError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| row_err(path, 1, e.to_string()))?.clone();
    check_header(path, &header, &MEASUREMENT_HEADER)?;
    let mut parsed = ParsedMeasurements::default();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            row_err(path, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != MEASUREMENT_HEADER.len() {
            return Err(row_err(
                path,
                line,
                format!("expected {} fields, found {}", MEASUREMENT_HEADER.len(), row.len()),
            ));
        }
        let fields = (|| {
            let timestamp = parse_timestamp(row[0].trim())?;
            let anchor_id = non_empty("anchor_id", &row[1])?;
            let tag_id = non_empty("tag_id", &row[2])?;
            let azimuth = parse_f64("azimuth_deg", &row[3])?;
            let elevation = parse_f64("elevation_deg", &row[4])?;
            let rssi_dbm = match row[5].trim() {
                "" => None,
                raw => Some(parse_f64("rssi_dbm", raw)?),
            };
            Ok::<_, String>((timestamp, anchor_id, tag_id, azimuth, elevation, rssi_dbm))
        })();
        let (timestamp, anchor_id, tag_id, azimuth, elevation, rssi_dbm) =
            fields.map_err(|m| row_err(path, line, m))?;
        match AnglePair::new(azimuth, elevation) {
            Ok(angles) => parsed.records.push(MeasurementRecord {
                timestamp,
                anchor_id,
                tag_id,
                angles,
                rssi_dbm,
            }),
            Err(e @ GeometryError::AngleOutOfRange { .. }) => parsed.rejected.push(RejectedRow {
                line,
                message: format!("{e} at line {line}"),
            }),
            Err(e) => return Err(row_err(path, line, e.to_string())),
        }
    }
    Ok(parsed)
}

fn row_err(path: &Path, line: u64, message: String) -> IoError {
    IoError::Row {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_measurements(out: &mut dyn Write, records: &[MeasurementRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MEASUREMENT_HEADER).map_err(csv_io)?;
    for r in records {
        w.write_record([
            format_timestamp(&r.timestamp),
            r.anchor_id.clone(),
            r.tag_id.clone(),
            r.angles.azimuth.to_string(),
            r.angles.elevation.to_string(),
            fmt_opt(r.rssi_dbm),
        ])
        .map_err(csv_io)?;
    }
    w.flush()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(file_err(path))?;
    parse_json(&text, path)
}

/// JSON decoding that reports the path of the offending element.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        json_path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorEntry {
    pub id: String,
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<EulerAngles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_std: Option<EulerAngles>,
    #[serde(default)]
    pub source: OrientationSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfigFile {
    pub anchors: Vec<AnchorEntry>,
}

impl AnchorConfigFile {
    pub fn from_configs<'a>(configs: impl IntoIterator<Item = &'a AnchorConfig>) -> Self {
        Self {
            anchors: configs
                .into_iter()
                .map(|a| AnchorEntry {
                    id: a.id.clone(),
                    position: [a.position.x, a.position.y, a.position.z],
                    orientation: a.orientation,
                    orientation_std: a.orientation_std,
                    source: a.source,
                })
                .collect(),
        }
    }

    /// Anchors keyed by id, in file order preserved by the map's ordering on id.
    pub fn to_configs(&self) -> Vec<AnchorConfig> {
        self.anchors
            .iter()
            .map(|e| AnchorConfig {
                id: e.id.clone(),
                position: Point3::from(e.position),
                orientation: e.orientation,
                orientation_std: e.orientation_std,
                source: e.source,
            })
            .collect()
    }

    fn validate(&self, path: &Path) -> Result<(), IoError> {
        let invalid = |message: String| IoError::Invalid {
            path: path.to_path_buf(),
            message,
        };
        let mut seen = BTreeSet::new();
        for a in &self.anchors {
            if !seen.insert(a.id.as_str()) {
                return Err(invalid(format!("duplicate anchor id {}", a.id)));
            }
            if a.position.iter().any(|c| !c.is_finite()) {
                return Err(invalid(format!("anchor {} position is not finite", a.id)));
            }
        }
        Ok(())
    }
}

pub fn read_anchors(path: &Path) -> Result<AnchorConfigFile, IoError> {
    let file: AnchorConfigFile = read_json(path)?;
    file.validate(path)?;
    Ok(file)
}

pub fn write_anchors(path: &Path, file: &AnchorConfigFile) -> Result<(), IoError> {
    write_json(path, file)
}

/// Surveyed ground truth: static tag positions and/or a walking path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, [f64; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<[f64; 3]>,
    /// Tag that walked `path`; its fixes are left out of static evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_tag: Option<String>,
    /// True anchor orientations, when known (simulation output).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub anchor_orientations: BTreeMap<String, EulerAngles>,
}

impl TruthFile {
    pub fn tag_positions(&self) -> BTreeMap<String, Point3> {
        self.tags.iter().map(|(k, v)| (k.clone(), Point3::from(*v))).collect()
    }

    pub fn path_points(&self) -> Vec<Point3> {
        self.path.iter().map(|p| Point3::from(*p)).collect()
    }
}

pub fn read_truth(path: &Path) -> Result<TruthFile, IoError> {
    let file: TruthFile = read_json(path)?;
    if file.tags.is_empty() && file.path.is_empty() {
        return Err(IoError::Invalid {
            path: path.to_path_buf(),
            message: "truth file has neither tags nor path".into(),
        });
    }
    Ok(file)
}

pub fn write_truth(path: &Path, file: &TruthFile) -> Result<(), IoError> {
    write_json(path, file)
}

/// One row of the fixes file.
#[derive(Debug, Clone, PartialEq)]
pub struct FixRow {
    pub timestamp: Timestamp,
    pub tag_id: String,
    pub position: Point3,
    pub mse: f64,
    /// sxx, syy, szz, sxy, sxz, syz
    pub covariance: [f64; 6],
    pub n_anchors: usize,
}

impl FixRow {
    pub fn from_fix(tag_id: &str, fix: &PositionFix) -> Self {
        let c = &fix.covariance;
        Self {
            timestamp: fix.epoch,
            tag_id: tag_id.to_string(),
            position: fix.position,
            mse: fix.mse,
            covariance: [c[(0, 0)], c[(1, 1)], c[(2, 2)], c[(0, 1)], c[(0, 2)], c[(1, 2)]],
            n_anchors: fix.anchors_used.len(),
        }
    }
}

pub fn write_fixes(out: &mut dyn Write, rows: &[FixRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIX_HEADER).map_err(csv_io)?;
    for r in rows {
        let mut rec = vec![
            format_timestamp(&r.timestamp),
            r.tag_id.clone(),
            r.position.x.to_string(),
            r.position.y.to_string(),
            r.position.z.to_string(),
            r.mse.to_string(),
        ];
        rec.extend(r.covariance.iter().map(|v| v.to_string()));
        rec.push(r.n_anchors.to_string());
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()
}

pub fn read_fixes(path: &Path) -> Result<Vec<FixRow>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| row_err(path, 1, e.to_string()))?.clone();
    check_header(path, &header, &FIX_HEADER)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| row_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != FIX_HEADER.len() {
            return Err(row_err(path, line, format!("expected {} fields, found {}", FIX_HEADER.len(), row.len())));
        }
        let parsed = (|| {
            let mut cov = [0.0; 6];
            for (k, name) in ["sxx", "syy", "szz", "sxy", "sxz", "syz"].into_iter().enumerate() {
                cov[k] = parse_f64(name, &row[6 + k])?;
            }
            Ok::<_, String>(FixRow {
                timestamp: parse_timestamp(row[0].trim())?,
                tag_id: non_empty("tag_id", &row[1])?,
                position: Point3::new(
                    parse_f64("x", &row[2])?,
                    parse_f64("y", &row[3])?,
                    parse_f64("z", &row[4])?,
                ),
                mse: parse_f64("mse", &row[5])?,
                covariance: cov,
                n_anchors: row[12]
                    .trim()
                    .parse()
                    .map_err(|_| format!("n_anchors: cannot parse `{}`", &row[12]))?,
            })
        })();
        rows.push(parsed.map_err(|m| row_err(path, line, m))?);
    }
    Ok(rows)
}

/// Table-style calibration summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub id: String,
    pub angles: EulerAngles,
    pub std: EulerAngles,
    pub used_tags: Vec<String>,
    /// `tag: reason` strings.
    pub rejected_tags: Vec<String>,
}

pub fn write_calibration_report(out: &mut dyn Write, rows: &[CalibrationRow]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CALIBRATION_HEADER).map_err(csv_io)?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.angles.roll.to_string(),
            r.angles.pitch.to_string(),
            r.angles.yaw.to_string(),
            r.std.roll.to_string(),
            r.std.pitch.to_string(),
            r.std.yaw.to_string(),
            r.used_tags.len().to_string(),
            r.used_tags.join(";"),
            r.rejected_tags.join(";"),
        ])
        .map_err(csv_io)?;
    }
    w.flush()
}

pub fn write_static_report(out: &mut dyn Write, report: &StaticErrorReport) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATIC_HEADER).map_err(csv_io)?;
    for t in &report.tags {
        let mut rec = vec![t.tag_id.clone(), t.n_fixes.to_string()];
        rec.extend(t.bias.iter().chain(t.std.iter()).map(|v| v.to_string()));
        rec.extend(
            [
                t.mean_horizontal_error,
                t.mean_vertical_error,
                t.horizontal_std_rss,
                t.horizontal_std_magnitude,
                t.vertical_std,
            ]
            .iter()
            .map(|v| v.to_string()),
        );
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()
}

pub fn write_kinematic_report(
    out: &mut dyn Write,
    rows: &[(Timestamp, String, AcrossPathError)],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(KINEMATIC_HEADER).map_err(csv_io)?;
    for (t, tag, e) in rows {
        w.write_record([
            format_timestamp(t),
            tag.clone(),
            e.horizontal.to_string(),
            e.vertical.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()
}

/// Dense raster: header row of cell-center x values, then one row per y
/// (ascending) led by the cell-center y value.
pub fn write_grid(out: &mut dyn Write, grid: &DistanceGrid) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y\\x".to_string()];
    header.extend((0..grid.nx).map(|ix| grid.center(ix, 0).x.to_string()));
    w.write_record(&header).map_err(csv_io)?;
    for iy in 0..grid.ny {
        let mut rec = vec![grid.center(0, iy).y.to_string()];
        rec.extend((0..grid.nx).map(|ix| grid.value(ix, iy).to_string()));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()
}

pub fn read_scenario(path: &Path) -> Result<crate::simulation::Scenario, IoError> {
    let scenario: crate::simulation::Scenario = read_json(path)?;
    scenario.validate().map_err(|e| IoError::Invalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("log.csv")
    }

    #[test]
    fn reads_well_formed_log() {
        let text = "timestamp,anchor_id,tag_id,azimuth_deg,elevation_deg,rssi_dbm\n\
2024-01-01T00:00:00.000Z,A1,T1,10.5,-20,-61\n\
2024-01-01T00:00:00.100Z,A2,T1,-3,4.25,\n\
2024-01-01T00:00:01.000Z,A1,T2,0,0,-70.5\n";
        let parsed = read_measurements(text.as_bytes(), p()).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert!(parsed.rejected.is_empty());
        assert_eq!(parsed.records[1].rssi_dbm, None);
        assert_eq!(parsed.records[0].angles, AnglePair { azimuth: 10.5, elevation: -20.0 });
        assert_eq!(format_timestamp(&parsed.records[1].timestamp), "2024-01-01T00:00:00.100Z");
    }

    #[test]
    fn out_of_range_rows_are_reported_with_line() {
        let text = "timestamp,anchor_id,tag_id,azimuth_deg,elevation_deg,rssi_dbm\n\
2024-01-01T00:00:00.000Z,A1,T1,10,0,\n\
2024-01-01T00:00:00.000Z,A1,T1,120,0,\n";
        let parsed = read_measurements(text.as_bytes(), p()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.rejected, vec![RejectedRow { line: 3, message: "azimuth 120 outside [-90,90] at line 3".into() }]);
    }

    #[test]
    fn malformed_rows_fail_with_line_and_field() {
        let text = "timestamp,anchor_id,tag_id,azimuth_deg,elevation_deg,rssi_dbm\n\
2024-01-01T00:00:00.000Z,A1,T1,10,0,\n\
2024-01-01T00:00:00.000Z,A1,T1,ten,0,\n";
        let err = read_measurements(text.as_bytes(), p()).unwrap_err();
        assert_eq!(err.to_string(), "log.csv: line 3: azimuth_deg: cannot parse `ten` as a number");

        let text = "timestamp,anchor_id,tag_id,azimuth_deg,elevation_deg,rssi_dbm\nnot-a-time,A1,T1,1,0,\n";
        let err = read_measurements(text.as_bytes(), p()).unwrap_err();
        assert!(matches!(err, IoError::Row { line: 2, .. }), "{err}");

        let text = "timestamp,anchor_id,tag_id,azimuth_deg,elevation_deg,rssi_dbm\n2024-01-01T00:00:00Z,A1,T1,1\n";
        assert!(matches!(read_measurements(text.as_bytes(), p()), Err(IoError::Row { line: 2, .. })));

        let text = "time,anchor,tag,az,el,rssi\n";
        assert!(matches!(read_measurements(text.as_bytes(), p()), Err(IoError::Header { .. })));
    }

    #[test]
    fn json_errors_carry_the_element_path() {
        let text = r#"{"anchors":[{"id":"A","position":[0,0,1]},{"id":"B","position":[0,"x",1]}]}"#;
        let err = parse_json::<AnchorConfigFile>(text, Path::new("a.json")).unwrap_err();
        match err {
            IoError::Json { json_path, .. } => assert_eq!(json_path, "anchors[1].position[1]"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, |w| w.write_all(b"first")).unwrap();
        write_atomic(&path, |w| w.write_all(b"second")).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    fn record_strategy() -> impl Strategy<Value = MeasurementRecord> {
        (
            0i64..2_000_000_000_000,
            "[A-Z][0-9]{1,2}",
            "T[0-9]{1,3}",
            -90.0f64..=90.0,
            -90.0f64..=90.0,
            proptest::option::of(-100.0f64..-20.0),
        )
            .prop_map(|(ms, a, t, az, el, rssi)| MeasurementRecord {
                timestamp: DateTime::<Utc>::from_timestamp_millis(ms).unwrap(),
                anchor_id: a,
                tag_id: t,
                angles: AnglePair { azimuth: az, elevation: el },
                rssi_dbm: rssi,
            })
    }

    proptest! {
        #[test]
        fn measurement_log_round_trips(records in proptest::collection::vec(record_strategy(), 0..20)) {
            let mut buf = Vec::new();
            write_measurements(&mut buf, &records).unwrap();
            let parsed = read_measurements(buf.as_slice(), p()).unwrap();
            prop_assert!(parsed.rejected.is_empty());
            prop_assert_eq!(parsed.records, records);
        }
    }
}
