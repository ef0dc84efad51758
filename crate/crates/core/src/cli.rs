//! Command-line surface: `simulate`, `calibrate`, `position`, `evaluate`, `heatmap`.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::Duration;
use clap::{Parser, Subcommand, ValueEnum};

use crate::calibration::{calibrate, CalibrationError, CalibrationObservation, CalibrationSettings};
use crate::geometry::Point3;
use crate::io::{self, AnchorConfigFile, CalibrationRow, FixRow, IoError, TruthFile};
use crate::metrics::{self, Bounds, MetricsError};
use crate::model::{AnchorConfig, OrientationSource};
use crate::positioning::{self, assemble_epochs, PositioningError, DEFAULT_EPOCH_WINDOW_MS};
use crate::simulation::{generate_measurements, SimulationError};

#[derive(Debug, Parser)]
#[command(name = "aoa", version, about = "Bluetooth AoA anchor calibration and tag positioning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Static,
    Kinematic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a measurement log, surveyed anchors and truth from a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_measurements: PathBuf,
        #[arg(long)]
        out_anchors: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
    },
    /// Estimate anchor orientations from tags at surveyed positions.
    Calibrate {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        tags_truth: PathBuf,
        /// Anchor to calibrate; all anchors when omitted.
        #[arg(long)]
        anchor_id: Option<String>,
        #[arg(long, default_value_t = 3.0)]
        std_threshold: f64,
        #[arg(long, default_value_t = 1e-6)]
        convergence_threshold: f64,
        #[arg(long, default_value_t = 50)]
        max_iterations: usize,
        #[arg(long, default_value_t = 3)]
        min_tags: usize,
        /// Updated anchor configuration (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-anchor calibration table (CSV); printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate tag positions from a measurement log.
    Position {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPOCH_WINDOW_MS)]
        window_ms: i64,
        #[arg(long, value_enum, default_value_t = Mode::Static)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare fixes with ground truth.
    Evaluate {
        #[arg(long)]
        fixes: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Static)]
        mode: Mode,
        /// CSV, or JSON when the extension is `.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean anchor-distance raster.
    Heatmap {
        #[arg(long)]
        anchors: PathBuf,
        /// `x_min,x_max,y_min,y_max` in meters.
        #[arg(long, allow_hyphen_values = true)]
        bounds: String,
        #[arg(long)]
        cell: f64,
        /// Evaluation height; defaults to mean anchor height minus 1.2 m.
        #[arg(long, allow_hyphen_values = true)]
        height: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Numerical(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        Self::Input(e.to_string())
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        Self::Input(e.to_string())
    }
}

fn calibration_failure(anchor: &str, e: CalibrationError) -> CliError {
    let msg = format!("anchor {anchor}: {e}");
    match e {
        CalibrationError::InvalidSettings(_) | CalibrationError::Geometry(_) => CliError::Input(msg),
        _ => CliError::Numerical(msg),
    }
}

impl From<PositioningError> for CliError {
    fn from(e: PositioningError) -> Self {
        if e.is_input_error() {
            Self::Input(e.to_string())
        } else {
            Self::Numerical(e.to_string())
        }
    }
}

/// Parses arguments and runs one command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            scenario,
            seed,
            out_measurements,
            out_anchors,
            out_truth,
        } => simulate(&scenario, seed, &out_measurements, &out_anchors, &out_truth),
        Command::Calibrate {
            measurements,
            anchors,
            tags_truth,
            anchor_id,
            std_threshold,
            convergence_threshold,
            max_iterations,
            min_tags,
            out,
            report,
        } => {
            let settings = CalibrationSettings {
                sample_std_threshold: std_threshold,
                convergence_threshold,
                max_iterations,
                min_tags,
            };
            calibrate_cmd(
                &measurements,
                &anchors,
                &tags_truth,
                anchor_id.as_deref(),
                &settings,
                &out,
                report.as_deref(),
            )
        }
        Command::Position {
            measurements,
            anchors,
            window_ms,
            mode,
            out,
        } => position_cmd(&measurements, &anchors, window_ms, mode, &out),
        Command::Evaluate {
            fixes,
            truth,
            mode,
            out,
        } => evaluate_cmd(&fixes, &truth, mode, &out),
        Command::Heatmap {
            anchors,
            bounds,
            cell,
            height,
            out,
        } => heatmap_cmd(&anchors, &bounds, cell, height, &out),
    }
}

fn simulate(
    scenario_path: &Path,
    seed: Option<u64>,
    out_measurements: &Path,
    out_anchors: &Path,
    out_truth: &Path,
) -> Result<(), CliError> {
    let mut scenario = io::read_scenario(scenario_path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let log = generate_measurements(&scenario)?;
    for d in &log.dropouts {
        eprintln!(
            "warning: tag {} not visible to anchor {}; sightings omitted",
            d.tag_id, d.anchor_id
        );
    }
    let surveyed: Vec<AnchorConfig> = scenario.anchors.iter().map(|a| a.surveyed()).collect();
    let truth = TruthFile {
        tags: scenario.tags.iter().map(|t| (t.id.clone(), t.position)).collect(),
        path: scenario
            .trajectory
            .as_ref()
            .map(|t| t.points.iter().map(|p| p.position).collect())
            .unwrap_or_default(),
        path_tag: scenario.trajectory.as_ref().map(|t| t.tag_id.clone()),
        anchor_orientations: scenario
            .anchors
            .iter()
            .map(|a| (a.id.clone(), a.orientation))
            .collect(),
    };
    io::write_atomic(out_measurements, |w| io::write_measurements(w, &log.records))?;
    io::write_anchors(out_anchors, &AnchorConfigFile::from_configs(&surveyed))?;
    io::write_truth(out_truth, &truth)?;
    println!(
        "wrote {} sightings from {} anchors ({} out-of-view pairs)",
        log.records.len(),
        scenario.anchors.len(),
        log.dropouts.len()
    );
    Ok(())
}

fn report_rejected_rows(parsed: &io::ParsedMeasurements) {
    for r in &parsed.rejected {
        eprintln!("warning: rejected row: {}", r.message);
    }
}

fn calibrate_cmd(
    measurements: &Path,
    anchors_path: &Path,
    truth_path: &Path,
    anchor_id: Option<&str>,
    settings: &CalibrationSettings,
    out: &Path,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let parsed = io::parse_measurements(measurements)?;
    report_rejected_rows(&parsed);
    let mut anchors = io::read_anchors(anchors_path)?.to_configs();
    let truth = io::read_truth(truth_path)?.tag_positions();

    let selected: Vec<usize> = match anchor_id {
        Some(id) => vec![anchors
            .iter()
            .position(|a| a.id == id)
            .ok_or_else(|| CliError::Input(format!("anchor {id} not found in {}", anchors_path.display())))?],
        None => (0..anchors.len()).collect(),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for idx in selected {
        let anchor = &anchors[idx];
        let mut sessions: BTreeMap<&str, Vec<_>> = BTreeMap::new();
        for r in parsed.records.iter().filter(|r| r.anchor_id == anchor.id) {
            if truth.contains_key(&r.tag_id) {
                sessions.entry(&r.tag_id).or_default().push(r.angles);
            }
        }
        let observations: Vec<CalibrationObservation> = sessions
            .into_iter()
            .map(|(tag, measurements)| CalibrationObservation {
                tag_id: tag.to_string(),
                tag_position: truth[tag],
                anchor_position: anchor.position,
                measurements,
            })
            .collect();
        match calibrate(&observations, settings) {
            Ok(solution) => {
                let std = solution.std_devs();
                rows.push(CalibrationRow {
                    id: anchor.id.clone(),
                    angles: solution.angles,
                    std,
                    used_tags: solution.used_tags.clone(),
                    rejected_tags: solution
                        .rejected_tags
                        .iter()
                        .map(|r| format!("{}: {}", r.tag_id, r.reason))
                        .collect(),
                });
                let a = &mut anchors[idx];
                a.orientation = Some(solution.angles);
                a.orientation_std = Some(std);
                a.source = OrientationSource::Calibrated;
            }
            Err(e) => failures.push(calibration_failure(&anchor.id, e)),
        }
    }
    if !failures.is_empty() {
        let code_input = failures.iter().any(|f| matches!(f, CliError::Input(_)));
        let msg = failures.iter().map(|f| f.message()).collect::<Vec<_>>().join("\n");
        return Err(if code_input { CliError::Input(msg) } else { CliError::Numerical(msg) });
    }

    io::write_anchors(out, &AnchorConfigFile::from_configs(&anchors))?;
    match report {
        Some(path) => io::write_atomic(path, |w| io::write_calibration_report(w, &rows))?,
        None => {
            let stdout = std::io::stdout();
            io::write_calibration_report(&mut stdout.lock(), &rows)
                .map_err(|e| CliError::Input(e.to_string()))?;
        }
    }
    Ok(())
}

fn position_cmd(
    measurements: &Path,
    anchors_path: &Path,
    window_ms: i64,
    mode: Mode,
    out: &Path,
) -> Result<(), CliError> {
    if window_ms <= 0 {
        return Err(CliError::Input("--window-ms must be positive".into()));
    }
    let parsed = io::parse_measurements(measurements)?;
    report_rejected_rows(&parsed);
    let anchors: BTreeMap<String, AnchorConfig> = io::read_anchors(anchors_path)?
        .to_configs()
        .into_iter()
        .map(|a| (a.id.clone(), a))
        .collect();
    let epochs = assemble_epochs(&parsed.records, &anchors, Duration::milliseconds(window_ms))?;

    let mut rows = Vec::new();
    let mut gaps = 0usize;
    for e in &epochs {
        match positioning::solve_position(&e.input) {
            Ok(fix) => rows.push(FixRow::from_fix(&e.tag_id, &fix)),
            Err(reason) => {
                gaps += 1;
                eprintln!("gap: {} {}: {reason}", io::format_timestamp(&e.input.epoch), e.tag_id);
            }
        }
    }
    io::write_atomic(out, |w| io::write_fixes(w, &rows))?;
    println!("epochs: {}, fixes: {}, gaps: {}", epochs.len(), rows.len(), gaps);
    if mode == Mode::Static {
        let mut per_tag: BTreeMap<&str, Vec<Point3>> = BTreeMap::new();
        for r in &rows {
            per_tag.entry(&r.tag_id).or_default().push(r.position);
        }
        for (tag, points) in per_tag {
            let mean = points.iter().map(|p| p.coords).sum::<nalgebra::Vector3<f64>>() / points.len() as f64;
            println!("tag {tag}: {} fixes, mean ({:.3}, {:.3}, {:.3})", points.len(), mean.x, mean.y, mean.z);
        }
    }
    Ok(())
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn write_json_report<T: serde::Serialize>(out: &Path, value: &T) -> Result<(), CliError> {
    io::write_atomic(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })?;
    Ok(())
}

fn evaluate_cmd(fixes_path: &Path, truth_path: &Path, mode: Mode, out: &Path) -> Result<(), CliError> {
    let fixes = io::read_fixes(fixes_path)?;
    let truth = io::read_truth(truth_path)?;
    match mode {
        Mode::Static => {
            let mut grouped: BTreeMap<String, Vec<Point3>> = BTreeMap::new();
            for f in fixes.iter().filter(|f| truth.path_tag.as_ref() != Some(&f.tag_id)) {
                grouped.entry(f.tag_id.clone()).or_default().push(f.position);
            }
            let report = metrics::static_report(&grouped, &truth.tag_positions());
            for e in &report.errors {
                eprintln!("warning: tag {}: {}", e.tag_id, e.reason);
            }
            if is_json(out) {
                write_json_report(out, &report)?;
            } else {
                io::write_atomic(out, |w| io::write_static_report(w, &report))?;
            }
            println!(
                "tags: {}, mean |bias| x/y/z: {:.3}/{:.3}/{:.3} m, mean std x/y/z: {:.3}/{:.3}/{:.3} m",
                report.tags.len(),
                report.mean_abs_bias[0],
                report.mean_abs_bias[1],
                report.mean_abs_bias[2],
                report.mean_std[0],
                report.mean_std[1],
                report.mean_std[2]
            );
        }
        Mode::Kinematic => {
            if truth.path.is_empty() {
                return Err(CliError::Input(format!("{}: no path for kinematic evaluation", truth_path.display())));
            }
            let fixes: Vec<&FixRow> = fixes
                .iter()
                .filter(|f| truth.path_tag.as_ref().map_or(true, |t| *t == f.tag_id))
                .collect();
            let points: Vec<Point3> = fixes.iter().map(|f| f.position).collect();
            let report = metrics::kinematic_report(&points, &truth.path_points())?;
            if is_json(out) {
                write_json_report(out, &report)?;
            } else {
                let rows: Vec<_> = fixes
                    .iter()
                    .zip(&report.per_fix)
                    .map(|(f, e)| (f.timestamp, f.tag_id.clone(), *e))
                    .collect();
                io::write_atomic(out, |w| io::write_kinematic_report(w, &rows))?;
            }
            println!(
                "fixes: {}, across-path horizontal mean {:.3} m max {:.3} m, vertical mean |e| {:.3} m max {:.3} m",
                report.per_fix.len(),
                report.mean_horizontal,
                report.max_horizontal,
                report.mean_abs_vertical,
                report.max_abs_vertical
            );
        }
    }
    Ok(())
}

fn parse_bounds(raw: &str) -> Result<Bounds, CliError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Input(format!("--bounds: cannot parse `{raw}`")))?;
    let [x_min, x_max, y_min, y_max] = parts[..] else {
        return Err(CliError::Input("--bounds expects x_min,x_max,y_min,y_max".into()));
    };
    Ok(Bounds::new(x_min, x_max, y_min, y_max)?)
}

fn heatmap_cmd(anchors_path: &Path, bounds: &str, cell: f64, height: Option<f64>, out: &Path) -> Result<(), CliError> {
    let bounds = parse_bounds(bounds)?;
    let positions: Vec<Point3> = io::read_anchors(anchors_path)?
        .to_configs()
        .iter()
        .map(|a| a.position)
        .collect();
    let grid = metrics::distance_grid(&positions, bounds, cell, height)?;
    io::write_atomic(out, |w| io::write_grid(w, &grid))?;
    let (ix, iy) = grid.argmin();
    let c = grid.center(ix, iy);
    println!(
        "{}x{} cells at height {:.2} m; minimum mean distance {:.3} m at ({:.2}, {:.2})",
        grid.nx,
        grid.ny,
        grid.height,
        grid.value(ix, iy),
        c.x,
        c.y
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_parsing() {
        let b = parse_bounds("-1,10,0,5.5").unwrap();
        assert_eq!((b.x_min, b.y_max), (-1.0, 5.5));
        assert!(matches!(parse_bounds("0,1,2"), Err(CliError::Input(_))));
        assert!(matches!(parse_bounds("0,a,2,3"), Err(CliError::Input(_))));
    }

    #[test]
    fn usage_errors_exit_with_input_code() {
        assert_eq!(main_with_args(["aoa", "position"]), 2);
        assert_eq!(main_with_args(["aoa", "--help"]), 0);
    }
}
