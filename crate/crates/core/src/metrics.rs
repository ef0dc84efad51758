//! Accuracy evaluation: static bias/precision per tag, kinematic
//! across-path error against a surveyed polyline, and the mean
//! anchor-distance raster used to reason about expected accuracy.

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::Point3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("path needs at least 2 vertices, got {0}")]
    PathTooShort(usize),
    #[error("path has no horizontal extent")]
    DegeneratePath,
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("at least one anchor is required")]
    NoAnchors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagStaticError {
    pub tag_id: String,
    pub n_fixes: usize,
    /// Mean of (fix − truth) per axis, m.
    pub bias: [f64; 3],
    /// Sample std of fixes about their own mean per axis, m.
    pub std: [f64; 3],
    /// Horizontal magnitude of the mean offset, m.
    pub mean_horizontal_error: f64,
    /// Signed mean vertical offset, m.
    pub mean_vertical_error: f64,
    /// `sqrt(std_x² + std_y²)`.
    pub horizontal_std_rss: f64,
    /// Sample std of the per-fix horizontal error magnitude.
    pub horizontal_std_magnitude: f64,
    pub vertical_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagErrorRecord {
    pub tag_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct StaticErrorReport {
    pub tags: Vec<TagStaticError>,
    pub errors: Vec<TagErrorRecord>,
    /// Mean over tags of |bias| per axis.
    pub mean_abs_bias: [f64; 3],
    /// Mean over tags of the per-axis std.
    pub mean_std: [f64; 3],
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Decomposes static fixes into systematic offset and scatter, per tag.
pub fn static_report(
    fixes: &BTreeMap<String, Vec<Point3>>,
    truth: &BTreeMap<String, Point3>,
) -> StaticErrorReport {
    let mut report = StaticErrorReport::default();
    for (tag_id, points) in fixes {
        let Some(true_pos) = truth.get(tag_id) else {
            report.errors.push(TagErrorRecord {
                tag_id: tag_id.clone(),
                reason: "no truth position".into(),
            });
            continue;
        };
        if points.len() < 2 {
            report.errors.push(TagErrorRecord {
                tag_id: tag_id.clone(),
                reason: format!("{} fix(es); at least 2 needed", points.len()),
            });
            continue;
        }
        let offsets: Vec<Vector3<f64>> = points.iter().map(|p| p - true_pos).collect();
        let n = offsets.len() as f64;
        let bias = offsets.iter().sum::<Vector3<f64>>() / n;
        let axis = |k: usize| offsets.iter().map(|o| o[k]).collect::<Vec<_>>();
        let std = [sample_std(&axis(0)), sample_std(&axis(1)), sample_std(&axis(2))];
        let horizontal: Vec<f64> = offsets.iter().map(|o| o.x.hypot(o.y)).collect();
        report.tags.push(TagStaticError {
            tag_id: tag_id.clone(),
            n_fixes: points.len(),
            bias: [bias.x, bias.y, bias.z],
            std,
            mean_horizontal_error: bias.x.hypot(bias.y),
            mean_vertical_error: bias.z,
            horizontal_std_rss: std[0].hypot(std[1]),
            horizontal_std_magnitude: sample_std(&horizontal),
            vertical_std: std[2],
        });
    }
    if !report.tags.is_empty() {
        let n = report.tags.len() as f64;
        for k in 0..3 {
            report.mean_abs_bias[k] = report.tags.iter().map(|t| t.bias[k].abs()).sum::<f64>() / n;
            report.mean_std[k] = report.tags.iter().map(|t| t.std[k]).sum::<f64>() / n;
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcrossPathError {
    /// Horizontal distance to the nearest point of the path, m.
    pub horizontal: f64,
    /// Fix height minus the path height at that nearest point, m.
    pub vertical: f64,
}

/// Error of a kinematic fix against a ground-truth polyline.
///
/// The nearest point is found in the horizontal plane; its height is
/// interpolated linearly along the winning segment.
pub fn across_path_error(fix: &Point3, path: &[Point3]) -> Result<AcrossPathError, MetricsError> {
    if path.len() < 2 {
        return Err(MetricsError::PathTooShort(path.len()));
    }
    let f = Vector2::new(fix.x, fix.y);
    let mut best: Option<(f64, f64)> = None;
    let mut has_extent = false;
    for seg in path.windows(2) {
        let (p0, p1) = (&seg[0], &seg[1]);
        let a = Vector2::new(p0.x, p0.y);
        let d = Vector2::new(p1.x - p0.x, p1.y - p0.y);
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 {
            has_extent = true;
            ((f - a).dot(&d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = (a + d * t - f).norm();
        let z = p0.z + (p1.z - p0.z) * t;
        if best.map_or(true, |(bd, _)| dist < bd) {
            best = Some((dist, z));
        }
    }
    if !has_extent {
        return Err(MetricsError::DegeneratePath);
    }
    let (horizontal, z) = best.expect("at least one segment");
    Ok(AcrossPathError {
        horizontal,
        vertical: fix.z - z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicErrorReport {
    pub per_fix: Vec<AcrossPathError>,
    pub mean_horizontal: f64,
    pub max_horizontal: f64,
    pub mean_abs_vertical: f64,
    pub max_abs_vertical: f64,
}

pub fn kinematic_report(fixes: &[Point3], path: &[Point3]) -> Result<KinematicErrorReport, MetricsError> {
    let per_fix = fixes
        .iter()
        .map(|f| across_path_error(f, path))
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_fix.len().max(1) as f64;
    Ok(KinematicErrorReport {
        mean_horizontal: per_fix.iter().map(|e| e.horizontal).sum::<f64>() / n,
        max_horizontal: per_fix.iter().map(|e| e.horizontal).fold(0.0, f64::max),
        mean_abs_vertical: per_fix.iter().map(|e| e.vertical.abs()).sum::<f64>() / n,
        max_abs_vertical: per_fix.iter().map(|e| e.vertical.abs()).fold(0.0, f64::max),
        per_fix,
    })
}

/// Axis-aligned horizontal rectangle, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, MetricsError> {
        let b = Self { x_min, x_max, y_min, y_max };
        if [x_min, x_max, y_min, y_max].iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::InvalidBounds("non-finite".into()));
        }
        if !(x_max > x_min && y_max > y_min) {
            return Err(MetricsError::InvalidBounds(format!(
                "need x_min < x_max and y_min < y_max, got {x_min},{x_max},{y_min},{y_max}"
            )));
        }
        Ok(b)
    }
}

/// Mean distance from each cell center to all anchors, row-major with
/// rows running from `y_min` upward.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceGrid {
    pub bounds: Bounds,
    pub cell_size: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl DistanceGrid {
    pub fn center(&self, ix: usize, iy: usize) -> Point3 {
        Point3::new(
            self.bounds.x_min + (ix as f64 + 0.5) * self.cell_size,
            self.bounds.y_min + (iy as f64 + 0.5) * self.cell_size,
            self.height,
        )
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Cell with the smallest mean distance.
    pub fn argmin(&self) -> (usize, usize) {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is non-empty");
        (i % self.nx, i / self.nx)
    }
}

/// Default evaluation height: mean anchor height less a typical carry height.
pub fn default_grid_height(anchors: &[Point3]) -> f64 {
    anchors.iter().map(|a| a.z).sum::<f64>() / anchors.len() as f64 - 1.2
}

/// Mean anchor distance of a single point.
pub fn mean_anchor_distance(point: &Point3, anchors: &[Point3]) -> f64 {
    anchors.iter().map(|a| (a - point).norm()).sum::<f64>() / anchors.len() as f64
}

pub fn distance_grid(
    anchors: &[Point3],
    bounds: Bounds,
    cell_size: f64,
    height: Option<f64>,
) -> Result<DistanceGrid, MetricsError> {
    if anchors.is_empty() {
        return Err(MetricsError::NoAnchors);
    }
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(MetricsError::InvalidCellSize(cell_size));
    }
    let height = height.unwrap_or_else(|| default_grid_height(anchors));
    let cells = |span: f64| ((span / cell_size) - 1e-9).ceil().max(1.0) as usize;
    let nx = cells(bounds.x_max - bounds.x_min);
    let ny = cells(bounds.y_max - bounds.y_min);
    let mut grid = DistanceGrid {
        bounds,
        cell_size,
        height,
        nx,
        ny,
        values: Vec::with_capacity(nx * ny),
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let c = grid.center(ix, iy);
            grid.values.push(mean_anchor_distance(&c, anchors));
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single(tag: &str, points: Vec<Point3>) -> BTreeMap<String, Vec<Point3>> {
        BTreeMap::from([(tag.to_string(), points)])
    }

    #[test]
    fn perfect_fixes_give_zero_report() {
        let truth = BTreeMap::from([("T".to_string(), Point3::new(1.0, 2.0, 1.0))]);
        let r = static_report(&single("T", vec![Point3::new(1.0, 2.0, 1.0); 5]), &truth);
        let t = &r.tags[0];
        assert_eq!(t.bias, [0.0; 3]);
        assert_eq!(t.std, [0.0; 3]);
        assert_eq!(t.mean_horizontal_error, 0.0);
        assert_eq!(t.mean_vertical_error, 0.0);
    }

    #[test]
    fn pure_bias_is_all_offset() {
        let truth = BTreeMap::from([("T".to_string(), Point3::new(1.0, 2.0, 1.0))]);
        let r = static_report(&single("T", vec![Point3::new(1.3, 2.4, 1.0); 4]), &truth);
        let t = &r.tags[0];
        assert_abs_diff_eq!(t.mean_horizontal_error, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.horizontal_std_rss, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.std[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vertical_error_keeps_its_sign() {
        let truth = BTreeMap::from([("T".to_string(), Point3::new(0.0, 0.0, 1.0))]);
        let fixes = vec![Point3::new(0.0, 0.0, 0.1), Point3::new(0.0, 0.0, 0.16)];
        let r = static_report(&single("T", fixes), &truth);
        assert_abs_diff_eq!(r.tags[0].mean_vertical_error, -0.87, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean_abs_bias[2], 0.87, epsilon = 1e-12);
    }

    #[test]
    fn missing_truth_and_short_series_are_reported() {
        let mut fixes = single("T", vec![Point3::origin(); 3]);
        fixes.insert("U".into(), vec![Point3::origin()]);
        let truth = BTreeMap::from([("U".to_string(), Point3::origin())]);
        let r = static_report(&fixes, &truth);
        assert!(r.tags.is_empty());
        assert_eq!(r.errors.len(), 2);
        assert_eq!(r.errors[0].reason, "no truth position");
    }

    #[test]
    fn across_path_basics() {
        let path = [Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0)];
        let e = across_path_error(&Point3::new(5.0, 2.0, 1.0), &path).unwrap();
        assert_eq!((e.horizontal, e.vertical), (2.0, 1.0));
        let e = across_path_error(&Point3::new(3.0, 0.0, 0.0), &path).unwrap();
        assert_eq!((e.horizontal, e.vertical), (0.0, 0.0));
        // Beyond the end: distance to the endpoint.
        let e = across_path_error(&Point3::new(13.0, 4.0, 0.0), &path).unwrap();
        assert_abs_diff_eq!(e.horizontal, 5.0);
        // Height interpolated along a sloped segment.
        let sloped = [Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 0.0, 2.0)];
        let e = across_path_error(&Point3::new(5.0, 1.0, 1.5), &sloped).unwrap();
        assert_abs_diff_eq!(e.vertical, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_paths() {
        assert_eq!(across_path_error(&Point3::origin(), &[]), Err(MetricsError::PathTooShort(0)));
        assert_eq!(
            across_path_error(&Point3::origin(), &[Point3::new(1.0, 1.0, 0.0), Point3::new(1.0, 1.0, 2.0)]),
            Err(MetricsError::DegeneratePath)
        );
    }

    #[test]
    fn kinematic_aggregates() {
        let path = [Point3::new(0.0, 0.0, 1.0), Point3::new(10.0, 0.0, 1.0)];
        let fixes = [Point3::new(1.0, 1.0, 1.5), Point3::new(2.0, -3.0, 0.0)];
        let r = kinematic_report(&fixes, &path).unwrap();
        assert_eq!(r.mean_horizontal, 2.0);
        assert_eq!(r.max_horizontal, 3.0);
        assert_eq!(r.mean_abs_vertical, 0.75);
        assert_eq!(r.max_abs_vertical, 1.0);
    }

    #[test]
    fn grid_values() {
        let anchors = [Point3::new(5.0, 5.0, 2.0)];
        let g = distance_grid(&anchors, Bounds::new(0.0, 10.0, 0.0, 10.0).unwrap(), 1.0, Some(2.0)).unwrap();
        assert_eq!((g.nx, g.ny), (10, 10));
        // Radial symmetry about the anchor.
        assert_abs_diff_eq!(g.value(2, 3), g.value(7, 6), epsilon = 1e-12);
        assert_abs_diff_eq!(g.value(2, 3), g.value(3, 2), epsilon = 1e-12);
        // A cell centered on the anchor.
        let g = distance_grid(&anchors, Bounds::new(4.5, 5.5, 4.5, 5.5).unwrap(), 1.0, Some(2.0)).unwrap();
        assert_eq!(g.values, vec![0.0]);

        let err = distance_grid(&anchors, Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0, None).unwrap_err();
        assert_eq!(err, MetricsError::InvalidCellSize(0.0));
        assert_eq!(distance_grid(&[], Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap(), 1.0, None), Err(MetricsError::NoAnchors));
        assert!(Bounds::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn default_height_is_below_anchors() {
        let anchors = [Point3::new(0.0, 0.0, 2.4), Point3::new(1.0, 0.0, 2.6)];
        assert_abs_diff_eq!(default_grid_height(&anchors), 1.3, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn densifying_the_path_changes_nothing(
            fx in -5.0f64..15.0, fy in -5.0f64..5.0, fz in 0.0f64..3.0,
            cut in 0.05f64..0.95,
        ) {
            let path = vec![Point3::new(0.0, 0.0, 1.0), Point3::new(10.0, 2.0, 1.4), Point3::new(12.0, -3.0, 0.8)];
            let mid = path[0] + (path[1] - path[0]) * cut;
            let dense = vec![path[0], mid, path[1], path[2]];
            let fix = Point3::new(fx, fy, fz);
            let a = across_path_error(&fix, &path).unwrap();
            let b = across_path_error(&fix, &dense).unwrap();
            prop_assert!((a.horizontal - b.horizontal).abs() < 1e-12);
            prop_assert!((a.vertical - b.vertical).abs() < 1e-12);
        }

        #[test]
        fn grid_is_one_lipschitz(ax in 0.0f64..10.0, ay in 0.0f64..6.0, bx in 0.0f64..10.0, by in 0.0f64..6.0) {
            let anchors = [Point3::new(ax, ay, 2.5), Point3::new(bx, by, 2.4), Point3::new(5.0, 3.0, 2.6)];
            let g = distance_grid(&anchors, Bounds::new(0.0, 10.0, 0.0, 6.0).unwrap(), 0.5, None).unwrap();
            for (i, j) in [(0usize, 7usize), (13, 40), (100, 239)] {
                let (ci, cj) = (g.center(i % g.nx, i / g.nx), g.center(j % g.nx, j / g.nx));
                prop_assert!((g.values[i] - g.values[j]).abs() <= (ci - cj).norm() + 1e-12);
            }
        }
    }
}
