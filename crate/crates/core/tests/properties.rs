//! Monte Carlo properties of the estimators under the simulated noise model.

use std::collections::BTreeMap;

use aoa_core::calibration::{preprocess, CalibrationObservation, CalibrationSettings};
use aoa_core::geometry::{EulerAngles, Point3};
use aoa_core::metrics::static_report;
use aoa_core::model::AnchorConfig;
use aoa_core::positioning::{solve_position, PositioningInput, Sighting};
use aoa_core::simulation::{true_angles, NoiseModel, NoiseSampler};

fn anchors() -> Vec<AnchorConfig> {
    [
        ("A1", [0.0, 0.0], -45.0),
        ("A2", [10.0, 0.0], 45.0),
        ("A3", [10.0, 6.0], 135.0),
        ("A4", [0.0, 6.0], -135.0),
    ]
    .iter()
    .map(|(id, [x, y], yaw)| {
        AnchorConfig::new(*id, Point3::new(*x, *y, 2.5)).with_orientation(EulerAngles::new(-40.0, 0.0, *yaw))
    })
    .collect()
}

fn fix(anchors: &[AnchorConfig], tag: &Point3, sampler: &mut NoiseSampler) -> Point3 {
    let sightings = anchors
        .iter()
        .map(|a| Sighting {
            anchor: a.clone(),
            angles: sampler.perturb(&true_angles(&a.position, &a.orientation.unwrap(), tag).unwrap(), &a.id),
            rssi_dbm: None,
        })
        .collect();
    let epoch = chrono::DateTime::from_timestamp(0, 0).unwrap();
    solve_position(&PositioningInput { epoch, sightings }).unwrap().position
}

#[test]
fn median_error_grows_with_angle_noise() {
    let anchors = anchors();
    let tag = Point3::new(3.5, 2.0, 1.0);
    let medians: Vec<f64> = [0.5, 1.0, 2.0, 5.0]
        .iter()
        .map(|sigma| {
            let mut sampler = NoiseSampler::new(NoiseModel::gaussian(*sigma), 5);
            let mut e: Vec<f64> = (0..400)
                .map(|_| {
                    let p = fix(&anchors, &tag, &mut sampler);
                    ((p.x - tag.x).powi(2) + (p.y - tag.y).powi(2)).sqrt()
                })
                .collect();
            e.sort_by(f64::total_cmp);
            e[e.len() / 2]
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
}

#[test]
fn quiet_sessions_pass_preprocessing() {
    let mut sampler = NoiseSampler::new(NoiseModel::gaussian(1.0), 6);
    let anchor = Point3::new(0.0, 0.0, 2.5);
    let orientation = EulerAngles::new(-40.0, 0.0, -45.0);
    let tag = Point3::new(3.0, 2.0, 1.0);
    let truth = true_angles(&anchor, &orientation, &tag).unwrap();
    let obs: Vec<_> = (0..1000)
        .map(|i| CalibrationObservation {
            tag_id: format!("T{i}"),
            tag_position: tag,
            anchor_position: anchor,
            measurements: (0..60).map(|_| sampler.perturb(&truth, "A1")).collect(),
        })
        .collect();
    let settings = CalibrationSettings { min_tags: 1, ..Default::default() };
    let p = preprocess(&obs, &settings).unwrap();
    assert!(p.accepted.len() >= 995, "{} of 1000 accepted", p.accepted.len());
}

#[test]
fn static_report_recovers_injected_offset() {
    let mut sampler = NoiseSampler::new(NoiseModel::gaussian(1.0), 8);
    let truth = Point3::new(1.0, 2.0, 1.0);
    let offset = [0.3, -0.2, 0.1];
    let sigma = 0.05;
    let n = 10_000;
    let mut draw = |bias: [f64; 3]| -> Vec<Point3> {
        (0..n)
            .map(|_| {
                truth + nalgebra::Vector3::from_fn(|k, _| bias[k] + sigma * sampler.standard_normal())
            })
            .collect()
    };
    let fixes = BTreeMap::from([("B".to_string(), draw(offset)), ("Z".to_string(), draw([0.0; 3]))]);
    let truths = BTreeMap::from([("B".to_string(), truth), ("Z".to_string(), truth)]);
    let report = static_report(&fixes, &truths);
    let bound = 3.0 * sigma / (n as f64).sqrt();
    for t in &report.tags {
        let expected = if t.tag_id == "B" { offset } else { [0.0; 3] };
        for k in 0..3 {
            assert!((t.bias[k] - expected[k]).abs() < bound, "{} axis {k}: {}", t.tag_id, t.bias[k]);
            assert!((t.std[k] - sigma).abs() < 0.05 * sigma);
        }
    }
}
