//! Intensity edits that erase or displace lane line markings. Positions are
//! never touched; only intensities change.

use super::{GroundModel, PointRecord};

/// How marking points are identified and where their displaced copies go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkingEditConfig {
    /// Ground points brighter than this are marking points. `None` picks
    /// ground median + 3 * MAD per cloud.
    pub intensity_threshold: Option<f64>,
    pub lane_width: f64,
    pub seed: u64,
    pub ransac_iterations: usize,
    pub ransac_tolerance: f64,
    /// Search radius for the ground point nearest a displaced location.
    pub match_radius: f64,
    /// Which side of the lane direction the half-lane-width displacement
    /// points to.
    pub offset_side: OffsetSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetSide {
    Left,
    Right,
}

impl Default for MarkingEditConfig {
    fn default() -> Self {
        Self {
            intensity_threshold: None,
            lane_width: 3.5,
            seed: 0,
            ransac_iterations: 120,
            ransac_tolerance: 0.08,
            match_radius: 0.2,
            offset_side: OffsetSide::Left,
        }
    }
}

/// Lower median: the `(n-1)/2`-th order statistic, which is always a value
/// from the data.
pub fn lower_median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty set");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

/// Ground median + 3 * MAD (median absolute deviation), both lower medians.
pub fn auto_intensity_threshold(ground_intensities: &[f64]) -> f64 {
    let med = lower_median(ground_intensities);
    let deviations: Vec<f64> = ground_intensities.iter().map(|v| (v - med).abs()).collect();
    med + 3.0 * lower_median(&deviations)
}

fn ground_intensities(points: &[PointRecord], g: &GroundModel) -> Vec<f64> {
    g.inliers.iter().map(|&i| points[i].intensity).collect()
}

/// Flattens every ground point's intensity to the ground median, making lane
/// markings indistinguishable from the rest of the road surface.
pub fn make_no_marking(points: &[PointRecord], g: &GroundModel) -> Vec<PointRecord> {
    let median = lower_median(&ground_intensities(points, g));
    let mut out = points.to_vec();
    for &i in &g.inliers {
        out[i].intensity = median;
    }
    out
}

/// Moves the lane markings half a lane width sideways: each marking point's
/// intensity is copied onto the ground point nearest its laterally displaced
/// location, then all original marking points are flattened to the ground
/// median. Marking points with no ground point inside `match_radius` of the
/// displaced location are skipped and counted.
pub fn make_wrong_marking(
    points: &[PointRecord],
    g: &GroundModel,
    cfg: &MarkingEditConfig,
    lane_heading: f64,
) -> (Vec<PointRecord>, usize) {
    let intensities = ground_intensities(points, g);
    let median = lower_median(&intensities);
    let threshold = cfg
        .intensity_threshold
        .unwrap_or_else(|| auto_intensity_threshold(&intensities));
    let markings: Vec<usize> = g
        .inliers
        .iter()
        .copied()
        .filter(|&i| points[i].intensity > threshold)
        .collect();

    let side = match cfg.offset_side {
        OffsetSide::Left => 1.0,
        OffsetSide::Right => -1.0,
    };
    let (nx, ny) = (-lane_heading.sin(), lane_heading.cos());
    let shift = cfg.lane_width / 2.0 * side;

    let mut out = points.to_vec();
    let mut skipped = 0;
    for &mi in &markings {
        let tx = points[mi].x + shift * nx;
        let ty = points[mi].y + shift * ny;
        let target = g
            .inliers
            .iter()
            .copied()
            .map(|gi| (gi, points[gi].xy_distance_to(tx, ty)))
            .filter(|(_, d)| *d <= cfg.match_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match target {
            Some((gi, _)) => out[gi].intensity = points[mi].intensity,
            None => skipped += 1,
        }
    }
    // clear the originals last, matching the edit order of the construction
    for &mi in &markings {
        out[mi].intensity = median;
    }
    (out, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcdlab::ransac_ground;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lower_median_of_odd_and_even_sets() {
        assert_eq!(lower_median(&[10.0, 10.0, 10.0, 200.0, 200.0]), 10.0);
        assert_eq!(lower_median(&[1.0, 2.0, 3.0, 4.0]), 2.0);
        assert_eq!(lower_median(&[5.0]), 5.0);
    }

    /// Straight-road cloud on a 0.1 m grid with bright stripes at y = +-1.75.
    fn striped_cloud() -> Vec<PointRecord> {
        let mut pts = Vec::new();
        for i in 0..=80 {
            let x = i as f64 * 0.1;
            for j in 0..=72 {
                let y = -3.6 + j as f64 * 0.1;
                pts.push(PointRecord::new(x, y, 0.0, 30.0));
            }
            for stripe in [-1.75, 1.75] {
                pts.push(PointRecord::new(x, stripe, 0.0, 220.0));
            }
        }
        // a wall, well off the ground plane
        for i in 0..=80 {
            pts.push(PointRecord::new(i as f64 * 0.1, 5.0, 1.0, 90.0));
        }
        pts
    }

    fn ground_of(pts: &[PointRecord]) -> GroundModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        ransac_ground(pts, 100, 0.05, &mut rng).unwrap()
    }

    fn detect_markings(pts: &[PointRecord], g: &GroundModel, threshold: f64) -> Vec<usize> {
        g.inliers
            .iter()
            .copied()
            .filter(|&i| pts[i].intensity > threshold)
            .collect()
    }

    #[test]
    fn no_marking_flattens_ground_only() {
        let pts = striped_cloud();
        let g = ground_of(&pts);
        let out = make_no_marking(&pts, &g);
        // positions untouched
        assert!(pts
            .iter()
            .zip(&out)
            .all(|(a, b)| (a.x, a.y, a.z) == (b.x, b.y, b.z)));
        // post-edit marking detection finds nothing on the ground
        let threshold = auto_intensity_threshold(
            &g.inliers
                .iter()
                .map(|&i| out[i].intensity)
                .collect::<Vec<_>>(),
        );
        assert!(detect_markings(&out, &g, threshold).is_empty());
        // the wall keeps its intensity
        assert!(out.iter().any(|p| p.intensity == 90.0));
        // idempotent on a uniform ground
        let again = make_no_marking(&out, &g);
        assert_eq!(out, again);
    }

    #[test]
    fn wrong_marking_moves_stripes_half_a_lane() {
        let pts = striped_cloud();
        let g = ground_of(&pts);
        let cfg = MarkingEditConfig::default();
        let (out, skipped) = make_wrong_marking(&pts, &g, &cfg, 0.0);
        assert_eq!(
            skipped, 0,
            "grid guarantees a target for every stripe point"
        );
        // positions untouched
        assert!(pts
            .iter()
            .zip(&out)
            .all(|(a, b)| (a.x, a.y, a.z) == (b.x, b.y, b.z)));

        // re-detection oracle: markings now sit at y = 0 and y = 3.5,
        // the +1.75-shifted images of the original stripes
        let bright: Vec<&PointRecord> = out
            .iter()
            .filter(|p| p.z == 0.0 && p.intensity > 100.0)
            .collect();
        assert!(!bright.is_empty());
        for p in &bright {
            let near_zero = p.y.abs() < 0.06;
            let near_upper = (p.y - 3.5).abs() < 0.06;
            assert!(
                near_zero || near_upper,
                "unexpected bright point at y={}",
                p.y
            );
        }
        // both displaced stripes are populated
        assert!(bright.iter().any(|p| p.y.abs() < 0.06));
        assert!(bright.iter().any(|p| (p.y - 3.5).abs() < 0.06));
        // originals flattened to the ground median
        assert!(out
            .iter()
            .filter(|p| p.z == 0.0 && (p.y.abs() - 1.75).abs() < 1e-9)
            .all(|p| p.intensity == 30.0));
    }

    #[test]
    fn threshold_above_everything_means_no_edit() {
        let pts = striped_cloud();
        let g = ground_of(&pts);
        let cfg = MarkingEditConfig {
            intensity_threshold: Some(1000.0),
            ..MarkingEditConfig::default()
        };
        let (out, skipped) = make_wrong_marking(&pts, &g, &cfg, 0.0);
        assert_eq!(out, pts);
        assert_eq!(skipped, 0);
    }

    #[test]
    fn unreachable_targets_are_skipped_and_counted() {
        // single marking point whose displaced location has no ground nearby
        let mut pts = vec![PointRecord::new(0.0, 0.0, 0.0, 200.0)];
        for i in 1..60 {
            pts.push(PointRecord::new(i as f64 * 0.1, 0.0, 0.0, 30.0));
        }
        for i in 0..60 {
            pts.push(PointRecord::new(i as f64 * 0.1, 0.3, 0.0, 30.0));
        }
        let g = ground_of(&pts);
        let cfg = MarkingEditConfig {
            intensity_threshold: Some(100.0),
            ..MarkingEditConfig::default()
        };
        // displaced location is 1.75 m left (+y): nothing within 0.2 m
        let (out, skipped) = make_wrong_marking(&pts, &g, &cfg, 0.0);
        assert_eq!(skipped, 1);
        // the original is still cleared
        assert_eq!(out[0].intensity, 30.0);
    }
}
