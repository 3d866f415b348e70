//! Desk-scale LiDAR locators for the dependency experiment: both align the
//! query cloud against a stored reference by centroid shift, and differ only
//! in whether intensities enter the computation.

use super::PointRecord;

/// A locator output: estimated 2-D position plus a scalar match uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocatorFix {
    pub x: f64,
    pub y: f64,
    pub uncertainty: f64,
}

pub trait LidarLocator {
    fn name(&self) -> &'static str;
    fn locate(&self, cloud: &[PointRecord]) -> LocatorFix;
}

/// How many points feed the nearest-neighbor residual; a prime stride keeps
/// the subsample spread across grid-structured clouds.
const RESIDUAL_STRIDE: usize = 53;

fn centroid_xy(points: &[PointRecord]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.x).sum();
    let sy: f64 = points.iter().map(|p| p.y).sum();
    (sx / n, sy / n)
}

fn weighted_centroid_xy(points: &[PointRecord]) -> (f64, f64) {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for p in points {
        sw += p.intensity;
        sx += p.intensity * p.x;
        sy += p.intensity * p.y;
    }
    (sx / sw, sy / sw)
}

/// Nearest-reference-point distance for every `stride`-th cloud point after
/// shifting the cloud back into the reference frame.
fn nn_residuals(
    cloud: &[PointRecord],
    reference: &[PointRecord],
    shift: (f64, f64),
) -> Vec<(f64, f64)> {
    cloud
        .iter()
        .step_by(RESIDUAL_STRIDE)
        .map(|p| {
            let (qx, qy) = (p.x - shift.0, p.y - shift.1);
            let mut best = f64::INFINITY;
            for r in reference {
                let d2 = (qx - r.x).powi(2) + (qy - r.y).powi(2) + (p.z - r.z).powi(2);
                if d2 < best {
                    best = d2;
                }
            }
            (best.sqrt(), p.intensity)
        })
        .collect()
}

/// Intensity-blind locator: pure geometry in, position and uncertainty out.
/// Editing intensities cannot change its output by construction.
pub struct GeometryLocator {
    reference: Vec<PointRecord>,
    reference_position: (f64, f64),
}

impl GeometryLocator {
    pub fn new(reference: Vec<PointRecord>, reference_position: (f64, f64)) -> Self {
        assert!(!reference.is_empty(), "reference cloud must be non-empty");
        Self {
            reference,
            reference_position,
        }
    }
}

impl LidarLocator for GeometryLocator {
    fn name(&self) -> &'static str {
        "geometry"
    }

    fn locate(&self, cloud: &[PointRecord]) -> LocatorFix {
        let (cx, cy) = centroid_xy(cloud);
        let (rx, ry) = centroid_xy(&self.reference);
        let shift = (cx - rx, cy - ry);
        let residuals = nn_residuals(cloud, &self.reference, shift);
        let mean = residuals.iter().map(|(d, _)| d).sum::<f64>() / residuals.len() as f64;
        LocatorFix {
            x: self.reference_position.0 + shift.0,
            y: self.reference_position.1 + shift.1,
            uncertainty: mean,
        }
    }
}

/// Intensity-weighted variant: the alignment and the residual average both
/// weight points by intensity, so marking edits shift its output.
pub struct IntensityWeightedLocator {
    reference: Vec<PointRecord>,
    reference_position: (f64, f64),
}

impl IntensityWeightedLocator {
    pub fn new(reference: Vec<PointRecord>, reference_position: (f64, f64)) -> Self {
        assert!(!reference.is_empty(), "reference cloud must be non-empty");
        Self {
            reference,
            reference_position,
        }
    }
}

impl LidarLocator for IntensityWeightedLocator {
    fn name(&self) -> &'static str {
        "intensity-weighted"
    }

    fn locate(&self, cloud: &[PointRecord]) -> LocatorFix {
        let (cx, cy) = weighted_centroid_xy(cloud);
        let (rx, ry) = weighted_centroid_xy(&self.reference);
        let shift = (cx - rx, cy - ry);
        let residuals = nn_residuals(cloud, &self.reference, shift);
        let sw: f64 = residuals.iter().map(|(_, w)| w).sum();
        let weighted: f64 = residuals.iter().map(|(d, w)| d * w).sum();
        LocatorFix {
            x: self.reference_position.0 + shift.0,
            y: self.reference_position.1 + shift.1,
            uncertainty: weighted / sw,
        }
    }
}
