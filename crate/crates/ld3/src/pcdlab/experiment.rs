//! The marking-dependency experiment: run a locator on original, no-marking
//! and wrong-marking variants of each cloud, then compare uncertainty
//! correlation and position accuracy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    make_no_marking, make_wrong_marking, pearson_r, ransac_ground, rmse, LidarLocator,
    MarkingEditConfig, PcdError, PointRecord,
};

/// Correlations above this count as statistically strong.
pub const STRONG_CORRELATION: f64 = 0.5;

/// An input cloud with its ground-truth scanner position and the local lane
/// direction, which the wrong-marking edit displaces across.
#[derive(Debug, Clone)]
pub struct LabeledCloud {
    pub points: Vec<PointRecord>,
    pub truth: (f64, f64),
    pub lane_heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyReport {
    /// Pearson correlation of locator uncertainties, original vs no-marking.
    pub r_no_marking: f64,
    /// Pearson correlation of locator uncertainties, original vs wrong-marking.
    pub r_wrong_marking: f64,
    pub strong_no_marking: bool,
    pub strong_wrong_marking: bool,
    /// Position RMSE against ground truth per variant.
    pub rmse_original: f64,
    pub rmse_no_marking: f64,
    pub rmse_wrong_marking: f64,
    /// Marking points whose displaced location had no ground point in range.
    pub wrong_marking_skipped: usize,
}

/// Runs the locator over all three variants of every cloud. Ground
/// segmentation is re-seeded per cloud index from `cfg.seed`, so the whole
/// experiment is a pure function of its inputs.
pub fn run_dependency_experiment(
    clouds: &[LabeledCloud],
    locator: &dyn LidarLocator,
    cfg: &MarkingEditConfig,
) -> Result<DependencyReport, PcdError> {
    if clouds.is_empty() {
        return Err(PcdError::LengthMismatch(
            "dependency experiment needs at least one cloud".into(),
        ));
    }
    let n = clouds.len();
    let mut u_orig = Vec::with_capacity(n);
    let mut u_no = Vec::with_capacity(n);
    let mut u_wrong = Vec::with_capacity(n);
    let mut p_orig = Vec::with_capacity(n);
    let mut p_no = Vec::with_capacity(n);
    let mut p_wrong = Vec::with_capacity(n);
    let mut truths = Vec::with_capacity(n);
    let mut skipped_total = 0;

    for (idx, cloud) in clouds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(idx as u64));
        let ground = ransac_ground(
            &cloud.points,
            cfg.ransac_iterations,
            cfg.ransac_tolerance,
            &mut rng,
        )?;
        let no_marking = make_no_marking(&cloud.points, &ground);
        let (wrong_marking, skipped) =
            make_wrong_marking(&cloud.points, &ground, cfg, cloud.lane_heading);
        skipped_total += skipped;

        for (points, us, ps) in [
            (&cloud.points, &mut u_orig, &mut p_orig),
            (&no_marking, &mut u_no, &mut p_no),
            (&wrong_marking, &mut u_wrong, &mut p_wrong),
        ] {
            let fix = locator.locate(points);
            us.push(fix.uncertainty);
            ps.push((fix.x, fix.y));
        }
        truths.push(cloud.truth);
    }

    let r_no = pearson_r(&u_orig, &u_no)?;
    let r_wrong = pearson_r(&u_orig, &u_wrong)?;
    Ok(DependencyReport {
        r_no_marking: r_no,
        r_wrong_marking: r_wrong,
        strong_no_marking: r_no > STRONG_CORRELATION,
        strong_wrong_marking: r_wrong > STRONG_CORRELATION,
        rmse_original: rmse(&p_orig, &truths)?,
        rmse_no_marking: rmse(&p_no, &truths)?,
        rmse_wrong_marking: rmse(&p_wrong, &truths)?,
        wrong_marking_skipped: skipped_total,
    })
}

/// Synthetic straight-road scans: a 0.1 m ground grid with bright marking
/// stripes at half a (3.5 m) lane width either side of the centerline, plus
/// two walls for longitudinal structure. Each scan is taken 5 m further
/// along the road and carries its own coordinate jitter, so locator outputs
/// vary from cloud to cloud.
pub fn synthetic_road_clouds(count: usize, seed: u64) -> Vec<LabeledCloud> {
    let mut clouds = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b9u64.wrapping_mul(k as u64 + 1)));
        let x0 = 5.0 * k as f64;
        let mut points = Vec::new();
        let jitter = |scale: f64, rng: &mut ChaCha8Rng| -> f64 {
            rng.sample::<f64, _>(StandardNormal) * scale
        };
        for i in 0..=160 {
            let x = x0 - 8.0 + i as f64 * 0.1;
            for j in 0..=72 {
                let y = -3.6 + j as f64 * 0.1;
                points.push(PointRecord::new(
                    x + jitter(0.01, &mut rng),
                    y + jitter(0.01, &mut rng),
                    jitter(0.01, &mut rng),
                    (30.0 + jitter(2.0, &mut rng)).clamp(0.0, 255.0),
                ));
            }
            for stripe in [-1.75, 1.75] {
                points.push(PointRecord::new(
                    x + jitter(0.01, &mut rng),
                    stripe + jitter(0.01, &mut rng),
                    jitter(0.01, &mut rng),
                    (220.0 + jitter(5.0, &mut rng)).clamp(0.0, 255.0),
                ));
            }
            // walls give the nearest-neighbor residual some 3-D structure
            for wall_y in [-6.0, 6.0] {
                for h in 1..=4 {
                    points.push(PointRecord::new(
                        x + jitter(0.01, &mut rng),
                        wall_y + jitter(0.01, &mut rng),
                        h as f64 * 0.4 + jitter(0.01, &mut rng),
                        (90.0 + jitter(4.0, &mut rng)).clamp(0.0, 255.0),
                    ));
                }
            }
        }
        clouds.push(LabeledCloud {
            points,
            truth: (x0, 0.0),
            lane_heading: 0.0,
        });
    }
    clouds
}
