//! Point-cloud lab: how much does LiDAR localization depend on lane line
//! markings?
//!
//! Lane markings reflect brighter than the surrounding road surface, so they
//! only exist in a point cloud as intensity structure on the ground plane.
//! The lab segments the ground, rewrites marking intensities two ways —
//! erased entirely, or displaced half a lane width sideways — and compares a
//! locator's outputs across the original and modified clouds via uncertainty
//! correlation and position RMSE. A locator that ignores intensities is
//! provably unaffected; an intensity-sensitive one is not.

mod edit;
mod experiment;
mod ground;
mod locator;
mod point;
mod stats;

pub use edit::{
    auto_intensity_threshold, lower_median, make_no_marking, make_wrong_marking, MarkingEditConfig,
    OffsetSide,
};
pub use experiment::{
    run_dependency_experiment, synthetic_road_clouds, DependencyReport, LabeledCloud,
    STRONG_CORRELATION,
};
pub use ground::{ransac_ground, GroundModel, Plane};
pub use locator::{GeometryLocator, IntensityWeightedLocator, LidarLocator, LocatorFix};
pub use point::{read_pcd, write_pcd, PointRecord};
pub use stats::{pearson_r, rmse};

#[derive(Debug, thiserror::Error)]
pub enum PcdError {
    #[error("pcd parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(&'static str),
    #[error("zero variance in {0} series")]
    ZeroVariance(&'static str),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}
