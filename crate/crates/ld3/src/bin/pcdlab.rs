//! Point-cloud lab CLI: synthesize road scans, build no-marking and
//! wrong-marking variants, and run the locator dependency experiment.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ld3::pcdlab::{
    make_no_marking, make_wrong_marking, ransac_ground, read_pcd, run_dependency_experiment,
    synthetic_road_clouds, write_pcd, GeometryLocator, IntensityWeightedLocator, LabeledCloud,
    LidarLocator, MarkingEditConfig, PcdError, PointRecord,
};

#[derive(Parser)]
#[command(name = "pcdlab", about = "LiDAR lane-marking dependency lab", version)]
struct Cli {
    /// What to do with the clouds.
    #[arg(long, value_enum)]
    mode: Mode,
    /// Directory of `.pcd` files plus `poses.csv` (not needed for synth).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3.5)]
    lane_width: f64,
    /// Marking intensity threshold; defaults to ground median + 3*MAD.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clouds to generate in synth mode.
    #[arg(long, default_value_t = 20)]
    clouds: usize,
    /// Locator for experiment mode.
    #[arg(long, value_enum, default_value_t = LocatorKind::Geometry)]
    locator: LocatorKind,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Generate synthetic straight-road clouds with marking stripes.
    Synth,
    /// Flatten marking intensities to the ground median.
    NoMarking,
    /// Displace markings laterally by half a lane width.
    WrongMarking,
    /// Run a locator over original/no-marking/wrong-marking variants and
    /// report uncertainty correlation and position RMSE.
    Experiment,
}

#[derive(Clone, Copy, ValueEnum)]
enum LocatorKind {
    Geometry,
    Intensity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn edit_config(cli: &Cli) -> MarkingEditConfig {
    MarkingEditConfig {
        intensity_threshold: cli.threshold,
        lane_width: cli.lane_width,
        seed: cli.seed,
        ..MarkingEditConfig::default()
    }
}

fn run(cli: &Cli) -> Result<(), PcdError> {
    std::fs::create_dir_all(&cli.out)?;
    match cli.mode {
        Mode::Synth => synth(cli),
        Mode::NoMarking | Mode::WrongMarking => edit(cli),
        Mode::Experiment => experiment(cli),
    }
}

fn synth(cli: &Cli) -> Result<(), PcdError> {
    let clouds = synthetic_road_clouds(cli.clouds, cli.seed);
    let mut poses = String::from("file,x,y,lane_heading\n");
    for (i, cloud) in clouds.iter().enumerate() {
        let name = format!("cloud_{i:03}.pcd");
        write_pcd(cli.out.join(&name), &cloud.points)?;
        poses.push_str(&format!(
            "{name},{},{},{}\n",
            cloud.truth.0, cloud.truth.1, cloud.lane_heading
        ));
    }
    std::fs::write(cli.out.join("poses.csv"), poses)?;
    println!("wrote {} clouds to {}", clouds.len(), cli.out.display());
    Ok(())
}

fn load_labeled(input: &Path) -> Result<Vec<LabeledCloud>, PcdError> {
    let poses_path = input.join("poses.csv");
    let text = std::fs::read_to_string(&poses_path)?;
    let mut clouds = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(PcdError::Parse {
                line: i + 1,
                msg: format!("poses.csv: expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, PcdError> {
            s.parse().map_err(|e| PcdError::Parse {
                line: i + 1,
                msg: format!("poses.csv {what}: {e}"),
            })
        };
        clouds.push(LabeledCloud {
            points: read_pcd(input.join(fields[0]))?,
            truth: (parse(fields[1], "x")?, parse(fields[2], "y")?),
            lane_heading: parse(fields[3], "lane_heading")?,
        });
    }
    if clouds.is_empty() {
        return Err(PcdError::LengthMismatch(format!(
            "no clouds listed in {}",
            poses_path.display()
        )));
    }
    Ok(clouds)
}

fn edit(cli: &Cli) -> Result<(), PcdError> {
    let input = cli
        .input
        .as_ref()
        .ok_or_else(|| PcdError::LengthMismatch("--input is required for marking edits".into()))?;
    let clouds = load_labeled(input)?;
    let cfg = edit_config(cli);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cli.seed);
    let mut metrics = String::from("file,points,ground_inliers,markings_moved_or_found,skipped\n");
    let mut poses = String::from("file,x,y,lane_heading\n");
    for (i, cloud) in clouds.iter().enumerate() {
        let ground = ransac_ground(
            &cloud.points,
            cfg.ransac_iterations,
            cfg.ransac_tolerance,
            &mut rng,
        )?;
        let (edited, found, skipped): (Vec<PointRecord>, usize, usize) = match cli.mode {
            Mode::NoMarking => {
                let out = make_no_marking(&cloud.points, &ground);
                let changed = out
                    .iter()
                    .zip(&cloud.points)
                    .filter(|(a, b)| a.intensity != b.intensity)
                    .count();
                (out, changed, 0)
            }
            Mode::WrongMarking => {
                let (out, skipped) =
                    make_wrong_marking(&cloud.points, &ground, &cfg, cloud.lane_heading);
                let changed = out
                    .iter()
                    .zip(&cloud.points)
                    .filter(|(a, b)| a.intensity != b.intensity)
                    .count();
                (out, changed, skipped)
            }
            _ => unreachable!(),
        };
        let name = format!("cloud_{i:03}.pcd");
        write_pcd(cli.out.join(&name), &edited)?;
        metrics.push_str(&format!(
            "{name},{},{},{found},{skipped}\n",
            edited.len(),
            ground.inliers.len()
        ));
        poses.push_str(&format!(
            "{name},{},{},{}\n",
            cloud.truth.0, cloud.truth.1, cloud.lane_heading
        ));
    }
    std::fs::write(cli.out.join("metrics.csv"), metrics)?;
    std::fs::write(cli.out.join("poses.csv"), poses)?;
    println!(
        "wrote {} edited clouds to {}",
        clouds.len(),
        cli.out.display()
    );
    Ok(())
}

fn experiment(cli: &Cli) -> Result<(), PcdError> {
    let input = cli
        .input
        .as_ref()
        .ok_or_else(|| PcdError::LengthMismatch("--input is required for the experiment".into()))?;
    let clouds = load_labeled(input)?;
    let reference = clouds[0].points.clone();
    let ref_pos = clouds[0].truth;
    let locator: Box<dyn LidarLocator> = match cli.locator {
        LocatorKind::Geometry => Box::new(GeometryLocator::new(reference, ref_pos)),
        LocatorKind::Intensity => Box::new(IntensityWeightedLocator::new(reference, ref_pos)),
    };
    let report = run_dependency_experiment(&clouds, locator.as_ref(), &edit_config(cli))?;
    println!(
        "locator={} r_no_marking={:.6} (strong: {}) r_wrong_marking={:.6} (strong: {})",
        locator.name(),
        report.r_no_marking,
        report.strong_no_marking,
        report.r_wrong_marking,
        report.strong_wrong_marking
    );
    println!(
        "rmse: original={:.6} no_marking={:.6} wrong_marking={:.6} skipped={}",
        report.rmse_original,
        report.rmse_no_marking,
        report.rmse_wrong_marking,
        report.wrong_marking_skipped
    );
    let csv = format!(
        "locator,r_no_marking,strong_no_marking,r_wrong_marking,strong_wrong_marking,\
rmse_original,rmse_no_marking,rmse_wrong_marking,wrong_marking_skipped\n\
{},{:.9},{},{:.9},{},{:.9},{:.9},{:.9},{}\n",
        locator.name(),
        report.r_no_marking,
        report.strong_no_marking,
        report.r_wrong_marking,
        report.strong_wrong_marking,
        report.rmse_original,
        report.rmse_no_marking,
        report.rmse_wrong_marking,
        report.wrong_marking_skipped
    );
    std::fs::write(cli.out.join("metrics.csv"), csv)?;
    println!("wrote {}", cli.out.join("metrics.csv").display());
    Ok(())
}
