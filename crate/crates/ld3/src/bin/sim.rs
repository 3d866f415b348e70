//! Closed-loop simulator CLI: single runs, attack-parameter sweeps, the
//! baseline detector comparison, and plot emission.
//!
//! Exit codes: 0 success, 2 config error, 3 failed `--check` assertion.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ld3::harness::{
    emit_plots, metrics_csv, read_trace, roc_csv, run_savior_baseline, run_scenario, run_sweep,
    savior_reference_config, sweep_summary_csv, write_text, write_trace, HarnessError, PlotInputs,
    RunSummary, ScenarioConfig, SweepResult,
};

#[derive(Parser)]
#[command(name = "sim", about = "GPS-spoofing defense simulator", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single scenario from a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        io: OutOpts,
    },
    /// Sweep attack parameters over a seed grid plus benign runs.
    Sweep {
        config: PathBuf,
        /// Grid as `d=0.5,1,2;f=1.25,1.5,2`.
        #[arg(long)]
        grid: String,
        /// Attacked runs per grid point.
        #[arg(long, default_value_t = 10)]
        seeds: u32,
        /// Benign runs.
        #[arg(long, default_value_t = 30)]
        benign: u32,
        #[command(flatten)]
        io: OutOpts,
    },
    /// Compare the physics-residual baseline detector against the
    /// lane-detection one. Without a config, uses the built-in
    /// consumer-GNSS reference scenario.
    Savior {
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        attacked: u32,
        #[arg(long, default_value_t = 10)]
        benign: u32,
        #[command(flatten)]
        io: OutOpts,
    },
    /// Render SVG plots from a results directory.
    Plot { results_dir: PathBuf },
}

#[derive(Args)]
struct OutOpts {
    /// Write traces/metrics/config echo into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Assert the expected outcome and exit 3 if it does not hold.
    #[arg(long)]
    check: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(HarnessError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.cmd {
        Cmd::Run { config, io } => cmd_run(&config, &io),
        Cmd::Sweep {
            config,
            grid,
            seeds,
            benign,
            io,
        } => cmd_sweep(&config, &grid, seeds, benign, &io),
        Cmd::Savior {
            config,
            attacked,
            benign,
            io,
        } => cmd_savior(config.as_deref(), attacked, benign, &io),
        Cmd::Plot { results_dir } => cmd_plot(&results_dir),
    }
}

fn echo_config(
    outdir: &Path,
    cfg: &ScenarioConfig,
    original: Option<&str>,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(outdir)?;
    if let Some(text) = original {
        write_text(outdir.join("config.toml"), text)?;
    }
    write_text(outdir.join("config_resolved.toml"), &cfg.to_toml())?;
    Ok(())
}

fn cmd_run(config: &Path, io: &OutOpts) -> Result<ExitCode, HarnessError> {
    let text = std::fs::read_to_string(config)?;
    let cfg = ScenarioConfig::from_toml(&text)?;
    let res = run_scenario(&cfg)?;
    println!(
        "alarmed={} alarm_time={:?} latency={:?}",
        res.alarmed, res.alarm_time, res.detection_latency
    );
    println!(
        "max_true_lateral_dev={:.3} final_speed={:.3} final_lateral_dev={:.3}",
        res.max_true_lateral_dev, res.final_speed, res.final_lateral_dev
    );
    if let Some(outdir) = &io.out {
        echo_config(outdir, &cfg, Some(&text))?;
        write_trace(outdir.join("trace.csv"), &res.rows)?;
        let attack_start = cfg.attack.as_ref().map(|a| a.start_time);
        let inputs = PlotInputs {
            roc_curves: vec![],
            latencies: &[],
            deviation_rows: &res.rows,
            attack_start,
            alarm_time: res.alarm_time,
        };
        emit_plots(&inputs, outdir)?;
        println!("wrote {}", outdir.display());
    }
    if io.check {
        let ok = match cfg.attack {
            Some(_) => res.alarmed && res.final_speed == 0.0 && res.final_lateral_dev.abs() <= 0.9,
            None => !res.alarmed,
        };
        if !ok {
            eprintln!("check failed for {}", config.display());
            return Ok(ExitCode::from(3));
        }
        println!("check passed");
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_grid(spec: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut ds: Option<Vec<f64>> = None;
    let mut fs: Option<Vec<f64>> = None;
    for part in spec.split(';') {
        let (key, vals) = part
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("grid part `{part}` is not key=v1,v2")))?;
        let parsed: Result<Vec<f64>, _> = vals.split(',').map(|v| v.trim().parse()).collect();
        let parsed =
            parsed.map_err(|e| HarnessError::Config(format!("grid values in `{part}`: {e}")))?;
        match key.trim() {
            "d" => ds = Some(parsed),
            "f" => fs = Some(parsed),
            other => {
                return Err(HarnessError::Config(format!("unknown grid key `{other}`")));
            }
        }
    }
    let ds = ds.ok_or_else(|| HarnessError::Config("grid is missing d=...".into()))?;
    let fs = fs.ok_or_else(|| HarnessError::Config("grid is missing f=...".into()))?;
    let mut grid = Vec::with_capacity(ds.len() * fs.len());
    for &d in &ds {
        for &f in &fs {
            grid.push((d, f));
        }
    }
    Ok(grid)
}

fn all_runs(result: &SweepResult) -> Vec<&RunSummary> {
    result
        .cells
        .iter()
        .flat_map(|c| &c.runs)
        .chain(&result.benign)
        .collect()
}

fn cmd_sweep(
    config: &Path,
    grid: &str,
    seeds: u32,
    benign: u32,
    io: &OutOpts,
) -> Result<ExitCode, HarnessError> {
    let text = std::fs::read_to_string(config)?;
    let cfg = ScenarioConfig::from_toml(&text)?;
    let grid = parse_grid(grid)?;
    let result = run_sweep(&cfg, &grid, seeds, benign)?;
    println!(
        "tpr={:.3} fpr={:.3} auc={:.3} ({} attacked, {} benign)",
        result.tpr,
        result.fpr,
        result.auc,
        result.cells.iter().map(|c| c.runs.len()).sum::<usize>(),
        result.benign.len()
    );
    for c in &result.cells {
        println!(
            "  d={:<5} f={:<5} tpr={:.2} mean_latency={:?}",
            c.d, c.f, c.tpr, c.mean_latency
        );
    }
    if let Some(outdir) = &io.out {
        echo_config(outdir, &cfg, Some(&text))?;
        write_text(outdir.join("metrics.csv"), &metrics_csv(&all_runs(&result)))?;
        write_text(outdir.join("summary.csv"), &sweep_summary_csv(&result))?;
        write_text(outdir.join("roc.csv"), &roc_csv(&result.roc))?;
        println!("wrote {}", outdir.display());
    }
    if io.check {
        let mut ok = result.tpr == 1.0 && result.fpr == 0.0;
        for c in &result.cells {
            for r in &c.runs {
                ok &= r.alarmed && r.final_speed == 0.0 && r.final_lateral_dev.abs() <= 0.9;
            }
        }
        if !ok {
            eprintln!("check failed: tpr={} fpr={}", result.tpr, result.fpr);
            return Ok(ExitCode::from(3));
        }
        println!("check passed");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_savior(
    config: Option<&Path>,
    attacked: u32,
    benign: u32,
    io: &OutOpts,
) -> Result<ExitCode, HarnessError> {
    let (cfg, text) = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            (ScenarioConfig::from_toml(&text)?, Some(text))
        }
        None => (savior_reference_config(), None),
    };
    let cmp = run_savior_baseline(&cfg, attacked, benign)?;
    println!(
        "baseline auc={:.4} tpr@0fpr={:.3} mean_latency={:?}",
        cmp.savior_auc, cmp.savior_tpr_at_zero_fpr, cmp.mean_savior_latency
    );
    println!(
        "lane-detection auc={:.4} tpr@0fpr={:.3} mean_latency={:?}",
        cmp.ld3_auc, cmp.ld3_tpr_at_zero_fpr, cmp.mean_ld3_latency
    );
    if let Some(outdir) = &io.out {
        echo_config(outdir, &cfg, text.as_deref())?;
        let runs: Vec<&RunSummary> = cmp.runs.iter().collect();
        write_text(outdir.join("metrics.csv"), &metrics_csv(&runs))?;
        write_text(outdir.join("roc_ld3.csv"), &roc_csv(&cmp.ld3_roc))?;
        write_text(outdir.join("roc_savior.csv"), &roc_csv(&cmp.savior_roc))?;
        let latencies: Vec<f64> = cmp
            .runs
            .iter()
            .filter_map(|r| r.detection_latency)
            .collect();
        let inputs = PlotInputs {
            roc_curves: vec![
                ("ld3".into(), &cmp.ld3_roc),
                ("savior".into(), &cmp.savior_roc),
            ],
            latencies: &latencies,
            deviation_rows: &[],
            attack_start: None,
            alarm_time: None,
        };
        emit_plots(&inputs, outdir)?;
        println!("wrote {}", outdir.display());
    }
    if io.check {
        let ok = cmp.ld3_auc == 1.0 && cmp.savior_auc < 1.0;
        if !ok {
            eprintln!(
                "check failed: ld3 auc {} savior auc {}",
                cmp.ld3_auc, cmp.savior_auc
            );
            return Ok(ExitCode::from(3));
        }
        println!("check passed");
    }
    Ok(ExitCode::SUCCESS)
}

fn read_roc_csv(path: &Path) -> Result<Vec<(f64, f64)>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| HarnessError::TraceParse {
                row: i,
                msg: "bad roc row".into(),
            })?;
        let fpr: f64 = a.parse().map_err(|e| HarnessError::TraceParse {
            row: i,
            msg: format!("fpr: {e}"),
        })?;
        let tpr: f64 = b.parse().map_err(|e| HarnessError::TraceParse {
            row: i,
            msg: format!("tpr: {e}"),
        })?;
        pts.push((fpr, tpr));
    }
    Ok(pts)
}

fn read_latencies(path: &Path) -> Vec<f64> {
    let Ok(text) = std::fs::read_to_string(path) else {
        return Vec::new();
    };
    let mut lines = text.lines();
    let Some(header) = lines.next() else {
        return Vec::new();
    };
    let Some(col) = header.split(',').position(|c| c == "detection_latency") else {
        return Vec::new();
    };
    lines
        .filter_map(|l| l.split(',').nth(col).and_then(|v| v.parse().ok()))
        .collect()
}

fn cmd_plot(dir: &Path) -> Result<ExitCode, HarnessError> {
    let mut roc_curves = Vec::new();
    for (label, name) in [
        ("ld3", "roc_ld3.csv"),
        ("savior", "roc_savior.csv"),
        ("sweep", "roc.csv"),
    ] {
        let path = dir.join(name);
        if path.exists() {
            roc_curves.push((label.to_string(), read_roc_csv(&path)?));
        }
    }
    let latencies = read_latencies(&dir.join("metrics.csv"));
    let trace_path = dir.join("trace.csv");
    let rows = if trace_path.exists() {
        read_trace(&trace_path)?
    } else {
        Vec::new()
    };
    let alarm_time = rows.iter().find(|r| r.alarmed).map(|r| r.t);
    let attack_start = rows
        .iter()
        .find(|r| matches!(r.gps, Some((_, _, true))))
        .map(|r| r.t);
    let curves: Vec<(String, &[(f64, f64)])> = roc_curves
        .iter()
        .map(|(l, pts)| (l.clone(), pts.as_slice()))
        .collect();
    let inputs = PlotInputs {
        roc_curves: curves,
        latencies: &latencies,
        deviation_rows: &rows,
        attack_start,
        alarm_time,
    };
    let files = emit_plots(&inputs, dir)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}
