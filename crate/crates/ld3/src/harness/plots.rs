//! Plot emission: plot-ready CSVs plus self-contained SVG renderings for the
//! ROC curve, the deviation time series, and the detection-latency histogram.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::roc_csv;
use super::trace::TraceRow;
use super::HarnessError;

pub struct PlotInputs<'a> {
    /// Labeled ROC curves (possibly several detectors on one plot).
    pub roc_curves: Vec<(String, &'a [(f64, f64)])>,
    pub latencies: &'a [f64],
    /// One run's rows for the deviation-vs-time plot.
    pub deviation_rows: &'a [TraceRow],
    pub attack_start: Option<f64>,
    pub alarm_time: Option<f64>,
}

impl<'a> PlotInputs<'a> {
    fn is_empty(&self) -> bool {
        self.roc_curves.iter().all(|(_, pts)| pts.is_empty())
            && self.latencies.is_empty()
            && self.deviation_rows.is_empty()
    }
}

/// Writes the plot files into `outdir` and returns their paths.
pub fn emit_plots(inputs: &PlotInputs, outdir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::EmptyPlotInputs(
            "need at least one of: a non-empty ROC curve, detection latencies, \
             or a run trace for the deviation series"
                .into(),
        ));
    }
    std::fs::create_dir_all(outdir)?;
    let mut written = Vec::new();

    if inputs.roc_curves.iter().any(|(_, pts)| !pts.is_empty()) {
        let svg = roc_svg(&inputs.roc_curves);
        written.push(write(outdir.join("roc.svg"), &svg)?);
        for (label, pts) in &inputs.roc_curves {
            let name = format!("roc_{}.csv", label.to_lowercase().replace([' ', '/'], "_"));
            written.push(write(outdir.join(name), &roc_csv(pts))?);
        }
    }

    if !inputs.deviation_rows.is_empty() {
        let mut csv = String::from("t,d_ld,d_msf\n");
        for r in inputs.deviation_rows {
            if let (Some(d_ld), Some(d_msf)) = (r.d_ld, r.d_msf) {
                let _ = writeln!(csv, "{:.9},{d_ld:.9},{d_msf:.9}", r.t);
            }
        }
        written.push(write(outdir.join("deviation.csv"), &csv)?);
        let svg = deviation_svg(
            inputs.deviation_rows,
            inputs.attack_start,
            inputs.alarm_time,
        );
        written.push(write(outdir.join("deviation.svg"), &svg)?);
    }

    if !inputs.latencies.is_empty() {
        let (bins, lo, width) = histogram(inputs.latencies, 12);
        let mut csv = String::from("bin_start,bin_end,count\n");
        for (i, count) in bins.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{:.9},{:.9},{count}",
                lo + i as f64 * width,
                lo + (i + 1) as f64 * width
            );
        }
        written.push(write(outdir.join("latency_hist.csv"), &csv)?);
        let svg = histogram_svg(&bins, lo, width);
        written.push(write(outdir.join("latency_hist.svg"), &svg)?);
    }

    Ok(written)
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf, HarnessError> {
    std::fs::write(&path, text)?;
    Ok(path)
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0).max(1e-12) * (W - 2.0 * MARGIN)
    }
    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0).max(1e-12) * (H - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        W / 2.0
    )
}

fn axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = write!(
        s,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{below}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"16\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {cy})\">{y_label}</text>\n\
         <text x=\"{m}\" y=\"{below}\" text-anchor=\"middle\" font-size=\"11\">{x0:.2}</text>\n\
         <text x=\"{r}\" y=\"{below}\" text-anchor=\"middle\" font-size=\"11\">{x1:.2}</text>\n\
         <text x=\"{yl}\" y=\"{b}\" text-anchor=\"end\" font-size=\"11\">{y0:.2}</text>\n\
         <text x=\"{yl}\" y=\"{t}\" text-anchor=\"end\" font-size=\"11\">{y1:.2}</text>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        cx = W / 2.0,
        cy = H / 2.0,
        below = H - MARGIN + 34.0,
        yl = MARGIN - 8.0,
        x0 = f.x0,
        x1 = f.x1,
        y0 = f.y0,
        y1 = f.y1,
    );
}

fn polyline(s: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dash: Option<&str>) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
        .collect();
    let dash = dash
        .map(|d| format!(" stroke-dasharray=\"{d}\""))
        .unwrap_or_default();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"{dash}/>",
        coords.join(" ")
    );
}

fn vrule(s: &mut String, f: &Frame, x: f64, color: &str, label: &str) {
    let px = f.px(x);
    let _ = write!(
        s,
        "<line x1=\"{px:.2}\" y1=\"{t}\" x2=\"{px:.2}\" y2=\"{b}\" stroke=\"{color}\" \
         stroke-dasharray=\"5 4\"/>\n\
         <text x=\"{lx:.2}\" y=\"{ly}\" fill=\"{color}\" font-size=\"12\">{label}</text>\n",
        t = MARGIN,
        b = H - MARGIN,
        lx = px + 4.0,
        ly = MARGIN + 14.0,
    );
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn roc_svg(curves: &[(String, &[(f64, f64)])]) -> String {
    let f = Frame {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };
    let mut s = svg_open("detection ROC");
    axes(&mut s, &f, "false positive rate", "true positive rate");
    polyline(
        &mut s,
        &f,
        &[(0.0, 0.0), (1.0, 1.0)],
        "#bbbbbb",
        Some("3 4"),
    );
    for (i, (label, pts)) in curves.iter().filter(|(_, p)| !p.is_empty()).enumerate() {
        let color = COLORS[i % COLORS.len()];
        polyline(&mut s, &f, pts, color, None);
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{label}</text>",
            W - MARGIN - 150.0,
            H - MARGIN - 22.0 - 18.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

fn deviation_svg(rows: &[TraceRow], attack_start: Option<f64>, alarm_time: Option<f64>) -> String {
    let ld: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.d_ld.map(|d| (r.t, d)))
        .collect();
    let msf: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.d_msf.map(|d| (r.t, d)))
        .collect();
    let all = ld.iter().chain(&msf);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, d) in all {
        lo = lo.min(*d);
        hi = hi.max(*d);
    }
    if !lo.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    let pad = 0.1 * (hi - lo).max(0.2);
    let f = Frame {
        x0: rows.first().map(|r| r.t).unwrap_or(0.0),
        x1: rows.last().map(|r| r.t).unwrap_or(1.0),
        y0: lo - pad,
        y1: hi + pad,
    };
    let mut s = svg_open("lateral deviation to lane centerline");
    axes(&mut s, &f, "time [s]", "deviation [m]");
    polyline(&mut s, &f, &ld, COLORS[0], None);
    polyline(&mut s, &f, &msf, COLORS[1], None);
    let _ = write!(
        s,
        "<text x=\"{x}\" y=\"{y1}\" fill=\"{c0}\">LD view</text>\n\
         <text x=\"{x}\" y=\"{y2}\" fill=\"{c1}\">localizer view</text>\n",
        x = W - MARGIN - 150.0,
        y1 = MARGIN + 16.0,
        y2 = MARGIN + 34.0,
        c0 = COLORS[0],
        c1 = COLORS[1],
    );
    if let Some(t) = attack_start {
        vrule(&mut s, &f, t, "#d62728", "attack start");
    }
    if let Some(t) = alarm_time {
        vrule(&mut s, &f, t, "#2ca02c", "alarm");
    }
    s.push_str("</svg>\n");
    s
}

fn histogram(values: &[f64], n_bins: usize) -> (Vec<usize>, f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / n_bins as f64).max(1e-9);
    let mut bins = vec![0usize; n_bins];
    for v in values {
        let idx = (((v - lo) / width) as usize).min(n_bins - 1);
        bins[idx] += 1;
    }
    (bins, lo, width)
}

fn histogram_svg(bins: &[usize], lo: f64, width: f64) -> String {
    let peak = bins.iter().copied().max().unwrap_or(1).max(1);
    let f = Frame {
        x0: lo,
        x1: lo + width * bins.len() as f64,
        y0: 0.0,
        y1: peak as f64,
    };
    let mut s = svg_open("detection latency");
    axes(&mut s, &f, "latency [s]", "runs");
    for (i, count) in bins.iter().enumerate() {
        if *count == 0 {
            continue;
        }
        let x = f.px(lo + i as f64 * width);
        let x_next = f.px(lo + (i + 1) as f64 * width);
        let y = f.py(*count as f64);
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
             fill=\"#1f77b4\" stroke=\"white\"/>",
            w = x_next - x,
            h = f.py(0.0) - y,
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_inputs_are_refused_with_guidance() {
        let inputs = PlotInputs {
            roc_curves: vec![],
            latencies: &[],
            deviation_rows: &[],
            attack_start: None,
            alarm_time: None,
        };
        let dir = tempfile::tempdir().unwrap();
        match emit_plots(&inputs, dir.path()) {
            Err(HarnessError::EmptyPlotInputs(msg)) => {
                assert!(msg.contains("ROC"));
                assert!(msg.contains("latencies"));
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn perfect_roc_renders_through_the_corner() {
        let pts = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let inputs = PlotInputs {
            roc_curves: vec![("ld3".into(), &pts)],
            latencies: &[],
            deviation_rows: &[],
            attack_start: None,
            alarm_time: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&inputs, dir.path()).unwrap();
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        // the corner (0,1) maps to the top-left of the frame
        assert!(svg.contains("60.00,60.00"), "corner point missing:\n{svg}");
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn deviation_plot_marks_attack_and_alarm() {
        let mk_row = |t: f64, d: f64| TraceRow {
            t,
            true_x: 0.0,
            true_y: 0.0,
            true_heading: 0.0,
            true_speed: 0.0,
            gps: None,
            lidar: None,
            msf_x: 0.0,
            msf_y: 0.0,
            msf_heading: 0.0,
            msf_speed: 0.0,
            ld: None,
            d_ld: Some(d),
            d_msf: Some(d + 0.1),
            delta: Some(0.1),
            counter: Some(0),
            alarmed: false,
            steering: 0.0,
            accel: 0.0,
            ctrl_source: super::super::trace::CtrlSource::Msf,
        };
        let rows: Vec<TraceRow> = (0..100)
            .map(|i| mk_row(i as f64 * 0.1, 0.01 * i as f64))
            .collect();
        let inputs = PlotInputs {
            roc_curves: vec![],
            latencies: &[0.4, 0.5, 0.6, 0.55],
            deviation_rows: &rows,
            attack_start: Some(3.0),
            alarm_time: Some(4.2),
        };
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plots(&inputs, dir.path()).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("deviation.svg")).unwrap();
        assert!(svg.contains("attack start"));
        assert!(svg.contains("alarm"));
        assert!(files.iter().any(|p| p.ends_with("latency_hist.svg")));
    }
}
