//! Hand-written SVG line charts of result CSVs.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::{read_echo, read_result_csv, ResultEcho};
use crate::reference::write_file;
use crate::trace::Metric;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Iters,
    Comms,
}

impl FromStr for XAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iters" => Ok(XAxis::Iters),
            "comms" => Ok(XAxis::Comms),
            _ => Err(Error::invalid(format!("x axis must be iters or comms, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Legend text from a config echo: algorithm, n, p and the variances.
pub fn legend_label(echo: &ResultEcho) -> String {
    use crate::harness::ProblemSpec;
    let mut s = format!(
        "{} n={} p={}",
        echo.algorithm.kind.name(),
        echo.config.nodes,
        echo.algorithm.hyper.p
    );
    match &echo.config.problem {
        ProblemSpec::Quadratic { varsigma2, sigma2, .. } => {
            let _ = write!(s, " ς²={varsigma2} σ²={sigma2}");
        }
        ProblemSpec::Logistic { sigma2, .. } => {
            let _ = write!(s, " σ²={sigma2}");
        }
    }
    s
}

/// Renders series as an SVG document. With `log_y`, non-positive values are
/// dropped and the axis spans whole decades.
pub fn render_svg(series: &[PlotSeries], x_label: &str, y_label: &str, log_y: bool) -> Result<String> {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|(_, y)| !log_y || *y > 0.0);
    if pts().next().is_none() {
        return Err(Error::Schema("nothing to plot".into()));
    }
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(ty(y));
        y1 = y1.max(ty(y));
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    // y ticks
    if log_y {
        let step = ((y1 - y0) / 8.0).ceil().max(1.0) as i64;
        let mut e = y0 as i64;
        while e as f64 <= y1 {
            let y = sy(e as f64);
            let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
                LEFT - 6.0,
                y + 4.0
            );
            e += step;
        }
    } else {
        for k in 0..=4 {
            let v = y0 + (y1 - y0) * k as f64 / 4.0;
            let y = sy(v);
            let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3e}</text>"#, LEFT - 6.0, y + 4.0);
        }
    }
    for k in 0..=4 {
        let v = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(v),
            TOP + ph + 18.0,
            v.round()
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut path = String::new();
        for &(x, y) in s.points.iter().filter(|(_, y)| !log_y || *y > 0.0) {
            let cmd = if path.is_empty() { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.2},{:.2} ", sx(x), sy(ty(y)));
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Reads each CSV, extracts `metric` against `x` and writes one chart. A
/// missing, empty or malformed input aborts before anything is written.
pub fn plot_files(inputs: &[&Path], x: XAxis, metric: Metric, log_y: bool, out: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("no input CSVs"));
    }
    let mut series = Vec::with_capacity(inputs.len());
    for path in inputs {
        let rows = read_result_csv(path)?;
        if rows.is_empty() {
            return Err(Error::Schema(format!("{} has no data rows", path.display())));
        }
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| {
                let xv = match x {
                    XAxis::Iters => r.iteration as f64,
                    XAxis::Comms => r.comms,
                };
                (xv, r.mean)
            })
            .collect();
        if points.is_empty() {
            return Err(Error::Schema(format!("{} has no rows for metric {metric}", path.display())));
        }
        let label = match read_echo(path) {
            Some(echo) => legend_label(&echo),
            None => path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        };
        series.push(PlotSeries { label, points });
    }
    let x_label = match x {
        XAxis::Iters => "iteration",
        XAxis::Comms => "communication rounds",
    };
    let svg = render_svg(&series, x_label, metric.name(), log_y)?;
    write_file(out, svg.as_bytes())
}
