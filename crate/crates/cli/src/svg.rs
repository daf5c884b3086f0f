//! Static SVG line charts of aggregate curves.
//!
//! Output is a pure function of the CSV contents: no timestamps, no randomness.

use std::fmt::Write as _;
use std::path::Path;

use crate::output::AGG_HEADER;
use crate::{CliError, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Regret,
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggRow {
    pub t: f64,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_posterior_mass_true: f64,
}

/// Reads an aggregate CSV, insisting on the exact header and at least one row.
pub fn read_agg(path: &Path) -> Result<Vec<AggRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(AGG_HEADER.iter().copied()) {
        return Err(CliError::Config(format!(
            "{}: expected columns {:?}, found {:?}",
            path.display(),
            AGG_HEADER,
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("{}: bad value in row {}, column {}", path.display(), line + 2, AGG_HEADER[i])))
        };
        rows.push(AggRow {
            t: field(0)?,
            mean_regret: field(1)?,
            std_regret: field(2)?,
            mean_posterior_mass_true: field(3)?,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Reads `csv_path` and writes the chart to `out_path`. Nothing is written on error.
pub fn render_svg(csv_path: &Path, kind: PlotKind, out_path: &Path, log_x: bool) -> Result<()> {
    let rows = read_agg(csv_path)?;
    let svg = render(&rows, kind, log_x)?;
    std::fs::write(out_path, svg)?;
    Ok(())
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64) -> Self {
        if hi > lo {
            Self { lo, hi }
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            Self { lo: lo - pad, hi: hi + pad }
        }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn thin<T: Copy>(xs: &[T]) -> Vec<T> {
    if xs.len() <= MAX_POINTS {
        return xs.to_vec();
    }
    let stride = xs.len().div_ceil(MAX_POINTS);
    let mut out: Vec<T> = xs.iter().step_by(stride).copied().collect();
    if !(xs.len() - 1).is_multiple_of(stride) {
        out.push(xs[xs.len() - 1]);
    }
    out
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Mean curve (and ±1 std band for regret) as an SVG document.
pub fn render(rows: &[AggRow], kind: PlotKind, log_x: bool) -> Result<String> {
    if rows.is_empty() {
        return Err(CliError::Config("no data rows".into()));
    }
    if log_x && rows.iter().any(|r| r.t <= 0.0) {
        return Err(CliError::Config("log-scaled x axis needs t > 0".into()));
    }
    let rows = thin(rows);
    let xval = |r: &AggRow| if log_x { r.t.log10() } else { r.t };
    let (mean, band): (Vec<f64>, Option<Vec<(f64, f64)>>) = match kind {
        PlotKind::Regret => (
            rows.iter().map(|r| r.mean_regret).collect(),
            Some(rows.iter().map(|r| (r.mean_regret - r.std_regret, r.mean_regret + r.std_regret)).collect()),
        ),
        PlotKind::Posterior => (rows.iter().map(|r| r.mean_posterior_mass_true).collect(), None),
    };

    let xs: Vec<f64> = rows.iter().map(xval).collect();
    let x_axis = Axis::new(xs[0], xs[xs.len() - 1]);
    let (mut y_lo, mut y_hi) = mean.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if let Some(b) = &band {
        for &(lo, hi) in b {
            y_lo = y_lo.min(lo);
            y_hi = y_hi.max(hi);
        }
    }
    if kind == PlotKind::Posterior {
        y_lo = y_lo.min(0.0);
        y_hi = y_hi.max(1.0);
    }
    let y_axis = Axis::new(y_lo, y_hi);
    let px = |x: f64| x_axis.map(x, LEFT, WIDTH - RIGHT);
    let py = |y: f64| y_axis.map(y, HEIGHT - BOTTOM, TOP);

    let (title, y_title) = match kind {
        PlotKind::Regret => ("Regret vs time", "mean regret"),
        PlotKind::Posterior => ("Posterior mass on the true model vs time", "mean posterior mass"),
    };
    let x_title = if log_x { "log10(t)" } else { "t" };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#, WIDTH / 2.0);

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<g id="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
        b = HEIGHT - BOTTOM,
        r = WIDTH - RIGHT
    );
    s.push_str("<g id=\"ticks\">\n");
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let xv = x_axis.lo + frac * (x_axis.hi - x_axis.lo);
        let yv = y_axis.lo + frac * (y_axis.hi - y_axis.lo);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(xv),
            HEIGHT - BOTTOM + 18.0,
            label(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py(yv) + 4.0,
            label(yv)
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_title}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{y_title}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0
    );

    if let Some(b) = &band {
        let mut pts: Vec<String> = xs.iter().zip(b).map(|(&x, &(_, hi))| format!("{:.2},{:.2}", px(x), py(hi))).collect();
        pts.extend(xs.iter().zip(b).rev().map(|(&x, &(lo, _))| format!("{:.2},{:.2}", px(x), py(lo))));
        let _ = writeln!(s, r#"<polygon id="band" fill="steelblue" fill-opacity="0.25" stroke="none" points="{}"/>"#, pts.join(" "));
    }
    let pts: Vec<String> = xs.iter().zip(&mean).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(s, r#"<polyline id="mean" fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
    s.push_str("</svg>\n");
    Ok(s)
}

/// `(x, y)` pixel coordinates of the mean polyline in a rendered document.
pub fn mean_polyline(svg: &str) -> Option<Vec<(f64, f64)>> {
    let start = svg.find(r#"<polyline id="mean""#)?;
    let rest = &svg[start..];
    let p = rest.find("points=\"")? + "points=\"".len();
    let end = rest[p..].find('"')?;
    rest[p..p + end]
        .split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some((x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(f: impl Fn(f64) -> f64) -> Vec<AggRow> {
        (1..=100)
            .map(|t| AggRow {
                t: t as f64,
                mean_regret: f(t as f64),
                std_regret: 0.5,
                mean_posterior_mass_true: 0.5,
            })
            .collect()
    }

    #[test]
    fn flat_zero_line() {
        let r: Vec<AggRow> = rows(|_| 0.0)
            .into_iter()
            .map(|mut r| {
                r.std_regret = 0.0;
                r
            })
            .collect();
        let svg = render(&r, PlotKind::Regret, false).unwrap();
        let line = mean_polyline(&svg).unwrap();
        let y0 = line[0].1;
        assert!(line.iter().all(|&(_, y)| y == y0));
        // y = 0 sits in the middle of the padded [-1, 1] range
        assert!((y0 - (TOP + HEIGHT - BOTTOM) / 2.0).abs() < 0.01);
    }

    #[test]
    fn monotone_data_gives_monotone_polyline() {
        let svg = render(&rows(|t| t.sqrt()), PlotKind::Regret, true).unwrap();
        let line = mean_polyline(&svg).unwrap();
        assert!(line.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].0 > w[0].0));
    }

    #[test]
    fn render_is_pure() {
        let r = rows(|t| (t * 0.1).sin());
        assert_eq!(render(&r, PlotKind::Regret, false).unwrap(), render(&r, PlotKind::Regret, false).unwrap());
        assert!(!render(&r, PlotKind::Posterior, false).unwrap().contains("id=\"band\""));
        assert!(render(&r, PlotKind::Regret, false).unwrap().contains("id=\"band\""));
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let xs: Vec<usize> = (0..10_001).collect();
        let t = thin(&xs);
        assert!(t.len() <= MAX_POINTS + 1);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 10_000);
    }
}
