//! SVG charts with JSON sidecars holding the plotted numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::EngineError;
use crate::analysis::{AcfResult, Decomposition, PacfResult};
use crate::series::TimeSeries;

/// The analysis outcome a plot is drawn from.
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Series(&'a TimeSeries),
    Acf(&'a AcfResult),
    Pacf(&'a PacfResult),
    Decomposition(&'a Decomposition, &'a TimeSeries),
}

impl PlotSource<'_> {
    fn kind(&self) -> &'static str {
        match self {
            PlotSource::Series(_) => "TimeSeries",
            PlotSource::Acf(_) => "AcfResult",
            PlotSource::Pacf(_) => "PacfResult",
            PlotSource::Decomposition(..) => "Decomposition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlotArtifact {
    pub plot: String,
    /// Paths relative to the run directory.
    pub svg_path: String,
    pub data_path: String,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

enum Mark {
    Line,
    Stem,
}

struct Panel<'a> {
    label: &'a str,
    x: Vec<f64>,
    y: &'a [f64],
    mark: Mark,
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

/// Draws stacked panels sharing the full width.
fn svg(title: &str, panels: &[Panel]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    let band = (HEIGHT - MARGIN - 24.0) / panels.len() as f64;
    for (k, p) in panels.iter().enumerate() {
        let top = 32.0 + k as f64 * band;
        let bottom = top + band - 16.0;
        let (x0, x1) = bounds(p.x.iter().copied());
        let (mut y0, mut y1) = bounds(p.y.iter().copied());
        if matches!(p.mark, Mark::Stem) {
            y0 = y0.min(0.0);
            y1 = y1.max(0.0);
        }
        let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |v: f64| bottom - (v - y0) / (y1 - y0) * (bottom - top);
        let _ = writeln!(
            out,
            r#"<g class="panel"><line x1="{MARGIN}" y1="{bottom:.2}" x2="{:.2}" y2="{bottom:.2}" stroke="black"/><line x1="{MARGIN}" y1="{top:.2}" x2="{MARGIN}" y2="{bottom:.2}" stroke="black"/>"#,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="4" y="{:.2}" font-family="sans-serif" font-size="10">{}</text><text x="4" y="{:.2}" font-family="sans-serif" font-size="9">{:.4}</text><text x="4" y="{bottom:.2}" font-family="sans-serif" font-size="9">{:.4}</text>"#,
            top - 2.0,
            p.label,
            top + 10.0,
            y1,
            y0
        );
        match p.mark {
            Mark::Line => {
                // NaN points break the line into segments
                let mut segment = Vec::new();
                let flush = |seg: &mut Vec<String>, out: &mut String| {
                    if !seg.is_empty() {
                        let _ = writeln!(
                            out,
                            r#"<polyline fill="none" stroke="steelblue" points="{}"/>"#,
                            seg.join(" ")
                        );
                        seg.clear();
                    }
                };
                for (x, y) in p.x.iter().zip(p.y) {
                    if y.is_finite() {
                        segment.push(format!("{:.2},{:.2}", sx(*x), sy(*y)));
                    } else {
                        flush(&mut segment, &mut out);
                    }
                }
                flush(&mut segment, &mut out);
            }
            Mark::Stem => {
                let zero = sy(0.0);
                for (x, y) in p.x.iter().zip(p.y) {
                    let _ = writeln!(
                        out,
                        r#"<line class="stem" x1="{:.2}" y1="{zero:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue"/>"#,
                        sx(*x),
                        sx(*x),
                        sy(*y)
                    );
                }
            }
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    out
}

fn index_axis(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn lags_axis(lags: &[usize]) -> Vec<f64> {
    lags.iter().map(|l| *l as f64).collect()
}

/// Writes `<stem>.svg` and `<stem>.json` under `dir/plots`.
pub fn render_plot(
    curie: &str,
    source: PlotSource,
    run_dir: &Path,
    stem: &str,
) -> Result<PlotArtifact, EngineError> {
    let local = curie.strip_prefix("tswf:").unwrap_or(curie);
    let mismatch = || EngineError::TypeMismatch {
        plot: curie.to_string(),
        found: source.kind().to_string(),
    };
    let (panels, data): (Vec<Panel>, Value) = match (local, source) {
        ("PlotRegular", PlotSource::Series(ts)) => (
            vec![Panel {
                label: ts.name.as_str(),
                x: index_axis(ts.len()),
                y: &ts.values,
                mark: Mark::Line,
            }],
            json!({"name": ts.name, "values": ts.values}),
        ),
        ("PlotACF", PlotSource::Acf(a)) => (
            vec![Panel {
                label: "acf",
                x: lags_axis(&a.lags),
                y: &a.rho,
                mark: Mark::Stem,
            }],
            json!({"lags": a.lags, "values": a.rho, "ci_halfwidth": a.ci_halfwidth}),
        ),
        ("PlotPACF", PlotSource::Pacf(p)) => (
            vec![Panel {
                label: "pacf",
                x: lags_axis(&p.lags),
                y: &p.phi_kk,
                mark: Mark::Stem,
            }],
            json!({"lags": p.lags, "values": p.phi_kk}),
        ),
        ("PlotSTL", PlotSource::Decomposition(d, ts)) => {
            let x = index_axis(ts.len());
            (
                vec![
                    Panel { label: "observed", x: x.clone(), y: &ts.values, mark: Mark::Line },
                    Panel { label: "trend", x: x.clone(), y: &d.trend, mark: Mark::Line },
                    Panel { label: "seasonal", x: x.clone(), y: &d.seasonal, mark: Mark::Line },
                    Panel { label: "remainder", x, y: &d.remainder, mark: Mark::Line },
                ],
                json!({
                    "period": d.period,
                    "observed": ts.values,
                    "trend": d.trend,
                    "seasonal": d.seasonal,
                    "remainder": d.remainder,
                }),
            )
        }
        _ => return Err(mismatch()),
    };

    let plots = run_dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| EngineError::io(&plots, e))?;
    let svg_rel = format!("plots/{stem}.svg");
    let data_rel = format!("plots/{stem}.json");
    let svg_path = run_dir.join(&svg_rel);
    fs::write(&svg_path, svg(curie, &panels)).map_err(|e| EngineError::io(&svg_path, e))?;
    let data_path = run_dir.join(&data_rel);
    let text = serde_json::to_string_pretty(&data).expect("plot data serializes");
    fs::write(&data_path, text + "\n").map_err(|e| EngineError::io(&data_path, e))?;
    Ok(PlotArtifact {
        plot: curie.to_string(),
        svg_path: svg_rel,
        data_path: data_rel,
    })
}
