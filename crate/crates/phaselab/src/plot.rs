//! Static SVG rendering of the two standard figures: the phase diagram
//! (threshold curves over density, with an optional worst-case inset) and
//! the finite-size extrapolation of the empirical transition.
//!
//! The renderer is deliberately dependency-free: plots are polylines,
//! markers and text in a fixed viewport, written as SVG 1.1.

use std::fmt::Write as _;
use std::io::BufRead;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("series {0:?} has no points")]
    EmptySeries(String),
    #[error("axis range is not finite")]
    BadRange,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    Line,
    /// Circle markers with optional error bars.
    Circles,
    /// Triangle markers with optional error bars.
    Triangles,
    /// A dashed reference line.
    Dashed,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Per-point half-height of an error bar, aligned with `points`.
    pub y_err: Option<Vec<f64>>,
    pub style: SeriesStyle,
    pub color: &'static str,
}

impl Series {
    pub fn line(label: &str, points: Vec<(f64, f64)>, color: &'static str) -> Self {
        Series { label: label.to_string(), points, y_err: None, style: SeriesStyle::Line, color }
    }
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
    /// A small secondary panel drawn in the upper-left corner.
    pub inset: Option<Box<PlotSpec>>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 18.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 50.0;

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let fx = (x - self.x_range.0) / (self.x_range.1 - self.x_range.0);
        let fy = (y - self.y_range.0) / (self.y_range.1 - self.y_range.0);
        (self.x0 + fx * self.w, self.y0 + self.h - fy * self.h)
    }
}

fn ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| lo + (hi - lo) * i as f64 / count as f64)
        .collect()
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (0.001..10000.0).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<(), PlotError> {
        for s in &self.series {
            if s.points.is_empty() {
                return Err(PlotError::EmptySeries(s.label.clone()));
            }
        }
        for v in [self.x_range.0, self.x_range.1, self.y_range.0, self.y_range.1] {
            if !v.is_finite() {
                return Err(PlotError::BadRange);
            }
        }
        if self.x_range.0 >= self.x_range.1 || self.y_range.0 >= self.y_range.1 {
            return Err(PlotError::BadRange);
        }
        if let Some(inset) = &self.inset {
            inset.validate()?;
        }
        Ok(())
    }

    /// Render the figure as a self-contained SVG 1.1 document.
    pub fn to_svg(&self) -> Result<String, PlotError> {
        self.validate()?;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
             width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let frame = Frame {
            x0: MARGIN_L,
            y0: MARGIN_T,
            w: WIDTH - MARGIN_L - MARGIN_R,
            h: HEIGHT - MARGIN_T - MARGIN_B,
            x_range: self.x_range,
            y_range: self.y_range,
        };
        self.render_into(&mut out, &frame, true);

        if let Some(inset) = &self.inset {
            let iframe = Frame {
                x0: MARGIN_L + 36.0,
                y0: MARGIN_T + 20.0,
                w: 200.0,
                h: 150.0,
                x_range: inset.x_range,
                y_range: inset.y_range,
            };
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\" stroke=\"black\" stroke-width=\"0.8\"/>",
                iframe.x0, iframe.y0, iframe.w, iframe.h
            );
            inset.render_into(&mut out, &iframe, false);
        }

        let _ = writeln!(out, "</svg>");
        Ok(out)
    }

    fn render_into(&self, out: &mut String, frame: &Frame, full_decorations: bool) {
        // Axes box.
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>",
            frame.x0, frame.y0, frame.w, frame.h
        );
        let tick_count = if full_decorations { 5 } else { 2 };
        let font = if full_decorations { 12.0 } else { 9.0 };
        for t in ticks(frame.x_range.0, frame.x_range.1, tick_count) {
            let (px, _) = frame.map(t, frame.y_range.0);
            let y1 = frame.y0 + frame.h;
            let _ = writeln!(
                out,
                "<line x1=\"{px}\" y1=\"{y1}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\" stroke-width=\"0.7\"/>",
                y1 - 4.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{px}\" y=\"{}\" font-size=\"{font}\" text-anchor=\"middle\">{}</text>",
                y1 + font + 3.0,
                format_tick(t)
            );
        }
        for t in ticks(frame.y_range.0, frame.y_range.1, tick_count) {
            let (_, py) = frame.map(frame.x_range.0, t);
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"black\" stroke-width=\"0.7\"/>",
                frame.x0,
                frame.x0 + 4.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"{font}\" text-anchor=\"end\">{}</text>",
                frame.x0 - 5.0,
                py + font * 0.35,
                format_tick(t)
            );
        }
        if full_decorations {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
                frame.x0 + frame.w / 2.0,
                HEIGHT - 12.0,
                xml_escape(&self.x_label)
            );
            let _ = writeln!(
                out,
                "<text x=\"16\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
                frame.y0 + frame.h / 2.0,
                frame.y0 + frame.h / 2.0,
                xml_escape(&self.y_label)
            );
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
                frame.x0 + frame.w / 2.0,
                MARGIN_T - 12.0,
                xml_escape(&self.title)
            );
        }

        for (idx, series) in self.series.iter().enumerate() {
            self.render_series(out, frame, series);
            if full_decorations {
                // Legend entry in the upper-right corner of the frame.
                let lx = frame.x0 + frame.w - 170.0;
                let ly = frame.y0 + 16.0 + 16.0 * idx as f64;
                let _ = writeln!(
                    out,
                    "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"{}/>",
                    lx + 22.0,
                    series.color,
                    if series.style == SeriesStyle::Dashed {
                        " stroke-dasharray=\"6 4\""
                    } else {
                        ""
                    }
                );
                let _ = writeln!(
                    out,
                    "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>",
                    lx + 28.0,
                    ly + 4.0,
                    xml_escape(&series.label)
                );
            }
        }
    }

    fn render_series(&self, out: &mut String, frame: &Frame, series: &Series) {
        let id = sanitize_id(&series.label);
        let _ = writeln!(out, "<g class=\"series\" id=\"{id}\">");
        if let Some(errs) = &series.y_err {
            for (&(x, y), &e) in series.points.iter().zip(errs) {
                let (px, p_lo) = frame.map(x, y - e);
                let (_, p_hi) = frame.map(x, y + e);
                let _ = writeln!(
                    out,
                    "<line x1=\"{px}\" y1=\"{p_lo}\" x2=\"{px}\" y2=\"{p_hi}\" stroke=\"{}\" stroke-width=\"1\"/>",
                    series.color
                );
            }
        }
        match series.style {
            SeriesStyle::Line | SeriesStyle::Dashed => {
                let mut path = String::new();
                for &(x, y) in &series.points {
                    let (px, py) = frame.map(x, y);
                    let _ = write!(path, "{px:.2},{py:.2} ");
                }
                let dash = if series.style == SeriesStyle::Dashed {
                    " stroke-dasharray=\"6 4\""
                } else {
                    ""
                };
                let _ = writeln!(
                    out,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"{dash}/>",
                    path.trim_end(),
                    series.color
                );
            }
            SeriesStyle::Circles => {
                for &(x, y) in &series.points {
                    let (px, py) = frame.map(x, y);
                    let _ = writeln!(
                        out,
                        "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3.5\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                        series.color
                    );
                }
            }
            SeriesStyle::Triangles => {
                for &(x, y) in &series.points {
                    let (px, py) = frame.map(x, y);
                    let _ = writeln!(
                        out,
                        "<path d=\"M {} {} L {} {} L {} {} Z\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                        px - 4.0,
                        py + 3.5,
                        px + 4.0,
                        py + 3.5,
                        px,
                        py - 4.5,
                        series.color
                    );
                }
            }
        }
        let _ = writeln!(out, "</g>");
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn sanitize_id(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

/// Assemble the phase-diagram figure: the three threshold curves over
/// density, with the worst-case bound as an inset when provided.
pub fn phase_diagram_figure(
    l0: Vec<(f64, f64)>,
    l1: Vec<(f64, f64)>,
    l2: Vec<(f64, f64)>,
    worst_case: Option<Vec<(f64, f64)>>,
) -> PlotSpec {
    let inset = worst_case.map(|points| {
        let x_hi = points.iter().map(|p| p.0).fold(0.0f64, f64::max) * 1.05;
        let y_hi = points.iter().map(|p| p.1).fold(0.0f64, f64::max) * 1.05;
        Box::new(PlotSpec {
            title: String::new(),
            x_label: String::new(),
            y_label: String::new(),
            x_range: (0.0, x_hi.max(1e-6)),
            y_range: (0.0, y_hi.max(1e-6)),
            series: vec![Series::line("worst case", points, "#7a1fa2")],
            inset: None,
        })
    });
    PlotSpec {
        title: "Reconstruction limits".to_string(),
        x_label: "density rho".to_string(),
        y_label: "compression rate alpha".to_string(),
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.05),
        series: vec![
            Series::line("p = 0", l0, "#1a67c4"),
            Series::line("p = 1", l1, "#c43c1a"),
            Series::line("p = 2", l2, "#1a9946"),
        ],
        inset,
    }
}

/// Assemble the finite-size figure: empirical transitions against `1/N`,
/// the quadratic fit, and the extrapolated intercept marker at `1/N = 0`.
pub fn finite_size_figure(
    gaussian: Vec<(usize, f64, f64)>,
    orthogonal: Option<Vec<(usize, f64, f64)>>,
    fit_coeffs: &[f64],
    intercept: f64,
) -> PlotSpec {
    let to_points = |rows: &[(usize, f64, f64)]| -> (Vec<(f64, f64)>, Vec<f64>) {
        let pts = rows.iter().map(|&(n, a, _)| (1.0 / n as f64, a)).collect();
        let errs = rows.iter().map(|&(_, _, e)| e).collect();
        (pts, errs)
    };
    let (pts_a, errs_a) = to_points(&gaussian);
    let x_max = pts_a.iter().map(|p| p.0).fold(0.0f64, f64::max) * 1.1;
    let mut all_y: Vec<f64> = pts_a.iter().map(|p| p.1).collect();

    let mut series = Vec::new();
    let fit_points: Vec<(f64, f64)> = (0..=100)
        .map(|i| {
            let x = x_max * i as f64 / 100.0;
            let y: f64 = fit_coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * x.powi(k as i32))
                .sum();
            (x, y)
        })
        .collect();
    all_y.extend(fit_points.iter().map(|p| p.1));
    series.push(Series {
        label: "quadratic fit".to_string(),
        points: fit_points,
        y_err: None,
        style: SeriesStyle::Dashed,
        color: "#777777",
    });
    series.push(Series {
        label: "gaussian ensemble".to_string(),
        points: pts_a,
        y_err: Some(errs_a),
        style: SeriesStyle::Circles,
        color: "#1a67c4",
    });
    if let Some(rows) = orthogonal {
        let (pts_b, errs_b) = to_points(&rows);
        all_y.extend(pts_b.iter().map(|p| p.1));
        series.push(Series {
            label: "row-orthogonal ensemble".to_string(),
            points: pts_b,
            y_err: Some(errs_b),
            style: SeriesStyle::Triangles,
            color: "#c43c1a",
        });
    }
    // Intercept marker at 1/N = 0.
    series.push(Series {
        label: "extrapolated limit".to_string(),
        points: vec![(0.0, intercept)],
        y_err: None,
        style: SeriesStyle::Circles,
        color: "#000000",
    });
    all_y.push(intercept);

    let y_lo = all_y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_hi = all_y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (y_hi - y_lo).max(1e-3);
    PlotSpec {
        title: "Finite-size transition".to_string(),
        x_label: "1 / N".to_string(),
        y_label: "empirical alpha_c".to_string(),
        x_range: (-0.02 * x_max, x_max),
        y_range: (y_lo - pad, y_hi + pad),
        series,
        inset: None,
    }
}

/// Parse a two-column `rho,alpha_c` curve CSV (the theory command's output
/// format). Lines starting with `#` record gaps and are skipped.
pub fn read_curve_csv(r: &mut impl BufRead) -> Result<Vec<(f64, f64)>, PlotError> {
    let mut points = Vec::new();
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if trimmed != "rho,alpha_c" {
                return Err(PlotError::Parse {
                    line: idx + 1,
                    message: format!("expected header \"rho,alpha_c\", got {trimmed:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let (a, b) = trimmed.split_once(',').ok_or(PlotError::Parse {
            line: idx + 1,
            message: "expected two comma-separated fields".to_string(),
        })?;
        let parse = |s: &str| -> Result<f64, PlotError> {
            s.parse().map_err(|e| PlotError::Parse {
                line: idx + 1,
                message: format!("bad float {s:?}: {e}"),
            })
        };
        points.push((parse(a)?, parse(b)?));
    }
    if !saw_header {
        return Err(PlotError::Parse { line: 1, message: "empty curve file".to_string() });
    }
    Ok(points)
}
