//! Static SVG figures: embedding scatter plots and per-space RMSE bar charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::data::{Embedding, StimulusId};
use crate::error::{Error, Result};
use crate::eval::{StudyPredictor, StudyReport};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Maps a data interval onto a pixel interval; a degenerate interval maps to its middle.
#[derive(Debug, Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        Scale {
            lo: lo - pad,
            hi: hi + pad,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScatterOptions {
    /// Dimension pair to project onto.
    pub axes: (usize, usize),
    /// Optional `stimulus → image href` drawn next to each marker.
    pub thumbnails: BTreeMap<StimulusId, String>,
    pub title: Option<String>,
}

/// One `<circle class="marker">` per stimulus, projected onto `axes`.
pub fn scatter_svg(embedding: &Embedding, opts: &ScatterOptions) -> Result<String> {
    let d = embedding.dims();
    if d < 2 {
        return Err(Error::ScatterDims(d));
    }
    let (ax, ay) = opts.axes;
    if ax >= d || ay >= d || ax == ay {
        return Err(Error::InvalidConfig(format!(
            "axes ({ax}, {ay}) must be two distinct dims below {d}"
        )));
    }
    let coords = embedding.coords();
    let xs = Scale::new(coords.column(ax).iter().copied(), MARGIN, WIDTH - MARGIN);
    // SVG y grows downwards.
    let ys = Scale::new(coords.column(ay).iter().copied(), HEIGHT - MARGIN, MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(t) = &opts.title {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
            WIDTH / 2.0,
            escape(t)
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14">dim_{ax}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="20" y="{}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {})">dim_{ay}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, id) in embedding.ids().iter().enumerate() {
        let px = xs.map(coords[(i, ax)]);
        let py = ys.map(coords[(i, ay)]);
        if let Some(href) = opts.thumbnails.get(id) {
            let _ = writeln!(
                s,
                r#"<image x="{:.3}" y="{:.3}" width="32" height="32" xlink:href="{}"/>"#,
                px + 4.0,
                py - 36.0,
                escape(href)
            );
        }
        let _ = writeln!(
            s,
            r##"<circle class="marker" data-id="{}" cx="{px:.3}" cy="{py:.3}" r="4" fill="#1f77b4"><title>{}</title></circle>"##,
            escape(id.as_str()),
            escape(id.as_str())
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

const BAR_COLORS: [&str; 6] = [
    "#9e9e9e", "#bdbdbd", "#e0a060", "#e6c07b", "#e15759", "#4e79a7",
];

/// Test RMSE per predictor for one space, with ±1 stddev whiskers across runs.
pub fn bar_chart_svg(report: &StudyReport, dims: usize) -> Result<String> {
    let cells: Vec<_> = StudyPredictor::ALL
        .iter()
        .filter_map(|&p| report.cell(dims, p))
        .collect();
    if cells.is_empty() {
        return Err(Error::MissingInput(format!("no {dims}D results in report")));
    }
    let top = cells
        .iter()
        .map(|c| c.mean_test() + c.stddev_test())
        .fold(0.0_f64, f64::max)
        .max(1e-12)
        * 1.1;
    let plot_h = HEIGHT - 2.0 * MARGIN - 60.0;
    let base_y = MARGIN + plot_h;
    let slot = (WIDTH - 2.0 * MARGIN) / cells.len() as f64;
    let bar_w = slot * 0.6;
    let y_of = |v: f64| base_y - v / top * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">Test RMSE, {dims}D space ({} runs)</text>"#,
        WIDTH / 2.0,
        report.runs
    );
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{base_y}" x2="{}" y2="{base_y}" stroke="#444"/>"##,
        WIDTH - MARGIN
    );
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{y:.3}" x2="{}" y2="{y:.3}" stroke="#ddd"/><text x="{}" y="{:.3}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"##,
            WIDTH - MARGIN,
            MARGIN - 6.0,
            y + 4.0
        );
    }
    for (i, c) in cells.iter().enumerate() {
        let m = c.mean_test();
        let sd = c.stddev_test();
        let x = MARGIN + slot * i as f64 + (slot - bar_w) / 2.0;
        let color = BAR_COLORS[StudyPredictor::ALL
            .iter()
            .position(|&p| p == c.predictor)
            .unwrap_or(0)];
        let _ = writeln!(
            s,
            r#"<rect class="bar" data-predictor="{}" x="{x:.3}" y="{:.3}" width="{bar_w:.3}" height="{:.3}" fill="{color}"><title>{}: {m:.4}</title></rect>"#,
            c.predictor,
            y_of(m),
            base_y - y_of(m),
            c.predictor
        );
        let cx = x + bar_w / 2.0;
        let _ = writeln!(
            s,
            r##"<line x1="{cx:.3}" y1="{:.3}" x2="{cx:.3}" y2="{:.3}" stroke="#222"/>"##,
            y_of(m + sd),
            y_of((m - sd).max(0.0))
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.3}" y="{:.3}" text-anchor="end" font-family="sans-serif" font-size="11" transform="rotate(-35 {cx:.3} {:.3})">{}</text>"#,
            base_y + 16.0,
            base_y + 16.0,
            c.predictor
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}
