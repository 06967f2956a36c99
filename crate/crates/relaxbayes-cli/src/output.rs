//! CSV tables tagged with a config hash, and a minimal SVG writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const HASH_COLUMN: &str = "config_hash";

/// Rows of string cells under a header; the hash column is added on write.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest round-trip decimal form; deterministic across runs.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, hash: &str) -> Result<()> {
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            msg: e.to_string(),
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(self.header.iter().map(String::as_str).chain([HASH_COLUMN]))
            .map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(String::as_str).chain([hash])).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Read a table written by [`Table::write`], rejecting any row whose hash differs from `hash`.
    pub fn read_checked(path: &Path, hash: &str) -> Result<Table> {
        let bad = |msg: String| Error::Csv {
            path: path.to_path_buf(),
            msg,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => bad(format!("{other:?}")),
        })?;
        let mut header: Vec<String> = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
        if header.last().map(String::as_str) != Some(HASH_COLUMN) {
            return Err(bad(format!("last column must be {HASH_COLUMN}")));
        }
        header.pop();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let mut row: Vec<String> = rec.iter().map(String::from).collect();
            let h = row.pop().unwrap_or_default();
            if h != hash {
                return Err(bad(format!("row {} has config hash {h}, expected {hash}", i + 1)));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column; empty cells become NaN.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self
            .column_index(name)
            .ok_or_else(|| Error::Config(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| {
                if r[k].is_empty() {
                    return Ok(f64::NAN);
                }
                r[k].parse::<f64>()
                    .map_err(|_| Error::Config(format!("column {name}: {} is not a number", r[k])))
            })
            .collect()
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

impl LinePlot {
    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter());
        let (x0, x1) = bounds(pts().map(|p| p.0));
        let (y0, y1) = bounds(pts().map(|p| p.1));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
        let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
        let mut s = svg_open(W, H);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(&self.title));
        axes(&mut s, (x0, x1), (y0, y1), &self.x_label, &self.y_label);
        for (k, series) in self.series.iter().enumerate() {
            let path: Vec<String> = series
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let color = PALETTE[k % PALETTE.len()];
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = MARGIN + 16.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{}</text>"#,
                W - MARGIN - 120.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn svg_open(w: f64, h: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn axes(s: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), x_label: &str, y_label: &str) {
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (x, y) = (l + f * (r - l), b - f * (b - t));
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle" font-size="10">{:.3}</text>"#, b + 14.0, x0 + f * (x1 - x0));
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end" font-size="10">{:.3}</text>"#, l - 4.0, y0 + f * (y1 - y0));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

/// Values on an `nx x ny` grid, row-major with `x` varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatPanel {
    pub title: String,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

/// Blue (low) through white to red (high).
fn diverging(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (40.0 + 215.0 * u, 90.0 + 165.0 * u, 200.0 + 55.0 * u)
    } else {
        let u = (t - 0.5) / 0.5;
        (255.0 - 40.0 * u, 255.0 - 215.0 * u, 255.0 - 215.0 * u)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Side-by-side heatmaps sharing a colour scale `[vmin, vmax]`.
pub fn heatmaps(title: &str, panels: &[HeatPanel], vmin: f64, vmax: f64) -> String {
    const SIDE: f64 = 220.0;
    const GAP: f64 = 20.0;
    let w = GAP + panels.len() as f64 * (SIDE + GAP);
    let h = SIDE + 80.0;
    let mut s = svg_open(w, h);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    for (k, p) in panels.iter().enumerate() {
        let ox = GAP + k as f64 * (SIDE + GAP);
        let oy = 50.0;
        let (cw, ch) = (SIDE / p.nx as f64, SIDE / p.ny as f64);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, ox + SIDE / 2.0, oy - 6.0, escape(&p.title));
        for i in 0..p.nx {
            for j in 0..p.ny {
                let v = p.values[i * p.ny + j];
                // y grows upwards.
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    ox + i as f64 * cw,
                    oy + (p.ny - 1 - j) as f64 * ch,
                    cw + 0.3,
                    ch + 0.3,
                    diverging((v - vmin) / (vmax - vmin))
                );
            }
        }
        let _ = writeln!(s, r#"<rect x="{ox}" y="{oy}" width="{SIDE}" height="{SIDE}" fill="none" stroke="black"/>"#);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="11">colour scale {vmin} (blue) to {vmax} (red)</text>"#,
        w / 2.0,
        h - 12.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("relaxbayes-cli-out-{}-{name}", std::process::id()))
    }

    #[test]
    fn table_round_trip_and_hash_check() {
        let mut t = Table::new(&["a", "note"]);
        t.push(vec![num(0.1), "x, \"quoted\"".into()]);
        t.push(vec![num(-2.5e-9), String::new()]);
        let p = tmp("t.csv");
        t.write(&p, "abc").unwrap();
        let back = Table::read_checked(&p, "abc").unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("a").unwrap(), vec![0.1, -2.5e-9]);
        let err = Table::read_checked(&p, "abd").unwrap_err();
        assert!(err.to_string().contains("expected abd"), "{err}");
        std::fs::remove_file(&p).unwrap();
    }

    #[test]
    fn svg_is_well_formed() {
        let plot = LinePlot {
            title: "a < b & c".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                name: "s".into(),
                points: vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)],
            }],
        };
        roxmltree::Document::parse(&plot.render()).unwrap();
        let panel = HeatPanel {
            title: "p".into(),
            nx: 2,
            ny: 3,
            values: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        };
        let doc = heatmaps("h", &[panel.clone(), panel], 0.0, 1.0);
        let parsed = roxmltree::Document::parse(&doc).unwrap();
        let cells = parsed.descendants().filter(|n| n.has_tag_name("rect")).count();
        // background + 2 x (6 cells + frame)
        assert_eq!(cells, 1 + 2 * 7);
    }

    #[test]
    fn palette_endpoints() {
        assert_eq!(diverging(0.5), "#ffffff");
        assert_eq!(diverging(0.0), "#285ac8");
        assert_eq!(diverging(1.0), "#d72828");
    }
}
