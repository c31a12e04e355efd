//! Tabular and SVG writers. Output is a pure function of its inputs.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use super::format::{fmt_data, fmt_svg};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_data(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(fmt_data(*x)),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Ordered key/value metadata written ahead of the data.
#[derive(Debug, Clone, Default)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn push(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn to_csv(meta: &Metadata, table: &Table) -> Result<String> {
    let mut out = String::new();
    for (k, v) in &meta.0 {
        writeln!(out, "# {k}: {v}").expect("string write");
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.columns).map_err(|e| Error::Io(e.to_string()))?;
    for r in &table.rows {
        w.write_record(r.iter().map(Cell::render)).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?);
    Ok(out)
}

pub fn to_json(meta: &Metadata, table: &Table) -> Result<String> {
    let mut m = Map::new();
    for (k, v) in &meta.0 {
        m.insert(k.clone(), json!(v));
    }
    let rows: Vec<Value> = table.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
    let doc = json!({ "metadata": Value::Object(m), "columns": table.columns, "rows": rows });
    Ok(serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))? + "\n")
}

/// Reads a CSV with `#` comment lines and a header row; returns the named columns.
pub fn read_columns(text: &str, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| header.iter().position(|h| h == *n).ok_or_else(|| Error::InvalidInput(format!("missing column '{n}'"))))
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        for (c, &i) in idx.iter().enumerate() {
            let s = rec.get(i).unwrap_or("");
            let v: f64 = s.parse().map_err(|_| Error::InvalidInput(format!("column '{}' has non-numeric value '{s}'", names[c])))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

/// Everything the SVG writer knows how to draw.
#[derive(Debug, Clone)]
pub enum Dataset {
    /// Named polylines in the plane.
    Curves { xlabel: String, ylabel: String, series: Vec<(String, Vec<(f64, f64)>)> },
    /// Two-colour raster, row-major with rows along y; optional overlays.
    Grid {
        x_range: (f64, f64),
        y_range: (f64, f64),
        nx: usize,
        ny: usize,
        stable: Vec<bool>,
        overlay: Vec<Vec<(f64, f64)>>,
    },
    /// Shaded triangles with values in [-1, 1].
    Field { triangles: Vec<([[f64; 2]; 3], f64)> },
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points.filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        Frame { x: (x0, x1), y: (y0, y1) }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn header(out: &mut String, meta: &Metadata) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        W, H, W, H
    ));
    out.push_str("<!--\n");
    for (k, v) in &meta.0 {
        out.push_str(&format!("{k}: {}\n", v.replace("--", "- -")));
    }
    out.push_str("-->\n");
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    out.push_str(&format!(
        "<rect x=\"{p}\" y=\"{p}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#000\"/>\n",
        p = PAD,
        w = W - 2.0 * PAD,
        h = H - 2.0 * PAD
    ));
    let t = |x: f64, y: f64, anchor: &str, s: &str| {
        format!("<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"{anchor}\">{s}</text>\n", fmt_svg(x), fmt_svg(y))
    };
    out.push_str(&t(PAD, H - PAD + 14.0, "start", &fmt_svg(f.x.0)));
    out.push_str(&t(W - PAD, H - PAD + 14.0, "end", &fmt_svg(f.x.1)));
    out.push_str(&t(PAD - 4.0, H - PAD, "end", &fmt_svg(f.y.0)));
    out.push_str(&t(PAD - 4.0, PAD + 8.0, "end", &fmt_svg(f.y.1)));
    out.push_str(&t(W / 2.0, H - 12.0, "middle", xlabel));
    out.push_str(&t(14.0, H / 2.0, "middle", ylabel));
}

fn polyline(out: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, class: &str) {
    let mut s = String::new();
    for &(x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        if !s.is_empty() {
            s.push(' ');
        }
        s.push_str(&format!("{},{}", fmt_svg(f.px(x)), fmt_svg(f.py(y))));
    }
    out.push_str(&format!("<polyline class=\"{class}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{s}\"/>\n"));
}

fn shade(v: f64) -> String {
    // blue (-1) through white (0) to red (+1)
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

pub fn export_svg(meta: &Metadata, data: &Dataset) -> String {
    let mut out = String::new();
    header(&mut out, meta);
    match data {
        Dataset::Curves { xlabel, ylabel, series } => {
            let f = Frame::fit(series.iter().flat_map(|(_, p)| p.iter().copied()));
            axes(&mut out, &f, xlabel, ylabel);
            for (i, (name, pts)) in series.iter().enumerate() {
                out.push_str(&format!("<g><title>{name}</title>\n"));
                polyline(&mut out, &f, pts, PALETTE[i % PALETTE.len()], "curve");
                out.push_str("</g>\n");
            }
        }
        Dataset::Grid { x_range, y_range, nx, ny, stable, overlay } => {
            let f = Frame { x: *x_range, y: *y_range };
            let cw = (W - 2.0 * PAD) / *nx as f64;
            let ch = (H - 2.0 * PAD) / *ny as f64;
            for j in 0..*ny {
                for i in 0..*nx {
                    let fill = if stable[j * nx + i] { "#ffffff" } else { "#9ecae1" };
                    out.push_str(&format!(
                        "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"/>\n",
                        fmt_svg(PAD + i as f64 * cw),
                        fmt_svg(H - PAD - (j + 1) as f64 * ch),
                        fmt_svg(cw),
                        fmt_svg(ch)
                    ));
                }
            }
            axes(&mut out, &f, "delta", "eps");
            for (i, c) in overlay.iter().enumerate() {
                polyline(&mut out, &f, c, PALETTE[i % PALETTE.len()], "curve");
            }
        }
        Dataset::Field { triangles } => {
            let half = 0.45 * (W - 2.0 * PAD) / (H - 2.0 * PAD);
            let f = Frame { x: (0.5 - half, 0.5 + half), y: (0.0, 0.9) };
            for (tri, v) in triangles {
                let pts: Vec<String> = tri.iter().map(|p| format!("{},{}", fmt_svg(f.px(p[0])), fmt_svg(f.py(p[1])))).collect();
                out.push_str(&format!("<polygon class=\"cell\" points=\"{}\" fill=\"{}\"/>\n", pts.join(" "), shade(*v)));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
