//! Field files, CSV traces, JSON and SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fracac_core::{Real, ScalarField};

/// Experiment-scoped output directory; records every file it writes.
pub struct Sink {
    dir: PathBuf,
    written: Vec<String>,
}

impl Sink {
    pub fn create(root: &Path, experiment: &str) -> std::io::Result<Self> {
        let dir = root.join(experiment);
        fs::create_dir_all(&dir)?;
        Ok(Sink { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl serde::Serialize) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// `x1[,x2[,x3]],value` per node.
pub fn field_csv<T: Real>(u: &ScalarField<T>) -> String {
    let n = u.grid.dimension();
    let mut out = String::new();
    for a in 0..n {
        let _ = write!(out, "x{},", a + 1);
    }
    out.push_str("value\n");
    for i in 0..u.grid.len() {
        let p = u.grid.point(i);
        for c in p.iter().take(n) {
            let _ = write!(out, "{:.16e},", c.f64());
        }
        let _ = writeln!(out, "{:.16e}", u.values[i].f64());
    }
    out
}

/// `abscissa,value,error_bar` rows.
pub fn trace_csv(xs: &[f64], ys: &[f64], bars: &[f64]) -> String {
    let mut out = String::from("abscissa,value,error_bar\n");
    for k in 0..xs.len() {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", xs[k], ys[k], bars.get(k).copied().unwrap_or(0.0));
    }
    out
}

/// Minimal SVG line chart; log axes drop nonpositive points.
pub fn svg_line_plot(title: &str, series: &[(&str, &[f64], &[f64])], log_x: bool, log_y: bool) -> String {
    let (w, h, pad) = (640.0, 420.0, 56.0);
    let tx = |v: f64| if log_x { v.ln() } else { v };
    let ty = |v: f64| if log_y { v.ln() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, xs, ys)| {
            xs.iter()
                .zip(ys.iter())
                .filter(|(x, y)| (!log_x || **x > 0.0) && (!log_y || **y > 0.0) && x.is_finite() && y.is_finite())
                .map(|(x, y)| (tx(*x), ty(*y)))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-300 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let label = |v: f64, log: bool| if log { format!("{:.3e}", v.exp()) } else { format!("{v:.3e}") };
    let _ = writeln!(out, r#"<text x="{pad}" y="{}" text-anchor="start">{}</text>"#, h - pad + 16.0, label(x0, log_x));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - pad, h - pad + 16.0, label(x1, log_x));
    let _ = writeln!(out, r#"<text x="4" y="{}">{}</text>"#, h - pad, label(y0, log_y));
    let _ = writeln!(out, r#"<text x="4" y="{}">{}</text>"#, pad + 4.0, label(y1, log_y));
    for (k, line) in pts.iter().enumerate() {
        let color = colors[k % colors.len()];
        if line.is_empty() {
            continue;
        }
        let d: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(j, (x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(out, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.join(" "));
        for (x, y) in line {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y));
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - pad - 120.0,
            pad + 16.0 * (k as f64 + 1.0),
            escape(series[k].0)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
