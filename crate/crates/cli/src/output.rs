//! Run directories: lock file, CSV tables, SVG plots and the manifest.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use effspin::analysis::ExpFit;
use serde::Serialize;
use serde_json::{json, Map, Value};

pub const CSV_SCHEMA: u32 = 1;
const LOCK: &str = ".effspin.lock";

/// One output directory owned by this process until dropped.
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
    lock: PathBuf,
}

impl RunDir {
    pub fn open(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        let lock = path.join(LOCK);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .with_context(|| format!("{} is in use by another run (remove {LOCK} if stale)", path.display()))?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self {
            path: path.to_path_buf(),
            outputs: Vec::new(),
            lock,
        })
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.path.join(name)
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let path = self.file(name);
        let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        writeln!(f, "# schema={CSV_SCHEMA}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.file(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_plot(&mut self, name: &str, plot: &LogPlot) -> Result<()> {
        let svg = plot.render();
        self.write_text(name, &svg)
    }

    /// Writes `manifest.json` listing every output written so far.
    pub fn finish(mut self, manifest: Manifest) -> Result<()> {
        let mut m = Map::new();
        m.insert("command".into(), json!(manifest.command));
        m.insert("version".into(), json!(effspin::VERSION));
        m.insert("status".into(), json!(manifest.status));
        m.insert("config".into(), manifest.config);
        m.insert("results".into(), Value::Object(manifest.results));
        m.insert("warnings".into(), json!(manifest.warnings));
        self.outputs.sort();
        m.insert("outputs".into(), json!(self.outputs));
        let text = serde_json::to_string_pretty(&Value::Object(m))? + "\n";
        fs::write(self.path.join("manifest.json"), text)?;
        Ok(())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

pub struct Manifest {
    pub command: String,
    pub status: &'static str,
    pub config: Value,
    pub results: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            status: "ok",
            config: serde_json::to_value(config)?,
            results: Map::new(),
            warnings: Vec::new(),
        })
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

/// Points on a log-linear plot with an optional fitted line.
pub struct LogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<ExpFit>,
}

impl LogPlot {
    pub fn render(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(_, y)| y.abs() > 0.0 && y.is_finite())
            .map(|&(x, y)| (x, y.abs().log10()))
            .collect();
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n",
            w / 2.0,
            escape(&self.title)
        );
        if pts.is_empty() {
            out.push_str("</svg>\n");
            return out;
        }
        let x0 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let x1 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let y0 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor();
        let y1 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil().max(y0 + 1.0);
        let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        out.push_str(&format!(
            "<path d=\"M{pad} {} H{} M{pad} {} V{pad}\" stroke=\"black\" fill=\"none\"/>\n",
            h - pad,
            w - pad,
            h - pad
        ));
        for k in (y0 as i64)..=(y1 as i64) {
            let y = sy(k as f64);
            out.push_str(&format!(
                "<line x1=\"{pad}\" y1=\"{y:.2}\" x2=\"{}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n\
                 <text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">1e{k}</text>\n",
                w - pad,
                pad - 6.0,
                y + 4.0
            ));
        }
        for k in 0..=4 {
            let x = x0 + (x1 - x0) * k as f64 / 4.0;
            out.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                sx(x),
                h - pad + 18.0,
                trim(x)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
            w / 2.0,
            h - 16.0,
            escape(&self.x_label),
            h / 2.0,
            h / 2.0,
            escape(&self.y_label)
        ));
        if let Some(f) = &self.fit {
            let ln10 = std::f64::consts::LN_10;
            let (a, b) = (f.x_min.max(x0), f.x_max.min(x1));
            let ya = (f.intercept + f.slope * a) / ln10;
            let yb = (f.intercept + f.slope * b) / ln10;
            out.push_str(&format!(
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-dasharray=\"6 3\"/>\n\
                 <text x=\"{}\" y=\"40\" text-anchor=\"end\" fill=\"#d62728\">decay length {:.4}, R2 {:.5}</text>\n",
                sx(a),
                sy(ya.clamp(y0, y1)),
                sx(b),
                sy(yb.clamp(y0, y1)),
                w - pad,
                f.decay_length,
                f.r2
            ));
        }
        for (x, y) in pts {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"#1f77b4\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn trim(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
