//! Output directory bookkeeping, CSV/JSON writers and the run manifest.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use pppks::ExperimentRow;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the exact bytes of `resolved_config.json`.
    pub config_digest: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

/// An output directory that remembers which files it wrote.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
    started_at: String,
    digest: Option<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
            started_at: now(),
            digest: None,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let bytes = to_json_bytes(value)?;
        self.write_bytes(name, &bytes)
    }

    /// Writes the resolved configuration and records its digest for the manifest.
    pub fn write_resolved_config<T: Serialize>(&mut self, value: &T) -> CliResult<()> {
        let bytes = to_json_bytes(value)?;
        self.digest = Some(sha256_hex(&bytes));
        self.write_bytes(RESOLVED_CONFIG, &bytes)
    }

    pub fn csv_writer(&mut self, name: &str) -> CliResult<csv::Writer<File>> {
        let path = self.path(name);
        csv::Writer::from_path(&path)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn write_rows<'a, I>(&mut self, name: &str, rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = &'a ExperimentRow>,
    {
        let mut w = self.csv_writer(name)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn finish(mut self, command: &str) -> CliResult<()> {
        let config_digest = self
            .digest
            .take()
            .ok_or_else(|| CliError::Io("resolved config was never written".into()))?;
        let manifest = RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest,
            started_at: self.started_at.clone(),
            finished_at: now(),
            outputs: self.written.clone(),
        };
        let bytes = to_json_bytes(&manifest)?;
        let path = self.root.join(MANIFEST);
        let mut f = File::create(&path)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        f.write_all(&bytes)?;
        Ok(())
    }
}

const BINS: usize = 20;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG histogram of p-values with 20 equal bins on [0, 1] and
/// a dashed line at the uniform expectation.
pub fn histogram_svg(title: &str, values: &[f64]) -> String {
    let mut counts = [0usize; BINS];
    for &v in values.iter().filter(|v| (0.0..=1.0).contains(*v)) {
        counts[((v * BINS as f64) as usize).min(BINS - 1)] += 1;
    }
    let (w, h, left, bottom, top) = (480.0, 300.0, 50.0, 40.0, 30.0);
    let plot_w = w - left - 20.0;
    let plot_h = h - bottom - top;
    let expected = values.len() as f64 / BINS as f64;
    let peak = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let y_max = peak.max(expected) * 1.1;
    let bar_w = plot_w / BINS as f64;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    for (i, &c) in counts.iter().enumerate() {
        let bh = c as f64 / y_max * plot_h;
        s.push_str(&format!(
            "<rect class=\"bin\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#4a7ab5\" stroke=\"#ffffff\"><title>[{:.2}, {:.2}): {c}</title></rect>\n",
            left + i as f64 * bar_w,
            top + plot_h - bh,
            bar_w,
            bh,
            i as f64 / BINS as f64,
            (i + 1) as f64 / BINS as f64,
        ));
    }
    let ey = top + plot_h - expected / y_max * plot_h;
    s.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{ey:.2}\" x2=\"{:.2}\" y2=\"{ey:.2}\" stroke=\"#c0392b\" stroke-dasharray=\"4 3\"/>\n",
        left + plot_w
    ));
    let axis_y = top + plot_h;
    s.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{axis_y}\" x2=\"{:.2}\" y2=\"{axis_y}\" stroke=\"#000000\"/>\n",
        left + plot_w
    ));
    s.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{axis_y}\" stroke=\"#000000\"/>\n"
    ));
    for tick in 0..=4 {
        let x = left + plot_w * tick as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{:.2}</text>\n",
            axis_y + 15.0,
            tick as f64 / 4.0
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        left - 4.0,
        top + 4.0,
        (y_max.floor()) as usize
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">ppp (n = {})</text>\n",
        left + plot_w / 2.0,
        h - 6.0,
        values.len()
    ));
    s.push_str("</svg>\n");
    s
}
