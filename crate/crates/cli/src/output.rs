//! Artifact writing and the printed summary table.

use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub stage: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

impl Row {
    pub fn new(stage: impl Into<String>, max_residual: f64, tolerance: f64, verdict: bool) -> Self {
        Row {
            stage: stage.into(),
            max_residual,
            tolerance,
            verdict,
        }
    }
}

/// Collects written files and summary rows for one command.
pub struct Sink {
    dir: PathBuf,
    prefix: String,
    pub rows: Vec<Row>,
    pub files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, prefix: &str) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            rows: Vec::new(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, suffix: &str) -> PathBuf {
        let name = format!("{}-{suffix}", self.prefix);
        self.files.push(name.clone());
        self.dir.join(name)
    }

    pub fn json<S: Serialize>(&mut self, suffix: &str, value: &S) -> io::Result<()> {
        let path = self.path(suffix);
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }

    pub fn csv<F>(&mut self, suffix: &str, write: F) -> io::Result<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
    {
        let path = self.path(suffix);
        let mut w = BufWriter::new(fs::File::create(path)?);
        write(&mut w)?;
        io::Write::flush(&mut w)
    }

    pub fn row(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn verdict(&self) -> bool {
        self.rows.iter().all(|r| r.verdict)
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "-".to_string()
    } else {
        format!("{x:.3e}")
    }
}

pub fn print_table(title: &str, rows: &[Row]) {
    let width = rows.iter().map(|r| r.stage.len()).max().unwrap_or(5).max(5);
    println!("{title}");
    println!("  {:<width$}  {:>10}  {:>10}  verdict", "stage", "residual", "tolerance");
    for r in rows {
        println!(
            "  {:<width$}  {:>10}  {:>10}  {}",
            r.stage,
            fmt_num(r.max_residual),
            fmt_num(r.tolerance),
            if r.verdict { "PASS" } else { "FAIL" }
        );
    }
}
