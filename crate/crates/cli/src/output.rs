//! File emission. Floats use Rust's shortest round-trip formatting, so a
//! value read back from CSV or JSON is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::Failure;

pub struct OutDir {
    dir: PathBuf,
    gnuplot: bool,
}

impl OutDir {
    pub fn create(dir: &Path, gnuplot: bool) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            gnuplot,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// Pretty JSON with a trailing newline; also returned for echoing on stdout.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::check(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)?;
        Ok(text)
    }

    pub fn csv(&self, name: &str, table: &Table) -> Result<(), Failure> {
        self.write(name, &table.render())?;
        Ok(())
    }

    /// Companion gnuplot script when `--gnuplot-script` was given.
    pub fn plot(&self, name: &str, script: impl FnOnce() -> String) -> Result<(), Failure> {
        if self.gnuplot {
            self.write(name, &script())?;
        }
        Ok(())
    }
}

/// Numeric table with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                if v.is_finite() {
                    write!(s, "{v:?}").unwrap();
                } else {
                    // NaN and infinities keep their spelling; readers map them back.
                    write!(s, "{v}").unwrap();
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Script plotting columns `ys` against column 1 of `csv`.
pub fn gnuplot_lines(csv: &str, title: &str, xlabel: &str, ys: &[(usize, &str)], logx: bool, logy: bool) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset key autotitle columnhead\n");
    writeln!(s, "set title '{title}'\nset xlabel '{xlabel}'").unwrap();
    if logx {
        s.push_str("set logscale x\n");
    }
    if logy {
        s.push_str("set logscale y\n");
    }
    let plots: Vec<String> = ys
        .iter()
        .map(|(col, label)| format!("'{csv}' using 1:{col} with lines title '{label}'"))
        .collect();
    writeln!(s, "plot {}", plots.join(", \\\n     ")).unwrap();
    s
}
