use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::args::{Cli, Format};

pub const STATUS_OK: &str = "ok";

/// One measurement in long format.
///
/// `param` holds a swept quantity other than the capacity, such as the TTL.
/// `stderr` is set exactly for statistical estimates. Skipped cells carry
/// no value and a `skipped: ...` status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub name: String,
    pub capacity: Option<u64>,
    pub param: Option<f64>,
    pub metric: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub seed: u64,
    pub replication: usize,
    pub runtime: f64,
    pub status: String,
}

impl Row {
    pub fn is_skipped(&self) -> bool {
        self.status != STATUS_OK
    }
}

pub fn write_rows(rows: &[Row], format: Format, out: Option<&Path>) -> io::Result<()> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()
        }
        Format::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, rows)?;
            writeln!(sink)?;
            sink.flush()
        }
    }
}

#[cfg(test)]
pub fn read_rows<R: std::io::Read>(reader: R, format: Format) -> io::Result<Vec<Row>> {
    match format {
        Format::Csv => csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(io::Error::other),
        Format::Json => Ok(serde_json::from_reader(reader)?),
    }
}

/// Everything needed to rerun an experiment and get the same statistical
/// rows from the same build.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub profile: &'static str,
    pub argv: Vec<String>,
    pub config: &'a Cli,
    pub seeds: Vec<u64>,
    pub rows: usize,
    pub skipped: usize,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a Cli, seeds: Vec<u64>, rows: &[Row]) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            profile: if cfg!(debug_assertions) { "debug" } else { "release" },
            argv: std::env::args().collect(),
            config,
            seeds,
            rows: rows.len(),
            skipped: rows.iter().filter(|r| r.is_skipped()).count(),
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        f.flush()
    }
}

pub fn manifest_path(out: Option<&Path>, explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    out.map(|o| {
        let mut s = o.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    })
}
