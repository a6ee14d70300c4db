mod args;
mod commands;
mod output;
mod workload;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::{manifest_path, write_rows, Manifest, Row};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// A failure that ends the run, with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    /// Library errors raised by bad flag values rather than bad files.
    pub fn from_usage(e: cachelab::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<cachelab::Error> for Failure {
    fn from(e: cachelab::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let common = cli.command.common();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build()
        .map_err(|e| Failure::usage(e.to_string()))?;
    let seeds: Vec<u64> = (0..common.reps.max(1) as u64)
        .map(|r| common.seed.wrapping_add(r))
        .collect();
    let manifest = manifest_path(common.out.as_deref(), common.manifest.as_deref());

    if let Command::Gen(a) = &cli.command {
        let trace = pool.install(|| commands::gen(a))?;
        match &common.out {
            Some(p) => cachelab::catalog::save_trace(&trace, BufWriter::new(File::create(p)?))?,
            None => {
                let mut out = io::stdout().lock();
                cachelab::catalog::save_trace(&trace, &mut out)?;
                out.flush()?;
            }
        }
        if let Some(p) = &a.catalog_out {
            cachelab::catalog::save_catalog(trace.catalog(), BufWriter::new(File::create(p)?))?;
        }
        if let Some(m) = manifest {
            Manifest::new(cli, vec![common.seed], &[]).write(&m)?;
        }
        return Ok(0);
    }

    let rows: Vec<Row> = pool.install(|| match &cli.command {
        Command::Sim(c) => commands::sim(c),
        Command::Sweep(c) => commands::sweep(c),
        Command::Exact(a) => commands::exact(a),
        Command::Approx(a) => commands::approx(a),
        Command::Bounds(a) => commands::bounds(a),
        Command::Ttl(a) => commands::ttl(a),
        Command::Bench(c) => commands::bench(c),
        Command::Gen(_) => unreachable!("handled above"),
    })?;
    write_rows(&rows, common.format, common.out.as_deref())?;
    if let Some(m) = manifest {
        Manifest::new(cli, seeds, &rows).write(&m)?;
    }
    let skipped = rows.iter().filter(|r| r.is_skipped()).count();
    if skipped > 0 {
        eprintln!("{skipped} of {} rows skipped", rows.len());
        return Ok(EXIT_PARTIAL);
    }
    Ok(0)
}
