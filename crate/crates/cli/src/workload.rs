use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use cachelab::catalog::{self, Catalog, Trace};
use cachelab::sim::PolicyKind;

use crate::args::Common;
use crate::Failure;

/// Distribution of generated sizes or values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spread {
    Unit,
    Lognormal { mu: f64, sigma: f64 },
}

pub fn parse_spread(s: &str) -> Result<Spread, Failure> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("unit") {
        return Ok(Spread::Unit);
    }
    let params = s
        .strip_prefix("lognormal:")
        .ok_or_else(|| Failure::usage(format!("expected `unit` or `lognormal:MU,SIGMA`, got {s:?}")))?;
    let (mu, sigma) = params
        .split_once(',')
        .ok_or_else(|| Failure::usage(format!("lognormal needs MU,SIGMA, got {params:?}")))?;
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| Failure::usage(format!("{x:?} is not a number")))
    };
    Ok(Spread::Lognormal {
        mu: num(mu)?,
        sigma: num(sigma)?,
    })
}

/// Capacity list: explicit values or a `log`/`lin` grid of `K` points.
/// Returned sorted ascending without duplicates.
pub fn parse_capacities(s: &str) -> Result<Vec<u64>, Failure> {
    let s = s.trim();
    let int = |x: &str| {
        x.trim()
            .parse::<u64>()
            .map_err(|_| Failure::usage(format!("capacity {x:?} is not a non-negative integer")))
    };
    let mut caps: Vec<u64> = if let Some((kind, rest)) = s.split_once(':') {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Failure::usage(format!("grid {s:?} must look like {kind}:LO:HI:K")));
        }
        let (lo, hi, k) = (int(parts[0])?, int(parts[1])?, int(parts[2])? as usize);
        if lo > hi || k == 0 || (kind == "log" && lo == 0) {
            return Err(Failure::usage(format!("grid {s:?} is empty or invalid")));
        }
        let step = |i: usize| if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
        match kind {
            "lin" => (0..k)
                .map(|i| (lo as f64 + step(i) * (hi - lo) as f64).round() as u64)
                .collect(),
            "log" => {
                let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
                (0..k).map(|i| (a + step(i) * (b - a)).exp().round() as u64).collect()
            }
            _ => return Err(Failure::usage(format!("unknown grid kind {kind:?}, use log or lin"))),
        }
    } else {
        s.split(',').map(int).collect::<Result<_, _>>()?
    };
    caps.sort_unstable();
    caps.dedup();
    if caps.is_empty() {
        return Err(Failure::usage("capacity grid is empty"));
    }
    Ok(caps)
}

pub fn parse_policies(list: Option<&str>, default: &str) -> Result<Vec<PolicyKind>, Failure> {
    list.unwrap_or(default)
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse().map_err(|e| Failure::usage(format!("{e}"))))
        .collect()
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Failure::usage(format!("{what} {x:?} cannot be parsed")))
        })
        .collect()
}

fn spread_values(spread: Spread, n: usize, seed: u64) -> Result<Vec<f64>, Failure> {
    Ok(match spread {
        Spread::Unit => vec![1.0; n],
        Spread::Lognormal { mu, sigma } => catalog::lognormal_values(n, mu, sigma, seed)?,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Catalog from `--instance`, or a Zipf catalog of `--catalog` objects.
/// Generated sizes and values use `seed` and `seed + 1`.
pub fn build_catalog(c: &Common) -> Result<Catalog, Failure> {
    if let Some(path) = &c.instance {
        return catalog::load_catalog(open(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())));
    }
    let n = c.objects;
    let pmf = catalog::zipf_pmf(n, c.zipf).map_err(Failure::from_usage)?;
    let sizes = match parse_spread(&c.sizes)? {
        Spread::Unit => vec![1; n],
        Spread::Lognormal { mu, sigma } => catalog::lognormal_sizes(n, mu, sigma, c.seed)?,
    };
    let values = spread_values(parse_spread(&c.values)?, n, c.seed.wrapping_add(1))?;
    Ok(Catalog::from_parts(&pmf, &sizes, &values)?)
}

/// Where the requests of an experiment come from.
pub enum Source {
    File(Trace),
    Generated(Catalog),
}

impl Source {
    pub fn new(c: &Common) -> Result<Self, Failure> {
        match &c.trace {
            Some(path) => {
                let reader = open(path)?;
                let trace = match &c.instance {
                    Some(_) => catalog::load_trace_with_catalog(reader, &build_catalog(c)?),
                    None => catalog::load_trace(reader),
                }
                .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
                Ok(Source::File(trace))
            }
            None => Ok(Source::Generated(build_catalog(c)?)),
        }
    }

    /// The trace of one replication: the file itself, or an IRM trace
    /// drawn with `seed`.
    pub fn trace(&self, requests: usize, seed: u64) -> Result<Trace, Failure> {
        match self {
            Source::File(t) => Ok(t.clone()),
            Source::Generated(cat) => Ok(catalog::generate_irm_trace(cat, requests, seed)?),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        match self {
            Source::File(t) => t.catalog(),
            Source::Generated(c) => c,
        }
    }

    pub fn is_generated(&self) -> bool {
        matches!(self, Source::Generated(_))
    }
}

pub fn is_unit(catalog: &Catalog) -> bool {
    catalog.entries().iter().all(|e| e.size == 1)
}
