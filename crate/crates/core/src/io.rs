//! Problem files and CSV tables.
//!
//! Problem file format:
//!
//! ```text
//! # comment
//! gamma = 1.0
//! n = 4
//! [fields]
//! 0 = -0.05
//! [couplers]
//! 0,1 = -1
//! ```
//!
//! `n` is optional and defaults to one more than the largest index seen.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::IsingProblem;
use crate::schedule::{PhysicalSchedule, ScheduleSample};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Fields,
    Couplers,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_problem(text: &str) -> Result<IsingProblem> {
    let mut section = Section::Header;
    let mut gamma = 1.0;
    let mut n: Option<usize> = None;
    let mut fields: Vec<(usize, f64)> = Vec::new();
    let mut couplers: Vec<((usize, usize), f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = match line {
                "[fields]" => Section::Fields,
                "[couplers]" => Section::Couplers,
                other => return Err(parse_err(line_no, format!("unknown section {other}"))),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let number = |s: &str| s.parse::<f64>().map_err(|_| parse_err(line_no, format!("bad number `{s}`")));
        let index = |s: &str| s.trim().parse::<usize>().map_err(|_| parse_err(line_no, format!("bad index `{s}`")));
        match section {
            Section::Header => match key {
                "gamma" => gamma = number(value)?,
                "n" => n = Some(index(value)?),
                other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
            },
            Section::Fields => fields.push((index(key)?, number(value)?)),
            Section::Couplers => {
                let (i, j) = key
                    .split_once(',')
                    .ok_or_else(|| parse_err(line_no, "coupler key must be `i,j`"))?;
                couplers.push(((index(i)?, index(j)?), number(value)?));
            }
        }
    }

    let seen = fields
        .iter()
        .map(|f| f.0 + 1)
        .chain(couplers.iter().map(|c| c.0 .0.max(c.0 .1) + 1))
        .max()
        .unwrap_or(0);
    let n = n.unwrap_or(seen);
    if seen > n {
        return Err(Error::Problem(format!("index {} exceeds declared n = {n}", seen - 1)));
    }
    let mut h = vec![0.0; n];
    let mut set = vec![false; n];
    for (i, v) in fields {
        if std::mem::replace(&mut set[i], true) {
            return Err(Error::Problem(format!("field {i} given twice")));
        }
        h[i] = v;
    }
    IsingProblem::new(h, couplers, gamma)
}

pub fn read_problem(path: &Path) -> Result<IsingProblem> {
    parse_problem(&std::fs::read_to_string(path)?)
}

pub fn write_problem<W: Write>(problem: &IsingProblem, mut w: W) -> Result<()> {
    writeln!(w, "gamma = {}", problem.gamma())?;
    writeln!(w, "n = {}", problem.n())?;
    writeln!(w, "[fields]")?;
    for (i, h) in problem.h().iter().enumerate() {
        writeln!(w, "{i} = {h}")?;
    }
    writeln!(w, "[couplers]")?;
    for ((i, j), v) in problem.couplers() {
        writeln!(w, "{i},{j} = {v}")?;
    }
    Ok(())
}

impl std::str::FromStr for IsingProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_problem(s)
    }
}

/// Reads a `s,A_rad_per_ns,B_rad_per_ns` table. Lines starting with `#` are
/// skipped.
pub fn read_physical_schedule<R: Read>(reader: R) -> Result<PhysicalSchedule> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["s", "A_rad_per_ns", "B_rad_per_ns"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(1, format!("expected header `{}`", expected.join(","))));
    }
    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| {
            rec.get(k)
                .and_then(|x| x.parse::<f64>().ok())
                .ok_or_else(|| parse_err(row + 2, format!("bad value in column {}", expected[k])))
        };
        samples.push(ScheduleSample { s: field(0)?, a: field(1)?, b: field(2)? });
    }
    PhysicalSchedule::new(samples)
}

pub fn load_physical_schedule(path: &Path) -> Result<PhysicalSchedule> {
    read_physical_schedule(std::fs::File::open(path)?)
}

/// First line of every CSV written by the tools.
pub fn csv_header_comment(version: &str, config_hash: &str) -> String {
    format!("# bcanneal {version} config={config_hash}")
}
