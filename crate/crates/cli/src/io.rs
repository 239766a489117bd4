//! CSV streams. Raw files have header `t,x1..xd,y`; privatized regression
//! files have `t,w1..wN,z1..zN` after a `# h=..., alpha=..., M=..., seed=...`
//! line; privatized univariate files have `t,z`. Floats are written in
//! shortest round-trip form, so re-reading reproduces them exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use privcusum::privacy::{PrivateObservation, RawObservation};

use crate::error::{CliError, CliResult};

/// Header of a privatized regression file. `seed = None` marks zero noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivatizedMeta {
    pub h: f64,
    pub alpha: f64,
    pub m: f64,
    pub seed: Option<u64>,
}

impl PrivatizedMeta {
    fn line(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!("# h={}, alpha={}, M={}, seed={}", self.h, self.alpha, self.m, seed)
    }

    fn parse(line: &str) -> CliResult<Self> {
        let body = line.trim_start_matches('#');
        let (mut h, mut alpha, mut m, mut seed) = (None, None, None, None);
        for field in body.split(',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| CliError::validation(format!("malformed metadata field {:?}", field.trim())))?;
            let value = value.trim();
            let num =
                || value.parse::<f64>().map_err(|_| CliError::validation(format!("bad metadata value {value:?}")));
            match key.trim() {
                "h" => h = Some(num()?),
                "alpha" => alpha = Some(num()?),
                "M" => m = Some(num()?),
                "seed" => {
                    seed = Some(match value {
                        "none" => None,
                        v => Some(v.parse().map_err(|_| CliError::validation(format!("bad seed {v:?}")))?),
                    })
                }
                other => return Err(CliError::validation(format!("unknown metadata key {other:?}"))),
            }
        }
        match (h, alpha, m, seed) {
            (Some(h), Some(alpha), Some(m), Some(seed)) => Ok(Self { h, alpha, m, seed }),
            _ => Err(CliError::validation("metadata line must set h, alpha, M and seed")),
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::runtime(format!("{}: {e}", path.display())),
        _ => CliError::validation(format!("{}: {e}", path.display())),
    }
}

fn finish<W: Write>(path: &Path, w: csv::Writer<W>) -> CliResult<()> {
    w.into_inner()
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?
        .flush()
        .map_err(|e| CliError::io(path, e))
}

/// Rows of a parsed file, each tagged with its line number.
struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
    comments: Vec<String>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let text = read(path)?;
    let comments = text.lines().filter(|l| l.starts_with('#')).map(str::to_string).collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (expected_t, record) in (1u64..).zip(reader.records()) {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: String| CliError::validation(format!("{} line {line}: {what}", path.display()));
        let mut fields = record.iter();
        let t: u64 =
            fields.next().and_then(|f| f.parse().ok()).ok_or_else(|| bad("t must be a positive integer".into()))?;
        if t != expected_t {
            return Err(bad(format!("expected t = {expected_t}, got {t}")));
        }
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("not a number: {f:?}"))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(Table { header, rows, comments })
}

fn check_header(path: &Path, got: &[String], want: &[String]) -> CliResult<()> {
    if got != want {
        return Err(CliError::validation(format!(
            "{}: header {:?} does not match the expected {:?}",
            path.display(),
            got.join(","),
            want.join(",")
        )));
    }
    Ok(())
}

pub fn raw_header(d: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .chain(std::iter::once("y".to_string()))
        .collect()
}

pub fn privatized_header(n_bins: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=n_bins).map(|i| format!("w{i}")))
        .chain((1..=n_bins).map(|i| format!("z{i}")))
        .collect()
}

/// A raw observation and the line it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub line: u64,
    pub obs: RawObservation,
}

/// Reads `t,x1..xd,y`; `d` is taken from the header.
pub fn read_raw(path: &Path) -> CliResult<(usize, Vec<RawRow>)> {
    let table = read_table(path)?;
    let d = table.header.len().saturating_sub(2);
    check_header(path, &table.header, &raw_header(d))?;
    let rows = table
        .rows
        .into_iter()
        .map(|(line, mut v)| {
            if v.len() != d + 1 {
                return Err(CliError::validation(format!(
                    "{} line {line}: expected {} fields, got {}",
                    path.display(),
                    d + 2,
                    v.len() + 1
                )));
            }
            let y = v.pop().unwrap_or_default();
            Ok(RawRow { line, obs: RawObservation::new(v, y) })
        })
        .collect::<CliResult<_>>()?;
    Ok((d, rows))
}

pub fn write_raw(path: &Path, d: usize, rows: impl IntoIterator<Item = RawObservation>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(raw_header(d)).map_err(|e| csv_err(path, e))?;
    for (i, obs) in rows.into_iter().enumerate() {
        let record = std::iter::once((i + 1).to_string())
            .chain(obs.x.iter().map(f64::to_string))
            .chain(std::iter::once(obs.y.to_string()));
        w.write_record(record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn read_privatized(path: &Path) -> CliResult<(PrivatizedMeta, usize, Vec<PrivateObservation>)> {
    let table = read_table(path)?;
    let meta_line = table.comments.iter().find(|c| c.contains("h=")).ok_or_else(|| {
        CliError::validation(format!("{}: missing '# h=..., alpha=..., M=..., seed=...' line", path.display()))
    })?;
    let meta = PrivatizedMeta::parse(meta_line)?;
    let cols = table.header.len().saturating_sub(1);
    if cols % 2 != 0 {
        return Err(CliError::validation(format!("{}: expected equal numbers of w and z columns", path.display())));
    }
    let n = cols / 2;
    check_header(path, &table.header, &privatized_header(n))?;
    let rows = table
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, (line, mut v))| {
            if v.len() != 2 * n {
                return Err(CliError::validation(format!(
                    "{} line {line}: expected {} fields, got {}",
                    path.display(),
                    2 * n + 1,
                    v.len() + 1
                )));
            }
            let z = v.split_off(n);
            Ok(PrivateObservation { time_index: i as u64 + 1, w: v, z })
        })
        .collect::<CliResult<_>>()?;
    Ok((meta, n, rows))
}

pub fn write_privatized(
    path: &Path,
    meta: &PrivatizedMeta,
    n_bins: usize,
    rows: impl IntoIterator<Item = PrivateObservation>,
) -> CliResult<()> {
    let mut file = create(path)?;
    writeln!(file, "{}", meta.line()).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(privatized_header(n_bins)).map_err(|e| csv_err(path, e))?;
    for obs in rows {
        let record = std::iter::once(obs.time_index.to_string()).chain(obs.w.iter().chain(&obs.z).map(f64::to_string));
        w.write_record(record).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads a univariate stream: header `t,y` (raw) or `t,z` (privatized).
pub fn read_univariate(path: &Path) -> CliResult<Vec<f64>> {
    let table = read_table(path)?;
    let ok = table.header.len() == 2 && table.header[0] == "t" && matches!(table.header[1].as_str(), "y" | "z");
    if !ok {
        return Err(CliError::validation(format!(
            "{}: a univariate stream needs header t,y or t,z, got {:?}",
            path.display(),
            table.header.join(",")
        )));
    }
    table
        .rows
        .into_iter()
        .map(|(line, v)| match v.as_slice() {
            [y] => Ok(*y),
            _ => Err(CliError::validation(format!("{} line {line}: expected 2 fields", path.display()))),
        })
        .collect()
}

pub fn write_univariate(path: &Path, comment: Option<&str>, column: &str, values: &[f64]) -> CliResult<()> {
    let mut file = create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}").map_err(|e| CliError::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["t", column]).map_err(|e| csv_err(path, e))?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Writes a header and numeric rows.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}
