//! On-disk formats: comparison CSV, matrix files, atomic writes, content hashes.

use std::io::Write;
use std::path::Path;

use pairrank::{ComparisonDataset, ComparisonRecord, PreferenceMatrix};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const COMPARISON_HEADER: [&str; 4] = ["user", "item_a", "item_b", "y"];

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Git-style blob hash: sha256 of `"blob <len>\0"` followed by the content.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(pos) => CliError::input(format!("{}: line {}: {e}", path.display(), pos.line())),
        None => CliError::io(path, e),
    }
}

pub fn comparisons_to_bytes(data: &ComparisonDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    {
        let mut w = writer(&mut buf);
        w.write_record(COMPARISON_HEADER).expect("in-memory write");
        for r in data.records() {
            w.write_record([
                r.user.to_string(),
                r.item_a.to_string(),
                r.item_b.to_string(),
                u8::from(r.outcome).to_string(),
            ])
            .expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    buf
}

/// Parses a comparison CSV. Errors name the offending line.
pub fn parse_comparisons(path: &Path, bytes: &[u8]) -> CliResult<Vec<ComparisonRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .from_reader(bytes);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(COMPARISON_HEADER) {
        return Err(CliError::input(format!(
            "{}: line 1: expected header `{}`, got `{}`",
            path.display(),
            COMPARISON_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |msg: String| CliError::input(format!("{}: line {line}: {msg}", path.display()));
        let index = |i: usize| -> CliResult<usize> {
            row[i].parse().map_err(|_| {
                bad(format!(
                    "`{}` is not a valid {} index",
                    &row[i], COMPARISON_HEADER[i]
                ))
            })
        };
        let (user, a, b) = (index(0)?, index(1)?, index(2)?);
        let outcome = match &row[3] {
            "1" => true,
            "0" => false,
            other => return Err(bad(format!("y must be 0 or 1, got `{other}`"))),
        };
        records.push(ComparisonRecord::new(user, a, b, outcome).map_err(|e| bad(e.to_string()))?);
    }
    Ok(records)
}

/// `d1,d2` then one line per row, every entry with 17 significant digits.
pub fn matrix_to_bytes(m: &PreferenceMatrix) -> Vec<u8> {
    let mut out = format!("{},{}\n", m.rows(), m.cols());
    for k in 0..m.rows() {
        let row: Vec<String> = m.row(k).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_matrix(path: &Path, bytes: &[u8]) -> CliResult<PreferenceMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(bytes);
    let mut rows = rdr.records();
    let bad = |line: u64, msg: String| CliError::input(format!("{}: line {line}: {msg}", path.display()));
    let head = rows
        .next()
        .ok_or_else(|| bad(1, "missing `d1,d2` header".into()))?
        .map_err(|e| csv_err(path, e))?;
    let dims: Vec<usize> = head.iter().map_while(|f| f.trim().parse().ok()).collect();
    let (&[d1, d2], 2) = (&dims[..], head.len()) else {
        return Err(bad(1, "header must be `d1,d2` with two positive integers".into()));
    };
    let mut data = Vec::with_capacity(d1 * d2);
    for row in rows {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != d2 {
            return Err(bad(line, format!("expected {d2} entries, got {}", row.len())));
        }
        for field in row.iter() {
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|_| bad(line, format!("`{field}` is not a number")))?,
            );
        }
    }
    if data.len() != d1 * d2 {
        return Err(CliError::input(format!(
            "{}: expected {d1} rows, got {}",
            path.display(),
            data.len() / d2.max(1)
        )));
    }
    Ok(PreferenceMatrix::from_row_major(d1, d2, data)?)
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}
