//! CSV and JSON files. Every write goes to a temporary file in the target
//! directory and is renamed into place.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{GroupId, ImpressionRecord};
use crate::scalar::Scalar;
use crate::simulate::{SimulatedItem, Truth};

pub const LOG_HEADER: [&str; 6] = ["query_id", "item_id", "group", "score", "position", "label"];

/// Writes through `fill` into a temporary sibling of `path`, then renames.
pub fn atomic_write<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    atomic_write(path, |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn check_header(reader: &mut csv::Reader<BufReader<File>>, expected: &[&str], path: &Path) -> Result<()> {
    let header = reader.headers()?;
    let ok = header.len() >= expected.len() && expected.iter().zip(header.iter()).all(|(a, b)| *a == b);
    if !ok {
        return Err(Error::Parse(format!(
            "{}: expected columns {} but found {}",
            path.display(),
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Reads an impression log; extra trailing columns are ignored.
pub fn read_log<T: Scalar>(path: &Path) -> Result<Vec<ImpressionRecord<T>>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    check_header(&mut reader, &LOG_HEADER, path)?;
    let mut out = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let parse_err = |what: &str| Error::Parse(format!("{}: row {}: bad {what}", path.display(), line + 2));
        let score: f64 = field(3).trim().parse().map_err(|_| parse_err("score"))?;
        out.push(ImpressionRecord {
            query_id: field(0).trim().parse().map_err(|_| parse_err("query_id"))?,
            item_id: field(1).trim().parse().map_err(|_| parse_err("item_id"))?,
            group: GroupId(field(2).trim().parse().map_err(|_| parse_err("group"))?),
            score: T::of(score),
            position: field(4).trim().parse().map_err(|_| parse_err("position"))?,
            label: field(5).trim().parse().map_err(|_| parse_err("label"))?,
        });
    }
    Ok(out)
}

/// Reads one named numeric column of a log-shaped CSV.
pub fn read_column<T: Scalar>(path: &Path, column: &str) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let idx = reader
        .headers()?
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| Error::Parse(format!("{}: no column {column}", path.display())))?;
    reader
        .records()
        .enumerate()
        .map(|(line, row)| {
            let row = row?;
            let v: f64 = row
                .get(idx)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: row {}: bad {column}", path.display(), line + 2)))?;
            Ok(T::of(v))
        })
        .collect()
}

pub fn has_column(path: &Path, column: &str) -> Result<bool> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    Ok(reader.headers()?.iter().any(|h| h == column))
}

fn log_fields<T: Scalar>(r: &ImpressionRecord<T>) -> [String; 6] {
    [
        r.query_id.to_string(),
        r.item_id.to_string(),
        r.group.0.to_string(),
        r.score.to_string(),
        r.position.to_string(),
        r.label.to_string(),
    ]
}

pub fn write_log<T: Scalar>(path: &Path, records: &[ImpressionRecord<T>]) -> Result<()> {
    atomic_write(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(LOG_HEADER)?;
        for r in records {
            out.write_record(log_fields(r))?;
        }
        out.flush()?;
        Ok(())
    })
}

/// Writes a log with one extra column appended.
pub fn write_log_with_column<T: Scalar>(
    path: &Path,
    records: &[ImpressionRecord<T>],
    name: &str,
    values: &[T],
) -> Result<()> {
    if values.len() != records.len() {
        return Err(Error::DimensionMismatch(format!("{} values for {} records", values.len(), records.len())));
    }
    atomic_write(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = LOG_HEADER.to_vec();
        header.push(name);
        out.write_record(&header)?;
        for (r, v) in records.iter().zip(values) {
            let fields = log_fields(r);
            out.write_record(fields.iter().map(String::as_str).chain(std::iter::once(v.to_string().as_str())))?;
        }
        out.flush()?;
        Ok(())
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct TruthRow {
    item_id: u64,
    group: u32,
    y1: u8,
    relevance: f64,
}

pub fn write_truth<T: Scalar>(path: &Path, truth: &Truth<T>) -> Result<()> {
    atomic_write(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for item in truth.values() {
            out.serialize(TruthRow {
                item_id: item.item_id,
                group: item.group.0,
                y1: item.counterfactual_label,
                relevance: item.relevance.as_f64(),
            })?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn read_truth<T: Scalar>(path: &Path) -> Result<Truth<T>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    check_header(&mut reader, &["item_id", "group", "y1", "relevance"], path)?;
    let mut truth = Truth::new();
    for row in reader.deserialize() {
        let row: TruthRow = row?;
        truth.insert(
            row.item_id,
            SimulatedItem {
                item_id: row.item_id,
                group: GroupId(row.group),
                counterfactual_label: row.y1,
                relevance: T::of(row.relevance),
            },
        );
    }
    Ok(truth)
}

/// Writes rows of displayable fields under `header`.
pub fn write_table<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    atomic_write(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for row in rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    })
}
