//! EMB1 bundles and CSV import.
//!
//! Bundle layout, little-endian throughout:
//!
//! | bytes          | content                                   |
//! |----------------|-------------------------------------------|
//! | 4              | magic `EMB1`                              |
//! | 4 × u32        | `N`, `K`, `d`, `C` (`C = 0`: unlabeled)   |
//! | `N·K·d` × f32  | coordinates, sample-major, then view      |
//! | `N` × i32      | labels, present iff `C > 0`               |
//!
//! Coordinates are stored as f32; saving rounds, loading widens exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array3;

use super::EmbeddingSet;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EMB1";
const HEADER_LEN: usize = 20;

pub fn write_bundle<W: Write>(set: &EmbeddingSet, mut w: W) -> Result<()> {
    let to_u32 = |x: usize, what: &str| {
        u32::try_from(x).map_err(|_| Error::InvalidShape(format!("{what}={x} exceeds u32")))
    };
    w.write_all(&MAGIC)?;
    w.write_all(&to_u32(set.n_samples(), "N")?.to_le_bytes())?;
    w.write_all(&to_u32(set.n_augs(), "K")?.to_le_bytes())?;
    w.write_all(&to_u32(set.dim(), "d")?.to_le_bytes())?;
    w.write_all(&to_u32(set.n_classes().unwrap_or(0), "C")?.to_le_bytes())?;
    let mut buf = Vec::with_capacity(set.data().len() * 4);
    for &x in set.data().iter() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    if let Some(labels) = set.labels() {
        for &y in labels {
            let y = i32::try_from(y)
                .map_err(|_| Error::InvalidShape(format!("label {y} exceeds i32")))?;
            w.write_all(&y.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_bundle<R: Read>(mut r: R) -> Result<EmbeddingSet> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save_bundle(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_bundle(set, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    decode(&fs::read(path)?)
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

fn decode(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            found: bytes[..4].try_into().unwrap(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let (n, k, d, c) = (
        u32_at(bytes, 4),
        u32_at(bytes, 8),
        u32_at(bytes, 12),
        u32_at(bytes, 16),
    );
    let count = n
        .checked_mul(k)
        .and_then(|x| x.checked_mul(d))
        .ok_or_else(|| Error::InvalidShape("header dimensions overflow".into()))?;
    let data_end = HEADER_LEN + 4 * count;
    if bytes.len() < data_end {
        return Err(Error::Truncated {
            expected: data_end,
            found: bytes.len(),
        });
    }
    let values = bytes[HEADER_LEN..data_end]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect::<Vec<_>>();
    let data = Array3::from_shape_vec((n, k, d), values)
        .map_err(|e| Error::InvalidShape(e.to_string()))?;

    let rest = &bytes[data_end..];
    let expected = if c > 0 { 4 * n } else { 0 };
    if rest.len() != expected {
        return Err(Error::LabelCountMismatch {
            expected,
            found: rest.len(),
        });
    }
    if c == 0 {
        return EmbeddingSet::new(data);
    }
    let mut labels = Vec::with_capacity(n);
    for (i, b) in rest.chunks_exact(4).enumerate() {
        let y = i32::from_le_bytes(b.try_into().unwrap());
        if y < 0 || y as usize >= c {
            return Err(Error::InvalidLabel {
                sample: i,
                label: i64::from(y),
                n_classes: c,
            });
        }
        labels.push(y as usize);
    }
    EmbeddingSet::with_labels(data, labels, c)
}

/// Reads one row per `(sample, view)`: `sample_id, aug_id, label_or_blank, x_1..x_d`.
///
/// A header row is skipped when its first field is not an integer. Labels are
/// either blank everywhere or present and consistent on every row; `C` is the
/// largest label plus one.
pub fn read_csv<R: Read>(r: R) -> Result<EmbeddingSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows: Vec<(usize, usize, Option<usize>, Vec<f64>)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if line == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() < 4 {
            return Err(Error::Csv(format!(
                "row {line}: expected sample_id, aug_id, label and at least one coordinate"
            )));
        }
        let int = |f: &str, what: &str| {
            f.parse::<usize>()
                .map_err(|_| Error::Csv(format!("row {line}: bad {what} {f:?}")))
        };
        let sample = int(&rec[0], "sample_id")?;
        let aug = int(&rec[1], "aug_id")?;
        let label = if rec[2].is_empty() {
            None
        } else {
            Some(int(&rec[2], "label")?)
        };
        let coords = rec
            .iter()
            .skip(3)
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Csv(format!("row {line}: bad coordinate {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((sample, aug, label, coords));
    }
    if rows.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let k = rows.iter().map(|r| r.1).max().unwrap() + 1;
    let d = rows[0].3.len();
    if rows.len() != n * k {
        return Err(Error::Csv(format!(
            "{} rows, expected N·K = {n}·{k}",
            rows.len()
        )));
    }
    let mut data = Array3::<f64>::zeros((n, k, d));
    let mut seen = vec![false; n * k];
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let labeled = rows[0].2.is_some();
    for (sample, aug, label, coords) in rows {
        if coords.len() != d {
            return Err(Error::Csv(format!(
                "sample {sample} view {aug}: {} coordinates, expected {d}",
                coords.len()
            )));
        }
        if std::mem::replace(&mut seen[sample * k + aug], true) {
            return Err(Error::Csv(format!("duplicate row ({sample}, {aug})")));
        }
        if label.is_some() != labeled {
            return Err(Error::Csv("labels must be all blank or all present".into()));
        }
        if let Some(y) = label {
            match labels[sample] {
                Some(prev) if prev != y => {
                    return Err(Error::Csv(format!(
                        "sample {sample} carries labels {prev} and {y}"
                    )))
                }
                _ => labels[sample] = Some(y),
            }
        }
        for (t, x) in coords.into_iter().enumerate() {
            data[[sample, aug, t]] = x;
        }
    }
    if !labeled {
        return EmbeddingSet::new(data);
    }
    let labels: Vec<usize> = labels.into_iter().map(|y| y.unwrap()).collect();
    let c = labels.iter().copied().max().unwrap() + 1;
    EmbeddingSet::with_labels(data, labels, c)
}

/// Writes the layout accepted by [`read_csv`], with a header row.
pub fn write_csv<W: Write>(set: &EmbeddingSet, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["sample_id".to_string(), "aug_id".into(), "label".into()];
    header.extend((0..set.dim()).map(|t| format!("x{t}")));
    wtr.write_record(&header)?;
    for i in 0..set.n_samples() {
        for l in 0..set.n_augs() {
            let mut rec = vec![
                i.to_string(),
                l.to_string(),
                set.labels().map_or(String::new(), |y| y[i].to_string()),
            ];
            rec.extend((0..set.dim()).map(|t| format!("{:?}", set.data()[[i, l, t]])));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
