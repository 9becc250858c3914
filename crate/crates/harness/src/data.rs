//! Dataset synthesis and CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;

use d2p2_core::rng::{keyed_stream, Purpose};
use d2p2_core::Dataset;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{HarnessError, Result};

/// Two unit-variance Gaussian blobs centred at `+-(separation/2) u` for a
/// random unit direction `u`. Labels alternate 0/1 so every even-length
/// prefix is balanced.
pub fn generate_synthetic(n: usize, d_feat: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(HarnessError::Spec(format!("synthetic sample count must be even and >= 2, got {n}")));
    }
    if d_feat == 0 {
        return Err(HarnessError::Spec("synthetic feature width must be positive".into()));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(HarnessError::Spec(format!("separation must be nonnegative, got {separation}")));
    }
    let mut rng = keyed_stream(seed, Purpose::Data, 0);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut u: Vec<f64> = (0..d_feat).map(|_| gauss()).collect();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= norm);

    let half = separation / 2.0;
    let mut features = Vec::with_capacity(n * d_feat);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as f64;
        let sign = if label == 1.0 { 1.0 } else { -1.0 };
        features.extend(u.iter().map(|ui| sign * half * ui + gauss()));
        labels.push(label);
    }
    Ok(Dataset::new(features, d_feat, labels, Some(2))?)
}

/// Reads a CSV file with a header row and one column named `label`.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_csv(file, &path.display().to_string())
}

pub fn parse_csv<R: Read>(reader: R, source_name: &str) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| HarnessError::Parse { source_name: source_name.to_string(), line, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse_err(1, "no data rows".into()));
    }
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| parse_err(1, "missing 'label' column in header".into()))?;

    let width = headers.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("ragged row: expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            parse_err(line, message)
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric value '{cell}' in column '{}'", &headers[col])))?;
            if col == label_col {
                labels.push(value);
            } else {
                features.push(value);
            }
        }
    }
    if labels.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    let num_classes = infer_classes(&labels);
    Ok(Dataset::new(features, width, labels, num_classes)?)
}

/// Nonnegative integer labels are treated as class indices.
fn infer_classes(labels: &[f64]) -> Option<usize> {
    if labels.iter().all(|&l| l >= 0.0 && l.fract() == 0.0 && l < 1e6) {
        let max = labels.iter().copied().fold(0.0, f64::max) as usize;
        Some((max + 1).max(2))
    } else {
        None
    }
}

/// Writes `f0..f{w-1},label` with shortest round-trip float formatting.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut text = String::new();
    for j in 0..data.width() {
        text.push_str(&format!("f{j},"));
    }
    text.push_str("label\n");
    for i in 0..data.len() {
        for v in data.row(i) {
            text.push_str(&format!("{v},"));
        }
        text.push_str(&format!("{}\n", data.label(i)));
    }
    out.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

/// Deterministically shuffles and splits off the trailing `test_fraction` of rows.
pub fn split_train_test(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(HarnessError::Spec(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n = data.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    if n < 2 {
        return Err(HarnessError::Spec("need at least two rows to split".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut keyed_stream(seed, Purpose::Shuffle, u64::MAX));
    let (train, test) = order.split_at(n - n_test);
    Ok((data.select(train)?, data.select(test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic_and_balanced() {
        let a = generate_synthetic(100, 5, 2.0, 3).unwrap();
        let b = generate_synthetic(100, 5, 2.0, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(100, 5, 2.0, 4).unwrap());
        assert_eq!(a.labels().iter().filter(|&&l| l == 1.0).count(), 50);
        assert!(generate_synthetic(3, 5, 2.0, 0).is_err());
    }

    #[test]
    fn parses_small_file() {
        let ds = parse_csv("a,b,label\n1,2,0\n3,4,1\n5,6.5,1\n".as_bytes(), "mem").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.width(), 2);
        assert_eq!(ds.row(2), &[5.0, 6.5]);
        assert_eq!(ds.num_classes(), Some(2));
    }

    #[test]
    fn label_column_anywhere() {
        let ds = parse_csv("label,x\n1.5,2\n".as_bytes(), "mem").unwrap();
        assert_eq!(ds.row(0), &[2.0]);
        assert_eq!(ds.label(0), 1.5);
        assert_eq!(ds.num_classes(), None);
    }

    #[test]
    fn parse_errors() {
        let msg = |text: &str| parse_csv(text.as_bytes(), "mem").unwrap_err().to_string();
        assert!(msg("").contains("no data rows"));
        assert!(msg("a,label\n").contains("no data rows"));
        assert!(msg("a,b\n1,2\n").contains("missing 'label'"));
        let ragged = msg("a,label\n1,0\n2,1,3\n");
        assert!(ragged.contains("ragged") && ragged.contains(":3:"), "{ragged}");
        let bad = msg("a,label\n1,0\nx,1\n");
        assert!(bad.contains("non-numeric") && bad.contains(":3:"), "{bad}");
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = generate_synthetic(50, 2, 1.0, 0).unwrap();
        let (tr, te) = split_train_test(&ds, 0.2, 9).unwrap();
        assert_eq!((tr.len(), te.len()), (40, 10));
        assert_eq!(split_train_test(&ds, 0.2, 9).unwrap(), (tr, te));
    }
}
